"""Training side of the occupancy predictor.

Talks to the exploration engine only through its file formats: trinary
occupancy blocks ("SEERBLK1") in, network weights ("SEERNET1") out.
"""
