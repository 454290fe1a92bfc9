import shutil
import subprocess

import pytest


@pytest.fixture(scope="session")
def pairs_dir(tmp_path_factory):
    """Block pairs produced by the exploration engine's CLI (the only
    interface the trainer shares with it)."""
    exe = shutil.which("exploresim")
    if exe is None:
        pytest.skip("exploresim CLI not installed")
    out = tmp_path_factory.mktemp("tdata")
    subprocess.run([exe, "train-data", "--seed", "31", "--repeats", "60",
                    "--out", str(out)], check=True)
    return out / "pairs"
