"""Numba kernels for the hot loops: ray traversal, scan integration,
gain ray-casting, and grid Dijkstra.

All kernels work in grid coordinates (world coords divided by resolution,
relative to the map origin) on int8 trinary arrays {-1 unknown, 0 free,
1 occupied}.
"""

from __future__ import annotations

import numpy as np
from numba import njit

INF = 1e30


@njit(cache=True)
def ray_voxels(gx0, gy0, gz0, gx1, gy1, gz1, nx, ny, nz, out):
    """Amanatides-Woo walk from grid point (gx0,..) toward (gx1,..).

    Fills `out` (N,3 int32) with each voxel crossed, in order, starting at
    the voxel containing the start point.  Stops after the voxel containing
    the end point, or on leaving the grid.  Returns the voxel count.
    """
    ix = int(np.floor(gx0))
    iy = int(np.floor(gy0))
    iz = int(np.floor(gz0))
    ex = int(np.floor(gx1))
    ey = int(np.floor(gy1))
    ez = int(np.floor(gz1))
    dx = gx1 - gx0
    dy = gy1 - gy0
    dz = gz1 - gz0

    stepx = 1 if dx > 0.0 else (-1 if dx < 0.0 else 0)
    stepy = 1 if dy > 0.0 else (-1 if dy < 0.0 else 0)
    stepz = 1 if dz > 0.0 else (-1 if dz < 0.0 else 0)

    tmaxx = ((ix + (1 if stepx > 0 else 0)) - gx0) / dx if stepx != 0 else INF
    tmaxy = ((iy + (1 if stepy > 0 else 0)) - gy0) / dy if stepy != 0 else INF
    tmaxz = ((iz + (1 if stepz > 0 else 0)) - gz0) / dz if stepz != 0 else INF
    tdx = stepx / dx if stepx != 0 else INF
    tdy = stepy / dy if stepy != 0 else INF
    tdz = stepz / dz if stepz != 0 else INF

    n = 0
    max_steps = nx + ny + nz + 3
    for _ in range(max_steps):
        if ix < 0 or ix >= nx or iy < 0 or iy >= ny or iz < 0 or iz >= nz:
            break
        out[n, 0] = ix
        out[n, 1] = iy
        out[n, 2] = iz
        n += 1
        if ix == ex and iy == ey and iz == ez:
            break
        # Past the segment end without index equality: numerical guard.
        if tmaxx > 1.0 and tmaxy > 1.0 and tmaxz > 1.0:
            break
        if tmaxx < tmaxy:
            if tmaxx < tmaxz:
                ix += stepx
                tmaxx += tdx
            else:
                iz += stepz
                tmaxz += tdz
        else:
            if tmaxy < tmaxz:
                iy += stepy
                tmaxy += tdy
            else:
                iz += stepz
                tmaxz += tdz
    return n


@njit(cache=True)
def integrate_rays(logodds, trin, mark, gx0, gy0, gz0, gex, gey, gez, hit,
                   hit_lo, miss_lo, clamp_lo, clamp_hi, occ_t, free_t):
    """Integrate a batch of rays from a common start point.

    mark is an int8 scratch array (zeroed by the caller): 1 = miss update,
    2 = hit update (hit wins on overlap within one scan).  Applies the
    log-odds increments once per touched voxel, clamps strictly inside
    (clamp_lo, clamp_hi), refreshes the trinary cache, and returns the
    inclusive bbox [x0,y0,z0,x1,y1,z1] of voxels whose log-odds changed
    (x0 = -1 when nothing changed).
    """
    nx, ny, nz = logodds.shape
    t0 = nx
    t1 = -1
    u0 = ny
    u1 = -1
    v0 = nz
    v1 = -1
    eps = 1e-6

    for r in range(gex.shape[0]):
        ix = int(np.floor(gx0))
        iy = int(np.floor(gy0))
        iz = int(np.floor(gz0))
        ex = int(np.floor(gex[r]))
        ey = int(np.floor(gey[r]))
        ez = int(np.floor(gez[r]))
        dx = gex[r] - gx0
        dy = gey[r] - gy0
        dz = gez[r] - gz0
        stepx = 1 if dx > 0.0 else (-1 if dx < 0.0 else 0)
        stepy = 1 if dy > 0.0 else (-1 if dy < 0.0 else 0)
        stepz = 1 if dz > 0.0 else (-1 if dz < 0.0 else 0)
        tmaxx = ((ix + (1 if stepx > 0 else 0)) - gx0) / dx if stepx != 0 else INF
        tmaxy = ((iy + (1 if stepy > 0 else 0)) - gy0) / dy if stepy != 0 else INF
        tmaxz = ((iz + (1 if stepz > 0 else 0)) - gz0) / dz if stepz != 0 else INF
        tdx = stepx / dx if stepx != 0 else INF
        tdy = stepy / dy if stepy != 0 else INF
        tdz = stepz / dz if stepz != 0 else INF

        max_steps = nx + ny + nz + 3
        for _ in range(max_steps):
            if ix < 0 or ix >= nx or iy < 0 or iy >= ny or iz < 0 or iz >= nz:
                break
            at_end = (ix == ex and iy == ey and iz == ez) or (
                tmaxx > 1.0 and tmaxy > 1.0 and tmaxz > 1.0)
            if at_end:
                m = 2 if hit[r] else 1
                if m > mark[ix, iy, iz]:
                    mark[ix, iy, iz] = m
            else:
                if mark[ix, iy, iz] < 1:
                    mark[ix, iy, iz] = 1
            if ix < t0:
                t0 = ix
            if ix > t1:
                t1 = ix
            if iy < u0:
                u0 = iy
            if iy > u1:
                u1 = iy
            if iz < v0:
                v0 = iz
            if iz > v1:
                v1 = iz
            if at_end:
                break
            if tmaxx < tmaxy:
                if tmaxx < tmaxz:
                    ix += stepx
                    tmaxx += tdx
                else:
                    iz += stepz
                    tmaxz += tdz
            else:
                if tmaxy < tmaxz:
                    iy += stepy
                    tmaxy += tdy
                else:
                    iz += stepz
                    tmaxz += tdz

    c0 = nx
    c1 = -1
    d0 = ny
    d1 = -1
    e0 = nz
    e1 = -1
    if t1 >= 0:
        for i in range(t0, t1 + 1):
            for j in range(u0, u1 + 1):
                for k in range(v0, v1 + 1):
                    m = mark[i, j, k]
                    if m == 0:
                        continue
                    mark[i, j, k] = 0
                    old = logodds[i, j, k]
                    new = old + (hit_lo if m == 2 else miss_lo)
                    if new > clamp_hi - eps:
                        new = clamp_hi - eps
                    elif new < clamp_lo + eps:
                        new = clamp_lo + eps
                    if new != old:
                        logodds[i, j, k] = new
                        if new >= occ_t:
                            trin[i, j, k] = 1
                        elif new <= free_t:
                            trin[i, j, k] = 0
                        else:
                            trin[i, j, k] = -1
                        if i < c0:
                            c0 = i
                        if i > c1:
                            c1 = i
                        if j < d0:
                            d0 = j
                        if j > d1:
                            d1 = j
                        if k < e0:
                            e0 = k
                        if k > e1:
                            e1 = k
    out = np.empty(6, dtype=np.int64)
    if c1 < 0:
        out[0] = -1
        return out
    out[0] = c0
    out[1] = d0
    out[2] = e0
    out[3] = c1
    out[4] = d1
    out[5] = e1
    return out


@njit(cache=True)
def gain_ray(trin, covered, pred, gx0, gy0, gz0, gx1, gy1, gz1, use_pred):
    """Count observable-unknown voxels along one ray.

    Walks the ray; stops on map exit or an observed-occupied voxel.  Every
    observed-unknown voxel counts.  With use_pred, an unknown voxel whose
    predicted value is occupied still counts but terminates the ray.
    """
    nx, ny, nz = trin.shape
    ix = int(np.floor(gx0))
    iy = int(np.floor(gy0))
    iz = int(np.floor(gz0))
    ex = int(np.floor(gx1))
    ey = int(np.floor(gy1))
    ez = int(np.floor(gz1))
    dx = gx1 - gx0
    dy = gy1 - gy0
    dz = gz1 - gz0
    stepx = 1 if dx > 0.0 else (-1 if dx < 0.0 else 0)
    stepy = 1 if dy > 0.0 else (-1 if dy < 0.0 else 0)
    stepz = 1 if dz > 0.0 else (-1 if dz < 0.0 else 0)
    tmaxx = ((ix + (1 if stepx > 0 else 0)) - gx0) / dx if stepx != 0 else INF
    tmaxy = ((iy + (1 if stepy > 0 else 0)) - gy0) / dy if stepy != 0 else INF
    tmaxz = ((iz + (1 if stepz > 0 else 0)) - gz0) / dz if stepz != 0 else INF
    tdx = stepx / dx if stepx != 0 else INF
    tdy = stepy / dy if stepy != 0 else INF
    tdz = stepz / dz if stepz != 0 else INF

    count = 0
    max_steps = nx + ny + nz + 3
    for _ in range(max_steps):
        if ix < 0 or ix >= nx or iy < 0 or iy >= ny or iz < 0 or iz >= nz:
            break
        t = trin[ix, iy, iz]
        if t == 1:
            break
        if t == -1:
            count += 1
            if use_pred and covered[ix, iy, iz] and pred[ix, iy, iz] == 1:
                break
        if ix == ex and iy == ey and iz == ez:
            break
        if tmaxx > 1.0 and tmaxy > 1.0 and tmaxz > 1.0:
            break
        if tmaxx < tmaxy:
            if tmaxx < tmaxz:
                ix += stepx
                tmaxx += tdx
            else:
                iz += stepz
                tmaxz += tdz
        else:
            if tmaxy < tmaxz:
                iy += stepy
                tmaxy += tdy
            else:
                iz += stepz
                tmaxz += tdz
    return count


@njit(cache=True)
def gain_rays_batch(trin, covered, pred, start, ends, use_pred, out):
    """Gain per ray for a common start and (R,3) grid-coordinate ends."""
    for r in range(ends.shape[0]):
        out[r] = gain_ray(trin, covered, pred, start[0], start[1], start[2],
                          ends[r, 0], ends[r, 1], ends[r, 2], use_pred)


@njit(cache=True)
def dijkstra_grid(nav, src, res):
    """Dijkstra over the 26-connected grid of navigable voxels.

    nav: bool (nx,ny,nz).  src: flat index.  Edge weight = Euclidean step
    length in meters.  Returns (dist float64 flat, parent int64 flat).
    """
    nx, ny, nz = nav.shape
    nvox = nx * ny * nz
    dist = np.full(nvox, INF)
    parent = np.full(nvox, -1, dtype=np.int64)
    if not nav.flat[src]:
        return dist, parent
    # offsets and weights for 26-connectivity
    offs = np.empty((26, 3), dtype=np.int64)
    w = np.empty(26)
    m = 0
    for a in (-1, 0, 1):
        for b in (-1, 0, 1):
            for c in (-1, 0, 1):
                if a == 0 and b == 0 and c == 0:
                    continue
                offs[m, 0] = a
                offs[m, 1] = b
                offs[m, 2] = c
                w[m] = np.sqrt(float(a * a + b * b + c * c)) * res
                m += 1

    heap_idx = np.empty(nvox * 8, dtype=np.int64)
    heap_d = np.empty(nvox * 8)
    hn = 0

    # push
    heap_idx[0] = src
    heap_d[0] = 0.0
    hn = 1
    dist[src] = 0.0

    while hn > 0:
        top_d = heap_d[0]
        top_i = heap_idx[0]
        hn -= 1
        heap_d[0] = heap_d[hn]
        heap_idx[0] = heap_idx[hn]
        # sift down
        p = 0
        while True:
            l = 2 * p + 1
            r = l + 1
            s = p
            if l < hn and heap_d[l] < heap_d[s]:
                s = l
            if r < hn and heap_d[r] < heap_d[s]:
                s = r
            if s == p:
                break
            heap_d[p], heap_d[s] = heap_d[s], heap_d[p]
            heap_idx[p], heap_idx[s] = heap_idx[s], heap_idx[p]
            p = s
        if top_d > dist[top_i]:
            continue
        iz = top_i % nz
        iy = (top_i // nz) % ny
        ix = top_i // (ny * nz)
        for e in range(26):
            jx = ix + offs[e, 0]
            jy = iy + offs[e, 1]
            jz = iz + offs[e, 2]
            if jx < 0 or jx >= nx or jy < 0 or jy >= ny or jz < 0 or jz >= nz:
                continue
            if not nav[jx, jy, jz]:
                continue
            j = (jx * ny + jy) * nz + jz
            nd = top_d + w[e]
            if nd < dist[j]:
                dist[j] = nd
                parent[j] = top_i
                # push
                if hn < heap_idx.shape[0]:
                    q = hn
                    heap_d[q] = nd
                    heap_idx[q] = j
                    hn += 1
                    while q > 0:
                        pq = (q - 1) // 2
                        if heap_d[pq] <= heap_d[q]:
                            break
                        heap_d[pq], heap_d[q] = heap_d[q], heap_d[pq]
                        heap_idx[pq], heap_idx[q] = heap_idx[q], heap_idx[pq]
                        q = pq
    return dist, parent


@njit(cache=True)
def frontier_cells_in_box(trin, x0, y0, z0, x1, y1, z1, out):
    """Collect frontier cells (known-free with an unknown 6-neighbor) inside
    the inclusive voxel box.  Out-of-map neighbors do not count as unknown.
    Returns the cell count; out is (N,3) int32 scratch."""
    nx, ny, nz = trin.shape
    n = 0
    for i in range(max(0, x0), min(nx, x1 + 1)):
        for j in range(max(0, y0), min(ny, y1 + 1)):
            for k in range(max(0, z0), min(nz, z1 + 1)):
                if trin[i, j, k] != 0:
                    continue
                f = False
                if i > 0 and trin[i - 1, j, k] == -1:
                    f = True
                elif i < nx - 1 and trin[i + 1, j, k] == -1:
                    f = True
                elif j > 0 and trin[i, j - 1, k] == -1:
                    f = True
                elif j < ny - 1 and trin[i, j + 1, k] == -1:
                    f = True
                elif k > 0 and trin[i, j, k - 1] == -1:
                    f = True
                elif k < nz - 1 and trin[i, j, k + 1] == -1:
                    f = True
                if f:
                    out[n, 0] = i
                    out[n, 1] = j
                    out[n, 2] = k
                    n += 1
    return n
