# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled proximity kernels: closest-point-on-triangle, brute search and
BVH traversal. Mirrors pure.py exactly (including tie-breaking)."""

import numpy as np

cimport cython
cimport numpy as cnp
from libc.math cimport INFINITY, pow, sqrt

cnp.import_array()

BACKEND_NAME = "native"


cdef inline double _closest_on_triangle(
    const double* tri, const double* q, double* out_pt
) noexcept nogil:
    """Ericson closest point; writes point, returns squared distance."""
    cdef double ax = tri[0], ay = tri[1], az = tri[2]
    cdef double bx = tri[3], by = tri[4], bz = tri[5]
    cdef double cx = tri[6], cy = tri[7], cz = tri[8]
    cdef double qx = q[0], qy = q[1], qz = q[2]

    cdef double abx = bx - ax, aby = by - ay, abz = bz - az
    cdef double acx = cx - ax, acy = cy - ay, acz = cz - az
    cdef double apx = qx - ax, apy = qy - ay, apz = qz - az

    cdef double d1 = abx * apx + aby * apy + abz * apz
    cdef double d2 = acx * apx + acy * apy + acz * apz
    cdef double px, py, pz, v, w, denom
    cdef double d3, d4, d5, d6, vc, vb, va, bpx, bpy, bpz, cpx, cpy, cpz

    if d1 <= 0.0 and d2 <= 0.0:
        px = ax; py = ay; pz = az
    else:
        bpx = qx - bx; bpy = qy - by; bpz = qz - bz
        d3 = abx * bpx + aby * bpy + abz * bpz
        d4 = acx * bpx + acy * bpy + acz * bpz
        if d3 >= 0.0 and d4 <= d3:
            px = bx; py = by; pz = bz
        else:
            vc = d1 * d4 - d3 * d2
            if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
                v = d1 / (d1 - d3)
                px = ax + v * abx; py = ay + v * aby; pz = az + v * abz
            else:
                cpx = qx - cx; cpy = qy - cy; cpz = qz - cz
                d5 = abx * cpx + aby * cpy + abz * cpz
                d6 = acx * cpx + acy * cpy + acz * cpz
                if d6 >= 0.0 and d5 <= d6:
                    px = cx; py = cy; pz = cz
                else:
                    vb = d5 * d2 - d1 * d6
                    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
                        w = d2 / (d2 - d6)
                        px = ax + w * acx; py = ay + w * acy; pz = az + w * acz
                    else:
                        va = d3 * d6 - d5 * d4
                        if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
                            w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
                            px = bx + w * (cx - bx)
                            py = by + w * (cy - by)
                            pz = bz + w * (cz - bz)
                        else:
                            denom = va + vb + vc
                            if denom == 0.0:
                                denom = 1.0
                            v = vb / denom
                            w = vc / denom
                            px = ax + v * abx + w * acx
                            py = ay + v * aby + w * acy
                            pz = az + v * abz + w * acz

    out_pt[0] = px; out_pt[1] = py; out_pt[2] = pz
    cdef double dx = px - qx, dy = py - qy, dz = pz - qz
    return dx * dx + dy * dy + dz * dz


cdef inline double _box_sq_dist(
    const double* bmin, const double* bmax, const double* q
) noexcept nogil:
    cdef double d, total = 0.0
    cdef int k
    for k in range(3):
        d = bmin[k] - q[k]
        if d < 0.0:
            d = q[k] - bmax[k]
            if d < 0.0:
                d = 0.0
        total += d * d
    return total


def brute_closest_points(
    const double[:, :, ::1] tri_verts, const double[:, ::1] queries
):
    cdef Py_ssize_t n_q = queries.shape[0]
    cdef Py_ssize_t n_t = tri_verts.shape[0]
    pts_arr = np.empty((n_q, 3))
    d_arr = np.empty(n_q)
    tri_arr = np.empty(n_q, dtype=np.int64)
    cdef double[:, ::1] pts = pts_arr
    cdef double[::1] dists = d_arr
    cdef long long[::1] tris = tri_arr
    cdef double best_d2, d2
    cdef double pt[3]
    cdef double best_pt[3]
    cdef Py_ssize_t i, t, best_t
    with nogil:
        for i in range(n_q):
            best_d2 = INFINITY
            best_t = -1
            for t in range(n_t):
                d2 = _closest_on_triangle(&tri_verts[t, 0, 0], &queries[i, 0], pt)
                if d2 < best_d2:
                    best_d2 = d2
                    best_t = t
                    best_pt[0] = pt[0]; best_pt[1] = pt[1]; best_pt[2] = pt[2]
            pts[i, 0] = best_pt[0]; pts[i, 1] = best_pt[1]; pts[i, 2] = best_pt[2]
            dists[i] = sqrt(best_d2)
            tris[i] = best_t
    return pts_arr, d_arr, tri_arr


def bvh_closest_points(
    const double[:, :, ::1] tri_verts,
    const double[:, ::1] bb_min,
    const double[:, ::1] bb_max,
    const int[::1] left,
    const int[::1] right,
    const int[::1] start,
    const int[::1] count,
    const int[::1] order,
    const double[:, ::1] queries,
):
    cdef Py_ssize_t n_q = queries.shape[0]
    pts_arr = np.empty((n_q, 3))
    d_arr = np.empty(n_q)
    tri_arr = np.empty(n_q, dtype=np.int64)
    cdef double[:, ::1] pts = pts_arr
    cdef double[::1] dists = d_arr
    cdef long long[::1] tris = tri_arr

    cdef int stack_nodes[128]
    cdef double stack_lower[128]
    cdef int depth, node, l, r, tri, s, n, j
    cdef double best_d2, lower, dl, dr, d2
    cdef double pt[3]
    cdef double best_pt[3]
    cdef long long best_tri
    cdef Py_ssize_t i

    with nogil:
        for i in range(n_q):
            best_d2 = INFINITY
            best_tri = -1
            depth = 0
            stack_nodes[depth] = 0
            stack_lower[depth] = _box_sq_dist(&bb_min[0, 0], &bb_max[0, 0], &queries[i, 0])
            depth += 1
            while depth > 0:
                depth -= 1
                node = stack_nodes[depth]
                lower = stack_lower[depth]
                if lower > best_d2:
                    continue
                if left[node] < 0:
                    s = start[node]
                    n = count[node]
                    for j in range(n):
                        tri = order[s + j]
                        d2 = _closest_on_triangle(
                            &tri_verts[tri, 0, 0], &queries[i, 0], pt
                        )
                        if d2 < best_d2 or (d2 == best_d2 and tri < best_tri):
                            best_d2 = d2
                            best_tri = tri
                            best_pt[0] = pt[0]; best_pt[1] = pt[1]; best_pt[2] = pt[2]
                    continue
                l = left[node]
                r = right[node]
                dl = _box_sq_dist(&bb_min[l, 0], &bb_max[l, 0], &queries[i, 0])
                dr = _box_sq_dist(&bb_min[r, 0], &bb_max[r, 0], &queries[i, 0])
                if dl <= dr:
                    if dr <= best_d2:
                        stack_nodes[depth] = r; stack_lower[depth] = dr; depth += 1
                    if dl <= best_d2:
                        stack_nodes[depth] = l; stack_lower[depth] = dl; depth += 1
                else:
                    if dl <= best_d2:
                        stack_nodes[depth] = l; stack_lower[depth] = dl; depth += 1
                    if dr <= best_d2:
                        stack_nodes[depth] = r; stack_lower[depth] = dr; depth += 1
            pts[i, 0] = best_pt[0]; pts[i, 1] = best_pt[1]; pts[i, 2] = best_pt[2]
            dists[i] = sqrt(best_d2)
            tris[i] = best_tri
    return pts_arr, d_arr, tri_arr


# ---------------------------------------------------------------------------
# hull insertion loop

from libc.stdlib cimport free, malloc, qsort

HULL_ON_PLANE_EPS = 1e-10
cdef double _ON_PLANE = 1e-10


cdef inline void _joggle_point(const double[:, ::1] x, double[:, ::1] w,
                               int p, int attempt) noexcept nogil:
    """Deterministic splitmix64 joggle, bit-identical to pure.joggle_point."""
    cdef double magnitude = _ON_PLANE * pow(10.0, <double> (attempt - 1))
    cdef int k
    cdef unsigned long long z
    if magnitude > 1e-8:
        magnitude = 1e-8
    cdef unsigned long long seed = (
        (<unsigned long long> (p + 1)) * 1000003ULL + <unsigned long long> attempt
    )
    for k in range(6):
        z = seed + <unsigned long long> (k + 1) * 0x9E3779B97F4A7C15ULL
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
        z = z ^ (z >> 31)
        w[p, k] = x[p, k] + ((<double> (z >> 11)) / 4503599627370496.0 - 1.0) * magnitude


cdef struct ConeRidge:
    unsigned long long key
    int pos


cdef int _ridge_cmp(const void* a, const void* b) noexcept nogil:
    cdef unsigned long long ka = (<ConeRidge*> a).key
    cdef unsigned long long kb = (<ConeRidge*> b).key
    if ka < kb:
        return -1
    if ka > kb:
        return 1
    return 0


cdef inline double _dot6(const double* a, const double* b) noexcept nogil:
    return a[0]*b[0] + a[1]*b[1] + a[2]*b[2] + a[3]*b[3] + a[4]*b[4] + a[5]*b[5]


cdef int _fit_plane6(const double[:, ::1] w, const int* vrow, double* n_out,
                     double* b_out, const double* interior, double tol) noexcept nogil:
    """Plane through 6 working points via A x = 1; returns 0 ok, 1 flagged."""
    cdef double a[6][7]
    cdef double sol[6]
    cdef int i, j, k, piv
    cdef double mx, tmp, f, wn, resid, d
    for i in range(6):
        for j in range(6):
            a[i][j] = w[vrow[i], j]
        a[i][6] = 1.0
    for k in range(6):
        piv = k
        mx = a[k][k] if a[k][k] >= 0 else -a[k][k]
        for i in range(k + 1, 6):
            tmp = a[i][k] if a[i][k] >= 0 else -a[i][k]
            if tmp > mx:
                mx = tmp
                piv = i
        if mx < 1e-300:
            return 1
        if piv != k:
            for j in range(k, 7):
                tmp = a[k][j]; a[k][j] = a[piv][j]; a[piv][j] = tmp
        for i in range(k + 1, 6):
            f = a[i][k] / a[k][k]
            if f != 0.0:
                for j in range(k, 7):
                    a[i][j] -= f * a[k][j]
    for i in range(5, -1, -1):
        tmp = a[i][6]
        for j in range(i + 1, 6):
            tmp -= a[i][j] * sol[j]
        sol[i] = tmp / a[i][i]
    wn = 0.0
    for j in range(6):
        wn += sol[j] * sol[j]
    wn = sqrt(wn)
    if not (wn > 1e-12 and wn == wn and wn != INFINITY):
        return 1
    for j in range(6):
        n_out[j] = sol[j] / wn
    b_out[0] = 1.0 / wn
    resid = 0.0
    for i in range(6):
        d = 0.0
        for j in range(6):
            d += w[vrow[i], j] * n_out[j]
        d -= b_out[0]
        if d < 0:
            d = -d
        if d > resid:
            resid = d
    if resid > tol:
        return 1
    if _dot6(n_out, interior) > b_out[0]:
        for j in range(6):
            n_out[j] = -n_out[j]
        b_out[0] = -b_out[0]
    return 0


def hull_build(
    double[:, ::1] w,
    const double[:, ::1] x,
    int[:, ::1] verts,
    double[:, ::1] normals,
    double[::1] offsets,
    int[:, ::1] neighbors,
    unsigned char[::1] alive,
    int n_facets,
    int[::1] point_facet,
    double[::1] point_dist,
    const double[::1] interior,
    double tol,
    object joggled_out,
):
    """Compiled twin of pure.hull_build; same arrays, same semantics."""
    cdef int n = <int> w.shape[0]
    cdef int cap = <int> offsets.shape[0]
    cdef int nf = n_facets
    if n >= 65535:
        raise ValueError("native hull supports fewer than 65535 points")

    scratch_d = np.empty(cap, dtype=np.float64)
    scratch_vis = np.empty(cap, dtype=np.int32)
    scratch_stamp = np.zeros(cap, dtype=np.int32)
    cdef double[::1] fdist = scratch_d
    cdef int[::1] vis = scratch_vis
    cdef int[::1] vstamp = scratch_stamp
    cdef int stamp = 0

    h_cap = 6 * cap
    scratch_hf = np.empty(h_cap, dtype=np.int32)
    scratch_hk = np.empty(h_cap, dtype=np.int32)
    scratch_ht = np.empty(h_cap, dtype=np.int32)
    cdef int[::1] h_f = scratch_hf
    cdef int[::1] h_k = scratch_hk
    cdef int[::1] h_t = scratch_ht

    cdef ConeRidge* entries = <ConeRidge*> malloc(6 * <size_t> cap * sizeof(ConeRidge))
    if entries == NULL:
        raise MemoryError()

    cdef int p, attempt, i, j, k, f, t, nvis, nh, e, lo, flagged
    cdef int vrow[6]
    cdef double best_d, d, interior_c[6]
    cdef double nbuf[6]
    cdef double bbuf
    cdef int ridge[5]
    cdef int pslot, vtx, slot, twin, old
    cdef unsigned long long key
    cdef int ecnt
    cdef list flag_rows

    for j in range(6):
        interior_c[j] = interior[j]

    try:
        while True:
            # ---- select farthest outside point (ties: lowest index)
            p = -1
            best_d = -INFINITY
            for i in range(n):
                if point_facet[i] >= 0 and point_dist[i] > best_d:
                    best_d = point_dist[i]
                    p = i
            if p < 0:
                free(entries)
                entries = NULL
                return 0, nf

            # ---- distances to live facets; joggle while on a plane.
            # Only planes inside the near band can cross the trigger or
            # change sign under a joggle (magnitude <= 1e-8), so retries
            # rescan just those.
            nvis = 0  # reused as near-count here
            flagged = 0
            for f in range(nf):
                if not alive[f]:
                    continue
                d = _dot6(&normals[f, 0], &w[p, 0]) - offsets[f]
                fdist[f] = d
                if -2.6e-8 <= d <= 2.6e-8:
                    vis[nvis] = f  # reuse scratch as the near list
                    nvis += 1
                    if -_ON_PLANE <= d <= _ON_PLANE:
                        flagged = 1
            attempt = 0
            while flagged:
                attempt += 1
                if attempt > 48:
                    raise ArithmeticError("joggle failed to resolve degeneracy")
                _joggle_point(x, w, p, attempt)
                joggled_out.append(p)
                flagged = 0
                for i in range(nvis):
                    f = vis[i]
                    d = _dot6(&normals[f, 0], &w[p, 0]) - offsets[f]
                    fdist[f] = d
                    if -_ON_PLANE <= d <= _ON_PLANE:
                        flagged = 1

            # ---- visibility
            stamp += 1
            nvis = 0
            for f in range(nf):
                if alive[f] and fdist[f] > 0.0:
                    vis[nvis] = f
                    vstamp[f] = stamp
                    nvis += 1
            if nvis == 0:
                point_facet[p] = -1
                continue

            # ---- horizon ridges
            nh = 0
            for i in range(nvis):
                f = vis[i]
                for k in range(6):
                    t = neighbors[f, k]
                    if vstamp[t] != stamp:
                        h_f[nh] = f
                        h_k[nh] = k
                        h_t[nh] = t
                        nh += 1
            if nf + nh > cap:
                free(entries)
                entries = NULL
                return 1, nf

            # ---- build cone facets
            lo = nf
            ecnt = 0
            flag_rows = []
            for e in range(nh):
                f = h_f[e]
                k = h_k[e]
                j = 0
                for i in range(6):
                    if i != k:
                        ridge[j] = verts[f, i]
                        j += 1
                # merge p into the sorted ridge
                pslot = 5
                for i in range(5):
                    if ridge[i] > p:
                        pslot = i
                        break
                for i in range(5):
                    if i < pslot:
                        verts[lo + e, i] = ridge[i]
                    else:
                        verts[lo + e, i + 1] = ridge[i]
                verts[lo + e, pslot] = p
                if _fit_plane6(w, &verts[lo + e, 0], nbuf, &bbuf, interior_c, tol):
                    flag_rows.append(lo + e)
                else:
                    for j in range(6):
                        normals[lo + e, j] = nbuf[j]
                    offsets[lo + e] = bbuf
                alive[lo + e] = 1
                neighbors[lo + e, pslot] = h_t[e]
                # twin slot that crossed to the killed facet now points here
                twin = h_t[e]
                old = f
                for j in range(6):
                    if neighbors[twin, j] == old:
                        neighbors[twin, j] = lo + e
                        break
                # cone pairing entries: drop one ridge vertex (key of the 4 left)
                for k in range(6):
                    if k == pslot:
                        continue
                    key = 0
                    for i in range(6):
                        if i != k and i != pslot:
                            key = (key << 16) | <unsigned long long> (
                                <unsigned int> verts[lo + e, i]
                            )
                    entries[ecnt].key = key
                    entries[ecnt].pos = (e << 3) | k
                    ecnt += 1
            nf = lo + nh

            if flag_rows:
                _hull_fit_fallback(w, verts, normals, offsets, flag_rows,
                                   np.asarray(interior), tol)

            # ---- pair cone facets sharing a p-ridge
            if nh > 1:
                qsort(entries, ecnt, sizeof(ConeRidge), _ridge_cmp)
                i = 0
                while i + 1 < ecnt:
                    e = entries[i].pos >> 3
                    k = entries[i].pos & 7
                    f = entries[i + 1].pos >> 3
                    j = entries[i + 1].pos & 7
                    neighbors[lo + e, k] = lo + f
                    neighbors[lo + f, j] = lo + e
                    i += 2

            # ---- retire p, kill visible facets, reassign their points
            point_facet[p] = -1
            for i in range(nvis):
                alive[vis[i]] = 0
            for i in range(n):
                f = point_facet[i]
                if f < 0 or vstamp[f] != stamp:
                    continue
                best_d = _ON_PLANE
                t = -1
                for e in range(nh):
                    d = _dot6(&normals[lo + e, 0], &w[i, 0]) - offsets[lo + e]
                    if d > best_d:
                        best_d = d
                        t = lo + e
                point_facet[i] = t
                point_dist[i] = best_d if t >= 0 else 0.0
    finally:
        if entries != NULL:
            free(entries)


def _hull_fit_fallback(double[:, ::1] w, int[:, ::1] verts,
                       double[:, ::1] normals, double[::1] offsets,
                       list rows, interior, double tol):
    """Python-side refit (SVD path) for facets the C solver flagged."""
    from graspq._kernels import pure as _pure

    idx = np.asarray(rows, dtype=np.int64)
    pts = np.asarray(w)[np.asarray(verts)[idx]]
    n_fb, b_fb, ok = _pure.fit_planes_batch(pts, tol)
    if not np.all(ok):
        raise ArithmeticError("degenerate facet plane during hull construction")
    n_fb, b_fb = _pure.orient_away(n_fb, b_fb, np.asarray(interior))
    for i, r in enumerate(idx):
        for j in range(6):
            normals[r, j] = n_fb[i, j]
        offsets[r] = b_fb[i]


def det6_abs_sum(const double[:, :, ::1] mats):
    """Sum of |det| over a batch of 6x6 matrices (volume fan helper)."""
    cdef Py_ssize_t m = mats.shape[0]
    cdef double total = 0.0
    cdef double a[6][6]
    cdef double det, mx, tmp, f
    cdef Py_ssize_t s
    cdef int i, j, k, piv
    with nogil:
        for s in range(m):
            for i in range(6):
                for j in range(6):
                    a[i][j] = mats[s, i, j]
            det = 1.0
            for k in range(6):
                piv = k
                mx = a[k][k] if a[k][k] >= 0 else -a[k][k]
                for i in range(k + 1, 6):
                    tmp = a[i][k] if a[i][k] >= 0 else -a[i][k]
                    if tmp > mx:
                        mx = tmp
                        piv = i
                if mx == 0.0:
                    det = 0.0
                    break
                if piv != k:
                    det = -det
                    for j in range(k, 6):
                        tmp = a[k][j]; a[k][j] = a[piv][j]; a[piv][j] = tmp
                det *= a[k][k]
                for i in range(k + 1, 6):
                    f = a[i][k] / a[k][k]
                    if f != 0.0:
                        for j in range(k, 6):
                            a[i][j] -= f * a[k][j]
            total += det if det >= 0 else -det
    return total


def refit_planes6(
    const double[:, :, ::1] pts,
    double[:, ::1] normals_out,
    double[::1] offsets_out,
    const double[::1] interior,
    double tol,
):
    """Planes through 6 original points each; returns a flag array marking
    rows the direct solver could not certify (caller falls back)."""
    cdef Py_ssize_t m = pts.shape[0]
    flags_arr = np.zeros(m, dtype=np.uint8)
    cdef unsigned char[::1] flags = flags_arr
    cdef double a[6][7]
    cdef double sol[6]
    cdef double interior_c[6]
    cdef double mx, tmp, f, wn, resid, d
    cdef Py_ssize_t s
    cdef int i, j, k, piv
    for j in range(6):
        interior_c[j] = interior[j]
    with nogil:
        for s in range(m):
            for i in range(6):
                for j in range(6):
                    a[i][j] = pts[s, i, j]
                a[i][6] = 1.0
            flags[s] = 0
            for k in range(6):
                piv = k
                mx = a[k][k] if a[k][k] >= 0 else -a[k][k]
                for i in range(k + 1, 6):
                    tmp = a[i][k] if a[i][k] >= 0 else -a[i][k]
                    if tmp > mx:
                        mx = tmp
                        piv = i
                if mx < 1e-300:
                    flags[s] = 1
                    break
                if piv != k:
                    for j in range(k, 7):
                        tmp = a[k][j]; a[k][j] = a[piv][j]; a[piv][j] = tmp
                for i in range(k + 1, 6):
                    f = a[i][k] / a[k][k]
                    if f != 0.0:
                        for j in range(k, 7):
                            a[i][j] -= f * a[k][j]
            if flags[s]:
                continue
            for i in range(5, -1, -1):
                tmp = a[i][6]
                for j in range(i + 1, 6):
                    tmp -= a[i][j] * sol[j]
                sol[i] = tmp / a[i][i]
            wn = 0.0
            for j in range(6):
                wn += sol[j] * sol[j]
            wn = sqrt(wn)
            if not (wn > 1e-12 and wn == wn and wn != INFINITY):
                flags[s] = 1
                continue
            for j in range(6):
                normals_out[s, j] = sol[j] / wn
            offsets_out[s] = 1.0 / wn
            resid = 0.0
            for i in range(6):
                d = 0.0
                for j in range(6):
                    d += pts[s, i, j] * normals_out[s, j]
                d -= offsets_out[s]
                if d < 0:
                    d = -d
                if d > resid:
                    resid = d
            if resid > tol:
                flags[s] = 1
                continue
            if _dot6(&normals_out[s, 0], interior_c) > offsets_out[s]:
                for j in range(6):
                    normals_out[s, j] = -normals_out[s, j]
                offsets_out[s] = -offsets_out[s]
    return flags_arr
