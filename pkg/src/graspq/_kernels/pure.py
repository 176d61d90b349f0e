"""Pure numpy kernels (fallback backend).

Two kernel families live here: mesh proximity queries and the hull
insertion loop. Contracts match the compiled backend in native.pyx
(including tie-breaking rules) so the two are interchangeable.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "pure"

HULL_DIM = 6
HULL_ON_PLANE_EPS = 1e-10  # on-plane trigger for the deterministic joggle
HULL_JOGGLE_CAP = 1e-8  # largest per-point joggle magnitude


def splitmix_unit(seed: int) -> np.ndarray:
    """Six deterministic uniforms in [-1, 1) from an integer seed."""
    z = np.uint64(seed) + np.uint64(0x9E3779B97F4A7C15) * np.arange(1, 7, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) / 2.0**52 - 1.0


def joggle_point(original: np.ndarray, index: int, attempt: int) -> np.ndarray:
    """Deterministic joggle: base magnitude equals the on-plane trigger,
    escalating tenfold per retry up to HULL_JOGGLE_CAP."""
    magnitude = min(HULL_ON_PLANE_EPS * 10.0 ** (attempt - 1), HULL_JOGGLE_CAP)
    return original + splitmix_unit((index + 1) * 1_000_003 + attempt) * magnitude


# ---------------------------------------------------------------------------
# hyperplane fitting (shared by the hull loop and its oracles)


def fit_planes_batch(subsets: np.ndarray, tol: float, rank_tol: float | None = None):
    """Hyperplanes through each d-tuple of d-dimensional points.

    subsets: (S, d, d). Returns (normals (S, d), offsets (S,), valid (S,)).
    The primary path solves A w = 1, which fails for planes through the
    origin and for affinely dependent tuples; flagged rows fall back to a
    centered SVD. `rank_tol` is the smallest second-to-last singular value
    still treated as a genuine hyperplane; it must stay below the hull
    joggle magnitude so thin facets beside a joggled vertex are accepted.
    """
    s_count, d, _ = subsets.shape
    if rank_tol is None:
        rank_tol = 1e-3 * tol
    normals = np.zeros((s_count, d))
    offsets = np.zeros(s_count)
    valid = np.zeros(s_count, dtype=bool)

    # exact-singular rows would make the whole batched solve raise
    dets = np.linalg.det(subsets)
    solvable = np.isfinite(dets) & (np.abs(dets) > 1e-300)
    if np.any(solvable):
        try:
            w = np.linalg.solve(subsets[solvable], np.ones((int(solvable.sum()), d, 1)))[
                ..., 0
            ]
            wn = np.linalg.norm(w, axis=1)
            ok = np.isfinite(wn) & (wn > 1e-12)
            wn_safe = np.where(ok, wn, 1.0)
            n_sv = w / wn_safe[:, None]
            b_sv = 1.0 / wn_safe
            resid = np.abs(
                np.einsum("sij,sj->si", subsets[solvable], n_sv) - b_sv[:, None]
            ).max(axis=1)
            normals[solvable] = n_sv
            offsets[solvable] = b_sv
            valid[solvable] = ok & (resid <= tol)
        except np.linalg.LinAlgError:
            pass

    bad = ~valid
    if np.any(bad):
        centered = subsets[bad] - subsets[bad].mean(axis=1, keepdims=True)
        _, sv, vt = np.linalg.svd(centered)
        n_fb = vt[:, -1, :]
        b_fb = np.einsum("sj,sj->s", n_fb, subsets[bad].mean(axis=1))
        resid = np.abs(
            np.einsum("sij,sj->si", subsets[bad], n_fb) - b_fb[:, None]
        ).max(axis=1)
        # affinely dependent tuples have no unique plane: reject them
        ok_fb = (sv[:, -2] > rank_tol) & (resid <= tol)
        normals[bad] = n_fb
        offsets[bad] = b_fb
        valid[bad] = ok_fb
    return normals, offsets, valid


def orient_away(normals, offsets, reference_point):
    """Flip planes so the reference point is on the non-positive side."""
    side = normals @ reference_point - offsets
    flip = side > 0
    normals = np.where(flip[:, None], -normals, normals)
    offsets = np.where(flip, -offsets, offsets)
    return normals, offsets


# ---------------------------------------------------------------------------
# hull insertion loop


def hull_build(
    w,
    x,
    verts,
    normals,
    offsets,
    neighbors,
    alive,
    n_facets,
    point_facet,
    point_dist,
    interior,
    tol,
    joggled_out,
):
    """Run beneath-beyond insertions until no point is outside the hull.

    All state lives in the passed arrays (facet store sized `cap`, plus
    per-point assignment arrays), so the caller can grow the store and
    resume when capacity runs out. Returns (status, n_facets) with status
    0 = finished, 1 = facet arrays full.

    Points are assigned to the facet they are farthest outside of;
    insertion picks the globally farthest point (ties: lowest index). A
    point landing within the on-plane trigger of any live facet plane is
    joggled on the working copy; its index is appended to `joggled_out`.
    """
    n = len(w)
    cap = len(offsets)
    dim = HULL_DIM
    while True:
        active = point_facet >= 0
        if not np.any(active):
            return 0, n_facets
        p = int(np.argmax(np.where(active, point_dist, -np.inf)))

        dists = normals[:n_facets] @ w[p] - offsets[:n_facets]
        live = alive[:n_facets].astype(bool)
        # only planes inside the near band can cross the trigger or change
        # sign under a joggle (magnitude <= 1e-8): retries rescan just those
        near = np.flatnonzero(live & (np.abs(dists) <= 2.6e-8))
        attempt = 0
        while np.any(np.abs(dists[near]) <= HULL_ON_PLANE_EPS):
            attempt += 1
            if attempt > 48:
                raise ArithmeticError("joggle failed to resolve degeneracy")
            w[p] = joggle_point(x[p], p, attempt)
            joggled_out.append(p)
            dists[near] = normals[near] @ w[p] - offsets[near]

        visible_mask = live & (dists > 0.0)
        vis_ids = np.flatnonzero(visible_mask)
        if len(vis_ids) == 0:
            point_facet[p] = -1  # joggle moved the point inside the hull
            continue

        nb = neighbors[vis_ids]  # (V, 6)
        cross = ~visible_mask[nb]
        h_row, h_slot = np.nonzero(cross)
        h_count = len(h_row)
        if n_facets + h_count > cap:
            return 1, n_facets
        twins = nb[h_row, h_slot]
        killed = vis_ids[h_row]
        vv = verts[killed]
        keep_cols = np.ones(vv.shape, dtype=bool)
        keep_cols[np.arange(h_count), h_slot] = False
        ridge5 = vv[keep_cols].reshape(-1, 5)
        new_rows = np.sort(
            np.concatenate(
                [ridge5, np.full((h_count, 1), p, dtype=vv.dtype)], axis=1
            ),
            axis=1,
        )

        new_n, new_b, ok = fit_planes_batch(w[new_rows], tol)
        if not np.all(ok):
            raise ArithmeticError("degenerate facet plane during hull construction")
        new_n, new_b = orient_away(new_n, new_b, interior)
        lo = n_facets
        fids = np.arange(lo, lo + h_count)
        verts[lo : lo + h_count] = new_rows
        normals[lo : lo + h_count] = new_n
        offsets[lo : lo + h_count] = new_b
        alive[lo : lo + h_count] = 1
        alive[vis_ids] = 0
        n_facets = lo + h_count

        # outer adjacency: the twin's slot that crossed to the killed facet
        slot_in_twin = np.argmax(neighbors[twins] == killed[:, None], axis=1)
        neighbors[twins, slot_in_twin] = fids
        p_slot = np.argmax(new_rows == p, axis=1)
        neighbors[fids, p_slot] = twins
        # cone adjacency: p-ridges share 4 ridge vertices, matched lexically
        if h_count > 1:
            keep_p = np.ones((h_count, dim), dtype=bool)
            keep_p[np.arange(h_count), p_slot] = False
            rows5 = new_rows[keep_p].reshape(h_count, 5)
            keys = np.empty((h_count, 5, 4), dtype=rows5.dtype)
            for k in range(5):
                keys[:, k, :] = np.delete(rows5, k, axis=1)
            col = np.broadcast_to(np.arange(5), (h_count, 5))
            slots = np.where(col < p_slot[:, None], col, col + 1)
            flat = keys.reshape(-1, 4)
            order = np.lexsort(flat.T[::-1])
            first, second = order[0::2], order[1::2]
            fid_a = fids[first // 5]
            fid_b = fids[second // 5]
            neighbors[fid_a, slots.reshape(-1)[first]] = fid_b
            neighbors[fid_b, slots.reshape(-1)[second]] = fid_a

        # reassign points that belonged to the killed facets
        point_facet[p] = -1
        vmark = np.zeros(n_facets, dtype=bool)
        vmark[vis_ids] = True
        cand_mask = (point_facet >= 0) & vmark[np.maximum(point_facet, 0)]
        cand = np.flatnonzero(cand_mask)
        if len(cand):
            d_new = w[cand] @ new_n.T - new_b
            best = d_new.argmax(axis=1)
            best_d = d_new[np.arange(len(cand)), best]
            outside = best_d > HULL_ON_PLANE_EPS
            point_facet[cand] = np.where(outside, fids[best], -1)
            point_dist[cand] = np.where(outside, best_d, 0.0)


def _closest_on_triangles(tri_verts, q):
    """Closest point to q on each triangle of tri_verts (T, 3, 3).

    Vectorized form of the Ericson closest-point-on-triangle routine;
    returns (points (T, 3), squared distances (T,)).
    """
    a = tri_verts[:, 0]
    b = tri_verts[:, 1]
    c = tri_verts[:, 2]
    ab = b - a
    ac = c - a
    ap = q - a

    def dot(u, v):
        return u[:, 0] * v[:, 0] + u[:, 1] * v[:, 1] + u[:, 2] * v[:, 2]

    d1 = dot(ab, ap)
    d2 = dot(ac, ap)
    bp = q - b
    d3 = dot(ab, bp)
    d4 = dot(ac, bp)
    cp = q - c
    d5 = dot(ab, cp)
    d6 = dot(ac, cp)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    out = np.empty_like(a)
    done = np.zeros(len(a), dtype=bool)

    def settle(mask, points):
        take = mask & ~done
        if np.any(take):
            out[take] = points[take] if points.ndim == 2 else points
        done[:] |= mask

    settle((d1 <= 0.0) & (d2 <= 0.0), a)
    settle((d3 >= 0.0) & (d4 <= d3), b)
    denom_ab = np.where(d1 != d3, d1 - d3, 1.0)
    settle((vc <= 0.0) & (d1 >= 0.0) & (d3 <= 0.0), a + (d1 / denom_ab)[:, None] * ab)
    settle((d6 >= 0.0) & (d5 <= d6), c)
    denom_ac = np.where(d2 != d6, d2 - d6, 1.0)
    settle((vb <= 0.0) & (d2 >= 0.0) & (d6 <= 0.0), a + (d2 / denom_ac)[:, None] * ac)
    e1 = d4 - d3
    e2 = d5 - d6
    denom_bc = np.where(e1 + e2 != 0.0, e1 + e2, 1.0)
    settle((va <= 0.0) & (e1 >= 0.0) & (e2 >= 0.0), b + (e1 / denom_bc)[:, None] * (c - b))
    inner = ~done
    if np.any(inner):
        denom = va + vb + vc
        denom = np.where(denom != 0.0, denom, 1.0)
        v = vb / denom
        w = vc / denom
        out[inner] = (a + v[:, None] * ab + w[:, None] * ac)[inner]

    diff = out - q
    d2_all = diff[:, 0] ** 2 + diff[:, 1] ** 2 + diff[:, 2] ** 2
    return out, d2_all


def _best_with_ties(points, sq_dists, orig_idx):
    dmin = sq_dists.min()
    tied = np.flatnonzero(sq_dists == dmin)
    pick = tied[np.argmin(orig_idx[tied])]
    return points[pick], dmin, int(orig_idx[pick])


def brute_closest_points(tri_verts, queries):
    n_q = len(queries)
    out_pts = np.empty((n_q, 3))
    out_d = np.empty(n_q)
    out_tri = np.empty(n_q, dtype=np.int64)
    all_idx = np.arange(len(tri_verts))
    for i in range(n_q):
        pts, d2 = _closest_on_triangles(tri_verts, queries[i])
        p, dmin, tri = _best_with_ties(pts, d2, all_idx)
        out_pts[i] = p
        out_d[i] = np.sqrt(dmin)
        out_tri[i] = tri
    return out_pts, out_d, out_tri


def _box_sq_dist(bb_min, bb_max, q):
    d = np.maximum(np.maximum(bb_min - q, 0.0), q - bb_max)
    return d[0] * d[0] + d[1] * d[1] + d[2] * d[2]


def bvh_closest_points(tri_verts, bb_min, bb_max, left, right, start, count, order, queries):
    n_q = len(queries)
    out_pts = np.empty((n_q, 3))
    out_d = np.empty(n_q)
    out_tri = np.empty(n_q, dtype=np.int64)
    for i in range(n_q):
        q = queries[i]
        best_d2 = np.inf
        best_pt = None
        best_tri = -1
        stack = [(0, _box_sq_dist(bb_min[0], bb_max[0], q))]
        while stack:
            node, lower = stack.pop()
            if lower > best_d2:
                continue
            if left[node] < 0:  # leaf
                s, n = start[node], count[node]
                leaf_tris = order[s : s + n]
                pts, d2 = _closest_on_triangles(tri_verts[leaf_tris], q)
                p, dmin, tri = _best_with_ties(pts, d2, leaf_tris)
                if dmin < best_d2 or (dmin == best_d2 and tri < best_tri):
                    best_d2, best_pt, best_tri = dmin, p, tri
                continue
            l, r = int(left[node]), int(right[node])
            dl = _box_sq_dist(bb_min[l], bb_max[l], q)
            dr = _box_sq_dist(bb_min[r], bb_max[r], q)
            # push the farther child first so the nearer is explored first
            if dl <= dr:
                if dr <= best_d2:
                    stack.append((r, dr))
                if dl <= best_d2:
                    stack.append((l, dl))
            else:
                if dl <= best_d2:
                    stack.append((l, dl))
                if dr <= best_d2:
                    stack.append((r, dr))
        out_pts[i] = best_pt
        out_d[i] = np.sqrt(best_d2)
        out_tri[i] = best_tri
    return out_pts, out_d, out_tri


def det6_abs_sum(mats) -> float:
    """Sum of |det| over a batch of 6x6 matrices (volume fan helper)."""
    if len(mats) == 0:
        return 0.0
    return float(np.abs(np.linalg.det(mats)).sum())


def refit_planes6(pts, normals_out, offsets_out, interior, tol):
    """Planes through 6 original points each; flags rows needing fallback."""
    n_r, b_r, ok = fit_planes_batch(pts, tol)
    n_r, b_r = orient_away(n_r, b_r, np.asarray(interior))
    normals_out[ok] = n_r[ok]
    offsets_out[ok] = b_r[ok]
    return (~ok).astype(np.uint8)
