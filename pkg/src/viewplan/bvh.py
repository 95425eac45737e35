"""Segment/triangle occlusion tests and a bounding-volume hierarchy.

Both the brute-force path and the BVH traversal call the same vectorised
Moller-Trumbore routine with inclusive edge comparisons, so their boolean
answers are identical on every query. Hits with segment parameter within a
relative 1e-6 of either endpoint are discarded (self-intersection guard for
queries that start or end on the mesh surface).
"""

from __future__ import annotations

import numpy as np

T_EPS = 1e-6  # endpoint guard, fraction of segment length
_DET_EPS = 1e-14
BRUTE_FACE_LIMIT = 4096  # below this, vectorised brute force beats traversal
_LEAF_SIZE = 8


def _segment_hits(tris: np.ndarray, origin: np.ndarray, delta: np.ndarray) -> bool:
    """Any triangle hit with parameter strictly inside (T_EPS, 1 - T_EPS)."""
    v0 = tris[:, 0]
    e1 = tris[:, 1] - v0
    e2 = tris[:, 2] - v0
    p = np.cross(delta, e2)
    det = (e1 * p).sum(axis=-1)
    ok = np.abs(det) > _DET_EPS
    inv = np.where(ok, det, 1.0)
    tvec = origin - v0
    u = (tvec * p).sum(axis=-1) / inv
    q = np.cross(tvec, e1)
    v = (q * delta).sum(axis=-1) / inv
    t = (e2 * q).sum(axis=-1) / inv
    hit = ok & (u >= 0.0) & (u <= 1.0) & (v >= 0.0) & (u + v <= 1.0)
    hit &= (t > T_EPS) & (t < 1.0 - T_EPS)
    return bool(hit.any())


def segment_hits_any(all_tris: np.ndarray, src: np.ndarray, dst: np.ndarray) -> bool:
    """Brute-force occlusion over every triangle of the mesh."""
    return _segment_hits(all_tris, src, dst - src)


def segments_hit_any(all_tris: np.ndarray, sources: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Brute-force occlusion for a batch of segments, chunked over queries."""
    n = len(sources)
    out = np.zeros(n, dtype=bool)
    v0 = all_tris[:, 0]
    e1 = all_tris[:, 1] - v0
    e2 = all_tris[:, 2] - v0
    chunk = max(1, int(4_000_000 // max(1, len(all_tris))))
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        o = sources[lo:hi][:, None, :]  # (q, 1, 3)
        d = (targets[lo:hi] - sources[lo:hi])[:, None, :]
        p = np.cross(d, e2[None, :, :])
        det = (e1[None, :, :] * p).sum(axis=-1)
        ok = np.abs(det) > _DET_EPS
        inv = np.where(ok, det, 1.0)
        tvec = o - v0[None, :, :]
        u = (tvec * p).sum(axis=-1) / inv
        q = np.cross(tvec, e1[None, :, :])
        v = (d * q).sum(axis=-1) / inv
        t = (e2[None, :, :] * q).sum(axis=-1) / inv
        hit = ok & (u >= 0.0) & (u <= 1.0) & (v >= 0.0) & (u + v <= 1.0)
        hit &= (t > T_EPS) & (t < 1.0 - T_EPS)
        out[lo:hi] = hit.any(axis=1)
    return out


class Bvh:
    """Median-split hierarchy over triangle bounds; any-hit segment queries."""

    def __init__(self, mesh):
        tris = mesh.triangles()
        self._tris = tris
        n = len(tris)
        lo = tris.min(axis=1)
        hi = tris.max(axis=1)
        centers = 0.5 * (lo + hi)

        self._node_lo: list[np.ndarray] = []
        self._node_hi: list[np.ndarray] = []
        self._node_left: list[int] = []
        self._node_right: list[int] = []
        self._node_tris: list[np.ndarray | None] = []

        order = np.arange(n)
        self._root = self._build(order, lo, hi, centers)

    def _build(self, idx: np.ndarray, lo: np.ndarray, hi: np.ndarray, centers: np.ndarray) -> int:
        node = len(self._node_lo)
        box_lo = lo[idx].min(axis=0)
        box_hi = hi[idx].max(axis=0)
        self._node_lo.append(box_lo)
        self._node_hi.append(box_hi)
        self._node_left.append(-1)
        self._node_right.append(-1)
        self._node_tris.append(None)
        if len(idx) <= _LEAF_SIZE:
            self._node_tris[node] = idx
            return node
        axis = int(np.argmax(box_hi - box_lo))
        mid = len(idx) // 2
        part = idx[np.argsort(centers[idx, axis], kind="stable")]
        left = self._build(part[:mid], lo, hi, centers)
        right = self._build(part[mid:], lo, hi, centers)
        self._node_left[node] = left
        self._node_right[node] = right
        return node

    def segment_occluded(self, src: np.ndarray, dst: np.ndarray) -> bool:
        delta = dst - src
        inv = np.where(delta != 0.0, 1.0 / np.where(delta == 0.0, 1.0, delta), np.inf)
        stack = [self._root]
        while stack:
            node = stack.pop()
            if not self._slab_hit(node, src, delta, inv):
                continue
            tri_idx = self._node_tris[node]
            if tri_idx is not None:
                if _segment_hits(self._tris[tri_idx], src, delta):
                    return True
            else:
                stack.append(self._node_left[node])
                stack.append(self._node_right[node])
        return False

    def _slab_hit(self, node: int, src, delta, inv) -> bool:
        lo = self._node_lo[node]
        hi = self._node_hi[node]
        t0, t1 = 0.0, 1.0
        for k in range(3):
            if delta[k] == 0.0:
                if src[k] < lo[k] or src[k] > hi[k]:
                    return False
                continue
            a = (lo[k] - src[k]) * inv[k]
            b = (hi[k] - src[k]) * inv[k]
            if a > b:
                a, b = b, a
            t0 = a if a > t0 else t0
            t1 = b if b < t1 else t1
            if t0 > t1:
                return False
        return True
