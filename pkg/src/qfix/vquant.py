"""Dual-lattice A*_n vector quantizers over boxes.

The n-dimensional dual lattice A*_n lives in the hyperplane
H = {z in R^(n+1) : sum(z) = 0} as the union of n+1 translates
("cosets") of the integer root lattice A_n = {f in Z^(n+1) : sum(f) = 0}:

    A*_n = union_{i=0..n} (glue(i) + A_n)
    glue(i) = (i/(n+1), ..., i/(n+1), i/(n+1) - 1, ..., i/(n+1) - 1)
              with n+1-i leading and i trailing entries.

Points are mapped between H and R^n through a fixed orthonormal basis
(rows b_i = (1,...,1,-i,0,...,0)/sqrt(i(i+1)), i = 1..n), so codebooks
are reproducible.  Nearest-point decoding solves each coset exactly
(round, then repair the sum deficiency by the cheapest +/-1 moves) and
keeps the best candidate.

A quantizer scales the lattice so 2^L cells cover the box volume and
its codebook holds every lattice point within covering distance of the
box.  That set is a conservative superset of the points whose cells
meet the box — it may graze a few extra boundary points, which only
enlarges the reported effective rate — and it provably contains the
true nearest lattice point of every in-box input, so encoding is exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import product as _iterproduct

import numpy as np

_ENUM_GUARD = 5_000_000


def covering_radius(n: int) -> float:
    """Covering radius of the unscaled A*_n."""
    if n < 1:
        raise ValueError(f"lattice dimension must be >= 1, got {n}")
    return math.sqrt(n * (n + 2) / (12.0 * (n + 1)))


def fundamental_volume(n: int) -> float:
    """Volume of the fundamental region of the unscaled A*_n."""
    if n < 1:
        raise ValueError(f"lattice dimension must be >= 1, got {n}")
    return math.sqrt(1.0 / (n + 1))


@dataclass(frozen=True)
class LatticeSpec:
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"lattice dimension must be >= 1, got {self.n}")

    @property
    def covering_radius(self) -> float:
        return covering_radius(self.n)

    @property
    def fundamental_volume(self) -> float:
        return fundamental_volume(self.n)


def embedding_basis(n: int) -> np.ndarray:
    """Fixed orthonormal basis of the zero-sum hyperplane, shape (n, n+1)."""
    basis = np.zeros((n, n + 1))
    for i in range(1, n + 1):
        basis[i - 1, :i] = 1.0
        basis[i - 1, i] = -float(i)
        basis[i - 1] /= math.sqrt(i * (i + 1.0))
    return basis


def glue_vectors(n: int) -> np.ndarray:
    """The n+1 coset representatives of A*_n relative to A_n, shape (n+1, n+1)."""
    g = np.zeros((n + 1, n + 1))
    for i in range(n + 1):
        g[i, : n + 1 - i] = i / (n + 1.0)
        g[i, n + 1 - i :] = i / (n + 1.0) - 1.0
    return g


def _nearest_a_n(w: np.ndarray) -> np.ndarray:
    """Nearest points of A_n for a batch of hyperplane vectors, shape (m, n+1).

    Round coordinatewise, then repair the integer sum deficiency with the
    cheapest unit moves: decrement where the rounding residual is smallest,
    increment where it is largest.
    """
    f = np.rint(w)
    delta = np.rint(f.sum(axis=1)).astype(int)
    resid = w - f
    order = np.argsort(resid, axis=1, kind="stable")
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.broadcast_to(np.arange(w.shape[1]), w.shape), axis=1)
    dec = (delta[:, None] > 0) & (ranks < delta[:, None])
    inc = (delta[:, None] < 0) & (ranks >= w.shape[1] + delta[:, None])
    return f - dec + inc


def _decode_batch(y: np.ndarray, scale: float, basis: np.ndarray, glue: np.ndarray):
    """Nearest A*_n points for rows of y (in R^n).

    Returns (points in R^n, coset indices, integer coset offsets f).
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if not np.all(np.isfinite(y)):
        raise ValueError("non-finite input")
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    m = y.shape[0]
    z = (y / scale) @ basis  # hyperplane coordinates, shape (m, n+1)

    best_d2 = np.full(m, np.inf)
    best_cand = np.zeros((m, z.shape[1]))
    best_coset = np.zeros(m, dtype=int)
    best_f = np.zeros((m, z.shape[1]))
    for i in range(glue.shape[0]):
        f = _nearest_a_n(z - glue[i])
        cand = glue[i] + f
        d2 = np.sum((z - cand) ** 2, axis=1)
        # Tolerance-based tie: prefer the lexicographically smaller candidate.
        fresh = ~np.isfinite(best_d2)
        seen = np.where(fresh, d2, best_d2)
        better = fresh | (d2 < seen - 1e-12 * (1.0 + seen))
        tied = ~fresh & (np.abs(d2 - seen) <= 1e-12 * (1.0 + seen))
        for r in np.nonzero(tied)[0]:
            if tuple(cand[r]) < tuple(best_cand[r]):
                better[r] = True
        best_cand[better] = cand[better]
        best_d2[better] = d2[better]
        best_coset[better] = i
        best_f[better] = f[better]
    points = scale * (best_cand @ basis.T)
    return points, best_coset, best_f.astype(int)


def nearest_point_a_star(y, scale: float) -> np.ndarray:
    """The closest point of scale * A*_n to y in Euclidean distance."""
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    n = y.shape[-1]
    basis = embedding_basis(n)
    glue = glue_vectors(n)
    points, _, _ = _decode_batch(y, scale, basis, glue)
    return points[0] if single else points


def vq_worst_case_error(box, n: int, bits: int) -> float:
    """Worst-case decode error of the scaled lattice over the box interior."""
    if bits < 0:
        raise ValueError(f"rate must be nonnegative, got {bits}")
    lengths = [float(hi) - float(lo) for lo, hi in box]
    if len(lengths) != n:
        raise ValueError(f"box has {len(lengths)} intervals for dimension {n}")
    vol = math.prod(lengths)
    return (vol / ((1 << bits) * fundamental_volume(n))) ** (1.0 / n) * covering_radius(n)


class LatticeQuantizer:
    """A scaled A*_n quantizer with a finite, deterministically indexed codebook."""

    def __init__(self, box, bits: int):
        box = [(float(lo), float(hi)) for lo, hi in box]
        n = len(box)
        if n < 1:
            raise ValueError("empty box")
        if bits < 0 or bits != int(bits):
            raise ValueError(f"rate must be a nonnegative integer, got {bits}")
        lengths = np.array([hi - lo for lo, hi in box])
        if np.any(lengths <= 0):
            raise ValueError("degenerate box: every interval must have positive length")

        self.spec = LatticeSpec(n)
        self.box = tuple(box)
        self.bits = int(bits)
        vol = float(np.prod(lengths))
        self.scale = (vol / ((1 << self.bits) * self.spec.fundamental_volume)) ** (1.0 / n)
        self.basis = embedding_basis(n)
        self._glue = glue_vectors(n)
        self._lo = np.array([lo for lo, _ in box])
        self._hi = np.array([hi for _, hi in box])
        self._build_codebook()

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def worst_case_error(self) -> float:
        return self.scale * self.spec.covering_radius

    @property
    def codebook_size(self) -> int:
        return self.points.shape[0]

    @property
    def effective_bits(self) -> float:
        return math.log2(self.codebook_size)

    def _build_codebook(self):
        n = self.n
        reach = self.worst_case_error
        ylo = (self._lo - reach) / self.scale
        yhi = (self._hi + reach) / self.scale
        # Interval arithmetic on z = basis^T y over the expanded box.
        zmin = np.zeros(n + 1)
        zmax = np.zeros(n + 1)
        for j in range(n + 1):
            col = self.basis[:, j]
            zmin[j] = np.sum(np.minimum(col * ylo, col * yhi))
            zmax[j] = np.sum(np.maximum(col * ylo, col * yhi))

        keys: list[tuple[int, ...]] = []
        rows: list[np.ndarray] = []
        for i in range(n + 1):
            g = self._glue[i]
            f_lo = np.ceil(zmin - g - 1e-9).astype(int)
            f_hi = np.floor(zmax - g + 1e-9).astype(int)
            spans = [range(f_lo[j], f_hi[j] + 1) for j in range(n)]
            count = math.prod(max(0, len(s)) for s in spans)
            if count > _ENUM_GUARD:
                raise ValueError(
                    f"codebook enumeration would visit {count} candidates "
                    f"(guard {_ENUM_GUARD}); lower the rate or split the block"
                )
            if count == 0:
                continue
            grid = np.array(list(_iterproduct(*spans)), dtype=int)
            last = -grid.sum(axis=1)
            ok = (last >= f_lo[n]) & (last <= f_hi[n])
            if not np.any(ok):
                continue
            f = np.column_stack([grid[ok], last[ok]])
            pts = self.scale * ((g + f) @ self.basis.T)
            gap = np.maximum(np.maximum(self._lo - pts, pts - self._hi), 0.0)
            near = np.sqrt(np.sum(gap**2, axis=1)) <= reach * (1.0 + 1e-9)
            for row, fv in zip(pts[near], f[near]):
                keys.append((i, *map(int, fv)))
                rows.append(row)

        order = sorted(range(len(keys)), key=lambda idx: keys[idx])
        self.keys = tuple(keys[idx] for idx in order)
        self.points = (
            np.array([rows[idx] for idx in order]) if rows else np.zeros((0, n))
        )
        self._index = {key: pos for pos, key in enumerate(self.keys)}

    def clamp(self, x: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self._lo, self._hi)

    def quantize(self, v: np.ndarray) -> np.ndarray:
        """Round-trip decode(encode(v))."""
        return vq_decode(self, vq_encode(self, v))

    def worst_case_errors(self) -> np.ndarray:
        # Single scalar bound on the block's Euclidean error.
        return np.array([self.worst_case_error])

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "L": self.bits,
                "box": [list(iv) for iv in self.box],
                "scale": self.scale,
                "basis": self.basis.tolist(),
                "codebook_size": self.codebook_size,
            }
        )

    @staticmethod
    def from_json(text: str) -> "LatticeQuantizer":
        doc = json.loads(text)
        q = LatticeQuantizer(doc["box"], doc["L"])
        if q.codebook_size != doc["codebook_size"]:
            raise ValueError(
                f"codebook size mismatch on reload: {q.codebook_size} != {doc['codebook_size']}"
            )
        if abs(q.scale - doc["scale"]) > 1e-12 * max(1.0, abs(doc["scale"])):
            raise ValueError("scale mismatch on reload")
        return q


def vq_design(box, n: int, bits: int) -> LatticeQuantizer:
    """Scale A*_n so 2^bits cells cover the box volume and enumerate the codebook."""
    box = list(box)
    if len(box) != n:
        raise ValueError(f"box has {len(box)} intervals for dimension {n}")
    return LatticeQuantizer(box, bits)


def vq_encode(q: LatticeQuantizer, x) -> int:
    """Index of the nearest codebook point to clamp(x, box)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (q.n,):
        raise ValueError(f"expected a length-{q.n} vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input")
    xc = q.clamp(x)
    _, coset, f = _decode_batch(xc[None, :], q.scale, q.basis, q._glue)
    key = (int(coset[0]), *map(int, f[0]))
    idx = q._index.get(key)
    if idx is None:
        # In-box inputs always hit the codebook; clamped corner cases fall
        # back to a scan so encoding stays total.
        gaps = q.points - xc[None, :]
        idx = int(np.argmin(np.sum(gaps**2, axis=1)))
    return int(idx)


def vq_decode(q: LatticeQuantizer, index: int) -> np.ndarray:
    if not (0 <= index < q.codebook_size):
        raise ValueError(f"index {index} out of range (codebook size {q.codebook_size})")
    return q.points[index].copy()
