"""Block partitions and the norms used throughout the package.

Three norms are provided: the weighted maximum norm max_m |x_m|/a_m,
the L_p norm, and the weighted block-maximum norm

    ||x||_block = max_k ||x_{M_k}||_k / w_k

where the state vector is split into K contiguous blocks M_k and each
block carries its own component norm (weighted-max or L_p).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np


@dataclass(frozen=True)
class BlockPartition:
    """Contiguous decomposition of an n-dimensional state into K blocks.

    Block k covers coordinates [offsets[k], offsets[k+1]); the offsets are
    cumulative sums of the block sizes.
    """

    block_sizes: tuple[int, ...]

    def __init__(self, block_sizes: Sequence[int]):
        sizes = tuple(int(s) for s in block_sizes)
        if len(sizes) < 1:
            raise ValueError("need at least one block")
        if any(s < 1 for s in sizes):
            raise ValueError(f"block sizes must be positive, got {sizes}")
        object.__setattr__(self, "block_sizes", sizes)

    @property
    def n(self) -> int:
        return sum(self.block_sizes)

    @property
    def num_blocks(self) -> int:
        return len(self.block_sizes)

    @property
    def offsets(self) -> tuple[int, ...]:
        out = [0]
        for s in self.block_sizes:
            out.append(out[-1] + s)
        return tuple(out)

    def block_slice(self, k: int) -> slice:
        off = self.offsets
        return slice(off[k], off[k + 1])

    def block_of(self, m: int) -> int:
        """Index of the block containing coordinate m."""
        off = self.offsets
        for k in range(self.num_blocks):
            if off[k] <= m < off[k + 1]:
                return k
        raise IndexError(f"coordinate {m} outside 0..{self.n - 1}")

    def split(self, x: np.ndarray) -> list[np.ndarray]:
        x = np.asarray(x)
        return [x[self.block_slice(k)] for k in range(self.num_blocks)]


@dataclass(frozen=True)
class WeightedMax:
    """Per-block weighted maximum norm with coordinate weights a_m > 0."""

    a: tuple[float, ...]

    def __init__(self, a: Sequence[float]):
        aa = tuple(float(v) for v in a)
        if any(v <= 0 for v in aa):
            raise ValueError("weighted-max weights must be positive")
        object.__setattr__(self, "a", aa)

    @property
    def size(self) -> int:
        return len(self.a)

    def __call__(self, v: np.ndarray) -> float:
        return weighted_max_norm(v, self.a)


@dataclass(frozen=True)
class Lp:
    """Per-block L_p norm, p >= 1."""

    p: float

    def __post_init__(self):
        if not (self.p >= 1.0):
            raise ValueError(f"p must be >= 1, got {self.p}")

    def __call__(self, v: np.ndarray) -> float:
        return lp_norm(v, self.p)


PerBlockNorm = Union[WeightedMax, Lp]


@dataclass(frozen=True)
class NormSpec:
    """Block weights w plus one component norm per block."""

    block_weights: tuple[float, ...]
    per_block: tuple[PerBlockNorm, ...]

    def __init__(self, block_weights: Sequence[float], per_block: Sequence[PerBlockNorm]):
        w = tuple(float(v) for v in block_weights)
        pb = tuple(per_block)
        if any(v <= 0 for v in w):
            raise ValueError("block weights must be positive")
        if len(w) != len(pb):
            raise ValueError("one component norm per block weight required")
        for item in pb:
            if not isinstance(item, (WeightedMax, Lp)):
                raise TypeError(f"unsupported per-block norm {item!r}")
        object.__setattr__(self, "block_weights", w)
        object.__setattr__(self, "per_block", pb)

    def check_partition(self, part: BlockPartition) -> None:
        if len(self.block_weights) != part.num_blocks:
            raise ValueError(
                f"{len(self.block_weights)} block norms for {part.num_blocks} blocks"
            )
        for k, item in enumerate(self.per_block):
            if isinstance(item, WeightedMax) and item.size != part.block_sizes[k]:
                raise ValueError(
                    f"block {k}: {item.size} weights for size {part.block_sizes[k]}"
                )

    def to_json(self, part: BlockPartition) -> str:
        self.check_partition(part)
        per_block = []
        for item in self.per_block:
            if isinstance(item, WeightedMax):
                per_block.append({"kind": "wmax", "a": list(item.a)})
            else:
                per_block.append({"kind": "lp", "p": item.p})
        doc = {
            "blocks": list(part.block_sizes),
            "w": list(self.block_weights),
            "per_block": per_block,
        }
        return json.dumps(doc)

    @staticmethod
    def from_json(text: str) -> tuple["BlockPartition", "NormSpec"]:
        doc = json.loads(text)
        part = BlockPartition(doc["blocks"])
        per_block: list[PerBlockNorm] = []
        for entry in doc["per_block"]:
            if entry["kind"] == "wmax":
                per_block.append(WeightedMax(entry["a"]))
            elif entry["kind"] == "lp":
                per_block.append(Lp(entry["p"]))
            else:
                raise ValueError(f"unknown per-block norm kind {entry['kind']!r}")
        spec = NormSpec(doc["w"], per_block)
        spec.check_partition(part)
        return part, spec


@dataclass(frozen=True)
class BoxDomain:
    """Per-coordinate closed intervals [lo_m, hi_m]."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __init__(self, intervals: Sequence[Sequence[float]]):
        lo = tuple(float(iv[0]) for iv in intervals)
        hi = tuple(float(iv[1]) for iv in intervals)
        for m, (a, b) in enumerate(zip(lo, hi)):
            if not (a <= b):
                raise ValueError(f"interval {m} has lo {a} > hi {b}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def lengths(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)

    def clamp(self, x: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lo, self.hi)

    def contains(self, x: np.ndarray, tol: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(
            np.all(x >= np.asarray(self.lo) - tol) and np.all(x <= np.asarray(self.hi) + tol)
        )

    def subbox(self, sl: slice) -> "BoxDomain":
        return BoxDomain(list(zip(self.lo[sl], self.hi[sl])))

    def intervals(self) -> list[tuple[float, float]]:
        return list(zip(self.lo, self.hi))


def weighted_max_norm(x: Sequence[float], a: Sequence[float]) -> float:
    """max_m |x_m| / a_m with positive coordinate weights a."""
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    if x.shape != a.shape:
        raise ValueError(f"length mismatch: x has {x.shape}, a has {a.shape}")
    if np.any(a <= 0):
        raise ValueError("weights must be positive")
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(x) / a))


def _kahan_sum_squares(x: np.ndarray) -> float:
    """Compensated sum of squares (Kahan) for the p = 2 case."""
    total = 0.0
    carry = 0.0
    for v in x:
        term = v * v - carry
        t = total + term
        carry = (t - total) - term
        total = t
    return total


def lp_norm(x: Sequence[float], p: float) -> float:
    """(sum |x_m|^p)^(1/p) for p >= 1."""
    if not (p >= 1.0):
        raise ValueError(f"p must be >= 1, got {p}")
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0.0
    scale = float(np.max(np.abs(x)))
    if scale == 0.0:
        return 0.0
    y = np.abs(x) / scale
    if p == 2.0:
        return scale * math.sqrt(_kahan_sum_squares(y))
    return scale * float(np.sum(y**p)) ** (1.0 / p)


def block_norm(x: Sequence[float], part: BlockPartition, spec: NormSpec) -> float:
    """Weighted block-maximum norm max_k ||x_{M_k}||_k / w_k."""
    x = np.asarray(x, dtype=float)
    if x.size != part.n:
        raise ValueError(f"vector length {x.size} != partition dimension {part.n}")
    spec.check_partition(part)
    best = 0.0
    for k in range(part.num_blocks):
        val = spec.per_block[k](x[part.block_slice(k)]) / spec.block_weights[k]
        if val > best:
            best = val
    return best


def uniform_l2_spec(part: BlockPartition) -> NormSpec:
    """Unit-weight spec with a plain Euclidean norm on every block."""
    return NormSpec([1.0] * part.num_blocks, [Lp(2.0)] * part.num_blocks)


def uniform_wmax_spec(part: BlockPartition) -> NormSpec:
    """Unit-weight spec with unweighted max norm on every block."""
    return NormSpec(
        [1.0] * part.num_blocks,
        [WeightedMax([1.0] * s) for s in part.block_sizes],
    )
