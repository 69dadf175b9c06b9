"""Fixed-point iteration under quantized message passing.

Runs block mappings in Jacobi (all blocks from the old iterate) or
Gauss-Seidel (later blocks see the already-quantized earlier blocks of
the new iterate) order, records the actual quantization residuals e(t),
and evaluates the matching accumulated / worst-case convergence-error
bounds.  The totally asynchronous scheme is supported only through its
bound constants, not as a scheduler.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .norms import BlockPartition, BoxDomain, Lp, NormSpec, WeightedMax, block_norm
from .squant import ScalarBlockQuantizer
from .vquant import LatticeQuantizer


class Scheme(enum.Enum):
    JACOBI = "jacobi"
    GAUSS_SEIDEL = "gauss-seidel"
    ASYNC_BOUND_ONLY = "async-bound-only"


class IdentityQuantizer:
    """Pass-through block quantizer (infinite-rate surrogate)."""

    def quantize(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(v, dtype=float).copy()

    def worst_case_errors(self) -> np.ndarray:
        return np.zeros(1)


@dataclass(frozen=True)
class QuantizerBank:
    """One quantizer per block: scalar banks, lattice quantizers, or wrappers."""

    blocks: tuple

    def __init__(self, blocks: Sequence):
        object.__setattr__(self, "blocks", tuple(blocks))

    def quantize_full(self, x: np.ndarray, part: BlockPartition) -> np.ndarray:
        if len(self.blocks) != part.num_blocks:
            raise ValueError(f"{len(self.blocks)} quantizers for {part.num_blocks} blocks")
        out = np.empty(part.n)
        for k in range(part.num_blocks):
            sl = part.block_slice(k)
            out[sl] = self.blocks[k].quantize(np.asarray(x, dtype=float)[sl])
        return out

    def worst_case_error(self, part: BlockPartition, spec: NormSpec) -> float:
        """Block-norm bound on any single-step quantization error e(t)."""
        spec.check_partition(part)
        worst = 0.0
        for k in range(part.num_blocks):
            q = self.blocks[k]
            norm_k = spec.per_block[k]
            if isinstance(q, LatticeQuantizer):
                if isinstance(norm_k, WeightedMax) or (isinstance(norm_k, Lp) and norm_k.p < 2):
                    raise ValueError(
                        "lattice quantizer error bound requires an L_p block norm with p >= 2"
                    )
                val = q.worst_case_error
            elif isinstance(q, ScalarBlockQuantizer):
                errs = q.worst_case_errors()
                if isinstance(norm_k, WeightedMax):
                    val = float(np.max(errs / np.asarray(norm_k.a)))
                else:
                    val = float(np.sum(errs**norm_k.p)) ** (1.0 / norm_k.p)
            elif isinstance(q, IdentityQuantizer):
                val = 0.0
            else:
                # Wrapped/custom quantizers expose a block-norm bound directly.
                val = float(q.worst_case_block_error(norm_k))
            worst = max(worst, val / spec.block_weights[k])
        return worst


@dataclass(frozen=True)
class BlockMapping:
    """Evaluable mapping T: X -> X with block structure and a declared modulus."""

    fn: Callable[[np.ndarray], np.ndarray]
    partition: BlockPartition
    domain: BoxDomain
    norm: NormSpec
    modulus: float

    def __post_init__(self):
        if not (0.0 <= self.modulus < 1.0):
            raise ValueError(f"modulus must lie in [0, 1), got {self.modulus}")
        if self.domain.n != self.partition.n:
            raise ValueError("domain dimension does not match partition")
        self.norm.check_partition(self.partition)

    def eval_full(self, x: np.ndarray) -> np.ndarray:
        y = np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)
        if y.shape != (self.partition.n,):
            raise ValueError(f"mapping returned shape {y.shape}, expected ({self.partition.n},)")
        return self.domain.clamp(y)

    def eval_block(self, k: int, x: np.ndarray) -> np.ndarray:
        return self.eval_full(x)[self.partition.block_slice(k)]

    def distance(self, x, y) -> float:
        return block_norm(np.asarray(x) - np.asarray(y), self.partition, self.norm)


@dataclass
class Trajectory:
    iterates: np.ndarray  # (steps+1, n)
    errors: np.ndarray  # (steps, n)
    error_norms: np.ndarray  # (steps,)
    scheme: Scheme
    dist_to_ref: Optional[np.ndarray] = None  # (steps+1,) when a reference was given
    reference: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.iterates.shape[0] != self.errors.shape[0] + 1:
            raise ValueError("iterates must contain exactly one more row than errors")

    @property
    def steps(self) -> int:
        return self.errors.shape[0]

    def final(self) -> np.ndarray:
        return self.iterates[-1]

    def to_csv(self, target, mapping: Optional[BlockMapping] = None, x_star=None) -> None:
        """Write rows t, ||x(t)-x*||, ||e(t)||, bound, certificate flag.

        Reference-dependent columns are left blank unless mapping and x_star
        (or a stored reference) are available.
        """
        ref = x_star if x_star is not None else self.reference
        bounds = None
        ok = None
        dists = self.dist_to_ref
        if mapping is not None and ref is not None:
            cert = bound_certificate(self, mapping, ref)
            bounds, ok = cert.bound, cert.ok
            dists = cert.dist

        def fmt(v) -> str:
            return "" if v is None else repr(float(v))

        lines = ["t,err_to_ref,e_norm,bound,certified"]
        for t in range(self.steps + 1):
            row = [
                str(t),
                fmt(dists[t]) if dists is not None else "",
                fmt(self.error_norms[t]) if t < self.steps else "",
                fmt(bounds[t]) if bounds is not None else "",
                ("1" if ok[t] else "0") if ok is not None else "",
            ]
            lines.append(",".join(row))
        text = "\n".join(lines) + "\n"
        if isinstance(target, (str, bytes)):
            with open(target, "w") as fh:
                fh.write(text)
        else:
            target.write(text)


BankOrSchedule = Union[QuantizerBank, Sequence[QuantizerBank], None]


def _bank_for_step(quantizers: BankOrSchedule, t: int, steps: int) -> Optional[QuantizerBank]:
    if quantizers is None or isinstance(quantizers, QuantizerBank):
        return quantizers
    banks = list(quantizers)
    if len(banks) != steps:
        raise ValueError(f"{len(banks)} per-step banks for {steps} steps")
    return banks[t]

def run_iteration(
    mapping: BlockMapping,
    quantizers: BankOrSchedule,
    x0,
    steps: int,
    scheme: Scheme,
    reference=None,
) -> Trajectory:
    """Iterate x(t+1) = T(x(t)) + e(t) for `steps` steps.

    Jacobi evaluates every block at x(t) and then quantizes; Gauss-Seidel
    evaluates block k at the partially updated iterate whose earlier blocks
    already hold their *quantized* values, so the quantized message — not
    the raw one — is what later blocks consume.  With quantizers=None the
    dynamics reduce to the exact iteration and e(t) = 0.
    """
    if scheme == Scheme.ASYNC_BOUND_ONLY:
        raise ValueError("the asynchronous scheme has bound calculators only; run Jacobi or Gauss-Seidel")
    if steps < 1:
        raise ValueError(f"step count must be >= 1, got {steps}")
    part = mapping.partition
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (part.n,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({part.n},)")
    if not mapping.domain.contains(x, tol=1e-9):
        raise ValueError("x0 lies outside the box domain")

    iterates = np.empty((steps + 1, part.n))
    errors = np.empty((steps, part.n))
    error_norms = np.empty(steps)
    iterates[0] = x

    for t in range(steps):
        bank = _bank_for_step(quantizers, t, steps)
        if scheme == Scheme.JACOBI:
            raw = mapping.eval_full(x)
            if bank is None:
                new = raw
                e = np.zeros(part.n)
            else:
                new = np.empty(part.n)
                e = np.empty(part.n)
                for k in range(part.num_blocks):
                    sl = part.block_slice(k)
                    q = bank.blocks[k].quantize(raw[sl])
                    new[sl] = q
                    e[sl] = q - raw[sl]
        else:  # Gauss-Seidel sweep over all blocks
            y = x.copy()
            e = np.zeros(part.n)
            for k in range(part.num_blocks):
                sl = part.block_slice(k)
                raw_k = mapping.eval_block(k, y)
                q = raw_k if bank is None else bank.blocks[k].quantize(raw_k)
                e[sl] = q - raw_k
                y[sl] = q
            new = y
        x = new
        iterates[t + 1] = x
        errors[t] = e
        error_norms[t] = block_norm(e, part, mapping.norm)

    traj = Trajectory(iterates, errors, error_norms, scheme)
    if reference is not None:
        ref = np.asarray(reference, dtype=float)
        traj.reference = ref
        traj.dist_to_ref = np.array([mapping.distance(iterates[t], ref) for t in range(steps + 1)])
    return traj


def _scheme_factor(alpha: float, scheme: Scheme, num_blocks: Optional[int]) -> float:
    if scheme == Scheme.JACOBI:
        return 1.0
    if scheme == Scheme.GAUSS_SEIDEL:
        if num_blocks is None:
            raise ValueError("Gauss-Seidel bounds need the block count")
        return (1.0 - alpha**num_blocks) / (1.0 - alpha)
    if scheme == Scheme.ASYNC_BOUND_ONLY:
        return 1.0 / (1.0 - alpha)
    raise ValueError(f"unknown scheme {scheme}")


def accumulated_error(
    alpha: float,
    error_norms: Sequence[float],
    scheme: Scheme = Scheme.JACOBI,
    num_blocks: Optional[int] = None,
) -> float:
    """Accumulated error E(t) from the recorded per-step ||e(l)||, l < t."""
    if not (0.0 <= alpha < 1.0):
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    norms = np.asarray(error_norms, dtype=float)
    if norms.size == 0:
        raise ValueError("need at least one error norm")
    t = norms.size
    powers = alpha ** np.arange(t - 1, -1, -1, dtype=float)
    return float(np.dot(powers, norms)) * _scheme_factor(alpha, scheme, num_blocks)


def accumulated_error_series(
    alpha: float,
    error_norms: Sequence[float],
    scheme: Scheme = Scheme.JACOBI,
    num_blocks: Optional[int] = None,
) -> np.ndarray:
    """E(t) for t = 0..len(error_norms), with E(0) = 0."""
    if not (0.0 <= alpha < 1.0):
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    norms = np.asarray(error_norms, dtype=float)
    factor = _scheme_factor(alpha, scheme, num_blocks)
    out = np.zeros(norms.size + 1)
    acc = 0.0
    for t in range(norms.size):
        acc = alpha * acc + norms[t]
        out[t + 1] = factor * acc
    return out


def worst_case_error_bound(
    alpha: float,
    e_bar_norm: float,
    t: Union[int, float] = math.inf,
    scheme: Scheme = Scheme.JACOBI,
    num_blocks: Optional[int] = None,
) -> float:
    """Worst-case bound E-bar(t) (t = inf for the limiting bound)."""
    if not (0.0 <= alpha < 1.0):
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    if e_bar_norm < 0:
        raise ValueError("worst-case single-step error must be nonnegative")
    geo = 1.0 / (1.0 - alpha) if math.isinf(t) else (1.0 - alpha**t) / (1.0 - alpha)
    return geo * e_bar_norm * _scheme_factor(alpha, scheme, num_blocks)


@dataclass(frozen=True)
class BoundCertificate:
    ok: np.ndarray  # (steps+1,) bool
    bound: np.ndarray  # (steps+1,)
    dist: np.ndarray  # (steps+1,)

    def all_ok(self) -> bool:
        return bool(np.all(self.ok))


def bound_certificate(traj: Trajectory, mapping: BlockMapping, x_star) -> BoundCertificate:
    """Check ||x(t)-x*|| <= alpha^t ||x(0)-x*|| + E(t) at every step."""
    if x_star is None:
        raise ValueError("a reference fixed point is required")
    ref = np.asarray(x_star, dtype=float)
    alpha = mapping.modulus
    scheme = traj.scheme
    num_blocks = mapping.partition.num_blocks
    d = np.array([mapping.distance(traj.iterates[t], ref) for t in range(traj.steps + 1)])
    E = accumulated_error_series(alpha, traj.error_norms, scheme, num_blocks)
    t_idx = np.arange(traj.steps + 1, dtype=float)
    bound = alpha**t_idx * d[0] + E
    ok = d <= bound + 1e-9
    return BoundCertificate(ok=ok, bound=bound, dist=d)


def reference_fixed_point(
    mapping: BlockMapping,
    x0=None,
    tol: float = 1e-12,
    max_steps: int = 100_000,
) -> np.ndarray:
    """Fixed point via the exact (unquantized) Jacobi iteration."""
    if x0 is None:
        x = 0.5 * (np.asarray(mapping.domain.lo) + np.asarray(mapping.domain.hi))
    else:
        x = np.asarray(x0, dtype=float).copy()
    for _ in range(max_steps):
        nxt = mapping.eval_full(x)
        if mapping.distance(nxt, x) < tol:
            return nxt
        x = nxt
    raise RuntimeError(f"fixed-point iteration did not reach residual {tol} in {max_steps} steps")


@dataclass(frozen=True)
class ProbeReport:
    candidates: np.ndarray  # (c, n) quantizer outputs inside the ball
    stationary: np.ndarray  # (c,) bool
    fraction: float
    fixed_point_found: bool
    message: str


def stationary_probe(
    mapping: BlockMapping,
    quantizers: QuantizerBank,
    samples: int,
    radius: float,
    x_star=None,
    rng=None,
) -> ProbeReport:
    """Sampled surrogate for the stationary-set conditions.

    Draws points in the block-norm ball of the given radius around x*,
    collects their quantizer outputs that lie in the ball, and reports the
    fraction that are fixed points of Q(T(.)).
    """
    part = mapping.partition
    rng = np.random.default_rng(rng)
    star = reference_fixed_point(mapping) if x_star is None else np.asarray(x_star, dtype=float)

    probes = [star.copy()]
    for _ in range(max(0, samples)):
        g = rng.uniform(-1.0, 1.0, size=part.n)
        c = block_norm(g, part, mapping.norm)
        if c > 0:
            g = g * (rng.uniform(0.0, 1.0) * radius / c)
        probes.append(mapping.domain.clamp(star + g))

    seen: dict[tuple, np.ndarray] = {}
    for x in probes:
        if mapping.distance(x, star) > radius + 1e-12:
            continue
        y = quantizers.quantize_full(x, part)
        if mapping.distance(y, star) > radius + 1e-12:
            continue
        seen.setdefault(tuple(y), y)

    cands = np.array(list(seen.values())) if seen else np.zeros((0, part.n))
    if cands.shape[0] == 0:
        return ProbeReport(
            candidates=cands,
            stationary=np.zeros(0, dtype=bool),
            fraction=0.0,
            fixed_point_found=False,
            message="no stationary point sampled",
        )
    flags = np.zeros(cands.shape[0], dtype=bool)
    for i, y in enumerate(cands):
        z = quantizers.quantize_full(mapping.eval_full(y), part)
        flags[i] = bool(np.allclose(z, y, rtol=0.0, atol=1e-12))
    frac = float(np.mean(flags))
    return ProbeReport(
        candidates=cands,
        stationary=flags,
        fraction=frac,
        fixed_point_found=bool(np.any(flags)),
        message=f"{int(flags.sum())} of {cands.shape[0]} sampled quantizer outputs are stationary",
    )


# ---------------------------------------------------------------------------
# Synthetic affine contractions with an exactly known modulus
# ---------------------------------------------------------------------------

def affine_contraction(
    matrix: np.ndarray,
    offset: np.ndarray,
    part: BlockPartition,
    domain: BoxDomain,
    spec: NormSpec,
    modulus: float,
) -> BlockMapping:
    """T(x) = clamp(A x + b) as a BlockMapping with a declared modulus."""
    A = np.asarray(matrix, dtype=float)
    b = np.asarray(offset, dtype=float)

    def fn(x: np.ndarray) -> np.ndarray:
        return A @ x + b

    return BlockMapping(fn=fn, partition=part, domain=domain, norm=spec, modulus=modulus)


def _norm_kind(norm) -> tuple:
    if isinstance(norm, WeightedMax):
        return ("wmax", norm.size)
    return ("lp", norm.p)


def random_affine_contraction(
    part: BlockPartition,
    spec: NormSpec,
    domain: BoxDomain,
    alpha: float,
    rng=None,
) -> tuple[BlockMapping, np.ndarray]:
    """Random affine contraction whose block-norm modulus is *exactly* alpha.

    Block row k holds a single nonzero block B_k in column pi(k), where pi
    permutes blocks of identical size and norm kind.  Each B_k is a norm
    isometry (signed permutation, weight-rescaled for weighted-max blocks,
    orthogonal for p = 2) scaled by alpha * w_k / w_pi(k), which makes
    ||A x|| = alpha ||x|| hold with equality for every x.  The returned
    fixed point is placed in the interior of the box.
    """
    if not (0.0 <= alpha < 1.0):
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    rng = np.random.default_rng(rng)
    spec.check_partition(part)
    K = part.num_blocks
    n = part.n

    # Permute only among blocks sharing (size, norm kind).
    groups: dict[tuple, list[int]] = {}
    for k in range(K):
        key = (part.block_sizes[k],) + _norm_kind(spec.per_block[k])
        groups.setdefault(key, []).append(k)
    pi = np.empty(K, dtype=int)
    for members in groups.values():
        perm = rng.permutation(len(members))
        for pos, k in enumerate(members):
            pi[k] = members[perm[pos]]

    A = np.zeros((n, n))
    for k in range(K):
        src = int(pi[k])
        nk = part.block_sizes[k]
        norm_k = spec.per_block[k]
        if isinstance(norm_k, Lp) and norm_k.p == 2.0:
            core, _ = np.linalg.qr(rng.standard_normal((nk, nk)))
            if np.linalg.det(core) < 0:
                core[:, 0] = -core[:, 0]
        else:
            perm = rng.permutation(nk)
            signs = rng.choice([-1.0, 1.0], size=nk)
            core = np.zeros((nk, nk))
            for i in range(nk):
                core[i, perm[i]] = signs[i]
            if isinstance(norm_k, WeightedMax):
                a_tgt = np.asarray(norm_k.a)
                a_src = np.asarray(spec.per_block[src].a)
                for i in range(nk):
                    core[i, perm[i]] *= a_tgt[i] / a_src[perm[i]]
        scale = alpha * spec.block_weights[k] / spec.block_weights[src]
        rows = part.block_slice(k)
        cols = part.block_slice(src)
        A[rows, cols] = scale * core

    lo = np.asarray(domain.lo)
    hi = np.asarray(domain.hi)
    u = rng.uniform(0.15, 0.85, size=n)
    x_star = lo + u * (hi - lo)
    b = x_star - A @ x_star
    return affine_contraction(A, b, part, domain, spec, alpha), x_star
