"""Feasible sets, projections, projected gradients, and regret bookkeeping.

The feasible set is a product of per-coordinate boxes and one probability
simplex (the mixture-weight block), so the Euclidean projection decomposes
into a componentwise clamp plus a sort-and-threshold simplex projection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "FeasibleSet",
    "GradAccumulator",
    "RegretTrace",
    "project_box",
    "project_simplex",
    "project_C",
    "projected_gradient",
    "lazy_step",
    "regret_update",
    "variation_m",
]

SIMPLEX_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class FeasibleSet:
    """Box bounds per scalar plus one simplex block.

    ``lower``/``upper`` hold the box bounds; entries inside the simplex block
    are ``-inf``/``+inf`` so a componentwise clamp leaves that block alone.
    ``log_sample`` marks box coordinates that random search should draw
    log-uniformly (wide positive scale ranges).
    """

    lower: np.ndarray
    upper: np.ndarray
    simplex: slice
    log_sample: np.ndarray | None = None

    def __post_init__(self) -> None:
        lower = np.asarray(self.lower, dtype=float).copy()
        upper = np.asarray(self.upper, dtype=float).copy()
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("lower/upper bounds must be 1-d arrays of equal length")
        d = lower.size
        start, stop, step = self.simplex.indices(d)
        if step != 1 or stop - start < 1:
            raise ValueError("simplex block must be a contiguous slice of length >= 1")
        lower[self.simplex] = -np.inf
        upper[self.simplex] = np.inf
        if np.any(lower > upper):
            raise ValueError("every lower bound must not exceed its upper bound")
        log_sample = self.log_sample
        if log_sample is None:
            log_sample = np.zeros(d, dtype=bool)
        else:
            log_sample = np.asarray(log_sample, dtype=bool).copy()
            if log_sample.shape != (d,):
                raise ValueError("log_sample mask must match the vector length")
        log_sample[self.simplex] = False
        for a in (lower, upper, log_sample):
            a.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "log_sample", log_sample)
        object.__setattr__(self, "simplex", slice(start, stop))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def box_mask(self) -> np.ndarray:
        mask = np.ones(self.dim, dtype=bool)
        mask[self.simplex] = False
        return mask

    def contains(self, v, tol: float = 1e-9) -> bool:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,):
            return False
        if np.any(v < self.lower - tol) or np.any(v > self.upper + tol):
            return False
        w = v[self.simplex]
        return bool(np.all(w >= -tol) and abs(float(w.sum()) - 1.0) <= max(tol, SIMPLEX_TOL))

    @classmethod
    def for_kinds(cls, kinds: Sequence[str], bounds: Mapping[str, tuple[float, float]]) -> "FeasibleSet":
        """Build a feasible set from per-scalar kind labels.

        ``kinds`` contains one of ``"scale" | "period" | "mixture" | "ridge"``
        per coordinate (the mixture block must be contiguous); ``bounds`` maps
        each non-mixture kind to its ``(lower, upper)`` interval. Positive
        scale intervals are marked for log-uniform sampling.
        """
        kinds = list(kinds)
        d = len(kinds)
        lower = np.full(d, -np.inf)
        upper = np.full(d, np.inf)
        log_sample = np.zeros(d, dtype=bool)
        mix = [i for i, k in enumerate(kinds) if k == "mixture"]
        if not mix:
            raise ValueError("kinds must contain at least one 'mixture' entry")
        if mix != list(range(mix[0], mix[-1] + 1)):
            raise ValueError("mixture block must be contiguous")
        for i, kind in enumerate(kinds):
            if kind == "mixture":
                continue
            try:
                lo, hi = bounds[kind]
            except KeyError:
                raise ValueError(f"no bounds given for hyperparameter kind {kind!r}") from None
            lower[i], upper[i] = float(lo), float(hi)
            if kind == "scale" and lo > 0:
                log_sample[i] = True
        return cls(lower, upper, slice(mix[0], mix[-1] + 1), log_sample)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """Draw one feasible vector: uniform (or log-uniform) boxes, uniform simplex."""
        v = np.empty(self.dim)
        for i in range(self.dim):
            if self.simplex.start <= i < self.simplex.stop:
                continue
            lo, hi = self.lower[i], self.upper[i]
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise ValueError("cannot sample from an unbounded box coordinate")
            if self.log_sample[i]:
                v[i] = np.exp(rng.uniform(np.log(lo), np.log(hi)))
                v[i] = min(max(v[i], lo), hi)
            else:
                v[i] = rng.uniform(lo, hi)
        m = self.simplex.stop - self.simplex.start
        v[self.simplex] = project_simplex(rng.uniform(0.0, 1.0, m))
        return v


def project_box(v, feasible: FeasibleSet) -> np.ndarray:
    """Clamp box coordinates to their bounds; the simplex block passes through."""
    v = np.asarray(v, dtype=float)
    if v.shape != (feasible.dim,):
        raise ValueError(f"expected vector of length {feasible.dim}, got {v.shape}")
    return np.clip(v, feasible.lower, feasible.upper)


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto ``{w : sum(w) = 1, w >= 0}``.

    Sort-and-threshold method, O(M log M).
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size < 1:
        raise ValueError("expected a non-empty 1-d vector")
    if v.size == 1:
        return np.array([1.0])
    # already feasible: return as-is so the projection is exactly idempotent
    if v.min() >= 0.0 and abs(float(v.sum()) - 1.0) <= SIMPLEX_TOL:
        return v.copy()
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, v.size + 1)
    rho = j[u + (1.0 - css) / j > 0][-1]
    tau = (css[rho - 1] - 1.0) / rho
    return np.maximum(v - tau, 0.0)


def project_C(v, feasible: FeasibleSet) -> np.ndarray:
    """Projection onto the full feasible set (box clamp + simplex block)."""
    out = project_box(v, feasible)
    out[feasible.simplex] = project_simplex(out[feasible.simplex])
    return out


def projected_gradient(z, g, eta: float, feasible: FeasibleSet) -> np.ndarray:
    """The projected-gradient map ``(z - proj(z - eta*g)) / eta``.

    Vanishes exactly at constrained stationary points and reduces to ``g``
    whenever the step stays interior.
    """
    if not eta > 0:
        raise ValueError(f"step size must be positive, got {eta}")
    z = np.asarray(z, dtype=float)
    g = np.asarray(g, dtype=float)
    return (z - project_C(z - eta * g, feasible)) / eta


@dataclass
class GradAccumulator:
    """Running sum of per-step gradients within one update window."""

    dim: int
    sum: np.ndarray = field(default=None)  # type: ignore[assignment]
    count: int = 0

    def __post_init__(self) -> None:
        if self.sum is None:
            self.sum = np.zeros(self.dim)

    def add(self, g) -> None:
        g = np.asarray(g, dtype=float)
        if g.shape != (self.dim,):
            raise ValueError(f"expected gradient of length {self.dim}, got {g.shape}")
        self.sum = self.sum + g
        self.count += 1

    def reset(self) -> None:
        self.sum = np.zeros(self.dim)
        self.count = 0


def lazy_step(z, acc: GradAccumulator, eta: float, m: int, feasible: FeasibleSet) -> np.ndarray:
    """One lazy projected update: ``proj(z - (eta/m) * acc.sum)``.

    The accumulator must hold exactly ``m`` gradients; clearing it afterwards
    is the caller's responsibility.
    """
    if acc.count != m:
        raise ValueError(f"accumulator holds {acc.count} gradients, expected window size {m}")
    z = np.asarray(z, dtype=float)
    return project_C(z - (eta / m) * acc.sum, feasible)


@dataclass
class RegretTrace:
    """Per-step squared projected-gradient norms and their running total."""

    sq_norms: list[float] = field(default_factory=list)
    totals: list[float] = field(default_factory=list)

    @property
    def total(self) -> float:
        return self.totals[-1] if self.totals else 0.0

    def __len__(self) -> int:
        return len(self.sq_norms)


def regret_update(trace: RegretTrace, z, g, eta: float, feasible: FeasibleSet) -> RegretTrace:
    """Append ``||P(z, g, eta)||^2`` to the trace and update the running total."""
    p = projected_gradient(z, g, eta, feasible)
    s = float(p @ p)
    trace.sq_norms.append(s)
    trace.totals.append(trace.total + s)
    return trace


def variation_m(gradients) -> float:
    """Largest within-window gradient variation over a grid of probe points.

    ``gradients[i][k]`` is the gradient of the i-th loss in the window at
    probe point k (a vector, or a scalar for 1-d problems). Returns
    ``max_k sum_i ||gradients[i][k] - mean_i gradients[i][k]||^2``.
    """
    g = np.asarray(gradients, dtype=float)
    if g.ndim == 2:
        g = g[:, :, None]
    if g.ndim != 3 or g.shape[0] < 1:
        raise ValueError("expected gradients with shape (window, grid, dim)")
    if g.shape[1] < 1:
        raise ValueError("probe grid must be non-empty")
    dev = g - g.mean(axis=0, keepdims=True)
    per_point = np.einsum("mgd,mgd->g", dev, dev)
    return float(per_point.max())
