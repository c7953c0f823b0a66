"""Closed-form kernel ridge regression with exact hyperparameter gradients.

Fitting solves ``(K + ridge*I) theta = y`` through a cached Cholesky
factorization. The same factorization backs the Jacobian of the dual
coefficients with respect to every hyperparameter,

    d theta / d lam_i = -(K + ridge*I)^{-1} (dA/d lam_i) theta,

where ``dA/d lam_i`` is the analytic Gram derivative for kernel
hyperparameters and the identity for the ridge constant. The per-step
squared-error loss then has an exact gradient assembled from the cross
vector, its analytic derivatives, and the cached Jacobian columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import NumericalError
from .kernels import CompositeKernel, TimedPoint, _readonly, window_arrays

__all__ = [
    "HyperParams",
    "TrainedModel",
    "fit",
    "predict",
    "predict_batch",
    "loss",
    "theta_jacobian",
    "loss_hyper_gradient",
    "training_arrays",
]


@dataclass(frozen=True, eq=False)
class HyperParams:
    """Full hyperparameter vector: composite kernel scalars plus the ridge constant.

    The flat ordering is kernel component parameters, then mixture weights,
    then ``ridge`` last.
    """

    kernel: CompositeKernel
    ridge: float

    def __post_init__(self) -> None:
        if not self.ridge > 0:
            raise ValueError(f"ridge constant must be positive, got {self.ridge}")
        object.__setattr__(self, "ridge", float(self.ridge))

    @property
    def dim(self) -> int:
        return self.kernel.n_scalars + 1

    @property
    def ridge_index(self) -> int:
        return self.kernel.n_scalars

    def scalar_kinds(self) -> list[str]:
        return [*self.kernel.scalar_kinds(), "ridge"]

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.kernel.scalars(), [self.ridge]])

    def from_vector(self, values, require_simplex: bool = True) -> "HyperParams":
        """Rebuild hyperparameters of this shape from a flat vector."""
        values = np.asarray(values, dtype=float)
        if values.shape != (self.dim,):
            raise ValueError(f"expected vector of length {self.dim}, got {values.shape}")
        kernel = self.kernel.with_scalars(values[:-1], require_simplex=require_simplex)
        return HyperParams(kernel, float(values[-1]))


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """Dual coefficients plus the cached factorization and training window."""

    hypers: HyperParams
    times: np.ndarray
    lags: np.ndarray
    targets: np.ndarray
    theta: np.ndarray
    gram: np.ndarray
    component_grams: tuple[np.ndarray, ...]
    cho: tuple

    @property
    def n(self) -> int:
        return self.theta.size

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Apply the cached factorization: solve ``(K + ridge*I) x = b``."""
        return cho_solve(self.cho, b)


def training_arrays(window) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(times, lags, targets)`` from a dataset or ``(TimedPoint, y)`` pairs."""
    targets = getattr(window, "targets", None)
    if targets is not None:
        times, lags = window_arrays(window)
        return times, lags, np.asarray(targets, dtype=float)
    pairs = list(window)
    if not pairs:
        raise ValueError("training window must contain at least one pair")
    points, ys = zip(*pairs)
    times, lags = window_arrays(points)
    return times, lags, np.asarray(ys, dtype=float)


def fit(hypers: HyperParams, window) -> TrainedModel:
    """Solve the regularized kernel system in closed form.

    Raises :class:`NumericalError` if the factorization fails despite the
    positive ridge (a numerically indefinite system).
    """
    times, lags, y = training_arrays(window)
    blocks = hypers.kernel.component_blocks(times, lags)
    w = hypers.kernel.weights
    gram = w[0] * blocks[0]
    for wm, b in zip(w[1:], blocks[1:]):
        gram += wm * b
    a = gram + hypers.ridge * np.eye(y.size)
    try:
        factor = cho_factor(a, lower=True)
    except LinAlgError as exc:
        raise NumericalError(
            f"kernel system factorization failed at ridge={hypers.ridge!r} (n={y.size})"
        ) from exc
    theta = cho_solve(factor, y)
    residual = y - a @ theta
    if np.linalg.norm(residual) > 1e-10 * max(1.0, np.linalg.norm(y)):
        # a single refinement pass keeps the residual bound on ill-conditioned systems
        theta = theta + cho_solve(factor, residual)
    return TrainedModel(
        hypers=hypers,
        times=_readonly(times),
        lags=_readonly(lags),
        targets=_readonly(y),
        theta=_readonly(theta),
        gram=_readonly(gram),
        component_grams=tuple(_readonly(b) for b in blocks),
        cho=factor,
    )


def _check_query(model: TrainedModel, x: np.ndarray) -> None:
    if x.shape[-1] != model.lags.shape[1]:
        raise ValueError(
            f"query lag vector of length {x.shape[-1]} does not match training "
            f"lag order {model.lags.shape[1]}"
        )


def predict(model: TrainedModel, query: TimedPoint) -> float:
    """Kernel prediction: cross vector against the window, dotted with theta."""
    _check_query(model, query.x)
    k = model.hypers.kernel.cross(query.t, query.x, model.times, model.lags)
    return float(k @ model.theta)


def predict_batch(model: TrainedModel, queries) -> np.ndarray:
    """Predictions for many query points at once."""
    qt, qx = window_arrays(queries)
    _check_query(model, qx)
    return model.hypers.kernel.cross_many(qt, qx, model.times, model.lags) @ model.theta


def loss(y_true: float, y_pred: float) -> float:
    """Squared error."""
    return (y_true - y_pred) ** 2


def theta_jacobian(model: TrainedModel) -> np.ndarray:
    """Jacobian of the dual coefficients, shape ``(n, dim)``.

    Column ``i`` solves the cached system against ``-(dA/d lam_i) theta``;
    the final column is the ridge direction with ``dA/d ridge = I``.
    """
    cols = [
        model.solve(-(da @ model.theta))
        for da in model.hypers.kernel.iter_block_derivs(model.times, model.lags)
    ]
    cols.append(model.solve(-model.theta))
    return np.column_stack(cols)


def loss_hyper_gradient(
    model: TrainedModel, jac: np.ndarray, query: TimedPoint, y_true: float
) -> np.ndarray:
    """Exact gradient of the squared prediction error w.r.t. all hyperparameters.

    Kernel components combine the analytic cross-vector derivative with the
    cached Jacobian column; the ridge component uses the Jacobian column
    alone. Each scalar costs one length-n inner product against its Jacobian
    column plus the cross-derivative term.
    """
    d = model.hypers.dim
    if jac.shape != (model.n, d):
        raise ValueError(f"Jacobian shape {jac.shape} does not match (n, dim)=({model.n}, {d})")
    _check_query(model, query.x)
    spec = model.hypers.kernel
    k = spec.cross(query.t, query.x, model.times, model.lags)
    dk = spec.cross_derivs_all(query.t, query.x, model.times, model.lags)
    residual = y_true - float(k @ model.theta)
    ns = spec.n_scalars
    grad = np.empty(d)
    grad[:ns] = -2.0 * residual * (dk @ model.theta + k @ jac[:, :ns])
    grad[ns] = -2.0 * residual * float(k @ jac[:, ns])
    return grad
