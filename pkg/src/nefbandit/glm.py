"""Regularized maximum-likelihood estimation for linearly tilted rewards.

The loss of a parameter theta on rows (x_i, y_i) is

    L(theta) = (lam/2) ||theta||^2 + sum_i [psi(x_i' theta) - y_i x_i' theta],

strictly convex for lam > 0.  Its curvature is carried by the mean
function: the gradient map g(theta) = sum_i mu(x_i' theta) x_i +
lam theta satisfies grad L = g(theta) - sum_i x_i y_i, the Hessian is
lam I + sum_i mu'(x_i' theta) x_i x_i', and the secant matrix built
from difference quotients of mu turns gradient gaps into exact linear
maps of parameter gaps.

The solver is damped Newton with a hard feasibility guard: a step is
shortened until every inner product stays strictly inside the natural
parameter interval before the loss is ever evaluated there, since the
interval can be bounded (the loss blows up at the boundary).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .distributions import NefFamily
from .errors import DomainError, InvalidArgumentError, OptimizationError

__all__ = [
    "Dataset",
    "FitResult",
    "loss",
    "gradient_map",
    "full_gradient",
    "hessian",
    "difference_quotient_matrix",
    "fit_mle",
]

_ARMIJO = 1e-4
_BACKTRACK = 0.5
_GRAD_TOL = 1e-8
_ALPHA_COINCIDENCE = 1e-8


@dataclass(frozen=True)
class Dataset:
    """Rows (x_i, y_i) with every arm inside the closed unit ball."""

    arms: np.ndarray     # (n, d)
    rewards: np.ndarray  # (n,)

    def __post_init__(self):
        arms = np.atleast_2d(np.asarray(self.arms, dtype=float))
        rewards = np.asarray(self.rewards, dtype=float).ravel()
        if arms.size == 0:
            arms = arms.reshape(0, arms.shape[1] if arms.ndim == 2 and arms.shape[1] else 1)
        if arms.shape[0] != rewards.shape[0]:
            raise InvalidArgumentError(
                f"got {arms.shape[0]} arms but {rewards.shape[0]} rewards")
        norms = np.linalg.norm(arms, axis=1) if arms.size else np.zeros(0)
        if arms.size and norms.max(initial=0.0) > 1.0 + 1e-12:
            raise InvalidArgumentError(
                f"arm rows must lie in the closed unit ball; max norm {norms.max():.6g}")
        arms = arms.copy()
        rewards = rewards.copy()
        arms.flags.writeable = False
        rewards.flags.writeable = False
        object.__setattr__(self, "arms", arms)
        object.__setattr__(self, "rewards", rewards)

    @property
    def n(self) -> int:
        return self.arms.shape[0]

    @property
    def d(self) -> int:
        return self.arms.shape[1]


def _inner_products(family: NefFamily, data: Dataset, theta: np.ndarray,
                    *, op: str) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).ravel()
    if data.n and theta.shape[0] != data.d:
        raise InvalidArgumentError(f"theta has dim {theta.shape[0]}, data has dim {data.d}")
    inner = data.arms @ theta if data.n else np.zeros(0)
    lo, hi = family.base.mgf_domain
    m = family.base.domain_margin()
    bad_hi = math.isfinite(hi) and inner.size and inner.max() > hi - m
    bad_lo = math.isfinite(lo) and inner.size and inner.min() < lo + m
    if bad_hi or bad_lo:
        idx = int(np.argmax(inner) if bad_hi else np.argmin(inner))
        raise DomainError(f"{op}: inner product of row {idx} leaves the natural "
                          f"parameter interval", value=float(inner[idx]), interval=(lo, hi))
    return inner


def _feasible(family: NefFamily, data: Dataset, theta: np.ndarray) -> bool:
    if data.n == 0:
        return True
    inner = data.arms @ np.asarray(theta, dtype=float).ravel()
    lo, hi = family.base.mgf_domain
    m = family.base.domain_margin()
    if math.isfinite(hi) and inner.max() > hi - m:
        return False
    if math.isfinite(lo) and inner.min() < lo + m:
        return False
    return True


def loss(family: NefFamily, data: Dataset, lam: float, theta: np.ndarray) -> float:
    if lam <= 0:
        raise InvalidArgumentError(f"ridge weight must be positive, got {lam}")
    theta = np.asarray(theta, dtype=float).ravel()
    inner = _inner_products(family, data, theta, op="loss")
    reg = 0.5 * lam * float(theta @ theta)
    if data.n == 0:
        return reg
    psi = np.asarray(family.base.log_mgf(inner), dtype=float)
    return reg + float(np.sum(psi - data.rewards * inner))


def gradient_map(family: NefFamily, data: Dataset, lam: float, theta: np.ndarray) -> np.ndarray:
    """g(theta) = sum_i mu(x_i' theta) x_i + lam theta (reward terms excluded)."""
    theta = np.asarray(theta, dtype=float).ravel()
    inner = _inner_products(family, data, theta, op="gradient_map")
    g = lam * theta
    if data.n:
        mu = np.asarray(family.base.mean_at(inner), dtype=float)
        g = g + data.arms.T @ mu
    return g


def full_gradient(family: NefFamily, data: Dataset, lam: float, theta: np.ndarray) -> np.ndarray:
    g = gradient_map(family, data, lam, theta)
    if data.n:
        g = g - data.arms.T @ data.rewards
    return g


def hessian(family: NefFamily, data: Dataset, lam: float, theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).ravel()
    inner = _inner_products(family, data, theta, op="hessian")
    d = theta.shape[0]
    H = lam * np.eye(d)
    if data.n:
        w = np.asarray(family.base.dmean_at(inner), dtype=float)
        H = H + (data.arms * w[:, None]).T @ data.arms
    return H


def _alpha(family: NefFamily, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Difference quotient of mu; falls back to mu' at the midpoint when u ≈ v."""
    gap = u - v
    close = np.abs(gap) <= _ALPHA_COINCIDENCE
    mu_u = np.asarray(family.base.mean_at(u), dtype=float)
    mu_v = np.asarray(family.base.mean_at(v), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        quot = (mu_u - mu_v) / gap
    mid = np.asarray(family.base.dmean_at(0.5 * (u + v)), dtype=float)
    return np.where(close, mid, quot)


def difference_quotient_matrix(family: NefFamily, data: Dataset, lam: float,
                               theta1: np.ndarray, theta2: np.ndarray) -> np.ndarray:
    inner1 = _inner_products(family, data, theta1, op="difference_quotient_matrix")
    inner2 = _inner_products(family, data, theta2, op="difference_quotient_matrix")
    d = np.asarray(theta1, dtype=float).ravel().shape[0]
    G = lam * np.eye(d)
    if data.n:
        a = _alpha(family, inner1, inner2)
        G = G + (data.arms * a[:, None]).T @ data.arms
    return G


@dataclass(frozen=True)
class FitResult:
    theta_hat: np.ndarray
    gradient_norm: float
    newton_iters: int
    converged: bool
    inner_lo: float
    inner_hi: float
    outside_admissible: bool   # any x_i' theta_hat outside [param_lo, param_hi]

    def __post_init__(self):
        if self.converged and self.gradient_norm > _GRAD_TOL:
            raise InvalidArgumentError("converged fit must have gradient norm <= 1e-8")


def fit_mle(family: NefFamily, data: Dataset, lam: float,
            init: np.ndarray | None = None, max_iters: int = 60) -> FitResult:
    """Damped Newton minimizer of the ridge-regularized negative log-likelihood."""
    if lam <= 0:
        raise InvalidArgumentError(f"ridge weight must be positive, got {lam}")
    d = data.d if data.n else (len(np.asarray(init).ravel()) if init is not None else data.d)
    theta = np.zeros(d) if init is None else np.asarray(init, dtype=float).ravel().copy()
    if data.n == 0:
        return FitResult(theta_hat=np.zeros(d), gradient_norm=0.0, newton_iters=0,
                         converged=True, inner_lo=0.0, inner_hi=0.0,
                         outside_admissible=False)
    if not _feasible(family, data, theta):
        raise DomainError("initial point is infeasible for the data",
                          value=None, interval=family.base.mgf_domain)

    f = loss(family, data, lam, theta)
    iters = 0
    gnorm = float(np.linalg.norm(full_gradient(family, data, lam, theta)))
    while gnorm > _GRAD_TOL and iters < max_iters:
        grad = full_gradient(family, data, lam, theta)
        H = hessian(family, data, lam, theta)
        try:
            c, low = linalg.cho_factor(H, lower=True)
            step = -linalg.cho_solve((c, low), grad)
        except linalg.LinAlgError as exc:
            raise OptimizationError(f"Hessian factorization failed: {exc}",
                                    diagnostics={"iter": iters, "theta": theta.tolist()})
        slope = float(grad @ step)
        t = 1.0
        while t > 1e-16 and not _feasible(family, data, theta + t * step):
            t *= _BACKTRACK
        # near the optimum the Newton decrement drops below the floating
        # resolution of the loss; sufficient-decrease tests are pure noise
        # there, so take the (feasibility-clipped) full step instead
        fp_noise = 1e-13 * (1.0 + abs(f))
        if -slope > fp_noise:
            while t > 1e-16:
                trial = theta + t * step
                if loss(family, data, lam, trial) <= f + _ARMIJO * t * slope + fp_noise:
                    break
                t *= _BACKTRACK
        if t <= 1e-16:
            raise OptimizationError(
                "no domain-feasible descent step found",
                diagnostics={"iter": iters, "gradient_norm": gnorm,
                             "theta": theta.tolist(), "step": step.tolist()})
        theta = theta + t * step
        f = loss(family, data, lam, theta)
        gnorm = float(np.linalg.norm(full_gradient(family, data, lam, theta)))
        iters += 1

    inner = data.arms @ theta
    lo_i, hi_i = (float(inner.min()), float(inner.max())) if data.n else (0.0, 0.0)
    outside = bool(lo_i < family.param_lo - 1e-12 or hi_i > family.param_hi + 1e-12)
    return FitResult(theta_hat=theta, gradient_norm=gnorm, newton_iters=iters,
                     converged=bool(gnorm <= _GRAD_TOL), inner_lo=lo_i, inner_hi=hi_i,
                     outside_admissible=outside)
