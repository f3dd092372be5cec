"""Single-parameter natural exponential families over the reals.

A base distribution Q with MGF ``M(u) = ∫ exp(uy) Q(dy)`` generates the
tilted family ``Q_u(dy) = exp(uy - psi(u)) Q(dy)`` on the natural
parameter interval ``U = {u : M(u) < ∞}``, with ``psi = log M``.  The
mean function ``mu(u)`` of ``Q_u`` equals ``psi'(u)``; its derivative
``mu'(u)`` is the variance of ``Q_u`` and ``mu''(u)`` its third central
moment.

Every supported base ships closed forms for ``log M``, ``mu``, ``mu'``
and ``mu''`` (vectorised over the tilt), plus CDF/quantile/tail helpers
and a deterministic tilted sampler driven by uniforms.  High-accuracy
moment reports go through ``moments``: analytic where a closed form is
exact, adaptive quadrature for the Laplace density, log-domain series
for atom sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, special

from .errors import (
    DegenerateDistributionError,
    DomainError,
    InvalidArgumentError,
    NumericError,
    ParseError,
)

__all__ = [
    "BaseDistribution",
    "Bernoulli",
    "Gaussian",
    "Exponential",
    "Poisson",
    "Laplace",
    "Gamma",
    "DiscreteAtoms",
    "CounterexampleSubgaussian",
    "Shifted",
    "NefFamily",
    "MomentReport",
    "mgf",
    "cgf",
    "mean_fn",
    "moments",
    "gamma_ratio",
    "sample_tilted",
    "centered",
    "reflected",
    "parse_distribution",
    "distribution_config",
]

_ATOM_WEIGHT_TOL = 1e-12
_QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-12, limit=200)


def _require_finite(u, name: str = "u") -> float:
    u = float(u)
    if not math.isfinite(u):
        raise InvalidArgumentError(f"{name} must be finite, got {u!r}")
    return u


class BaseDistribution:
    """Common interface for base measures Q."""

    kind: str = ""

    # -- natural parameter interval -------------------------------------
    @property
    def mgf_domain(self) -> tuple[float, float]:
        """Open interval on which M is finite."""
        raise NotImplementedError

    @property
    def support(self) -> str:
        raise NotImplementedError

    def domain_margin(self) -> float:
        """Guard band near finite domain endpoints; M and mu' blow up there."""
        lo, hi = self.mgf_domain
        width = hi - lo
        return 1e-9 * (width if math.isfinite(width) else 1.0)

    def require_interior(self, u: float, *, op: str = "operation") -> float:
        u = _require_finite(u)
        lo, hi = self.mgf_domain
        m = self.domain_margin()
        if (math.isfinite(lo) and u < lo + m) or (math.isfinite(hi) and u > hi - m):
            raise DomainError(f"{op} requires a tilt strictly inside the natural "
                              f"parameter interval of {self.kind}",
                              value=u, interval=(lo, hi))
        return u

    # -- closed forms, vectorised over u --------------------------------
    def log_mgf(self, u):
        raise NotImplementedError

    def mean_at(self, u):
        raise NotImplementedError

    def dmean_at(self, u):
        """Variance of Q_u."""
        raise NotImplementedError

    def d2mean_at(self, u):
        """Third central moment of Q_u."""
        raise NotImplementedError

    # -- probability helpers ---------------------------------------------
    def cdf(self, y: float) -> float:
        raise NotImplementedError

    def quantile(self, p: float) -> float:
        raise NotImplementedError

    def interval_mass(self, lo: float, hi: float) -> float:
        """Q([lo, hi]), endpoints included for atom kinds."""
        raise NotImplementedError

    @property
    def support_bounds(self) -> tuple[float, float]:
        """Essential infimum and supremum of the support."""
        raise NotImplementedError

    def tilted_upper_tail(self, u: float, t: float) -> float:
        """Q_u((t, ∞))."""
        raise NotImplementedError

    def tilted_lower_tail(self, u: float, t: float) -> float:
        """Q_u((-∞, -t))."""
        raise NotImplementedError

    # -- optional structure -----------------------------------------------
    def tilted(self, u: float) -> "BaseDistribution":
        """Exact conjugate representation of Q_u, where one exists."""
        raise InvalidArgumentError(f"{self.kind} has no closed tilted form among supported kinds")

    def sample_tilted(self, u: float, rng: np.random.Generator, size: int | None = None):
        raise NotImplementedError

    def moment_report(self, u: float) -> "MomentReport":
        raise NotImplementedError


@dataclass(frozen=True)
class MomentReport:
    """Mean, variance and third central/absolute moments of one tilt."""

    u: float
    mean: float
    variance: float
    third_central: float
    third_absolute: float
    method: str
    abs_error_estimate: float

    def __post_init__(self):
        if self.variance < 0:
            raise NumericError("negative variance in moment report", residual=self.variance)
        if self.third_absolute < abs(self.third_central) - 1e-9 * (1 + abs(self.third_central)):
            raise NumericError("third absolute moment below |third central|")


def _analytic_report(base: BaseDistribution, u: float, third_abs: float,
                     method: str = "analytic", err: float = 1e-14) -> MomentReport:
    return MomentReport(u=float(u), mean=float(base.mean_at(u)),
                        variance=float(base.dmean_at(u)),
                        third_central=float(base.d2mean_at(u)),
                        third_absolute=float(third_abs), method=method,
                        abs_error_estimate=err)


# ---------------------------------------------------------------------------
# Continuous kinds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Bernoulli(BaseDistribution):
    p: float
    kind: str = "bernoulli"

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise InvalidArgumentError(f"Bernoulli p must lie in (0, 1), got {self.p}")

    @property
    def mgf_domain(self):
        return (-math.inf, math.inf)

    @property
    def support(self):
        return "atoms {0, 1}"

    @property
    def support_bounds(self):
        return (0.0, 1.0)

    def log_mgf(self, u):
        return np.logaddexp(math.log1p(-self.p), math.log(self.p) + np.asarray(u, dtype=float))

    def mean_at(self, u):
        # logistic in u + logit(p)
        z = np.asarray(u, dtype=float) + math.log(self.p / (1.0 - self.p))
        return special.expit(z)

    def dmean_at(self, u):
        m = self.mean_at(u)
        return m * (1.0 - m)

    def d2mean_at(self, u):
        m = self.mean_at(u)
        return m * (1.0 - m) * (1.0 - 2.0 * m)

    def cdf(self, y):
        return 0.0 if y < 0 else (1.0 - self.p if y < 1 else 1.0)

    def quantile(self, p):
        return 0.0 if p <= 1.0 - self.p else 1.0

    def interval_mass(self, lo, hi):
        mass = 0.0
        if lo <= 0.0 <= hi:
            mass += 1.0 - self.p
        if lo <= 1.0 <= hi:
            mass += self.p
        return mass

    def tilted(self, u):
        return Bernoulli(float(self.mean_at(u)))

    def tilted_upper_tail(self, u, t):
        m = float(self.mean_at(u))
        return (1.0 if t < 0 else (m if t < 1 else 0.0))

    def tilted_lower_tail(self, u, t):
        m = float(self.mean_at(u))
        # mass strictly below -t
        if -t > 1:
            return 1.0
        if -t > 0:
            return 1.0 - m
        return 0.0

    def sample_tilted(self, u, rng, size=None):
        m = float(self.mean_at(u))
        if size is None:
            return 1.0 if rng.random() < m else 0.0
        return (rng.random(size) < m).astype(float)

    def moment_report(self, u):
        m = float(self.mean_at(u))
        third_abs = (1.0 - m) * m**3 + m * (1.0 - m) ** 3
        return _analytic_report(self, u, third_abs)


@dataclass(frozen=True)
class Gaussian(BaseDistribution):
    """Centered normal with standard deviation sigma."""

    sigma: float
    kind: str = "gaussian"

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise InvalidArgumentError(f"Gaussian sigma must be positive, got {self.sigma}")

    @property
    def mgf_domain(self):
        return (-math.inf, math.inf)

    @property
    def support(self):
        return "reals"

    @property
    def support_bounds(self):
        return (-math.inf, math.inf)

    def log_mgf(self, u):
        return 0.5 * (self.sigma * np.asarray(u, dtype=float)) ** 2

    def mean_at(self, u):
        return self.sigma**2 * np.asarray(u, dtype=float)

    def dmean_at(self, u):
        return np.full_like(np.asarray(u, dtype=float), self.sigma**2)

    def d2mean_at(self, u):
        return np.zeros_like(np.asarray(u, dtype=float))

    def cdf(self, y):
        return float(special.ndtr(y / self.sigma))

    def quantile(self, p):
        return float(self.sigma * special.ndtri(p))

    def interval_mass(self, lo, hi):
        return self.cdf(hi) - self.cdf(lo)

    def tilted(self, u):
        return Shifted(Gaussian(self.sigma), self.sigma**2 * float(u))

    def tilted_upper_tail(self, u, t):
        return float(special.ndtr((self.sigma**2 * u - t) / self.sigma))

    def tilted_lower_tail(self, u, t):
        return float(special.ndtr((-t - self.sigma**2 * u) / self.sigma))

    def sample_tilted(self, u, rng, size=None):
        return self.sigma**2 * float(u) + self.sigma * special.ndtri(rng.random(size))

    def moment_report(self, u):
        third_abs = self.sigma**3 * math.sqrt(8.0 / math.pi)
        return _analytic_report(self, u, third_abs)


@dataclass(frozen=True)
class Exponential(BaseDistribution):
    rate: float
    kind: str = "exponential"

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise InvalidArgumentError(f"Exponential rate must be positive, got {self.rate}")

    @property
    def mgf_domain(self):
        return (-math.inf, self.rate)

    @property
    def support(self):
        return "interval [0, ∞)"

    @property
    def support_bounds(self):
        return (0.0, math.inf)

    def log_mgf(self, u):
        return math.log(self.rate) - np.log(self.rate - np.asarray(u, dtype=float))

    def mean_at(self, u):
        return 1.0 / (self.rate - np.asarray(u, dtype=float))

    def dmean_at(self, u):
        return 1.0 / (self.rate - np.asarray(u, dtype=float)) ** 2

    def d2mean_at(self, u):
        return 2.0 / (self.rate - np.asarray(u, dtype=float)) ** 3

    def cdf(self, y):
        return 0.0 if y < 0 else -math.expm1(-self.rate * y)

    def quantile(self, p):
        return -math.log1p(-p) / self.rate

    def interval_mass(self, lo, hi):
        return max(self.cdf(hi) - self.cdf(lo), 0.0)

    def tilted(self, u):
        return Exponential(self.rate - float(u))

    def tilted_upper_tail(self, u, t):
        return math.exp(-(self.rate - u) * max(t, 0.0))

    def tilted_lower_tail(self, u, t):
        # support nonnegative: mass below -t is zero unless -t > 0
        if -t <= 0:
            return 0.0
        return -math.expm1(-(self.rate - u) * (-t))

    def sample_tilted(self, u, rng, size=None):
        return -np.log1p(-rng.random(size)) / (self.rate - float(u))

    def moment_report(self, u):
        r = self.rate - float(u)
        third_abs = (12.0 / math.e - 2.0) / r**3
        return _analytic_report(self, u, third_abs)


@dataclass(frozen=True)
class Poisson(BaseDistribution):
    nu: float
    kind: str = "poisson"

    def __post_init__(self):
        if not (self.nu > 0 and math.isfinite(self.nu)):
            raise InvalidArgumentError(f"Poisson nu must be positive, got {self.nu}")

    @property
    def mgf_domain(self):
        return (-math.inf, math.inf)

    @property
    def support(self):
        return "atoms {0, 1, 2, ...}"

    @property
    def support_bounds(self):
        return (0.0, math.inf)

    def log_mgf(self, u):
        return self.nu * np.expm1(np.asarray(u, dtype=float))

    def mean_at(self, u):
        return self.nu * np.exp(np.asarray(u, dtype=float))

    dmean_at = mean_at
    d2mean_at = mean_at

    def cdf(self, y):
        if y < 0:
            return 0.0
        return float(special.pdtr(math.floor(y), self.nu))

    def _cdf_grid(self, m: float):
        kmax = int(m + 40.0 * math.sqrt(m) + 60.0)
        ks = np.arange(kmax + 1)
        logpmf = ks * math.log(m) - m - special.gammaln(ks + 1)
        return ks, np.cumsum(np.exp(logpmf))

    def quantile(self, p):
        ks, cum = self._cdf_grid(self.nu)
        idx = int(np.searchsorted(cum, p - 1e-15, side="left"))
        return float(min(idx, ks[-1]))

    def interval_mass(self, lo, hi):
        if hi < 0:
            return 0.0
        lo_k = max(0, math.ceil(lo - 1e-12))
        hi_k = math.floor(hi + 1e-12)
        if hi_k < lo_k:
            return 0.0
        upper = float(special.pdtr(hi_k, self.nu))
        lower = float(special.pdtr(lo_k - 1, self.nu)) if lo_k > 0 else 0.0
        return upper - lower

    def tilted(self, u):
        return Poisson(self.nu * math.exp(float(u)))

    def tilted_upper_tail(self, u, t):
        m = self.nu * math.exp(u)
        if t < 0:
            return 1.0
        return float(special.pdtrc(math.floor(t), m))

    def tilted_lower_tail(self, u, t):
        if -t <= 0:
            return 0.0
        m = self.nu * math.exp(u)
        k = math.ceil(-t) - 1  # largest atom strictly below -t
        if k < 0:
            return 0.0
        return float(special.pdtr(k, m))

    def sample_tilted(self, u, rng, size=None):
        m = self.nu * math.exp(float(u))
        ks, cum = self._cdf_grid(m)
        us = np.atleast_1d(rng.random(size))
        idx = np.minimum(np.searchsorted(cum, us, side="left"), ks[-1])
        out = idx.astype(float)
        return out if size is not None else float(out[0])

    def moment_report(self, u):
        m = self.nu * math.exp(float(u))
        kmax = int(m + 40.0 * math.sqrt(m) + 60.0)
        ks = np.arange(kmax + 1)
        logpmf = ks * math.log(m) - m - special.gammaln(ks + 1)
        pmf = np.exp(logpmf)
        third_abs = float(np.sum(pmf * np.abs(ks - m) ** 3))
        return _analytic_report(self, u, third_abs, err=1e-12)


@dataclass(frozen=True)
class Laplace(BaseDistribution):
    """Symmetric density exp(-|y|/scale) / (2 scale)."""

    scale: float
    kind: str = "laplace"

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise InvalidArgumentError(f"Laplace scale must be positive, got {self.scale}")

    @property
    def mgf_domain(self):
        lam = 1.0 / self.scale
        return (-lam, lam)

    @property
    def support(self):
        return "reals"

    @property
    def support_bounds(self):
        return (-math.inf, math.inf)

    def log_mgf(self, u):
        s2 = self.scale**2
        return -np.log1p(-s2 * np.asarray(u, dtype=float) ** 2)

    def mean_at(self, u):
        lam = 1.0 / self.scale
        u = np.asarray(u, dtype=float)
        return 2.0 * u / (lam**2 - u**2)

    def dmean_at(self, u):
        lam = 1.0 / self.scale
        u = np.asarray(u, dtype=float)
        return 1.0 / (lam + u) ** 2 + 1.0 / (lam - u) ** 2

    def d2mean_at(self, u):
        lam = 1.0 / self.scale
        u = np.asarray(u, dtype=float)
        return 2.0 / (lam - u) ** 3 - 2.0 / (lam + u) ** 3

    def cdf(self, y):
        if y < 0:
            return 0.5 * math.exp(y / self.scale)
        return 1.0 - 0.5 * math.exp(-y / self.scale)

    def quantile(self, p):
        if p < 0.5:
            return self.scale * math.log(2.0 * p)
        return -self.scale * math.log(2.0 * (1.0 - p))

    def interval_mass(self, lo, hi):
        return self.cdf(hi) - self.cdf(lo)

    def _tilted_pieces(self, u):
        # tilted density ∝ exp(-(1/s - u) y) on y>0 and exp((1/s + u) y) on y<0
        lam = 1.0 / self.scale
        rp, rm = lam - u, lam + u
        m = math.exp(self.log_mgf(u))
        c = 1.0 / (2.0 * self.scale * m)  # common density scale at y = 0
        mass_neg = c / rm
        mass_pos = c / rp
        return rp, rm, c, mass_neg, mass_pos

    def tilted_upper_tail(self, u, t):
        rp, rm, c, mass_neg, mass_pos = self._tilted_pieces(u)
        if t >= 0:
            return (c / rp) * math.exp(-rp * t)
        return mass_pos + (c / rm) * -math.expm1(rm * t)

    def tilted_lower_tail(self, u, t):
        rp, rm, c, mass_neg, mass_pos = self._tilted_pieces(u)
        y = -t
        if y <= 0:
            return (c / rm) * math.exp(rm * y)
        return mass_neg + (c / rp) * -math.expm1(-rp * y)

    def sample_tilted(self, u, rng, size=None):
        rp, rm, c, mass_neg, mass_pos = self._tilted_pieces(float(u))
        us = np.atleast_1d(rng.random(size)).astype(float)
        out = np.empty_like(us)
        neg = us <= mass_neg
        out[neg] = np.log(us[neg] * rm / c) / rm
        out[~neg] = -np.log1p(-(us[~neg] - mass_neg) * rp / c) / rp
        return out if size is not None else float(out[0])

    def _truncation(self, u):
        rp, rm, *_ = self._tilted_pieces(u)
        return (-90.0 / rm - 4.0 * self.scale, 90.0 / rp + 4.0 * self.scale)

    def moment_report(self, u):
        u = float(u)
        lo, hi = self._truncation(u)
        logm = float(self.log_mgf(u))

        def dens(y):
            return math.exp(u * y - logm - abs(y) / self.scale) / (2.0 * self.scale)

        mean, e0 = integrate.quad(lambda y: y * dens(y), lo, hi, points=[0.0], **_QUAD_OPTS)
        var, e1 = integrate.quad(lambda y: (y - mean) ** 2 * dens(y), lo, hi,
                                 points=[0.0, mean], **_QUAD_OPTS)
        third, e2 = integrate.quad(lambda y: (y - mean) ** 3 * dens(y), lo, hi,
                                   points=[0.0, mean], **_QUAD_OPTS)
        third_abs, e3 = integrate.quad(lambda y: abs(y - mean) ** 3 * dens(y), lo, hi,
                                       points=[0.0, mean], **_QUAD_OPTS)
        err = e0 + e1 + e2 + e3
        if err > 1e-8 * (1.0 + abs(third_abs)):
            raise NumericError("tilted Laplace moment quadrature did not converge", residual=err)
        return MomentReport(u=u, mean=mean, variance=var, third_central=third,
                            third_absolute=third_abs, method="quadrature",
                            abs_error_estimate=err)


@dataclass(frozen=True)
class Gamma(BaseDistribution):
    shape: float
    scale: float
    kind: str = "gamma"

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise InvalidArgumentError(
                f"Gamma shape and scale must be positive, got {self.shape}, {self.scale}")

    @property
    def mgf_domain(self):
        return (-math.inf, 1.0 / self.scale)

    @property
    def support(self):
        return "interval [0, ∞)"

    @property
    def support_bounds(self):
        return (0.0, math.inf)

    def log_mgf(self, u):
        return -self.shape * np.log1p(-self.scale * np.asarray(u, dtype=float))

    def mean_at(self, u):
        return self.shape * self.scale / (1.0 - self.scale * np.asarray(u, dtype=float))

    def dmean_at(self, u):
        return self.shape * self.scale**2 / (1.0 - self.scale * np.asarray(u, dtype=float)) ** 2

    def d2mean_at(self, u):
        return 2.0 * self.shape * self.scale**3 / (1.0 - self.scale * np.asarray(u, dtype=float)) ** 3

    def cdf(self, y):
        if y <= 0:
            return 0.0
        return float(special.gammainc(self.shape, y / self.scale))

    def quantile(self, p):
        return float(self.scale * special.gammaincinv(self.shape, p))

    def interval_mass(self, lo, hi):
        return self.cdf(hi) - self.cdf(lo)

    def _tilted_scale(self, u):
        return self.scale / (1.0 - self.scale * u)

    def tilted(self, u):
        return Gamma(self.shape, self._tilted_scale(float(u)))

    def tilted_upper_tail(self, u, t):
        if t <= 0:
            return 1.0
        return float(special.gammaincc(self.shape, t / self._tilted_scale(u)))

    def tilted_lower_tail(self, u, t):
        if -t <= 0:
            return 0.0
        return float(special.gammainc(self.shape, -t / self._tilted_scale(u)))

    def sample_tilted(self, u, rng, size=None):
        th = self._tilted_scale(float(u))
        return th * special.gammaincinv(self.shape, rng.random(size))

    def moment_report(self, u):
        u = float(u)
        th = self._tilted_scale(u)
        mean = self.shape * th
        hi = th * float(special.gammaincinv(self.shape, 1.0 - 1e-16))

        def dens(y):
            return math.exp((self.shape - 1.0) * math.log(y) - y / th
                            - special.gammaln(self.shape) - self.shape * math.log(th))

        third_abs, err = integrate.quad(lambda y: abs(y - mean) ** 3 * dens(y),
                                        1e-300, hi, points=[mean], **_QUAD_OPTS)
        return _analytic_report(self, u, third_abs, err=err)


# ---------------------------------------------------------------------------
# Atom kinds: log-domain weighted sums throughout
# ---------------------------------------------------------------------------

def _logsumexp(logs: np.ndarray) -> float:
    m = np.max(logs)
    if not math.isfinite(m):
        return float(m)
    return float(m + math.log(np.sum(np.exp(logs - m))))


class _AtomMixin:
    """Shared machinery for finite atom sets held as (locations, log-weights)."""

    # subclasses provide: self._locs (ndarray), self._logw (ndarray, normalised)

    @property
    def mgf_domain(self):
        return (-math.inf, math.inf)

    @property
    def support_bounds(self):
        return (float(self._locs.min()), float(self._locs.max()))

    def log_mgf(self, u):
        u = np.asarray(u, dtype=float)
        if u.ndim == 0:
            return _logsumexp(self._logw + float(u) * self._locs)
        return np.array([_logsumexp(self._logw + v * self._locs) for v in u.ravel()]).reshape(u.shape)

    def _tilted_weights(self, u):
        logq = self._logw + float(u) * self._locs
        logq = logq - np.max(logq)
        q = np.exp(logq)
        return q / q.sum()

    def mean_at(self, u):
        u = np.asarray(u, dtype=float)
        if u.ndim == 0:
            return float(np.dot(self._tilted_weights(u), self._locs))
        return np.array([float(np.dot(self._tilted_weights(v), self._locs))
                         for v in u.ravel()]).reshape(u.shape)

    def _central(self, u, k):
        q = self._tilted_weights(u)
        m = float(np.dot(q, self._locs))
        return float(np.dot(q, (self._locs - m) ** k))

    def dmean_at(self, u):
        u = np.asarray(u, dtype=float)
        if u.ndim == 0:
            return self._central(u, 2)
        return np.array([self._central(v, 2) for v in u.ravel()]).reshape(u.shape)

    def d2mean_at(self, u):
        u = np.asarray(u, dtype=float)
        if u.ndim == 0:
            return self._central(u, 3)
        return np.array([self._central(v, 3) for v in u.ravel()]).reshape(u.shape)

    def cdf(self, y):
        w = np.exp(self._logw)
        return float(w[self._locs <= y].sum())

    def quantile(self, p):
        order = np.argsort(self._locs)
        acc = 0.0
        for i in order:
            acc += math.exp(self._logw[i])
            if acc >= p - 1e-15:
                return float(self._locs[i])
        return float(self._locs[order[-1]])

    def interval_mass(self, lo, hi):
        w = np.exp(self._logw)
        sel = (self._locs >= lo - 1e-12) & (self._locs <= hi + 1e-12)
        return float(w[sel].sum())

    def tilted_upper_tail(self, u, t):
        q = self._tilted_weights(u)
        return float(q[self._locs > t].sum())

    def tilted_lower_tail(self, u, t):
        q = self._tilted_weights(u)
        return float(q[self._locs < -t].sum())

    def sample_tilted(self, u, rng, size=None):
        q = self._tilted_weights(float(u))
        order = np.argsort(self._locs)
        cum = np.cumsum(q[order])
        us = np.atleast_1d(rng.random(size))
        idx = np.searchsorted(cum, us, side="left")
        idx = np.clip(idx, 0, len(order) - 1)
        out = self._locs[order][idx].astype(float)
        return out if size is not None else float(out[0])

    def moment_report(self, u):
        q = self._tilted_weights(u)
        m = float(np.dot(q, self._locs))
        d = self._locs - m
        return MomentReport(u=float(u), mean=m, variance=float(np.dot(q, d**2)),
                            third_central=float(np.dot(q, d**3)),
                            third_absolute=float(np.dot(q, np.abs(d) ** 3)),
                            method="series", abs_error_estimate=1e-14)


@dataclass(frozen=True)
class DiscreteAtoms(_AtomMixin, BaseDistribution):
    atoms: tuple[tuple[float, float], ...]
    kind: str = "atoms"

    def __post_init__(self):
        if len(self.atoms) == 0:
            raise InvalidArgumentError("atom list must be nonempty")
        locs = np.array([a[0] for a in self.atoms], dtype=float)
        w = np.array([a[1] for a in self.atoms], dtype=float)
        if np.any(w < 0) or np.any(~np.isfinite(w)) or np.any(~np.isfinite(locs)):
            raise InvalidArgumentError("atom weights must be nonnegative and finite")
        if abs(w.sum() - 1.0) > _ATOM_WEIGHT_TOL:
            raise InvalidArgumentError(f"atom weights must sum to 1 within {_ATOM_WEIGHT_TOL}, "
                                       f"got {w.sum()!r}")
        keep = w > 0
        object.__setattr__(self, "_locs", locs[keep])
        object.__setattr__(self, "_logw", np.log(w[keep] / w[keep].sum()))

    @property
    def support(self):
        return f"atoms ({len(self._locs)} points)"

    def tilted(self, u):
        q = self._tilted_weights(float(u))
        return DiscreteAtoms(tuple((float(l), float(p)) for l, p in zip(self._locs, q)))


@dataclass(frozen=True)
class CounterexampleSubgaussian(_AtomMixin, BaseDistribution):
    """Atoms at 2^i, i = 1..i_max, with doubly exponential weights.

    Even i carry weight ∝ exp(-4^i), odd i carry ∝ (1/4) exp(-3·4^(i-1)).
    Tilted at u = 2^(i+1) for even i the mass collapses onto the atoms
    2^i and 2^(i+1) with ratio 4:1; all weight arithmetic is done on log
    scale with a subtract-max pass so no intermediate ever over- or
    underflows.
    """

    i_max: int
    kind: str = "counterexample"

    def __post_init__(self):
        if not isinstance(self.i_max, (int, np.integer)) or self.i_max < 2:
            raise InvalidArgumentError(f"i_max must be an integer >= 2, got {self.i_max!r}")
        ks = np.arange(1, self.i_max + 1)
        locs = np.power(2.0, ks)
        raw = np.where(ks % 2 == 0, -np.power(4.0, ks),
                       math.log(0.25) - 3.0 * np.power(4.0, ks - 1))
        norm = _logsumexp(raw)
        object.__setattr__(self, "_locs", locs)
        object.__setattr__(self, "_logw", raw - norm)
        object.__setattr__(self, "_log_norm", norm)

    @property
    def support(self):
        return f"atoms {{2^i : 1 <= i <= {self.i_max}}}"

    @property
    def normalizing_constant(self) -> float:
        """C with weights p_i = C * exp(raw_i)."""
        return math.exp(-self._log_norm)


@dataclass(frozen=True)
class Shifted(BaseDistribution):
    """Distribution of Y + offset for Y drawn from ``base``.

    Shifting leaves the natural parameter interval and all central
    moments of the tilts unchanged; only the mean moves.
    """

    base: BaseDistribution
    offset: float
    kind: str = "shifted"

    def __post_init__(self):
        _require_finite(self.offset, "offset")
        if isinstance(self.base, Shifted):  # flatten
            object.__setattr__(self, "offset", self.offset + self.base.offset)
            object.__setattr__(self, "base", self.base.base)

    @property
    def mgf_domain(self):
        return self.base.mgf_domain

    @property
    def support(self):
        return f"{self.base.support} shifted by {self.offset}"

    @property
    def support_bounds(self):
        lo, hi = self.base.support_bounds
        return (lo + self.offset, hi + self.offset)

    def log_mgf(self, u):
        return np.asarray(u, dtype=float) * self.offset + self.base.log_mgf(u)

    def mean_at(self, u):
        return self.base.mean_at(u) + self.offset

    def dmean_at(self, u):
        return self.base.dmean_at(u)

    def d2mean_at(self, u):
        return self.base.d2mean_at(u)

    def cdf(self, y):
        return self.base.cdf(y - self.offset)

    def quantile(self, p):
        return self.base.quantile(p) + self.offset

    def interval_mass(self, lo, hi):
        return self.base.interval_mass(lo - self.offset, hi - self.offset)

    def tilted(self, u):
        return Shifted(self.base.tilted(u), self.offset)

    def tilted_upper_tail(self, u, t):
        return self.base.tilted_upper_tail(u, t - self.offset)

    def tilted_lower_tail(self, u, t):
        return self.base.tilted_lower_tail(u, t + self.offset)

    def sample_tilted(self, u, rng, size=None):
        return self.base.sample_tilted(u, rng, size) + self.offset

    def moment_report(self, u):
        r = self.base.moment_report(u)
        return MomentReport(u=r.u, mean=r.mean + self.offset, variance=r.variance,
                            third_central=r.third_central, third_absolute=r.third_absolute,
                            method=r.method, abs_error_estimate=r.abs_error_estimate)


def centered(base: BaseDistribution) -> BaseDistribution:
    """Shift the base to zero mean."""
    m = float(base.mean_at(0.0))
    return base if m == 0.0 else Shifted(base, -m)


def reflected(base: BaseDistribution) -> BaseDistribution:
    """Distribution of -Y, for kinds where it is representable."""
    if isinstance(base, (Gaussian, Laplace)):
        return base
    if isinstance(base, Bernoulli):
        return DiscreteAtoms(((-1.0, base.p), (0.0, 1.0 - base.p)))
    if isinstance(base, (DiscreteAtoms, CounterexampleSubgaussian)):
        w = np.exp(base._logw)
        return DiscreteAtoms(tuple((float(-l), float(p)) for l, p in zip(base._locs, w)))
    if isinstance(base, Shifted):
        return Shifted(reflected(base.base), -base.offset)
    raise InvalidArgumentError(f"reflection of kind {base.kind!r} is not representable")


# ---------------------------------------------------------------------------
# Family wrapper and module-level operations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NefFamily:
    """A base measure plus the admissible tilt range [param_lo, param_hi]."""

    base: BaseDistribution
    param_lo: float
    param_hi: float

    def __post_init__(self):
        lo, hi = self.base.mgf_domain
        m = self.base.domain_margin()
        if not (self.param_lo <= self.param_hi):
            raise InvalidArgumentError(
                f"param_lo must not exceed param_hi, got [{self.param_lo}, {self.param_hi}]")
        if (math.isfinite(lo) and self.param_lo < lo + m) or \
           (math.isfinite(hi) and self.param_hi > hi - m):
            raise DomainError("admissible tilt range must lie strictly inside the "
                              "natural parameter interval",
                              value=(self.param_lo, self.param_hi), interval=(lo, hi))

    @property
    def interval(self) -> tuple[float, float]:
        return (self.param_lo, self.param_hi)


def _base_of(dist) -> BaseDistribution:
    return dist.base if isinstance(dist, NefFamily) else dist


def mgf(dist, u: float) -> float:
    """M(u); +inf outside the natural parameter interval."""
    base = _base_of(dist)
    u = _require_finite(u)
    lo, hi = base.mgf_domain
    if u >= hi or u <= lo:
        return math.inf
    return float(np.exp(base.log_mgf(u)))


def cgf(dist, u: float) -> float:
    base = _base_of(dist)
    u = base.require_interior(u, op="cgf")
    return float(base.log_mgf(u))


def mean_fn(dist, u: float) -> float:
    base = _base_of(dist)
    u = base.require_interior(u, op="mean_fn")
    return float(base.mean_at(u))


def moments(dist, u: float) -> MomentReport:
    base = _base_of(dist)
    u = base.require_interior(u, op="moments")
    return base.moment_report(u)


def gamma_ratio(dist, u: float) -> float:
    """|third central| / variance of Q_u; 0 for point masses."""
    rep = moments(dist, u)
    if rep.variance == 0.0:
        return 0.0
    return abs(rep.third_central) / rep.variance


def sample_tilted(dist, u: float, rng: np.random.Generator, size: int | None = None):
    base = _base_of(dist)
    u = base.require_interior(u, op="sample_tilted")
    return base.sample_tilted(u, rng, size)


# ---------------------------------------------------------------------------
# Distribution config schema
# ---------------------------------------------------------------------------

_SCHEMAS: dict[str, dict] = {
    "bernoulli": {"fields": ("p",), "build": lambda d: Bernoulli(float(d["p"]))},
    "gaussian": {"fields": ("sigma",), "build": lambda d: Gaussian(float(d["sigma"]))},
    "exponential": {"fields": ("rate",), "build": lambda d: Exponential(float(d["rate"]))},
    "poisson": {"fields": ("nu",), "build": lambda d: Poisson(float(d["nu"]))},
    "laplace": {"fields": ("scale",), "build": lambda d: Laplace(float(d["scale"]))},
    "gamma": {"fields": ("shape", "scale"),
              "build": lambda d: Gamma(float(d["shape"]), float(d["scale"]))},
    "atoms": {"fields": ("atoms",),
              "build": lambda d: DiscreteAtoms(tuple((float(a[0]), float(a[1]))
                                                     for a in d["atoms"]))},
    "counterexample": {"fields": ("i_max",),
                       "build": lambda d: CounterexampleSubgaussian(int(d["i_max"]))},
}


def parse_distribution(obj: dict, *, pointer: str = "/distribution") -> BaseDistribution:
    """Build a base distribution from its config dict; unknown fields rejected."""
    if not isinstance(obj, dict):
        raise ParseError("distribution spec must be an object", pointer=pointer)
    if "kind" not in obj:
        raise ParseError("missing required field 'kind'", pointer=pointer)
    kind = obj["kind"]
    schema = _SCHEMAS.get(kind)
    if schema is None:
        raise ParseError(f"unknown distribution kind {kind!r} "
                         f"(known: {sorted(_SCHEMAS)})", pointer=f"{pointer}/kind")
    fields = schema["fields"]
    unknown = set(obj) - set(fields) - {"kind"}
    if unknown:
        raise ParseError(f"unknown fields {sorted(unknown)} for kind {kind!r}", pointer=pointer)
    missing = set(fields) - set(obj)
    if missing:
        raise ParseError(f"missing fields {sorted(missing)} for kind {kind!r}", pointer=pointer)
    try:
        return schema["build"](obj)
    except (TypeError, InvalidArgumentError) as exc:
        raise ParseError(f"invalid parameters for kind {kind!r}: {exc}", pointer=pointer)


def distribution_config(base: BaseDistribution) -> dict:
    """Inverse of parse_distribution for the public kinds."""
    if isinstance(base, Bernoulli):
        return {"kind": "bernoulli", "p": base.p}
    if isinstance(base, Gaussian):
        return {"kind": "gaussian", "sigma": base.sigma}
    if isinstance(base, Exponential):
        return {"kind": "exponential", "rate": base.rate}
    if isinstance(base, Poisson):
        return {"kind": "poisson", "nu": base.nu}
    if isinstance(base, Laplace):
        return {"kind": "laplace", "scale": base.scale}
    if isinstance(base, Gamma):
        return {"kind": "gamma", "shape": base.shape, "scale": base.scale}
    if isinstance(base, DiscreteAtoms):
        return {"kind": "atoms", "atoms": [[float(l), float(math.exp(w))]
                                           for l, w in zip(base._locs, base._logw)]}
    if isinstance(base, CounterexampleSubgaussian):
        return {"kind": "counterexample", "i_max": base.i_max}
    raise InvalidArgumentError(f"kind {base.kind!r} has no config form")
