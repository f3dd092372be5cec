"""Closed-form stretch bounds for tilted-moment ratios.

For a base distribution whose centered version has exponential tails
``P(Y >= t) <= C1 exp(-c1 t)`` and ``P(Y <= -t) <= C2 exp(-c2 t)``, the
ratio ``|mu''(u)| / mu'(u)`` of the tilted family is bounded by an
explicit two-branch function of ``u`` built from the four tail
constants, a support witness ``(a, b, eta)`` with
``Q([-b + mu(0), -a + mu(0)]) >= eta``, and a polynomial correction
``G(M1, M2, m1, m2)``.  The negative branch is obtained by reflecting
the base through the origin, so it carries its own witness taken from
the mass *above* the mean.

Also here: a linear-plus-constant envelope for subgaussian bases, and
the doubly-exponential atom construction whose tilted ratio grows
linearly in the tilt (showing the linear envelope rate is not
improvable).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import (
    BaseDistribution,
    Bernoulli,
    CounterexampleSubgaussian,
    DiscreteAtoms,
    NefFamily,
    Shifted,
    gamma_ratio,
    moments,
)
from .errors import (
    DegenerateDistributionError,
    DomainError,
    InvalidArgumentError,
    PrecisionError,
)

__all__ = [
    "TailConstants",
    "SupportWitness",
    "StretchCertificate",
    "SubgaussianEnvelope",
    "fit_tail_constants",
    "default_tail_rates",
    "find_support_witness",
    "witness_mass",
    "g_q_value",
    "build_certificate",
    "stretch_bound",
    "stretch_supremum",
    "subgaussian_envelope",
    "subgaussian_stretch_bound",
    "counterexample_distribution",
    "verify_lower_bound",
    "verify_dominance",
    "LowerBoundReport",
    "DominanceReport",
]

_E = math.e
_WITNESS_A_LEVELS = [0.01 * k for k in range(1, 46)]
_WITNESS_B_LEVELS = [1e-4, 1e-3, 0.01, 0.05]


@dataclass(frozen=True)
class TailConstants:
    """Exponential tail envelope of the centered base: rate/scale per side."""

    c1: float
    C1: float
    c2: float
    C2: float

    def __post_init__(self):
        for name in ("c1", "C1", "c2", "C2"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise InvalidArgumentError(f"tail constant {name} must be positive and finite, got {v}")


@dataclass(frozen=True)
class SupportWitness:
    """Interval [-b, -a] of the centered base carrying mass at least eta."""

    a: float
    b: float
    eta: float

    def __post_init__(self):
        if not (0 < self.a <= self.b) or not math.isfinite(self.b):
            raise InvalidArgumentError(f"witness requires 0 < a <= b < inf, got a={self.a}, b={self.b}")
        if not (0 < self.eta <= 1):
            raise InvalidArgumentError(f"witness mass eta must lie in (0, 1], got {self.eta}")


@dataclass(frozen=True)
class StretchCertificate:
    """Everything needed to evaluate the two-branch stretch bound.

    ``witness`` backs the u >= 0 branch (mass below the mean);
    ``witness_left`` backs the u < 0 branch and is found on the mass
    above the mean, mirroring the reflection argument that produces
    that branch.
    """

    tail: TailConstants
    witness: SupportWitness
    witness_left: SupportWitness
    g_q_right: float
    g_q_left: float
    c0_right: float
    c0_left: float

    def __post_init__(self):
        if not (self.g_q_right > 0 and math.isfinite(self.g_q_right)):
            raise InvalidArgumentError(f"g_q_right must be positive and finite, got {self.g_q_right}")
        if not (self.g_q_left > 0 and math.isfinite(self.g_q_left)):
            raise InvalidArgumentError(f"g_q_left must be positive and finite, got {self.g_q_left}")

    @property
    def tilt_interval(self) -> tuple[float, float]:
        return (-self.tail.c2, self.tail.c1)

    def constants_dict(self) -> dict:
        return {
            "c1": self.tail.c1, "C1": self.tail.C1,
            "c2": self.tail.c2, "C2": self.tail.C2,
            "witness_right": {"a": self.witness.a, "b": self.witness.b, "eta": self.witness.eta},
            "witness_left": {"a": self.witness_left.a, "b": self.witness_left.b,
                             "eta": self.witness_left.eta},
            "g_q_right": self.g_q_right, "g_q_left": self.g_q_left,
            "c0_right": self.c0_right, "c0_left": self.c0_left,
        }


# ---------------------------------------------------------------------------
# Tail constants
# ---------------------------------------------------------------------------

def default_tail_rates(base: BaseDistribution) -> tuple[float, float]:
    """Per side: 90% of the distance to a finite domain endpoint, else 1."""
    lo, hi = base.mgf_domain
    c1 = 0.9 * hi if math.isfinite(hi) else 1.0
    c2 = -0.9 * lo if math.isfinite(lo) else 1.0
    return c1, c2


def fit_tail_constants(base: BaseDistribution, c1: float, c2: float) -> TailConstants:
    """Chernoff scales making the centered base a member of both tail classes.

    With m the mean of the base, ``C1 = E exp(c1 (Y - m)) = exp(-c1 m) M(c1)``
    bounds the centered right tail as ``C1 exp(-c1 t)``; symmetrically
    ``C2 = E exp(-c2 (Y - m)) = exp(c2 m) M(-c2)`` bounds the left tail.
    """
    lo, hi = base.mgf_domain
    margin = base.domain_margin()
    if not (c1 > 0 and c2 > 0):
        raise InvalidArgumentError(f"tail rates must be positive, got c1={c1}, c2={c2}")
    if (math.isfinite(hi) and c1 > hi - margin) or (math.isfinite(lo) and -c2 < lo + margin):
        raise DomainError("candidate tail rates must lie strictly inside the natural "
                          "parameter interval", value=(c1, -c2), interval=(lo, hi))
    m = float(base.mean_at(0.0))
    C1 = math.exp(float(base.log_mgf(c1)) - c1 * m)
    C2 = math.exp(float(base.log_mgf(-c2)) + c2 * m)
    return TailConstants(c1=c1, C1=C1, c2=c2, C2=C2)


# ---------------------------------------------------------------------------
# Support witness
# ---------------------------------------------------------------------------

def witness_mass(base: BaseDistribution, a: float, b: float, side: str = "below") -> float:
    """Mass of the candidate interval, measured on the uncentered base."""
    m = float(base.mean_at(0.0))
    if side == "below":
        return base.interval_mass(m - b, m - a)
    return base.interval_mass(m + a, m + b)


def _side_mass(base: BaseDistribution, m: float, side: str) -> float:
    if side == "below":
        lo = base.support_bounds[0]
        return base.interval_mass(lo if math.isfinite(lo) else -1e308, m) \
            - base.interval_mass(m, m)
    hi = base.support_bounds[1]
    return base.interval_mass(m, hi if math.isfinite(hi) else 1e308) \
        - base.interval_mass(m, m)


def _quantile_toward_tail(base: BaseDistribution, level: float, side: str) -> float:
    """Point with at least ``level`` mass at or beyond it, on the given side."""
    if side == "below":
        return float(base.quantile(level))
    if isinstance(base, Shifted):
        return base.offset + _quantile_toward_tail(base.base, level, side)
    if hasattr(base, "_locs"):
        order = np.argsort(np.asarray(base._locs))[::-1]
        w = np.exp(np.asarray(base._logw))
        acc = 0.0
        for i in order:
            acc += w[i]
            if acc >= level - 1e-15:
                return float(base._locs[i])
        return float(base._locs[order[-1]])
    if isinstance(base, Bernoulli):
        return 1.0 if base.p >= level - 1e-15 else 0.0
    return float(base.quantile(1.0 - level))


def find_support_witness(base: BaseDistribution, side: str = "below") -> SupportWitness:
    """Scan sidewise quantiles for the witness maximizing a^2 * eta.

    ``a^2 eta`` divides every polynomial correction term, so it is the
    quality score; among near-optimal candidates the smallest b wins
    because b enters the correction quadratically.  The returned eta is
    the measured interval mass, not an infimum.
    """
    if side not in ("below", "above"):
        raise InvalidArgumentError(f"side must be 'below' or 'above', got {side!r}")
    if float(base.dmean_at(0.0)) <= 0.0:
        raise DegenerateDistributionError(
            "point-mass base has no support witness; the zero stretch function applies")
    m = float(base.mean_at(0.0))
    beta = _side_mass(base, m, side)
    if beta <= 0.0:
        raise DegenerateDistributionError("no mass on the requested side of the mean")

    lo_sup, hi_sup = base.support_bounds
    edge = m - lo_sup if side == "below" else hi_sup - m
    b_candidates = []
    if math.isfinite(edge):
        b_candidates.append(float(edge))

    candidates = []
    for p in _WITNESS_A_LEVELS:
        x = _quantile_toward_tail(base, p * beta, side)
        a = (m - x) if side == "below" else (x - m)
        if not a > 0:
            continue
        bs = list(b_candidates)
        for q in _WITNESS_B_LEVELS:
            xb = _quantile_toward_tail(base, q * beta, side)
            b = (m - xb) if side == "below" else (xb - m)
            if math.isfinite(b) and b >= a:
                bs.append(float(b))
        for b in bs:
            if b < a:
                continue
            eta = witness_mass(base, a, b, side)
            if eta > 1e-12:
                candidates.append((a * a * eta, a, b, eta))
    if not candidates:
        raise DegenerateDistributionError("witness scan found no interval with positive mass")
    best = max(c[0] for c in candidates)
    score, a, b, eta = min((c for c in candidates if c[0] >= (1 - 1e-3) * best),
                           key=lambda c: c[2])
    return SupportWitness(a=a, b=b, eta=eta)


# ---------------------------------------------------------------------------
# The polynomial correction and the stretch bound
# ---------------------------------------------------------------------------

def g_q_value(M1: float, M2: float, m1: float, m2: float, witness: SupportWitness) -> float:
    """Polynomial correction shared by both branches of the stretch bound."""
    for name, v in (("M1", M1), ("M2", M2), ("m1", m1), ("m2", m2)):
        if not (v > 0 and math.isfinite(v)):
            raise InvalidArgumentError(f"{name} must be positive and finite, got {v}")
    a, b, eta = witness.a, witness.b, witness.eta
    e3 = _E**3
    return 1.5 * b + (1.0 / (a * a * eta)) * (
        204.0 / (e3 * m1**3 * M1**3)
        + 6.0 * b * b / (e3 * m1 * M1**3)
        + (81.0 * M2 + 9.0 * M2 * m1**2 * b * b) / m2**3
    )


def build_certificate(base: BaseDistribution, c1: float | None = None,
                      c2: float | None = None) -> StretchCertificate:
    """Fit tail constants, find both witnesses, and freeze the bound constants."""
    d1, d2 = default_tail_rates(base)
    c1 = d1 if c1 is None else float(c1)
    c2 = d2 if c2 is None else float(c2)
    tail = fit_tail_constants(base, c1, c2)
    w_right = find_support_witness(base, side="below")
    w_left = find_support_witness(base, side="above")
    return StretchCertificate(
        tail=tail,
        witness=w_right,
        witness_left=w_left,
        g_q_right=g_q_value(tail.C1, tail.C2, tail.c1, tail.c2, w_right),
        g_q_left=g_q_value(tail.C2, tail.C1, tail.c2, tail.c1, w_left),
        c0_right=tail.C1 * tail.c1 * _E,
        c0_left=tail.C2 * tail.c2 * _E,
    )


def stretch_bound(cert: StretchCertificate, u: float) -> float:
    """Two-branch upper bound on |mu''|/mu' at tilt u.

    Nondecreasing on [0, c1), nonincreasing on (-c2, 0].
    """
    c1, C1, c2, C2 = cert.tail.c1, cert.tail.C1, cert.tail.c2, cert.tail.C2
    u = float(u)
    if not (-c2 < u < c1):
        raise DomainError("stretch bound is defined on (-c2, c1)",
                          value=u, interval=(-c2, c1))
    if u >= 0.0:
        return 1.5 * (2.0 * _E * C1 * c1 / (c1 - u) ** 2
                      + u * cert.witness.b / (c1 - u)) + cert.g_q_right
    return 1.5 * (2.0 * _E * c2 * C2 / (c2 + u) ** 2
                  + (-u) * cert.witness_left.b / (c2 + u)) + cert.g_q_left


def stretch_supremum(cert: StretchCertificate, family) -> float:
    """Supremum of the stretch bound over [param_lo, param_hi].

    Valid as the max of the endpoint values by branch monotonicity.
    """
    lo, hi = family.interval if isinstance(family, NefFamily) else (float(family[0]), float(family[1]))
    lo_ok, hi_ok = cert.tilt_interval
    if not (lo_ok < lo <= hi < hi_ok):
        raise DomainError("tilt range must sit strictly inside (-c2, c1)",
                          value=(lo, hi), interval=(lo_ok, hi_ok))
    return max(stretch_bound(cert, lo), stretch_bound(cert, hi))


# ---------------------------------------------------------------------------
# Subgaussian envelope
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubgaussianEnvelope:
    """Certified envelope slope * |u| + intercept for a subgaussian base.

    ``sigma_proxy`` encodes the two-sided tail ``2 exp(-t^2 / (2 sigma^2))``,
    i.e. rate c = 1/sigma^2 and scale C = 2 in ``C exp(-c t^2 / 2)``.
    """

    sigma_proxy: float
    witness: SupportWitness
    slope: float
    intercept: float
    note: str = field(default=(
        "envelope reuses the two-sided tail scale C for the lower-tail step and the "
        "exponential-tail variance lower bound a^2 eta e^(-ub)/M(u); recorded as an "
        "interpretation, not a tight constant"), repr=False)

    def value(self, u: float) -> float:
        return self.slope * abs(float(u)) + self.intercept


def subgaussian_envelope(sigma_proxy: float, witness: SupportWitness) -> SubgaussianEnvelope:
    if not (sigma_proxy > 0 and math.isfinite(sigma_proxy)):
        raise InvalidArgumentError(f"sigma_proxy must be positive, got {sigma_proxy}")
    c = 1.0 / sigma_proxy**2
    C = 2.0
    frak1 = C * (1.0 + math.sqrt(math.pi / c))
    frak3 = math.sqrt(math.pi / c) * frak1
    frak4 = C * math.sqrt(math.pi / (2.0 * c))
    beta1 = 2.0 * (4.0 / c + 1.0)                       # slope of the cutoff B(u)
    beta0 = 8.0 / c + witness.b + frak3                 # intercept of the cutoff B(u)
    front = 6.0 * (frak3 + frak4) / (witness.a**2 * witness.eta)
    # B^2 <= 2 beta1^2 u^2 + 2 beta0^2, and w u^2 exp(-4u^2/c) <= w sqrt(c)/2 * u
    slope = 1.5 * beta1 + front * beta1**2 * math.sqrt(c)
    intercept = 1.5 * beta0 + front * (2.0 / c + 2.0 * beta0**2)
    return SubgaussianEnvelope(sigma_proxy=sigma_proxy, witness=witness,
                               slope=slope, intercept=intercept)


def subgaussian_stretch_bound(sigma_proxy: float, witness: SupportWitness, u: float) -> float:
    return subgaussian_envelope(sigma_proxy, witness).value(u)


# ---------------------------------------------------------------------------
# Linear-growth counterexample
# ---------------------------------------------------------------------------

def counterexample_distribution(i_max: int) -> CounterexampleSubgaussian:
    return CounterexampleSubgaussian(i_max)


@dataclass(frozen=True)
class LowerBoundReport:
    i: int
    i_max: int
    u: float
    mean: float
    ratio: float
    mean_lo: float
    mean_hi: float
    ratio_threshold: float
    mean_ok: bool
    ratio_ok: bool

    @property
    def passes(self) -> bool:
        return self.mean_ok and self.ratio_ok


def verify_lower_bound(i: int, i_max: int | None = None) -> LowerBoundReport:
    """Tilted mean and moment ratio of the atom construction at u = 2^(i+1).

    Checks the mean against [1.24, 1.26] * 2^i and the ratio against
    0.038 * u.  All weight arithmetic runs in log domain.
    """
    if not isinstance(i, (int, np.integer)) or i % 2 != 0 or i < 4:
        raise InvalidArgumentError(f"i must be an even integer >= 4, got {i!r}")
    i_max = int(i + 20) if i_max is None else int(i_max)
    if i_max < i + 20:
        raise InvalidArgumentError(f"series truncation i_max must be >= i + 20, got {i_max}")
    base = counterexample_distribution(i_max)
    u = float(2 ** (i + 1))
    rep = moments(base, u)
    if not all(map(math.isfinite, (rep.mean, rep.variance, rep.third_central))):
        raise PrecisionError("moment evaluation overflowed; log-domain path is mandatory here")
    ratio = abs(rep.third_central) / rep.variance
    mean_lo, mean_hi = 1.24 * 2**i, 1.26 * 2**i
    return LowerBoundReport(
        i=i, i_max=i_max, u=u, mean=rep.mean, ratio=ratio,
        mean_lo=mean_lo, mean_hi=mean_hi, ratio_threshold=0.038 * u,
        mean_ok=bool(mean_lo <= rep.mean <= mean_hi),
        ratio_ok=bool(ratio >= 0.038 * u),
    )


# ---------------------------------------------------------------------------
# Grid verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DominanceReport:
    points: tuple[dict, ...]
    violations: int

    @property
    def all_ok(self) -> bool:
        return self.violations == 0


def verify_dominance(cert: StretchCertificate, family: NefFamily,
                     grid_n: int = 200) -> DominanceReport:
    """Check bound >= measured ratio on an even grid over the tilt range."""
    lo, hi = family.interval
    pts = []
    bad = 0
    for u in np.linspace(lo, hi, grid_n):
        ratio = gamma_ratio(family, float(u))
        bound = stretch_bound(cert, float(u))
        ok = bool(bound >= ratio)
        bad += 0 if ok else 1
        pts.append({"u": float(u), "ratio": ratio, "bound": bound, "ok": ok})
    return DominanceReport(points=tuple(pts), violations=bad)
