"""Exponential-family core: MGF/CGF closed forms, tilted moments, sampling."""

import math

import numpy as np
import pytest
from scipy import integrate

from nefbandit.distributions import (
    Bernoulli,
    CounterexampleSubgaussian,
    DiscreteAtoms,
    Exponential,
    Gamma,
    Gaussian,
    Laplace,
    NefFamily,
    Poisson,
    Shifted,
    centered,
    cgf,
    distribution_config,
    gamma_ratio,
    mean_fn,
    mgf,
    moments,
    parse_distribution,
    reflected,
    sample_tilted,
)
from nefbandit.errors import DomainError, InvalidArgumentError, ParseError
from nefbandit.rng import replicate_stream

ALL_BASES = [
    Bernoulli(0.5),
    Bernoulli(0.2),
    Gaussian(1.0),
    Exponential(1.0),
    Poisson(2.0),
    Laplace(1.0),
    Gamma(2.0, 1.0),
    DiscreteAtoms(((-2.0, 0.25), (-0.5, 0.25), (0.5, 0.25), (2.0, 0.25))),
]


def interior_grid(base, n=9, frac=0.6):
    """Evenly spaced tilts strictly inside the natural parameter interval."""
    lo, hi = base.mgf_domain
    lo = max(lo, -2.0) if not math.isfinite(lo) else lo
    hi = min(hi, 2.0) if not math.isfinite(hi) else hi
    c, r = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return np.linspace(c - frac * r, c + frac * r, n)


def tilted_total_mass(base, u):
    """Independent oracle: total mass of Q_u by quadrature / summation."""
    logm = float(base.log_mgf(u))
    if isinstance(base, Bernoulli):
        return float(np.exp(np.array([math.log1p(-base.p), math.log(base.p) + u]) - logm).sum())
    if isinstance(base, (DiscreteAtoms, CounterexampleSubgaussian)):
        locs, logw = base._locs, base._logw
        return float(np.exp(logw + u * locs - logm).sum())
    if isinstance(base, Poisson):
        ks = np.arange(0, 200)
        logpmf = ks * math.log(base.nu) - base.nu - [math.lgamma(k + 1) for k in ks]
        return float(np.exp(np.asarray(logpmf) + u * ks - logm).sum())
    if isinstance(base, Gaussian):
        f = lambda y: math.exp(u * y - logm) * math.exp(-0.5 * (y / base.sigma) ** 2) \
            / (base.sigma * math.sqrt(2 * math.pi))
        val, _ = integrate.quad(f, -40 * base.sigma + base.sigma**2 * u,
                                40 * base.sigma + base.sigma**2 * u, limit=200)
        return val
    if isinstance(base, Exponential):
        r = base.rate - u
        f = lambda y: math.exp(u * y - logm) * base.rate * math.exp(-base.rate * y)
        val, _ = integrate.quad(f, 0, 120 / r, limit=200)
        return val
    if isinstance(base, Laplace):
        s = base.scale
        f = lambda y: math.exp(u * y - logm) * math.exp(-abs(y) / s) / (2 * s)
        hi = 120 / (1 / s - u)
        lo = -120 / (1 / s + u)
        val, _ = integrate.quad(f, lo, hi, points=[0.0], limit=200)
        return val
    if isinstance(base, Gamma):
        th = base.scale / (1 - base.scale * u)
        f = lambda y: math.exp(u * y - logm) * math.exp(
            (base.shape - 1) * math.log(y) - y / base.scale
            - math.lgamma(base.shape) - base.shape * math.log(base.scale))
        val, _ = integrate.quad(f, 1e-300, th * (base.shape + 400), limit=200)
        return val
    raise AssertionError(base)


# ---------------------------------------------------------------------------
# mgf / cgf
# ---------------------------------------------------------------------------

def test_mgf_exponential_closed_form():
    assert mgf(Exponential(1.0), 0.5) == pytest.approx(2.0, abs=1e-14)


@pytest.mark.parametrize("base", ALL_BASES, ids=lambda b: b.kind + str(id(b) % 97))
def test_mgf_at_zero_is_one(base):
    assert mgf(base, 0.0) == pytest.approx(1.0, abs=1e-12)


def test_mgf_laplace_matches_quadrature_oracle():
    # oracle: direct integral of exp(0.5 y) * exp(-|y|)/2 over [-80, 160];
    # the discarded tails integrate to e^{-80}/3 + e^{-120} < 1e-12
    f = lambda y: 0.5 * math.exp(-abs(y)) * math.exp(0.5 * y)
    oracle, err = integrate.quad(f, -80.0, 160.0, points=[0.0], limit=200)
    assert err < 1e-8
    assert mgf(Laplace(1.0), 0.5) == pytest.approx(oracle, rel=1e-10)
    assert oracle == pytest.approx(4.0 / 3.0, rel=1e-10)


def test_mgf_outside_domain_is_infinite():
    assert mgf(Exponential(1.0), 1.0) == math.inf
    assert mgf(Exponential(1.0), 2.5) == math.inf
    assert mgf(Laplace(2.0), -0.51) == math.inf


def test_mgf_rejects_non_finite_argument():
    with pytest.raises(InvalidArgumentError):
        mgf(Exponential(1.0), math.nan)
    with pytest.raises(InvalidArgumentError):
        mgf(Gaussian(1.0), math.inf)


def test_cgf_exponential_and_zero():
    assert cgf(Exponential(1.0), 0.5) == pytest.approx(math.log(2.0), abs=1e-14)
    for base in ALL_BASES:
        assert cgf(base, 0.0) == pytest.approx(0.0, abs=1e-14)


def test_cgf_poisson_series_oracle():
    # oracle: log sum_k exp(u k) nu^k e^{-nu} / k!, summed in log domain
    nu, u = 2.0, 1.0
    logs = [u * k + k * math.log(nu) - nu - math.lgamma(k + 1) for k in range(200)]
    peak = max(logs)
    oracle = peak + math.log(sum(math.exp(v - peak) for v in logs))
    assert cgf(Poisson(nu), u) == pytest.approx(oracle, rel=1e-13)
    assert oracle == pytest.approx(nu * (math.e - 1.0), rel=1e-12)


def test_cgf_domain_error_names_interval():
    with pytest.raises(DomainError) as ei:
        cgf(Exponential(2.0), 2.0)
    assert "(-inf, 2.0)" in str(ei.value)


def test_boundary_guard_rejects_near_boundary_tilt():
    with pytest.raises(DomainError):
        cgf(Exponential(1.0), 1.0 - 1e-12)


# ---------------------------------------------------------------------------
# mean function and moments
# ---------------------------------------------------------------------------

def test_mean_exponential_and_bernoulli():
    assert mean_fn(Exponential(1.0), 0.5) == pytest.approx(2.0, abs=1e-13)
    assert mean_fn(Bernoulli(0.5), 0.0) == pytest.approx(0.5, abs=1e-14)


def test_mean_two_atom_tilt_arithmetic():
    # atoms at 0 and 1 with equal weight, tilted by ln 3:
    # weights become (0.5, 1.5)/2, so the mean is 1.5/2 = 0.75
    base = DiscreteAtoms(((0.0, 0.5), (1.0, 0.5)))
    assert mean_fn(base, math.log(3.0)) == pytest.approx(0.75, abs=1e-14)


@pytest.mark.parametrize("base", ALL_BASES, ids=lambda b: b.kind + str(id(b) % 97))
def test_mean_matches_cgf_finite_differences(base):
    h = 1e-5
    for u in interior_grid(base):
        fd = (cgf(base, u + h) - cgf(base, u - h)) / (2 * h)
        m = mean_fn(base, u)
        assert abs(m - fd) <= 1e-6 * (1 + abs(m))


@pytest.mark.parametrize("base", ALL_BASES, ids=lambda b: b.kind + str(id(b) % 97))
def test_variance_matches_cgf_second_difference(base):
    h = 1e-5
    for u in interior_grid(base):
        fd2 = (cgf(base, u + h) - 2 * cgf(base, u) + cgf(base, u - h)) / h**2
        v = moments(base, u).variance
        assert abs(v - fd2) <= 1e-4 * (1 + abs(v))


def test_moments_exponential_closed_forms():
    rep = moments(Exponential(1.0), 0.5)
    assert rep.variance == pytest.approx(4.0, rel=1e-12)
    assert rep.third_central == pytest.approx(16.0, rel=1e-12)
    assert rep.method == "analytic"


def test_moments_point_mass_degenerates_to_zero():
    rep = moments(DiscreteAtoms(((3.0, 1.0),)), 2.0)
    assert rep.variance == 0.0
    assert rep.third_central == 0.0
    assert gamma_ratio(DiscreteAtoms(((3.0, 1.0),)), 2.0) == 0.0


def test_moments_laplace_quadrature_vs_closed_forms():
    u, lam = 0.3, 1.0
    rep = moments(Laplace(1.0), u)
    var_cf = 1.0 / (lam + u) ** 2 + 1.0 / (lam - u) ** 2
    third_cf = 2.0 / (lam - u) ** 3 - 2.0 / (lam + u) ** 3
    assert rep.method == "quadrature"
    assert rep.variance == pytest.approx(var_cf, rel=1e-8)
    assert rep.third_central == pytest.approx(third_cf, rel=1e-8)
    assert rep.abs_error_estimate < 1e-8


@pytest.mark.parametrize("base", ALL_BASES, ids=lambda b: b.kind + str(id(b) % 97))
def test_moment_report_internal_consistency(base):
    for u in interior_grid(base, n=5):
        rep = moments(base, u)
        assert rep.variance >= 0
        assert rep.third_absolute >= abs(rep.third_central) - 1e-12


@pytest.mark.parametrize("base", ALL_BASES, ids=lambda b: b.kind + str(id(b) % 97))
def test_tilted_distribution_normalises(base):
    for u in interior_grid(base, n=5):
        assert tilted_total_mass(base, u) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("base", ALL_BASES, ids=lambda b: b.kind + str(id(b) % 97))
def test_mean_function_is_nondecreasing(base):
    grid = interior_grid(base, n=25)
    means = [mean_fn(base, u) for u in grid]
    assert all(b - a >= -1e-12 for a, b in zip(means, means[1:]))


# ---------------------------------------------------------------------------
# gamma ratio
# ---------------------------------------------------------------------------

def test_gamma_ratio_exponential():
    assert gamma_ratio(Exponential(1.0), 0.5) == pytest.approx(4.0, rel=1e-12)


def test_gamma_ratio_bernoulli_bounded_by_one():
    base = Bernoulli(0.5)
    for u in np.linspace(-6, 6, 25):
        r = gamma_ratio(base, u)
        m = mean_fn(base, u)
        assert r == pytest.approx(abs(1 - 2 * m), rel=1e-10)
        assert r <= 1.0 + 1e-12


def test_gamma_ratio_laplace_closed_form():
    lam, u = 1.0, 0.5
    expected = 2 * abs(u) * (3 * lam**2 + u**2) / ((lam - u) * (lam + u) * (lam**2 + u**2))
    assert gamma_ratio(Laplace(1.0), u) == pytest.approx(expected, rel=1e-6)


# ---------------------------------------------------------------------------
# structural invariants: tilt composition, shift, reflection
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("base,u,s", [
    (Exponential(1.0), 0.3, 0.4),
    (Exponential(2.0), -1.0, 0.5),
    (Poisson(2.0), 0.2, -0.7),
    (Bernoulli(0.3), 1.0, -2.0),
    (Gamma(2.0, 1.0), 0.4, -0.9),
    (Gaussian(1.5), 0.8, -0.3),
    (DiscreteAtoms(((-1.0, 0.5), (2.0, 0.5))), 0.6, -0.2),
])
def test_tilt_composition(base, u, s):
    # re-tilting Q_u by s lands on Q_{u+s}
    retilted = base.tilted(u)
    assert float(retilted.mean_at(s)) == pytest.approx(mean_fn(base, u + s), abs=1e-10)
    assert float(retilted.log_mgf(s)) == pytest.approx(cgf(base, u + s) - cgf(base, u), abs=1e-10)


@pytest.mark.parametrize("base", ALL_BASES, ids=lambda b: b.kind + str(id(b) % 97))
@pytest.mark.parametrize("c", [-3.0, 0.7])
def test_gamma_ratio_shift_invariance(base, c):
    shifted = Shifted(base, c)
    for u in interior_grid(base, n=5):
        assert gamma_ratio(shifted, u) == pytest.approx(gamma_ratio(base, u), rel=1e-9, abs=1e-12)
        assert mean_fn(shifted, u) == pytest.approx(mean_fn(base, u) + c, rel=1e-10, abs=1e-10)


@pytest.mark.parametrize("base", [
    Bernoulli(0.3),
    Laplace(1.0),
    Gaussian(2.0),
    DiscreteAtoms(((-2.0, 0.2), (0.5, 0.5), (3.0, 0.3))),
])
def test_gamma_ratio_reflection(base):
    refl = reflected(base)
    for u in interior_grid(base, n=5):
        assert gamma_ratio(refl, -u) == pytest.approx(gamma_ratio(base, u), rel=1e-9, abs=1e-12)


def test_centered_base_has_zero_mean():
    for base in ALL_BASES:
        assert mean_fn(centered(base), 0.0) == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def test_sample_tilted_exponential_clt_band():
    rng = replicate_stream(11, 0)
    draws = sample_tilted(Exponential(1.0), 0.5, rng, size=1_000_000)
    # mean 2, variance 4: three-sigma band for the sample mean
    assert abs(draws.mean() - 2.0) < 3 * math.sqrt(4.0 / 1e6)


def test_sample_tilted_bernoulli_support_and_mean():
    rng = replicate_stream(12, 0)
    draws = sample_tilted(Bernoulli(0.5), 0.0, rng, size=1_000_000)
    assert set(np.unique(draws)) <= {0.0, 1.0}
    assert abs(draws.mean() - 0.5) < 3 * 0.5 / 1000.0


def test_sample_tilted_poisson_variance_band():
    rng = replicate_stream(13, 0)
    base = Poisson(2.0)
    draws = sample_tilted(base, 0.2, rng, size=1_000_000)
    rep = moments(base, 0.2)
    m = rep.variance  # tilted Poisson: variance equals the tilted rate
    assert m == pytest.approx(2.0 * math.exp(0.2), rel=1e-12)
    # var(sample variance) ≈ (mu4 - sigma^4)/n with mu4 = m + 3 m^2
    sd = math.sqrt((m + 3 * m**2 - m**2) / 1e6)
    assert abs(draws.var() - m) < 3 * sd


@pytest.mark.parametrize("base", ALL_BASES, ids=lambda b: b.kind + str(id(b) % 97))
def test_sample_tilted_deterministic_given_stream(base):
    u = float(interior_grid(base, n=3)[1])
    a = sample_tilted(base, u, replicate_stream(99, 4), size=64)
    b = sample_tilted(base, u, replicate_stream(99, 4), size=64)
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("base", ALL_BASES, ids=lambda b: b.kind + str(id(b) % 97))
def test_sample_tilted_agrees_with_mean(base):
    u = float(interior_grid(base, n=3)[1])
    rng = replicate_stream(7, 1)
    draws = sample_tilted(base, u, rng, size=200_000)
    rep = moments(base, u)
    sd = math.sqrt(rep.variance / draws.size)
    assert abs(draws.mean() - rep.mean) < 4 * sd + 1e-9


# ---------------------------------------------------------------------------
# family wrapper and config schema
# ---------------------------------------------------------------------------

def test_family_requires_interval_inside_domain():
    with pytest.raises(DomainError):
        NefFamily(Exponential(1.0), -0.5, 1.0)
    fam = NefFamily(Exponential(1.0), -0.5, 0.5)
    assert fam.interval == (-0.5, 0.5)


def test_parse_distribution_round_trip():
    for base in ALL_BASES + [CounterexampleSubgaussian(8)]:
        cfg = distribution_config(base)
        again = parse_distribution(cfg)
        assert distribution_config(again) == cfg


def test_parse_distribution_rejects_unknown_fields():
    with pytest.raises(ParseError, match="unknown fields"):
        parse_distribution({"kind": "exponential", "rate": 1.0, "scale": 2.0})
    with pytest.raises(ParseError, match="unknown distribution kind"):
        parse_distribution({"kind": "weibull", "rate": 1.0})
    with pytest.raises(ParseError, match="missing"):
        parse_distribution({"kind": "gamma", "shape": 2.0})


def test_atom_weights_must_sum_to_one():
    with pytest.raises(InvalidArgumentError):
        DiscreteAtoms(((0.0, 0.5), (1.0, 0.6)))
    with pytest.raises(InvalidArgumentError):
        DiscreteAtoms(((0.0, -0.1), (1.0, 1.1)))
