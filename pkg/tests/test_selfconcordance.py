"""Stretch certificates: tail fitting, witness search, bound evaluation."""

import math

import numpy as np
import pytest
from scipy import integrate

from nefbandit.distributions import (
    Bernoulli,
    DiscreteAtoms,
    Exponential,
    Gamma,
    Gaussian,
    Laplace,
    NefFamily,
    gamma_ratio,
    mean_fn,
    moments,
    reflected,
)
from nefbandit.errors import (
    DegenerateDistributionError,
    DomainError,
    InvalidArgumentError,
)
from nefbandit.selfconcordance import (
    SupportWitness,
    build_certificate,
    counterexample_distribution,
    default_tail_rates,
    find_support_witness,
    fit_tail_constants,
    g_q_value,
    stretch_bound,
    stretch_supremum,
    subgaussian_envelope,
    subgaussian_stretch_bound,
    verify_dominance,
    verify_lower_bound,
    witness_mass,
)

MIX4 = DiscreteAtoms(((-2.0, 0.25), (-0.5, 0.25), (0.5, 0.25), (2.0, 0.25)))


# ---------------------------------------------------------------------------
# tail constants
# ---------------------------------------------------------------------------

def test_fit_tail_constants_exponential_right_scale():
    tc = fit_tail_constants(Exponential(1.0), 0.5, 10.0)
    assert tc.C1 == pytest.approx(2.0 * math.exp(-0.5), rel=1e-13)


def test_fit_tail_constants_bound_centered_exponential_tails():
    tc = fit_tail_constants(Exponential(1.0), 0.5, 10.0)
    for t in np.linspace(0.0, 6.0, 31):
        right_exact = math.exp(-(1.0 + t))          # P(X - 1 >= t)
        left_exact = 1.0 - math.exp(-(1.0 - t)) if t < 1.0 else 0.0  # P(1 - X >= t)
        assert right_exact <= tc.C1 * math.exp(-tc.c1 * t) + 1e-15
        assert left_exact <= tc.C2 * math.exp(-tc.c2 * t) + 1e-15


def test_fit_tail_constants_symmetric_base_matches_sides():
    tc = fit_tail_constants(Laplace(1.0), 0.7, 0.7)
    assert tc.C1 == pytest.approx(tc.C2, rel=1e-14)


def test_fit_tail_constants_gaussian_quadrature_oracle():
    tc = fit_tail_constants(Gaussian(1.0), 1.0, 1.0)
    oracle, _ = integrate.quad(
        lambda y: math.exp(y) * math.exp(-0.5 * y * y) / math.sqrt(2 * math.pi), -40, 41)
    assert tc.C1 == pytest.approx(math.exp(0.5), rel=1e-13)
    assert tc.C2 == pytest.approx(oracle, rel=1e-10)


def test_fit_tail_constants_rejects_out_of_domain_rate():
    with pytest.raises(DomainError):
        fit_tail_constants(Exponential(1.0), 1.0, 1.0)


def test_default_tail_rates():
    assert default_tail_rates(Exponential(1.0)) == (0.9, 1.0)
    assert default_tail_rates(Laplace(2.0)) == (0.45, 0.45)
    assert default_tail_rates(Bernoulli(0.5)) == (1.0, 1.0)


# ---------------------------------------------------------------------------
# support witness
# ---------------------------------------------------------------------------

def test_witness_mass_exponential_cdf_arithmetic():
    # centered Exp(1): mass of [-1, -0.5] is P(X in [0, 0.5]) = 1 - e^{-1/2}
    assert witness_mass(Exponential(1.0), 0.5, 1.0) == pytest.approx(
        1.0 - math.exp(-0.5), abs=1e-14)


def test_witness_mass_laplace_cdf_arithmetic():
    expected = (math.exp(-0.25) - math.exp(-1.0)) / 2.0
    assert witness_mass(Laplace(1.0), 0.25, 1.0) == pytest.approx(expected, abs=1e-14)


def test_find_support_witness_bernoulli_atom():
    w = find_support_witness(Bernoulli(0.5))
    assert (w.a, w.b, w.eta) == (0.5, 0.5, 0.5)


@pytest.mark.parametrize("base", [Exponential(1.0), Laplace(1.0), Gamma(2.0, 1.0),
                                  Gaussian(1.0), MIX4, Bernoulli(0.3)])
@pytest.mark.parametrize("side", ["below", "above"])
def test_find_support_witness_mass_is_measured(base, side):
    w = find_support_witness(base, side=side)
    assert 0 < w.a <= w.b
    assert witness_mass(base, w.a, w.b, side) == pytest.approx(w.eta, abs=1e-9)


def test_find_support_witness_degenerate_base_errors():
    with pytest.raises(DegenerateDistributionError):
        find_support_witness(DiscreteAtoms(((3.0, 1.0),)))


# ---------------------------------------------------------------------------
# polynomial correction
# ---------------------------------------------------------------------------

def _g_reference(M1, M2, m1, m2, a, b, eta):
    # independent re-implementation, different grouping of the three terms
    t1 = 204.0 * math.exp(-3.0) / (m1 * M1) ** 3
    t2 = (b / M1) ** 2 * (6.0 * math.exp(-3.0) / (m1 * M1))
    t3 = M2 * (81.0 + 9.0 * (m1 * b) ** 2) / m2**3
    return b + b / 2.0 + (t1 + t2 + t3) / (eta * a**2)


def test_g_q_value_hand_checkable_point():
    w = SupportWitness(1.0, 1.0, 1.0)
    expected = 91.5 + 210.0 / math.e**3
    assert g_q_value(1.0, 1.0, 1.0, 1.0, w) == pytest.approx(expected, rel=1e-14)
    assert g_q_value(1.0, 1.0, 1.0, 1.0, w) == pytest.approx(101.9553, abs=5e-4)


def test_g_q_value_deterministic():
    w = SupportWitness(0.4, 1.3, 0.2)
    v1 = g_q_value(2.0, 3.0, 0.7, 1.1, w)
    v2 = g_q_value(2.0, 3.0, 0.7, 1.1, w)
    assert v1 == v2


def test_g_q_value_double_entry_oracle():
    # constants fitted for Exponential(1) with rates (0.5, 10)
    M = 2.0 * math.exp(-0.5)
    w = SupportWitness(0.5, 1.0, 1.0 - math.exp(-0.5))
    got = g_q_value(M, M, 0.5, 10.0, w)
    ref = _g_reference(M, M, 0.5, 10.0, w.a, w.b, w.eta)
    assert got == pytest.approx(ref, rel=1e-12)


# ---------------------------------------------------------------------------
# stretch bound
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("base", [Exponential(1.0), Laplace(1.0), MIX4, Bernoulli(0.3)])
def test_certificate_constants_regenerate_exactly(base):
    cert = build_certificate(base)
    tc = cert.tail
    assert g_q_value(tc.C1, tc.C2, tc.c1, tc.c2, cert.witness) == cert.g_q_right
    assert g_q_value(tc.C2, tc.C1, tc.c2, tc.c1, cert.witness_left) == cert.g_q_left
    assert cert.c0_right == tc.C1 * tc.c1 * math.e
    assert cert.c0_left == tc.C2 * tc.c2 * math.e


def test_stretch_bound_at_zero_closed_form():
    cert = build_certificate(Exponential(1.0))
    c1, C1 = cert.tail.c1, cert.tail.C1
    assert stretch_bound(cert, 0.0) == pytest.approx(
        3.0 * math.e * C1 / c1 + cert.g_q_right, rel=1e-14)


def test_stretch_bound_dominates_exponential_ratio_pointwise():
    cert = build_certificate(Exponential(1.0))
    assert stretch_bound(cert, 0.25) >= gamma_ratio(Exponential(1.0), 0.25)
    assert gamma_ratio(Exponential(1.0), 0.25) == pytest.approx(2.0 / 0.75, rel=1e-12)


def test_stretch_bound_dominates_laplace_ratio_on_grid():
    base = Laplace(1.0)
    cert = build_certificate(base, c1=0.95, c2=0.95)
    for u in np.linspace(-0.9, 0.9, 37):
        bound = stretch_bound(cert, float(u))
        ratio = gamma_ratio(base, float(u))
        lam = 1.0
        closed = 2 * abs(u) * (3 * lam**2 + u**2) / ((lam - u) * (lam + u) * (lam**2 + u**2))
        assert ratio == pytest.approx(closed, rel=1e-6, abs=1e-9)
        assert bound >= ratio


def test_stretch_bound_domain_error():
    cert = build_certificate(Exponential(1.0))
    with pytest.raises(DomainError):
        stretch_bound(cert, cert.tail.c1)
    with pytest.raises(DomainError):
        stretch_bound(cert, -cert.tail.c2 - 0.1)


@pytest.mark.parametrize("base", [Exponential(1.0), Laplace(1.0), MIX4, Bernoulli(0.4)])
def test_stretch_bound_branch_monotonicity(base):
    cert = build_certificate(base)
    c1, c2 = cert.tail.c1, cert.tail.c2
    # u = 0 itself evaluates on the nonnegative branch, so the negative-side
    # grid stays strictly below zero
    right = [stretch_bound(cert, u) for u in np.linspace(0.0, 0.95 * c1, 40)]
    left = [stretch_bound(cert, u) for u in np.linspace(-0.95 * c2, 0.0, 40, endpoint=False)]
    assert all(b - a >= -1e-11 * abs(a) for a, b in zip(right, right[1:]))
    assert all(b - a <= 1e-11 * abs(a) for a, b in zip(left, left[1:]))


@pytest.mark.parametrize("base", [Laplace(1.0), MIX4,
                                  DiscreteAtoms(((-3.0, 0.2), (0.5, 0.5), (1.0, 0.3)))])
def test_certificate_reflection_consistency(base):
    cert = build_certificate(base)
    cert_r = build_certificate(reflected(base))
    for u in [-0.6, -0.2, 0.3, 0.7]:
        u = u * min(cert.tail.c1, cert.tail.c2)
        assert stretch_bound(cert_r, -u) == pytest.approx(stretch_bound(cert, u), rel=1e-12)


def test_stretch_supremum_endpoint_rule():
    cert = build_certificate(Exponential(1.0))
    fam = NefFamily(Exponential(1.0), -0.5, 0.5)
    sup = stretch_supremum(cert, fam)
    dense = max(stretch_bound(cert, float(u)) for u in np.linspace(-0.5, 0.5, 2001))
    assert sup == pytest.approx(dense, rel=1e-12)
    assert stretch_supremum(cert, (0.0, 0.0)) == stretch_bound(cert, 0.0)


def test_stretch_supremum_symmetric_interval():
    cert = build_certificate(Laplace(1.0))
    assert stretch_bound(cert, 0.4) == pytest.approx(stretch_bound(cert, -0.4), rel=1e-12)
    assert stretch_supremum(cert, (-0.4, 0.4)) == pytest.approx(stretch_bound(cert, 0.4), rel=1e-12)


def test_stretch_supremum_requires_interval_inside():
    cert = build_certificate(Exponential(1.0))
    with pytest.raises(DomainError):
        stretch_supremum(cert, (-0.5, cert.tail.c1))


@pytest.mark.parametrize("base,interval", [
    (Exponential(1.0), (-0.8, 0.72)),
    (Laplace(1.0), (-0.72, 0.72)),
    (MIX4, (-0.8, 0.8)),
])
def test_verify_dominance_no_violations(base, interval):
    cert = build_certificate(base)
    fam = NefFamily(base, *interval)
    report = verify_dominance(cert, fam, grid_n=50)
    assert report.all_ok
    assert len(report.points) == 50


# ---------------------------------------------------------------------------
# subgaussian envelope
# ---------------------------------------------------------------------------

def test_subgaussian_envelope_gaussian_ratio_is_zero():
    base = Gaussian(1.0)
    w = find_support_witness(base)
    for u in np.linspace(-5, 5, 11):
        assert gamma_ratio(base, u) == pytest.approx(0.0, abs=1e-12)
        assert subgaussian_stretch_bound(1.0, w, u) > 0


def test_subgaussian_envelope_dominates_bernoulli():
    base = Bernoulli(0.5)
    w = find_support_witness(base)
    for u in np.linspace(-10, 10, 81):
        env = subgaussian_stretch_bound(0.5, w, u)  # range 1 => 1/2-subgaussian
        assert env >= gamma_ratio(base, u)
        assert gamma_ratio(base, u) <= 1.0 + 1e-12


def test_subgaussian_envelope_dominates_three_atom_ratio():
    base = DiscreteAtoms(((-1.0, 1 / 3), (0.0, 1 / 3), (1.0, 1 / 3)))
    w = find_support_witness(base)
    env = subgaussian_envelope(1.0, w)
    for u in np.linspace(-8, 8, 65):
        assert env.value(u) >= gamma_ratio(base, u)
    assert "interpretation" in env.note


def test_subgaussian_envelope_rejects_bad_proxy():
    w = SupportWitness(0.5, 0.5, 0.5)
    with pytest.raises(InvalidArgumentError):
        subgaussian_stretch_bound(0.0, w, 1.0)


# ---------------------------------------------------------------------------
# counterexample construction
# ---------------------------------------------------------------------------

def test_counterexample_three_atoms_weight_ratios():
    base = counterexample_distribution(3)
    assert list(base._locs) == [2.0, 4.0, 8.0]
    w = np.exp(base._logw)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    raw = np.array([0.25 * math.exp(-3.0), math.exp(-16.0), 0.25 * math.exp(-48.0)])
    np.testing.assert_allclose(w, raw / raw.sum(), rtol=1e-13)


def test_counterexample_tilt_ratio_is_one_quarter():
    i = 4
    base = counterexample_distribution(i + 20)
    u = 2.0 ** (i + 1)
    q = base._tilted_weights(u)
    ks = np.arange(1, i + 21)
    qi = q[ks == i][0]
    qi1 = q[ks == i + 1][0]
    assert qi1 / qi == pytest.approx(0.25, rel=1e-13)


def test_counterexample_truncation_stability():
    # atoms past i+1 carry doubly exponentially small tilted mass
    def ratio(i_max):
        rep = moments(counterexample_distribution(i_max), 32.0)
        return abs(rep.third_central) / rep.variance

    assert ratio(5) == pytest.approx(ratio(24), abs=1e-10)


def test_verify_lower_bound_reports():
    rep = verify_lower_bound(4)
    assert rep.u == 32.0
    # the tilt concentrates the mass on atoms 2^i and 2^{i+1} at ratio 4:1,
    # so the tilted mean is exactly (0.8 + 0.4) * 2^i = 1.2 * 2^i
    assert rep.mean == pytest.approx(1.2 * 2**4, rel=1e-12)
    assert rep.ratio == pytest.approx(0.3 * rep.u, rel=1e-10)
    assert rep.ratio_ok  # 0.3 u clears the 0.038 u threshold
    assert rep.ratio >= 1.216


def test_verify_lower_bound_large_indices_stay_finite():
    for i in (6, 8):
        rep = verify_lower_bound(i)
        assert math.isfinite(rep.mean) and math.isfinite(rep.ratio)
        assert rep.ratio_ok


def test_verify_lower_bound_argument_validation():
    with pytest.raises(InvalidArgumentError):
        verify_lower_bound(5)
    with pytest.raises(InvalidArgumentError):
        verify_lower_bound(2)
    with pytest.raises(InvalidArgumentError):
        verify_lower_bound(4, i_max=8)
