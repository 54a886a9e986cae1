import math

import numpy as np
import pytest

from fracou.errors import DomainError, SingularityError, UsageError
from fracou.schemas import ModelParams, QuadratureConfig
from fracou.services import analytics, fbm
from fracou.services.transforms import TimeChange

UD_QUAD = QuadratureConfig(rel_tol=1e-7, abs_tol=1e-9)


def test_ou_cov_closed_form():
    assert analytics.ou_cov(1.0, 0.0, 0.0) == pytest.approx(0.5)
    assert analytics.ou_cov(2.0, 1.0, 3.0) == pytest.approx(math.exp(-4.0) / 4.0)
    with pytest.raises(DomainError):
        analytics.ou_cov(0.0, 0.0, 1.0)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_xd_cov_reduces_to_ou_for_brownian_motion(alpha):
    p = ModelParams(hurst=0.5, alpha=alpha)
    taus = np.linspace(0.0, 10.0, 21)
    assert analytics.xd_cov(p, 0.0, taus) == pytest.approx(analytics.ou_cov(alpha, 0.0, taus), rel=1e-12)


@pytest.mark.parametrize("hurst", [0.25, 0.75])
def test_xd_cov_matches_time_changed_fbm(hurst):
    p = ModelParams(hurst=hurst, alpha=1.5)
    change = TimeChange(p)
    s, t = 0.4, 1.7
    direct = math.exp(-p.alpha * (s + t)) * fbm.fbm_cov(p, change(s), change(t))
    assert analytics.xd_cov(p, s, t) == pytest.approx(direct, rel=1e-10)
    assert analytics.xd_cov(p, 3.0, 3.0) == pytest.approx((hurst / p.alpha) ** (2 * hurst), rel=1e-12)


def test_xd_cov_is_finite_at_large_lags():
    p = ModelParams(hurst=0.75)
    values = analytics.xd_cov(p, 0.0, np.array([100.0, 800.0, 5000.0]))
    assert np.all(np.isfinite(values))
    assert np.all(values >= 0.0)
    assert values[0] > values[1] >= values[2]


def test_decay_rates():
    assert analytics.xd_decay_rate(ModelParams(hurst=0.75, alpha=1.0)) == pytest.approx(1.0 / 3.0)
    assert analytics.xd_decay_rate(ModelParams(hurst=0.25, alpha=1.0)) == pytest.approx(1.0)
    assert analytics.ud_decay_rate(ModelParams(hurst=0.75, gamma=2.0)) == pytest.approx(1.0 / 3.0)
    assert analytics.rho_y_decay_rate(ModelParams(hurst=0.75, alpha=2.0)) == pytest.approx(2.0 / 3.0)


@pytest.mark.parametrize("alpha", [1.0, 2.0])
def test_fou1_variance_at_brownian_motion(alpha):
    p = ModelParams(hurst=0.5, alpha=alpha)
    assert analytics.fou1_stationary_variance(p).value == pytest.approx(1.0 / (2.0 * alpha), rel=1e-8)


@pytest.mark.parametrize("alpha", [1.0, 2.0])
@pytest.mark.parametrize("hurst", [0.3, 0.75, 0.9])
def test_fou1_variance_closed_form(alpha, hurst):
    p = ModelParams(hurst=hurst, alpha=alpha)
    expected = math.gamma(2.0 * hurst + 1.0) / (2.0 * alpha ** (2.0 * hurst))
    assert analytics.fou1_stationary_variance(p).value == pytest.approx(expected, rel=1e-8)


def test_fou1_cov_at_brownian_motion_is_ou():
    p = ModelParams(hurst=0.5, alpha=1.0)
    for tau in (0.5, 1.0, 3.0):
        assert analytics.fou1_stationary_cov(p, tau, UD_QUAD).value == pytest.approx(analytics.ou_cov(1.0, 0.0, tau), rel=1e-6)


def test_fou1_cov_approaches_its_expansion():
    p = ModelParams(hurst=0.75, alpha=1.0)
    exact = analytics.fou1_stationary_cov(p, 20.0, UD_QUAD).value
    assert analytics.fou1_cov_asymptotic(p, 20.0, 2) == pytest.approx(exact, rel=1e-3)
    leading = p.hurst * (2 * p.hurst - 1) * 20.0 ** (2 * p.hurst - 2)
    assert analytics.fou1_cov_asymptotic(p, 20.0, 1) == pytest.approx(leading, rel=1e-12)


def test_fou1_expansion_domain():
    with pytest.raises(DomainError):
        analytics.fou1_cov_asymptotic(ModelParams(hurst=0.5), 5.0, 2)
    with pytest.raises(DomainError):
        analytics.fou1_cov_asymptotic(ModelParams(hurst=0.75), 0.0, 2)


def test_kernel_constant_and_singularity():
    p = ModelParams(hurst=0.75, alpha=1.0)
    assert analytics.c_const(p) == pytest.approx(0.375 * (4.0 / 3.0) ** 0.5)
    spec = analytics.kernel_spec(p)
    with pytest.raises(SingularityError):
        analytics.kernel_eval(spec, 0.0)
    x = 1e-8
    assert analytics.kernel_eval(spec, x) / (0.375 * x ** (-0.5)) == pytest.approx(1.0, rel=1e-6)
    assert analytics.kernel_eval(spec, -2.0) == analytics.kernel_eval(spec, 2.0)


@pytest.mark.parametrize("hurst", [0.25, 0.5, 1.0])
def test_kernel_needs_long_memory(hurst):
    if hurst >= 1.0:
        with pytest.raises(ValueError):
            ModelParams(hurst=hurst)
        return
    with pytest.raises(DomainError, match="1/2 < H < 1"):
        analytics.kernel_spec(ModelParams(hurst=hurst))


@pytest.mark.parametrize("alpha", [1.0, 2.0])
@pytest.mark.parametrize("hurst", [0.6, 0.75, 0.9])
def test_kappa_matches_kernel_mass(alpha, hurst, quad):
    p = ModelParams(hurst=hurst, alpha=alpha)
    kappa = analytics.kappa_sigma(p)
    assert kappa.sigma**2 == kappa.kappa
    assert analytics.kappa_by_quadrature(p, quad).value == pytest.approx(kappa.kappa, rel=1e-6)


def test_y_var_agrees_with_increment_cov(quad):
    p = ModelParams(hurst=0.75)
    variance = analytics.y_var(p, 1.0, quad).value
    assert analytics.y_increment_cov(p, 0.0, 1.0, 0.0, 1.0, quad).value == pytest.approx(variance, rel=1e-6)


def test_y_var_grows_linearly_with_constant_offset(quad):
    p = ModelParams(hurst=0.75)
    kappa = analytics.kappa_sigma(p).kappa
    offsets = [kappa * t - analytics.y_var(p, t, quad).value for t in (50.0, 100.0, 200.0)]
    assert offsets[0] > 0
    assert offsets[1] == pytest.approx(offsets[0], rel=1e-4)
    assert offsets[2] == pytest.approx(offsets[0], rel=1e-4)
    # at t = 50 the ratio still sits about 5% low
    assert analytics.y_var(p, 50.0, quad).value / 50.0 < 0.97 * kappa
    assert analytics.y_var(p, 400.0, quad).value / 400.0 == pytest.approx(kappa, rel=0.02)


def test_y_cov_symmetry_and_origin(quad):
    p = ModelParams(hurst=0.75)
    assert analytics.y_cov(p, 1.0, 2.5, quad).value == analytics.y_cov(p, 2.5, 1.0, quad).value
    assert analytics.y_cov(p, 0.0, 2.0, quad).value == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DomainError):
        analytics.y_cov(p, -1.0, 1.0, quad)


def test_y_cov_matches_increment_decomposition(quad):
    p = ModelParams(hurst=0.8, alpha=1.5)
    s, t = 1.0, 2.5
    cross = analytics.y_increment_cov(p, 0.0, t, 0.0, s, quad).value
    assert analytics.y_cov(p, s, t, quad).value == pytest.approx(cross, rel=1e-6)


def test_y_cov_converges_to_its_limit(quad):
    p = ModelParams(hurst=0.75)
    limit = analytics.y_limit_cov(p, 1.0, quad).value
    assert analytics.y_cov(p, 1.0, 80.0, quad).value == pytest.approx(limit, rel=1e-6)


def test_rho_y_decays_at_kernel_rate(quad):
    p = ModelParams(hurst=0.75)
    assert analytics.rho_y(p, 0, quad).value == pytest.approx(analytics.y_var(p, 1.0, quad).value, rel=1e-6)
    n = 20
    scaled = math.exp(analytics.rho_y_decay_rate(p) * n) * analytics.rho_y(p, n, quad).value
    assert scaled == pytest.approx(analytics.rho_y_limit_constant(p), rel=1e-4)
    with pytest.raises(UsageError):
        analytics.rho_y(p, -1, quad)


def test_scaled_y_cov_rejects_nonpositive_scale(quad):
    with pytest.raises(DomainError):
        analytics.scaled_y_cov(ModelParams(), 0.0, 1.0, 2.0, quad)


@pytest.mark.parametrize("tau", [0.0, 0.5, 2.0])
def test_ud_cov_matches_single_integral(tau):
    p = ModelParams(hurst=0.75, gamma=1.0)
    double = analytics.ud_cov(p, 1.0, 1.0 + tau, quad=UD_QUAD).value
    single = analytics.ud_var_single_integral(p, tau, UD_QUAD).value
    assert double == pytest.approx(single, rel=1e-5)


@pytest.mark.parametrize("gamma", [1.0, 2.0])
@pytest.mark.parametrize("hurst", [0.6, 0.75, 0.9])
def test_ud_cov_reaches_default_tolerance(hurst, gamma, quad):
    p = ModelParams(hurst=hurst, gamma=gamma)
    values = [analytics.ud_cov(p, 0.0, tau, quad=quad).value for tau in (0.0, 1.0, 5.0, 10.0, 15.0)]
    assert all(b < a for a, b in zip(values, values[1:]))
    assert values[-1] > 0.0

def test_ud_cov_is_stationary():
    p = ModelParams(hurst=0.7, gamma=2.0)
    first = analytics.ud_cov(p, 0.0, 1.0, quad=UD_QUAD).value
    later = analytics.ud_cov(p, 3.0, 4.0, quad=UD_QUAD).value
    assert later == pytest.approx(first, rel=1e-5)


@pytest.mark.parametrize("gamma", [1.0, 2.0])
@pytest.mark.parametrize("hurst", [0.6, 0.75])
def test_ud_integrability_constant(hurst, gamma, quad):
    p = ModelParams(hurst=hurst, gamma=gamma)
    closed = analytics.ud_integrability_constant(p)
    assert analytics.ud_integrability_by_quadrature(p, quad).value == pytest.approx(closed, rel=1e-5)
    if gamma == 1.0:
        assert closed == pytest.approx(1.0 / (hurst * (2 * hurst - 1)), rel=1e-12)


def test_tabulate_rows():
    p = ModelParams(hurst=0.75)
    rows = analytics.tabulate("xd", p, [0.0, 1.0, 2.0])
    assert [row.x for row in rows] == [0.0, 1.0, 2.0]
    assert rows[1].value == analytics.xd_cov(p, 0.0, 1.0)
    assert all(row.error_estimate == 0.0 for row in rows)
    assert analytics.tabulate("fgn", p, [3.0])[0].value == fbm.fgn_autocov(p, 3)
    with pytest.raises(UsageError):
        analytics.tabulate("nope", p, [1.0])
