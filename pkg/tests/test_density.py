"""Ratio densities: exact anticorrelated branch, quadrature, transforms."""

import math

import numpy as np
import pytest
from scipy.stats import norm

from ratiotails import (CurveMethod, DensityCurve, Family, OrderFlowParams,
                        PowerMap, ResponseSpec, TransformedDensity,
                        positive_ratio_mass, ratio_cdf_anticorr,
                        ratio_density, ratio_density_anticorr,
                        tail_prediction, transform_density)
from ratiotails.response import TailKind
from ratiotails.errors import BranchError, DomainError, RangeError

ANTI = OrderFlowParams(1.0, 1.0, 0.2, 0.2, -1.0)
ANTI_WIDE = OrderFlowParams(1.0, 1.0, 0.5, 0.5, -1.0)


def mc_ratio(params, n, seed):
    """Independent sampler for oracle comparisons."""
    rng = np.random.default_rng(seed)
    z1 = rng.standard_normal(n)
    z2 = rng.standard_normal(n)
    d = params.mu1 + params.sigma1 * z1
    s = params.mu2 + params.sigma2 * (params.rho * z1
                                      + math.sqrt(1 - params.rho ** 2) * z2)
    return d / s


# ---------------------------------------------------------------------------
# parameter validation
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("bad", [
    dict(mu1=0.0), dict(mu1=-1.0), dict(mu2=0.0),
    dict(sigma1=0.0), dict(sigma2=-0.5), dict(rho=1.0), dict(rho=1.5),
])
def test_params_validation(bad):
    kw = dict(mu1=1.0, mu2=1.0, sigma1=0.2, sigma2=0.2, rho=-0.5)
    kw.update(bad)
    with pytest.raises(DomainError):
        OrderFlowParams(**kw)


def test_anticorrelation_accepted():
    assert OrderFlowParams(1, 1, 1, 1, -1.0).is_anticorrelated


def test_unchecked_constructor_bypasses_validation():
    p = OrderFlowParams._unchecked(0.0, 0.0, 1.0, 1.0, 0.0)
    assert p.mu1 == 0.0


# ---------------------------------------------------------------------------
# exact anticorrelated density
# ---------------------------------------------------------------------------

def test_anticorr_unit_params_at_one():
    # amplitude 2/sqrt(2 pi), exponent 0, denominator (1+1)^2
    p = OrderFlowParams(1, 1, 1, 1, -1.0)
    expected = 2.0 / (math.sqrt(2 * math.pi) * 4.0)
    assert ratio_density_anticorr(p, 1.0) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(0.1994711402, abs=1e-9)


def test_anticorr_zero_at_pole():
    p = OrderFlowParams(1, 1, 1, 1, -1.0)
    assert ratio_density_anticorr(p, -1.0) == 0.0
    # narrow spreads: pole at -sigma1/sigma2 = -1 as well
    assert ratio_density_anticorr(ANTI, -1.0) == 0.0


def test_anticorr_tight_params_at_one():
    # (0.1+0.1)/sqrt(2 pi)/0.2^2 = 5/sqrt(2 pi)
    p = OrderFlowParams(1, 1, 0.1, 0.1, -1.0)
    expected = 5.0 / math.sqrt(2 * math.pi)
    assert ratio_density_anticorr(p, 1.0) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(1.9947114020, abs=1e-9)


def test_anticorr_rejects_other_rho():
    with pytest.raises(BranchError):
        ratio_density_anticorr(OrderFlowParams(1, 1, 1, 1, -0.5), 1.0)


def test_anticorr_cdf_matches_density():
    xs = np.linspace(-0.5, 4.0, 23)
    h = 1e-6
    f = ratio_density_anticorr(ANTI, xs)
    fd = (ratio_cdf_anticorr(ANTI, xs + h)
          - ratio_cdf_anticorr(ANTI, xs - h)) / (2 * h)
    # differencing the CDF loses all precision where the density is tiny
    m = f > 1e-4
    assert m.sum() >= 15
    assert np.allclose(fd[m], f[m], rtol=1e-6)


def test_anticorr_cdf_limits_and_pole_mass():
    assert ratio_cdf_anticorr(ANTI, -1e9) == pytest.approx(0.0, abs=1e-12)
    assert ratio_cdf_anticorr(ANTI, 1e9) == pytest.approx(1.0, abs=1e-12)
    # all supply-negative mass sits below the pole
    below_pole = ratio_cdf_anticorr(ANTI, -1.0)
    assert below_pole == pytest.approx(1.0 - norm.cdf(5.0), rel=1e-9)


def test_anticorr_histogram_matches_density():
    # lighter version of the exact-reproduction gate (full size in acceptance)
    n = 10 ** 6
    r = mc_ratio(ANTI, n, seed=101)
    edges = np.linspace(-1.0, 5.0, 301)
    counts, _ = np.histogram(r, bins=edges)
    emp = counts / n
    model = np.diff(ratio_cdf_anticorr(ANTI, edges))
    out_emp = 1.0 - emp.sum()
    out_model = 1.0 - model.sum()
    l1 = np.abs(emp - model).sum() + abs(out_emp - out_model)
    assert l1 <= 0.03


# ---------------------------------------------------------------------------
# quadrature branch
# ---------------------------------------------------------------------------

def test_cauchy_special_case():
    # ratio of independent standard normals is standard Cauchy
    p = OrderFlowParams._unchecked(0.0, 0.0, 1.0, 1.0, 0.0)
    assert ratio_density(p, 0.0) == pytest.approx(1.0 / math.pi, rel=1e-10)
    assert ratio_density(p, 1.0) == pytest.approx(1.0 / (2.0 * math.pi), rel=1e-10)


def test_quadrature_rejects_anticorr():
    with pytest.raises(BranchError):
        ratio_density(ANTI, 1.0)


def test_quadrature_matches_monte_carlo_at_peak():
    params = OrderFlowParams(1.0, 1.0, 0.2, 0.2, -0.5)
    n = 2 * 10 ** 6
    r = mc_ratio(params, n, seed=7)
    h = 0.005
    est = np.mean(np.abs(r - 1.0) < h) / (2 * h)
    se = math.sqrt(est / (2 * h) / n)
    v = ratio_density(params, 1.0)
    assert abs(v - est) <= 4.0 * se + 1e-4  # small allowance for bin curvature


def test_quadrature_matches_anticorr_limit():
    # rho -> -1 approaches the closed form
    near = OrderFlowParams(1.0, 1.0, 0.2, 0.2, -0.9999999)
    for x in (0.5, 1.0, 2.0):
        assert ratio_density(near, x) == pytest.approx(
            ratio_density_anticorr(ANTI, x), rel=1e-3)


def test_inverse_square_plateau():
    # x^2 f(x) settles to a positive constant (checked pairwise within 10%)
    params = OrderFlowParams(1.0, 1.0, 0.5, 0.5, 0.0)
    vals = [x * x * ratio_density(params, x) for x in (1e2, 1e3, 1e4)]
    assert all(v > 0 for v in vals)
    for a, b in zip(vals, vals[1:]):
        assert abs(a - b) / b <= 0.10


def test_normalization_window():
    # integrated mass over [-L, L], L = mean ratio + 50 spreads
    params = OrderFlowParams(1.0, 1.0, 0.2, 0.2, -0.5)
    spread = (params.sigma1 / params.mu2
              + params.sigma2 * params.mu1 / params.mu2 ** 2)
    L = params.mu1 / params.mu2 + 50.0 * spread
    from scipy.integrate import quad
    mass, _ = quad(lambda x: ratio_density(params, x), -L, L, limit=400)
    assert 0.999 <= mass <= 1.0 + 1e-6


def test_positive_ratio_mass_anticorr_closed_form():
    assert positive_ratio_mass(ANTI) == pytest.approx(
        norm.cdf(5.0) - norm.cdf(-5.0), rel=1e-12)


def test_positive_ratio_mass_general():
    params = OrderFlowParams(1.0, 1.0, 0.5, 0.5, 0.0)
    r = mc_ratio(params, 10 ** 6, seed=31)
    assert positive_ratio_mass(params) == pytest.approx(
        np.mean(r > 0), abs=4e-3)


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

def test_log_transform_identity():
    # density of log R is exp(x) f(exp(x)) over the positive-ratio mass
    base = lambda t: ratio_density_anticorr(ANTI_WIDE, t)
    pos = positive_ratio_mass(ANTI_WIDE)
    spec = ResponseSpec(Family.LOG)
    for x in (-1.0, 0.0, 0.7, 2.0, 4.0):
        expected = math.exp(x) * base(math.exp(x)) / pos
        got = transform_density(base, spec, x, positive_mass=pos)
        assert got == pytest.approx(expected, rel=1e-9)


def test_power_map_closed_form():
    base = lambda t: ratio_density_anticorr(ANTI_WIDE, t)
    pos = positive_ratio_mass(ANTI_WIDE)
    q = 2.0
    for x in (0.25, 1.0, 3.0, 50.0):
        expected = base(x ** (1 / q)) * (1 / q) * x ** (1 / q - 1) / pos
        got = transform_density(base, PowerMap(q), x, positive_mass=pos)
        assert got == pytest.approx(expected, rel=1e-12)


def test_power_map_rejects_nonpositive_argument():
    base = lambda t: ratio_density_anticorr(ANTI_WIDE, t)
    with pytest.raises(RangeError):
        transform_density(base, PowerMap(2.0), -1.0, positive_mass=0.95)


def test_sym_transform_symmetric_at_zero():
    density = TransformedDensity(ANTI_WIDE, ResponseSpec(Family.SYM))
    assert density(0.0) > 0
    for x in (0.3, 1.1, 2.7):
        assert density(x) == pytest.approx(density(-x), rel=1e-8)


def test_transform_outside_tabulated_range():
    from ratiotails import TabulatedResponse
    xs = np.geomspace(0.25, 4.0, 60)
    tab = TabulatedResponse(xs, np.log(xs))
    base = lambda t: ratio_density_anticorr(ANTI_WIDE, t)
    with pytest.raises(RangeError):
        transform_density(base, tab, 10.0, positive_mass=0.95)


def _model_transform_cdf(params, spec, y):
    """Independent CDF oracle: P(g(R) <= y | R > 0) via the exact ratio CDF."""
    r = spec.inverse(y)
    lo = ratio_cdf_anticorr(params, 0.0)
    return (ratio_cdf_anticorr(params, r) - lo) / (1.0 - lo)


@pytest.mark.parametrize("spec", [
    ResponseSpec(Family.SYM),
    ResponseSpec(Family.POWER, 2.0),
    ResponseSpec(Family.ODD_POWER, 3),
    ResponseSpec(Family.LOG),
    ResponseSpec(Family.LOG_POWER, 3),
], ids=lambda s: s.label())
def test_transform_density_consistent_with_cdf_oracle(spec):
    # d/dy of the CDF oracle must reproduce transform_density
    density = TransformedDensity(ANTI_WIDE, spec)
    for y in (-2.0, -0.4, 0.3, 1.8):
        h = 1e-5 * max(abs(y), 1.0)
        fd = (_model_transform_cdf(ANTI_WIDE, spec, y + h)
              - _model_transform_cdf(ANTI_WIDE, spec, y - h)) / (2 * h)
        assert density(y) == pytest.approx(fd, rel=1e-5)


@pytest.mark.parametrize("spec", [
    ResponseSpec(Family.SYM),
    ResponseSpec(Family.POWER, 2.0),
    ResponseSpec(Family.ODD_POWER, 3),
    ResponseSpec(Family.LOG),
    ResponseSpec(Family.LOG_POWER, 3),
], ids=lambda s: s.label())
def test_transform_law_matches_monte_carlo(spec):
    # empirical law of g(R) conditioned on R > 0 vs the model CDF, L1 <= 0.02
    n = 10 ** 6
    r = mc_ratio(ANTI_WIDE, n, seed=53)
    r = r[r > 0]
    g = np.asarray(spec.value(r))
    lo, hi = np.quantile(g, [0.005, 0.995])
    edges = np.linspace(lo, hi, 101)
    counts, _ = np.histogram(g, bins=edges)
    emp = counts / len(g)
    model = np.diff([_model_transform_cdf(ANTI_WIDE, spec, e) for e in edges])
    out_emp = 1.0 - emp.sum()
    out_model = 1.0 - model.sum()
    l1 = np.abs(emp - model).sum() + abs(out_emp - out_model)
    assert l1 <= 0.02


# ---------------------------------------------------------------------------
# curve-level tail diagnostics
# ---------------------------------------------------------------------------

def test_power_tail_slope_in_asymptotic_window():
    # exact branch at the canonical tight spreads, deep window
    fn = lambda x: ratio_density_anticorr(ANTI, x)
    grid = np.geomspace(1e4, 1e6, 41)
    curve = DensityCurve.from_function(fn, grid, CurveMethod.EXACT_ANTICORR)
    slope = curve.loglog_tail_slope(1e4, 1e6)
    assert slope == pytest.approx(-2.0, abs=0.05)


def test_power_tail_slope_wide_spreads():
    # with wider spreads the inverse-square window starts by x ~ 1e2
    fn = lambda x: ratio_density_anticorr(ANTI_WIDE, x)
    grid = np.geomspace(1e2, 1e4, 41)
    curve = DensityCurve.from_function(fn, grid, CurveMethod.EXACT_ANTICORR)
    slope = curve.loglog_tail_slope(1e2, 1e4)
    assert slope == pytest.approx(-2.0, abs=0.05)


def test_log_transform_tail_slope():
    density = TransformedDensity(ANTI_WIDE, ResponseSpec(Family.LOG))
    grid = np.linspace(5.0, 12.0, 29)
    curve = DensityCurve.from_function(density, grid, CurveMethod.QUADRATURE)
    slope = curve.semilog_tail_slope(5.0, 12.0)
    assert slope == pytest.approx(-1.0, abs=0.05)


# ---------------------------------------------------------------------------
# tail predictions with prefactor
# ---------------------------------------------------------------------------

def test_tail_prediction_sym():
    pred = tail_prediction(ANTI_WIDE, ResponseSpec(Family.SYM))
    assert pred.tail.kind is TailKind.POWER_LAW
    assert pred.tail.density_exponent == pytest.approx(2.0)
    assert pred.prefactor > 0
    assert pred.prefactor_drift < 0.05


def test_tail_prediction_power_q2():
    pred = tail_prediction(ANTI_WIDE, ResponseSpec(Family.POWER, 2.0))
    assert pred.tail.density_exponent == pytest.approx(1.5)
    assert pred.prefactor > 0
    assert pred.prefactor_drift < 0.05


def test_tail_prediction_logpower():
    pred = tail_prediction(ANTI_WIDE, ResponseSpec(Family.LOG_POWER, 3))
    assert pred.tail.kind is TailKind.STRETCHED_EXPONENTIAL
    assert pred.tail.shape == pytest.approx(1.0 / 3.0)


# ---------------------------------------------------------------------------
# DensityCurve container
# ---------------------------------------------------------------------------

def test_curve_mass_and_validation():
    grid = np.linspace(-6, 6, 1001)
    vals = np.exp(-0.5 * grid ** 2) / math.sqrt(2 * math.pi)
    curve = DensityCurve(grid, vals, CurveMethod.QUADRATURE)
    assert curve.mass == pytest.approx(1.0, abs=1e-6)
    assert curve.check_mass()
    with pytest.raises(DomainError):
        DensityCurve(grid[::-1], vals, CurveMethod.QUADRATURE)
    with pytest.raises(DomainError):
        DensityCurve(grid, -vals, CurveMethod.QUADRATURE)


def test_curve_from_samples():
    rng = np.random.default_rng(5)
    curve = DensityCurve.from_samples(rng.standard_normal(200000), bins=100,
                                      range_=(-5, 5))
    assert curve.method is CurveMethod.EMPIRICAL
    assert curve.mass == pytest.approx(1.0, abs=0.01)
