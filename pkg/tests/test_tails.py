"""Tail estimators against inverse-transform oracles."""

import math

import numpy as np
import pytest

from ratiotails import (TailKind, classify_tail, hill, rank_regression,
                        threshold_sweep)
from ratiotails.errors import (DegenerateTailError, DomainError,
                               InsufficientTailError, NonpositiveSampleError)


def pareto(alpha, n, seed):
    """Survival x**-alpha on x >= 1 by inverse transform."""
    u = np.random.default_rng(seed).random(n)
    return u ** (-1.0 / alpha)


def exponential(n, seed):
    u = np.random.default_rng(seed).random(n)
    return -np.log(u)


def ratio_positive(n, seed, nu):
    rng = np.random.default_rng(seed)
    out = np.empty(n)
    filled = 0
    while filled < n:
        z = rng.standard_normal(n - filled)
        r = (1 + nu * z) / (1 - nu * z)
        take = r[r > 0]
        out[filled:filled + len(take)] = take
        filled += len(take)
    return out


# ---------------------------------------------------------------------------
# survival-index estimator
# ---------------------------------------------------------------------------

def test_hill_on_unit_pareto():
    x = pareto(1.0, 10 ** 6, seed=1)
    est = hill(x, 10 ** 4)
    assert est.alpha == pytest.approx(1.0, abs=0.03)
    assert est.stderr == pytest.approx(est.alpha / 100.0, rel=1e-12)
    assert est.density_exponent == pytest.approx(2.0, abs=0.03)


def test_hill_on_half_pareto():
    x = pareto(0.5, 10 ** 6, seed=2)
    est = hill(x, 10 ** 4)
    assert est.alpha == pytest.approx(0.5, abs=0.015)


@pytest.mark.parametrize("k", [100, 1000, 10000])
def test_hill_consistency_across_depths(k):
    x = pareto(1.5, 10 ** 6, seed=3)
    est = hill(x, k)
    assert abs(est.alpha - 1.5) <= 5.0 * est.stderr


def test_hill_scale_invariance():
    x = pareto(1.0, 10 ** 5, seed=4)
    a = hill(x, 2000).alpha
    b = hill(1e7 * x, 2000).alpha
    c = hill(1e-4 * x, 2000).alpha
    assert abs(a - b) <= 1e-10 * a
    assert abs(a - c) <= 1e-10 * a


def test_hill_validation():
    x = pareto(1.0, 1000, seed=5)
    with pytest.raises(InsufficientTailError):
        hill(x, 5)
    with pytest.raises(InsufficientTailError):
        hill(x, 1000)
    with pytest.raises(NonpositiveSampleError):
        hill(np.concatenate([x, [-1.0]]), 50)


def test_hill_ratio_samples_match_inverse_square_law():
    # wide spreads put the top 0.1% deep inside the asymptotic zone
    r = np.abs(ratio_positive(10 ** 6, seed=6, nu=0.5))
    est = hill(r, 1000)
    assert est.alpha == pytest.approx(1.0, abs=0.1)


# ---------------------------------------------------------------------------
# rank regression
# ---------------------------------------------------------------------------

def test_rank_regression_pareto_slope():
    x = pareto(1.0, 10 ** 6, seed=7)
    reg = rank_regression(x, 0.001)
    assert reg.slope == pytest.approx(-1.0, abs=0.05)
    assert reg.stderr > 0
    assert reg.k_used == 1000


def test_rank_regression_semilog_exponential():
    x = exponential(10 ** 6, seed=8)
    reg = rank_regression(x, 0.001, log_x=False)
    assert reg.slope == pytest.approx(-1.0, abs=0.05)


def test_rank_regression_model_log_returns():
    r = ratio_positive(10 ** 6, seed=9, nu=0.38)
    reg = rank_regression(np.abs(np.log(r)), 0.001, log_x=False)
    assert reg.slope == pytest.approx(-1.0, abs=0.1)


def test_rank_regression_needs_enough_points():
    with pytest.raises(InsufficientTailError):
        rank_regression(pareto(1.0, 1000, seed=10), 0.01)
    with pytest.raises(DomainError):
        rank_regression(pareto(1.0, 1000, seed=10), 1.5)


# ---------------------------------------------------------------------------
# classifier
# ---------------------------------------------------------------------------

def test_classifier_labels_pareto_power():
    rep = classify_tail(pareto(1.0, 10 ** 6, seed=11))
    assert rep.tail.kind is TailKind.POWER_LAW
    assert rep.estimate == pytest.approx(2.0, abs=0.1)  # density exponent
    assert rep.k_used >= 10
    assert rep.loglik[TailKind.POWER_LAW] > rep.loglik[TailKind.EXPONENTIAL]


def test_classifier_labels_exponential():
    rep = classify_tail(exponential(10 ** 6, seed=12))
    assert rep.tail.kind is TailKind.EXPONENTIAL
    assert rep.estimate == pytest.approx(1.0, abs=0.1)  # decay rate


def test_classifier_stretched_candidate():
    u = np.random.default_rng(13).random(10 ** 6)
    x = (-np.log(u)) ** 2.0  # survival exp(-sqrt(x))
    rep = classify_tail(x, [TailKind.POWER_LAW, TailKind.EXPONENTIAL,
                            TailKind.STRETCHED_EXPONENTIAL])
    assert rep.tail.kind is TailKind.STRETCHED_EXPONENTIAL
    assert rep.estimate == pytest.approx(0.5, abs=0.08)


def test_classifier_separation_100_trials():
    wins = 0
    for t in range(100):
        xp = pareto(1.0, 10 ** 6, seed=1000 + t)
        xe = exponential(10 ** 6, seed=2000 + t)
        ok_p = classify_tail(xp).tail.kind is TailKind.POWER_LAW
        ok_e = classify_tail(xe).tail.kind is TailKind.EXPONENTIAL
        wins += ok_p and ok_e
    assert wins >= 99


def test_density_exponent_monotone_in_shape_parameter():
    # sharper response families push the estimated exponent toward 1
    exps = []
    for q in (1, 2, 5):
        r = ratio_positive(10 ** 6, seed=500 + q, nu=0.35)
        g = np.abs(r ** q - r ** (-q))
        rep = classify_tail(g, threshold_quantile=0.999)
        assert rep.tail.kind is TailKind.POWER_LAW
        exps.append(rep.estimate)
    assert exps[0] > exps[1] > exps[2] > 1.0


def test_classifier_sides():
    x = np.concatenate([pareto(1.0, 10 ** 5, seed=14),
                        -exponential(10 ** 5, seed=15)])
    right = classify_tail(x, side="right")
    left = classify_tail(x, side="left")
    assert right.tail.kind is TailKind.POWER_LAW
    assert left.tail.kind is TailKind.EXPONENTIAL


def test_classifier_validation():
    x = pareto(1.0, 10 ** 5, seed=16)
    with pytest.raises(DomainError):
        classify_tail(x, [TailKind.POWER_LAW])
    # every exceedance identical: no tail shape to estimate
    rng = np.random.default_rng(16)
    flat_top = np.concatenate([rng.random(99000), np.full(1000, 5.0)])
    with pytest.raises(DegenerateTailError):
        classify_tail(flat_top)
    with pytest.raises(InsufficientTailError):
        classify_tail(x[:500])


def test_threshold_sweep_reports_three_quantiles():
    x = pareto(1.0, 10 ** 6, seed=17)
    sweep = threshold_sweep(x)
    assert len(sweep) == 3
    ks = [rep.k_used for rep in sweep]
    assert ks[0] > ks[1] > ks[2]
    for rep in sweep:
        assert rep.tail.kind is TailKind.POWER_LAW
        assert rep.estimate == pytest.approx(2.0, abs=0.15)


def test_report_key_values():
    rep = classify_tail(pareto(1.0, 10 ** 5, seed=18))
    kv = rep.key_values()
    assert kv["class"] == "power_law"
    assert kv["n_total"] == 10 ** 5
    assert "loglik.power_law" in kv
