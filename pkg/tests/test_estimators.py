from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import trial_from_cells
from ivchoice.core import OutcomeMeans, OutcomeRange, TypeShares, ate_decompose
from ivchoice.errors import (
    EmptyArm,
    EmptyCell,
    MonotonicityViolation,
    RankDeficient,
    WeakInstrument,
)
from ivchoice.estimators import (
    IdentifiedParams,
    estimates_record,
    identified_means_hat,
    manski_ate_bounds,
    ols,
    ols_fit,
    pure_cell_means,
    tsls,
    tsls_fit,
    type_shares_hat,
    wald_late,
)
from ivchoice.sim import (
    ObservationalSample,
    ProductionConfig,
    TrialConfig,
    TrialSample,
    ols_plim_oracle,
    population_moments,
    simulate_production,
    simulate_trial,
)

ENDOG = ProductionConfig(beta1=0.5, beta2=1.0, delta_w=0.5, sigma_eps=1.0, sigma_u=1.0)
HAND = IdentifiedParams(
    TypeShares(0.2, 0.3, 0.5),
    OutcomeMeans(mu_a1=0.6, mu_n0=0.4, mu_c1=0.7, mu_c0=0.5),
    late=0.7 - 0.5,
)


def test_ols_interpolates_exact_line():
    x = np.arange(10.0)
    fit = ols(1 + 2 * x, np.column_stack([np.ones(10), x]))
    np.testing.assert_allclose(fit.coefficients, [1.0, 2.0], atol=1e-12)


def test_ols_collinear_regressors():
    x = np.arange(20.0)
    with pytest.raises(RankDeficient):
        ols(x, np.column_stack([np.ones(20), x, 3 * x - 1]))


def test_ols_too_few_rows():
    with pytest.raises(RankDeficient):
        ols([1.0, 2.0], np.ones((2, 2)))


def test_ols_endogenous_converges_to_plim_not_beta1():
    cfg = replace(ENDOG, beta2=0.0, delta_w=0.0, n=2 * 10 ** 5)
    fit = ols_fit(simulate_production(cfg, 1))
    assert abs(fit.slope - ols_plim_oracle(cfg)) < 3 * fit.slope_se
    assert abs(fit.slope - cfg.beta1) > 50 * fit.slope_se


def test_tsls_with_covariates_consistent():
    cfg = replace(ENDOG, n=10 ** 5)
    fit = tsls_fit(simulate_production(cfg, 2))
    assert abs(fit.coef("x_obs") - 0.5) < 3 * fit.stderr("x_obs")
    assert abs(fit.coef("v") - cfg.beta2) < 3 * fit.stderr("v")
    assert fit.n_used == cfg.n


def test_tsls_constant_instrument_is_weak():
    s = simulate_production(replace(ENDOG, n=1000), 3)
    flat = ObservationalSample(s.y_obs, s.x_obs, s.v, np.full(len(s), 0.3))
    with pytest.raises(WeakInstrument):
        tsls_fit(flat)


def test_tsls_irrelevant_instrument_is_weak():
    s = simulate_production(replace(ENDOG, n=1000), 3)
    noise = np.random.default_rng(0).normal(size=len(s))
    with pytest.raises(WeakInstrument):
        tsls(s.y_obs, s.x_obs, noise, s.v, min_first_stage_t=5.0)


def test_tsls_and_ols_agree_without_endogeneity():
    # with eps = 0 both fits are exact, so the SEs collapse to rounding level
    cfg = replace(ENDOG, sigma_eps=0.0, n=10 ** 5)
    s = simulate_production(cfg, 4)
    a, b = ols_fit(s, ("v",)), tsls_fit(s)
    assert abs(a.slope - b.slope) < 3 * b.slope_se + 1e-12
    assert a.slope == pytest.approx(cfg.beta1, abs=1e-12)


# ---------------------------------------------------------------------------

def test_wald_perfect_compliance():
    t = trial_from_cells({(1, 1): (10, 6), (0, 0): (10, 5)})
    assert wald_late(t) == pytest.approx(0.1, abs=1e-12)


def test_wald_hand_ratio():
    t = trial_from_cells({(1, 1): (7, 4), (1, 0): (3, 2), (0, 1): (2, 1), (0, 0): (8, 4)})
    assert wald_late(t) == pytest.approx(0.2, abs=1e-12)


def test_wald_simulated_within_3se():
    t = simulate_trial(TrialConfig(n=10 ** 5), 5)
    se = tsls(t.y, t.d, t.z).slope_se
    assert abs(wald_late(t) - 0.2) < 3 * se


def test_wald_equals_tsls_on_binary_data():
    t = simulate_trial(TrialConfig(n=5000), 6)
    assert abs(wald_late(t) - tsls(t.y, t.d, t.z).slope) < 1e-8


def test_wald_weak_and_empty():
    always = trial_from_cells({(1, 1): (10, 6), (0, 1): (10, 5)})
    with pytest.raises(WeakInstrument):
        wald_late(always)
    one_arm = trial_from_cells({(1, 1): (10, 6), (1, 0): (5, 1)})
    with pytest.raises(EmptyArm):
        wald_late(one_arm)
    with pytest.raises(EmptyArm):
        type_shares_hat(one_arm)


def test_type_shares_degenerate_designs():
    assert type_shares_hat(trial_from_cells({(1, 1): (4, 2), (0, 0): (5, 1)})) == TypeShares(0, 0, 1)
    assert type_shares_hat(trial_from_cells({(1, 1): (4, 2), (0, 1): (5, 1)})) == TypeShares(1, 0, 0)


def test_type_shares_simulated_within_3se():
    n = 10 ** 5
    t = simulate_trial(TrialConfig(n=n), 7)
    s = type_shares_hat(t)
    n0, n1 = (t.z == 0).sum(), (t.z == 1).sum()
    se_a = np.sqrt(0.2 * 0.8 / n0)
    se_n = np.sqrt(0.3 * 0.7 / n1)
    assert abs(s.pi_a - 0.2) < 3 * se_a
    assert abs(s.pi_n - 0.3) < 3 * se_n
    assert abs(s.pi_c - 0.5) < 3 * (se_a + se_n)


def test_type_shares_clamp_and_violation():
    # P(d=1|z=0) = 0.505, P(d=0|z=1) = 0.5 -> pi_c = -0.005, inside tolerance
    t = trial_from_cells({(0, 1): (101, 50), (0, 0): (99, 40), (1, 0): (100, 30), (1, 1): (100, 20)})
    s = type_shares_hat(t)
    assert s.pi_c == 0.0
    assert s.pi_a + s.pi_n == pytest.approx(1.0, abs=1e-15)
    assert s.pi_a / s.pi_n == pytest.approx(0.505 / 0.5)
    bad = trial_from_cells({(0, 1): (60, 30), (0, 0): (40, 10), (1, 0): (60, 30), (1, 1): (40, 20)})
    with pytest.raises(MonotonicityViolation):
        type_shares_hat(bad)


def test_identified_means_perfect_compliance():
    t = trial_from_cells({(1, 1): (10, 6), (0, 0): (10, 5)})
    p = identified_means_hat(t)
    assert p.means.mu_c1 == pytest.approx(0.6)
    assert p.means.mu_c0 == pytest.approx(0.5)
    assert p.means.mu_a1 is None and p.means.mu_n0 is None
    assert p.shares == TypeShares(0, 0, 1)
    with pytest.raises(EmptyCell):
        identified_means_hat(t, strict=True)


def test_identified_means_all_always_takers():
    t = trial_from_cells({(1, 1): (10, 3), (0, 1): (10, 3)})
    mu_a1, mu_n0 = pure_cell_means(t)
    assert mu_a1 == pytest.approx(t.y.mean())
    assert mu_n0 is None
    with pytest.raises(WeakInstrument):
        identified_means_hat(t)


def test_identified_means_simulated_within_3se():
    cfg = TrialConfig(p_a1=0.6, p_n0=0.4, p_c1=0.7, p_c0=0.5, n=10 ** 5)
    keys = ("mu_a1", "mu_n0", "mu_c1", "mu_c0")
    truth = np.array([0.6, 0.4, 0.7, 0.5])
    # replication spread gives an independent standard error
    reps = np.array([
        [getattr(identified_means_hat(simulate_trial(cfg, 1000 + r)).means, k) for k in keys]
        for r in range(30)
    ])
    se = reps.std(axis=0, ddof=1)
    single = np.array([getattr(identified_means_hat(simulate_trial(cfg, 42)).means, k) for k in keys])
    assert np.all(np.abs(single - truth) < 3 * se)
    assert np.all(np.abs(reps.mean(axis=0) - truth) < 3 * se / np.sqrt(30))


@pytest.mark.parametrize("cfg", [
    TrialConfig(),
    TrialConfig(shares=TypeShares(0.05, 0.6, 0.35), p_a1=0.9, p_n0=0.15, p_c1=0.33, p_c0=0.81),
    TrialConfig(shares=TypeShares(0.0, 0.25, 0.75), p_n0=1.0, p_c1=0.0, p_c0=1.0),
])
def test_identified_means_population_limit_exact(cfg):
    p = identified_means_hat(population_moments(cfg))
    assert p.shares.pi_a == pytest.approx(cfg.shares.pi_a, abs=1e-10)
    assert p.shares.pi_n == pytest.approx(cfg.shares.pi_n, abs=1e-10)
    assert p.shares.pi_c == pytest.approx(cfg.shares.pi_c, abs=1e-10)
    for k, want in (("mu_c1", cfg.p_c1), ("mu_c0", cfg.p_c0), ("mu_n0", cfg.p_n0)):
        assert getattr(p.means, k) == pytest.approx(want, abs=1e-10)
    if cfg.shares.pi_a > 0:
        assert p.means.mu_a1 == pytest.approx(cfg.p_a1, abs=1e-10)
    else:
        assert p.means.mu_a1 is None


def test_complier_means_clamped_with_flag():
    # complier control mean estimate is negative in this small table
    t = trial_from_cells({(1, 1): (5, 5), (1, 0): (5, 5), (0, 1): (2, 2), (0, 0): (8, 4)})
    raw = identified_means_hat(t)
    assert raw.means.mu_c0 < 0 and not raw.clamped
    p = identified_means_hat(t, outcome_range=OutcomeRange(0, 1))
    assert p.clamped
    assert p.means.mu_c0 == 0.0
    assert p.raw_complier_means == (raw.means.mu_c1, raw.means.mu_c0)
    assert p.late == p.means.mu_c1 - p.means.mu_c0


# ---------------------------------------------------------------------------

def test_bounds_point_identified():
    p = identified_means_hat(population_moments(
        TrialConfig(shares=TypeShares(0, 0, 1), p_c1=0.8, p_c0=0.3)))
    b = manski_ate_bounds(p, OutcomeRange(0, 1))
    assert b.lo == b.hi == pytest.approx(p.late)


def test_bounds_hand_case():
    b = manski_ate_bounds(HAND, OutcomeRange(0, 1))
    assert b.lo == pytest.approx(-0.1, abs=1e-12)
    assert b.hi == pytest.approx(0.4, abs=1e-12)
    assert b.treated_lo == pytest.approx(0.47)
    assert b.control_lo == pytest.approx(0.37)


def test_estimates_record_field_names():
    rec = estimates_record(HAND, manski_ate_bounds(HAND, OutcomeRange(0, 1)))
    for key in ("pi_a", "pi_n", "pi_c", "mu_a1", "mu_n0", "mu_c1", "mu_c0", "late",
                "bound_lo", "bound_hi"):
        assert key in rec


@st.composite
def params_st(draw):
    u = st.floats(0, 1)
    a = draw(u)
    n = draw(st.floats(0, 1 - a))
    shares = TypeShares(a, n, 1 - a - n)
    c1, c0 = draw(u), draw(u)
    means = OutcomeMeans(draw(u), draw(u), c1, c0)
    return IdentifiedParams(shares, means, c1 - c0)


@st.composite
def range_st(draw):
    lo = draw(st.floats(-5, 0))
    return OutcomeRange(lo, draw(st.floats(1, 6)))


@given(params_st(), range_st())
def test_bounds_width_identity(p, r):
    b = manski_ate_bounds(p, r)
    assert b.width == pytest.approx((p.shares.pi_a + p.shares.pi_n) * r.width, abs=1e-10)


@settings(max_examples=200)
@given(params_st(), st.floats(0, 1), st.floats(0, 1))
def test_bounds_contain_any_completion(p, a0, n1):
    b = manski_ate_bounds(p, OutcomeRange(0, 1))
    ate = ate_decompose(p.shares, p.means.with_nonidentified(a0, n1))
    assert b.lo - 1e-12 <= ate <= b.hi + 1e-12
