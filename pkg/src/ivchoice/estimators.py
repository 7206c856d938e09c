"""Frequentist estimators: OLS, 2SLS, Wald/LATE, compliance shares and bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .core import OutcomeMeans, OutcomeRange, TypeShares, ate_decompose
from .errors import (
    EmptyArm,
    EmptyCell,
    InvalidConfig,
    MonotonicityViolation,
    RankDeficient,
    WeakInstrument,
)
from .sim import (
    ObservationalSample,
    ProductionConfig,
    TrialMoments,
    TrialSample,
    simulate_production,
    trial_moments,
)

RANK_TOL = 1e-10
DEFAULT_MIN_GAP = 0.01
DEFAULT_MONOTONICITY_TOL = 0.01
DEFAULT_MIN_FIRST_STAGE_T = 2.0


@dataclass(frozen=True)
class LinearFit:
    """Coefficients ordered as (intercept, slope on x, control loadings...)."""

    coefficients: np.ndarray
    se: np.ndarray
    names: tuple
    n_used: int
    first_stage_t: Optional[float] = None

    @property
    def intercept(self) -> float:
        return float(self.coefficients[0])

    @property
    def slope(self) -> float:
        return float(self.coefficients[1])

    @property
    def slope_se(self) -> float:
        return float(self.se[1])

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def stderr(self, name: str) -> float:
        return float(self.se[self.names.index(name)])

    def to_dict(self) -> dict:
        out = {
            "coefficients": dict(zip(self.names, map(float, self.coefficients))),
            "se": dict(zip(self.names, map(float, self.se))),
            "n_used": self.n_used,
        }
        if self.first_stage_t is not None:
            out["first_stage_t"] = self.first_stage_t
        return out


def _qr_solve(X: np.ndarray, y: np.ndarray):
    """Least squares through a reduced QR of the design.

    Returns ``(beta, R)``. Rank is judged on the column-equilibrated
    cross-product matrix so that regressor scaling does not matter.
    """
    n, k = X.shape
    if n <= k:
        raise RankDeficient(f"need more rows than coefficients (n={n}, k={k})")
    norms = np.linalg.norm(X, axis=0)
    if np.any(norms == 0):
        raise RankDeficient("design has an all-zero column")
    q, r = np.linalg.qr(X / norms)
    sv = np.linalg.svd(r, compute_uv=False)
    if (sv[-1] / sv[0]) ** 2 < RANK_TOL:
        raise RankDeficient(
            f"cross-product matrix is singular (reciprocal condition {(sv[-1] / sv[0]) ** 2:.3g})"
        )
    beta = np.linalg.solve(r, q.T @ y) / norms
    return beta, r * norms


def _cov_from_r(r: np.ndarray, sigma2: float) -> np.ndarray:
    r_inv = np.linalg.inv(r)
    return sigma2 * (r_inv @ r_inv.T)


def ols(y, X, names: Sequence[str] | None = None) -> LinearFit:
    """OLS of ``y`` on the columns of ``X`` (caller supplies the intercept)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    beta, r = _qr_solve(X, y)
    resid = y - X @ beta
    sigma2 = float(resid @ resid) / (n - k)
    se = np.sqrt(np.diag(_cov_from_r(r, sigma2)))
    return LinearFit(beta, se, tuple(names or (f"b{j}" for j in range(k))), n)


def tsls(y, endog, instrument, controls=None,
         min_first_stage_t: float = DEFAULT_MIN_FIRST_STAGE_T,
         names: Sequence[str] | None = None) -> LinearFit:
    """Two-stage least squares with one endogenous regressor and one instrument.

    First stage regresses ``endog`` on (1, instrument, controls); the second
    stage regresses ``y`` on (1, fitted endog, controls). Standard errors use
    residuals formed with the observed regressor.
    """
    y = np.asarray(y, dtype=float)
    endog = np.asarray(endog, dtype=float)
    n = len(y)
    ones = np.ones((n, 1))
    C = np.empty((n, 0)) if controls is None else np.asarray(controls, dtype=float).reshape(n, -1)
    Z = np.hstack([ones, np.asarray(instrument, dtype=float).reshape(n, 1), C])
    try:
        first = ols(endog, Z)
    except RankDeficient as exc:
        raise WeakInstrument(f"first stage is not identified: {exc}") from None
    t_stat = float(first.coefficients[1] / first.se[1]) if first.se[1] > 0 else math.inf
    if not abs(t_stat) > min_first_stage_t:
        raise WeakInstrument(
            f"first-stage |t| = {abs(t_stat):.3g} does not exceed {min_first_stage_t}"
        )
    x_hat = Z @ first.coefficients
    X_hat = np.hstack([ones, x_hat.reshape(n, 1), C])
    beta, r = _qr_solve(X_hat, y)
    X = np.hstack([ones, endog.reshape(n, 1), C])
    resid = y - X @ beta
    k = X.shape[1]
    sigma2 = float(resid @ resid) / (n - k)
    se = np.sqrt(np.diag(_cov_from_r(r, sigma2)))
    names = tuple(names or (f"b{j}" for j in range(k)))
    return LinearFit(beta, se, names, n, first_stage_t=t_stat)


def ols_fit(sample: ObservationalSample, controls: Sequence[str] = ()) -> LinearFit:
    """OLS of log output on log labour plus the named control columns."""
    n = len(sample)
    X = np.column_stack([np.ones(n), sample.x_obs] + [sample.column(c) for c in controls])
    return ols(sample.y_obs, X, names=("const", "x_obs", *controls))


def tsls_fit(sample: ObservationalSample, endogenous: str = "x_obs",
             instrument: str = "log_w", controls: Sequence[str] = ("v",),
             min_first_stage_t: float = DEFAULT_MIN_FIRST_STAGE_T) -> LinearFit:
    ctrl = np.column_stack([sample.column(c) for c in controls]) if controls else None
    return tsls(
        sample.y_obs, sample.column(endogenous), sample.column(instrument), ctrl,
        min_first_stage_t=min_first_stage_t,
        names=("const", endogenous, *controls),
    )


def monte_carlo_slopes(cfg: ProductionConfig, n_values: Sequence[int], reps: int,
                       seed, controls: Sequence[str] = ("v",)) -> dict:
    """Replicated OLS and 2SLS slopes for each sample size.

    Seeds are spawned from ``seed`` (an int or a ``SeedSequence``) in
    (n, replication) order, so results do not depend on how the work is
    scheduled.
    """
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(len(n_values) * reps)
    out = {}
    for i, n in enumerate(n_values):
        c = replace(cfg, n=int(n))
        ols_s, tsls_s = np.empty(reps), np.empty(reps)
        for rep in range(reps):
            sample = simulate_production(c, children[i * reps + rep])
            ols_s[rep] = ols_fit(sample, controls).slope
            tsls_s[rep] = tsls_fit(sample, controls=controls).slope
        out[int(n)] = {"ols": ols_s, "tsls": tsls_s}
    return out


# ---------------------------------------------------------------------------
# Binary instrument / binary treatment

@dataclass(frozen=True)
class IdentifiedParams:
    shares: TypeShares
    means: OutcomeMeans
    late: float
    clamped: bool = False
    raw_complier_means: Optional[tuple] = None

    def __post_init__(self):
        if self.means.mu_a0 is not None or self.means.mu_n1 is not None:
            raise InvalidConfig("identified params must leave mu_a0 / mu_n1 absent")
        if abs(self.late - (self.means.mu_c1 - self.means.mu_c0)) > 1e-12:
            raise InvalidConfig("late must equal mu_c1 - mu_c0")

    def to_dict(self) -> dict:
        m = self.means
        out = {
            "pi_a": self.shares.pi_a,
            "pi_n": self.shares.pi_n,
            "pi_c": self.shares.pi_c,
            "mu_a1": m.mu_a1,
            "mu_n0": m.mu_n0,
            "mu_c1": m.mu_c1,
            "mu_c0": m.mu_c0,
            "late": self.late,
            "complier_means_clamped": self.clamped,
        }
        if self.raw_complier_means is not None:
            out["raw_mu_c1"], out["raw_mu_c0"] = self.raw_complier_means
        return out


@dataclass(frozen=True)
class AteBounds:
    """Bounds on the ATE, with the welfare-level bounds they came from.

    ``treated_*`` bound the treat-all mean outcome E[Y(1)], ``control_*``
    the treat-none mean E[Y(0)]. They are ``None`` when only the ATE
    interval is known.
    """

    lo: float
    hi: float
    treated_lo: Optional[float] = None
    treated_hi: Optional[float] = None
    control_lo: Optional[float] = None
    control_hi: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise InvalidConfig("bounds must be finite")
        if self.lo > self.hi + 1e-12:
            raise InvalidConfig(f"need lo <= hi, got [{self.lo}, {self.hi}]")
        levels = (self.treated_lo, self.treated_hi, self.control_lo, self.control_hi)
        if any(v is None for v in levels) and not all(v is None for v in levels):
            raise InvalidConfig("welfare-level bounds must be given all together")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def has_levels(self) -> bool:
        return self.treated_lo is not None

    def to_dict(self) -> dict:
        out = {"bound_lo": self.lo, "bound_hi": self.hi}
        if self.has_levels:
            out.update(
                treated_lo=self.treated_lo, treated_hi=self.treated_hi,
                control_lo=self.control_lo, control_hi=self.control_hi,
            )
        return out


def _as_moments(data) -> TrialMoments:
    m = data if isinstance(data, TrialMoments) else trial_moments(data)
    if m.n_arm is not None:
        for zv in (0, 1):
            if m.n_arm[zv] == 0:
                raise EmptyArm(f"no rows with z={zv}")
    return m


def wald_late(trial, min_gap: float = DEFAULT_MIN_GAP) -> float:
    """Wald ratio: reduced-form contrast over first-stage contrast."""
    m = _as_moments(trial)
    gap = m.p_d1[1] - m.p_d1[0]
    if not gap > min_gap:
        raise WeakInstrument(f"first-stage gap {gap:.4g} does not exceed {min_gap}")
    return (m.mean_y(1) - m.mean_y(0)) / gap


def type_shares_hat(trial, tol: float = DEFAULT_MONOTONICITY_TOL) -> TypeShares:
    """Compliance shares under monotonicity.

    A complier share in ``[-tol, 0)`` is set to zero and the other two shares
    are renormalized; anything below ``-tol`` is evidence against
    monotonicity and raises.
    """
    m = _as_moments(trial)
    pi_a = m.p_d1[0]
    pi_n = 1.0 - m.p_d1[1]
    pi_c = 1.0 - pi_a - pi_n
    if pi_c < -tol:
        raise MonotonicityViolation(
            f"estimated complier share {pi_c:.4g} is below -{tol}"
        )
    if pi_c < 0:
        total = pi_a + pi_n
        return TypeShares(pi_a / total, pi_n / total, 0.0)
    return TypeShares(pi_a, pi_n, pi_c)


def pure_cell_means(trial, strict: bool = False) -> tuple:
    """``(mu_a1, mu_n0)`` from the cells (z=0, d=1) and (z=1, d=0).

    An empty cell gives ``None`` unless ``strict``, which raises EmptyCell.
    """
    m = _as_moments(trial)
    out = []
    for prob, total, label in (
        (m.p_d1[0], m.m_yd[0], "(z=0, d=1)"),
        (1.0 - m.p_d1[1], m.m_y1d[1], "(z=1, d=0)"),
    ):
        if prob == 0:
            if strict:
                raise EmptyCell(f"cell {label} is empty")
            out.append(None)
        else:
            out.append(total / prob)
    return tuple(out)


def identified_means_hat(trial, outcome_range: OutcomeRange | None = None,
                         min_gap: float = DEFAULT_MIN_GAP,
                         monotonicity_tol: float = DEFAULT_MONOTONICITY_TOL,
                         strict: bool = False) -> IdentifiedParams:
    """Shares, always-taker treated mean, never-taker control mean and complier means.

    ``trial`` may be a :class:`TrialSample` or exact :class:`TrialMoments`.
    """
    m = _as_moments(trial)
    shares = type_shares_hat(m, tol=monotonicity_tol)
    gap = m.p_d1[1] - m.p_d1[0]
    if not gap > min_gap:
        raise WeakInstrument(
            f"complier share {gap:.4g} does not exceed {min_gap}; complier means unidentified"
        )
    mu_a1, mu_n0 = pure_cell_means(m, strict=strict)
    raw_c1 = (m.m_yd[1] - m.m_yd[0]) / gap
    raw_c0 = (m.m_y1d[0] - m.m_y1d[1]) / gap
    mu_c1, mu_c0, clamped = raw_c1, raw_c0, False
    if outcome_range is not None:
        mu_c1, mu_c0 = outcome_range.clamp(raw_c1), outcome_range.clamp(raw_c0)
        clamped = (mu_c1, mu_c0) != (raw_c1, raw_c0)
    means = OutcomeMeans(mu_a1, mu_n0, mu_c1, mu_c0, outcome_range=outcome_range)
    return IdentifiedParams(
        shares, means, mu_c1 - mu_c0, clamped=clamped,
        raw_complier_means=(raw_c1, raw_c0) if clamped else None,
    )


def _level(share, mean):
    return 0 * share if share == 0 else share * mean


def manski_ate_bounds(params: IdentifiedParams, outcome_range: OutcomeRange) -> AteBounds:
    """Worst-case bounds: the unidentified means sit at the outcome extremes."""
    s, m = params.shares, params.means
    y_lo, y_hi = outcome_range.y_lo, outcome_range.y_hi
    lo = ate_decompose(s, m.with_nonidentified(mu_a0=y_hi, mu_n1=y_lo))
    hi = ate_decompose(s, m.with_nonidentified(mu_a0=y_lo, mu_n1=y_hi))
    treated = _level(s.pi_a, m.mu_a1) + _level(s.pi_c, m.mu_c1)
    control = _level(s.pi_n, m.mu_n0) + _level(s.pi_c, m.mu_c0)
    return AteBounds(
        lo, hi,
        treated_lo=treated + s.pi_n * y_lo, treated_hi=treated + s.pi_n * y_hi,
        control_lo=control + s.pi_a * y_lo, control_hi=control + s.pi_a * y_hi,
    )


def estimates_record(params: IdentifiedParams, bounds: AteBounds | None = None) -> dict:
    out = params.to_dict()
    if bounds is not None:
        out.update(bounds.to_dict())
    return out
