"""Treatment choice between treat-all and treat-none.

Rules:

* ``bayes`` - a single prior mean ``(m_a0, m_n1)`` for the unidentified means;
* ``minimax_bounds`` / ``minimax_regret_bounds`` - data-alone rules that use
  only the identified-set bounds;
* ``gamma_minimax`` / ``gamma_minimax_regret`` - worst case over a class of
  priors for the unidentified means.

Posterior expected welfare is affine in the prior means of ``mu_a0`` and
``mu_n1`` once those priors are taken independent of the posterior for the
identified parameters. A prior class therefore enters only through the
rectangle of prior means it spans, and every worst case sits at a vertex.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bayes import PosteriorDraws
from .core import OutcomeMeans, OutcomeRange, TypeShares, WelfareSpec
from .errors import InvalidConfig, OutOfRange
from .estimators import AteBounds, IdentifiedParams


class Action(enum.Enum):
    TREAT_ALL = "TreatAll"
    TREAT_NONE = "TreatNone"


DEFAULT_TIE = Action.TREAT_NONE


@dataclass(frozen=True)
class PosteriorMoments:
    """Joint posterior moments of the identified parameters.

    Products are averaged draw by draw (``E[pi_c * p_c1]``), never formed
    from marginal means.
    """

    e_pi_a: float
    e_pi_n: float
    e_pi_c: float
    e_pi_a_p_a1: float
    e_pi_n_p_n0: float
    e_pi_c_p_c1: float
    e_pi_c_p_c0: float

    @classmethod
    def from_draws(cls, draws: PosteriorDraws) -> "PosteriorMoments":
        col = draws.column
        return cls(
            e_pi_a=float(col("pi_a").mean()),
            e_pi_n=float(col("pi_n").mean()),
            e_pi_c=float(col("pi_c").mean()),
            e_pi_a_p_a1=float((col("pi_a") * col("p_a1")).mean()),
            e_pi_n_p_n0=float((col("pi_n") * col("p_n0")).mean()),
            e_pi_c_p_c1=float((col("pi_c") * col("p_c1")).mean()),
            e_pi_c_p_c0=float((col("pi_c") * col("p_c0")).mean()),
        )

    @classmethod
    def from_params(cls, shares: TypeShares, means: OutcomeMeans) -> "PosteriorMoments":
        """Degenerate moments at known parameter values."""
        def prod(share, mean):
            return 0.0 if share == 0 else share * mean
        return cls(
            e_pi_a=shares.pi_a,
            e_pi_n=shares.pi_n,
            e_pi_c=shares.pi_c,
            e_pi_a_p_a1=prod(shares.pi_a, means.mu_a1),
            e_pi_n_p_n0=prod(shares.pi_n, means.mu_n0),
            e_pi_c_p_c1=prod(shares.pi_c, means.mu_c1),
            e_pi_c_p_c0=prod(shares.pi_c, means.mu_c0),
        )

    @property
    def complier_effect(self) -> float:
        return self.e_pi_c_p_c1 - self.e_pi_c_p_c0

    def scaled(self, lam: float) -> "PosteriorMoments":
        """Moments after rescaling outcomes by ``lam`` (shares unchanged)."""
        return PosteriorMoments(
            self.e_pi_a, self.e_pi_n, self.e_pi_c,
            lam * self.e_pi_a_p_a1, lam * self.e_pi_n_p_n0,
            lam * self.e_pi_c_p_c1, lam * self.e_pi_c_p_c0,
        )

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def as_moments(source) -> PosteriorMoments:
    if isinstance(source, PosteriorMoments):
        return source
    if isinstance(source, PosteriorDraws):
        return PosteriorMoments.from_draws(source)
    if isinstance(source, IdentifiedParams):
        return PosteriorMoments.from_params(source.shares, source.means)
    raise TypeError(f"cannot derive posterior moments from {type(source).__name__}")


@dataclass(frozen=True)
class PriorMeanRectangle:
    """Ranges of prior means for ``mu_a0`` and ``mu_n1``.

    Any prior class whose means span this rectangle yields the same
    decisions, because expected welfare depends on these priors only
    through their means.
    """

    m_a0_lo: float
    m_a0_hi: float
    m_n1_lo: float
    m_n1_hi: float
    outcome_range: Optional[OutcomeRange] = None

    def __post_init__(self):
        vals = (self.m_a0_lo, self.m_a0_hi, self.m_n1_lo, self.m_n1_hi)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidConfig("rectangle bounds must be finite")
        if self.m_a0_lo > self.m_a0_hi or self.m_n1_lo > self.m_n1_hi:
            raise InvalidConfig("rectangle needs lo <= hi on both axes")
        r = self.outcome_range
        if r is not None and not all(r.contains(v) for v in vals):
            raise OutOfRange(
                f"rectangle {vals} leaves the outcome range [{r.y_lo}, {r.y_hi}]"
            )

    @classmethod
    def singleton(cls, m_a0: float, m_n1: float, outcome_range=None) -> "PriorMeanRectangle":
        return cls(m_a0, m_a0, m_n1, m_n1, outcome_range)

    @classmethod
    def full(cls, outcome_range: OutcomeRange) -> "PriorMeanRectangle":
        lo, hi = outcome_range.y_lo, outcome_range.y_hi
        return cls(lo, hi, lo, hi, outcome_range)

    def vertices(self) -> list:
        return [(a, b) for a in (self.m_a0_lo, self.m_a0_hi) for b in (self.m_n1_lo, self.m_n1_hi)]

    def contains(self, other: "PriorMeanRectangle") -> bool:
        return (self.m_a0_lo <= other.m_a0_lo and other.m_a0_hi <= self.m_a0_hi
                and self.m_n1_lo <= other.m_n1_lo and other.m_n1_hi <= self.m_n1_hi)

    def to_dict(self) -> dict:
        return {"m_a0": [self.m_a0_lo, self.m_a0_hi], "m_n1": [self.m_n1_lo, self.m_n1_hi]}


@dataclass(frozen=True)
class RuleResult:
    rule: str
    action: Action
    values: dict
    worst_corner: Optional[dict] = None

    def to_dict(self) -> dict:
        out = {"rule": self.rule, "action": self.action.value, "values": dict(self.values)}
        if self.worst_corner is not None:
            out["worst_corner"] = {k: list(v) for k, v in self.worst_corner.items()}
        return out


# ---------------------------------------------------------------------------
# Posterior expected welfare

def treated_welfare(m: PosteriorMoments, m_n1: float, cost: float) -> float:
    """Expected per-capita welfare of treat-all."""
    return m.e_pi_c_p_c1 + m.e_pi_a_p_a1 + m.e_pi_n * m_n1 - cost


def control_welfare(m: PosteriorMoments, m_a0: float) -> float:
    """Expected per-capita welfare of treat-none."""
    return m.e_pi_c_p_c0 + m.e_pi_a * m_a0 + m.e_pi_n_p_n0


def expected_gain(source, m_a0: float, m_n1: float, spec: WelfareSpec) -> float:
    """Posterior expected welfare gain of treat-all over treat-none."""
    m = as_moments(source)
    return treated_welfare(m, m_n1, spec.cost) - control_welfare(m, m_a0)


def moment_bounds(source, outcome_range: OutcomeRange) -> AteBounds:
    """Identified-set bounds evaluated at the posterior moments."""
    m = as_moments(source)
    lo_y, hi_y = outcome_range.y_lo, outcome_range.y_hi
    t_lo, t_hi = treated_welfare(m, lo_y, 0.0), treated_welfare(m, hi_y, 0.0)
    c_lo, c_hi = control_welfare(m, lo_y), control_welfare(m, hi_y)
    return AteBounds(t_lo - c_hi, t_hi - c_lo, t_lo, t_hi, c_lo, c_hi)


def _pick(gain_all_over_none: float, tie: Action) -> Action:
    if gain_all_over_none > 0:
        return Action.TREAT_ALL
    if gain_all_over_none < 0:
        return Action.TREAT_NONE
    return tie


def _check_point(point, outcome_range):
    if outcome_range is None:
        return
    for label, v in zip(("m_a0", "m_n1"), point):
        if not outcome_range.contains(v):
            raise OutOfRange(f"{label}={v!r} outside [{outcome_range.y_lo}, {outcome_range.y_hi}]")


# ---------------------------------------------------------------------------
# Rules

def bayes_rule(source, point: tuple, spec: WelfareSpec = WelfareSpec(),
               outcome_range: OutcomeRange | None = None,
               tie: Action = DEFAULT_TIE) -> RuleResult:
    """Treat-all iff the posterior expected gain at ``point`` is positive."""
    _check_point(point, outcome_range)
    m_a0, m_n1 = point
    d = expected_gain(source, m_a0, m_n1, spec)
    return RuleResult("bayes", _pick(d, tie), {"D": d, "m_a0": m_a0, "m_n1": m_n1})


def minimax_rule(bounds: AteBounds, spec: WelfareSpec = WelfareSpec(),
                 tie: Action = DEFAULT_TIE) -> RuleResult:
    """Maximin welfare over the identified set.

    Compares the lower bound of treat-all welfare (net of cost) with the
    lower bound of treat-none welfare. When treat-none welfare is point
    identified this is ``bounds.lo - cost > 0``. Bounds without welfare
    levels are read that way.
    """
    if bounds.has_levels:
        w1, w0 = bounds.treated_lo - spec.cost, bounds.control_lo
    else:
        w1, w0 = bounds.lo - spec.cost, 0.0
    return RuleResult(
        "minimax_bounds", _pick(w1 - w0, tie),
        {"worst_welfare_treat_all": w1, "worst_welfare_treat_none": w0},
    )


def minimax_regret_rule(bounds: AteBounds, spec: WelfareSpec = WelfareSpec(),
                        tie: Action = DEFAULT_TIE) -> RuleResult:
    """Minimize maximum regret; treat-all iff ``(lo + hi) / 2 > cost``."""
    regret_all = max(0.0, -(bounds.lo - spec.cost))
    regret_none = max(0.0, bounds.hi - spec.cost)
    return RuleResult(
        "minimax_regret_bounds", _pick(regret_none - regret_all, tie),
        {"max_regret_treat_all": regret_all, "max_regret_treat_none": regret_none},
    )


def _rect_checked(rect: PriorMeanRectangle, outcome_range):
    if outcome_range is not None:
        _check_point((rect.m_a0_lo, rect.m_n1_lo), outcome_range)
        _check_point((rect.m_a0_hi, rect.m_n1_hi), outcome_range)
    return rect


def gamma_maximin(source, rect: PriorMeanRectangle, spec: WelfareSpec = WelfareSpec(),
                  outcome_range: OutcomeRange | None = None,
                  tie: Action = DEFAULT_TIE) -> RuleResult:
    """Maximize worst-case posterior expected welfare over the rectangle.

    Treat-all welfare is worst at ``m_n1_lo`` and treat-none welfare at
    ``m_a0_lo``. Reported under the rule name ``gamma_minimax`` (minimax of
    risk equals maximin of welfare).
    """
    _rect_checked(rect, outcome_range)
    m = as_moments(source)
    w1 = treated_welfare(m, rect.m_n1_lo, spec.cost)
    w0 = control_welfare(m, rect.m_a0_lo)
    corners = {
        "TreatAll": (rect.m_a0_hi, rect.m_n1_lo),
        "TreatNone": (rect.m_a0_lo, rect.m_n1_hi),
    }
    return RuleResult(
        "gamma_minimax", _pick(w1 - w0, tie),
        {"worst_welfare_treat_all": w1, "worst_welfare_treat_none": w0},
        worst_corner=corners,
    )


def gain_extremes(source, rect: PriorMeanRectangle, spec: WelfareSpec = WelfareSpec()) -> tuple:
    """``(D_min, D_max)`` of the expected gain over the rectangle."""
    d_min = expected_gain(source, rect.m_a0_hi, rect.m_n1_lo, spec)
    d_max = expected_gain(source, rect.m_a0_lo, rect.m_n1_hi, spec)
    return d_min, d_max


def gamma_minimax_regret(source, rect: PriorMeanRectangle, spec: WelfareSpec = WelfareSpec(),
                         outcome_range: OutcomeRange | None = None,
                         tie: Action = DEFAULT_TIE) -> RuleResult:
    """Minimize worst-case posterior expected regret over the rectangle."""
    _rect_checked(rect, outcome_range)
    d_min, d_max = gain_extremes(source, rect, spec)
    regret_all = max(0.0, -d_min)
    regret_none = max(0.0, d_max)
    corners = {
        "TreatAll": (rect.m_a0_hi, rect.m_n1_lo),
        "TreatNone": (rect.m_a0_lo, rect.m_n1_hi),
    }
    return RuleResult(
        "gamma_minimax_regret", _pick(regret_none - regret_all, tie),
        {"max_regret_treat_all": regret_all, "max_regret_treat_none": regret_none,
         "D_min": d_min, "D_max": d_max},
        worst_corner=corners,
    )


# ---------------------------------------------------------------------------
# Prior sensitivity

@dataclass(frozen=True)
class SensitivityTable:
    """Expected gain and Bayes action on a grid of prior means.

    The gain is affine, ``D = intercept + coef_a0 * m_a0 + coef_n1 * m_n1``,
    so the breakeven set ``D = 0`` is a line; ``frontier`` holds its segment
    inside the rectangle, or ``None`` when it misses the rectangle.
    """

    rows: list
    intercept: float
    coef_a0: float
    coef_n1: float
    frontier: Optional[tuple] = None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("m_a0,m_n1,D,action\n")
            fh.writelines(
                f"{a!r},{b!r},{d!r},{act.value}\n" for a, b, d, act in self.rows
            )

    def to_dict(self) -> dict:
        return {
            "intercept": self.intercept,
            "coef_a0": self.coef_a0,
            "coef_n1": self.coef_n1,
            "frontier": None if self.frontier is None else [list(p) for p in self.frontier],
        }


def _frontier_segment(c0, ca, cn, rect) -> Optional[tuple]:
    pts = []
    if cn != 0:
        for a in (rect.m_a0_lo, rect.m_a0_hi):
            b = -(c0 + ca * a) / cn
            if rect.m_n1_lo <= b <= rect.m_n1_hi:
                pts.append((a, b))
    if ca != 0:
        for b in (rect.m_n1_lo, rect.m_n1_hi):
            a = -(c0 + cn * b) / ca
            if rect.m_a0_lo <= a <= rect.m_a0_hi:
                pts.append((a, b))
    if ca == 0 and cn == 0:
        return None
    pts = sorted(set(pts))
    if not pts:
        return None
    return (pts[0], pts[-1])


def sensitivity_table(source, rect: PriorMeanRectangle, spec: WelfareSpec = WelfareSpec(),
                      grid: tuple = (11, 11), tie: Action = DEFAULT_TIE) -> SensitivityTable:
    n_a, n_n = grid
    if n_a < 2 or n_n < 2:
        raise InvalidConfig("sensitivity grid needs at least 2 points per axis")
    m = as_moments(source)
    rows = []
    for a in np.linspace(rect.m_a0_lo, rect.m_a0_hi, n_a).tolist():
        for b in np.linspace(rect.m_n1_lo, rect.m_n1_hi, n_n).tolist():
            d = expected_gain(m, a, b, spec)
            rows.append((a, b, d, _pick(d, tie)))
    intercept = m.complier_effect + m.e_pi_a_p_a1 - m.e_pi_n_p_n0 - spec.cost
    coef_a0, coef_n1 = -m.e_pi_a, m.e_pi_n
    return SensitivityTable(
        rows, intercept, coef_a0, coef_n1,
        frontier=_frontier_segment(intercept, coef_a0, coef_n1, rect),
    )


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecisionReport:
    rules: dict
    inputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "rules": {k: r.to_dict() for k, r in self.rules.items()},
            "inputs": self.inputs,
        }


def decision_report(source, rect: PriorMeanRectangle, spec: WelfareSpec,
                    outcome_range: OutcomeRange, bounds: AteBounds | None = None,
                    bayes_point: tuple | None = None,
                    tie: Action = DEFAULT_TIE) -> DecisionReport:
    """Run every rule.

    ``bounds`` feeds the data-alone rules; without it they use the bounds at
    the posterior moments. The Bayes rule defaults to the rectangle centre.
    """
    m = as_moments(source)
    if bounds is None:
        bounds = moment_bounds(m, outcome_range)
    if bayes_point is None:
        bayes_point = ((rect.m_a0_lo + rect.m_a0_hi) / 2, (rect.m_n1_lo + rect.m_n1_hi) / 2)
    rules = {
        "bayes": bayes_rule(m, bayes_point, spec, outcome_range, tie),
        "minimax_bounds": minimax_rule(bounds, spec, tie),
        "minimax_regret_bounds": minimax_regret_rule(bounds, spec, tie),
        "gamma_minimax": gamma_maximin(m, rect, spec, outcome_range, tie),
        "gamma_minimax_regret": gamma_minimax_regret(m, rect, spec, outcome_range, tie),
    }
    inputs = {
        "moments": m.to_dict(),
        "rectangle": rect.to_dict(),
        "welfare": {"cost": spec.cost},
        "outcome_range": [outcome_range.y_lo, outcome_range.y_hi],
        "bounds": bounds.to_dict(),
        "tie_break": tie.value,
        "assumption": "priors on mu_a0, mu_n1 independent of the identified-parameter posterior",
        "gamma_minimax_note": "implemented as maximin of posterior expected welfare",
    }
    if isinstance(source, PosteriorDraws):
        inputs["posterior"] = source.provenance
    return DecisionReport(rules, inputs)
