"""Posterior simulation for the identified parameters of the binary LATE model.

Parameters, in draw-column order: the three type shares and the four
identified Bernoulli means ``p_a1, p_n0, p_c1, p_c0``. The means that data
cannot identify (``p_a0``, ``p_n1``) never enter the likelihood and are not
sampled; the decision layer handles them through prior means.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import OutcomeRange
from .errors import (
    EmptyArm,
    EstimationError,
    InvalidConfig,
    NonBinaryOutcome,
    TooLarge,
)
from .estimators import DEFAULT_MIN_GAP, DEFAULT_MONOTONICITY_TOL, identified_means_hat
from .sim import TrialSample

PARAM_NAMES = ("pi_a", "pi_n", "pi_c", "p_a1", "p_n0", "p_c1", "p_c0")
MEAN_NAMES = PARAM_NAMES[3:]
INIT_MARGIN = 1e-3


@dataclass(frozen=True)
class PriorSpec:
    """Dirichlet prior on the shares, independent Beta priors on the means."""

    dirichlet_shares: tuple = (1.0, 1.0, 1.0)
    beta_means: dict = field(default_factory=lambda: {k: (1.0, 1.0) for k in MEAN_NAMES})

    def __post_init__(self):
        conc = tuple(float(a) for a in self.dirichlet_shares)
        if len(conc) != 3 or not all(a > 0 and math.isfinite(a) for a in conc):
            raise InvalidConfig("dirichlet_shares needs three positive values")
        shapes = {}
        for k in MEAN_NAMES:
            ab = tuple(float(a) for a in self.beta_means.get(k, (1.0, 1.0)))
            if len(ab) != 2 or not all(a > 0 and math.isfinite(a) for a in ab):
                raise InvalidConfig(f"beta_means[{k}] needs two positive shapes")
            shapes[k] = ab
        unknown = set(self.beta_means) - set(MEAN_NAMES)
        if unknown:
            raise InvalidConfig(f"unknown beta_means keys: {sorted(unknown)}")
        object.__setattr__(self, "dirichlet_shares", conc)
        object.__setattr__(self, "beta_means", shapes)

    def prior_means(self) -> dict:
        total = sum(self.dirichlet_shares)
        out = dict(zip(PARAM_NAMES[:3], (a / total for a in self.dirichlet_shares)))
        out.update({k: a / (a + b) for k, (a, b) in self.beta_means.items()})
        return out

    def to_dict(self) -> dict:
        return {
            "dirichlet_shares": list(self.dirichlet_shares),
            "beta_means": {k: list(v) for k, v in self.beta_means.items()},
        }


@dataclass(frozen=True)
class GibbsConfig:
    n_draws: int = 5000
    burn_in: int = 1000
    thin: int = 1
    seed: int = 0

    def __post_init__(self):
        if int(self.n_draws) != self.n_draws or self.n_draws < 1:
            raise InvalidConfig("n_draws must be a positive integer")
        if int(self.burn_in) != self.burn_in or self.burn_in < 0:
            raise InvalidConfig("burn_in must be a nonnegative integer")
        if int(self.thin) != self.thin or self.thin < 1:
            raise InvalidConfig("thin must be a positive integer")


@dataclass(frozen=True)
class PosteriorDraws:
    """Draw matrix with columns :data:`PARAM_NAMES`.

    ``value_range`` bounds the mean columns; it is [0, 1] for Bernoulli
    posteriors and the outcome range for bootstrap draws.
    """

    values: np.ndarray
    provenance: dict = field(default_factory=dict)
    value_range: OutcomeRange = field(default_factory=OutcomeRange)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[1] != len(PARAM_NAMES) or len(vals) == 0:
            raise InvalidConfig(f"draws must be a nonempty (n, {len(PARAM_NAMES)}) matrix")
        if not np.all(np.isfinite(vals)):
            raise InvalidConfig("draws contain non-finite values")
        shares = vals[:, :3]
        if np.any(shares < 0) or np.any(shares > 1):
            raise InvalidConfig("share draws outside [0, 1]")
        if np.max(np.abs(shares.sum(axis=1) - 1.0)) > 1e-12:
            raise InvalidConfig("share draws do not sum to 1")
        r = self.value_range
        if np.any(vals[:, 3:] < r.y_lo) or np.any(vals[:, 3:] > r.y_hi):
            raise InvalidConfig("mean draws outside the value range")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, PARAM_NAMES.index(name)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(PARAM_NAMES) + "\n")
            fh.writelines(",".join(map(repr, row)) + "\n" for row in self.values.tolist())

    @classmethod
    def from_csv(cls, path, value_range: OutcomeRange | None = None) -> "PosteriorDraws":
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(h.strip() for h in header) != PARAM_NAMES:
                raise InvalidConfig(f"{path}: header must be {','.join(PARAM_NAMES)}")
            try:
                rows = [[float(x) for x in row] for row in reader if row]
            except ValueError as exc:
                raise InvalidConfig(f"{path}: {exc}") from None
        return cls(
            np.array(rows, dtype=float).reshape(-1, len(PARAM_NAMES)),
            provenance={"source": str(path)},
            value_range=value_range or OutcomeRange(),
        )


def data_digest(trial: TrialSample) -> str:
    h = hashlib.sha256()
    for col in (trial.z, trial.d, trial.y):
        h.update(np.ascontiguousarray(col).tobytes())
    return h.hexdigest()


def _binary_cells(trial: TrialSample):
    if not trial.is_binary:
        raise NonBinaryOutcome("the Gibbs posterior needs 0/1 outcomes")
    cells = {}
    for (zv, dv), (k, s) in trial.cell_counts().items():
        cells[(zv, dv)] = (k, int(round(s)))
    return cells


# ---------------------------------------------------------------------------
# Brute-force oracle

GRID_MAX_ROWS = 100
GRID_MAX_POINTS = 21


def _simplex_nodes(g: int) -> np.ndarray:
    """Centroids of the g*g congruent triangles tiling the 2-simplex.

    Each node carries equal weight. Columns are (pi_a, pi_n, pi_c).
    """
    pts = []
    for i in range(g):
        for j in range(g - i):
            pts.append(((i + 1 / 3) / g, (j + 1 / 3) / g))
            if i + j <= g - 2:
                pts.append(((i + 2 / 3) / g, (j + 2 / 3) / g))
    ab = np.array(pts)
    return np.column_stack([ab, 1.0 - ab.sum(axis=1)])


def _log_beta_kernel(x, a, b):
    return (a - 1) * np.log(x) + (b - 1) * np.log1p(-x)


def grid_posterior_oracle(trial: TrialSample, prior: PriorSpec | None = None,
                          grid_points: int = 21) -> dict:
    """Posterior means and SDs by direct summation over a tensor grid.

    Shares use equal-weight centroids of a triangulated simplex; each of the
    four means uses a midpoint grid on (0, 1). The likelihood multiplies
    Bernoulli terms for the pure cells and two-component mixture terms for
    the mixed cells (z=1, d=1) and (z=0, d=0).

    Returns ``{name: {"mean": ..., "sd": ...}}`` for the seven parameters
    and ``late = p_c1 - p_c0``.
    """
    prior = prior or PriorSpec()
    if len(trial) > GRID_MAX_ROWS:
        raise TooLarge(f"grid oracle accepts at most {GRID_MAX_ROWS} rows, got {len(trial)}")
    if not 2 <= grid_points <= GRID_MAX_POINTS:
        raise TooLarge(f"grid_points must lie in [2, {GRID_MAX_POINTS}], got {grid_points}")
    if len(trial) and not trial.is_binary:
        raise NonBinaryOutcome("the grid oracle needs 0/1 outcomes")

    g = grid_points
    cells = {key: (0, 0) for key in ((0, 0), (0, 1), (1, 0), (1, 1))}
    if len(trial):
        cells = _binary_cells(trial)
    n01, s01 = cells[(0, 1)]
    n10, s10 = cells[(1, 0)]
    n11, s11 = cells[(1, 1)]
    n00, s00 = cells[(0, 0)]
    f01, f10, f11, f00 = n01 - s01, n10 - s10, n11 - s11, n00 - s00

    p = (np.arange(g) + 0.5) / g
    bm = prior.beta_means
    # axes: 0 p_a1, 1 p_n0, 2 p_c1, 3 p_c0
    lp_a1 = _log_beta_kernel(p, *bm["p_a1"]) + s01 * np.log(p) + f01 * np.log1p(-p)
    lp_n0 = _log_beta_kernel(p, *bm["p_n0"]) + s10 * np.log(p) + f10 * np.log1p(-p)
    lp_c1 = _log_beta_kernel(p, *bm["p_c1"])
    lp_c0 = _log_beta_kernel(p, *bm["p_c0"])
    pa1 = p[:, None, None, None]
    pn0 = p[None, :, None, None]
    pc1 = p[None, None, :, None]
    pc0 = p[None, None, None, :]
    base = (lp_a1[:, None, None, None] + lp_n0[None, :, None, None]
            + lp_c1[None, None, :, None] + lp_c0[None, None, None, :])

    conc = np.asarray(prior.dirichlet_shares)
    shares = _simplex_nodes(g)
    log_share_prior = ((conc - 1) * np.log(shares)).sum(axis=1)

    top = -math.inf
    s0 = 0.0
    s1 = np.zeros(8)
    s2 = np.zeros(8)
    for (sa, sn, sc), lsp in zip(shares, log_share_prior):
        lw = (base + lsp + n01 * math.log(sa) + n10 * math.log(sn)
              + s11 * np.log(sa * pa1 + sc * pc1)
              + f11 * np.log(sa * (1 - pa1) + sc * (1 - pc1))
              + s00 * np.log(sn * pn0 + sc * pc0)
              + f00 * np.log(sn * (1 - pn0) + sc * (1 - pc0)))
        m = float(lw.max())
        if m > top:
            scale = math.exp(top - m) if math.isfinite(top) else 0.0
            s0 *= scale
            s1 *= scale
            s2 *= scale
            top = m
        w = np.exp(lw - top)
        tot = float(w.sum())
        s0 += tot
        marg = [w.sum(axis=tuple(a for a in range(4) if a != k)) for k in range(4)]
        cc = w.sum(axis=(0, 1))  # joint of (p_c1, p_c0)
        diff = p[:, None] - p[None, :]
        first = [sa * tot, sn * tot, sc * tot] + [float(mk @ p) for mk in marg]
        second = [sa * sa * tot, sn * sn * tot, sc * sc * tot] + [float(mk @ p ** 2) for mk in marg]
        first.append(float((cc * diff).sum()))
        second.append(float((cc * diff ** 2).sum()))
        s1 += first
        s2 += second

    out = {}
    for k, name in enumerate(PARAM_NAMES + ("late",)):
        mean = s1[k] / s0
        var = max(s2[k] / s0 - mean ** 2, 0.0)
        out[name] = {"mean": float(mean), "sd": math.sqrt(var)}
    return out


# ---------------------------------------------------------------------------
# Gibbs sampler

def _initial_state(trial: TrialSample, prior: PriorSpec) -> list:
    state = prior.prior_means()
    try:
        est = identified_means_hat(trial, min_gap=DEFAULT_MIN_GAP,
                                   monotonicity_tol=DEFAULT_MONOTONICITY_TOL)
    except EstimationError:
        est = None
    if est is not None:
        s = np.clip(est.shares.as_tuple(), INIT_MARGIN, 1.0)
        s = s / s.sum()
        state.update(zip(PARAM_NAMES[:3], s.tolist()))
        m = est.means
        for name, val in zip(MEAN_NAMES, (m.mu_a1, m.mu_n0, m.mu_c1, m.mu_c0)):
            if val is not None:
                state[name] = min(max(val, INIT_MARGIN), 1.0 - INIT_MARGIN)
    return [state[k] for k in PARAM_NAMES]


def _split(num: float, other: float) -> float:
    tot = num + other
    return num / tot if tot > 0 else 0.5


def gibbs_posterior(trial: TrialSample, prior: PriorSpec | None = None,
                    cfg: GibbsConfig | None = None) -> PosteriorDraws:
    """Data-augmentation Gibbs sampler over latent compliance types.

    Under monotonicity, units with (z=1, d=0) are never-takers and units with
    (z=0, d=1) are always-takers. Units with (z=1, d=1) are always-takers or
    compliers and units with (z=0, d=0) never-takers or compliers; their types
    are imputed each sweep from the current parameters. Shares then update
    from a Dirichlet and each mean from a Beta, conditional on the imputed
    types. Units that share a (z, d, y) cell are exchangeable, so the
    per-unit imputation is carried out as one binomial draw per cell.
    """
    prior = prior or PriorSpec()
    cfg = cfg or GibbsConfig()
    cells = _binary_cells(trial)
    for zv in (0, 1):
        if cells[(zv, 0)][0] + cells[(zv, 1)][0] == 0:
            raise EmptyArm(f"no rows with z={zv}")
    n = len(trial)
    n01, s01 = cells[(0, 1)]
    n10, s10 = cells[(1, 0)]
    n11, s11 = cells[(1, 1)]
    n00, s00 = cells[(0, 0)]
    f01, f10, f11, f00 = n01 - s01, n10 - s10, n11 - s11, n00 - s00
    conc = np.asarray(prior.dirichlet_shares)
    bm = prior.beta_means

    rng = np.random.default_rng(cfg.seed)
    pa, pn, pc, pa1, pn0, pc1, pc0 = _initial_state(trial, prior)
    total_iter = cfg.burn_in + cfg.n_draws * cfg.thin
    out = np.empty((cfg.n_draws, len(PARAM_NAMES)))
    row = 0
    for it in range(total_iter):
        # impute: always-takers among (z=1, d=1), never-takers among (z=0, d=0)
        a_succ = rng.binomial(s11, _split(pa * pa1, pc * pc1))
        a_fail = rng.binomial(f11, _split(pa * (1 - pa1), pc * (1 - pc1)))
        n_succ = rng.binomial(s00, _split(pn * pn0, pc * pc0))
        n_fail = rng.binomial(f00, _split(pn * (1 - pn0), pc * (1 - pc0)))
        k_a = n01 + a_succ + a_fail
        k_n = n10 + n_succ + n_fail
        k_c = n - k_a - k_n
        pa, pn, pc = rng.dirichlet(conc + (k_a, k_n, k_c))
        pa1 = rng.beta(bm["p_a1"][0] + s01 + a_succ, bm["p_a1"][1] + f01 + a_fail)
        pn0 = rng.beta(bm["p_n0"][0] + s10 + n_succ, bm["p_n0"][1] + f10 + n_fail)
        pc1 = rng.beta(bm["p_c1"][0] + s11 - a_succ, bm["p_c1"][1] + f11 - a_fail)
        pc0 = rng.beta(bm["p_c0"][0] + s00 - n_succ, bm["p_c0"][1] + f00 - n_fail)
        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
            out[row] = (pa, pn, pc, pa1, pn0, pc1, pc0)
            row += 1
    provenance = {
        "method": "gibbs",
        "prior": prior.to_dict(),
        "config": asdict(cfg),
        "data_digest": data_digest(trial),
        "n_rows": n,
    }
    return PosteriorDraws(out, provenance=provenance)


def bootstrap_draws(trial: TrialSample, n_boot: int, seed,
                    outcome_range: OutcomeRange | None = None,
                    min_gap: float = DEFAULT_MIN_GAP,
                    monotonicity_tol: float = DEFAULT_MONOTONICITY_TOL) -> PosteriorDraws:
    """Nonparametric bootstrap of the plug-in estimates, shaped like posterior draws.

    Used in place of a posterior when outcomes are bounded but not binary.
    Replicates on which estimation fails are dropped and counted in the
    provenance. Means of a group with zero share are undefined and are
    stored as ``y_lo``; they are always multiplied by that zero share.
    """
    outcome_range = outcome_range or OutcomeRange()
    rng = np.random.default_rng(seed)
    n = len(trial)
    rows, failures = [], 0
    for _ in range(n_boot):
        idx = rng.integers(0, n, n)
        resample = TrialSample(trial.z[idx], trial.d[idx], trial.y[idx])
        try:
            est = identified_means_hat(resample, outcome_range=outcome_range,
                                       min_gap=min_gap, monotonicity_tol=monotonicity_tol)
        except EstimationError:
            failures += 1
            continue
        s, m = est.shares, est.means
        means = [outcome_range.y_lo if v is None else v
                 for v in (m.mu_a1, m.mu_n0, m.mu_c1, m.mu_c0)]
        rows.append([s.pi_a, s.pi_n, s.pi_c, *means])
    if not rows:
        raise EstimationError("every bootstrap replicate failed")
    provenance = {
        "method": "bootstrap",
        "n_boot": n_boot,
        "failed_replicates": failures,
        "data_digest": data_digest(trial),
        "n_rows": n,
    }
    return PosteriorDraws(np.array(rows), provenance=provenance, value_range=outcome_range)


# ---------------------------------------------------------------------------

def batch_means_mcse(x: np.ndarray) -> float:
    """Monte Carlo standard error of the mean of a correlated chain."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    b = max(int(math.sqrt(n)), 1)
    a = n // b
    if a < 2:
        return float(x.std() / math.sqrt(n))
    batches = x[: a * b].reshape(a, b).mean(axis=1)
    return float(math.sqrt(b * batches.var(ddof=1) / n))


def posterior_summary(draws: PosteriorDraws) -> dict:
    """Mean, SD, 5/50/95% quantiles and MCSE per parameter, plus ``late``."""
    cols = {name: draws.column(name) for name in PARAM_NAMES}
    cols["late"] = cols["p_c1"] - cols["p_c0"]
    out = {}
    for name, x in cols.items():
        q05, q50, q95 = np.quantile(x, [0.05, 0.5, 0.95])
        out[name] = {
            "mean": float(x.mean()),
            "sd": float(x.std()),
            "q05": float(q05),
            "q50": float(q50),
            "q95": float(q95),
            "mcse": batch_means_mcse(x),
        }
    return out
