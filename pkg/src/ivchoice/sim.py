"""Synthetic data: the firm production model and a randomized encouragement trial.

Production model. Firm ``i`` has log output ``beta0 + beta1 * x + alpha_i`` at
log labour ``x`` and picks labour to maximize profit at price ``p`` and wage
``w_i``, giving

    x_i = (beta0 + log(p * beta1 / w_i) + alpha_i) / (1 - beta1).

Productivity loads on a demeaned urban indicator, ``alpha_i = beta2 * v_i +
eps_i``, and so does the log wage, ``log w_i = mu_logw + delta_w * v_i + u_i``.
Wages are therefore independent of ``eps`` given ``v``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import OutcomeMeans, TypeShares
from .errors import InvalidConfig

PRODUCTION_COLUMNS = ("y_obs", "x_obs", "v", "log_w")
TRIAL_COLUMNS = ("z", "d", "y")


def _fmt(x) -> str:
    # repr gives the shortest string that round-trips a float64
    return repr(float(x))


@dataclass(frozen=True)
class ProductionConfig:
    beta0: float = 1.0
    beta1: float = 0.5
    beta2: float = 0.0
    p_price: float = 1.0
    sigma_eps: float = 1.0
    mu_logw: float = 0.0
    delta_w: float = 0.0
    sigma_u: float = 1.0
    urban_share: float = 0.5
    n: int = 1000

    def __post_init__(self):
        for name in ("beta0", "beta2", "mu_logw", "delta_w"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidConfig(f"{name} must be finite")
        if not 0 < self.beta1 < 1:
            raise InvalidConfig(f"beta1 must satisfy 0 < beta1 < 1, got {self.beta1!r}")
        if not self.p_price > 0:
            raise InvalidConfig(f"p_price must be positive, got {self.p_price!r}")
        for name in ("sigma_eps", "sigma_u"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise InvalidConfig(f"{name} must be a finite value >= 0, got {v!r}")
        if not 0 < self.urban_share < 1:
            raise InvalidConfig(f"urban_share must lie in (0, 1), got {self.urban_share!r}")
        if int(self.n) != self.n or self.n < 1:
            raise InvalidConfig(f"n must be a positive integer, got {self.n!r}")

    @property
    def var_v(self) -> float:
        return self.urban_share * (1 - self.urban_share)


@dataclass(frozen=True)
class ObservationalSample:
    y_obs: np.ndarray
    x_obs: np.ndarray
    v: np.ndarray
    log_w: np.ndarray

    def __post_init__(self):
        n = len(self.y_obs)
        for name in PRODUCTION_COLUMNS:
            col = getattr(self, name)
            if len(col) != n:
                raise InvalidConfig(f"column {name} has length {len(col)}, expected {n}")
            if not np.all(np.isfinite(col)):
                raise InvalidConfig(f"column {name} has non-finite entries")

    def __len__(self) -> int:
        return len(self.y_obs)

    def column(self, name: str) -> np.ndarray:
        if name not in PRODUCTION_COLUMNS:
            raise KeyError(name)
        return getattr(self, name)

    def to_csv(self, path) -> None:
        rows = zip(*(getattr(self, c).tolist() for c in PRODUCTION_COLUMNS))
        with open(path, "w", newline="") as fh:
            fh.write(",".join(PRODUCTION_COLUMNS) + "\n")
            fh.writelines(",".join(map(_fmt, r)) + "\n" for r in rows)

    @classmethod
    def from_csv(cls, path) -> "ObservationalSample":
        cols = _read_columns(path, PRODUCTION_COLUMNS)
        return cls(**{c: np.asarray(cols[c], dtype=float) for c in PRODUCTION_COLUMNS})


def simulate_production(cfg: ProductionConfig, seed) -> ObservationalSample:
    """Draw ``cfg.n`` firms and their profit-maximizing labour choices."""
    rng = np.random.default_rng(seed)
    n = int(cfg.n)
    urban = rng.random(n) < cfg.urban_share
    v = urban.astype(float) - cfg.urban_share
    u = rng.normal(0.0, cfg.sigma_u, n)
    eps = rng.normal(0.0, cfg.sigma_eps, n)
    log_w = cfg.mu_logw + cfg.delta_w * v + u
    alpha = cfg.beta2 * v + eps
    x_obs = (cfg.beta0 + math.log(cfg.p_price * cfg.beta1) - log_w + alpha) / (1.0 - cfg.beta1)
    y_obs = cfg.beta0 + cfg.beta1 * x_obs + alpha
    return ObservationalSample(y_obs=y_obs, x_obs=x_obs, v=v, log_w=log_w)


def ols_plim_oracle(cfg: ProductionConfig) -> float:
    """Probability limit of the OLS slope of ``y_obs`` on ``x_obs`` (no controls).

    With ``A = Var(alpha)``, ``C = Cov(log w, alpha)`` and ``L = Var(log w)``,
    ``Cov(x, alpha) = (A - C) / (1 - beta1)`` and
    ``Var(x) = (L + A - 2C) / (1 - beta1)**2``.
    """
    b1 = cfg.beta1
    a = cfg.beta2 ** 2 * cfg.var_v + cfg.sigma_eps ** 2
    c = cfg.delta_w * cfg.beta2 * cfg.var_v
    l_ = cfg.delta_w ** 2 * cfg.var_v + cfg.sigma_u ** 2
    var_x = (l_ + a - 2 * c) / (1 - b1) ** 2
    if var_x <= 0:
        raise InvalidConfig("log labour has zero variance; OLS slope undefined")
    return b1 + ((a - c) / (1 - b1)) / var_x


# ---------------------------------------------------------------------------
# Encouragement trial

_P_FIELDS = ("p_a1", "p_a0", "p_n1", "p_n0", "p_c1", "p_c0")


@dataclass(frozen=True)
class TrialConfig:
    shares: TypeShares = field(default_factory=lambda: TypeShares(0.2, 0.3, 0.5))
    p_a1: float = 0.6
    p_a0: float = 0.6
    p_n1: float = 0.4
    p_n0: float = 0.4
    p_c1: float = 0.7
    p_c0: float = 0.5
    z_share: float = 0.5
    n: int = 1000

    def __post_init__(self):
        if not isinstance(self.shares, TypeShares):
            raise InvalidConfig("shares must be a TypeShares")
        for name in _P_FIELDS:
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise InvalidConfig(f"{name} must lie in [0, 1], got {v!r}")
        if not 0 < self.z_share < 1:
            raise InvalidConfig(f"z_share must lie in (0, 1), got {self.z_share!r}")
        if int(self.n) != self.n or self.n < 1:
            raise InvalidConfig(f"n must be a positive integer, got {self.n!r}")


@dataclass(frozen=True)
class TrialSample:
    """Rows of (instrument z, treatment d, outcome y)."""

    z: np.ndarray
    d: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z)
        d = np.asarray(self.d)
        y = np.asarray(self.y, dtype=float)
        if not (len(z) == len(d) == len(y)):
            raise InvalidConfig("z, d, y must have equal length")
        for name, col in (("z", z), ("d", d)):
            if not np.all((col == 0) | (col == 1)):
                raise InvalidConfig(f"{name} must be 0/1")
        if not np.all(np.isfinite(y)):
            raise InvalidConfig("y has non-finite entries")
        object.__setattr__(self, "z", z.astype(np.int8))
        object.__setattr__(self, "d", d.astype(np.int8))
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return len(self.z)

    @property
    def is_binary(self) -> bool:
        return bool(np.all((self.y == 0) | (self.y == 1)))

    def cell_counts(self) -> dict:
        """``{(z, d): (rows, sum of y)}`` for the four cells."""
        out = {}
        for zv in (0, 1):
            for dv in (0, 1):
                mask = (self.z == zv) & (self.d == dv)
                out[(zv, dv)] = (int(mask.sum()), float(self.y[mask].sum()))
        return out

    def to_csv(self, path) -> None:
        yfmt = (lambda t: str(int(t))) if self.is_binary else _fmt
        with open(path, "w", newline="") as fh:
            fh.write("z,d,y\n")
            fh.writelines(
                f"{zi},{di},{yfmt(yi)}\n"
                for zi, di, yi in zip(self.z.tolist(), self.d.tolist(), self.y.tolist())
            )

    @classmethod
    def from_csv(cls, path) -> "TrialSample":
        cols = _read_columns(path, TRIAL_COLUMNS)
        return cls(
            z=np.asarray(cols["z"], dtype=float),
            d=np.asarray(cols["d"], dtype=float),
            y=np.asarray(cols["y"], dtype=float),
        )


@dataclass(frozen=True)
class TrialMoments:
    """Arm-level moments of (d, y) given z, indexed by z in {0, 1}.

    ``n_arm`` is ``None`` for population (infinite-data) moments.
    """

    p_d1: tuple
    m_yd: tuple
    m_y1d: tuple
    n_arm: tuple | None = None

    def mean_y(self, z: int) -> float:
        return self.m_yd[z] + self.m_y1d[z]


def trial_moments(trial: TrialSample) -> TrialMoments:
    p_d1, m_yd, m_y1d, n_arm = [], [], [], []
    for zv in (0, 1):
        mask = trial.z == zv
        k = int(mask.sum())
        n_arm.append(k)
        if k == 0:
            p_d1.append(math.nan)
            m_yd.append(math.nan)
            m_y1d.append(math.nan)
            continue
        d = trial.d[mask].astype(float)
        y = trial.y[mask]
        p_d1.append(float(d.mean()))
        m_yd.append(float((y * d).mean()))
        m_y1d.append(float((y * (1.0 - d)).mean()))
    return TrialMoments(tuple(p_d1), tuple(m_yd), tuple(m_y1d), tuple(n_arm))


def population_moments(cfg: TrialConfig) -> TrialMoments:
    """Exact arm moments implied by a trial configuration."""
    s = cfg.shares
    at, nt, co = s.pi_a * cfg.p_a1, s.pi_n * cfg.p_n0, s.pi_c
    return TrialMoments(
        p_d1=(s.pi_a, s.pi_a + s.pi_c),
        m_yd=(at, at + co * cfg.p_c1),
        m_y1d=(nt + co * cfg.p_c0, nt),
    )


def simulate_trial(cfg: TrialConfig, seed) -> TrialSample:
    """Draw types, instruments and Bernoulli outcomes under monotonicity."""
    rng = np.random.default_rng(seed)
    n = int(cfg.n)
    # 0 = always-taker, 1 = never-taker, 2 = complier
    kind = rng.choice(3, size=n, p=np.asarray(cfg.shares.as_tuple(), dtype=float))
    z = (rng.random(n) < cfg.z_share).astype(np.int8)
    d = np.where(kind == 0, 1, np.where(kind == 1, 0, z)).astype(np.int8)
    p_table = np.array([
        [cfg.p_a0, cfg.p_a1],
        [cfg.p_n0, cfg.p_n1],
        [cfg.p_c0, cfg.p_c1],
    ])
    y = (rng.random(n) < p_table[kind, d]).astype(float)
    return TrialSample(z=z, d=d, y=y)


def true_params(cfg: TrialConfig) -> tuple[TypeShares, OutcomeMeans]:
    means = OutcomeMeans(
        mu_a1=cfg.p_a1, mu_n0=cfg.p_n0, mu_c1=cfg.p_c1, mu_c0=cfg.p_c0,
        mu_a0=cfg.p_a0, mu_n1=cfg.p_n1,
    )
    return cfg.shares, means


def _read_columns(path, expected) -> dict:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != tuple(expected):
            raise InvalidConfig(f"{path}: header must be {','.join(expected)}, got {header}")
        cols = {c: [] for c in expected}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected):
                raise InvalidConfig(f"{path}:{lineno}: expected {len(expected)} fields")
            try:
                for c, val in zip(expected, row):
                    cols[c].append(float(val))
            except ValueError as exc:
                raise InvalidConfig(f"{path}:{lineno}: {exc}") from None
    return cols
