"""Run configuration: JSON schema plus the domain invariants of each section."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import jsonschema

from ..bayes import GibbsConfig, PriorSpec
from ..core import OutcomeRange, TypeShares, WelfareSpec
from ..decide import Action, PriorMeanRectangle
from ..errors import IVChoiceError
from ..sim import ProductionConfig, TrialConfig

MODES = ("production-demo", "trial-analysis", "full-pipeline")
MIN_REPORT_DRAWS = 100

_num = {"type": "number"}
_pair = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_count = {"type": "integer", "minimum": 1}

SCHEMA = {
    "type": "object",
    "required": ["mode"],
    "additionalProperties": False,
    "properties": {
        "mode": {"enum": list(MODES)},
        "seed": {"type": "integer", "minimum": 0},
        "production": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                **{k: _num for k in ("beta0", "beta1", "beta2", "p_price", "sigma_eps",
                                     "mu_logw", "delta_w", "sigma_u", "urban_share")},
                "n": _count,
                "replications": {
                    "type": "object",
                    "required": ["n_values", "reps"],
                    "additionalProperties": False,
                    "properties": {
                        "n_values": {"type": "array", "items": _count, "minItems": 1},
                        "reps": _count,
                    },
                },
            },
        },
        "trial": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "shares": {
                    "type": "object",
                    "required": ["pi_a", "pi_n", "pi_c"],
                    "additionalProperties": False,
                    "properties": {k: _num for k in ("pi_a", "pi_n", "pi_c")},
                },
                **{k: _num for k in ("p_a1", "p_a0", "p_n1", "p_n0", "p_c1", "p_c0", "z_share")},
                "n": _count,
            },
        },
        "data": {"type": "string"},
        "prior": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dirichlet": {"type": "array", "items": _num, "minItems": 3, "maxItems": 3},
                "beta": {"type": "object", "additionalProperties": _pair},
            },
        },
        "gibbs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_draws": {"type": "integer", "minimum": MIN_REPORT_DRAWS},
                "burn_in": {"type": "integer", "minimum": 0},
                "thin": _count,
            },
        },
        "bootstrap": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"n_boot": _count},
        },
        "rectangle": {
            "type": "object",
            "required": ["m_a0", "m_n1"],
            "additionalProperties": False,
            "properties": {"m_a0": _pair, "m_n1": _pair},
        },
        "bayes_point": _pair,
        "welfare": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"cost": _num},
        },
        "outcome_range": _pair,
        "sensitivity_grid": {"type": "array", "items": {"type": "integer", "minimum": 2},
                             "minItems": 2, "maxItems": 2},
        "tie_break": {"enum": [a.value for a in Action]},
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "first_stage_gap": _num,
                "monotonicity": _num,
                "first_stage_t": _num,
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["json", "csv"]}},
                "write_sample": {"type": "boolean"},
            },
        },
    },
}


class ConfigError(IVChoiceError):
    """Schema or invariant violation, carrying a located diagnostic."""


@dataclass(frozen=True)
class Tolerances:
    first_stage_gap: float = 0.01
    monotonicity: float = 0.01
    first_stage_t: float = 2.0


@dataclass(frozen=True)
class RunConfig:
    mode: str
    seed: int = 0
    production: Optional[ProductionConfig] = None
    replications: Optional[dict] = None
    trial: Optional[TrialConfig] = None
    data: Optional[Path] = None
    prior: PriorSpec = field(default_factory=PriorSpec)
    gibbs: GibbsConfig = field(default_factory=GibbsConfig)
    n_boot: int = 500
    rectangle: Optional[PriorMeanRectangle] = None
    bayes_point: Optional[tuple] = None
    welfare: WelfareSpec = field(default_factory=WelfareSpec)
    outcome_range: OutcomeRange = field(default_factory=OutcomeRange)
    outcome_range_given: bool = False
    sensitivity_grid: tuple = (11, 11)
    tie: Action = Action.TREAT_NONE
    tolerances: Tolerances = field(default_factory=Tolerances)
    out_dir: Path = Path("out")
    formats: tuple = ("json", "csv")
    write_sample: bool = True

    @property
    def needs_production(self) -> bool:
        return self.mode in ("production-demo", "full-pipeline")

    @property
    def needs_trial(self) -> bool:
        return self.mode in ("trial-analysis", "full-pipeline")


def load_raw(path) -> dict:
    """Read JSON; parse errors become ConfigError with line and column.

    ``OSError`` propagates so that callers can map it to an I/O failure.
    """
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None


def _where(parts) -> str:
    return "config" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in parts)


def _section(name: str, build):
    try:
        return build()
    except (IVChoiceError, ValueError, TypeError) as exc:
        raise ConfigError(f"config.{name}: {exc}") from None


def parse(raw: dict, base_dir: Path | None = None) -> RunConfig:
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(raw),
                    key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise ConfigError("; ".join(f"{_where(e.absolute_path)}: {e.message}" for e in errors))

    mode = raw["mode"]
    kw = {"mode": mode, "seed": raw.get("seed", 0)}
    needs_prod = mode in ("production-demo", "full-pipeline")
    needs_trial = mode in ("trial-analysis", "full-pipeline")

    if needs_prod:
        if "production" not in raw:
            raise ConfigError(f"config.production: required for mode {mode!r}")
        sec = dict(raw["production"])
        kw["replications"] = sec.pop("replications", None)
        kw["production"] = _section("production", lambda: ProductionConfig(**sec))

    kw["outcome_range"] = _section(
        "outcome_range", lambda: OutcomeRange(*raw.get("outcome_range", (0.0, 1.0))))
    kw["outcome_range_given"] = "outcome_range" in raw
    rng_ = kw["outcome_range"]

    if needs_trial:
        if "trial" not in raw and "data" not in raw:
            raise ConfigError(f"config.trial: 'trial' or 'data' required for mode {mode!r}")
        if "rectangle" not in raw:
            raise ConfigError(f"config.rectangle: required for mode {mode!r}")
    if "trial" in raw:
        sec = dict(raw["trial"])
        shares = sec.pop("shares", None)

        def build_trial():
            extra = {} if shares is None else {"shares": TypeShares(**shares)}
            return TrialConfig(**extra, **sec)
        kw["trial"] = _section("trial", build_trial)
    if "data" in raw:
        p = Path(raw["data"])
        kw["data"] = p if p.is_absolute() or base_dir is None else base_dir / p
    if "rectangle" in raw:
        r = raw["rectangle"]
        kw["rectangle"] = _section("rectangle", lambda: PriorMeanRectangle(
            r["m_a0"][0], r["m_a0"][1], r["m_n1"][0], r["m_n1"][1], rng_))
    if "bayes_point" in raw:
        pt = tuple(raw["bayes_point"])
        if not all(rng_.contains(v) for v in pt):
            raise ConfigError("config.bayes_point: outside outcome_range")
        kw["bayes_point"] = pt
    if "prior" in raw:
        pr = raw["prior"]
        kw["prior"] = _section("prior", lambda: PriorSpec(
            dirichlet_shares=tuple(pr.get("dirichlet", (1.0, 1.0, 1.0))),
            beta_means={k: tuple(v) for k, v in pr.get("beta", {}).items()},
        ))
    sub_seed = kw["seed"]
    if "gibbs" in raw:
        kw["gibbs"] = _section("gibbs", lambda: GibbsConfig(seed=sub_seed, **raw["gibbs"]))
    else:
        kw["gibbs"] = GibbsConfig(seed=sub_seed)
    if "bootstrap" in raw:
        kw["n_boot"] = raw["bootstrap"].get("n_boot", 500)
    if "welfare" in raw:
        kw["welfare"] = _section("welfare", lambda: WelfareSpec(**raw["welfare"]))
    if "sensitivity_grid" in raw:
        kw["sensitivity_grid"] = tuple(raw["sensitivity_grid"])
    if "tie_break" in raw:
        kw["tie"] = Action(raw["tie_break"])
    if "tolerances" in raw:
        tol = raw["tolerances"]
        for k, v in tol.items():
            if not v >= 0:
                raise ConfigError(f"config.tolerances.{k}: must be >= 0")
        kw["tolerances"] = Tolerances(**tol)
    out = raw.get("output", {})
    if "dir" in out:
        kw["out_dir"] = Path(out["dir"])
    if "formats" in out:
        kw["formats"] = tuple(out["formats"])
    if "write_sample" in out:
        kw["write_sample"] = out["write_sample"]
    return RunConfig(**kw)


def load(path) -> RunConfig:
    path = Path(path)
    return parse(load_raw(path), base_dir=path.parent)
