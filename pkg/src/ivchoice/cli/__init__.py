"""Command line entry point.

Exit codes: 0 success, 2 invalid configuration or input file, 3 estimation
failure, 4 I/O failure. Errors print ``error: <Name>: <message>`` on stderr.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from ..bayes import PosteriorDraws
from ..decide import decision_report
from ..errors import EstimationError, InvalidConfig, IVChoiceError, OutOfRange
from .config import ConfigError, RunConfig, load
from .pipeline import dump_json, run, simulate_only

EXIT_CONFIG = 2
EXIT_ESTIMATION = 3
EXIT_IO = 4


def _fail(exc: BaseException, code: int) -> int:
    name = exc.name if isinstance(exc, IVChoiceError) else type(exc).__name__
    print(f"error: {name}: {exc}", file=sys.stderr)
    return code


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed, gibbs=replace(cfg.gibbs, seed=args.seed))
    if getattr(args, "out", None) is not None:
        cfg = replace(cfg, out_dir=Path(args.out))
    return cfg


def _cmd_run(args) -> int:
    cfg = _apply_overrides(load(args.config), args)
    report = run(cfg, deterministic=args.deterministic)
    print(f"wrote {Path(cfg.out_dir) / 'report.json'} ({', '.join(report.get('artifacts', []))})")
    return 0


def _cmd_validate(args) -> int:
    load(args.config)
    print("ok")
    return 0


def _cmd_simulate(args) -> int:
    cfg = _apply_overrides(load(args.config), args)
    for path in simulate_only(cfg):
        print(f"wrote {path}")
    return 0


def _cmd_decide(args) -> int:
    cfg = _apply_overrides(load(args.config), args)
    if cfg.rectangle is None:
        raise ConfigError("config.rectangle: required for decide")
    draws = PosteriorDraws.from_csv(args.draws, value_range=cfg.outcome_range)
    report = decision_report(
        draws, cfg.rectangle, cfg.welfare, cfg.outcome_range,
        bayes_point=cfg.bayes_point, tie=cfg.tie,
    )
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dump_json(report.to_dict(), out_dir / "decision.json")
    for name, rule in report.rules.items():
        print(f"{name}: {rule.action.value}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ivchoice",
        description="IV estimation, ATE bounds and robust treatment choice",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the configured pipeline")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--deterministic", action="store_true",
                   help="omit timestamps so reruns are byte identical")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("validate", help="check a config without running it")
    p.add_argument("config")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("simulate", help="write the simulated sample(s) only")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("decide", help="decision report from draws.csv and a rectangle")
    p.add_argument("--draws", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_decide)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidConfig, OutOfRange) as exc:
        return _fail(exc, EXIT_CONFIG)
    except EstimationError as exc:
        return _fail(exc, EXIT_ESTIMATION)
    except OSError as exc:
        return _fail(exc, EXIT_IO)


if __name__ == "__main__":
    sys.exit(main())
