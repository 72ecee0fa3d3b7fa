"""Command line entry point ``splus``.

Subcommands::

    splus run --config FILE|PRESET [--seed N] [--out DIR] [--threads K]
    splus sweep --config FILE|PRESET --axis AXIS --values V1,V2,... [...]
    splus presets list
    splus check-tau --config FILE|PRESET
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import ConfigParseError, ConfigValidationError, SWEEP_AXES, build_tau, load_config, preset_names
from .market_model import Admissibility, DegenerateTau, InadmissibleTau, check_admissible, smallest_root
from .scenario import ScenarioError, run_scenario, sweep

__all__ = ["main", "build_parser"]


def _value(text: str):
    text = text.strip()
    if text == "p_star":
        return text
    try:
        return int(text)
    except ValueError:
        return float(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splus", description="Kinetic s-plus exchange scenarios")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="scenario YAML file or preset name")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")

    common(sub.add_parser("run", help="run one scenario"))
    p = sub.add_parser("sweep", help="run a scenario over a list of parameter values")
    common(p)
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--values", required=True, help="comma separated values")
    p = sub.add_parser("presets", help="shipped scenarios")
    p.add_argument("action", choices=["list"])
    p = sub.add_parser("check-tau", help="report p_star and lambda for a scenario's tau")
    p.add_argument("--config", required=True)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "presets":
            for name in preset_names():
                print(name)
            return 0
        config = load_config(args.config)
        if args.command == "check-tau":
            tau = build_tau(config.tau)
            kind, roots = check_admissible(tau)
            print(f"admissibility={kind.value}")
            if kind is Admissibility.INADMISSIBLE:
                return 2
            prof = smallest_root(tau)
            print(f"p_star={prof.p_star:.10g}")
            print(f"lambda={prof.lam:.10g}")
            print("roots=" + ",".join(f"{r:.10g}" for r in roots))
            return 0
        if args.seed is not None:
            config = config.replace("seed", args.seed)
        if args.command == "run":
            rep = run_scenario(config, threads=args.threads, out=args.out)
            print(f"p_star={rep.p_star:.10g} lambda={rep.lam:.10g}")
            if rep.regime is not None:
                print(f"regime={rep.regime.regime.value}")
            print(f"wrote {len(rep.files)} files to {rep.out_dir}")
            return 0
        values = [_value(v) for v in args.values.split(",") if v.strip()]
        reps = sweep(config, args.axis, values, threads=args.threads, out=args.out)
        for v, rep in zip(values, reps):
            regime = rep.regime.regime.value if rep.regime else "-"
            print(f"{args.axis}={v} p_star={rep.p_star:.10g} lambda={rep.lam:.10g} regime={regime}")
        return 0
    except (InadmissibleTau, DegenerateTau) as exc:
        print(f"inadmissible tau: {exc}", file=sys.stderr)
        return 2
    except (ConfigParseError, ConfigValidationError, FileNotFoundError, ValueError,
            ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
