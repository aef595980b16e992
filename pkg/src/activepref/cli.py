"""Command-line entry point: ``activepref {run-cb,run-il,sweep,eluder}``.

Exit status is 0 on success, 2 on a configuration error and 3 when an
invariant check aborts a run.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .aurorae import run_il, steps_csv
from .funcspace import EluderCapError, FunctionClass, eluder_dimension
from .harness import ConfigError, InvariantViolation, load_config, run_cb, sweep

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 2, 3

log = logging.getLogger("activepref")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="activepref",
                                description="Preference-feedback bandit and imitation runs.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, what in (("run-cb", "one contextual dueling bandit run"),
                       ("run-il", "one imitation-learning run"),
                       ("sweep", "a grid of runs over horizons and seeds")):
        s = sub.add_parser(name, help=what)
        s.add_argument("--config", type=Path, help="JSON config; flags override its fields")
        s.add_argument("--seed", type=int, help="master seed")
        s.add_argument("--out", type=Path, default=Path("."), help="output directory")
        s.add_argument("--check-invariants", action="store_true", default=None,
                       help="check per-round guarantees and abort on violation")
        if name == "sweep":
            s.add_argument("--workers", type=int, default=None, help="process pool size")
    e = sub.add_parser("eluder", help="exact eluder dimension of a class file")
    e.add_argument("class_file", type=Path)
    e.add_argument("--epsilon", type=float, required=True)
    e.add_argument("--cap", type=int, default=12, help="largest domain searched exactly")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _write(out: Path, files: dict[str, str]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text)
        log.info("wrote %s", out / name)


def _overrides(args) -> dict:
    return {"seed": args.seed, "check_invariants": args.check_invariants}


def _eluder(args) -> int:
    try:
        fc = FunctionClass.from_json(args.class_file)
    except (OSError, ValueError, KeyError) as err:
        raise ConfigError(f"{args.class_file}: {err}") from err
    if not 0 < args.epsilon:
        raise ConfigError("--epsilon must be positive")
    try:
        print(eluder_dimension(fc, args.epsilon, cap=args.cap))
    except EluderCapError as err:
        raise ConfigError(str(err)) from err
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "eluder":
            return _eluder(args)
        cfg = load_config(args.config, _overrides(args))
        if args.command == "run-cb":
            res = run_cb(cfg)
            _write(args.out, {"rounds.csv": res.csv(), "summary.json": res.summary_json()})
        elif args.command == "run-il":
            res = run_il(cfg)
            _write(args.out, {"episodes.csv": res.csv(), "steps.csv": steps_csv(res),
                              "summary.json": res.summary_json()})
        else:
            if args.workers is not None:
                cfg["workers"] = args.workers
            res = sweep(cfg)
            _write(args.out, {"sweep.csv": res.csv(), "summary.json": res.summary_json()})
        print(json.dumps({k: v for k, v in res.summary.items() if k != "config"},
                         sort_keys=True, default=str))
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as err:
        print(str(err), file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
