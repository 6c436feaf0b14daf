"""``wds`` command line: one subcommand per experiment kind.

On failure a single JSON error record goes to stderr and the exit code is
nonzero (2 for bad input, 1 for a failed run).
"""

from __future__ import annotations

import argparse
import json
import sys

from .harness import KINDS, ConfigError, load_config, run


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wds", description="Waveform-defined security experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--config", required=True, help="flat key = value config file")
        p.add_argument("--seed", type=int, help="override the config's master seed")
        p.add_argument("--out", help="output directory (overrides the config's out)")
    return ap


def _error(kind: str, exc: BaseException, command: str | None, code: int) -> int:
    rec = {"status": "error", "command": command, "error": kind, "type": type(exc).__name__,
           "message": str(exc), "exit_code": code}
    print(json.dumps(rec, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        if e.code in (0, None):
            raise
        return _error("usage", ValueError("invalid command line"), None, 2)
    try:
        cfg = load_config(args.config, seed=args.seed, kind=args.command)
    except ConfigError as e:
        return _error("config", e, args.command, 2)
    try:
        written = run(cfg, args.out)
    except (ConfigError, KeyError) as e:
        return _error("config", e, args.command, 2)
    except Exception as e:  # noqa: BLE001 - every failure becomes an error record
        return _error("runtime", e, args.command, 1)
    print(json.dumps({"status": "ok", "command": args.command, "seed": cfg.seed,
                      "outputs": [str(p) for p in written]}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
