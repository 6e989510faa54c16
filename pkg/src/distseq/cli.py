"""``distseq risk|coverage|rates|adaptive|render --spec FILE --out DIR``.

Exit status: 0 on success, 2 when the spec fails validation, 3 on a runtime error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .experiments import COMMANDS, SpecError, load_spec

log = logging.getLogger("distseq")


def _threads(arg: int | None) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("DISTSEQ_THREADS")
    try:
        return int(env) if env else 1
    except ValueError:
        raise SpecError(f"DISTSEQ_THREADS must be an integer, got {env!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="distseq", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--spec", required=True, help="experiment spec (JSON)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the spec's master seed")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $DISTSEQ_THREADS or 1)")
    return p


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        spec = load_spec(args.spec, args.seed)
        threads = _threads(args.threads)
        report = COMMANDS[args.command](spec, threads)
        written = report.write(args.out)
    except SpecError as e:
        log.error("invalid spec: %s", e)
        return 2
    except Exception as e:  # noqa: BLE001 - reported through the exit code
        log.error("%s failed: %s", args.command, e)
        return 3
    for path in written:
        log.info("wrote %s", path)
    for w in report.meta.get("warnings", []):
        log.warning("%s", w)
    return 0


if __name__ == "__main__":
    sys.exit(main())
