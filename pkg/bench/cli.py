"""``rome-bench`` entry point.

Exit codes: 0 success, 1 bad configuration, 2 an arm failed the oracle
check (no report is written), 3 the report could not be written.
"""
from __future__ import annotations

import logging
import sys
from typing import Sequence

from bench.config import parse_config
from bench.report import write_report
from bench.runner import run_bench, summarize
from services.errors import ConfigError, EquivalenceError, RopeError

logger = logging.getLogger("rome_bench")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_EQUIVALENCE = 2
EXIT_IO = 3


def main(argv: Sequence[str] | None = None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"rome-bench: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    logging.basicConfig(
        level=cfg.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    try:
        report = run_bench(cfg)
    except EquivalenceError as exc:
        logger.error("%s", exc)
        return EXIT_EQUIVALENCE
    except RopeError as exc:
        logger.error("Invalid input: %s", exc)
        return EXIT_CONFIG

    try:
        text = write_report(report, cfg.report, cfg.out)
    except OSError as exc:
        logger.error("Could not write report to %s: %s", cfg.out, exc)
        return EXIT_IO
    if cfg.out is None:
        sys.stdout.write(text)
    logger.info(summarize(report))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
