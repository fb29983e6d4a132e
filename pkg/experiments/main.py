"""
pitsim experiment runner
Batch entry point: one subcommand per experiment kind
"""

import argparse
import logging
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Optional, Sequence

from pydantic import ValidationError

from experiments.config import Config
from experiments.handlers import HANDLERS
from experiments.schemas import KINDS, ExperimentConfig
from experiments.storage import ResultStorage
from pitsim.errors import ConfigError, DenseCapError, NumericValidationError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - [%(filename)s:%(lineno)d] - %(message)s"

logger = logging.getLogger(__name__)


def setup_logging() -> None:
    level = Config.log_level()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format=LOG_FORMAT,
        datefmt="%Y-%m-%d %H:%M:%S",
        handlers=[logging.StreamHandler(sys.stdout)],
    )
    logger.info("Logging configured with level: %s", level)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pitsim", description="Parallel-in-time simulation experiments."
    )
    subparsers = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        sub = subparsers.add_parser(kind, help=f"Run a {kind} experiment document.")
        sub.add_argument("--config", required=True, type=Path, help="TOML experiment document.")
        sub.add_argument("--out", type=Path, default=None, help="Output directory.")
        sub.add_argument(
            "--seed", type=int, default=None, help="Root seed (overrides the document)."
        )
        sub.add_argument("--threads", type=int, default=None, help="Worker threads.")
    return parser


def _field_paths(exc: ValidationError):
    return [".".join(str(p) for p in error["loc"]) + f" ({error['msg']})" for error in exc.errors()]


def load_config(path: Path, kind: str, seed=None, threads=None, out=None) -> ExperimentConfig:
    """Parse and validate a document; every failure becomes a ConfigError"""
    try:
        document = tomllib.loads(path.read_text())
    except FileNotFoundError as e:
        raise ConfigError(f"Config file {path} not found") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid TOML: {e}") from e

    document.setdefault("kind", kind)
    if document["kind"] != kind:
        raise ConfigError(
            f"Document kind '{document['kind']}' does not match subcommand '{kind}'", ["kind"]
        )
    if seed is not None and seed < 0:
        raise ConfigError("--seed must be non-negative", ["seed"])
    if threads is not None and threads < 1:
        raise ConfigError("--threads must be positive", ["threads"])
    document.setdefault("seed", Config.SEED)
    document.setdefault("threads", Config.THREADS)
    try:
        cfg = ExperimentConfig.model_validate(document)
    except ValidationError as e:
        raise ConfigError(f"Invalid experiment document {path}", _field_paths(e)) from e
    return cfg.with_overrides(seed=seed, threads=threads, out=None if out is None else str(out))


def run(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.kind, args.seed, args.threads, args.out)
        out = ResultStorage.prepare(cfg.out or Config.OUTPUT_DIR)
        logger.info(f"Running {cfg.kind} (seed={cfg.seed}, threads={cfg.threads}) -> {out}")
        summary = HANDLERS[cfg.kind](cfg, out)
    except ConfigError as e:
        logger.error(f"Config error: {e}")
        return EXIT_CONFIG
    except DenseCapError as e:
        logger.error(f"Document asks for a register beyond the dense cap: {e}")
        return EXIT_CONFIG
    except NumericValidationError as e:
        logger.error(f"Numeric validation failed: {e}", exc_info=True)
        return EXIT_NUMERIC
    logger.info(f"{cfg.kind} finished: {summary}")
    return EXIT_OK


def main() -> None:
    setup_logging()
    sys.exit(run())


if __name__ == "__main__":
    main()
