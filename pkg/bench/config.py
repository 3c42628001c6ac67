"""Benchmark configuration: flags, presets, config files and their validation."""
from __future__ import annotations

import argparse
import enum
import json
import logging
import math
from pathlib import Path
from typing import Literal, Optional, Sequence

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from config.settings import PRESETS, PipelineConfig, Settings, get_settings
from services.errors import ConfigError
from services.tensor_core import PairingMode, Precision, check_dims

logger = logging.getLogger(__name__)

ReportFormat = Literal["csv", "md", "json"]


class Impl(str, enum.Enum):
    REFERENCE = "reference"
    REFERENCE_ND = "reference-nd"
    ROME_GATHER = "rome-gather"
    ROME_MATMUL = "rome-matmul"
    ROME_FUSED = "rome-fused"
    ROME_PIPELINED = "rome-pipelined"
    DENSE_ORACLE = "dense-oracle"


ROME_IMPLS = (Impl.ROME_GATHER, Impl.ROME_MATMUL, Impl.ROME_FUSED, Impl.ROME_PIPELINED)


class BenchConfig(BaseModel):
    shape: tuple[int, int, int, int] = (1, 8, 4096, 128)
    mode: PairingMode = PairingMode.INTERLEAVE
    dims: Optional[tuple[int, ...]] = None
    impls: tuple[Impl, ...] = ()
    iters: int = Field(50, ge=1)
    warmup: int = Field(5, ge=0)
    seed: int = 42
    check: bool = True
    precision: Precision = Precision.FP32
    include_setup: bool = False
    base: float = Field(10000.0, gt=0)
    grid: Optional[tuple[int, ...]] = None
    ablation: bool = False

    tile_rows: int = Field(128, ge=1)
    queue_depth: int = Field(4, ge=1)
    workers_stage1: int = Field(1, ge=1)
    workers_stage2: int = Field(1, ge=1)
    oracle_tile_rows: int = Field(64, ge=1)

    report: ReportFormat = "csv"
    out: Optional[Path] = None
    log_level: str = "INFO"

    @field_validator("mode", mode="before")
    @classmethod
    def _parse_mode(cls, value):
        return PairingMode.parse(value) if isinstance(value, str) else value

    @field_validator("precision", mode="before")
    @classmethod
    def _parse_precision(cls, value):
        return str(value) if isinstance(value, int) else value

    @field_validator("shape")
    @classmethod
    def _positive_shape(cls, value):
        if any(v <= 0 for v in value):
            raise ValueError(f"shape entries must be positive, got {list(value)}")
        return value

    @model_validator(mode="after")
    def _consistent(self) -> BenchConfig:
        d = self.shape[3]
        if self.dims is None:
            self.dims = (d,)
        # RopeError is a ValueError, so pydantic reports it like any other field error
        self.dims = check_dims(self.mode, self.dims, d)

        multi_axis = len(self.dims) > 1
        impls = list(dict.fromkeys(self.impls)) or default_impls(multi_axis)
        if multi_axis and Impl.REFERENCE in impls:
            raise ValueError(
                f"reference applies to single-axis dims only; use reference-nd for dims {list(self.dims)}"
            )
        baseline = Impl.REFERENCE_ND if multi_axis else Impl.REFERENCE
        if baseline in impls:
            impls.remove(baseline)
        self.impls = (baseline, *impls)

        if self.grid is not None:
            if len(self.grid) != len(self.dims) or math.prod(self.grid) != self.shape[2]:
                raise ValueError(
                    f"grid {list(self.grid)} must have {len(self.dims)} extents multiplying to S={self.shape[2]}"
                )
        if self.ablation and self.mode is PairingMode.INTERLEAVE_HALF:
            raise ValueError("--ablation does not support interleave-half")
        return self

    @property
    def baseline(self) -> Impl:
        return self.impls[0]

    @property
    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(
            tile_rows=self.tile_rows,
            queue_depth=self.queue_depth,
            workers_stage1=self.workers_stage1,
            workers_stage2=self.workers_stage2,
        )


def default_impls(multi_axis: bool) -> list[Impl]:
    baseline = Impl.REFERENCE_ND if multi_axis else Impl.REFERENCE
    return [baseline, *ROME_IMPLS, Impl.DENSE_ORACLE]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _impl_list(text: str) -> tuple[Impl, ...]:
    try:
        return tuple(Impl(v.strip()) for v in text.split(",") if v.strip())
    except ValueError:
        choices = ",".join(i.value for i in Impl)
        raise argparse.ArgumentTypeError(f"unknown impl in {text!r} (choose from {choices})") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rome-bench", description="Check and time RoPE/RoME execution paths.")
    p.add_argument("--config", type=Path, help="JSON file with BenchConfig fields; flags override it")
    p.add_argument("--preset", choices=sorted(PRESETS), help="named shape preset")
    p.add_argument("--shape", type=_int_list, help="B,N,S,D")
    p.add_argument("--mode", choices=[m.value for m in PairingMode])
    p.add_argument("--dims", type=_int_list, help="per-axis sub-dimensions, e.g. 44,44,40")
    p.add_argument("--grid", type=_int_list, help="per-axis position extents, product must equal S")
    p.add_argument("--impls", type=_impl_list, help="comma list of arms to run")
    p.add_argument("--iters", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--precision", choices=[v.value for v in Precision])
    p.add_argument("--base", type=float, help="frequency base")
    p.add_argument("--check", action=argparse.BooleanOptionalAction, default=None,
                   help="compare every arm with the dense oracle before timing")
    p.add_argument("--include-setup", action="store_true", default=None,
                   help="time angle-table and map construction too")
    p.add_argument("--ablation", action="store_true", default=None,
                   help="add the matrix/merge/fuse ablation arms")
    p.add_argument("--tile-rows", type=int)
    p.add_argument("--queue-depth", type=int)
    p.add_argument("--workers-stage1", type=int)
    p.add_argument("--workers-stage2", type=int)
    p.add_argument("--oracle-tile-rows", type=int, help="positions per dense-oracle tile")
    p.add_argument("--report", choices=["csv", "md", "json"])
    p.add_argument("--out", type=Path, help="report path (default: stdout)")
    p.add_argument("--log-level")
    return p


def _settings_defaults(s: Settings) -> dict:
    return {
        "shape": s.shape,
        "mode": s.mode,
        "dims": s.dims if s.dims and sum(s.dims) == s.shape[3] else None,
        "iters": s.iters,
        "warmup": s.warmup,
        "seed": s.seed,
        "precision": s.precision,
        "check": s.check,
        "base": s.base,
        "tile_rows": s.tile_rows,
        "queue_depth": s.queue_depth,
        "workers_stage1": s.workers_stage1,
        "workers_stage2": s.workers_stage2,
        "oracle_tile_rows": s.oracle_tile_rows,
        "log_level": s.log_level,
    }


def _first_error(exc: ValidationError) -> str:
    err = exc.errors()[0]
    loc = ".".join(str(part) for part in err["loc"])
    msg = err["msg"].removeprefix("Value error, ")
    return f"{loc}: {msg}" if loc else msg


def _overlay(data: dict, layer: dict) -> None:
    # a new shape without dims means one axis over the new width
    if "shape" in layer and "dims" not in layer:
        data["dims"] = None
    data.update(layer)


def parse_config(argv: Sequence[str] | None = None, settings: Settings | None = None) -> BenchConfig:
    """Flags > config file > preset > ROME_* settings > built-in defaults."""
    args = build_parser().parse_args(argv)
    data = _settings_defaults(settings or get_settings())

    if args.preset:
        _overlay(data, PRESETS[args.preset])
    if args.config:
        try:
            loaded = json.loads(args.config.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {args.config} is not valid JSON: {exc.msg}") from None
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {args.config} must hold a JSON object")
        _overlay(data, loaded)

    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("config", "preset")}
    _overlay(data, flags)

    try:
        cfg = BenchConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_first_error(exc)) from None
    logger.debug("Parsed config: %s", cfg.model_dump(mode="json"))
    return cfg
