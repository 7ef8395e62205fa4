"""Run configuration shared by the command-line entry points."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from llens.approximation import HORIZON_CEILING
from llens.errors import DomainError
from llens.precision import PrecisionConfig


@dataclass(frozen=True)
class RunConfig:
    bits: int = 192
    guard_bits: int = 32
    # log2 of the truncation target; None means "match the working precision"
    target_log2: int | None = None
    horizon_ceiling: int = HORIZON_CEILING
    workers: int = 1
    deterministic: bool = True
    output_dir: Path = field(default_factory=lambda: Path("."))
    use_cache: bool = True

    def __post_init__(self):
        # raises on bad bit counts
        self.precision()
        if self.workers < 1:
            raise DomainError("workers must be at least 1")
        if self.horizon_ceiling < 1:
            raise DomainError("horizon ceiling must be positive")
        if self.target_log2 is not None and not -self.bits <= self.target_log2 < 0:
            raise DomainError(f"truncation target 2^{self.target_log2} is outside (2^-{self.bits}, 1)")

    def precision(self) -> PrecisionConfig:
        return PrecisionConfig(self.bits, self.guard_bits)

    @property
    def eps(self):
        if self.target_log2 is None:
            return None
        return self.precision().ctx.ldexp(1, self.target_log2)

    @property
    def effective_workers(self) -> int:
        return min(self.workers, os.cpu_count() or 1)
