"""Request and response schemas for the HTTP service.

ConfigModel mirrors CoreConfig field for field so a request can override
any subset of the hardware shape; semantic validation (power-of-two
thread counts and friends) stays in CoreConfig and surfaces through the
service's error handler rather than being duplicated here.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field

from ..config import CoreConfig


class ConfigModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    warps: int = 8
    threads: int = 16
    loop_levels: int = 4
    stream_units: int = 3
    stream_credits: int = 8
    cache_ports: int = 3
    cache_size: int = 16384
    line_size: int = 64
    cache_ways: int = 2
    cache_banks: int = 4
    hit_latency: int = 2
    miss_latency: int = 16
    mshr_per_bank: int = 8
    mem_size: int = 4 << 20
    shared_base: int = 0x700000
    shared_size: int = 16384
    shared_latency: int = 2
    alu_latency: int = 1
    fpu_latency: int = 4
    csr_latency: int = 1
    ibuffer_depth: int = 2
    stack_limit: int = 32
    cores: int = 1

    def to_config(self) -> CoreConfig:
        return CoreConfig(**self.model_dump())


class RunRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    bench: str
    variant: str = "full"
    point: int | None = None
    seed: int = 7
    config: ConfigModel = Field(default_factory=ConfigModel)


class MatrixRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    benches: list[str] | None = None
    variants: list[str] | None = None
    points: list[int] | None = None
    seed: int = 7
    workers: int | None = None
    config: ConfigModel = Field(default_factory=ConfigModel)


class ScalabilityRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    threads_axis: list[int] = [4, 8, 16, 32]
    warps_axis: list[int] = [2, 4, 8]
    seed: int = 7
    workers: int | None = None
    config: ConfigModel = Field(default_factory=ConfigModel)


class PortSweepRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    bench: str = "saxpy"
    variant: str = "full"
    ports: list[int] = [1, 2, 3]
    point: int | None = None
    seed: int = 7
    config: ConfigModel = Field(default_factory=ConfigModel)


class AssembleRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    source: str
    text_base: int = 0
