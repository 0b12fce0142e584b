"""Pydantic request/response models for the HTTP service.

The nested config models mirror the JSON file formats one-to-one, so a file
that the CLI accepts is exactly the object the service accepts inline.  The
heavy validation (ellipticity, parameter corridors, ...) stays in the core
constructors; these models only pin shapes and defaults.
"""

from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field


class TrigPolyConfig(BaseModel):
    """Real-trig-basis coefficients; all lists optional, missing entries zero."""

    model_config = ConfigDict(extra="forbid")

    cos: list[float] = Field(default_factory=list)
    sin: list[float] = Field(default_factory=list)
    cos_imag: list[float] = Field(default_factory=list)
    sin_imag: list[float] = Field(default_factory=list)


class CoeffEntry(TrigPolyConfig):
    """One coefficient of the operator: order alpha plus its trig polynomial."""

    alpha: int


class SymbolConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    m: int
    n: int = 1
    coeffs: list[CoeffEntry]


class PerturbationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    rho: float
    s: float
    eps: float
    beta: float = 0.0
    cutoff_J: Union[int, Literal["auto"]] = "auto"


class SectorConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    theta1: float
    theta2: float
    r1: float
    r2: float
    g: Union[float, TrigPolyConfig] = 1.0


class PlanConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    k_min: int
    k_max: int
    trials: int
    seed: int
    modes_max: int = 2048
    n0: int = 1
    delta: float = 0.05
    workers: int = 1


# ---------------------------------------------------------------- requests

class SymbolCheckRequest(BaseModel):
    symbol: SymbolConfig
    theta0: float = 0.0
    n0: int = 1


class VolumeRequest(BaseModel):
    symbol: SymbolConfig
    sector: SectorConfig
    mc_samples: int = 0
    seed: int = 0


class SampleRequest(BaseModel):
    pert: PerturbationConfig
    seed: int = 0


class SpectrumRequest(BaseModel):
    symbol: SymbolConfig
    pert: Optional[PerturbationConfig] = None
    seed: int = 0
    modes: int = 64
    sector: Optional[SectorConfig] = None


class WeylRequest(BaseModel):
    symbol: SymbolConfig
    pert: Optional[PerturbationConfig] = None
    sector: SectorConfig
    plan: PlanConfig


class FamilySweepRequest(BaseModel):
    symbol: SymbolConfig
    pert: Optional[PerturbationConfig] = None
    sectors: list[SectorConfig]
    plan: PlanConfig


class TailBoundRequest(BaseModel):
    trials: int = 100_000
    seed: int = 20260815
    c0: Optional[float] = None
    single_sigma: float = 1.0
    single_t: float = 2.0


class Sc1Request(BaseModel):
    pert: PerturbationConfig = PerturbationConfig(rho=2.0, s=0.75, eps=0.1, beta=0.0)
    m: int = 2
    h_list: list[float] = Field(default_factory=lambda: [0.9, 0.7, 0.5, 0.35])
    trials: int = 10_000
    seed: int = 20260815


class CalibrateRequest(BaseModel):
    trials: int = 100_000
    seed: int = 20260815


# --------------------------------------------------------------- responses

class HealthResponse(BaseModel):
    status: str
    version: str


class SymbolCheckResponse(BaseModel):
    verdict: Literal["holds", "fails", "inconclusive"]
    holds: Optional[bool]
    report: dict


class VolumeResponse(BaseModel):
    volume: float
    prediction: float
    mc_volume: Optional[float] = None
    mc_sigma: Optional[float] = None
    mc_samples: int = 0


class PotentialRow(BaseModel):
    j: int
    mu: float
    re: float
    im: float


class SampleResponse(BaseModel):
    rows: list[PotentialRow]
    hs_norm: float
    s: float
    cutoff_J: int
    seed: int


class SpectrumRow(BaseModel):
    re: float
    im: float
    trusted: bool
    residual: float


class SectorCount(BaseModel):
    count: int
    boundary_grazing: bool
    untrusted_in_sector: int
    prediction: float


class SpectrumResponse(BaseModel):
    eigenvalues: list[SpectrumRow]
    modes_K: int
    radius_max: float
    n_trusted: int
    contention: int
    sector_count: Optional[SectorCount] = None


class WeylResponse(BaseModel):
    report: dict
    fit: dict
    flags: dict
    largest_annulus_rel_error: Optional[float]


class FamilySweepResponse(BaseModel):
    members: list[dict]
    worst: dict


class TailBoundResponse(BaseModel):
    c0: float
    calibrated: bool
    all_dominated: bool
    table: list[dict]
    single_gaussian: dict


class Sc1Response(BaseModel):
    rows: list[dict]
    slope: Optional[float]
    intercept: Optional[float]
    monotone: bool
    report: dict


class CalibrateResponse(BaseModel):
    c0: float
    calibrated: bool
    default_c0: float
    trials: int
    seed: int
    table: list[dict]
