"""JSON schema for experiment configs, grids and simulation reports.

Every model forbids unknown keys so a typo fails before any computation.
``ConfigModel.model_json_schema()`` is the published schema.
"""

from __future__ import annotations

import hashlib
import json
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

from .ensembles import EnsembleSpec, distribution_from_dict
from .errors import ConfigError
from .indexing import GoodFamily
from .montecarlo import ExperimentSpec, StatisticRequest


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# -- entry laws --------------------------------------------------------------


class GaussianRealModel(_Strict):
    kind: Literal["GaussianReal"]
    variance: float


class ThreePointRealModel(_Strict):
    kind: Literal["ThreePointReal"]
    a: float
    p: float


class RademacherScaledModel(_Strict):
    kind: Literal["RademacherScaled"]
    scale: float


class GaussianComplexModel(_Strict):
    kind: Literal["GaussianComplex"]
    variance: float


class UniformPhaseRadialModel(_Strict):
    kind: Literal["UniformPhaseRadial"]
    a: float
    p: float


DistributionModel = Annotated[
    Union[
        GaussianRealModel,
        ThreePointRealModel,
        RademacherScaledModel,
        GaussianComplexModel,
        UniformPhaseRadialModel,
    ],
    Field(discriminator="kind"),
]


class EnsembleModel(_Strict):
    beta: Literal[1, 2]
    offdiag: DistributionModel
    diag: DistributionModel

    def build(self):
        return EnsembleSpec(
            self.beta,
            distribution_from_dict(self.offdiag.model_dump()),
            distribution_from_dict(self.diag.model_dump()),
        )


# -- sequences -----------------------------------------------------------------


class IdentityModel(_Strict):
    kind: Literal["Identity"]


class ArithmeticModel(_Strict):
    kind: Literal["Arithmetic"]
    stride: int = Field(ge=1)
    offset: int = Field(default=0, ge=0)


class BlockSwapModel(_Strict):
    kind: Literal["BlockSwap"]
    L: Optional[int] = Field(default=None, ge=1)


class ExplicitModel(_Strict):
    kind: Literal["Explicit"]
    listed: list[int]


SequenceModel = Annotated[
    Union[IdentityModel, ArithmeticModel, BlockSwapModel, ExplicitModel],
    Field(discriminator="kind"),
]


class StatisticModel(_Strict):
    label: str
    power: int = Field(ge=1)
    kind: Literal["trace", "chebyshev"] = "trace"
    sequence: Optional[str] = None
    b: Optional[float] = Field(default=None, gt=0)
    size: Optional[int] = Field(default=None, ge=1)
    indices: Optional[list[int]] = None


class RunModel(_Strict):
    L: int = Field(ge=1)
    replicates: int = Field(default=2, ge=1)
    seed: int = 0
    threads: int = Field(default=1, ge=1)


class QuadratureModel(_Strict):
    nodes: int = Field(default=256, ge=8)
    tolerance: float = Field(default=1e-8, gt=0)


class ConfigModel(_Strict):
    ensemble: Optional[EnsembleModel] = None
    family: dict[str, SequenceModel] = Field(default_factory=dict)
    statistics: list[StatisticModel] = Field(default_factory=list)
    run: RunModel
    quadrature: QuadratureModel = Field(default_factory=QuadratureModel)

    def build_family(self):
        return GoodFamily.from_dict(
            {label: seq.model_dump(exclude_none=True) for label, seq in self.family.items()},
            L=self.run.L,
        )

    def build_experiment(self):
        if self.ensemble is None:
            raise ConfigError("an ensemble block is required for theory and simulate")
        family = self.build_family()
        stats = [
            StatisticRequest(
                label=s.label,
                power=s.power,
                kind=s.kind,
                sequence=s.sequence,
                b=s.b,
                size=s.size,
                indices=tuple(s.indices) if s.indices is not None else None,
            )
            for s in self.statistics
        ]
        for s in stats:
            if s.sequence is not None and s.sequence not in family.sequences:
                raise ConfigError(f"statistic {s.label!r} references unknown sequence {s.sequence!r}")
        return ExperimentSpec(
            self.ensemble.build(), family, stats, self.run.L, self.run.replicates, self.run.seed
        )

    def content_hash(self):
        """SHA-256 of the canonical config; the thread count is excluded."""
        data = self.model_dump(mode="json")
        data["run"].pop("threads", None)
        text = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


# -- grids ---------------------------------------------------------------------


class GridPointModel(_Strict):
    sheet: str
    re: float
    im: float


class GridModel(_Strict):
    points: list[GridPointModel]


# -- reports -------------------------------------------------------------------


class SummaryModel(_Strict):
    labels: list[str]
    kinds: list[Literal["trace", "chebyshev"]]
    powers: list[int]
    sizes: list[int]
    L: int
    M: int
    seed: int
    beta: int
    mean: list[Optional[float]]
    variance: list[Optional[float]]
    skewness: list[Optional[float]]
    excess_kurtosis: list[Optional[float]]
    covariance: list[list[Optional[float]]]
    covariance_se: list[list[Optional[float]]]
    degenerate: list[bool]


class MetadataModel(_Strict):
    version: str
    spec_hash: str
    seed: int
    replicates: int
    L: int
    timestamp: Optional[str] = None


class SimReportModel(_Strict):
    metadata: MetadataModel
    summary: Optional[SummaryModel] = None


def load_config(text):
    return ConfigModel.model_validate_json(text)


def load_grid(text):
    data = json.loads(text)
    if isinstance(data, list):
        data = {"points": data}
    return GridModel.model_validate(data)


__all__ = [
    "ConfigModel",
    "EnsembleModel",
    "GridModel",
    "GridPointModel",
    "SimReportModel",
    "SummaryModel",
    "MetadataModel",
    "load_config",
    "load_grid",
]
