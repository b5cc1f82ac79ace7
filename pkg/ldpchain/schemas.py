from __future__ import annotations

from typing import Annotated, Any, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ldpchain.config import settings

TASKS = (
    "simulate",
    "classes",
    "admissible",
    "verify-maps",
    "estimate-rate",
    "dv-bound",
    "verify-inequalities",
    "lv-demo",
    "escape-probe",
)

MAP_KINDS = (
    "slicing",
    "slicing_list",
    "stitching",
    "coupling",
    "fine_coupling",
    "decoupling",
    "fine_decoupling",
    "lemma_ball",
    "lemma_mixture",
    "lemma_restriction",
)


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ==== Models ====


class MapSpec(StrictModel):
    """Nondecreasing map f of the perturbed system."""

    kind: Literal["identity", "shift", "piecewise_linear", "two_class"] = "identity"
    shift: float = 0.0
    knots: list[tuple[float, float]] | None = None

    @model_validator(mode="after")
    def _check_knots(self) -> MapSpec:
        if self.kind == "piecewise_linear":
            if not self.knots or len(self.knots) < 2:
                raise ValueError("piecewise_linear needs at least two knots")
            xs = [k[0] for k in self.knots]
            if any(b <= a for a, b in zip(xs, xs[1:])):
                raise ValueError("knot abscissae must be strictly increasing")
        return self


class IidModelSpec(StrictModel):
    name: Literal["iid"] = "iid"
    low: float = 0.0
    high: float = 1.0
    dim: int = Field(default=1, ge=1, le=3)


class UniformStepModelSpec(StrictModel):
    name: Literal["uniform_step"] = "uniform_step"
    low: float = 0.0
    high: float = 1.0
    init_low: float = 0.0
    init_high: float = 1.0


class MonotoneWalkModelSpec(StrictModel):
    name: Literal["monotone_walk"] = "monotone_walk"
    alpha: float = Field(default=0.5, gt=0.0, lt=1.0)
    init_low: float = 0.0
    init_high: float = 1.0


class PerturbedModelSpec(StrictModel):
    name: Literal["perturbed"] = "perturbed"
    f: MapSpec = Field(default_factory=MapSpec)
    phi: Literal["epanechnikov", "uniform", "triangular"] = "epanechnikov"
    init_low: float = -1.0
    init_high: float = 4.0


class LotkaVolterraModelSpec(StrictModel):
    name: Literal["lotka_volterra"] = "lotka_volterra"
    d: int = Field(default=2, ge=1, le=3)
    a: list[list[float]] = Field(default_factory=lambda: [[1.0, 0.5], [0.5, 1.0]])
    r: list[float] = Field(default_factory=lambda: [1.0, 1.0])
    noise: Literal["triangular", "exponential"] = "triangular"
    integrator_step: float | None = None
    init_low: float = -0.5
    init_high: float = 1.0

    @model_validator(mode="after")
    def _check_shapes(self) -> LotkaVolterraModelSpec:
        if len(self.r) != self.d or len(self.a) != self.d or any(len(row) != self.d for row in self.a):
            raise ValueError("a must be d x d and r of length d")
        return self


ModelSpec = Annotated[
    Union[IidModelSpec, UniformStepModelSpec, MonotoneWalkModelSpec, PerturbedModelSpec, LotkaVolterraModelSpec],
    Field(discriminator="name"),
]


# ==== Measures ====


class MeasureSpec(StrictModel):
    """Target law: uniform density on boxes, or atoms (never admissible)."""

    kind: Literal["density", "atoms"] = "density"
    boxes: list[tuple[list[float], list[float]]] = Field(default_factory=list)
    masses: list[float] | None = None
    atoms: list[list[float]] = Field(default_factory=list)
    weights: list[float] | None = None
    proxy_cells: int = Field(default=16, ge=1)

    @model_validator(mode="after")
    def _check(self) -> MeasureSpec:
        if self.kind == "density" and not self.boxes:
            raise ValueError("a density needs at least one box")
        if self.kind == "atoms" and not self.atoms:
            raise ValueError("an atomic measure needs at least one atom")
        return self


# ==== Task parameters ====


class GridSpec(StrictModel):
    lows: list[float]
    highs: list[float]
    cells: list[int]

    @model_validator(mode="after")
    def _check(self) -> GridSpec:
        if not (len(self.lows) == len(self.highs) == len(self.cells)) or len(self.lows) not in (1, 2):
            raise ValueError("grid must be 1-D or 2-D with matching lows/highs/cells")
        return self


class ClassesParams(StrictModel):
    method: Literal["analytic", "grid"] = "analytic"
    domain: tuple[float, float] = (-1.0, 4.0)
    resolution: float = Field(default=1e-3, gt=0.0)
    beta_support: tuple[float, float] | None = None
    grid: GridSpec | None = None
    k_max: int = Field(default=4, ge=1)
    samples: int = Field(default=2000, ge=1)


class SimulateParams(StrictModel):
    n: int = Field(default=20, ge=0)
    paths: int = Field(default=10, ge=1)
    start: list[float] | None = None


class AdmissibleParams(StrictModel):
    classes: ClassesParams = Field(default_factory=ClassesParams)
    measures: dict[str, MeasureSpec]


class VerifyMapsParams(StrictModel):
    kinds: list[str] = Field(default_factory=lambda: list(MAP_KINDS))
    instances: int = Field(default=1000, ge=1)
    members: int = Field(default=3, ge=1)
    dump_limit: int = Field(default=20, ge=0)

    @field_validator("kinds")
    @classmethod
    def _known(cls, v: list[str]) -> list[str]:
        unknown = sorted(set(v) - set(MAP_KINDS))
        if unknown:
            raise ValueError(f"unknown map checks: {unknown}")
        return v


class EstimateRateParams(StrictModel):
    target: MeasureSpec
    deltas: list[float]
    ns: list[int]
    samples: int = Field(default=10_000, ge=1)

    @field_validator("deltas", "ns")
    @classmethod
    def _increasing(cls, v: list) -> list:
        if not v or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("grid must be nonempty and strictly increasing")
        return v


class DvBoundParams(StrictModel):
    target: MeasureSpec
    box_low: list[float]
    box_high: list[float]
    cells: int = Field(default=64, ge=1)
    eps: float = Field(default=1e-3, gt=0.0, lt=1.0)
    sweeps: int = Field(default=5, ge=1)
    mc_samples: int = Field(default=4000, ge=1)


class FrameParams(StrictModel):
    class_subset: list[int]
    quantile: float = Field(default=0.9, gt=0.0, le=1.0)
    delta: float = Field(default=0.05, ge=0.0)
    tau_max: int = Field(default=2, ge=1)
    probes_per_class: int = Field(default=3, ge=1)
    samples: int = Field(default=2000, ge=1)
    # Compact cores from target measures; the class region is used when absent.
    cores: list[MeasureSpec] = Field(default_factory=list)


class CouplingCheckParams(StrictModel):
    N: int = Field(default=2, ge=1)
    n: int = Field(default=8, ge=1)
    T: int = Field(default=40, ge=1)
    center: MeasureSpec
    radius: float = Field(default=0.5, gt=0.0)


class SupermultiplicativeCheckParams(StrictModel):
    mu1: MeasureSpec
    mu2: MeasureSpec
    eps: float = Field(gt=0.0, lt=1.0)
    delta: float = Field(gt=0.0)
    n: int = Field(ge=1)
    T: int = Field(ge=1)


class DecouplingCheckParams(StrictModel):
    partition: dict[int, Literal[1, 2]]
    n: int = Field(ge=1)
    eps: float = Field(gt=0.0)
    lambdas: tuple[float, float]
    center1: MeasureSpec | None = None
    radius1: float = 1.0
    center2: MeasureSpec | None = None
    radius2: float = 1.0


class VerifyInequalitiesParams(StrictModel):
    classes: ClassesParams = Field(default_factory=ClassesParams)
    frame: FrameParams
    samples: int = Field(default=100_000, ge=1)
    coupling: CouplingCheckParams | None = None
    supermultiplicative: SupermultiplicativeCheckParams | None = None
    decoupling: DecouplingCheckParams | None = None


class LvDemoParams(StrictModel):
    mu1: MeasureSpec
    mu2: MeasureSpec
    delta: float = Field(default=0.05, gt=0.0)
    ns: list[int] = Field(default_factory=lambda: [5, 10, 15, 20])
    samples: int = Field(default=100_000, ge=1)
    beta_box: tuple[float, float] | None = None


class EscapeProbeParams(StrictModel):
    U: tuple[float, float] = (0.0, 1.0)
    kappa: float = Field(default=0.5, gt=0.0)
    ns: list[int] = Field(default_factory=lambda: [5, 10, 15, 20])
    samples: int = Field(default=1_000_000, ge=1)


TASK_PARAMS: dict[str, type[StrictModel]] = {
    "simulate": SimulateParams,
    "classes": ClassesParams,
    "admissible": AdmissibleParams,
    "verify-maps": VerifyMapsParams,
    "estimate-rate": EstimateRateParams,
    "dv-bound": DvBoundParams,
    "verify-inequalities": VerifyInequalitiesParams,
    "lv-demo": LvDemoParams,
    "escape-probe": EscapeProbeParams,
}


class ExperimentConfig(StrictModel):
    task: Literal[TASKS]  # type: ignore[valid-type]
    model: ModelSpec = Field(default_factory=IidModelSpec)
    seed: int = Field(ge=0, lt=2**64)
    workers: int = Field(default_factory=lambda: settings.ldp_workers, ge=1)
    output_dir: str = Field(default_factory=lambda: settings.ldp_output_dir)
    params: Any = Field(default_factory=dict)

    @model_validator(mode="after")
    def _typed_params(self) -> ExperimentConfig:
        schema = TASK_PARAMS[self.task]
        if not isinstance(self.params, schema):
            self.params = schema.model_validate(self.params)
        return self

    def resolved(self) -> dict[str, Any]:
        """Fully resolved configuration, as embedded in every artifact."""
        return self.model_dump(mode="json")
