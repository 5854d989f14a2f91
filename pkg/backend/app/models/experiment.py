from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import Any, Dict, List, Literal, Optional

from app.config import get_settings
from app.models.report import BoundReport

settings = get_settings()

ExperimentKind = Literal["tensors", "bundle_map", "bounds", "sharpness", "rescale"]
BoundName = Literal["variation", "vertical_component", "deviation", "holonomy"]
OutputFormat = Literal["struct", "table", "series"]

TOLERANCE_KEYS = ("commutation", "leakage", "transversality", "split", "bound", "invariance", "sharpness")

# Kind-specific keys; giving one a non-default value on another kind is a schema error
KIND_KEYS = {
    "bounds": ("bounds", "radius", "s_max"),
    "sharpness": ("amplitudes",),
    "rescale": ("scales",),
}


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ScenarioRef(StrictModel):
    name: str = Field(..., description="Registered scenario name")
    params: Dict[str, Any] = Field(default_factory=dict, description="Scenario parameters, validated by the scenario")


class ExperimentSpec(StrictModel):
    kind: ExperimentKind
    name: Optional[str] = Field(None, description="Label used in reports and file names (defaults to the kind)")
    grid: Optional[List[int]] = Field(None, description="Per-axis sample counts inside the scenario sample box")
    tolerances: Dict[str, float] = Field(default_factory=dict, description=f"Overrides for {', '.join(TOLERANCE_KEYS)}")
    seed: int = Field(0, description="Seed for any randomized sampling")

    bounds: List[BoundName] = Field(default_factory=lambda: ["variation", "vertical_component", "holonomy"])
    radius: float = Field(0.3, gt=0.0, description="Base geodesic length / loop size of the bound setups")
    s_max: float = Field(1.0, gt=0.0, description="Arclength range of the deviation bench")
    amplitudes: List[float] = Field(default_factory=list, description="Twist amplitudes swept by sharpness")
    scales: List[float] = Field(default_factory=lambda: [10.0], description="λ values of the rescaling check")

    @field_validator("grid")
    @classmethod
    def _positive_counts(cls, v):
        if v is not None and any(n < 1 for n in v):
            raise ValueError("grid counts must be positive")
        return v

    @field_validator("tolerances")
    @classmethod
    def _known_tolerances(cls, v):
        unknown = sorted(set(v) - set(TOLERANCE_KEYS))
        if unknown:
            raise ValueError(f"unknown tolerance key(s) {unknown}; allowed: {list(TOLERANCE_KEYS)}")
        if any(t < 0 for t in v.values()):
            raise ValueError("tolerances must be non-negative")
        return v

    @field_validator("scales")
    @classmethod
    def _positive_scales(cls, v):
        if any(lam <= 0 for lam in v):
            raise ValueError("scales must be positive")
        return v

    @model_validator(mode="after")
    def _kind_keys(self):
        for kind, keys in KIND_KEYS.items():
            if kind == self.kind:
                continue
            stray = [
                k for k in keys
                if k in self.model_fields_set
                and getattr(self, k) != type(self).model_fields[k].get_default(call_default_factory=True)
            ]
            if stray:
                raise ValueError(f"key(s) {stray} only apply to kind '{kind}'")
        return self

    @property
    def label(self) -> str:
        return self.name or self.kind


class OutputSpec(StrictModel):
    directory: str = Field(default_factory=lambda: settings.output_dir)
    formats: List[OutputFormat] = Field(default_factory=lambda: ["struct", "table", "series"])


class ExperimentConfig(StrictModel):
    """One run: a scenario and an ordered list of experiments on it"""
    scenario: ScenarioRef
    experiments: List[ExperimentSpec] = Field(default_factory=list)
    output: OutputSpec = Field(default_factory=OutputSpec)

    @model_validator(mode="after")
    def _unique_labels(self):
        labels = [e.label for e in self.experiments]
        duplicates = sorted({l for l in labels if labels.count(l) > 1})
        if duplicates:
            raise ValueError(f"experiment names must be unique, duplicated: {duplicates}")
        return self


class ExperimentResult(BaseModel):
    name: str
    kind: ExperimentKind
    status: Literal["ok", "violated", "error"]
    error: Optional[str] = None
    bound_reports: List[BoundReport] = Field(default_factory=list)
    tables: Dict[str, List[Dict[str, Any]]] = Field(default_factory=dict)
    series: Dict[str, Dict[str, List[float]]] = Field(default_factory=dict, description="Plot data: series name → columns")
    flags: List[str] = Field(default_factory=list, description="Informational findings, e.g. 'dΦ singular'")
    contract_violations: List[str] = Field(default_factory=list)
    step_sizes: Dict[str, float] = Field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "ok" and all(b.passed for b in self.bound_reports)


class RunReport(BaseModel):
    config: ExperimentConfig
    scenario: Dict[str, Any]
    assumptions: Dict[str, Any] = Field(default_factory=dict, description="Scenario hypotheses asserted, not checked")
    results: List[ExperimentResult] = Field(default_factory=list)
    versions: Dict[str, str] = Field(default_factory=dict)
    settings: Dict[str, Any] = Field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)
