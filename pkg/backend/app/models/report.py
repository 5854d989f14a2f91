import math
from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import Dict, List, Optional, Tuple, Union

from app.config import get_settings

settings = get_settings()

Scalar = Union[bool, int, float, str]


class BoundReport(BaseModel):
    """One measured inequality: lhs ≤ rhs within tolerance"""
    model_config = ConfigDict(populate_by_name=True)

    name: str
    lhs: float
    rhs: float
    margin: float
    tolerance: float
    passed: bool = Field(..., alias="pass", serialization_alias="pass")
    parameters: Dict[str, float] = Field(default_factory=dict, description="Every constant the rhs consumes")
    conventions: Dict[str, str] = Field(default_factory=dict)
    notes: List[str] = Field(default_factory=list)
    series: Dict[str, List[float]] = Field(default_factory=dict, description="Plot data, equal-length columns")

    @model_validator(mode="after")
    def _consistent_pass(self):
        if self.passed != (self.lhs <= self.rhs + self.tolerance):
            raise ValueError("pass flag must equal lhs <= rhs + tolerance")
        return self

    @classmethod
    def evaluate(
        cls,
        name: str,
        lhs: float,
        rhs: float,
        parameters: Dict[str, float],
        tolerance: Optional[float] = None,
        **extra,
    ) -> "BoundReport":
        tolerance = settings.bound_tolerance if tolerance is None else tolerance
        lhs, rhs = float(lhs), float(rhs)
        return cls(
            name=name,
            lhs=lhs,
            rhs=rhs,
            margin=rhs - lhs,
            tolerance=float(tolerance),
            passed=bool(lhs <= rhs + tolerance),
            parameters={k: float(v) for k, v in parameters.items()},
            **extra,
        )


class PhiDiagnostics(BaseModel):
    point: List[float]
    phi_point: List[float]
    commutation_residual: float = Field(..., description="h-distance between f2(Φ(x)) and f1(x)")
    singular_values: List[float] = Field(..., description="Singular values of dΦ in the g metrics, descending")
    vertical_leakage: float
    horizontal_top_norm: float
    horizontal_bot_range: Tuple[float, float]
    measured_epsilon: float
    fitted_top_constant: Optional[float] = None
    jacobian: List[List[float]] = Field(default_factory=list, description="dΦ in chart components")

    @property
    def bilipschitz_log(self) -> float:
        return math.log(self.singular_values[0] / self.singular_values[-1])
