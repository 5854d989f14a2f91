from pydantic import BaseModel, ConfigDict, Field
from typing import Any, Dict


class ScenarioParams(BaseModel):
    model_config = ConfigDict(extra="forbid")


class FlatTorusPairParams(ScenarioParams):
    a: float = Field(0.3, ge=0.0, lt=0.9, description="Twist amplitude of f2 = θ₂ + a sin θ₂")


class HopfParams(ScenarioParams):
    rotation: float = Field(0.05, ge=0.0, le=0.2, description="Angle of the S² rotation defining f2 = R∘f1")


class WarpedProductParams(ScenarioParams):
    b: float = Field(0.5, gt=-0.9, le=2.0, description="Warping w(r) = 1 + b r²")


class Torus3OrthogonalParams(ScenarioParams):
    pass


class PlaneCurvesParams(ScenarioParams):
    radius: float = Field(1.0, gt=0.2, le=5.0, description="Radius of the circle tangent to the line")


class PerturbedTorusParams(ScenarioParams):
    amplitude: float = Field(0.05, gt=0.0, le=0.2, description="ε_p in ψ = ε_p sin θ₁ sin θ₂")


class ScenarioInfo(BaseModel):
    name: str
    description: str
    params_schema: Dict[str, Any]
