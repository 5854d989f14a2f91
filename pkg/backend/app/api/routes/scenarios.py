"""
Scenario API Routes

Lists registered scenarios and describes a built one.
"""

from typing import List
from fastapi import APIRouter, HTTPException
from app.models.scenario import ScenarioInfo
from app.services.errors import LabError, ScenarioNotFoundError
from app.services.runner import scenario_summary
from app.services.scenarios import build_scenario, list_scenarios

router = APIRouter()


@router.get("/scenarios", response_model=List[ScenarioInfo])
def get_scenarios():
    """Registered scenarios with their parameter schemas"""
    return list_scenarios()


@router.get("/scenarios/{name}")
def describe_scenario(name: str):
    """Scenario built with default parameters: maps, trust radius, constants and asserted hypotheses"""
    try:
        scenario = build_scenario(name, validate=False)
    except ScenarioNotFoundError as e:
        raise HTTPException(status_code=404, detail=str(e))
    except LabError as e:
        raise HTTPException(status_code=400, detail=str(e))
    return {**scenario_summary(scenario), "assumptions": scenario.asserted}
