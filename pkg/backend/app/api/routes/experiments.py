"""
Experiment API Routes

Validates and runs experiment configs. Runs are synchronous; FastAPI
executes these handlers in its worker threadpool.
"""

from typing import Optional
from fastapi import APIRouter, HTTPException, Query
from app.models.experiment import ExperimentConfig
from app.services.errors import LabError
from app.services.report_writer import bound_rows, emit
from app.services.runner import run, scenario_summary
from app.services.scenarios import build_scenario

router = APIRouter()


@router.post("/experiments/validate")
def validate_experiment(config: ExperimentConfig):
    """
    Schema errors are rejected by FastAPI (422) before reaching here;
    this additionally resolves the scenario and its parameters.
    """
    try:
        scenario = build_scenario(config.scenario.name, config.scenario.params, validate=False)
    except LabError as e:
        raise HTTPException(status_code=400, detail=str(e))
    return {
        "valid": True,
        "scenario": scenario_summary(scenario),
        "experiments": [{"name": e.label, "kind": e.kind} for e in config.experiments],
    }


@router.post("/experiments/run")
def run_experiment(
    config: ExperimentConfig,
    jobs: Optional[int] = Query(None, ge=1, description="Worker threads"),
    write: bool = Query(False, description="Also write the configured output files"),
):
    """Run a config and return the full report plus the flat bound table"""
    try:
        report = run(config, jobs=jobs)
        files = [str(p) for p in emit(report)] if write else []
    except LabError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        print(f"❌ Experiment run failed: {e}")
        raise HTTPException(status_code=500, detail=str(e))
    return {
        "passed": report.passed,
        "report": report.model_dump(mode="json", by_alias=True),
        "bounds": bound_rows(report),
        "files": files,
    }
