from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from app.api.routes import experiments, scenarios
from app.services.errors import LabError
from app.services.runner import LAB_VERSION
from app.config import get_settings

settings = get_settings()

app = FastAPI(
    title="Submersion Lab",
    description="Numerical experiments on Riemannian submersions: tensors, bundle maps and quantitative bounds",
    version=LAB_VERSION,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.exception_handler(LabError)
async def lab_error_handler(request: Request, exc: LabError):
    return JSONResponse(status_code=400, content={"detail": f"{type(exc).__name__}: {exc}"})


app.include_router(scenarios.router, prefix="/api", tags=["Scenarios"])
app.include_router(experiments.router, prefix="/api", tags=["Experiments"])


@app.get("/")
def root():
    return {"message": "Submersion Lab", "status": "running"}


@app.get("/health")
def health():
    return {"status": "healthy", "version": LAB_VERSION, "jobs": settings.lab_jobs}
