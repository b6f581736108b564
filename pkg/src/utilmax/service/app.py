"""FastAPI wiring over the pure handlers.

Domain errors surface as 422 responses carrying the error class name, so
clients can distinguish bad inputs from genuine solver findings such as
arbitrage or an unbounded objective.
"""
from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..errors import UtilmaxError
from . import handlers
from .schemas import (
    ClassifyRequest,
    ClassifyResponse,
    DualityCheckRequest,
    DualityCheckResponse,
    OrliczNormRequest,
    OrliczNormResponse,
    ReproduceRequest,
    RunReport,
    ScenarioDocument,
    TruncationRequest,
    TruncationResponse,
)

app = FastAPI(title="utilmax", version=__version__)


def _guard(fn, *args):
    try:
        return fn(*args)
    except UtilmaxError as e:
        raise HTTPException(
            status_code=422, detail={"error": type(e).__name__, "message": str(e)}
        )


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/solve", response_model=RunReport)
def solve(doc: ScenarioDocument) -> RunReport:
    return _guard(handlers.run_scenario, doc)


@app.post("/duality-check", response_model=DualityCheckResponse)
def duality_check(req: DualityCheckRequest) -> DualityCheckResponse:
    return _guard(handlers.run_duality_check, req)


@app.post("/orlicz/norm", response_model=OrliczNormResponse)
def orlicz_norm(req: OrliczNormRequest) -> OrliczNormResponse:
    return _guard(handlers.run_orlicz_norm, req)


@app.post("/orlicz/classify", response_model=ClassifyResponse)
def orlicz_classify(req: ClassifyRequest) -> ClassifyResponse:
    return _guard(handlers.run_orlicz_classify, req)


@app.post("/reproduce/{name}")
def reproduce(name: str, req: ReproduceRequest | None = None) -> dict:
    return _guard(handlers.run_reproduce, name, req or ReproduceRequest())


@app.post("/truncation-study", response_model=TruncationResponse)
def truncation(req: TruncationRequest) -> TruncationResponse:
    return _guard(handlers.run_truncation_study, req)
