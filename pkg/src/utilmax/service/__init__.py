"""HTTP facade: pydantic schemas, pure handlers, FastAPI wiring.

The handlers are plain functions on the schema types so the command-line
front end can call them in-process; the FastAPI app in ``app`` is a thin
route layer over the same functions.
"""
from .schemas import (
    ClassifyRequest,
    DualityCheckRequest,
    DualityCheckResponse,
    LossBoundSpec,
    MarketSpec,
    OrliczNormRequest,
    OrliczNormResponse,
    ReproduceRequest,
    RunReport,
    ScenarioDocument,
    SolverSpec,
    TruncationRequest,
    TruncationResponse,
    UtilitySpec,
)
from .handlers import (
    build_market,
    build_utility,
    run_duality_check,
    run_orlicz_classify,
    run_orlicz_norm,
    run_reproduce,
    run_scenario,
    run_truncation_study,
)

__all__ = [
    "ClassifyRequest",
    "DualityCheckRequest",
    "DualityCheckResponse",
    "LossBoundSpec",
    "MarketSpec",
    "OrliczNormRequest",
    "OrliczNormResponse",
    "ReproduceRequest",
    "RunReport",
    "ScenarioDocument",
    "SolverSpec",
    "TruncationRequest",
    "TruncationResponse",
    "UtilitySpec",
    "build_market",
    "build_utility",
    "run_duality_check",
    "run_orlicz_classify",
    "run_orlicz_norm",
    "run_reproduce",
    "run_scenario",
    "run_truncation_study",
]
