"""FastAPI service exposing the trainers, evaluator and renderer.

Run it with `hebbcl serve` or `uvicorn hebbcl.service.app:app`. Training
endpoints are synchronous: the response returns when the run (and its
checkpoint) is complete, so point long jobs at a client without a read
timeout. Each request trains on its own network instance; no mutable state
is shared between requests.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import CapacityError, CheckpointFormatError, DataFormatError, \
    DatasetMissingError, InvalidArgumentError, InvalidStateError
from . import handlers
from .schemas import AblateRequest, AblateResponse, EvalRequest, EvalResponse, \
    HealthResponse, TrainSupervisedRequest, TrainSupervisedResponse, \
    TrainUnsupervisedRequest, TrainUnsupervisedResponse, VisualizeRequest, \
    VisualizeResponse

ERROR_STATUS = {
    InvalidArgumentError: 422,
    CheckpointFormatError: 422,
    DataFormatError: 422,
    DatasetMissingError: 404,
    InvalidStateError: 409,
    CapacityError: 409,
}

app = FastAPI(
    title="hebbcl",
    version=__version__,
    description="Hebbian continual-learning training and evaluation service",
)


def _register_error_handlers(app: FastAPI) -> None:
    for exc_type, status in ERROR_STATUS.items():
        def handler(request: Request, exc: Exception, status=status):
            return JSONResponse(
                status_code=status,
                content={"error": type(exc).__name__, "detail": str(exc)},
            )
        app.add_exception_handler(exc_type, handler)


_register_error_handlers(app)


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/train/unsupervised", response_model=TrainUnsupervisedResponse)
def train_unsupervised(req: TrainUnsupervisedRequest) -> TrainUnsupervisedResponse:
    return handlers.run_train_unsupervised(req)


@app.post("/train/supervised", response_model=TrainSupervisedResponse)
def train_supervised(req: TrainSupervisedRequest) -> TrainSupervisedResponse:
    return handlers.run_train_supervised(req)


@app.post("/eval", response_model=EvalResponse)
def evaluate(req: EvalRequest) -> EvalResponse:
    return handlers.run_eval(req)


@app.post("/visualize", response_model=VisualizeResponse)
def visualize(req: VisualizeRequest) -> VisualizeResponse:
    return handlers.run_visualize(req)


@app.post("/ablate", response_model=AblateResponse)
def ablate(req: AblateRequest) -> AblateResponse:
    return handlers.run_ablate(req)
