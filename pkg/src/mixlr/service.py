"""HTTP facade over the model store and case evaluation.

Endpoints (JSON, snake_case, floats rendered with 17 significant digits so a
response is bit-identical to the library call that produced it):

    POST /api/v1/evaluate   evaluate a case observation
    GET  /api/v1/models     list stored model variants
    GET  /api/v1/panel      marker panel and fluid enumeration

Error bodies carry a machine-readable code plus human-readable text.
"""
from __future__ import annotations

from typing import Any

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from pydantic import BaseModel, ConfigDict, Field

from . import __version__, _jsonutil
from .augmentation import AugmentationError, BackgroundLevels
from .calibrate import CalibrationError
from .casework import CaseError, CaseObservation, ModelStore, ModelVariant, evaluate_case
from .classify import ConvergenceError
from .metrics import DEFAULT_LR_CAP
from .profiles import BodyFluid, MarkerPanel, ProfileError, sorted_fluids


class JsonResponse17(Response):
    media_type = "application/json"

    def render(self, content: Any) -> bytes:
        return _jsonutil.dumps(content).encode("utf-8")


class MarkerCount(BaseModel):
    detected: int
    total: int


class EvaluateRequest(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    interest: list[str] = Field(min_length=1)
    markers: dict[str, MarkerCount]
    background_overrides: dict[str, float] = Field(default_factory=dict)
    model_id: str | None = None
    cap: float = DEFAULT_LR_CAP


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        self.message = message
        super().__init__(message)


def _error_response(status: int, code: str, message: str) -> JsonResponse17:
    return JsonResponse17({"error": {"code": code, "message": message}},
                          status_code=status)


def _variant_summary(variant: ModelVariant) -> dict:
    return {
        "variant_id": variant.variant_id,
        "strategy": variant.strategy,
        "dichotomized": variant.dichotomized,
        "interest": [f.value for f in sorted_fluids(variant.interest)],
        "backgrounds": {f.value: p for f, p in variant.backgrounds.levels},
        "training_seed": variant.training_seed,
        "coefficients": {
            "intercept": float(variant.model.intercept),
            "per_marker": {m: float(b) for m, b in
                           zip(variant.panel.markers, variant.model.coefficients)},
        },
    }


def create_app(store: ModelStore, panel: MarkerPanel | None = None,
               ui_dir: str | None = None) -> FastAPI:
    panel = panel or MarkerPanel()
    app = FastAPI(title="mixlr evaluation service", version=__version__,
                  default_response_class=JsonResponse17)

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return _error_response(400, "malformed_request", str(exc.errors()[:3]))

    @app.exception_handler(ServiceError)
    async def service_error(request: Request, exc: ServiceError):
        return _error_response(exc.status, exc.code, exc.message)

    @app.get("/api/v1/panel")
    def get_panel() -> dict:
        return {
            "markers": list(panel.markers),
            "housekeeping": list(panel.housekeeping),
            "threshold_rfu": panel.threshold_rfu,
            "fluids": [f.value for f in BodyFluid],
            "replicate_totals": [2, 3, 4],
        }

    @app.get("/api/v1/models")
    def get_models() -> dict:
        return {"models": [_variant_summary(v) for v in store.list()]}

    @app.post("/api/v1/evaluate")
    def post_evaluate(request: EvaluateRequest) -> dict:
        try:
            interest = frozenset(BodyFluid.from_name(n) for n in request.interest)
            overrides = {BodyFluid.from_name(n): float(p)
                         for n, p in request.background_overrides.items()}
            obs = CaseObservation.from_json(
                {"markers": {m: c.model_dump() for m, c in request.markers.items()}},
                panel)
        except (ProfileError, CaseError) as exc:
            raise ServiceError(400, "invalid_request", str(exc)) from None

        if request.model_id is not None:
            variant = store.get(request.model_id)
            if variant is None:
                raise ServiceError(404, "unknown_model",
                                   f"no model variant {request.model_id!r}")
        else:
            backgrounds = BackgroundLevels.default().with_levels(overrides)
            variant = store.find(interest, backgrounds, dichotomized=True)
            if variant is None:
                if not store.can_train:
                    available = ", ".join(v.variant_id for v in store.list()) or "(none)"
                    raise ServiceError(
                        409, "training_disabled",
                        f"no stored variant matches and training is disabled; "
                        f"available: {available}")
                try:
                    variant = store.get_or_train(interest, backgrounds,
                                                 dichotomized=True)
                except (AugmentationError, ProfileError) as exc:
                    raise ServiceError(400, "invalid_request", str(exc)) from None
                except (ConvergenceError, CalibrationError) as exc:
                    raise ServiceError(500, "numeric_failure", str(exc)) from None

        if frozenset(interest) != variant.interest:
            raise ServiceError(
                400, "invalid_request",
                "interest set does not match the requested model variant")
        try:
            report = evaluate_case(variant, obs, cap=request.cap)
        except CaseError as exc:
            raise ServiceError(400, "invalid_request", str(exc)) from None
        except (ConvergenceError, CalibrationError, FloatingPointError) as exc:
            raise ServiceError(500, "numeric_failure", str(exc)) from None
        return {
            "report": report.to_json_dict(),
            "model": _variant_summary(variant),
            "server_version": __version__,
        }

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
