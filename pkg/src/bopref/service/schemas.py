"""Pydantic request/response models for the session API."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator


class SeedsModel(BaseModel):
    evaluation: int = Field(default=0, ge=0)
    dm: int = Field(default=1, ge=0)
    policy: int = Field(default=2, ge=0)


class LikelihoodModel(BaseModel):
    kind: Literal["exact", "probit", "logit"] = "exact"
    scale: float = Field(default=0.1, gt=0)


class GpSettingsModel(BaseModel):
    hyper_samples: int = Field(default=10, ge=1)
    map_restarts: int = Field(default=16, ge=1)
    nm_maxiter: int = Field(default=250, ge=10)
    refit_period: int = Field(default=1, ge=1)
    jitter_scale: float = Field(default=1e-8, ge=0)


class AcquisitionModel(BaseModel):
    restarts: int = Field(default=10, ge=1)
    steps: int = Field(default=120, ge=1)
    step_a: Optional[float] = Field(default=None, gt=0)
    step_b: float = Field(default=10.0, gt=0)
    grad_samples: int = Field(default=32, ge=1)
    ranking_samples: int = Field(default=2048, ge=1)
    ts_probes: int = Field(default=512, ge=1)
    ts_pattern_iters: int = Field(default=20, ge=1)


class EvaluatorModel(BaseModel):
    kind: Literal["builtin", "manual"] = "builtin"


class SessionConfigModel(BaseModel):
    """Experiment configuration accepted by the API.

    Either ``problem`` names a built-in test problem or an explicit design
    box with an attribute count is given (manual-evaluation sessions).
    """

    model_config = ConfigDict(extra="forbid")

    policy: Literal["ei-uu", "ts-uu", "ei-uu-npl", "ts-uu-npl", "random"] = "ei-uu"
    num_evaluations: int = Field(ge=0)
    problem: Optional[str] = None
    lower: Optional[list[float]] = None
    upper: Optional[list[float]] = None
    num_attributes: Optional[int] = Field(default=None, ge=1)
    utility: dict = Field(default_factory=dict)
    theta_prior: dict = Field(default_factory=dict)
    likelihood: LikelihoodModel = Field(default_factory=LikelihoodModel)
    init_count: Optional[int] = Field(default=None, ge=2)
    seeds: SeedsModel = Field(default_factory=SeedsModel)
    gp: GpSettingsModel = Field(default_factory=GpSettingsModel)
    acq: AcquisitionModel = Field(default_factory=AcquisitionModel)
    theta_samples: int = Field(default=64, ge=1)
    attribute_labels: Optional[list[str]] = None

    @field_validator("upper")
    @classmethod
    def _box_shapes(cls, v, info):
        lower = info.data.get("lower")
        if v is not None and lower is not None:
            if len(v) != len(lower):
                raise ValueError("lower and upper must have the same length")
            if any(lo >= hi for lo, hi in zip(lower, v)):
                raise ValueError("design box must satisfy lower < upper per dimension")
        return v


class SessionCreateRequest(BaseModel):
    config: SessionConfigModel
    evaluator: EvaluatorModel = Field(default_factory=EvaluatorModel)


class EvaluationView(BaseModel):
    n: int
    x: list[float]
    y: list[float]
    acq_value: Optional[float] = None


class PreferenceView(BaseModel):
    m: int
    i: int
    j: int
    a: int


class DesignView(BaseModel):
    index: int
    x: list[float]
    y: list[float]


class QueryView(BaseModel):
    m: int
    left: DesignView
    right: DesignView
    attribute_labels: Optional[list[str]] = None


class PendingEvaluationView(BaseModel):
    n: int
    x: list[float]


class MenuEntryView(BaseModel):
    index: int
    x: list[float]
    y: list[float]


class SessionStateView(BaseModel):
    id: str
    phase: Literal[
        "initializing", "awaiting_preference", "optimizing", "evaluating", "menu_ready"
    ]
    config: dict
    evaluator: dict
    init_count: int
    iterations_total: int
    iterations_done: int
    evaluations: list[EvaluationView]
    preferences: list[PreferenceView]
    posterior: Optional[dict] = None
    pending_query: Optional[QueryView] = None
    pending_evaluation: Optional[PendingEvaluationView] = None
    menu: list[MenuEntryView]
    attribute_labels: Optional[list[str]] = None
    last_error: Optional[str] = None
    seq: int


class SessionSummaryView(BaseModel):
    id: str
    phase: str
    iterations_done: int
    iterations_total: int
    num_evaluations: int


class SessionCreatedResponse(BaseModel):
    id: str
    state: SessionStateView


class PreferenceSubmission(BaseModel):
    m: int = Field(ge=1)
    a: int

    @field_validator("a")
    @classmethod
    def _valid_response(cls, v):
        if v not in (-1, 0, 1):
            raise ValueError("a must be one of -1, 0, 1")
        return v


class PreferenceAck(BaseModel):
    accepted: bool
    m: int
    phase: str
    posterior: Optional[dict] = None


class EvaluationSubmission(BaseModel):
    y: list[float]


class EvaluationAck(BaseModel):
    accepted: bool
    n: int
    phase: str


class EventView(BaseModel):
    seq: int
    type: str
    data: dict


class ErrorBody(BaseModel):
    error: str
    phase: Optional[str] = None


REQUEST_MODELS = {
    "SessionCreateRequest": SessionCreateRequest,
    "PreferenceSubmission": PreferenceSubmission,
    "EvaluationSubmission": EvaluationSubmission,
}

RESPONSE_MODELS = {
    "SessionCreatedResponse": SessionCreatedResponse,
    "SessionStateView": SessionStateView,
    "QueryView": QueryView,
    "PreferenceAck": PreferenceAck,
    "EvaluationAck": EvaluationAck,
    "MenuEntryView": MenuEntryView,
    "EventView": EventView,
    "ErrorBody": ErrorBody,
}


def schema_catalog() -> dict:
    return {
        "version": 1,
        "request": {k: m.model_json_schema() for k, m in REQUEST_MODELS.items()},
        "response": {k: m.model_json_schema() for k, m in RESPONSE_MODELS.items()},
    }
