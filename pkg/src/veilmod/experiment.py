"""Experiment core: the six stage conditions, moderation sessions, response and
reveal validation, and the exposure and accuracy analytics.

State is a replayable function of the event log: every mutation is first
validated against current state (``check_*`` methods, no side effects), then
persisted by the caller, then applied (``apply``). Replaying a persisted log
through ``apply`` therefore reconstructs the exact live state, which is what
makes regenerated reports byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .blur import RevealRegion, union_mask
from .errors import (
    ConflictError,
    InvalidParameterError,
    NotFoundError,
    StateError,
    ValidationError,
)
from .survey import SurveyResponse, validate_survey

TOOL_NONE = "none"
TOOL_CLICK = "click"
TOOL_HOVER = "hover"
TOOL_SLIDER = "slider"

KIND_CLICK = "click_reveal"
KIND_HOVER_START = "hover_start"
KIND_HOVER_END = "hover_end"
KIND_SLIDER = "slider_set"

REVEAL_KIND_TOOL = {
    KIND_CLICK: TOOL_CLICK,
    KIND_HOVER_START: TOOL_HOVER,
    KIND_HOVER_END: TOOL_HOVER,
    KIND_SLIDER: TOOL_SLIDER,
}

Q1_CATEGORIES = ("sex_nudity", "graphic", "safe", "other")
GOLD_CATEGORIES = ("sex_nudity", "graphic", "safe")

DEFAULT_SLIDER_LEVELS = (14.0, 12.0, 10.0, 8.0, 6.0, 4.0, 2.0, 0.0)

_STAGE_TABLE = {
    1: (0.0, TOOL_NONE),
    2: (7.0, TOOL_NONE),
    3: (14.0, TOOL_NONE),
    4: (14.0, TOOL_CLICK),
    5: (14.0, TOOL_HOVER),
    6: (14.0, TOOL_SLIDER),
}


@dataclass(frozen=True)
class StageConfig:
    stage_id: int
    sigma: float
    reveal_tool: str
    slider_levels: tuple[float, ...] | None = None


def make_stage_config(stage_id: int, slider_levels=None) -> StageConfig:
    """Canonical configuration for one of the six experimental stages."""
    if stage_id not in _STAGE_TABLE:
        raise InvalidParameterError(f"stage_id must be in 1..6, got {stage_id}")
    sigma, tool = _STAGE_TABLE[stage_id]
    if tool != TOOL_SLIDER:
        return StageConfig(stage_id, sigma, tool)
    levels = tuple(float(s) for s in (slider_levels or DEFAULT_SLIDER_LEVELS))
    if any(b >= a for a, b in zip(levels, levels[1:])) or not levels:
        raise InvalidParameterError(f"slider levels must be strictly decreasing, got {levels}")
    if levels[0] > sigma or levels[-1] < 0:
        raise InvalidParameterError(f"slider levels must lie within [0, {sigma}], got {levels}")
    return StageConfig(stage_id, sigma, tool, levels)


@dataclass(frozen=True)
class ModerationResponse:
    image_id: str
    q1_category: str
    q2_realistic: bool
    q3_approve: bool
    q1_other_text: str = ""
    q4_rationale: str = ""
    latency_ms: int = 0


@dataclass(frozen=True)
class RevealEvent:
    image_id: str
    kind: str
    at_ms: int
    region: RevealRegion | None = None
    sigma_value: float | None = None


@dataclass(frozen=True)
class ExposureReport:
    image_id: str
    permanent_area_fraction: float
    hover_area_seconds: float
    min_sigma_reached: float
    clarity_time_integral: float


@dataclass
class Session:
    session_id: str
    worker_id: str
    stage: StageConfig
    task_list: list[str]
    started_at_ms: int
    completed_at_ms: int | None = None
    served_at: dict[str, int] = field(default_factory=dict)
    responses: dict[str, ModerationResponse] = field(default_factory=dict)
    response_at: dict[str, int] = field(default_factory=dict)
    reveals: list[RevealEvent] = field(default_factory=list)
    survey: SurveyResponse | None = None

    def next_task(self) -> str | None:
        for image_id in self.task_list:
            if image_id not in self.responses:
                return image_id
        return None

    def is_complete(self) -> bool:
        return all(img in self.responses for img in self.task_list)


def region_to_payload(region: RevealRegion) -> dict:
    if region.shape == "circle":
        return {"shape": "circle", "cx": region.center_x, "cy": region.center_y, "r": region.radius}
    return {
        "shape": "rectangle",
        "x": region.origin_x,
        "y": region.origin_y,
        "w": region.region_width,
        "h": region.region_height,
    }


def region_from_payload(payload: dict) -> RevealRegion:
    try:
        if payload.get("shape") == "circle":
            return RevealRegion.circle(float(payload["cx"]), float(payload["cy"]), float(payload["r"]))
        if payload.get("shape") == "rectangle":
            return RevealRegion.rectangle(
                float(payload["x"]), float(payload["y"]), float(payload["w"]), float(payload["h"])
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed region payload: {payload!r}") from exc
    raise ValidationError(f"region shape must be 'circle' or 'rectangle', got {payload.get('shape')!r}")


def snap_to_level(value: float, levels: tuple[float, ...]) -> float:
    """Nearest slider level; ties resolve toward the lower sigma (more revealed)."""
    return min(levels, key=lambda lv: (abs(lv - value), lv))


class ExperimentState:
    """In-memory projection of one experiment's event log."""

    def __init__(self):
        self.sessions: dict[str, Session] = {}
        self.worker_stage: dict[str, int] = {}
        self._open_hovers: dict[str, dict[str, list[RevealEvent]]] = {}

    # -- validation (no side effects) ------------------------------------

    def session(self, session_id: str) -> Session:
        if session_id not in self.sessions:
            raise NotFoundError(f"unknown session {session_id!r}")
        return self.sessions[session_id]

    def ensure_worker_stage(self, worker_id: str, stage_id: int) -> None:
        """Between-subjects rule: one stage per worker, ever."""
        assigned = self.worker_stage.get(worker_id)
        if assigned is not None and assigned != stage_id:
            raise ConflictError(
                f"worker {worker_id!r} already assigned stage {assigned}, refusing stage {stage_id}"
            )

    def check_response(self, session_id: str, payload: dict, at_ms: int) -> dict:
        """Validate a response submission; returns the normalized record payload."""
        session = self.session(session_id)
        image_id = payload.get("image_id")
        if image_id not in session.task_list:
            raise NotFoundError(f"image {image_id!r} is not in this session's task list")
        if image_id in session.responses:
            raise ConflictError(f"image {image_id!r} already has a response")
        if image_id not in session.served_at:
            raise ValidationError(f"image {image_id!r} has not been served yet")

        q1 = payload.get("q1_category")
        if q1 not in Q1_CATEGORIES:
            raise ValidationError(f"q1_category must be one of {list(Q1_CATEGORIES)}, got {q1!r}")
        other_text = payload.get("q1_other_text") or ""
        if q1 == "other" and not str(other_text).strip():
            raise ValidationError("q1_category 'other' requires q1_other_text")
        if q1 != "other" and str(other_text).strip():
            raise ValidationError("q1_other_text is only allowed when q1_category is 'other'")
        for key in ("q2_realistic", "q3_approve"):
            if not isinstance(payload.get(key), bool):
                raise ValidationError(f"{key} must be a boolean")

        latency = max(0, at_ms - session.served_at[image_id])
        return {
            "session_id": session_id,
            "image_id": image_id,
            "q1_category": q1,
            "q1_other_text": str(other_text),
            "q2_realistic": payload["q2_realistic"],
            "q3_approve": payload["q3_approve"],
            "q4_rationale": str(payload.get("q4_rationale") or ""),
            "latency_ms": latency,
        }

    def check_reveal(self, session_id: str, payload: dict) -> dict:
        """Validate a reveal action against the session's stage tooling."""
        session = self.session(session_id)
        image_id = payload.get("image_id")
        if image_id not in session.task_list:
            raise NotFoundError(f"image {image_id!r} is not in this session's task list")
        if image_id not in session.served_at:
            raise ValidationError(f"image {image_id!r} has not been served yet")

        kind = payload.get("kind")
        tool_needed = REVEAL_KIND_TOOL.get(kind)
        if tool_needed is None:
            raise ValidationError(f"unknown reveal kind {kind!r}")
        if session.stage.reveal_tool != tool_needed:
            raise ValidationError(
                f"reveal kind {kind!r} requires the {tool_needed!r} tool; "
                f"stage {session.stage.stage_id} provides {session.stage.reveal_tool!r}"
            )
        if image_id in session.responses and kind != KIND_HOVER_END:
            raise ValidationError(f"image {image_id!r} already answered; reveal rejected")

        record: dict = {"session_id": session_id, "image_id": image_id, "kind": kind}
        if kind in (KIND_CLICK, KIND_HOVER_START):
            if payload.get("region") is None:
                raise ValidationError(f"{kind} requires a region")
            region = payload["region"]
            if not isinstance(region, RevealRegion):
                region = region_from_payload(region)
            record["region"] = region_to_payload(region)
        elif payload.get("region") is not None:
            raise ValidationError(f"{kind} must not carry a region")

        if kind == KIND_HOVER_END:
            if not self._open_hovers.get(session_id, {}).get(image_id):
                raise ValidationError(f"hover_end without an open hover_start on {image_id!r}")
        if kind == KIND_SLIDER:
            value = payload.get("sigma_value")
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ValidationError("slider_set requires a numeric sigma_value")
            if not 0 <= value <= session.stage.sigma:
                raise ValidationError(
                    f"sigma_value {value} outside [0, {session.stage.sigma}]"
                )
            record["sigma_value"] = snap_to_level(float(value), session.stage.slider_levels)
        elif payload.get("sigma_value") is not None:
            raise ValidationError(f"{kind} must not carry a sigma_value")
        return record

    def check_survey(self, session_id: str, payload: dict) -> dict:
        session = self.session(session_id)
        if session.survey is not None:
            raise ConflictError(f"session {session_id!r} already submitted a survey")
        if not session.is_complete():
            raise ConflictError(f"session {session_id!r} still has unanswered tasks")
        validated = validate_survey({**payload, "session_id": session_id})
        return {
            "session_id": session_id,
            "demographics": validated.demographics,
            "spane_items": list(validated.spane_items),
            "panas_items": list(validated.panas_items),
            "exhaustion_items": list(validated.exhaustion_items),
            "tam_peou_items": list(validated.tam_peou_items),
            "tam_pu_items": list(validated.tam_pu_items),
        }

    # -- application (replayable) -----------------------------------------

    def apply(self, kind: str, payload: dict, at_ms: int) -> None:
        if kind == "session_started":
            stage = make_stage_config(payload["stage_id"], payload.get("slider_levels"))
            session = Session(
                session_id=payload["session_id"],
                worker_id=payload["worker_id"],
                stage=stage,
                task_list=list(payload["task_ids"]),
                started_at_ms=at_ms,
            )
            self.sessions[session.session_id] = session
            self.worker_stage[session.worker_id] = stage.stage_id
        elif kind == "task_served":
            session = self.sessions[payload["session_id"]]
            session.served_at.setdefault(payload["image_id"], at_ms)
        elif kind == "reveal":
            session = self.sessions[payload["session_id"]]
            region = region_from_payload(payload["region"]) if payload.get("region") else None
            event = RevealEvent(
                image_id=payload["image_id"],
                kind=payload["kind"],
                at_ms=at_ms,
                region=region,
                sigma_value=payload.get("sigma_value"),
            )
            session.reveals.append(event)
            hovers = self._open_hovers.setdefault(session.session_id, {})
            if event.kind == KIND_HOVER_START:
                hovers.setdefault(event.image_id, []).append(event)
            elif event.kind == KIND_HOVER_END:
                open_list = hovers.get(event.image_id, [])
                if open_list:
                    open_list.pop(0)
        elif kind == "response":
            session = self.sessions[payload["session_id"]]
            session.responses[payload["image_id"]] = ModerationResponse(
                image_id=payload["image_id"],
                q1_category=payload["q1_category"],
                q1_other_text=payload.get("q1_other_text", ""),
                q2_realistic=payload["q2_realistic"],
                q3_approve=payload["q3_approve"],
                q4_rationale=payload.get("q4_rationale", ""),
                latency_ms=payload["latency_ms"],
            )
            session.response_at[payload["image_id"]] = at_ms
        elif kind == "survey":
            session = self.sessions[payload["session_id"]]
            session.survey = validate_survey(payload)
        elif kind == "session_completed":
            session = self.sessions[payload["session_id"]]
            session.completed_at_ms = at_ms
        else:
            raise ValidationError(f"unknown event kind {kind!r}")


def compute_exposure(session: Session, image_id: str, image_dims: tuple[int, int]) -> ExposureReport:
    """Exposure metrics for one moderated image.

    The observation window runs from task serve to response receipt. Permanent
    (click) reveals contribute the rasterized union area; hover reveals
    contribute area x duration; slider sessions additionally integrate
    instantaneous clarity 1 - sigma(t)/sigma_stage over the window.
    """
    if image_id not in session.responses:
        raise StateError(f"no response recorded for image {image_id!r}")
    width, height = image_dims
    window_start = session.served_at[image_id]
    window_end = session.response_at[image_id]
    events = [ev for ev in session.reveals if ev.image_id == image_id]

    click_regions = [ev.region for ev in events if ev.kind == KIND_CLICK]
    area_fraction = 0.0
    if click_regions:
        area_fraction = float(union_mask(click_regions, width, height).sum()) / (width * height)

    hover_seconds = 0.0
    open_hovers: list[RevealEvent] = []
    for ev in events:
        if ev.kind == KIND_HOVER_START:
            open_hovers.append(ev)
        elif ev.kind == KIND_HOVER_END and open_hovers:
            start = open_hovers.pop(0)
            duration_ms = min(ev.at_ms, window_end) - min(start.at_ms, window_end)
            frac = float(start.region.mask(width, height).sum()) / (width * height)
            hover_seconds += frac * max(0, duration_ms) / 1000.0
    for start in open_hovers:  # still open when the answer landed
        duration_ms = window_end - min(start.at_ms, window_end)
        frac = float(start.region.mask(width, height).sum()) / (width * height)
        hover_seconds += frac * max(0, duration_ms) / 1000.0

    stage_sigma = session.stage.sigma
    min_sigma = stage_sigma
    clarity = 0.0
    if session.stage.reveal_tool == TOOL_SLIDER:
        slider_events = [ev for ev in events if ev.kind == KIND_SLIDER]
        if slider_events:
            min_sigma = min(ev.sigma_value for ev in slider_events)
        current_sigma = stage_sigma
        cursor = window_start
        for ev in sorted(slider_events, key=lambda e: e.at_ms):
            t = min(max(ev.at_ms, window_start), window_end)
            clarity += (1.0 - current_sigma / stage_sigma) * (t - cursor) / 1000.0
            cursor = t
            current_sigma = ev.sigma_value
        clarity += (1.0 - current_sigma / stage_sigma) * (window_end - cursor) / 1000.0

    return ExposureReport(
        image_id=image_id,
        permanent_area_fraction=area_fraction,
        hover_area_seconds=hover_seconds,
        min_sigma_reached=min_sigma,
        clarity_time_integral=clarity,
    )


def accuracy_report(responses, corpus, stages=None) -> dict:
    """Accuracy analytics per stage.

    ``responses`` is an iterable of (stage_id, ModerationResponse). For each
    stage: per-category and overall Q1 accuracy against gold (an 'other'
    answer counts as incorrect), the gold x answer confusion matrix with
    'other' kept as its own column, realism (Q2) accuracy, approval (Q3) rate,
    and mean latency.
    """
    responses = list(responses)
    if not responses:
        raise StateError("no data")
    for _, resp in responses:
        if resp.image_id not in corpus:
            raise NotFoundError(f"response references unknown image {resp.image_id!r}")

    by_stage: dict[int, list[ModerationResponse]] = {}
    for stage_id, resp in responses:
        by_stage.setdefault(stage_id, []).append(resp)
    stage_ids = sorted(by_stage) if stages is None else [s for s in stages if s in by_stage]

    report = {}
    for stage_id in stage_ids:
        stage_responses = by_stage[stage_id]
        confusion = {gold: {answer: 0 for answer in Q1_CATEGORIES} for gold in GOLD_CATEGORIES}
        correct_by_cat = {gold: 0 for gold in GOLD_CATEGORIES}
        total_by_cat = {gold: 0 for gold in GOLD_CATEGORIES}
        q2_correct = 0
        q3_approvals = 0
        latency_total = 0
        for resp in stage_responses:
            record = corpus.record(resp.image_id)
            confusion[record.category][resp.q1_category] += 1
            total_by_cat[record.category] += 1
            if resp.q1_category == record.category:
                correct_by_cat[record.category] += 1
            if resp.q2_realistic == (record.realism == "realistic"):
                q2_correct += 1
            if resp.q3_approve:
                q3_approvals += 1
            latency_total += resp.latency_ms
        n = len(stage_responses)
        report[stage_id] = {
            "n_responses": n,
            "q1_accuracy": sum(correct_by_cat.values()) / n,
            "q1_accuracy_by_category": {
                gold: (correct_by_cat[gold] / total_by_cat[gold]) if total_by_cat[gold] else None
                for gold in GOLD_CATEGORIES
            },
            "confusion": confusion,
            "q2_realism_accuracy": q2_correct / n,
            "q3_approval_rate": q3_approvals / n,
            "mean_latency_ms": latency_total / n,
        }
    return report
