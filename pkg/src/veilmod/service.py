"""Application service tying corpus, stage rules, event log, and caching together.

Every mutation follows the same discipline: validate against in-memory state,
append to the log, then apply the logged record to state. Replaying a log
therefore reconstructs exactly the state the live process had, which is what
makes regenerated reports byte-identical.
"""

from __future__ import annotations

import hashlib
import secrets
import threading
import zlib
from pathlib import Path
from typing import Optional

from .blur import RasterImage, blur_image, region_tile
from .clock import SystemClock
from .config import ExperimentConfig
from .corpus import Corpus, decode_image, encode_jpeg, encode_png, ingest_manifest
from .corpus import sample_task_set
from .errors import (
    AuthError,
    ExpiredError,
    ForbiddenError,
    NotFoundError,
    TooLargeError,
    ValidationError,
)
from .eventlog import EventLog, EventRecord
from .experiment import (
    KIND_CLICK,
    KIND_HOVER_START,
    KIND_SLIDER,
    TOOL_CLICK,
    TOOL_HOVER,
    TOOL_SLIDER,
    ExperimentState,
    StageConfig,
    make_stage_config,
    region_from_payload,
)


def default_token_factory() -> str:
    return secrets.token_hex(16)


def seeded_token_factory(seed: int):
    """Deterministic token stream for simulated runs."""
    counter = [0]

    def factory() -> str:
        counter[0] += 1
        return hashlib.sha256(f"{seed}:{counter[0]}".encode()).hexdigest()[:32]

    return factory


def _token_digest(token: str) -> str:
    return hashlib.sha256(token.encode("utf-8")).hexdigest()


def _sigma_label(sigma: float) -> str:
    return f"{sigma:g}"


def stage_descriptor(stage: StageConfig) -> dict:
    body = {
        "stage_id": stage.stage_id,
        "sigma": stage.sigma,
        "reveal_tool": stage.reveal_tool,
    }
    if stage.slider_levels is not None:
        body["slider_levels"] = list(stage.slider_levels)
    return body


class RenditionCache:
    """Disk cache of encoded blurred renditions keyed by (image id, sigma).

    Fills are idempotent: concurrent fills write to unique temp files and
    rename into place, so races waste work but never corrupt.
    """

    def __init__(self, corpus: Corpus, cache_dir: Path):
        self.corpus = corpus
        self.cache_dir = Path(cache_dir)

    def _stem(self, image_id: str, sigma: float) -> str:
        safe = hashlib.sha1(image_id.encode("utf-8")).hexdigest()[:16]
        return f"{safe}-s{_sigma_label(sigma)}"

    def lookup(self, image_id: str, sigma: float) -> Optional[Path]:
        stem = self._stem(image_id, sigma)
        for suffix in (".jpg", ".png"):
            candidate = self.cache_dir / (stem + suffix)
            if candidate.exists():
                return candidate
        return None

    def ensure(self, image_id: str, sigma: float) -> Path:
        """Return the rendition path, computing and caching it if absent."""
        cached = self.lookup(image_id, sigma)
        if cached is not None:
            return cached
        image = decode_image(self.corpus.image_path(image_id))
        blurred = blur_image(image, sigma)
        if blurred.channels == 4:
            payload, suffix = encode_png(blurred), ".png"
        else:
            payload, suffix = encode_jpeg(blurred), ".jpg"
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        final = self.cache_dir / (self._stem(image_id, sigma) + suffix)
        tmp = final.with_name(final.name + f".tmp-{secrets.token_hex(4)}")
        tmp.write_bytes(payload)
        tmp.replace(final)
        return final

    def get_bytes(self, image_id: str, sigma: float) -> tuple[bytes, str]:
        path = self.ensure(image_id, sigma)
        media = "image/png" if path.suffix == ".png" else "image/jpeg"
        return path.read_bytes(), media


class ExperimentService:
    """One experiment: one corpus, one event log, one in-memory state."""

    def __init__(
        self,
        config: ExperimentConfig,
        corpus: Optional[Corpus] = None,
        clock=None,
        token_factory=None,
    ):
        self.config = config
        self.clock = clock if clock is not None else SystemClock()
        self.token_factory = token_factory if token_factory is not None else default_token_factory
        if corpus is None:
            corpus = ingest_manifest(Path(config.corpus_dir) / "manifest.jsonl")
        self.corpus = corpus
        self.cache = RenditionCache(corpus, config.rendition_cache_dir)
        self.state = ExperimentState()
        self._tokens: dict[str, str] = {}
        self._expiry: dict[str, int] = {}
        self._session_counter = 0
        self._lock = threading.RLock()
        self.admin_token = config.admin_token or self.token_factory()
        Path(config.log_dir).mkdir(parents=True, exist_ok=True)
        self.log = EventLog(config.log_path, clock=self.clock)
        for record in self.log.recovered:
            self._absorb(record)

    # -- mutation path (identical for live traffic and replay) ------------

    def _absorb(self, record: EventRecord) -> None:
        self.state.apply(record.kind, record.payload, record.at_ms)
        if record.kind == "session_started":
            payload = record.payload
            self._tokens[payload["token_sha256"]] = payload["session_id"]
            self._expiry[payload["session_id"]] = payload["expiry_at_ms"]
            self._session_counter += 1

    def _commit(self, kind: str, payload: dict) -> EventRecord:
        record = self.log.append(kind, payload)
        self._absorb(record)
        return record

    # -- authentication ----------------------------------------------------

    def authenticate(self, token: Optional[str]) -> str:
        if not token:
            raise AuthError("missing bearer token")
        session_id = self._tokens.get(_token_digest(token))
        if session_id is None:
            raise AuthError("unrecognized token")
        if self.clock.now_ms() > self._expiry[session_id]:
            raise ExpiredError(f"session {session_id} has expired")
        return session_id

    def authenticate_admin(self, token: Optional[str]) -> None:
        if not token:
            raise AuthError("missing bearer token")
        if token != self.admin_token:
            if _token_digest(token) in self._tokens:
                raise ForbiddenError("worker tokens cannot access admin routes")
            raise AuthError("unrecognized token")

    # -- session lifecycle ---------------------------------------------------

    def create_session(self, worker_id, stage_id) -> dict:
        if not isinstance(worker_id, str) or not worker_id.strip():
            raise ValidationError("worker_id must be a non-empty string")
        if not isinstance(stage_id, int) or isinstance(stage_id, bool):
            raise ValidationError("stage_id must be an integer")
        if stage_id not in self.config.stages:
            raise ValidationError(f"stage {stage_id} is not part of this experiment")
        levels = list(self.config.slider_levels) if stage_id == 6 else None
        stage = make_stage_config(stage_id, levels)
        with self._lock:
            self.state.ensure_worker_stage(worker_id, stage_id)
            session_id = f"s{self._session_counter + 1:05d}"
            n = min(self.config.tasks_per_session, len(self.corpus))
            sample_seed = zlib.crc32(f"{self.config.seed}:{session_id}".encode())
            tasks = sample_task_set(self.corpus, n, sample_seed)
            token = self.token_factory()
            payload = {
                "session_id": session_id,
                "worker_id": worker_id,
                "stage_id": stage_id,
                "task_ids": [r.id for r in tasks],
                "token_sha256": _token_digest(token),
                "expiry_at_ms": self.clock.now_ms() + self.config.session_ttl_ms,
            }
            if levels is not None:
                payload["slider_levels"] = levels
            self._commit("session_started", payload)
        return {
            "token": token,
            "session_id": session_id,
            "task_count": n,
            "stage": stage_descriptor(stage),
        }

    def next_task(self, session_id: str) -> Optional[dict]:
        with self._lock:
            session = self.state.session(session_id)
            image_id = session.next_task()
            if image_id is None:
                return None
            if image_id not in session.served_at:
                self._commit("task_served", {"session_id": session_id, "image_id": image_id})
            record = self.corpus.record(image_id)
            return {
                "image_id": image_id,
                "width": record.width,
                "height": record.height,
                "index": session.task_list.index(image_id),
                "task_count": len(session.task_list),
                "stage": stage_descriptor(session.stage),
            }

    # -- image delivery ------------------------------------------------------

    def _session_image(self, session_id: str, image_id: str):
        session = self.state.session(session_id)
        if image_id not in session.task_list or image_id not in self.corpus:
            raise NotFoundError(f"image {image_id!r} is not in this session's task list")
        return session

    def image_rendition(self, session_id: str, image_id: str, sigma: float) -> tuple[bytes, str]:
        if not isinstance(sigma, (int, float)) or isinstance(sigma, bool) or sigma < 0:
            raise ValidationError("sigma must be a non-negative number")
        sigma = float(sigma)
        with self._lock:
            session = self._session_image(session_id, image_id)
            stage = session.stage
            if stage.reveal_tool == TOOL_SLIDER:
                if sigma not in stage.slider_levels:
                    raise ForbiddenError(
                        f"sigma {sigma:g} is not a slider level of stage {stage.stage_id}"
                    )
                if sigma < stage.sigma:
                    if image_id in session.responses:
                        raise ForbiddenError(
                            "image already answered; only the stage sigma is served"
                        )
                    reveal = self.state.check_reveal(
                        session_id,
                        {"image_id": image_id, "kind": KIND_SLIDER, "sigma_value": sigma},
                    )
                    self._commit("reveal", reveal)
            elif sigma != stage.sigma:
                raise ForbiddenError(
                    f"stage {stage.stage_id} serves sigma {stage.sigma:g} only"
                )
        return self.cache.get_bytes(image_id, sigma)

    def image_tile(self, session_id: str, image_id: str, params: dict) -> tuple[bytes, str]:
        with self._lock:
            session = self._session_image(session_id, image_id)
            tool = session.stage.reveal_tool
            if tool not in (TOOL_CLICK, TOOL_HOVER):
                raise ForbiddenError(
                    f"stage {session.stage.stage_id} has no region reveal tool"
                )
            region_payload = self._region_from_params(params)
            record = self.corpus.record(image_id)
            region = region_from_payload(region_payload)
            region.bounds(record.width, record.height)  # raises when disjoint
            kind = KIND_CLICK if tool == TOOL_CLICK else KIND_HOVER_START
            reveal = self.state.check_reveal(
                session_id, {"image_id": image_id, "kind": kind, "region": region_payload}
            )
            self._commit("reveal", reveal)
        image = decode_image(self.corpus.image_path(image_id))
        tile = region_tile(image, region)
        return encode_png(tile), "image/png"

    def _region_from_params(self, params: dict) -> dict:
        def grab(names):
            values = {}
            for name in names:
                raw = params.get(name)
                if raw is None:
                    return None
                try:
                    values[name] = int(raw)
                except (TypeError, ValueError):
                    raise ValidationError(f"region parameter {name} must be an integer")
            return values

        circle = grab(("cx", "cy", "r"))
        rect = grab(("x", "y", "w", "h"))
        limit = self.config.region_max_radius
        if circle is not None:
            if circle["r"] < 1:
                raise ValidationError("circle radius must be positive")
            if circle["r"] > limit:
                raise TooLargeError(f"radius {circle['r']} exceeds maximum {limit}")
            return {"shape": "circle", **circle}
        if rect is not None:
            if rect["w"] < 1 or rect["h"] < 1:
                raise ValidationError("rectangle sides must be positive")
            if max(rect["w"], rect["h"]) > 2 * limit:
                raise TooLargeError(
                    f"rectangle side {max(rect['w'], rect['h'])} exceeds maximum {2 * limit}"
                )
            return {"shape": "rectangle", **rect}
        raise ValidationError("region requires cx,cy,r or x,y,w,h")

    # -- submissions ---------------------------------------------------------

    def submit_response(self, session_id: str, payload: dict) -> EventRecord:
        with self._lock:
            record = self.state.check_response(session_id, payload, at_ms=self.clock.now_ms())
            committed = self._commit("response", record)
            session = self.state.session(session_id)
            if session.is_complete() and session.completed_at_ms is None:
                self._commit("session_completed", {"session_id": session_id})
            return committed

    def submit_reveal(self, session_id: str, payload: dict) -> EventRecord:
        with self._lock:
            record = self.state.check_reveal(session_id, payload)
            return self._commit("reveal", record)

    def submit_survey(self, session_id: str, payload: dict) -> EventRecord:
        with self._lock:
            record = self.state.check_survey(session_id, payload)
            return self._commit("survey", record)

    # -- analytics -------------------------------------------------------------

    def build_report(self) -> dict:
        from .report import build_report

        with self._lock:
            return build_report(self.state, self.corpus)

    def close(self) -> None:
        self.log.close()
