"""Scripted workers driving an embedded server instance.

Everything is deterministic under a fixed seed: a manually advanced clock, a
seeded token stream, seeded per-worker generators, and strictly sequential
workers. Two runs with the same inputs write byte-identical event logs.

Every HTTP exchange is recorded to a trace file so that privacy properties
(no full image below the stage sigma in stages 2 to 5) can be audited after
the fact, including the deliberately non-compliant probes issued here.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi.testclient import TestClient

from .clock import FakeClock
from .config import ExperimentConfig
from .errors import ConflictError, StateError, ValidationError
from .report import build_report, canonical_report_bytes
from .server import create_app
from .service import ExperimentService, seeded_token_factory
from .survey import DEMOGRAPHIC_FIELDS, EXHAUSTION, PANAS, SPANE, TAM_PEOU, TAM_PU

GOLD = ("sex_nudity", "graphic", "safe")
ANSWERS = ("sex_nudity", "graphic", "safe", "other")

BUILTIN_PROFILES = {
    "identity": {
        "q1_confusion": {cat: {cat: 1.0} for cat in GOLD},
    },
    "uniform": {
        "q1_confusion": {cat: {answer: 1 / 3 for answer in GOLD} for cat in GOLD},
    },
}


@dataclass(frozen=True)
class WorkerProfile:
    """Behavior script for simulated workers."""

    q1_confusion: dict
    clicks_per_task: tuple[int, int] = (1, 3)
    hovers_per_task: tuple[int, int] = (1, 2)
    hover_duration_ms: tuple[int, int] = (300, 1500)
    slider_stop_sigma: tuple[float, float] = (0.0, 8.0)
    think_ms: tuple[int, int] = (400, 1800)

    def __post_init__(self):
        for gold, row in self.q1_confusion.items():
            if gold not in GOLD:
                raise ValidationError(f"profile row for unknown category {gold!r}")
            total = sum(row.values())
            if not row or abs(total - 1.0) > 1e-9:
                raise ValidationError(f"profile row {gold!r} must sum to 1, got {total}")
            for answer in row:
                if answer not in ANSWERS:
                    raise ValidationError(f"profile row {gold!r} names unknown answer {answer!r}")
        missing = set(GOLD) - set(self.q1_confusion)
        if missing:
            raise ValidationError(f"profile missing rows for {sorted(missing)}")


def load_profile(source) -> WorkerProfile:
    """Accepts a builtin name, a JSON file path, or an already-parsed dict."""
    if isinstance(source, WorkerProfile):
        return source
    if isinstance(source, str) and source in BUILTIN_PROFILES:
        body = BUILTIN_PROFILES[source]
    elif isinstance(source, dict):
        body = source
    else:
        path = Path(source)
        try:
            body = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ValidationError(
                f"profile {source!r} is neither a builtin name "
                f"({sorted(BUILTIN_PROFILES)}) nor a readable file"
            )
        except json.JSONDecodeError as exc:
            raise ValidationError(f"profile file is not valid JSON: {exc}")
    if "q1_confusion" not in body:
        raise ValidationError("profile requires a q1_confusion table")
    kwargs = {"q1_confusion": body["q1_confusion"]}
    for key in ("clicks_per_task", "hovers_per_task", "hover_duration_ms",
                "slider_stop_sigma", "think_ms"):
        if key in body:
            value = body[key]
            if not isinstance(value, (list, tuple)) or len(value) != 2:
                raise ValidationError(f"profile {key} must be a [low, high] pair")
            kwargs[key] = tuple(value)
    return WorkerProfile(**kwargs)


def audit_trace(trace_path, log_path) -> dict:
    """Cross-check an HTTP trace against the event log.

    Verifies the privacy gate: in stages 2 to 5 no full-image request below
    the stage sigma ever succeeded, and every successful tile request has a
    matching server-logged region reveal. Raises StateError on any violation;
    returns counters otherwise.
    """
    from .eventlog import replay

    records, _ = replay(log_path)
    stage_sigma: dict[str, float] = {}
    region_reveals: dict[str, int] = {}
    for record in records:
        if record.kind == "session_started":
            payload = record.payload
            stage_sigma[payload["session_id"]] = float(
                {1: 0, 2: 7, 3: 14, 4: 14, 5: 14, 6: 14}[payload["stage_id"]]
            )
        elif record.kind == "reveal" and record.payload["kind"] in ("click_reveal", "hover_start"):
            sid = record.payload["session_id"]
            region_reveals[sid] = region_reveals.get(sid, 0) + 1

    tiles_ok: dict[str, int] = {}
    full_below = 0
    refused = 0
    with open(trace_path, encoding="utf-8") as fh:
        for line in fh:
            entry = json.loads(line)
            path = entry["path"]
            if not path.startswith("/api/images/"):
                continue
            session_id = entry["session_id"]
            is_tile = path.endswith("/tile")
            if entry["status"] != 200:
                refused += 1
                continue
            if is_tile:
                tiles_ok[session_id] = tiles_ok.get(session_id, 0) + 1
                continue
            stage_id = entry["stage_id"]
            if stage_id in (2, 3, 4, 5):
                sigma = float(entry["query"]["sigma"])
                if sigma < stage_sigma[session_id]:
                    full_below += 1
    if full_below:
        raise StateError(
            f"privacy violation: {full_below} full-image responses below the stage sigma"
        )
    for session_id, n_tiles in tiles_ok.items():
        if region_reveals.get(session_id, 0) != n_tiles:
            raise StateError(
                f"session {session_id}: {n_tiles} tiles served but "
                f"{region_reveals.get(session_id, 0)} region reveals logged"
            )
    return {
        "tile_responses": sum(tiles_ok.values()),
        "region_reveals": sum(region_reveals.values()),
        "refused_image_requests": refused,
        "full_image_below_sigma": full_below,
    }


@dataclass
class SimulationResult:
    log_path: Path
    trace_path: Path
    report_path: Path
    report: dict
    n_workers: int
    n_responses: int
    n_probes_rejected: int


class _Tracer:
    def __init__(self, path: Path):
        self.path = path
        self._fh = open(path, "w", encoding="utf-8")

    def record(self, entry: dict) -> None:
        self._fh.write(json.dumps(entry, sort_keys=True, separators=(",", ":")) + "\n")

    def close(self) -> None:
        self._fh.close()


class _SimWorker:
    def __init__(self, sim: "_Simulation", worker_id: str, stage_id: int):
        self.sim = sim
        self.worker_id = worker_id
        self.stage_id = stage_id
        self.rng = random.Random(f"{sim.config.seed}:{worker_id}")
        self.token: Optional[str] = None
        self.session_id: Optional[str] = None

    # -- plumbing -----------------------------------------------------------

    def request(self, method: str, path: str, *, params=None, json_body=None,
                expect=None) -> "object":
        headers = {}
        if self.token is not None:
            headers["Authorization"] = f"Bearer {self.token}"
        response = self.sim.client.request(
            method, path, params=params, json=json_body, headers=headers
        )
        body = response.content or b""
        self.sim.tracer.record(
            {
                "at_ms": self.sim.clock.now_ms(),
                "worker_id": self.worker_id,
                "session_id": self.session_id,
                "stage_id": self.stage_id,
                "method": method,
                "path": path,
                "query": dict(params or {}),
                "status": response.status_code,
                "content_type": response.headers.get("content-type", ""),
                "body_len": len(body),
                "body_sha256": hashlib.sha256(body).hexdigest(),
            }
        )
        if expect is not None and response.status_code != expect:
            raise StateError(
                f"{self.worker_id}: {method} {path} returned "
                f"{response.status_code}, expected {expect}: {body[:200]!r}"
            )
        return response

    def pause(self, low_high: tuple[int, int]) -> None:
        self.sim.clock.advance(self.rng.randint(int(low_high[0]), int(low_high[1])))

    # -- script ---------------------------------------------------------------

    def run(self) -> None:
        body = self.request(
            "POST", "/api/sessions",
            json_body={"worker_id": self.worker_id, "stage_id": self.stage_id},
            expect=201,
        ).json()
        self.token = body["token"]
        self.session_id = body["session_id"]
        first_task = True
        while True:
            response = self.request("GET", "/api/tasks/next")
            if response.status_code == 204:
                break
            if response.status_code != 200:
                raise StateError(f"task fetch failed: {response.status_code}")
            task = response.json()
            self.work_task(task, probe=first_task)
            first_task = False
        self.submit_survey()

    def work_task(self, task: dict, probe: bool) -> None:
        image_id = task["image_id"]
        stage = task["stage"]
        sigma = stage["sigma"]
        self.request(
            "GET", f"/api/images/{image_id}", params={"sigma": f"{sigma:g}"}, expect=200
        )
        if probe:
            self.probe_privacy(image_id, stage)
        self.pause(self.sim.profile.think_ms)
        tool = stage["reveal_tool"]
        if tool == "click":
            self.do_clicks(image_id, task)
        elif tool == "hover":
            self.do_hovers(image_id, task)
        elif tool == "slider":
            self.do_slider(image_id, stage)
        self.pause(self.sim.profile.think_ms)
        self.submit_response(image_id)

    def probe_privacy(self, image_id: str, stage: dict) -> None:
        """Issue requests a malicious client would try; all must be refused."""
        if stage["stage_id"] in (2, 3, 4, 5):
            for sigma in ("0", f"{stage['sigma'] / 2:g}"):
                r = self.request(
                    "GET", f"/api/images/{image_id}", params={"sigma": sigma}
                )
                if r.status_code != 403:
                    raise StateError(
                        f"privacy probe not refused: sigma={sigma} -> {r.status_code}"
                    )
                self.sim.probes_rejected += 1
        if stage["stage_id"] in (2, 3):
            r = self.request(
                "GET", f"/api/images/{image_id}/tile",
                params={"cx": 5, "cy": 5, "r": 4},
            )
            if r.status_code != 403:
                raise StateError(f"tile probe not refused: {r.status_code}")
            self.sim.probes_rejected += 1
        if stage["stage_id"] in (4, 5):
            r = self.request(
                "GET", f"/api/images/{image_id}/tile",
                params={"cx": 5, "cy": 5, "r": 10_000},
            )
            if r.status_code != 413:
                raise StateError(f"oversized tile probe not refused: {r.status_code}")
            self.sim.probes_rejected += 1

    def _random_circle(self, task: dict) -> dict:
        w, h = task["width"], task["height"]
        r = self.rng.randint(3, max(3, min(12, self.sim.config.region_max_radius)))
        return {"cx": self.rng.randint(0, w - 1), "cy": self.rng.randint(0, h - 1), "r": r}

    def do_clicks(self, image_id: str, task: dict) -> None:
        k = self.rng.randint(*self.sim.profile.clicks_per_task)
        for _ in range(k):
            self.request(
                "GET", f"/api/images/{image_id}/tile",
                params=self._random_circle(task), expect=200,
            )
            self.pause((120, 600))

    def do_hovers(self, image_id: str, task: dict) -> None:
        k = self.rng.randint(*self.sim.profile.hovers_per_task)
        for _ in range(k):
            self.request(
                "GET", f"/api/images/{image_id}/tile",
                params=self._random_circle(task), expect=200,
            )
            self.pause(self.sim.profile.hover_duration_ms)
            self.request(
                "POST", "/api/reveals",
                json_body={"image_id": image_id, "kind": "hover_end"}, expect=201,
            )

    def do_slider(self, image_id: str, stage: dict) -> None:
        levels = stage["slider_levels"]
        lo, hi = self.sim.profile.slider_stop_sigma
        target = self.rng.uniform(float(lo), float(hi))
        stop = min((lv for lv in levels if lv >= target), default=levels[0])
        for level in levels:
            if level >= stage["sigma"]:
                continue
            if level < stop:
                break
            self.pause((150, 700))
            self.request(
                "GET", f"/api/images/{image_id}",
                params={"sigma": f"{level:g}"}, expect=200,
            )

    def pick_q1(self, gold_category: str) -> str:
        row = self.sim.profile.q1_confusion[gold_category]
        roll = self.rng.random()
        cumulative = 0.0
        for answer in ANSWERS:
            cumulative += row.get(answer, 0.0)
            if roll < cumulative:
                return answer
        return max(row, key=row.get)

    def submit_response(self, image_id: str) -> None:
        record = self.sim.service.corpus.record(image_id)
        q1 = self.pick_q1(record.category)
        payload = {
            "image_id": image_id,
            "q1_category": q1,
            "q2_realistic": record.realism == "realistic",
            "q3_approve": q1 == "safe",
            "q4_rationale": "",
        }
        if q1 == "other":
            payload["q1_other_text"] = "does not fit the listed categories"
        self.request("POST", "/api/responses", json_body=payload, expect=201)

    def submit_survey(self) -> None:
        def ratings(instrument):
            return [
                self.rng.randint(instrument.scale_min, instrument.scale_max)
                for _ in instrument.item_ids
            ]

        payload = {
            "demographics": {f: "prefer not to say" for f in DEMOGRAPHIC_FIELDS},
            "spane_items": ratings(SPANE),
            "panas_items": ratings(PANAS),
            "exhaustion_items": ratings(EXHAUSTION),
            "tam_peou_items": ratings(TAM_PEOU),
            "tam_pu_items": ratings(TAM_PU),
        }
        self.pause(self.sim.profile.think_ms)
        self.request("POST", "/api/surveys", json_body=payload, expect=201)


class _Simulation:
    def __init__(self, config: ExperimentConfig, profile: WorkerProfile):
        self.config = config
        self.profile = profile
        self.clock = FakeClock()
        self.service = ExperimentService(
            config,
            clock=self.clock,
            token_factory=seeded_token_factory(config.seed),
        )
        self.client = TestClient(create_app(self.service), raise_server_exceptions=False)
        trace_path = Path(config.log_dir) / f"{config.experiment_id}-trace.jsonl"
        self.tracer = _Tracer(trace_path)
        self.probes_rejected = 0


def run_simulation(config: ExperimentConfig, n_workers: int, profile_source) -> SimulationResult:
    """Run n scripted workers sequentially against an embedded server."""
    if n_workers < 1:
        raise ValidationError("need at least one worker")
    profile = load_profile(profile_source)
    if Path(config.log_path).exists():
        raise ConflictError(
            f"event log {config.log_path} already exists; simulate writes fresh logs only"
        )
    Path(config.log_dir).mkdir(parents=True, exist_ok=True)
    sim = _Simulation(config, profile)
    try:
        stages = config.stages
        for i in range(1, n_workers + 1):
            worker = _SimWorker(sim, f"w{i:03d}", stages[(i - 1) % len(stages)])
            worker.run()
            sim.clock.advance(1_000)
        report = build_report(sim.service.state, sim.service.corpus)
        report_path = Path(config.log_dir) / f"{config.experiment_id}-report.json"
        report_path.write_bytes(canonical_report_bytes(report))
        n_responses = report["n_responses"]
    finally:
        sim.tracer.close()
        sim.service.close()
    return SimulationResult(
        log_path=Path(config.log_path),
        trace_path=sim.tracer.path,
        report_path=report_path,
        report=report,
        n_workers=n_workers,
        n_responses=n_responses,
        n_probes_rejected=sim.probes_rejected,
    )
