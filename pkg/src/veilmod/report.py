"""Admin report: accuracy, exposure, and survey summaries per stage.

The report is a pure function of event log contents plus the corpus, so the
same log always yields the same bytes. Iteration orders are pinned (sessions
sorted by id, images in task order) to keep float accumulation stable.
"""

from __future__ import annotations

import csv
import io
import json
from typing import Iterable

from .corpus import Corpus
from .errors import StateError
from .eventlog import EventRecord
from .experiment import (
    GOLD_CATEGORIES,
    Q1_CATEGORIES,
    ExperimentState,
    accuracy_report,
    compute_exposure,
)
from .survey import score_survey

EXPOSURE_FIELDS = (
    "permanent_area_fraction",
    "hover_area_seconds",
    "min_sigma_reached",
    "clarity_time_integral",
)

# report field -> key in SurveyScores.as_dict()
SURVEY_FIELDS = {
    "spane_positive": "spane_p",
    "spane_negative": "spane_n",
    "spane_balance": "spane_balance",
    "panas_positive": "panas_pa",
    "panas_negative": "panas_na",
    "exhaustion": "exhaustion_mean",
    "tam_peou": "peou_mean",
    "tam_pu": "pu_mean",
}


def state_from_records(records: Iterable[EventRecord]) -> ExperimentState:
    state = ExperimentState()
    for record in records:
        state.apply(record.kind, record.payload, record.at_ms)
    return state


def _mean(values: list[float]):
    return sum(values) / len(values) if values else None


def build_report(state: ExperimentState, corpus: Corpus) -> dict:
    """Aggregate every answered task and submitted survey into one report dict."""
    sessions = [state.sessions[sid] for sid in sorted(state.sessions)]
    rows = []
    for session in sessions:
        for image_id in session.task_list:
            if image_id in session.responses:
                rows.append((session.stage.stage_id, session.responses[image_id]))
    if not rows:
        raise StateError("no data")
    accuracy = accuracy_report(rows, corpus)

    exposures: dict[int, dict[str, list[float]]] = {}
    surveys: dict[int, dict[str, list[float]]] = {}
    n_surveys = 0
    for session in sessions:
        stage_id = session.stage.stage_id
        bucket = exposures.setdefault(stage_id, {f: [] for f in EXPOSURE_FIELDS})
        for image_id in session.task_list:
            if image_id not in session.responses:
                continue
            record = corpus.record(image_id)
            exp = compute_exposure(session, image_id, (record.width, record.height))
            bucket["permanent_area_fraction"].append(exp.permanent_area_fraction)
            bucket["hover_area_seconds"].append(exp.hover_area_seconds)
            bucket["min_sigma_reached"].append(exp.min_sigma_reached)
            bucket["clarity_time_integral"].append(exp.clarity_time_integral)
        if session.survey is not None:
            n_surveys += 1
            scores = score_survey(session.survey).as_dict()
            sbucket = surveys.setdefault(stage_id, {f: [] for f in SURVEY_FIELDS})
            for field, source in SURVEY_FIELDS.items():
                sbucket[field].append(scores[source])

    stages = {}
    for stage_id in sorted(accuracy):
        exp_bucket = exposures.get(stage_id, {f: [] for f in EXPOSURE_FIELDS})
        n_exposures = len(exp_bucket["permanent_area_fraction"])
        survey_bucket = surveys.get(stage_id)
        stages[str(stage_id)] = {
            "accuracy": accuracy[stage_id],
            "exposure": {
                "n": n_exposures,
                **{f"{f}_mean": _mean(exp_bucket[f]) for f in EXPOSURE_FIELDS},
            },
            "survey": {
                "n": len(survey_bucket["spane_balance"]) if survey_bucket else 0,
                **{
                    f"{f}_mean": _mean(survey_bucket[f]) if survey_bucket else None
                    for f in SURVEY_FIELDS
                },
            },
        }

    return {
        "n_sessions": len(sessions),
        "n_responses": len(rows),
        "n_surveys": n_surveys,
        "stages": stages,
    }


def canonical_report_bytes(report: dict) -> bytes:
    """Stable serialization used for byte-for-byte comparisons."""
    return (json.dumps(report, sort_keys=True, separators=(",", ":")) + "\n").encode("utf-8")


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def render_table(report: dict) -> str:
    """Human-readable per-stage sections with confusion matrices."""
    out = io.StringIO()
    out.write(
        f"sessions: {report['n_sessions']}  responses: {report['n_responses']}"
        f"  surveys: {report['n_surveys']}\n"
    )
    for stage_key in sorted(report["stages"], key=int):
        section = report["stages"][stage_key]
        acc = section["accuracy"]
        out.write(f"\n=== stage {stage_key} ===\n")
        out.write(
            f"responses: {acc['n_responses']}  q1 accuracy: {_fmt(acc['q1_accuracy'])}"
            f"  q2 realism accuracy: {_fmt(acc['q2_realism_accuracy'])}"
            f"  q3 approval rate: {_fmt(acc['q3_approval_rate'])}"
            f"  mean latency ms: {_fmt(acc['mean_latency_ms'])}\n"
        )
        out.write("confusion (rows: gold, cols: answer)\n")
        header = "gold".ljust(12) + "".join(a.rjust(12) for a in Q1_CATEGORIES)
        out.write(header + "\n")
        for gold in GOLD_CATEGORIES:
            row = gold.ljust(12)
            row += "".join(str(acc["confusion"][gold][a]).rjust(12) for a in Q1_CATEGORIES)
            out.write(row + "\n")
        out.write("per-category q1 accuracy: ")
        out.write(
            "  ".join(
                f"{gold}={_fmt(acc['q1_accuracy_by_category'][gold])}"
                for gold in GOLD_CATEGORIES
            )
            + "\n"
        )
        exp = section["exposure"]
        out.write(
            f"exposure (n={exp['n']}): "
            f"area fraction={_fmt(exp['permanent_area_fraction_mean'])}"
            f"  hover area-seconds={_fmt(exp['hover_area_seconds_mean'])}"
            f"  min sigma={_fmt(exp['min_sigma_reached_mean'])}"
            f"  clarity integral={_fmt(exp['clarity_time_integral_mean'])}\n"
        )
        sur = section["survey"]
        out.write(
            f"survey (n={sur['n']}): "
            f"spane balance={_fmt(sur['spane_balance_mean'])}"
            f"  panas +={_fmt(sur['panas_positive_mean'])}"
            f"  panas -={_fmt(sur['panas_negative_mean'])}"
            f"  exhaustion={_fmt(sur['exhaustion_mean'])}"
            f"  peou={_fmt(sur['tam_peou_mean'])}"
            f"  pu={_fmt(sur['tam_pu_mean'])}\n"
        )
    return out.getvalue()


CSV_HEADER = [
    "stage",
    "category",
    "n_gold",
    "q1_category_accuracy",
    "to_sex_nudity",
    "to_graphic",
    "to_safe",
    "to_other",
    "stage_n_responses",
    "stage_q1_accuracy",
    "stage_q2_realism_accuracy",
    "stage_q3_approval_rate",
    "stage_mean_latency_ms",
    "permanent_area_fraction_mean",
    "hover_area_seconds_mean",
    "min_sigma_reached_mean",
    "clarity_time_integral_mean",
]


def render_csv(report: dict) -> str:
    """One row per (stage, gold category)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)

    def cell(value):
        if value is None:
            return ""
        if isinstance(value, float):
            return f"{value:.6f}"
        return value

    for stage_key in sorted(report["stages"], key=int):
        section = report["stages"][stage_key]
        acc = section["accuracy"]
        exp = section["exposure"]
        for gold in GOLD_CATEGORIES:
            confusion_row = acc["confusion"][gold]
            writer.writerow(
                [
                    stage_key,
                    gold,
                    sum(confusion_row.values()),
                    cell(acc["q1_accuracy_by_category"][gold]),
                    confusion_row["sex_nudity"],
                    confusion_row["graphic"],
                    confusion_row["safe"],
                    confusion_row["other"],
                    acc["n_responses"],
                    cell(acc["q1_accuracy"]),
                    cell(acc["q2_realism_accuracy"]),
                    cell(acc["q3_approval_rate"]),
                    cell(acc["mean_latency_ms"]),
                    cell(exp["permanent_area_fraction_mean"]),
                    cell(exp["hover_area_seconds_mean"]),
                    cell(exp["min_sigma_reached_mean"]),
                    cell(exp["clarity_time_integral_mean"]),
                ]
            )
    return out.getvalue()
