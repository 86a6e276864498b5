"""Post-task survey battery: validation and scoring.

Scoring depends only on each instrument's keying and scale bounds, which ship
in an editable definition file (``data/instruments.json``); item wording is
operator-replaceable without touching code. Wellbeing subscales (SPANE,
I-PANAS-SF) are keyed sums; exhaustion and the two technology-acceptance
constructs are item means. Validation rejects wrong arity and out-of-range
ratings outright, never clamping.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import NamedTuple, Sequence

from .errors import ValidationError

DEMOGRAPHIC_FIELDS = ("age_band", "gender", "race_ethnicity")


@dataclass(frozen=True)
class Instrument:
    name: str
    scale_min: int
    scale_max: int
    item_ids: tuple[str, ...]
    item_texts: tuple[str, ...]
    positive_indices: tuple[int, ...]
    negative_indices: tuple[int, ...]
    framing: str = ""


def _parse_instrument(name: str, spec: dict) -> Instrument:
    items = spec["items"]
    keyings = [item.get("keying") for item in items]
    return Instrument(
        name=name,
        scale_min=int(spec["scale"][0]),
        scale_max=int(spec["scale"][1]),
        item_ids=tuple(item["id"] for item in items),
        item_texts=tuple(item["text"] for item in items),
        positive_indices=tuple(i for i, k in enumerate(keyings) if k == "positive"),
        negative_indices=tuple(i for i, k in enumerate(keyings) if k == "negative"),
        framing=spec.get("framing", ""),
    )


def load_instrument_definitions(path: Path | str | None = None) -> dict:
    """Raw instrument-definition document (also served to the UI verbatim)."""
    if path is not None:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    return json.loads(resources.files("veilmod.data").joinpath("instruments.json").read_text("utf-8"))


def load_instruments(path: Path | str | None = None) -> dict[str, Instrument]:
    doc = load_instrument_definitions(path)
    return {
        name: _parse_instrument(name, spec)
        for name, spec in doc.items()
        if name != "demographics"
    }


_DEFAULTS = load_instruments()
SPANE = _DEFAULTS["spane"]
PANAS = _DEFAULTS["panas"]
EXHAUSTION = _DEFAULTS["exhaustion"]
TAM_PEOU = _DEFAULTS["tam_peou"]
TAM_PU = _DEFAULTS["tam_pu"]


class SpaneScore(NamedTuple):
    positive: int
    negative: int
    balance: int


class PanasScore(NamedTuple):
    positive_affect: int
    negative_affect: int


class TamScore(NamedTuple):
    peou_mean: float
    pu_mean: float


def _check_items(name: str, items: Sequence, count: int, lo: int, hi: int) -> list[int]:
    if len(items) != count:
        raise ValidationError(f"{name}: expected {count} items, got {len(items)}")
    out = []
    for i, value in enumerate(items):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(f"{name}: item {i + 1} must be an integer, got {value!r}")
        if not lo <= value <= hi:
            raise ValidationError(f"{name}: item {i + 1} = {value} outside {lo}..{hi}")
        out.append(value)
    return out


def score_spane(items: Sequence[int], instrument: Instrument = SPANE) -> SpaneScore:
    """Keyed sums over the 12 experience items: (P, N, balance = P - N)."""
    values = _check_items(instrument.name, items, len(instrument.item_ids), instrument.scale_min, instrument.scale_max)
    p = sum(values[i] for i in instrument.positive_indices)
    n = sum(values[i] for i in instrument.negative_indices)
    return SpaneScore(p, n, p - n)


def score_panas(items: Sequence[int], instrument: Instrument = PANAS) -> PanasScore:
    """Keyed sums over the 10 affect items: (PA, NA)."""
    values = _check_items(instrument.name, items, len(instrument.item_ids), instrument.scale_min, instrument.scale_max)
    pa = sum(values[i] for i in instrument.positive_indices)
    na = sum(values[i] for i in instrument.negative_indices)
    return PanasScore(pa, na)


def score_exhaustion(items: Sequence[int], instrument: Instrument = EXHAUSTION) -> float:
    """Arithmetic mean of the 6 exhaustion items."""
    values = _check_items(instrument.name, items, len(instrument.item_ids), instrument.scale_min, instrument.scale_max)
    return sum(values) / len(values)


def score_tam(
    peou_items: Sequence[int],
    pu_items: Sequence[int],
    peou_instrument: Instrument = TAM_PEOU,
    pu_instrument: Instrument = TAM_PU,
) -> TamScore:
    """Per-construct means for perceived ease of use and perceived usefulness."""
    peou = _check_items(
        peou_instrument.name, peou_items, len(peou_instrument.item_ids),
        peou_instrument.scale_min, peou_instrument.scale_max,
    )
    pu = _check_items(
        pu_instrument.name, pu_items, len(pu_instrument.item_ids),
        pu_instrument.scale_min, pu_instrument.scale_max,
    )
    return TamScore(sum(peou) / len(peou), sum(pu) / len(pu))


@dataclass(frozen=True)
class SurveyResponse:
    session_id: str
    demographics: dict
    spane_items: tuple[int, ...]
    panas_items: tuple[int, ...]
    exhaustion_items: tuple[int, ...]
    tam_peou_items: tuple[int, ...]
    tam_pu_items: tuple[int, ...]


@dataclass(frozen=True)
class SurveyScores:
    spane_p: int
    spane_n: int
    spane_balance: int
    panas_pa: int
    panas_na: int
    exhaustion_mean: float
    peou_mean: float
    pu_mean: float

    def as_dict(self) -> dict:
        return {
            "spane_p": self.spane_p,
            "spane_n": self.spane_n,
            "spane_balance": self.spane_balance,
            "panas_pa": self.panas_pa,
            "panas_na": self.panas_na,
            "exhaustion_mean": self.exhaustion_mean,
            "peou_mean": self.peou_mean,
            "pu_mean": self.pu_mean,
        }


def validate_survey(payload: dict) -> SurveyResponse:
    """Validate a raw survey submission; raises ValidationError on any violation."""
    if not isinstance(payload, dict):
        raise ValidationError("survey payload must be an object")
    demographics = payload.get("demographics")
    if not isinstance(demographics, dict):
        raise ValidationError("demographics must be an object")
    for field_name in DEMOGRAPHIC_FIELDS:
        value = demographics.get(field_name)
        if not isinstance(value, str) or not value.strip():
            raise ValidationError(f"demographics.{field_name} is required ('prefer not to say' is accepted)")

    def items(key: str) -> Sequence:
        value = payload.get(key)
        if not isinstance(value, (list, tuple)):
            raise ValidationError(f"{key} must be a list of ratings")
        return value

    spane = _check_items("spane", items("spane_items"), 12, SPANE.scale_min, SPANE.scale_max)
    panas = _check_items("panas", items("panas_items"), 10, PANAS.scale_min, PANAS.scale_max)
    exhaustion = _check_items(
        "exhaustion", items("exhaustion_items"), 6, EXHAUSTION.scale_min, EXHAUSTION.scale_max
    )
    peou = _check_items("tam_peou", items("tam_peou_items"), 6, TAM_PEOU.scale_min, TAM_PEOU.scale_max)
    pu = _check_items("tam_pu", items("tam_pu_items"), 6, TAM_PU.scale_min, TAM_PU.scale_max)

    return SurveyResponse(
        session_id=str(payload.get("session_id", "")),
        demographics={k: demographics[k] for k in DEMOGRAPHIC_FIELDS},
        spane_items=tuple(spane),
        panas_items=tuple(panas),
        exhaustion_items=tuple(exhaustion),
        tam_peou_items=tuple(peou),
        tam_pu_items=tuple(pu),
    )


def score_survey(response: SurveyResponse) -> SurveyScores:
    spane = score_spane(list(response.spane_items))
    panas = score_panas(list(response.panas_items))
    exhaustion = score_exhaustion(list(response.exhaustion_items))
    tam = score_tam(list(response.tam_peou_items), list(response.tam_pu_items))
    return SurveyScores(
        spane_p=spane.positive,
        spane_n=spane.negative,
        spane_balance=spane.balance,
        panas_pa=panas.positive_affect,
        panas_na=panas.negative_affect,
        exhaustion_mean=exhaustion,
        peou_mean=tam.peou_mean,
        pu_mean=tam.pu_mean,
    )
