"""Survey battery validation and scoring tests."""

import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from veilmod.errors import ValidationError
from veilmod.survey import (
    EXHAUSTION,
    PANAS,
    SPANE,
    TAM_PEOU,
    TAM_PU,
    score_exhaustion,
    score_panas,
    score_spane,
    score_survey,
    score_tam,
    validate_survey,
)


def keyed_vector(instrument, positives, negatives):
    """Place keyed values at their instrument positions."""
    items = [0] * len(instrument.item_ids)
    for idx, v in zip(instrument.positive_indices, positives):
        items[idx] = v
    for idx, v in zip(instrument.negative_indices, negatives):
        items[idx] = v
    return items


def valid_demographics():
    return {"age_band": "25-34", "gender": "prefer not to say", "race_ethnicity": "Asian"}


class TestSpane:
    def test_keying_is_six_and_six(self):
        assert len(SPANE.positive_indices) == 6
        assert len(SPANE.negative_indices) == 6

    def test_all_fives_saturates(self):
        assert score_spane([5] * 12) == (30, 30, 0)

    def test_extremes(self):
        items = keyed_vector(SPANE, [5] * 6, [1] * 6)
        assert score_spane(items) == (30, 6, 24)

    def test_worked_example_matches_summation_oracle(self):
        positives = (3, 4, 2, 5, 1, 3)
        negatives = (2, 2, 1, 3, 1, 1)
        got = score_spane(keyed_vector(SPANE, positives, negatives))
        assert got == (sum(positives), sum(negatives), sum(positives) - sum(negatives))
        assert got == (18, 10, 8)

    @pytest.mark.parametrize("items", [[3] * 11, [3] * 13, [3] * 12 + [3]])
    def test_wrong_arity_rejected(self, items):
        if len(items) != 12:
            with pytest.raises(ValidationError):
                score_spane(items)

    @pytest.mark.parametrize("bad", [0, 6, -1, 99])
    def test_out_of_range_rejected(self, bad):
        items = [3] * 12
        items[4] = bad
        with pytest.raises(ValidationError):
            score_spane(items)

    def test_non_integer_rejected(self):
        with pytest.raises(ValidationError):
            score_spane([3.0] + [3] * 11)
        with pytest.raises(ValidationError):
            score_spane([True] + [3] * 11)

    @given(st.lists(st.integers(1, 5), min_size=12, max_size=12))
    def test_balance_identity_and_bounds(self, items):
        p, n, balance = score_spane(items)
        assert balance == p - n
        assert 6 <= p <= 30 and 6 <= n <= 30
        assert -24 <= balance <= 24

    @given(
        st.lists(st.integers(1, 5), min_size=6, max_size=6),
        st.lists(st.integers(1, 5), min_size=6, max_size=6),
        st.randoms(use_true_random=False),
    )
    def test_permutation_within_keying_class(self, pos, neg, rng):
        base = score_spane(keyed_vector(SPANE, pos, neg))
        pos2, neg2 = list(pos), list(neg)
        rng.shuffle(pos2)
        rng.shuffle(neg2)
        assert score_spane(keyed_vector(SPANE, pos2, neg2)) == base


class TestPanas:
    def test_keying_is_five_and_five(self):
        assert len(PANAS.positive_indices) == 5
        assert len(PANAS.negative_indices) == 5

    def test_all_sevens(self):
        assert score_panas([7] * 10) == (35, 35)

    def test_all_ones(self):
        assert score_panas([1] * 10) == (5, 5)

    def test_worked_example_matches_summation_oracle(self):
        pa = (4, 2, 6, 1, 7)
        na = (1, 1, 2, 3, 1)
        got = score_panas(keyed_vector(PANAS, pa, na))
        assert got == (sum(pa), sum(na))
        assert got == (20, 8)

    @given(st.lists(st.integers(1, 7), min_size=10, max_size=10))
    def test_bounds(self, items):
        pa, na = score_panas(items)
        assert 5 <= pa <= 35 and 5 <= na <= 35

    def test_range_violation_rejected(self):
        with pytest.raises(ValidationError):
            score_panas([8] + [4] * 9)


class TestExhaustion:
    def test_constant_mean(self):
        assert score_exhaustion([4] * 6) == 4.0

    def test_worked_example(self):
        assert score_exhaustion([1, 1, 1, 1, 1, 7]) == 2.0

    def test_wrong_arity_rejected(self):
        with pytest.raises(ValidationError):
            score_exhaustion([4] * 5)

    @given(st.lists(st.integers(1, 7), min_size=6, max_size=6))
    def test_bounds(self, items):
        assert 1.0 <= score_exhaustion(items) <= 7.0


class TestTam:
    def test_saturation(self):
        assert score_tam([7] * 6, [7] * 6) == (7.0, 7.0)

    def test_extremes(self):
        assert score_tam([1] * 6, [7] * 6) == (1.0, 7.0)

    def test_worked_example(self):
        assert score_tam([2, 3, 4, 5, 6, 7], [1, 2, 3, 4, 5, 6]) == (4.5, 3.5)

    @given(
        st.lists(st.integers(1, 7), min_size=6, max_size=6),
        st.lists(st.integers(1, 7), min_size=6, max_size=6),
    )
    def test_bounds(self, peou, pu):
        peou_mean, pu_mean = score_tam(peou, pu)
        assert 1.0 <= peou_mean <= 7.0
        assert 1.0 <= pu_mean <= 7.0

    def test_range_violation_rejected(self):
        with pytest.raises(ValidationError):
            score_tam([0] + [4] * 5, [4] * 6)


def survey_payload(**overrides):
    payload = {
        "session_id": "s00001",
        "demographics": valid_demographics(),
        "spane_items": [3] * 12,
        "panas_items": [4] * 10,
        "exhaustion_items": [2] * 6,
        "tam_peou_items": [5] * 6,
        "tam_pu_items": [5] * 6,
    }
    payload.update(overrides)
    return payload


class TestSurveyValidation:
    def test_valid_payload_scores(self):
        response = validate_survey(survey_payload())
        scores = score_survey(response)
        assert scores.spane_balance == scores.spane_p - scores.spane_n
        assert scores.exhaustion_mean == 2.0
        assert scores.peou_mean == 5.0

    def test_missing_demographic_field_rejected(self):
        demo = valid_demographics()
        del demo["gender"]
        with pytest.raises(ValidationError, match="gender"):
            validate_survey(survey_payload(demographics=demo))

    def test_eleven_spane_items_rejected(self):
        with pytest.raises(ValidationError, match="spane"):
            validate_survey(survey_payload(spane_items=[3] * 11))

    def test_out_of_scale_panas_rejected(self):
        with pytest.raises(ValidationError, match="panas"):
            validate_survey(survey_payload(panas_items=[0] + [4] * 9))

    def test_scores_never_clamped(self):
        # an out-of-range vector must raise rather than score
        rng = random.Random(4)
        for _ in range(50):
            items = [rng.randint(1, 5) for _ in range(12)]
            items[rng.randrange(12)] = rng.choice([0, 6, -3, 11])
            with pytest.raises(ValidationError):
                score_spane(items)
