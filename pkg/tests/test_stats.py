"""Bootstrap resampling, agreement coefficients, stratified sampling."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ciraudit import (
    BootstrapConfig,
    DataError,
    LabelMatrix,
    between_split_delta_ci,
    bootstrap_mean_ci,
    cohen_kappa,
    fleiss_kappa,
    krippendorff_alpha_nominal,
    paired_delta_ci,
    pairwise_agreement,
    stratified_sample,
)

from oracles import oracle_cohen, oracle_fleiss, oracle_krippendorff

DATA = Path(__file__).parent / "data"


# ---------------------------------------------------------------------------
# Bootstrap


class TestBootstrapMean:
    def test_constant_data_zero_width(self):
        ci = bootstrap_mean_ci([0.25] * 25, BootstrapConfig(resamples=200))
        assert ci.estimate == ci.lower == ci.upper == 0.25

    def test_deterministic_in_seed(self):
        data = [0.1, 0.9, 0.4, 0.4, 0.7, 0.2]
        config = BootstrapConfig(resamples=500, master_seed=123)
        assert bootstrap_mean_ci(data, config) == bootstrap_mean_ci(data, config)

    def test_seed_matters(self):
        data = [0.1, 0.9, 0.4, 0.45, 0.7, 0.2, 0.65]
        a = bootstrap_mean_ci(data, BootstrapConfig(resamples=99, master_seed=1))
        b = bootstrap_mean_ci(data, BootstrapConfig(resamples=99, master_seed=2))
        assert a != b

    def test_substream_per_resample(self):
        # Resample i draws from an independent child stream keyed by
        # (master_seed, i), so each statistic is reproducible in isolation.
        data = np.linspace(0.0, 1.0, 11)
        config = BootstrapConfig(resamples=64, master_seed=9)
        ci = bootstrap_mean_ci(data, config)
        stats = []
        for i in range(64):
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((9, i))))
            stats.append(data[rng.integers(0, 11, size=11)].mean())
        stats.sort()
        lower = stats[int(np.ceil(0.025 * 64)) - 1]
        upper = stats[int(np.ceil(0.975 * 64)) - 1]
        assert ci.lower == pytest.approx(lower)
        assert ci.upper == pytest.approx(upper)

    def test_interval_brackets_median(self):
        # Shrinking the confidence toward zero collapses the percentile
        # interval onto the nearest-rank median of the resample distribution,
        # which any wider interval from the same resamples must bracket.
        rng = np.random.default_rng(5)
        data = rng.exponential(size=40)
        wide = bootstrap_mean_ci(data, BootstrapConfig(resamples=400))
        point = bootstrap_mean_ci(
            data, BootstrapConfig(resamples=400, confidence=1e-12)
        )
        median = point.lower
        assert wide.lower <= median <= wide.upper

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            bootstrap_mean_ci([], BootstrapConfig(resamples=10))

    def test_bad_config_rejected(self):
        with pytest.raises(DataError):
            BootstrapConfig(resamples=0)
        with pytest.raises(DataError):
            BootstrapConfig(confidence=1.5)

    @given(
        values=st.lists(
            st.floats(min_value=0.0, max_value=1.0), min_size=2, max_size=20
        ),
        seed=st.integers(0, 100),
    )
    @settings(max_examples=30, deadline=None)
    def test_interval_orders(self, values, seed):
        ci = bootstrap_mean_ci(
            values, BootstrapConfig(resamples=120, master_seed=seed)
        )
        assert ci.lower <= ci.upper
        assert min(values) - 1e-12 <= ci.lower
        assert ci.upper <= max(values) + 1e-12


class TestPairedDelta:
    def test_constant_shift_is_exact(self):
        pairs = {
            f"q{i}": [(0.5 + 0.25, 0.5), (0.125 + 0.25, 0.125)]
            for i in range(12)
        }
        ci = paired_delta_ci(pairs, BootstrapConfig(resamples=300))
        assert ci.estimate == 0.25
        assert ci.lower == 0.25
        assert ci.upper == 0.25

    def test_query_level_pairing(self):
        # Two retrievers disagree wildly per query, but their within-query
        # mean delta is constant, so the interval still collapses.
        pairs = {
            f"q{i}": [(1.0, 0.0), (0.0, 0.5)] for i in range(9)
        }
        ci = paired_delta_ci(pairs, BootstrapConfig(resamples=200))
        assert ci.lower == ci.upper == pytest.approx(0.25)

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            paired_delta_ci({}, BootstrapConfig(resamples=10))
        with pytest.raises(DataError):
            paired_delta_ci({"q": []}, BootstrapConfig(resamples=10))

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        pairs = {
            f"q{i}": [(float(rng.random()), float(rng.random()))]
            for i in range(15)
        }
        config = BootstrapConfig(resamples=250, master_seed=7)
        assert paired_delta_ci(pairs, config) == paired_delta_ci(pairs, config)


class TestBetweenSplitDelta:
    def test_sign_and_estimate(self):
        a = [1.0, 1.0, 1.0, 1.0]
        b = [0.0, 0.0, 0.0, 0.0]
        ci = between_split_delta_ci(a, b, BootstrapConfig(resamples=100))
        assert ci.estimate == 1.0
        assert ci.lower == ci.upper == 1.0

    def test_deterministic(self):
        rng = np.random.default_rng(11)
        a = rng.random(30).tolist()
        b = rng.random(20).tolist()
        config = BootstrapConfig(resamples=300, master_seed=4)
        first = between_split_delta_ci(a, b, config)
        assert first == between_split_delta_ci(a, b, config)
        assert first.lower <= first.upper

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            between_split_delta_ci([], [1.0], BootstrapConfig(resamples=10))


# ---------------------------------------------------------------------------
# Agreement coefficients


def grid(rows: list[list], raters: list[str] | None = None) -> LabelMatrix:
    raters = raters or [f"r{j}" for j in range(len(rows[0]))]
    items = [f"i{i}" for i in range(len(rows))]
    labels = {
        (items[i], raters[j]): rows[i][j]
        for i in range(len(rows))
        for j in range(len(rows[0]))
        if rows[i][j] is not None
    }
    return LabelMatrix(item_ids=tuple(items), rater_ids=tuple(raters), labels=labels)


LABEL_ROWS = st.integers(2, 4).flatmap(
    lambda raters: st.lists(
        st.lists(st.sampled_from(["V", "I", "B"]), min_size=raters, max_size=raters),
        min_size=2,
        max_size=12,
    )
)


class TestFleissKappa:
    def test_perfect_agreement(self):
        rows = [["V"] * 3, ["I"] * 3, ["V"] * 3, ["I"] * 3]
        assert fleiss_kappa(grid(rows)) == pytest.approx(1.0)

    def test_three_raters_two_items(self):
        rows = [["V", "V", "I"], ["V", "I", "I"]]
        assert fleiss_kappa(grid(rows)) == pytest.approx(-1 / 3)

    def test_single_category_degenerates(self):
        assert fleiss_kappa(grid([["V", "V"], ["V", "V"]])) is None

    def test_uneven_rater_counts_rejected(self):
        rows = [["V", "V", "I"], ["V", None, "I"]]
        with pytest.raises(DataError):
            fleiss_kappa(grid(rows))

    @given(rows=LABEL_ROWS)
    @settings(max_examples=150, deadline=None)
    def test_matches_oracle(self, rows):
        got = fleiss_kappa(grid(rows))
        want = oracle_fleiss(rows)
        if want is None:
            assert got is None
        else:
            assert got == pytest.approx(want, abs=1e-12)

    @given(rows=LABEL_ROWS)
    @settings(max_examples=80, deadline=None)
    def test_relabelling_invariance(self, rows):
        swap = {"V": "I", "I": "B", "B": "V"}
        renamed = [[swap[x] for x in row] for row in rows]
        a = fleiss_kappa(grid(rows))
        b = fleiss_kappa(grid(renamed))
        if a is None:
            assert b is None
        else:
            assert a == pytest.approx(b, abs=1e-12)


class TestKrippendorffAlpha:
    def test_perfect_agreement(self):
        rows = [["V"] * 3, ["I"] * 3]
        assert krippendorff_alpha_nominal(grid(rows)) == pytest.approx(1.0)

    def test_three_raters_two_items(self):
        rows = [["V", "V", "I"], ["V", "I", "I"]]
        assert krippendorff_alpha_nominal(grid(rows)) == pytest.approx(-1 / 9)

    def test_single_label_items_excluded(self):
        rows = [["V", "V", "I"], ["V", "I", "I"], ["B", None, None]]
        with_extra = krippendorff_alpha_nominal(grid(rows))
        without = krippendorff_alpha_nominal(grid(rows[:2]))
        assert with_extra == pytest.approx(without)

    def test_all_one_category(self):
        assert krippendorff_alpha_nominal(grid([["V", "V"], ["V", "V"]])) is None

    def test_no_usable_items_rejected(self):
        rows = [["V", None, None]]
        with pytest.raises(DataError):
            krippendorff_alpha_nominal(grid(rows))

    @given(rows=LABEL_ROWS)
    @settings(max_examples=150, deadline=None)
    def test_matches_oracle(self, rows):
        got = krippendorff_alpha_nominal(grid(rows))
        want = oracle_krippendorff(rows)
        if want is None:
            assert got is None
        else:
            assert got == pytest.approx(want, abs=1e-12)

    @given(rows=LABEL_ROWS)
    @settings(max_examples=80, deadline=None)
    def test_relabelling_invariance(self, rows):
        swap = {"V": "I", "I": "B", "B": "V"}
        renamed = [[swap[x] for x in row] for row in rows]
        a = krippendorff_alpha_nominal(grid(rows))
        b = krippendorff_alpha_nominal(grid(renamed))
        if a is None:
            assert b is None
        else:
            assert a == pytest.approx(b, abs=1e-12)


class TestCohenKappa:
    def test_perfect(self):
        assert cohen_kappa(["V", "I", "V"], ["V", "I", "V"]) == pytest.approx(1.0)

    def test_constant_raters_degenerate(self):
        assert cohen_kappa(["V", "V"], ["V", "V"]) is None

    def test_length_mismatch_rejected(self):
        with pytest.raises(DataError):
            cohen_kappa(["V"], ["V", "I"])

    @given(
        n=st.integers(2, 12),
        data=st.data(),
    )
    @settings(max_examples=150, deadline=None)
    def test_matches_oracle(self, n, data):
        cats = ["V", "I", "B"]
        a = data.draw(st.lists(st.sampled_from(cats), min_size=n, max_size=n))
        b = data.draw(st.lists(st.sampled_from(cats), min_size=n, max_size=n))
        got = cohen_kappa(a, b)
        want = oracle_cohen(a, b)
        if want is None:
            assert got is None
        else:
            assert got == pytest.approx(want, abs=1e-12)


class TestPairwiseAgreement:
    def as_sets(self, rows):
        return [
            [frozenset() if x == "V" else frozenset({"issue"}) for x in row]
            for row in rows
        ]

    def test_small_case(self):
        rows = self.as_sets([["V", "V", "I"], ["V", "I", "I"], ["V", "V", "V"]])
        result = pairwise_agreement(grid(rows))
        assert set(result.kappas) == {("r0", "r1"), ("r0", "r2"), ("r1", "r2")}
        assert result.unanimous_rate == pytest.approx(1 / 3)

    def test_signature_rates_use_full_sets(self):
        rows = [
            [frozenset(), frozenset({"a"})],
            [frozenset({"a", "b"}), frozenset({"a"})],
            [frozenset({"a"}), frozenset({"a"})],
        ]
        result = pairwise_agreement(grid(rows))
        assert result.signature_rates[("r0", "r1")] == pytest.approx(1 / 3)

    def test_requires_issue_sets(self):
        with pytest.raises(DataError):
            pairwise_agreement(grid([["V", "I"], ["I", "V"]]))

    def test_frozen_reference_fixture(self):
        doc = json.loads((DATA / "agreement_fixture.json").read_text())
        raters = doc["raters"]
        labels = {}
        for i, item in enumerate(doc["items"]):
            for j, rater in enumerate(raters):
                labels[(item, rater)] = (
                    frozenset() if doc["valid"][i][j] else frozenset({"invalid"})
                )
        matrix = LabelMatrix(
            item_ids=tuple(doc["items"]),
            rater_ids=tuple(raters),
            labels=labels,
        )
        result = pairwise_agreement(matrix)
        assert round(result.mean_kappa, 3) == 0.458
        assert round(result.min_kappa, 3) == 0.280
        assert round(result.max_kappa, 3) == 0.756
        assert result.unanimous_rate == pytest.approx(0.44)
        assert len(result.kappas) == 36


# ---------------------------------------------------------------------------
# Stratified sampling


class TestStratifiedSample:
    LABELS = {
        **{f"a{i}": "composition_required" for i in range(10)},
        **{f"b{i}": "unresolved" for i in range(4)},
    }

    def test_deterministic(self):
        first = stratified_sample(self.LABELS, {"composition_required": 5}, seed=3)
        second = stratified_sample(self.LABELS, {"composition_required": 5}, seed=3)
        assert first == second

    def test_seed_changes_pick(self):
        picks = {
            stratified_sample(
                self.LABELS, {"composition_required": 5}, seed=s
            ).selected["composition_required"]
            for s in range(8)
        }
        assert len(picks) > 1

    def test_sample_is_subset_without_replacement(self):
        sample = stratified_sample(
            self.LABELS, {"composition_required": 6, "unresolved": 2}, seed=0
        )
        comp = sample.selected["composition_required"]
        assert len(comp) == len(set(comp)) == 6
        assert all(self.LABELS[q] == "composition_required" for q in comp)

    def test_shortfall(self):
        sample = stratified_sample(self.LABELS, {"unresolved": 9}, seed=0)
        assert sample.selected["unresolved"] == tuple(
            sorted(q for q, c in self.LABELS.items() if c == "unresolved")
        )
        assert sample.shortfall["unresolved"] == 5

    def test_missing_stratum(self):
        sample = stratified_sample(self.LABELS, {"shortcut_text": 3}, seed=0)
        assert sample.selected["shortcut_text"] == ()
        assert sample.shortfall["shortcut_text"] == 3

    def test_negative_request_rejected(self):
        with pytest.raises(DataError):
            stratified_sample(self.LABELS, {"unresolved": -1})

    def test_all_ids_flat(self):
        sample = stratified_sample(
            self.LABELS, {"composition_required": 2, "unresolved": 2}, seed=1
        )
        ids = sample.all_ids()
        assert len(ids) == 4
        assert len(set(ids)) == 4
