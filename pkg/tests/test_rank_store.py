"""Data model, wire formats, and fixture generation."""

from __future__ import annotations

import io
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ciraudit import (
    AUDIT_CATEGORIES,
    AssetRefs,
    BenchmarkManifest,
    Condition,
    DataError,
    RunMatrix,
    RunRecord,
    dump_manifest,
    generate_fixture,
    ingest_runs,
    load_manifest,
    ranks_from_scores,
    serialize_runs,
    validate_matrix,
)

from oracles import oracle_ranks_from_scores


def small_manifest() -> BenchmarkManifest:
    return BenchmarkManifest(
        benchmark_id="demo",
        gallery_size=50,
        query_ids=("q1", "q2"),
        retriever_ids=("ra", "rb"),
        relevance={"q1": frozenset({"g01"}), "q2": frozenset({"g02", "g03"})},
        asset_refs={
            "q1": AssetRefs(
                reference="assets/q1/ref.png",
                text="assets/q1/text.txt",
                targets=("assets/q1/t0.png",),
            )
        },
    )


def matrix_for(manifest: BenchmarkManifest, ranks: dict) -> RunMatrix:
    cells = {}
    for (qid, rid, cond), rs in ranks.items():
        cells[(qid, rid, cond)] = RunRecord(
            query_id=qid,
            retriever_id=rid,
            condition=cond,
            relevant_ranks=tuple(rs),
        )
    return RunMatrix(manifest=manifest, cells=cells)


# ---------------------------------------------------------------------------
# Manifest


class TestManifest:
    def test_round_trip(self):
        manifest = small_manifest()
        text = dump_manifest(manifest)
        again = load_manifest(io.StringIO(text))
        assert again == manifest
        assert dump_manifest(again) == text

    def test_unknown_fields_ignored(self):
        doc = json.loads(dump_manifest(small_manifest()))
        doc["future_extension"] = {"anything": 1}
        doc["queries"][0]["novel"] = True
        loaded = load_manifest(io.StringIO(json.dumps(doc)))
        assert loaded.benchmark_id == "demo"

    def test_relevant_lookup(self):
        manifest = small_manifest()
        assert manifest.relevant("q2") == frozenset({"g02", "g03"})
        with pytest.raises(DataError):
            manifest.relevant("nope")

    def test_duplicate_query_rejected(self):
        doc = json.loads(dump_manifest(small_manifest()))
        doc["queries"].append(doc["queries"][0])
        with pytest.raises(DataError):
            load_manifest(io.StringIO(json.dumps(doc)))

    def test_empty_relevance_rejected(self):
        doc = json.loads(dump_manifest(small_manifest()))
        doc["queries"][0]["relevant"] = []
        with pytest.raises(DataError):
            load_manifest(io.StringIO(json.dumps(doc)))

    def test_malformed_json_rejected(self):
        with pytest.raises(DataError):
            load_manifest(io.StringIO("{broken"))

    def test_not_an_object_rejected(self):
        with pytest.raises(DataError):
            load_manifest(io.StringIO("[1, 2]"))


# ---------------------------------------------------------------------------
# Scores -> ranks


class TestRanksFromScores:
    def test_simple(self):
        scores = [("a", 0.9), ("b", 0.8), ("c", 0.7)]
        assert ranks_from_scores(scores, ["b"]) == [2]
        assert ranks_from_scores(scores, ["a", "c"]) == [1, 3]

    def test_ties_break_by_id(self):
        scores = [("b", 1.0), ("a", 1.0), ("c", 1.0)]
        assert ranks_from_scores(scores, ["a"]) == [1]
        assert ranks_from_scores(scores, ["b"]) == [2]
        assert ranks_from_scores(scores, ["c"]) == [3]

    def test_duplicate_item_rejected(self):
        with pytest.raises(DataError):
            ranks_from_scores([("a", 1.0), ("a", 0.5)], ["a"])

    def test_missing_relevant_rejected(self):
        with pytest.raises(DataError):
            ranks_from_scores([("a", 1.0)], ["zz"])

    def test_non_finite_rejected(self):
        with pytest.raises(DataError):
            ranks_from_scores([("a", float("nan"))], ["a"])

    @given(
        scores=st.dictionaries(
            st.text(alphabet="abcdefgh", min_size=1, max_size=3),
            st.integers(min_value=-5, max_value=5).map(float),
            min_size=1,
            max_size=12,
        ),
        data=st.data(),
    )
    @settings(max_examples=200, deadline=None)
    def test_matches_oracle(self, scores, data):
        items = sorted(scores)
        relevant = data.draw(
            st.sets(st.sampled_from(items), min_size=1, max_size=len(items))
        )
        got = ranks_from_scores(scores.items(), relevant)
        assert got == oracle_ranks_from_scores(scores, relevant)

    @given(
        scores=st.lists(
            st.tuples(
                st.text(alphabet="abcdef", min_size=1, max_size=2),
                st.floats(allow_nan=False, allow_infinity=False, width=32),
            ),
            min_size=1,
            max_size=10,
            unique_by=lambda pair: pair[0],
        )
    )
    @settings(max_examples=100, deadline=None)
    def test_input_order_invariant(self, scores):
        relevant = [scores[0][0]]
        forward = ranks_from_scores(scores, relevant)
        backward = ranks_from_scores(list(reversed(scores)), relevant)
        assert forward == backward


# ---------------------------------------------------------------------------
# Run ingestion and serialization


class TestRunRecords:
    def line(self, **overrides) -> str:
        doc = {
            "query": "q1",
            "retriever": "ra",
            "condition": "mm",
            "relevant_ranks": [3],
        }
        doc.update(overrides)
        return json.dumps(doc)

    def test_ingest_basic(self):
        manifest = small_manifest()
        matrix = ingest_runs(io.StringIO(self.line() + "\n"), manifest)
        record = matrix.get("q1", "ra", Condition.MM)
        assert record is not None and record.relevant_ranks == (3,)
        assert matrix.completeness == "partial"

    def test_unknown_record_fields_ignored(self):
        manifest = small_manifest()
        matrix = ingest_runs(
            io.StringIO(self.line(extra_field="zzz") + "\n"), manifest
        )
        assert matrix.get("q1", "ra", Condition.MM) is not None

    def test_blank_lines_skipped(self):
        manifest = small_manifest()
        matrix = ingest_runs(io.StringIO("\n" + self.line() + "\n\n"), manifest)
        assert len(matrix.cells) == 1

    def test_error_context_names_line(self):
        manifest = small_manifest()
        bad = self.line() + "\n" + self.line(condition="sideways") + "\n"
        with pytest.raises(DataError, match="record 2"):
            ingest_runs(io.StringIO(bad), manifest)

    def test_unknown_query_rejected(self):
        with pytest.raises(DataError, match="query"):
            ingest_runs(io.StringIO(self.line(query="qX")), small_manifest())

    def test_unknown_retriever_rejected(self):
        with pytest.raises(DataError, match="retriever"):
            ingest_runs(io.StringIO(self.line(retriever="rX")), small_manifest())

    def test_duplicate_cell_rejected(self):
        doubled = self.line() + "\n" + self.line(relevant_ranks=[5]) + "\n"
        with pytest.raises(DataError, match="duplicate"):
            ingest_runs(io.StringIO(doubled), small_manifest())

    def test_rank_count_must_match_relevance(self):
        # q2 has two relevant items, so one rank is one short.
        bad = self.line(query="q2", relevant_ranks=[4])
        with pytest.raises(DataError):
            ingest_runs(io.StringIO(bad), small_manifest())

    def test_ranks_must_be_strictly_increasing(self):
        bad = self.line(query="q2", relevant_ranks=[4, 4])
        with pytest.raises(DataError):
            ingest_runs(io.StringIO(bad), small_manifest())

    def test_ranks_must_fit_gallery(self):
        bad = self.line(relevant_ranks=[51])
        with pytest.raises(DataError):
            ingest_runs(io.StringIO(bad), small_manifest())

    def test_serialize_round_trip(self):
        fixture = generate_fixture(
            {"shortcut_text": 2, "unresolved": 1},
            pool_size=2,
            gallery_size=60,
            seed=5,
            include_topk=True,
        )
        matrix = RunMatrix(
            manifest=fixture.manifest,
            cells={
                (r.query_id, r.retriever_id, r.condition): r
                for r in fixture.records
            },
        )
        lines = list(serialize_runs(matrix))
        again = ingest_runs(lines, fixture.manifest)
        assert again.cells == matrix.cells
        assert list(serialize_runs(again)) == lines


class TestValidation:
    def test_strict_rejects_missing(self):
        manifest = small_manifest()
        matrix = matrix_for(manifest, {("q1", "ra", Condition.MM): [1]})
        with pytest.raises(DataError, match="missing"):
            validate_matrix(matrix, "strict")

    def test_allow_missing_reports(self):
        manifest = small_manifest()
        matrix = matrix_for(manifest, {("q1", "ra", Condition.MM): [1]})
        report = validate_matrix(matrix, "allow_missing")
        assert not report.ok
        assert len(report.missing) == 11

    def test_complete_matrix_ok(self):
        fixture = generate_fixture(
            {"shortcut_both": 1, "composition_required": 1},
            pool_size=2,
            gallery_size=40,
            seed=1,
        )
        matrix = RunMatrix(
            manifest=fixture.manifest,
            cells={
                (r.query_id, r.retriever_id, r.condition): r
                for r in fixture.records
            },
        )
        assert validate_matrix(matrix, "strict").ok
        assert matrix.completeness == "complete"

    def test_unknown_policy_rejected(self):
        fixture = generate_fixture(
            {"unresolved": 1}, pool_size=1, gallery_size=30, seed=0
        )
        matrix = RunMatrix(
            manifest=fixture.manifest,
            cells={
                (r.query_id, r.retriever_id, r.condition): r
                for r in fixture.records
            },
        )
        with pytest.raises(DataError):
            validate_matrix(matrix, "lenient")


# ---------------------------------------------------------------------------
# Fixture generation


PLANT = st.fixed_dictionaries(
    {
        cat: st.integers(min_value=0, max_value=4)
        for cat in AUDIT_CATEGORIES
    }
).filter(lambda c: sum(c.values()) > 0)


class TestGenerateFixture:
    def test_deterministic(self):
        kwargs = dict(pool_size=3, gallery_size=120, k=10, seed=42)
        a = generate_fixture({"shortcut_text": 3, "unresolved": 2}, **kwargs)
        b = generate_fixture({"shortcut_text": 3, "unresolved": 2}, **kwargs)
        assert a == b

    def test_seed_changes_output(self):
        a = generate_fixture(
            {"shortcut_text": 3, "unresolved": 2},
            pool_size=3,
            gallery_size=120,
            seed=1,
        )
        b = generate_fixture(
            {"shortcut_text": 3, "unresolved": 2},
            pool_size=3,
            gallery_size=120,
            seed=2,
        )
        assert a != b

    def test_complete_run_set(self):
        fixture = generate_fixture(
            {"shortcut_both": 2, "shortcut_image": 1, "unresolved": 2},
            pool_size=3,
            gallery_size=100,
            seed=9,
        )
        assert len(fixture.records) == 5 * 3 * 3
        assert len(fixture.manifest.query_ids) == 5
        assert set(fixture.labels.values()) == {
            "shortcut_both",
            "shortcut_image",
            "unresolved",
        }

    def test_gallery_too_small_rejected(self):
        with pytest.raises(DataError):
            generate_fixture(
                {"unresolved": 1}, pool_size=1, gallery_size=10, k=10
            )

    def test_unknown_category_rejected(self):
        with pytest.raises(DataError):
            generate_fixture(
                {"mystery": 1}, pool_size=1, gallery_size=50, k=10
            )

    def test_multiple_relevants(self):
        fixture = generate_fixture(
            {"shortcut_both": 2, "composition_required": 2},
            pool_size=2,
            gallery_size=90,
            seed=3,
            relevants_per_query=3,
        )
        for qid in fixture.manifest.query_ids:
            assert len(fixture.manifest.relevant(qid)) == 3
        for record in fixture.records:
            assert len(record.relevant_ranks) == 3
            assert list(record.relevant_ranks) == sorted(
                set(record.relevant_ranks)
            )

    def test_topk_lists_consistent(self):
        fixture = generate_fixture(
            {"shortcut_both": 2, "composition_required": 3},
            pool_size=3,
            gallery_size=80,
            seed=7,
            include_topk=True,
        )
        for record in fixture.records:
            if record.condition is not Condition.MM:
                continue
            topk = record.topk_items
            assert topk is not None
            assert len(topk) == len(set(topk)) == 10
            for item in topk:
                assert item.startswith("g")
                assert 1 <= int(item[1:]) <= fixture.manifest.gallery_size
            relevant = fixture.manifest.relevant(record.query_id)
            for rank in record.relevant_ranks:
                if rank <= len(topk):
                    assert topk[rank - 1] in relevant

    def test_asset_refs_present(self):
        fixture = generate_fixture(
            {"unresolved": 1}, pool_size=1, gallery_size=40, seed=0
        )
        qid = fixture.manifest.query_ids[0]
        refs = fixture.manifest.asset_refs[qid]
        assert refs.reference.endswith("reference.png")
        assert len(refs.targets) == 1

    @given(counts=PLANT, seed=st.integers(min_value=0, max_value=50))
    @settings(max_examples=40, deadline=None)
    def test_records_respect_wire_invariants(self, counts, seed):
        fixture = generate_fixture(
            counts, pool_size=2, gallery_size=70, k=10, seed=seed
        )
        for record in fixture.records:
            assert all(
                1 <= r <= fixture.manifest.gallery_size
                for r in record.relevant_ranks
            )
            assert list(record.relevant_ranks) == sorted(record.relevant_ranks)

    def test_sweep_profile_bands(self):
        counts = {
            "shortcut_both": 4,
            "shortcut_text": 6,
            "shortcut_image": 2,
            "composition_required": 3,
            "unresolved": 5,
        }
        fixture = generate_fixture(
            counts,
            pool_size=3,
            gallery_size=400,
            k=10,
            seed=13,
            sweep_profile={5: 7, 10: 12, 20: 15},
        )
        cells = {
            (r.query_id, r.retriever_id, r.condition): r.relevant_ranks
            for r in fixture.records
        }
        pool = fixture.manifest.retriever_ids

        def best_unimodal(qid):
            best = float("inf")
            for rid in pool:
                for cond in (Condition.TEXT, Condition.IMAGE):
                    best = min(best, min(cells[(qid, rid, cond)]))
            return best

        bests = [best_unimodal(q) for q in fixture.manifest.query_ids]
        assert sum(1 for b in bests if b <= 5) == 7
        assert sum(1 for b in bests if b <= 10) == 12
        assert sum(1 for b in bests if b <= 20) == 15

    def test_sweep_profile_must_cover_cutoff(self):
        with pytest.raises(DataError):
            generate_fixture(
                {"shortcut_text": 2},
                pool_size=1,
                gallery_size=100,
                k=10,
                sweep_profile={5: 1},
            )

    def test_sweep_profile_must_match_shortcut_total(self):
        with pytest.raises(DataError):
            generate_fixture(
                {"shortcut_text": 2, "unresolved": 1},
                pool_size=1,
                gallery_size=100,
                k=10,
                sweep_profile={10: 3},
            )
