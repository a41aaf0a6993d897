import json

import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_corpus

from shardsearch.errors import InvalidArgs, RetrievalFailure
from shardsearch.evalkit import Qrels, RunFile
from shardsearch.lexindex import build_index
from shardsearch.results import ranked
from shardsearch.traingen import (
    AnchorRecord,
    SamplingConfig,
    TrainingExample,
    gen_anchor_examples,
    gen_ranking_negatives,
    read_anchor_tsv,
    write_examples_jsonl,
)


class TestTypes:
    def test_anchor_requires_both_fields(self):
        with pytest.raises(InvalidArgs):
            AnchorRecord(anchor_text="", target_doc_id="d1")

    def test_sampling_validates(self):
        with pytest.raises(InvalidArgs):
            SamplingConfig(n_random_negatives=200, pool_depth=100)
        with pytest.raises(InvalidArgs):
            SamplingConfig(n_bm25_negatives=0)

    def test_example_rejects_positive_in_negatives(self):
        with pytest.raises(InvalidArgs):
            TrainingExample(query="q", positive="p", negatives=["a", "p"])

    def test_example_rejects_duplicate_negatives(self):
        with pytest.raises(InvalidArgs):
            TrainingExample(query="q", positive="p", negatives=["a", "a"])


class TestAnchorExamples:
    def setup_method(self):
        self.docs = random_corpus(200, seed=21)
        self.index = build_index(self.docs)

    def test_target_excluded_from_negatives(self):
        target = self.docs[0]
        anchors = [AnchorRecord(anchor_text=target.body, target_doc_id=target.id)]
        cfg = SamplingConfig(n_bm25_negatives=30)
        examples = list(gen_anchor_examples(anchors, self.index, cfg))
        assert len(examples) == 1
        example = examples[0]
        assert example.positive == target.id
        assert target.id not in example.negatives
        assert len(example.negatives) == min(30, len(example.negatives))

    def test_target_ranked_first_gives_next_n(self):
        target = self.docs[3]
        retrieved = self.index.search(target.body, 31)
        anchors = [AnchorRecord(anchor_text=target.body, target_doc_id=target.id)]
        examples = list(gen_anchor_examples(anchors, self.index, SamplingConfig()))
        expected = [e.doc_id for e in retrieved.entries if e.doc_id != target.id][:30]
        assert examples[0].negatives == expected

    def test_small_corpus_sets_short_count(self):
        docs = random_corpus(20, seed=22)
        index = build_index(docs)
        anchors = [AnchorRecord(anchor_text=docs[0].body, target_doc_id=docs[0].id)]
        examples = list(gen_anchor_examples(anchors, index, SamplingConfig()))
        assert examples[0].short_count
        assert len(examples[0].negatives) <= 19

    def test_missing_target_skipped(self, caplog):
        anchors = [AnchorRecord(anchor_text="whatever", target_doc_id="nope")]
        examples = list(gen_anchor_examples(anchors, self.index, SamplingConfig()))
        assert examples == []

    def test_retrieval_failure_aborts(self):
        class Broken:
            def has_doc(self, doc_id):
                return True

            def search(self, query, k, field="body"):
                raise RuntimeError("disk on fire")

        anchors = [AnchorRecord(anchor_text="q", target_doc_id="d")]
        with pytest.raises(RetrievalFailure):
            list(gen_anchor_examples(anchors, Broken(), SamplingConfig()))

    def test_every_negative_is_retrievable(self):
        cfg = SamplingConfig(n_bm25_negatives=10)
        for doc in self.docs[:10]:
            anchors = [AnchorRecord(anchor_text=doc.title, target_doc_id=doc.id)]
            for example in gen_anchor_examples(anchors, self.index, cfg):
                top = set(
                    self.index.search(doc.title, cfg.n_bm25_negatives + 1).doc_ids()
                )
                assert set(example.negatives) <= top


def make_run(qid, n=120):
    return ranked(qid, ((f"r{i:04d}", float(n - i)) for i in range(n)))


class TestRankingNegatives:
    def test_seeded_determinism(self):
        qrels = Qrels({"q1": {"pos1": 1}})
        run = RunFile({"q1": make_run("q1")})
        cfg = SamplingConfig(rng_seed=42)
        first = [e.to_json() for e in gen_ranking_negatives([("q1", "text")], qrels, run, cfg)]
        second = [e.to_json() for e in gen_ranking_negatives([("q1", "text")], qrels, run, cfg)]
        assert first == second
        assert len(json.loads(first[0])["negatives"]) == 10

    def test_different_seed_changes_sample(self):
        qrels = Qrels({"q1": {"pos1": 1}})
        run = RunFile({"q1": make_run("q1")})
        a = next(gen_ranking_negatives([("q1", "t")], qrels, run, SamplingConfig(rng_seed=1)))
        b = next(gen_ranking_negatives([("q1", "t")], qrels, run, SamplingConfig(rng_seed=2)))
        assert a.negatives != b.negatives

    def test_positives_occupying_pool_gives_short_count(self):
        pool = [f"r{i:04d}" for i in range(100)]
        qrels = Qrels({"q1": {doc: 1 for doc in pool[:95]}})
        run = RunFile({"q1": make_run("q1", 100)})
        cfg = SamplingConfig(n_random_negatives=10, pool_depth=100)
        examples = list(gen_ranking_negatives([("q1", "t")], qrels, run, cfg))
        assert len(examples) == 95  # one per positive
        for example in examples:
            assert len(example.negatives) == 5
            assert example.short_count

    def test_query_absent_from_run_skipped(self):
        qrels = Qrels({"q1": {"p": 1}})
        run = RunFile({})
        assert list(gen_ranking_negatives([("q1", "t")], qrels, run, SamplingConfig())) == []

    def test_all_judged_positives_excluded(self):
        run_ids = [f"r{i:04d}" for i in range(50)]
        qrels = Qrels({"q1": {run_ids[3]: 1, run_ids[7]: 1, "offlist": 1}})
        run = RunFile({"q1": make_run("q1", 50)})
        cfg = SamplingConfig(pool_depth=50, n_random_negatives=10)
        for example in gen_ranking_negatives([("q1", "t")], qrels, run, cfg):
            assert run_ids[3] not in example.negatives
            assert run_ids[7] not in example.negatives

    def test_stable_under_query_reordering(self):
        qrels = Qrels({"q1": {"p1": 1}, "q2": {"p2": 1}})
        run = RunFile({"q1": make_run("q1"), "q2": make_run("q2")})
        cfg = SamplingConfig(rng_seed=7)
        forward = {
            e.query: e.negatives
            for e in gen_ranking_negatives([("q1", "q1"), ("q2", "q2")], qrels, run, cfg)
        }
        backward = {
            e.query: e.negatives
            for e in gen_ranking_negatives([("q2", "q2"), ("q1", "q1")], qrels, run, cfg)
        }
        assert forward == backward


class TestJsonlOutput:
    def test_byte_identical_across_runs(self, tmp_path):
        qrels = Qrels({"q1": {"pos": 1}})
        run = RunFile({"q1": make_run("q1")})
        cfg = SamplingConfig(rng_seed=13)
        paths = []
        for name in ("a.jsonl", "b.jsonl"):
            path = tmp_path / name
            write_examples_jsonl(
                gen_ranking_negatives([("q1", "some text")], qrels, run, cfg), path
            )
            paths.append(path.read_bytes())
        assert paths[0] == paths[1]

    def test_resolved_texts(self, tmp_path):
        docs = random_corpus(40, seed=30)
        index = build_index(docs)
        anchors = [AnchorRecord(anchor_text=docs[0].body, target_doc_id=docs[0].id)]
        path = tmp_path / "resolved.jsonl"
        write_examples_jsonl(
            gen_anchor_examples(anchors, index, SamplingConfig(n_bm25_negatives=5)),
            path,
            resolve_text=index.get_stored,
        )
        record = json.loads(path.read_text().splitlines()[0])
        assert record["positive_text"]["body"] == docs[0].body
        assert len(record["negative_texts"]) == len(record["negatives"])

    def test_read_anchor_tsv_skips_bad_lines(self, tmp_path):
        path = tmp_path / "anchors.tsv"
        path.write_text("d1\tsome anchor\nbadline\nd2\tother anchor\n\n", encoding="utf-8")
        records = list(read_anchor_tsv(path))
        assert [(r.target_doc_id, r.anchor_text) for r in records] == [
            ("d1", "some anchor"),
            ("d2", "other anchor"),
        ]


@settings(max_examples=25, deadline=None)
@given(
    positives=st.sets(st.integers(0, 40), min_size=1, max_size=6),
    seed=st.integers(0, 2**32),
    pool_depth=st.integers(10, 60),
)
def test_property_positive_never_among_negatives(positives, seed, pool_depth):
    run_ids = [f"r{i:04d}" for i in range(60)]
    qrels = Qrels({"q": {run_ids[i]: 1 for i in positives}})
    run = RunFile({"q": make_run("q", 60)})
    cfg = SamplingConfig(pool_depth=pool_depth, n_random_negatives=5, rng_seed=seed)
    judged = {run_ids[i] for i in positives}
    examples = list(gen_ranking_negatives([("q", "text")], qrels, run, cfg))
    assert len(examples) == len(positives)
    for example in examples:
        assert example.positive not in example.negatives
        assert not judged & set(example.negatives)
        assert len(set(example.negatives)) == len(example.negatives)
