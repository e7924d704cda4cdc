from __future__ import annotations

import ast
import json
import math
from collections import Counter
from pathlib import Path

import pytest

from groundloop.backends.code_exec import CodeExecutor, ExecutionOutcome
from groundloop.backends.kg import RelationBackend, TailEntityBackend, TripleStore, load_triples
from groundloop.backends.retrieval import Bm25Index, RetrievalBackend, lex_tokens, load_corpus
from groundloop.backends.tables import (
    ColumnBackend,
    HeaderBackend,
    RowBackend,
    TableFixture,
    load_tables,
)
from groundloop.config import fixture_path

CORPUS = load_corpus(fixture_path("corpus.jsonl"))
TRIPLES_PATH = fixture_path("triples.jsonl")
TABLE_PATH = fixture_path("tables", "nt-458.json")


def brute_force_bm25(docs, query, k1=1.5, b=0.75):
    """Independent scoring pass over every document with the same formula."""
    texts = [lex_tokens(d.title + " " + d.body) for d in docs]
    n = len(docs)
    avgdl = sum(len(t) for t in texts) / n
    df = Counter()
    for t in texts:
        df.update(set(t))
    scores = []
    for i, terms in enumerate(texts):
        tf = Counter(terms)
        score = 0.0
        for q in lex_tokens(query):
            f = tf.get(q, 0)
            if f:
                idf = math.log(1.0 + (n - df[q] + 0.5) / (df[q] + 0.5))
                score += idf * f * (k1 + 1) / (f + k1 * (1 - b + b * len(terms) / avgdl))
        scores.append((score, docs[i].doc_id))
    return scores


class TestRetrieval:
    def test_capital_of_texas_top_doc_mentions_austin(self):
        backend = RetrievalBackend(CORPUS, top_k=1)
        result = backend("capital of Texas")
        assert not result.is_error
        assert "Austin" in result.body

    def test_ranking_matches_brute_force(self):
        index = Bm25Index(CORPUS)
        for query in ["capital of Texas", "president East Timor", "tennis hard surface", "island Indonesia"]:
            ours = [d.doc_id for d, _ in index.search(query, len(CORPUS))]
            oracle = sorted(brute_force_bm25(CORPUS, query), key=lambda p: (-p[0], p[1]))
            assert ours == [doc_id for _, doc_id in oracle]

    def test_empty_query_is_error(self):
        backend = RetrievalBackend(CORPUS)
        result = backend("   ")
        assert result.is_error and result.body == "Empty retrieval query."

    def test_k_larger_than_corpus(self):
        index = Bm25Index(CORPUS)
        hits = index.search("texas", len(CORPUS) + 50)
        assert len(hits) == len(CORPUS)

    def test_deterministic(self):
        backend = RetrievalBackend(CORPUS)
        assert backend("mobile alabama").body == backend("mobile alabama").body

    def test_excerpt_cap(self):
        backend = RetrievalBackend(CORPUS, top_k=1, excerpt_chars=40)
        body = backend("capital of Texas").body
        title, _, excerpt = body.partition(": ")
        assert len(excerpt) <= 40


@pytest.fixture(scope="module")
def executor():
    return CodeExecutor(timeout_seconds=2.0)


class TestCodeExecutor:

    def test_arithmetic(self, executor):
        result = executor("print(6*7)")
        assert not result.is_error
        assert result.body == "42"

    def test_trailing_expression_echoed(self, executor):
        result = executor("s = 21 / 3\nP = 6 * s\nP")
        assert result.body == "42.0"

    def test_index_error_message(self, executor):
        result = executor("x = []\nprint(x[0])")
        assert result.is_error
        assert result.body == "Error from code executor: list index out of range"

    def test_timeout(self, executor):
        outcome = executor.run("while True: pass")
        assert outcome.timed_out
        assert "timed out" in outcome.error
        assert outcome.wall_time < 2.0 + 1.0  # never blocks past timeout + grace

    def test_no_writes_outside_temp_dir(self, executor, tmp_path):
        before = set(Path.cwd().iterdir())
        result = executor("open('sentinel.txt', 'w').write('x')\nprint('done')")
        assert result.body == "done"
        assert set(Path.cwd().iterdir()) == before
        assert not (Path.cwd() / "sentinel.txt").exists()

    def test_output_cap(self):
        executor = CodeExecutor(timeout_seconds=2.0, output_cap_bytes=64)
        result = executor("print('x' * 10000)")
        assert len(result.body) <= 64

    def test_stdout_and_error_coexist(self, executor):
        outcome = executor.run("print('partial')\nraise ValueError('nope')")
        assert outcome.stdout.strip() == "partial"
        assert outcome.error == "nope"

    def test_timed_out_requires_error(self):
        with pytest.raises(ValueError):
            ExecutionOutcome(stdout="", error=None, timed_out=True, wall_time=0.1)

    def test_missing_interpreter_fails_at_startup(self):
        with pytest.raises(RuntimeError):
            CodeExecutor(interpreter=["/no/such/python"])

    def test_empty_snippet(self, executor):
        assert executor("  ").is_error


def naive_triples():
    rows = []
    for line in TRIPLES_PATH.read_text().splitlines():
        if line.strip():
            rows.append(json.loads(line))
    return rows


class TestKnowledgeGraph:
    store = TripleStore(load_triples(TRIPLES_PATH))

    def test_relations_contains_place_of_birth(self):
        assert "people.person.place_of_birth" in self.store.relations("JaMarcus Russell")

    def test_relations_sorted_unique(self):
        rels = self.store.relations("Mobile")
        assert rels == sorted(set(rels))

    def test_unknown_entity_empty(self):
        backend = RelationBackend(self.store)
        assert backend("No Such Entity").body == "[]"

    def test_tails_jamarcus_birthplace(self):
        assert self.store.tails("JaMarcus Russell", "people.person.place_of_birth") == ["Mobile"]

    def test_tails_mobile_containedby(self):
        tails = self.store.tails("Mobile", "location.location.containedby")
        assert "United States of America" in tails

    def test_oracle_equivalence_exhaustive(self):
        raw = naive_triples()
        entities = {r["head"] for r in raw} | {"Missing Entity"}
        relations = {r["relation"] for r in raw} | {"no.relation"}
        for entity in entities:
            expected = sorted({r["relation"] for r in raw if r["head"] == entity})
            assert self.store.relations(entity) == expected
            for relation in relations:
                expected_tails = []
                for r in raw:
                    if r["head"] == entity and r["relation"] == relation and r["tail"] not in expected_tails:
                        expected_tails.append(r["tail"])
                assert self.store.tails(entity, relation) == expected_tails

    def test_tail_backend_parses_last_comma(self):
        backend = TailEntityBackend(self.store)
        result = backend("JaMarcus Russell, people.person.place_of_birth")
        assert result.body == "['Mobile']"

    def test_tail_backend_missing_comma(self):
        backend = TailEntityBackend(self.store)
        result = backend("JaMarcus Russell")
        assert result.is_error
        assert "Invalid query format" in result.body
        assert "<entity>" in result.body


class TestTables:
    store = load_tables([TABLE_PATH])
    raw = json.loads(TABLE_PATH.read_text())

    def test_headers_match_fixture(self):
        assert self.store.headers("nt-458") == [
            "Outcome", "Date", "Tournament", "Surface", "Partnering",
            "Opponent in the final", "Score in the final",
        ]

    def test_surface_column_hard_count(self):
        column = self.store.column("nt-458", "Surface")
        assert len(column) == 11
        assert column.count("Hard") == 7

    def test_third_row_matches_fixture_file(self):
        assert self.store.row("nt-458", 2) == [str(c) for c in self.raw["rows"][2]]

    def test_oracle_equivalence_exhaustive(self):
        assert self.store.headers("nt-458") == list(self.raw["headers"])
        for j, header in enumerate(self.raw["headers"]):
            assert self.store.column("nt-458", header) == [str(r[j]) for r in self.raw["rows"]]
        for i in range(len(self.raw["rows"])):
            assert self.store.row("nt-458", i) == [str(c) for c in self.raw["rows"][i]]

    def test_unknown_table_named_in_error(self):
        result = HeaderBackend(self.store)("nt-999")
        assert result.is_error and "nt-999" in result.body

    def test_unknown_header_named_in_error(self):
        result = ColumnBackend(self.store)("nt-458, Venue")
        assert result.is_error and "Venue" in result.body

    def test_row_out_of_range(self):
        result = RowBackend(self.store)("nt-458, 99")
        assert result.is_error and "99" in result.body

    def test_row_index_not_integer(self):
        result = RowBackend(self.store)("nt-458, two")
        assert result.is_error

    def test_ragged_rows_rejected(self):
        with pytest.raises(ValueError):
            TableFixture(table_id="bad", headers=("a", "b"), rows=(("1",),))

    def test_column_backend_round_trip(self):
        body = ColumnBackend(self.store)("nt-458, Surface").body
        assert ast.literal_eval(body) == self.store.column("nt-458", "Surface")
