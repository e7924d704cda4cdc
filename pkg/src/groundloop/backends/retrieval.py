"""Lexical corpus retrieval over a JSON-lines document fixture."""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from ..interfaces import InterfaceResult

DEFAULT_TOP_K = 3
DEFAULT_EXCERPT_CHARS = 600

_TOKEN = re.compile(r"\w+")


def lex_tokens(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class CorpusDocument:
    doc_id: str
    title: str
    body: str

    def __post_init__(self) -> None:
        if not self.body:
            raise ValueError(f"document '{self.doc_id}' has an empty body")


def load_corpus(path: str | Path) -> list[CorpusDocument]:
    docs: list[CorpusDocument] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            doc = CorpusDocument(doc_id=raw["doc_id"], title=raw["title"], body=raw["body"])
            if doc.doc_id in seen:
                raise ValueError(f"{path}:{lineno}: duplicate doc_id '{doc.doc_id}'")
            seen.add(doc.doc_id)
            docs.append(doc)
    return docs


class Bm25Index:
    """Okapi BM25 with Lucene-style non-negative idf (k1=1.5, b=0.75)."""

    def __init__(self, docs: Sequence[CorpusDocument], k1: float = 1.5, b: float = 0.75) -> None:
        if not docs:
            raise ValueError("corpus must not be empty")
        self.docs = list(docs)
        self.k1 = k1
        self.b = b
        self._term_freqs = [Counter(lex_tokens(d.title + " " + d.body)) for d in self.docs]
        self._doc_lens = [sum(tf.values()) for tf in self._term_freqs]
        self._avgdl = sum(self._doc_lens) / len(self.docs)
        df: Counter = Counter()
        for tf in self._term_freqs:
            df.update(tf.keys())
        n = len(self.docs)
        self._idf = {t: math.log(1.0 + (n - c + 0.5) / (c + 0.5)) for t, c in df.items()}

    def score(self, query: str, doc_index: int) -> float:
        tf = self._term_freqs[doc_index]
        dl = self._doc_lens[doc_index]
        norm = self.k1 * (1.0 - self.b + self.b * dl / self._avgdl)
        total = 0.0
        for term in lex_tokens(query):
            f = tf.get(term, 0)
            if not f:
                continue
            total += self._idf.get(term, 0.0) * f * (self.k1 + 1.0) / (f + norm)
        return total

    def search(self, query: str, k: int) -> list[tuple[CorpusDocument, float]]:
        """Top-k docs by score; ties broken by doc_id ascending."""
        if k < 1:
            raise ValueError("k must be >= 1")
        scored = [(self.score(query, i), d) for i, d in enumerate(self.docs)]
        scored.sort(key=lambda pair: (-pair[0], pair[1].doc_id))
        return [(d, s) for s, d in scored[:k]]


class RetrievalBackend:
    """Answers free-text queries with "title: excerpt" lines from the corpus."""

    def __init__(
        self,
        docs: Iterable[CorpusDocument],
        top_k: int = DEFAULT_TOP_K,
        excerpt_chars: int = DEFAULT_EXCERPT_CHARS,
    ) -> None:
        self.index = Bm25Index(list(docs))
        self.top_k = top_k
        self.excerpt_chars = excerpt_chars

    def __call__(self, query: str) -> InterfaceResult:
        if not query.strip():
            return InterfaceResult(body="Empty retrieval query.", is_error=True)
        hits = self.index.search(query, self.top_k)
        lines = [f"{doc.title}: {doc.body[: self.excerpt_chars]}" for doc, _ in hits]
        return InterfaceResult(body="\n".join(lines))
