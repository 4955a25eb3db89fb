"""Local document corpus: BM25 search and exact-title article retrieval.

On disk a corpus is either a directory of ``.txt`` files (file stem = document
id, first line = title, remaining lines = body) or one JSON-lines file with
``id``, ``title`` and ``body`` fields per record.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .formal import HostError, HostFunction

K1 = 1.2
B = 0.75
TITLE_WEIGHT = 2
DEFAULT_K = 5
SNIPPET_CHARS = 300

_TERM_RE = re.compile(r"[a-z0-9]+")


class CorpusError(ValueError):
    pass


class DuplicateId(CorpusError):
    pass


class DuplicateTitle(CorpusError):
    pass


class NotFound(CorpusError, LookupError):
    def __init__(self, title: str, suggestions: Sequence[str]):
        hint = f" Closest titles: {', '.join(suggestions)}." if suggestions else " The corpus is empty."
        super().__init__(f"no article titled {title!r}.{hint}")
        self.title = title
        self.suggestions = list(suggestions)


@dataclass(frozen=True)
class Document:
    id: str
    title: str
    body: str


def terms(text: str) -> list[str]:
    return _TERM_RE.findall(text.lower())


class CorpusIndex:
    """Immutable BM25 index. Build a new one to change the document set."""

    def __init__(self, documents: Iterable[Document] = ()):
        docs = tuple(documents)
        by_id: dict[str, Document] = {}
        by_title: dict[str, Document] = {}
        for d in docs:
            if d.id in by_id:
                raise DuplicateId(f"duplicate document id {d.id!r}")
            if d.title in by_title:
                raise DuplicateTitle(f"duplicate document title {d.title!r}")
            by_id[d.id] = by_title[d.title] = d
        postings: dict[str, list[tuple[str, int]]] = {}
        lengths: dict[str, int] = {}
        for d in docs:
            tf = Counter(terms(d.body))
            for t in terms(d.title):
                tf[t] += TITLE_WEIGHT
            lengths[d.id] = sum(tf.values())
            for t, n in tf.items():
                postings.setdefault(t, []).append((d.id, n))
        self.documents = docs
        self.by_id = by_id
        self.by_title = by_title
        self.postings = postings
        self.lengths = lengths
        self.avgdl = (sum(lengths.values()) / len(docs)) if docs else 0.0

    def __len__(self) -> int:
        return len(self.documents)

    def idf(self, term: str) -> float:
        n, df = len(self.documents), len(self.postings.get(term, ()))
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))

    def term_score(self, tf: int, length: int, idf: float) -> float:
        norm = 1.0 - B + B * (length / self.avgdl if self.avgdl else 0.0)
        return idf * tf * (K1 + 1.0) / (tf + K1 * norm)

    def search(self, query: str, k: int = DEFAULT_K) -> list[tuple[Document, float]]:
        if k < 1:
            raise ValueError("k must be >= 1")
        scores: dict[str, float] = {}
        for t in dict.fromkeys(terms(query)):
            plist = self.postings.get(t)
            if not plist:
                continue
            idf = self.idf(t)
            for doc_id, tf in plist:
                scores[doc_id] = scores.get(doc_id, 0.0) + self.term_score(tf, self.lengths[doc_id], idf)
        ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
        return [(self.by_id[doc_id], score) for doc_id, score in ranked]

    def retrieve_article(self, title: str) -> Document:
        doc = self.by_title.get(title)
        if doc is None:
            raise NotFound(title, closest_titles(title, self.by_title, 3))
        return doc


def build_index(documents: Iterable[Document]) -> CorpusIndex:
    return CorpusIndex(documents)


def search(index: CorpusIndex, query: str, k: int = DEFAULT_K) -> list[tuple[Document, float]]:
    return index.search(query, k)


def retrieve_article(index: CorpusIndex, title: str) -> Document:
    return index.retrieve_article(title)


def edit_distance(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def closest_titles(title: str, titles: Iterable[str], n: int = 3) -> list[str]:
    return sorted(titles, key=lambda t: (edit_distance(title, t), t))[:n]


def render_hits(hits: Sequence[tuple[Document, float]]) -> str:
    if not hits:
        return "No results."
    return "\n\n".join(f"({rank}) {doc.title}\n{doc.body[:SNIPPET_CHARS]}" for rank, (doc, _) in enumerate(hits, start=1))


def corpus_tools(index: CorpusIndex, default_k: int = DEFAULT_K) -> list[HostFunction]:
    """The ``search`` and ``retrieve_article`` host functions over ``index``."""

    def search_host(query=None, k=default_k, attribute=None):
        text = query if query is not None else attribute
        if not isinstance(text, str) or not text.strip():
            raise HostError("search() needs a query string")
        if not isinstance(k, int) or k < 1:
            raise HostError("k must be a positive integer")
        return render_hits(index.search(text, k))

    def retrieve_host(entity):
        if not isinstance(entity, str):
            raise HostError("retrieve_article() needs a title string")
        try:
            return index.retrieve_article(entity).body
        except NotFound as exc:
            raise HostError(str(exc)) from None

    return [
        HostFunction("search", search_host, "tool-call", f"(query, k={default_k})",
                     "ranked search over the corpus; returns numbered hits with a text excerpt"),
        HostFunction("retrieve_article", retrieve_host, "tool-call", "(entity)",
                     "the full article whose title is exactly entity"),
    ]


# -- IO ---------------------------------------------------------------------


def load_corpus(path: str | Path) -> list[Document]:
    path = Path(path)
    if path.is_dir():
        docs = []
        for f in sorted(path.glob("*.txt")):
            text = f.read_text(encoding="utf-8")
            title, _, body = text.partition("\n")
            docs.append(Document(f.stem, title.strip(), body))
        return docs
    docs = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            r = json.loads(line)
            docs.append(Document(str(r["id"]), r["title"], r["body"]))
        except (ValueError, KeyError, TypeError) as exc:
            raise CorpusError(f"{path}:{lineno}: bad corpus record ({exc})") from None
    return docs


def save_corpus(documents: Iterable[Document], path: str | Path) -> None:
    """Write JSON lines to a ``.jsonl`` path, otherwise a directory of text files."""
    path = Path(path)
    documents = list(documents)
    if path.suffix == ".jsonl":
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(
            "".join(json.dumps({"id": d.id, "title": d.title, "body": d.body}, ensure_ascii=False) + "\n" for d in documents),
            encoding="utf-8",
        )
        return
    path.mkdir(parents=True, exist_ok=True)
    for d in documents:
        if "/" in d.id or d.id.startswith("."):
            raise CorpusError(f"document id {d.id!r} is not a safe file name")
        (path / f"{d.id}.txt").write_text(f"{d.title}\n{d.body}", encoding="utf-8")
