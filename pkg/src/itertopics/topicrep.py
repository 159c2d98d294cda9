"""Class-based TF-IDF topic representations.

Each topic (the outlier group -1 included) is represented by term weights
W(t,c) = tf(t,c) * ln(1 + A / f(t)), where tf(t,c) counts occurrences of
term t in class c, f(t) is the term's total count over all classes, and A is
the average total token count per class.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .clusterer import Partition
from .errors import MissingId
from .fileio import atomic_write_text, sig6
from .textprep import Document
from .vectorize import Vocabulary, tokenize


@dataclass(frozen=True)
class ClassCounts:
    """Term counts per class label, restricted to the vocabulary."""

    counts: dict[int, dict[str, int]]
    sizes: dict[int, int]

    @property
    def labels(self) -> list[int]:
        return sorted(self.counts)

    def term_totals(self) -> dict[str, int]:
        """f(t): total occurrences of each term across all classes."""
        totals: dict[str, int] = {}
        for table in self.counts.values():
            for term, c in table.items():
                totals[term] = totals.get(term, 0) + c
        return totals


@dataclass(frozen=True)
class TopicRep:
    """Ranked term weights for one topic; name is filled by the final assembly."""

    label: int
    size: int
    terms: tuple[tuple[str, float], ...]
    name: str | None = None

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("size must be >= 1")
        ranked = sorted(self.terms, key=lambda tw: (-tw[1], tw[0]))
        if list(self.terms) != ranked:
            raise ValueError("terms must be sorted by weight desc, ties lexicographic")

    @property
    def vector(self) -> dict[str, float]:
        return dict(self.terms)

    def named(self, name: str) -> "TopicRep":
        return TopicRep(label=self.label, size=self.size, terms=self.terms, name=name)

    def relabeled(self, label: int) -> "TopicRep":
        return TopicRep(label=label, size=self.size, terms=self.terms, name=self.name)


def class_term_counts(part: Partition, docs: Sequence[Document], vocab: Vocabulary) -> ClassCounts:
    """Aggregate vocabulary-term counts over the documents of each class."""
    by_id = {d.id: d for d in docs}
    vocab_terms = set(vocab.terms)
    counts: dict[int, dict[str, int]] = {}
    sizes: dict[int, int] = {}
    for doc_id in sorted(part.assignment):
        if doc_id not in by_id:
            raise MissingId(doc_id)
        label = part.assignment[doc_id]
        table = counts.setdefault(label, {})
        sizes[label] = sizes.get(label, 0) + 1
        for term in tokenize(by_id[doc_id].clean):
            if term in vocab_terms:
                table[term] = table.get(term, 0) + 1
    return ClassCounts(counts=counts, sizes=sizes)


def ctfidf(cc: ClassCounts) -> list[TopicRep]:
    """Weight every class's terms; returns one TopicRep per class, by label."""
    if not cc.counts:
        raise ValueError("need at least one class")
    totals = cc.term_totals()
    n_classes = len(cc.counts)
    avg_tokens = sum(totals.values()) / n_classes
    reps: list[TopicRep] = []
    for label in cc.labels:
        weights = {
            term: tf * math.log(1.0 + avg_tokens / totals[term])
            for term, tf in cc.counts[label].items()
            if tf > 0
        }
        ranked = tuple(sorted(weights.items(), key=lambda tw: (-tw[1], tw[0])))
        reps.append(TopicRep(label=label, size=cc.sizes[label], terms=ranked))
    return reps


def top_terms(rep: TopicRep, k: int = 10) -> list[tuple[str, float]]:
    """The k highest-weight terms (all of them when k exceeds the vocabulary)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return list(rep.terms[:k])


def build_reps(part: Partition, docs: Sequence[Document], vocab: Vocabulary) -> list[TopicRep]:
    """class_term_counts + ctfidf in one step."""
    return ctfidf(class_term_counts(part, docs, vocab))


def merge_vectors(reps: Sequence[TopicRep]) -> dict[int, dict[str, float]]:
    """Representation vectors for the merge step: non-outlier labels only."""
    return {rep.label: rep.vector for rep in reps if rep.label != -1}


def write_topics_json(path: str | Path, reps: Sequence[TopicRep], top_k: int = 10) -> None:
    """topics.json: [{label, size, terms: [{term, weight}...]}], 6 significant digits."""
    payload = []
    for rep in sorted(reps, key=lambda r: r.label):
        row: dict = {"label": rep.label, "size": rep.size}
        if rep.name is not None:
            row["name"] = rep.name
        row["terms"] = [
            {"term": term, "weight": sig6(weight)} for term, weight in top_terms(rep, top_k)
        ]
        payload.append(row)
    atomic_write_text(path, json.dumps(payload, indent=2, ensure_ascii=False) + "\n")


def read_topics_json(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
