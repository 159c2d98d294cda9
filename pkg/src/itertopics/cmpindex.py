"""Clustering-comparison indices over a shared document universe.

Rand and adjusted Rand are computed in exact integer / rational arithmetic
with a single floating-point division at the end; the information-theoretic
indices use natural-log entropies. The outlier label -1 is treated as an
ordinary cluster: it is a real group of documents in every iteration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .clusterer import Partition
from .errors import InsufficientOverlap, UniverseMismatch
from .fileio import sig6


@dataclass(frozen=True)
class ContingencyTable:
    """Co-membership counts n_ij between the clusters of two partitions."""

    counts: tuple[tuple[int, ...], ...]
    row_labels: tuple[int, ...]
    col_labels: tuple[int, ...]

    @property
    def n(self) -> int:
        return sum(sum(row) for row in self.counts)

    @property
    def row_sums(self) -> tuple[int, ...]:
        return tuple(sum(row) for row in self.counts)

    @property
    def col_sums(self) -> tuple[int, ...]:
        return tuple(sum(col) for col in zip(*self.counts))


@dataclass(frozen=True)
class ComparisonReport:
    rand: float
    ari: float
    vdm: float
    vi: float
    nvi: float
    n_common: int

    def to_dict(self) -> dict[str, float | int]:
        return {
            "n_common": self.n_common,
            "rand": sig6(self.rand),
            "ari": sig6(self.ari),
            "vdm": sig6(self.vdm),
            "vi_nats": sig6(self.vi),
            "nvi": sig6(self.nvi),
        }


def restrict_to_common(a: Partition, b: Partition) -> tuple[Partition, Partition]:
    """Restrict both partitions to the intersection of their universes.

    Labels are kept as-is (including -1). Raises InsufficientOverlap when the
    intersection has fewer than two ids.
    """
    common = sorted(a.universe & b.universe)
    if len(common) < 2:
        raise InsufficientOverlap(f"only {len(common)} ids shared by both partitions")
    return a.restrict(common), b.restrict(common)


def contingency(a: Partition, b: Partition) -> ContingencyTable:
    """Count co-memberships; both partitions must cover the same universe."""
    if a.universe != b.universe:
        raise UniverseMismatch("partitions cover different id sets")
    row_labels = a.labels
    col_labels = b.labels
    ri = {lab: i for i, lab in enumerate(row_labels)}
    ci = {lab: j for j, lab in enumerate(col_labels)}
    counts = [[0] * len(col_labels) for _ in row_labels]
    for doc_id, lab_a in a.assignment.items():
        counts[ri[lab_a]][ci[b.assignment[doc_id]]] += 1
    return ContingencyTable(
        counts=tuple(tuple(row) for row in counts),
        row_labels=tuple(row_labels),
        col_labels=tuple(col_labels),
    )


def _choose2(x: int) -> int:
    return x * (x - 1) // 2


def _pair_sums(ct: ContingencyTable) -> tuple[int, int, int, int]:
    """(sum C(n_ij,2), sum C(a_i,2), sum C(b_j,2), C(n,2)) as exact integers."""
    tp = sum(_choose2(v) for row in ct.counts for v in row)
    sum_a = sum(_choose2(v) for v in ct.row_sums)
    sum_b = sum(_choose2(v) for v in ct.col_sums)
    return tp, sum_a, sum_b, _choose2(ct.n)


def rand_index(ct: ContingencyTable) -> float:
    """(TP + TN) / C(n,2): the fraction of pairs both partitions agree on."""
    if ct.n < 2:
        raise ValueError("need at least two items")
    tp, sum_a, sum_b, total = _pair_sums(ct)
    tn = total - sum_a - sum_b + tp
    return (tp + tn) / total


def adjusted_rand(ct: ContingencyTable) -> float:
    """Chance-corrected Rand index, exact rational arithmetic until the end.

    ARI = (TP - E) / (M - E) with E = sum_a * sum_b / C(n,2) and
    M = (sum_a + sum_b) / 2; M = E degenerates to 1.0 (identical extremes).
    """
    if ct.n < 2:
        raise ValueError("need at least two items")
    tp, sum_a, sum_b, total = _pair_sums(ct)
    expected = Fraction(sum_a * sum_b, total)
    maximum = Fraction(sum_a + sum_b, 2)
    if maximum == expected:
        return 1.0
    return float((Fraction(tp) - expected) / (maximum - expected))


def van_dongen(ct: ContingencyTable) -> float:
    """Normalized set-matching distance: 1 - (sum row maxima + sum col maxima) / 2n."""
    if ct.n < 1:
        raise ValueError("table is empty")
    row_max = sum(max(row) for row in ct.counts)
    col_max = sum(max(col) for col in zip(*ct.counts))
    return 1.0 - (row_max + col_max) / (2 * ct.n)


def _entropy_terms(counts, n: int) -> float:
    """-sum (c/n) ln(c/n) over the given counts, skipping zeros, in order."""
    h = 0.0
    for c in counts:
        if c > 0:
            p = c / n
            h -= p * math.log(p)
    return h


def _joint_entropies(ct: ContingencyTable) -> tuple[float, float, float]:
    n = ct.n
    h_a = _entropy_terms(ct.row_sums, n)
    h_b = _entropy_terms(ct.col_sums, n)
    h_ab = _entropy_terms((v for row in ct.counts for v in row), n)
    return h_a, h_b, h_ab


def variation_of_information(ct: ContingencyTable) -> float:
    """VI = 2 H(A,B) - H(A) - H(B), in nats; exactly 0.0 for identical partitions."""
    if ct.n < 1:
        raise ValueError("table is empty")
    h_a, h_b, h_ab = _joint_entropies(ct)
    # Identical partitions give a diagonal table whose cells are iterated in
    # row order, so h_ab accumulates float-identically to h_a and the
    # expression cancels to exactly 0.0. The max() guards rounding elsewhere.
    return max(2.0 * h_ab - h_a - h_b, 0.0)


def normalized_vi(ct: ContingencyTable) -> float:
    """VI / H(A,B) in [0,1]; defined as 0 when the joint entropy is 0."""
    if ct.n < 1:
        raise ValueError("table is empty")
    h_a, h_b, h_ab = _joint_entropies(ct)
    if h_ab == 0.0:
        return 0.0
    vi = max(2.0 * h_ab - h_a - h_b, 0.0)
    return min(vi / h_ab, 1.0)


def compare(a: Partition, b: Partition) -> ComparisonReport:
    """All five indices on the common universe of two partitions."""
    ra, rb = restrict_to_common(a, b)
    ct = contingency(ra, rb)
    return ComparisonReport(
        rand=rand_index(ct),
        ari=adjusted_rand(ct),
        vdm=van_dongen(ct),
        vi=variation_of_information(ct),
        nvi=normalized_vi(ct),
        n_common=ct.n,
    )


def oracle_pair_counts(a: Partition, b: Partition) -> tuple[int, int, int, int]:
    """Exhaustive (TP, FP, FN, TN) over all C(n,2) document pairs.

    TP: together in both; FP: together in a only; FN: together in b only;
    TN: apart in both. Quadratic; intended for tests on small universes.
    """
    if a.universe != b.universe:
        raise UniverseMismatch("partitions cover different id sets")
    ids = sorted(a.universe)
    la = [a.assignment[i] for i in ids]
    lb = [b.assignment[i] for i in ids]
    tp = fp = fn = tn = 0
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            same_a = la[i] == la[j]
            same_b = lb[i] == lb[j]
            if same_a and same_b:
                tp += 1
            elif same_a:
                fp += 1
            elif same_b:
                fn += 1
            else:
                tn += 1
    return tp, fp, fn, tn
