"""Density-linkage clustering with an explicit outlier label (-1).

The pipeline follows the HDBSCAN construction: core distances, mutual
reachability, a minimum spanning tree, single-linkage condensation with a
minimum cluster size, then EOM or LEAF extraction. A separate merging step
reduces the topic count to a requested target.

Everything is deterministic: ties are broken by explicit rules and the
clustering is invariant to input row order (points are processed in
document-id order internally).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ParseError, DuplicateId, TooFewPoints
from .fileio import atomic_write_text
from .vectorize import EmbeddingMatrix

# Guard against division by zero when turning distances into densities:
# lambda = 1/distance, clamped for zero-distance (duplicate point) merges.
_MIN_DIST = 1e-12
_MAX_LAMBDA = 1e12


class Selection(Enum):
    EOM = "eom"
    LEAF = "leaf"


@dataclass(frozen=True)
class ClusterParams:
    min_cluster_size: int = 15
    min_samples: int | None = None
    selection: Selection = Selection.EOM
    target_n: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.min_cluster_size < 2:
            raise ValueError("min_cluster_size must be >= 2")
        if self.min_samples is not None and self.min_samples < 1:
            raise ValueError("min_samples must be >= 1")
        if self.target_n is not None and self.target_n < 1:
            raise ValueError("target_n must be >= 1")

    @property
    def effective_min_samples(self) -> int:
        return self.min_samples if self.min_samples is not None else self.min_cluster_size


@dataclass(frozen=True)
class Partition:
    """Assignment of every document id in a universe to one integer label.

    Label -1 marks outliers. Canonical partitions number the remaining labels
    0..T-1 by decreasing size (ties by smallest member id); intermediate
    partitions (restrictions, pre-renumber states) may skip labels.
    """

    assignment: dict[str, int]
    merge_warning: bool = field(default=False, compare=False)

    def __post_init__(self):
        for doc_id, label in self.assignment.items():
            if label < -1:
                raise ValueError(f"label {label} for {doc_id!r} below -1")

    @property
    def universe(self) -> frozenset[str]:
        return frozenset(self.assignment)

    @property
    def labels(self) -> list[int]:
        return sorted(set(self.assignment.values()))

    @property
    def n_topics(self) -> int:
        return sum(1 for lab in set(self.assignment.values()) if lab >= 0)

    @property
    def n_groups(self) -> int:
        return len(set(self.assignment.values()))

    def sizes(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for lab in self.assignment.values():
            out[lab] = out.get(lab, 0) + 1
        return out

    def members(self, label: int) -> list[str]:
        return sorted(doc_id for doc_id, lab in self.assignment.items() if lab == label)

    def outlier_ids(self) -> frozenset[str]:
        return frozenset(doc_id for doc_id, lab in self.assignment.items() if lab == -1)

    def restrict(self, ids: Sequence[str]) -> "Partition":
        return Partition({doc_id: self.assignment[doc_id] for doc_id in ids})

    def is_canonical(self) -> bool:
        positives = sorted(lab for lab in set(self.assignment.values()) if lab >= 0)
        return positives == list(range(len(positives)))

    def renumbered(self) -> "Partition":
        """Relabel topics 0..T-1 by decreasing size, ties by smallest member id."""
        groups: dict[int, list[str]] = {}
        for doc_id, lab in self.assignment.items():
            groups.setdefault(lab, []).append(doc_id)
        order = sorted(
            (lab for lab in groups if lab != -1),
            key=lambda lab: (-len(groups[lab]), min(groups[lab])),
        )
        remap = {lab: i for i, lab in enumerate(order)}
        remap[-1] = -1
        return Partition(
            {doc_id: remap[lab] for doc_id, lab in self.assignment.items()},
            merge_warning=self.merge_warning,
        )


@dataclass(frozen=True)
class CondensedNode:
    """One cluster candidate in the condensed tree."""

    id: int
    parent: int | None
    birth_lambda: float
    children: tuple[int, ...]
    # (child id, split lambda, child point count) for each true split
    splits: tuple[tuple[int, float, int], ...]
    # (point index, departure lambda) for points that fall out of this node
    point_departures: tuple[tuple[int, float], ...]
    stability: float

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class CondensedTree:
    nodes: dict[int, CondensedNode]
    root: int
    doc_ids: tuple[str, ...]
    # per point: the condensed node it departed from
    point_node: tuple[int, ...]

    @property
    def n_points(self) -> int:
        return len(self.doc_ids)


def core_distances(emb: EmbeddingMatrix, min_samples: int) -> np.ndarray:
    """Distance from each point to its min_samples-th nearest neighbor (self excluded)."""
    n = emb.n
    if min_samples < 1:
        raise ValueError("min_samples must be >= 1")
    if n <= min_samples:
        raise TooFewPoints(f"need more than min_samples={min_samples} points, got {n}")
    dist = cdist(emb.rows, emb.rows)
    # Self sits at rank 0 with distance 0, so rank min_samples (0-based,
    # self included) is the min_samples-th neighbor excluding self.
    return np.partition(dist, min_samples, axis=1)[:, min_samples]


def mutual_reachability(p: np.ndarray, q: np.ndarray, core_p: float, core_q: float) -> float:
    """max(core(p), core(q), euclidean distance between p and q)."""
    # Route the pair through the same distance kernel as the matrix paths so
    # every public function agrees bitwise on the metric.
    pp = np.atleast_2d(np.asarray(p, dtype=np.float64))
    qq = np.atleast_2d(np.asarray(q, dtype=np.float64))
    d = float(cdist(pp, qq)[0, 0])
    return max(core_p, core_q, d)


def build_mst(emb: EmbeddingMatrix, cores: np.ndarray) -> list[tuple[int, int, float]]:
    """Minimum spanning tree of the complete mutual-reachability graph.

    Prim's algorithm over the dense graph; candidate edges are compared by
    (weight, smaller endpoint, larger endpoint) so the result is unique.
    Returns (i, j, weight) with i < j, in insertion order.
    """
    n = emb.n
    if n < 2:
        raise ValueError("need at least two points")
    dist = cdist(emb.rows, emb.rows)

    in_tree = np.zeros(n, dtype=bool)
    best_w = np.full(n, np.inf)
    best_from = np.full(n, -1, dtype=np.int64)
    edges: list[tuple[int, int, float]] = []

    def edge_key(a: int, b: int, w: float) -> tuple[float, int, int]:
        return (w, min(a, b), max(a, b))

    current = 0
    in_tree[0] = True
    for _ in range(n - 1):
        mr = np.maximum(np.maximum(cores, cores[current]), dist[current])
        better = (~in_tree) & (mr < best_w)
        best_w[better] = mr[better]
        best_from[better] = current
        tied = np.flatnonzero((~in_tree) & (mr == best_w) & (best_from != current))
        for j in tied:
            if edge_key(current, j, mr[j]) < edge_key(best_from[j], j, best_w[j]):
                best_from[j] = current

        masked = np.where(in_tree, np.inf, best_w)
        min_w = masked.min()
        candidates = np.flatnonzero(masked == min_w)
        pick = min(candidates, key=lambda j: edge_key(best_from[j], j, best_w[j]))
        src = int(best_from[pick])
        edges.append((min(src, int(pick)), max(src, int(pick)), float(best_w[pick])))
        in_tree[pick] = True
        current = int(pick)
    return edges


def _single_linkage(edges: list[tuple[int, int, float]], n: int) -> list[tuple[int, int, float, int]]:
    """Merge dendrogram from MST edges, processed by (weight, i, j) ascending.

    Node ids: points 0..n-1, internal merges n..2n-2 in creation order.
    Returns (left, right, distance, count) per merge.
    """
    parent = list(range(n))

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    node_of = list(range(n))
    size = [1] * n
    merges: list[tuple[int, int, float, int]] = []
    next_id = n
    for i, j, w in sorted(edges, key=lambda e: (e[2], e[0], e[1])):
        ra, rb = find(i), find(j)
        merges.append((node_of[ra], node_of[rb], w, size[ra] + size[rb]))
        parent[rb] = ra
        size[ra] += size[rb]
        node_of[ra] = next_id
        next_id += 1
    return merges


def _leaves_under(node: int, merges: list[tuple[int, int, float, int]], n: int) -> list[int]:
    """Point indices under a dendrogram node, ascending."""
    out: list[int] = []
    stack = [node]
    while stack:
        cur = stack.pop()
        if cur < n:
            out.append(cur)
        else:
            left, right, _, _ = merges[cur - n]
            stack.append(left)
            stack.append(right)
    return sorted(out)


def condense_tree(
    mst: list[tuple[int, int, float]],
    min_cluster_size: int,
    doc_ids: Sequence[str] | None = None,
) -> CondensedTree:
    """Prune the single-linkage dendrogram into cluster candidates.

    Walking top-down, a split whose smaller side has < min_cluster_size points
    sheds those points from the parent at that lambda; a split with two big
    sides creates two child nodes. Node stability is the sum over its points
    of (lambda_leave - lambda_birth), where points passed to child nodes leave
    at the split lambda.
    """
    if min_cluster_size < 2:
        raise ValueError("min_cluster_size must be >= 2")
    n = len(mst) + 1
    ids = tuple(doc_ids) if doc_ids is not None else tuple(str(i) for i in range(n))
    if len(ids) != n:
        raise ValueError("doc_ids must match point count")
    merges = _single_linkage(mst, n)

    birth: dict[int, float] = {0: 0.0}
    parent_of: dict[int, int | None] = {0: None}
    splits: dict[int, list[tuple[int, float, int]]] = {0: []}
    departures: dict[int, list[tuple[int, float]]] = {0: []}
    point_node = [0] * n
    next_cond = 1

    def node_count(dn: int) -> int:
        return 1 if dn < n else merges[dn - n][3]

    def shed(dn: int, cond: int, lam: float) -> None:
        for pt in _leaves_under(dn, merges, n):
            departures[cond].append((pt, lam))
            point_node[pt] = cond

    root_dendro = n + len(merges) - 1
    stack: list[tuple[int, int]] = [(root_dendro, 0)]
    while stack:
        dn, cond = stack.pop()
        left, right, dist, _ = merges[dn - n]
        lam = min(1.0 / max(dist, _MIN_DIST), _MAX_LAMBDA)
        lc, rc = node_count(left), node_count(right)
        big_left, big_right = lc >= min_cluster_size, rc >= min_cluster_size
        if big_left and big_right:
            for child_dn, count in ((left, lc), (right, rc)):
                child = next_cond
                next_cond += 1
                birth[child] = lam
                parent_of[child] = cond
                splits[child] = []
                departures[child] = []
                splits[cond].append((child, lam, count))
                stack.append((child_dn, child))
        elif big_left:
            shed(right, cond, lam)
            stack.append((left, cond))
        elif big_right:
            shed(left, cond, lam)
            stack.append((right, cond))
        else:
            shed(left, cond, lam)
            shed(right, cond, lam)

    nodes: dict[int, CondensedNode] = {}
    for nid in birth:
        stability = sum(lam - birth[nid] for _, lam in departures[nid])
        stability += sum(count * (lam - birth[nid]) for _, lam, count in splits[nid])
        nodes[nid] = CondensedNode(
            id=nid,
            parent=parent_of[nid],
            birth_lambda=birth[nid],
            children=tuple(child for child, _, _ in splits[nid]),
            splits=tuple(splits[nid]),
            point_departures=tuple(sorted(departures[nid])),
            stability=stability,
        )
    return CondensedTree(nodes=nodes, root=0, doc_ids=ids, point_node=tuple(point_node))


def _eom_selection(tree: CondensedTree) -> set[int]:
    """Excess-of-mass: keep a node iff its stability beats its best descendants."""
    flagged: dict[int, bool] = {}
    chosen: dict[int, float] = {}
    for nid in sorted(tree.nodes, reverse=True):
        node = tree.nodes[nid]
        below = sum(chosen[c] for c in node.children)
        if node.stability > below:
            flagged[nid] = True
            chosen[nid] = node.stability
        else:
            flagged[nid] = False
            chosen[nid] = below
    selected: set[int] = set()
    stack = [tree.root]
    while stack:
        nid = stack.pop()
        if flagged[nid]:
            selected.add(nid)
        else:
            stack.extend(tree.nodes[nid].children)
    return selected


def select_clusters(tree: CondensedTree, selection: Selection) -> Partition:
    """Extract a flat partition from the condensed tree.

    EOM picks the non-overlapping node set maximizing total stability (the
    root may win); LEAF picks every leaf node. Points outside every selected
    node get label -1. Labels are renumbered by decreasing size.
    """
    if selection is Selection.LEAF:
        selected = {nid for nid, node in tree.nodes.items() if node.is_leaf}
    else:
        selected = _eom_selection(tree)

    assignment: dict[str, int] = {}
    for pt, start in enumerate(tree.point_node):
        nid: int | None = start
        label = -1
        while nid is not None:
            if nid in selected:
                label = nid
                break
            nid = tree.nodes[nid].parent
        assignment[tree.doc_ids[pt]] = label
    return Partition(assignment).renumbered()


def total_selected_stability(tree: CondensedTree, selection: Selection) -> float:
    if selection is Selection.LEAF:
        selected = {nid for nid, node in tree.nodes.items() if node.is_leaf}
    else:
        selected = _eom_selection(tree)
    return sum(tree.nodes[nid].stability for nid in selected)


def _cosine(u: Mapping[str, float], v: Mapping[str, float]) -> float:
    """Cosine similarity of sparse term-weight vectors; zero-norm gives -1."""
    nu = math.sqrt(sum(x * x for x in u.values()))
    nv = math.sqrt(sum(x * x for x in v.values()))
    if nu == 0.0 or nv == 0.0:
        return -1.0
    shorter, longer = (u, v) if len(u) <= len(v) else (v, u)
    dot = sum(w * longer[t] for t, w in shorter.items() if t in longer)
    return dot / (nu * nv)


def reduce_to_target(
    part: Partition,
    reps: Mapping[int, Mapping[str, float]],
    target_n: int,
) -> Partition:
    """Merge topics until at most target_n remain; -1 never merges.

    Each round merges the smallest topic (ties: smallest label) into the
    other topic whose representation vector has the highest cosine similarity
    (ties: smallest label). The merged representation is the vector sum,
    which equals recomputing class weights with the pre-merge normalizers
    frozen. With a single topic left and target still smaller, the partition
    is returned unchanged with merge_warning set.
    """
    if target_n < 0:
        raise ValueError("target_n must be >= 0")
    assignment = dict(part.assignment)
    sizes = {lab: size for lab, size in part.sizes().items() if lab != -1}
    vectors: dict[int, dict[str, float]] = {
        lab: dict(reps[lab]) for lab in sizes
    }

    while len(sizes) > target_n:
        if len(sizes) <= 1:
            return Partition(assignment, merge_warning=True).renumbered()
        src = min(sizes, key=lambda lab: (sizes[lab], lab))
        dst = max(
            (lab for lab in sizes if lab != src),
            key=lambda lab: (_cosine(vectors[src], vectors[lab]), -lab),
        )
        for doc_id, lab in assignment.items():
            if lab == src:
                assignment[doc_id] = dst
        merged = dict(vectors[dst])
        for term, w in vectors[src].items():
            merged[term] = merged.get(term, 0.0) + w
        vectors[dst] = merged
        sizes[dst] += sizes[src]
        del sizes[src], vectors[src]

    return Partition(assignment, merge_warning=part.merge_warning).renumbered()


RepsFn = Callable[[Partition], Mapping[int, Mapping[str, float]]]


def cluster(emb: EmbeddingMatrix, params: ClusterParams, reps_for: RepsFn | None = None) -> Partition:
    """Full pipeline: cores -> MST -> condensed tree -> selection -> optional merge.

    Points are clustered in document-id order regardless of input row order,
    so the result is permutation invariant. When target_n is set and the
    natural topic count exceeds it, reps_for must supply representation
    vectors (by label) for the merge step.
    """
    order = sorted(range(emb.n), key=lambda i: emb.doc_ids[i])
    canon = emb.restrict([emb.doc_ids[i] for i in order])
    cores = core_distances(canon, params.effective_min_samples)
    mst = build_mst(canon, cores)
    tree = condense_tree(mst, params.min_cluster_size, doc_ids=canon.doc_ids)
    part = select_clusters(tree, params.selection)
    if params.target_n is not None and part.n_topics > params.target_n:
        if reps_for is None:
            raise ValueError("target_n set but no representation callback given")
        part = reduce_to_target(part, reps_for(part), params.target_n)
    return part


def write_partition_csv(path: str | Path, part: Partition) -> None:
    """Write `id,label` rows in document-id order."""
    lines = ["id,label"]
    for doc_id in sorted(part.assignment):
        lines.append(f"{doc_id},{part.assignment[doc_id]}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_partition_csv(path: str | Path) -> Partition:
    assignment: dict[str, int] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["id", "label"]:
            raise ParseError("expected header 'id,label'", line=1)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ParseError("expected two fields", line=line_no)
            doc_id, raw = row
            if doc_id in assignment:
                raise DuplicateId(doc_id)
            try:
                label = int(raw)
            except ValueError:
                raise ParseError(f"bad label {raw!r}", line=line_no) from None
            assignment[doc_id] = label
    return Partition(assignment)
