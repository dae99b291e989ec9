"""Embedding-space structure analysis: per-category distance distributions,
silhouette scores under concept or root-category labels, and the correlation
between cosine similarity and taxonomy (Wu-Palmer) similarity.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .adapter import AdapterParams, adapt_rows
from .corpus import ConceptId, Taxonomy
from .embeddings import EmbeddingMatrix, unit_rows
from .pairs import PairRecord, CATEGORIES
from .conceptdiff import ScoredPair
from .stats import CorrelationResult, spearman

DISTANCE_RANGE = (0.0, 2.0)
DEFAULT_BINS = 50


@dataclass
class DistanceDistribution:
    category: str
    bin_edges: np.ndarray  # bins + 1 edges partitioning [0, 2]
    counts: np.ndarray
    mean: float | None
    n: int


@dataclass
class CategoryDistributions:
    distributions: dict[str, DistanceDistribution]
    threshold: float | None


def category_distributions(scored: Sequence[ScoredPair], threshold: float | None = None,
                           bins: int = DEFAULT_BINS) -> CategoryDistributions:
    """Histogram + mean distance for each of the four pair categories."""
    edges = np.linspace(DISTANCE_RANGE[0], DISTANCE_RANGE[1], bins + 1)
    out: dict[str, DistanceDistribution] = {}
    for cat in CATEGORIES:
        dists = np.array([s.distance for s in scored if s.pair.category == cat], dtype=np.float64)
        counts, _ = np.histogram(dists, bins=edges)
        out[cat] = DistanceDistribution(
            category=cat,
            bin_edges=edges,
            counts=counts,
            mean=float(dists.mean()) if dists.size else None,
            n=int(dists.size),
        )
    return CategoryDistributions(distributions=out, threshold=threshold)


def silhouette(rows: np.ndarray, labels: Sequence, block: int = 1024) -> float:
    """Mean silhouette coefficient under cosine distance.

    Per point: a = mean distance to its own cluster (excluding itself),
    b = smallest mean distance to another cluster, score = (b - a) / max(a, b).
    Points in singleton clusters score 0, as does the degenerate a = b = 0 tie.
    """
    rows = np.asarray(rows)
    n = rows.shape[0]
    if n < 2:
        raise ValueError("silhouette requires at least 2 points")
    if len(labels) != n:
        raise ValueError(f"{len(labels)} labels for {n} points")
    unique = sorted(set(labels))
    if len(unique) < 2:
        raise ValueError("silhouette requires at least 2 clusters")
    label_idx = {lab: i for i, lab in enumerate(unique)}
    member = np.array([label_idx[lab] for lab in labels], dtype=np.intp)
    sizes = np.bincount(member, minlength=len(unique)).astype(np.float64)
    onehot = np.zeros((n, len(unique)), dtype=np.float64)
    onehot[np.arange(n), member] = 1.0

    hat = unit_rows(rows)
    scores = np.empty(n, dtype=np.float64)
    for start in range(0, n, block):
        end = min(start + block, n)
        dist = 1.0 - np.clip(hat[start:end] @ hat.T, -1.0, 1.0)
        cluster_sums = dist @ onehot  # (block, n_clusters)
        for local, i in enumerate(range(start, end)):
            own = member[i]
            if sizes[own] == 1:
                scores[i] = 0.0
                continue
            a = (cluster_sums[local, own] - dist[local, i]) / (sizes[own] - 1)
            others = [cluster_sums[local, c] / sizes[c] for c in range(len(unique)) if c != own]
            b = min(others)
            denom = max(a, b)
            scores[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return float(scores.mean())


def wup(taxonomy: Taxonomy, c1: ConceptId, c2: ConceptId) -> float:
    """Wu-Palmer similarity: 2 * depth(lcs) / (depth(c1) + depth(c2)).

    Depth counts nodes on the shortest root path (roots have depth 1); among
    common ancestors the one maximizing the score is used.
    """
    try:
        anc1 = taxonomy.ancestors(c1)
        anc2 = taxonomy.ancestors(c2)
    except KeyError as e:
        raise ValueError(str(e)) from None
    common = anc1 & anc2
    if not common:
        raise ValueError(f"concepts {c1!r} and {c2!r} share no ancestor")
    lcs_depth = max(taxonomy.depth(z) for z in common)
    return 2.0 * lcs_depth / (taxonomy.depth(c1) + taxonomy.depth(c2))


def wup_correlation(pairs: Sequence[PairRecord], occ_concept: Mapping[str, ConceptId],
                    embeddings: EmbeddingMatrix, taxonomy: Taxonomy,
                    adapter: AdapterParams | None = None) -> CorrelationResult:
    """Spearman between per-pair cosine similarity and Wu-Palmer similarity."""
    if len(pairs) < 3:
        raise ValueError("wup correlation requires at least 3 pairs")
    ids = sorted({p.occ_a for p in pairs} | {p.occ_b for p in pairs})
    rows = embeddings.rows[embeddings.row_indices(ids)]
    if adapter is not None:
        rows = adapt_rows(rows, adapter)
    hat = unit_rows(rows)
    local = {occ_id: i for i, occ_id in enumerate(ids)}
    sims: list[float] = []
    wups: list[float] = []
    for p in pairs:
        s = float(np.clip(np.dot(hat[local[p.occ_a]], hat[local[p.occ_b]]), -1.0, 1.0))
        sims.append(s)
        wups.append(wup(taxonomy, occ_concept[p.occ_a], occ_concept[p.occ_b]))
    return spearman(sims, wups)


def unique_beginner_labels(taxonomy: Taxonomy,
                           concepts: Sequence[ConceptId]) -> tuple[dict[ConceptId, ConceptId], list[ConceptId]]:
    """Label each concept with the root category it reaches by the shortest
    upward path (ties broken lexicographically).

    Concepts absent from the taxonomy are skipped and reported back.
    """
    labels: dict[ConceptId, ConceptId] = {}
    skipped: list[ConceptId] = []
    for concept in concepts:
        if concept in labels or concept in skipped:
            continue
        if concept not in taxonomy:
            skipped.append(concept)
            continue
        labels[concept] = _nearest_root(taxonomy, concept)
    return labels, skipped


def _nearest_root(taxonomy: Taxonomy, concept: ConceptId) -> ConceptId:
    frontier = {concept}
    seen = {concept}
    while frontier:
        found = sorted(frontier & taxonomy.roots)
        if found:
            return found[0]
        nxt: set[ConceptId] = set()
        for node in frontier:
            for p in taxonomy.parents.get(node, frozenset()):
                if p not in seen:
                    seen.add(p)
                    nxt.add(p)
        frontier = nxt
    raise ValueError(f"concept {concept!r} reaches no root")  # unreachable post-validation


def write_histogram_csv(dists: CategoryDistributions, path: str | Path) -> None:
    """`category,bin_lo,bin_hi,count` rows for every category and bin."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["category", "bin_lo", "bin_hi", "count"])
        for cat in CATEGORIES:
            dd = dists.distributions[cat]
            for lo, hi, count in zip(dd.bin_edges[:-1], dd.bin_edges[1:], dd.counts):
                writer.writerow([cat, repr(float(lo)), repr(float(hi)), int(count)])


def write_histogram_svg(dists: CategoryDistributions, path: str | Path,
                        width: int = 900, height: int = 600) -> None:
    """Minimal dependency-free SVG: one histogram panel per category with the
    decision threshold as a dashed line."""
    panel_w, panel_h = width // 2, height // 2
    margin = 30
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">'
    ]
    lo, hi = DISTANCE_RANGE
    for i, cat in enumerate(CATEGORIES):
        dd = dists.distributions[cat]
        ox = (i % 2) * panel_w
        oy = (i // 2) * panel_h
        peak = max(1, int(dd.counts.max()) if dd.counts.size else 1)
        plot_w = panel_w - 2 * margin
        plot_h = panel_h - 2 * margin
        parts.append(f'<text x="{ox + margin}" y="{oy + margin - 10}">{cat} (n={dd.n})</text>')
        parts.append(
            f'<rect x="{ox + margin}" y="{oy + margin}" width="{plot_w}" height="{plot_h}" '
            f'fill="none" stroke="#999"/>'
        )
        for edge_lo, edge_hi, count in zip(dd.bin_edges[:-1], dd.bin_edges[1:], dd.counts):
            if count == 0:
                continue
            x = ox + margin + (edge_lo - lo) / (hi - lo) * plot_w
            w = (edge_hi - edge_lo) / (hi - lo) * plot_w
            h = count / peak * plot_h
            parts.append(
                f'<rect x="{x:.2f}" y="{oy + margin + plot_h - h:.2f}" width="{w:.2f}" '
                f'height="{h:.2f}" fill="#4878a8"/>'
            )
        if dists.threshold is not None and lo <= dists.threshold <= hi:
            x = ox + margin + (dists.threshold - lo) / (hi - lo) * plot_w
            parts.append(
                f'<line x1="{x:.2f}" y1="{oy + margin}" x2="{x:.2f}" y2="{oy + margin + plot_h}" '
                f'stroke="#c04040" stroke-dasharray="5,3"/>'
            )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts), encoding="utf-8")
