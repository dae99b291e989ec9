"""Threshold-based concept differentiation classification and its metric suite.

A pair is predicted "same concept" (label 1) iff the cosine distance between
its two occurrence embeddings is strictly below the threshold. The threshold
is tuned to maximize plain accuracy; reports carry balanced accuracy (mean of
the two class recalls), positive-class F1, per-category accuracies, and the
same-lemma / different-lemma restricted sub-reports. The 1L1C baseline
predicts 1 iff the two occurrences share a lemma.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .adapter import AdapterParams, adapt_rows
from .embeddings import EmbeddingMatrix, unit_rows
from .pairs import LemmaRel, PairRecord, CATEGORIES


@dataclass(frozen=True)
class ScoredPair:
    pair: PairRecord
    distance: float


@dataclass
class CdReport:
    threshold: float | None
    ba_all: float
    f1_all: float
    ba_sl: float | None
    ba_dl: float | None
    f1_sl: float | None
    f1_dl: float | None
    category_accuracy: dict[str, float | None]

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "balanced_accuracy": {"all": self.ba_all, "sl": self.ba_sl, "dl": self.ba_dl},
            "f1": {"all": self.f1_all, "sl": self.f1_sl, "dl": self.f1_dl},
            "category_accuracy": dict(self.category_accuracy),
        }


def score_pairs(pairs: Sequence[PairRecord], embeddings: EmbeddingMatrix,
                adapter: AdapterParams | None = None) -> list[ScoredPair]:
    """Cosine distance per pair, optionally through the adapter first."""
    if not pairs:
        return []
    ids = sorted({p.occ_a for p in pairs} | {p.occ_b for p in pairs})
    rows = embeddings.rows[embeddings.row_indices(ids)]
    if adapter is not None:
        rows = adapt_rows(rows, adapter)
    hat = unit_rows(rows)
    local = {occ_id: i for i, occ_id in enumerate(ids)}
    ai = np.array([local[p.occ_a] for p in pairs], dtype=np.intp)
    bi = np.array([local[p.occ_b] for p in pairs], dtype=np.intp)
    sims = np.clip(np.einsum("ij,ij->i", hat[ai], hat[bi]), -1.0, 1.0)
    return [ScoredPair(pair=p, distance=float(1.0 - s)) for p, s in zip(pairs, sims)]


def tune_threshold(scored: Sequence[ScoredPair]) -> float:
    """Threshold maximizing plain accuracy over midpoint+sentinel candidates.

    Candidates are midpoints between consecutive distinct distances plus one
    sentinel below the minimum and one above the maximum; ties break toward
    the smallest threshold.
    """
    if not scored:
        raise ValueError("cannot tune a threshold on an empty pair set")
    distances = np.array([s.distance for s in scored], dtype=np.float64)
    labels = np.array([s.pair.label for s in scored], dtype=np.int64)
    if labels.min() == labels.max():
        raise ValueError("threshold tuning requires both labels to be present")
    order = np.argsort(distances, kind="stable")
    d_sorted = distances[order]
    l_sorted = labels[order]
    uniq = np.unique(d_sorted)
    candidates = np.concatenate(([uniq[0] - 1.0], (uniq[:-1] + uniq[1:]) / 2.0, [uniq[-1] + 1.0]))
    positives_below = np.concatenate(([0], np.cumsum(l_sorted)))
    total_pos = int(labels.sum())
    total = labels.size
    k = np.searchsorted(d_sorted, candidates, side="left")
    tp = positives_below[k]
    # correct = TP + TN = TP + (total_neg - FP) = 2*TP - k + total_neg
    correct = 2 * tp - k + (total - total_pos)
    best = int(np.argmax(correct))
    return float(candidates[best])


def classify(scored: Sequence[ScoredPair], threshold: float) -> np.ndarray:
    """1 iff distance strictly below the threshold (ties go to label 0)."""
    return (np.array([s.distance for s in scored]) < threshold).astype(np.int64)


def baseline_1l1c(pairs: Sequence[PairRecord]) -> np.ndarray:
    """Predict same-concept iff same lemma."""
    return np.array([1 if p.lemma_rel is LemmaRel.SL else 0 for p in pairs], dtype=np.int64)


def _balanced_accuracy(labels: np.ndarray, preds: np.ndarray) -> float | None:
    pos = labels == 1
    neg = ~pos
    if not pos.any() or not neg.any():
        return None
    recall1 = float((preds[pos] == 1).mean())
    recall0 = float((preds[neg] == 0).mean())
    return (recall1 + recall0) / 2.0


def _f1(labels: np.ndarray, preds: np.ndarray) -> float:
    tp = int(((labels == 1) & (preds == 1)).sum())
    fp = int(((labels == 0) & (preds == 1)).sum())
    fn = int(((labels == 1) & (preds == 0)).sum())
    denom = 2 * tp + fp + fn
    return (2 * tp / denom) if denom else 0.0


def metrics(predictions: np.ndarray, pairs: Sequence[PairRecord],
            threshold: float | None = None) -> CdReport:
    if len(pairs) == 0:
        raise ValueError("metrics require at least one pair")
    preds = np.asarray(predictions, dtype=np.int64)
    if preds.shape != (len(pairs),):
        raise ValueError(f"{preds.shape[0]} predictions for {len(pairs)} pairs")
    labels = np.array([p.label for p in pairs], dtype=np.int64)
    sl_mask = np.array([p.lemma_rel is LemmaRel.SL for p in pairs], dtype=bool)

    ba_all = _balanced_accuracy(labels, preds)
    if ba_all is None:
        raise ValueError("balanced accuracy requires both labels to be present")

    category_accuracy: dict[str, float | None] = {}
    cats = np.array([p.category for p in pairs])
    for cat in CATEGORIES:
        mask = cats == cat
        category_accuracy[cat] = float((preds[mask] == labels[mask]).mean()) if mask.any() else None

    def restricted(mask: np.ndarray) -> tuple[float | None, float | None]:
        if not mask.any():
            return None, None
        return _balanced_accuracy(labels[mask], preds[mask]), _f1(labels[mask], preds[mask])

    ba_sl, f1_sl = restricted(sl_mask)
    ba_dl, f1_dl = restricted(~sl_mask)

    return CdReport(
        threshold=threshold,
        ba_all=ba_all,
        f1_all=_f1(labels, preds),
        ba_sl=ba_sl,
        ba_dl=ba_dl,
        f1_sl=f1_sl,
        f1_dl=f1_dl,
        category_accuracy=category_accuracy,
    )
