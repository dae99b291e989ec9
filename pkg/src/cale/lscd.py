"""Lexical semantic change scoring: APD, PRT, and rank correlation with gold
change scores.

For a target word with usage embeddings from two periods T1 (n rows) and T2
(m rows):

    APD = (1 / (n m)) * sum_i sum_j cosine_distance(x_i^T1, x_j^T2)
    PRT = cosine_distance(mean of T1 rows, mean of T2 rows)

Targets with any missing embedding abort with an error; silently dropping
usages would bias APD.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .adapter import AdapterParams, adapt_rows
from .embeddings import EmbeddingMatrix, cosine_distance, unit_rows
from .errors import CorpusError, CaleError
from .stats import CorrelationResult, spearman, steiger_z
from .util import parallel_map


@dataclass(frozen=True)
class DiachronicTarget:
    word: str
    usages_t1: tuple[str, ...]
    usages_t2: tuple[str, ...]
    gold_change: float

    def __post_init__(self) -> None:
        if not self.usages_t1 or not self.usages_t2:
            raise ValueError(f"target {self.word!r}: both usage sets must be non-empty")
        if set(self.usages_t1) & set(self.usages_t2):
            raise ValueError(f"target {self.word!r}: usage id sets must be disjoint")


def _rows(target: DiachronicTarget, embeddings: EmbeddingMatrix,
          adapter: AdapterParams | None):
    try:
        r1 = embeddings.rows[embeddings.row_indices(target.usages_t1)]
        r2 = embeddings.rows[embeddings.row_indices(target.usages_t2)]
    except KeyError as e:
        raise CaleError(f"target {target.word!r}: {e.args[0]}") from None
    if adapter is not None:
        r1 = adapt_rows(r1, adapter)
        r2 = adapt_rows(r2, adapter)
    return r1, r2


def apd(target: DiachronicTarget, embeddings: EmbeddingMatrix,
        adapter: AdapterParams | None = None) -> float:
    """Average pairwise cosine distance across the two periods."""
    r1, r2 = _rows(target, embeddings, adapter)
    sims = np.clip(unit_rows(r1) @ unit_rows(r2).T, -1.0, 1.0)
    return float(np.mean(1.0 - sims))


def prt(target: DiachronicTarget, embeddings: EmbeddingMatrix,
        adapter: AdapterParams | None = None) -> float:
    """Cosine distance between the two per-period prototype (mean) vectors."""
    r1, r2 = _rows(target, embeddings, adapter)
    p1 = r1.astype(np.float64).mean(axis=0)
    p2 = r2.astype(np.float64).mean(axis=0)
    return cosine_distance(p1, p2)


def score_targets(targets: Sequence[DiachronicTarget], embeddings: EmbeddingMatrix,
                  adapter: AdapterParams | None = None,
                  threads: int = 1) -> list[tuple[str, float, float]]:
    """(word, apd, prt) per target; per-target work is order-preserving parallel."""
    def one(t: DiachronicTarget) -> tuple[str, float, float]:
        return t.word, apd(t, embeddings, adapter), prt(t, embeddings, adapter)

    return parallel_map(one, targets, threads)


def rank_against_gold(targets: Sequence[DiachronicTarget],
                      score_fn: Callable[[DiachronicTarget], float]) -> CorrelationResult:
    """Spearman correlation between predicted and gold change scores."""
    if len(targets) < 3:
        raise ValueError(f"rank correlation requires at least 3 targets, got {len(targets)}")
    predicted = [score_fn(t) for t in targets]
    gold = [t.gold_change for t in targets]
    return spearman(predicted, gold)


def load_gold(path: str | Path) -> dict[str, float]:
    """`word<TAB>gold_change` per line."""
    gold: dict[str, float] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise CorpusError(f"{path}:{lineno}: expected `word<TAB>gold_change`")
            if parts[0] in gold:
                raise CorpusError(f"{path}:{lineno}: duplicate word {parts[0]!r}")
            try:
                gold[parts[0]] = float(parts[1])
            except ValueError:
                raise CorpusError(f"{path}:{lineno}: bad change score {parts[1]!r}") from None
    return gold


def load_usages(path: str | Path) -> dict[str, tuple[list[str], list[str]]]:
    """`word<TAB>period(1|2)<TAB>occ_id` per line, grouped per word."""
    usages: dict[str, tuple[list[str], list[str]]] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3 or parts[1] not in ("1", "2"):
                raise CorpusError(f"{path}:{lineno}: expected `word<TAB>period(1|2)<TAB>occ_id`")
            word, period, occ_id = parts
            slot = usages.setdefault(word, ([], []))
            slot[0 if period == "1" else 1].append(occ_id)
    return usages


def build_targets(gold: dict[str, float],
                  usages: dict[str, tuple[list[str], list[str]]]) -> list[DiachronicTarget]:
    """Join gold scores with usage lists; every gold word needs both periods."""
    targets: list[DiachronicTarget] = []
    for word in sorted(gold):
        if word not in usages:
            raise CaleError(f"gold word {word!r} has no usage list")
        t1, t2 = usages[word]
        try:
            targets.append(DiachronicTarget(word=word, usages_t1=tuple(t1),
                                            usages_t2=tuple(t2), gold_change=gold[word]))
        except ValueError as e:
            raise CaleError(str(e)) from None
    extra = set(usages) - set(gold)
    if extra:
        raise CaleError(f"usage words without gold scores: {sorted(extra)[:5]}")
    return targets


def summarize(targets: Sequence[DiachronicTarget],
              scores: Sequence[tuple[str, float, float]]) -> dict:
    """Per-measure Spearman against gold plus a dependent-correlation contrast.

    The contrast applies the shared-variable Z test to the rank-transformed
    variables (gold shared; APD vs PRT scores).
    """
    apd_by_word = {w: a for w, a, _ in scores}
    prt_by_word = {w: p for w, _, p in scores}
    apd_scores = [apd_by_word[t.word] for t in targets]
    prt_scores = [prt_by_word[t.word] for t in targets]
    gold = [t.gold_change for t in targets]
    rho_apd = spearman(apd_scores, gold)
    rho_prt = spearman(prt_scores, gold)
    summary = {
        "n_targets": len(targets),
        "spearman": {"apd": rho_apd.to_dict(), "prt": rho_prt.to_dict()},
    }
    try:
        r_kh = spearman(apd_scores, prt_scores).coefficient
        z, p = steiger_z(rho_apd.coefficient, rho_prt.coefficient, r_kh, len(targets))
        summary["steiger_apd_vs_prt"] = {"z": z, "p_value": p}
    except ValueError as e:
        summary["steiger_apd_vs_prt"] = {"error": str(e)}
    return summary
