"""In-context lexical similarity over word pairs observed in shared contexts.

Each entry holds two target words and two contexts containing both; the
predicted in-context similarity is the cosine between the two target
embeddings, obtained by marking each target in turn within the same context.

Subtask 1 (contextual change): Pearson correlation between gold and predicted
similarity differences (context 2 minus context 1). Subtask 2 (similarity
ratings): Spearman correlation over each context independently, so it covers
twice as many examples.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .embeddings import cosine_similarity
from .errors import CorpusError
from .stats import CorrelationResult, pearson, spearman
from .util import parallel_map

Encoder = Callable[[Sequence[str], int], np.ndarray]
"""Maps (tokens, target index) to one embedding vector for the marked target."""


@dataclass(frozen=True)
class CoSimContext:
    tokens: tuple[str, ...]
    pos1: int
    pos2: int

    def __post_init__(self) -> None:
        n = len(self.tokens)
        if not (0 <= self.pos1 < n and 0 <= self.pos2 < n):
            raise ValueError(f"target positions ({self.pos1}, {self.pos2}) out of range for {n} tokens")
        if self.pos1 == self.pos2:
            raise ValueError("the two targets must occupy distinct positions")


@dataclass(frozen=True)
class CoSimEntry:
    id: str
    word1: str
    word2: str
    context1: CoSimContext
    context2: CoSimContext
    gold_sim_c1: float
    gold_sim_c2: float


def predict_sim(context: Sequence[str], pos1: int, pos2: int, encoder: Encoder) -> float:
    """Cosine similarity of the two in-context target embeddings.

    The encoder is called twice on the same context, moving the target
    delimiters from one word to the other.
    """
    v1 = encoder(context, pos1)
    v2 = encoder(context, pos2)
    return cosine_similarity(v1, v2)


def predict_entries(entries: Sequence[CoSimEntry], encoder: Encoder,
                    threads: int = 1) -> list[tuple[float, float]]:
    """(pred similarity in context1, in context2) per entry."""
    def one(entry: CoSimEntry) -> tuple[float, float]:
        c1, c2 = entry.context1, entry.context2
        return (
            predict_sim(c1.tokens, c1.pos1, c1.pos2, encoder),
            predict_sim(c2.tokens, c2.pos1, c2.pos2, encoder),
        )

    return parallel_map(one, entries, threads)


def subtask1(entries: Sequence[CoSimEntry],
             predictions: Sequence[tuple[float, float]]) -> CorrelationResult:
    """Pearson correlation of gold vs predicted similarity deltas."""
    if len(entries) != len(predictions):
        raise ValueError(f"{len(predictions)} predictions for {len(entries)} entries")
    if len(entries) < 3:
        raise ValueError("subtask 1 requires at least 3 entries")
    gold_delta = [e.gold_sim_c2 - e.gold_sim_c1 for e in entries]
    pred_delta = [p2 - p1 for p1, p2 in predictions]
    return pearson(gold_delta, pred_delta)


def subtask2(entries: Sequence[CoSimEntry],
             predictions: Sequence[tuple[float, float]]) -> CorrelationResult:
    """Spearman correlation over the flattened per-context ratings."""
    if len(entries) != len(predictions):
        raise ValueError(f"{len(predictions)} predictions for {len(entries)} entries")
    if len(entries) < 3:
        raise ValueError("subtask 2 requires at least 3 entries")
    gold: list[float] = []
    pred: list[float] = []
    for entry, (p1, p2) in zip(entries, predictions):
        gold.extend((entry.gold_sim_c1, entry.gold_sim_c2))
        pred.extend((p1, p2))
    return spearman(pred, gold)


def _context_from_json(obj: dict, where: str) -> CoSimContext:
    try:
        return CoSimContext(tokens=tuple(obj["tokens"]), pos1=obj["pos1"], pos2=obj["pos2"])
    except (KeyError, TypeError, ValueError) as e:
        raise CorpusError(f"{where}: bad context: {e}") from None


def read_entries(path: str | Path) -> list[CoSimEntry]:
    """JSONL, one entry per line with explicit token indices per context."""
    entries: list[CoSimEntry] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusError(f"{where}: invalid JSON: {e.msg}") from None
            try:
                entry = CoSimEntry(
                    id=obj["id"],
                    word1=obj["word1"],
                    word2=obj["word2"],
                    context1=_context_from_json(obj["context1"], where),
                    context2=_context_from_json(obj["context2"], where),
                    gold_sim_c1=float(obj["gold_sim_c1"]),
                    gold_sim_c2=float(obj["gold_sim_c2"]),
                )
            except KeyError as e:
                raise CorpusError(f"{where}: missing field {e.args[0]!r}") from None
            if entry.id in seen:
                raise CorpusError(f"{where}: duplicate entry id {entry.id!r}")
            seen.add(entry.id)
            entries.append(entry)
    return entries


def write_predictions(entries: Sequence[CoSimEntry],
                      predictions: Sequence[tuple[float, float]],
                      path: str | Path) -> None:
    """Cache as `entry_id<TAB>context(1|2)<TAB>pred_sim` so correlations can be
    recomputed without re-encoding."""
    with open(path, "w", encoding="utf-8") as f:
        for entry, (p1, p2) in zip(entries, predictions):
            f.write(f"{entry.id}\t1\t{p1!r}\n")
            f.write(f"{entry.id}\t2\t{p2!r}\n")


def read_predictions(path: str | Path) -> dict[str, tuple[float, float]]:
    partial: dict[str, dict[str, float]] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3 or parts[1] not in ("1", "2"):
                raise CorpusError(f"{path}:{lineno}: expected `entry_id<TAB>context(1|2)<TAB>pred_sim`")
            partial.setdefault(parts[0], {})[parts[1]] = float(parts[2])
    out: dict[str, tuple[float, float]] = {}
    for entry_id, sides in partial.items():
        if set(sides) != {"1", "2"}:
            raise CorpusError(f"{path}: entry {entry_id!r} is missing a context prediction")
        out[entry_id] = (sides["1"], sides["2"])
    return out
