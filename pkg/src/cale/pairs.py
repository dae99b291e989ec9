"""Concept/lemma split partitioning and four-category occurrence pair generation.

Pairs carry one of four categories: same/different concept crossed with
same/different lemma (SC/DC x SL/DL); the binary label is 1 iff same concept.
Held-out splits are defined over concepts and lemmas jointly so evaluation
pairs involve unseen meanings and unseen words.
"""

from __future__ import annotations

import warnings
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import ConceptId, Occurrence
from .errors import CorpusError, CaleError
from .util import round_half_up, stable_hash64, substream


class Split(Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


class LemmaRel(Enum):
    SL = "SL"
    DL = "DL"


class ConceptRel(Enum):
    SC = "SC"
    DC = "DC"


CATEGORIES = ("SC&SL", "SC&DL", "DC&SL", "DC&DL")

# Rejection-sampling attempts before falling back to materializing the
# eligibility set; both paths draw uniformly from the same set.
_MAX_REJECTS = 64


@dataclass(frozen=True)
class SplitSpec:
    val_fraction: float = 0.05
    test_fraction: float = 0.10
    seed: int = 42

    def __post_init__(self) -> None:
        if self.val_fraction <= 0 or self.test_fraction <= 0:
            raise ValueError("val_fraction and test_fraction must be positive")
        if self.val_fraction + self.test_fraction >= 1:
            raise ValueError("val_fraction + test_fraction must be < 1")


@dataclass
class SplitAssignment:
    concept_split: dict[ConceptId, Split]
    lemma_split: dict[str, Split]


@dataclass(frozen=True)
class PairRecord:
    occ_a: str
    occ_b: str
    lemma_rel: LemmaRel
    concept_rel: ConceptRel
    label: int
    split: Split

    def __post_init__(self) -> None:
        if self.occ_a == self.occ_b:
            raise ValueError(f"self-pair {self.occ_a!r}")
        if self.label != (1 if self.concept_rel is ConceptRel.SC else 0):
            raise ValueError("label must be 1 iff the pair shares a concept")

    @property
    def category(self) -> str:
        return f"{self.concept_rel.value}&{self.lemma_rel.value}"


def _split_group(items: Iterable[str], fraction_val: float, fraction_test: float,
                 rng: np.random.Generator, kind: str) -> dict[str, Split]:
    ordered = sorted(set(items))
    n = len(ordered)
    if n == 0:
        raise ValueError(f"cannot partition an empty {kind} set")
    n_val = round_half_up(fraction_val * n)
    n_test = min(round_half_up(fraction_test * n), n - n_val)
    if n_val == 0 or n_test == 0:
        warnings.warn(f"held-out {kind} set is empty for n={n}", stacklevel=3)
    perm = rng.permutation(n)
    assignment: dict[str, Split] = {}
    for rank, idx in enumerate(perm):
        if rank < n_val:
            split = Split.VAL
        elif rank < n_val + n_test:
            split = Split.TEST
        else:
            split = Split.TRAIN
        assignment[ordered[idx]] = split
    return assignment


def partition(concepts: Iterable[ConceptId], lemmas: Iterable[str], spec: SplitSpec) -> SplitAssignment:
    """Sample disjoint held-out concept and lemma subsets; deterministic per seed."""
    return SplitAssignment(
        concept_split=_split_group(concepts, spec.val_fraction, spec.test_fraction,
                                   substream(spec.seed, "concept-split"), "concept"),
        lemma_split=_split_group(lemmas, spec.val_fraction, spec.test_fraction,
                                 substream(spec.seed, "lemma-split"), "lemma"),
    )


def assign_occurrences(occs: Sequence[Occurrence], assignment: SplitAssignment) -> dict[Split, list[Occurrence]]:
    """Route each occurrence to test, then val, then train (held-out triggers win)."""
    out: dict[Split, list[Occurrence]] = {Split.TRAIN: [], Split.VAL: [], Split.TEST: []}
    for occ in occs:
        c_split = assignment.concept_split.get(occ.concept)
        if c_split is None:
            raise CaleError(f"concept {occ.concept!r} missing from the split assignment")
        l_split = assignment.lemma_split.get(occ.lemma)
        if l_split is None:
            raise CaleError(f"lemma {occ.lemma!r} missing from the split assignment")
        if Split.TEST in (c_split, l_split):
            out[Split.TEST].append(occ)
        elif Split.VAL in (c_split, l_split):
            out[Split.VAL].append(occ)
        else:
            out[Split.TRAIN].append(occ)
    return out


def _draw(pool: Sequence[int], rng: np.random.Generator) -> int:
    return pool[int(rng.integers(0, len(pool)))]


def _sample_rejecting(pool: Sequence[int], reject, rng: np.random.Generator) -> int | None:
    """Uniform draw from {x in pool : not reject(x)}; None if that set is empty."""
    for _ in range(_MAX_REJECTS):
        cand = _draw(pool, rng)
        if not reject(cand):
            return cand
    eligible = [x for x in pool if not reject(x)]
    if not eligible:
        return None
    return eligible[int(rng.integers(0, len(eligible)))]


def generate_pairs(occs: Sequence[Occurrence], seed: int, split: Split) -> list[PairRecord]:
    """For each occurrence, sample one partner per category where possible.

    Categories: same concept & same lemma, same concept & different lemma
    (needs a synonym occurrence), different concept & same lemma (needs
    polysemy), different concept & different lemma. Unordered duplicates are
    dropped; each occurrence's random stream depends only on (seed, its id),
    so results are independent of iteration scheduling.
    """
    n = len(occs)
    by_lemma: dict[str, list[int]] = defaultdict(list)
    by_concept: dict[ConceptId, list[int]] = defaultdict(list)
    by_lc: dict[tuple[str, ConceptId], list[int]] = defaultdict(list)
    lc_position: list[int] = []
    for i, occ in enumerate(occs):
        by_lemma[occ.lemma].append(i)
        by_concept[occ.concept].append(i)
        key = (occ.lemma, occ.concept)
        lc_position.append(len(by_lc[key]))
        by_lc[key].append(i)

    records: list[PairRecord] = []
    seen: set[tuple[str, str]] = set()
    for i, occ in enumerate(occs):
        rng = substream(seed, "pair-sampling", stable_hash64(occ.id))
        lemma, concept = occ.lemma, occ.concept
        lc_pool = by_lc[(lemma, concept)]
        l_pool = by_lemma[lemma]
        c_pool = by_concept[concept]

        partners: list[tuple[int | None, ConceptRel, LemmaRel]] = []

        # SC&SL: same (lemma, concept) cell minus self; exact uniform draw.
        if len(lc_pool) >= 2:
            r = int(rng.integers(0, len(lc_pool) - 1))
            pos = lc_position[i]
            partners.append((lc_pool[r if r < pos else r + 1], ConceptRel.SC, LemmaRel.SL))
        else:
            partners.append((None, ConceptRel.SC, LemmaRel.SL))

        # SC&DL: same concept, another lemma.
        if len(c_pool) - len(lc_pool) > 0:
            j = _sample_rejecting(c_pool, lambda x: occs[x].lemma == lemma, rng)
            partners.append((j, ConceptRel.SC, LemmaRel.DL))
        else:
            partners.append((None, ConceptRel.SC, LemmaRel.DL))

        # DC&SL: same lemma, another concept (polysemy).
        if len(l_pool) - len(lc_pool) > 0:
            j = _sample_rejecting(l_pool, lambda x: occs[x].concept == concept, rng)
            partners.append((j, ConceptRel.DC, LemmaRel.SL))
        else:
            partners.append((None, ConceptRel.DC, LemmaRel.SL))

        # DC&DL: unrelated pair.
        if n - len(l_pool) - len(c_pool) + len(lc_pool) > 0:
            j = _sample_rejecting(
                range(n), lambda x: occs[x].lemma == lemma or occs[x].concept == concept, rng
            )
            partners.append((j, ConceptRel.DC, LemmaRel.DL))
        else:
            partners.append((None, ConceptRel.DC, LemmaRel.DL))

        for j, concept_rel, lemma_rel in partners:
            if j is None:
                continue
            other = occs[j]
            key = (occ.id, other.id) if occ.id <= other.id else (other.id, occ.id)
            if key in seen:
                continue
            seen.add(key)
            records.append(
                PairRecord(
                    occ_a=occ.id,
                    occ_b=other.id,
                    lemma_rel=lemma_rel,
                    concept_rel=concept_rel,
                    label=1 if concept_rel is ConceptRel.SC else 0,
                    split=split,
                )
            )
    return records


def build_pair_dataset(occs: Sequence[Occurrence], spec: SplitSpec) -> list[PairRecord]:
    """partition -> assign -> per-split pair generation, in one call."""
    assignment = partition((o.concept for o in occs), (o.lemma for o in occs), spec)
    per_split = assign_occurrences(occs, assignment)
    records: list[PairRecord] = []
    for split in (Split.TRAIN, Split.VAL, Split.TEST):
        records.extend(generate_pairs(per_split[split], spec.seed, split))
    return records


def pair_stats(pairs: Sequence[PairRecord]) -> dict:
    """Counts per split and category, label-1 share, unique occurrences."""
    report: dict = {"splits": {}, "total_pairs": len(pairs)}
    for split in (Split.TRAIN, Split.VAL, Split.TEST):
        subset = [p for p in pairs if p.split is split]
        categories = {c: 0 for c in CATEGORIES}
        occ_ids: set[str] = set()
        label1 = 0
        same_lemma = 0
        for p in subset:
            categories[p.category] += 1
            label1 += p.label
            same_lemma += p.lemma_rel is LemmaRel.SL
            occ_ids.add(p.occ_a)
            occ_ids.add(p.occ_b)
        total = len(subset)
        report["splits"][split.value] = {
            "total": total,
            "same_concept": label1,
            "different_concept": total - label1,
            "same_lemma": same_lemma,
            "different_lemma": total - same_lemma,
            "label1_share": (label1 / total) if total else 0.0,
            "categories": categories,
            "unique_occurrences": len(occ_ids),
        }
    return report


def write_pairs(pairs: Sequence[PairRecord], path: str | Path) -> None:
    """Tab-separated records sorted by (split, occ_a, occ_b)."""
    ordered = sorted(pairs, key=lambda p: (p.split.value, p.occ_a, p.occ_b))
    with open(path, "w", encoding="utf-8") as f:
        for p in ordered:
            f.write(
                f"{p.occ_a}\t{p.occ_b}\t{p.lemma_rel.value}\t{p.concept_rel.value}\t{p.label}\t{p.split.value}\n"
            )


def read_pairs(path: str | Path) -> list[PairRecord]:
    records: list[PairRecord] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 6:
                raise CorpusError(f"{path}:{lineno}: expected 6 tab-separated fields")
            occ_a, occ_b, lemma_rel, concept_rel, label, split = parts
            try:
                records.append(
                    PairRecord(
                        occ_a=occ_a,
                        occ_b=occ_b,
                        lemma_rel=LemmaRel(lemma_rel),
                        concept_rel=ConceptRel(concept_rel),
                        label=int(label),
                        split=Split(split),
                    )
                )
            except ValueError as e:
                raise CorpusError(f"{path}:{lineno}: {e}") from None
    return records
