"""Sense-annotated corpus ingestion, occurrence filtering, target markup, and
the hypernym taxonomy.

Corpus files are JSONL, one occurrence per line:
    {"id": str, "tokens": [str], "target_index": int, "lemma": str,
     "pos": "a"|"s"|"n"|"v", "concept": str, "proper_noun": bool}
Taxonomy files are tab-separated edge lists, one `child<TAB>parent` per line;
roots are the nodes that never appear as a child.
"""

from __future__ import annotations

import json
from collections import Counter, deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .errors import CorpusError

ConceptId = str

OPEN_TAG = "<t>"
CLOSE_TAG = "</t>"

MIN_SENTENCE_TOKENS = 10
MAX_SENTENCE_TOKENS = 100
MIN_LEMMA_LETTERS = 3
MIN_LEMMA_POS_OCCURRENCES = 10


class Pos(Enum):
    ADJECTIVE = "a"
    NOUN = "n"
    VERB = "v"


# "a" and "s" satellite adjectives are merged at parse time.
_POS_CODES = {"a": Pos.ADJECTIVE, "s": Pos.ADJECTIVE, "n": Pos.NOUN, "v": Pos.VERB}


@dataclass(frozen=True)
class Occurrence:
    """One annotated target-word usage, delimited by its sentence."""

    id: str
    tokens: tuple[str, ...]
    target_index: int
    lemma: str
    pos: Pos
    concept: ConceptId
    is_proper_noun: bool = False

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("occurrence id must be non-empty")
        if not self.tokens:
            raise ValueError(f"occurrence {self.id!r}: empty token sequence")
        if not (0 <= self.target_index < len(self.tokens)):
            raise ValueError(
                f"occurrence {self.id!r}: target_index {self.target_index} out of range "
                f"for {len(self.tokens)} tokens"
            )
        if not self.concept:
            raise ValueError(f"occurrence {self.id!r}: empty concept id")
        if not self.lemma:
            raise ValueError(f"occurrence {self.id!r}: empty lemma")


@dataclass(frozen=True)
class MarkedSentence:
    """Token sequence with exactly one <t> ... </t> span around the target word."""

    tokens: tuple[str, ...]

    def __post_init__(self) -> None:
        opens = [i for i, t in enumerate(self.tokens) if t == OPEN_TAG]
        closes = [i for i, t in enumerate(self.tokens) if t == CLOSE_TAG]
        if len(opens) != 1 or len(closes) != 1 or closes[0] != opens[0] + 2:
            raise ValueError("marked sentence must contain one <t> w </t> span")

    @property
    def target_word(self) -> str:
        return self.tokens[self.tokens.index(OPEN_TAG) + 1]

    def unmark(self) -> tuple[tuple[str, ...], int]:
        """Recover the original tokens and target index."""
        k = self.tokens.index(OPEN_TAG)
        return self.tokens[:k] + (self.tokens[k + 1],) + self.tokens[k + 3 :], k


def mark_target(occ: Occurrence) -> MarkedSentence:
    """left context, <t>, target, </t>, right context."""
    k = occ.target_index
    return MarkedSentence(
        tokens=occ.tokens[:k] + (OPEN_TAG, occ.tokens[k], CLOSE_TAG) + occ.tokens[k + 1 :]
    )


_REQUIRED_FIELDS = {
    "id": str,
    "tokens": list,
    "target_index": int,
    "lemma": str,
    "pos": str,
    "concept": str,
    "proper_noun": bool,
}


def parse_corpus(path: str | Path) -> list[Occurrence]:
    """Read an occurrence JSONL file; record ids must be unique."""
    occurrences: list[Occurrence] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusError(f"{path}:{lineno}: invalid JSON: {e.msg}") from None
            if not isinstance(record, dict):
                raise CorpusError(f"{path}:{lineno}: expected a JSON object")
            for name, typ in _REQUIRED_FIELDS.items():
                if name not in record:
                    raise CorpusError(f"{path}:{lineno}: missing field {name!r}")
                if not isinstance(record[name], typ) or (typ is int and isinstance(record[name], bool)):
                    raise CorpusError(f"{path}:{lineno}: field {name!r} has wrong type")
            if not all(isinstance(t, str) for t in record["tokens"]):
                raise CorpusError(f"{path}:{lineno}: tokens must all be strings")
            pos = _POS_CODES.get(record["pos"])
            if pos is None:
                raise CorpusError(f"{path}:{lineno}: unknown pos tag {record['pos']!r}")
            if record["id"] in seen:
                raise CorpusError(f"{path}:{lineno}: duplicate occurrence id {record['id']!r}")
            seen.add(record["id"])
            try:
                occ = Occurrence(
                    id=record["id"],
                    tokens=tuple(record["tokens"]),
                    target_index=record["target_index"],
                    lemma=record["lemma"].lower(),
                    pos=pos,
                    concept=record["concept"],
                    is_proper_noun=record["proper_noun"],
                )
            except ValueError as e:
                raise CorpusError(f"{path}:{lineno}: {e}") from None
            occurrences.append(occ)
    return occurrences


def _lemma_shape_ok(occ: Occurrence) -> bool:
    return (
        len(occ.lemma) >= MIN_LEMMA_LETTERS
        and occ.lemma.isalpha()
        and not occ.is_proper_noun
    )


def filter_corpus(occs: Sequence[Occurrence]) -> list[Occurrence]:
    """Apply sentence-length, lemma-shape, and per-POS frequency filters.

    Order matters: the >= 10 per (lemma, POS) threshold counts only occurrences
    that survive the other filters. Input order is preserved.
    """
    eligible = [
        o
        for o in occs
        if MIN_SENTENCE_TOKENS <= len(o.tokens) <= MAX_SENTENCE_TOKENS and _lemma_shape_ok(o)
    ]
    counts = Counter((o.lemma, o.pos) for o in eligible)
    return [o for o in eligible if counts[(o.lemma, o.pos)] >= MIN_LEMMA_POS_OCCURRENCES]


@dataclass
class Taxonomy:
    """Rooted hypernym DAG over concept ids: child -> set of parents."""

    nodes: frozenset[ConceptId]
    parents: dict[ConceptId, frozenset[ConceptId]]
    roots: frozenset[ConceptId]
    _depths: dict[ConceptId, int] = field(init=False, repr=False)
    _ancestors: dict[ConceptId, frozenset[ConceptId]] = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        if not self.roots:
            raise ValueError("taxonomy has no roots")
        for r in self.roots:
            if self.parents.get(r):
                raise ValueError(f"root {r!r} has parents")
        self._check_acyclic()
        self._depths = self._compute_depths()

    def _check_acyclic(self) -> None:
        # Kahn's algorithm over child -> parent edges.
        out_degree = {n: len(self.parents.get(n, frozenset())) for n in self.nodes}
        children: dict[ConceptId, list[ConceptId]] = {n: [] for n in self.nodes}
        for child, ps in self.parents.items():
            for p in ps:
                children[p].append(child)
        queue = deque(n for n, d in out_degree.items() if d == 0)
        seen = 0
        while queue:
            node = queue.popleft()
            seen += 1
            for ch in children[node]:
                out_degree[ch] -= 1
                if out_degree[ch] == 0:
                    queue.append(ch)
        if seen != len(self.nodes):
            raise ValueError("taxonomy contains a cycle")

    def _compute_depths(self) -> dict[ConceptId, int]:
        # Depth = node count on the shortest path from a root; roots have depth 1.
        depths = {r: 1 for r in self.roots}
        children: dict[ConceptId, list[ConceptId]] = {n: [] for n in self.nodes}
        for child, ps in self.parents.items():
            for p in ps:
                children[p].append(child)
        queue = deque(self.roots)
        while queue:
            node = queue.popleft()
            for ch in children[node]:
                if ch not in depths:
                    depths[ch] = depths[node] + 1
                    queue.append(ch)
        missing = self.nodes - depths.keys()
        if missing:
            raise ValueError(f"nodes unreachable from any root: {sorted(missing)[:5]}")
        return depths

    def depth(self, concept: ConceptId) -> int:
        try:
            return self._depths[concept]
        except KeyError:
            raise KeyError(f"concept {concept!r} not in taxonomy") from None

    def ancestors(self, concept: ConceptId) -> frozenset[ConceptId]:
        """All hypernym ancestors of a concept, including itself."""
        if concept not in self.nodes:
            raise KeyError(f"concept {concept!r} not in taxonomy")
        cached = self._ancestors.get(concept)
        if cached is not None:
            return cached
        seen = {concept}
        queue = deque([concept])
        while queue:
            node = queue.popleft()
            for p in self.parents.get(node, frozenset()):
                if p not in seen:
                    seen.add(p)
                    queue.append(p)
        result = frozenset(seen)
        self._ancestors[concept] = result
        return result

    def __contains__(self, concept: ConceptId) -> bool:
        return concept in self.nodes


def build_taxonomy(edges: Iterable[tuple[ConceptId, ConceptId]]) -> Taxonomy:
    """Build and validate a taxonomy from (child, parent) edges."""
    parents: dict[ConceptId, set[ConceptId]] = {}
    nodes: set[ConceptId] = set()
    for child, parent in edges:
        nodes.add(child)
        nodes.add(parent)
        parents.setdefault(child, set()).add(parent)
    roots = frozenset(n for n in nodes if not parents.get(n))
    return Taxonomy(
        nodes=frozenset(nodes),
        parents={c: frozenset(ps) for c, ps in parents.items()},
        roots=roots,
    )


def load_taxonomy(path: str | Path) -> Taxonomy:
    edges: list[tuple[str, str]] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise CorpusError(f"{path}:{lineno}: expected `child<TAB>parent`")
            edges.append((parts[0], parts[1]))
    try:
        return build_taxonomy(edges)
    except ValueError as e:
        raise CorpusError(f"{path}: {e}") from e
