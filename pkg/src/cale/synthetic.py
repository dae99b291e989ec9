"""Synthetic concept-cluster corpora with controllable geometry.

Vectors are built as

    concept_scale * u_concept + lemma_scale * v_lemma + offset_scale * mu + noise_scale * g

with orthonormal concept directions, random unit lemma directions confined to
their own subspace, a shared offset direction mu (simulating anisotropy: all
raw cosine distances compressed), and isotropic Gaussian noise g. With
lemma_scale > concept_scale the raw space is lemma-centric (polysemous
same-lemma pairs sit closer than synonymous cross-lemma pairs); a linear map
that attenuates the lemma and offset subspaces makes it concept-centric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Occurrence, Pos
from .embeddings import EmbeddingMatrix
from .util import substream


@dataclass(frozen=True)
class SyntheticSpec:
    n_concepts: int = 4
    n_lemmas: int = 40
    polysemous_lemmas: int = 40
    occurrences_per_cell: int = 50
    dim: int = 16
    concept_scale: float = 1.0
    lemma_scale: float = 1.18
    offset_scale: float = 0.0
    noise_concept: float = 0.11
    noise_other: float = 0.11
    seed: int = 42

    def __post_init__(self) -> None:
        if self.n_concepts < 2 or self.n_lemmas < self.n_concepts:
            raise ValueError("need >= 2 concepts and at least one lemma per concept")
        if self.polysemous_lemmas > self.n_lemmas:
            raise ValueError("polysemous_lemmas cannot exceed n_lemmas")
        if self.dim < 2 * self.n_concepts:
            raise ValueError("dim too small for disjoint concept/structure subspaces")


def lemma_concepts(spec: SyntheticSpec) -> dict[str, list[str]]:
    """Concept inventory per lemma: every lemma has a primary concept; the
    first `polysemous_lemmas` also express a second one.

    Lemma names are purely alphabetic so synthetic corpora survive the real
    corpus filters when routed through the CLI.
    """
    mapping: dict[str, list[str]] = {}
    for i in range(spec.n_lemmas):
        lemma = f"lem{chr(97 + i // 26)}{chr(97 + i % 26)}"
        concepts = [f"concept{i % spec.n_concepts}"]
        if i < spec.polysemous_lemmas:
            concepts.append(f"concept{(i + 1) % spec.n_concepts}")
        mapping[lemma] = concepts
    return mapping


def make_synthetic_corpus(spec: SyntheticSpec) -> tuple[list[Occurrence], EmbeddingMatrix]:
    """Occurrences plus their raw embedding matrix."""
    rng = substream(spec.seed, "synthetic-space")
    dim = spec.dim
    n_structure = 2 * spec.n_concepts  # concept axes + offset/free axes boundary
    concept_dirs = np.zeros((spec.n_concepts, dim))
    concept_dirs[np.arange(spec.n_concepts), np.arange(spec.n_concepts)] = 1.0

    # Lemma directions live strictly outside the concept subspace, leaving the
    # last two axes as pure-noise dims; the shared offset rides the final axis.
    lemma_sub = slice(spec.n_concepts, max(spec.n_concepts + 1, dim - 2))
    lemma_width = lemma_sub.stop - lemma_sub.start
    offset = np.zeros(dim)
    offset[dim - 1] = 1.0

    lemma_dirs: dict[str, np.ndarray] = {}
    for lemma in lemma_concepts(spec):
        v = np.zeros(dim)
        raw = rng.normal(size=lemma_width)
        v[lemma_sub] = raw / np.linalg.norm(raw)
        lemma_dirs[lemma] = v

    # Per-concept clusters are Gaussian with diagonal covariance: tight along
    # the concept axes, loose elsewhere (lemma/offset/free dims).
    sigma = np.full(dim, spec.noise_other)
    sigma[: spec.n_concepts] = spec.noise_concept

    occurrences: list[Occurrence] = []
    vectors: list[np.ndarray] = []
    counter = 0
    for lemma, concepts in lemma_concepts(spec).items():
        for concept in concepts:
            c_idx = int(concept.removeprefix("concept"))
            for _ in range(spec.occurrences_per_cell):
                vec = (
                    spec.concept_scale * concept_dirs[c_idx]
                    + spec.lemma_scale * lemma_dirs[lemma]
                    + spec.offset_scale * offset
                    + sigma * rng.normal(size=dim)
                )
                occ_id = f"syn{counter:06d}"
                counter += 1
                occurrences.append(
                    Occurrence(
                        id=occ_id,
                        tokens=tuple(f"w{j}" for j in range(10)),
                        target_index=0,
                        lemma=lemma,
                        pos=Pos.NOUN,
                        concept=concept,
                        is_proper_noun=False,
                    )
                )
                vectors.append(vec)
    matrix = EmbeddingMatrix(ids=[o.id for o in occurrences],
                             rows=np.array(vectors, dtype=np.float32))
    return occurrences, matrix
