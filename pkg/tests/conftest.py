import numpy as np
import pytest

from cale.corpus import Occurrence, Pos
from cale.embeddings import EmbeddingMatrix


def make_occurrence(occ_id, lemma="walk", concept="c1", pos=Pos.NOUN, n_tokens=12,
                    target_index=2, proper=False):
    return Occurrence(
        id=occ_id,
        tokens=tuple(f"tok{i}" for i in range(n_tokens)),
        target_index=target_index,
        lemma=lemma,
        pos=pos,
        concept=concept,
        is_proper_noun=proper,
    )


def make_cells_corpus(cells, per_cell):
    """One occurrence group per (lemma, pos, concept) cell; ids are unique per cell."""
    occs = []
    for lemma, pos, concept in cells:
        for k in range(per_cell):
            occs.append(
                make_occurrence(f"{lemma}.{pos.value}.{concept}.{k:04d}",
                                lemma=lemma, concept=concept, pos=pos)
            )
    return occs


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_matrix(rng):
    ids = [f"e{i}" for i in range(20)]
    return EmbeddingMatrix(ids=ids, rows=rng.normal(size=(20, 6)).astype(np.float32))
