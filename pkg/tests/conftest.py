import pathlib

import numpy as np
import pytest

from groundedbias import EmbeddingStore, parse_spec

DATA = pathlib.Path(__file__).parent / "data"

# The 12 grounded (text, image) pairs of the micro dataset: every target
# text with every target image, every attribute text with every attribute
# image. The bias test itself consumes only a subset.
MICRO_GROUNDED_PAIRS = [
    ("man", "img-man"),
    ("man", "img-woman"),
    ("woman", "img-man"),
    ("woman", "img-woman"),
    ("lawyer", "img-man-lawyer"),
    ("lawyer", "img-man-teacher"),
    ("lawyer", "img-woman-lawyer"),
    ("lawyer", "img-woman-teacher"),
    ("teacher", "img-man-lawyer"),
    ("teacher", "img-man-teacher"),
    ("teacher", "img-woman-lawyer"),
    ("teacher", "img-woman-teacher"),
]
MICRO_TEXTS = ("man", "woman", "lawyer", "teacher")


def micro_store(seed: int = 0, dimension: int = 6) -> EmbeddingStore:
    rng = np.random.default_rng(seed)
    entries = {}
    for text, image in MICRO_GROUNDED_PAIRS:
        entries[f"{text}::{image}"] = rng.standard_normal(dimension)
    for text in MICRO_TEXTS:
        entries[f"{text}::-"] = rng.standard_normal(dimension)
    return EmbeddingStore(dimension=dimension, entries=entries, provenance="micro fixture")


@pytest.fixture
def micro_spec():
    return parse_spec(DATA / "micro.json")


@pytest.fixture
def micro():
    return parse_spec(DATA / "micro.json"), micro_store()


def random_instance(rng, dim=8, n_targets=4, n_attrs=6):
    """Raw vectors for one randomized test instance (no store involved)."""
    def block(n):
        return rng.standard_normal((n, dim))

    return {
        "xs": block(n_targets),
        "ys": block(n_targets),
        "a_x": block(n_attrs),
        "a_y": block(n_attrs),
        "b_x": block(n_attrs),
        "b_y": block(n_attrs),
    }
