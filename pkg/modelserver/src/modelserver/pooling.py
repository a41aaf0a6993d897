"""Mask-aware mean pooling of token vectors."""

from __future__ import annotations

import numpy as np


class AllMasked(ValueError):
    """Mean pooling requested with every position masked out."""


def mean_pool(token_vectors, mask) -> np.ndarray:
    """Component-wise mean of the vectors whose mask entry is 1.

    ``token_vectors`` is a (tokens, dim) array-like, ``mask`` a sequence of
    0/1 of the same length. Padding positions (mask 0) never contribute.
    """
    vectors = np.asarray(token_vectors, dtype=np.float64)
    selector = np.asarray(mask)
    if selector.shape[0] != vectors.shape[0]:
        raise ValueError(
            f"mask length {selector.shape[0]} != token count {vectors.shape[0]}"
        )
    selected = vectors[selector == 1]
    if selected.shape[0] == 0:
        raise AllMasked("mask selects no positions")
    return selected.mean(axis=0)
