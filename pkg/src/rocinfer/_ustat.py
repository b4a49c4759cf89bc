"""Rank-based pair counting shared by the AUC and max-AUC code."""

import numpy as np
from scipy.special import expit


def count_below(values, reference_sorted):
    """For each value, how many reference entries are strictly smaller."""
    return np.searchsorted(reference_sorted, values, side="left")


def count_above(values, reference_sorted):
    """For each value, how many reference entries are strictly larger."""
    return len(reference_sorted) - np.searchsorted(reference_sorted, values, side="right")


def concordant_pairs(scores, labels) -> int:
    """Number of (positive, negative) pairs with the positive strictly higher."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    neg = np.sort(s[~y])
    return int(count_below(s[y], neg).sum())


def smoothed_pair_mean(s_pos, s_neg, h, chunk=256):
    """Mean over all (positive, negative) pairs of a logistic-smoothed ``1(s_pos > s_neg)``."""
    total = 0.0
    for start in range(0, len(s_pos), chunk):
        block = s_pos[start:start + chunk, None] - s_neg[None, :]
        total += expit(block / h).sum()
    return total / (len(s_pos) * len(s_neg))
