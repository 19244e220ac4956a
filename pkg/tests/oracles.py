"""Independent brute-force reference implementations used to check the
package's vectorized code. Deliberately slow and literal.
"""

from __future__ import annotations

import math
import re


def ece_bruteforce(pairs, bin_count=10):
    """Direct evaluation of the bin-weighted |acc - conf| sum.

    pairs: (confidence, correct) with abstentions already removed.
    Bin m (1-based) covers ((m-1)/M, m/M]; confidence 0 goes to bin 1.
    """
    n = len(pairs)
    assert n >= 1
    total = 0.0
    for m in range(1, bin_count + 1):
        lo = (m - 1) / bin_count
        hi = m / bin_count
        members = [
            (c, ok)
            for c, ok in pairs
            if (lo < c <= hi) or (m == 1 and c == 0.0)
        ]
        if not members:
            continue
        acc = sum(1.0 for _, ok in members if ok) / len(members)
        conf = sum(c for c, _ in members) / len(members)
        total += (len(members) / n) * abs(acc - conf)
    return total


def auroc_pairwise(pairs):
    """All correct x incorrect comparisons, ties get half credit.

    pairs: (confidence, correct); abstention substitution (confidence 0,
    not correct) must be applied by the caller.
    """
    pos = [c for c, ok in pairs if ok]
    neg = [c for c, ok in pairs if not ok]
    assert pos and neg
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def auroc_pairwise_fast(pairs):
    """Vectorized version of auroc_pairwise for larger random fixtures."""
    import numpy as np

    pos = np.array([c for c, ok in pairs if ok])
    neg = np.array([c for c, ok in pairs if not ok])
    assert pos.size and neg.size
    diff = pos[:, None] - neg[None, :]
    wins = (diff > 0).sum() + 0.5 * (diff == 0).sum()
    return wins / (pos.size * neg.size)


def level_interval_oracle(confidence):
    """Hand-coded interval table for the five-level discretization."""
    assert 0.0 <= confidence <= 1.0
    if 0.8 < confidence <= 1.0:
        return "high"
    if 0.6 < confidence <= 0.8:
        return "moderate"
    if 0.4 < confidence <= 0.6:
        return "low"
    if 0.2 < confidence <= 0.4:
        return "lowest"
    return "completely_uncertain"


_VNC_QUOTED = re.compile(
    r'"confidence_score"\s*:\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)'
)
_VNC_BARE = re.compile(
    r"confidence_score\s*:\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)"
)


def vnc_scan_oracle(text):
    """Reference two-pattern scan: quoted key first, bare key second.

    Returns (confidence, abstained) with the matched number divided by 100
    and clamped into [0, 1].
    """
    m = _VNC_QUOTED.search(text) or _VNC_BARE.search(text)
    if m is None:
        return 0.0, True
    value = float(m.group(1)) / 100.0
    return min(1.0, max(0.0, value)), False


def cluster_entropy_oracle(sizes):
    n = sum(sizes)
    return -sum((s / n) * math.log(s / n) for s in sizes)


def mse_bruteforce(predictions, mean_scores):
    """Squared error on the 0-100 scale, one prediction per entry."""
    assert len(predictions) == len(mean_scores)
    total = 0.0
    for p, m in zip(predictions, mean_scores):
        total += (100.0 * p - m) ** 2
    return total / len(predictions)
