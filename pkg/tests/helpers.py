"""Shared instance generators and brute-force oracles."""

import numpy as np


def random_instance(rng, m=None):
    """Random (p, pi1, k, alpha) drawn from the equivalence battery."""
    if m is None:
        m = int(rng.choice([1, 10, 500]))
    pi1 = rng.uniform(0.05, 0.95, m)
    kind = rng.integers(3)
    if kind == 0:
        p = rng.random(m)
    elif kind == 1:
        # mixture with strong signals
        p = np.where(rng.random(m) < 0.3, rng.random(m) * 1e-3, rng.random(m))
    else:
        # heavy ties
        p = rng.choice([0.001, 0.01, 0.02, 0.5, 1.0], m)
    k = float(rng.choice([0.5, 1.0, 2.0, 5.0]))
    alpha = float(rng.choice([0.05, 0.1, 0.2]))
    return p, pi1, k, alpha


def naive_step_up(stat, scale, alpha, cap=np.inf):
    """Scan j = m..1 for the largest feasible rank; return the decision vector."""
    srt = sorted(stat)
    m = len(srt)
    for j in range(m, 0, -1):
        if scale * srt[j - 1] <= alpha * j and srt[j - 1] < cap:
            return np.array([x <= srt[j - 1] for x in stat])
    return np.zeros(m, dtype=bool)
