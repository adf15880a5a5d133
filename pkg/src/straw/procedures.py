"""Step-up decision rules: BH, Lfdr, LAWS and STRAW, plus threshold-form twins.

Every rule returns a :class:`StepUpOutcome`. Sorting is stable, so ties in
the ranked statistic are resolved by site index and repeated calls give
identical answers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .lattice import Lattice
from .weighting import (
    DEFAULT_CLIP,
    WeightedPValueSet,
    clamp_sparsity,
    rescaled_pvalues,
    weighted_pvalues,
)


@dataclass(frozen=True)
class StepUpOutcome:
    l: int
    threshold: float
    decisions: np.ndarray
    k_used: Optional[float] = None
    statistic: Optional[np.ndarray] = field(default=None, repr=False)
    """The per-site values compared against ``threshold``."""

    @property
    def rejected(self) -> np.ndarray:
        return np.flatnonzero(self.decisions)


@dataclass(frozen=True)
class GridSpec:
    """Equally spaced candidates ``B1 + i (B2 - B1) / L`` for ``i = 0..L``."""

    b1: float = 0.5
    b2: float = 5.0
    n_steps: int = 18

    def __post_init__(self):
        if not self.b1 > 0:
            raise ValueError("grid lower end must be positive")
        if self.n_steps < 0 or int(self.n_steps) != self.n_steps:
            raise ValueError("number of grid steps must be a nonnegative integer")
        if self.n_steps > 0 and not self.b2 > self.b1:
            raise ValueError("grid upper end must exceed the lower end")

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        b1, b2, n = text.split(",")
        return cls(float(b1), float(b2), int(n))

    def points(self) -> np.ndarray:
        if self.n_steps == 0:
            return np.array([float(self.b1)])
        i = np.arange(self.n_steps + 1)
        return self.b1 + i * (self.b2 - self.b1) / self.n_steps


def _check_alpha(alpha: float) -> None:
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")


def _step_up(
    stat: np.ndarray, scale: float, alpha: float, cap: float = np.inf
) -> StepUpOutcome:
    """Largest ``j`` with ``scale * stat_(j) / j <= alpha``; reject ``stat <= stat_(j)``.

    Only values strictly below ``cap`` may be rejected.
    """
    m = stat.size
    order = np.argsort(stat, kind="stable")
    ranked = stat[order]
    ok = np.flatnonzero((scale * ranked <= alpha * np.arange(1, m + 1)) & (ranked < cap))
    decisions = np.zeros(m, dtype=bool)
    if ok.size == 0:
        return StepUpOutcome(0, 0.0, decisions, statistic=stat)
    l = int(ok[-1]) + 1
    threshold = float(ranked[l - 1])
    decisions = stat <= threshold
    return StepUpOutcome(l, threshold, decisions, statistic=stat)


def _sup_threshold(stat: np.ndarray, scale: float, alpha: float, cap: float = np.inf) -> float:
    """``sup{0 <= t < cap : scale * t / max(#{stat <= t}, 1) <= alpha}`` restricted
    to the candidates 0 and the distinct values of ``stat``."""
    candidates = np.unique(np.concatenate(([0.0], stat)))
    candidates = candidates[candidates < cap]
    counts = np.searchsorted(np.sort(stat), candidates, side="right")
    feasible = scale * candidates <= alpha * np.maximum(counts, 1)
    return float(candidates[feasible].max()) if feasible.any() else 0.0


def bh_procedure(p, alpha: float) -> StepUpOutcome:
    """Benjamini-Hochberg step-up at level ``alpha``."""
    _check_alpha(alpha)
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("need a nonempty 1-d array of p-values")
    if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
        raise ValueError("p-values must lie in [0, 1]")
    return _step_up(p, float(p.size), alpha)


def lfdr_stepup(lfdr, alpha: float) -> StepUpOutcome:
    """Reject the ``l`` smallest Lfdr values, ``l`` the largest index whose
    running mean stays at or below ``alpha``."""
    _check_alpha(alpha)
    lfdr = np.asarray(lfdr, dtype=float)
    if np.any((lfdr < 0) | (lfdr > 1)):
        raise ValueError("Lfdr values must lie in [0, 1]")
    m = lfdr.size
    order = np.argsort(lfdr, kind="stable")
    running = np.cumsum(lfdr[order]) / np.arange(1, m + 1)
    ok = np.flatnonzero(running <= alpha)
    decisions = np.zeros(m, dtype=bool)
    if ok.size == 0:
        return StepUpOutcome(0, 0.0, decisions, statistic=lfdr)
    l = int(ok[-1]) + 1
    decisions[order[:l]] = True
    return StepUpOutcome(l, float(lfdr[order[l - 1]]), decisions, statistic=lfdr)


def straw_stepup(w: WeightedPValueSet, alpha: float) -> StepUpOutcome:
    """Step-up on weighted p-values with the EFP-based FDP estimate.

    ``l = max{j : sum(coefficients) * p_w_(j) / j <= alpha}`` and every site
    with ``p_w <= p_w_(l)`` is rejected.

    Weighted p-values clipped at 1 are never rejected: the false-positive
    bound ``P(p_w <= t) <= varphi_k(pi1) t`` behind the criterion only holds
    for ``t < 1``, and a cutoff of 1 would reject every site.
    """
    _check_alpha(alpha)
    out = _step_up(w.values, w.coefficient_sum, alpha, cap=1.0)
    return StepUpOutcome(out.l, out.threshold, out.decisions, w.k, w.values)


def threshold_form_stepup(w: WeightedPValueSet, alpha: float) -> StepUpOutcome:
    """Same rule as :func:`straw_stepup`, phrased as a supremum over cutoffs."""
    _check_alpha(alpha)
    t_hat = _sup_threshold(w.values, w.coefficient_sum, alpha, cap=1.0)
    decisions = w.values <= t_hat
    return StepUpOutcome(int(decisions.sum()), t_hat, decisions, w.k, w.values)


def select_k(p, pi1, grid: GridSpec, alpha: float) -> tuple[float, StepUpOutcome]:
    """Pick the grid value of ``k`` with the most rejections (smallest k on ties)."""
    best_k, best = None, None
    for k in grid.points():
        out = straw_stepup(weighted_pvalues(p, pi1, k), alpha)
        if best is None or out.l > best.l:
            best_k, best = float(k), out
    return best_k, best


def straw_oracle(
    p, pi1, grid: GridSpec = GridSpec(), alpha: float = 0.1, xi: float = DEFAULT_CLIP
) -> StepUpOutcome:
    _, out = select_k(p, clamp_sparsity(pi1, xi), grid, alpha)
    return out


def laws_procedure(p, pi1, alpha: float, xi: float = DEFAULT_CLIP) -> StepUpOutcome:
    """The ``k = 1`` member of the weighted family, without grid search."""
    return straw_stepup(weighted_pvalues(p, clamp_sparsity(pi1, xi), 1.0), alpha)


def straw_data_driven(
    p,
    lat: Lattice,
    kernel=None,
    grid: GridSpec = GridSpec(),
    alpha: float = 0.1,
    xi: float = DEFAULT_CLIP,
    estimator: Optional[Callable] = None,
) -> StepUpOutcome:
    """Estimate local sparsity from ``p`` and run the oracle rule on the estimate.

    ``estimator(p, lat, kernel, xi)`` defaults to
    :func:`straw.sparsity.estimate_sparsity`.
    """
    from .sparsity import KernelSpec, estimate_sparsity

    kernel = kernel or KernelSpec()
    estimator = estimator or estimate_sparsity
    pi1_hat = estimator(np.asarray(p, dtype=float), lat, kernel, xi)
    return straw_oracle(p, pi1_hat, grid, alpha, xi)


def procedure1_bh(p, pi1, k: float, alpha: float) -> StepUpOutcome:
    """BH applied to the site-wise rescaled weighted p-values ``p*``."""
    _check_alpha(alpha)
    w = weighted_pvalues(p, pi1, k)
    star = rescaled_pvalues(w, pi1).sitewise
    out = _step_up(star, float(star.size), alpha)
    return StepUpOutcome(out.l, out.threshold, out.decisions, float(k), star)


def procedure1_threshold_form(p, pi1, k: float, alpha: float) -> StepUpOutcome:
    """Threshold form of :func:`procedure1_bh`: reject ``p* <= sup{t : m t / R(t) <= alpha}``."""
    _check_alpha(alpha)
    w = weighted_pvalues(p, pi1, k)
    star = rescaled_pvalues(w, pi1).sitewise
    t_star = _sup_threshold(star, float(star.size), alpha)
    decisions = star <= t_star
    return StepUpOutcome(int(decisions.sum()), t_star, decisions, float(k), star)
