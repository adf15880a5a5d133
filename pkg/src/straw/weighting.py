"""Sparsity-weighted p-values and the quantities built from them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

DEFAULT_CLIP = 1e-3


def clamp_sparsity(pi1, xi: float = DEFAULT_CLIP) -> np.ndarray:
    """Clamp local sparsity levels into ``[xi, 1 - xi]``."""
    if not 0 < xi < 0.5:
        raise ValueError(f"clip epsilon must lie in (0, 0.5), got {xi}")
    return np.clip(np.asarray(pi1, dtype=float), xi, 1.0 - xi)


def _check_k(k: float) -> None:
    if not k > 0:
        raise ValueError(f"tuning parameter k must be positive, got {k}")


def varphi(x, k: float):
    """Odds power map ``(x / (1 - x)) ** (1 / k)`` on ``(0, 1)``."""
    _check_k(k)
    x = np.asarray(x, dtype=float)
    if np.any((x <= 0) | (x >= 1)):
        raise ValueError("varphi is defined on the open interval (0, 1)")
    out = (x / (1.0 - x)) ** (1.0 / k)
    return out if out.ndim else float(out)


def varphi_inverse(y, k: float):
    """Inverse of :func:`varphi`: ``y**k / (1 + y**k)`` for ``y >= 0``."""
    _check_k(k)
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("varphi_inverse needs nonnegative input")
    yk = y**k
    out = yk / (1.0 + yk)
    return out if out.ndim else float(out)


def _odds_power(x: np.ndarray, k: float) -> np.ndarray:
    # unchecked varphi for arrays already validated
    return (x / (1.0 - x)) ** (1.0 / k)


def _validate_pi1(pi1) -> np.ndarray:
    pi1 = np.asarray(pi1, dtype=float)
    if np.any((pi1 <= 0) | (pi1 >= 1)) or not np.all(np.isfinite(pi1)):
        raise ValueError("sparsity levels must lie strictly inside (0, 1); clamp them first")
    return pi1


def _aligned(p, pi1) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=float)
    pi1 = _validate_pi1(pi1)
    if p.shape != pi1.shape or p.ndim != 1:
        raise ValueError(f"misaligned fields: p{p.shape} vs pi1{pi1.shape}")
    return p, pi1


@dataclass(frozen=True)
class WeightedPValueSet:
    """Weighted p-values for one value of ``k``.

    ``coefficients[s]`` is ``(1 - pi1(s)) * varphi_k(pi1(s))``, the per-site
    contribution to the expected number of false positives per unit of the
    weighted threshold.
    """

    k: float
    values: np.ndarray
    coefficients: np.ndarray
    pvalues: np.ndarray

    def __len__(self) -> int:
        return self.values.size

    @property
    def coefficient_sum(self) -> float:
        return float(self.coefficients.sum())


def weighted_pvalues(p, pi1, k: float) -> WeightedPValueSet:
    """Weight each p-value by ``((1 - pi1) / pi1) ** (1 / k)``, capped at 1."""
    _check_k(k)
    p, pi1 = _aligned(p, pi1)
    odds = _odds_power(pi1, k)
    values = np.minimum(p / odds, 1.0)
    coefficients = (1.0 - pi1) ** (1.0 - 1.0 / k) * pi1 ** (1.0 / k)
    return WeightedPValueSet(k=float(k), values=values, coefficients=coefficients, pvalues=p)


class RescaledPValues(NamedTuple):
    global_scale: np.ndarray
    """``p_weighted / omega`` with one normalising constant for all sites."""
    sitewise: np.ndarray
    """``min(p / omega*(s), 1)`` with per-site weights averaging to one."""
    omega: float
    omega_star: np.ndarray


def rescaled_pvalues(w: WeightedPValueSet, pi1) -> RescaledPValues:
    pi1 = _validate_pi1(pi1)
    if pi1.shape != w.values.shape:
        raise ValueError("misaligned fields")
    odds = _odds_power(pi1, w.k)
    omega = float((1.0 - pi1).sum() / (odds * (1.0 - pi1)).sum())
    omega_star = pi1.size * odds / odds.sum()
    return RescaledPValues(
        global_scale=w.values / omega,
        sitewise=np.minimum(w.pvalues / omega_star, 1.0),
        omega=omega,
        omega_star=omega_star,
    )


def efp_bound(pi1, k: float, t: float) -> float:
    """Upper bound on the expected number of false positives at cutoff ``t``.

    ``t`` is on the original scale; the matching weighted-p threshold is
    ``varphi(t, k)``.
    """
    _check_k(k)
    if not 0 <= t < 1:
        raise ValueError(f"cutoff must lie in [0, 1), got {t}")
    if t == 0:
        return 0.0
    pi1 = _validate_pi1(pi1)
    return float(((1.0 - pi1) * _odds_power(pi1, k)).sum() * _odds_power(np.float64(t), k))


def check_assumption_a4(pi1, k: float) -> bool:
    """Whether the sparsity field satisfies the weighting-efficiency condition.

    Tests ``sum(1-pi) * sum(pi) >= sum((1-pi)^(1-1/k) pi^(1/k)) *
    sum((1-pi)^(1/k) pi^(1-1/k))``. At ``k = 2`` this is Cauchy-Schwarz, so
    the comparison carries a relative slack of a few ulps to absorb rounding
    when both sides agree exactly.
    """
    _check_k(k)
    pi1 = _validate_pi1(pi1)
    q = 1.0 - pi1
    lhs = q.sum() * pi1.sum()
    a = (q ** (1.0 - 1.0 / k) * pi1 ** (1.0 / k)).sum()
    b = (q ** (1.0 / k) * pi1 ** (1.0 - 1.0 / k)).sum()
    rhs = a * b
    return bool(lhs >= rhs - 8 * np.finfo(float).eps * abs(rhs))
