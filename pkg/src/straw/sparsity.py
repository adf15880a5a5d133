"""Local sparsity estimation from p-values.

Two stages: a global empirical-Bayes Lfdr per site, then a truncated
Nadaraya-Watson average of ``1 - Lfdr`` over lattice neighbours.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal, stats

from .lattice import Lattice, distance_stencil
from .weighting import DEFAULT_CLIP, clamp_sparsity

P_FLOOR = 1e-15
STOREY_LAMBDA = 0.5
KDE_GRID_SIZE = 1024

KERNELS = ("gaussian", "epanechnikov")


@dataclass(frozen=True)
class KernelSpec:
    """Spatial smoothing kernel.

    ``bandwidth`` is ``h`` for the Gaussian kernel and ``lambda`` for the
    Epanechnikov kernel; ``truncation`` is the neighbourhood radius ``c``.
    Both are in lattice units.
    """

    family: str = "gaussian"
    bandwidth: float = 3.0
    truncation: float = 10.0

    def __post_init__(self):
        if self.family not in KERNELS:
            raise ValueError(f"unknown kernel {self.family!r}; expected one of {KERNELS}")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if not self.truncation > 0:
            raise ValueError("truncation must be positive")


@dataclass(frozen=True)
class LfdrEstimate:
    values: np.ndarray
    pi0_hat: float
    z: np.ndarray
    bandwidth: float


def pvalue_to_z(p):
    """Two-sided z magnitude ``Phi^{-1}(1 - p/2)``; p = 0 is floored at 1e-15."""
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    z = stats.norm.isf(np.maximum(p, P_FLOOR) / 2.0)
    return z if z.ndim else float(z)


def storey_pi0(p, lam: float = STOREY_LAMBDA) -> float:
    p = np.asarray(p, dtype=float)
    return min(1.0, float(np.sum(p > lam)) / ((1.0 - lam) * p.size))


def silverman_bandwidth(x: np.ndarray) -> float:
    sd = np.std(x, ddof=1) if x.size > 1 else 0.0
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34)
    if spread <= 0:
        spread = sd
    return 0.9 * spread * x.size ** (-0.2)


def _folded_kde(z: np.ndarray, h: float) -> np.ndarray:
    """Reflected Gaussian KDE of nonnegative data, evaluated at the data.

    Data are linearly binned onto a regular grid on ``[0, max z + 5h]``; the
    reflection about 0 removes the boundary bias so that a half-normal
    sample recovers ``2 * phi``.
    """
    hi = z.max() + 5.0 * h
    grid = np.linspace(0.0, hi, KDE_GRID_SIZE)
    dx = grid[1] - grid[0]
    pos = z / dx
    left = np.minimum(np.floor(pos).astype(int), KDE_GRID_SIZE - 2)
    frac = pos - left
    counts = np.bincount(left, weights=1.0 - frac, minlength=KDE_GRID_SIZE)
    counts += np.bincount(left + 1, weights=frac, minlength=KDE_GRID_SIZE)
    diff = grid[:, None] - grid[None, :]
    summ = grid[:, None] + grid[None, :]
    kern = stats.norm.pdf(diff / h) + stats.norm.pdf(summ / h)
    dens = kern @ counts / (z.size * h)
    return np.interp(z, grid, dens)


def estimate_lfdr(p) -> LfdrEstimate:
    """Global Lfdr per site under the theoretical null.

    The statistic is ``z = Phi^{-1}(1 - p/2) >= 0``, whose null density is
    the half-normal ``2 phi(z)``. The marginal density comes from a
    reflected Gaussian KDE with Silverman's bandwidth and the null
    proportion from Storey's estimator at lambda = 0.5.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("need a nonempty 1-d array of p-values")
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    z = pvalue_to_z(p)
    z = np.atleast_1d(z)
    pi0 = storey_pi0(p)
    h = silverman_bandwidth(z) if p.size > 1 else 0.0
    if not h > 0:
        return LfdrEstimate(np.full(p.size, min(1.0, pi0)), pi0, z, 0.0)
    f_hat = _folded_kde(z, h)
    f0 = 2.0 * stats.norm.pdf(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(f_hat > 0, pi0 * f0 / f_hat, 1.0)
    return LfdrEstimate(np.clip(ratio, 0.0, 1.0), pi0, z, h)


def kernel_weight(ks: KernelSpec, dist):
    """Unnormalised kernel weight at distance ``dist``."""
    dist = np.asarray(dist, dtype=float)
    if np.any(dist < 0):
        raise ValueError("distance must be nonnegative")
    u = dist / ks.bandwidth
    if ks.family == "gaussian":
        w = np.exp(-0.5 * u * u)
    else:
        w = np.where(u <= 1.0, 0.75 * (1.0 - u * u), 0.0)
    return w if w.ndim else float(w)


def smooth_sparsity(
    lat: Lattice,
    lfdr,
    ks: KernelSpec,
    xi: float = DEFAULT_CLIP,
    scale: float = 1.0,
    leave_one_out: bool = True,
) -> np.ndarray:
    """Kernel-weighted average of ``1 - Lfdr`` over ``|s - s'| < c``, clamped.

    With ``leave_one_out`` the site's own Lfdr is excluded from its average,
    otherwise a null site with a small p-value inflates its own weight and
    the data-driven rules lose FDR control. A site with no other neighbour
    inside the truncation radius falls back to its own value. ``scale``
    multiplies every kernel weight and cancels in the ratio.
    """
    values = lfdr.values if isinstance(lfdr, LfdrEstimate) else np.asarray(lfdr, dtype=float)
    field = lat.to_grid(1.0 - values)
    dist, inside = distance_stencil(lat.dimension, ks.truncation)
    weights = np.where(inside, kernel_weight(ks, dist), 0.0) * scale
    center = tuple(n // 2 for n in weights.shape)
    self_weight = weights[center]
    if leave_one_out:
        weights[center] = 0.0
    # stencil is symmetric, so convolution equals correlation; zero padding
    # outside the lattice truncates boundary neighbourhoods
    num = signal.fftconvolve(field, weights, mode="same")
    den = signal.fftconvolve(np.ones(lat.extents), weights, mode="same")
    lonely = den <= 1e-9 * self_weight
    num = np.where(lonely, self_weight * field, num)
    den = np.where(lonely, self_weight, den)
    return clamp_sparsity((num / den).ravel(), xi)


def estimate_sparsity(p, lat: Lattice, ks: KernelSpec = KernelSpec(), xi: float = DEFAULT_CLIP):
    """Estimated local sparsity field for a lattice of p-values."""
    return smooth_sparsity(lat, estimate_lfdr(p), ks, xi)
