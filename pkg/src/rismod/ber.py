"""Union-bound BER analysis: Hamming/Euclidean distance matrices and the
Hamming-weighted pairwise-error-probability bound that every designer minimizes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .model import ChannelSet, Codebook, noise_free_points

__all__ = [
    "BerBoundReport",
    "q_function",
    "hamming_matrix",
    "pairwise_sq_distances",
    "union_bound",
    "union_bound_from_points",
    "all_ones_hamming",
    "ber_report",
]

# Gaussian tail arguments beyond this contribute < 1e-350 and underflow anyway.
_Q_CUTOFF = 40.0


def q_function(x):
    """Standard normal tail probability Q(x) = 0.5 erfc(x / sqrt(2))."""
    x = np.asarray(x, dtype=np.float64)
    out = 0.5 * erfc(x / np.sqrt(2.0))
    out = np.where(x > _Q_CUTOFF, 0.0, out)
    return float(out) if out.ndim == 0 else out


def hamming_matrix(labels, rate_bits: int) -> np.ndarray:
    """Pairwise bit differences between tuple labels, (L, L) ints.

    labels must be a bijection onto 0..L-1 (checked), so every off-diagonal
    entry lies in [1, rate_bits].
    """
    lab = np.asarray(labels, dtype=np.int64)
    if sorted(lab.tolist()) != list(range(lab.size)):
        raise ValueError("labels are not a bijection onto 0..L-1")
    x = lab[:, None] ^ lab[None, :]
    # popcount per entry; r <= 16 keeps this exact
    counts = np.zeros_like(x)
    for b in range(max(1, rate_bits)):
        counts += (x >> b) & 1
    return counts


def all_ones_hamming(n: int) -> np.ndarray:
    """Shaping-only weights: every distinct pair counts once."""
    return np.ones((n, n), dtype=np.int64) - np.eye(n, dtype=np.int64)


def pairwise_sq_distances(channels: ChannelSet, codebook: Codebook) -> np.ndarray:
    """Squared Euclidean distances between noise-free receive points, (L, L)."""
    return sq_distance_matrix(noise_free_points(channels, codebook))


def sq_distance_matrix(points: np.ndarray) -> np.ndarray:
    d = points[:, None, :] - points[None, :, :]
    return np.sum(np.abs(d) ** 2, axis=-1)


def _rate_for(n: int, rate_bits) -> float:
    if rate_bits is not None:
        return float(rate_bits)
    return float(np.log2(n)) if n > 1 else 1.0


def union_bound_from_points(points: np.ndarray, hamming: np.ndarray,
                            sigma: float, rate_bits=None) -> float:
    """Union bound from precomputed receive points.

    (1 / (L r)) * sum_{l != lhat} D_HD(l, lhat) Q(sqrt(D_ED^2 / (2 sigma^2))).
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    n = points.shape[0]
    d2 = sq_distance_matrix(points)
    pep = q_function(np.sqrt(np.maximum(d2, 0.0) / (2.0 * sigma ** 2)))
    np.fill_diagonal(pep, 0.0)
    total = float(np.sum(np.asarray(hamming, dtype=np.float64) * pep))
    return total / (n * _rate_for(n, rate_bits))


def union_bound(channels: ChannelSet, codebook: Codebook, hamming: np.ndarray,
                sigma: float, rate_bits=None) -> float:
    """Union bound on the BER of a codebook over one channel realization."""
    points = noise_free_points(channels, codebook)
    if rate_bits is None and codebook.n_tuples == 2 ** codebook.mapping.rate_bits:
        rate_bits = codebook.mapping.rate_bits
    return union_bound_from_points(points, hamming, sigma, rate_bits)


@dataclass(frozen=True)
class BerBoundReport:
    """Bound value plus the distance matrices behind it."""

    bound: float
    pairwise_sq_dist: np.ndarray
    hamming: np.ndarray


def ber_report(channels: ChannelSet, codebook: Codebook, sigma: float) -> BerBoundReport:
    """Evaluate the bound with the codebook's own bit mapping."""
    ham = hamming_matrix(codebook.labels(), codebook.mapping.rate_bits)
    points = noise_free_points(channels, codebook)
    bound = union_bound_from_points(points, ham, sigma, codebook.mapping.rate_bits)
    return BerBoundReport(bound=bound, pairwise_sq_dist=sq_distance_matrix(points),
                          hamming=ham)
