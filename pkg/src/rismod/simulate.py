"""Monte Carlo link simulation: maximum-likelihood detection, BER estimation
over an SNR grid, and the channel-estimation-error study.

Seeding layout: a master seed spawns one SeedSequence per realization; each
realization spawns fixed-purpose children (channel, design, estimation error,
one noise stream per SNR point).  The layout never depends on the scheme
under test, so runs with the same master seed see identical channels,
candidate draws and noise, and comparisons between designers are paired.
Realizations are independent and may run on a thread pool; results are
reduced in realization order, so the output is identical for any thread
count.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ber import hamming_matrix, union_bound
from .model import ChannelSet, Codebook, SystemConfig, noise_free_points, \
    random_channels

__all__ = [
    "SimPlan",
    "BerCurve",
    "DesignError",
    "ml_detect",
    "estimate_ber",
    "channel_stream",
    "sweep",
    "sweep_with_channel_errors",
    "snr_db_to_sigma",
]

_BATCH_FRAMES = 8192


def snr_db_to_sigma(snr_db: float) -> float:
    """SNR = 1/sigma^2 with mean transmit power 1, so sigma = 10^(-SNR/20)."""
    return float(10.0 ** (-snr_db / 20.0))


@dataclass(frozen=True)
class SimPlan:
    """Sweep budget and the channel-estimation-error scale."""

    snr_grid_db: tuple[float, ...]
    min_bit_errors: int = 200
    max_frames: int = 1_000_000
    realizations: int = 1
    master_seed: int = 0
    error_scale: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "snr_grid_db",
                           tuple(float(v) for v in self.snr_grid_db))
        if self.min_bit_errors < 1:
            raise ValueError("min_bit_errors must be >= 1")
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        if self.error_scale < 0:
            raise ValueError("error_scale must be nonnegative")


@dataclass
class BerCurve:
    """Per-SNR averages plus the per-realization data behind them."""

    snr_db: np.ndarray
    ber: np.ndarray
    bound: np.ndarray
    frames: np.ndarray
    bit_errors: np.ndarray
    realizations: int
    per_real_ber: np.ndarray    # (R, S)
    per_real_bound: np.ndarray  # (R, S)

    def ber_std_error(self) -> np.ndarray:
        """Standard error of the averaged BER across realizations, per SNR."""
        if self.realizations < 2:
            return np.zeros_like(self.ber)
        return np.std(self.per_real_ber, axis=0, ddof=1) / np.sqrt(self.realizations)


class DesignError(RuntimeError):
    """Design failure annotated with the realization it happened in."""

    def __init__(self, realization: int, cause: BaseException):
        super().__init__(f"design failed at realization {realization}: {cause}")
        self.realization = realization


def ml_detect(y: np.ndarray, channels: ChannelSet, codebook: Codebook) -> int:
    """Maximum-likelihood tuple decision: nearest noise-free point, lowest
    index on ties."""
    points = noise_free_points(channels, codebook)
    d2 = np.sum(np.abs(points - np.asarray(y)[None, :]) ** 2, axis=1)
    return int(np.argmin(d2))


def _detect_batch(y: np.ndarray, points: np.ndarray) -> np.ndarray:
    # ||y - p||^2 = ||y||^2 - 2 Re(y p^H) + ||p||^2; the ||y||^2 term is
    # common to all hypotheses and dropped.
    metric = np.sum(np.abs(points) ** 2, axis=1)[None, :] \
        - 2.0 * (y @ points.conj().T).real
    return np.argmin(metric, axis=1)


def estimate_ber(channels: ChannelSet, codebook: Codebook, sigma: float,
                 plan: SimPlan, seed, detect_channels: ChannelSet | None = None):
    """Simulate random frames until the bit-error or frame budget is hit.

    detect_channels, when given, feeds the detector's point set (the
    mismatched-CSI case); propagation always uses ``channels``.
    Returns (ber, bit_errors, frames).
    """
    rng = np.random.default_rng(seed)
    r = codebook.mapping.rate_bits
    L = codebook.n_tuples
    labels = codebook.labels()
    inv = np.empty(L, dtype=np.int64)
    inv[labels] = np.arange(L)
    ham = hamming_matrix(labels, r)
    tx_points = noise_free_points(channels, codebook)
    rx_points = tx_points if detect_channels is None \
        else noise_free_points(detect_channels, codebook)
    errors, frames = 0, 0
    while errors < plan.min_bit_errors and frames < plan.max_frames:
        batch = int(min(_BATCH_FRAMES, plan.max_frames - frames))
        word = rng.integers(0, L, size=batch)
        sent = inv[word]
        noise = (rng.standard_normal((batch, channels.n_rx))
                 + 1j * rng.standard_normal((batch, channels.n_rx))) * (sigma / np.sqrt(2))
        y = tx_points[sent] + noise
        detected = _detect_batch(y, rx_points)
        errors += int(np.sum(ham[sent, detected]))
        frames += batch
    ber = errors / (frames * r) if frames else 0.0
    return float(ber), int(errors), int(frames)


def channel_stream(config: SystemConfig, master_seed: int, realizations: int):
    """Deterministic stream of (ChannelSet, per-realization SeedSequence)."""
    root = np.random.SeedSequence(master_seed)
    for child in root.spawn(realizations):
        ch_entropy, sim_entropy = child.spawn(2)
        yield random_channels(config, np.random.default_rng(ch_entropy)), sim_entropy


def _perturbed(channels: ChannelSet, errs, delta_sigma: float) -> ChannelSet:
    e_d, e_1, e_2 = errs
    return ChannelSet(h_direct=channels.h_direct + delta_sigma * e_d,
                      h_tx_ris=channels.h_tx_ris + delta_sigma * e_1,
                      h_ris_rx=channels.h_ris_rx + delta_sigma * e_2,
                      noise_std=channels.noise_std)


def _realization_worker(args):
    r_idx, channels, sim_entropy, design_fn, plan, with_errors = args
    snr = plan.snr_grid_db
    S = len(snr)
    children = sim_entropy.spawn(3)
    design_ss, error_ss, noise_root = children
    noise_sss = noise_root.spawn(max(S, 1))
    ber_row = np.zeros(S)
    bound_row = np.zeros(S)
    frames_row = np.zeros(S, dtype=np.int64)
    errors_row = np.zeros(S, dtype=np.int64)
    if not with_errors:
        try:
            cb = design_fn(channels, np.random.default_rng(design_ss))
        except Exception as exc:
            raise DesignError(r_idx, exc) from exc
        ham = hamming_matrix(cb.labels(), cb.mapping.rate_bits)
        for s_idx, snr_db in enumerate(snr):
            sigma = snr_db_to_sigma(snr_db)
            ber, err, frm = estimate_ber(channels, cb, sigma, plan, noise_sss[s_idx])
            ber_row[s_idx] = ber
            bound_row[s_idx] = union_bound(channels, cb, ham, sigma)
            frames_row[s_idx] = frm
            errors_row[s_idx] = err
        return ber_row, bound_row, frames_row, errors_row
    err_rng = np.random.default_rng(error_ss)
    errs = tuple(
        (err_rng.standard_normal(shape) + 1j * err_rng.standard_normal(shape))
        / np.sqrt(2.0)
        for shape in (channels.h_direct.shape, channels.h_tx_ris.shape,
                      channels.h_ris_rx.shape))
    design_sss = design_ss.spawn(max(S, 1))
    for s_idx, snr_db in enumerate(snr):
        sigma = snr_db_to_sigma(snr_db)
        believed = _perturbed(channels, errs, plan.error_scale * sigma)
        try:
            cb = design_fn(believed, np.random.default_rng(design_sss[s_idx]))
        except Exception as exc:
            raise DesignError(r_idx, exc) from exc
        ham = hamming_matrix(cb.labels(), cb.mapping.rate_bits)
        ber, err, frm = estimate_ber(channels, cb, sigma, plan, noise_sss[s_idx],
                                     detect_channels=believed)
        ber_row[s_idx] = ber
        # the bound the designer believed in; under CSI mismatch the true link
        # has no union-bound guarantee
        bound_row[s_idx] = union_bound(believed, cb, ham, sigma)
        frames_row[s_idx] = frm
        errors_row[s_idx] = err
    return ber_row, bound_row, frames_row, errors_row


def _run_sweep(stream, design_fn, plan: SimPlan, with_errors: bool,
               threads: int) -> BerCurve:
    snr = np.asarray(plan.snr_grid_db, dtype=np.float64)
    S = snr.size
    items = []
    for r_idx in range(plan.realizations):
        channels, sim_entropy = next(stream)
        items.append((r_idx, channels, sim_entropy, design_fn, plan, with_errors))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_realization_worker, items))
    else:
        rows = [_realization_worker(it) for it in items]
    per_ber = np.array([row[0] for row in rows]).reshape(plan.realizations, S)
    per_bound = np.array([row[1] for row in rows]).reshape(plan.realizations, S)
    frames = np.sum([row[2] for row in rows], axis=0).astype(np.int64) \
        if rows else np.zeros(S, dtype=np.int64)
    errors = np.sum([row[3] for row in rows], axis=0).astype(np.int64) \
        if rows else np.zeros(S, dtype=np.int64)
    return BerCurve(snr_db=snr, ber=per_ber.mean(axis=0), bound=per_bound.mean(axis=0),
                    frames=np.atleast_1d(frames), bit_errors=np.atleast_1d(errors),
                    realizations=plan.realizations, per_real_ber=per_ber,
                    per_real_bound=per_bound)


def sweep(stream, design_fn, plan: SimPlan, threads: int = 1) -> BerCurve:
    """Design once per realization, estimate BER at every SNR point, average.

    design_fn(channels, rng) -> Codebook.  The averaged curve is a fixed
    index-ordered reduction, so it does not depend on evaluation order.
    """
    return _run_sweep(stream, design_fn, plan, with_errors=False, threads=threads)


def sweep_with_channel_errors(stream, design_fn, plan: SimPlan,
                              threads: int = 1) -> BerCurve:
    """Sweep where design and detection see perturbed channels.

    The estimate error has per-entry std error_scale * sigma, so the
    perturbation (and the design) is redone per SNR point; propagation uses
    the true channels.  error_scale = 0 reduces exactly to sweep().
    """
    if plan.error_scale == 0.0:
        return sweep(stream, design_fn, plan, threads=threads)
    return _run_sweep(stream, design_fn, plan, with_errors=True, threads=threads)
