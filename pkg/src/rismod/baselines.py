"""Reference schemes built as constrained special cases of the general
codebook: single-pattern beamformed link (ris_c), pattern-only keying with a
bare carrier (ris_bc), receive-antenna steering (ris_sm) and ON/OFF unit
keying with aligned active units (pbit).  Their candidate sets also feed the
union-set comparison."""
from __future__ import annotations

import numpy as np

from .discrete import build_srm_codebook, deplete_jrm
from .model import BitMapping, ChannelSet, Codebook, SystemConfig, \
    effective_channel, normalize_power

__all__ = [
    "constellation_symbols",
    "aligned_pattern",
    "build_ris_c",
    "build_ris_bc",
    "build_ris_sm",
    "build_pbit",
    "union_candidates",
    "BASELINE_KINDS",
]

BASELINE_KINDS = ("ris_c", "ris_bc", "ris_sm", "pbit")


def _gray(i: int) -> int:
    return i ^ (i >> 1)


def constellation_symbols(kind: str, order: int):
    """Gray-labeled scalar constellation, normalized to mean power 1.

    Returns (symbols, labels) where labels[i] is the bit label of symbols[i].
    """
    if order < 1 or order & (order - 1):
        raise ValueError(f"constellation order {order} is not a power of two")
    if order == 1:
        return np.array([1.0 + 0.0j]), [0]
    if kind == "psk":
        symbols = np.exp(2j * np.pi * np.arange(order) / order)
        labels = [_gray(i) for i in range(order)]
        return symbols, labels
    if kind == "qam":
        m = round(np.sqrt(order))
        if m * m != order or m & (m - 1):
            raise ValueError(f"qam order {order} is not a square power of two")
        levels = 2 * np.arange(m) + 1 - m
        bits_axis = m.bit_length() - 1
        symbols, labels = [], []
        for col in range(m):
            for row in range(m):
                symbols.append(levels[col] + 1j * levels[row])
                labels.append((_gray(col) << bits_axis) | _gray(row))
        symbols = np.array(symbols, dtype=np.complex128)
        symbols /= np.sqrt(np.mean(np.abs(symbols) ** 2))
        return symbols, labels
    raise ValueError(f"unknown constellation kind {kind!r}")


def _first_antenna(symbol: complex, n_tx: int) -> np.ndarray:
    v = np.zeros(n_tx, dtype=np.complex128)
    v[0] = symbol
    return v


def aligned_pattern(channels: ChannelSet, x_ref: np.ndarray, rx_weight: np.ndarray,
                    on_mask: np.ndarray | None = None) -> np.ndarray:
    """Rotate each ON unit so its cascaded contribution adds coherently with
    the direct term along the receive direction rx_weight.

    The projection rx_weight^H (G x_ref) then equals |direct| + sum of the ON
    units' contribution magnitudes, the maximum over all unit-modulus
    patterns with that ON set.
    """
    w = rx_weight.conj() @ channels.h_ris_rx          # (N,) row u^H H_2
    t = channels.h_tx_ris @ x_ref                     # (N,)
    v = w * t
    ref = complex(rx_weight.conj() @ (channels.h_direct @ x_ref))
    ref_phase = np.angle(ref) if abs(ref) > 0 else 0.0
    phases = np.where(np.abs(v) > 0, np.exp(1j * (ref_phase - np.angle(v))), 1.0)
    phases = phases.astype(np.complex128)
    if on_mask is not None:
        phases = np.where(on_mask, phases, 0.0)
    return phases


def _receive_direction(channels: ChannelSet, x_ref: np.ndarray) -> np.ndarray:
    d = channels.h_direct @ x_ref
    nd = np.linalg.norm(d)
    if nd > 1e-12:
        return d / nd
    u = np.zeros(channels.n_rx, dtype=np.complex128)
    u[0] = 1.0
    return u


def build_ris_c(channels: ChannelSet, config: SystemConfig,
                constellation: str = "psk", pattern_mode: str = "aligned",
                seed=0) -> Codebook:
    """L constellation symbols on the first antenna through one fixed pattern.

    pattern_mode "aligned" co-phases every unit's cascaded contribution with
    the direct term along the receive direction (a link that knows the CSI
    and beamforms).  pattern_mode "reflect" draws one arbitrary unit-modulus
    pattern: the surface merely reflects, which is how this scheme enters
    the union-set comparison (a surface that optimized its pattern for the
    modulation would no longer be the reference scheme).
    """
    L = config.tuple_count
    symbols, labels = constellation_symbols(constellation, L)
    if symbols.size != L:
        raise ValueError(f"constellation order {symbols.size} != L={L}")
    x_ref = _first_antenna(1.0, config.n_tx)
    if pattern_mode == "aligned":
        pattern = aligned_pattern(channels, x_ref, _receive_direction(channels, x_ref))
    elif pattern_mode == "reflect":
        rng = np.random.default_rng(seed)
        pattern = np.exp(2j * np.pi * rng.random(config.n_ris))
    else:
        raise ValueError(f"unknown pattern_mode {pattern_mode!r}")
    signals, _ = normalize_power([_first_antenna(s, config.n_tx) for s in symbols])
    mapping = BitMapping(mode="joint", rate_bits=config.rate_bits, labels=tuple(labels))
    return Codebook(patterns=(pattern,), signals=tuple(signals),
                    pattern_idx=(0,) * L, mapping=mapping)


def build_ris_bc(channels: ChannelSet, config: SystemConfig, seed) -> Codebook:
    """Carrier-only transmitter; L patterns picked from a 4L random pool by
    bound depletion at the channel's noise level."""
    L = config.tuple_count
    rng = np.random.default_rng(seed)
    pool = [np.exp(2j * np.pi * rng.random(config.n_ris)) for _ in range(4 * L)]
    carrier = [_first_antenna(1.0, config.n_tx)]
    cb, _ = deplete_jrm(channels, carrier, pool, L, channels.noise_std)
    return cb


def build_ris_sm(channels: ChannelSet, config: SystemConfig,
                 constellation: str = "psk") -> Codebook:
    """One pattern per receive antenna, steering the cascade at it; the
    constellation is shared across patterns, labels natural over
    (antenna, symbol)."""
    L = config.tuple_count
    n_r = config.n_rx
    if L % n_r:
        raise ValueError(f"L={L} not divisible by N_r={n_r}")
    order = L // n_r
    symbols, _ = constellation_symbols(constellation, order)
    x_ref = _first_antenna(1.0, config.n_tx)
    patterns = []
    for nr in range(n_r):
        u = np.zeros(n_r, dtype=np.complex128)
        u[nr] = 1.0
        patterns.append(aligned_pattern(channels, x_ref, u))
    signals, _ = normalize_power(
        [_first_antenna(s, config.n_tx) for _ in range(n_r) for s in symbols])
    mapping = BitMapping(mode="joint", rate_bits=config.rate_bits,
                         labels=tuple(range(L)))
    return Codebook(patterns=tuple(patterns), signals=tuple(signals),
                    pattern_idx=tuple(nr for nr in range(n_r) for _ in range(order)),
                    mapping=mapping)


def _gray_order_masks(n_units: int):
    masks = [_gray(i) for i in range(1, 1 << n_units)]
    return sorted(masks, key=lambda m: -bin(m).count("1"))


def build_pbit(channels: ChannelSet, config: SystemConfig,
               constellation: str = "psk") -> Codebook:
    """ON/OFF unit keying: K_c aligned ON-subsets carry the RIS bits and M_c
    constellation symbols carry the transmitter bits, mapped separately."""
    cfg = config.with_default_split()
    m_c, k_c = cfg.mc_count, cfg.kc_count
    masks = _gray_order_masks(config.n_ris)
    if len(masks) < k_c:
        raise ValueError(f"only {len(masks)} distinct ON-subsets for K_c={k_c}")
    x_ref = _first_antenna(1.0, config.n_tx)
    u = _receive_direction(channels, x_ref)
    patterns = []
    for mask in masks[:k_c]:
        on = np.array([(mask >> n) & 1 for n in range(config.n_ris)], dtype=bool)
        patterns.append(aligned_pattern(channels, x_ref, u, on_mask=on))
    symbols, tx_labels = constellation_symbols(constellation, m_c)
    signals = [_first_antenna(s, config.n_tx) for s in symbols]
    mapping = BitMapping(mode="separate", rate_bits=config.rate_bits,
                         split=cfg.srm_split, tx_labels=tuple(tx_labels),
                         ris_labels=tuple(range(k_c)))
    return build_srm_codebook(patterns, signals, cfg.srm_split, mapping=mapping)


def _dedupe(vectors) -> list[np.ndarray]:
    seen, out = set(), []
    for v in vectors:
        key = np.round(np.asarray(v), 12).tobytes()
        if key not in seen:
            seen.add(key)
            out.append(np.asarray(v))
    return out


def union_candidates(channels: ChannelSet, config: SystemConfig, seed,
                     constellation: str = "psk"):
    """Union of the four baselines' signal and pattern sets, deduplicated in
    construction order.  Returns (signals, patterns, per-kind codebooks)."""
    books = {
        "ris_c": build_ris_c(channels, config, constellation),
        "ris_bc": build_ris_bc(channels, config, seed),
        "ris_sm": build_ris_sm(channels, config, constellation),
        "pbit": build_pbit(channels, config, constellation),
    }
    signals = _dedupe([s for cb in books.values() for s in cb.signals])
    patterns = _dedupe([p for cb in books.values() for p in cb.patterns])
    return signals, patterns, books
