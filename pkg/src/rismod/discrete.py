"""Discrete codebook design from given candidate sets.

Joint design is greedy subset selection: start from every (pattern, signal)
tuple and repeatedly drop the tuple whose removal leaves the best shaping
bound (all pairs weighted equally, survivor power renormalized).  Separate
design first picks signals by a CSI-free zero-embedded max-min-distance
depletion, then picks patterns by bound depletion.  Labels are assigned
afterwards by a binary switching search that accepts strictly improving
label swaps.  Exhaustive enumerations of the same selection problems serve
as optimality oracles, and closed-form multiplication counts compare the
two routes.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .ber import all_ones_hamming, hamming_matrix, q_function, sq_distance_matrix, \
    union_bound_from_points
from .model import BitMapping, ChannelSet, Codebook, SystemConfig, effective_channel, \
    natural_joint_mapping, natural_separate_mapping, normalize_power

__all__ = [
    "DepletionTrace",
    "ComplexityEstimate",
    "deplete_jrm",
    "deplete_signals_srm",
    "deplete_patterns_srm",
    "bsa_map",
    "exhaustive_jrm",
    "exhaustive_srm",
    "djmsr_jrm",
    "djmsr_srm",
    "complexity_counts",
    "build_jrm_codebook",
    "build_srm_codebook",
]


@dataclass
class DepletionTrace:
    """Removal order and the objective recorded after each removal."""

    removed_order: list[int] = field(default_factory=list)
    objective_after_each: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class ComplexityEstimate:
    multiplications: int

    def __post_init__(self) -> None:
        if self.multiplications < 0:
            raise ValueError("multiplication count must be nonnegative")


def _rate_eff(n: int) -> float:
    return float(np.log2(n)) if n > 1 else 1.0


def build_jrm_codebook(channels_or_none, pattern_cands, signal_cands, kept_pairs,
                       mapping: BitMapping | None = None) -> Codebook:
    """Assemble a codebook from surviving (pattern, signal) candidate pairs.

    Only patterns that still carry tuples are kept; tuple order follows
    kept_pairs.  Signals are power-renormalized as a set.
    """
    active = sorted({k for k, _ in kept_pairs})
    remap = {k: j for j, k in enumerate(active)}
    signals, _ = normalize_power([signal_cands[i] for _, i in kept_pairs])
    L = len(kept_pairs)
    if mapping is None:
        r = int(round(np.log2(L)))
        if 2 ** r != L:
            raise ValueError(f"cannot build a default mapping for L={L}")
        mapping = natural_joint_mapping(r)
    return Codebook(
        patterns=tuple(pattern_cands[k] for k in active),
        signals=tuple(signals),
        pattern_idx=tuple(remap[k] for k, _ in kept_pairs),
        mapping=mapping,
    )


def build_srm_codebook(patterns, signals, split: tuple[int, int],
                       mapping: BitMapping | None = None) -> Codebook:
    """Assemble a separate-mode codebook: every pattern carries the shared set."""
    k_c, m_c = len(patterns), len(signals)
    signals, _ = normalize_power(signals)
    pattern_idx = [k for k in range(k_c) for _ in range(m_c)]
    signal_idx = [i for _ in range(k_c) for i in range(m_c)]
    if mapping is None:
        mapping = natural_separate_mapping(split)
    return Codebook(
        patterns=tuple(patterns),
        signals=tuple(signals[i] for i in signal_idx),
        pattern_idx=tuple(pattern_idx),
        mapping=mapping,
        signal_idx=tuple(signal_idx),
    )


def _tuple_points_and_powers(channels, pattern_cands, signal_cands, pairs):
    g = [effective_channel(channels, p) for p in pattern_cands]
    points = np.array([g[k] @ signal_cands[i] for k, i in pairs])
    powers = np.array([np.sum(np.abs(signal_cands[i]) ** 2) for _, i in pairs])
    return points, powers


def _removal_objectives(d2_full: np.ndarray, powers: np.ndarray, cur: list[int],
                        sigma: float) -> np.ndarray:
    """Shaping bound of cur minus one element, for every removal candidate.

    Distances come from unnormalized points; removing t rescales survivor
    power by c^2 = (s-1) / sum(powers minus t), which rescales every squared
    distance by the same c^2.
    """
    idx = np.asarray(cur)
    s = idx.size
    sub_d2 = d2_full[np.ix_(idx, idx)]
    sub_p = powers[idx]
    rest_p = np.sum(sub_p) - sub_p
    with np.errstate(divide="ignore"):
        c2 = np.where(rest_p > 0, (s - 1) / rest_p, np.inf)
    pi, pj = np.triu_indices(s, 1)
    d2_pairs = sub_d2[pi, pj]
    args = c2[:, None] * d2_pairs[None, :] / (2.0 * sigma ** 2)
    pep = q_function(np.sqrt(np.maximum(args, 0.0)))
    touch = (pi[None, :] == np.arange(s)[:, None]) | (pj[None, :] == np.arange(s)[:, None])
    sums = pep.sum(axis=1) - np.sum(pep * touch, axis=1)
    out = sums * 2.0 / ((s - 1) * _rate_eff(s - 1))
    out[rest_p <= 0] = np.inf
    return out


def deplete_jrm(channels: ChannelSet, signal_cands, pattern_cands, tuple_count: int,
                sigma: float) -> tuple[Codebook, DepletionTrace]:
    """Greedy tuple depletion from all K*M candidates down to L survivors.

    The objective is the all-pairs-weighted bound of the renormalized
    survivor set; ties resolve to the lowest candidate position.  Returns
    the surviving tuples under the identity mapping plus the removal trace.
    """
    m, k = len(signal_cands), len(pattern_cands)
    if m * k < tuple_count:
        raise ValueError(f"M*K={m * k} < L={tuple_count}")
    pairs = [(kk, ii) for kk in range(k) for ii in range(m)]
    points, powers = _tuple_points_and_powers(channels, pattern_cands, signal_cands, pairs)
    d2 = sq_distance_matrix(points)
    cur = list(range(len(pairs)))
    trace = DepletionTrace()
    while len(cur) > tuple_count:
        objs = _removal_objectives(d2, powers, cur, sigma)
        t = int(np.argmin(objs))
        trace.removed_order.append(cur[t])
        trace.objective_after_each.append(float(objs[t]))
        del cur[t]
    kept = [pairs[t] for t in cur]
    return build_jrm_codebook(channels, pattern_cands, signal_cands, kept), trace


def deplete_signals_srm(signal_cands, mc_count: int) -> tuple[list[np.ndarray], DepletionTrace]:
    """CSI-free signal selection by zero-embedded max-min-distance depletion.

    A zero vector is embedded so that signals close to "silence" score badly
    (they would break pattern detection); it is never removed itself and is
    dropped at the end.  At each step the removal that maximizes the minimum
    pairwise distance of the survivors wins; the metric is scale-free (a
    common power rescale cannot reorder a subset's internal distances), and
    the returned set is power-renormalized.
    """
    m = len(signal_cands)
    if m < mc_count:
        raise ValueError(f"M={m} < M_c={mc_count}")
    trace = DepletionTrace()
    if m == mc_count:
        return normalize_power(signal_cands)[0], trace
    n_tx = np.asarray(signal_cands[0]).shape[0]
    work = [np.zeros(n_tx, dtype=np.complex128)] + [np.asarray(s, dtype=np.complex128)
                                                    for s in signal_cands]
    ids = list(range(len(work)))  # ids[0] == 0 marks the embedded zero
    while len(work) > mc_count + 1:
        best_t, best_metric = None, -np.inf
        for t in range(1, len(work)):
            rest = work[:t] + work[t + 1:]
            metric = _min_pairwise_distance(rest)
            if metric > best_metric + 0.0:
                best_t, best_metric = t, metric
        trace.removed_order.append(ids[best_t] - 1)
        trace.objective_after_each.append(float(best_metric))
        del work[best_t], ids[best_t]
    final, _ = normalize_power(work[1:])
    return final, trace


def _min_pairwise_distance(signals) -> float:
    pts = np.array(signals)
    d2 = sq_distance_matrix(pts)
    iu = np.triu_indices(len(signals), 1)
    return float(np.sqrt(np.min(d2[iu])))


def deplete_patterns_srm(channels: ChannelSet, pattern_cands, signals, kc_count: int,
                         sigma: float) -> tuple[list[np.ndarray], DepletionTrace]:
    """Greedy pattern depletion for the separate scheme.

    The shared signal set is fixed (already power-normalized, and shared
    sets keep mean power 1 for any pattern count), so each step just drops
    the pattern whose removal leaves the best all-pairs bound.
    """
    k = len(pattern_cands)
    if k < kc_count:
        raise ValueError(f"K={k} < K_c={kc_count}")
    trace = DepletionTrace()
    cur = list(range(k))
    if k == kc_count:
        return [pattern_cands[i] for i in cur], trace
    m_c = len(signals)
    g = [effective_channel(channels, p) for p in pattern_cands]
    points = np.array([g[kk] @ s for kk in range(k) for s in signals])
    while len(cur) > kc_count:
        best_t, best_obj = None, np.inf
        for t in range(len(cur)):
            keep = [kk for j, kk in enumerate(cur) if j != t]
            rows = [kk * m_c + i for kk in keep for i in range(m_c)]
            pts = points[rows]
            obj = union_bound_from_points(pts, all_ones_hamming(len(rows)), sigma,
                                          _rate_eff(len(rows)))
            if obj < best_obj:
                best_t, best_obj = t, obj
        trace.removed_order.append(cur[best_t])
        trace.objective_after_each.append(float(best_obj))
        del cur[best_t]
    return [pattern_cands[i] for i in cur], trace


def _popcounts(bits: int) -> np.ndarray:
    vals = np.arange(1 << bits, dtype=np.int64)
    out = np.zeros_like(vals)
    for b in range(bits):
        out += (vals >> b) & 1
    return out


def _mapping_bound(pep: np.ndarray, labels: np.ndarray, pc: np.ndarray,
                   rate_bits: int) -> float:
    ham = pc[labels[:, None] ^ labels[None, :]]
    return float(np.sum(ham * pep)) / (labels.size * rate_bits)


def bsa_map(channels: ChannelSet, codebook: Codebook, sigma: float,
            max_passes: int = 20) -> BitMapping:
    """Binary switching search for a low-bound bit assignment.

    Starts from natural binary labels, sweeps all label pairs and accepts a
    swap iff the true bound strictly decreases; separate mode alternates
    sweeps over the transmitter labels and the RIS labels.  The pass cap
    guards against cycling on floating-point near-ties.
    """
    from .model import noise_free_points

    points = noise_free_points(channels, codebook)
    pep = q_function(np.sqrt(np.maximum(sq_distance_matrix(points), 0.0)
                             / (2.0 * sigma ** 2)))
    np.fill_diagonal(pep, 0.0)
    r = codebook.mapping.rate_bits
    pc = _popcounts(r)
    mode = codebook.mapping.mode

    if mode == "joint":
        labels = np.arange(codebook.n_tuples, dtype=np.int64)
        bound = _mapping_bound(pep, labels, pc, r)
        for _ in range(max_passes):
            improved = False
            for a, b in itertools.combinations(range(labels.size), 2):
                labels[a], labels[b] = labels[b], labels[a]
                new = _mapping_bound(pep, labels, pc, r)
                if new < bound:
                    bound, improved = new, True
                else:
                    labels[a], labels[b] = labels[b], labels[a]
            if not improved:
                break
        return BitMapping(mode="joint", rate_bits=r, labels=tuple(int(v) for v in labels))

    r1, r2 = codebook.mapping.split
    sig_idx = np.array(codebook.signal_idx, dtype=np.int64)
    pat_idx = np.array(codebook.pattern_idx, dtype=np.int64)
    tx = np.arange(1 << r1, dtype=np.int64)
    ris = np.arange(1 << r2, dtype=np.int64)

    def bound_of() -> float:
        labels = (tx[sig_idx] << r2) | ris[pat_idx]
        return _mapping_bound(pep, labels, pc, r)

    bound = bound_of()
    for _ in range(max_passes):
        improved = False
        for vec in (tx, ris):
            for a, b in itertools.combinations(range(vec.size), 2):
                vec[a], vec[b] = vec[b], vec[a]
                new = bound_of()
                if new < bound:
                    bound, improved = new, True
                else:
                    vec[a], vec[b] = vec[b], vec[a]
        if not improved:
            break
    return BitMapping(mode="separate", rate_bits=r, split=(r1, r2),
                      tx_labels=tuple(int(v) for v in tx),
                      ris_labels=tuple(int(v) for v in ris))


def _subset_bounds(d2_full: np.ndarray, powers: np.ndarray, subsets: np.ndarray,
                   sigma: float, rate_bits: float) -> np.ndarray:
    """All-pairs bound of each row of subsets (n_subsets, L), vectorized."""
    n_subsets, L = subsets.shape
    p_sum = powers[subsets].sum(axis=1)
    with np.errstate(divide="ignore"):
        c2 = np.where(p_sum > 0, L / p_sum, np.inf)
    pi, pj = np.triu_indices(L, 1)
    d2 = d2_full[subsets[:, pi], subsets[:, pj]]
    pep = q_function(np.sqrt(np.maximum(c2[:, None] * d2, 0.0) / (2.0 * sigma ** 2)))
    out = pep.sum(axis=1) * 2.0 / (L * rate_bits)
    out[p_sum <= 0] = np.inf
    return out


def exhaustive_jrm(channels: ChannelSet, signal_cands, pattern_cands, tuple_count: int,
                   sigma: float, max_subsets: int = 2_000_000) -> Codebook:
    """Globally optimal tuple subset under the all-pairs shaping bound."""
    m, k = len(signal_cands), len(pattern_cands)
    total = comb(k * m, tuple_count)
    if total > max_subsets:
        raise ValueError(f"C({k * m},{tuple_count})={total} exceeds budget {max_subsets}")
    pairs = [(kk, ii) for kk in range(k) for ii in range(m)]
    points, powers = _tuple_points_and_powers(channels, pattern_cands, signal_cands, pairs)
    d2 = sq_distance_matrix(points)
    rate = _rate_eff(tuple_count)
    best_val, best_subset = np.inf, None
    it = itertools.combinations(range(len(pairs)), tuple_count)
    while True:
        chunk = np.array(list(itertools.islice(it, 200_000)), dtype=np.int64)
        if chunk.size == 0:
            break
        vals = _subset_bounds(d2, powers, chunk, sigma, rate)
        j = int(np.argmin(vals))
        if vals[j] < best_val:
            best_val, best_subset = float(vals[j]), chunk[j]
    kept = [pairs[t] for t in best_subset]
    return build_jrm_codebook(channels, pattern_cands, signal_cands, kept)


def exhaustive_srm(channels: ChannelSet, signal_cands, pattern_cands, mc_count: int,
                   kc_count: int, sigma: float, max_subsets: int = 2_000_000) -> Codebook:
    """Globally optimal (pattern subset, signal subset) pair for separate mapping."""
    m, k = len(signal_cands), len(pattern_cands)
    if mc_count > m or kc_count > k:
        raise ValueError(f"M_c={mc_count} or K_c={kc_count} exceeds candidates ({m},{k})")
    total = comb(k, kc_count) * comb(m, mc_count)
    if total > max_subsets:
        raise ValueError(f"C({k},{kc_count})*C({m},{mc_count})={total} exceeds budget "
                         f"{max_subsets}")
    g = [effective_channel(channels, p) for p in pattern_cands]
    L = mc_count * kc_count
    rate = _rate_eff(L)
    best_val, best_combo = np.inf, None
    for pat_combo in itertools.combinations(range(k), kc_count):
        for sig_combo in itertools.combinations(range(m), mc_count):
            sigs, _ = normalize_power([signal_cands[i] for i in sig_combo])
            pts = np.array([g[kk] @ s for kk in pat_combo for s in sigs])
            val = union_bound_from_points(pts, all_ones_hamming(L), sigma, rate)
            if val < best_val:
                best_val, best_combo = float(val), (pat_combo, sig_combo)
    pat_combo, sig_combo = best_combo
    r1 = int(round(np.log2(mc_count))) if mc_count > 1 else 0
    r2 = int(round(np.log2(kc_count))) if kc_count > 1 else 0
    return build_srm_codebook([pattern_cands[kk] for kk in pat_combo],
                              [signal_cands[i] for i in sig_combo], (r1, r2))


def djmsr_jrm(channels: ChannelSet, signal_cands, pattern_cands, tuple_count: int,
              sigma: float) -> Codebook:
    """Full joint pipeline: tuple depletion followed by label switching."""
    cb, _ = deplete_jrm(channels, signal_cands, pattern_cands, tuple_count, sigma)
    return cb.with_mapping(bsa_map(channels, cb, sigma))


def djmsr_srm(channels: ChannelSet, signal_cands, pattern_cands, mc_count: int,
              kc_count: int, sigma: float) -> Codebook:
    """Full separate pipeline: signal depletion, pattern depletion, label switching."""
    sigs, _ = deplete_signals_srm(signal_cands, mc_count)
    pats, _ = deplete_patterns_srm(channels, pattern_cands, sigs, kc_count, sigma)
    r1 = int(round(np.log2(mc_count))) if mc_count > 1 else 0
    r2 = int(round(np.log2(kc_count))) if kc_count > 1 else 0
    cb = build_srm_codebook(pats, sigs, (r1, r2))
    return cb.with_mapping(bsa_map(channels, cb, sigma))


_METHODS = ("djmsr-jrm", "es-jrm", "djmsr-srm", "es-srm")


def complexity_counts(config: SystemConfig, method: str) -> ComplexityEstimate:
    """Closed-form multiplication counts (leading order, unit constants)."""
    n, n_t, n_r = config.n_ris, config.n_tx, config.n_rx
    m, k, L = config.signal_cand_count, config.pattern_cand_count, config.tuple_count
    per_eval = L * n ** 2 * (n_r + n_t) + L ** 2 * n_r
    if method == "djmsr-jrm":
        count = k ** 3 * m ** 3 * n ** 2 * (n_r + n_t) + k ** 4 * m ** 4 * n_r
    elif method == "es-jrm":
        count = (comb(k * m, L) + L ** 2) * per_eval
    elif method == "djmsr-srm":
        m_c = _require_split(config)[0]
        count = k ** 3 * m_c * n ** 2 * (n_r + n_t) + k ** 4 * m_c ** 2 * n_r
    elif method == "es-srm":
        m_c, k_c = _require_split(config)
        count = (comb(k, k_c) * comb(m, m_c) + L ** 2) * per_eval
    else:
        raise ValueError(f"unknown method {method!r}; expected one of {_METHODS}")
    return ComplexityEstimate(multiplications=int(count))


def _require_split(config: SystemConfig) -> tuple[int, int]:
    cfg = config.with_default_split()
    return cfg.mc_count, cfg.kc_count
