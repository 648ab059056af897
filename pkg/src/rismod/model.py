"""Core types and channel model for RIS-assisted MIMO links.

Conventions used throughout the package:
  * A reflecting pattern is stored as a length-N complex vector of diagonal
    reflection coefficients (the pattern matrix is diagonal by construction).
    Each entry has modulus 1 (unit reflection with a phase shift) or 0 (OFF).
  * Channel entries are i.i.d. circularly symmetric complex Gaussian with
    unit variance, so with mean transmit power 1 the SNR is 1/sigma^2.
  * All randomness flows through explicit seeds / numpy Generators.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SystemConfig",
    "ChannelSet",
    "BitMapping",
    "Codebook",
    "effective_channel",
    "noise_free_points",
    "normalize_power",
    "random_channels",
    "random_candidates",
    "validate_pattern",
    "natural_joint_mapping",
    "natural_separate_mapping",
]


def _frozen_complex(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.complex128, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SystemConfig:
    """Dimensions, rate and candidate-set sizes of an (N_t, N_r, N, r) link.

    Attributes:
        n_tx: transmit antennas N_t.
        n_rx: receive antennas N_r.
        n_ris: reflecting units N.
        rate_bits: bits per channel use r; the codebook carries L = 2^r tuples.
        signal_cand_count: size M of the transmit-signal candidate set.
        pattern_cand_count: size K of the reflecting-pattern candidate set.
        srm_split: optional (r1, r2) with r1 + r2 = r for separate mapping;
            the separate scheme activates M_c = 2^r1 signals and K_c = 2^r2
            patterns.
    """

    n_tx: int
    n_rx: int
    n_ris: int
    rate_bits: int
    signal_cand_count: int
    pattern_cand_count: int
    srm_split: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        for name in ("n_tx", "n_rx", "n_ris", "rate_bits",
                     "signal_cand_count", "pattern_cand_count"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if self.tuple_count > self.signal_cand_count * self.pattern_cand_count:
            raise ValueError(
                f"tuple count L={self.tuple_count} exceeds M*K="
                f"{self.signal_cand_count * self.pattern_cand_count}")
        if self.srm_split is not None:
            r1, r2 = self.srm_split
            object.__setattr__(self, "srm_split", (int(r1), int(r2)))
            if r1 < 0 or r2 < 0 or r1 + r2 != self.rate_bits:
                raise ValueError(
                    f"srm_split {self.srm_split} must be nonnegative and sum "
                    f"to rate_bits={self.rate_bits}")
            if 2 ** r1 > self.signal_cand_count:
                raise ValueError(f"M_c=2^{r1} exceeds M={self.signal_cand_count}")
            if 2 ** r2 > self.pattern_cand_count:
                raise ValueError(f"K_c=2^{r2} exceeds K={self.pattern_cand_count}")

    @property
    def tuple_count(self) -> int:
        """Number of legitimate tuples L = 2^r."""
        return 2 ** self.rate_bits

    @property
    def mc_count(self) -> int | None:
        """Active transmit-signal count M_c = 2^r1 (separate mapping only)."""
        return None if self.srm_split is None else 2 ** self.srm_split[0]

    @property
    def kc_count(self) -> int | None:
        """Active reflecting-pattern count K_c = 2^r2 (separate mapping only)."""
        return None if self.srm_split is None else 2 ** self.srm_split[1]

    def with_default_split(self) -> "SystemConfig":
        """Return a copy with an (r1, r2) split filled in if absent.

        Default favors the transmitter: r1 = ceil(r/2), lowered until the
        candidate-set bounds M_c <= M and K_c <= K are both satisfiable.
        """
        if self.srm_split is not None:
            return self
        r = self.rate_bits
        for r1 in range(-(-r // 2), r + 1):
            r2 = r - r1
            if 2 ** r1 <= self.signal_cand_count and 2 ** r2 <= self.pattern_cand_count:
                return dataclasses.replace(self, srm_split=(r1, r2))
        raise ValueError(
            f"no feasible (r1, r2) split for r={r} with M={self.signal_cand_count}, "
            f"K={self.pattern_cand_count}")


@dataclass(frozen=True)
class ChannelSet:
    """One realization of the direct, transmitter-RIS and RIS-receiver channels.

    Shapes: h_direct (N_r, N_t), h_tx_ris (N, N_t), h_ris_rx (N_r, N).
    noise_std is the per-receive-entry complex noise standard deviation sigma.
    """

    h_direct: np.ndarray
    h_tx_ris: np.ndarray
    h_ris_rx: np.ndarray
    noise_std: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "h_direct", _frozen_complex(self.h_direct))
        object.__setattr__(self, "h_tx_ris", _frozen_complex(self.h_tx_ris))
        object.__setattr__(self, "h_ris_rx", _frozen_complex(self.h_ris_rx))
        if self.h_direct.ndim != 2 or self.h_tx_ris.ndim != 2 or self.h_ris_rx.ndim != 2:
            raise ValueError("channel matrices must be 2-D")
        n_r, n_t = self.h_direct.shape
        n, n_t2 = self.h_tx_ris.shape
        n_r2, n2 = self.h_ris_rx.shape
        if n_t2 != n_t or n_r2 != n_r or n2 != n:
            raise ValueError(
                f"inconsistent channel dimensions: h_direct {self.h_direct.shape}, "
                f"h_tx_ris {self.h_tx_ris.shape}, h_ris_rx {self.h_ris_rx.shape}")
        if not (self.noise_std > 0):
            raise ValueError(f"noise_std must be positive, got {self.noise_std}")

    @property
    def n_tx(self) -> int:
        return self.h_direct.shape[1]

    @property
    def n_rx(self) -> int:
        return self.h_direct.shape[0]

    @property
    def n_ris(self) -> int:
        return self.h_tx_ris.shape[0]

    def with_noise_std(self, sigma: float) -> "ChannelSet":
        return dataclasses.replace(self, noise_std=float(sigma))

    def check_config(self, config: SystemConfig) -> None:
        if (self.n_tx, self.n_rx, self.n_ris) != (config.n_tx, config.n_rx, config.n_ris):
            raise ValueError(
                f"channels ({self.n_tx},{self.n_rx},{self.n_ris}) do not match "
                f"config ({config.n_tx},{config.n_rx},{config.n_ris})")


def validate_pattern(phases: np.ndarray, tol: float = 1e-9) -> None:
    """Check that every reflection coefficient has modulus 1 or 0 (OFF)."""
    mags = np.abs(np.asarray(phases))
    ok = (np.abs(mags - 1.0) <= tol) | (mags <= tol)
    if not np.all(ok):
        bad = int(np.argmin(ok))
        raise ValueError(
            f"pattern entry {bad} has modulus {mags[bad]:.6g}, expected 1 or 0")


@dataclass(frozen=True)
class BitMapping:
    """Bijective assignment of r-bit labels to tuples.

    joint mode: ``labels[l]`` is the integer label of tuple l (a permutation
    of 0..L-1).  separate mode: ``tx_labels[i]`` carries the r1 transmitter
    bits for signal i and ``ris_labels[k]`` the r2 RIS bits for pattern k;
    the full label of tuple (i, k) is the transmitter bits followed by the
    RIS bits.
    """

    mode: str
    rate_bits: int
    labels: tuple[int, ...] | None = None
    split: tuple[int, int] | None = None
    tx_labels: tuple[int, ...] | None = None
    ris_labels: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.mode == "joint":
            if self.labels is None:
                raise ValueError("joint mapping requires labels")
            object.__setattr__(self, "labels", tuple(int(v) for v in self.labels))
            _check_bijection(self.labels, self.rate_bits, "labels")
        elif self.mode == "separate":
            if self.split is None or self.tx_labels is None or self.ris_labels is None:
                raise ValueError("separate mapping requires split, tx_labels, ris_labels")
            r1, r2 = self.split
            if r1 + r2 != self.rate_bits:
                raise ValueError(f"split {self.split} does not sum to {self.rate_bits}")
            object.__setattr__(self, "tx_labels", tuple(int(v) for v in self.tx_labels))
            object.__setattr__(self, "ris_labels", tuple(int(v) for v in self.ris_labels))
            _check_bijection(self.tx_labels, r1, "tx_labels")
            _check_bijection(self.ris_labels, r2, "ris_labels")
        else:
            raise ValueError(f"unknown mapping mode {self.mode!r}")

    def tuple_labels(self, signal_idx=None, pattern_idx=None) -> np.ndarray:
        """Integer labels per tuple, in tuple order.

        joint mode ignores the index arguments; separate mode composes the
        transmitter and RIS labels of each tuple's (signal, pattern) indices.
        """
        if self.mode == "joint":
            return np.array(self.labels, dtype=np.int64)
        r2 = self.split[1]
        tx = np.array(self.tx_labels, dtype=np.int64)[np.asarray(signal_idx)]
        ris = np.array(self.ris_labels, dtype=np.int64)[np.asarray(pattern_idx)]
        return (tx << r2) | ris


def _check_bijection(labels, bits: int, name: str) -> None:
    n = len(labels)
    if n != 2 ** bits:
        raise ValueError(f"{name} has {n} entries, expected 2^{bits}")
    if sorted(labels) != list(range(n)):
        raise ValueError(f"{name} is not a bijection onto 0..{n - 1}")


def natural_joint_mapping(rate_bits: int) -> BitMapping:
    """Identity labeling: tuple l gets the binary representation of l."""
    return BitMapping(mode="joint", rate_bits=rate_bits,
                      labels=tuple(range(2 ** rate_bits)))


def natural_separate_mapping(split: tuple[int, int]) -> BitMapping:
    r1, r2 = split
    return BitMapping(mode="separate", rate_bits=r1 + r2, split=(r1, r2),
                      tx_labels=tuple(range(2 ** r1)),
                      ris_labels=tuple(range(2 ** r2)))


@dataclass(frozen=True)
class Codebook:
    """L tuples of (transmit signal, reflecting pattern index) plus the mapping.

    ``patterns`` holds only the active patterns; ``pattern_idx[l]`` points
    into it.  In separate mode ``signal_idx[l]`` additionally points into the
    shared signal set so labels can be composed per tuple.
    """

    patterns: tuple[np.ndarray, ...]
    signals: tuple[np.ndarray, ...]
    pattern_idx: tuple[int, ...]
    mapping: BitMapping
    signal_idx: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "patterns",
                           tuple(_frozen_complex(p) for p in self.patterns))
        object.__setattr__(self, "signals",
                           tuple(_frozen_complex(s) for s in self.signals))
        object.__setattr__(self, "pattern_idx", tuple(int(k) for k in self.pattern_idx))
        if self.signal_idx is not None:
            object.__setattr__(self, "signal_idx",
                               tuple(int(i) for i in self.signal_idx))
        if len(self.signals) != len(self.pattern_idx):
            raise ValueError("signals and pattern_idx must have equal length")
        if self.pattern_idx and max(self.pattern_idx) >= len(self.patterns):
            raise ValueError("pattern_idx out of range")

    @property
    def n_tuples(self) -> int:
        return len(self.signals)

    @property
    def n_patterns(self) -> int:
        return len(self.patterns)

    def labels(self) -> np.ndarray:
        return self.mapping.tuple_labels(self.signal_idx, self.pattern_idx)

    def signal_sets(self) -> list[list[int]]:
        """Tuple indices grouped per pattern (the per-pattern signal sets)."""
        groups: list[list[int]] = [[] for _ in self.patterns]
        for l, k in enumerate(self.pattern_idx):
            groups[k].append(l)
        return groups

    def mean_power(self) -> float:
        return float(np.mean([np.sum(np.abs(s) ** 2) for s in self.signals]))

    def with_mapping(self, mapping: BitMapping) -> "Codebook":
        return dataclasses.replace(self, mapping=mapping)

    def with_patterns(self, patterns) -> "Codebook":
        if len(patterns) != len(self.patterns):
            raise ValueError("pattern count must be preserved")
        return dataclasses.replace(self, patterns=tuple(patterns))

    def with_signals(self, signals) -> "Codebook":
        if len(signals) != len(self.signals):
            raise ValueError("tuple count must be preserved")
        return dataclasses.replace(self, signals=tuple(signals))

    def validate(self, config: SystemConfig | None = None, tol: float = 1e-9) -> None:
        """Check the structural invariants; raises ValueError on violation."""
        L = self.n_tuples
        if config is not None and L != config.tuple_count:
            raise ValueError(f"tuple count {L} != L={config.tuple_count}")
        if L != 2 ** self.mapping.rate_bits:
            raise ValueError(
                f"tuple count {L} inconsistent with {self.mapping.rate_bits}-bit labels")
        if sum(len(g) for g in self.signal_sets()) != L:
            raise ValueError("per-pattern signal sets do not partition the tuples")
        p = self.mean_power()
        if abs(p - 1.0) > tol:
            raise ValueError(f"mean transmit power {p!r} is not 1 within {tol}")
        for pat in self.patterns:
            validate_pattern(pat, tol=max(tol, 1e-9))
        if self.mapping.mode == "separate":
            if self.signal_idx is None:
                raise ValueError("separate mapping requires per-tuple signal indices")
            groups = self.signal_sets()
            sets = [sorted(self.signal_idx[l] for l in g) for g in groups]
            if any(len(g) == 0 for g in groups):
                raise ValueError("separate mapping requires every pattern active")
            if any(s != sets[0] for s in sets[1:]):
                raise ValueError("active patterns carry different signal sets")
            k_c = 2 ** self.mapping.split[1]
            if len(self.patterns) != k_c:
                raise ValueError(
                    f"{len(self.patterns)} active patterns, expected K_c={k_c}")


def effective_channel(channels: ChannelSet, pattern: np.ndarray) -> np.ndarray:
    """End-to-end channel H_d + H_2 diag(pattern) H_1 under one pattern."""
    phases = np.asarray(pattern, dtype=np.complex128)
    if phases.shape != (channels.n_ris,):
        raise ValueError(
            f"pattern has shape {phases.shape}, expected ({channels.n_ris},)")
    return channels.h_direct + (channels.h_ris_rx * phases) @ channels.h_tx_ris


def noise_free_points(channels: ChannelSet, codebook: Codebook) -> np.ndarray:
    """Noise-free receive points G_k(l) x(l), one row per tuple, (L, N_r)."""
    g = [effective_channel(channels, p) for p in codebook.patterns]
    return np.array([g[k] @ x for x, k in zip(codebook.signals, codebook.pattern_idx)])


def normalize_power(signals) -> tuple[list[np.ndarray], float]:
    """Scale a signal set by a common factor so the mean squared norm is 1.

    Returns the scaled signals and the scale factor c (scaled = c * original).
    Raises ValueError when every signal is zero.
    """
    sigs = [np.asarray(s, dtype=np.complex128) for s in signals]
    if not sigs:
        raise ValueError("cannot normalize an empty signal set")
    power = float(np.mean([np.sum(np.abs(s) ** 2) for s in sigs]))
    if power <= 0.0:
        raise ValueError("cannot normalize an all-zero signal set")
    c = 1.0 / np.sqrt(power)
    return [c * s for s in sigs], float(c)


def _cn01(rng: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. circularly symmetric complex Gaussian entries, unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_channels(config: SystemConfig, seed, noise_std: float = 1.0) -> ChannelSet:
    """Draw one Rayleigh realization of all three channel matrices."""
    rng = np.random.default_rng(seed)
    return ChannelSet(
        h_direct=_cn01(rng, (config.n_rx, config.n_tx)),
        h_tx_ris=_cn01(rng, (config.n_ris, config.n_tx)),
        h_ris_rx=_cn01(rng, (config.n_rx, config.n_ris)),
        noise_std=noise_std,
    )


def random_candidates(config: SystemConfig, seed):
    """Random candidate sets: M Gaussian signal vectors (mean power 1) and
    K all-ON patterns with uniform phases."""
    rng = np.random.default_rng(seed)
    raw = [_cn01(rng, (config.n_tx,)) for _ in range(config.signal_cand_count)]
    signals, _ = normalize_power(raw)
    patterns = [np.exp(2j * np.pi * rng.random(config.n_ris))
                for _ in range(config.pattern_cand_count)]
    return signals, patterns
