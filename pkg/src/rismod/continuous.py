"""Continuous refinement of a discrete design.

Two alternating projected-gradient stages minimize the mapped union bound:
a reflecting stage over the stacked per-pattern phase vector q (relaxed to
the power sphere tr(qq^H) = KN with a log-barrier pressing the entry moduli
toward 1, output re-projected per entry to unit modulus), and a shaping
stage over the stacked transmit signals (complex z on the sphere tr(zz^H)=L
for joint mapping; real parametrization f with a forward-difference gradient
for separate mapping, where the shared set must stay shared).

Both stages rewrite each squared pairwise distance as a Hadamard-masked
Gram quadratic form, q^H C q + 2 Re(q^T a) + const and z^H Z z, so that one
tensor contraction yields all pair distances and the analytic gradient.

Gradients follow the Wirtinger convention grad = d/d(conj x), so the
directional derivative along a perturbation d is 2 Re(grad^H d) (plain
grad^T d in the real parametrization); line searches certify descent with
that inner product and satisfy both Wolfe conditions along the retracted
(sphere-renormalized) ray, which keeps the recorded objective sequence
non-increasing.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ber import hamming_matrix, q_function, union_bound
from .discrete import build_srm_codebook, bsa_map, djmsr_jrm, djmsr_srm
from .model import ChannelSet, Codebook, SystemConfig, effective_channel

__all__ = [
    "PenaltyConfig",
    "OptTrace",
    "CorProblem",
    "CosJrmProblem",
    "CosSrmProblem",
    "build_cor",
    "cor_objective",
    "cor_gradient",
    "cor_optimize",
    "build_cos_jrm",
    "cos_jrm_objective",
    "cos_jrm_gradient",
    "cos_jrm_optimize",
    "build_cos_srm",
    "cos_srm_objective",
    "cos_srm_gradient",
    "cos_srm_optimize",
    "cjmsr",
    "srm_shared_signals",
]

_D2_FLOOR = 1e-12  # removable 1/sqrt(D^2) singularity at coincident points


@dataclass(frozen=True)
class PenaltyConfig:
    """Barrier, line-search and halting parameters shared by all stages."""

    barrier_weight: float = 100.0       # t in the log barrier
    norm_order: int = 8                 # even p replacing the infinity norm
    barrier_slack: float = 0.25         # feasibility slack, see module notes
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    eps_reflect: float = 1e-4           # relative-decrease halt, reflecting stage
    eps_signal: float = 1e-4            # shaping stage, joint mapping
    eps_signal_real: float = 1e-4       # shaping stage, separate mapping
    max_inner_iters: int = 500
    max_rounds: int = 20
    fd_step: float = 1e-6               # forward-difference step

    def __post_init__(self) -> None:
        if self.norm_order < 4 or self.norm_order % 2:
            raise ValueError("norm_order must be an even integer >= 4")
        if not (0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0):
            raise ValueError("need 0 < wolfe_c1 < wolfe_c2 < 1")
        for name in ("barrier_weight", "barrier_slack", "eps_reflect",
                     "eps_signal", "eps_signal_real", "fd_step"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class OptTrace:
    """Objective values of the accepted iterates (index 0 is the start)."""

    objectives: list[float] = field(default_factory=list)
    converged: bool = False
    line_search_failed: bool = False
    kept_initial: bool = False


# ---------------------------------------------------------------------------
# Wolfe line search on a retracted ray
# ---------------------------------------------------------------------------

def _wolfe_search(phi, f0: float, dphi0: float, c1: float, c2: float,
                  alpha0: float = 1.0, max_expand: int = 30, max_zoom: int = 40):
    """Bracket-and-zoom search for strong Wolfe conditions.

    phi(alpha) must return (value, derivative, payload).  Returns
    (alpha, value, payload, armijo_ok, wolfe_ok); alpha = 0 means total
    failure (no sufficient-decrease point found).
    """

    def zoom(lo, f_lo, hi):
        best = None
        for _ in range(max_zoom):
            a = 0.5 * (lo + hi)
            f_a, d_a, pay = phi(a)
            if not np.isfinite(f_a) or f_a > f0 + c1 * a * dphi0 or f_a >= f_lo:
                hi = a
                continue
            best = (a, f_a, pay)
            if abs(d_a) <= -c2 * dphi0:
                return a, f_a, pay, True, True
            if d_a * (hi - lo) >= 0:
                hi = lo
            lo, f_lo = a, f_a
        if best is not None:
            return best[0], best[1], best[2], True, False
        return 0.0, f0, None, False, False

    a_prev, f_prev = 0.0, f0
    a = alpha0
    last_ok = None
    for i in range(max_expand):
        f_a, d_a, pay = phi(a)
        if not np.isfinite(f_a) or f_a > f0 + c1 * a * dphi0 or (i > 0 and f_a >= f_prev):
            return zoom(a_prev, f_prev, a)
        last_ok = (a, f_a, pay)
        if abs(d_a) <= -c2 * dphi0:
            return a, f_a, pay, True, True
        if d_a >= 0:
            return zoom(a, f_a, a_prev)
        a_prev, f_prev = a, f_a
        a *= 2.0
    a, f_a, pay = last_ok
    return a, f_a, pay, True, False


def _sphere_descent(x0: np.ndarray, radius: float, value_and_grad, eps: float,
                    penalty: PenaltyConfig, is_complex: bool):
    """Projected descent on the sphere ||x||_2 = radius with exact
    per-step renormalization.  Returns (x, f, trace)."""

    def inner(a, b):
        if is_complex:
            return 2.0 * np.vdot(a, b).real
        return float(a @ b)

    x = x0 * (radius / np.linalg.norm(x0))
    f, g = value_and_grad(x)
    trace = OptTrace(objectives=[float(f)])
    r2 = radius ** 2
    for _ in range(penalty.max_inner_iters):
        delta = -(g - x * (np.vdot(x, g) / r2)) if is_complex \
            else -(g - x * (float(x @ g) / r2))
        dphi0 = inner(g, delta)
        if not dphi0 < -1e-18 * (1.0 + abs(f)):
            trace.converged = True
            break

        def phi(alpha):
            v = x + alpha * delta
            nv = np.linalg.norm(v)
            xs = v * (radius / nv)
            fv, gv = value_and_grad(xs)
            if not np.isfinite(fv):
                return fv, np.nan, None
            re_vd = np.vdot(v, delta).real if is_complex else float(v @ delta)
            dxs = delta * (radius / nv) - v * (radius * re_vd / nv ** 3)
            return fv, inner(gv, dxs), (xs, fv, gv)

        alpha, f_a, payload, armijo_ok, _ = _wolfe_search(
            phi, f, dphi0, penalty.wolfe_c1, penalty.wolfe_c2)
        if not armijo_ok or payload is None:
            trace.line_search_failed = True
            break
        x, f, g = payload[0], payload[1], payload[2]
        prev = trace.objectives[-1]
        trace.objectives.append(float(f))
        if prev > 0 and (prev - f) / prev <= eps:
            trace.converged = True
            break
    return x, f, trace


# ---------------------------------------------------------------------------
# Reflecting stage
# ---------------------------------------------------------------------------

@dataclass
class CorProblem:
    """Stacked reflecting-design state over all active patterns.

    quad/cross/direct hold, per unordered tuple pair, the pieces of
    D^2 = q^H C q + 2 Re(q^T a) + direct.
    """

    stacked_hd: np.ndarray       # (N_r, K N_t)
    stacked_h2: np.ndarray       # (N_r, K N)
    stacked_h1: np.ndarray       # (K N, K N_t)
    q: np.ndarray                # (K N,) current stacked phase vector
    stacked_signals: np.ndarray  # (L, K N_t) the vectors g_k (x) x
    quad: np.ndarray             # (P, K N, K N) Hermitian PSD
    cross: np.ndarray            # (P, K N)
    direct: np.ndarray           # (P,)
    pair_l: np.ndarray           # (P,)
    pair_lhat: np.ndarray        # (P,)
    n_tuples: int
    rate_bits: int
    k_tilde: int
    n_ris: int


def build_cor(channels: ChannelSet, codebook: Codebook) -> CorProblem:
    """Assemble the stacked matrices and per-pair quadratic-form data."""
    k_t = codebook.n_patterns
    if k_t < 1:
        raise ValueError("codebook has no patterns")
    n_r, n_t = channels.h_direct.shape
    n = channels.n_ris
    L = codebook.n_tuples
    hd_hat = np.tile(channels.h_direct, (1, k_t))
    h2_hat = np.tile(channels.h_ris_rx, (1, k_t))
    h1_hat = np.kron(np.eye(k_t), channels.h_tx_ris)
    q0 = np.concatenate([np.asarray(p) for p in codebook.patterns])

    xhat = np.zeros((L, k_t * n_t), dtype=np.complex128)
    for l, (x, k) in enumerate(zip(codebook.signals, codebook.pattern_idx)):
        xhat[l, k * n_t:(k + 1) * n_t] = x

    r_h2 = h2_hat.conj().T @ h2_hat
    pair_l, pair_lhat = np.triu_indices(L, 1)
    P = pair_l.size
    quad = np.empty((P, k_t * n, k_t * n), dtype=np.complex128)
    cross = np.empty((P, k_t * n), dtype=np.complex128)
    direct = np.empty(P)
    for p, (l, lh) in enumerate(zip(pair_l, pair_lhat)):
        xd = xhat[l] - xhat[lh]
        m = h1_hat @ xd
        quad[p] = r_h2 * np.outer(m.conj(), m)
        u = h2_hat.conj().T @ (hd_hat @ xd)
        cross[p] = u.conj() * m
        direct[p] = float(np.sum(np.abs(hd_hat @ xd) ** 2))
    return CorProblem(stacked_hd=hd_hat, stacked_h2=h2_hat, stacked_h1=h1_hat,
                      q=q0, stacked_signals=xhat, quad=quad, cross=cross,
                      direct=direct, pair_l=pair_l, pair_lhat=pair_lhat,
                      n_tuples=L, rate_bits=codebook.mapping.rate_bits,
                      k_tilde=k_t, n_ris=n)


def _pair_weights(hamming: np.ndarray, pair_l, pair_lhat) -> np.ndarray:
    return np.asarray(hamming, dtype=np.float64)[pair_l, pair_lhat]


def _cor_distances(problem: CorProblem, q: np.ndarray) -> np.ndarray:
    quad_vals = np.einsum("pij,i,j->p", problem.quad, q.conj(), q).real
    cross_vals = 2.0 * (problem.cross @ q).real
    return quad_vals + cross_vals + problem.direct


def _barrier(q: np.ndarray, penalty: PenaltyConfig):
    """Log barrier on the normalized p-norm with feasibility slack.

    Argument u = 1 + slack - ||q||_p / n^(1/p); on the power sphere the
    normalized p-norm is >= 1 (power-mean inequality), so without the slack
    the interior would be empty.  Returns (value, grad, u)."""
    p = penalty.norm_order
    n = q.size
    mags = np.abs(q)
    norm_p = float(np.sum(mags ** p)) ** (1.0 / p)
    scale = n ** (1.0 / p)
    u = 1.0 + penalty.barrier_slack - norm_p / scale
    if u <= 0.0:
        return np.inf, None, u
    value = -np.log(u) / penalty.barrier_weight
    p_q = q * mags ** (p - 2)
    grad = p_q * (norm_p ** (1 - p) / (2.0 * penalty.barrier_weight * u * scale))
    return value, grad, u


def _cor_eval(problem: CorProblem, q: np.ndarray, w: np.ndarray, sigma: float,
              penalty: PenaltyConfig, need_grad: bool):
    L, r = problem.n_tuples, problem.rate_bits
    pref = 2.0 / (L * r)
    d2 = _cor_distances(problem, q)
    d2_pos = np.maximum(d2, 0.0)
    bound = pref * float(np.sum(w * q_function(np.sqrt(d2_pos / (2.0 * sigma ** 2)))))
    b_val, b_grad, _ = _barrier(q, penalty)
    value = bound + b_val
    if not need_grad:
        return value, None, bound
    if b_grad is None:
        raise ValueError("barrier argument is not positive: infeasible point")
    d2_cl = np.maximum(d2_pos, _D2_FLOOR)
    coef = w * 0.25 * np.sqrt(1.0 / (np.pi * sigma ** 2 * d2_cl)) \
        * np.exp(-d2_pos / (4.0 * sigma ** 2))
    vecs = np.einsum("pij,j->pi", problem.quad, q) + problem.cross.conj()
    grad = -pref * np.einsum("p,pi->i", coef, vecs) + b_grad
    return value, grad, bound


def cor_objective(problem: CorProblem, hamming: np.ndarray, sigma: float,
                  penalty: PenaltyConfig) -> float:
    """Penalized reflecting objective at the problem's current q."""
    w = _pair_weights(hamming, problem.pair_l, problem.pair_lhat)
    return _cor_eval(problem, problem.q, w, sigma, penalty, need_grad=False)[0]


def cor_gradient(problem: CorProblem, hamming: np.ndarray, sigma: float,
                 penalty: PenaltyConfig) -> np.ndarray:
    """Wirtinger gradient d/d(conj q) of the penalized reflecting objective."""
    w = _pair_weights(hamming, problem.pair_l, problem.pair_lhat)
    return _cor_eval(problem, problem.q, w, sigma, penalty, need_grad=True)[1]


def cor_optimize(problem: CorProblem, hamming: np.ndarray, sigma: float,
                 penalty: PenaltyConfig):
    """Projected descent over the stacked phases; outputs unit-modulus patterns.

    The final per-entry phase projection can only be compared fairly on the
    true bound, so the output falls back to the initial patterns whenever
    the projected result does not improve it.
    """
    w = _pair_weights(hamming, problem.pair_l, problem.pair_lhat)
    radius = np.sqrt(problem.k_tilde * problem.n_ris)

    def vg(q):
        value, grad, _ = _cor_eval(problem, q, w, sigma, penalty, need_grad=True)
        return value, grad

    q0 = problem.q.copy()
    q, _, trace = _sphere_descent(q0, radius, vg, penalty.eps_reflect, penalty,
                                  is_complex=True)

    def project(qv):
        mags = np.abs(qv)
        safe = np.where(mags > 1e-300, mags, 1.0)
        return np.where(mags > 1e-300, qv / safe, 1.0)

    q_out = project(q)
    bound_init = _cor_eval(problem, project(q0), w, sigma, penalty, False)[2]
    bound_out = _cor_eval(problem, q_out, w, sigma, penalty, False)[2]
    if bound_out > bound_init:
        q_out = project(q0)
        trace.kept_initial = True
    problem.q = q
    n = problem.n_ris
    patterns = [q_out[k * n:(k + 1) * n] for k in range(problem.k_tilde)]
    return patterns, trace


# ---------------------------------------------------------------------------
# Shaping stage, joint mapping
# ---------------------------------------------------------------------------

@dataclass
class CosJrmProblem:
    """Stacked signal-shaping state: all tuple signals in one vector z."""

    wide_channel: np.ndarray   # (N_r, L N_t), effective channel per tuple block
    z: np.ndarray              # (L N_t,)
    quad: np.ndarray           # (P, L N_t, L N_t) pair matrices Z
    pair_l: np.ndarray
    pair_lhat: np.ndarray
    n_tuples: int
    n_tx: int
    rate_bits: int

    def selector(self, l: int) -> np.ndarray:
        o = np.zeros(self.n_tuples * self.n_tx)
        o[l * self.n_tx:(l + 1) * self.n_tx] = 1.0
        return o


def build_cos_jrm(channels: ChannelSet, codebook: Codebook) -> CosJrmProblem:
    """Assemble the wide channel, the stacked z and the masked-Gram pair data."""
    n_t = channels.n_tx
    L = codebook.n_tuples
    g = [effective_channel(channels, p) for p in codebook.patterns]
    wide = np.concatenate([g[k] for k in codebook.pattern_idx], axis=1)
    z0 = np.concatenate([np.asarray(x) for x in codebook.signals])
    r_w = wide.conj().T @ wide
    pair_l, pair_lhat = np.triu_indices(L, 1)
    deltas = np.zeros((pair_l.size, L * n_t))
    for p, (l, lh) in enumerate(zip(pair_l, pair_lhat)):
        deltas[p, l * n_t:(l + 1) * n_t] = 1.0
        deltas[p, lh * n_t:(lh + 1) * n_t] = -1.0
    quad = r_w[None, :, :] * np.einsum("pi,pj->pij", deltas, deltas)
    return CosJrmProblem(wide_channel=wide, z=z0, quad=quad, pair_l=pair_l,
                         pair_lhat=pair_lhat, n_tuples=L, n_tx=n_t,
                         rate_bits=codebook.mapping.rate_bits)


def _cos_eval(problem: CosJrmProblem, z: np.ndarray, w: np.ndarray, sigma: float,
              need_grad: bool):
    L, r = problem.n_tuples, problem.rate_bits
    pref = 2.0 / (L * r)
    d2 = np.einsum("pij,i,j->p", problem.quad, z.conj(), z).real
    d2_pos = np.maximum(d2, 0.0)
    bound = pref * float(np.sum(w * q_function(np.sqrt(d2_pos / (2.0 * sigma ** 2)))))
    if not need_grad:
        return bound, None
    d2_cl = np.maximum(d2_pos, _D2_FLOOR)
    coef = w * 0.25 * np.sqrt(1.0 / (np.pi * sigma ** 2 * d2_cl)) \
        * np.exp(-d2_pos / (4.0 * sigma ** 2))
    grad = -pref * np.einsum("p,pij,j->i", coef, problem.quad, z)
    return bound, grad


def cos_jrm_objective(problem: CosJrmProblem, hamming: np.ndarray, sigma: float) -> float:
    w = _pair_weights(hamming, problem.pair_l, problem.pair_lhat)
    return _cos_eval(problem, problem.z, w, sigma, need_grad=False)[0]


def cos_jrm_gradient(problem: CosJrmProblem, hamming: np.ndarray,
                     sigma: float) -> np.ndarray:
    """Wirtinger gradient d/d(conj z) of the mapped bound."""
    w = _pair_weights(hamming, problem.pair_l, problem.pair_lhat)
    return _cos_eval(problem, problem.z, w, sigma, need_grad=True)[1]


def cos_jrm_optimize(problem: CosJrmProblem, hamming: np.ndarray, sigma: float,
                     penalty: PenaltyConfig):
    """Projected descent of z on tr(zz^H) = L; returns per-tuple signals."""
    w = _pair_weights(hamming, problem.pair_l, problem.pair_lhat)
    radius = np.sqrt(problem.n_tuples)

    def vg(z):
        return _cos_eval(problem, z, w, sigma, need_grad=True)

    z0 = problem.z.copy()
    z, _, trace = _sphere_descent(z0, radius, vg, penalty.eps_signal, penalty,
                                  is_complex=True)
    b0 = _cos_eval(problem, z0 * (radius / np.linalg.norm(z0)), w, sigma, False)[0]
    b1 = _cos_eval(problem, z, w, sigma, False)[0]
    if b1 > b0:
        z = z0 * (radius / np.linalg.norm(z0))
        trace.kept_initial = True
    problem.z = z
    signals = [z[l * problem.n_tx:(l + 1) * problem.n_tx]
               for l in range(problem.n_tuples)]
    return signals, trace


# ---------------------------------------------------------------------------
# Shaping stage, separate mapping (real parametrization, numerical gradient)
# ---------------------------------------------------------------------------

@dataclass
class CosSrmProblem:
    """Shared-signal shaping state: f = [Re(c); Im(c)] stacks the M_c signals."""

    eff_channels: np.ndarray    # (K_c, N_r, N_t)
    f: np.ndarray               # (2 M_c N_t,) real
    basis_points: np.ndarray    # (2 M_c N_t, L, N_r) point response per f axis
    mc_count: int
    n_tx: int
    rate_bits: int
    pair_l: np.ndarray
    pair_lhat: np.ndarray

    @property
    def n_tuples(self) -> int:
        return self.eff_channels.shape[0] * self.mc_count

    def signals_of(self, f: np.ndarray) -> np.ndarray:
        half = f.size // 2
        c = f[:half] + 1j * f[half:]
        return c.reshape(self.mc_count, self.n_tx)


def build_cos_srm(channels: ChannelSet, patterns, signals,
                  rate_bits: int) -> CosSrmProblem:
    """Assemble the per-pattern effective channels and the real start point."""
    g = np.array([effective_channel(channels, p) for p in patterns])
    k_c = len(patterns)
    m_c = len(signals)
    n_t = channels.n_tx
    c0 = np.concatenate([np.asarray(s) for s in signals])
    f0 = np.concatenate([c0.real, c0.imag])
    L = k_c * m_c
    dim = 2 * m_c * n_t
    basis = np.zeros((dim, L, channels.n_rx), dtype=np.complex128)
    for d in range(dim):
        re_part = d < m_c * n_t
        idx = d if re_part else d - m_c * n_t
        i, t = divmod(idx, n_t)
        unit = 1.0 if re_part else 1.0j
        for k in range(k_c):
            basis[d, k * m_c + i] = g[k][:, t] * unit
    pair_l, pair_lhat = np.triu_indices(L, 1)
    return CosSrmProblem(eff_channels=g, f=f0, basis_points=basis, mc_count=m_c,
                         n_tx=n_t, rate_bits=rate_bits, pair_l=pair_l,
                         pair_lhat=pair_lhat)


def _srm_points(problem: CosSrmProblem, f: np.ndarray) -> np.ndarray:
    x = problem.signals_of(f)
    pts = np.einsum("krt,it->kir", problem.eff_channels, x)
    return pts.reshape(problem.n_tuples, -1)


def _srm_bound_of_points(points: np.ndarray, w: np.ndarray, sigma: float,
                         L: int, r: int, pair_l, pair_lhat) -> np.ndarray:
    """Bound for a batch of point sets (..., L, N_r)."""
    diff = points[..., pair_l, :] - points[..., pair_lhat, :]
    d2 = np.sum(np.abs(diff) ** 2, axis=-1)
    pep = q_function(np.sqrt(np.maximum(d2, 0.0) / (2.0 * sigma ** 2)))
    return np.sum(w * pep, axis=-1) * 2.0 / (L * r)


def cos_srm_objective(problem: CosSrmProblem, hamming: np.ndarray, sigma: float,
                      f: np.ndarray | None = None) -> float:
    w = _pair_weights(hamming, problem.pair_l, problem.pair_lhat)
    pts = _srm_points(problem, problem.f if f is None else f)
    return float(_srm_bound_of_points(pts, w, sigma, problem.n_tuples,
                                      problem.rate_bits, problem.pair_l,
                                      problem.pair_lhat))


def cos_srm_gradient(problem: CosSrmProblem, hamming: np.ndarray, sigma: float,
                     penalty: PenaltyConfig, f: np.ndarray | None = None) -> np.ndarray:
    """Forward-difference gradient (P(f + d e_i) - P(f)) / d, batched.

    The receive points are linear in f, so every perturbed point set is the
    base plus a precomputed basis response and the whole gradient costs one
    vectorized bound evaluation."""
    w = _pair_weights(hamming, problem.pair_l, problem.pair_lhat)
    fv = problem.f if f is None else f
    base = _srm_points(problem, fv)
    batch = np.concatenate([base[None], base[None] + penalty.fd_step
                            * problem.basis_points], axis=0)
    vals = _srm_bound_of_points(batch, w, sigma, problem.n_tuples,
                                problem.rate_bits, problem.pair_l, problem.pair_lhat)
    return (vals[1:] - vals[0]) / penalty.fd_step


def cos_srm_optimize(problem: CosSrmProblem, hamming: np.ndarray, sigma: float,
                     penalty: PenaltyConfig):
    """Projected descent of f on tr(f f^T) = M_c; returns the shared set."""
    radius = np.sqrt(problem.mc_count)

    def vg(f):
        val = cos_srm_objective(problem, hamming, sigma, f=f)
        grad = cos_srm_gradient(problem, hamming, sigma, penalty, f=f)
        return val, grad

    f0 = problem.f.copy()
    f, _, trace = _sphere_descent(f0, radius, vg, penalty.eps_signal_real, penalty,
                                  is_complex=False)
    b0 = cos_srm_objective(problem, hamming, sigma, f=f0 * (radius / np.linalg.norm(f0)))
    b1 = cos_srm_objective(problem, hamming, sigma, f=f)
    if b1 > b0:
        f = f0 * (radius / np.linalg.norm(f0))
        trace.kept_initial = True
    problem.f = f
    return list(problem.signals_of(f)), trace


# ---------------------------------------------------------------------------
# Alternating loop
# ---------------------------------------------------------------------------

def srm_shared_signals(codebook: Codebook) -> list[np.ndarray]:
    """Extract the shared signal set of a separate-mode codebook, by index."""
    out: dict[int, np.ndarray] = {}
    for l, i in enumerate(codebook.signal_idx):
        out.setdefault(i, codebook.signals[l])
    return [out[i] for i in sorted(out)]


def cjmsr(channels: ChannelSet, signal_cands, pattern_cands, config: SystemConfig,
          sigma: float, penalty: PenaltyConfig | None = None, scheme: str = "jrm",
          use_reflect: bool = True, use_shape: bool = True):
    """Alternating continuous refinement from a discrete starting design.

    Each stage's output is kept only if it lowers the true mapped bound, so
    the returned bound never exceeds the discrete design's.  Returns
    (codebook, info dict).
    """
    penalty = penalty or PenaltyConfig()
    if scheme == "jrm":
        cb = djmsr_jrm(channels, signal_cands, pattern_cands, config.tuple_count, sigma)
    elif scheme == "srm":
        cfg = config.with_default_split()
        cb = djmsr_srm(channels, signal_cands, pattern_cands, cfg.mc_count,
                       cfg.kc_count, sigma)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    ham = hamming_matrix(cb.labels(), cb.mapping.rate_bits)
    bound = union_bound(channels, cb, ham, sigma)
    info = {"initial_bound": bound, "rounds": [], "scheme": scheme,
            "stage_traces": []}
    eps_round = max(penalty.eps_reflect, penalty.eps_signal, penalty.eps_signal_real)
    for _ in range(penalty.max_rounds):
        prev = bound
        if use_reflect:
            prob = build_cor(channels, cb)
            patterns, tr = cor_optimize(prob, ham, sigma, penalty)
            cand = cb.with_patterns(patterns)
            b = union_bound(channels, cand, ham, sigma)
            if b <= bound:
                cb, bound = cand, b
            info["stage_traces"].append(("reflect", tr))
        if use_shape:
            if scheme == "jrm":
                prob = build_cos_jrm(channels, cb)
                signals, tr = cos_jrm_optimize(prob, ham, sigma, penalty)
                cand = cb.with_signals(signals)
            else:
                shared = srm_shared_signals(cb)
                prob = build_cos_srm(channels, cb.patterns, shared,
                                     cb.mapping.rate_bits)
                shared_new, tr = cos_srm_optimize(prob, ham, sigma, penalty)
                cand = build_srm_codebook(cb.patterns, shared_new,
                                          cb.mapping.split, mapping=cb.mapping)
            b = union_bound(channels, cand, ham, sigma)
            if b <= bound:
                cb, bound = cand, b
            info["stage_traces"].append(("shape", tr))
        info["rounds"].append(bound)
        if prev <= 0 or (prev - bound) / prev <= eps_round:
            break
    mapping = bsa_map(channels, cb, sigma)
    cand = cb.with_mapping(mapping)
    ham_new = hamming_matrix(cand.labels(), cand.mapping.rate_bits)
    b = union_bound(channels, cand, ham_new, sigma)
    if b <= bound:
        cb, bound = cand, b
    info["final_bound"] = bound
    return cb, info
