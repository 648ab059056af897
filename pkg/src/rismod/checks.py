"""Named invariant checks behind the `check` subcommand.

Every check is a pure function returning a CheckResult with the measured
quantity and its tolerance, so failures are diagnosable from the report
alone.  The gradient checks accept the gradient callable as a parameter,
which lets tests inject a broken gradient and confirm the check trips.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import continuous as co
from .ber import all_ones_hamming, hamming_matrix, union_bound
from .discrete import build_jrm_codebook, djmsr_jrm, exhaustive_jrm, exhaustive_srm
from .model import SystemConfig, random_candidates, random_channels
from .simulate import SimPlan, estimate_ber

__all__ = ["CheckResult", "run_checks"] + [
    n for n in (
        "check_reflect_gradient", "check_shape_gradient", "check_shape_real_gradient",
        "check_reflect_reformulation", "check_shape_reformulation",
        "check_projection_orthogonality", "check_unit_modulus", "check_power",
        "check_monotonicity", "check_mc_vs_bound", "check_es_superset")]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"[{tag}] {self.name}: measured={self.measured:.3e} tol={self.tolerance:.1e}{extra}"


def _small_setup(seed: int, dims=(2, 2, 3, 2), m: int = 4, k: int = 2):
    cfg = SystemConfig(*dims, signal_cand_count=m, pattern_cand_count=k)
    channels = random_channels(cfg, seed)
    signals, patterns = random_candidates(cfg, seed + 1)
    pairs = [(kk, ii) for kk in range(k) for ii in range(m)][:cfg.tuple_count]
    cb = build_jrm_codebook(channels, patterns, signals, pairs)
    return cfg, channels, cb


def _fd_real(fun, x: np.ndarray, step: float) -> np.ndarray:
    """Central differences over the real parametrization of a complex vector."""
    out = np.zeros(2 * x.size)
    for i in range(x.size):
        for part, unit in ((0, 1.0), (1, 1.0j)):
            e = np.zeros_like(x)
            e[i] = unit
            out[part * x.size + i] = (fun(x + step * e) - fun(x - step * e)) / (2 * step)
    return out


def check_reflect_gradient(seed: int = 7, gradient_fn=None, n_points: int = 20,
                           tol: float = 1e-5) -> CheckResult:
    """Analytic reflecting gradient vs central differences, real parametrization."""
    gradient_fn = gradient_fn or co.cor_gradient
    _, channels, cb = _small_setup(seed)
    penalty = co.PenaltyConfig()
    ham = hamming_matrix(cb.labels(), cb.mapping.rate_bits)
    prob = co.build_cor(channels, cb)
    sigma = 0.3
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_points):
        q = np.exp(2j * np.pi * rng.random(prob.q.size))
        prob.q = q
        grad = gradient_fn(prob, ham, sigma, penalty)
        g_ana = np.concatenate([2 * grad.real, 2 * grad.imag])

        def obj(qv):
            prob.q = qv
            return co.cor_objective(prob, ham, sigma, penalty)

        g_fd = _fd_real(obj, q, 1e-6)
        worst = max(worst, np.linalg.norm(g_ana - g_fd) / np.linalg.norm(g_fd))
    return CheckResult("reflect_gradient_vs_fd", worst <= tol, worst, tol)


def check_shape_gradient(seed: int = 11, gradient_fn=None, n_points: int = 20,
                         tol: float = 1e-5) -> CheckResult:
    """Analytic shaping gradient vs central differences, real parametrization."""
    gradient_fn = gradient_fn or co.cos_jrm_gradient
    _, channels, cb = _small_setup(seed)
    ham = hamming_matrix(cb.labels(), cb.mapping.rate_bits)
    prob = co.build_cos_jrm(channels, cb)
    sigma = 0.3
    rng = np.random.default_rng(seed)
    radius = np.sqrt(prob.n_tuples)
    worst = 0.0
    for _ in range(n_points):
        z = rng.standard_normal(prob.z.size) + 1j * rng.standard_normal(prob.z.size)
        z *= radius / np.linalg.norm(z)
        prob.z = z
        grad = gradient_fn(prob, ham, sigma)
        g_ana = np.concatenate([2 * grad.real, 2 * grad.imag])

        def obj(zv):
            prob.z = zv
            return co.cos_jrm_objective(prob, ham, sigma)

        g_fd = _fd_real(obj, z, 1e-6)
        worst = max(worst, np.linalg.norm(g_ana - g_fd) / np.linalg.norm(g_fd))
    return CheckResult("shape_gradient_vs_fd", worst <= tol, worst, tol)


def check_shape_real_gradient(seed: int = 13, n_points: int = 10,
                              tol: float = 1e-3) -> CheckResult:
    """Forward-difference shared-set gradient vs a central-difference oracle."""
    cfg = SystemConfig(2, 2, 3, 2, signal_cand_count=4, pattern_cand_count=2,
                       srm_split=(1, 1))
    channels = random_channels(cfg, seed)
    signals, patterns = random_candidates(cfg, seed + 1)
    prob = co.build_cos_srm(channels, patterns[:cfg.kc_count],
                            signals[:cfg.mc_count], cfg.rate_bits)
    penalty = co.PenaltyConfig()
    ham = all_ones_hamming(prob.n_tuples)
    sigma = 0.3
    rng = np.random.default_rng(seed)
    radius = np.sqrt(cfg.mc_count)
    worst = 0.0
    for _ in range(n_points):
        f = rng.standard_normal(prob.f.size)
        f *= radius / np.linalg.norm(f)
        g_fwd = co.cos_srm_gradient(prob, ham, sigma, penalty, f=f)
        g_cen = np.zeros_like(f)
        for i in range(f.size):
            e = np.zeros_like(f)
            e[i] = 1.0
            g_cen[i] = (co.cos_srm_objective(prob, ham, sigma, f=f + 1e-6 * e)
                        - co.cos_srm_objective(prob, ham, sigma, f=f - 1e-6 * e)) / 2e-6
        worst = max(worst, np.linalg.norm(g_fwd - g_cen) / np.linalg.norm(g_cen))
    return CheckResult("shape_real_gradient_vs_central_fd", worst <= tol, worst, tol)


def check_reflect_reformulation(seed: int = 17, n_cases: int = 200,
                                tol: float = 1e-10) -> CheckResult:
    """q^H C q + 2 Re(q^T a) + direct == direct pairwise computation."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for case in range(n_cases):
        _, channels, cb = _small_setup(seed + 1000 + case)
        prob = co.build_cor(channels, cb)
        q = np.exp(2j * np.pi * rng.random(prob.q.size))
        d2_quad = co._cor_distances(prob, q)
        n = prob.n_ris
        patterns = [q[k * n:(k + 1) * n] for k in range(prob.k_tilde)]
        from .model import noise_free_points
        cb_q = cb.with_patterns(patterns)
        pts = noise_free_points(channels, cb_q)
        diff = pts[prob.pair_l] - pts[prob.pair_lhat]
        d2_direct = np.sum(np.abs(diff) ** 2, axis=1)
        rel = np.max(np.abs(d2_quad - d2_direct) / np.maximum(d2_direct, 1e-30))
        worst = max(worst, float(rel))
    return CheckResult("reflect_reformulation_identity", worst <= tol, worst, tol,
                       detail=f"{n_cases} cases")


def check_shape_reformulation(seed: int = 19, n_cases: int = 200,
                              tol: float = 1e-10) -> CheckResult:
    """z^H Z z == direct pairwise computation."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for case in range(n_cases):
        _, channels, cb = _small_setup(seed + 2000 + case)
        prob = co.build_cos_jrm(channels, cb)
        z = rng.standard_normal(prob.z.size) + 1j * rng.standard_normal(prob.z.size)
        d2_quad = np.einsum("pij,i,j->p", prob.quad, z.conj(), z).real
        signals = [z[l * prob.n_tx:(l + 1) * prob.n_tx] for l in range(prob.n_tuples)]
        from .model import noise_free_points
        cb_z = cb.with_signals(signals)
        pts = noise_free_points(channels, cb_z)
        diff = pts[prob.pair_l] - pts[prob.pair_lhat]
        d2_direct = np.sum(np.abs(diff) ** 2, axis=1)
        rel = np.max(np.abs(d2_quad - d2_direct) / np.maximum(d2_direct, 1e-30))
        worst = max(worst, float(rel))
    return CheckResult("shape_reformulation_identity", worst <= tol, worst, tol,
                       detail=f"{n_cases} cases")


def check_projection_orthogonality(seed: int = 23, tol: float = 1e-10) -> CheckResult:
    """Projected directions are tangent: q^H dq, z^H dz and f^T df vanish."""
    _, channels, cb = _small_setup(seed)
    penalty = co.PenaltyConfig()
    ham = hamming_matrix(cb.labels(), cb.mapping.rate_bits)
    sigma = 0.3
    worst = 0.0
    prob_q = co.build_cor(channels, cb)
    g = co.cor_gradient(prob_q, ham, sigma, penalty)
    q = prob_q.q
    dq = -(g - q * (np.vdot(q, g) / (np.linalg.norm(q) ** 2)))
    worst = max(worst, abs(np.vdot(q, dq)) / (np.linalg.norm(q) * np.linalg.norm(dq)))
    prob_z = co.build_cos_jrm(channels, cb)
    gz = co.cos_jrm_gradient(prob_z, ham, sigma)
    z = prob_z.z
    dz = -(gz - z * (np.vdot(z, gz) / (np.linalg.norm(z) ** 2)))
    worst = max(worst, abs(np.vdot(z, dz)) / (np.linalg.norm(z) * np.linalg.norm(dz)))
    cfg = SystemConfig(2, 2, 3, 2, signal_cand_count=4, pattern_cand_count=2,
                       srm_split=(1, 1))
    channels2 = random_channels(cfg, seed + 1)
    signals, patterns = random_candidates(cfg, seed + 2)
    prob_f = co.build_cos_srm(channels2, patterns[:2], signals[:2], cfg.rate_bits)
    gf = co.cos_srm_gradient(prob_f, all_ones_hamming(prob_f.n_tuples), sigma, penalty)
    f = prob_f.f
    df = -(gf - f * (float(f @ gf) / (np.linalg.norm(f) ** 2)))
    worst = max(worst, abs(float(f @ df)) / (np.linalg.norm(f) * np.linalg.norm(df)))
    return CheckResult("projection_orthogonality", worst <= tol, float(worst), tol)


def _optimized_instance(seed: int):
    _, channels, cb = _small_setup(seed)
    penalty = co.PenaltyConfig(max_inner_iters=80)
    ham = hamming_matrix(cb.labels(), cb.mapping.rate_bits)
    sigma = 0.3
    prob = co.build_cor(channels, cb)
    patterns, trace_q = co.cor_optimize(prob, ham, sigma, penalty)
    prob_z = co.build_cos_jrm(channels, cb.with_patterns(patterns))
    signals, trace_z = co.cos_jrm_optimize(prob_z, ham, sigma, penalty)
    return channels, cb, patterns, signals, trace_q, trace_z


def check_unit_modulus(seed: int = 29, tol: float = 1e-12) -> CheckResult:
    """Reflecting-stage outputs are unit modulus after the phase projection."""
    _, _, patterns, _, _, _ = _optimized_instance(seed)
    worst = max(float(np.max(np.abs(np.abs(p) - 1.0))) for p in patterns)
    return CheckResult("unit_modulus_outputs", worst <= tol, worst, tol)


def check_power(seed: int = 31, tol: float = 1e-9) -> CheckResult:
    """Every designer output keeps mean transmit power 1."""
    cfg = SystemConfig(2, 2, 3, 2, signal_cand_count=4, pattern_cand_count=2)
    channels = random_channels(cfg, seed)
    signals, patterns = random_candidates(cfg, seed + 1)
    worst = 0.0
    cb = djmsr_jrm(channels, signals, patterns, cfg.tuple_count, 0.3)
    worst = max(worst, abs(cb.mean_power() - 1.0))
    cb2, _ = co.cjmsr(channels, signals, patterns, cfg, 0.3,
                      co.PenaltyConfig(max_inner_iters=60, max_rounds=2))
    worst = max(worst, abs(cb2.mean_power() - 1.0))
    return CheckResult("power_normalization", worst <= tol, float(worst), tol)


def check_monotonicity(seed: int = 37, tol: float = 1e-12) -> CheckResult:
    """Accepted-iterate objective sequences never increase."""
    _, _, _, _, trace_q, trace_z = _optimized_instance(seed)
    worst = 0.0
    for tr in (trace_q, trace_z):
        seq = np.asarray(tr.objectives)
        if seq.size > 1:
            worst = max(worst, float(np.max(np.diff(seq))))
    return CheckResult("objective_monotonicity", worst <= tol, worst, tol,
                       detail="max increase across recorded sequences")


def check_mc_vs_bound(seed: int = 41, n_sigma: float = 3.0) -> CheckResult:
    """Monte Carlo BER stays below the union bound plus 3 standard errors."""
    cfg = SystemConfig(1, 2, 3, 2, signal_cand_count=4, pattern_cand_count=2)
    channels = random_channels(cfg, seed)
    signals, patterns = random_candidates(cfg, seed + 1)
    cb = djmsr_jrm(channels, signals, patterns, cfg.tuple_count, 0.3)
    ham = hamming_matrix(cb.labels(), cb.mapping.rate_bits)
    plan = SimPlan(snr_grid_db=(0.0, 6.0, 12.0), min_bit_errors=400,
                   max_frames=400_000)
    worst = -np.inf
    for snr_db in plan.snr_grid_db:
        sigma = 10 ** (-snr_db / 20)
        ber, errs, frames = estimate_ber(channels.with_noise_std(sigma), cb, sigma,
                                         plan, seed + 100)
        bound = union_bound(channels, cb, ham, sigma)
        se = np.sqrt(max(ber * (1 - ber), 1e-12) / (frames * cfg.rate_bits))
        worst = max(worst, ber - bound - n_sigma * se)
    return CheckResult("mc_ber_below_union_bound", worst <= 0.0, float(worst), 0.0,
                       detail="max of ber - bound - 3*SE")


def check_es_superset(seed: int = 43) -> CheckResult:
    """Joint exhaustive search never loses to separate exhaustive search."""
    cfg = SystemConfig(1, 2, 3, 2, signal_cand_count=3, pattern_cand_count=3,
                       srm_split=(1, 1))
    channels = random_channels(cfg, seed)
    signals, patterns = random_candidates(cfg, seed + 1)
    sigma = 0.4
    cb_j = exhaustive_jrm(channels, signals, patterns, cfg.tuple_count, sigma)
    cb_s = exhaustive_srm(channels, signals, patterns, cfg.mc_count, cfg.kc_count, sigma)
    L = cfg.tuple_count
    b_j = union_bound(channels, cb_j, all_ones_hamming(L), sigma)
    b_s = union_bound(channels, cb_s, all_ones_hamming(L), sigma)
    gap = b_j - b_s
    return CheckResult("es_joint_below_es_separate", gap <= 1e-12, float(gap), 1e-12)


_ALL_CHECKS = (
    check_reflect_gradient,
    check_shape_gradient,
    check_shape_real_gradient,
    check_reflect_reformulation,
    check_shape_reformulation,
    check_projection_orthogonality,
    check_unit_modulus,
    check_power,
    check_monotonicity,
    check_mc_vs_bound,
    check_es_superset,
)


def run_checks(seed: int = 0) -> list[CheckResult]:
    """Run every named invariant check; seed offsets the built-in case seeds."""
    results = []
    for fn in _ALL_CHECKS:
        results.append(fn(**({"seed": fn.__defaults__[0] + seed}
                             if seed else {})))
    return results
