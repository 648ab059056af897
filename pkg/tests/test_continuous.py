"""Projected-gradient stages: stacked problem construction, gradients,
descent traces and the alternating loop."""

import numpy as np
import pytest

from rismod import SystemConfig, hamming_matrix, random_candidates, random_channels, \
    union_bound
from rismod.ber import all_ones_hamming
from rismod.continuous import PenaltyConfig, build_cor, build_cos_jrm, build_cos_srm, \
    cjmsr, cor_gradient, cor_objective, cor_optimize, cos_jrm_optimize, \
    cos_srm_objective, cos_srm_optimize, srm_shared_signals, _barrier, _cor_eval, \
    _pair_weights
from rismod.discrete import build_jrm_codebook, djmsr_jrm
from rismod.model import noise_free_points

SIGMA = 10 ** (-5 / 20)


def small_instance(seed, dims=(2, 3, 4, 3), m=5, k=3):
    cfg = SystemConfig(*dims, signal_cand_count=m, pattern_cand_count=k)
    ch = random_channels(cfg, seed)
    sigs, pats = random_candidates(cfg, seed + 50_000)
    return cfg, ch, sigs, pats


def quick_penalty(**kw):
    return PenaltyConfig(max_inner_iters=kw.pop("iters", 120), **kw)


class TestBuildCor:
    def test_zero_direct_kills_cross_terms(self):
        cfg, ch, sigs, pats = small_instance(1)
        from rismod.model import ChannelSet
        ch0 = ChannelSet(h_direct=np.zeros_like(ch.h_direct), h_tx_ris=ch.h_tx_ris,
                         h_ris_rx=ch.h_ris_rx, noise_std=1.0)
        cb = djmsr_jrm(ch0, sigs, pats, cfg.tuple_count, SIGMA)
        prob = build_cor(ch0, cb)
        assert np.all(prob.cross == 0)
        assert np.all(prob.direct == 0)

    def test_quadratic_form_matches_direct_distance(self):
        cfg, ch, sigs, pats = small_instance(2, dims=(1, 2, 3, 1), m=2, k=1)
        cb = build_jrm_codebook(ch, pats, sigs, [(0, 0), (0, 1)])
        prob = build_cor(ch, cb)
        rng = np.random.default_rng(3)
        for _ in range(20):
            q = np.exp(2j * np.pi * rng.random(prob.q.size))
            from rismod.continuous import _cor_distances
            d2 = _cor_distances(prob, q)
            pts = noise_free_points(ch, cb.with_patterns(
                [q[k * 3:(k + 1) * 3] for k in range(1)]))
            direct = np.sum(np.abs(pts[0] - pts[1]) ** 2)
            assert abs(d2[0] - direct) / direct < 1e-10

    def test_pair_matrices_psd(self):
        cfg, ch, sigs, pats = small_instance(4)
        cb = djmsr_jrm(ch, sigs, pats, cfg.tuple_count, SIGMA)
        prob = build_cor(ch, cb)
        for p in range(prob.quad.shape[0]):
            w = np.linalg.eigvalsh(prob.quad[p])
            assert w.min() >= -1e-10

    def test_empty_codebook_rejected(self):
        cfg, ch, sigs, pats = small_instance(5)
        cb = djmsr_jrm(ch, sigs, pats, cfg.tuple_count, SIGMA)
        object.__setattr__(cb, "patterns", ())
        with pytest.raises(ValueError, match="patterns"):
            build_cor(ch, cb)


class TestCorGradient:
    def test_infeasible_point_rejected(self):
        cfg, ch, sigs, pats = small_instance(6)
        cb = djmsr_jrm(ch, sigs, pats, cfg.tuple_count, SIGMA)
        prob = build_cor(ch, cb)
        prob.q = 3.0 * prob.q  # inflate the normalized p-norm past 1 + slack
        with pytest.raises(ValueError, match="infeasible"):
            cor_gradient(prob, all_ones_hamming(cb.n_tuples), SIGMA, PenaltyConfig())

    def test_coincident_pair_stays_finite(self):
        cfg, ch, sigs, pats = small_instance(7, dims=(1, 2, 3, 1), m=2, k=1)
        cb = build_jrm_codebook(ch, pats, sigs, [(0, 0), (0, 0)])
        prob = build_cor(ch, cb)
        g = cor_gradient(prob, all_ones_hamming(2), SIGMA, PenaltyConfig())
        assert np.all(np.isfinite(g))

    def test_ber_part_vanishes_at_large_sigma(self):
        cfg, ch, sigs, pats = small_instance(8)
        cb = djmsr_jrm(ch, sigs, pats, cfg.tuple_count, SIGMA)
        prob = build_cor(ch, cb)
        pen = PenaltyConfig()
        ham = hamming_matrix(cb.labels(), 3)
        g = cor_gradient(prob, ham, 1e8, pen)
        barrier_grad = _barrier(prob.q, pen)[1]
        resid = np.linalg.norm(g - barrier_grad)
        assert resid < 1e-5 * np.linalg.norm(barrier_grad)


class TestCorOptimize:
    def test_trace_non_increasing_and_unit_modulus(self):
        cfg, ch, sigs, pats = small_instance(9)
        cb = djmsr_jrm(ch, sigs, pats, cfg.tuple_count, SIGMA)
        prob = build_cor(ch, cb)
        ham = hamming_matrix(cb.labels(), 3)
        patterns, trace = cor_optimize(prob, ham, SIGMA, quick_penalty())
        seq = np.asarray(trace.objectives)
        assert np.all(np.diff(seq) <= 1e-12)
        for p in patterns:
            assert np.max(np.abs(np.abs(p) - 1.0)) <= 1e-12

    def test_sphere_radius_maintained(self):
        cfg, ch, sigs, pats = small_instance(10)
        cb = djmsr_jrm(ch, sigs, pats, cfg.tuple_count, SIGMA)
        prob = build_cor(ch, cb)
        ham = hamming_matrix(cb.labels(), 3)
        cor_optimize(prob, ham, SIGMA, quick_penalty())
        n = prob.q.size
        assert abs(np.sum(np.abs(prob.q) ** 2) - n) < 1e-9 * n

    def test_improves_bound_on_most_seeds(self):
        # after-projection bound never worse (up to float-path noise in the
        # recomputation), strictly better on >= 95/100
        strict = 0
        for seed in range(100):
            cfg, ch, sigs, pats = small_instance(seed + 200)
            cb = djmsr_jrm(ch, sigs, pats, cfg.tuple_count, SIGMA)
            ham = hamming_matrix(cb.labels(), 3)
            b0 = union_bound(ch, cb, ham, SIGMA)
            prob = build_cor(ch, cb)
            patterns, _ = cor_optimize(prob, ham, SIGMA, quick_penalty())
            b1 = union_bound(ch, cb.with_patterns(patterns), ham, SIGMA)
            assert b1 <= b0 * (1 + 1e-9)
            if b1 < b0:
                strict += 1
        assert strict >= 95


class TestCosJrm:
    def test_selectors_disjoint(self):
        cfg, ch, sigs, pats = small_instance(11)
        cb = djmsr_jrm(ch, sigs, pats, cfg.tuple_count, SIGMA)
        prob = build_cos_jrm(ch, cb)
        for l in range(cb.n_tuples):
            for lh in range(l + 1, cb.n_tuples):
                assert np.all(prob.selector(l) * prob.selector(lh) == 0)

    def test_duplicate_tuples_zero_quadratic_form(self):
        cfg, ch, sigs, pats = small_instance(12, dims=(1, 2, 3, 1), m=2, k=1)
        cb = build_jrm_codebook(ch, pats, sigs, [(0, 0), (0, 0)])
        prob = build_cos_jrm(ch, cb)
        d2 = np.einsum("pij,i,j->p", prob.quad, prob.z.conj(), prob.z).real
        assert abs(d2[0]) < 1e-12

    def test_optimize_monotone_and_power_preserving(self):
        cfg, ch, sigs, pats = small_instance(13)
        cb = djmsr_jrm(ch, sigs, pats, cfg.tuple_count, SIGMA)
        ham = hamming_matrix(cb.labels(), 3)
        prob = build_cos_jrm(ch, cb)
        signals, trace = cos_jrm_optimize(prob, ham, SIGMA, quick_penalty())
        seq = np.asarray(trace.objectives)
        assert np.all(np.diff(seq) <= 1e-12)
        mean_power = np.mean([np.sum(np.abs(s) ** 2) for s in signals])
        assert abs(mean_power - 1.0) <= 1e-9

    def test_improves_bound_on_most_seeds(self):
        strict = 0
        for seed in range(100):
            cfg, ch, sigs, pats = small_instance(seed + 400)
            cb = djmsr_jrm(ch, sigs, pats, cfg.tuple_count, SIGMA)
            ham = hamming_matrix(cb.labels(), 3)
            b0 = union_bound(ch, cb, ham, SIGMA)
            prob = build_cos_jrm(ch, cb)
            signals, _ = cos_jrm_optimize(prob, ham, SIGMA, quick_penalty())
            b1 = union_bound(ch, cb.with_signals(signals), ham, SIGMA)
            assert b1 <= b0 * (1 + 1e-12)
            if b1 < b0:
                strict += 1
        assert strict >= 95


class TestCosSrm:
    def _problem(self, seed):
        cfg = SystemConfig(2, 3, 4, 3, signal_cand_count=5, pattern_cand_count=3,
                           srm_split=(2, 1))
        ch = random_channels(cfg, seed)
        sigs, pats = random_candidates(cfg, seed + 60_000)
        from rismod.discrete import djmsr_srm
        cb = djmsr_srm(ch, sigs, pats, 4, 2, SIGMA)
        shared = srm_shared_signals(cb)
        prob = build_cos_srm(ch, cb.patterns, shared, cb.mapping.rate_bits)
        ham = hamming_matrix(cb.labels(), 3)
        return ch, cb, prob, ham

    def test_real_complex_round_trip(self):
        ch, cb, prob, ham = self._problem(14)
        x = prob.signals_of(prob.f)
        f2 = np.concatenate([np.concatenate([s.real for s in x]),
                             np.concatenate([s.imag for s in x])])
        assert np.array_equal(prob.f, f2)

    def test_optimize_monotone_and_sphere(self):
        ch, cb, prob, ham = self._problem(15)
        shared, trace = cos_srm_optimize(prob, ham, SIGMA, quick_penalty())
        seq = np.asarray(trace.objectives)
        assert np.all(np.diff(seq) <= 1e-12)
        assert abs(np.sum(prob.f ** 2) - 4) < 1e-9 * 4
        assert len(shared) == 4

    def test_tangency_along_run(self):
        ch, cb, prob, ham = self._problem(16)
        pen = quick_penalty()
        from rismod.continuous import cos_srm_gradient
        f = prob.f
        g = cos_srm_gradient(prob, ham, SIGMA, pen)
        delta = -(g - f * (float(f @ g) / float(f @ f)))
        assert abs(float(f @ delta)) <= 1e-10 * np.linalg.norm(f) * np.linalg.norm(delta)

    def test_objective_matches_codebook_bound(self):
        ch, cb, prob, ham = self._problem(17)
        val = cos_srm_objective(prob, ham, SIGMA)
        assert abs(val - union_bound(ch, cb, ham, SIGMA)) < 1e-12


class TestCjmsr:
    def test_round_never_increases(self):
        for seed in (20, 21, 22):
            cfg, ch, sigs, pats = small_instance(seed)
            cb, info = cjmsr(ch, sigs, pats, cfg, SIGMA,
                             quick_penalty(max_rounds=3), scheme="jrm")
            rounds = [info["initial_bound"]] + info["rounds"] + [info["final_bound"]]
            assert np.all(np.diff(rounds) <= 1e-15)

    def test_beats_discrete_start_jrm(self):
        for seed in range(15):
            cfg, ch, sigs, pats = small_instance(seed + 600)
            cb0 = djmsr_jrm(ch, sigs, pats, cfg.tuple_count, SIGMA)
            b0 = union_bound(ch, cb0, hamming_matrix(cb0.labels(), 3), SIGMA)
            cb1, info = cjmsr(ch, sigs, pats, cfg, SIGMA,
                              quick_penalty(max_rounds=4), scheme="jrm")
            assert info["final_bound"] <= b0 * (1 + 1e-12)
            cb1.validate(cfg)

    def test_srm_variant_improves_and_stays_shared(self):
        gains = []
        for seed in range(10):
            cfg, ch, sigs, pats = small_instance(seed + 800)
            cfg = SystemConfig(2, 3, 4, 3, signal_cand_count=5, pattern_cand_count=3,
                               srm_split=(2, 1))
            from rismod.discrete import djmsr_srm
            cb0 = djmsr_srm(ch, sigs, pats, 4, 2, SIGMA)
            b0 = union_bound(ch, cb0, hamming_matrix(cb0.labels(), 3), SIGMA)
            cb1, info = cjmsr(ch, sigs, pats, cfg, SIGMA,
                              quick_penalty(max_rounds=4), scheme="srm")
            cb1.validate()
            assert info["final_bound"] <= b0 * (1 + 1e-12)
            gains.append(b0 / max(info["final_bound"], 1e-300))
        assert np.median(gains) > 1.0

    def test_reflect_only_and_shape_only(self):
        cfg, ch, sigs, pats = small_instance(24)
        cb0 = djmsr_jrm(ch, sigs, pats, cfg.tuple_count, SIGMA)
        b0 = union_bound(ch, cb0, hamming_matrix(cb0.labels(), 3), SIGMA)
        for kw in ({"use_shape": False}, {"use_reflect": False}):
            cb, info = cjmsr(ch, sigs, pats, cfg, SIGMA,
                             quick_penalty(max_rounds=2), scheme="jrm", **kw)
            assert info["final_bound"] <= b0 * (1 + 1e-12)


def test_penalty_config_validation():
    with pytest.raises(ValueError, match="norm_order"):
        PenaltyConfig(norm_order=3)
    with pytest.raises(ValueError, match="wolfe"):
        PenaltyConfig(wolfe_c1=0.5, wolfe_c2=0.1)
    with pytest.raises(ValueError, match="positive"):
        PenaltyConfig(fd_step=0.0)


def test_barrier_positive_at_unit_modulus_start():
    rng = np.random.default_rng(30)
    q = np.exp(2j * np.pi * rng.random(12))
    val, grad, u = _barrier(q, PenaltyConfig())
    assert np.isfinite(val) and u > 0
    assert grad is not None
