import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtms.dynamics import GateScenario
from mtms.lindblad import SimConfig, evolve
from mtms.tomography import (
    CountsRecord,
    ParityDataset,
    SpamMap,
    _parity_loglik,
    apply_spam,
    bell_fidelity_estimate,
    bell_fidelity_stderr,
    mle_parity_fit,
    mle_populations,
    parity_scan_probabilities,
    sample_counts,
    simulate_parity_dataset,
)

SPAM87 = SpamMap.from_combined_fidelity(0.87)
PHIS = np.linspace(0.0, math.pi, 12)


def triples():
    return st.lists(st.floats(0, 1), min_size=3, max_size=3).filter(lambda v: sum(v) > 1e-3).map(
        lambda v: np.array(v) / sum(v)
    )


def spam_maps():
    cols = st.lists(triples(), min_size=3, max_size=3)
    return cols.map(lambda c: SpamMap(np.column_stack(c)))


def parity_counts(amp, phase, spam, n, rng, phis=PHIS):
    q_oo, q_oe = spam.odd_reduction()
    p_odd = 0.5 * (1 - amp * np.cos(2 * phis + phase))
    p_obs = q_oo * p_odd + q_oe * (1 - p_odd)
    odd = rng.binomial(n, p_obs)
    return ParityDataset(phis, [CountsRecord(n - k, int(k), 0) for k in odd], spam)


class TestSpamMap:
    def test_default(self):
        m = SPAM87.matrix
        assert m[0, 0] == pytest.approx(0.87, abs=1e-12)
        assert np.allclose(m.sum(axis=0), 1, atol=1e-12)
        # symmetric under relabelling bright <-> dark
        assert np.allclose(m, m[::-1, ::-1])

    @pytest.mark.parametrize("bad", [np.eye(2), np.full((3, 3), 0.5), -np.eye(3)])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            SpamMap(bad)

    def test_json_roundtrip(self):
        back = SpamMap.from_json(SPAM87.to_json())
        assert np.array_equal(back.matrix, SPAM87.matrix)
        assert "rows=observed" in SPAM87.to_json()


class TestApplySpam:
    def test_identity(self):
        p = np.array([0.2, 0.5, 0.3])
        assert np.allclose(apply_spam(p, SpamMap.identity()), p, atol=0)

    def test_pure_column(self):
        assert np.allclose(apply_spam([1, 0, 0], SPAM87), SPAM87.matrix[:, 0], atol=1e-15)

    def test_doubly_stochastic_uniform(self):
        m = np.array([[0.5, 0.3, 0.2], [0.3, 0.4, 0.3], [0.2, 0.3, 0.5]])
        assert np.allclose(apply_spam(np.full(3, 1 / 3), SpamMap(m)), 1 / 3, atol=1e-15)

    @given(triples(), spam_maps())
    def test_simplex(self, p, spam):
        out = apply_spam(p, spam)
        assert np.all(out >= 0) and out.sum() == pytest.approx(1, abs=1e-12)

    def test_malformed(self):
        with pytest.raises(ValueError):
            apply_spam([0.5, 0.6, 0.0], SPAM87)
        with pytest.raises(ValueError):
            apply_spam([0.5, 0.5], SPAM87)


class TestSampling:
    def test_degenerate(self):
        assert sample_counts([1, 0, 0], 100, 1) == CountsRecord(100, 0, 0)

    def test_deterministic(self):
        assert sample_counts([0.3, 0.3, 0.4], 1000, 42) == sample_counts([0.3, 0.3, 0.4], 1000, 42)

    def test_frequencies(self):
        p = np.array([0.5, 0.3, 0.2])
        n = 10**6
        x = sample_counts(p, n, 5).as_array()
        assert np.all(np.abs(x / n - p) <= 3 * np.sqrt(p * (1 - p) / n))

    def test_counts_validation(self):
        with pytest.raises(ValueError):
            CountsRecord(0, 0, 0)
        with pytest.raises(ValueError):
            CountsRecord(-1, 2, 0)


class TestPopulations:
    def test_frequencies(self):
        fit = mle_populations(CountsRecord(50, 30, 20), SpamMap.identity())
        assert (fit.p1, fit.p2) == pytest.approx((0.3, 0.2), abs=1e-9)

    def test_corner(self):
        p1, p2, _ = mle_populations(CountsRecord(100, 0, 0), SpamMap.identity())
        assert (p1, p2) == pytest.approx((0, 0), abs=1e-9)

    @given(st.integers(0, 500), st.integers(0, 500), st.integers(0, 500))
    def test_identity_equals_frequencies(self, a, b, c):
        if a + b + c == 0:
            return
        fit = mle_populations(CountsRecord(a, b, c), SpamMap.identity())
        n = a + b + c
        assert (fit.p1, fit.p2) == pytest.approx((b / n, c / n), abs=1e-9)

    def test_boundary_beats_neighbours(self):
        # SPAM inversion of these counts leaves the simplex
        counts = CountsRecord(990, 10, 0)
        fit = mle_populations(counts, SPAM87)
        from mtms.tomography import _pop_loglik

        x, m = counts.as_array(), SPAM87.matrix
        rng = np.random.default_rng(0)
        for _ in range(200):
            q = rng.dirichlet([1, 1, 1])[1:] * rng.uniform(0, 0.05)
            assert _pop_loglik(q, x, m) <= fit.log_likelihood + 1e-9

    @settings(max_examples=20, deadline=None)
    @given(triples(), spam_maps(), st.integers(0, 2**31))
    def test_consistency(self, p, spam, seed):
        if np.linalg.cond(spam.matrix) > 50:
            return
        # at 1e6 shots the standard error of a cond ~50 map can reach ~0.02,
        # so the limit is checked further out
        counts = sample_counts(apply_spam(p, spam), 10**8, seed)
        fit = mle_populations(counts, spam)
        assert np.max(np.abs(np.array([fit.p0, fit.p1, fit.p2]) - p)) <= 1e-2

    def test_consistency_default_map(self):
        p = np.array([0.2, 0.3, 0.5])
        fit = mle_populations(sample_counts(apply_spam(p, SPAM87), 10**6, 4), SPAM87)
        assert np.max(np.abs(np.array([fit.p0, fit.p1, fit.p2]) - p)) <= 1e-2

    def test_coverage(self):
        p = np.array([0.45, 0.1, 0.45])
        hits = 0
        for seed in range(100):
            fit = mle_populations(sample_counts(apply_spam(p, SPAM87), 10**4, seed), SPAM87)
            hits += abs(fit.pop_even - 0.9) <= 3 * fit.pop_even_stderr
        assert hits >= 95


class TestParityFit:
    def test_exact_counts(self):
        phis = np.array([0, 1 / 6, 1 / 4, 1 / 3, 1 / 2, 2 / 3, 3 / 4, 5 / 6, 1]) * math.pi
        n = 1200
        odd = np.rint(n * 0.5 * (1 - np.cos(2 * phis))).astype(int)
        ds = ParityDataset(phis, [CountsRecord(n - k, int(k), 0) for k in odd])
        fit = mle_parity_fit(ds)
        assert fit.amplitude == pytest.approx(1, abs=1e-6)
        assert fit.phase == pytest.approx(0, abs=1e-6)

    def test_coverage(self):
        rng = np.random.default_rng(11)
        hits = 0
        for _ in range(100):
            ds = parity_counts(0.9, math.pi / 4, SPAM87, 500, rng)
            fit = mle_parity_fit(ds)
            hits += abs(fit.amplitude - 0.9) <= 3 * fit.amplitude_stderr
        assert hits >= 95

    def test_optimum_beats_truth(self):
        rng = np.random.default_rng(3)
        q_oo, q_oe = SPAM87.odd_reduction()
        for _ in range(30):
            amp, phase = rng.uniform(0, 1), rng.uniform(-math.pi, math.pi)
            ds = parity_counts(amp, phase, SPAM87, 200, rng)
            fit = mle_parity_fit(ds)
            odd = np.array([c.odd for c in ds.counts], float)
            n = np.array([c.n for c in ds.counts], float)
            truth = _parity_loglik([amp * math.cos(phase), -amp * math.sin(phase)], ds.phis, odd, n, q_oo, q_oe)
            assert fit.log_likelihood >= truth - 1e-9

    def test_null(self):
        rng = np.random.default_rng(8)
        fit = mle_parity_fit(parity_counts(0.0, 0.0, SPAM87, 500, rng))
        assert fit.amplitude <= 3 * fit.amplitude_stderr

    def test_too_few_phases(self):
        ds = ParityDataset([0, 1, 2], [CountsRecord(1, 1, 1)] * 3)
        with pytest.raises(ValueError, match="4 distinct"):
            mle_parity_fit(ds)

    def test_narrow_span(self):
        ds = ParityDataset([0, 0.5, 1, 1.5], [CountsRecord(1, 1, 1)] * 4)
        with pytest.raises(ValueError, match="span"):
            mle_parity_fit(ds)

    def test_csv_roundtrip(self, tmp_path):
        ds = parity_counts(0.5, 0.2, SPAM87, 100, np.random.default_rng(1))
        ds.to_csv(tmp_path / "p.csv")
        back = ParityDataset.from_csv(tmp_path / "p.csv", SPAM87)
        assert np.array_equal(back.phis, ds.phis) and back.counts == ds.counts


class TestBellFidelity:
    def test_examples(self):
        assert bell_fidelity_estimate(1, 1, 0) == 1
        assert bell_fidelity_estimate(1, 1, math.pi / 2) == pytest.approx(0.5, abs=1e-15)
        assert bell_fidelity_estimate(0.96, 0.92, 0) == pytest.approx(0.94, abs=1e-15)

    def test_matches_density_matrix(self):
        rho = np.diag([0.48, 0.02, 0.02, 0.48]).astype(complex)
        rho[3, 0] = 0.46j
        rho[0, 3] = -0.46j
        bell = np.array([1, 0, 0, 1j]) / math.sqrt(2)
        direct = np.real(bell.conj() @ rho @ bell)
        assert direct == pytest.approx(bell_fidelity_estimate(0.96, 0.92), abs=1e-14)

    @pytest.mark.parametrize("args", [(1.1, 0.5), (-0.1, 0.0), (0.5, 1.2)])
    def test_domain(self, args):
        with pytest.raises(ValueError):
            bell_fidelity_estimate(*args)

    def test_stderr(self):
        assert bell_fidelity_stderr(0.02, 0.0) == pytest.approx(0.01)


class TestSynthetic:
    def test_bell_parity_curve(self):
        bell = np.array([1, 0, 0, 1j]) / math.sqrt(2)
        probs = parity_scan_probabilities(np.outer(bell, bell.conj()), PHIS)
        parity = probs[:, 0] + probs[:, 2] - probs[:, 1]
        assert np.allclose(parity, np.cos(2 * PHIS + math.pi / 2), atol=1e-12)

    def test_pipeline_closure(self, tone_sets):
        # ideal gate -> SPAM -> shots -> MLE -> fidelity consistent with 1
        state, _ = evolve(SimConfig(GateScenario(tone_sets[2]), fock_truncation=12))
        rho = state.spin_state()
        rng = np.random.default_rng(99)
        ds = simulate_parity_dataset(rho, PHIS, 500, SPAM87, rng)
        fit = mle_parity_fit(ds)
        p_true = np.clip(np.real([rho[0, 0], rho[1, 1] + rho[2, 2], rho[3, 3]]), 0, None)
        p_true /= p_true.sum()
        pops = mle_populations(sample_counts(apply_spam(p_true, SPAM87), 10**4, rng), SPAM87)
        dphi = fit.phase - math.pi / 2
        est = bell_fidelity_estimate(min(pops.pop_even, 1.0), fit.amplitude, dphi)
        err = bell_fidelity_stderr(pops.pop_even_stderr, fit.amplitude_stderr, dphi)
        assert abs(est - 1) <= 3 * err
