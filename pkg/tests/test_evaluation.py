"""Fit diagnostics on hand-constructed models where every metric has a known
value or a tight statistical band."""
import math

import numpy as np
import pytest

from srfe_lab.evaluation import EvalConfig, ess, entropy_error, evaluate, \
    mode_coverage
from srfe_lab.evaluation import test_log_lik as held_out_log_lik
from srfe_lab.gaussians import DiagonalGaussian, GaussianMixture

MEANS = np.array([[-3.0, 0.0], [3.0, 0.0], [0.0, 4.0]])
BENCH = GaussianMixture(means=MEANS, variance=0.5,
                        weights=np.array([0.3, 0.3, 0.4]))


def broad_model():
    # centered on the mixture mean, wide enough to reach every mode
    return DiagonalGaussian(mu=np.array([0.0, 1.6]),
                            log_sigma=np.log(np.array([3.0, 2.5])))


def narrow_model(mode):
    return DiagonalGaussian(mu=np.asarray(mode, dtype=float),
                            log_sigma=np.full(2, math.log(math.sqrt(0.5))))


class TestModeCoverage:
    def test_broad_model_covers_all(self):
        assert mode_coverage(broad_model(), BENCH) == 3

    def test_narrow_model_covers_one(self):
        for mode in MEANS:
            assert mode_coverage(narrow_model(mode), BENCH) == 1

    def test_two_mode_straddle(self):
        # between the two bottom modes, far from the top one
        q = DiagonalGaussian(mu=np.array([0.0, 0.0]),
                             log_sigma=np.log(np.array([3.0, 0.7])))
        assert mode_coverage(q, BENCH) == 2

    def test_threshold_validation(self):
        with pytest.raises(ValueError):
            mode_coverage(broad_model(), BENCH, rel_threshold=0.0)


class TestEss:
    def test_perfect_proposal(self):
        q = DiagonalGaussian(mu=np.array([0.5, -1.0]),
                             log_sigma=np.array([0.2, 0.1]))
        val = ess(q, q, 5000, np.random.default_rng(0))
        assert val == pytest.approx(5000.0, abs=1e-6)

    def test_known_gaussian_pair(self):
        # for q = N(0,1) proposal and p = N(mu, 1) target,
        # ESS/n -> exp(-mu^2) as n grows
        q = DiagonalGaussian(mu=np.zeros(1), log_sigma=np.zeros(1))
        p = DiagonalGaussian(mu=np.array([0.8]), log_sigma=np.zeros(1))
        n = 200_000
        val = ess(q, p, n, np.random.default_rng(1))
        assert val / n == pytest.approx(math.exp(-0.64), rel=0.05)

    def test_single_component_proposal_has_flat_weights(self):
        # inside one well-separated component p is a constant multiple of q,
        # so missing the other modes does not show up in ESS at all
        q = narrow_model(MEANS[0])
        val = ess(q, BENCH, 10000, np.random.default_rng(2))
        assert val > 0.99 * 10000

    def test_valley_proposal_collapses(self):
        # concentrated where the target is thin: rare huge weights
        q = DiagonalGaussian(mu=np.array([0.0, 1.0]),
                             log_sigma=np.full(2, math.log(0.6)))
        val = ess(q, BENCH, 10000, np.random.default_rng(2))
        assert val < 100.0


class TestEntropyError:
    def test_matched_gaussian(self):
        q = DiagonalGaussian(mu=np.array([1.0, 2.0]),
                             log_sigma=np.array([0.3, -0.2]))
        err = entropy_error(q, q, 200_000, np.random.default_rng(3))
        # MC noise only: sd of -log q is about 1, so the mean is tight
        assert err <= 0.02

    def test_too_narrow_model_penalized(self):
        err = entropy_error(narrow_model(MEANS[0]), BENCH, 50_000,
                            np.random.default_rng(4))
        # the model misses the spread between modes but matches one
        # component's entropy; the gap is the mixture's extra spread
        assert 0.3 <= err <= 1.5


class TestTestLogLik:
    def test_self_likelihood_near_negative_entropy(self):
        q = DiagonalGaussian(mu=np.zeros(2), log_sigma=np.zeros(2))
        val = held_out_log_lik(q, q, 100_000, np.random.default_rng(5))
        assert val == pytest.approx(-q.entropy(), abs=0.02)

    def test_missing_modes_tanks_likelihood(self):
        val = held_out_log_lik(narrow_model(MEANS[0]), BENCH, 2000,
                           np.random.default_rng(6))
        assert val < -15.0


class TestEvaluate:
    def test_reproducible_and_complete(self):
        cfg = EvalConfig(seed=7)
        a = evaluate(broad_model(), BENCH, BENCH, cfg)
        b = evaluate(broad_model(), BENCH, BENCH, cfg)
        assert a == b
        assert a.mode_coverage == 3
        assert 0 < a.ess <= cfg.n_ess
        assert np.isfinite(a.entropy_error)
        assert np.isfinite(a.test_log_lik)

    def test_seed_offsets_decouple_metrics(self):
        a = evaluate(broad_model(), BENCH, BENCH, EvalConfig(seed=7))
        c = evaluate(broad_model(), BENCH, BENCH, EvalConfig(seed=8))
        assert a.ess != c.ess
        assert a.test_log_lik != c.test_log_lik
