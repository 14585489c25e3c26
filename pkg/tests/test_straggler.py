import numpy as np
import pytest

from fedcohort.diagnostics import RoundMetrics
from fedcohort.rng import derive_stream
from fedcohort.straggler import (StragglerConfig, client_runtime, relative_time_to_accuracy,
                                 round_runtime)


def row(round_, test_acc, runtime_cum):
    return RoundMetrics(round=round_, cohort_size=1, train_loss=None, train_acc=None,
                        test_loss=None, test_acc=test_acc, pg_norm=None,
                        pg_norm_predicted=None, cosine_avg=None, clip_fraction=None,
                        clip_level=None, lr_server=None, examples_round=0, examples_cum=0,
                        runtime_round=None, runtime_cum=runtime_cum, failure=0)


class TestClientRuntime:
    def test_deterministic_when_scale_zero(self):
        cfg = StragglerConfig(seconds_per_example=1.0, straggler_scale=0.0)
        assert client_runtime(20, cfg, derive_stream(0, (0,))) == 20.0

    def test_half_second_per_example(self):
        cfg = StragglerConfig(seconds_per_example=0.5, straggler_scale=0.0)
        assert client_runtime(10, cfg, derive_stream(0, (0,))) == 5.0

    def test_monte_carlo_mean(self):
        # E[X] = (alpha + lambda) * N = (1 + 2) * 10 = 30
        cfg = StragglerConfig(seconds_per_example=1.0, straggler_scale=2.0)
        stream = derive_stream(11, (0,))
        draws = [client_runtime(10, cfg, stream) for _ in range(100_000)]
        assert np.mean(draws) == pytest.approx(30.0, rel=0.02)

    def test_lower_bound_always_holds(self):
        cfg = StragglerConfig(seconds_per_example=1.5, straggler_scale=5.0)
        stream = derive_stream(3, (0,))
        assert all(client_runtime(7, cfg, stream) >= 1.5 * 7 for _ in range(1000))

    def test_mean_monotone_in_examples(self):
        cfg = StragglerConfig(seconds_per_example=1.0, straggler_scale=1.0)
        stream = derive_stream(5, (0,))
        small = np.mean([client_runtime(5, cfg, stream) for _ in range(20_000)])
        large = np.mean([client_runtime(15, cfg, stream) for _ in range(20_000)])
        assert small < large

    def test_zero_examples(self):
        cfg = StragglerConfig(seconds_per_example=1.0, straggler_scale=2.0)
        assert client_runtime(0, cfg, derive_stream(0, (0,))) == 0.0


class TestRoundRuntime:
    def test_single(self):
        assert round_runtime([5.0]) == 5.0

    def test_max(self):
        assert round_runtime([3.0, 9.0, 7.0]) == 9.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            round_runtime([])

    def test_lower_bound_from_largest_client(self):
        cfg = StragglerConfig(seconds_per_example=2.0, straggler_scale=3.0)
        stream = derive_stream(7, (0,))
        sizes = [4, 9, 2]
        for _ in range(200):
            runtimes = [client_runtime(n, cfg, stream) for n in sizes]
            assert round_runtime(runtimes) >= 2.0 * max(sizes)

    def test_mean_matches_monte_carlo_oracle(self):
        # engine: max over per-client shifted-exponential draws; oracle: direct
        # numpy simulation of the same max over a fixed cohort
        cfg = StragglerConfig(seconds_per_example=1.0, straggler_scale=2.0)
        sizes = [5, 10, 20]
        stream = derive_stream(13, (0,))
        engine = np.mean([
            round_runtime([client_runtime(n, cfg, stream) for n in sizes])
            for _ in range(100_000)
        ])
        rng = np.random.default_rng(99)
        draws = np.stack([n * 1.0 + rng.exponential(2.0 * n, size=100_000) for n in sizes])
        oracle = draws.max(axis=0).mean()
        assert engine == pytest.approx(oracle, rel=0.01)


class TestRelativeTime:
    def test_identical_runs_ratio_one(self):
        m = [row(1, 0.2, 10.0), row(2, 0.6, 20.0)]
        assert relative_time_to_accuracy(m, m, 0.5) == 1.0

    def test_hand_example(self):
        a = [row(1, 0.1, 10.0), row(2, 0.6, 40.0)]
        b = [row(1, 0.6, 20.0)]
        assert relative_time_to_accuracy(a, b, 0.5) == 2.0

    def test_none_when_either_never_crosses(self):
        a = [row(1, 0.1, 10.0)]
        b = [row(1, 0.6, 20.0)]
        assert relative_time_to_accuracy(a, b, 0.5) is None
        assert relative_time_to_accuracy(b, a, 0.5) is None
