import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedcohort.client import (LocalBudget, TrainingDivergedError, clip_update, compute_update,
                              examples_this_client, local_train)
from fedcohort.data import ClientDataset
from fedcohort.models import ModelSpec, init_params, loss_and_grad
from fedcohort.params import LayeredParams, axpy, dot, l2_norm, scale, subtract
from fedcohort.rng import derive_stream

LINEAR = ModelSpec(kind="linear", input_dim=3)


def make_client(n=8, d=3, seed=0, cid="c0"):
    rng = np.random.default_rng(seed)
    return ClientDataset(cid, rng.standard_normal((n, d)), rng.standard_normal(n), float(n))


def make_params(seed=1):
    return init_params(LINEAR, derive_stream(seed, (0,)))


class TestLocalTrain:
    def test_zero_lr_is_identity(self):
        x = make_params()
        client = make_client()
        out = local_train(LINEAR, x, client, 0.0, LocalBudget("epochs", 2, 3),
                          derive_stream(0, (1,)))
        assert out.allclose(x)

    def test_full_batch_step_matches_analytic_gradient(self):
        x = make_params()
        client = make_client(n=10)
        lr = 0.3
        out = local_train(LINEAR, x, client, lr, LocalBudget("epochs", 1, 10),
                          derive_stream(0, (2,)))
        _, grad = loss_and_grad(LINEAR, x, client.features, client.labels)
        expected = axpy(-lr, grad, x)
        for got, want in zip(out.values, expected.values):
            np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)

    def test_two_epochs_matches_hand_stepped_oracle(self):
        # E=2, N=4, B=2: four updates; the oracle replays the same stream to
        # recover the permutations, then steps with plain numpy.
        x = make_params(seed=5)
        client = make_client(n=4, seed=6)
        lr = 0.1
        out = local_train(LINEAR, x, client, lr, LocalBudget("epochs", 2, 2),
                          derive_stream(3, (9,)))

        oracle_stream = derive_stream(3, (9,))
        w = np.array(x.layer("weight"))
        b = float(x.layer("bias")[0])
        for _ in range(2):
            perm = oracle_stream.permutation(4)
            for lo in (0, 2):
                rows = perm[lo:lo + 2]
                xb, yb = client.features[rows], client.labels[rows]
                r = xb @ w + b - yb
                gw = 2.0 * xb.T @ r / 2
                gb = 2.0 * r.sum() / 2
                w = w - lr * gw
                b = b - lr * gb
        np.testing.assert_allclose(out.layer("weight"), w, rtol=1e-12)
        assert out.layer("bias")[0] == pytest.approx(b, rel=1e-12)

    def test_replay_is_bit_identical(self):
        x = make_params()
        client = make_client(n=9)
        budget = LocalBudget("steps", 7, 2)
        a = local_train(LINEAR, x, client, 0.05, budget, derive_stream(1, (4,)))
        b = local_train(LINEAR, x, client, 0.05, budget, derive_stream(1, (4,)))
        for u, v in zip(a.values, b.values):
            np.testing.assert_array_equal(u, v)

    def test_step_budget_wraps_into_new_epoch(self):
        # 5 steps of batch 1 on 3 examples: visits 3 + 2 rows across two permutations
        x = make_params()
        client = make_client(n=3)
        out = local_train(LINEAR, x, client, 0.01, LocalBudget("steps", 5, 1),
                          derive_stream(2, (0,)))
        assert not out.allclose(x)

    def test_divergence_raises_with_client_and_step(self):
        x = LayeredParams([("weight", np.full(3, 1e200)), ("bias", np.zeros(1))])
        client = make_client(n=4, cid="cX")
        with pytest.raises(TrainingDivergedError) as exc:
            local_train(LINEAR, x, client, 10.0, LocalBudget("epochs", 3, 2),
                        derive_stream(0, (0,)))
        assert exc.value.client_id == "cX"
        assert exc.value.step >= 0

    def test_softmax_and_mlp_run(self):
        rng = np.random.default_rng(0)
        for spec in (ModelSpec(kind="softmax", input_dim=3, num_classes=4),
                     ModelSpec(kind="mlp", input_dim=3, num_classes=4, hidden_dim=5),
                     ModelSpec(kind="mlp", input_dim=3, num_classes=1, hidden_dim=5)):
            if spec.classification:
                labels = rng.integers(0, 4, 6).astype(np.int64)
            else:
                labels = rng.standard_normal(6)
            client = ClientDataset("c", rng.standard_normal((6, 3)), labels, 6.0)
            x = init_params(spec, derive_stream(0, (0,)))
            out = local_train(spec, x, client, 0.1, LocalBudget("epochs", 1, 2),
                              derive_stream(0, (1,)))
            assert out.names == x.names


class TestComputeUpdate:
    def test_identical_models_give_zero(self):
        x = make_params()
        assert l2_norm(compute_update(x, x)) == 0.0

    def test_hand_evaluation(self):
        x = LayeredParams([("w", np.array([1.0]))])
        x_k = LayeredParams([("w", np.array([0.2]))])
        np.testing.assert_allclose(compute_update(x, x_k).layer("w"), [0.8])

    def test_composition_with_zero_lr(self):
        x = make_params()
        client = make_client()
        x_k = local_train(LINEAR, x, client, 0.0, LocalBudget("epochs", 1, 4),
                          derive_stream(0, (3,)))
        assert l2_norm(compute_update(x, x_k)) == 0.0


class TestClipUpdate:
    def delta(self, a, b):
        return LayeredParams([("w", np.array([a, b], dtype=np.float64))])

    def test_under_threshold_untouched(self):
        d, flag = clip_update(self.delta(3, 4), 10.0)
        np.testing.assert_array_equal(d.layer("w"), [3.0, 4.0])
        assert flag == 1

    def test_boundary_counts_as_unclipped(self):
        d, flag = clip_update(self.delta(3, 4), 5.0)
        np.testing.assert_array_equal(d.layer("w"), [3.0, 4.0])
        assert flag == 1

    def test_over_threshold_rescaled(self):
        d, flag = clip_update(self.delta(3, 4), 1.0)
        np.testing.assert_allclose(d.layer("w"), [0.6, 0.8], rtol=1e-15)
        assert flag == 0

    def test_rejects_nonpositive_level(self):
        with pytest.raises(ValueError):
            clip_update(self.delta(1, 0), 0.0)

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), level=st.floats(1e-6, 1e3))
    def test_norm_capped_and_direction_preserved(self, seed, level):
        rng = np.random.default_rng(seed)
        delta = LayeredParams([("w", rng.standard_normal(6)), ("b", rng.standard_normal(2))])
        clipped, flag = clip_update(delta, level)
        assert l2_norm(clipped) <= level * (1 + 1e-12) or flag == 1
        # clipped delta is a nonnegative multiple of delta
        cos = dot(clipped, delta) / (l2_norm(clipped) * l2_norm(delta))
        assert cos == pytest.approx(1.0, abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), factor=st.floats(1e-3, 1e3))
    def test_indicator_scale_invariant(self, seed, factor):
        rng = np.random.default_rng(seed)
        delta = LayeredParams([("w", rng.standard_normal(4))])
        level = float(rng.uniform(0.1, 3.0))
        _, flag_a = clip_update(delta, level)
        _, flag_b = clip_update(scale(factor, delta), level * factor)
        assert flag_a == flag_b


class TestExamplesThisClient:
    @pytest.mark.parametrize("budget,n,expected", [
        (LocalBudget("epochs", 1, 30), 30, 30),
        (LocalBudget("epochs", 3, 4), 10, 30),
        (LocalBudget("steps", 5, 1), 3, 5),
        (LocalBudget("steps", 3, 2), 3, 5),   # batches 2,1 then wrap 2
        (LocalBudget("steps", 4, 10), 6, 24),  # oversized batch = full data
    ])
    def test_counting(self, budget, n, expected):
        assert examples_this_client(budget, n) == expected

    def test_matches_actual_visits(self):
        # the arithmetic must equal the batch plan the trainer actually uses
        from fedcohort.client import _batch_plan
        for n, budget in [(7, LocalBudget("steps", 11, 3)), (5, LocalBudget("epochs", 2, 2)),
                          (4, LocalBudget("steps", 9, 4))]:
            order, starts, ends = _batch_plan(n, budget, derive_stream(0, (0,)))
            visited = int((ends - starts).sum())
            assert examples_this_client(budget, n) == visited


def test_subtract_is_shape_checked():
    x = make_params()
    other = LayeredParams([("weight", np.zeros(2)), ("bias", np.zeros(1))])
    with pytest.raises(Exception):
        subtract(x, other)
