import math

import numpy as np
import pytest

from fedcohort.data import ClientDataset, FederatedDataset
from fedcohort.models import (ModelSpec, evaluate, global_objective, init_params,
                              loss_and_grad, predict_scores)
from fedcohort.params import LayeredParams, l2_norm, subtract
from fedcohort.rng import derive_stream

SPECS = {
    "linear": ModelSpec(kind="linear", input_dim=5),
    "softmax": ModelSpec(kind="softmax", input_dim=5, num_classes=4),
    "mlp_classification": ModelSpec(kind="mlp", input_dim=5, num_classes=3, hidden_dim=6),
    "mlp_regression": ModelSpec(kind="mlp", input_dim=5, num_classes=1, hidden_dim=6),
}


def random_batch(spec, rng, n=12):
    x = rng.standard_normal((n, spec.input_dim))
    if spec.classification:
        y = rng.integers(0, spec.num_classes, size=n).astype(np.int64)
    else:
        y = rng.standard_normal(n)
    return x, y


def numeric_gradient(spec, params, x, y, h=1e-6):
    """Central finite differences, the independent oracle for the gradient."""
    flat = np.concatenate([v.ravel() for v in params.values])
    grad = np.zeros_like(flat)
    shapes = [v.shape for v in params.values]

    def rebuild(vec):
        out, k = [], 0
        for shape in shapes:
            size = int(np.prod(shape))
            out.append(vec[k:k + size].reshape(shape))
            k += size
        return params.like(out)

    for i in range(flat.size):
        up, down = flat.copy(), flat.copy()
        up[i] += h
        down[i] -= h
        lu, _ = loss_and_grad(spec, rebuild(up), x, y)
        ld, _ = loss_and_grad(spec, rebuild(down), x, y)
        grad[i] = (lu - ld) / (2 * h)
    return grad


class TestInitParams:
    def test_linear_layer_shapes(self):
        p = init_params(SPECS["linear"], derive_stream(0, (0,)))
        assert p.names == ("weight", "bias")
        assert p.layer("weight").shape == (5,) and p.layer("bias").shape == (1,)

    def test_zero_scale_gives_zeros(self):
        spec = ModelSpec(kind="softmax", input_dim=3, num_classes=2, init_scale=0.0)
        p = init_params(spec, derive_stream(0, (0,)))
        assert l2_norm(p) == 0.0

    def test_same_stream_same_params(self):
        a = init_params(SPECS["mlp_classification"], derive_stream(3, (1,)))
        b = init_params(SPECS["mlp_classification"], derive_stream(3, (1,)))
        assert a.allclose(b)

    def test_biases_zero(self):
        p = init_params(SPECS["mlp_classification"], derive_stream(1, (0,)))
        assert not p.layer("hidden_bias").any()
        assert not p.layer("output_bias").any()


class TestLossAndGrad:
    def test_zero_params_zero_labels_linear(self):
        spec = SPECS["linear"]
        params = LayeredParams([("weight", np.zeros(5)), ("bias", np.zeros(1))])
        x = np.random.default_rng(0).standard_normal((7, 5))
        loss, grad = loss_and_grad(spec, params, x, np.zeros(7))
        assert loss == 0.0
        assert l2_norm(grad) == 0.0

    def test_uniform_logits_loss_is_log_c(self):
        spec = SPECS["softmax"]
        params = LayeredParams([("weight", np.zeros((5, 4))), ("bias", np.zeros(4))])
        x, y = random_batch(spec, np.random.default_rng(1))
        loss, _ = loss_and_grad(spec, params, x, y)
        assert loss == pytest.approx(math.log(4), rel=1e-12)

    def test_softmax_probabilities_sum_to_one(self):
        spec = SPECS["softmax"]
        rng = np.random.default_rng(2)
        params = init_params(spec, derive_stream(2, (0,)))
        scores = predict_scores(spec, params, rng.standard_normal((9, 5)))
        probs = np.exp(scores - scores.max(axis=1, keepdims=True))
        probs /= probs.sum(axis=1, keepdims=True)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)

    def test_rejects_nonfinite_features(self):
        spec = SPECS["linear"]
        params = init_params(spec, derive_stream(0, (0,)))
        x = np.full((3, 5), np.nan)
        with pytest.raises(ValueError, match="non-finite"):
            loss_and_grad(spec, params, x, np.zeros(3))

    def test_rejects_wrong_dim(self):
        spec = SPECS["linear"]
        params = init_params(spec, derive_stream(0, (0,)))
        with pytest.raises(ValueError, match="input_dim"):
            loss_and_grad(spec, params, np.zeros((3, 4)), np.zeros(3))

    @pytest.mark.parametrize("name", sorted(SPECS))
    def test_gradient_matches_finite_differences(self, name):
        spec = SPECS[name]
        rng = np.random.default_rng(hash(name) % 2**32)
        for trial in range(5):
            params = init_params(spec, derive_stream(trial, (0,)))
            x, y = random_batch(spec, rng)
            _, grad = loss_and_grad(spec, params, x, y)
            flat = np.concatenate([v.ravel() for v in grad.values])
            numeric = numeric_gradient(spec, params, x, y)
            rel = np.linalg.norm(flat - numeric) / max(np.linalg.norm(flat), np.linalg.norm(numeric))
            assert rel <= 1e-4


def one_client(cid, preds_correct, n, d=2):
    # same feature row repeated; labels placed to force hit/miss on a zero model
    x = np.zeros((n, d))
    labels = np.zeros(n) if preds_correct else np.ones(n) * 10.0
    return ClientDataset(client_id=cid, features=x, labels=labels, weight=float(n))


class TestEvaluate:
    def test_single_client_all_correct(self):
        spec = ModelSpec(kind="linear", input_dim=2)
        params = LayeredParams([("weight", np.zeros(2)), ("bias", np.zeros(1))])
        loss, acc, per_client = evaluate(spec, params, [one_client("a", True, 4)])
        assert acc == 1.0 and per_client == [1.0]

    def test_example_weighted_aggregate(self):
        spec = ModelSpec(kind="linear", input_dim=2)
        params = LayeredParams([("weight", np.zeros(2)), ("bias", np.zeros(1))])
        clients = [one_client("a", True, 1), one_client("b", False, 3)]
        _, acc, per_client = evaluate(spec, params, clients)
        assert acc == pytest.approx(0.25)
        assert per_client == [1.0, 0.0]

    def test_per_client_length(self):
        spec = ModelSpec(kind="linear", input_dim=2)
        params = LayeredParams([("weight", np.zeros(2)), ("bias", np.zeros(1))])
        clients = [one_client(f"c{i}", True, 2) for i in range(5)]
        assert len(evaluate(spec, params, clients)[2]) == 5


class TestGlobalObjective:
    def make_fed(self, clients):
        return FederatedDataset(train_clients=clients, test_clients=[],
                                task_kind="regression", num_classes=1, input_dim=2)

    def test_single_client_equals_its_loss(self):
        spec = ModelSpec(kind="linear", input_dim=2)
        params = LayeredParams([("weight", np.array([1.0, 0.0])), ("bias", np.zeros(1))])
        rng = np.random.default_rng(0)
        c = ClientDataset("a", rng.standard_normal((6, 2)), rng.standard_normal(6), 6.0)
        fed = self.make_fed([c])
        loss, _ = loss_and_grad(spec, params, c.features, c.labels)
        assert global_objective(spec, params, fed) == pytest.approx(loss, rel=1e-12)

    def test_two_equal_clients_mean(self):
        spec = ModelSpec(kind="linear", input_dim=2)
        params = LayeredParams([("weight", np.zeros(2)), ("bias", np.zeros(1))])
        # zero model: loss on client = mean(label^2)
        a = ClientDataset("a", np.zeros((4, 2)), np.full(4, math.sqrt(0.2)), 4.0)
        b = ClientDataset("b", np.zeros((4, 2)), np.full(4, math.sqrt(0.4)), 4.0)
        assert global_objective(spec, params, self.make_fed([a, b])) == pytest.approx(0.3, rel=1e-12)

    def test_identical_clients_equal_pooled(self):
        spec = ModelSpec(kind="linear", input_dim=2)
        params = init_params(spec, derive_stream(4, (0,)))
        rng = np.random.default_rng(5)
        x = rng.standard_normal((8, 2))
        y = rng.standard_normal(8)
        clients = [ClientDataset(f"c{i}", x, y, 8.0) for i in range(3)]
        pooled_loss, _ = loss_and_grad(spec, params, x, y)
        fed = self.make_fed(clients)
        assert global_objective(spec, params, fed) == pytest.approx(pooled_loss, rel=1e-12)


def test_subtract_roundtrip_compatible():
    spec = SPECS["mlp_regression"]
    a = init_params(spec, derive_stream(0, (0,)))
    b = init_params(spec, derive_stream(1, (0,)))
    assert l2_norm(subtract(a, a)) == 0.0
    assert subtract(a, b).names == a.names
