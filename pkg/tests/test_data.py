import numpy as np
import pytest

from fedcohort.data import (DatasetFormatError, SyntheticDataSpec, generate_synthetic,
                            load_dataset, save_dataset)


def test_fixed_sizes_and_counts():
    spec = SyntheticDataSpec(num_train_clients=2, num_test_clients=1, examples_per_client=5)
    fed = generate_synthetic(spec, 0)
    assert len(fed.train_clients) == 2 and len(fed.test_clients) == 1
    assert all(c.num_examples == 5 for c in fed.train_clients)
    assert all(c.weight == 5.0 for c in fed.train_clients)


def test_zero_heterogeneity_shares_global_weights():
    # sigma_het = 0 removes the only per-client signal difference: two clients
    # with the same local features must get identical labels under w_k == w*.
    spec = SyntheticDataSpec(num_train_clients=3, heterogeneity=0.0, label_noise=0.0,
                             input_dim=4, examples_per_client=6)
    fed = generate_synthetic(spec, 1)
    w_fit = []
    for c in fed.train_clients:
        w, *_ = np.linalg.lstsq(c.features, c.labels, rcond=None)
        w_fit.append(w)
    for w in w_fit[1:]:
        np.testing.assert_allclose(w, w_fit[0], atol=1e-8)


def test_determinism():
    spec = SyntheticDataSpec(num_train_clients=4, num_test_clients=2, size_law="log_uniform",
                             min_examples=3, max_examples=40)
    a = generate_synthetic(spec, 123)
    b = generate_synthetic(spec, 123)
    for ca, cb in zip(a.train_clients + a.test_clients, b.train_clients + b.test_clients):
        assert ca.client_id == cb.client_id
        np.testing.assert_array_equal(ca.features, cb.features)
        np.testing.assert_array_equal(ca.labels, cb.labels)


def test_different_seeds_differ():
    spec = SyntheticDataSpec(num_train_clients=2)
    a = generate_synthetic(spec, 1)
    b = generate_synthetic(spec, 2)
    assert not np.array_equal(a.train_clients[0].features, b.train_clients[0].features)


def test_log_uniform_sizes_in_bounds():
    spec = SyntheticDataSpec(num_train_clients=50, size_law="log_uniform",
                             min_examples=3, max_examples=17)
    fed = generate_synthetic(spec, 7)
    sizes = [c.num_examples for c in fed.train_clients]
    assert min(sizes) >= 3 and max(sizes) <= 17
    assert len(set(sizes)) > 1


def test_classification_labels_valid():
    spec = SyntheticDataSpec(task_kind="classification", num_classes=5,
                             num_train_clients=3, examples_per_client=30)
    fed = generate_synthetic(spec, 2)
    for c in fed.train_clients:
        assert c.labels.dtype == np.int64
        assert c.labels.min() >= 0 and c.labels.max() < 5


class TestFileFormat:
    def roundtrip(self, tmp_path, spec, seed=11):
        fed = generate_synthetic(spec, seed)
        path = str(tmp_path / "data.txt")
        save_dataset(fed, path, generator=spec, seed=seed)
        return fed, load_dataset(path)

    @pytest.mark.parametrize("task", ["regression", "classification"])
    def test_roundtrip_bit_exact(self, tmp_path, task):
        spec = SyntheticDataSpec(task_kind=task, num_classes=3 if task == "classification" else 1,
                                 num_train_clients=3, num_test_clients=2,
                                 size_law="log_uniform", min_examples=2, max_examples=9)
        fed, loaded = self.roundtrip(tmp_path, spec)
        assert loaded.task_kind == fed.task_kind
        assert loaded.num_classes == fed.num_classes
        for ca, cb in zip(fed.train_clients + fed.test_clients,
                          loaded.train_clients + loaded.test_clients):
            assert ca.client_id == cb.client_id
            assert ca.weight == cb.weight
            np.testing.assert_array_equal(ca.features, cb.features)
            np.testing.assert_array_equal(ca.labels, cb.labels)

    def test_declares_all_clients(self, tmp_path):
        spec = SyntheticDataSpec(num_train_clients=3)
        _, loaded = self.roundtrip(tmp_path, spec)
        assert len(loaded.train_clients) == 3

    def test_corrupt_magic_reports_line(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("not a dataset\n")
        with pytest.raises(DatasetFormatError, match="line 1"):
            load_dataset(str(path))

    def test_corrupt_header_reports_line(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("fedcohort-dataset v1\nheader\t{broken json\n")
        with pytest.raises(DatasetFormatError, match="line 2"):
            load_dataset(str(path))

    def test_truncated_client_reports_line(self, tmp_path):
        spec = SyntheticDataSpec(num_train_clients=1, examples_per_client=2, input_dim=2)
        fed = generate_synthetic(spec, 0)
        path = tmp_path / "trunc.txt"
        save_dataset(fed, str(path))
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")  # drop the labels record
        with pytest.raises(DatasetFormatError):
            load_dataset(str(path))


def test_spec_validation():
    with pytest.raises(ValueError):
        SyntheticDataSpec(num_train_clients=0)
    with pytest.raises(ValueError):
        SyntheticDataSpec(task_kind="classification", num_classes=1)
    with pytest.raises(ValueError):
        SyntheticDataSpec(size_law="log_uniform", min_examples=9, max_examples=3)
    with pytest.raises(ValueError):
        SyntheticDataSpec(heterogeneity=-0.1)
