import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvip.errors import ConfigurationError, DatasetError
from mvip.rbf import (Normalization, RbfNetwork, load_network, network_rmse,
                      rmse, save_network)


def identity_norm(n_in, n_out):
    return Normalization(
        input_min=-np.ones(n_in), input_max=np.ones(n_in),
        output_min=-np.ones(n_out), output_max=np.ones(n_out))


def small_net(centers, radii, weights):
    centers = np.atleast_2d(centers)
    weights = np.atleast_2d(weights)
    return RbfNetwork(centers=centers, radii=radii, weights=weights,
                      normalization=identity_norm(centers.shape[1],
                                                  weights.shape[1]))


class TestForward:
    def test_input_at_centre_returns_weight_row(self):
        net = small_net(np.linspace(-1, 1, 12), [2.0],
                        [[0.5, -0.3, 0.2, 0.1, -0.7, 0.9]])
        assert np.allclose(net.forward(net.centers[0]), net.weights[0])

    def test_far_input_decays_to_zero(self):
        net = small_net(np.zeros(12), [0.5], [np.ones(6)])
        far = np.full(12, 50.0)
        assert np.allclose(net.forward(far), 0.0, atol=1e-12)

    def test_two_neurons_hand_computed(self):
        c = np.array([[0.0, 0.0], [1.0, 0.0]])
        s = np.array([1.0, 2.0])
        w = np.array([[1.0, -1.0], [2.0, 0.5]])
        net = small_net(c, s, w)
        x = np.array([0.5, -0.5])
        k1 = np.exp(-((0.5) ** 2 + 0.5 ** 2) / (2 * 1.0 ** 2))
        k2 = np.exp(-((0.5 - 1.0) ** 2 + 0.5 ** 2) / (2 * 2.0 ** 2))
        expected = k1 * w[0] + k2 * w[1]
        assert np.allclose(net.forward(x), expected)

    def test_batch_and_single_agree(self, rng):
        net = small_net(rng.normal(size=(4, 12)), rng.uniform(0.5, 2, 4),
                        rng.normal(size=(4, 6)))
        xs = rng.normal(size=(10, 12))
        batch = net.forward(xs)
        for i in range(10):
            assert np.allclose(batch[i], net.forward(xs[i]))

    def test_invariants_enforced(self):
        with pytest.raises(ConfigurationError):
            small_net(np.zeros((2, 3)), [1.0], np.ones((2, 2)))
        with pytest.raises(ConfigurationError):
            small_net(np.zeros((1, 3)), [-1.0], np.ones((1, 2)))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=3, max_size=3))
    def test_output_bounded_by_weight_sums(self, x):
        net = small_net(np.array([[0.0, 1.0, -1.0], [2.0, 0.0, 0.5]]),
                        np.array([0.7, 1.3]),
                        np.array([[1.0, -2.0], [0.5, 3.0]]))
        y = net.forward(np.array(x))
        bound = np.abs(net.weights).sum(axis=0)
        assert np.all(np.abs(y) <= bound + 1e-12)


class TestRmse:
    def test_perfect_fit(self):
        out = np.ones((5, 6))
        assert rmse(out, out) == 0.0

    def test_single_sample_single_output(self):
        assert rmse(np.array([[1.5]]), np.array([[2.75]])) \
            == pytest.approx(1.25)

    def test_note_mean_of_roots_not_root_of_means(self):
        outputs = np.array([[0.0], [0.0]])
        targets = np.array([[3.0], [1.0]])
        # per-sample roots 3 and 1 average to 2; root-of-mean would be ~2.236
        assert rmse(outputs, targets) == pytest.approx(2.0)

    def test_matches_reference_implementation(self, rng):
        from oracles import rmse_reference
        outputs = rng.normal(size=(20, 6))
        targets = rng.normal(size=(20, 6))
        assert rmse(outputs, targets) == pytest.approx(
            rmse_reference(outputs.tolist(), targets.tolist()))

    def test_empty_rejected(self):
        with pytest.raises(DatasetError):
            rmse(np.zeros((0, 6)), np.zeros((0, 6)))


class TestNormalization:
    def test_span_maps_to_unit_interval(self):
        norm = Normalization(
            input_min=np.array([0.0]), input_max=np.array([2.0]),
            output_min=np.array([0.0]), output_max=np.array([2.0]))
        vals = norm.normalize_inputs(np.array([[0.0], [1.0], [2.0]]))
        assert np.allclose(vals.ravel(), [-1.0, 0.0, 1.0])

    def test_roundtrip(self, rng):
        data = rng.normal(size=(50, 12))
        targets = rng.normal(size=(50, 6))
        norm = Normalization.from_data(data, targets)
        back = norm.denormalize_inputs(norm.normalize_inputs(data))
        assert np.allclose(back, data, atol=1e-12)
        back_t = norm.denormalize_outputs(norm.normalize_outputs(targets))
        assert np.allclose(back_t, targets, atol=1e-12)

    def test_training_extremes_hit_exactly(self, rng):
        data = rng.normal(size=(100, 12))
        targets = rng.normal(size=(100, 6))
        norm = Normalization.from_data(data, targets)
        mapped = norm.normalize_inputs(data)
        assert np.allclose(mapped.min(axis=0), -1.0)
        assert np.allclose(mapped.max(axis=0), 1.0)

    def test_constant_dimension_named(self, rng):
        data = rng.normal(size=(10, 12))
        data[:, 7] = 3.3
        with pytest.raises(DatasetError, match="dimension 7"):
            Normalization.from_data(data, rng.normal(size=(10, 6)))


class TestSerialization:
    def test_roundtrip(self, tmp_path, rng):
        net = small_net(rng.normal(size=(5, 12)), rng.uniform(0.5, 2, 5),
                        rng.normal(size=(5, 6)))
        path = tmp_path / "net.json"
        save_network(net, path)
        back = load_network(path)
        x = rng.normal(size=12)
        assert np.allclose(back.forward(x), net.forward(x))
        assert back.neuron_count == 5

    def test_version_checked(self, tmp_path, rng):
        import json
        net = small_net(np.zeros((1, 2)), [1.0], np.ones((1, 1)))
        path = tmp_path / "net.json"
        save_network(net, path)
        doc = json.loads(path.read_text())
        doc["version"] = 99
        path.write_text(json.dumps(doc))
        with pytest.raises(ConfigurationError):
            load_network(path)

    def test_rejects_other_documents(self, tmp_path):
        path = tmp_path / "net.json"
        path.write_text("{}")
        with pytest.raises(ConfigurationError):
            load_network(path)


def test_network_rmse_normalized_and_physical(rng):
    data = rng.normal(size=(30, 3))
    targets = rng.normal(size=(30, 2))
    norm = Normalization.from_data(data, targets)
    net = RbfNetwork(centers=rng.normal(size=(4, 3)),
                     radii=rng.uniform(0.5, 2, 4),
                     weights=rng.normal(size=(4, 2)),
                     normalization=norm)
    n_norm = network_rmse(net, data, targets, normalized=True)
    n_phys = network_rmse(net, data, targets, normalized=False)
    assert n_norm > 0 and n_phys > 0 and n_norm != n_phys
