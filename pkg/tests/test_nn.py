import numpy as np
import pytest

from schedlab.errors import ModelFormatError, ModelVersionError, NoValidActionError
from schedlab.nn import (
    Adam,
    MlpParams,
    greedy_action,
    init_mlp,
    load_model,
    masked_log_probs,
    masked_policy,
    mlp_forward,
    mlp_gradient,
    sample_action,
    save_model,
)


def rng_(seed=0):
    return np.random.Generator(np.random.Philox(key=seed))


def test_zero_params_zero_output():
    params = MlpParams(
        weights=[np.zeros((4, 8)), np.zeros((8, 3))],
        biases=[np.zeros(8), np.zeros(3)],
    )
    out = mlp_forward(params, rng_().standard_normal(4))
    assert np.array_equal(out, np.zeros(3))


def test_identity_single_layer():
    params = MlpParams(weights=[np.eye(5)], biases=[np.zeros(5)])
    x = rng_(1).standard_normal(5)
    assert np.allclose(mlp_forward(params, x), x)


def test_dimension_mismatch_raises():
    params = init_mlp([4, 8, 2], rng_())
    with pytest.raises(ValueError):
        mlp_forward(params, np.zeros(5))
    with pytest.raises(ValueError):
        mlp_gradient(params, np.zeros((3, 4)), np.zeros((3, 3)))


def finite_difference_grads(params, x, upstream, h=1e-5):
    """Central-difference oracle for d(sum(out * upstream))/d(theta)."""

    def loss() -> float:
        return float(np.sum(mlp_forward(params, x) * upstream))

    fd_w, fd_b = [], []
    for arrays, grads in ((params.weights, fd_w), (params.biases, fd_b)):
        for arr in arrays:
            g = np.zeros_like(arr)
            it = np.nditer(arr, flags=["multi_index"])
            while not it.finished:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + h
                up = loss()
                arr[idx] = orig - h
                down = loss()
                arr[idx] = orig
                g[idx] = (up - down) / (2 * h)
                it.iternext()
            grads.append(g)
    return fd_w, fd_b


@pytest.mark.parametrize("trial", range(10))
def test_gradient_matches_central_differences(trial):
    rng = rng_(trial)
    dims = [int(rng.integers(2, 6)) for _ in range(4)]
    params = init_mlp(dims, rng)
    batch = int(rng.integers(1, 5))
    x = rng.standard_normal((batch, dims[0]))
    upstream = rng.standard_normal((batch, dims[-1]))
    gw, gb = mlp_gradient(params, x, upstream)
    fw, fb = finite_difference_grads(params, x, upstream)
    worst = 0.0
    for a, b in zip(gw + gb, fw + fb):
        denom = np.maximum(np.abs(b), 1.0)
        worst = max(worst, float(np.max(np.abs(a - b) / denom)))
    assert worst < 1e-4


def test_masked_policy_uniform_logits():
    params = MlpParams(weights=[np.zeros((2, 6))], biases=[np.zeros(6)])
    mask = np.array([True, False, True, False, True, False])
    probs = masked_policy(params, np.zeros(2), mask)
    assert probs[~mask].tolist() == [0.0, 0.0, 0.0]
    assert np.allclose(probs[mask], 1 / 3)
    assert probs.sum() == pytest.approx(1.0)


def test_masked_policy_single_valid():
    params = init_mlp([3, 4, 5], rng_(7))
    mask = np.array([False, False, True, False, False])
    probs = masked_policy(params, rng_(8).standard_normal(3), mask)
    assert probs[2] == pytest.approx(1.0)
    assert probs.sum() == pytest.approx(1.0)


def test_masked_policy_all_false_raises():
    params = init_mlp([3, 4, 2], rng_())
    with pytest.raises(NoValidActionError):
        masked_policy(params, np.zeros(3), np.array([False, False]))


def test_sampling_never_violates_mask():
    rng = rng_(21)
    params = init_mlp([4, 8, 6], rng)
    obs = rng.standard_normal(4)
    mask = np.array([True, False, True, True, False, False])
    probs = masked_policy(params, obs, mask)
    draws = {sample_action(probs, rng) for _ in range(10_000)}
    assert draws <= {0, 2, 3}


def test_masked_log_probs_batch():
    logits = np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]])
    masks = np.array([[True, True, False], [True, True, True]])
    lp = masked_log_probs(logits, masks)
    assert np.allclose(np.exp(lp[0][:2]).sum(), 1.0)
    assert lp[0][2] == -np.inf
    assert np.allclose(np.exp(lp[1]), 1 / 3)


def test_greedy_action_respects_mask():
    params = MlpParams(weights=[np.eye(3)], biases=[np.zeros(3)])
    obs = np.array([5.0, 10.0, 1.0])
    assert greedy_action(params, obs, np.array([True, True, True])) == 1
    assert greedy_action(params, obs, np.array([True, False, True])) == 0


def test_adam_moves_toward_minimum():
    params = MlpParams(weights=[np.array([[4.0]])], biases=[np.array([0.0])])
    opt = Adam(params, lr=0.1)
    for _ in range(500):
        w = params.weights[0][0, 0]
        opt.step([np.array([[2 * w]])], [np.array([0.0])])  # d(w^2)/dw
    assert abs(params.weights[0][0, 0]) < 1e-2


def test_model_roundtrip_bitwise(tmp_path):
    params = init_mlp([5, 16, 16, 4], rng_(33))
    path = tmp_path / "model.json"
    save_model(params, path)
    loaded = load_model(path)
    assert loaded.dims() == params.dims()
    for a, b in zip(loaded.weights + loaded.biases, params.weights + params.biases):
        assert np.array_equal(a, b)


def test_model_roundtrip_behavioral(tmp_path):
    rng = rng_(44)
    params = init_mlp([6, 16, 16, 3], rng)
    path = tmp_path / "model.json"
    save_model(params, path)
    loaded = load_model(path)
    mask = np.array([True, True, True])
    for _ in range(100):
        obs = rng.standard_normal(6)
        assert greedy_action(params, obs, mask) == greedy_action(loaded, obs, mask)


def test_model_truncated_file(tmp_path):
    params = init_mlp([3, 4, 2], rng_())
    path = tmp_path / "model.json"
    save_model(params, path)
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(ModelFormatError):
        load_model(path)


def test_model_version_mismatch(tmp_path):
    params = init_mlp([3, 4, 2], rng_())
    path = tmp_path / "model.json"
    save_model(params, path)
    text = path.read_text().replace('"version": 1', '"version": 99')
    path.write_text(text)
    with pytest.raises(ModelVersionError):
        load_model(path)


def test_model_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_model(tmp_path / "missing.json")
