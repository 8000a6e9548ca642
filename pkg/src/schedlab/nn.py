"""Small feed-forward networks with hand-written gradients, in float64.

The policy/value networks are plain affine->tanh stacks with an identity
output layer. Forward and backward passes are pure functions of the
parameters; the backward pass is reverse accumulation and is checked against
central finite differences in the test suite. Double precision keeps that
check tight.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ModelFormatError, ModelVersionError, NoValidActionError

MODEL_FORMAT_VERSION = 1


@dataclass
class MlpParams:
    """Weights and biases per layer; weights[l] has shape (d_l, d_{l+1})."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def num_layers(self) -> int:
        return len(self.weights)


def _orthogonal(rng: np.random.Generator, rows: int, cols: int, gain: float) -> np.ndarray:
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))  # make decomposition unique
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


def init_mlp(dims: list[int], rng: np.random.Generator, output_gain: float = 1.0) -> MlpParams:
    """Orthogonal init, gain sqrt(2) on hidden layers and output_gain on the last."""
    weights, biases = [], []
    for i in range(len(dims) - 1):
        gain = output_gain if i == len(dims) - 2 else np.sqrt(2.0)
        weights.append(_orthogonal(rng, dims[i], dims[i + 1], gain))
        biases.append(np.zeros(dims[i + 1]))
    return MlpParams(weights, biases)


def _check_input(params: MlpParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.weights[0].shape[0]:
        raise ValueError(
            f"input dim {x.shape[-1]} does not match network input {params.weights[0].shape[0]}"
        )
    return x


def mlp_forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """tanh hidden layers, identity output. Accepts a vector or a batch."""
    x = _check_input(params, x)
    h = x
    last = params.num_layers() - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i != last:
            h = np.tanh(h)
    return h


def _forward_cached(params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    # caches the post-activation of every layer (inputs to the next affine map)
    activations = [x]
    h = x
    last = params.num_layers() - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i != last:
            h = np.tanh(h)
        activations.append(h)
    return h, activations


def mlp_gradient(
    params: MlpParams, x: np.ndarray, upstream: np.ndarray
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Parameter gradients by reverse accumulation.

    ``upstream`` is dLoss/dOutput with the same shape as the forward output
    (any batch scaling belongs to the caller). Returns (weight grads, bias
    grads) shaped like the parameters.
    """
    x = _check_input(params, x)
    upstream = np.asarray(upstream, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
        upstream = upstream[None, :]
    out, acts = _forward_cached(params, x)
    if upstream.shape != out.shape:
        raise ValueError(f"upstream shape {upstream.shape} does not match output {out.shape}")

    n_layers = params.num_layers()
    grad_w: list[np.ndarray] = [np.empty(0)] * n_layers
    grad_b: list[np.ndarray] = [np.empty(0)] * n_layers
    delta = upstream
    for i in range(n_layers - 1, -1, -1):
        grad_w[i] = acts[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i].T) * (1.0 - acts[i] ** 2)
    return grad_w, grad_b


def masked_logits(params: MlpParams, obs: np.ndarray, mask: np.ndarray) -> np.ndarray:
    logits = mlp_forward(params, obs)
    return np.where(np.asarray(mask, dtype=bool), logits, -np.inf)


def masked_policy(params: MlpParams, obs: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Action probabilities: softmax over valid entries, exact zeros elsewhere."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise NoValidActionError("mask admits no valid action")
    logits = masked_logits(params, obs, mask)
    z = logits - logits.max(axis=-1, keepdims=True)
    expz = np.where(mask, np.exp(z), 0.0)
    return expz / expz.sum(axis=-1, keepdims=True)


def masked_log_probs(logits: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Log softmax over valid entries of (possibly batched) raw logits."""
    masks = np.asarray(masks, dtype=bool)
    neg = np.where(masks, logits, -np.inf)
    zmax = neg.max(axis=-1, keepdims=True)
    z = neg - zmax
    logsum = np.log(np.where(masks, np.exp(z), 0.0).sum(axis=-1, keepdims=True))
    return z - logsum


def greedy_action(params: MlpParams, obs: np.ndarray, mask: np.ndarray) -> int:
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise NoValidActionError("mask admits no valid action")
    return int(np.argmax(masked_logits(params, obs, mask)))


def sample_action(probs: np.ndarray, rng: np.random.Generator) -> int:
    cum = np.cumsum(probs)
    return int(np.searchsorted(cum, rng.random() * cum[-1], side="right").clip(0, len(probs) - 1))


class Adam:
    """Standard Adam over an MlpParams pytree; updates in place."""

    def __init__(self, params: MlpParams, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m_w = [np.zeros_like(w) for w in params.weights]
        self.v_w = [np.zeros_like(w) for w in params.weights]
        self.m_b = [np.zeros_like(b) for b in params.biases]
        self.v_b = [np.zeros_like(b) for b in params.biases]

    def step(self, grad_w: list[np.ndarray], grad_b: list[np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for i in range(self.params.num_layers()):
            for m, v, g, p in (
                (self.m_w[i], self.v_w[i], grad_w[i], self.params.weights[i]),
                (self.m_b[i], self.v_b[i], grad_b[i], self.params.biases[i]),
            ):
                m *= self.beta1
                m += (1.0 - self.beta1) * g
                v *= self.beta2
                v += (1.0 - self.beta2) * g * g
                p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


# ---------------------------------------------------------------------------
# Model files: self-describing JSON with exact float round-trip
# ---------------------------------------------------------------------------

def save_model(params: MlpParams, path: str | Path) -> None:
    payload = {
        "format": "mlp-params",
        "version": MODEL_FORMAT_VERSION,
        "dims": params.dims(),
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload), encoding="utf-8")


def load_model(path: str | Path) -> MlpParams:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"model file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: truncated or corrupt model file: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != "mlp-params":
        raise ModelFormatError(f"{path}: not a model file")
    if payload.get("version") != MODEL_FORMAT_VERSION:
        raise ModelVersionError(
            f"{path}: format version {payload.get('version')!r}, expected {MODEL_FORMAT_VERSION}"
        )
    try:
        dims = [int(d) for d in payload["dims"]]
        weights = [np.asarray(w, dtype=np.float64) for w in payload["weights"]]
        biases = [np.asarray(b, dtype=np.float64) for b in payload["biases"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed model payload: {exc!r}") from exc
    params = MlpParams(weights, biases)
    expected = [(dims[i], dims[i + 1]) for i in range(len(dims) - 1)]
    actual = [w.shape for w in weights]
    if actual != expected or [b.shape[0] for b in biases] != dims[1:]:
        raise ModelFormatError(f"{path}: dims {dims} do not match stored arrays")
    return params
