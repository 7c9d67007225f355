"""Small fully-connected network: 10 inputs -> ReLU hidden layers -> 8-way
softmax with cross-entropy loss, trained by mini-batch gradient descent
with momentum. Inputs are standardized with statistics kept in the params.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError


@dataclass
class MlpParams:
    mu: np.ndarray
    sd: np.ndarray
    weights: list[np.ndarray]  # per layer, (fan_in, fan_out)
    biases: list[np.ndarray]

    def equals(self, other: "MlpParams") -> bool:
        return (
            np.array_equal(self.mu, other.mu)
            and np.array_equal(self.sd, other.sd)
            and len(self.weights) == len(other.weights)
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases))
        )

    @property
    def layer_dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]


def init_mlp(
    n_features: int,
    hidden: tuple[int, ...],
    n_classes: int,
    seed: int,
    mu: np.ndarray | None = None,
    sd: np.ndarray | None = None,
) -> MlpParams:
    """He-initialized parameters (deterministic per seed)."""
    rng = np.random.default_rng(seed)
    dims = [n_features, *hidden, n_classes]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(
        mu=np.zeros(n_features) if mu is None else mu,
        sd=np.ones(n_features) if sd is None else sd,
        weights=weights,
        biases=biases,
    )


def _forward(params: MlpParams, X: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Logits plus post-activation values per layer (inputs first)."""
    a = (np.asarray(X, dtype=np.float64) - params.mu) / params.sd
    activations = [a]
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w + b
        a = z if i == last else np.maximum(z, 0.0)
        activations.append(a)
    return activations[-1], activations


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_gradients(
    params: MlpParams, X: np.ndarray, y: np.ndarray
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Mean cross-entropy over the batch and gradients for every layer."""
    n = X.shape[0]
    logits, acts = _forward(params, X)
    probs = _softmax(logits)
    loss = float(-np.mean(np.log(np.maximum(probs[np.arange(n), y], 1e-300))))
    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads_w: list[np.ndarray] = [None] * len(params.weights)
    grads_b: list[np.ndarray] = [None] * len(params.weights)
    for i in range(len(params.weights) - 1, -1, -1):
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i].T) * (acts[i] > 0.0)
    return loss, grads_w, grads_b


def train_mlp(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    hidden: tuple[int, ...] = (16,),
    epochs: int = 60,
    learning_rate: float = 0.05,
    batch_size: int = 32,
    momentum: float = 0.9,
    seed: int = 0,
) -> MlpParams:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2:
        raise InvalidInputError("X must be 2-D")
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    params = init_mlp(X.shape[1], hidden, n_classes, seed, mu=mu, sd=sd)
    rng = np.random.default_rng(seed + 1)
    vel_w = [np.zeros_like(w) for w in params.weights]
    vel_b = [np.zeros_like(b) for b in params.biases]
    n = X.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = order[start : start + batch_size]
            _, gw, gb = loss_and_gradients(params, X[batch], y[batch])
            for i in range(len(params.weights)):
                vel_w[i] = momentum * vel_w[i] - learning_rate * gw[i]
                vel_b[i] = momentum * vel_b[i] - learning_rate * gb[i]
                params.weights[i] = params.weights[i] + vel_w[i]
                params.biases[i] = params.biases[i] + vel_b[i]
    return params


def mlp_logits(params: MlpParams, X: np.ndarray) -> np.ndarray:
    return _forward(params, X)[0]


def mlp_predict(params: MlpParams, X: np.ndarray) -> np.ndarray:
    return np.argmax(mlp_logits(params, X), axis=1)


def mlp_confidence(params: MlpParams, X: np.ndarray) -> np.ndarray:
    """Winning softmax probability per row."""
    return _softmax(mlp_logits(params, X)).max(axis=1)


def flatten_params(params: MlpParams) -> np.ndarray:
    return np.concatenate(
        [w.ravel() for w in params.weights] + [b.ravel() for b in params.biases]
    )


def unflatten_params(params: MlpParams, flat: np.ndarray) -> MlpParams:
    weights, biases = [], []
    pos = 0
    for w in params.weights:
        weights.append(flat[pos : pos + w.size].reshape(w.shape).copy())
        pos += w.size
    for b in params.biases:
        biases.append(flat[pos : pos + b.size].reshape(b.shape).copy())
        pos += b.size
    return MlpParams(mu=params.mu, sd=params.sd, weights=weights, biases=biases)
