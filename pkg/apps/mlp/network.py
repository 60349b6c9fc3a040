# apps/mlp/network.py
"""
Feedforward student network trained by plain mini-batch gradient descent.

Hidden layers are affine + ReLU with inverted dropout at train time; the
output layer is linear (embedding targets) or sigmoid (indicator targets).
Loss is the mean over rows of the squared error summed over outputs.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import expit

from apps.core.exceptions import ArgumentError, DimensionMismatchError, DivergenceError
from apps.dataset.matrices import as_dense_matrix

logger = logging.getLogger('compressive_mbn.mlp')

LINEAR = 'linear'
SIGMOID = 'sigmoid'
RELU = 'relu'
OUTPUT_ACTIVATIONS = (LINEAR, SIGMOID)

TRAIN = 'train'
INFER = 'infer'

ABSOLUTE_FALLBACK = 1e-8


@dataclass(frozen=True)
class MlpConfig:
    layer_sizes: Tuple[int, ...]
    output_activation: str = LINEAR
    dropout_rate: float = 0.2
    learning_rate: float = 0.001
    batch_size: int = 32
    epochs: int = 120
    seed: int = 0
    hidden_activation: str = RELU

    def __post_init__(self):
        sizes = tuple(int(size) for size in self.layer_sizes)
        object.__setattr__(self, 'layer_sizes', sizes)
        if len(sizes) < 2 or any(size < 1 for size in sizes):
            raise ArgumentError(f"layer_sizes needs at least two positive sizes, got {list(sizes)}")
        if self.hidden_activation != RELU:
            raise ArgumentError(f"hidden_activation must be {RELU!r}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ArgumentError(
                f"output_activation must be one of {OUTPUT_ACTIVATIONS}, got {self.output_activation!r}"
            )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ArgumentError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if not self.learning_rate > 0:
            raise ArgumentError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ArgumentError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ArgumentError(f"epochs cannot be negative, got {self.epochs}")

    @property
    def input_size(self):
        return self.layer_sizes[0]

    @property
    def output_size(self):
        return self.layer_sizes[-1]

    def to_dict(self):
        return {
            'layer_sizes': list(self.layer_sizes),
            'hidden_activation': self.hidden_activation,
            'output_activation': self.output_activation,
            'dropout_rate': self.dropout_rate,
            'learning_rate': self.learning_rate,
            'batch_size': self.batch_size,
            'epochs': self.epochs,
            'seed': self.seed,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


@dataclass(frozen=True, eq=False)
class MlpModel:
    """weights[l] has shape layer_sizes[l+1] x layer_sizes[l]"""

    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]
    config: MlpConfig

    def __post_init__(self):
        weights = tuple(np.array(w, dtype=np.float64) for w in self.weights)
        biases = tuple(np.array(b, dtype=np.float64) for b in self.biases)
        sizes = self.config.layer_sizes
        if len(weights) != len(sizes) - 1 or len(biases) != len(weights):
            raise ArgumentError("one weight matrix and bias vector per layer transition")
        for index, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (sizes[index + 1], sizes[index]) or b.shape != (sizes[index + 1],):
                raise ArgumentError(f"layer {index + 1} parameters do not match layer_sizes")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ArgumentError(f"layer {index + 1} parameters are not finite")
            w.setflags(write=False)
            b.setflags(write=False)
        object.__setattr__(self, 'weights', weights)
        object.__setattr__(self, 'biases', biases)

    @property
    def n_parameters(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def __eq__(self, other):
        if not isinstance(other, MlpModel):
            return NotImplemented
        return (
            self.config == other.config
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases))
        )


@dataclass(frozen=True)
class TrainTrace:
    epoch_losses: List[float] = field(default_factory=list)

    @property
    def epochs(self):
        return len(self.epoch_losses)


@dataclass
class ForwardTrace:
    """Per-layer values kept for backpropagation"""

    layer_inputs: List[np.ndarray]
    hidden_outputs: List[np.ndarray]
    dropout_scales: List[Optional[np.ndarray]]
    output: np.ndarray


def init_mlp(config, rng):
    """Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases"""
    weights, biases = [], []
    for fan_in, fan_out in zip(config.layer_sizes, config.layer_sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights=tuple(weights), biases=tuple(biases), config=config)


def _check_input(model, x):
    x = as_dense_matrix(x, 'MLP input')
    if x.shape[1] != model.config.input_size:
        raise DimensionMismatchError('MLP input', model.config.input_size, x.shape[1])
    return x


def _output_activation(z, kind):
    return expit(z) if kind == SIGMOID else z


def _forward(weights, biases, x, output_activation, dropout_rate=0.0, rng=None):
    layer_inputs, hidden_outputs, scales = [], [], []
    current = x
    last = len(weights) - 1
    for index, (w, b) in enumerate(zip(weights, biases)):
        layer_inputs.append(current)
        z = current @ w.T + b
        if index == last:
            return ForwardTrace(layer_inputs, hidden_outputs, scales, _output_activation(z, output_activation))
        hidden = np.maximum(z, 0.0)
        hidden_outputs.append(hidden)
        if rng is not None and dropout_rate > 0.0:
            scale = (rng.random(hidden.shape) >= dropout_rate) / (1.0 - dropout_rate)
            scales.append(scale)
            current = hidden * scale
        else:
            scales.append(None)
            current = hidden


def forward_trace(model, x, mode=INFER, rng=None):
    """Forward pass keeping every layer's input, ReLU output and dropout scale"""
    x = _check_input(model, x)
    if mode == TRAIN:
        if rng is None:
            raise ArgumentError("train mode needs an rng for the dropout masks")
        return _forward(model.weights, model.biases, x, model.config.output_activation,
                        model.config.dropout_rate, rng)
    if mode != INFER:
        raise ArgumentError(f"mode must be {TRAIN!r} or {INFER!r}, got {mode!r}")
    return _forward(model.weights, model.biases, x, model.config.output_activation)


def forward(model, x, mode=INFER, rng=None):
    return forward_trace(model, x, mode, rng).output


def predict(model, x):
    """Inference-mode forward pass: no dropout mask, no scaling"""
    return forward(model, x, INFER)


def mse_loss(prediction, target):
    """Mean over rows of the squared error summed over outputs"""
    residual = prediction - target
    return float(np.einsum('ij,ij->', residual, residual) / max(prediction.shape[0], 1))


def _backward(weights, trace, target, output_activation):
    """Gradients of mse_loss with respect to every weight and bias"""
    n = target.shape[0]
    output = trace.output
    delta = 2.0 * (output - target) / n
    if output_activation == SIGMOID:
        delta = delta * output * (1.0 - output)

    grad_w = [None] * len(weights)
    grad_b = [None] * len(weights)
    for index in range(len(weights) - 1, -1, -1):
        grad_w[index] = delta.T @ trace.layer_inputs[index]
        grad_b[index] = delta.sum(axis=0)
        if index == 0:
            break
        upstream = delta @ weights[index]
        scale = trace.dropout_scales[index - 1]
        if scale is not None:
            upstream = upstream * scale
        delta = upstream * (trace.hidden_outputs[index - 1] > 0.0)
    return grad_w, grad_b


def loss_and_gradients(model, x, y):
    """Loss and exact gradients with dropout disabled"""
    trace = _forward(model.weights, model.biases, x, model.config.output_activation)
    grad_w, grad_b = _backward(model.weights, trace, y, model.config.output_activation)
    return mse_loss(trace.output, y), grad_w, grad_b


def _check_targets(model, x, y):
    x = _check_input(model, x)
    y = as_dense_matrix(y, 'MLP targets')
    if y.shape[0] != x.shape[0]:
        raise DimensionMismatchError('MLP target rows', x.shape[0], y.shape[0])
    if y.shape[1] != model.config.output_size:
        raise DimensionMismatchError('MLP targets', model.config.output_size, y.shape[1])
    return x, y


def train_mlp(x, y, config):
    """
    Fit the network to (x, y) by mini-batch gradient descent at a fixed
    learning rate. Rows are reshuffled every epoch and the last short batch is
    kept. Initialization, shuffling and dropout all draw from one rng seeded
    by config.seed.
    """
    rng = np.random.default_rng(config.seed)
    model = init_mlp(config, rng)
    x, y = _check_targets(model, x, y)
    if config.epochs == 0:
        return model, TrainTrace([])

    weights = [w.copy() for w in model.weights]
    biases = [b.copy() for b in model.biases]
    n = x.shape[0]
    losses = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            trace = _forward(weights, biases, x[batch], config.output_activation, config.dropout_rate, rng)
            total += mse_loss(trace.output, y[batch]) * batch.size
            grad_w, grad_b = _backward(weights, trace, y[batch], config.output_activation)
            for index in range(len(weights)):
                weights[index] -= config.learning_rate * grad_w[index]
                biases[index] -= config.learning_rate * grad_b[index]

        epoch_loss = total / max(n, 1)
        if not np.isfinite(epoch_loss):
            raise DivergenceError(epoch, epoch_loss)
        losses.append(epoch_loss)
        if epoch == 1 or epoch % 10 == 0 or epoch == config.epochs:
            logger.info(f"Epoch {epoch}/{config.epochs}: mean loss {epoch_loss:.6g}")
        else:
            logger.debug(f"Epoch {epoch}/{config.epochs}: mean loss {epoch_loss:.6g}")

    for index in range(len(weights)):
        if not (np.all(np.isfinite(weights[index])) and np.all(np.isfinite(biases[index]))):
            raise DivergenceError(config.epochs, float('nan'))

    trained = MlpModel(weights=tuple(weights), biases=tuple(biases), config=config)
    return trained, TrainTrace(losses)


def grad_check(model, x, y, epsilon=1e-5, n_samples=100, seed=0):
    """
    Largest disagreement between backpropagated gradients and central finite
    differences over randomly sampled parameters (all parameters when there
    are fewer than n_samples). Relative error |a - n| / max(|a|, |n|), or the
    absolute difference when both are below 1e-8. Dropout is disabled.
    """
    x, y = _check_targets(model, x, y)
    weights = [w.copy() for w in model.weights]
    biases = [b.copy() for b in model.biases]
    activation = model.config.output_activation

    trace = _forward(weights, biases, x, activation)
    grad_w, grad_b = _backward(weights, trace, y, activation)

    params = []
    analytic = []
    for w, b, gw, gb in zip(weights, biases, grad_w, grad_b):
        params.extend([w, b])
        analytic.extend([gw, gb])
    sizes = np.array([p.size for p in params])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])

    rng = np.random.default_rng(seed)
    picks = np.arange(total) if total <= n_samples else np.sort(rng.choice(total, n_samples, replace=False))

    def loss():
        return mse_loss(_forward(weights, biases, x, activation).output, y)

    worst = 0.0
    for flat in picks:
        which = int(np.searchsorted(offsets, flat, side='right') - 1)
        position = np.unravel_index(flat - offsets[which], params[which].shape)
        original = params[which][position]
        params[which][position] = original + epsilon
        plus = loss()
        params[which][position] = original - epsilon
        minus = loss()
        params[which][position] = original

        numeric = (plus - minus) / (2.0 * epsilon)
        exact = float(analytic[which][position])
        scale = max(abs(numeric), abs(exact))
        error = abs(numeric - exact) if scale < ABSOLUTE_FALLBACK else abs(numeric - exact) / scale
        worst = max(worst, error)
    return worst
