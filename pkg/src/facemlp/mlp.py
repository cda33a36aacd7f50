"""Feed-forward sigmoid network trained by batch gradient descent.

All units are logistic, targets are 0/1 encoded, and the loss is the mean
squared error over every output component of every sample. Updates use the
full batch plus a momentum term, so a run is fully determined by the
topology, the batch, and the config (including its seed).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, Diverged, InvalidConfig

# Full-scale experiment defaults; desk-scale runs override both.
DEFAULT_GOAL = 1e-6
DEFAULT_MAX_EPOCHS = 700_000


@dataclass(frozen=True)
class Topology:
    """Layer sizes from input to output, e.g. (40, 20, 1)."""

    layer_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2:
            raise InvalidConfig("topology needs at least input and output layers")
        if any(s < 1 for s in sizes):
            raise InvalidConfig(f"layer sizes must be >= 1, got {sizes}")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_size(self) -> int:
        return self.layer_sizes[-1]


@dataclass(eq=False)
class Weights:
    """Per-layer weight matrices (fan_out x fan_in) and bias vectors."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],
                *(w.shape[0] for w in self.weights))

    def copy(self) -> Weights:
        return Weights([w.copy() for w in self.weights],
                       [b.copy() for b in self.biases])


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 0.05
    momentum: float = 0.9
    goal: float = DEFAULT_GOAL
    max_epochs: int = DEFAULT_MAX_EPOCHS
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise InvalidConfig("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise InvalidConfig("momentum must lie in [0, 1)")
        if self.goal <= 0:
            raise InvalidConfig("goal must be positive")
        if self.max_epochs < 1:
            raise InvalidConfig("max_epochs must be >= 1")


@dataclass
class TrainingTrace:
    """Record of one training run.

    mse_history[i] is the batch MSE after update i+1, so its length equals
    epochs_run and its last entry equals final_mse. goal and max_epochs echo
    the config the run was given.
    """

    epochs_run: int
    final_mse: float
    goal_met: bool
    wall_time: float
    goal: float
    max_epochs: int
    mse_history: list[float] = field(default_factory=list)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # exp may overflow for very negative z; the result saturates to 0 exactly.
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def init_weights(topology: Topology, seed: int) -> Weights:
    """Draw weights uniformly from [-1/sqrt(fan_in), +1/sqrt(fan_in)].

    Biases start at zero. The same (topology, seed) always yields the same
    weights.
    """
    rng = np.random.default_rng(seed)
    ws, bs = [], []
    sizes = topology.layer_sizes
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        ws.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        bs.append(np.zeros(fan_out))
    return Weights(ws, bs)


def forward(weights: Weights, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Run one vector through the net.

    Returns (output, activations) where activations[0] is the input and
    activations[-1] the output layer.
    """
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 1 or a.shape[0] != weights.weights[0].shape[1]:
        raise DimensionMismatch(
            f"input length {a.shape} does not match net input "
            f"{weights.weights[0].shape[1]}"
        )
    acts = [a]
    for w, b in zip(weights.weights, weights.biases):
        a = _sigmoid(w @ a + b)
        acts.append(a)
    return a, acts


def _stack_batch(batch, in_size: int, out_size: int) -> tuple[np.ndarray, np.ndarray]:
    if not batch:
        raise ValueError("batch is empty")
    xs, ts = [], []
    for x, t in batch:
        x = np.asarray(x, dtype=np.float64)
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        if x.shape != (in_size,):
            raise DimensionMismatch(f"sample shape {x.shape}, expected ({in_size},)")
        if t.shape != (out_size,):
            raise DimensionMismatch(f"target shape {t.shape}, expected ({out_size},)")
        xs.append(x)
        ts.append(t)
    return np.vstack(xs), np.vstack(ts)


def _forward_batch(weights: Weights, x: np.ndarray) -> list[np.ndarray]:
    acts = [x]
    for w, b in zip(weights.weights, weights.biases):
        x = _sigmoid(x @ w.T + b)
        acts.append(x)
    return acts


def _backprop(weights: Weights, acts: list[np.ndarray],
              targets: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Exact MSE gradient from activations that match the current weights."""
    n, out = targets.shape
    out_act = acts[-1]
    delta = (2.0 / (n * out)) * (out_act - targets) * out_act * (1.0 - out_act)
    grads_w: list[np.ndarray] = [None] * len(weights.weights)
    grads_b: list[np.ndarray] = [None] * len(weights.biases)
    for layer in range(len(weights.weights) - 1, -1, -1):
        grads_w[layer] = delta.T @ acts[layer]
        grads_b[layer] = delta.sum(axis=0)
        if layer:
            prev = acts[layer]
            delta = (delta @ weights.weights[layer]) * prev * (1.0 - prev)
    return grads_w, grads_b


def gradients(weights: Weights,
              batch: list[tuple[np.ndarray, np.ndarray]]) -> Weights:
    """Gradient of the batch MSE with respect to every weight and bias.

    The result reuses the Weights container, holding d(loss)/dW and
    d(loss)/db in place of the parameters.
    """
    sizes = weights.layer_sizes
    x, t = _stack_batch(batch, sizes[0], sizes[-1])
    acts = _forward_batch(weights, x)
    gw, gb = _backprop(weights, acts, t)
    return Weights(gw, gb)


def mse(outputs, targets) -> float:
    """Mean squared error over all samples and output components."""
    if len(outputs) != len(targets):
        raise DimensionMismatch(
            f"{len(outputs)} outputs vs {len(targets)} targets"
        )
    if not outputs:
        raise ValueError("empty output list")
    total = 0.0
    count = 0
    for y, t in zip(outputs, targets):
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        if y.shape != t.shape:
            raise DimensionMismatch(f"output {y.shape} vs target {t.shape}")
        total += float(np.sum((y - t) ** 2))
        count += y.size
    return total / count


def train(topology: Topology, batch, config: TrainingConfig) -> tuple[Weights, TrainingTrace]:
    """Train a fresh network on the batch.

    Weights start from init_weights(topology, config.seed). Every epoch
    applies one momentum update from the full-batch gradient, then measures
    the MSE of the updated network; training stops at the first epoch whose
    MSE drops below config.goal, or after config.max_epochs updates.

    Raises Diverged (with the epoch number) if the MSE stops being finite.
    """
    x, t = _stack_batch(batch, topology.input_size, topology.output_size)
    weights = init_weights(topology, config.seed)
    step_w = [np.zeros_like(w) for w in weights.weights]
    step_b = [np.zeros_like(b) for b in weights.biases]

    started = time.perf_counter()
    acts = _forward_batch(weights, x)
    history: list[float] = []
    met = False
    for epoch in range(1, config.max_epochs + 1):
        gw, gb = _backprop(weights, acts, t)
        for i in range(len(step_w)):
            step_w[i] = config.momentum * step_w[i] - config.learning_rate * gw[i]
            step_b[i] = config.momentum * step_b[i] - config.learning_rate * gb[i]
            weights.weights[i] += step_w[i]
            weights.biases[i] += step_b[i]
        acts = _forward_batch(weights, x)
        # On a diverging run the squared error overflows to inf; that is the
        # signal we detect, not a fault worth a warning.
        with np.errstate(over="ignore"):
            current = float(np.mean((acts[-1] - t) ** 2))
        history.append(current)
        if not math.isfinite(current):
            raise Diverged(epoch)
        if current < config.goal:
            met = True
            break

    trace = TrainingTrace(
        epochs_run=len(history),
        final_mse=history[-1],
        goal_met=met,
        wall_time=time.perf_counter() - started,
        goal=config.goal,
        max_epochs=config.max_epochs,
        mse_history=history,
    )
    return weights, trace
