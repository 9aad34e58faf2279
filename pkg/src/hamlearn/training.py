"""Loss functions and Adam training for both network flavors.

The conventional flavor regresses the forward outputs onto the derivative
targets. The Hamiltonian flavor never compares outputs directly: its loss
lives on the input-gradient of the scalar output, mapped through Hamilton's
recipe (qdot = dH/dp, pdot = -dH/dq), so the weight gradient is a true
mixed second derivative. Both gradients are computed in closed form by the
compiled kernels and are held to match finite differences and the
expression-graph engine in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels, mlp
from .dataset import TrainingPair, stack_pairs
from .mlp import MlpParams, NetSpec


class TrainingError(RuntimeError):
    """Training aborted on a non-finite loss."""


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 1e-3
    batch_size: int = 1
    epochs: int = 16
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")


@dataclass(frozen=True)
class AdamState:
    """First/second moment estimates plus the bias-correction step count."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(m=np.zeros(n), v=np.zeros(n), step=0)


@dataclass(frozen=True)
class TrainReport:
    """Final parameters plus the per-epoch mean cost trace."""

    params: MlpParams
    epoch_costs: np.ndarray
    total_inputs: int    # epochs * number of pairs


def _check_flavor(params_or_spec, pair_flavor: str) -> None:
    out, inp = params_or_spec.output_dim, params_or_spec.input_dim
    if pair_flavor == "nn" and out != inp:
        raise ValueError(f"nn pairs need output_dim == input_dim, got {out} != {inp}")
    if pair_flavor == "hnn" and out != 1:
        raise ValueError(f"hnn pairs need a scalar-output network, got output_dim={out}")


def nn_loss(params: MlpParams, pair: TrainingPair) -> float:
    """Squared error between forward outputs and (qdot, qddot) targets."""
    if pair.flavor != "nn":
        raise ValueError(f"nn_loss got a {pair.flavor!r} pair")
    _check_flavor(params, "nn")
    out = mlp.forward(params, pair.input)
    return float(np.sum((pair.target - out) ** 2))


def hnn_loss(params: MlpParams, pair: TrainingPair) -> float:
    """Squared error between the Hamilton-recipe field of the scalar output
    and the (qdot, pdot) targets. Constant shifts of the output are
    invisible here: only the gradient enters."""
    if pair.flavor != "hnn":
        raise ValueError(f"hnn_loss got a {pair.flavor!r} pair")
    _check_flavor(params, "hnn")
    g = mlp.input_gradient(params, pair.input)
    d = params.input_dim // 2
    qdot = g[d:]
    pdot = -g[:d]
    return float(np.sum((pair.target[:d] - qdot) ** 2)
                 + np.sum((pair.target[d:] - pdot) ** 2))


def loss_gradient(params: MlpParams, pair: TrainingPair) -> tuple[float, np.ndarray]:
    """Loss and exact flat weight-gradient (pack order) for one pair."""
    _check_flavor(params, pair.flavor)
    flavor = _kernels.NN if pair.flavor == "nn" else _kernels.HNN
    sizes = np.asarray(params.layer_sizes, dtype=np.int64)
    theta = mlp.pack(params)
    x = np.asarray(pair.input, dtype=np.float64)
    y = np.asarray(pair.target, dtype=np.float64)
    return _kernels.pair_loss_gradient(flavor, theta, sizes, x, y)


def adam_step(theta: np.ndarray, grad: np.ndarray, state: AdamState,
              config: OptimizerConfig) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update on a flat parameter vector."""
    if theta.shape != grad.shape:
        raise ValueError("theta and grad shapes differ")
    t = state.step + 1
    m = config.beta1 * state.m + (1.0 - config.beta1) * grad
    v = config.beta2 * state.v + (1.0 - config.beta2) * grad * grad
    m_hat = m / (1.0 - config.beta1 ** t)
    v_hat = v / (1.0 - config.beta2 ** t)
    new_theta = theta - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps)
    return new_theta, AdamState(m=m, v=v, step=t)


def train(spec: NetSpec, pairs, config: OptimizerConfig) -> TrainReport:
    """Run the full optimization: `epochs` passes over a per-epoch reshuffle
    of the pairs, updating after every `batch_size` pairs.

    The visit order for epoch e is drawn from a generator seeded with
    (config.seed, e), so a report is a pure function of (spec, pairs,
    config). Raises TrainingError with step context if a loss goes
    non-finite.
    """
    flavor_tag, X, Y = stack_pairs(pairs)
    _check_flavor(spec, flavor_tag)
    if spec.input_dim != X.shape[1]:
        raise ValueError(
            f"pairs have {X.shape[1]} input columns, spec expects {spec.input_dim}"
        )
    flavor = _kernels.NN if flavor_tag == "nn" else _kernels.HNN
    sizes = np.asarray(spec.layer_sizes, dtype=np.int64)

    params0 = mlp.init_params(spec)
    theta = mlp.pack(params0)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    t = 0
    n = X.shape[0]
    epoch_costs = np.empty(config.epochs)
    for epoch in range(config.epochs):
        order = np.random.default_rng((config.seed, epoch)).permutation(n)
        cost, t, bad = _kernels.run_epoch(
            flavor, theta, m, v, sizes, X, Y, order.astype(np.int64),
            config.batch_size, config.learning_rate, config.beta1,
            config.beta2, config.eps, t,
        )
        if bad >= 0:
            raise TrainingError(
                f"non-finite loss at epoch {epoch}, pair {int(order[bad])}"
            )
        epoch_costs[epoch] = cost
    params = mlp.unpack(theta, spec.layer_sizes, seed=spec.seed)
    return TrainReport(params=params, epoch_costs=epoch_costs,
                       total_inputs=config.epochs * n)


def write_report_csv(report: TrainReport, path, header_lines=()) -> None:
    """Per-epoch cost trace: epoch, mean_cost."""
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("epoch,mean_cost\n")
        for e, c in enumerate(report.epoch_costs):
            fh.write(f"{e},{repr(float(c))}\n")
