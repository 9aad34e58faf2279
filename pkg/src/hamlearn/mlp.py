"""Fixed-topology tanh multilayer perceptron.

Hidden layers apply tanh; the final layer is affine so the output can range
over arbitrary energies. Parameters are immutable once created: training
steps produce new vectors rather than mutating shared state, which is what
makes concurrent forward passes safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import exprgraph
from .exprgraph import Expr, Var

_FORMAT_TAG = "hamlearn-mlp v1"


@dataclass(frozen=True)
class NetSpec:
    """Network topology plus the init seed that fully determines the weights."""

    input_dim: int
    output_dim: int
    hidden_layers: int = 2
    width: int = 32
    activation: str = "tanh"
    seed: int = 0

    def __post_init__(self):
        if self.input_dim < 1 or self.width < 1 or self.hidden_layers < 1:
            raise ValueError("input_dim, width and hidden_layers must be >= 1")
        if self.output_dim not in (1, self.input_dim):
            raise ValueError(
                f"output_dim must be 1 or input_dim, got {self.output_dim}"
            )
        if self.activation != "tanh":
            raise ValueError(f"unsupported activation {self.activation!r}")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.input_dim,) + (self.width,) * self.hidden_layers + (self.output_dim,)


@dataclass(frozen=True)
class MlpParams:
    """Per-layer weight matrices and bias vectors, read-only."""

    weights: tuple  # of (n_out, n_in) float64 arrays
    biases: tuple   # of (n_out,) float64 arrays
    seed: int = 0
    activation: str = "tanh"

    def __post_init__(self):
        for w, b in zip(self.weights, self.biases):
            if w.shape[0] != b.shape[0]:
                raise ValueError("weight/bias shape mismatch")
        for prev, nxt in zip(self.weights, self.weights[1:]):
            if nxt.shape[1] != prev.shape[0]:
                raise ValueError("layer shapes do not chain")
        for arr in (*self.weights, *self.biases):
            if not np.all(np.isfinite(arr)):
                raise ValueError("parameters must be finite")
            arr.flags.writeable = False

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


def init_params(spec: NetSpec) -> MlpParams:
    """Seeded Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases."""
    rng = np.random.default_rng(spec.seed)
    sizes = spec.layer_sizes
    weights = []
    biases = []
    for n_in, n_out in zip(sizes, sizes[1:]):
        bound = np.sqrt(6.0 / (n_in + n_out))
        weights.append(rng.uniform(-bound, bound, size=(n_out, n_in)))
        biases.append(np.zeros(n_out))
    return MlpParams(weights=tuple(weights), biases=tuple(biases), seed=spec.seed)


def forward(params: MlpParams, x) -> np.ndarray:
    """Evaluate the network at one input vector."""
    a = np.asarray(x, dtype=np.float64)
    if a.shape != (params.input_dim,):
        raise ValueError(
            f"input has shape {a.shape}, expected ({params.input_dim},)"
        )
    n = len(params.weights)
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = w @ a + b
        a = z if l == n - 1 else np.tanh(z)
    return a


def input_gradient(params: MlpParams, x) -> np.ndarray:
    """Exact gradient of a scalar-output network with respect to its input."""
    if params.output_dim != 1:
        raise ValueError(
            "input_gradient requires a scalar-output network, "
            f"got output_dim={params.output_dim}"
        )
    a = np.asarray(x, dtype=np.float64)
    if a.shape != (params.input_dim,):
        raise ValueError(
            f"input has shape {a.shape}, expected ({params.input_dim},)"
        )
    activations = []
    n = len(params.weights)
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = w @ a + b
        if l < n - 1:
            a = np.tanh(z)
            activations.append(a)
    # reverse pass: delta over the last hidden layer is the output weight row
    delta = params.weights[-1][0] * (1.0 - activations[-1] ** 2)
    for l in range(n - 2, 0, -1):
        delta = (params.weights[l].T @ delta) * (1.0 - activations[l - 1] ** 2)
    return params.weights[0].T @ delta


def pack(params: MlpParams) -> np.ndarray:
    """Flatten to the canonical vector layout: per layer, weights row-major
    then biases. This is the layout the training kernels and the file format
    share."""
    chunks = []
    for w, b in zip(params.weights, params.biases):
        chunks.append(w.ravel())
        chunks.append(b)
    return np.concatenate(chunks)


def unpack(vector, layer_sizes, seed: int = 0) -> MlpParams:
    vector = np.asarray(vector, dtype=np.float64)
    need = sum(o * i + o for i, o in zip(layer_sizes, layer_sizes[1:]))
    if vector.size != need:
        raise ValueError(
            f"vector has {vector.size} entries, layout needs {need}"
        )
    weights = []
    biases = []
    pos = 0
    for n_in, n_out in zip(layer_sizes, layer_sizes[1:]):
        w = vector[pos:pos + n_out * n_in].reshape(n_out, n_in).copy()
        pos += n_out * n_in
        b = vector[pos:pos + n_out].copy()
        pos += n_out
        weights.append(w)
        biases.append(b)
    return MlpParams(weights=tuple(weights), biases=tuple(biases), seed=seed)


def save_params(params: MlpParams, path) -> None:
    """Write to the documented text format; round-trips bit-exactly.

    Layout: a tag line, then layer_sizes / activation / seed header lines,
    then one coefficient per line in pack() order. Floats are written with
    repr, whose shortest-round-trip guarantee makes the file exact.
    """
    lines = [
        _FORMAT_TAG,
        "layer_sizes: " + ",".join(str(s) for s in params.layer_sizes),
        f"activation: {params.activation}",
        f"seed: {params.seed}",
        "data:",
    ]
    lines.extend(repr(float(v)) for v in pack(params))
    Path(path).write_text("\n".join(lines) + "\n")


def load_params(path) -> MlpParams:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != _FORMAT_TAG:
        raise ValueError(f"{path}: not a {_FORMAT_TAG} file")
    header = {}
    data_at = None
    for i, line in enumerate(lines[1:], start=1):
        if line == "data:":
            data_at = i + 1
            break
        key, _, value = line.partition(":")
        header[key.strip()] = value.strip()
    if data_at is None:
        raise ValueError(f"{path}: missing data section")
    layer_sizes = tuple(int(s) for s in header["layer_sizes"].split(","))
    if header.get("activation", "tanh") != "tanh":
        raise ValueError(f"{path}: unsupported activation")
    seed = int(header.get("seed", "0"))
    values = np.array([float(v) for v in lines[data_at:] if v], dtype=np.float64)
    return unpack(values, layer_sizes, seed=seed)


@dataclass(frozen=True)
class NetworkGraph:
    """Expression-graph view of a network, for exactness cross-checks."""

    outputs: tuple          # Expr per output component
    input_vars: tuple       # Var per input coordinate
    weight_vars: tuple      # Var per parameter in pack() order (may be empty)
    weight_values: np.ndarray = field(default=None)


def network_expression(params: MlpParams, weights_as_variables: bool = False) -> NetworkGraph:
    """Build the network as an expression graph.

    With weights_as_variables=True every parameter becomes a Var (pack()
    order), so gradients with respect to the weights, including the nested
    ones inside a gradient-based loss, can be taken symbolically.
    """
    input_vars = tuple(Var(f"x{j}") for j in range(params.input_dim))
    weight_vars: list[Var] = []

    act: list[Expr] = list(input_vars)
    n = len(params.weights)
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        if weights_as_variables:
            # pack() order within a layer: weights row-major, then biases
            w_nodes = [[Var(f"w{l}_{i}_{j}") for j in range(w.shape[1])]
                       for i in range(w.shape[0])]
            b_nodes = [Var(f"b{l}_{i}") for i in range(w.shape[0])]
            for row in w_nodes:
                weight_vars.extend(row)
            weight_vars.extend(b_nodes)
        else:
            w_nodes = [[exprgraph.Const(w[i, j]) for j in range(w.shape[1])]
                       for i in range(w.shape[0])]
            b_nodes = [exprgraph.Const(b[i]) for i in range(w.shape[0])]
        nxt = []
        for i in range(w.shape[0]):
            z: Expr = exprgraph.Const(0.0)
            for j in range(w.shape[1]):
                z = z + w_nodes[i][j] * act[j]
            z = z + b_nodes[i]
            nxt.append(z if l == n - 1 else exprgraph.tanh(z))
        act = nxt
    return NetworkGraph(
        outputs=tuple(act),
        input_vars=input_vars,
        weight_vars=tuple(weight_vars),
        weight_values=pack(params) if weights_as_variables else None,
    )
