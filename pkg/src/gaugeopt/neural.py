"""Trainable map into the unit ball plus the end-to-end feasible pipeline.

The model is a small fully connected network taking (x, u_o) and emitting a
point v strictly inside the l-infinity unit ball (tanh output head).  The
pipeline composes it with the gauge map and equality reconstruction:

    v = net(x, u_o)  ->  u_indep = gauge_map(v)  ->  u_full = lift(u_indep)

so the final vector satisfies every constraint for any weights.  All
gradients are computed by hand (the chain runs through the gauge-map
Jacobian and the reconstruction), and the optimizer is plain gradient
descent with momentum for dependency-free reproducibility.
"""

from __future__ import annotations

import base64
import binascii
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import CheckpointError, TrainingDivergedError
from .gauge import build_shifted, gauge_map, gauge_map_jacobian, ShiftedPolytope
from .linalg import as_vector
from .reduction import ReducedProblem, grad_full_to_indep, lift_solution
from .problems import problem_hash

CHECKPOINT_VERSION = 1


class MlpModel:
    """Dense rectifier network with a bounded (tanh) or linear output head."""

    def __init__(self, layer_dims, weights, biases, output_activation="tanh"):
        self.layer_dims = [int(d) for d in layer_dims]
        self.weights = weights
        self.biases = biases
        self.output_activation = output_activation
        if output_activation not in ("tanh", "linear"):
            raise ValueError(f"unsupported output activation '{output_activation}'")
        if len(weights) != len(self.layer_dims) - 1 or len(biases) != len(weights):
            raise ValueError("weights/biases do not match layer_dims")

    @classmethod
    def initialize(cls, n_in, n_out, hidden=(16,), seed=0, output_activation="tanh"):
        """He-scaled hidden layers, smaller output layer, zero biases."""
        rng = np.random.default_rng(seed)
        dims = [int(n_in), *[int(h) for h in hidden], int(n_out)]
        weights, biases = [], []
        for i in range(len(dims) - 1):
            fan_in = max(dims[i], 1)
            scale = np.sqrt(2.0 / fan_in) if i < len(dims) - 2 else np.sqrt(1.0 / fan_in)
            weights.append(rng.normal(0.0, scale, size=(dims[i + 1], dims[i])))
            biases.append(np.zeros(dims[i + 1]))
        return cls(dims, weights, biases, output_activation=output_activation)

    @property
    def n_in(self):
        return self.layer_dims[0]

    @property
    def n_out(self):
        return self.layer_dims[-1]

    def copy(self):
        return MlpModel(
            list(self.layer_dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            output_activation=self.output_activation,
        )


def mlp_forward(model: MlpModel, inp):
    """Raw network pass; returns (output, trace) with pre-activations kept."""
    inp = as_vector(inp, "input")
    if inp.size != model.n_in:
        raise ValueError(f"input has {inp.size} entries, model expects {model.n_in}")
    act = inp
    activations = [inp]
    pre_list = []
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        pre = w @ act + b
        pre_list.append(pre)
        if i < last:
            act = np.maximum(pre, 0.0)
        elif model.output_activation == "tanh":
            act = np.tanh(pre)
        else:
            act = pre
        activations.append(act)
    return act, (activations, pre_list)


def mlp_backprop(model: MlpModel, trace, grad_out):
    """Gradient of a scalar loss w.r.t. weights/biases given d loss / d output."""
    activations, pre_list = trace
    last = len(model.weights) - 1
    out = activations[-1]
    if model.output_activation == "tanh":
        delta = grad_out * (1.0 - out**2)
    else:
        delta = np.array(grad_out, dtype=float, copy=True)
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.weights)
    for i in range(last, -1, -1):
        grads_w[i] = np.outer(delta, activations[i])
        grads_b[i] = delta.copy()
        if i > 0:
            delta = model.weights[i].T @ delta
            delta = delta * (pre_list[i - 1] > 0.0)
    return grads_w, grads_b


def forward(model: MlpModel, x, u_o) -> np.ndarray:
    """Prediction in the open unit ball for input (x, u_o)."""
    x = as_vector(x, "x")
    u_o = as_vector(u_o, "u_o")
    out, _ = mlp_forward(model, np.concatenate([x, u_o]))
    return out


@dataclass
class PipelineTrace:
    x: np.ndarray
    u_o: np.ndarray
    poly: ShiftedPolytope
    v: np.ndarray
    mlp_trace: tuple
    u_indep: np.ndarray
    u_full: np.ndarray


def pipeline_forward(model: MlpModel, red: ReducedProblem, x, u_o):
    """Full constrained prediction; feasible for any weights.

    Raises NotInteriorError (via build_shifted) when u_o is not strictly
    interior for this x.
    """
    x = as_vector(x, "x")
    u_o = as_vector(u_o, "u_o")
    poly = build_shifted(red, x, u_o)
    return _pipeline_with_poly(model, red, x, u_o, poly)


def _pipeline_with_poly(model, red, x, u_o, poly):
    inp = np.concatenate([x, u_o])
    v, mlp_trace = mlp_forward(model, inp)
    u_indep = gauge_map(poly, v)
    u_full = lift_solution(red, u_indep, x)
    trace = PipelineTrace(x=x, u_o=u_o, poly=poly, v=v, mlp_trace=mlp_trace,
                          u_indep=u_indep, u_full=u_full)
    return u_full, trace


def backward(model: MlpModel, red: ReducedProblem, x, u_o,
             upstream_grad_on_u_indep, trace: PipelineTrace | None = None):
    """Backpropagate a gradient on u_indep through the gauge map and network."""
    if trace is None:
        _, trace = pipeline_forward(model, red, x, u_o)
    upstream = as_vector(upstream_grad_on_u_indep, "upstream_grad_on_u_indep")
    jac = gauge_map_jacobian(trace.poly, trace.v)
    grad_v = jac.T @ upstream
    return mlp_backprop(model, trace.mlp_trace, grad_v)


@dataclass
class TrainConfig:
    """Training-mode switches and optimizer settings.

    ``mode`` is "solver_in_loop" (regress onto reference optima) or
    "objective_only" (minimize the task objective directly).  The interior
    point is found per sample by the artificial LP unless ``shared_interior``
    reuses the first sample's point for the whole dataset.
    """

    mode: str
    epochs: int
    batch_size: int = 32
    learning_rate: float = 1e-3
    momentum: float = 0.9
    seed: int = 0
    shared_interior: bool = False
    big_m: float = 1e4

    def __post_init__(self):
        if self.mode not in ("solver_in_loop", "objective_only"):
            raise ValueError(f"unknown training mode '{self.mode}'")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")


def _zero_grads(model):
    return ([np.zeros_like(w) for w in model.weights],
            [np.zeros_like(b) for b in model.biases])


def train(model: MlpModel, red: ReducedProblem, xs, cfg: TrainConfig,
          references=None, interior_fn=None):
    """Train the pipeline model in place; returns (model, per-epoch loss history).

    ``xs`` is an (N, n_inp) array of inputs.  solver_in_loop mode requires
    ``references`` with the matching full-dimension optima (N, n_opt).
    ``interior_fn(x) -> u_o`` overrides the default artificial-LP finder.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 2:
        raise ValueError("xs must be a 2-D array of input vectors")
    n_samples = xs.shape[0]
    if cfg.mode == "solver_in_loop":
        if references is None:
            raise ValueError("solver_in_loop mode requires reference optima")
        references = np.asarray(references, dtype=float)
        if references.shape != (n_samples, red.parent.n_opt):
            raise ValueError(
                f"references shape {references.shape} != ({n_samples}, {red.parent.n_opt})"
            )

    if interior_fn is None:
        from .interior import find_interior_artificial

        def interior_fn(x):
            return find_interior_artificial(red, x, big_m=cfg.big_m).point

    # Interior points and shifted polytopes are fixed per sample; cache both.
    if cfg.shared_interior:
        shared = interior_fn(xs[0])
        u_os = [shared] * n_samples
    else:
        u_os = [interior_fn(xs[i]) for i in range(n_samples)]
    polys = [build_shifted(red, xs[i], u_os[i]) for i in range(n_samples)]

    objective = red.parent.objective
    rng = np.random.default_rng(cfg.seed)
    vel_w, vel_b = _zero_grads(model)
    history = []

    for epoch in range(cfg.epochs):
        order = rng.permutation(n_samples)
        epoch_loss = 0.0
        for start in range(0, n_samples, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            acc_w, acc_b = _zero_grads(model)
            batch_loss = 0.0
            for idx in batch:
                x = xs[idx]
                u_full, trace = _pipeline_with_poly(model, red, x, u_os[idx], polys[idx])
                if cfg.mode == "solver_in_loop":
                    diff = u_full - references[idx]
                    loss = float(diff @ diff)
                    grad_full = 2.0 * diff
                else:
                    loss = float(objective.value(u_full, x))
                    grad_full = as_vector(objective.gradient_u(u_full, x), "gradient")
                batch_loss += loss
                upstream = grad_full_to_indep(red, grad_full)
                gw, gb = backward(model, red, x, u_os[idx], upstream, trace=trace)
                for i in range(len(acc_w)):
                    acc_w[i] += gw[i]
                    acc_b[i] += gb[i]
            if not np.isfinite(batch_loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch starting {start} "
                    f"(lr={cfg.learning_rate}, mode={cfg.mode})"
                )
            scale = 1.0 / len(batch)
            for i in range(len(vel_w)):
                vel_w[i] = cfg.momentum * vel_w[i] - cfg.learning_rate * scale * acc_w[i]
                vel_b[i] = cfg.momentum * vel_b[i] - cfg.learning_rate * scale * acc_b[i]
                model.weights[i] += vel_w[i]
                model.biases[i] += vel_b[i]
            epoch_loss += batch_loss
        history.append(epoch_loss / max(n_samples, 1))
    return model, history


def pipeline_model(red: ReducedProblem, hidden=(16,), seed=0) -> MlpModel:
    """Model sized for the pipeline: input (x, u_o), output in the reduced space."""
    return MlpModel.initialize(
        red.parent.n_inp + red.n_indep, red.n_indep, hidden=hidden, seed=seed,
        output_activation="tanh",
    )


# ---------------------------------------------------------------------------
# Checkpoints: versioned JSON with base64 weight blobs.
# ---------------------------------------------------------------------------

@dataclass
class Checkpoint:
    model: MlpModel
    metadata: dict = field(default_factory=dict)


def _encode_array(arr) -> dict:
    data = np.ascontiguousarray(arr, dtype="<f8")
    return {"shape": list(data.shape), "data": base64.b64encode(data.tobytes()).decode("ascii")}


def _decode_array(doc) -> np.ndarray:
    try:
        raw = base64.b64decode(doc["data"], validate=True)
        arr = np.frombuffer(raw, dtype="<f8").astype(float).reshape(doc["shape"])
    except (KeyError, TypeError, ValueError, binascii.Error) as exc:
        raise CheckpointError(f"corrupt weight blob: {exc}") from exc
    return arr


def save_checkpoint(path, model: MlpModel, metadata: dict | None = None) -> None:
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "layer_dims": model.layer_dims,
        "output_activation": model.output_activation,
        "weights": [_encode_array(w) for w in model.weights],
        "biases": [_encode_array(b) for b in model.biases],
        "metadata": metadata or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_checkpoint(path, expected_problem_hash: str | None = None) -> Checkpoint:
    """Load a checkpoint; a problem-hash mismatch is surfaced as a warning."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {doc.get('format_version') if isinstance(doc, dict) else '?'}"
        )
    try:
        model = MlpModel(
            doc["layer_dims"],
            [_decode_array(w) for w in doc["weights"]],
            [_decode_array(b) for b in doc["biases"]],
            output_activation=doc.get("output_activation", "tanh"),
        )
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint: {exc}") from exc
    metadata = doc.get("metadata", {})
    stored = metadata.get("problem_hash")
    if expected_problem_hash is not None and stored is not None and stored != expected_problem_hash:
        warnings.warn(
            f"checkpoint was trained on a different problem (hash {stored[:12]}... != "
            f"{expected_problem_hash[:12]}...)",
            stacklevel=2,
        )
    return Checkpoint(model=model, metadata=metadata)


def checkpoint_metadata(red: ReducedProblem, epoch: int, loss_history) -> dict:
    return {
        "problem_hash": problem_hash(red.parent),
        "epoch": int(epoch),
        "loss_history": [float(v) for v in loss_history],
    }
