"""Small tanh MLPs with exact first and second-order gradients, Adam, and the
checkpoint format.

Networks map ``(t / T, x)`` to a scalar. The value network has an identity
head, the policy network a logistic head. Besides the usual parameter
gradient of a loss on the outputs, :func:`param_gradients` also
differentiates losses that depend on the *input gradient* of the network
(the solver needs ``Z = Sigma^T grad_x V``), by reverse-mode differentiation
through the input-gradient backward pass.

Arrays use row-major batches: ``z_l = h_{l-1} @ W_l.T + b_l``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

HEADS = ("identity", "logistic")
CHECKPOINT_FORMAT = "seirgame-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class MlpParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    head: str = "identity"

    def __post_init__(self):
        if self.head not in HEADS:
            raise ValueError(f"unknown head {self.head!r}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias per weight matrix")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError(f"layer {k}: weight {w.shape} / bias {b.shape} mismatch")
            if k and w.shape[1] != self.weights[k - 1].shape[0]:
                raise ValueError(f"layer {k} input does not match layer {k - 1} output")
        if self.weights[-1].shape[0] != 1:
            raise ValueError("networks have a scalar output")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def arrays(self) -> list[np.ndarray]:
        return [a for pair in zip(self.weights, self.biases) for a in pair]

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_flat(self, vec) -> "MlpParams":
        vec = np.asarray(vec, dtype=float)
        if vec.size != self.n_params:
            raise ValueError(f"expected {self.n_params} values, got {vec.size}")
        weights, biases, pos = [], [], 0
        for w, b in zip(self.weights, self.biases):
            weights.append(vec[pos:pos + w.size].reshape(w.shape))
            pos += w.size
            biases.append(vec[pos:pos + b.size].copy())
            pos += b.size
        return MlpParams(weights, biases, self.head)

    def zeros_like(self) -> "MlpParams":
        return MlpParams([np.zeros_like(w) for w in self.weights],
                         [np.zeros_like(b) for b in self.biases], self.head)

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights],
                         [b.copy() for b in self.biases], self.head)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


def init_mlp(sizes, head: str, rng: np.random.Generator,
             zero_output: bool = False) -> MlpParams:
    """Glorot-uniform weights and zero biases.

    ``zero_output`` zeroes the last layer, so the network starts as the
    constant 0 (used for value networks: the terminal value is 0).
    """
    weights, biases = [], []
    for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        if zero_output and k == len(sizes) - 2:
            w = np.zeros_like(w)
        weights.append(w)
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases, head)


def _inputs(t, x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:1])
    inp = np.concatenate([t[:, None], x], axis=1)
    if not np.all(np.isfinite(inp)):
        raise ValueError("non-finite network input")
    return inp


def _head(kind: str, z):
    """Head value and its first two derivatives."""
    if kind == "identity":
        return z, np.ones_like(z), np.zeros_like(z)
    y = 0.5 * (1.0 + np.tanh(0.5 * z))     # overflow-free logistic
    d1 = y * (1.0 - y)
    return y, d1, d1 * (1.0 - 2.0 * y)


@dataclass
class Trace:
    """Intermediate values kept for the backward passes."""

    hs: list[np.ndarray]            # h_0 (inputs) .. h_{L-1}
    z_out: np.ndarray
    y: np.ndarray                   # (B,)
    head_d1: np.ndarray
    head_d2: np.ndarray
    deltas: list[np.ndarray] | None = None   # delta_1 .. delta_L
    qs: list[np.ndarray] | None = None       # q_0 .. q_{L-1}

    @property
    def input_gradient(self) -> np.ndarray:
        return self.qs[0][:, 1:]


def evaluate(net: MlpParams, t, x, with_input_gradient: bool = False) -> Trace:
    hs = [_inputs(t, x)]
    n_layers = len(net.weights)
    for k in range(n_layers - 1):
        hs.append(np.tanh(hs[-1] @ net.weights[k].T + net.biases[k]))
    z_out = hs[-1] @ net.weights[-1].T + net.biases[-1]
    y, d1, d2 = _head(net.head, z_out)
    tr = Trace(hs, z_out, y[:, 0], d1, d2)
    if with_input_gradient:
        deltas = [None] * n_layers
        qs = [None] * n_layers
        delta = d1
        for k in range(n_layers - 1, -1, -1):
            deltas[k] = delta
            qs[k] = delta @ net.weights[k]
            if k:
                delta = qs[k] * (1.0 - hs[k] ** 2)
        tr.deltas, tr.qs = deltas, qs
    return tr


def forward(net: MlpParams, t, x) -> np.ndarray:
    """Network output for a batch; ``t`` must already be scaled to [0, 1]."""
    return evaluate(net, t, x).y


def input_gradient(net: MlpParams, t, x) -> np.ndarray:
    """Exact ``d output / d x`` (time column excluded), shape ``(B, 3N)``."""
    return evaluate(net, t, x, with_input_gradient=True).input_gradient


def param_gradients(net: MlpParams, tr: Trace, y_bar, u_bar=None) -> MlpParams:
    """Parameter gradient of a loss given its adjoints on the outputs
    (``y_bar``, shape ``(B,)``) and on the input gradients (``u_bar``,
    shape ``(B, 3N)``)."""
    n_layers = len(net.weights)
    grads = net.zeros_like()
    hs = tr.hs
    h_bar = [np.zeros_like(h) for h in hs]
    z_bar = np.asarray(y_bar, dtype=float)[:, None] * tr.head_d1

    if u_bar is not None:
        if tr.qs is None:
            raise ValueError("trace was evaluated without input gradients")
        q_bar = np.zeros_like(hs[0])
        q_bar[:, 1:] = u_bar
        for k in range(n_layers):
            # q_k = delta_{k+1} @ W_{k+1}  (0-based: q[k] = deltas[k] @ W[k])
            d_bar = q_bar @ net.weights[k].T
            grads.weights[k] += tr.deltas[k].T @ q_bar
            if k < n_layers - 1:
                h = hs[k + 1]
                # delta_k = q_k * (1 - h_k^2)
                q_bar = d_bar * (1.0 - h ** 2)
                h_bar[k + 1] += -2.0 * d_bar * tr.qs[k + 1] * h
            else:
                z_bar = z_bar + d_bar * tr.head_d2

    for k in range(n_layers - 1, -1, -1):
        grads.weights[k] += z_bar.T @ hs[k]
        grads.biases[k] += z_bar.sum(axis=0)
        if k:
            h_bar[k] += z_bar @ net.weights[k]
            z_bar = h_bar[k] * (1.0 - hs[k] ** 2)
    return grads


# evaluator(outputs) -> (loss, adjoints); outputs[name] = (y, u or None),
# adjoints[name] = (y_bar, u_bar or None)
Evaluator = Callable[[Mapping[str, tuple]], tuple[float, Mapping[str, tuple]]]


def loss_and_param_gradients(nets: Mapping[str, tuple], evaluator: Evaluator):
    """Loss and exact parameter gradients for several networks at once.

    ``nets[name] = (params, t, x, needs_input_gradient)``. The evaluator sees
    each network's outputs and input gradients on its points and returns the
    loss with adjoints; gradients are returned per name as ``MlpParams``.
    """
    traces = {name: evaluate(p, t, x, with_input_gradient=ig)
              for name, (p, t, x, ig) in nets.items()}
    outputs = {name: (tr.y, tr.input_gradient if tr.qs is not None else None)
               for name, tr in traces.items()}
    loss, adjoints = evaluator(outputs)
    grads = {}
    for name, (p, *_rest) in nets.items():
        y_bar, u_bar = adjoints.get(name, (None, None))
        if y_bar is None:
            y_bar = np.zeros_like(traces[name].y)
        grads[name] = param_gradients(p, traces[name], y_bar, u_bar)
    return float(loss), grads


@dataclass
class AdamState:
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, net: MlpParams, lr: float = 5e-4) -> "AdamState":
        return cls(lr=lr, m=[np.zeros_like(a) for a in net.arrays()],
                   v=[np.zeros_like(a) for a in net.arrays()])

    def copy(self) -> "AdamState":
        return AdamState(self.lr, self.beta1, self.beta2, self.eps, self.step,
                         [a.copy() for a in self.m], [a.copy() for a in self.v])


def optimizer_step(net: MlpParams, grads: MlpParams, state: AdamState,
                   lr: float | None = None) -> MlpParams:
    """One Adam update. Returns new parameters and advances ``state``."""
    lr = state.lr if lr is None else lr
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    new = []
    for k, (p, g) in enumerate(zip(net.arrays(), grads.arrays())):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match {p.shape}")
        state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g
        state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g
        step = lr * (state.m[k] / bc1) / (np.sqrt(state.v[k] / bc2) + state.eps)
        new.append(p - step)
    return MlpParams(new[0::2], new[1::2], net.head)


# Checkpoint layout (JSON object, keys written in this order):
#   format, version, stage, config_digest,
#   networks:   [{name, head, layer_sizes, params}]   params = flat list
#   optimizers: [{name, lr, beta1, beta2, eps, step, m, v}]
#   extra:      free-form metadata (seed, loss history, ...)
# Flat order within a network is W_1, b_1, W_2, b_2, ... with W row-major.

def save_checkpoint(path, *, stage: int, config_digest: str,
                    networks: Mapping[str, MlpParams],
                    optimizers: Mapping[str, AdamState] | None = None,
                    extra: Mapping | None = None) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "stage": int(stage),
        "config_digest": config_digest,
        "networks": [{"name": name, "head": net.head,
                      "layer_sizes": net.layer_sizes,
                      "params": net.flat().tolist()}
                     for name, net in networks.items()],
        "optimizers": [{"name": name, "lr": st.lr, "beta1": st.beta1,
                        "beta2": st.beta2, "eps": st.eps, "step": st.step,
                        "m": np.concatenate([a.ravel() for a in st.m]).tolist(),
                        "v": np.concatenate([a.ravel() for a in st.v]).tolist()}
                       for name, st in (optimizers or {}).items()],
        "extra": dict(extra or {}),
    }
    Path(path).write_text(json.dumps(doc))


def _template(sizes, head) -> MlpParams:
    return MlpParams([np.zeros((o, i)) for i, o in zip(sizes[:-1], sizes[1:])],
                     [np.zeros(o) for o in sizes[1:]], head)


def load_checkpoint(path) -> dict:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a checkpoint file")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    networks = {}
    for entry in doc["networks"]:
        networks[entry["name"]] = _template(entry["layer_sizes"], entry["head"]) \
            .with_flat(entry["params"])
    optimizers = {}
    for entry in doc["optimizers"]:
        net = networks[entry["name"]]
        m = net.with_flat(entry["m"]).arrays()
        v = net.with_flat(entry["v"]).arrays()
        optimizers[entry["name"]] = AdamState(entry["lr"], entry["beta1"],
                                              entry["beta2"], entry["eps"],
                                              entry["step"], m, v)
    return {"stage": doc["stage"], "config_digest": doc["config_digest"],
            "networks": networks, "optimizers": optimizers, "extra": doc["extra"]}
