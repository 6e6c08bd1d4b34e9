"""Small feed-forward networks with exact backpropagation.

Everything is float64 numpy. A network is a plain :class:`Mlp` value; the
functions in this module read it and, where documented, update it in place.
Weights are stored as ``(fan_in, fan_out)`` so a batch of row vectors is
propagated with ``x @ W + b``.

Layers may standardize their input with running per-feature statistics.
The statistics are buffers, not parameters: they only change when
``forward(..., update_stats=True)`` is called, and backward treats them as
constants, which keeps the gradient exact for the function as evaluated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ConfigurationError, NumericError, ShapeError

ACTIVATIONS = ("relu", "tanh", "linear")
CHECKPOINT_VERSION = 1
_NORM_EPS = 1e-5


@dataclass
class Mlp:
    layer_sizes: list[int]
    activations: list[str]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    normalization: list[bool]
    norm_mean: list[np.ndarray]
    norm_var: list[np.ndarray]
    norm_momentum: float = 0.01

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    def params(self) -> list[np.ndarray]:
        """Trainable arrays in the canonical order ``[W0, b0, W1, b1, ...]``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "Mlp":
        return Mlp(
            layer_sizes=list(self.layer_sizes),
            activations=list(self.activations),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            normalization=list(self.normalization),
            norm_mean=[m.copy() for m in self.norm_mean],
            norm_var=[v.copy() for v in self.norm_var],
            norm_momentum=self.norm_momentum,
        )

    def same_architecture(self, other: "Mlp") -> bool:
        return (
            list(self.layer_sizes) == list(other.layer_sizes)
            and list(self.activations) == list(other.activations)
            and list(self.normalization) == list(other.normalization)
        )


@dataclass
class ForwardCache:
    layer_sizes: tuple
    batch_size: int
    inputs: list = field(default_factory=list)     # layer inputs after standardization
    pre: list = field(default_factory=list)        # pre-activations
    post: list = field(default_factory=list)       # activations
    scales: list = field(default_factory=list)     # 1/std per layer, or None


def mlp_init(layer_sizes, activations, seed, normalization=None, output_scale=None) -> Mlp:
    """Create a network with fan-in scaled uniform weights and zero biases.

    ReLU layers use the He bound ``sqrt(6 / fan_in)``; tanh and linear layers
    use ``sqrt(3 / fan_in)``. ``output_scale``, when given, replaces the bound
    of the last layer (small output layers keep early actor/critic outputs
    near zero).
    """
    layer_sizes = [int(s) for s in layer_sizes]
    activations = list(activations)
    if len(layer_sizes) < 2:
        raise ConfigurationError("layer_sizes needs at least an input and an output size")
    if any(s < 1 for s in layer_sizes):
        raise ConfigurationError(f"layer sizes must be positive, got {layer_sizes}")
    n_layers = len(layer_sizes) - 1
    if len(activations) != n_layers:
        raise ConfigurationError(
            f"{n_layers} layers need {n_layers} activations, got {len(activations)}"
        )
    bad = [a for a in activations if a not in ACTIVATIONS]
    if bad:
        raise ConfigurationError(f"unknown activations {bad}; expected one of {ACTIVATIONS}")
    if normalization is None:
        normalization = [False] * n_layers
    normalization = [bool(f) for f in normalization]
    if len(normalization) != n_layers:
        raise ConfigurationError("normalization flags must match the number of layers")

    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(zip(layer_sizes[:-1], layer_sizes[1:])):
        bound = np.sqrt((6.0 if activations[i] == "relu" else 3.0) / fan_in)
        if output_scale is not None and i == n_layers - 1:
            bound = float(output_scale)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(
        layer_sizes=layer_sizes,
        activations=activations,
        weights=weights,
        biases=biases,
        normalization=normalization,
        norm_mean=[np.zeros(n) for n in layer_sizes[:-1]],
        norm_var=[np.ones(n) for n in layer_sizes[:-1]],
    )


def _activate(kind, z):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(kind, z, a, upstream):
    if kind == "relu":
        return upstream * (z > 0.0)
    if kind == "tanh":
        return upstream * (1.0 - a * a)
    return upstream


def forward(net: Mlp, batch, update_stats: bool = False):
    """Propagate a batch of row vectors; returns ``(outputs, cache)``.

    With ``update_stats`` the running statistics of standardized layers are
    moved toward the statistics of this batch before they are applied.
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise ShapeError(f"expected batch with {net.input_dim} columns, got shape {x.shape}")
    cache = ForwardCache(layer_sizes=tuple(net.layer_sizes), batch_size=x.shape[0])
    h = x
    for i in range(net.n_layers):
        scale = None
        if net.normalization[i]:
            if update_stats:
                m = net.norm_momentum
                net.norm_mean[i] = (1.0 - m) * net.norm_mean[i] + m * h.mean(axis=0)
                net.norm_var[i] = (1.0 - m) * net.norm_var[i] + m * h.var(axis=0)
            scale = 1.0 / np.sqrt(net.norm_var[i] + _NORM_EPS)
            h = (h - net.norm_mean[i]) * scale
        z = h @ net.weights[i] + net.biases[i]
        a = _activate(net.activations[i], z)
        cache.inputs.append(h)
        cache.pre.append(z)
        cache.post.append(a)
        cache.scales.append(scale)
        h = a
    return h, cache


def predict(net: Mlp, batch) -> np.ndarray:
    """Forward pass without the cache."""
    return forward(net, batch)[0]


def backward(net: Mlp, cache: ForwardCache, grad_out):
    """Exact gradients for ``sum(grad_out * outputs)``.

    Returns ``(param_grads, grad_in)`` where ``param_grads`` follows the
    ``Mlp.params()`` order.
    """
    g = np.asarray(grad_out, dtype=np.float64)
    if g.ndim == 1 and g.size == cache.batch_size * net.output_dim:
        g = g.reshape(cache.batch_size, net.output_dim)
    if tuple(net.layer_sizes) != cache.layer_sizes or len(cache.pre) != net.n_layers:
        raise ShapeError("cache was produced by a network with a different architecture")
    if g.shape != (cache.batch_size, net.output_dim):
        raise ShapeError(
            f"grad_out shape {g.shape} does not match outputs {(cache.batch_size, net.output_dim)}"
        )
    grads = [None] * (2 * net.n_layers)
    for i in reversed(range(net.n_layers)):
        dz = _activation_grad(net.activations[i], cache.pre[i], cache.post[i], g)
        grads[2 * i] = cache.inputs[i].T @ dz
        grads[2 * i + 1] = dz.sum(axis=0)
        g = dz @ net.weights[i].T
        if cache.scales[i] is not None:
            g = g * cache.scales[i]
    return grads, g


def global_norm(grads) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


def clip_gradients(grads, clip_norm: float):
    """Rescale all gradients together so their global L2 norm is at most ``clip_norm``."""
    if clip_norm <= 0:
        raise ConfigurationError("clip_norm must be positive")
    norm = global_norm(grads)
    if norm > clip_norm:
        factor = clip_norm / norm
        return [g * factor for g in grads]
    return [g.copy() for g in grads]


@dataclass
class OptimizerState:
    learning_rate: float = 1e-3
    clip_norm: float = 3.0
    method: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    moments: list = field(default_factory=list)
    second_moments: list = field(default_factory=list)
    step_count: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.clip_norm <= 0:
            raise ConfigurationError("clip_norm must be positive")
        if self.method not in ("adam", "sgd"):
            raise ConfigurationError(f"unknown optimizer method {self.method!r}")

    def copy(self) -> "OptimizerState":
        out = OptimizerState(
            self.learning_rate, self.clip_norm, self.method, self.beta1, self.beta2, self.eps
        )
        out.moments = [m.copy() for m in self.moments]
        out.second_moments = [v.copy() for v in self.second_moments]
        out.step_count = self.step_count
        return out


def make_optimizer(net: Mlp, **kwargs) -> OptimizerState:
    opt = OptimizerState(**kwargs)
    opt.moments = [np.zeros_like(p) for p in net.params()]
    opt.second_moments = [np.zeros_like(p) for p in net.params()]
    return opt


def apply_gradients(net: Mlp, grads, opt: OptimizerState):
    """Take one first-order step in place; returns ``(net, opt)`` for chaining."""
    params = net.params()
    if len(grads) != len(params) or any(g.shape != p.shape for g, p in zip(grads, params)):
        raise ShapeError("gradient shapes do not match the network parameters")
    if not all(np.all(np.isfinite(g)) for g in grads):
        raise NumericError("non-finite gradient passed to apply_gradients")
    if not opt.moments:
        opt.moments = [np.zeros_like(p) for p in params]
        opt.second_moments = [np.zeros_like(p) for p in params]
    opt.step_count += 1
    lr = opt.learning_rate
    if opt.method == "sgd":
        for p, g in zip(params, grads):
            p -= lr * g
    else:
        t = opt.step_count
        c1 = 1.0 - opt.beta1 ** t
        c2 = 1.0 - opt.beta2 ** t
        for p, g, m, v in zip(params, grads, opt.moments, opt.second_moments):
            m *= opt.beta1
            m += (1.0 - opt.beta1) * g
            v *= opt.beta2
            v += (1.0 - opt.beta2) * (g * g)
            p -= lr * (m / c1) / (np.sqrt(v / c2) + opt.eps)
    if not all(np.all(np.isfinite(p)) for p in params):
        raise NumericError("parameters became non-finite after an update")
    return net, opt


def sync_target(target: Mlp, online: Mlp, mode: str = "hard", tau: float = 1.0) -> Mlp:
    """Copy (``hard``) or blend (``polyak``) online parameters into ``target`` in place.

    Polyak: ``target <- (1 - tau) * target + tau * online``. Running
    normalization statistics follow the same rule.
    """
    if not target.same_architecture(online):
        raise ShapeError("target and online networks differ in architecture")
    if mode == "hard":
        tau = 1.0
    elif mode != "polyak":
        raise ConfigurationError(f"unknown sync mode {mode!r}")
    if not 0.0 <= tau <= 1.0:
        raise ConfigurationError("polyak coefficient must lie in [0, 1]")
    pairs = list(zip(target.params(), online.params()))
    pairs += list(zip(target.norm_mean, online.norm_mean))
    pairs += list(zip(target.norm_var, online.norm_var))
    for t, o in pairs:
        if tau == 1.0:
            t[...] = o
        elif tau > 0.0:
            t *= 1.0 - tau
            t += tau * o
    return target


# -- checkpoints --------------------------------------------------------------
#
# A checkpoint is an ``.npz`` archive. Keys:
#   format_version            int, currently 1
#   meta                      JSON string with caller metadata
#   names                     network names, in save order
#   <name>/layer_sizes        int array
#   <name>/activations        str array
#   <name>/normalization      bool array
#   <name>/norm_momentum      float
#   <name>/W<i>, <name>/b<i>  layer parameters (W is fan_in x fan_out)
#   <name>/mean<i>, <name>/var<i>   running standardization statistics


def save_checkpoint(path, nets: dict, meta: dict | None = None) -> Path:
    path = Path(path)
    arrays = {
        "format_version": np.array(CHECKPOINT_VERSION),
        "meta": np.array(json.dumps(meta or {}, sort_keys=True)),
        "names": np.array(list(nets)),
    }
    for name, net in nets.items():
        arrays[f"{name}/layer_sizes"] = np.array(net.layer_sizes, dtype=np.int64)
        arrays[f"{name}/activations"] = np.array(net.activations)
        arrays[f"{name}/normalization"] = np.array(net.normalization, dtype=bool)
        arrays[f"{name}/norm_momentum"] = np.array(net.norm_momentum)
        for i in range(net.n_layers):
            arrays[f"{name}/W{i}"] = net.weights[i]
            arrays[f"{name}/b{i}"] = net.biases[i]
            arrays[f"{name}/mean{i}"] = net.norm_mean[i]
            arrays[f"{name}/var{i}"] = net.norm_var[i]
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_checkpoint(path):
    """Inverse of :func:`save_checkpoint`; returns ``(nets, meta)``."""
    try:
        data = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise ConfigurationError(f"cannot read checkpoint {path}: {exc}") from exc
    with data:
        if "format_version" not in data or int(data["format_version"]) != CHECKPOINT_VERSION:
            raise ConfigurationError(f"{path} is not a version {CHECKPOINT_VERSION} checkpoint")
        meta = json.loads(str(data["meta"]))
        nets = {}
        for name in (str(n) for n in data["names"]):
            sizes = [int(s) for s in data[f"{name}/layer_sizes"]]
            n_layers = len(sizes) - 1
            nets[name] = Mlp(
                layer_sizes=sizes,
                activations=[str(a) for a in data[f"{name}/activations"]],
                weights=[data[f"{name}/W{i}"].copy() for i in range(n_layers)],
                biases=[data[f"{name}/b{i}"].copy() for i in range(n_layers)],
                normalization=[bool(f) for f in data[f"{name}/normalization"]],
                norm_mean=[data[f"{name}/mean{i}"].copy() for i in range(n_layers)],
                norm_var=[data[f"{name}/var{i}"].copy() for i in range(n_layers)],
                norm_momentum=float(data[f"{name}/norm_momentum"]),
            )
    return nets, meta
