"""Small dense networks with explicit backpropagation and the adversarial losses.

All losses are batch *sums*; trainers divide by the batch size themselves.
Probabilities are clamped to ``[PROB_MIN, PROB_MAX]`` before every log and the
clamp's zero derivative outside that interval is honoured, so analytic and
finite-difference gradients agree.
"""
from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

PROB_MIN = 1e-7
PROB_MAX = 1.0 - 1e-7
ACTIVATIONS = ("tanh", "sigmoid", "softmax", "identity")
CHECKPOINT_VERSION = 1


@dataclass
class Layer:
    W: np.ndarray  # (in, out)
    b: np.ndarray | None
    activation: str
    trainable: bool = True

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class MlpParams:
    layers: list[Layer] = field(default_factory=list)

    def __post_init__(self):
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.W.shape[1] != b.W.shape[0]:
                raise ValueError(f"layer {i} output {a.W.shape[1]} does not feed layer {i + 1} input {b.W.shape[0]}")
        for i, layer in enumerate(self.layers[:-1]):
            if layer.activation == "softmax":
                raise ValueError("softmax is only allowed as the final activation")

    @property
    def in_dim(self) -> int:
        return self.layers[0].W.shape[0]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].W.shape[1]

    def tensors(self) -> dict[str, np.ndarray]:
        """Trainable arrays keyed ``"<layer>.W"`` / ``"<layer>.b"``."""
        out = {}
        for i, layer in enumerate(self.layers):
            if not layer.trainable:
                continue
            out[f"{i}.W"] = layer.W
            if layer.b is not None:
                out[f"{i}.b"] = layer.b
        return out

    def copy(self) -> "MlpParams":
        return MlpParams([
            Layer(l.W.copy(), None if l.b is None else l.b.copy(), l.activation, l.trainable)
            for l in self.layers
        ])

    def zeros_like(self) -> "MlpParams":
        return MlpParams([
            Layer(np.zeros_like(l.W), None if l.b is None else np.zeros_like(l.b), l.activation, l.trainable)
            for l in self.layers
        ])


def glorot_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_mlp(
    sizes: Sequence[int],
    activations: Sequence[str],
    rng: np.random.Generator,
    bias: bool = True,
) -> MlpParams:
    if len(activations) != len(sizes) - 1:
        raise ValueError("need one activation per layer")
    layers = [
        Layer(glorot_uniform(a, b, rng), np.zeros(b) if bias else None, act)
        for a, b, act in zip(sizes[:-1], sizes[1:], activations)
    ]
    return MlpParams(layers)


# ---------------------------------------------------------------------------
# forward / backward


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _activate(z, act):
    if act == "tanh":
        return np.tanh(z)
    if act == "sigmoid":
        return sigmoid(z)
    if act == "softmax":
        return softmax(z)
    return z


def _activation_backward(a, da, act):
    if act == "tanh":
        return da * (1.0 - a * a)
    if act == "sigmoid":
        return da * a * (1.0 - a)
    if act == "softmax":
        return a * (da - np.sum(da * a, axis=1, keepdims=True))
    return da


def forward_cache(params: MlpParams, X) -> list[np.ndarray]:
    """Activations of every layer, input first; ``X`` is (n, in) dense or sparse."""
    if X.shape[-1] != params.in_dim:
        raise ValueError(f"input dimension {X.shape[-1]} does not match network input {params.in_dim}")
    acts = [X]
    a = X
    for layer in params.layers:
        z = np.asarray(a @ layer.W)
        if layer.b is not None:
            z = z + layer.b
        a = _activate(z, layer.activation)
        acts.append(a)
    return acts


def mlp_forward(params: MlpParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64) if not hasattr(x, "tocsr") else x
    if getattr(x, "ndim", 2) == 1:
        return forward_cache(params, x[None, :])[-1][0]
    return forward_cache(params, x)[-1]


def mlp_backward(
    params: MlpParams,
    acts: list[np.ndarray],
    d_out: np.ndarray,
    need_input_grad: bool = False,
    pre_activation: bool = False,
) -> tuple[MlpParams, np.ndarray | None]:
    """Backpropagate ``dL/d(output)`` through the network.

    With ``pre_activation`` the incoming gradient is taken with respect to the
    final layer's pre-activation instead.  Returns parameter gradients (same
    layout as ``params``) and, when asked, ``dL/d(input)``.
    """
    grads = []
    da = d_out
    n_layers = len(params.layers)
    dx = None
    for i in range(n_layers - 1, -1, -1):
        layer = params.layers[i]
        if pre_activation and i == n_layers - 1:
            dz = da
        else:
            dz = _activation_backward(acts[i + 1], da, layer.activation)
        a_prev = acts[i]
        dW = np.asarray(a_prev.T @ dz)
        db = dz.sum(axis=0) if layer.b is not None else None
        grads.append(Layer(dW, db, layer.activation, layer.trainable))
        if i > 0 or need_input_grad:
            da = dz @ layer.W.T
        if i == 0 and need_input_grad:
            dx = da
    return MlpParams(grads[::-1]), dx


def _clamped_log(p):
    """``log(clip(p))`` and its derivative with respect to ``p``."""
    inside = (p >= PROB_MIN) & (p <= PROB_MAX)
    pc = np.clip(p, PROB_MIN, PROB_MAX)
    return np.log(pc), np.where(inside, 1.0 / pc, 0.0)


def _add_grads(a: MlpParams, b: MlpParams) -> MlpParams:
    return MlpParams([
        Layer(x.W + y.W, None if x.b is None else x.b + y.b, x.activation, x.trainable)
        for x, y in zip(a.layers, b.layers)
    ])


# ---------------------------------------------------------------------------
# losses


def wegan_disc_loss(D: MlpParams, originals, fakes) -> tuple[float, MlpParams]:
    """Discriminator loss: originals labelled 1, mapped embeddings labelled 0."""
    acts_r = forward_cache(D, originals)
    acts_f = forward_cache(D, fakes)
    p_r, p_f = acts_r[-1], acts_f[-1]
    log_r, dlog_r = _clamped_log(p_r)
    log_f, dlog_f = _clamped_log(1.0 - p_f)
    loss = -(log_r.sum() + log_f.sum())
    g_r, _ = mlp_backward(D, acts_r, -dlog_r)
    g_f, _ = mlp_backward(D, acts_f, dlog_f)
    return float(loss), _add_grads(g_r, g_f)


def wegan_gen_loss(D: MlpParams, C: MlpParams, G, T, labels) -> tuple[float, np.ndarray]:
    """Generator loss for the shared embedding matrix ``G``.

    ``T`` is the (n, V) tf-idf batch; documents are mapped as ``tanh(T @ G)``.
    Returns the loss and the dense (V, d) gradient with respect to ``G``.
    """
    G = np.asarray(getattr(G, "data", G))
    labels = np.asarray(labels)
    X = np.tanh(np.asarray(T @ G))
    acts_d = forward_cache(D, X)
    acts_c = forward_cache(C, X)
    log_f, dlog_f = _clamped_log(1.0 - acts_d[-1])
    rows = np.arange(len(labels))
    log_c, dlog_c = _clamped_log(acts_c[-1][rows, labels])
    loss = log_f.sum() - log_c.sum()
    _, dx_d = mlp_backward(D, acts_d, -dlog_f, need_input_grad=True)
    d_out_c = np.zeros_like(acts_c[-1])
    d_out_c[rows, labels] = -dlog_c
    _, dx_c = mlp_backward(C, acts_c, d_out_c, need_input_grad=True)
    dU = (dx_d + dx_c) * (1.0 - X * X)
    dG = np.asarray(T.T @ dU)
    return float(loss), dG


def classifier_nll(C: MlpParams, inputs, labels) -> tuple[float, MlpParams]:
    labels = np.asarray(labels)
    acts = forward_cache(C, inputs)
    rows = np.arange(len(labels))
    logp, dlogp = _clamped_log(acts[-1][rows, labels])
    d_out = np.zeros_like(acts[-1])
    d_out[rows, labels] = -dlogp
    grads, _ = mlp_backward(C, acts, d_out)
    return float(-logp.sum()), grads


def degan_disc_loss(D: MlpParams, real_batches: Sequence, fake_batches: Sequence) -> tuple[float, MlpParams]:
    """2M-way cross-entropy: real corpus m targets class m, fakes of G^m target M+m."""
    M = len(real_batches)
    if len(fake_batches) != M:
        raise ValueError("need one fake batch per corpus")
    if D.out_dim != 2 * M:
        raise ValueError(f"discriminator must have {2 * M} outputs")
    X = np.vstack([np.asarray(_dense(b)) for b in list(real_batches) + list(fake_batches)])
    targets = np.concatenate(
        [np.full(_rows(b), m) for m, b in enumerate(real_batches)]
        + [np.full(_rows(b), M + m) for m, b in enumerate(fake_batches)]
    ).astype(np.int64)
    loss, grads = classifier_nll(D, X, targets)
    return loss, grads


def degan_gen_loss(D: MlpParams, fake_batches: Sequence) -> tuple[float, list[np.ndarray]]:
    """Ratio loss ``sum log[p_{M+m} / (p_{M+m} + p_m)]`` on generated documents.

    With a softmax output the ratio equals ``sigmoid(z_{M+m} - z_m)`` in the
    final-layer logits, which is how it is evaluated so that two underflowing
    probabilities never produce 0/0.  ``D`` is held fixed; the gradients
    returned are with respect to each fake batch.
    """
    M = len(fake_batches)
    if D.out_dim != 2 * M:
        raise ValueError(f"discriminator must have {2 * M} outputs")
    if D.layers[-1].activation != "softmax":
        raise ValueError("discriminator must end in softmax")
    last = D.layers[-1]
    loss = 0.0
    d_inputs = []
    for m, F in enumerate(fake_batches):
        acts = forward_cache(D, F)
        Z = np.asarray(acts[-2] @ last.W)
        if last.b is not None:
            Z = Z + last.b
        r = sigmoid(Z[:, M + m] - Z[:, m])
        logr, dlogr = _clamped_log(r)
        loss += logr.sum()
        g = dlogr * r * (1.0 - r)
        dz = np.zeros_like(Z)
        dz[:, M + m] = g
        dz[:, m] = -g
        _, dx = mlp_backward(D, acts, dz, need_input_grad=True, pre_activation=True)
        d_inputs.append(dx)
    return float(loss), d_inputs


def _dense(b):
    return b.toarray() if hasattr(b, "toarray") else b


def _rows(b):
    return b.shape[0]


# ---------------------------------------------------------------------------
# optimisation and checking


def _as_tensors(obj) -> dict[str, np.ndarray]:
    if isinstance(obj, np.ndarray):
        return {"": obj}
    if isinstance(obj, dict):
        return obj
    if hasattr(obj, "tensors"):
        return obj.tensors()
    if hasattr(obj, "data"):
        return {"": obj.data}
    raise TypeError(f"cannot enumerate parameters of {type(obj).__name__}")


def sgd_step(params, grads, lr: float):
    """In-place ``p -= lr * g`` over every trainable tensor; returns ``params``.

    A non-finite gradient aborts before any tensor is touched.
    """
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    p_t, g_t = _as_tensors(params), _as_tensors(grads)
    if p_t.keys() != g_t.keys():
        raise ValueError("parameter and gradient tensors do not match")
    for name, g in g_t.items():
        if g.shape != p_t[name].shape:
            raise ValueError(f"gradient shape mismatch for {name!r}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient in tensor {name!r}")
    for name, p in p_t.items():
        p -= lr * g_t[name]
    return params


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_parameter: tuple
    n_checked: int


def grad_check(
    loss_fn: Callable,
    params,
    epsilon: float = 1e-5,
    max_entries: int | None = None,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare analytic gradients with central differences.

    ``loss_fn(params)`` returns ``(loss, grads)`` with ``grads`` laid out like
    ``params``.  Relative error is ``|a - n| / max(|a|, |n|, 1e-8)``.  With
    ``max_entries`` a random subset of each tensor is probed.
    """
    _, grads = loss_fn(params)
    p_t, g_t = _as_tensors(params), _as_tensors(grads)
    g_t = {k: np.array(v, copy=True) for k, v in g_t.items()}
    worst, worst_at, count = 0.0, (), 0
    rng = rng or np.random.default_rng(0)
    for name, p in p_t.items():
        flat = p.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = rng.choice(flat.size, size=max_entries, replace=False)
        for j in idx:
            orig = flat[j]
            flat[j] = orig + epsilon
            f_plus = loss_fn(params)[0]
            flat[j] = orig - epsilon
            f_minus = loss_fn(params)[0]
            flat[j] = orig
            numeric = (f_plus - f_minus) / (2 * epsilon)
            analytic = g_t[name].reshape(-1)[j]
            rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
            count += 1
            if rel > worst:
                worst, worst_at = rel, (name, np.unravel_index(j, p.shape))
    return GradCheckReport(float(worst), worst_at, count)


# ---------------------------------------------------------------------------
# checkpoint container: zip of .npy arrays plus a JSON header, fixed timestamps


def save_checkpoint(path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    meta = dict(meta, version=CHECKPOINT_VERSION)
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
        _write_entry(zf, "meta.json", json.dumps(meta, sort_keys=True).encode())
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(arrays[name]), allow_pickle=False)
            _write_entry(zf, f"{name}.npy", buf.getvalue())


def _write_entry(zf, name, payload):
    info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
    info.compress_type = zipfile.ZIP_DEFLATED
    zf.writestr(info, payload)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    with zipfile.ZipFile(path) as zf:
        meta = json.loads(zf.read("meta.json"))
        if "version" not in meta:
            raise ValueError(f"{path}: checkpoint has no version field")
        if meta["version"] > CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {meta['version']}")
        arrays = {}
        for name in zf.namelist():
            if name.endswith(".npy"):
                arrays[name[:-4]] = np.lib.format.read_array(io.BytesIO(zf.read(name)), allow_pickle=False)
    return arrays, meta


def mlp_to_arrays(params: MlpParams, prefix: str) -> tuple[dict, list]:
    arrays, spec = {}, []
    for i, l in enumerate(params.layers):
        arrays[f"{prefix}.{i}.W"] = l.W
        if l.b is not None:
            arrays[f"{prefix}.{i}.b"] = l.b
        spec.append({"in": l.W.shape[0], "out": l.W.shape[1], "activation": l.activation,
                     "bias": l.b is not None, "trainable": l.trainable})
    return arrays, spec


def mlp_from_arrays(arrays: dict, spec: list, prefix: str) -> MlpParams:
    layers = []
    for i, s in enumerate(spec):
        W = arrays[f"{prefix}.{i}.W"]
        if W.shape != (s["in"], s["out"]):
            raise ValueError(f"layer {i} of {prefix!r} has shape {W.shape}, header says {(s['in'], s['out'])}")
        b = arrays[f"{prefix}.{i}.b"] if s["bias"] else None
        layers.append(Layer(W.copy(), None if b is None else b.copy(), s["activation"], s.get("trainable", True)))
    return MlpParams(layers)


def save_mlp(path, params: MlpParams, **meta) -> None:
    arrays, spec = mlp_to_arrays(params, "mlp")
    save_checkpoint(path, arrays, dict(meta, kind="mlp", layers=spec))


def load_mlp(path) -> MlpParams:
    arrays, meta = load_checkpoint(path)
    return mlp_from_arrays(arrays, meta["layers"], "mlp")
