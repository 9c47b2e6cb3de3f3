"""
Dense tensors, parameter sets and a recording tape for reverse-mode gradients

Every operation is a method on Tape. A graph is any callable
``graph(tape, inputs, params) -> Tensor``; ``forward`` runs it on a fresh
tape and ``backward`` walks the tape in reverse.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from src.errors import ConfigurationError, DataError, NumericError, UsageError

logger = logging.getLogger(__name__)

DTYPE = np.float64


class Tensor:
    """Dense float64 array with an optional gradient buffer"""

    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self):
        """Return the value of a one-element tensor"""
        if self.data.size != 1:
            raise UsageError(f"item() needs a single value, tensor has shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"


def constant(values):
    """Wrap values as a tensor that never receives gradients"""
    if isinstance(values, Tensor):
        return values
    return Tensor(values, requires_grad=False)


class ParamSet:
    """Named parameters with per-parameter trainable flags"""

    def __init__(self):
        self._params = {}
        self._trainable = {}

    def add(self, name, values, trainable=True):
        """Register a new parameter (values are copied)"""
        if name in self._params:
            raise ConfigurationError(f"duplicate parameter name '{name}'")
        tensor = Tensor(np.array(values, dtype=DTYPE), requires_grad=trainable, name=name)
        self._params[name] = tensor
        self._trainable[name] = trainable
        return tensor

    def __getitem__(self, name):
        try:
            return self._params[name]
        except KeyError:
            raise ConfigurationError(f"unknown parameter '{name}'") from None

    def __contains__(self, name):
        return name in self._params

    def __iter__(self):
        return iter(self._params)

    def __len__(self):
        return len(self._params)

    def items(self):
        return self._params.items()

    def trainable_items(self):
        return [(name, p) for name, p in self._params.items() if self._trainable[name]]

    def is_trainable(self, name):
        return self._trainable[name]

    def freeze(self, names=None):
        """Mark parameters (all by default) as frozen"""
        for name in names if names is not None else list(self._params):
            self._trainable[name] = False
            self[name].requires_grad = False
            self[name].grad = None

    def zero_grad(self):
        for tensor in self._params.values():
            tensor.grad = None

    def snapshot(self):
        """Copy of every parameter value, keyed by name"""
        return {name: p.data.copy() for name, p in self._params.items()}

    def load(self, arrays, strict=True):
        """Overwrite parameter values from a name -> array mapping"""
        if strict:
            missing = [name for name in self._params if name not in arrays]
            if missing:
                raise ConfigurationError(f"checkpoint is missing parameters: {', '.join(missing)}")
        for name, tensor in self._params.items():
            if name not in arrays:
                continue
            values = np.asarray(arrays[name], dtype=DTYPE)
            if values.shape != tensor.shape:
                raise ConfigurationError(
                    f"parameter '{name}' has shape {tensor.shape}, checkpoint has {values.shape}"
                )
            tensor.data = values.copy()

    @classmethod
    def merge(cls, *sets):
        """A set that shares the tensors of several sets"""
        merged = cls()
        for param_set in sets:
            for name, tensor in param_set.items():
                if name in merged._params:
                    raise ConfigurationError(f"duplicate parameter name '{name}'")
                merged._params[name] = tensor
                merged._trainable[name] = param_set.is_trainable(name)
        return merged


@dataclass
class Node:
    """One recorded operation"""

    node_id: int
    op: str
    inputs: tuple
    output: Tensor
    backward: object
    kink: object = None


class Tape:
    """Records operations in execution order"""

    def __init__(self):
        self.nodes = []
        self._producers = {}

    # -- bookkeeping -------------------------------------------------------

    def _where(self, op):
        return f"node #{len(self.nodes)} ({op})"

    def _check(self, condition, op, message):
        if not condition:
            raise ConfigurationError(f"{self._where(op)}: {message}")

    def _record(self, op, inputs, values, backward, kink=None):
        node_id = len(self.nodes)
        if not np.all(np.isfinite(values)):
            raise NumericError(f"non-finite value produced by node #{node_id} ({op})", node_id=node_id)
        requires_grad = any(t.requires_grad for t in inputs)
        output = Tensor(values, requires_grad=requires_grad)
        self.nodes.append(Node(node_id, op, tuple(inputs), output, backward, kink))
        self._producers[id(output)] = node_id
        return output

    def kink_signature(self):
        """Activation pattern of every ReLU and hinge on the tape"""
        masks = [np.packbits(node.kink.reshape(-1)) for node in self.nodes if node.kink is not None]
        return b"".join(mask.tobytes() for mask in masks)

    # -- linear algebra ----------------------------------------------------

    def affine(self, x, weight, bias=None):
        """y = x W^T + b for a single vector or a batch of row vectors"""
        x, weight = constant(x), constant(weight)
        self._check(weight.data.ndim == 2, "affine", f"weight must be 2-D, got shape {weight.shape}")
        self._check(x.data.ndim in (1, 2), "affine", f"input must be 1-D or 2-D, got shape {x.shape}")
        self._check(
            x.shape[-1] == weight.shape[1],
            "affine",
            f"input dim {x.shape[-1]} does not match weight shape {weight.shape}",
        )
        inputs = [x, weight]
        values = x.data @ weight.data.T
        if bias is not None:
            bias = constant(bias)
            self._check(bias.shape == (weight.shape[0],), "affine", f"bias shape {bias.shape} != ({weight.shape[0]},)")
            inputs.append(bias)
            values = values + bias.data

        def backward(g):
            x2 = x.data.reshape(-1, x.shape[-1])
            g2 = g.reshape(-1, weight.shape[0])
            grads = [(g2 @ weight.data).reshape(x.shape), g2.T @ x2]
            if bias is not None:
                grads.append(g2.sum(axis=0))
            return grads

        return self._record("affine", inputs, values, backward)

    def relu(self, x):
        mask = x.data > 0
        return self._record("relu", [x], np.where(mask, x.data, 0.0), lambda g: [g * mask], kink=mask)

    def add(self, a, b):
        a, b = constant(a), constant(b)
        self._check(a.shape == b.shape, "add", f"shapes {a.shape} and {b.shape} differ")
        return self._record("add", [a, b], a.data + b.data, lambda g: [g, g])

    def sub(self, a, b):
        a, b = constant(a), constant(b)
        self._check(a.shape == b.shape, "sub", f"shapes {a.shape} and {b.shape} differ")
        return self._record("sub", [a, b], a.data - b.data, lambda g: [g, -g])

    def mul(self, a, b):
        """Elementwise product"""
        a, b = constant(a), constant(b)
        self._check(a.shape == b.shape, "mul", f"shapes {a.shape} and {b.shape} differ")
        return self._record("mul", [a, b], a.data * b.data, lambda g: [g * b.data, g * a.data])

    def scale(self, x, factor, shift=0.0):
        """y = factor * x + shift"""
        return self._record("scale", [x], factor * x.data + shift, lambda g: [factor * g])

    def mean(self, x):
        """Mean over all elements, returned as a scalar tensor"""
        size = x.size
        self._check(size > 0, "mean", "cannot average an empty tensor")
        return self._record("mean", [x], np.asarray(x.data.mean()), lambda g: [np.full(x.shape, g / size)])

    def concat(self, tensors):
        """Stack tensors along the first axis"""
        tensors = [constant(t) for t in tensors]
        tails = {t.shape[1:] for t in tensors}
        self._check(len(tails) == 1, "concat", f"trailing shapes differ: {sorted(tails)}")
        bounds = np.cumsum([t.shape[0] for t in tensors])[:-1]
        return self._record(
            "concat",
            tensors,
            np.concatenate([t.data for t in tensors], axis=0),
            lambda g: np.split(g, bounds, axis=0),
        )

    def rows(self, x, start, stop):
        """Rows start..stop-1 of x"""
        self._check(0 <= start <= stop <= x.shape[0], "rows", f"bad row range {start}:{stop} for {x.shape}")

        def backward(g):
            full = np.zeros(x.shape)
            full[start:stop] = g
            return [full]

        return self._record("rows", [x], x.data[start:stop].copy(), backward)

    # -- norms and distances -----------------------------------------------

    def l2_norm(self, x):
        """Euclidean norm along the last axis"""
        norms = np.sqrt(np.sum(x.data ** 2, axis=-1))

        def backward(g):
            safe = np.where(norms > 0, norms, 1.0)[..., None]
            return [np.where(norms[..., None] > 0, g[..., None] * x.data / safe, 0.0)]

        return self._record("l2_norm", [x], norms, backward)

    def l2_normalize(self, x):
        """x / ||x|| along the last axis"""
        norms = np.sqrt(np.sum(x.data ** 2, axis=-1, keepdims=True))
        if np.any(norms == 0):
            raise DataError(f"{self._where('l2_normalize')}: cannot normalize a zero-norm vector")
        unit = x.data / norms

        def backward(g):
            return [(g - unit * np.sum(g * unit, axis=-1, keepdims=True)) / norms]

        return self._record("l2_normalize", [x], unit, backward)

    def cosine_similarity(self, a, b):
        """Row-wise cosine similarity"""
        a, b = constant(a), constant(b)
        self._check(a.shape == b.shape, "cosine_similarity", f"shapes {a.shape} and {b.shape} differ")
        na = np.sqrt(np.sum(a.data ** 2, axis=-1))
        nb = np.sqrt(np.sum(b.data ** 2, axis=-1))
        if np.any(na == 0) or np.any(nb == 0):
            raise DataError(f"{self._where('cosine_similarity')}: zero-norm vector has no direction")
        cos = np.sum(a.data * b.data, axis=-1) / (na * nb)

        def backward(g):
            g = g[..., None]
            c = cos[..., None]
            ga = g * (b.data / (na * nb)[..., None] - c * a.data / (na ** 2)[..., None])
            gb = g * (a.data / (na * nb)[..., None] - c * b.data / (nb ** 2)[..., None])
            return [ga, gb]

        return self._record("cosine_similarity", [a, b], cos, backward)

    def sq_l2_mean(self, a, b):
        """Row-wise mean over dimensions of (a - b)^2"""
        a, b = constant(a), constant(b)
        self._check(a.shape == b.shape, "sq_l2_mean", f"shapes {a.shape} and {b.shape} differ")
        diff = a.data - b.data
        dims = a.shape[-1]

        def backward(g):
            ga = g[..., None] * 2.0 * diff / dims
            return [ga, -ga]

        return self._record("sq_l2_mean", [a, b], np.mean(diff ** 2, axis=-1), backward)

    def hinge(self, x, margin):
        """max(x - margin, 0) with a zero subgradient at the kink"""
        shifted = x.data - margin
        mask = shifted > 0
        return self._record("hinge", [x], np.where(mask, shifted, 0.0), lambda g: [g * mask], kink=mask)

    # -- classification ----------------------------------------------------

    def cross_entropy(self, logits, labels):
        """Per-sample -log softmax(logits)[label], via log-sum-exp"""
        labels = np.asarray(labels, dtype=np.int64)
        self._check(logits.data.ndim == 2, "cross_entropy", f"logits must be 2-D, got {logits.shape}")
        self._check(
            labels.shape == (logits.shape[0],),
            "cross_entropy",
            f"{labels.shape[0] if labels.ndim else 0} labels for {logits.shape[0]} rows",
        )
        classes = logits.shape[1]
        if labels.size and (labels.min() < 0 or labels.max() >= classes):
            raise DataError(f"{self._where('cross_entropy')}: label out of range [0, {classes})")
        shifted = logits.data - logits.data.max(axis=1, keepdims=True)
        log_probs = shifted - np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))
        rows = np.arange(labels.shape[0])

        def backward(g):
            grad = np.exp(log_probs)
            grad[rows, labels] -= 1.0
            return [g[:, None] * grad]

        return self._record("cross_entropy", [logits], -log_probs[rows, labels], backward)

    def kl_softened(self, student_logits, teacher_logits, temperature):
        """Per-sample T^2 * KL(softmax(t/T) || softmax(s/T))"""
        s, t = constant(student_logits), constant(teacher_logits)
        self._check(s.shape == t.shape, "kl_softened", f"shapes {s.shape} and {t.shape} differ")
        self._check(temperature > 0, "kl_softened", f"temperature must be > 0, got {temperature}")
        log_q = _log_softmax(s.data / temperature)
        log_p = _log_softmax(t.data / temperature)
        p = np.exp(log_p)
        kl = np.sum(p * (log_p - log_q), axis=1)

        def backward(g):
            g = g[:, None]
            gs = g * temperature * (np.exp(log_q) - p)
            gt = g * temperature * p * ((log_p - log_q) - kl[:, None])
            return [gs, gt]

        return self._record("kl_softened", [s, t], temperature ** 2 * kl, backward)

    # -- reverse pass ------------------------------------------------------

    def backward(self, loss):
        """Accumulate d(loss)/d(leaf) into every leaf that requires grad"""
        if not self.nodes:
            raise UsageError("backward called before any forward pass was recorded")
        if loss.size != 1:
            raise UsageError(f"backward needs a scalar loss, got shape {loss.shape}")
        last = self._producers.get(id(loss))
        if last is None:
            raise UsageError("loss was not produced on this tape")

        grads = {id(loss): np.ones(loss.shape)}
        leaves = {}
        for node in reversed(self.nodes[: last + 1]):
            g = grads.pop(id(node.output), None)
            if g is None or not node.output.requires_grad:
                continue
            for tensor, tensor_grad in zip(node.inputs, node.backward(g)):
                if tensor_grad is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                grads[key] = grads[key] + tensor_grad if key in grads else np.array(tensor_grad, dtype=DTYPE)
                if key not in self._producers:
                    leaves[key] = tensor

        for key, leaf in leaves.items():
            g = grads[key].reshape(leaf.shape)
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient for '{leaf.name or 'input'}'")
            leaf.grad = g if leaf.grad is None else leaf.grad + g


def _log_softmax(z):
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))


def forward(graph, inputs, params):
    """Run a graph on a fresh tape and return (output, tape)"""
    tape = Tape()
    output = graph(tape, inputs, params)
    return output, tape


def backward(tape, loss):
    """Write exact reverse-mode gradients into params and inputs"""
    if tape is None:
        raise UsageError("backward called before forward")
    tape.backward(loss)


@dataclass
class GradCheckResult:
    """Outcome of a finite-difference comparison"""

    max_relative_error: float
    checked: int
    skipped: list = field(default_factory=list)

    @property
    def warnings(self):
        return len(self.skipped)


def grad_check(graph, params, inputs=(), seed=0, step=1e-5, max_checks=None):
    """Compare reverse-mode grads with central differences over trainable scalars

    A scalar whose +h and -h evaluations land on different sides of a ReLU or
    hinge kink is reported in ``skipped`` and left out of the maximum.
    """
    params.zero_grad()
    output, tape = forward(graph, inputs, params)
    if output.size != 1:
        raise UsageError(f"grad_check needs a scalar graph output, got shape {output.shape}")
    tape.backward(output)
    analytic = {
        name: (p.grad if p.grad is not None else np.zeros(p.shape)).reshape(-1).copy()
        for name, p in params.trainable_items()
    }
    params.zero_grad()

    targets = [(name, index) for name, p in params.trainable_items() for index in range(p.size)]
    if max_checks is not None and len(targets) > max_checks:
        rng = np.random.default_rng(seed)
        picked = np.sort(rng.choice(len(targets), size=max_checks, replace=False))
        targets = [targets[i] for i in picked]

    def evaluate():
        value, trace = forward(graph, inputs, params)
        return value.item(), trace.kink_signature()

    worst = 0.0
    skipped = []
    for name, index in targets:
        flat = params[name].data.reshape(-1)
        original = flat[index]
        flat[index] = original + step
        f_plus, sig_plus = evaluate()
        flat[index] = original - step
        f_minus, sig_minus = evaluate()
        flat[index] = original
        if sig_plus != sig_minus:
            skipped.append((name, index))
            continue
        numeric = (f_plus - f_minus) / (2.0 * step)
        exact = analytic[name][index]
        error = abs(exact - numeric) / max(abs(exact), abs(numeric), 1e-8)
        worst = max(worst, error)

    if skipped:
        logger.warning("grad_check skipped %d scalar(s) at a non-differentiable point", len(skipped))
    return GradCheckResult(max_relative_error=worst, checked=len(targets) - len(skipped), skipped=skipped)
