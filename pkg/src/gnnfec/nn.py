"""Minimal dense-network machinery with reverse-mode gradients.

A :class:`Tensor` wraps a float64 array; operations record themselves
onto the active :class:`GradientTape` (when one is open and an operand
requires gradients) by storing their parents and a backward closure.
With no tape open, the same functions run as plain numpy with a thin
wrapper — that is the inference path.

All dense products in the forward direction go through the fixed-order
kernel (see :mod:`gnnfec.kernels`); backward-pass products use BLAS,
which is fine because gradient computations never feed the decoders'
bit-exactness guarantees.
"""

import numpy as np

from .errors import InvalidParameter, ShapeMismatch, TapeMismatch
from .kernels import matmul_t, segment_reduce_sorted, segment_sum

_ACTIVE_TAPE = None


class Tensor:
    """Float64 array with optional gradient bookkeeping."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward", "_tape")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents = ()
        self._backward = None
        self._tape = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag}, requires_grad={self.requires_grad})"


def as_tensor(x):
    """Wrap an array as a constant Tensor (pass Tensors through)."""
    return x if isinstance(x, Tensor) else Tensor(x)


def is_recording():
    """True while a gradient tape is open."""
    return _ACTIVE_TAPE is not None


def make_op(out_data, parents, backward):
    """Result tensor of an operation; recorded if a tape is listening.

    ``backward`` maps the output gradient to a tuple of parent
    gradients (``None`` for parents that need none); it is only invoked
    during the backward pass of the tape active at creation time.
    """
    out = Tensor(out_data)
    tape = _ACTIVE_TAPE
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
        out._tape = tape
    return out


class GradientTape:
    """Records operations for one loss evaluation.

    Usage::

        with GradientTape() as tape:
            loss = ...
        grads = tape.gradient(loss, params)

    Tapes do not nest and ``gradient`` may be called once.
    """

    def __init__(self):
        self._entered = False
        self._spent = False

    def __enter__(self):
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise TapeMismatch("a gradient tape is already active")
        _ACTIVE_TAPE = self
        self._entered = True
        return self

    def __exit__(self, exc_type, exc, tb):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None
        return False

    def gradient(self, loss, params):
        """Gradients of a recorded scalar loss for each parameter.

        Parameters never touched by the loss get zero gradients of
        matching shape, so every parameter has exactly one gradient.
        """
        if self._spent:
            raise TapeMismatch("this tape's gradient was already consumed")
        if not isinstance(loss, Tensor) or loss._tape is not self:
            raise TapeMismatch("loss was not recorded on this tape")
        if loss.data.size != 1:
            raise ShapeMismatch("gradient target must be scalar")
        self._spent = True

        order = []
        visited = set()
        stack = [(loss, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))

        for node in order:
            node.grad = None
        loss.grad = np.ones_like(loss.data)
        for node in reversed(order):
            if node.grad is None or node._backward is None:
                continue
            parent_grads = node._backward(node.grad)
            for parent, g in zip(node._parents, parent_grads):
                if g is None or not parent.requires_grad:
                    continue
                if g.shape != parent.data.shape:
                    raise ShapeMismatch(
                        f"gradient shape {g.shape} != parameter shape {parent.data.shape}"
                    )
                parent.grad = g if parent.grad is None else parent.grad + g
        return [
            p.grad if p.grad is not None else np.zeros_like(p.data) for p in params
        ]


def backward(tape, loss, params):
    """Functional form of :meth:`GradientTape.gradient`."""
    return tape.gradient(loss, params)


def _unbroadcast(g, shape):
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(
        i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1
    )
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return np.asarray(g).reshape(shape)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def grad_fn(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return make_op(out, (a, b), grad_fn)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def grad_fn(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return make_op(out, (a, b), grad_fn)


def tanh(x):
    x = as_tensor(x)
    out = np.tanh(x.data)

    def grad_fn(g):
        return (g * (1.0 - out * out),)

    return make_op(out, (x,), grad_fn)


def sigmoid(x):
    x = as_tensor(x)
    out = 1.0 / (1.0 + np.exp(-x.data))

    def grad_fn(g):
        return (g * out * (1.0 - out),)

    return make_op(out, (x,), grad_fn)


def relu(x):
    x = as_tensor(x)
    out = np.maximum(x.data, 0.0)

    def grad_fn(g):
        return (g * (x.data > 0.0),)

    return make_op(out, (x,), grad_fn)


def identity(x):
    return as_tensor(x)


ACTIVATIONS = {"tanh": tanh, "relu": relu, "sigmoid": sigmoid, "identity": identity}


def reduce_sum(x):
    """Sum of all elements, as a scalar tensor."""
    x = as_tensor(x)
    out = x.data.sum()

    def grad_fn(g):
        return (np.broadcast_to(g, x.data.shape).copy(),)

    return make_op(out, (x,), grad_fn)


def reduce_mean(x):
    """Mean of all elements, as a scalar tensor."""
    x = as_tensor(x)
    out = x.data.mean()
    scale = 1.0 / x.data.size

    def grad_fn(g):
        return (np.broadcast_to(g * scale, x.data.shape).copy(),)

    return make_op(out, (x,), grad_fn)


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes[:-1])

    def grad_fn(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, splits, axis=axis))

    return make_op(out, tuple(tensors), grad_fn)


def linear(x, weight, bias=None):
    """Affine map x @ weight^T (+ bias) over the last axis.

    ``weight`` is (out, in); ``x`` may have any number of leading axes.
    The forward product uses the fixed-order kernel so that decoder
    outputs are row-permutation equivariant.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    lead = x.data.shape[:-1]
    in_dim = x.data.shape[-1]
    if weight.data.shape[1] != in_dim:
        raise ShapeMismatch(
            f"input width {in_dim} does not match weight shape {weight.data.shape}"
        )
    x2d = x.data.reshape(-1, in_dim)
    wt = np.ascontiguousarray(weight.data.T)
    out2d = matmul_t(x2d, wt)
    out = out2d.reshape(*lead, weight.data.shape[0])
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data
        parents.append(bias)

    def grad_fn(g):
        g2d = g.reshape(-1, weight.data.shape[0])
        dx = (g2d @ weight.data).reshape(x.data.shape)
        dw = g2d.T @ x2d
        grads = [dx, dw]
        if bias is not None:
            grads.append(g2d.sum(axis=0))
        return tuple(grads)

    return make_op(out, tuple(parents), grad_fn)


def gather(x, indices, scatter_plan):
    """Select rows along axis 1: out[:, e, :] = x[:, indices[e], :].

    ``scatter_plan`` is the SegmentPlan grouping gathered positions by
    source row; the backward pass is its segment sum.
    """
    x = as_tensor(x)
    out = x.data[:, indices, :]

    def grad_fn(g):
        return (segment_sum(np.ascontiguousarray(g), scatter_plan),)

    return make_op(out, (x,), grad_fn)


def segment_aggregate(x, plan, mean=False):
    """Permutation-invariant per-segment reduction of edge values."""
    x = as_tensor(x)
    out = segment_reduce_sorted(x.data, plan, mean=mean)
    seg = plan.segment_of_edge
    scale = plan.inv_sizes[seg][None, :, None] if mean else None

    def grad_fn(g):
        gx = g[:, seg, :]
        if scale is not None:
            gx = gx * scale
        return (np.ascontiguousarray(gx),)

    return make_op(out, (x,), grad_fn)


def readout(h, q):
    """Project node states to scalars: out[b, v] = h[b, v, :] . q."""
    h, q = as_tensor(h), as_tensor(q)
    b, n, f = h.data.shape
    if q.data.shape != (f,):
        raise ShapeMismatch(f"projection vector must have shape ({f},)")
    h2d = h.data.reshape(-1, f)
    out = matmul_t(h2d, np.ascontiguousarray(q.data[:, None]))[:, 0].reshape(b, n)

    def grad_fn(g):
        dh = g[:, :, None] * q.data
        dq = np.einsum("bn,bnf->f", g, h.data)
        return dh, dq

    return make_op(out, (h, q), grad_fn)


def glorot_uniform_init(fan_in, fan_out, rng):
    """(fan_out, fan_in) matrix, i.i.d. uniform on +/- sqrt(6/(fan_in+fan_out))."""
    if fan_in < 1 or fan_out < 1:
        raise InvalidParameter("fan dimensions must be >= 1")
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


class DenseLayer:
    """Affine layer with a pointwise activation.

    ``weight`` is (out, in); ``bias`` is optional per the no-bias
    configuration (which maps 0 to 0 under tanh/relu/identity).
    """

    def __init__(self, weight, bias=None, activation="identity"):
        if activation not in ACTIVATIONS:
            raise InvalidParameter(
                f"activation must be one of {sorted(ACTIVATIONS)}, got {activation!r}"
            )
        self.weight = weight if isinstance(weight, Tensor) else Tensor(
            weight, requires_grad=True
        )
        if bias is not None and not isinstance(bias, Tensor):
            bias = Tensor(bias, requires_grad=True)
        self.bias = bias
        self.activation = activation

    @classmethod
    def create(cls, in_dim, out_dim, activation, use_bias, rng):
        weight = Tensor(glorot_uniform_init(in_dim, out_dim, rng), requires_grad=True)
        bias = Tensor(np.zeros(out_dim), requires_grad=True) if use_bias else None
        return cls(weight, bias, activation)

    @property
    def in_dim(self):
        return self.weight.data.shape[1]

    @property
    def out_dim(self):
        return self.weight.data.shape[0]

    def __call__(self, x):
        return ACTIVATIONS[self.activation](linear(x, self.weight, self.bias))

    def parameters(self):
        return [self.weight] if self.bias is None else [self.weight, self.bias]


class Mlp:
    """A chain of dense layers with matching widths."""

    def __init__(self, layers):
        for first, second in zip(layers, layers[1:]):
            if first.out_dim != second.in_dim:
                raise ShapeMismatch(
                    f"layer widths do not chain: {first.out_dim} -> {second.in_dim}"
                )
        self.layers = list(layers)

    @classmethod
    def create(cls, in_dim, hidden_units, out_dim, n_layers, activation, use_bias, rng):
        if n_layers < 1:
            raise InvalidParameter("an MLP needs at least one layer")
        widths = [in_dim] + [hidden_units] * (n_layers - 1) + [out_dim]
        return cls(
            [
                DenseLayer.create(widths[i], widths[i + 1], activation, use_bias, rng)
                for i in range(n_layers)
            ]
        )

    @property
    def in_dim(self):
        return self.layers[0].in_dim

    @property
    def out_dim(self):
        return self.layers[-1].out_dim

    def __call__(self, x):
        out = as_tensor(x)
        for layer in self.layers:
            out = layer(out)
        return out

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]


def mlp_forward(mlp, x):
    """Forward pass accepting a single vector or a batch of rows."""
    arr = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        out = mlp(as_tensor(arr[None, :]))
        return Tensor(out.data[0]) if not out.requires_grad else out
    return mlp(x)


class Adam:
    """Adam optimizer state over a fixed parameter list.

    Moment estimates are bias-corrected; ``learning_rate`` may be
    reassigned between steps (the schedule does).
    """

    def __init__(self, params, learning_rate=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.params = list(params)
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, grads):
        if len(grads) != len(self.params):
            raise ShapeMismatch(
                f"got {len(grads)} gradients for {len(self.params)} parameters"
            )
        self.step_count += 1
        correction1 = 1.0 - self.beta1 ** self.step_count
        correction2 = 1.0 - self.beta2 ** self.step_count
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            if g.shape != p.data.shape:
                raise ShapeMismatch(
                    f"gradient shape {g.shape} != parameter shape {p.data.shape}"
                )
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.learning_rate * (m / correction1) / (
                np.sqrt(v / correction2) + self.epsilon
            )


def adam_step(state, params, grads):
    """One Adam update; ``params`` must be the optimizer's parameter list."""
    if list(params) is not state.params and [id(p) for p in params] != [
        id(p) for p in state.params
    ]:
        raise ShapeMismatch("adam_step received a different parameter list")
    state.step(grads)
    return params
