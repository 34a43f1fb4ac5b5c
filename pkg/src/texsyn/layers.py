"""Neural-net layer primitives with hand-written backprop.

Everything here is plain numpy and dimension-agnostic: spatial tensors are
(batch, *spatial, channels) with 2 or 3 spatial axes.  Convolutions use
'same' geometry with ceiling division (output = ceil(input / stride)), so
odd sizes such as 130 or 33 downsample cleanly.  Transposed convolutions
are the exact linear adjoint of that convolution, which gives output =
input * stride and makes the gradient of one the forward pass of the
other.

Layers cache what backward needs on forward; backward returns the input
gradient and stores parameter gradients in ``self.grads``.
"""

import itertools

import numpy as np

BN_EPS = 1e-3  # matches the batchnorm epsilon convention the momentum=0.8 style implies


# ---------------------------------------------------------------------------
# 'same' convolution geometry
# ---------------------------------------------------------------------------

def same_out_size(in_size, stride):
    return -(-in_size // stride)  # ceil division


def same_padding(in_size, kernel, stride):
    out = same_out_size(in_size, stride)
    total = max((out - 1) * stride + kernel - in_size, 0)
    before = total // 2
    return before, total - before


def _pad_spatial(x, pads):
    width = [(0, 0)] + list(pads) + [(0, 0)]
    return np.pad(x, width)


def _kernel_offsets(kernel):
    return list(itertools.product(*[range(k) for k in kernel]))


def _conv_forward(x, w, kernel, stride):
    """x: (B, *in, Cin); w: (K, Cin, Cout) -> (B, *out, Cout), no bias."""
    spatial = x.shape[1:-1]
    cin = x.shape[-1]
    cout = w.shape[-1]
    out = tuple(same_out_size(s, stride) for s in spatial)
    pads = [same_padding(s, k, stride) for s, k in zip(spatial, kernel)]
    xp = _pad_spatial(x, pads)
    batch = x.shape[0]
    npos = int(np.prod(out))
    acc = np.zeros((batch * npos, cout), dtype=x.dtype)
    for idx, offs in enumerate(_kernel_offsets(kernel)):
        view = xp[
            (slice(None),)
            + tuple(
                slice(o, o + n * stride, stride) for o, n in zip(offs, out)
            )
            + (slice(None),)
        ]
        acc += view.reshape(batch * npos, cin) @ w[idx]
    return acc.reshape((batch,) + out + (cout,))


def _conv_grad_input(dy, w, kernel, stride, in_spatial):
    """Adjoint of _conv_forward w.r.t. x. dy: (B, *out, Cout) -> (B, *in, Cin)."""
    batch = dy.shape[0]
    cout = dy.shape[-1]
    cin = w.shape[1]
    out = dy.shape[1:-1]
    pads = [same_padding(s, k, stride) for s, k in zip(in_spatial, kernel)]
    padded_shape = (
        (batch,)
        + tuple(s + b + a for s, (b, a) in zip(in_spatial, pads))
        + (cin,)
    )
    dxp = np.zeros(padded_shape, dtype=dy.dtype)
    dy2 = dy.reshape(-1, cout)
    for idx, offs in enumerate(_kernel_offsets(kernel)):
        piece = (dy2 @ w[idx].T).reshape(dy.shape[:-1] + (cin,))
        dxp[
            (slice(None),)
            + tuple(slice(o, o + n * stride, stride) for o, n in zip(offs, out))
            + (slice(None),)
        ] += piece
    core = (slice(None),) + tuple(
        slice(b, b + s) for s, (b, _) in zip(in_spatial, pads)
    ) + (slice(None),)
    return dxp[core]


def _conv_grad_weights(x, dy, kernel, stride):
    """Weight gradient of _conv_forward: (K, Cin, Cout)."""
    spatial = x.shape[1:-1]
    cin = x.shape[-1]
    cout = dy.shape[-1]
    out = dy.shape[1:-1]
    pads = [same_padding(s, k, stride) for s, k in zip(spatial, kernel)]
    xp = _pad_spatial(x, pads)
    batch = x.shape[0]
    npos = int(np.prod(out))
    dy2 = dy.reshape(batch * npos, cout)
    dw = np.empty((len(_kernel_offsets(kernel)), cin, cout), dtype=x.dtype)
    for idx, offs in enumerate(_kernel_offsets(kernel)):
        view = xp[
            (slice(None),)
            + tuple(slice(o, o + n * stride, stride) for o, n in zip(offs, out))
            + (slice(None),)
        ]
        dw[idx] = view.reshape(batch * npos, cin).T @ dy2
    return dw


# ---------------------------------------------------------------------------
# layers
# ---------------------------------------------------------------------------

class Layer:
    """Minimal layer protocol: forward caches, backward consumes the cache."""

    trainable = ()  # parameter attribute names updated by the optimizer
    state = ()      # non-trainable tensors that still belong in checkpoints

    def __init__(self):
        self.grads = {}

    def forward(self, x, train=False, rng=None):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError

    def params(self):
        return {name: getattr(self, name) for name in self.trainable}

    def tensors(self):
        out = {name: getattr(self, name) for name in self.trainable}
        out.update({name: getattr(self, name) for name in self.state})
        return out


class Dense(Layer):
    trainable = ("w", "b")

    def __init__(self, w, b):
        super().__init__()
        self.w = w
        self.b = b

    def forward(self, x, train=False, rng=None):
        self._x = x
        return x @ self.w + self.b

    def backward(self, dy):
        self.grads = {"w": self._x.T @ dy, "b": dy.sum(axis=0)}
        return dy @ self.w.T


class Conv(Layer):
    """Strided N-D convolution, 'same' padding with ceil division."""

    trainable = ("w", "b")

    def __init__(self, w, b, kernel, stride):
        super().__init__()
        self.w = w  # (K, Cin, Cout)
        self.b = b
        self.kernel = tuple(kernel)
        self.stride = int(stride)

    def forward(self, x, train=False, rng=None):
        self._x = x
        y = _conv_forward(x, self.w, self.kernel, self.stride)
        return y + self.b

    def backward(self, dy):
        axes = tuple(range(dy.ndim - 1))
        self.grads = {
            "w": _conv_grad_weights(self._x, dy, self.kernel, self.stride),
            "b": dy.sum(axis=axes),
        }
        return _conv_grad_input(
            dy, self.w, self.kernel, self.stride, self._x.shape[1:-1]
        )


class ConvTranspose(Layer):
    """Transposed N-D convolution: output size = input size * stride.

    Implemented as the adjoint of :class:`Conv`, so ``w`` has shape
    (K, Cout, Cin): the weights of the downsampling convolution this layer
    transposes.
    """

    trainable = ("w", "b")

    def __init__(self, w, b, kernel, stride):
        super().__init__()
        self.w = w  # (K, Cout, Cin)
        self.b = b  # (Cout,)
        self.kernel = tuple(kernel)
        self.stride = int(stride)

    def forward(self, x, train=False, rng=None):
        self._x = x
        out_spatial = tuple(s * self.stride for s in x.shape[1:-1])
        y = _conv_grad_input(x, self.w, self.kernel, self.stride, out_spatial)
        return y + self.b

    def backward(self, dy):
        axes = tuple(range(dy.ndim - 1))
        self.grads = {
            "w": _conv_grad_weights(dy, self._x, self.kernel, self.stride),
            "b": dy.sum(axis=axes),
        }
        return _conv_forward(dy, self.w, self.kernel, self.stride)


class BatchNorm(Layer):
    """Per-channel batch normalization over batch and spatial axes."""

    trainable = ("gamma", "beta")
    state = ("running_mean", "running_var")

    def __init__(self, channels, momentum, dtype=np.float32):
        super().__init__()
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.momentum = float(momentum)

    def forward(self, x, train=False, rng=None):
        axes = tuple(range(x.ndim - 1))
        if train:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            m = x.dtype.type(self.momentum)
            one = x.dtype.type(1.0)
            self.running_mean = (m * self.running_mean + (one - m) * mean).astype(
                x.dtype
            )
            self.running_var = (m * self.running_var + (one - m) * var).astype(x.dtype)
        else:
            mean = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + x.dtype.type(BN_EPS))
        xhat = (x - mean) * inv_std
        self._train = train
        self._xhat = xhat
        self._inv_std = inv_std.astype(x.dtype)
        self._count = int(np.prod([x.shape[a] for a in axes]))
        return self.gamma * xhat + self.beta

    def backward(self, dy):
        axes = tuple(range(dy.ndim - 1))
        xhat = self._xhat
        self.grads = {
            "gamma": (dy * xhat).sum(axis=axes),
            "beta": dy.sum(axis=axes),
        }
        dxhat = dy * self.gamma
        if not self._train:
            return dxhat * self._inv_std
        n = dy.dtype.type(self._count)
        sum_dxhat = dxhat.sum(axis=axes)
        sum_dxhat_xhat = (dxhat * xhat).sum(axis=axes)
        return (self._inv_std / n) * (
            n * dxhat - sum_dxhat - xhat * sum_dxhat_xhat
        )


class Dropout(Layer):
    """Inverted dropout; identity when not training or rate is zero."""

    def __init__(self, rate):
        super().__init__()
        self.rate = float(rate)

    def forward(self, x, train=False, rng=None):
        if not train or self.rate <= 0.0:
            self._mask = None
            return x
        if rng is None:
            raise ValueError("training-mode dropout needs an rng")
        keep = x.dtype.type(1.0 - self.rate)
        self._mask = (rng.random(x.shape) >= self.rate).astype(x.dtype) / keep
        return x * self._mask

    def backward(self, dy):
        if self._mask is None:
            return dy
        return dy * self._mask


class Relu(Layer):
    def forward(self, x, train=False, rng=None):
        self._pos = x > 0
        return x * self._pos

    def backward(self, dy):
        return dy * self._pos


class LeakyRelu(Layer):
    def __init__(self, alpha):
        super().__init__()
        self.alpha = float(alpha)

    def forward(self, x, train=False, rng=None):
        self._pos = x > 0
        return np.where(self._pos, x, x.dtype.type(self.alpha) * x)

    def backward(self, dy):
        return np.where(self._pos, dy, dy.dtype.type(self.alpha) * dy)


class Tanh(Layer):
    def forward(self, x, train=False, rng=None):
        self._y = np.tanh(x)
        return self._y

    def backward(self, dy):
        return dy * (1.0 - self._y * self._y)


class Sigmoid(Layer):
    def forward(self, x, train=False, rng=None):
        # numerically stable on both tails
        y = np.empty_like(x)
        pos = x >= 0
        y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        y[~pos] = ex / (1.0 + ex)
        self._y = y
        return y

    def backward(self, dy):
        return dy * self._y * (1.0 - self._y)


class Reshape(Layer):
    def __init__(self, shape):
        super().__init__()
        self.shape = tuple(shape)  # per-sample shape, batch axis implied

    def forward(self, x, train=False, rng=None):
        self._in_shape = x.shape
        return x.reshape((x.shape[0],) + self.shape)

    def backward(self, dy):
        return dy.reshape(self._in_shape)


class Flatten(Layer):
    def forward(self, x, train=False, rng=None):
        self._in_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._in_shape)


class Sequential:
    """Ordered layer container with named parameter access."""

    def __init__(self, named_layers):
        self.named_layers = list(named_layers)  # [(name, layer), ...]

    @property
    def layers(self):
        return [layer for _, layer in self.named_layers]

    def forward(self, x, train=False, rng=None):
        for _, layer in self.named_layers:
            x = layer.forward(x, train=train, rng=rng)
        return x

    def backward(self, dy):
        for _, layer in reversed(self.named_layers):
            dy = layer.backward(dy)
        return dy

    def params(self):
        out = {}
        for name, layer in self.named_layers:
            for pname, arr in layer.params().items():
                out[f"{name}.{pname}"] = arr
        return out

    def tensors(self):
        out = {}
        for name, layer in self.named_layers:
            for pname, arr in layer.tensors().items():
                out[f"{name}.{pname}"] = arr
        return out

    def grads(self):
        out = {}
        for name, layer in self.named_layers:
            for pname, grad in layer.grads.items():
                out[f"{name}.{pname}"] = grad
        return out

    def set_tensor(self, key, value):
        name, pname = key.rsplit(".", 1)
        for lname, layer in self.named_layers:
            if lname == name:
                current = getattr(layer, pname)
                if current.shape != value.shape:
                    raise ValueError(
                        f"tensor {key}: shape {value.shape} != expected {current.shape}"
                    )
                setattr(layer, pname, value.astype(current.dtype))
                return
        raise KeyError(key)
