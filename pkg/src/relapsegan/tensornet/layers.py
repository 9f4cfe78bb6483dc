"""Layer specs, forward/backward passes and parameter initialisation.

Networks are plain lists of :class:`LayerSpec` plus one parameter list per
layer (``[W, b]`` for dense and convolution layers, ``[]`` otherwise).
Activations are batched, ``(N, ...)`` float64 arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels


class ShapeError(ValueError):
    pass


KINDS = ("dense", "conv2d", "transposed_conv2d", "relu", "leaky_relu", "sigmoid", "flatten", "reshape")
LEAK = 0.2


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    n_in: int = 0
    n_out: int = 0
    kernel: int = 0
    stride: int = 1
    pad: int = 0
    out_pad: int = 0
    shape: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")


def dense(n_in, n_out):
    return LayerSpec("dense", n_in=n_in, n_out=n_out)


def conv2d(c_in, c_out, kernel, stride=1, pad=0):
    return LayerSpec("conv2d", n_in=c_in, n_out=c_out, kernel=kernel, stride=stride, pad=pad)


def transposed_conv2d(c_in, c_out, kernel, stride=1, pad=0, out_pad=0):
    return LayerSpec("transposed_conv2d", n_in=c_in, n_out=c_out, kernel=kernel, stride=stride, pad=pad, out_pad=out_pad)


def relu():
    return LayerSpec("relu")


def leaky_relu():
    return LayerSpec("leaky_relu")


def sigmoid():
    return LayerSpec("sigmoid")


def flatten():
    return LayerSpec("flatten")


def reshape(*shape):
    return LayerSpec("reshape", shape=tuple(int(s) for s in shape))


def param_shapes(spec: LayerSpec) -> list[tuple]:
    if spec.kind == "dense":
        return [(spec.n_out, spec.n_in), (spec.n_out,)]
    if spec.kind == "conv2d":
        return [(spec.n_out, spec.n_in, spec.kernel, spec.kernel), (spec.n_out,)]
    if spec.kind == "transposed_conv2d":
        return [(spec.n_in, spec.n_out, spec.kernel, spec.kernel), (spec.n_out,)]
    return []


def output_shape(spec: LayerSpec, in_shape: tuple) -> tuple:
    """Per-sample output shape; raises :class:`ShapeError` on mismatch."""
    k = spec.kind
    if k == "dense":
        if in_shape != (spec.n_in,):
            raise ShapeError(f"dense expects ({spec.n_in},), got {in_shape}")
        return (spec.n_out,)
    if k in ("conv2d", "transposed_conv2d"):
        if len(in_shape) != 3 or in_shape[0] != spec.n_in:
            raise ShapeError(f"{k} expects ({spec.n_in}, H, W), got {in_shape}")
        _, h, w = in_shape
        if k == "conv2d":
            ho = kernels.out_size(h, spec.kernel, spec.stride, spec.pad)
            wo = kernels.out_size(w, spec.kernel, spec.stride, spec.pad)
        else:
            ho = (h - 1) * spec.stride - 2 * spec.pad + spec.kernel + spec.out_pad
            wo = (w - 1) * spec.stride - 2 * spec.pad + spec.kernel + spec.out_pad
        if ho <= 0 or wo <= 0:
            raise ShapeError(f"{k} produces an empty output from {in_shape}")
        return (spec.n_out, ho, wo)
    if k == "flatten":
        return (int(np.prod(in_shape)),)
    if k == "reshape":
        if int(np.prod(in_shape)) != int(np.prod(spec.shape)):
            raise ShapeError(f"cannot reshape {in_shape} to {spec.shape}")
        return spec.shape
    return in_shape


@dataclass
class Network:
    specs: list[LayerSpec]
    params: list[list[np.ndarray]]
    input_shape: tuple

    def __post_init__(self):
        shape = tuple(self.input_shape)
        for spec, ps in zip(self.specs, self.params):
            expected = param_shapes(spec)
            if [p.shape for p in ps] != expected:
                raise ShapeError(f"{spec.kind} parameters have shapes {[p.shape for p in ps]}, want {expected}")
            shape = output_shape(spec, shape)
        self.output_shape = shape

    def flat_params(self) -> list[np.ndarray]:
        return [p for ps in self.params for p in ps]

    def copy(self) -> "Network":
        return Network(list(self.specs), [[p.copy() for p in ps] for ps in self.params], self.input_shape)


def init_params(specs: Sequence[LayerSpec], seed, input_shape: tuple) -> Network:
    """Glorot-uniform weights, zero biases, deterministic per seed."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    params = []
    shape = tuple(input_shape)
    for spec in specs:
        shapes = param_shapes(spec)
        if shapes:
            wshape = shapes[0]
            if spec.kind == "dense":
                fan_in, fan_out = spec.n_in, spec.n_out
            else:
                area = spec.kernel * spec.kernel
                fan_in, fan_out = spec.n_in * area, spec.n_out * area
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            params.append([rng.uniform(-limit, limit, wshape), np.zeros(shapes[1])])
        else:
            params.append([])
        shape = output_shape(spec, shape)
    return Network(list(specs), params, tuple(input_shape))


# --- per-layer passes ------------------------------------------------------
#
# Spatial activations travel between layers channels-last, (N, H, W, C);
# ``forward``/``backward`` convert at the network boundary so callers only
# ever see (N, C, H, W). ``flatten`` and ``reshape`` keep channel-major order.


def _to_nhwc(x):
    return x.transpose(0, 2, 3, 1) if x.ndim == 4 else x


def _to_nchw(x):
    return x.transpose(0, 3, 1, 2) if x.ndim == 4 else x


def _wmat_conv(W):
    # (Cout, Cin, k, k) -> (Cout, k*k*Cin) matching the column layout
    return W.transpose(0, 2, 3, 1).reshape(W.shape[0], -1)


def _wmat_tconv(W):
    # (Cin, Cout, k, k) -> (Cin, k*k*Cout)
    return W.transpose(0, 2, 3, 1).reshape(W.shape[0], -1)


def _conv_forward(spec, W, b, x):
    n, h, w, _ = x.shape
    k, s, p = spec.kernel, spec.stride, spec.pad
    ho, wo = kernels.out_size(h, k, s, p), kernels.out_size(w, k, s, p)
    cols = kernels.im2col(x, k, s, p)
    out = cols @ _wmat_conv(W).T
    out += b
    return out.reshape(n, ho, wo, spec.n_out), cols


def _conv_backward(spec, W, cache, g, param_grads=True):
    x_shape, cols = cache
    n, ho, wo, cout = g.shape
    gf = g.reshape(n * ho * wo, cout)
    wm = _wmat_conv(W)
    dx = kernels.col2im(gf @ wm, x_shape, spec.kernel, spec.stride, spec.pad)
    if not param_grads:
        return dx, []
    k = spec.kernel
    dW = (gf.T @ cols).reshape(cout, k, k, -1).transpose(0, 3, 1, 2)
    return dx, [np.ascontiguousarray(dW), gf.sum(axis=0)]


def _tconv_forward(spec, W, b, x):
    n, h, w, cin = x.shape
    _, ho, wo = output_shape(spec, (cin, h, w))
    xf = x.reshape(n * h * w, cin)
    cols = xf @ _wmat_tconv(W)
    out = kernels.col2im(cols, (n, ho, wo, spec.n_out), spec.kernel, spec.stride, spec.pad)
    return out + b, xf


def _tconv_backward(spec, W, cache, g, param_grads=True):
    x_shape, xf = cache
    n, h, w, cin = x_shape
    gcols = kernels.im2col(g, spec.kernel, spec.stride, spec.pad)
    dx = (gcols @ _wmat_tconv(W).T).reshape(n, h, w, cin)
    if not param_grads:
        return dx, []
    k = spec.kernel
    dW = (xf.T @ gcols).reshape(cin, k, k, -1).transpose(0, 3, 1, 2)
    return dx, [np.ascontiguousarray(dW), g.sum(axis=(0, 1, 2))]


def _sigmoid(t):
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def layer_forward(spec: LayerSpec, params, x):
    """One layer on channels-last activations; returns (output, cache)."""
    k = spec.kind
    if k == "dense":
        W, b = params
        return x @ W.T + b, x
    if k == "conv2d":
        out, cols = _conv_forward(spec, params[0], params[1], x)
        return out, (x.shape, cols)
    if k == "transposed_conv2d":
        out, xf = _tconv_forward(spec, params[0], params[1], x)
        return out, (x.shape, xf)
    if k == "relu":
        return np.maximum(x, 0.0), x > 0
    if k == "leaky_relu":
        mask = x > 0
        return np.where(mask, x, LEAK * x), mask
    if k == "sigmoid":
        y = _sigmoid(x)
        return y, y
    if k == "flatten":
        return _to_nchw(x).reshape(x.shape[0], -1), x.shape
    if k == "reshape":
        return _to_nhwc(_to_nchw(x).reshape((x.shape[0],) + spec.shape)), x.shape
    raise ValueError(k)


def layer_backward(spec: LayerSpec, params, cache, g, param_grads=True):
    """Return (grad wrt layer input, list of parameter grads)."""
    k = spec.kind
    if k == "dense":
        W, _ = params
        return g @ W, ([g.T @ cache, g.sum(axis=0)] if param_grads else [])
    if k == "conv2d":
        return _conv_backward(spec, params[0], cache, g, param_grads)
    if k == "transposed_conv2d":
        return _tconv_backward(spec, params[0], cache, g, param_grads)
    if k == "relu":
        return g * cache, []
    if k == "leaky_relu":
        return np.where(cache, g, LEAK * g), []
    if k == "sigmoid":
        return g * cache * (1.0 - cache), []
    if k in ("flatten", "reshape"):
        # cache is the channels-last input shape
        nchw = (cache[0], cache[3], cache[1], cache[2]) if len(cache) == 4 else cache
        return _to_nhwc(_to_nchw(g).reshape(nchw)), []
    raise ValueError(k)


def softmax(logits):
    """Softmax over the last axis, shifted by the row maximum."""
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


# --- whole-network passes ----------------------------------------------------


def forward(net: Network, x: np.ndarray):
    """Run the network on a batch; returns (output, caches for backward)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1:] != tuple(net.input_shape):
        raise ShapeError(f"input shape {x.shape[1:]} does not match {net.input_shape}")
    caches = []
    x = _to_nhwc(x)
    for spec, ps in zip(net.specs, net.params):
        x, cache = layer_forward(spec, ps, x)
        caches.append(cache)
    return _to_nchw(x), caches


def backward(net: Network, caches, grad_out: np.ndarray, param_grads: bool = True):
    """Reverse pass; returns (per-layer parameter grads, grad wrt input).

    With ``param_grads=False`` only the input gradient is propagated.
    """
    g = _to_nhwc(np.asarray(grad_out, dtype=np.float64))
    grads: list[list[np.ndarray]] = [[] for _ in net.specs]
    for i in range(len(net.specs) - 1, -1, -1):
        g, grads[i] = layer_backward(net.specs[i], net.params[i], caches[i], g, param_grads)
    return grads, _to_nchw(g)


def gradients(net: Network, x: np.ndarray, loss_fn: Callable):
    """Loss value and parameter gradients for ``loss_fn(output) -> (loss, dloss/doutput)``."""
    out, caches = forward(net, x)
    loss, dout = loss_fn(out)
    if np.ndim(loss) != 0:
        raise ValueError("loss must be a scalar")
    dout = np.asarray(dout, dtype=np.float64)
    if dout.shape != out.shape:
        raise ValueError("loss gradient must match the network output shape")
    grads, _ = backward(net, caches, dout)
    return float(loss), grads
