"""Layer primitives for the built-in network engine.

All activations are float64 arrays with a leading batch dimension.
Convolution and pooling use square kernels over valid windows (no padding).
"""

from __future__ import annotations

import numpy as np

Array = np.ndarray


def pooled_extent(extent: int, kernel: int, stride: int) -> int:
    return (extent - kernel) // stride + 1


def im2col(x: Array, kernel: int, stride: int) -> Array:
    """Gather sliding windows of (N, C, H, W) into (N, C, k, k, Ho, Wo)."""
    n, c, h, w = x.shape
    ho = pooled_extent(h, kernel, stride)
    wo = pooled_extent(w, kernel, stride)
    cols = np.empty((n, c, kernel, kernel, ho, wo), dtype=x.dtype)
    for i in range(kernel):
        for j in range(kernel):
            cols[:, :, i, j] = x[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride]
    return cols


def col2im(cols: Array, shape: tuple[int, ...], kernel: int, stride: int) -> Array:
    """Scatter-add sliding windows back into image space (adjoint of im2col)."""
    n, c, h, w = shape
    ho = pooled_extent(h, kernel, stride)
    wo = pooled_extent(w, kernel, stride)
    x = np.zeros(shape, dtype=cols.dtype)
    for i in range(kernel):
        for j in range(kernel):
            x[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += cols[:, :, i, j]
    return x


class Dense:
    kind = "dense"
    has_params = True

    def __init__(self, in_features: int, out_features: int,
                 weight: Array | None = None, bias: Array | None = None):
        if in_features < 1 or out_features < 1:
            raise ValueError("dense layer sizes must be positive")
        self.in_features = int(in_features)
        self.out_features = int(out_features)
        self.weight = (np.zeros((out_features, in_features)) if weight is None
                       else np.asarray(weight, dtype=np.float64))
        self.bias = (np.zeros(out_features) if bias is None
                     else np.asarray(bias, dtype=np.float64))
        if self.weight.shape != (self.out_features, self.in_features):
            raise ValueError(
                f"dense weight shape {self.weight.shape} does not match "
                f"({self.out_features}, {self.in_features})")
        if self.bias.shape != (self.out_features,):
            raise ValueError(f"dense bias shape {self.bias.shape} does not match ({self.out_features},)")

    def spec(self) -> tuple:
        return ("dense", self.in_features, self.out_features)

    def out_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        if in_shape != (self.in_features,):
            raise ValueError(f"expects input shape ({self.in_features},), got {in_shape}")
        return (self.out_features,)

    def forward(self, x: Array) -> Array:
        return x @ self.weight.T + self.bias

    def backward(self, x: Array, grad_out: Array) -> tuple[Array, tuple[Array, Array]]:
        dw = grad_out.T @ x
        db = grad_out.sum(axis=0)
        dx = grad_out @ self.weight
        return dx, (dw, db)


class Conv2d:
    kind = "conv2d"
    has_params = True

    def __init__(self, in_channels: int, out_channels: int, kernel: int, stride: int,
                 weight: Array | None = None, bias: Array | None = None):
        if in_channels < 1 or out_channels < 1 or kernel < 1 or stride < 1:
            raise ValueError("conv2d parameters must be positive")
        self.in_channels = int(in_channels)
        self.out_channels = int(out_channels)
        self.kernel = int(kernel)
        self.stride = int(stride)
        wshape = (self.out_channels, self.in_channels, self.kernel, self.kernel)
        self.weight = np.zeros(wshape) if weight is None else np.asarray(weight, dtype=np.float64)
        self.bias = (np.zeros(self.out_channels) if bias is None
                     else np.asarray(bias, dtype=np.float64))
        if self.weight.shape != wshape:
            raise ValueError(f"conv2d weight shape {self.weight.shape} does not match {wshape}")
        if self.bias.shape != (self.out_channels,):
            raise ValueError(f"conv2d bias shape {self.bias.shape} does not match ({self.out_channels},)")

    def spec(self) -> tuple:
        return ("conv2d", self.in_channels, self.out_channels, self.kernel, self.stride)

    def out_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        if len(in_shape) != 3 or in_shape[0] != self.in_channels:
            raise ValueError(f"expects input shape ({self.in_channels}, H, W), got {in_shape}")
        _, h, w = in_shape
        if h < self.kernel or w < self.kernel:
            raise ValueError(f"kernel {self.kernel} exceeds input spatial size {(h, w)}")
        return (self.out_channels,
                pooled_extent(h, self.kernel, self.stride),
                pooled_extent(w, self.kernel, self.stride))

    def forward(self, x: Array) -> Array:
        n = x.shape[0]
        cols = im2col(x, self.kernel, self.stride)
        ho, wo = cols.shape[4], cols.shape[5]
        cols2 = cols.reshape(n, self.in_channels * self.kernel * self.kernel, ho * wo)
        w2 = self.weight.reshape(self.out_channels, -1)
        out = np.matmul(w2, cols2) + self.bias[:, None]
        return out.reshape(n, self.out_channels, ho, wo)

    def backward(self, x: Array, grad_out: Array) -> tuple[Array, tuple[Array, Array]]:
        n, _, ho, wo = grad_out.shape
        k, s = self.kernel, self.stride
        cols2 = im2col(x, k, s).reshape(n, self.in_channels * k * k, ho * wo)
        g2 = grad_out.reshape(n, self.out_channels, ho * wo)
        w2 = self.weight.reshape(self.out_channels, -1)
        dw = np.matmul(g2, cols2.transpose(0, 2, 1)).sum(axis=0).reshape(self.weight.shape)
        db = grad_out.sum(axis=(0, 2, 3))
        dcols2 = np.matmul(w2.T, g2)
        dx = col2im(dcols2.reshape(n, self.in_channels, k, k, ho, wo), x.shape, k, s)
        return dx, (dw, db)


class ReLU:
    kind = "relu"
    has_params = False

    def spec(self) -> tuple:
        return ("relu",)

    def out_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        return in_shape

    def forward(self, x: Array) -> Array:
        return np.maximum(x, 0.0)

    def backward(self, x: Array, grad_out: Array) -> tuple[Array, None]:
        return grad_out * (x > 0.0), None


class MaxPool2d:
    kind = "maxpool2d"
    has_params = False

    def __init__(self, kernel: int, stride: int):
        if kernel < 1 or stride < 1:
            raise ValueError("maxpool2d parameters must be positive")
        self.kernel = int(kernel)
        self.stride = int(stride)

    def spec(self) -> tuple:
        return ("maxpool2d", self.kernel, self.stride)

    def out_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        if len(in_shape) != 3:
            raise ValueError(f"expects input shape (C, H, W), got {in_shape}")
        c, h, w = in_shape
        if h < self.kernel or w < self.kernel:
            raise ValueError(f"kernel {self.kernel} exceeds input spatial size {(h, w)}")
        return (c, pooled_extent(h, self.kernel, self.stride),
                pooled_extent(w, self.kernel, self.stride))

    def _windows(self, x: Array) -> Array:
        cols = im2col(x, self.kernel, self.stride)
        n, c, _, _, ho, wo = cols.shape
        return cols.reshape(n, c, self.kernel * self.kernel, ho, wo)

    def forward(self, x: Array) -> Array:
        return self._windows(x).max(axis=2)

    def route(self, x: Array, values: Array) -> Array:
        """Send each window's value entirely to that window's argmax input.

        Ties go to the first position in row-major window scan order. Used by
        both the gradient and the relevance backward passes.
        """
        flat = self._windows(x)
        n, c, _, ho, wo = flat.shape
        idx = flat.argmax(axis=2)
        routed = np.zeros_like(flat)
        np.put_along_axis(routed, idx[:, :, None], values[:, :, None], axis=2)
        routed = routed.reshape(n, c, self.kernel, self.kernel, ho, wo)
        return col2im(routed, x.shape, self.kernel, self.stride)

    def backward(self, x: Array, grad_out: Array) -> tuple[Array, None]:
        return self.route(x, grad_out), None


class Flatten:
    kind = "flatten"
    has_params = False

    def spec(self) -> tuple:
        return ("flatten",)

    def out_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        size = 1
        for d in in_shape:
            size *= d
        return (size,)

    def forward(self, x: Array) -> Array:
        return x.reshape(x.shape[0], -1)

    def backward(self, x: Array, grad_out: Array) -> tuple[Array, None]:
        return grad_out.reshape(x.shape), None


LAYER_KINDS = {"dense": Dense, "conv2d": Conv2d, "relu": ReLU,
               "maxpool2d": MaxPool2d, "flatten": Flatten}


def layer_from_spec(spec: tuple) -> Dense | Conv2d | ReLU | MaxPool2d | Flatten:
    kind, *args = spec
    if kind == "dense":
        return Dense(*[int(a) for a in args])
    if kind == "conv2d":
        return Conv2d(*[int(a) for a in args])
    if kind == "relu":
        return ReLU()
    if kind == "maxpool2d":
        return MaxPool2d(*[int(a) for a in args])
    if kind == "flatten":
        return Flatten()
    raise ValueError(f"unknown layer kind {kind!r}")
