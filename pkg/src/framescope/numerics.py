"""Dense tensor kernels with analytic backward passes.

Tensors are plain numpy arrays: row-major (C-order), dtype float32 or
float64.  float32 is the default compute dtype; float64 is used for
gradient checking.  Every kernel is a pure function of its inputs and is
deterministic bit-for-bit: identical inputs give identical outputs across
runs and across any thread count used by callers, because nothing here
depends on scheduling and all reductions happen in a fixed order.

MAC accounting
--------------
The cost model counts multiplications only (additions are free).  Kernels
report their counts to any active ``count_macs()`` context:

* ``matmul``  (m, k) x (k, n)            -> m * n * k
* ``linear``  tokens x C_in -> C_out     -> tokens * C_in * C_out
* ``adaptive_avg_pool2d`` C x Hr x Wr    -> C * Hr * Wr   (one multiply
  by 1/region_size per output element)
* ``depthwise_conv3x3``  C x H x W       -> 9 * C * H * W

Elementwise work (softmax exponentials, GELU, attention-logit scaling)
and all backward passes are deliberately *not* counted; the counter
models forward pipeline compute and must stay in exact agreement with
the analytic report in :mod:`framescope.pipeline`.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, UnsupportedUpsampleError

DEFAULT_DTYPE = np.float32

_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


# ---------------------------------------------------------------------------
# MAC instrumentation
# ---------------------------------------------------------------------------

class MacCounter:
    """Accumulates multiply counts while active; see ``count_macs()``."""

    def __init__(self) -> None:
        self.total = 0

    def __enter__(self) -> "MacCounter":
        with _counter_lock:
            _active_counters.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        with _counter_lock:
            _active_counters.remove(self)


_active_counters: list[MacCounter] = []
_counter_lock = threading.Lock()


def count_macs() -> MacCounter:
    """Context manager that counts forward-pass multiplies of the kernels."""
    return MacCounter()


def _add_macs(n: int) -> None:
    if _active_counters:
        with _counter_lock:
            for c in _active_counters:
                c.total += n


# ---------------------------------------------------------------------------
# Parameter containers
# ---------------------------------------------------------------------------

@dataclass
class LinearParams:
    """Weights of one affine map: ``y = x @ weight + bias``.

    weight: (C_in, C_out), bias: (C_out,); dtypes must match.
    """

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        if self.weight.ndim != 2 or self.bias.ndim != 1:
            raise ShapeError(
                f"linear params need 2-d weight and 1-d bias, got "
                f"{self.weight.shape} and {self.bias.shape}"
            )
        if self.weight.shape[1] != self.bias.shape[0]:
            raise ShapeError(
                f"weight {self.weight.shape} and bias {self.bias.shape} disagree "
                f"on output width"
            )
        if self.weight.dtype != self.bias.dtype:
            raise ShapeError(
                f"weight dtype {self.weight.dtype} != bias dtype {self.bias.dtype}"
            )

    @property
    def c_in(self) -> int:
        return self.weight.shape[0]

    @property
    def c_out(self) -> int:
        return self.weight.shape[1]


@dataclass
class ConvParams:
    """Depthwise 3x3 filter bank: kernel (C, 3, 3), bias (C,)."""

    kernel: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        if self.kernel.ndim != 3 or self.kernel.shape[1:] != (3, 3):
            raise ShapeError(
                f"depthwise kernel must be (C, 3, 3), got {self.kernel.shape}"
            )
        if self.bias.shape != (self.kernel.shape[0],):
            raise ShapeError(
                f"conv bias {self.bias.shape} does not match kernel channels "
                f"{self.kernel.shape[0]}"
            )
        if self.kernel.dtype != self.bias.dtype:
            raise ShapeError(
                f"kernel dtype {self.kernel.dtype} != bias dtype {self.bias.dtype}"
            )

    @property
    def channels(self) -> int:
        return self.kernel.shape[0]


# ---------------------------------------------------------------------------
# Forward kernels
# ---------------------------------------------------------------------------

def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of a (m, k) and b (k, n).

    Counts m*n*k multiplies.  Raises ShapeError naming both shapes on an
    inner-dimension mismatch.
    """
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} x {b.shape}")
    _add_macs(a.shape[0] * b.shape[1] * a.shape[1])
    return a @ b


def softmax_rows(m: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a 2-d matrix.

    The row maximum is subtracted before exponentiation (mandatory for
    stability), so shifting a row by a constant leaves its output unchanged
    and every output row sums to 1 within dtype tolerance.
    """
    if m.ndim != 2:
        raise ShapeError(f"softmax_rows needs a 2-d matrix, got {m.shape}")
    shifted = m - m.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def gelu(x: np.ndarray) -> np.ndarray:
    """GELU activation, tanh approximation.

    Exactly: ``0.5 * x * (1 + tanh(sqrt(2/pi) * (x + 0.044715 * x**3)))``.
    """
    return 0.5 * x * (1.0 + np.tanh(_GELU_C * (x + _GELU_A * x * x * x)))


def linear(x: np.ndarray, p: LinearParams) -> np.ndarray:
    """Affine map over the last axis: (..., C_in) -> (..., C_out)."""
    if x.shape[-1] != p.c_in:
        raise ShapeError(
            f"linear input width {x.shape[-1]} does not match weight "
            f"{p.weight.shape}"
        )
    flat = x.reshape(-1, p.c_in)
    out = matmul(flat, p.weight) + p.bias
    return out.reshape(*x.shape[:-1], p.c_out)


def ffn_forward(x: np.ndarray, p1: LinearParams, p2: LinearParams) -> np.ndarray:
    """Two-layer feed-forward network applied independently per token.

    x: (B, N, C_in); p1 maps C_in -> C_hidden, p2 maps C_hidden -> C_out.
    Computes ``linear -> gelu -> linear``.
    """
    if x.ndim != 3:
        raise ShapeError(f"ffn_forward needs (B, N, C_in), got {x.shape}")
    if p1.c_out != p2.c_in:
        raise ShapeError(
            f"ffn hidden widths disagree: first layer {p1.weight.shape}, "
            f"second layer {p2.weight.shape}"
        )
    return linear(gelu(linear(x, p1)), p2)


def adaptive_avg_pool2d(x: np.ndarray, hr: int, wr: int) -> np.ndarray:
    """Adaptive average pooling of (C, H, W) down to (C, hr, wr).

    Output cell (i, j) averages the input region
    ``rows [floor(i*H/hr), ceil((i+1)*H/hr)) x cols [floor(j*W/wr), ceil((j+1)*W/wr))``.
    Regions may overlap when hr does not divide H.  With hr == H and
    wr == W this is the identity; upsampling is not supported.
    """
    if x.ndim != 3:
        raise ShapeError(f"adaptive_avg_pool2d needs (C, H, W), got {x.shape}")
    c, h, w = x.shape
    if hr < 1 or wr < 1:
        raise UnsupportedUpsampleError(f"target grid must be positive, got ({hr}, {wr})")
    if hr > h or wr > w:
        raise UnsupportedUpsampleError(
            f"cannot pool ({h}, {w}) up to ({hr}, {wr}); upsampling unsupported"
        )
    out = np.empty((c, hr, wr), dtype=x.dtype)
    for i in range(hr):
        r0, r1 = (i * h) // hr, -((-(i + 1) * h) // hr)
        for j in range(wr):
            c0, c1 = (j * w) // wr, -((-(j + 1) * w) // wr)
            out[:, i, j] = x[:, r0:r1, c0:c1].mean(axis=(1, 2))
    _add_macs(c * hr * wr)
    return out


def depthwise_conv3x3(x: np.ndarray, p: ConvParams) -> np.ndarray:
    """Per-channel 3x3 cross-correlation, zero padding 1, stride 1, plus bias.

    Output has the same (C, H, W) shape as the input.  The nine taps are
    accumulated in fixed scan order.
    """
    if x.ndim != 3:
        raise ShapeError(f"depthwise_conv3x3 needs (C, H, W), got {x.shape}")
    c, h, w = x.shape
    if p.channels != c:
        raise ShapeError(
            f"input has {c} channels but kernel is {p.kernel.shape}"
        )
    pad = np.zeros((c, h + 2, w + 2), dtype=x.dtype)
    pad[:, 1 : h + 1, 1 : w + 1] = x
    out = np.zeros((c, h, w), dtype=x.dtype)
    for u in range(3):
        for v in range(3):
            out += p.kernel[:, u, v][:, None, None] * pad[:, u : u + h, v : v + w]
    out += p.bias[:, None, None]
    _add_macs(9 * c * h * w)
    return out


# ---------------------------------------------------------------------------
# Backward kernels (not MAC-counted; the cost model is forward-only)
# ---------------------------------------------------------------------------

def matmul_grad(
    a: np.ndarray, b: np.ndarray, g: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of ``matmul(a, b)`` w.r.t. a and b given upstream g."""
    if g.shape != (a.shape[0], b.shape[1]):
        raise ShapeError(
            f"upstream gradient {g.shape} does not match matmul output "
            f"({a.shape[0]}, {b.shape[1]})"
        )
    return g @ b.T, a.T @ g


def gelu_grad(x: np.ndarray) -> np.ndarray:
    """Derivative of the tanh-approximation GELU at x."""
    inner = _GELU_C * (x + _GELU_A * x * x * x)
    t = np.tanh(inner)
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * _GELU_C * (1.0 + 3.0 * _GELU_A * x * x)


def linear_grad(
    x: np.ndarray, p: LinearParams, g: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of ``linear(x, p)``: returns (dx, dweight, dbias)."""
    if g.shape != (*x.shape[:-1], p.c_out):
        raise ShapeError(
            f"upstream gradient {g.shape} does not match linear output "
            f"{(*x.shape[:-1], p.c_out)}"
        )
    gf = g.reshape(-1, p.c_out)
    xf = x.reshape(-1, p.c_in)
    dx = (gf @ p.weight.T).reshape(x.shape)
    return dx, xf.T @ gf, gf.sum(axis=0)


def ffn_grad(
    x: np.ndarray, p1: LinearParams, p2: LinearParams, g: np.ndarray
) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]:
    """Gradients of ``ffn_forward``: (dx, (dW1, db1), (dW2, db2))."""
    h1 = linear(x, p1)
    a = gelu(h1)
    da, dw2, db2 = linear_grad(a, p2, g)
    dh1 = da * gelu_grad(h1)
    dx, dw1, db1 = linear_grad(x, p1, dh1)
    return dx, (dw1, db1), (dw2, db2)


def pool_grad(in_shape: tuple[int, int, int], g: np.ndarray) -> np.ndarray:
    """Gradient of ``adaptive_avg_pool2d`` w.r.t. its (C, H, W) input.

    Each input cell collects ``g[c, i, j] / region_size`` from every output
    region that covers it (regions overlap for non-divisible grids).
    """
    c, h, w = in_shape
    hr, wr = g.shape[1], g.shape[2]
    if g.shape[0] != c:
        raise ShapeError(f"gradient {g.shape} does not match input {in_shape}")
    if hr > h or wr > w:
        raise UnsupportedUpsampleError(
            f"cannot pool ({h}, {w}) up to ({hr}, {wr}); upsampling unsupported"
        )
    dx = np.zeros(in_shape, dtype=g.dtype)
    for i in range(hr):
        r0, r1 = (i * h) // hr, -((-(i + 1) * h) // hr)
        for j in range(wr):
            c0, c1 = (j * w) // wr, -((-(j + 1) * w) // wr)
            dx[:, r0:r1, c0:c1] += (g[:, i, j] / ((r1 - r0) * (c1 - c0)))[:, None, None]
    return dx


def conv_grad(
    x: np.ndarray, p: ConvParams, g: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of ``depthwise_conv3x3``: returns (dx, dkernel, dbias)."""
    if g.shape != x.shape:
        raise ShapeError(f"upstream gradient {g.shape} does not match input {x.shape}")
    c, h, w = x.shape
    if p.channels != c:
        raise ShapeError(f"input has {c} channels but kernel is {p.kernel.shape}")
    pad = np.zeros((c, h + 2, w + 2), dtype=x.dtype)
    pad[:, 1 : h + 1, 1 : w + 1] = x
    dk = np.empty_like(p.kernel)
    dpad = np.zeros_like(pad)
    for u in range(3):
        for v in range(3):
            dk[:, u, v] = (pad[:, u : u + h, v : v + w] * g).sum(axis=(1, 2))
            dpad[:, u : u + h, v : v + w] += p.kernel[:, u, v][:, None, None] * g
    dx = dpad[:, 1 : h + 1, 1 : w + 1]
    return dx, dk, g.sum(axis=(1, 2))
