# Copyright (c) 2023 Animatea
#
# Permission is hereby granted, free of charge, to any person obtaining
# a copy of this software and associated documentation files (the
# "Software"), to deal in the Software without restriction, including
# without limitation the rights to use, copy, modify, merge, publish,
# distribute, sublicense, and/or sell copies of the Software, and to
# permit persons to whom the Software is furnished to do so, subject to
# the following conditions:
#
# The above copyright notice and this permission notice shall be included
# in all copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND,
# EXPRESS OR IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF
# MERCHANTABILITY, FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT.
# IN NO EVENT SHALL THE AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY
# CLAIM, DAMAGES OR OTHER LIABILITY, WHETHER IN AN ACTION OF CONTRACT,
# TORT OR OTHERWISE, ARISING FROM, OUT OF OR IN CONNECTION WITH THE
# SOFTWARE OR THE USE OR OTHER DEALINGS IN THE SOFTWARE.
r"""Dense float64 numerics.

Every value flowing through the encoder is a `numpy.ndarray` of 64-bit
reals with rank 1 to 3. The functions in this module never mutate their
arguments and are safe to call concurrently on shared inputs.

!!! info
    `matmul` accumulates sequentially (left to right over the inner
    dimension) unless the caller is inside `fast_accumulation()`, in
    which case the BLAS-backed `numpy.matmul` is used. The sequential
    mode is bitwise reproducible; the fast mode is for benchmarks only.
"""
from __future__ import annotations

__all__: typing.Sequence[str] = (
    "Tensor",
    "as_tensor",
    "freeze",
    "identity",
    "fast_accumulation",
    "is_fast_accumulation",
    "matmul",
    "softmax",
    "softmax_rows",
    "log_softmax",
    "gelu",
    "gelu_derivative",
    "tanh",
    "layer_norm",
    "dropout",
)

import contextlib
import contextvars
import math
import typing

import numpy as np
import numpy.typing as npt
from scipy import special

from gconvbert.domain import model_exception as domain_exception

Tensor: typing.TypeAlias = npt.NDArray[np.float64]

_FAST_ACCUMULATION: contextvars.ContextVar[bool] = contextvars.ContextVar(
    "gconvbert_fast_accumulation",
    default=False,
)

# Above this many partial products the sequential matmul falls back to a
# per-column loop instead of materializing the (P, M, N) product cube.
_ACCUMULATE_LIMIT: typing.Final[int] = 1 << 18


def as_tensor(values: npt.ArrayLike, /, *, name: str = "tensor") -> Tensor:
    r"""Converts a value to a validated float64 tensor.

    Parameters
    ----------
    values : npt.ArrayLike
        Anything `numpy.asarray` accepts.
    name : str, optional
        Name used in error messages.

    Returns
    -------
    Tensor
        A float64 array of rank 1 to 3 with positive extents.

    Raises
    ------
    DimensionError
        If the rank is outside [1, 3] or an extent is zero.
    NumericError
        If the data contains NaN or infinity.
    """
    array = np.asarray(values, dtype=np.float64)
    if not 1 <= array.ndim <= 3 or 0 in array.shape:
        raise domain_exception.DimensionError(name, array.shape)

    if not np.all(np.isfinite(array)):
        raise domain_exception.NumericError(name, float(array[~np.isfinite(array)][0]))

    return array


def freeze(array: Tensor, /) -> Tensor:
    frozen = np.array(array, dtype=np.float64, copy=True)
    frozen.flags.writeable = False
    return frozen


def identity(size: int, /) -> Tensor:
    return np.eye(size, dtype=np.float64)


@contextlib.contextmanager
def fast_accumulation() -> typing.Iterator[None]:
    r"""Switches `matmul` to BLAS accumulation within the block.

    The flag is stored in a context variable, so it does not leak into
    other threads or tasks.
    """
    token = _FAST_ACCUMULATION.set(True)
    try:
        yield
    finally:
        _FAST_ACCUMULATION.reset(token)


def is_fast_accumulation() -> bool:
    return _FAST_ACCUMULATION.get()


def matmul(a: Tensor, b: Tensor, /) -> Tensor:
    r"""Multiplies two matrices.

    Computes `c[p, n] = sum_m a[p, m] * b[m, n]`. In the default mode the
    sum is accumulated strictly in increasing `m` order, so identical
    inputs always give bitwise identical outputs regardless of memory
    layout.

    Parameters
    ----------
    a : Tensor
        Left operand of shape (P, M).
    b : Tensor
        Right operand of shape (M, N).

    Returns
    -------
    Tensor
        Product of shape (P, N).

    Raises
    ------
    DimensionError
        If either operand is not a matrix or the inner extents differ.
    """
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise domain_exception.DimensionError("matmul", a.shape, b.shape)

    if _FAST_ACCUMULATION.get():
        return np.matmul(a, b)

    p, m = a.shape
    n = b.shape[1]
    if p * m * n <= _ACCUMULATE_LIMIT:
        products = a[:, :, np.newaxis] * b[np.newaxis, :, :]
        return np.add.accumulate(products, axis=1)[:, -1, :]

    out = a[:, 0:1] * b[0:1, :]
    for inner in range(1, m):
        out = out + a[:, inner : inner + 1] * b[inner : inner + 1, :]

    return out


def softmax_rows(x: Tensor, /) -> Tensor:
    shifted = x - np.max(x, axis=1, keepdims=True)
    exps = np.exp(shifted)
    return exps / np.sum(exps, axis=1, keepdims=True)


def softmax(x: Tensor, /) -> Tensor:
    return softmax_rows(x[np.newaxis, :])[0]


def log_softmax(x: Tensor, /) -> Tensor:
    shifted = x - np.max(x)
    return shifted - math.log(float(np.sum(np.exp(shifted))))


def gelu(x: Tensor, /) -> Tensor:
    r"""Gaussian error linear unit, exact erf form: x * Phi(x)."""
    return x * 0.5 * (1.0 + special.erf(x / math.sqrt(2.0)))


def gelu_derivative(x: Tensor, /) -> Tensor:
    cdf = 0.5 * (1.0 + special.erf(x / math.sqrt(2.0)))
    pdf = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return cdf + x * pdf


def tanh(x: Tensor, /) -> Tensor:
    return np.tanh(x)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float) -> Tensor:
    r"""Normalizes every row to zero mean and unit (biased) variance.

    Parameters
    ----------
    x : Tensor
        Input of shape (P, C).
    gamma : Tensor
        Per-channel scale of shape (C,).
    beta : Tensor
        Per-channel shift of shape (C,).
    eps : float
        Positive constant added to the variance.

    Returns
    -------
    Tensor
        Normalized tensor of shape (P, C).
    """
    if eps <= 0:
        raise domain_exception.ConfigurationError("must be positive", field="eps")

    if x.ndim != 2 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise domain_exception.DimensionError("layer_norm", x.shape, gamma.shape, beta.shape)

    mean = np.mean(x, axis=1, keepdims=True)
    centered = x - mean
    variance = np.mean(centered * centered, axis=1, keepdims=True)
    return centered / np.sqrt(variance + eps) * gamma + beta


def dropout(
    x: Tensor,
    rate: float,
    rng: typing.Optional[np.random.Generator],
) -> typing.Tuple[Tensor, typing.Optional[Tensor]]:
    r"""Inverted dropout.

    Returns the input unchanged (and no mask) when `rate` is zero or no
    generator is supplied, which is how inference mode is expressed.
    """
    if rng is None or rate <= 0.0:
        return x, None

    keep = (rng.random(x.shape) >= rate).astype(np.float64) / (1.0 - rate)
    return x * keep, keep
