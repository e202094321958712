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
r"""Position-wise, convolutional and grouped convolutional layers.

Activations are laid out as (P, C): P positions, C channels. Kernels are
laid out as (C_out, C_in / G, K), so an ungrouped kernel-size-1 layer
is a plain (C_out, C_in) matrix with a trailing unit axis.
"""
from __future__ import annotations

__all__: typing.Sequence[str] = (
    "LayerWeights",
    "LayerNormParams",
    "EmbeddingTables",
    "positionwise_fc",
    "conv1d",
    "grouped_conv1d",
    "embed",
    "embedding_sum",
    "unfold_positions",
    "fold_positions",
    "group_slices",
    "block_diagonal",
)

import typing

import attr
import numpy as np

from gconvbert.domain import model_exception as domain_exception
from gconvbert.domain import tensor

if typing.TYPE_CHECKING:
    from gconvbert.domain.tensor import Tensor


@attr.define(frozen=True, kw_only=True, eq=False)
class LayerWeights:
    kernel: Tensor = attr.field(converter=tensor.freeze)
    bias: Tensor = attr.field(converter=tensor.freeze)
    groups: int = attr.field(default=1, converter=int)

    def __attrs_post_init__(self) -> None:
        if self.kernel.ndim != 3:
            raise domain_exception.DimensionError("LayerWeights.kernel", self.kernel.shape)

        if self.groups < 1:
            raise domain_exception.ConfigurationError("must be positive", field="groups")

        if self.out_channels % self.groups:
            raise domain_exception.ConfigurationError(
                f"{self.groups} does not divide C_out={self.out_channels}",
                field="groups",
            )

        if self.kernel_size % 2 == 0:
            raise domain_exception.ConfigurationError(
                f"kernel size {self.kernel_size} is not odd",
                field="kernel_size",
            )

        if self.bias.shape != (self.out_channels,):
            raise domain_exception.DimensionError(
                "LayerWeights.bias", self.bias.shape, (self.out_channels,)
            )

    @classmethod
    def dense(cls, matrix: Tensor, bias: Tensor) -> LayerWeights:
        """Builds an ungrouped kernel-size-1 layer from a (C_out, C_in) matrix."""
        return cls(kernel=np.asarray(matrix)[:, :, np.newaxis], bias=bias, groups=1)

    @property
    def out_channels(self) -> int:
        return int(self.kernel.shape[0])

    @property
    def in_channels(self) -> int:
        return int(self.kernel.shape[1]) * self.groups

    @property
    def kernel_size(self) -> int:
        return int(self.kernel.shape[2])

    def kernel_parameter_count(self) -> int:
        return int(self.kernel.size)

    def parameter_count(self) -> int:
        return int(self.kernel.size + self.bias.size)


@attr.define(frozen=True, kw_only=True, eq=False)
class LayerNormParams:
    gamma: Tensor = attr.field(converter=tensor.freeze)
    beta: Tensor = attr.field(converter=tensor.freeze)
    eps: float = attr.field(default=1e-12, converter=float)

    def apply(self, x: Tensor, /) -> Tensor:
        return tensor.layer_norm(x, self.gamma, self.beta, self.eps)


@attr.define(frozen=True, kw_only=True, eq=False)
class EmbeddingTables:
    token_table: Tensor = attr.field(converter=tensor.freeze)
    position_table: Tensor = attr.field(converter=tensor.freeze)
    segment_table: Tensor = attr.field(converter=tensor.freeze)
    norm: LayerNormParams = attr.field()

    @property
    def vocab_size(self) -> int:
        return int(self.token_table.shape[0])

    @property
    def max_positions(self) -> int:
        return int(self.position_table.shape[0])

    @property
    def channels(self) -> int:
        return int(self.token_table.shape[1])


def group_slices(channels: int, groups: int) -> typing.List[slice]:
    r"""Contiguous equal channel blocks, one per group.

    Channel `c` belongs to group `floor(c * groups / channels)`.
    """
    width = channels // groups
    return [slice(g * width, (g + 1) * width) for g in range(groups)]


def unfold_positions(f: Tensor, kernel_size: int) -> Tensor:
    r"""Gathers the receptive field of every position into one row.

    Column `i * K + k` of row `p` holds `f[p - (K - 1) / 2 + k, i]`, with
    positions outside [0, P) read as zero.
    """
    positions, channels = f.shape
    if kernel_size == 1:
        return np.array(f, dtype=np.float64, copy=True)

    pad = (kernel_size - 1) // 2
    padded = np.zeros((positions + kernel_size - 1, channels), dtype=np.float64)
    padded[pad : pad + positions] = f

    window = np.stack([padded[k : k + positions] for k in range(kernel_size)], axis=2)
    return window.reshape(positions, channels * kernel_size)


def fold_positions(columns: Tensor, channels: int, kernel_size: int) -> Tensor:
    """Adjoint of `unfold_positions`: scatters column gradients back to positions."""
    positions = columns.shape[0]
    if kernel_size == 1:
        return np.array(columns, dtype=np.float64, copy=True)

    pad = (kernel_size - 1) // 2
    window = columns.reshape(positions, channels, kernel_size)
    padded = np.zeros((positions + kernel_size - 1, channels), dtype=np.float64)
    for k in range(kernel_size):
        padded[k : k + positions] += window[:, :, k]

    return padded[pad : pad + positions]


def _check_input(f: Tensor, w: LayerWeights, operation: str) -> None:
    if f.ndim != 2 or f.shape[1] != w.in_channels:
        raise domain_exception.DimensionError(operation, f.shape, (f.shape[0], w.in_channels))


def positionwise_fc(f: Tensor, w: LayerWeights) -> Tensor:
    r"""Position-wise fully-connected layer.

    `out[p, c] = sum_i w[c, i] * f[p, i] + bias[c]`, every position
    computed independently.
    """
    if w.groups != 1 or w.kernel_size != 1:
        raise domain_exception.ConfigurationError(
            f"position-wise layer needs G=1, K=1, got G={w.groups}, K={w.kernel_size}",
            field="groups",
        )

    _check_input(f, w, "positionwise_fc")
    return tensor.matmul(f, w.kernel[:, :, 0].T) + w.bias


def conv1d(f: Tensor, w: LayerWeights) -> Tensor:
    r"""Ungrouped 1D convolution with zero padding that preserves P.

    `out[p, c] = sum_i sum_k w[c, i, k] * f[p - (K - 1) / 2 + k, i] + bias[c]`
    """
    if w.groups != 1:
        raise domain_exception.ConfigurationError(
            f"conv1d needs G=1, got G={w.groups}", field="groups"
        )

    _check_input(f, w, "conv1d")
    columns = unfold_positions(f, w.kernel_size)
    kernel = w.kernel.reshape(w.out_channels, w.in_channels * w.kernel_size)
    return tensor.matmul(columns, kernel.T) + w.bias


def grouped_conv1d(f: Tensor, w: LayerWeights) -> Tensor:
    r"""Grouped 1D convolution.

    The channels are split into `G` contiguous blocks; output block `g`
    reads only input block `g` and is an ordinary convolution with its
    own weights. Costs and weights are `1 / G` of the dense layer.

    Parameters
    ----------
    f : Tensor
        Input of shape (P, C_in).
    w : LayerWeights
        Kernel of shape (C_out, C_in / G, K).

    Returns
    -------
    Tensor
        Output of shape (P, C_out).

    Raises
    ------
    DimensionError
        If the input channel count does not match the kernel.
    """
    _check_input(f, w, "grouped_conv1d")

    in_width = w.in_channels // w.groups
    out = np.empty((f.shape[0], w.out_channels), dtype=np.float64)
    for in_slice, out_slice in zip(
        group_slices(w.in_channels, w.groups),
        group_slices(w.out_channels, w.groups),
    ):
        columns = unfold_positions(f[:, in_slice], w.kernel_size)
        kernel = w.kernel[out_slice].reshape(-1, in_width * w.kernel_size)
        out[:, out_slice] = tensor.matmul(columns, kernel.T) + w.bias[out_slice]

    return out


def block_diagonal(w: LayerWeights) -> LayerWeights:
    """Expands a grouped layer to the equivalent dense layer (zeros off-diagonal)."""
    kernel = np.zeros((w.out_channels, w.in_channels, w.kernel_size), dtype=np.float64)
    for in_slice, out_slice in zip(
        group_slices(w.in_channels, w.groups),
        group_slices(w.out_channels, w.groups),
    ):
        kernel[out_slice, in_slice, :] = w.kernel[out_slice]

    return LayerWeights(kernel=kernel, bias=w.bias, groups=1)


def embedding_sum(
    token_ids: typing.Sequence[int],
    segment_ids: typing.Sequence[int],
    tables: EmbeddingTables,
) -> Tensor:
    """Sum of the token, position and segment rows, before normalization."""
    tokens = np.asarray(token_ids, dtype=np.int64)
    segments = np.asarray(segment_ids, dtype=np.int64)
    if tokens.ndim != 1 or tokens.shape != segments.shape or tokens.size == 0:
        raise domain_exception.DimensionError("embed", tokens.shape, segments.shape)

    positions = tokens.size
    if positions > tables.max_positions:
        raise domain_exception.EmbeddingIndexError(
            position=tables.max_positions,
            kind="position",
            value=positions - 1,
            limit=tables.max_positions,
        )

    for kind, ids, limit in (
        ("token id", tokens, tables.vocab_size),
        ("segment id", segments, int(tables.segment_table.shape[0])),
    ):
        invalid = np.flatnonzero((ids < 0) | (ids >= limit))
        if invalid.size:
            position = int(invalid[0])
            raise domain_exception.EmbeddingIndexError(
                position=position,
                kind=kind,
                value=int(ids[position]),
                limit=limit,
            )

    return (
        tables.token_table[tokens]
        + tables.position_table[:positions]
        + tables.segment_table[segments]
    )


def embed(
    token_ids: typing.Sequence[int],
    segment_ids: typing.Sequence[int],
    tables: EmbeddingTables,
) -> Tensor:
    r"""Embedding stage.

    Row `p` is `layer_norm(token[id_p] + position[p] + segment[seg_p])`.

    Raises
    ------
    EmbeddingIndexError
        If an id is out of range; the error names the offending position.
    """
    return tables.norm.apply(embedding_sum(token_ids, segment_ids, tables))
