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
r"""Multi-head self-attention.

Heads are contiguous channel slices: head `h` owns channels
`[h * d_k, (h + 1) * d_k)`. Projection groups are laid out the same way,
so with `G_qkv` dividing `H` every group spans `H / G_qkv` whole heads.
"""
from __future__ import annotations

__all__: typing.Sequence[str] = (
    "MASK_VALUE",
    "StageHook",
    "AttentionWeights",
    "stage",
    "additive_mask",
    "attention_probabilities",
    "scaled_dot_attention",
    "multi_head_attention",
)

import contextlib
import math
import typing

import attr
import numpy as np

from gconvbert.domain import layer as domain_layer
from gconvbert.domain import model_exception as domain_exception
from gconvbert.domain import tensor

if typing.TYPE_CHECKING:
    from gconvbert.domain.tensor import Tensor

MASK_VALUE: typing.Final[float] = -1e9
"""Additive score for key positions hidden by the attention mask."""


class StageHook(typing.Protocol):
    def stage(self, name: str, /) -> typing.ContextManager[typing.Any]:
        ...


def stage(hook: typing.Optional[StageHook], name: str) -> typing.ContextManager[typing.Any]:
    if hook is None:
        return contextlib.nullcontext()

    return hook.stage(name)


def _validate_projection(
    instance: AttentionWeights,
    attribute: attr.Attribute[domain_layer.LayerWeights],
    value: domain_layer.LayerWeights,
) -> None:
    if value.kernel_size != 1 or value.in_channels != value.out_channels:
        raise domain_exception.ConfigurationError(
            f"expected a square kernel-size-1 projection, got "
            f"{value.in_channels}->{value.out_channels}, K={value.kernel_size}",
            field=attribute.name,
        )


@attr.define(frozen=True, kw_only=True, eq=False)
class AttentionWeights:
    q_proj: domain_layer.LayerWeights = attr.field(validator=_validate_projection)
    k_proj: domain_layer.LayerWeights = attr.field(validator=_validate_projection)
    v_proj: domain_layer.LayerWeights = attr.field(validator=_validate_projection)
    num_heads: int = attr.field(converter=int)

    def __attrs_post_init__(self) -> None:
        channels = self.channels
        if self.k_proj.in_channels != channels or self.v_proj.in_channels != channels:
            raise domain_exception.DimensionError(
                "AttentionWeights",
                self.q_proj.kernel.shape,
                self.k_proj.kernel.shape,
                self.v_proj.kernel.shape,
            )

        if len({self.q_proj.groups, self.k_proj.groups, self.v_proj.groups}) != 1:
            raise domain_exception.ConfigurationError(
                "q_proj, k_proj and v_proj must share one group count",
                field="groups_qkv",
            )

        if self.num_heads < 1 or channels % self.num_heads:
            raise domain_exception.ConfigurationError(
                f"{self.num_heads} does not divide C={channels}",
                field="num_heads",
            )

    @property
    def channels(self) -> int:
        return self.q_proj.out_channels

    @property
    def head_dim(self) -> int:
        return self.channels // self.num_heads

    @property
    def groups(self) -> int:
        return self.q_proj.groups


def additive_mask(attention_mask: typing.Sequence[int]) -> Tensor:
    r"""Builds the (P, P) additive mask for a 0/1 key visibility sequence.

    Column `j` is 0 when position `j` is visible and `MASK_VALUE` when it
    is padding; every query row sees the same keys.
    """
    visible = np.asarray(attention_mask)
    if visible.ndim != 1 or visible.size == 0:
        raise domain_exception.DimensionError("additive_mask", visible.shape)

    if not np.all((visible == 0) | (visible == 1)):
        raise domain_exception.ConfigurationError(
            "entries must be 0 or 1", field="attention_mask"
        )

    row = np.where(visible == 1, 0.0, MASK_VALUE).astype(np.float64)
    return np.broadcast_to(row, (visible.size, visible.size)).copy()


def attention_probabilities(
    q: Tensor,
    k: Tensor,
    mask: typing.Optional[Tensor] = None,
) -> Tensor:
    """Row-stochastic attention matrix softmax(Q K^T / sqrt(d_k) + mask)."""
    if q.ndim != 2 or q.shape != k.shape:
        raise domain_exception.DimensionError("scaled_dot_attention", q.shape, k.shape)

    scores = tensor.matmul(q, k.T) / math.sqrt(q.shape[1])
    if mask is not None:
        if mask.shape != scores.shape:
            raise domain_exception.DimensionError("attention mask", mask.shape, scores.shape)

        scores = scores + mask

    return tensor.softmax_rows(scores)


def scaled_dot_attention(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    mask: typing.Optional[Tensor] = None,
) -> Tensor:
    r"""Scaled dot-product attention for a single head.

    Parameters
    ----------
    q, k, v : Tensor
        Query, key and value activations, each of shape (P, d_k).
    mask : Tensor, optional
        Additive (P, P) mask applied to the scores before the softmax.

    Returns
    -------
    Tensor
        Attention output of shape (P, d_k).

    Raises
    ------
    DimensionError
        If the three operands or the mask disagree in shape.
    """
    if v.shape != q.shape:
        raise domain_exception.DimensionError("scaled_dot_attention", q.shape, v.shape)

    return tensor.matmul(attention_probabilities(q, k, mask), v)


def multi_head_attention(
    f: Tensor,
    w: AttentionWeights,
    mask: typing.Optional[Tensor] = None,
    *,
    recorder: typing.Optional[StageHook] = None,
) -> Tensor:
    r"""Projects `f` to Q, K and V and attends independently per head.

    Head outputs are concatenated in channel order; the output projection
    is not part of this module.
    """
    if f.ndim != 2 or f.shape[1] != w.channels:
        raise domain_exception.DimensionError("multi_head_attention", f.shape, (w.channels,))

    with stage(recorder, "qkv"):
        q = domain_layer.grouped_conv1d(f, w.q_proj)
        k = domain_layer.grouped_conv1d(f, w.k_proj)
        v = domain_layer.grouped_conv1d(f, w.v_proj)

    with stage(recorder, "attention"):
        heads = [
            scaled_dot_attention(q[:, head], k[:, head], v[:, head], mask)
            for head in domain_layer.group_slices(w.channels, w.num_heads)
        ]

    return np.concatenate(heads, axis=1)
