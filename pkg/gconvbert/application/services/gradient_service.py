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
r"""Analytical gradients and the finite-difference check that certifies them.

The training-mode forward here calls the same domain operations as
`gconvbert.domain.model.forward` and keeps the intermediates the reverse
pass needs. Without dropout its logits are bitwise identical to the
inference forward. Softmax and layer-norm statistics are recomputed in
the reverse pass instead of being stored.
"""
from __future__ import annotations

__all__: typing.Sequence[str] = (
    "FULL_SCAN_LIMIT",
    "LOSS_NAMES",
    "GradientSet",
    "ModelInputs",
    "GradCheckReport",
    "grouped_conv1d_backward",
    "layer_norm_backward",
    "backward",
    "loss_value",
    "finite_diff_check",
    "sgd_step",
    "make_loss_spec",
    "random_problem",
)

import logging
import math
import typing

import attr
import numpy as np

from gconvbert import util
from gconvbert.domain import attention as domain_attention
from gconvbert.domain import layer as domain_layer
from gconvbert.domain import loss as domain_loss
from gconvbert.domain import model as domain_model
from gconvbert.domain import model_exception as domain_exception
from gconvbert.domain import tensor

if typing.TYPE_CHECKING:
    from gconvbert.domain import model_config as domain_config
    from gconvbert.domain.tensor import Tensor

_LOGGER: typing.Final[logging.Logger] = logging.getLogger("gconvbert.gradient_service")

FULL_SCAN_LIMIT: typing.Final[int] = 20_000
"""Models with fewer parameters are probed element by element."""

_SAMPLE_FRACTION: typing.Final[float] = 0.01
_RELATIVE_FLOOR: typing.Final[float] = 1e-8
_ROUNDING_ULPS: typing.Final[float] = 256.0

LOSS_NAMES: typing.Final[typing.Sequence[str]] = ("soft-ce", "mse")
_PROBLEM_SEQ_LEN: typing.Final[int] = 6

GradientSet: typing.TypeAlias = typing.Dict[str, "Tensor"]


def _optional_ids(
    value: typing.Optional[typing.Iterable[int]],
) -> typing.Optional[typing.Tuple[int, ...]]:
    return None if value is None else tuple(int(v) for v in value)


def _ids(value: typing.Iterable[int]) -> typing.Tuple[int, ...]:
    return tuple(int(v) for v in value)


@attr.define(frozen=True, kw_only=True)
class ModelInputs:
    token_ids: typing.Tuple[int, ...] = attr.field(converter=_ids)
    segment_ids: typing.Tuple[int, ...] = attr.field(converter=_ids)
    attention_mask: typing.Optional[typing.Tuple[int, ...]] = attr.field(
        default=None,
        converter=_optional_ids,
    )

    def __attrs_post_init__(self) -> None:
        lengths = {len(self.token_ids), len(self.segment_ids)}
        if self.attention_mask is not None:
            lengths.add(len(self.attention_mask))

        if len(lengths) != 1:
            raise domain_exception.DimensionError(
                "ModelInputs",
                (len(self.token_ids),),
                (len(self.segment_ids),),
                (len(self.attention_mask or ()),),
            )

    @classmethod
    def single_segment(cls, token_ids: typing.Sequence[int]) -> ModelInputs:
        return cls(token_ids=token_ids, segment_ids=[0] * len(token_ids))

    @property
    def seq_len(self) -> int:
        return len(self.token_ids)


@attr.define(frozen=True, kw_only=True)
class GradCheckReport:
    errors: typing.Mapping[str, float] = attr.field()
    """Largest relative error per parameter name."""

    tolerance: float = attr.field()
    step: float = attr.field()
    probed: int = attr.field()
    """Number of parameter elements probed."""

    @property
    def passed(self) -> bool:
        return all(error < self.tolerance for error in self.errors.values())

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    def failures(self) -> typing.List[str]:
        return [name for name, error in self.errors.items() if error >= self.tolerance]


@attr.define(kw_only=True)
class _BlockCache:
    x: Tensor
    q: Tensor
    k: Tensor
    v: Tensor
    probs: typing.List[Tensor]
    probs_keep: typing.List[typing.Optional[Tensor]]
    attended: Tensor
    ffn1_keep: typing.Optional[Tensor]
    residual_attn: Tensor
    h: Tensor
    ffn2_out: Tensor
    inner: Tensor
    ffn3_keep: typing.Optional[Tensor]
    residual_out: Tensor


@attr.define(kw_only=True)
class _ForwardCache:
    embedding_sum: Tensor
    embedding_keep: typing.Optional[Tensor]
    blocks: typing.List[_BlockCache]
    first: Tensor
    pooled: Tensor
    pooled_keep: typing.Optional[Tensor]
    pooled_dropped: Tensor


def _block_forward(
    x: Tensor,
    w: domain_model.EncoderBlockWeights,
    mask: typing.Optional[Tensor],
    rate: float,
    rng: typing.Optional[np.random.Generator],
) -> typing.Tuple[Tensor, _BlockCache]:
    q = domain_layer.grouped_conv1d(x, w.attn.q_proj)
    k = domain_layer.grouped_conv1d(x, w.attn.k_proj)
    v = domain_layer.grouped_conv1d(x, w.attn.v_proj)

    heads, probs, probs_keep = [], [], []
    for head in domain_layer.group_slices(w.attn.channels, w.attn.num_heads):
        head_probs = domain_attention.attention_probabilities(q[:, head], k[:, head], mask)
        dropped, keep = tensor.dropout(head_probs, rate, rng)
        heads.append(tensor.matmul(dropped, v[:, head]))
        probs.append(head_probs)
        probs_keep.append(keep)

    attended = np.concatenate(heads, axis=1)
    ffn1_out, ffn1_keep = tensor.dropout(domain_layer.grouped_conv1d(attended, w.ffn1), rate, rng)
    residual_attn = x + ffn1_out
    h = w.ln_attn.apply(residual_attn)

    ffn2_out = domain_layer.grouped_conv1d(h, w.ffn2)
    inner = tensor.gelu(ffn2_out)
    ffn3_out, ffn3_keep = tensor.dropout(domain_layer.grouped_conv1d(inner, w.ffn3), rate, rng)
    residual_out = h + ffn3_out

    cache = _BlockCache(
        x=x,
        q=q,
        k=k,
        v=v,
        probs=probs,
        probs_keep=probs_keep,
        attended=attended,
        ffn1_keep=ffn1_keep,
        residual_attn=residual_attn,
        h=h,
        ffn2_out=ffn2_out,
        inner=inner,
        ffn3_keep=ffn3_keep,
        residual_out=residual_out,
    )
    return w.ln_out.apply(residual_out), cache


def _forward(
    model: domain_model.ModelWeights,
    inputs: ModelInputs,
    *,
    encoder_rate: float,
    final_rate: float,
    rng: typing.Optional[np.random.Generator],
) -> typing.Tuple[Tensor, _ForwardCache]:
    mask = None
    if inputs.attention_mask is not None:
        mask = domain_attention.additive_mask(inputs.attention_mask)

    summed = domain_layer.embedding_sum(inputs.token_ids, inputs.segment_ids, model.embeddings)
    x, embedding_keep = tensor.dropout(model.embeddings.norm.apply(summed), encoder_rate, rng)

    blocks = []
    for block in model.blocks:
        x, block_cache = _block_forward(x, block, mask, encoder_rate, rng)
        blocks.append(block_cache)

    first = x[0:1]
    pooled = tensor.tanh(domain_layer.positionwise_fc(first, model.pooler))
    pooled_dropped, pooled_keep = tensor.dropout(pooled, final_rate, rng)
    logits = domain_layer.positionwise_fc(pooled_dropped, model.classifier)[0]

    cache = _ForwardCache(
        embedding_sum=summed,
        embedding_keep=embedding_keep,
        blocks=blocks,
        first=first,
        pooled=pooled,
        pooled_keep=pooled_keep,
        pooled_dropped=pooled_dropped,
    )
    return logits, cache


def grouped_conv1d_backward(
    f: Tensor,
    w: domain_layer.LayerWeights,
    grad_out: Tensor,
) -> typing.Tuple[Tensor, Tensor, Tensor]:
    r"""Reverse pass of `grouped_conv1d`.

    Parameters
    ----------
    f : Tensor
        The forward input, shape (P, C_in).
    w : LayerWeights
        The layer weights.
    grad_out : Tensor
        Gradient with respect to the output, shape (P, C_out).

    Returns
    -------
    typing.Tuple[Tensor, Tensor, Tensor]
        Gradients with respect to the input, the kernel and the bias.
        Group `g` of the input gradient only depends on group `g` of
        `grad_out`.
    """
    in_width = w.in_channels // w.groups
    grad_in = np.empty(f.shape, dtype=np.float64)
    grad_kernel = np.empty(w.kernel.shape, dtype=np.float64)
    for in_slice, out_slice in zip(
        domain_layer.group_slices(w.in_channels, w.groups),
        domain_layer.group_slices(w.out_channels, w.groups),
    ):
        columns = domain_layer.unfold_positions(f[:, in_slice], w.kernel_size)
        kernel = w.kernel[out_slice].reshape(-1, in_width * w.kernel_size)
        grad_group = grad_out[:, out_slice]

        grad_kernel[out_slice] = tensor.matmul(grad_group.T, columns).reshape(
            -1, in_width, w.kernel_size
        )
        grad_in[:, in_slice] = domain_layer.fold_positions(
            tensor.matmul(grad_group, kernel), in_width, w.kernel_size
        )

    return grad_in, grad_kernel, np.sum(grad_out, axis=0)


def layer_norm_backward(
    x: Tensor,
    norm: domain_layer.LayerNormParams,
    grad_out: Tensor,
) -> typing.Tuple[Tensor, Tensor, Tensor]:
    """Reverse pass of `layer_norm`; returns the input, gamma and beta gradients."""
    centered = x - np.mean(x, axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(np.mean(centered * centered, axis=1, keepdims=True) + norm.eps)
    normalized = centered * inv_std

    grad_normalized = grad_out * norm.gamma
    grad_in = inv_std * (
        grad_normalized
        - np.mean(grad_normalized, axis=1, keepdims=True)
        - normalized * np.mean(grad_normalized * normalized, axis=1, keepdims=True)
    )
    return grad_in, np.sum(grad_out * normalized, axis=0), np.sum(grad_out, axis=0)


def _apply_keep(grad: Tensor, keep: typing.Optional[Tensor]) -> Tensor:
    return grad if keep is None else grad * keep


def _attention_head_backward(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    probs: Tensor,
    keep: typing.Optional[Tensor],
    grad_out: Tensor,
) -> typing.Tuple[Tensor, Tensor, Tensor]:
    scale = 1.0 / math.sqrt(q.shape[1])
    dropped = _apply_keep(probs, keep)

    grad_v = tensor.matmul(dropped.T, grad_out)
    grad_probs = _apply_keep(tensor.matmul(grad_out, v.T), keep)
    grad_scores = probs * (grad_probs - np.sum(grad_probs * probs, axis=1, keepdims=True))

    grad_q = tensor.matmul(grad_scores, k) * scale
    grad_k = tensor.matmul(grad_scores.T, q) * scale
    return grad_q, grad_k, grad_v


def _store_layer(grads: GradientSet, path: str, kernel: Tensor, bias: Tensor) -> None:
    grads[f"{path}.kernel"] = kernel
    grads[f"{path}.bias"] = bias


def _store_norm(grads: GradientSet, path: str, gamma: Tensor, beta: Tensor) -> None:
    grads[f"{path}.gamma"] = gamma
    grads[f"{path}.beta"] = beta


def _block_backward(
    w: domain_model.EncoderBlockWeights,
    cache: _BlockCache,
    grad_out: Tensor,
    grads: GradientSet,
    prefix: str,
) -> Tensor:
    grad_residual_out, *norm_grads = layer_norm_backward(cache.residual_out, w.ln_out, grad_out)
    _store_norm(grads, f"{prefix}.ln_out", *norm_grads)

    grad_inner, *ffn3_grads = grouped_conv1d_backward(
        cache.inner, w.ffn3, _apply_keep(grad_residual_out, cache.ffn3_keep)
    )
    _store_layer(grads, f"{prefix}.ffn3", *ffn3_grads)

    grad_ffn2 = grad_inner * tensor.gelu_derivative(cache.ffn2_out)
    grad_h, *ffn2_grads = grouped_conv1d_backward(cache.h, w.ffn2, grad_ffn2)
    _store_layer(grads, f"{prefix}.ffn2", *ffn2_grads)

    grad_h = grad_h + grad_residual_out
    grad_residual_attn, *norm_grads = layer_norm_backward(cache.residual_attn, w.ln_attn, grad_h)
    _store_norm(grads, f"{prefix}.ln_attn", *norm_grads)

    grad_attended, *ffn1_grads = grouped_conv1d_backward(
        cache.attended, w.ffn1, _apply_keep(grad_residual_attn, cache.ffn1_keep)
    )
    _store_layer(grads, f"{prefix}.ffn1", *ffn1_grads)

    grad_q = np.empty_like(cache.q)
    grad_k = np.empty_like(cache.k)
    grad_v = np.empty_like(cache.v)
    for head, probs, keep in zip(
        domain_layer.group_slices(w.attn.channels, w.attn.num_heads),
        cache.probs,
        cache.probs_keep,
    ):
        grad_q[:, head], grad_k[:, head], grad_v[:, head] = _attention_head_backward(
            cache.q[:, head],
            cache.k[:, head],
            cache.v[:, head],
            probs,
            keep,
            grad_attended[:, head],
        )

    grad_x = grad_residual_attn
    for role, grad_proj in (("q_proj", grad_q), ("k_proj", grad_k), ("v_proj", grad_v)):
        grad_in, *proj_grads = grouped_conv1d_backward(cache.x, w.layer(role), grad_proj)
        _store_layer(grads, f"{prefix}.attn.{role}", *proj_grads)
        grad_x = grad_x + grad_in

    return grad_x


def backward(
    model: domain_model.ModelWeights,
    inputs: ModelInputs,
    loss_spec: domain_loss.LossSpec,
    *,
    dropout_rng: typing.Optional[np.random.Generator] = None,
    config: typing.Optional[domain_config.ModelConfig] = None,
) -> typing.Tuple[float, GradientSet]:
    r"""Computes the loss and its exact gradient for every parameter.

    Parameters
    ----------
    model : ModelWeights
        Model to differentiate.
    inputs : ModelInputs
        One input sequence.
    loss_spec : LossSpec
        Loss and target, e.g. `SoftCrossEntropyLoss` or `MseLoss`.
    dropout_rng : numpy.random.Generator, optional
        Enables training-mode dropout with the rates of `config`. The
        masks sampled in the forward pass are reused in reverse.
    config : ModelConfig, optional
        Source of the dropout rates; ignored without `dropout_rng`.

    Returns
    -------
    typing.Tuple[float, GradientSet]
        The loss and gradients keyed like `ModelWeights.named_parameters`.

    Raises
    ------
    NumericError
        If the loss is not finite.
    """
    encoder_rate = final_rate = 0.0
    if dropout_rng is not None and config is not None:
        encoder_rate, final_rate = config.dropout_encoder, config.dropout_final

    logits, cache = _forward(
        model,
        inputs,
        encoder_rate=encoder_rate,
        final_rate=final_rate,
        rng=dropout_rng,
    )
    loss = loss_spec.value(logits)
    if not math.isfinite(loss):
        raise domain_exception.NumericError("loss", loss)

    grads: GradientSet = {}
    grad_pooled, *classifier_grads = grouped_conv1d_backward(
        cache.pooled_dropped, model.classifier, loss_spec.gradient(logits)[np.newaxis, :]
    )
    _store_layer(grads, "classifier", *classifier_grads)

    grad_pooled = _apply_keep(grad_pooled, cache.pooled_keep)
    grad_first, *pooler_grads = grouped_conv1d_backward(
        cache.first, model.pooler, grad_pooled * (1.0 - cache.pooled * cache.pooled)
    )
    _store_layer(grads, "pooler", *pooler_grads)

    grad_x = np.zeros((inputs.seq_len, cache.first.shape[1]), dtype=np.float64)
    grad_x[0:1] = grad_first
    for index in reversed(range(len(model.blocks))):
        grad_x = _block_backward(
            model.blocks[index], cache.blocks[index], grad_x, grads, f"blocks.{index}"
        )

    tables = model.embeddings
    grad_sum, *norm_grads = layer_norm_backward(
        cache.embedding_sum, tables.norm, _apply_keep(grad_x, cache.embedding_keep)
    )
    _store_norm(grads, "embeddings.norm", *norm_grads)

    tokens = np.asarray(inputs.token_ids, dtype=np.int64)
    segments = np.asarray(inputs.segment_ids, dtype=np.int64)

    grad_token = np.zeros(tables.token_table.shape, dtype=np.float64)
    np.add.at(grad_token, tokens, grad_sum)
    grad_position = np.zeros(tables.position_table.shape, dtype=np.float64)
    grad_position[: inputs.seq_len] = grad_sum
    grad_segment = np.zeros(tables.segment_table.shape, dtype=np.float64)
    np.add.at(grad_segment, segments, grad_sum)

    grads["embeddings.token_table"] = grad_token
    grads["embeddings.position_table"] = grad_position
    grads["embeddings.segment_table"] = grad_segment

    return loss, {name: grads[name] for name in model.named_parameters()}


def loss_value(
    model: domain_model.ModelWeights,
    inputs: ModelInputs,
    loss_spec: domain_loss.LossSpec,
) -> float:
    logits = domain_model.forward(
        model, inputs.token_ids, inputs.segment_ids, inputs.attention_mask
    )
    return loss_spec.value(logits)


def _probe_indices(size: int, fraction: float, rng: np.random.Generator) -> typing.Sequence[int]:
    if fraction >= 1.0:
        return range(size)

    count = max(1, math.ceil(size * fraction))
    return sorted(int(i) for i in rng.choice(size, size=count, replace=False))


def _probe(
    model: domain_model.ModelWeights,
    inputs: ModelInputs,
    loss_spec: domain_loss.LossSpec,
    name: str,
    index: typing.Tuple[int, ...],
    delta: float,
) -> float:
    perturbed = np.array(model.named_parameters()[name], dtype=np.float64, copy=True)
    perturbed[index] += delta

    loss = loss_value(model.with_parameter(name, perturbed), inputs, loss_spec)
    if not math.isfinite(loss):
        raise domain_exception.NumericError(name, loss)

    return loss


def _central_difference(
    model: domain_model.ModelWeights,
    inputs: ModelInputs,
    loss_spec: domain_loss.LossSpec,
    name: str,
    index: typing.Tuple[int, ...],
    step: float,
) -> typing.Tuple[float, float]:
    """Returns (L(θ+h) - L(θ-h)) / 2h and the resolution of that estimate."""
    plus = _probe(model, inputs, loss_spec, name, index, step)
    minus = _probe(model, inputs, loss_spec, name, index, -step)
    numeric = (plus - minus) / (2.0 * step)

    half = step / 2.0
    refined = (
        _probe(model, inputs, loss_spec, name, index, half)
        - _probe(model, inputs, loss_spec, name, index, -half)
    ) / step

    # Truncation error shrinks 4x per halving; rounding error grows as 1/h.
    rounding = _ROUNDING_ULPS * np.finfo(np.float64).eps * max(abs(plus), abs(minus), 1.0) / step
    return numeric, 2.0 * abs(numeric - refined) + rounding


def _relative_error(analytic: float, numeric: float, resolution: float) -> float:
    r"""Relative disagreement of one probed element, net of probe resolution.

    Covers gradients that vanish identically, such as the attention key
    bias: a constant added to every key shifts each score row uniformly
    and the softmax ignores it. The analytic gradient is then ~1e-17 while
    the finite difference reads rounding noise around 5e-12, a raw ratio
    of ~5e-4 against the `1e-8` floor. With the resolution subtracted the
    error is zero.
    """
    discrepancy = max(abs(analytic - numeric) - resolution, 0.0)
    return discrepancy / max(abs(analytic), abs(numeric), _RELATIVE_FLOOR)


def finite_diff_check(
    model: domain_model.ModelWeights,
    inputs: ModelInputs,
    loss_spec: domain_loss.LossSpec,
    *,
    step: float = 1e-5,
    tol: float = 1e-4,
    sample_fraction: typing.Optional[float] = None,
    seed: int = 0,
    gradients: typing.Optional[GradientSet] = None,
) -> GradCheckReport:
    r"""Compares analytical gradients with central finite differences.

    Every probed element contributes the relative error
    `|a - n| / max(|a|, |n|, 1e-8)`, where the discrepancy `|a - n|`
    is first reduced by the resolution of the finite-difference probe
    (its rounding noise plus a truncation estimate from a half-step
    probe). Differences below that resolution are indistinguishable
    from zero.

    Parameters
    ----------
    model : ModelWeights
        Model to probe; never modified.
    inputs : ModelInputs
        Input sequence.
    loss_spec : LossSpec
        Loss and target.
    step : float, optional
        Probe step `h`.
    tol : float, optional
        Relative error tolerance.
    sample_fraction : float, optional
        Fraction of every tensor's elements to probe. By default models
        below `FULL_SCAN_LIMIT` parameters are scanned fully and larger
        ones at 1%.
    seed : int, optional
        Seed of the element sample.
    gradients : GradientSet, optional
        Analytical gradients to certify; computed with `backward` when
        omitted.

    Raises
    ------
    ConfigurationError
        If `step`, `tol` or `sample_fraction` is out of range.
    NumericError
        If a probe produces a non-finite loss; names the parameter.
    """
    if not step > 0.0:
        raise domain_exception.ConfigurationError("must be positive", field="step")

    if not tol > 0.0:
        raise domain_exception.ConfigurationError("must be positive", field="tol")

    if gradients is None:
        _, gradients = backward(model, inputs, loss_spec)

    parameters = model.named_parameters()
    if sample_fraction is None:
        total = sum(int(value.size) for value in parameters.values())
        sample_fraction = 1.0 if total < FULL_SCAN_LIMIT else _SAMPLE_FRACTION

    if not 0.0 < sample_fraction <= 1.0:
        raise domain_exception.ConfigurationError(
            f"must lie in (0, 1], got {sample_fraction!r}", field="sample_fraction"
        )

    rng = np.random.default_rng(seed)
    errors: typing.Dict[str, float] = {}
    probed = 0
    for name, value in parameters.items():
        worst = 0.0
        for flat in _probe_indices(value.size, sample_fraction, rng):
            index = tuple(int(i) for i in np.unravel_index(flat, value.shape))
            numeric, resolution = _central_difference(
                model, inputs, loss_spec, name, index, step
            )
            analytic = float(gradients[name][index])
            worst = max(worst, _relative_error(analytic, numeric, resolution))
            probed += 1

        errors[name] = worst
        if worst >= tol:
            _LOGGER.error(
                "Gradient of %s disagrees with finite differences: relative error %.3e.",
                name,
                worst,
            )

    _LOGGER.info("Probed %s parameter element(s) with step %s.", probed, step)
    return GradCheckReport(errors=errors, tolerance=tol, step=step, probed=probed)


def sgd_step(
    model: domain_model.ModelWeights,
    grads: GradientSet,
    lr: float,
) -> domain_model.ModelWeights:
    """Returns `theta - lr * grad` for every parameter as a new model."""
    parameters = model.named_parameters()
    if set(grads) != set(parameters):
        missing = sorted(set(parameters).symmetric_difference(grads))
        raise domain_exception.ConfigurationError(
            f"gradient set does not match the model: {', '.join(missing)}", field="grads"
        )

    return model.replace_parameters(
        {name: value - lr * grads[name] for name, value in parameters.items()}
    )


def make_loss_spec(
    name: str,
    num_classes: int,
    rng: np.random.Generator,
) -> domain_loss.LossSpec:
    """Draws a loss with a random target: a soft distribution or a regression value."""
    if name == "soft-ce":
        return domain_loss.SoftCrossEntropyLoss(
            target=tensor.softmax(rng.normal(size=num_classes))
        )

    if name == "mse":
        return domain_loss.MseLoss(target=float(rng.normal()))

    raise domain_exception.ConfigurationError(
        f"unknown loss {name!r}, expected one of: {', '.join(LOSS_NAMES)}", field="loss"
    )


def random_problem(
    config: domain_config.ModelConfig,
    seed: int,
    *,
    loss: str = "soft-ce",
    seq_len: int = _PROBLEM_SEQ_LEN,
) -> typing.Tuple[domain_model.ModelWeights, ModelInputs, domain_loss.LossSpec]:
    r"""Builds a seeded model, input and loss for gradient certification.

    The input spans both segments and pads its last position, so every
    parameter, the mask included, takes part in the check.
    """
    if not 2 <= seq_len <= config.max_positions:
        raise domain_exception.ConfigurationError(
            f"must lie in [2, {config.max_positions}], got {seq_len}", field="seq_len"
        )

    rng = np.random.default_rng(util.derive_seed(seed, "gradcheck-inputs"))
    split = seq_len // 2
    inputs = ModelInputs(
        token_ids=rng.integers(0, config.vocab_size, size=seq_len).tolist(),
        segment_ids=[0] * split + [1] * (seq_len - split),
        attention_mask=[1] * (seq_len - 1) + [0],
    )
    model = domain_model.random_instance(config, util.derive_seed(seed, "gradcheck-model"))
    return model, inputs, make_loss_spec(loss, config.num_classes, rng)
