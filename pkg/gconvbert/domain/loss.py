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
r"""Classification, regression and distillation losses.

The loss specs (`SoftCrossEntropyLoss`, `MseLoss`) bundle a loss with
its target and expose the value and the gradient with respect to the
logits, which is what the backward pass consumes.
"""
from __future__ import annotations

__all__: typing.Sequence[str] = (
    "DISTRIBUTION_TOLERANCE",
    "LossSpec",
    "DistillTarget",
    "SoftCrossEntropyLoss",
    "MseLoss",
    "one_hot",
    "entropy",
    "soft_cross_entropy",
    "distill_target",
    "mse_loss",
    "mse_gradient",
)

import math
import typing

import attr
import numpy as np
from scipy import special

from gconvbert.domain import model_exception as domain_exception
from gconvbert.domain import tensor

if typing.TYPE_CHECKING:
    from gconvbert.domain.tensor import Tensor

DISTRIBUTION_TOLERANCE: typing.Final[float] = 1e-8


class LossSpec(typing.Protocol):
    name: str

    def value(self, logits: Tensor, /) -> float:
        ...

    def gradient(self, logits: Tensor, /) -> Tensor:
        ...


def _check_distribution(target: Tensor) -> None:
    if target.ndim != 1:
        raise domain_exception.DistributionError(f"Target must be a vector, got {target.shape}.")

    if np.any(target < 0.0) or abs(float(np.sum(target)) - 1.0) > DISTRIBUTION_TOLERANCE:
        raise domain_exception.DistributionError(
            f"Target {target.tolist()!r} is not a probability distribution."
        )


def one_hot(index: int, size: int) -> Tensor:
    if not 0 <= index < size:
        raise domain_exception.ConfigurationError(
            f"class {index} out of range [0, {size})", field="ground_truth"
        )

    vector = np.zeros(size, dtype=np.float64)
    vector[index] = 1.0
    return vector


def entropy(p: Tensor) -> float:
    """Shannon entropy in nats, with 0 log 0 taken as 0."""
    return float(np.sum(special.entr(p)))


def soft_cross_entropy(logits: Tensor, target: Tensor) -> float:
    r"""Cross entropy against a probability vector.

    Parameters
    ----------
    logits : Tensor
        Raw scores of shape (num_classes,).
    target : Tensor
        Non-negative weights summing to 1.

    Returns
    -------
    float
        `-sum_c target[c] * log softmax(logits)[c]`, never below
        `entropy(target)`.

    Raises
    ------
    DistributionError
        If `target` is not a probability distribution.
    """
    target = np.asarray(target, dtype=np.float64)
    _check_distribution(target)
    if target.shape != logits.shape:
        raise domain_exception.DimensionError("soft_cross_entropy", logits.shape, target.shape)

    return float(-np.sum(target * tensor.log_softmax(logits)))


def mse_loss(prediction: float, target: float) -> float:
    residual = prediction - target
    return residual * residual


def mse_gradient(prediction: float, target: float) -> float:
    return 2.0 * (prediction - target)


def _check_alpha(instance: DistillTarget, attribute: attr.Attribute[float], value: float) -> None:
    if not 0.0 <= value <= 1.0 or math.isnan(value):
        raise domain_exception.ConfigurationError(
            f"must lie in [0, 1], got {value!r}", field=attribute.name
        )


@attr.define(frozen=True, kw_only=True, eq=False)
class DistillTarget:
    alpha: float = attr.field(converter=float, validator=_check_alpha)
    teacher_logits: Tensor = attr.field(converter=tensor.freeze)
    ground_truth: int = attr.field(converter=int)

    def __attrs_post_init__(self) -> None:
        if self.teacher_logits.ndim != 1:
            raise domain_exception.DimensionError("teacher_logits", self.teacher_logits.shape)

        # Raises for an out-of-range class.
        one_hot(self.ground_truth, self.teacher_logits.size)


def distill_target(d: DistillTarget) -> Tensor:
    r"""Mixes the teacher distribution with the one-hot ground truth.

    Returns `(1 - alpha) * softmax(teacher_logits) + alpha * onehot`.
    The teacher's logits are normalized first so both terms are
    distributions; `alpha = 1` ignores the teacher entirely.
    """
    teacher = tensor.softmax(d.teacher_logits)
    truth = one_hot(d.ground_truth, d.teacher_logits.size)
    return (1.0 - d.alpha) * teacher + d.alpha * truth


@attr.define(frozen=True, kw_only=True, eq=False)
class SoftCrossEntropyLoss:
    target: Tensor = attr.field(converter=tensor.freeze)
    name: str = attr.field(default="soft-ce", init=False)

    def __attrs_post_init__(self) -> None:
        _check_distribution(self.target)

    @classmethod
    def for_class(cls, index: int, num_classes: int) -> SoftCrossEntropyLoss:
        return cls(target=one_hot(index, num_classes))

    def value(self, logits: Tensor, /) -> float:
        return soft_cross_entropy(logits, self.target)

    def gradient(self, logits: Tensor, /) -> Tensor:
        # d/dz of -sum t log softmax(z) is softmax(z) - t when sum t == 1.
        return tensor.softmax(logits) - self.target


@attr.define(frozen=True, kw_only=True)
class MseLoss:
    """Squared error on one logit, used as a 1-output regression head."""

    target: float = attr.field(converter=float)
    index: int = attr.field(default=0, converter=int)
    name: str = attr.field(default="mse", init=False)

    def value(self, logits: Tensor, /) -> float:
        return mse_loss(float(logits[self.index]), self.target)

    def gradient(self, logits: Tensor, /) -> Tensor:
        grad = np.zeros_like(logits, dtype=np.float64)
        grad[self.index] = mse_gradient(float(logits[self.index]), self.target)
        return grad
