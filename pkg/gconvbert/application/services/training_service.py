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
r"""Toy fine-tuning and distillation on a built-in synthetic task.

The task: sequences `[CLS, a, b]` with `a`, `b` drawn from a small token
range and the label `a + b > threshold`, which is a fixed linear
function of the two token identities. Training is full-batch SGD on
the soft cross entropy; distillation swaps the one-hot target for the
mixture of a frozen teacher's distribution and the ground truth.
"""
from __future__ import annotations

__all__: typing.Sequence[str] = (
    "CLS_TOKEN_ID",
    "TOY_INIT_STD",
    "ToyExample",
    "TrainingResult",
    "toy_config",
    "toy_task",
    "train",
    "train_toy",
    "distill_toy",
)

import functools
import logging
import typing

import attr
import numpy as np

from gconvbert import util
from gconvbert.application.services import gradient_service
from gconvbert.domain import loss as domain_loss
from gconvbert.domain import model as domain_model
from gconvbert.domain import model_config as domain_config
from gconvbert.domain import model_exception as domain_exception

_LOGGER: typing.Final[logging.Logger] = logging.getLogger("gconvbert.training_service")

CLS_TOKEN_ID: typing.Final[int] = 1

TOY_INIT_STD: typing.Final[float] = 0.3
"""Init scale of toy models; the BERT default 0.02 barely moves a tiny net."""

_TOKEN_LOW: typing.Final[int] = 2
_TOKEN_HIGH: typing.Final[int] = 8  # exclusive
_THRESHOLD: typing.Final[int] = _TOKEN_LOW + _TOKEN_HIGH - 1
_LOG_EVERY: typing.Final[int] = 50


@attr.define(frozen=True, kw_only=True)
class ToyExample:
    inputs: gradient_service.ModelInputs = attr.field()
    label: int = attr.field()


@attr.define(frozen=True, kw_only=True, eq=False)
class TrainingResult:
    model: domain_model.ModelWeights = attr.field()
    losses: typing.Tuple[float, ...] = attr.field(converter=tuple)
    """Mean loss before every step, followed by the loss after the last one."""

    @property
    def initial_loss(self) -> float:
        return self.losses[0]

    @property
    def final_loss(self) -> float:
        return self.losses[-1]

    @property
    def reduction(self) -> float:
        """Fraction of the initial loss removed by training."""
        return 1.0 - self.final_loss / self.initial_loss


def toy_config(*, groups: int = 1) -> domain_config.ModelConfig:
    return attr.evolve(domain_config.preset_config("tiny", groups=groups), init_std=TOY_INIT_STD)


def toy_task(seed: int, *, size: int = 32) -> typing.List[ToyExample]:
    r"""Draws the synthetic task deterministically from `seed`.

    Every example is `[CLS, a, b]` with a single segment and label
    `int(a + b > threshold)`.
    """
    if size < 1:
        raise domain_exception.ConfigurationError("must be positive", field="size")

    rng = np.random.default_rng(seed)
    pairs = rng.integers(_TOKEN_LOW, _TOKEN_HIGH, size=(size, 2))
    return [
        ToyExample(
            inputs=gradient_service.ModelInputs.single_segment([CLS_TOKEN_ID, int(a), int(b)]),
            label=int(a + b > _THRESHOLD),
        )
        for a, b in pairs
    ]


def train(
    model: domain_model.ModelWeights,
    examples: typing.Sequence[ToyExample],
    targets: typing.Sequence[domain_loss.LossSpec],
    *,
    steps: int,
    lr: float,
) -> TrainingResult:
    r"""Full-batch gradient descent.

    Parameters
    ----------
    model : ModelWeights
        Starting point; never modified.
    examples : typing.Sequence[ToyExample]
        Training set.
    targets : typing.Sequence[LossSpec]
        One loss spec per example.
    steps : int
        Number of updates.
    lr : float
        Learning rate of the mean gradient.

    Returns
    -------
    TrainingResult
        Trained model and loss curve. Gradients are summed in example
        order, so the curve is reproducible bit for bit.
    """
    if steps < 0:
        raise domain_exception.ConfigurationError("must not be negative", field="steps")

    if len(targets) != len(examples) or not examples:
        raise domain_exception.ConfigurationError(
            f"{len(targets)} target(s) for {len(examples)} example(s)", field="targets"
        )

    losses: typing.List[float] = []
    for step in range(steps + 1):
        mean_loss, mean_grads = _mean_objective(model, examples, targets)
        losses.append(mean_loss)
        _LOGGER.debug("Step %s: loss %.6f.", step, mean_loss)
        if step % _LOG_EVERY == 0:
            _LOGGER.info("Step %s of %s: loss %.6f.", step, steps, mean_loss)

        if step == steps:
            break

        model = gradient_service.sgd_step(model, mean_grads, lr)

    return TrainingResult(model=model, losses=losses)


def _mean_objective(
    model: domain_model.ModelWeights,
    examples: typing.Sequence[ToyExample],
    targets: typing.Sequence[domain_loss.LossSpec],
) -> typing.Tuple[float, gradient_service.GradientSet]:
    # Summed in example order so the loss curve is reproducible bit for bit.
    results = [
        gradient_service.backward(model, example.inputs, target)
        for example, target in zip(examples, targets)
    ]
    total_loss = sum(loss for loss, _ in results)
    total_grads = functools.reduce(
        lambda left, right: {name: left[name] + right[name] for name in left},
        (grads for _, grads in results),
    )
    return total_loss / len(examples), {
        name: grad / len(examples) for name, grad in total_grads.items()
    }



def _one_hot_targets(
    examples: typing.Sequence[ToyExample],
    num_classes: int,
) -> typing.List[domain_loss.LossSpec]:
    return [domain_loss.SoftCrossEntropyLoss.for_class(e.label, num_classes) for e in examples]


def train_toy(
    *,
    steps: int = 300,
    lr: float = 0.2,
    seed: int = 0,
    groups: int = 1,
) -> TrainingResult:
    """Trains a tiny model on the toy task against one-hot targets."""
    config = toy_config(groups=groups)
    examples = toy_task(util.derive_seed(seed, "toy-task"))
    model = domain_model.build_model(config, util.derive_seed(seed, "student"))

    _LOGGER.info("Training a toy model for %s step(s), lr=%s, seed=%s.", steps, lr, seed)
    return train(
        model,
        examples,
        _one_hot_targets(examples, config.num_classes),
        steps=steps,
        lr=lr,
    )


def distill_toy(
    *,
    alpha: float,
    steps: int = 300,
    lr: float = 0.2,
    seed: int = 0,
    groups: int = 1,
    teacher_steps: int = 200,
) -> typing.Tuple[TrainingResult, TrainingResult]:
    r"""Distills a frozen toy teacher into a fresh student.

    The teacher is trained on the toy task from its own seed, then
    frozen. The student starts exactly where `train_toy` starts and is
    trained against `distill_target` mixtures, so `alpha = 1` reproduces
    `train_toy` step for step.

    Returns
    -------
    typing.Tuple[TrainingResult, TrainingResult]
        The teacher's and the student's training results.
    """
    config = toy_config(groups=groups)
    examples = toy_task(util.derive_seed(seed, "toy-task"))

    _LOGGER.info("Training the toy teacher for %s step(s).", teacher_steps)
    teacher = train(
        domain_model.build_model(config, util.derive_seed(seed, "teacher")),
        examples,
        _one_hot_targets(examples, config.num_classes),
        steps=teacher_steps,
        lr=lr,
    )

    targets: typing.List[domain_loss.LossSpec] = []
    for example in examples:
        teacher_logits = domain_model.forward(
            teacher.model, example.inputs.token_ids, example.inputs.segment_ids
        )
        mixture = domain_loss.distill_target(
            domain_loss.DistillTarget(
                alpha=alpha,
                teacher_logits=teacher_logits,
                ground_truth=example.label,
            )
        )
        targets.append(domain_loss.SoftCrossEntropyLoss(target=mixture))

    _LOGGER.info("Distilling into the student with alpha=%s.", alpha)
    student = train(
        domain_model.build_model(config, util.derive_seed(seed, "student")),
        examples,
        targets,
        steps=steps,
        lr=lr,
    )
    return teacher, student
