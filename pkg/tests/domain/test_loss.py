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
from __future__ import annotations

import math

import numpy as np
import pytest

from gconvbert.domain import loss as domain_loss
from gconvbert.domain import model_exception as domain_exception
from gconvbert.domain import tensor


class TestSoftCrossEntropy:
    def test_one_hot_is_negative_log_probability(self) -> None:
        logits = np.array([2.0, 0.5, -1.0])
        expected = -math.log(float(tensor.softmax(logits)[1]))

        assert domain_loss.soft_cross_entropy(logits, domain_loss.one_hot(1, 3)) == pytest.approx(
            expected
        )

    def test_never_below_target_entropy(self, rng: np.random.Generator) -> None:
        for _ in range(20):
            logits = rng.normal(size=4) * 3.0
            target = tensor.softmax(rng.normal(size=4))

            assert domain_loss.soft_cross_entropy(logits, target) >= domain_loss.entropy(
                target
            ) - 1e-12

    def test_equals_entropy_at_the_target(self) -> None:
        target = np.array([0.2, 0.3, 0.5])
        logits = np.log(target)

        assert domain_loss.soft_cross_entropy(logits, target) == pytest.approx(
            domain_loss.entropy(target)
        )

    @pytest.mark.parametrize("classes", [2, 3, 7])
    def test_uniform_logits_cost_log_of_class_count(self, classes: int) -> None:
        loss = domain_loss.soft_cross_entropy(np.zeros(classes), domain_loss.one_hot(0, classes))

        assert loss == pytest.approx(math.log(classes), abs=1e-12)

    def test_ignores_a_logit_shift(self, rng: np.random.Generator) -> None:
        logits = rng.normal(size=4)
        target = tensor.softmax(rng.normal(size=4))

        shifted = domain_loss.soft_cross_entropy(logits + 37.5, target)
        assert shifted == pytest.approx(domain_loss.soft_cross_entropy(logits, target), abs=1e-10)

    @pytest.mark.parametrize(
        "target",
        [
            [0.5, 0.6],
            [1.2, -0.2],
            [[0.5, 0.5]],
        ],
    )
    def test_rejects_non_distributions(self, target: list) -> None:
        with pytest.raises(domain_exception.DistributionError):
            domain_loss.soft_cross_entropy(np.zeros(2), np.asarray(target))

    def test_rejects_size_mismatch(self) -> None:
        with pytest.raises(domain_exception.DimensionError):
            domain_loss.soft_cross_entropy(np.zeros(3), np.array([0.5, 0.5]))


def test_entropy_treats_zero_probability_as_zero() -> None:
    assert domain_loss.entropy(np.array([1.0, 0.0])) == 0.0
    assert domain_loss.entropy(np.array([0.5, 0.5])) == pytest.approx(math.log(2.0))


def test_one_hot_out_of_range() -> None:
    with pytest.raises(domain_exception.ConfigurationError, match="ground_truth"):
        domain_loss.one_hot(2, 2)


@pytest.mark.parametrize(
    "prediction, target, loss, grad",
    [
        (1.0, 1.0, 0.0, 0.0),
        (3.0, 1.0, 4.0, 4.0),
        (-0.5, 0.5, 1.0, -2.0),
    ],
)
def test_mse(prediction: float, target: float, loss: float, grad: float) -> None:
    assert domain_loss.mse_loss(prediction, target) == loss
    assert domain_loss.mse_gradient(prediction, target) == grad


class TestDistillTarget:
    def test_alpha_one_is_one_hot(self) -> None:
        target = domain_loss.distill_target(
            domain_loss.DistillTarget(
                alpha=1.0, teacher_logits=np.array([3.0, -1.0]), ground_truth=1
            )
        )

        assert target.tolist() == [0.0, 1.0]

    def test_alpha_zero_is_teacher_softmax(self) -> None:
        logits = np.array([3.0, -1.0, 0.5])
        target = domain_loss.distill_target(
            domain_loss.DistillTarget(alpha=0.0, teacher_logits=logits, ground_truth=0)
        )

        np.testing.assert_allclose(target, tensor.softmax(logits))

    def test_two_class_endpoint(self) -> None:
        target = domain_loss.distill_target(
            domain_loss.DistillTarget(alpha=0.8, teacher_logits=np.zeros(2), ground_truth=0)
        )

        np.testing.assert_allclose(target, [0.9, 0.1], rtol=0.0, atol=1e-15)

    def test_mixture_is_a_distribution(self) -> None:
        target = domain_loss.distill_target(
            domain_loss.DistillTarget(
                alpha=0.3, teacher_logits=np.array([0.1, 2.0, -4.0]), ground_truth=2
            )
        )

        assert np.all(target >= 0.0)
        assert float(np.sum(target)) == pytest.approx(1.0)
        assert target[2] >= 0.3

    def test_is_affine_in_alpha(self) -> None:
        logits = np.array([1.5, -0.25, 0.75])

        def mix(alpha: float) -> np.ndarray:
            return domain_loss.distill_target(
                domain_loss.DistillTarget(alpha=alpha, teacher_logits=logits, ground_truth=1)
            )

        for alpha in (0.1, 0.35, 0.8):
            np.testing.assert_allclose(
                mix(alpha), alpha * mix(1.0) + (1.0 - alpha) * mix(0.0), rtol=0.0, atol=1e-15
            )

    def test_distillation_loss_ignores_logit_shifts(self, rng: np.random.Generator) -> None:
        student = rng.normal(size=3)
        teacher = rng.normal(size=3)

        def loss(student_shift: float, teacher_shift: float) -> float:
            target = domain_loss.distill_target(
                domain_loss.DistillTarget(
                    alpha=0.4, teacher_logits=teacher + teacher_shift, ground_truth=2
                )
            )
            return domain_loss.soft_cross_entropy(student + student_shift, target)

        assert loss(12.0, -8.0) == pytest.approx(loss(0.0, 0.0), abs=1e-10)

    @pytest.mark.parametrize("alpha", [-0.1, 1.5, math.nan])
    def test_rejects_alpha_out_of_range(self, alpha: float) -> None:
        with pytest.raises(domain_exception.ConfigurationError, match="alpha"):
            domain_loss.DistillTarget(alpha=alpha, teacher_logits=np.zeros(2), ground_truth=0)

    def test_rejects_bad_class(self) -> None:
        with pytest.raises(domain_exception.ConfigurationError):
            domain_loss.DistillTarget(alpha=0.5, teacher_logits=np.zeros(2), ground_truth=5)


class TestLossSpecs:
    def test_soft_ce_gradient(self, rng: np.random.Generator) -> None:
        target = tensor.softmax(rng.normal(size=3))
        spec = domain_loss.SoftCrossEntropyLoss(target=target)
        logits = rng.normal(size=3)

        h = 1e-6
        numeric = np.array(
            [
                (spec.value(logits + h * e) - spec.value(logits - h * e)) / (2.0 * h)
                for e in np.eye(3)
            ]
        )
        np.testing.assert_allclose(spec.gradient(logits), numeric, atol=1e-8)

    def test_soft_ce_for_class(self) -> None:
        spec = domain_loss.SoftCrossEntropyLoss.for_class(0, 2)

        assert spec.name == "soft-ce"
        assert spec.target.tolist() == [1.0, 0.0]

    def test_soft_ce_validates_target(self) -> None:
        with pytest.raises(domain_exception.DistributionError):
            domain_loss.SoftCrossEntropyLoss(target=np.array([0.7, 0.7]))

    def test_mse_reads_one_logit(self) -> None:
        spec = domain_loss.MseLoss(target=1.0, index=1)
        logits = np.array([10.0, 3.0])

        assert spec.name == "mse"
        assert spec.value(logits) == 4.0
        assert spec.gradient(logits).tolist() == [0.0, 4.0]
