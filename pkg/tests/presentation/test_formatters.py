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

import json
import typing

import pytest

from gconvbert.application.services import equivalence_service
from gconvbert.application.services import gradient_service
from gconvbert.application.services import profiling_service
from gconvbert.application.services import training_service
from gconvbert.domain import model_config as domain_config
from gconvbert.presentation import formatters

if typing.TYPE_CHECKING:
    from gconvbert.domain import model as domain_model


@pytest.mark.parametrize(
    "value, expected",
    [
        (None, "-"),
        (73.0, "73.0%"),
        (2.7, "2.70%"),
        (24.3, "24.3%"),
        (12.345, "12.3%"),
        (100.0, "100%"),
        (0.0, "0.00%"),
    ],
)
def test_format_percent(value: typing.Optional[float], expected: str) -> None:
    assert formatters.format_percent(value) == expected


def test_format_optional() -> None:
    assert formatters.format_optional(None) == "-"
    assert formatters.format_optional(1.23456) == "1.235"
    assert formatters.format_optional(1.5, ".1e") == "1.5e+00"


def test_config_document_is_json_compatible() -> None:
    document = formatters.config_document(domain_config.preset_config("tiny"))

    assert document["channels"] == 8
    assert json.loads(json.dumps(document)) == document


def test_breakdown_rows() -> None:
    rows = [
        profiling_service.BreakdownRow(
            stage="qkv", macs=1000, flops=2000, flop_pct=25.0, reference_flop_pct=24.0
        ),
    ]

    table = formatters.breakdown_rows(rows)

    assert table[0][0] == "Stage"
    assert table[1] == ["qkv", "1,000", "2,000", "25.0%", "-", "-", "24.0%"]
    assert formatters.breakdown_document(rows)[0]["time_ms"] is None


def _suite_report() -> equivalence_service.EquivalenceReport:
    return equivalence_service.EquivalenceReport(
        seed=3,
        suites=[
            equivalence_service.SuiteResult(
                name="exact", instances=4, max_abs_diff=0.0, tolerance=0.0
            ),
            equivalence_service.SuiteResult(
                name="close", instances=4, max_abs_diff=1e-3, tolerance=1e-10, failures=2
            ),
        ],
    )


def test_suite_rows() -> None:
    table = formatters.suite_rows(_suite_report())

    assert table[1][3] == "bitwise"
    assert table[1][4] == "pass"
    assert table[2][3] == "1e-10"
    assert table[2][4] == "FAIL (2)"


def test_suite_document() -> None:
    document = formatters.suite_document(_suite_report())

    assert document["seed"] == 3
    assert document["passed"] is False
    assert [suite["passed"] for suite in document["suites"]] == [True, False]
    assert set(document["suites"][0]) == {
        "name",
        "instances",
        "failures",
        "max_abs_diff",
        "tolerance",
        "passed",
    }


def test_gradcheck_document_and_rows() -> None:
    report = gradient_service.GradCheckReport(
        errors={"a.kernel": 1e-8, "b.bias": 0.5},
        tolerance=1e-4,
        step=1e-5,
        probed=10,
    )

    document = formatters.gradcheck_document(report)
    assert document["passed"] is False
    assert document["failures"] == ["b.bias"]
    assert document["max_error"] == 0.5

    rows = formatters.gradcheck_rows(report)
    assert [row[2] for row in rows[1:]] == ["pass", "FAIL"]


def test_loss_curve_rows_include_the_last_step(tiny_model: domain_model.ModelWeights) -> None:
    result = training_service.TrainingResult(
        model=tiny_model,
        losses=[1.0 - 0.01 * step for step in range(31)],
    )

    table = formatters.loss_curve_rows(result, every=25)

    assert [row[0] for row in table[1:]] == ["0", "25", "30"]
    assert table[-1][1] == "0.700000"


def test_training_document(tiny_model: domain_model.ModelWeights) -> None:
    result = training_service.TrainingResult(model=tiny_model, losses=[2.0, 1.5, 1.0])

    document = formatters.training_document(result)

    assert document["steps"] == 2
    assert document["initial_loss"] == 2.0
    assert document["final_loss"] == 1.0
    assert document["reduction"] == pytest.approx(0.5)
    assert document["losses"] == [2.0, 1.5, 1.0]
