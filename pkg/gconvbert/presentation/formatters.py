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
r"""Table rows and machine documents for every report.

Machine documents are plain JSON-compatible mappings; their keys are the
stable interface of the `--format machine` output.
"""
from __future__ import annotations

__all__: typing.Sequence[str] = (
    "format_percent",
    "format_optional",
    "config_document",
    "breakdown_document",
    "breakdown_rows",
    "params_document",
    "params_rows",
    "efficiency_document",
    "efficiency_rows",
    "latency_document",
    "suite_document",
    "suite_rows",
    "gradcheck_document",
    "gradcheck_rows",
    "training_document",
    "loss_curve_rows",
)

import typing

import attr

if typing.TYPE_CHECKING:
    from gconvbert.application.services import equivalence_service
    from gconvbert.application.services import gradient_service
    from gconvbert.application.services import profiling_service
    from gconvbert.application.services import training_service
    from gconvbert.domain import model_config as domain_config


def format_percent(value: typing.Optional[float], /) -> str:
    """Three significant digits, trailing zeros kept: `73.0%`, `2.70%`, `100%`."""
    if value is None:
        return "-"

    return f"{value:#.3g}".rstrip(".") + "%"


def format_optional(value: typing.Optional[float], /, spec: str = ".3f") -> str:
    return "-" if value is None else format(value, spec)


def config_document(model_config: domain_config.ModelConfig, /) -> typing.Dict[str, typing.Any]:
    return attr.asdict(model_config)


def breakdown_document(
    rows: typing.Sequence[profiling_service.BreakdownRow],
) -> typing.List[typing.Dict[str, typing.Any]]:
    return [
        {
            "stage": row.stage,
            "macs": row.macs,
            "flops": row.flops,
            "flop_pct": row.flop_pct,
            "time_ms": row.time_ms,
            "time_pct": row.time_pct,
            "reference_flop_pct": row.reference_flop_pct,
            "reference_time_pct": row.reference_time_pct,
        }
        for row in rows
    ]


def breakdown_rows(
    rows: typing.Sequence[profiling_service.BreakdownRow],
) -> typing.List[typing.List[str]]:
    table = [["Stage", "MACs", "FLOPs", "FLOP %", "Time (ms)", "Time %", "Published FLOP %"]]
    for row in rows:
        table.append(
            [
                row.stage,
                f"{row.macs:,}",
                f"{row.flops:,}",
                format_percent(row.flop_pct),
                format_optional(row.time_ms),
                format_percent(row.time_pct),
                format_percent(row.reference_flop_pct),
            ]
        )

    return table


def params_document(report: profiling_service.ParamReport, /) -> typing.Dict[str, typing.Any]:
    return {
        "embeddings": report.embeddings,
        "per_block": report.per_block,
        "block_layers": dict(report.block_layers),
        "num_blocks": report.num_blocks,
        "blocks": report.blocks,
        "pooler": report.pooler,
        "classifier": report.classifier,
        "total": report.total,
        "mparams": report.mparams,
    }


def params_rows(report: profiling_service.ParamReport, /) -> typing.List[typing.List[str]]:
    return [
        ["Part", "Parameters"],
        ["embeddings", f"{report.embeddings:,}"],
        [f"encoder ({report.num_blocks} blocks)", f"{report.blocks:,}"],
        ["pooler", f"{report.pooler:,}"],
        ["classifier", f"{report.classifier:,}"],
        ["total", f"{report.total:,} ({report.mparams:.1f}M)"],
    ]


def efficiency_document(
    rows: typing.Sequence[profiling_service.EfficiencyRow],
) -> typing.List[typing.Dict[str, typing.Any]]:
    return [
        {
            "name": row.name,
            "mparams": row.mparams,
            "gflops": row.gflops,
            "speedup": row.speedup,
            "reference": None if row.reference is None else dict(row.reference),
        }
        for row in rows
    ]


def efficiency_rows(
    rows: typing.Sequence[profiling_service.EfficiencyRow],
) -> typing.List[typing.List[str]]:
    table = [["Model", "MParams", "GFLOPs", "Speedup", "Published MParams / GFLOPs / ms"]]
    for row in rows:
        reference = "-"
        if row.reference is not None:
            reference = " / ".join(
                f"{row.reference[key]:g}" for key in ("mparams", "gflops", "latency_ms")
            )

        table.append(
            [row.name, f"{row.mparams:.1f}", f"{row.gflops:.2f}", f"{row.speedup:.2f}x", reference]
        )

    return table


def latency_document(report: profiling_service.LatencyReport, /) -> typing.Dict[str, typing.Any]:
    return {
        "name": report.name,
        "seq_len": report.seq_len,
        "runs": report.runs,
        "warmup": report.warmup,
        "mean_ms": report.mean_ms,
        "std_ms": 1e3 * report.std,
        "run_times_ms": [1e3 * t for t in report.run_times],
    }


def suite_document(
    report: equivalence_service.EquivalenceReport, /
) -> typing.Dict[str, typing.Any]:
    return {
        "seed": report.seed,
        "passed": report.passed,
        "suites": [
            {
                "name": suite.name,
                "instances": suite.instances,
                "failures": suite.failures,
                "max_abs_diff": suite.max_abs_diff,
                "tolerance": suite.tolerance,
                "passed": suite.passed,
            }
            for suite in report.suites
        ],
    }


def suite_rows(report: equivalence_service.EquivalenceReport, /) -> typing.List[typing.List[str]]:
    table = [["Suite", "Instances", "Max |diff|", "Tolerance", "Result"]]
    for suite in report.suites:
        table.append(
            [
                suite.name,
                str(suite.instances),
                f"{suite.max_abs_diff:.3e}",
                "bitwise" if suite.tolerance == 0.0 else f"{suite.tolerance:g}",
                "pass" if suite.passed else f"FAIL ({suite.failures})",
            ]
        )

    return table


def gradcheck_document(
    report: gradient_service.GradCheckReport, /
) -> typing.Dict[str, typing.Any]:
    return {
        "passed": report.passed,
        "tolerance": report.tolerance,
        "step": report.step,
        "probed": report.probed,
        "max_error": report.max_error,
        "failures": report.failures(),
        "errors": dict(report.errors),
    }


def gradcheck_rows(report: gradient_service.GradCheckReport, /) -> typing.List[typing.List[str]]:
    table = [["Parameter", "Max relative error", "Result"]]
    for name, error in report.errors.items():
        table.append([name, f"{error:.3e}", "pass" if error < report.tolerance else "FAIL"])

    return table


def training_document(
    result: training_service.TrainingResult, /
) -> typing.Dict[str, typing.Any]:
    return {
        "steps": len(result.losses) - 1,
        "initial_loss": result.initial_loss,
        "final_loss": result.final_loss,
        "reduction": result.reduction,
        "losses": list(result.losses),
    }


def loss_curve_rows(
    result: training_service.TrainingResult,
    /,
    every: int = 25,
) -> typing.List[typing.List[str]]:
    """Loss every `every` steps; the last step is always included."""
    table = [["Step", "Loss"]]
    last = len(result.losses) - 1
    for step, loss in enumerate(result.losses):
        if step % every == 0 or step == last:
            table.append([str(step), f"{loss:.6f}"])

    return table
