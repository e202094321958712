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

__all__: typing.Sequence[str] = (
    "TABLE",
    "MACHINE",
    "OUTPUT_FORMATS",
    "LATENCY_SOFT_FLOOR",
    "REFERENCE_SPEEDUP",
    "show_profile",
    "show_efficiency",
    "show_benchmark",
    "show_latency_comparison",
    "show_equivalence",
    "show_gradcheck",
    "show_train_toy",
    "show_distill_toy",
    "show_save",
    "show_load",
)

import typing

import terminaltables  # type: ignore[import]

from gconvbert.application import output
from gconvbert.application import use_cases
from gconvbert.presentation import formatters

if typing.TYPE_CHECKING:
    from gconvbert.application.ports import checkpoint_store as checkpoint_store_port

TABLE: typing.Final[str] = "table"
MACHINE: typing.Final[str] = "machine"
OUTPUT_FORMATS: typing.Final[typing.Sequence[str]] = (TABLE, MACHINE)

LATENCY_SOFT_FLOOR: typing.Final[float] = 1.5
"""Measured SqueezeBERT speedup below which the comparison only warns."""

REFERENCE_SPEEDUP: typing.Final[float] = 4.3
"""Published Pixel 3 latency speedup of SqueezeBERT over BERT-base."""


def _print_table(rows: typing.Sequence[typing.Sequence[str]], title: str = "") -> None:
    table = terminaltables.SingleTable(rows)
    if title:
        table.title = title

    output.print(table.table)


def show_profile(
    *,
    preset: typing.Optional[str],
    config_path: typing.Optional[str],
    groups: typing.Optional[int],
    seq_len: int,
    output_format: str,
    verbose_exc: bool,
) -> use_cases.ExitCode:
    result = use_cases.get_profile(
        preset=preset,
        config_path=config_path,
        groups=groups,
        seq_len=seq_len,
        verbose_exc=verbose_exc,
    )
    if isinstance(result, use_cases.UseCaseFailure):
        return result.exit_code

    if output_format == MACHINE:
        output.print_document(
            {
                "name": result.name,
                "seq_len": result.flops.seq_len,
                "config": formatters.config_document(result.flops.config),
                "total_macs": result.flops.total_macs,
                "total_flops": result.flops.total_flops,
                "gflops": result.flops.gflops,
                "stages": formatters.breakdown_document(result.breakdown),
                "params": formatters.params_document(result.params),
                "efficiency": formatters.efficiency_document(result.efficiency),
            }
        )
        return use_cases.SUCCESS

    output.print_heading(output.HEADING_LEVEL_ONE, output.TOOL_HEADING_NAME)
    output.print_info(
        f"{result.name} at seq_len={result.flops.seq_len}: "
        f"{result.flops.gflops:.2f} GFLOPs, {result.params.mparams:.1f}M parameters"
    )
    _print_table(formatters.breakdown_rows(result.breakdown), title="Stages")
    _print_table(formatters.params_rows(result.params), title="Parameters")
    _print_table(formatters.efficiency_rows(result.efficiency), title="Efficiency")
    return use_cases.SUCCESS


def show_efficiency(
    *,
    seq_len: int,
    output_format: str,
    verbose_exc: bool,
) -> use_cases.ExitCode:
    rows = use_cases.get_efficiency(seq_len=seq_len, verbose_exc=verbose_exc)
    if isinstance(rows, use_cases.UseCaseFailure):
        return rows.exit_code

    if output_format == MACHINE:
        output.print_document({"seq_len": seq_len, "models": formatters.efficiency_document(rows)})
        return use_cases.SUCCESS

    output.print_heading(output.HEADING_LEVEL_ONE, output.TOOL_HEADING_NAME)
    _print_table(formatters.efficiency_rows(rows), title=f"Efficiency at seq_len={seq_len}")
    return use_cases.SUCCESS


def show_benchmark(
    *,
    preset: typing.Optional[str],
    config_path: typing.Optional[str],
    groups: typing.Optional[int],
    seq_len: int,
    runs: int,
    warmup: int,
    seed: int,
    output_format: str,
    verbose_exc: bool,
) -> use_cases.ExitCode:
    result = use_cases.run_benchmark(
        preset=preset,
        config_path=config_path,
        groups=groups,
        seq_len=seq_len,
        runs=runs,
        warmup=warmup,
        seed=seed,
        verbose_exc=verbose_exc,
    )
    if isinstance(result, use_cases.UseCaseFailure):
        return result.exit_code

    if output_format == MACHINE:
        document = formatters.latency_document(result.latency)
        document["stages"] = formatters.breakdown_document(result.breakdown)
        output.print_document(document)
        return use_cases.SUCCESS

    output.print_heading(output.HEADING_LEVEL_ONE, output.TOOL_HEADING_NAME)
    output.print_info(
        f"{result.latency.name}: {result.latency.runs} run(s) after {result.latency.warmup} "
        f"warmup, mean {result.latency.mean_ms:.3f} ms, std {1e3 * result.latency.std:.3f} ms"
    )
    _print_table(formatters.breakdown_rows(result.breakdown), title="Stages")
    return use_cases.SUCCESS


def show_latency_comparison(
    *,
    seq_len: int,
    runs: int,
    warmup: int,
    seed: int,
    output_format: str,
    verbose_exc: bool,
) -> use_cases.ExitCode:
    results = use_cases.compare_latency(
        seq_len=seq_len,
        runs=runs,
        warmup=warmup,
        seed=seed,
        verbose_exc=verbose_exc,
    )
    if isinstance(results, use_cases.UseCaseFailure):
        return results.exit_code

    baseline, squeezed = (result.latency for result in results)
    speedup = baseline.mean / squeezed.mean
    ordered = squeezed.mean < baseline.mean
    below_floor = ordered and speedup < LATENCY_SOFT_FLOOR

    if output_format == MACHINE:
        output.print_document(
            {
                "models": [formatters.latency_document(r.latency) for r in results],
                "speedup": speedup,
                "reference_speedup": REFERENCE_SPEEDUP,
                "soft_floor": LATENCY_SOFT_FLOOR,
                "ordered": ordered,
                "below_soft_floor": below_floor,
            }
        )
    else:
        output.print_heading(output.HEADING_LEVEL_ONE, output.TOOL_HEADING_NAME)
        _print_table(
            [
                ["Model", "Mean (ms)", "Std (ms)"],
                *(
                    [r.name, f"{r.mean_ms:.3f}", f"{1e3 * r.std:.3f}"]
                    for r in (baseline, squeezed)
                ),
            ],
            title=f"Latency at seq_len={seq_len}",
        )
        output.print_info(
            f"Measured speedup {speedup:.2f}x (published Pixel 3 speedup {REFERENCE_SPEEDUP}x)."
        )

    if below_floor:
        output.print_warning(
            f"Measured speedup {speedup:.2f}x is below {LATENCY_SOFT_FLOOR}x on this host.",
            err=True,
        )

    if not ordered:
        output.print_error(
            f"{squeezed.name} is not faster than {baseline.name} on this host "
            f"({squeezed.mean_ms:.3f} ms vs {baseline.mean_ms:.3f} ms)."
        )
        return use_cases.FAILURE

    return use_cases.SUCCESS


def show_equivalence(
    *,
    seed: int,
    instances: int,
    output_format: str,
    verbose_exc: bool,
) -> use_cases.ExitCode:
    report = use_cases.run_equivalence(seed=seed, instances=instances, verbose_exc=verbose_exc)
    if isinstance(report, use_cases.UseCaseFailure):
        return report.exit_code

    if output_format == MACHINE:
        output.print_document(formatters.suite_document(report))
    else:
        output.print_heading(output.HEADING_LEVEL_ONE, output.TOOL_HEADING_NAME)
        _print_table(formatters.suite_rows(report), title=f"Equivalence suites, seed {seed}")
        if report.passed:
            output.print_success("All equivalence suites passed.")
        else:
            output.print_error("Some equivalence suites failed.")

    return use_cases.SUCCESS if report.passed else use_cases.FAILURE


def show_gradcheck(
    *,
    preset: str,
    groups: typing.Optional[int],
    loss: str,
    tol: float,
    step: float,
    sample_fraction: typing.Optional[float],
    seed: int,
    output_format: str,
    verbose_exc: bool,
) -> use_cases.ExitCode:
    report = use_cases.run_gradcheck(
        preset=preset,
        groups=groups,
        loss=loss,
        tol=tol,
        step=step,
        sample_fraction=sample_fraction,
        seed=seed,
        verbose_exc=verbose_exc,
    )
    if isinstance(report, use_cases.UseCaseFailure):
        return report.exit_code

    if output_format == MACHINE:
        output.print_document(formatters.gradcheck_document(report))
    else:
        output.print_heading(output.HEADING_LEVEL_ONE, output.TOOL_HEADING_NAME)
        _print_table(formatters.gradcheck_rows(report), title=f"Gradient check ({loss})")
        summary = (
            f"{report.probed} element(s) probed, max relative error {report.max_error:.3e} "
            f"(tolerance {report.tolerance:g})."
        )
        if report.passed:
            output.print_success(summary)
        else:
            output.print_error(summary)

    return use_cases.SUCCESS if report.passed else use_cases.FAILURE


def show_train_toy(
    *,
    steps: int,
    lr: float,
    seed: int,
    groups: int,
    output_format: str,
    verbose_exc: bool,
) -> use_cases.ExitCode:
    result = use_cases.run_train_toy(
        steps=steps, lr=lr, seed=seed, groups=groups, verbose_exc=verbose_exc
    )
    if isinstance(result, use_cases.UseCaseFailure):
        return result.exit_code

    if output_format == MACHINE:
        document = formatters.training_document(result)
        document.update(lr=lr, seed=seed, groups=groups)
        output.print_document(document)
        return use_cases.SUCCESS

    output.print_heading(output.HEADING_LEVEL_ONE, output.TOOL_HEADING_NAME)
    _print_table(formatters.loss_curve_rows(result), title="Toy task loss")
    output.print_info(
        f"Loss {result.initial_loss:.6f} -> {result.final_loss:.6f} "
        f"({100.0 * result.reduction:.1f}% reduction)."
    )
    return use_cases.SUCCESS


def show_distill_toy(
    *,
    alpha: float,
    steps: int,
    lr: float,
    seed: int,
    groups: int,
    teacher_steps: int,
    output_format: str,
    verbose_exc: bool,
) -> use_cases.ExitCode:
    result = use_cases.run_distill_toy(
        alpha=alpha,
        steps=steps,
        lr=lr,
        seed=seed,
        groups=groups,
        teacher_steps=teacher_steps,
        verbose_exc=verbose_exc,
    )
    if isinstance(result, use_cases.UseCaseFailure):
        return result.exit_code

    teacher, student = result
    if output_format == MACHINE:
        document = formatters.training_document(student)
        document.update(
            alpha=alpha,
            lr=lr,
            seed=seed,
            groups=groups,
            teacher=formatters.training_document(teacher),
        )
        output.print_document(document)
        return use_cases.SUCCESS

    output.print_heading(output.HEADING_LEVEL_ONE, output.TOOL_HEADING_NAME)
    output.print_info(f"Teacher loss after {teacher_steps} step(s): {teacher.final_loss:.6f}.")
    _print_table(formatters.loss_curve_rows(student), title=f"Student loss, alpha={alpha:g}")
    output.print_info(f"Student loss {student.initial_loss:.6f} -> {student.final_loss:.6f}.")
    return use_cases.SUCCESS


def show_save(
    store: checkpoint_store_port.CheckpointStore,
    *,
    preset: typing.Optional[str],
    config_path: typing.Optional[str],
    groups: typing.Optional[int],
    seed: int,
    output_path: str,
    output_format: str,
    verbose_exc: bool,
) -> use_cases.ExitCode:
    result = use_cases.save_checkpoint(
        store,
        preset=preset,
        config_path=config_path,
        groups=groups,
        seed=seed,
        output_path=output_path,
        verbose_exc=verbose_exc,
    )
    if isinstance(result, use_cases.UseCaseFailure):
        return result.exit_code

    if output_format == MACHINE:
        output.print_document(
            {
                "path": result.path,
                "bytes": result.byte_count,
                "parameters": result.parameters,
                "config": formatters.config_document(result.config),
            }
        )
        return use_cases.SUCCESS

    output.print_heading(output.HEADING_LEVEL_ONE, output.TOOL_HEADING_NAME)
    output.print_success(
        f"Saved {result.parameters:,} parameter(s) to {result.path} ({result.byte_count:,} bytes)."
    )
    return use_cases.SUCCESS


def show_load(
    store: checkpoint_store_port.CheckpointStore,
    *,
    path: str,
    check_roundtrip: bool,
    output_format: str,
    verbose_exc: bool,
) -> use_cases.ExitCode:
    result = use_cases.load_checkpoint(
        store,
        path=path,
        check_roundtrip=check_roundtrip,
        verbose_exc=verbose_exc,
    )
    if isinstance(result, use_cases.UseCaseFailure):
        return result.exit_code

    if output_format == MACHINE:
        output.print_document(
            {
                "path": result.path,
                "bytes": result.byte_count,
                "parameters": result.parameters,
                "config": formatters.config_document(result.config),
                "roundtrip": result.roundtrip,
            }
        )
    else:
        output.print_heading(output.HEADING_LEVEL_ONE, output.TOOL_HEADING_NAME)
        config_items = formatters.config_document(result.config).items()
        _print_table(
            [["Field", "Value"], *([key, repr(value)] for key, value in config_items)],
            title=result.path,
        )
        output.print_success(
            f"Loaded {result.parameters:,} parameter(s) from {result.byte_count:,} bytes."
        )
        if result.roundtrip is True:
            output.print_success("Re-saving reproduces the checkpoint byte for byte.")
        elif result.roundtrip is False:
            output.print_error("Re-saving does not reproduce the checkpoint.")

    return use_cases.FAILURE if result.roundtrip is False else use_cases.SUCCESS
