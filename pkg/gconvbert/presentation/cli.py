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
    "CliSession",
    "pass_session",
    "cli",
    "profile",
    "efficiency",
    "bench",
    "equiv",
    "gradcheck",
    "train_toy",
    "distill_toy",
    "save",
    "load",
)

import functools
import sys
import typing

import attr
import click

from gconvbert.application import use_cases
from gconvbert.application import ux
from gconvbert.application.services import gradient_service
from gconvbert.domain import model_config as domain_config
from gconvbert.infrastructure.persistence import checkpoints
from gconvbert.presentation import presenters

if typing.TYPE_CHECKING:
    from gconvbert.application import config

_P = typing.ParamSpec("_P")
_T = typing.TypeVar("_T")


@attr.define(frozen=True, kw_only=True)
class CliSession:
    settings: config.Settings = attr.field()
    output_format: str = attr.field()
    verbose_exc: bool = attr.field()

    def checkpoint_store(self) -> checkpoints.BinaryCheckpointStore:
        return checkpoints.BinaryCheckpointStore.from_settings(self.settings)


def pass_session(command: typing.Callable[_P, _T]) -> typing.Callable[_P, _T]:
    @click.pass_context
    def wrapper(ctx: click.Context, *args: _P.args, **kwargs: _P.kwargs) -> _T:
        params = ctx.find_root().params
        settings = use_cases.read_settings(
            params["settings_file"],
            verbose_exc=params["verbose_exc"],
        )

        if isinstance(settings, use_cases.UseCaseFailure):
            ctx.exit(settings.exit_code)

        assert not isinstance(settings, use_cases.UseCaseFailure)
        ux.configure_logging(settings.logging_dict, verbose=params["verbose"])

        session = CliSession(
            settings=settings,
            output_format=params["output_format"],
            verbose_exc=params["verbose_exc"],
        )
        return typing.cast(_T, ctx.invoke(command, *args, session=session, **kwargs))

    return typing.cast(
        typing.Callable[_P, _T],
        functools.update_wrapper(wrapper, command),
    )


def _model_options(command: typing.Callable[_P, _T]) -> typing.Callable[_P, _T]:
    command = click.option(
        "--groups",
        type=click.IntRange(min=1),
        default=None,
        help="Group count of the grouped layers (preset default when omitted).",
    )(command)
    command = click.option(
        "--config",
        "config_path",
        type=click.Path(dir_okay=False),
        default=None,
        help="Model config file in 'key = value' form; excludes --preset.",
    )(command)
    return click.option(
        "--preset",
        type=click.Choice(list(domain_config.PRESETS)),
        default=None,
        help="Built-in model config; excludes --config.",
    )(command)


@click.group()
@click.option(
    "--settings-file",
    type=click.STRING,
    default=None,
    help="Tool settings YAML file (default: nearest gconvbert.yaml or gconvbert.yml).",
)
@click.option("--verbose", is_flag=True, help="Log progress at INFO level on stderr.")
@click.option("--verbose-exc", is_flag=True, help="Print tracebacks of errors.")
@click.option(
    "--format",
    "output_format",
    type=click.Choice(list(presenters.OUTPUT_FORMATS)),
    default=presenters.TABLE,
    show_default=True,
    help="Human-readable tables or one JSON document on stdout.",
)
def cli(**params: typing.Any) -> None:
    """Grouped-convolution encoder engine: profiling, verification and toy training."""


@cli.command()
@_model_options
@click.option("--seq-len", type=click.IntRange(min=1), default=128, show_default=True)
@pass_session
def profile(
    session: CliSession,
    preset: typing.Optional[str],
    config_path: typing.Optional[str],
    groups: typing.Optional[int],
    seq_len: int,
) -> None:
    """Count FLOPs and parameters per stage.

    Prints the five-stage FLOP breakdown, the parameter count, and the
    model's size and cost next to BERT-base with the published values.
    """
    exit_code = presenters.show_profile(
        preset=preset,
        config_path=config_path,
        groups=groups,
        seq_len=seq_len,
        output_format=session.output_format,
        verbose_exc=session.verbose_exc,
    )
    sys.exit(exit_code)


@cli.command()
@click.option("--seq-len", type=click.IntRange(min=1), default=128, show_default=True)
@pass_session
def efficiency(session: CliSession, seq_len: int) -> None:
    """Compare BERT-base and SqueezeBERT size and FLOPs."""
    exit_code = presenters.show_efficiency(
        seq_len=seq_len,
        output_format=session.output_format,
        verbose_exc=session.verbose_exc,
    )
    sys.exit(exit_code)


@cli.command()
@_model_options
@click.option("--seq-len", type=click.IntRange(min=1), default=128, show_default=True)
@click.option(
    "--runs",
    type=click.IntRange(min=1),
    default=None,
    help="Timed runs (default from settings, 40).",
)
@click.option(
    "--warmup",
    type=click.IntRange(min=0),
    default=None,
    help="Untimed warmup runs (default from settings, 5).",
)
@click.option("--seed", type=click.INT, default=0, show_default=True)
@click.option(
    "--compare",
    is_flag=True,
    help="Benchmark BERT-base against SqueezeBERT instead of a single model.",
)
@pass_session
def bench(
    session: CliSession,
    preset: typing.Optional[str],
    config_path: typing.Optional[str],
    groups: typing.Optional[int],
    seq_len: int,
    runs: typing.Optional[int],
    warmup: typing.Optional[int],
    seed: int,
    compare: bool,
) -> None:
    """Time the forward pass at batch size 1.

    Timings depend on the host; everything else is fixed by --seed.
    """
    runs = session.settings.benchmark.runs if runs is None else runs
    warmup = session.settings.benchmark.warmup if warmup is None else warmup

    if compare:
        exit_code = presenters.show_latency_comparison(
            seq_len=seq_len,
            runs=runs,
            warmup=warmup,
            seed=seed,
            output_format=session.output_format,
            verbose_exc=session.verbose_exc,
        )
    else:
        exit_code = presenters.show_benchmark(
            preset=preset,
            config_path=config_path,
            groups=groups,
            seq_len=seq_len,
            runs=runs,
            warmup=warmup,
            seed=seed,
            output_format=session.output_format,
            verbose_exc=session.verbose_exc,
        )
    sys.exit(exit_code)


@cli.command()
@click.option("--seed", type=click.INT, default=0, show_default=True)
@click.option(
    "--instances",
    type=click.IntRange(min=1),
    default=100,
    show_default=True,
    help="Random instances per suite (the cost suite uses half).",
)
@pass_session
def equiv(session: CliSession, seed: int, instances: int) -> None:
    """Run the randomized layer equivalence suites."""
    exit_code = presenters.show_equivalence(
        seed=seed,
        instances=instances,
        output_format=session.output_format,
        verbose_exc=session.verbose_exc,
    )
    sys.exit(exit_code)


@cli.command()
@click.option(
    "--preset",
    type=click.Choice(list(domain_config.PRESETS)),
    default="tiny",
    show_default=True,
)
@click.option("--groups", type=click.IntRange(min=1), default=None)
@click.option(
    "--loss",
    type=click.Choice(list(gradient_service.LOSS_NAMES)),
    default="soft-ce",
    show_default=True,
)
@click.option("--tol", type=click.FLOAT, default=1e-4, show_default=True)
@click.option("--step", type=click.FLOAT, default=1e-5, show_default=True)
@click.option(
    "--sample-fraction",
    type=click.FloatRange(min=0.0, max=1.0, min_open=True),
    default=None,
    help="Fraction of each tensor to probe (all of a small model by default).",
)
@click.option("--seed", type=click.INT, default=0, show_default=True)
@pass_session
def gradcheck(
    session: CliSession,
    preset: str,
    groups: typing.Optional[int],
    loss: str,
    tol: float,
    step: float,
    sample_fraction: typing.Optional[float],
    seed: int,
) -> None:
    """Certify analytical gradients against central finite differences."""
    exit_code = presenters.show_gradcheck(
        preset=preset,
        groups=groups,
        loss=loss,
        tol=tol,
        step=step,
        sample_fraction=sample_fraction,
        seed=seed,
        output_format=session.output_format,
        verbose_exc=session.verbose_exc,
    )
    sys.exit(exit_code)


@cli.command()
@click.option("--steps", type=click.IntRange(min=0), default=300, show_default=True)
@click.option("--lr", type=click.FLOAT, default=0.2, show_default=True)
@click.option("--seed", type=click.INT, default=0, show_default=True)
@click.option("--groups", type=click.IntRange(min=1), default=1, show_default=True)
@pass_session
def train_toy(session: CliSession, steps: int, lr: float, seed: int, groups: int) -> None:
    """Train a tiny model on the built-in synthetic task."""
    exit_code = presenters.show_train_toy(
        steps=steps,
        lr=lr,
        seed=seed,
        groups=groups,
        output_format=session.output_format,
        verbose_exc=session.verbose_exc,
    )
    sys.exit(exit_code)


@cli.command()
@click.option(
    "--alpha",
    type=click.FloatRange(min=0.0, max=1.0),
    required=True,
    help="Weight of the ground truth in the target; 1 ignores the teacher.",
)
@click.option("--steps", type=click.IntRange(min=0), default=300, show_default=True)
@click.option("--lr", type=click.FLOAT, default=0.2, show_default=True)
@click.option("--seed", type=click.INT, default=0, show_default=True)
@click.option("--groups", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--teacher-steps", type=click.IntRange(min=0), default=200, show_default=True)
@pass_session
def distill_toy(
    session: CliSession,
    alpha: float,
    steps: int,
    lr: float,
    seed: int,
    groups: int,
    teacher_steps: int,
) -> None:
    """Distill a frozen toy teacher into a fresh tiny student."""
    exit_code = presenters.show_distill_toy(
        alpha=alpha,
        steps=steps,
        lr=lr,
        seed=seed,
        groups=groups,
        teacher_steps=teacher_steps,
        output_format=session.output_format,
        verbose_exc=session.verbose_exc,
    )
    sys.exit(exit_code)


@cli.command()
@_model_options
@click.option("--seed", type=click.INT, default=0, show_default=True)
@click.option(
    "-o",
    "--output",
    "output_path",
    type=click.Path(dir_okay=False),
    required=True,
    help="Checkpoint file to write.",
)
@pass_session
def save(
    session: CliSession,
    preset: typing.Optional[str],
    config_path: typing.Optional[str],
    groups: typing.Optional[int],
    seed: int,
    output_path: str,
) -> None:
    """Build a freshly initialized model and write it as a checkpoint."""
    exit_code = presenters.show_save(
        session.checkpoint_store(),
        preset=preset,
        config_path=config_path,
        groups=groups,
        seed=seed,
        output_path=output_path,
        output_format=session.output_format,
        verbose_exc=session.verbose_exc,
    )
    sys.exit(exit_code)


@cli.command()
@click.argument("path", type=click.STRING, metavar="PATH", required=True)
@click.option(
    "--check-roundtrip",
    is_flag=True,
    help="Re-save in memory and require a byte-identical result.",
)
@pass_session
def load(session: CliSession, path: str, check_roundtrip: bool) -> None:
    """Read and validate a checkpoint, then print its config."""
    exit_code = presenters.show_load(
        session.checkpoint_store(),
        path=path,
        check_roundtrip=check_roundtrip,
        output_format=session.output_format,
        verbose_exc=session.verbose_exc,
    )
    sys.exit(exit_code)


if __name__ == "__main__":
    cli()
