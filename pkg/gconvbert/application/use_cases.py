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
r"""Use cases behind the command line.

Use cases never raise. A failing use case renders the error on stderr and
reports an exit code instead: configuration and usage problems map to
`USAGE_ERROR`, everything else to `FAILURE`.
"""
from __future__ import annotations

__all__: typing.Sequence[str] = (
    "ExitCode",
    "SUCCESS",
    "FAILURE",
    "USAGE_ERROR",
    "UseCaseFailure",
    "UseCaseFailureOr",
    "ProfileResult",
    "BenchResult",
    "SaveResult",
    "LoadResult",
    "exit_code_for",
    "usecase",
    "query_usecase",
    "render_error",
    "read_settings",
    "resolve_config",
    "get_profile",
    "get_efficiency",
    "run_benchmark",
    "compare_latency",
    "run_equivalence",
    "run_gradcheck",
    "run_train_toy",
    "run_distill_toy",
    "save_checkpoint",
    "load_checkpoint",
)

import functools
import io
import traceback
import typing

import attr
import typing_extensions

from gconvbert import util
from gconvbert.application import output
from gconvbert.application.ports import config_reader as config_reader_port
from gconvbert.application.services import equivalence_service
from gconvbert.application.services import gradient_service
from gconvbert.application.services import profiling_service
from gconvbert.application.services import training_service
from gconvbert.domain import model as domain_model
from gconvbert.domain import model_config as domain_config
from gconvbert.domain import model_exception as domain_exception

if typing.TYPE_CHECKING:
    from gconvbert.application import config
    from gconvbert.application.ports import checkpoint_store as checkpoint_store_port

_T = typing.TypeVar("_T")
try:
    _P = typing.ParamSpec("_P")
except AttributeError:
    _P = typing_extensions.ParamSpec("_P")

ExitCode: typing.TypeAlias = int

SUCCESS: typing.Final[ExitCode] = 0

FAILURE: typing.Final[ExitCode] = 1
"""A check did not hold, or the run failed."""

USAGE_ERROR: typing.Final[ExitCode] = 2
"""Bad flags, config or input files."""

_SETTINGS_READER: typing.Final[str] = "gconvbert.infrastructure.config_readers.YamlSettingsReader"
_MODEL_CONFIG_READER: typing.Final[str] = (
    "gconvbert.infrastructure.config_readers.KeyValueModelConfigReader"
)


@attr.define(frozen=True)
class UseCaseFailure:
    r"""Returned by query use cases in place of their result.

    Query use cases compute data, so unlike plain use cases they cannot
    return an `ExitCode`; the failure carries the one to exit with.
    """

    exit_code: ExitCode = attr.field(default=FAILURE)


UseCaseFailureOr = typing.Union[_T, UseCaseFailure]


def exit_code_for(exc: BaseException) -> ExitCode:
    if isinstance(exc, (domain_exception.CheckpointError, domain_exception.NumericError)):
        return FAILURE

    if isinstance(exc, (ValueError, OSError, LookupError)):
        return USAGE_ERROR

    return FAILURE


def usecase(
    *,
    has_verbose_exc: bool,
) -> typing.Callable[[typing.Callable[_P, ExitCode]], typing.Callable[_P, ExitCode]]:
    def decorator(func: typing.Callable[_P, ExitCode]) -> typing.Callable[_P, ExitCode]:
        @functools.wraps(func)
        def wrapper(*args: _P.args, **kwargs: _P.kwargs) -> ExitCode:
            try:
                return func(*args, **kwargs)
            except Exception as exc:
                render_error(
                    exc,
                    verbose_exc=typing.cast(
                        bool,
                        kwargs.get("verbose_exc", False) if has_verbose_exc else False,
                    ),
                )
                return exit_code_for(exc)

        return wrapper

    return decorator


def query_usecase(
    *,
    has_verbose_exc: bool,
) -> typing.Callable[[typing.Callable[_P, _T]], typing.Callable[_P, UseCaseFailureOr[_T]]]:
    def decorator(func: typing.Callable[_P, _T]) -> typing.Callable[_P, UseCaseFailureOr[_T]]:
        @functools.wraps(func)
        def wrapper(*args: _P.args, **kwargs: _P.kwargs) -> UseCaseFailureOr[_T]:
            try:
                return func(*args, **kwargs)
            except Exception as exc:
                render_error(
                    exc,
                    verbose_exc=typing.cast(
                        bool,
                        kwargs.get("verbose_exc", False) if has_verbose_exc else False,
                    ),
                )
                return UseCaseFailure(exit_code_for(exc))

        return wrapper

    return decorator


def render_error(exc: BaseException, verbose_exc: bool = False) -> None:
    output.print_heading(output.HEADING_LEVEL_ONE, output.TOOL_HEADING_NAME, err=True)
    output.print_warning(type(exc).__name__ + " : " + str(exc), err=True)

    if verbose_exc:
        exc_info = traceback.format_exception(type(exc), exc, exc.__traceback__)
        output.print_error("".join(exc_info))


@query_usecase(has_verbose_exc=True)
def read_settings(
    settings_filepath: typing.Optional[str],
    *,
    verbose_exc: bool,
) -> config.Settings:
    reader = util.import_obj(_SETTINGS_READER, cast=config_reader_port.SettingsReader)()
    return reader.read_settings(settings_filepath) or reader.default_settings()


def resolve_config(
    *,
    preset: typing.Optional[str] = None,
    config_path: typing.Optional[str] = None,
    groups: typing.Optional[int] = None,
) -> typing.Tuple[str, domain_config.ModelConfig]:
    r"""Returns a display name and the config selected by a preset or a file.

    Raises
    ------
    ConfigurationError
        If both or neither source is given, or `groups` is combined with
        a config file.
    """
    if (preset is None) == (config_path is None):
        raise domain_exception.ConfigurationError(
            "exactly one of a preset or a config file must be given", field="preset"
        )

    if config_path is not None:
        if groups is not None:
            raise domain_exception.ConfigurationError(
                "cannot override the groups of a config file", field="groups"
            )

        reader = util.import_obj(_MODEL_CONFIG_READER, cast=config_reader_port.ModelConfigReader)()
        return config_path, reader.read_model_config(config_path)

    assert preset is not None
    return preset, domain_config.preset_config(preset, groups=groups)


@attr.define(frozen=True, kw_only=True)
class ProfileResult:
    name: str = attr.field()
    flops: profiling_service.FlopReport = attr.field()
    params: profiling_service.ParamReport = attr.field()
    breakdown: typing.Sequence[profiling_service.BreakdownRow] = attr.field()
    efficiency: typing.Sequence[profiling_service.EfficiencyRow] = attr.field()


@query_usecase(has_verbose_exc=True)
def get_profile(
    *,
    preset: typing.Optional[str],
    config_path: typing.Optional[str],
    groups: typing.Optional[int],
    seq_len: int,
    verbose_exc: bool,
) -> ProfileResult:
    name, model_config = resolve_config(preset=preset, config_path=config_path, groups=groups)
    flops = profiling_service.count_flops(model_config, seq_len)

    # Efficiency is always relative to BERT-base at the same sequence length.
    compared: typing.Dict[str, domain_config.ModelConfig] = {
        "bert-base": domain_config.preset_config("bert-base")
    }
    compared[name] = model_config

    return ProfileResult(
        name=name,
        flops=flops,
        params=profiling_service.count_params(model_config),
        breakdown=profiling_service.stage_breakdown(flops),
        efficiency=profiling_service.efficiency_table(compared, seq_len),
    )


@query_usecase(has_verbose_exc=True)
def get_efficiency(
    *,
    seq_len: int,
    verbose_exc: bool,
) -> typing.List[profiling_service.EfficiencyRow]:
    return profiling_service.efficiency_table(
        {name: domain_config.preset_config(name) for name in ("bert-base", "squeezebert")},
        seq_len,
    )


@attr.define(frozen=True, kw_only=True)
class BenchResult:
    latency: profiling_service.LatencyReport = attr.field()
    breakdown: typing.Sequence[profiling_service.BreakdownRow] = attr.field()


def _benchmark(
    name: str,
    model_config: domain_config.ModelConfig,
    *,
    seq_len: int,
    runs: int,
    warmup: int,
    seed: int,
) -> BenchResult:
    model = domain_model.build_model(model_config, util.derive_seed(seed, "bench-model"))
    latency = profiling_service.benchmark_latency(
        model,
        model_config,
        seq_len=seq_len,
        runs=runs,
        warmup=warmup,
        seed=util.derive_seed(seed, "bench-inputs"),
        name=name,
    )
    flops = profiling_service.count_flops(model_config, seq_len)
    return BenchResult(
        latency=latency,
        breakdown=profiling_service.stage_breakdown(flops, latency),
    )


@query_usecase(has_verbose_exc=True)
def run_benchmark(
    *,
    preset: typing.Optional[str],
    config_path: typing.Optional[str],
    groups: typing.Optional[int],
    seq_len: int,
    runs: int,
    warmup: int,
    seed: int,
    verbose_exc: bool,
) -> BenchResult:
    name, model_config = resolve_config(preset=preset, config_path=config_path, groups=groups)
    return _benchmark(name, model_config, seq_len=seq_len, runs=runs, warmup=warmup, seed=seed)


@query_usecase(has_verbose_exc=True)
def compare_latency(
    *,
    seq_len: int,
    runs: int,
    warmup: int,
    seed: int,
    verbose_exc: bool,
) -> typing.List[BenchResult]:
    """Benchmarks BERT-base and then SqueezeBERT on identical inputs."""
    return [
        _benchmark(
            name,
            domain_config.preset_config(name),
            seq_len=seq_len,
            runs=runs,
            warmup=warmup,
            seed=seed,
        )
        for name in ("bert-base", "squeezebert")
    ]


@query_usecase(has_verbose_exc=True)
def run_equivalence(
    *,
    seed: int,
    instances: int,
    verbose_exc: bool,
) -> equivalence_service.EquivalenceReport:
    if instances < 1:
        raise domain_exception.ConfigurationError("must be positive", field="instances")

    return equivalence_service.run_suites(seed, instances=instances)


@query_usecase(has_verbose_exc=True)
def run_gradcheck(
    *,
    preset: str,
    groups: typing.Optional[int],
    loss: str,
    tol: float,
    step: float,
    sample_fraction: typing.Optional[float],
    seed: int,
    verbose_exc: bool,
) -> gradient_service.GradCheckReport:
    _, model_config = resolve_config(preset=preset, groups=groups)
    model, inputs, loss_spec = gradient_service.random_problem(model_config, seed, loss=loss)
    return gradient_service.finite_diff_check(
        model,
        inputs,
        loss_spec,
        step=step,
        tol=tol,
        sample_fraction=sample_fraction,
        seed=util.derive_seed(seed, "gradcheck-sample"),
    )


@query_usecase(has_verbose_exc=True)
def run_train_toy(
    *,
    steps: int,
    lr: float,
    seed: int,
    groups: int,
    verbose_exc: bool,
) -> training_service.TrainingResult:
    return training_service.train_toy(steps=steps, lr=lr, seed=seed, groups=groups)


@query_usecase(has_verbose_exc=True)
def run_distill_toy(
    *,
    alpha: float,
    steps: int,
    lr: float,
    seed: int,
    groups: int,
    teacher_steps: int,
    verbose_exc: bool,
) -> typing.Tuple[training_service.TrainingResult, training_service.TrainingResult]:
    return training_service.distill_toy(
        alpha=alpha,
        steps=steps,
        lr=lr,
        seed=seed,
        groups=groups,
        teacher_steps=teacher_steps,
    )


@attr.define(frozen=True, kw_only=True)
class SaveResult:
    path: str = attr.field()
    config: domain_config.ModelConfig = attr.field()
    parameters: int = attr.field()
    byte_count: int = attr.field()


@query_usecase(has_verbose_exc=True)
def save_checkpoint(
    store: checkpoint_store_port.CheckpointStore,
    *,
    preset: typing.Optional[str],
    config_path: typing.Optional[str],
    groups: typing.Optional[int],
    seed: int,
    output_path: str,
    verbose_exc: bool,
) -> SaveResult:
    _, model_config = resolve_config(preset=preset, config_path=config_path, groups=groups)
    weights = domain_model.build_model(model_config, seed)
    byte_count = store.save(model_config, weights, output_path)
    return SaveResult(
        path=output_path,
        config=model_config,
        parameters=weights.parameter_count(),
        byte_count=byte_count,
    )


@attr.define(frozen=True, kw_only=True)
class LoadResult:
    path: str = attr.field()
    config: domain_config.ModelConfig = attr.field()
    parameters: int = attr.field()
    byte_count: int = attr.field()
    roundtrip: typing.Optional[bool] = attr.field(default=None)
    """Whether re-saving reproduced the file byte for byte; None when not checked."""


@query_usecase(has_verbose_exc=True)
def load_checkpoint(
    store: checkpoint_store_port.CheckpointStore,
    *,
    path: str,
    check_roundtrip: bool,
    verbose_exc: bool,
) -> LoadResult:
    try:
        with open(path, "rb") as file:
            data = file.read()
    except OSError as exc:
        raise domain_exception.CheckpointStorageError(path, str(exc)) from exc

    model_config, weights = store.load(data)

    roundtrip: typing.Optional[bool] = None
    if check_roundtrip:
        buffer = io.BytesIO()
        store.save(model_config, weights, buffer)
        roundtrip = buffer.getvalue() == data

    return LoadResult(
        path=path,
        config=model_config,
        parameters=weights.parameter_count(),
        byte_count=len(data),
        roundtrip=roundtrip,
    )
