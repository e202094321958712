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
r"""Analytic FLOP and parameter accounting, and the latency harness.

Only multiply-accumulates are counted: a layer with kernel size K and
G groups costs `P * C_out * (C_in / G) * K` MACs, the attention
matmuls `2 * P^2 * C` per block, and lookups, softmax, GELU, layer norm
and bias adds cost nothing. One MAC is two FLOPs.
"""
from __future__ import annotations

__all__: typing.Sequence[str] = (
    "STAGES",
    "REFERENCE_FLOP_SHARES",
    "REFERENCE_LATENCY_SHARES",
    "REFERENCE_EFFICIENCY",
    "FlopReport",
    "ParamReport",
    "LatencyReport",
    "BreakdownRow",
    "EfficiencyRow",
    "layer_macs",
    "per_layer_macs",
    "count_flops",
    "count_params",
    "benchmark_latency",
    "stage_breakdown",
    "efficiency_table",
)

import logging
import statistics
import typing

import attr
import numpy as np

from gconvbert import util
from gconvbert.domain import model as domain_model
from gconvbert.domain import model_config as domain_config
from gconvbert.domain import model_exception as domain_exception
from gconvbert.domain import tensor

_LOGGER: typing.Final[logging.Logger] = logging.getLogger("gconvbert.profiling_service")

STAGES: typing.Final[typing.Sequence[str]] = (
    "embedding",
    "qkv",
    "attention",
    "ffn",
    "classifier",
)

REFERENCE_FLOP_SHARES: typing.Final[typing.Mapping[str, float]] = {
    "embedding": 0.00,
    "qkv": 24.3,
    "attention": 2.70,
    "ffn": 73.0,
    "classifier": 0.00,
}
"""Published BERT-base FLOP share per stage at sequence length 128, in percent."""

REFERENCE_LATENCY_SHARES: typing.Final[typing.Mapping[str, float]] = {
    "embedding": 0.26,
    "qkv": 18.9,
    "attention": 11.3,
    "ffn": 69.4,
    "classifier": 0.02,
}
"""Published BERT-base latency share per stage on a Pixel 3 phone, in percent."""

REFERENCE_EFFICIENCY: typing.Final[typing.Mapping[str, typing.Mapping[str, float]]] = {
    "bert-base": {"mparams": 109.0, "gflops": 22.5, "latency_ms": 1690.0},
    "squeezebert": {"mparams": 51.1, "gflops": 7.42, "latency_ms": 390.0},
}
"""Published model sizes, costs and Pixel 3 latencies (informational)."""

_SHARE_TOLERANCE: typing.Final[float] = 0.01


def layer_macs(
    seq_len: int,
    in_channels: int,
    out_channels: int,
    *,
    groups: int = 1,
    kernel_size: int = 1,
) -> int:
    return seq_len * out_channels * (in_channels // groups) * kernel_size


def _check_seq_len(config: domain_config.ModelConfig, seq_len: int) -> None:
    if not 1 <= seq_len <= config.max_positions:
        raise domain_exception.ConfigurationError(
            f"must lie in [1, {config.max_positions}], got {seq_len}", field="seq_len"
        )


@attr.define(frozen=True, kw_only=True)
class FlopReport:
    config: domain_config.ModelConfig = attr.field()
    seq_len: int = attr.field()
    macs: typing.Mapping[str, int] = attr.field()

    @property
    def total_macs(self) -> int:
        return sum(self.macs.values())

    @property
    def total_flops(self) -> int:
        return 2 * self.total_macs

    @property
    def gflops(self) -> float:
        return self.total_flops / 1e9

    def flops(self, stage: str) -> int:
        return 2 * self.macs[stage]

    def share(self, stage: str) -> float:
        """Percentage of the total FLOPs spent in `stage`."""
        total = self.total_macs
        return 100.0 * self.macs[stage] / total if total else 0.0

    def rows(self) -> typing.List[typing.Dict[str, typing.Any]]:
        return [
            {
                "stage": stage,
                "macs": self.macs[stage],
                "flops": self.flops(stage),
                "flop_pct": self.share(stage),
            }
            for stage in STAGES
        ]


@attr.define(frozen=True, kw_only=True)
class ParamReport:
    embeddings: int = attr.field()
    block_layers: typing.Mapping[str, int] = attr.field()
    """Parameters of one encoder block by role (layers and layer norms)."""

    num_blocks: int = attr.field()
    pooler: int = attr.field()
    classifier: int = attr.field()

    @property
    def per_block(self) -> int:
        return sum(self.block_layers.values())

    @property
    def blocks(self) -> int:
        return self.num_blocks * self.per_block

    @property
    def total(self) -> int:
        return self.embeddings + self.blocks + self.pooler + self.classifier

    @property
    def mparams(self) -> float:
        return self.total / 1e6


@attr.define(frozen=True, kw_only=True)
class LatencyReport:
    config: domain_config.ModelConfig = attr.field()
    seq_len: int = attr.field()
    warmup: int = attr.field()
    run_times: typing.Tuple[float, ...] = attr.field(converter=tuple)
    """Wall time of every timed run, in seconds."""

    stage_times: typing.Mapping[str, float] = attr.field()
    """Mean seconds per run spent in each stage."""

    name: str = attr.field(default="")

    @property
    def runs(self) -> int:
        return len(self.run_times)

    @property
    def mean(self) -> float:
        return statistics.fmean(self.run_times)

    @property
    def std(self) -> float:
        return statistics.pstdev(self.run_times)

    @property
    def mean_ms(self) -> float:
        return 1e3 * self.mean

    def share(self, stage: str) -> float:
        total = sum(self.stage_times.values())
        return 100.0 * self.stage_times.get(stage, 0.0) / total if total else 0.0


@attr.define(frozen=True, kw_only=True)
class BreakdownRow:
    stage: str = attr.field()
    macs: int = attr.field()
    flops: int = attr.field()
    flop_pct: float = attr.field()
    time_ms: typing.Optional[float] = attr.field(default=None)
    time_pct: typing.Optional[float] = attr.field(default=None)
    reference_flop_pct: float = attr.field(default=0.0)
    reference_time_pct: float = attr.field(default=0.0)


@attr.define(frozen=True, kw_only=True)
class EfficiencyRow:
    name: str = attr.field()
    mparams: float = attr.field()
    gflops: float = attr.field()
    speedup: float = attr.field()
    """FLOP speedup relative to the first row."""

    reference: typing.Optional[typing.Mapping[str, float]] = attr.field(default=None)


def per_layer_macs(config: domain_config.ModelConfig, seq_len: int) -> typing.Dict[str, int]:
    r"""MACs of one encoder block by layer role.

    Keys are `q_proj`, `k_proj`, `v_proj`, `ffn1`, `ffn2`, `ffn3` and
    `attention` (the Q K^T and A V matmuls across all heads).
    """
    _check_seq_len(config, seq_len)
    macs = {
        role: layer_macs(seq_len, *config.layer_channels(role), groups=config.groups_for(role))
        for role in domain_config.LAYER_ROLES
    }
    macs["attention"] = 2 * seq_len * seq_len * config.channels
    return macs


def count_flops(config: domain_config.ModelConfig, seq_len: int) -> FlopReport:
    r"""Counts MACs per stage for one sequence of length `seq_len`.

    Raises
    ------
    ConfigurationError
        If `seq_len` is outside [1, max_positions].
    """
    block = per_layer_macs(config, seq_len)
    c = config.channels
    # The pooler and classifier only see position 0.
    classifier = layer_macs(1, c, c) + layer_macs(1, c, config.num_classes)

    return FlopReport(
        config=config,
        seq_len=seq_len,
        macs={
            "embedding": 0,
            "qkv": config.num_blocks * (block["q_proj"] + block["k_proj"] + block["v_proj"]),
            "attention": config.num_blocks * block["attention"],
            "ffn": config.num_blocks * (block["ffn1"] + block["ffn2"] + block["ffn3"]),
            "classifier": classifier,
        },
    )


def count_params(config: domain_config.ModelConfig) -> ParamReport:
    """Closed-form parameter counts, biases and layer-norm terms included."""
    c = config.channels
    block_layers: typing.Dict[str, int] = {}
    for role in domain_config.LAYER_ROLES:
        c_in, c_out = config.layer_channels(role)
        block_layers[role] = c_out * (c_in // config.groups_for(role)) + c_out

    block_layers["ln_attn"] = 2 * c
    block_layers["ln_out"] = 2 * c

    return ParamReport(
        embeddings=(config.vocab_size + config.max_positions + domain_config.SEGMENT_VOCAB) * c
        + 2 * c,
        block_layers=block_layers,
        num_blocks=config.num_blocks,
        pooler=c * c + c,
        classifier=config.num_classes * c + config.num_classes,
    )


def benchmark_latency(
    model: domain_model.ModelWeights,
    config: domain_config.ModelConfig,
    *,
    seq_len: int = 128,
    runs: int = 40,
    warmup: int = 5,
    seed: int = 0,
    name: str = "",
) -> LatencyReport:
    r"""Times the inference forward pass at batch size 1.

    Inputs are fixed random token ids drawn from `seed`. Warmup runs are
    discarded; the timed runs execute sequentially on the calling
    thread with BLAS accumulation enabled.

    Parameters
    ----------
    model : ModelWeights
        Model to time.
    config : ModelConfig
        Config the model was built from.
    seq_len : int, optional
        Sequence length.
    runs : int, optional
        Number of timed runs.
    warmup : int, optional
        Number of untimed runs before timing starts.
    seed : int, optional
        Seed of the token ids.
    name : str, optional
        Label carried into the report.

    Raises
    ------
    ConfigurationError
        If `runs < 1`, `warmup < 0` or `seq_len` is out of range.
    """
    _check_seq_len(config, seq_len)
    if runs < 1:
        raise domain_exception.ConfigurationError("must be at least 1", field="runs")

    if warmup < 0:
        raise domain_exception.ConfigurationError("must not be negative", field="warmup")

    rng = np.random.default_rng(seed)
    token_ids = rng.integers(0, config.vocab_size, size=seq_len).tolist()
    segment_ids = [0] * seq_len

    recorder = util.StageRecorder()
    run_times: typing.List[float] = []
    stage_totals = dict.fromkeys(STAGES, 0.0)

    with tensor.fast_accumulation():
        for index in range(warmup + runs):
            recorder.reset()
            _, executed_in = util.timeit_func(
                domain_model.forward, model, token_ids, segment_ids, recorder=recorder
            )
            if index < warmup:
                continue

            run_times.append(executed_in)
            for stage, seconds in recorder.totals.items():
                stage_totals[stage] += seconds

    _LOGGER.info(
        "Benchmarked %s: %s run(s) at seq_len=%s, mean %.3f ms.",
        name or "model",
        runs,
        seq_len,
        1e3 * statistics.fmean(run_times),
    )
    return LatencyReport(
        config=config,
        seq_len=seq_len,
        warmup=warmup,
        run_times=run_times,
        stage_times={stage: total / runs for stage, total in stage_totals.items()},
        name=name,
    )


def stage_breakdown(
    flops: FlopReport,
    latency: typing.Optional[LatencyReport] = None,
) -> typing.List[BreakdownRow]:
    r"""Five-row stage table with FLOP and, optionally, time shares.

    Raises
    ------
    ConfigurationError
        If the two reports describe different configs or sequence lengths.
    """
    if latency is not None and (
        latency.config != flops.config or latency.seq_len != flops.seq_len
    ):
        raise domain_exception.ConfigurationError(
            "FLOP and latency reports describe different models", field="latency"
        )

    rows = [
        BreakdownRow(
            stage=stage,
            macs=flops.macs[stage],
            flops=flops.flops(stage),
            flop_pct=flops.share(stage),
            time_ms=None if latency is None else 1e3 * latency.stage_times.get(stage, 0.0),
            time_pct=None if latency is None else latency.share(stage),
            reference_flop_pct=REFERENCE_FLOP_SHARES[stage],
            reference_time_pct=REFERENCE_LATENCY_SHARES[stage],
        )
        for stage in STAGES
    ]

    total_share = sum(row.flop_pct for row in rows)
    if flops.total_macs and abs(total_share - 100.0) > _SHARE_TOLERANCE:
        _LOGGER.warning("Stage shares sum to %.4f%% instead of 100%%.", total_share)

    return rows


def efficiency_table(
    configs: typing.Mapping[str, domain_config.ModelConfig],
    seq_len: int = 128,
) -> typing.List[EfficiencyRow]:
    """Model size, GFLOPs and FLOP speedup against the first entry."""
    rows: typing.List[EfficiencyRow] = []
    baseline: typing.Optional[float] = None
    for name, config in configs.items():
        gflops = count_flops(config, seq_len).gflops
        if baseline is None:
            baseline = gflops

        rows.append(
            EfficiencyRow(
                name=name,
                mparams=count_params(config).mparams,
                gflops=gflops,
                speedup=baseline / gflops,
                reference=REFERENCE_EFFICIENCY.get(name),
            )
        )

    return rows
