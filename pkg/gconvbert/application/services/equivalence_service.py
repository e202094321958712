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
r"""Randomized equivalence suites for the layer implementations.

Each suite draws its instances from a seeded generator and compares two
ways of computing the same layer:

* `pfc-vs-conv1d`: position-wise FC against a kernel-size-1 conv1d, bitwise.
* `grouped-g1-vs-conv1d`: grouped conv with one group against conv1d, bitwise.
* `grouped-vs-split-oracle`: grouped conv (G in {2, 4}) against running
  conv1d per channel block and concatenating, within 1e-12.
* `grouped-vs-block-diagonal`: grouped conv against the dense conv with
  the block-diagonal kernel, within 1e-10.
* `cost-scaling`: MACs and kernel weights of a grouped layer are exactly
  1/G of the dense layer's, for G in {2, 3, 4, 6}.
"""
from __future__ import annotations

__all__: typing.Sequence[str] = (
    "SuiteResult",
    "EquivalenceReport",
    "pfc_vs_conv1d",
    "grouped_g1_vs_conv1d",
    "grouped_vs_split_oracle",
    "grouped_vs_block_diagonal",
    "cost_scaling",
    "run_suites",
)

import logging
import typing

import attr
import numpy as np

from gconvbert.application.services import profiling_service
from gconvbert.domain import layer as domain_layer

if typing.TYPE_CHECKING:
    from gconvbert.domain.tensor import Tensor

_LOGGER: typing.Final[logging.Logger] = logging.getLogger("gconvbert.equivalence_service")

_SPLIT_TOLERANCE: typing.Final[float] = 1e-12
_DENSE_TOLERANCE: typing.Final[float] = 1e-10


@attr.define(frozen=True, kw_only=True)
class SuiteResult:
    name: str = attr.field()
    instances: int = attr.field()
    max_abs_diff: float = attr.field()
    tolerance: float = attr.field()
    """0.0 for suites that require bitwise or exact integer equality."""

    failures: int = attr.field(default=0)

    @property
    def passed(self) -> bool:
        return self.failures == 0


@attr.define(frozen=True, kw_only=True)
class EquivalenceReport:
    seed: int = attr.field()
    suites: typing.Tuple[SuiteResult, ...] = attr.field(converter=tuple)

    @property
    def passed(self) -> bool:
        return all(suite.passed for suite in self.suites)


def _random_layer(
    rng: np.random.Generator,
    in_channels: int,
    out_channels: int,
    *,
    groups: int = 1,
    kernel_size: int = 1,
) -> domain_layer.LayerWeights:
    return domain_layer.LayerWeights(
        kernel=rng.normal(size=(out_channels, in_channels // groups, kernel_size)),
        bias=rng.normal(size=out_channels),
        groups=groups,
    )


def _compare(
    name: str,
    pairs: typing.Iterable[typing.Tuple[Tensor, Tensor]],
    tolerance: float,
) -> SuiteResult:
    instances = failures = 0
    worst = 0.0
    for actual, expected in pairs:
        instances += 1
        if actual.shape != expected.shape:
            failures += 1
            continue

        diff = float(np.max(np.abs(actual - expected)))
        worst = max(worst, diff)
        if tolerance == 0.0:
            ok = np.array_equal(actual, expected)
        else:
            ok = diff <= tolerance

        failures += not ok

    if failures:
        _LOGGER.error("Suite %s failed on %s of %s instance(s).", name, failures, instances)

    return SuiteResult(
        name=name,
        instances=instances,
        max_abs_diff=worst,
        tolerance=tolerance,
        failures=failures,
    )


def pfc_vs_conv1d(rng: np.random.Generator, instances: int = 100) -> SuiteResult:
    def pairs() -> typing.Iterator[typing.Tuple[Tensor, Tensor]]:
        for _ in range(instances):
            positions, c_in, c_out = (int(v) for v in rng.integers(1, 17, size=3))
            f = rng.normal(size=(positions, c_in))
            w = _random_layer(rng, c_in, c_out)
            yield domain_layer.positionwise_fc(f, w), domain_layer.conv1d(f, w)

    return _compare("pfc-vs-conv1d", pairs(), 0.0)


def grouped_g1_vs_conv1d(rng: np.random.Generator, instances: int = 100) -> SuiteResult:
    def pairs() -> typing.Iterator[typing.Tuple[Tensor, Tensor]]:
        for _ in range(instances):
            positions, c_in, c_out = (int(v) for v in rng.integers(1, 17, size=3))
            kernel_size = int(rng.choice([1, 3, 5]))
            f = rng.normal(size=(positions, c_in))
            w = _random_layer(rng, c_in, c_out, kernel_size=kernel_size)
            yield domain_layer.grouped_conv1d(f, w), domain_layer.conv1d(f, w)

    return _compare("grouped-g1-vs-conv1d", pairs(), 0.0)


def _grouped_instance(
    rng: np.random.Generator,
    groups: int,
) -> typing.Tuple[Tensor, domain_layer.LayerWeights]:
    positions = int(rng.integers(1, 17))
    c_in = groups * int(rng.integers(1, 5))
    c_out = groups * int(rng.integers(1, 5))
    kernel_size = int(rng.choice([1, 3]))
    f = rng.normal(size=(positions, c_in))
    return f, _random_layer(rng, c_in, c_out, groups=groups, kernel_size=kernel_size)


def _split_oracle(f: Tensor, w: domain_layer.LayerWeights) -> Tensor:
    in_width = w.in_channels // w.groups
    out_width = w.out_channels // w.groups
    outputs = []
    for g in range(w.groups):
        sub_layer = domain_layer.LayerWeights(
            kernel=w.kernel[g * out_width : (g + 1) * out_width],
            bias=w.bias[g * out_width : (g + 1) * out_width],
        )
        outputs.append(domain_layer.conv1d(f[:, g * in_width : (g + 1) * in_width], sub_layer))

    return np.concatenate(outputs, axis=1)


def grouped_vs_split_oracle(rng: np.random.Generator, instances: int = 100) -> SuiteResult:
    def pairs() -> typing.Iterator[typing.Tuple[Tensor, Tensor]]:
        for index in range(instances):
            f, w = _grouped_instance(rng, (2, 4)[index % 2])
            yield domain_layer.grouped_conv1d(f, w), _split_oracle(f, w)

    return _compare("grouped-vs-split-oracle", pairs(), _SPLIT_TOLERANCE)


def grouped_vs_block_diagonal(rng: np.random.Generator, instances: int = 100) -> SuiteResult:
    def pairs() -> typing.Iterator[typing.Tuple[Tensor, Tensor]]:
        for index in range(instances):
            f, w = _grouped_instance(rng, (2, 4)[index % 2])
            dense = domain_layer.block_diagonal(w)
            yield domain_layer.grouped_conv1d(f, w), domain_layer.conv1d(f, dense)

    return _compare("grouped-vs-block-diagonal", pairs(), _DENSE_TOLERANCE)


def cost_scaling(rng: np.random.Generator, instances: int = 50) -> SuiteResult:
    r"""Checks that grouping divides kernel weights and MACs by exactly G.

    Each instance compares `G * cost(grouped)` with `cost(dense)` as
    integers, so the suite is exact.
    """

    def pairs() -> typing.Iterator[typing.Tuple[Tensor, Tensor]]:
        for index in range(instances):
            groups = (2, 3, 4, 6)[index % 4]
            positions = int(rng.integers(1, 129))
            c_in = groups * int(rng.integers(1, 33))
            c_out = groups * int(rng.integers(1, 33))
            kernel_size = int(rng.choice([1, 3]))

            grouped = _random_layer(rng, c_in, c_out, groups=groups, kernel_size=kernel_size)
            dense = domain_layer.block_diagonal(grouped)
            actual = [
                groups * grouped.kernel_parameter_count(),
                groups
                * profiling_service.layer_macs(
                    positions, c_in, c_out, groups=groups, kernel_size=kernel_size
                ),
            ]
            expected = [
                dense.kernel_parameter_count(),
                profiling_service.layer_macs(positions, c_in, c_out, kernel_size=kernel_size),
            ]
            yield np.asarray(actual, dtype=np.float64), np.asarray(expected, dtype=np.float64)

    return _compare("cost-scaling", pairs(), 0.0)


def run_suites(seed: int, *, instances: int = 100) -> EquivalenceReport:
    """Runs every suite, each from its own generator spawned from `seed`."""
    suites = (
        pfc_vs_conv1d,
        grouped_g1_vs_conv1d,
        grouped_vs_split_oracle,
        grouped_vs_block_diagonal,
    )
    generators = [
        np.random.default_rng(child)
        for child in np.random.SeedSequence(seed).spawn(len(suites) + 1)
    ]

    results = [suite(rng, instances) for suite, rng in zip(suites, generators)]
    results.append(cost_scaling(generators[-1], max(1, instances // 2)))

    for result in results:
        _LOGGER.info(
            "Suite %s: %s instance(s), max |diff| %.3e.",
            result.name,
            result.instances,
            result.max_abs_diff,
        )

    return EquivalenceReport(seed=seed, suites=results)
