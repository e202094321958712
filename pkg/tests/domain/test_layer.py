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

import typing

import numpy as np
import pytest

from gconvbert.domain import layer as domain_layer
from gconvbert.domain import model_exception as domain_exception


def _layer(
    rng: np.random.Generator,
    c_in: int,
    c_out: int,
    *,
    groups: int = 1,
    kernel_size: int = 1,
) -> domain_layer.LayerWeights:
    return domain_layer.LayerWeights(
        kernel=rng.normal(size=(c_out, c_in // groups, kernel_size)),
        bias=rng.normal(size=c_out),
        groups=groups,
    )


def _tables(rng: np.random.Generator) -> domain_layer.EmbeddingTables:
    return domain_layer.EmbeddingTables(
        token_table=rng.normal(size=(10, 4)),
        position_table=rng.normal(size=(6, 4)),
        segment_table=rng.normal(size=(2, 4)),
        norm=domain_layer.LayerNormParams(gamma=np.ones(4), beta=np.zeros(4)),
    )


class TestLayerWeights:
    def test_channel_properties(self, rng: np.random.Generator) -> None:
        w = _layer(rng, 8, 12, groups=4, kernel_size=3)

        assert w.in_channels == 8
        assert w.out_channels == 12
        assert w.kernel_size == 3
        assert w.kernel_parameter_count() == 12 * 2 * 3
        assert w.parameter_count() == 12 * 2 * 3 + 12

    def test_weights_are_immutable(self, rng: np.random.Generator) -> None:
        w = _layer(rng, 4, 4)

        with pytest.raises(ValueError):
            w.kernel[0, 0, 0] = 1.0

    @pytest.mark.parametrize(
        "kernel_shape, bias_shape, groups, error",
        [
            ((4, 4), (4,), 1, domain_exception.DimensionError),
            ((4, 4, 1), (3,), 1, domain_exception.DimensionError),
            ((4, 2, 1), (4,), 3, domain_exception.ConfigurationError),
            ((4, 4, 2), (4,), 1, domain_exception.ConfigurationError),
            ((4, 4, 1), (4,), 0, domain_exception.ConfigurationError),
        ],
    )
    def test_validation(
        self,
        kernel_shape: typing.Tuple[int, ...],
        bias_shape: typing.Tuple[int, ...],
        groups: int,
        error: typing.Type[Exception],
    ) -> None:
        with pytest.raises(error):
            domain_layer.LayerWeights(
                kernel=np.ones(kernel_shape), bias=np.zeros(bias_shape), groups=groups
            )


@pytest.mark.parametrize(
    "channels, groups, expected",
    [
        (8, 1, [slice(0, 8)]),
        (8, 2, [slice(0, 4), slice(4, 8)]),
        (6, 3, [slice(0, 2), slice(2, 4), slice(4, 6)]),
    ],
)
def test_group_slices(channels: int, groups: int, expected: typing.List[slice]) -> None:
    assert domain_layer.group_slices(channels, groups) == expected


def test_unfold_positions_pads_with_zeros() -> None:
    f = np.array([[1.0, 10.0], [2.0, 20.0], [3.0, 30.0]])
    columns = domain_layer.unfold_positions(f, 3)

    # Column i * K + k holds channel i at offset k - 1.
    assert columns.tolist() == [
        [0.0, 1.0, 2.0, 0.0, 10.0, 20.0],
        [1.0, 2.0, 3.0, 10.0, 20.0, 30.0],
        [2.0, 3.0, 0.0, 20.0, 30.0, 0.0],
    ]


def test_positionwise_fc_formula(rng: np.random.Generator) -> None:
    f = rng.normal(size=(5, 3))
    w = _layer(rng, 3, 4)

    expected = f @ w.kernel[:, :, 0].T + w.bias
    np.testing.assert_allclose(domain_layer.positionwise_fc(f, w), expected, atol=1e-12)


def test_positionwise_fc_rejects_grouped_layers(rng: np.random.Generator) -> None:
    with pytest.raises(domain_exception.ConfigurationError):
        domain_layer.positionwise_fc(rng.normal(size=(2, 4)), _layer(rng, 4, 4, groups=2))


def test_positionwise_fc_equals_kernel_one_conv_bitwise(rng: np.random.Generator) -> None:
    for _ in range(20):
        positions, c_in, c_out = (int(v) for v in rng.integers(1, 17, size=3))
        f = rng.normal(size=(positions, c_in))
        w = _layer(rng, c_in, c_out)

        assert np.array_equal(domain_layer.positionwise_fc(f, w), domain_layer.conv1d(f, w))


def test_conv1d_kernel_three_by_hand() -> None:
    f = np.array([[1.0], [2.0], [3.0]])
    w = domain_layer.LayerWeights(
        kernel=np.array([[[1.0, 10.0, 100.0]]]),
        bias=np.array([0.5]),
    )

    out = domain_layer.conv1d(f, w)
    assert out[:, 0].tolist() == [
        0.0 + 10.0 + 200.0 + 0.5,
        1.0 + 20.0 + 300.0 + 0.5,
        2.0 + 30.0 + 0.0 + 0.5,
    ]


@pytest.mark.parametrize("kernel_size", [1, 3, 5])
def test_grouped_with_one_group_equals_conv1d_bitwise(
    rng: np.random.Generator, kernel_size: int
) -> None:
    f = rng.normal(size=(9, 6))
    w = _layer(rng, 6, 10, kernel_size=kernel_size)

    assert np.array_equal(domain_layer.grouped_conv1d(f, w), domain_layer.conv1d(f, w))


@pytest.mark.parametrize("groups, kernel_size", [(2, 1), (4, 1), (2, 3), (4, 3)])
def test_grouped_conv_matches_block_diagonal(
    rng: np.random.Generator, groups: int, kernel_size: int
) -> None:
    f = rng.normal(size=(7, 8))
    w = _layer(rng, 8, 12, groups=groups, kernel_size=kernel_size)
    dense = domain_layer.block_diagonal(w)

    assert dense.groups == 1
    assert dense.kernel.shape == (12, 8, kernel_size)
    np.testing.assert_allclose(
        domain_layer.grouped_conv1d(f, w), domain_layer.conv1d(f, dense), atol=1e-10
    )


def test_grouped_conv_blocks_do_not_mix(rng: np.random.Generator) -> None:
    w = _layer(rng, 8, 8, groups=2)
    f = rng.normal(size=(3, 8))
    changed = f.copy()
    changed[:, 4:] += 1.0

    before = domain_layer.grouped_conv1d(f, w)
    after = domain_layer.grouped_conv1d(changed, w)
    assert np.array_equal(before[:, :4], after[:, :4])
    assert not np.array_equal(before[:, 4:], after[:, 4:])


def test_grouped_conv_rejects_channel_mismatch(rng: np.random.Generator) -> None:
    with pytest.raises(domain_exception.DimensionError):
        domain_layer.grouped_conv1d(rng.normal(size=(3, 5)), _layer(rng, 4, 4))


class TestEmbedding:
    def test_sums_three_rows(self, rng: np.random.Generator) -> None:
        tables = _tables(rng)
        out = domain_layer.embedding_sum([3, 7], [0, 1], tables)

        np.testing.assert_allclose(
            out[1],
            tables.token_table[7] + tables.position_table[1] + tables.segment_table[1],
        )

    def test_embed_normalizes(self, rng: np.random.Generator) -> None:
        out = domain_layer.embed([1, 2, 3], [0, 0, 1], _tables(rng))

        np.testing.assert_allclose(out.mean(axis=1), np.zeros(3), atol=1e-12)

    @pytest.mark.parametrize(
        "token_ids, segment_ids, kind, position",
        [
            ([1, 10, 2], [0, 0, 0], "token id", 1),
            ([1, 2, -1], [0, 0, 0], "token id", 2),
            ([1, 2, 3], [0, 2, 0], "segment id", 1),
        ],
    )
    def test_out_of_range_ids(
        self,
        rng: np.random.Generator,
        token_ids: typing.List[int],
        segment_ids: typing.List[int],
        kind: str,
        position: int,
    ) -> None:
        with pytest.raises(domain_exception.EmbeddingIndexError) as exc_info:
            domain_layer.embedding_sum(token_ids, segment_ids, _tables(rng))

        assert exc_info.value.kind == kind
        assert exc_info.value.position == position

    def test_sequence_longer_than_position_table(self, rng: np.random.Generator) -> None:
        with pytest.raises(domain_exception.EmbeddingIndexError) as exc_info:
            domain_layer.embedding_sum([1] * 7, [0] * 7, _tables(rng))

        assert exc_info.value.kind == "position"
        assert exc_info.value.position == 6

    @pytest.mark.parametrize(
        "token_ids, segment_ids",
        [
            ([], []),
            ([1, 2], [0]),
        ],
    )
    def test_rejects_empty_or_mismatched(
        self,
        rng: np.random.Generator,
        token_ids: typing.List[int],
        segment_ids: typing.List[int],
    ) -> None:
        with pytest.raises(domain_exception.DimensionError):
            domain_layer.embedding_sum(token_ids, segment_ids, _tables(rng))


@pytest.mark.parametrize("kernel_size", [1, 3, 5])
def test_fold_positions_is_adjoint_of_unfold(rng: np.random.Generator, kernel_size: int) -> None:
    x = rng.normal(size=(6, 3))
    y = rng.normal(size=(6, 3 * kernel_size))

    lhs = float(np.sum(domain_layer.unfold_positions(x, kernel_size) * y))
    rhs = float(np.sum(x * domain_layer.fold_positions(y, 3, kernel_size)))
    assert lhs == pytest.approx(rhs, rel=1e-12)
