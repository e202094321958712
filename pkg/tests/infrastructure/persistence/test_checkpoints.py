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

import io
import math
import pathlib
import struct

import numpy as np
import pytest

from gconvbert.application import config
from gconvbert.domain import model as domain_model
from gconvbert.domain import model_config as domain_config
from gconvbert.domain import model_exception as domain_exception
from gconvbert.infrastructure import config_readers
from gconvbert.infrastructure.persistence import checkpoints


@pytest.fixture(scope="function")
def store() -> checkpoints.BinaryCheckpointStore:
    return checkpoints.BinaryCheckpointStore()


@pytest.fixture(scope="function")
def payload(
    store: checkpoints.BinaryCheckpointStore,
    grouped_tiny_config: domain_config.ModelConfig,
    grouped_tiny_model: domain_model.ModelWeights,
) -> bytes:
    buffer = io.BytesIO()
    store.save(grouped_tiny_config, grouped_tiny_model, buffer)
    return buffer.getvalue()


def _config_end(model_config: domain_config.ModelConfig) -> int:
    text = config_readers.render_model_config(model_config).encode("utf-8")
    return len(checkpoints.MAGIC) + 8 + len(text)


class TestRoundTrip:
    def test_weights_and_logits_are_bitwise_identical(
        self,
        store: checkpoints.BinaryCheckpointStore,
        grouped_tiny_config: domain_config.ModelConfig,
        grouped_tiny_model: domain_model.ModelWeights,
        payload: bytes,
    ) -> None:
        model_config, weights = store.load(payload)

        assert model_config == grouped_tiny_config
        original = grouped_tiny_model.named_parameters()
        for name, value in weights.named_parameters().items():
            assert np.array_equal(value, original[name]), name

        token_ids, segment_ids = [1, 8, 3, 40], [0, 0, 1, 1]
        assert np.array_equal(
            domain_model.forward(weights, token_ids, segment_ids),
            domain_model.forward(grouped_tiny_model, token_ids, segment_ids),
        )

    def test_file_round_trip(
        self,
        tmp_path: pathlib.Path,
        grouped_tiny_config: domain_config.ModelConfig,
        grouped_tiny_model: domain_model.ModelWeights,
        payload: bytes,
    ) -> None:
        path = tmp_path / "model.ckpt"
        byte_count = checkpoints.save(grouped_tiny_config, grouped_tiny_model, path)

        assert path.read_bytes() == payload
        assert byte_count == len(payload)
        model_config, _ = checkpoints.load(str(path))
        assert model_config == grouped_tiny_config

    def test_stream_source(self, store: checkpoints.BinaryCheckpointStore, payload: bytes) -> None:
        model_config, _ = store.load(io.BytesIO(payload))

        assert model_config.groups_qkv == 2

    def test_resave_is_byte_identical(
        self, store: checkpoints.BinaryCheckpointStore, payload: bytes
    ) -> None:
        model_config, weights = store.load(payload)
        buffer = io.BytesIO()
        store.save(model_config, weights, buffer)

        assert buffer.getvalue() == payload

    def test_size_is_predicted(
        self, grouped_tiny_config: domain_config.ModelConfig, payload: bytes
    ) -> None:
        assert checkpoints.checkpoint_size(grouped_tiny_config) == len(payload)

    def test_header(self, payload: bytes) -> None:
        assert payload[:8] == b"GCONVCK1"
        assert struct.unpack("<I", payload[8:12]) == (checkpoints.FORMAT_VERSION,)

    def test_tensors_are_stored_in_sorted_order(
        self, grouped_tiny_config: domain_config.ModelConfig, payload: bytes
    ) -> None:
        offset = _config_end(grouped_tiny_config)
        (count,) = struct.unpack_from("<I", payload, offset)
        offset += 4

        names = []
        for _ in range(count):
            (length,) = struct.unpack_from("<I", payload, offset)
            offset += 4
            names.append(payload[offset : offset + length].decode("utf-8"))
            offset += length
            (rank,) = struct.unpack_from("<I", payload, offset)
            offset += 4
            shape = struct.unpack_from(f"<{rank}Q", payload, offset)
            offset += 8 * rank + 8 * int(np.prod(shape))

        assert names == sorted(names)
        assert offset == len(payload)


class TestCorruption:
    @pytest.mark.parametrize("cut", [0, 5, 10, 40, -1, -100])
    def test_truncation(
        self, store: checkpoints.BinaryCheckpointStore, payload: bytes, cut: int
    ) -> None:
        with pytest.raises(domain_exception.CheckpointCorruptionError) as exc_info:
            store.load(payload[:cut])

        assert 0 <= exc_info.value.offset < len(payload[:cut]) + 1

    def test_truncation_reports_field_offset(
        self, store: checkpoints.BinaryCheckpointStore, payload: bytes
    ) -> None:
        with pytest.raises(domain_exception.CheckpointCorruptionError) as exc_info:
            store.load(payload[:10])

        # The version field starts right after the magic.
        assert exc_info.value.offset == 8

    @pytest.mark.parametrize("value", [math.nan, math.inf, -math.inf])
    def test_non_finite_tensor_value(
        self, store: checkpoints.BinaryCheckpointStore, payload: bytes, value: float
    ) -> None:
        # Name, then a u32 rank of 1 and one u64 extent precede the data.
        data_start = payload.index(b"pooler.bias") + len(b"pooler.bias") + 4 + 8
        bad = data_start + 8
        corrupted = payload[:bad] + struct.pack("<d", value) + payload[bad + 8 :]

        with pytest.raises(domain_exception.CheckpointCorruptionError) as exc_info:
            store.load(corrupted)

        assert exc_info.value.offset == bad
        assert "pooler.bias" in str(exc_info.value)

    def test_bad_magic(self, store: checkpoints.BinaryCheckpointStore, payload: bytes) -> None:
        with pytest.raises(domain_exception.CheckpointFormatError, match="magic"):
            store.load(b"XXXXXXXX" + payload[8:])

    def test_bad_version(self, store: checkpoints.BinaryCheckpointStore, payload: bytes) -> None:
        corrupted = payload[:8] + struct.pack("<I", 99) + payload[12:]

        with pytest.raises(domain_exception.CheckpointFormatError, match="version"):
            store.load(corrupted)

    def test_trailing_bytes(
        self, store: checkpoints.BinaryCheckpointStore, payload: bytes
    ) -> None:
        with pytest.raises(domain_exception.CheckpointFormatError, match="trailing"):
            store.load(payload + b"\x00")

    def test_oversized_declared_length(self, payload: bytes) -> None:
        small = checkpoints.BinaryCheckpointStore(max_allocation=64)

        with pytest.raises(domain_exception.CheckpointFormatError, match="allocation cap"):
            small.load(payload)

    def test_huge_config_length_fails_closed(
        self, store: checkpoints.BinaryCheckpointStore, payload: bytes
    ) -> None:
        corrupted = payload[:12] + struct.pack("<I", 0xFFFFFFFF) + payload[16:]

        with pytest.raises(domain_exception.CheckpointError):
            store.load(corrupted)

    def test_invalid_embedded_config(
        self,
        store: checkpoints.BinaryCheckpointStore,
        grouped_tiny_config: domain_config.ModelConfig,
        payload: bytes,
    ) -> None:
        text = config_readers.render_model_config(grouped_tiny_config).encode("utf-8")
        broken = text.replace(b"num_heads = 2", b"num_heads = 3")
        corrupted = payload.replace(text, broken)

        with pytest.raises(domain_exception.CheckpointFormatError, match="config"):
            store.load(corrupted)

    def test_renamed_tensor(
        self, store: checkpoints.BinaryCheckpointStore, payload: bytes
    ) -> None:
        corrupted = payload.replace(b"pooler.bias", b"pooler.biaz")

        with pytest.raises(domain_exception.CheckpointConsistencyError) as exc_info:
            store.load(corrupted)

        assert exc_info.value.tensor_name == "pooler.biaz"

    def test_config_tensor_mismatch(
        self,
        store: checkpoints.BinaryCheckpointStore,
        grouped_tiny_config: domain_config.ModelConfig,
        payload: bytes,
    ) -> None:
        # Same text length, different grouping: the stored kernels no longer fit.
        text = config_readers.render_model_config(grouped_tiny_config).encode("utf-8")
        corrupted = payload.replace(text, text.replace(b"groups_qkv = 2", b"groups_qkv = 4"))

        with pytest.raises(domain_exception.CheckpointConsistencyError):
            store.load(corrupted)


class TestStore:
    def test_from_settings(self) -> None:
        settings = config.Settings(checkpoint=config.CheckpointSettings(max_allocation=1234))

        assert checkpoints.BinaryCheckpointStore.from_settings(settings).max_allocation == 1234

    def test_rejects_non_positive_cap(self) -> None:
        with pytest.raises(ValueError):
            checkpoints.BinaryCheckpointStore(max_allocation=0)

    def test_save_rejects_mismatched_weights(
        self,
        store: checkpoints.BinaryCheckpointStore,
        tiny_model: domain_model.ModelWeights,
        grouped_tiny_config: domain_config.ModelConfig,
    ) -> None:
        with pytest.raises(domain_exception.CheckpointConsistencyError):
            store.save(grouped_tiny_config, tiny_model, io.BytesIO())

    def test_unwritable_destination(
        self,
        store: checkpoints.BinaryCheckpointStore,
        tmp_path: pathlib.Path,
        tiny_config: domain_config.ModelConfig,
        tiny_model: domain_model.ModelWeights,
    ) -> None:
        path = tmp_path / "missing" / "model.ckpt"

        with pytest.raises(domain_exception.CheckpointStorageError) as exc_info:
            store.save(tiny_config, tiny_model, path)

        assert exc_info.value.path == str(path)

    def test_missing_source(
        self, store: checkpoints.BinaryCheckpointStore, tmp_path: pathlib.Path
    ) -> None:
        with pytest.raises(domain_exception.CheckpointStorageError):
            store.load(tmp_path / "absent.ckpt")
