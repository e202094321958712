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
r"""Little-endian binary checkpoints.

Layout, every integer little-endian::

    magic            8 bytes  b"GCONVCK1"
    version          u32      1
    config length    u32      followed by the UTF-8 config text
    tensor count     u32
    per tensor, in sorted name order:
        name length  u32      followed by the UTF-8 name
        rank         u32
        extents      u64 each
        data         float64 each, row-major

Every declared length is checked against the bytes actually present and
against `max_allocation` before anything is sliced out of the buffer.
"""
from __future__ import annotations

__all__: typing.Sequence[str] = (
    "MAGIC",
    "FORMAT_VERSION",
    "BinaryCheckpointStore",
    "checkpoint_size",
    "save",
    "load",
)

import io
import logging
import math
import os
import struct
import threading
import typing

import numpy as np

from gconvbert.application import config
from gconvbert.application.ports import checkpoint_store as checkpoint_store_port
from gconvbert.domain import model as domain_model
from gconvbert.domain import model_config as domain_config
from gconvbert.domain import model_exception as domain_exception
from gconvbert.infrastructure import config_readers

if typing.TYPE_CHECKING:
    from gconvbert.domain.tensor import Tensor

_LOGGER: typing.Final[logging.Logger] = logging.getLogger("gconvbert.checkpoints")

MAGIC: typing.Final[bytes] = b"GCONVCK1"
FORMAT_VERSION: typing.Final[int] = 1

_U32: typing.Final[struct.Struct] = struct.Struct("<I")
_U64: typing.Final[struct.Struct] = struct.Struct("<Q")
_REAL: typing.Final[np.dtype[typing.Any]] = np.dtype("<f8")
_MAX_RANK: typing.Final[int] = 3


def checkpoint_size(
    model_config: domain_config.ModelConfig,
    shapes: typing.Optional[typing.Mapping[str, typing.Tuple[int, ...]]] = None,
) -> int:
    """Exact byte length of the checkpoint `save` writes for `model_config`."""
    if shapes is None:
        shapes = domain_model.expected_shapes(model_config)

    config_text = config_readers.render_model_config(model_config).encode("utf-8")
    size = len(MAGIC) + 3 * _U32.size + len(config_text)
    for name, shape in shapes.items():
        size += 2 * _U32.size + len(name.encode("utf-8")) + _U64.size * len(shape)
        size += _REAL.itemsize * math.prod(shape)

    return size


def _encode(
    model_config: domain_config.ModelConfig,
    weights: domain_model.ModelWeights,
) -> bytes:
    parameters = weights.named_parameters()
    expected = domain_model.expected_shapes(model_config)
    for name in parameters.keys() | expected.keys():
        if name not in expected:
            raise domain_exception.CheckpointConsistencyError(name, "not part of this config.")
        if name not in parameters:
            raise domain_exception.CheckpointConsistencyError(name, "is missing.")
        if parameters[name].shape != expected[name]:
            raise domain_exception.CheckpointConsistencyError(
                name, f"expected shape {expected[name]!r}, got {parameters[name].shape!r}."
            )

    config_text = config_readers.render_model_config(model_config).encode("utf-8")

    buffer = io.BytesIO()
    buffer.write(MAGIC)
    buffer.write(_U32.pack(FORMAT_VERSION))
    buffer.write(_U32.pack(len(config_text)))
    buffer.write(config_text)
    buffer.write(_U32.pack(len(parameters)))
    for name in sorted(parameters):
        value = parameters[name]
        encoded_name = name.encode("utf-8")
        buffer.write(_U32.pack(len(encoded_name)))
        buffer.write(encoded_name)
        buffer.write(_U32.pack(value.ndim))
        for extent in value.shape:
            buffer.write(_U64.pack(extent))
        buffer.write(np.ascontiguousarray(value, dtype=_REAL).tobytes())

    return buffer.getvalue()


class _Reader:
    __slots__: typing.Sequence[str] = ("_data", "_offset", "_max_allocation")

    def __init__(self, data: bytes, max_allocation: int) -> None:
        self._data = data
        self._offset = 0
        self._max_allocation = max_allocation

    @property
    def offset(self) -> int:
        return self._offset

    @property
    def remaining(self) -> int:
        return len(self._data) - self._offset

    def take(self, size: int, what: str) -> bytes:
        if size > self._max_allocation:
            raise domain_exception.CheckpointFormatError(
                f"Declared {what} length {size} at byte offset {self._offset} "
                f"exceeds the allocation cap of {self._max_allocation} byte(s)."
            )

        if size > self.remaining:
            raise domain_exception.CheckpointCorruptionError(
                self._offset, f"truncated, needed {size} byte(s), {self.remaining} available."
            )

        chunk = self._data[self._offset : self._offset + size]
        self._offset += size
        return chunk

    def u32(self, what: str) -> int:
        return int(_U32.unpack(self.take(_U32.size, what))[0])

    def u64(self, what: str) -> int:
        return int(_U64.unpack(self.take(_U64.size, what))[0])

    def text(self, size: int, what: str) -> str:
        start = self._offset
        try:
            return self.take(size, what).decode("utf-8")
        except UnicodeDecodeError:
            raise domain_exception.CheckpointFormatError(
                f"The {what} at byte offset {start} is not valid UTF-8."
            ) from None


def _decode(
    data: bytes,
    max_allocation: int,
) -> typing.Tuple[domain_config.ModelConfig, typing.Dict[str, Tensor]]:
    reader = _Reader(data, max_allocation)

    magic = reader.take(len(MAGIC), "magic")
    if magic != MAGIC:
        raise domain_exception.CheckpointFormatError(
            f"Bad magic {magic!r}, expected {MAGIC!r}; not a gconvbert checkpoint."
        )

    version = reader.u32("version")
    if version != FORMAT_VERSION:
        raise domain_exception.CheckpointFormatError(
            f"Unsupported checkpoint version {version}, expected {FORMAT_VERSION}."
        )

    config_text = reader.text(reader.u32("config length"), "config")
    try:
        model_config = config_readers.parse_model_config(config_text)
    except domain_exception.ConfigurationError as exc:
        raise domain_exception.CheckpointFormatError(f"Embedded config is invalid: {exc}") from exc

    parameters: typing.Dict[str, Tensor] = {}
    count = reader.u32("tensor count")
    for _ in range(count):
        name = reader.text(reader.u32("name length"), "tensor name")
        if name in parameters:
            raise domain_exception.CheckpointFormatError(f"Tensor {name!r} is stored twice.")

        rank_offset = reader.offset
        rank = reader.u32("rank")
        if not 1 <= rank <= _MAX_RANK:
            raise domain_exception.CheckpointFormatError(
                f"Tensor {name!r} declares rank {rank} at byte offset {rank_offset}."
            )

        shape = tuple(reader.u64("extent") for _ in range(rank))
        elements = math.prod(shape)
        data_offset = reader.offset
        raw = reader.take(elements * _REAL.itemsize, f"{name!r} data")
        values = np.frombuffer(raw, dtype=_REAL).astype(np.float64)
        finite = np.isfinite(values)
        if not finite.all():
            index = int(np.argmin(finite))
            raise domain_exception.CheckpointCorruptionError(
                data_offset + index * _REAL.itemsize,
                f"tensor {name!r} holds the non-finite value {float(values[index])!r}.",
            )

        parameters[name] = values.reshape(shape)

    if reader.remaining:
        raise domain_exception.CheckpointFormatError(
            f"{reader.remaining} unexpected trailing byte(s) at offset {reader.offset}."
        )

    return model_config, parameters


class BinaryCheckpointStore(checkpoint_store_port.CheckpointStore):
    __slots__: typing.Sequence[str] = (
        "_max_allocation",
        "_lock",
    )

    def __init__(self, max_allocation: int = config.DEFAULT_MAX_ALLOCATION) -> None:
        if max_allocation < 1:
            raise ValueError(f"'max_allocation' must be positive, got {max_allocation!r}.")

        self._max_allocation = max_allocation
        self._lock = threading.Lock()

    @classmethod
    def from_settings(cls, settings: config.Settings, /) -> BinaryCheckpointStore:
        return cls(max_allocation=settings.checkpoint.max_allocation)

    @property
    def max_allocation(self) -> int:
        return self._max_allocation

    def save(
        self,
        model_config: domain_config.ModelConfig,
        weights: domain_model.ModelWeights,
        destination: checkpoint_store_port.Destination,
    ) -> int:
        r"""Writes `weights` and `model_config` to a path or binary stream.

        Raises
        ------
        CheckpointConsistencyError
            If a tensor does not have the shape the config requires.
        CheckpointStorageError
            If the destination cannot be written.
        """
        payload = _encode(model_config, weights)

        with self._lock:
            if isinstance(destination, (str, os.PathLike)):
                path = os.fspath(destination)
                try:
                    with open(path, "wb") as file:
                        file.write(payload)
                except OSError as exc:
                    raise domain_exception.CheckpointStorageError(path, str(exc)) from exc
            else:
                path = repr(destination)
                try:
                    destination.write(payload)
                except OSError as exc:
                    raise domain_exception.CheckpointStorageError(path, str(exc)) from exc

        _LOGGER.info("Saved checkpoint %s (%s bytes).", path, len(payload))
        return len(payload)

    def load(
        self,
        source: checkpoint_store_port.Source,
    ) -> typing.Tuple[domain_config.ModelConfig, domain_model.ModelWeights]:
        r"""Reads a checkpoint back from a path, binary stream or bytes.

        Nothing is returned unless the whole checkpoint is valid.

        Raises
        ------
        CheckpointFormatError
            On bad magic or version, an invalid embedded config, or a
            declared length above `max_allocation`.
        CheckpointCorruptionError
            If the data ends before a declared field does, or a tensor holds
            NaN or infinity.
        CheckpointConsistencyError
            If a tensor does not match the embedded config.
        CheckpointStorageError
            If the source cannot be read.
        """
        with self._lock:
            if isinstance(source, bytes):
                path, data = "<bytes>", source
            elif isinstance(source, (str, os.PathLike)):
                path = os.fspath(source)
                try:
                    with open(path, "rb") as file:
                        data = file.read()
                except OSError as exc:
                    raise domain_exception.CheckpointStorageError(path, str(exc)) from exc
            else:
                path = repr(source)
                try:
                    data = source.read()
                except OSError as exc:
                    raise domain_exception.CheckpointStorageError(path, str(exc)) from exc

        model_config, parameters = _decode(data, self._max_allocation)
        weights = domain_model.ModelWeights.from_named(model_config, parameters)

        _LOGGER.info("Loaded checkpoint %s (%s bytes).", path, len(data))
        return model_config, weights


_default_store: typing.Final[BinaryCheckpointStore] = BinaryCheckpointStore()


def save(
    model_config: domain_config.ModelConfig,
    weights: domain_model.ModelWeights,
    destination: checkpoint_store_port.Destination,
) -> int:
    return _default_store.save(model_config, weights, destination)


def load(
    source: checkpoint_store_port.Source,
) -> typing.Tuple[domain_config.ModelConfig, domain_model.ModelWeights]:
    return _default_store.load(source)
