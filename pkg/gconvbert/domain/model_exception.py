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
    "ModelError",
    "DimensionError",
    "ConfigurationError",
    "EmbeddingIndexError",
    "DistributionError",
    "NumericError",
    "CheckpointError",
    "CheckpointFormatError",
    "CheckpointCorruptionError",
    "CheckpointConsistencyError",
    "CheckpointStorageError",
)

import typing


class ModelError(Exception):
    __slots__: typing.Sequence[str] = ()

    pass


class DimensionError(ModelError, ValueError):
    __slots__: typing.Sequence[str] = ("shapes",)

    def __init__(self, operation: str, *shapes: typing.Tuple[int, ...]) -> None:
        self.shapes = shapes

        super().__init__(
            f"Shape mismatch in {operation!r}: " + " vs ".join(repr(s) for s in shapes) + "."
        )


class ConfigurationError(ModelError, ValueError):
    __slots__: typing.Sequence[str] = ("field",)

    def __init__(self, message: str, *, field: typing.Optional[str] = None) -> None:
        self.field = field

        if field is not None:
            message = f"{field}: {message}"

        super().__init__(message)


class EmbeddingIndexError(ModelError, IndexError):
    __slots__: typing.Sequence[str] = ("position", "kind", "value")

    def __init__(self, *, position: int, kind: str, value: int, limit: int) -> None:
        self.position = position
        self.kind = kind
        self.value = value

        super().__init__(
            f"{kind} {value!r} at position {position} is out of range [0, {limit})."
        )


class DistributionError(ModelError, ValueError):
    __slots__: typing.Sequence[str] = ()

    pass


class NumericError(ModelError, ArithmeticError):
    __slots__: typing.Sequence[str] = ("subject",)

    def __init__(self, subject: str, value: float) -> None:
        self.subject = subject

        super().__init__(f"Non-finite value {value!r} in {subject!r}.")


class CheckpointError(ModelError):
    __slots__: typing.Sequence[str] = ()

    pass


class CheckpointFormatError(CheckpointError):
    __slots__: typing.Sequence[str] = ()

    pass


class CheckpointCorruptionError(CheckpointError):
    __slots__: typing.Sequence[str] = ("offset",)

    def __init__(self, offset: int, detail: str) -> None:
        self.offset = offset

        super().__init__(f"Checkpoint is corrupt at byte offset {offset}: {detail}")


class CheckpointConsistencyError(CheckpointError):
    __slots__: typing.Sequence[str] = ("tensor_name",)

    def __init__(self, tensor_name: str, message: str) -> None:
        self.tensor_name = tensor_name

        super().__init__(f"Tensor {tensor_name!r}: {message}")


class CheckpointStorageError(CheckpointError):
    __slots__: typing.Sequence[str] = ("path",)

    def __init__(self, path: str, reason: str) -> None:
        self.path = path

        super().__init__(f"Cannot access checkpoint {path!r}: {reason}")
