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
    "DEFAULT_MAX_ALLOCATION",
    "BenchmarkSettings",
    "CheckpointSettings",
    "Settings",
)

import typing

import attr

DEFAULT_MAX_ALLOCATION: typing.Final[int] = 4 * 1024**3
"""Largest byte length a checkpoint may declare for a single field."""


def _non_negative(instance: typing.Any, attribute: attr.Attribute[int], value: int) -> None:
    if value < 0:
        raise ValueError(f"{attribute.name!r} must not be negative, got {value!r}.")


@attr.define(frozen=True, kw_only=True, repr=True)
class BenchmarkSettings:
    runs: int = attr.field(default=40, converter=int, validator=attr.validators.ge(1))
    warmup: int = attr.field(default=5, converter=int, validator=_non_negative)


@attr.define(frozen=True, kw_only=True, repr=True)
class CheckpointSettings:
    max_allocation: int = attr.field(
        default=DEFAULT_MAX_ALLOCATION,
        converter=int,
        validator=attr.validators.ge(1),
    )


@attr.define(frozen=True, kw_only=True, repr=True)
class Settings:
    benchmark: BenchmarkSettings = attr.field(factory=BenchmarkSettings, repr=True)
    checkpoint: CheckpointSettings = attr.field(factory=CheckpointSettings, repr=True)
    logging_dict: typing.Dict[str, typing.Any] = attr.field(factory=dict, repr=False)
    settings_file: typing.Optional[str] = attr.field(default=None, repr=True)
