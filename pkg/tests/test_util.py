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

import time
import typing

import pytest

from gconvbert.util import StageRecorder
from gconvbert.util import SystemTimer
from gconvbert.util import build_optional_kwargs
from gconvbert.util import derive_seed
from gconvbert.util import import_obj
from gconvbert.util import timeit_func


class FakeUtilClass:
    pass


def test_derive_seed_is_stable() -> None:
    assert derive_seed(0, "teacher") == derive_seed(0, "teacher")
    assert derive_seed(0, "teacher") != derive_seed(0, "student")
    assert derive_seed(0, "teacher") != derive_seed(1, "teacher")


def test_derive_seed_range() -> None:
    seed = derive_seed(12345, "toy-task")

    assert isinstance(seed, int)
    assert 0 <= seed < 2**32


@pytest.mark.parametrize(
    "keys, mapping, expected",
    [
        (["runs", "warmup"], {"runs": 10, "warmup": None}, {"runs": 10}),
        (["runs"], {"warmup": 3}, {}),
        (["runs", "warmup"], {"runs": 0, "warmup": 5}, {"runs": 0, "warmup": 5}),
        ([], {"runs": 1}, {}),
    ],
)
def test_build_optional_kwargs(
    keys: typing.List[str],
    mapping: typing.Dict[str, typing.Any],
    expected: typing.Dict[str, typing.Any],
) -> None:
    assert build_optional_kwargs(keys, mapping) == expected


def test_import_obj() -> None:
    assert import_obj("tests.test_util.FakeUtilClass", cast=type) is FakeUtilClass


def test_import_obj_missing_attribute() -> None:
    with pytest.raises(AttributeError):
        import_obj("tests.test_util.MissingClass", cast=type)


def test_timeit_func() -> None:
    result, elapsed = timeit_func(sum, [1, 2, 3])

    assert result == 6
    assert elapsed >= 0.0


def test_system_timer() -> None:
    with SystemTimer() as timer:
        time.sleep(0.01)

    assert timer.executed_in >= 0.005
    assert timer.start > 0.0


def test_stage_recorder_accumulates_per_stage() -> None:
    recorder = StageRecorder()
    for _ in range(2):
        with recorder.stage("qkv"):
            time.sleep(0.005)

    with recorder.stage("ffn"):
        pass

    totals = recorder.totals
    assert set(totals) == {"qkv", "ffn"}
    assert totals["qkv"] >= 0.005
    assert totals["ffn"] >= 0.0

    recorder.reset()
    assert recorder.totals == {}


def test_stage_recorder_records_on_error() -> None:
    recorder = StageRecorder()
    with pytest.raises(RuntimeError):
        with recorder.stage("attention"):
            raise RuntimeError("boom")

    assert "attention" in recorder.totals
