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
r"""Utilities.

The module contains utilities that can be used in a project.

!!! info
    This module is independent of all other modules and can only use
    built-in or third-party libraries.
"""

from __future__ import annotations

__all__: typing.Sequence[str] = (
    "derive_seed",
    "build_optional_kwargs",
    "import_obj",
    "timeit_func",
    "SystemTimer",
    "StageRecorder",
)

import collections
import importlib
import time
import types
import typing
import zlib

import numpy as np
import typing_extensions

try:
    _P = typing.ParamSpec("_P")
except AttributeError:
    _P = typing_extensions.ParamSpec("_P")

_T = typing.TypeVar("_T")
_KT = typing.TypeVar("_KT")


def derive_seed(seed: int, label: str, /) -> int:
    r"""Derives an independent child seed.

    The same (seed, label) pair always maps to the same value, and
    different labels give statistically independent streams.

    Parameters
    ----------
    seed : int
        Parent seed, usually taken from the command line.
    label : str
        Purpose of the child stream, e.g. ``"teacher"``.

    Returns
    -------
    int
        A non-negative 32-bit seed.
    """
    sequence = np.random.SeedSequence([seed, zlib.crc32(label.encode("utf-8"))])
    return int(sequence.generate_state(1)[0])


def build_optional_kwargs(
    keys: typing.Iterable[_KT],
    mapping: typing.Mapping[typing.Any, typing.Any],
) -> typing.Dict[_KT, typing.Any]:
    r"""Picks the keys whose value is present and not None.

    Example
    -------
    ```py
    >>> build_optional_kwargs(["runs", "warmup"], {"runs": 10, "warmup": None})
    {'runs': 10}
    ```
    """
    return {key: mapping[key] for key in keys if mapping.get(key) is not None}


def import_obj(obj_path: str, /, cast: _T) -> _T:
    r"""Imports an object given its dotted path, e.g. `package.module.Class`.

    `cast` is the expected type of the object and only informs type checkers.

    See Also
    --------
    importlib.import_module
    """
    module_name, obj_name = obj_path.rsplit(".", maxsplit=1)
    module = importlib.import_module(module_name)
    obj: _T = getattr(module, obj_name)
    return obj


def timeit_func(
    func: typing.Callable[_P, _T],
    *args: _P.args,
    **kwargs: _P.kwargs,
) -> typing.Tuple[_T, float]:
    r"""Measures the execution time of a function.

    Returns
    -------
    typing.Tuple[_T, float]
        The function result and the elapsed wall time in seconds.

    See Also
    --------
    SystemTimer
    """
    with SystemTimer() as timer:
        result = func(*args, **kwargs)

    return result, timer.executed_in


class SystemTimer:
    """Monotonic wall-clock timer for code benchmarks.

    The timer is a context manager; `executed_in` is available after the
    block exits.
    """

    __slots__: typing.Sequence[str] = (
        "_start",
        "_executed_in",
    )

    def __init__(self) -> None:
        self._start = 0.0
        self._executed_in = 0.0

    @property
    def start(self) -> float:
        return self._start

    @property
    def executed_in(self) -> float:
        """Seconds between `__enter__` and `__exit__`."""
        return self._executed_in

    def __enter__(self) -> SystemTimer:
        self._start = time.perf_counter()
        return self

    def __exit__(
        self,
        exc_type: typing.Optional[typing.Type[BaseException]],
        exc_val: typing.Optional[BaseException],
        exc_tb: typing.Optional[types.TracebackType],
    ) -> None:
        self._executed_in = time.perf_counter() - self._start


class StageRecorder:
    """Accumulates wall time per named stage across `stage(...)` scopes."""

    __slots__: typing.Sequence[str] = ("_totals",)

    def __init__(self) -> None:
        self._totals: typing.DefaultDict[str, float] = collections.defaultdict(float)

    @property
    def totals(self) -> typing.Mapping[str, float]:
        return dict(self._totals)

    def reset(self) -> None:
        self._totals.clear()

    def stage(self, name: str, /) -> typing.ContextManager[SystemTimer]:
        return _StageScope(self._totals, name)


class _StageScope(SystemTimer):
    __slots__: typing.Sequence[str] = ("_totals", "_name")

    def __init__(self, totals: typing.DefaultDict[str, float], name: str) -> None:
        super().__init__()
        self._totals = totals
        self._name = name

    def __exit__(
        self,
        exc_type: typing.Optional[typing.Type[BaseException]],
        exc_val: typing.Optional[BaseException],
        exc_tb: typing.Optional[types.TracebackType],
    ) -> None:
        super().__exit__(exc_type, exc_val, exc_tb)
        self._totals[self._name] += self.executed_in
