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
    "read",
    "getcwd",
    "join",
    "find_any",
)

import os
import typing


def read(filename: str) -> str:
    with open(filename, encoding="utf-8") as file:
        return file.read()


def getcwd() -> str:
    return os.getcwd()


def join(*components: str) -> str:
    return os.path.join(*components)


def find_any(*filenames: str, base_dir: typing.Optional[str] = None) -> typing.List[str]:
    """Looks for the files in `base_dir` and then in each of its parents.

    Nearer directories come first; absolute names are returned as-is if they exist.
    """
    found_files: typing.List[str] = []
    for filename in filenames:
        if os.path.isabs(filename) and os.path.isfile(filename):
            found_files.append(filename)

    directory = os.path.abspath(base_dir if base_dir is not None else getcwd())
    while True:
        for filename in filenames:
            if os.path.isabs(filename):
                continue

            candidate = join(directory, filename)
            if os.path.isfile(candidate):
                found_files.append(candidate)

        parent = os.path.dirname(directory)
        if parent == directory:
            break

        directory = parent

    return found_files
