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
    "HEADING_MAP",
    "HEADING_LEVEL_ONE",
    "TOOL_HEADING_NAME",
    "print",
    "print_heading",
    "print_error",
    "print_success",
    "print_info",
    "print_warning",
    "print_document",
)

import enum
import json
import typing

# The tool is a CLI first, so output goes straight through click.
import click

HEADING_LEVEL_ONE = 1

HEADING_MAP = {
    HEADING_LEVEL_ONE: ("=", True),
}

TOOL_HEADING_NAME: typing.Final[str] = "gconvbert"


class AsciiOutput(str, enum.Enum):
    INFO = 128712
    DONE = 10003
    WARNING = 9888
    ERROR = 33

    def __str__(self) -> str:
        return chr(self.value)


def print(
    text: str = "",
    bold: bool = False,
    newline: bool = True,
    symbol: str = "",
    err: bool = False,
) -> None:
    if symbol:
        text = str(symbol) + " " + text

    click.secho(text, bold=bold, nl=newline, err=err)


def print_heading(level: int, text: str, indent: bool = True, err: bool = False) -> None:
    line_char, show_line_above = HEADING_MAP[level]
    heading_line = line_char * len(text)

    if show_line_above:
        print(heading_line, bold=True, err=err)

    print(text, bold=True, err=err)
    print(heading_line, bold=True, err=err)

    if indent:
        print(err=err)


def print_success(text: str, bold: bool = False) -> None:
    print(text, bold=bold, symbol=AsciiOutput.DONE)


def print_error(text: str, bold: bool = False) -> None:
    print(text, bold=bold, symbol=AsciiOutput.ERROR, err=True)


def print_warning(text: str, bold: bool = False, err: bool = False) -> None:
    print(text, bold=bold, symbol=AsciiOutput.WARNING, err=err)


def print_info(text: str, bold: bool = False) -> None:
    print(text, bold=bold, symbol=AsciiOutput.INFO)


def print_document(document: typing.Mapping[str, typing.Any]) -> None:
    """Writes one JSON document to stdout; the machine output format."""
    click.echo(json.dumps(document, indent=2, sort_keys=False))
