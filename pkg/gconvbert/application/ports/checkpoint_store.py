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
    "Destination",
    "Source",
    "CheckpointStore",
)

import abc
import os
import typing

if typing.TYPE_CHECKING:
    from gconvbert.domain import model as domain_model
    from gconvbert.domain import model_config as domain_config

Destination = typing.Union[str, "os.PathLike[str]", typing.BinaryIO]
Source = typing.Union[str, "os.PathLike[str]", typing.BinaryIO, bytes]


class CheckpointStore(abc.ABC):
    __slots__ = ()

    @abc.abstractmethod
    def save(
        self,
        config: domain_config.ModelConfig,
        weights: domain_model.ModelWeights,
        destination: Destination,
    ) -> int:
        """Writes a checkpoint and returns the number of bytes written."""
        ...

    @abc.abstractmethod
    def load(
        self,
        source: Source,
    ) -> typing.Tuple[domain_config.ModelConfig, domain_model.ModelWeights]:
        ...
