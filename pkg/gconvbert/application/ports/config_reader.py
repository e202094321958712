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
    "SettingsReader",
    "ModelConfigReader",
)

import abc
import typing

if typing.TYPE_CHECKING:
    from gconvbert.application import config
    from gconvbert.domain import model_config as domain_config


class SettingsReader(abc.ABC):
    __slots__ = ()

    @abc.abstractmethod
    def read_settings(
        self,
        settings_filepath: typing.Optional[str] = None,
    ) -> typing.Optional[config.Settings]:
        ...

    @abc.abstractmethod
    def default_settings(self) -> config.Settings:
        """Settings used when no settings file is found."""
        ...


class ModelConfigReader(abc.ABC):
    __slots__ = ()

    @abc.abstractmethod
    def read_model_config(self, config_filepath: str, /) -> domain_config.ModelConfig:
        ...
