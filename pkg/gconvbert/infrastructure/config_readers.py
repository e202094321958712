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
r"""Readers for the model config text format and the tool settings file.

A model config is flat UTF-8 text, one `key = value` per line, where the
keys are exactly the `ModelConfig` field names. `#` starts a comment
and blank lines are ignored::

    # tiny encoder
    vocab_size = 64
    max_positions = 16
    channels = 8
    num_blocks = 2
    num_heads = 2
    ffn_inner = 32
    groups_qkv = 2

Missing optional keys take their field defaults. The same text, written by
`render_model_config`, is embedded in every checkpoint.
"""
from __future__ import annotations

__all__: typing.Sequence[str] = (
    "logging_config",
    "parse_model_config",
    "render_model_config",
    "read_model_config",
    "KeyValueModelConfigReader",
    "BaseSettingsReader",
    "YamlSettingsReader",
)

import abc
import copy
import typing

import attr
import yaml  # type: ignore[import]

from gconvbert import util
from gconvbert.application import config
from gconvbert.application import filesystem
from gconvbert.application.ports import config_reader as config_reader_port
from gconvbert.domain import model_config as domain_config
from gconvbert.domain import model_exception as domain_exception

logging_config: typing.Dict[str, typing.Any] = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "simpleFormatter": {
            "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
            "datefmt": "%Y-%m-%d %H:%M:%S",
        }
    },
    "handlers": {
        "consoleHandler": {
            "class": "logging.StreamHandler",
            "level": "DEBUG",
            "formatter": "simpleFormatter",
            "stream": "ext://sys.stderr",
        }
    },
    "loggers": {"root": {"level": "WARNING", "handlers": ["consoleHandler"], "propagate": 0}},
}


def _line_error(lineno: int, message: str, field: typing.Optional[str] = None) -> Exception:
    return domain_exception.ConfigurationError(f"line {lineno}: {message}", field=field)


def parse_model_config(text: str) -> domain_config.ModelConfig:
    r"""Parses the `key = value` text form of a model config.

    Raises
    ------
    ConfigurationError
        On a malformed line, an unknown or repeated key, a value the field
        cannot convert, a missing required key, or a config whose
        invariants do not hold.
    """
    fields = attr.fields_dict(domain_config.ModelConfig)
    values: typing.Dict[str, typing.Any] = {}

    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue

        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep or not key or not value:
            raise _line_error(lineno, f"expected 'key = value', got {raw_line.strip()!r}")

        if key not in fields:
            raise _line_error(lineno, f"unknown key {key!r}", field=key)

        if key in values:
            raise _line_error(lineno, f"duplicate key {key!r}", field=key)

        converter = typing.cast(typing.Callable[[str], typing.Any], fields[key].converter)
        try:
            values[key] = converter(value)
        except ValueError:
            raise _line_error(lineno, f"invalid value {value!r}", field=key) from None

    missing = [
        name
        for name, field in fields.items()
        if field.default is attr.NOTHING and name not in values
    ]
    if missing:
        raise domain_exception.ConfigurationError(
            f"missing required key(s): {', '.join(missing)}", field=missing[0]
        )

    return domain_config.ModelConfig(**values)


def render_model_config(model_config: domain_config.ModelConfig) -> str:
    """Writes every field in declaration order; floats use `repr` so they parse back exactly."""
    return "".join(
        f"{field.name} = {getattr(model_config, field.name)!r}\n"
        for field in attr.fields(domain_config.ModelConfig)
    )


def read_model_config(config_filepath: str) -> domain_config.ModelConfig:
    return parse_model_config(filesystem.read(config_filepath))


class KeyValueModelConfigReader(config_reader_port.ModelConfigReader):
    __slots__ = ()

    def read_model_config(self, config_filepath: str, /) -> domain_config.ModelConfig:
        return read_model_config(config_filepath)


class BaseSettingsReader(config_reader_port.SettingsReader):
    potential_settings_filenames: typing.List[str]

    def read_settings(
        self,
        settings_filepath: typing.Optional[str] = None,
    ) -> typing.Optional[config.Settings]:
        if settings_filepath:
            settings_filepaths = filesystem.find_any(settings_filepath)
            if not settings_filepaths:
                raise FileNotFoundError(f"Could not find {settings_filepath!r} settings file.")
        else:
            settings_filepaths = filesystem.find_any(*self.potential_settings_filenames)
            if not settings_filepaths:
                return None

        # The nearest file that yields settings wins.
        for settings_filepath in settings_filepaths:
            settings = self._read_settings(settings_filepath)
            if settings:
                return settings

        return None

    def default_settings(self) -> config.Settings:
        return config.Settings(logging_dict=copy.deepcopy(logging_config))

    @abc.abstractmethod
    def _read_settings(self, settings_filepath: str) -> typing.Optional[config.Settings]:
        ...


class YamlSettingsReader(BaseSettingsReader):
    potential_settings_filenames = ["gconvbert.yaml", "gconvbert.yml"]

    def _read_settings(self, settings_filepath: str) -> typing.Optional[config.Settings]:
        with open(settings_filepath, "r", encoding="utf-8") as settings_file:
            document = yaml.safe_load(settings_file)

        if not isinstance(document, dict) or not isinstance(document.get("gconvbert"), dict):
            raise domain_exception.ConfigurationError(
                f"{settings_filepath!r} has no top-level 'gconvbert' mapping",
                field="gconvbert",
            )

        settings_data = document["gconvbert"]
        return config.Settings(
            benchmark=config.BenchmarkSettings(
                **util.build_optional_kwargs(
                    ("runs", "warmup"), settings_data.get("benchmark") or {}
                )
            ),
            checkpoint=config.CheckpointSettings(
                **util.build_optional_kwargs(
                    ("max_allocation",), settings_data.get("checkpoint") or {}
                )
            ),
            logging_dict=settings_data.get("logging", copy.deepcopy(logging_config)),
            settings_file=settings_filepath,
        )
