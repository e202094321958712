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
r"""Declarative model configuration and the built-in presets.

Configs are immutable; derive variants with `attr.evolve`, which
re-runs every validator.
"""
from __future__ import annotations

__all__: typing.Sequence[str] = (
    "SEGMENT_VOCAB",
    "LAYER_ROLES",
    "ModelConfig",
    "PRESETS",
    "preset_config",
)

import typing

import attr

from gconvbert.domain import model_exception as domain_exception

SEGMENT_VOCAB: typing.Final[int] = 2
"""Rows of the segment embedding table (sentence A / sentence B)."""

LAYER_ROLES: typing.Final[typing.Sequence[str]] = (
    "q_proj",
    "k_proj",
    "v_proj",
    "ffn1",
    "ffn2",
    "ffn3",
)


def _positive(instance: ModelConfig, attribute: attr.Attribute[typing.Any], value: int) -> None:
    if value < 1:
        raise domain_exception.ConfigurationError(
            f"must be a positive integer, got {value!r}", field=attribute.name
        )


def _rate(instance: ModelConfig, attribute: attr.Attribute[typing.Any], value: float) -> None:
    if not 0.0 <= value < 1.0:
        raise domain_exception.ConfigurationError(
            f"must lie in [0, 1), got {value!r}", field=attribute.name
        )


def _strictly_positive(
    instance: ModelConfig, attribute: attr.Attribute[typing.Any], value: float
) -> None:
    if not value > 0.0:
        raise domain_exception.ConfigurationError(
            f"must be positive, got {value!r}", field=attribute.name
        )


@attr.define(frozen=True, kw_only=True)
class ModelConfig:
    vocab_size: int = attr.field(converter=int, validator=_positive)
    max_positions: int = attr.field(converter=int, validator=_positive)
    channels: int = attr.field(converter=int, validator=_positive)
    num_blocks: int = attr.field(converter=int, validator=_positive)
    num_heads: int = attr.field(converter=int, validator=_positive)
    ffn_inner: int = attr.field(converter=int, validator=_positive)
    groups_qkv: int = attr.field(default=1, converter=int, validator=_positive)
    groups_ffn1: int = attr.field(default=1, converter=int, validator=_positive)
    groups_ffn2: int = attr.field(default=1, converter=int, validator=_positive)
    groups_ffn3: int = attr.field(default=1, converter=int, validator=_positive)
    ln_eps: float = attr.field(default=1e-12, converter=float, validator=_strictly_positive)
    num_classes: int = attr.field(default=2, converter=int, validator=_positive)
    dropout_encoder: float = attr.field(default=0.0, converter=float, validator=_rate)
    dropout_final: float = attr.field(default=0.0, converter=float, validator=_rate)
    init_std: float = attr.field(default=0.02, converter=float, validator=_strictly_positive)

    def __attrs_post_init__(self) -> None:
        if self.channels % self.num_heads:
            raise domain_exception.ConfigurationError(
                f"{self.num_heads} does not divide channels={self.channels}",
                field="num_heads",
            )

        for field, groups in self.layer_groups().items():
            c_in, c_out = self.layer_channels(field)
            if c_in % groups or c_out % groups:
                raise domain_exception.ConfigurationError(
                    f"{groups} does not divide C_in={c_in} and C_out={c_out}",
                    field=field,
                )

    @property
    def head_dim(self) -> int:
        return self.channels // self.num_heads

    def layer_groups(self) -> typing.Dict[str, int]:
        return {
            "groups_qkv": self.groups_qkv,
            "groups_ffn1": self.groups_ffn1,
            "groups_ffn2": self.groups_ffn2,
            "groups_ffn3": self.groups_ffn3,
        }

    def layer_channels(self, role: str) -> typing.Tuple[int, int]:
        """(C_in, C_out) of a block layer, addressed by role or group field name."""
        role = role.removeprefix("groups_")
        if role in {"qkv", "q_proj", "k_proj", "v_proj", "ffn1"}:
            return self.channels, self.channels
        if role == "ffn2":
            return self.channels, self.ffn_inner
        if role == "ffn3":
            return self.ffn_inner, self.channels

        raise domain_exception.ConfigurationError(f"unknown layer role {role!r}", field="role")

    def groups_for(self, role: str) -> int:
        if role in {"q_proj", "k_proj", "v_proj"}:
            return self.groups_qkv

        return int(getattr(self, f"groups_{role}"))


def _bert_base(groups: typing.Optional[int]) -> ModelConfig:
    groups = 1 if groups is None else groups
    return ModelConfig(
        vocab_size=30522,
        max_positions=512,
        channels=768,
        num_blocks=12,
        num_heads=12,
        ffn_inner=3072,
        groups_qkv=groups,
        groups_ffn1=groups,
        groups_ffn2=groups,
        groups_ffn3=groups,
    )


def _squeezebert(groups: typing.Optional[int]) -> ModelConfig:
    # FFN1 stays dense; the grouped layers use G=4 unless overridden.
    groups = 4 if groups is None else groups
    return attr.evolve(
        _bert_base(1),
        groups_qkv=groups,
        groups_ffn2=groups,
        groups_ffn3=groups,
    )


def _tiny(groups: typing.Optional[int]) -> ModelConfig:
    groups = 1 if groups is None else groups
    return ModelConfig(
        vocab_size=64,
        max_positions=16,
        channels=8,
        num_blocks=2,
        num_heads=2,
        ffn_inner=32,
        groups_qkv=groups,
        groups_ffn1=1,
        groups_ffn2=groups,
        groups_ffn3=groups,
    )


PresetFactory = typing.Callable[[typing.Optional[int]], ModelConfig]

PRESETS: typing.Final[typing.Mapping[str, PresetFactory]] = {
    "bert-base": _bert_base,
    "squeezebert": _squeezebert,
    "tiny": _tiny,
}


def preset_config(name: str, /, *, groups: typing.Optional[int] = None) -> ModelConfig:
    r"""Returns a built-in configuration.

    Parameters
    ----------
    name : str
        One of `bert-base`, `squeezebert` or `tiny`.
    groups : int, optional
        Group count for the grouped layers. `bert-base` applies it to
        every layer, `squeezebert` and `tiny` to Q/K/V, FFN2 and FFN3
        only (FFN1 stays dense). Defaults to 4 for `squeezebert` and 1
        otherwise; an explicit value, 1 included, always wins.

    Raises
    ------
    ConfigurationError
        If the name is unknown or `groups` does not divide a channel count.
    """
    try:
        factory = PRESETS[name]
    except KeyError:
        raise domain_exception.ConfigurationError(
            f"unknown preset {name!r}, expected one of: {', '.join(PRESETS)}",
            field="preset",
        ) from None

    return factory(groups)
