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
r"""Encoder weights and the inference forward pass.

A model is embedding, `L` post-layer-norm encoder blocks, a tanh pooler
over position 0 and a dense classifier. Every stored tensor has a dotted
name (see `expected_shapes`), which is how checkpoints, gradients and
parameter enumeration address it.
"""
from __future__ import annotations

__all__: typing.Sequence[str] = (
    "EncoderBlockWeights",
    "ModelWeights",
    "expected_shapes",
    "build_model",
    "random_instance",
    "encoder_block_forward",
    "forward",
    "densify",
)

import typing

import attr
import numpy as np
from scipy import stats

from gconvbert.domain import attention as domain_attention
from gconvbert.domain import layer as domain_layer
from gconvbert.domain import model_config as domain_config
from gconvbert.domain import model_exception as domain_exception
from gconvbert.domain import tensor

if typing.TYPE_CHECKING:
    from gconvbert.domain.tensor import Tensor

_TRUNCATION: typing.Final[float] = 2.0


@attr.define(frozen=True, kw_only=True, eq=False)
class EncoderBlockWeights:
    attn: domain_attention.AttentionWeights = attr.field()
    ffn1: domain_layer.LayerWeights = attr.field()
    ffn2: domain_layer.LayerWeights = attr.field()
    ffn3: domain_layer.LayerWeights = attr.field()
    ln_attn: domain_layer.LayerNormParams = attr.field()
    ln_out: domain_layer.LayerNormParams = attr.field()

    def __attrs_post_init__(self) -> None:
        channels = self.attn.channels
        inner = self.ffn2.out_channels
        for name, layer, expected in (
            ("ffn1", self.ffn1, (channels, channels)),
            ("ffn2", self.ffn2, (channels, inner)),
            ("ffn3", self.ffn3, (inner, channels)),
        ):
            if (layer.in_channels, layer.out_channels) != expected:
                raise domain_exception.DimensionError(
                    name, (layer.in_channels, layer.out_channels), expected
                )

    def layer(self, role: str) -> domain_layer.LayerWeights:
        if role in {"q_proj", "k_proj", "v_proj"}:
            return typing.cast(domain_layer.LayerWeights, getattr(self.attn, role))

        if role in {"ffn1", "ffn2", "ffn3"}:
            return typing.cast(domain_layer.LayerWeights, getattr(self, role))

        raise domain_exception.ConfigurationError(f"unknown layer role {role!r}", field="role")


@attr.define(frozen=True, kw_only=True, eq=False)
class ModelWeights:
    embeddings: domain_layer.EmbeddingTables = attr.field()
    blocks: typing.Tuple[EncoderBlockWeights, ...] = attr.field(converter=tuple)
    pooler: domain_layer.LayerWeights = attr.field()
    classifier: domain_layer.LayerWeights = attr.field()

    @classmethod
    def from_named(
        cls,
        config: domain_config.ModelConfig,
        parameters: typing.Mapping[str, Tensor],
    ) -> ModelWeights:
        r"""Rebuilds a model from its flat named tensors.

        Raises
        ------
        CheckpointConsistencyError
            If a tensor is missing, unexpected, or shaped differently than
            the config requires.
        """
        shapes = expected_shapes(config)
        for name in parameters:
            if name not in shapes:
                raise domain_exception.CheckpointConsistencyError(name, "not part of this config.")

        for name, shape in shapes.items():
            if name not in parameters:
                raise domain_exception.CheckpointConsistencyError(name, "is missing.")

            actual = tuple(np.shape(parameters[name]))
            if actual != shape:
                raise domain_exception.CheckpointConsistencyError(
                    name, f"expected shape {shape!r}, got {actual!r}."
                )

        def dense(prefix: str, groups: int = 1) -> domain_layer.LayerWeights:
            return domain_layer.LayerWeights(
                kernel=parameters[f"{prefix}.kernel"],
                bias=parameters[f"{prefix}.bias"],
                groups=groups,
            )

        def norm(prefix: str) -> domain_layer.LayerNormParams:
            return domain_layer.LayerNormParams(
                gamma=parameters[f"{prefix}.gamma"],
                beta=parameters[f"{prefix}.beta"],
                eps=config.ln_eps,
            )

        blocks = []
        for index in range(config.num_blocks):
            prefix = f"blocks.{index}"
            blocks.append(
                EncoderBlockWeights(
                    attn=domain_attention.AttentionWeights(
                        q_proj=dense(f"{prefix}.attn.q_proj", config.groups_qkv),
                        k_proj=dense(f"{prefix}.attn.k_proj", config.groups_qkv),
                        v_proj=dense(f"{prefix}.attn.v_proj", config.groups_qkv),
                        num_heads=config.num_heads,
                    ),
                    ffn1=dense(f"{prefix}.ffn1", config.groups_ffn1),
                    ffn2=dense(f"{prefix}.ffn2", config.groups_ffn2),
                    ffn3=dense(f"{prefix}.ffn3", config.groups_ffn3),
                    ln_attn=norm(f"{prefix}.ln_attn"),
                    ln_out=norm(f"{prefix}.ln_out"),
                )
            )

        return cls(
            embeddings=domain_layer.EmbeddingTables(
                token_table=parameters["embeddings.token_table"],
                position_table=parameters["embeddings.position_table"],
                segment_table=parameters["embeddings.segment_table"],
                norm=norm("embeddings.norm"),
            ),
            blocks=blocks,
            pooler=dense("pooler"),
            classifier=dense("classifier"),
        )

    def named_parameters(self) -> typing.Dict[str, Tensor]:
        """Every stored tensor by dotted name, in canonical order."""
        named: typing.Dict[str, Tensor] = {
            "embeddings.token_table": self.embeddings.token_table,
            "embeddings.position_table": self.embeddings.position_table,
            "embeddings.segment_table": self.embeddings.segment_table,
            "embeddings.norm.gamma": self.embeddings.norm.gamma,
            "embeddings.norm.beta": self.embeddings.norm.beta,
        }

        for index, block in enumerate(self.blocks):
            prefix = f"blocks.{index}"
            for role in domain_config.LAYER_ROLES:
                path = f"{prefix}.attn.{role}" if role.endswith("_proj") else f"{prefix}.{role}"
                layer = block.layer(role)
                named[f"{path}.kernel"] = layer.kernel
                named[f"{path}.bias"] = layer.bias

            for norm_name in ("ln_attn", "ln_out"):
                norm = getattr(block, norm_name)
                named[f"{prefix}.{norm_name}.gamma"] = norm.gamma
                named[f"{prefix}.{norm_name}.beta"] = norm.beta

        for head_name in ("pooler", "classifier"):
            head = getattr(self, head_name)
            named[f"{head_name}.kernel"] = head.kernel
            named[f"{head_name}.bias"] = head.bias

        return named

    def parameter(self, block: int, role: str) -> domain_layer.LayerWeights:
        """Addresses a block layer by (block index, role), e.g. (0, "ffn2")."""
        if not 0 <= block < len(self.blocks):
            raise domain_exception.ConfigurationError(
                f"block {block} out of range [0, {len(self.blocks)})", field="block"
            )

        return self.blocks[block].layer(role)

    def parameter_count(self) -> int:
        return sum(int(value.size) for value in self.named_parameters().values())

    def with_parameter(self, name: str, value: Tensor) -> ModelWeights:
        """Returns a copy with the dotted-name tensor replaced."""
        head, _, rest = name.partition(".")
        if head == "blocks":
            index, _, rest = rest.partition(".")
            if not index.isdigit() or int(index) >= len(self.blocks):
                raise domain_exception.CheckpointConsistencyError(name, "is not a parameter.")

            blocks = list(self.blocks)
            blocks[int(index)] = _evolve_path(blocks[int(index)], rest, value, name)
            return attr.evolve(self, blocks=blocks)

        return _evolve_path(self, name, value, name)

    def replace_parameters(self, parameters: typing.Mapping[str, Tensor]) -> ModelWeights:
        model = self
        for name, value in parameters.items():
            model = model.with_parameter(name, value)

        return model


_Node = typing.TypeVar("_Node")


def _evolve_path(node: _Node, path: str, value: Tensor, name: str) -> _Node:
    head, _, rest = path.partition(".")
    current = getattr(node, head, None)
    if current is None or not attr.has(type(node)):
        raise domain_exception.CheckpointConsistencyError(name, "is not a parameter.")

    if not rest:
        if not isinstance(current, np.ndarray):
            raise domain_exception.CheckpointConsistencyError(name, "is not a parameter.")

        if np.shape(value) != current.shape:
            raise domain_exception.CheckpointConsistencyError(
                name, f"expected shape {current.shape!r}, got {np.shape(value)!r}."
            )

        return attr.evolve(node, **{head: value})

    return attr.evolve(node, **{head: _evolve_path(current, rest, value, name)})


def expected_shapes(
    config: domain_config.ModelConfig,
) -> typing.Dict[str, typing.Tuple[int, ...]]:
    r"""Names and shapes of every tensor a model with `config` stores.

    The order is canonical: embeddings, blocks in index order (Q, K, V,
    FFN1-3, then the two layer norms), pooler, classifier.
    """
    c = config.channels
    shapes: typing.Dict[str, typing.Tuple[int, ...]] = {
        "embeddings.token_table": (config.vocab_size, c),
        "embeddings.position_table": (config.max_positions, c),
        "embeddings.segment_table": (domain_config.SEGMENT_VOCAB, c),
        "embeddings.norm.gamma": (c,),
        "embeddings.norm.beta": (c,),
    }

    for index in range(config.num_blocks):
        prefix = f"blocks.{index}"
        for role in domain_config.LAYER_ROLES:
            path = f"{prefix}.attn.{role}" if role.endswith("_proj") else f"{prefix}.{role}"
            c_in, c_out = config.layer_channels(role)
            shapes[f"{path}.kernel"] = (c_out, c_in // config.groups_for(role), 1)
            shapes[f"{path}.bias"] = (c_out,)

        for norm_name in ("ln_attn", "ln_out"):
            shapes[f"{prefix}.{norm_name}.gamma"] = (c,)
            shapes[f"{prefix}.{norm_name}.beta"] = (c,)

    shapes["pooler.kernel"] = (c, c, 1)
    shapes["pooler.bias"] = (c,)
    shapes["classifier.kernel"] = (config.num_classes, c, 1)
    shapes["classifier.bias"] = (config.num_classes,)
    return shapes


def build_model(config: domain_config.ModelConfig, seed: int) -> ModelWeights:
    r"""Initializes a model deterministically from `seed`.

    Tables and kernels are drawn from a normal truncated at two standard
    deviations with `config.init_std`; biases and layer-norm shifts start
    at zero and layer-norm scales at one. Draws follow the canonical
    parameter order, so the same (config, seed) always yields bitwise
    identical weights.
    """
    rng = np.random.default_rng(seed)
    parameters: typing.Dict[str, Tensor] = {}
    for name, shape in expected_shapes(config).items():
        if name.endswith(".gamma"):
            parameters[name] = np.ones(shape, dtype=np.float64)
        elif name.endswith((".bias", ".beta")):
            parameters[name] = np.zeros(shape, dtype=np.float64)
        else:
            parameters[name] = stats.truncnorm.rvs(
                -_TRUNCATION,
                _TRUNCATION,
                loc=0.0,
                scale=config.init_std,
                size=shape,
                random_state=rng,
            ).astype(np.float64)

    return ModelWeights.from_named(config, parameters)


def random_instance(
    config: domain_config.ModelConfig,
    seed: int,
    *,
    scale: float = 0.5,
) -> ModelWeights:
    r"""Draws every tensor, biases and layer-norm terms included, from N(0, scale).

    Layer-norm scales are centred on one instead of zero. Unlike
    `build_model` nothing starts at a degenerate value, which is what
    gradient checks and equivalence tests need.
    """
    rng = np.random.default_rng(seed)
    parameters: typing.Dict[str, Tensor] = {}
    for name, shape in expected_shapes(config).items():
        values = rng.normal(0.0, scale, size=shape)
        parameters[name] = values + 1.0 if name.endswith(".gamma") else values

    return ModelWeights.from_named(config, parameters)


def encoder_block_forward(
    x: Tensor,
    w: EncoderBlockWeights,
    mask: typing.Optional[Tensor] = None,
    *,
    recorder: typing.Optional[domain_attention.StageHook] = None,
) -> Tensor:
    r"""One post-layer-norm encoder block.

    `h = ln_attn(x + ffn1(attention(x)))`, then
    `out = ln_out(h + ffn3(gelu(ffn2(h))))`.
    """
    attended = domain_attention.multi_head_attention(x, w.attn, mask, recorder=recorder)

    with domain_attention.stage(recorder, "ffn"):
        h = w.ln_attn.apply(x + domain_layer.grouped_conv1d(attended, w.ffn1))
        inner = tensor.gelu(domain_layer.grouped_conv1d(h, w.ffn2))
        return w.ln_out.apply(h + domain_layer.grouped_conv1d(inner, w.ffn3))


def forward(
    model: ModelWeights,
    token_ids: typing.Sequence[int],
    segment_ids: typing.Sequence[int],
    attention_mask: typing.Optional[typing.Sequence[int]] = None,
    *,
    recorder: typing.Optional[domain_attention.StageHook] = None,
) -> Tensor:
    r"""Inference forward pass.

    Parameters
    ----------
    model : ModelWeights
        Immutable model weights.
    token_ids, segment_ids : typing.Sequence[int]
        Input ids, both of length P.
    attention_mask : typing.Sequence[int], optional
        0/1 visibility per position; padding positions are never attended.
    recorder : StageHook, optional
        Receives `embedding`, `qkv`, `attention`, `ffn` and `classifier`
        stage scopes, used for per-stage timing.

    Returns
    -------
    Tensor
        Logits of shape (num_classes,).
    """
    mask = None
    if attention_mask is not None:
        if len(attention_mask) != len(token_ids):
            raise domain_exception.DimensionError(
                "attention_mask", (len(attention_mask),), (len(token_ids),)
            )

        mask = domain_attention.additive_mask(attention_mask)

    with domain_attention.stage(recorder, "embedding"):
        x = domain_layer.embed(token_ids, segment_ids, model.embeddings)

    for block in model.blocks:
        x = encoder_block_forward(x, block, mask, recorder=recorder)

    with domain_attention.stage(recorder, "classifier"):
        pooled = tensor.tanh(domain_layer.positionwise_fc(x[0:1], model.pooler))
        return domain_layer.positionwise_fc(pooled, model.classifier)[0]


def densify(model: ModelWeights) -> ModelWeights:
    """Replaces every grouped layer with its block-diagonal dense equivalent."""

    def dense_block(block: EncoderBlockWeights) -> EncoderBlockWeights:
        return attr.evolve(
            block,
            attn=attr.evolve(
                block.attn,
                q_proj=domain_layer.block_diagonal(block.attn.q_proj),
                k_proj=domain_layer.block_diagonal(block.attn.k_proj),
                v_proj=domain_layer.block_diagonal(block.attn.v_proj),
            ),
            ffn1=domain_layer.block_diagonal(block.ffn1),
            ffn2=domain_layer.block_diagonal(block.ffn2),
            ffn3=domain_layer.block_diagonal(block.ffn3),
        )

    return attr.evolve(model, blocks=[dense_block(block) for block in model.blocks])
