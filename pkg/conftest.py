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

import logging
import typing

import numpy as np
import pytest

from gconvbert.application.services import gradient_service
from gconvbert.domain import model as domain_model
from gconvbert.domain import model_config as domain_config

TINY_SEED: typing.Final[int] = 7


@pytest.fixture(scope="function")
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_config() -> domain_config.ModelConfig:
    return domain_config.preset_config("tiny")


@pytest.fixture(scope="session")
def grouped_tiny_config() -> domain_config.ModelConfig:
    return domain_config.preset_config("tiny", groups=2)


@pytest.fixture(scope="session")
def tiny_model(tiny_config: domain_config.ModelConfig) -> domain_model.ModelWeights:
    return domain_model.random_instance(tiny_config, TINY_SEED)


@pytest.fixture(scope="session")
def grouped_tiny_model(
    grouped_tiny_config: domain_config.ModelConfig,
) -> domain_model.ModelWeights:
    return domain_model.random_instance(grouped_tiny_config, TINY_SEED)


@pytest.fixture(scope="function")
def tiny_inputs() -> gradient_service.ModelInputs:
    return gradient_service.ModelInputs(
        token_ids=[1, 5, 9, 12, 3],
        segment_ids=[0, 0, 0, 1, 1],
        attention_mask=[1, 1, 1, 1, 0],
    )


@pytest.fixture(autouse=True)
def restore_logging() -> typing.Iterator[None]:
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)
    logging.getLogger("gconvbert").setLevel(logging.NOTSET)
