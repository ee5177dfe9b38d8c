import os

import numpy as np
import pytest

from propsynth.models import PrimitiveOp, TensorShape
from propsynth.utils import semantics_cache
from propsynth.utils.serialization import read_graph

FIXTURES = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'fixtures')


def fixture_path(name):
    return os.path.join(FIXTURES, name)


@pytest.fixture(autouse=True)
def _clear_semantics_cache():
    semantics_cache.clear()
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def cnn2_graph():
    return read_graph(fixture_path('cnn2.json'))


@pytest.fixture
def vit_graph():
    return read_graph(fixture_path('vit_mlp.json'))


@pytest.fixture
def identity_graph():
    return read_graph(fixture_path('identity.json'))


@pytest.fixture
def mini_shape():
    return TensorShape((1, 8, 8, 4))


@pytest.fixture
def mini_catalog():
    """Dense(C), Dense(2C), Conv3x3(C), ReLU, AvgPool2, BN，输入通道 C = 4"""
    return [
        PrimitiveOp.create('Dense', features=4),
        PrimitiveOp.create('Dense', features=8),
        PrimitiveOp.create('Convolution', features=4, kernel=3, stride=1),
        PrimitiveOp.create('ReLU'),
        PrimitiveOp.create('AveragePool', window=2),
        PrimitiveOp.create('BatchNorm', momentum=0.9),
    ]
