import numpy as np
import pytest

from propsynth.models import PrimitiveOp, TensorShape
from propsynth.services.property_inference import chain_state, op_abstract_semantics
from propsynth.services.reference_executor import (
    ChainFunction, DenseTensor, concrete_chain_mixing, concrete_mixing, contribution_pattern, eval_op,
    linearity_test, make_weights,
)
from propsynth.utils.error_handler import OracleError

SHAPE = TensorShape((2, 5, 5, 3))


def test_eval_op_output_shape_matches_inference():
    rng = np.random.default_rng(0)
    op = PrimitiveOp.create('Convolution', features=6, kernel=3, stride=1)
    x = DenseTensor.random(SHAPE, rng)
    out = eval_op(op, [x], make_weights(op, SHAPE, rng))
    assert out.shape == TensorShape((2, 5, 5, 6))
    assert out.values.shape == (2, 5, 5, 6)


def test_strided_pool_halves_spatial_dims():
    rng = np.random.default_rng(0)
    shape = TensorShape((1, 4, 4, 2))
    op = PrimitiveOp.create('AveragePool', window=2)
    x = DenseTensor.random(shape, rng)
    out = eval_op(op, [x], {})
    assert out.values.shape == (1, 2, 2, 2)
    assert np.isclose(out.values[0, 0, 0, 0], x.values[0, :2, :2, 0].mean())


def test_conv_contributors_form_a_window():
    op = PrimitiveOp.create('Convolution', features=3, kernel=3, stride=1)
    pattern = contribution_pattern(op, SHAPE)
    contributors = pattern.contributors((0, 2, 2, 0))
    assert {(b, h, w) for b, h, w, _ in contributors} == {(0, h, w) for h in (1, 2, 3) for w in (1, 2, 3)}
    assert {c for *_, c in contributors} == {0, 1, 2}


@pytest.mark.parametrize('op', [
    PrimitiveOp.create('Convolution', features=3, kernel=3, stride=1),
    PrimitiveOp.create('Dense', features=3),
    PrimitiveOp.create('AveragePool', window=5),
    PrimitiveOp.create('LayerNorm'),
    PrimitiveOp.create('ReLU'),
])
def test_concrete_mixing_equals_abstract(op):
    assert concrete_mixing(op, SHAPE) == op_abstract_semantics(op, SHAPE).mixing


def test_chain_abstract_is_sound():
    shape = TensorShape((1, 6, 6, 4))
    ops = [PrimitiveOp.create('Convolution', features=4, kernel=3, stride=1),
           PrimitiveOp.create('ReLU'),
           PrimitiveOp.create('AveragePool', window=2)]
    abstract = chain_state(ops, shape).mixing
    assert abstract <= concrete_chain_mixing(ops, shape)


@pytest.mark.parametrize('op, expected', [
    (PrimitiveOp.create('Dense', features=4), True),
    (PrimitiveOp.create('ReLU'), False),
    (PrimitiveOp.create('MaxPool', window=2), False),
    (PrimitiveOp.create('AveragePool', window=2), True),
    (PrimitiveOp.create('LayerNorm'), True),
    (PrimitiveOp.create('Softmax'), False),
])
def test_linearity(op, expected):
    assert linearity_test(op, TensorShape((1, 4, 4, 4))) is expected


def test_chain_function_is_deterministic_for_seed():
    ops = [PrimitiveOp.create('Dense', features=2), PrimitiveOp.create('GeLU')]
    shape = TensorShape((1, 3, 4))
    x = np.ones(shape.dims)
    first = ChainFunction(ops, shape, np.random.default_rng(1))(x)
    second = ChainFunction(ops, shape, np.random.default_rng(1))(x)
    assert np.array_equal(first, second)


def test_oversized_input_is_rejected():
    with pytest.raises(OracleError):
        concrete_mixing(PrimitiveOp.create('ReLU'), TensorShape((1, 64, 64, 4)))
