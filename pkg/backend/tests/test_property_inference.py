from propsynth.models import (
    Block, ComputationGraph, GraphInput, MixingMatrix, Node, OpRole, PrimitiveOp, TargetSpec, TensorShape,
)
from propsynth.services.property_inference import (
    LINEARITY, append_abstract, chain_state, infer_graph_properties, op_abstract_semantics, satisfies,
)
from propsynth.models.primitive import OpKind
from propsynth.utils import semantics_cache

CONV3 = PrimitiveOp.create('Convolution', features=3, kernel=3, stride=1)
SHAPE = TensorShape((2, 5, 5, 3))


def test_conv_semantics_matches_table():
    semantics = op_abstract_semantics(CONV3, SHAPE)
    assert semantics.mixing.to_rows() == ['○××●', '×◑×●', '××◑●', '×××●']
    assert semantics.role is OpRole.LINEAR
    assert semantics.output_shape == SHAPE


def test_dense_differs_from_conv_only_on_spatial_diagonal():
    dense = op_abstract_semantics(PrimitiveOp.create('Dense', features=3), SHAPE).mixing
    assert dense.to_rows() == ['○××●', '×○×●', '××○●', '×××●']


def test_window_covering_whole_dim_is_all_to_one():
    shape = TensorShape((1, 3, 3, 2))
    mixing = op_abstract_semantics(PrimitiveOp.create('AveragePool', window=3), shape).mixing
    assert mixing.to_rows() == ['○●●×', '×●●×', '×●●×', '×●●○']


def test_grouped_channels_are_many_to_one():
    shape = TensorShape((1, 4, 4, 8))
    grouped = op_abstract_semantics(PrimitiveOp.create('GroupNorm', groups=4), shape).mixing
    assert grouped.to_rows() == ['○×××', '×○××', '××○×', '×××◑']


def test_pools_count_as_linear_steps():
    assert LINEARITY[OpKind.MAX_POOL] is OpRole.LINEAR
    assert LINEARITY[OpKind.AVERAGE_POOL] is OpRole.LINEAR
    assert LINEARITY[OpKind.SOFTMAX] is OpRole.NONLINEAR


def test_vit_mlp_has_depth_three(vit_graph):
    props = infer_graph_properties(vit_graph)
    state = props[('x', 'fc2')]
    assert state.depth.count == 3
    assert state.shape == TensorShape((1, 16, 32))


def test_identity_graph(identity_graph):
    state = infer_graph_properties(identity_graph)[('x', 'x')]
    assert state.depth.count == 0
    assert state.mixing == MixingMatrix.identity(4)


def test_residual_add_joins_with_identity():
    shape = TensorShape((1, 6, 6, 4))
    conv = PrimitiveOp.create('Convolution', features=4, kernel=3, stride=1)
    graph = ComputationGraph(
        (GraphInput('x', shape),),
        (Node('c', conv, ('x',)), Node('r', PrimitiveOp.create('ReLU'), ('c',)),
         Node('add', PrimitiveOp.create('Add'), ('r', 'x'))),
        ('add',),
        (Block('res', ('c', 'r', 'add'), frozen=('add',)),),
    )
    state = infer_graph_properties(graph)[('x', 'add')]
    branch = chain_state([conv, PrimitiveOp.create('ReLU')], shape)
    assert state.mixing == branch.mixing.join(MixingMatrix.identity(4))
    assert state.depth.count == 3


def test_chain_state_and_satisfies():
    shape = TensorShape((1, 8, 8, 4))
    ops = [PrimitiveOp.create('Convolution', features=8, kernel=3, stride=1),
           PrimitiveOp.create('ReLU'), PrimitiveOp.create('AveragePool', window=2)]
    state = chain_state(ops, shape)
    assert state.shape == TensorShape((1, 4, 4, 8))
    assert state.depth.count == 3
    assert satisfies(state, TargetSpec.from_state(state))
    assert satisfies(state, TargetSpec(depth=2))
    assert not satisfies(state, TargetSpec(depth=4))
    assert not satisfies(state, TargetSpec(shape=shape))
    assert append_abstract(state, PrimitiveOp.create('ReLU')).depth.count == 4


def test_semantics_are_cached():
    op_abstract_semantics(CONV3, SHAPE)
    op_abstract_semantics(CONV3, SHAPE)
    info = semantics_cache.cache_info()
    assert info['misses'] == 1
    assert info['hits'] == 1
