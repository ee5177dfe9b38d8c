from propsynth.models.shape import TensorShape
from propsynth.models.primitive import OpKind, PrimitiveOp, infer_shape
from propsynth.models.lattice import (
    Loc, MixingMatrix, DepthState, OpRole, PropertyState, TargetSpec,
    loc_add, loc_mul, mix_compose,
)
from propsynth.models.graph import GraphInput, Node, Block, ComputationGraph
from propsynth.models.individual import Individual, OBJECTIVES

__all__ = [
    'TensorShape',
    'OpKind', 'PrimitiveOp', 'infer_shape',
    'Loc', 'MixingMatrix', 'DepthState', 'OpRole', 'PropertyState', 'TargetSpec',
    'loc_add', 'loc_mul', 'mix_compose',
    'GraphInput', 'Node', 'Block', 'ComputationGraph',
    'Individual', 'OBJECTIVES',
]
