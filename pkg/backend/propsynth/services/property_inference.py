"""
性质推断服务

主要功能:
- 每种原语算子的抽象语义: 混合矩阵、线性/非线性角色、形状变换
- append_abstract: 在顺序合成中追加一个算子
- infer_graph_properties: 按拓扑序对整张图做抽象解释，得到每个 (输入, 输出) 对的性质
- satisfies: 性质是否满足目标

依赖模型:
- Loc, MixingMatrix, DepthState, PropertyState, TargetSpec (models/lattice.py)
- PrimitiveOp, infer_shape, 窗口几何 (models/primitive.py)
"""

import logging
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from propsynth.models.lattice import (
    DepthState, Loc, MixingMatrix, OpRole, PropertyState, mix_compose,
)
from propsynth.models.primitive import (
    OpKind, center_window_positions, infer_shape, window_geometry,
)
from propsynth.utils import semantics_cache
from propsynth.utils.error_handler import GraphError, ShapeError, ValidationError

logger = logging.getLogger(__name__)

# 手工维护的线性表；池化 (含 MaxPool) 按线性层计入深度
LINEARITY = {
    OpKind.DENSE: OpRole.LINEAR,
    OpKind.CONVOLUTION: OpRole.LINEAR,
    OpKind.GROUPED_CONVOLUTION: OpRole.LINEAR,
    OpKind.DILATED_CONVOLUTION: OpRole.LINEAR,
    OpKind.ADD: OpRole.LINEAR,
    OpKind.SCALAR_MULTIPLY: OpRole.LINEAR,
    OpKind.RELU: OpRole.NONLINEAR,
    OpKind.GELU: OpRole.NONLINEAR,
    OpKind.SILU: OpRole.NONLINEAR,
    OpKind.SIGMOID: OpRole.NONLINEAR,
    OpKind.SOFTMAX: OpRole.NONLINEAR,
    OpKind.BATCH_NORM: OpRole.LINEAR,
    OpKind.LAYER_NORM: OpRole.LINEAR,
    OpKind.GROUP_NORM: OpRole.LINEAR,
    OpKind.DROPOUT: OpRole.LINEAR,
    OpKind.AVERAGE_POOL: OpRole.LINEAR,
    OpKind.MAX_POOL: OpRole.LINEAR,
}

# 线性表与具体线性测试结果不一致但属预期的算子 (深度角色覆盖)
ROLE_OVERRIDES = frozenset({OpKind.MAX_POOL})

# 通道维全耦合的算子 (输出元素依赖所有输入通道)
_CHANNEL_COUPLING = frozenset({
    OpKind.DENSE, OpKind.CONVOLUTION, OpKind.DILATED_CONVOLUTION, OpKind.LAYER_NORM, OpKind.SOFTMAX,
})

# 故障注入: kind -> 变换函数 (AbstractOpSemantics -> AbstractOpSemantics)
_overrides = {}


@dataclass(frozen=True)
class AbstractOpSemantics:
    mixing: MixingMatrix
    role: OpRole
    input_shape: object
    output_shape: object

    def shape_transform(self, shape):
        if shape != self.input_shape:
            raise ShapeError("抽象语义只对其计算时的输入形状有效")
        return self.output_shape

    def signature(self):
        return (self.mixing, self.role, self.output_shape)


def _column_locality(count, size):
    """返回 (对角局部性, 是否全耦合列)"""
    if size > 1 and count == size:
        return Loc.A, True
    if count > 1:
        return Loc.M, False
    return Loc.O, False


def _compute_semantics(op, shape):
    if not op.is_simple:
        raise ShapeError(f"{op.label()} 是连接算子，没有单输入抽象语义")
    output_shape = infer_shape(op, [shape])
    rank = shape.rank
    diagonal = [Loc.O] * rank
    full_columns = set()

    geometry = window_geometry(op)
    if geometry is not None:
        kernel, stride, dilation = geometry
        for axis, size in enumerate(shape.spatial, start=1):
            count = len(center_window_positions(size, kernel, stride, dilation))
            diagonal[axis], full = _column_locality(count, size)
            if full:
                full_columns.add(axis)

    channel_axis = rank - 1
    channels = shape.channels
    if op.kind in _CHANNEL_COUPLING:
        diagonal[channel_axis], full = _column_locality(channels, channels)
        if full:
            full_columns.add(channel_axis)
    elif op.kind in (OpKind.GROUPED_CONVOLUTION, OpKind.GROUP_NORM):
        group_size = channels // op.get('groups')
        diagonal[channel_axis], _ = _column_locality(group_size, channels)

    data = np.zeros((rank, rank), dtype=np.int8)
    for axis in range(rank):
        data[axis, axis] = int(diagonal[axis])
    for axis in full_columns:
        data[:, axis] = int(Loc.A)

    semantics = AbstractOpSemantics(MixingMatrix(data), LINEARITY[op.kind], shape, output_shape)
    transform = _overrides.get(op.kind)
    return transform(semantics) if transform else semantics


def op_abstract_semantics(op, input_shape):
    """算子在给定输入形状下的抽象语义 (带缓存)，形状不兼容时抛出 ShapeError"""
    if op.kind not in LINEARITY:
        raise GraphError(f"未知的算子种类: {op.kind}")
    return semantics_cache.get_semantics(op, input_shape, _compute_semantics)


@contextmanager
def override_semantics(kind, transform):
    """临时替换某种算子的抽象语义 (oracle-check 故障注入用)"""
    _overrides[kind] = transform
    semantics_cache.clear()
    try:
        yield
    finally:
        _overrides.pop(kind, None)
        semantics_cache.clear()


def append_abstract(state, op):
    semantics = op_abstract_semantics(op, state.shape)
    return PropertyState(
        mix_compose(semantics.mixing, state.mixing),
        state.depth.advance(semantics.role),
        semantics.output_shape,
    )


def chain_state(ops, input_shape):
    state = PropertyState.identity(input_shape)
    for op in ops:
        state = append_abstract(state, op)
    return state


def pairing_matrix(mixing):
    return mixing.pairing()


def infer_graph_properties(graph):
    """
    对整张图做抽象解释

    Returns:
        dict: (输入 id, 输出 id) -> PropertyState
    """
    from propsynth.services.graph_service import validate

    report = validate(graph)
    if not report.ok:
        raise ValidationError(report.problems)

    shapes = graph.shapes
    results = {}
    for graph_input in graph.inputs:
        mixing, depth = _propagate_from_input(graph, shapes, graph_input.id)
        for output_id in graph.outputs:
            out_shape = shapes[output_id]
            if output_id in mixing:
                best_role, best_count = max(depth[output_id].items(), key=lambda kv: (kv[1], kv[0] is OpRole.NONLINEAR))
                depth_state = DepthState(best_count, best_role) if best_count else DepthState()
                results[(graph_input.id, output_id)] = PropertyState(mixing[output_id], depth_state, out_shape)
            else:
                # 没有路径: 全 X 混合、深度 0
                results[(graph_input.id, output_id)] = PropertyState(
                    MixingMatrix.zeros(out_shape.rank, graph_input.shape.rank), DepthState(), out_shape)
    return results


def _propagate_from_input(graph, shapes, input_id):
    source_rank = shapes[input_id].rank
    mixing = {input_id: MixingMatrix.identity(source_rank)}
    depth = {input_id: {OpRole.NONE: 0}}

    for node_id in graph.topological_order:
        node = graph.node_map[node_id]
        reached = [s for s in node.inputs if s in mixing]
        if not reached:
            continue
        role = LINEARITY[node.op.kind]
        merged = None
        best = 0
        for source in reached:
            if node.op.is_simple:
                operand = mix_compose(op_abstract_semantics(node.op, shapes[source]).mixing, mixing[source])
            else:
                operand = mixing[source]  # 连接算子对每个操作数是恒等
            merged = operand if merged is None else merged.join(operand)
            for last_role, count in depth[source].items():
                best = max(best, count if last_role is role else count + 1)
        mixing[node_id] = merged
        depth[node_id] = {role: best}
    return mixing, depth


def satisfies(props, target):
    if target.mixing is not None and not (target.mixing <= props.mixing):
        return False
    if target.depth is not None and props.depth.count < target.depth:
        return False
    if target.shape is not None and props.shape != target.shape:
        return False
    return True
