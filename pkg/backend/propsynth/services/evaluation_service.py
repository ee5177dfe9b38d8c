"""
个体评估服务

主要功能:
- static_cost_model: 按算子闭式公式统计 FLOPs 和参数量
- surrogate_accuracy: 代替训练的确定性精度替身 (深度、输出处 ● 的个数、参数量对数 + 种子抖动)
- throughput_proxy: 1e6 / (1e6 + flops)
- StaticEvaluator: 组合以上三项，(graph, seed) -> metrics

注意: 如果新增评估器，必须同步修改 EVALUATORS 和 config.RunConfig.validate 中的评估器名单。
"""

import logging
import math
from math import prod
from typing import Protocol

import numpy as np

from propsynth.models.lattice import Loc
from propsynth.models.primitive import CONV_KINDS, OpKind
from propsynth.services.property_inference import infer_graph_properties

logger = logging.getLogger(__name__)

# 每个元素的 FLOPs
_ELEMENTWISE_FLOPS = {
    OpKind.RELU: 1,
    OpKind.GELU: 1,
    OpKind.SILU: 1,
    OpKind.SIGMOID: 1,
    OpKind.SCALAR_MULTIPLY: 1,
    OpKind.SOFTMAX: 3,
    OpKind.BATCH_NORM: 4,
    OpKind.LAYER_NORM: 4,
    OpKind.GROUP_NORM: 4,
    OpKind.DROPOUT: 0,
}
_NORMS = (OpKind.BATCH_NORM, OpKind.LAYER_NORM, OpKind.GROUP_NORM)

# 精度替身的系数
SURROGATE_FLOOR = 0.1
SURROGATE_DEPTH_WEIGHT = 0.5
SURROGATE_MIXING_WEIGHT = 0.2
SURROGATE_PARAMS_WEIGHT = 0.15
SURROGATE_JITTER = 0.02


def static_cost_model(graph):
    shapes = graph.shapes
    flops = 0
    params = 0
    for node in graph.nodes:
        op = node.op
        in_shape = shapes[node.inputs[0]]
        out_shape = shapes[node.id]
        kind = op.kind
        if kind is OpKind.DENSE:
            c_in, f = in_shape.channels, op.get('features')
            params += c_in * f + f
            flops += 2 * c_in * f * in_shape.batch * prod(in_shape.spatial)
        elif kind in CONV_KINDS:
            c_in, f = in_shape.channels, op.get('features')
            taps = op.get('kernel') ** len(in_shape.spatial)
            per_group = c_in // op.get('groups', 1)
            params += taps * per_group * f + f
            flops += 2 * taps * per_group * f * out_shape.batch * prod(out_shape.spatial)
        elif kind in (OpKind.AVERAGE_POOL, OpKind.MAX_POOL):
            flops += in_shape.size
        elif kind is OpKind.ADD:
            flops += out_shape.size
        else:
            flops += _ELEMENTWISE_FLOPS[kind] * in_shape.size
            if kind in _NORMS:
                params += 2 * in_shape.channels
    return {'flops': int(flops), 'params': int(params)}


def throughput_proxy(flops):
    return 1e6 / (1e6 + flops)


def surrogate_accuracy(graph, seed, params=None):
    """
    floor + a·(1 - e^(-D/4)) + b·F/m² + c·tanh(ln(1+P)/20) + σ·(u - 0.5)·min(1, D)，裁剪到 [0, 1]

    D 为各输入输出对中的最大深度，F 为对应混合矩阵中 ● 的个数，m 为秩，u 由 seed 决定。
    恒等图恰好得到 floor。
    """
    properties = infer_graph_properties(graph)
    depth = 0
    full = 0
    rank = 1
    for state in properties.values():
        depth = max(depth, state.depth.count)
        full = max(full, int(np.count_nonzero(state.mixing.data == int(Loc.A))))
        rank = max(rank, state.mixing.rows)
    if params is None:
        params = static_cost_model(graph)['params']
    jitter = np.random.default_rng(seed).random() - 0.5
    score = (
        SURROGATE_FLOOR
        + SURROGATE_DEPTH_WEIGHT * (1.0 - math.exp(-depth / 4.0))
        + SURROGATE_MIXING_WEIGHT * full / rank ** 2
        + SURROGATE_PARAMS_WEIGHT * math.tanh(math.log1p(params) / 20.0)
        + SURROGATE_JITTER * jitter * min(1, depth)
    )
    return float(min(1.0, max(0.0, score)))


class Evaluator(Protocol):
    """(graph, seed) -> {accuracy_proxy, flops, params, throughput_proxy}"""

    def __call__(self, graph, seed): ...


class StaticEvaluator:
    """静态代价模型 + 精度替身；可替换为任何 (graph, seed) -> metrics 的可调用对象"""

    name = 'static'

    def __call__(self, graph, seed):
        costs = static_cost_model(graph)
        return {
            'accuracy_proxy': surrogate_accuracy(graph, seed, costs['params']),
            'flops': costs['flops'],
            'params': costs['params'],
            'throughput_proxy': throughput_proxy(costs['flops']),
        }


EVALUATORS = {
    'static': StaticEvaluator,
}


def get_evaluator(name):
    try:
        return EVALUATORS[name]()
    except KeyError:
        raise ValueError(f"未知的评估器: {name}")
