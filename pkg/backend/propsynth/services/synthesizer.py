"""
渐进式合成服务

主要功能:
- greedy_synthesize: 每步从目录中选使总距离最小的算子 (同距离取目录中最靠前者)
- stochastic_synthesize: 先按 1/(1+d) 的权重随机追加到原子图大小，再切换为贪心
- enumerative_synthesize: 迭代加深的随机顺序枚举，作为最短结果的对照
- compress_catalog / diversify: 按抽象语义把目录压缩为等价类，合成后在类内随机替换
- synthesize_chains / synthesize_replacement: 对子图的每条顺序链分别合成并重新组装

依赖模型:
- PropertyState, TargetSpec (models/lattice.py)
- append_abstract, op_abstract_semantics (services/property_inference.py)
- d_total, DistanceContext (services/distance_service.py)
- decompose_sequential, replace_subgraph (services/graph_service.py)

注意: 每步的距离轨迹写入 STEP_TRACE_LOGGER，只有在 DEBUG 级别下才会输出。
"""

import logging
from dataclasses import dataclass, field
from enum import Enum

from propsynth import STEP_TRACE_LOGGER
from propsynth.config import CatalogConfig, SynthesisConfig
from propsynth.models.lattice import PropertyState
from propsynth.services.catalog_service import op_catalog
from propsynth.services.distance_service import INF, DistanceContext, distance_components, spatial_ratio
from propsynth.services.graph_service import decompose_sequential, replace_subgraph
from propsynth.services.property_inference import append_abstract, op_abstract_semantics
from propsynth.utils.error_handler import SearchBudgetError, ShapeError

logger = logging.getLogger(__name__)
trace_logger = logging.getLogger(STEP_TRACE_LOGGER)


class Outcome(Enum):
    SATISFIED = 'satisfied'
    INFEASIBLE = 'infeasible'
    FAILED = 'failed'


@dataclass
class SynthesisTask:
    input_shape: object  # TensorShape
    target: object  # TargetSpec
    catalog: list
    max_steps: int = 64
    original_size: int = None
    extra_steps: int = 2
    enumerative_budget: int = 200_000
    context: DistanceContext = None

    @property
    def initial_state(self):
        return PropertyState.identity(self.input_shape)

    @property
    def size_hint(self):
        # 新任务没有原子图时，以目标隐含的下界作为原始大小
        if self.original_size is not None:
            return self.original_size
        bound = self.target.depth or 0
        if self.target.shape is not None:
            ratio = spatial_ratio(self.input_shape, self.target.shape)
            shape_bound = int(self.input_shape.channels != self.target.shape.channels) + int(bool(ratio and ratio > 1))
            bound = max(bound, shape_bound)
        identity = self.initial_state.mixing
        if (self.target.mixing is not None and identity.shape == self.target.mixing.shape
                and identity.deficient_entries(self.target.mixing)):
            bound = max(bound, 1)
        return bound

    def distance_context(self):
        if self.context is None:
            self.context = DistanceContext.build(self.catalog, self.input_shape)
        return self.context

    def distance(self, state):
        return distance_components(state, self.target, self.distance_context())


@dataclass
class SynthesisResult:
    outcome: Outcome
    ops: tuple = ()
    reason: str = None
    steps: int = 0
    distance_evaluations: int = 0
    distance_trace: list = field(default_factory=list)
    step_log: list = field(default_factory=list)

    @property
    def satisfied(self):
        return self.outcome is Outcome.SATISFIED

    @property
    def infeasible(self):
        return self.outcome is Outcome.INFEASIBLE

    @property
    def failed(self):
        return self.outcome is Outcome.FAILED

    def to_dict(self):
        return {
            'outcome': self.outcome.value,
            'reason': self.reason,
            'ops': [op.to_dict() for op in self.ops],
            'steps': self.steps,
            'distance_evaluations': self.distance_evaluations,
            'distance_trace': [_json_distance(d) for d in self.distance_trace],
            'step_log': self.step_log,
        }


def _json_distance(value):
    return 'inf' if value == INF else value


class _Run:
    """一次合成过程中的可变状态: 当前性质、已追加的算子、计数与轨迹"""

    def __init__(self, task):
        self.task = task
        self.state = task.initial_state
        self.ops = []
        self.evaluations = 0
        components = task.distance(self.state)
        self.distance = components['total']
        self.trace = [self.distance]
        self.step_log = []

    def candidates(self):
        """对目录中每个算子计算追加后的距离；形状不兼容的算子跳过"""
        self.evaluations += len(self.task.catalog)
        found = []
        for index, op in enumerate(self.task.catalog):
            try:
                after = append_abstract(self.state, op)
            except ShapeError:
                continue
            found.append((index, op, after, self.task.distance(after)))
        return found

    def commit(self, op, after, components):
        self.ops.append(op)
        self.state = after
        self.distance = components['total']
        self.trace.append(self.distance)
        entry = {
            'step': len(self.ops),
            'op': op.label(),
            'mixing': _json_distance(components['mixing']),
            'depth': components['depth'],
            'shape': _json_distance(components['shape']),
            'total': _json_distance(components['total']),
        }
        self.step_log.append(entry)
        trace_logger.info(
            f"step {entry['step']}: + {entry['op']} d_mixing={entry['mixing']} "
            f"d_depth={entry['depth']} d_shape={entry['shape']} d={entry['total']}")

    def result(self, outcome, reason=None):
        return SynthesisResult(outcome, tuple(self.ops), reason, len(self.ops), self.evaluations,
                               list(self.trace), list(self.step_log))

    def greedy_step(self):
        best = None
        for index, op, after, components in self.candidates():
            if best is None or components['total'] < best[3]['total']:
                best = (index, op, after, components)
        if best is None or best[3]['total'] >= self.distance:
            return False
        self.commit(best[1], best[2], best[3])
        return True


def greedy_synthesize(task):
    run = _Run(task)
    if run.distance == INF:
        return run.result(Outcome.INFEASIBLE, 'target unreachable from the initial state')
    return _finish_greedy(run, task.max_steps)


def _finish_greedy(run, step_limit):
    while run.distance > 0:
        if len(run.ops) >= step_limit:
            return run.result(Outcome.FAILED, 'budget')
        if not run.greedy_step():
            # 覆盖性保证下不应出现；出现时说明目录不足以覆盖该目标
            logger.error(f"贪心合成停滞: d={run.distance}, 已追加 {len(run.ops)} 个算子")
            return run.result(Outcome.FAILED, 'stalled')
    return run.result(Outcome.SATISFIED)


def stochastic_synthesize(task, rng):
    """
    随机阶段: 长度未达到原始大小前，按 1/(1+d_after) 的权重抽样 (排除 d = INF 的算子)；
    之后切换为贪心，总长度超过原始大小 + extra_steps 仍未满足则失败。
    """
    run = _Run(task)
    if run.distance == INF:
        return run.result(Outcome.INFEASIBLE, 'target unreachable from the initial state')

    original_size = task.size_hint
    while len(run.ops) < original_size:
        options = [c for c in run.candidates() if c[3]['total'] != INF]
        if not options:
            return run.result(Outcome.FAILED, 'no feasible operation')
        weights = [1.0 / (1.0 + c[3]['total']) for c in options]
        total = sum(weights)
        choice = int(rng.choice(len(options), p=[w / total for w in weights]))
        _, op, after, components = options[choice]
        run.commit(op, after, components)

    return _finish_greedy(run, min(task.max_steps, original_size + task.extra_steps))


def enumerative_synthesize(task, rng):
    """迭代加深枚举: 长度从 0 开始递增，每层以随机顺序展开；每展开一个节点计一次距离评估"""
    initial = task.initial_state
    first = task.distance(initial)['total']
    evaluations = 1
    if first == INF:
        return SynthesisResult(Outcome.INFEASIBLE, reason='target unreachable from the initial state',
                               distance_evaluations=evaluations, distance_trace=[first])
    if first == 0:
        return SynthesisResult(Outcome.SATISFIED, distance_evaluations=evaluations, distance_trace=[first])

    catalog = task.catalog
    budget = task.enumerative_budget

    def search(state, ops, remaining):
        nonlocal evaluations
        for index in rng.permutation(len(catalog)):
            op = catalog[int(index)]
            if evaluations >= budget:
                raise SearchBudgetError(f"枚举预算 {budget} 已用尽")
            evaluations += 1
            try:
                after = append_abstract(state, op)
            except ShapeError:
                continue
            d = task.distance(after)['total']
            if d == INF:
                continue
            if remaining == 1:
                if d == 0:
                    return ops + [op]
            else:
                found = search(after, ops + [op], remaining - 1)
                if found is not None:
                    return found
        return None

    try:
        for length in range(1, task.max_steps + 1):
            found = search(initial, [], length)
            if found is not None:
                state = initial
                trace = [first]
                for op in found:
                    state = append_abstract(state, op)
                    trace.append(task.distance(state)['total'])
                return SynthesisResult(Outcome.SATISFIED, tuple(found), steps=len(found),
                                       distance_evaluations=evaluations, distance_trace=trace)
    except SearchBudgetError as e:
        logger.warning(f"枚举合成失败: {e}")
        return SynthesisResult(Outcome.FAILED, reason='budget', distance_evaluations=evaluations,
                               distance_trace=[first])
    return SynthesisResult(Outcome.FAILED, reason='max_steps', distance_evaluations=evaluations,
                           distance_trace=[first])


SYNTHESIZERS = {
    'greedy': lambda task, rng: greedy_synthesize(task),
    'stochastic': stochastic_synthesize,
    'enumerative': enumerative_synthesize,
}


def synthesize(task, mode, rng):
    try:
        synthesizer = SYNTHESIZERS[mode]
    except KeyError:
        raise ValueError(f"未知的合成模式: {mode}")
    return synthesizer(task, rng)


# ---- 目录压缩 ----

@dataclass(frozen=True)
class OpClass:
    representative: object  # PrimitiveOp
    members: tuple
    signature: tuple


def _op_signature(op, shapes):
    parts = []
    for shape in shapes:
        try:
            parts.append(op_abstract_semantics(op, shape).signature())
        except ShapeError:
            parts.append(None)
    return (op.kind.family, tuple(parts))


def compress_catalog(catalog, working_shape, context=None):
    """
    按 (算子族, 在所有可达形状上的抽象语义) 划分等价类；代表元取类中第一个算子

    同一类的算子在任何可达状态下产生相同的性质，合成时只需搜索代表元。
    """
    context = context or DistanceContext.build(catalog, working_shape)
    shapes = sorted(context.shapes, key=lambda s: s.dims)
    groups = {}
    for op in catalog:
        groups.setdefault(_op_signature(op, shapes), []).append(op)
    classes = [OpClass(members[0], tuple(members), signature) for signature, members in groups.items()]
    logger.info(f"目录压缩: {len(catalog)} 个算子 -> {len(classes)} 个等价类")
    return classes


def representatives(classes):
    return [c.representative for c in classes]


def diversify(sequence, classes, rng):
    """把每个代表元替换为其等价类中随机的成员"""
    lookup = {c.representative: c for c in classes}
    result = []
    for op in sequence:
        op_class = lookup.get(op)
        if op_class is None:
            result.append(op)
            continue
        result.append(op_class.members[int(rng.integers(len(op_class.members)))])
    return result


# ---- 子图替换 ----

def chain_catalog(input_shape, target, catalog_config=None, synthesis_config=None):
    """以链输入通道为基准构造目录；若目标要求改变通道数，把目标通道加入特征网格"""
    catalog_config = catalog_config or CatalogConfig()
    synthesis_config = synthesis_config or SynthesisConfig()
    extra = ()
    if target.shape is not None and target.shape.channels != input_shape.channels:
        extra = (target.shape.channels,)
    catalog = op_catalog(catalog_config.for_channels(input_shape.channels, extra=extra))
    if not synthesis_config.compress:
        return catalog, None
    context = DistanceContext.build(catalog, input_shape)
    classes = compress_catalog(catalog, input_shape, context)
    return representatives(classes), classes


def synthesize_chains(chain_inputs, targets, rng, catalog_config=None, synthesis_config=None, original_sizes=None):
    """
    对每条顺序链分别运行随机合成并在类内随机替换

    Args:
        chain_inputs: 每条链的输入形状
        targets: 每条链的 TargetSpec
        original_sizes: 每条链原来的算子个数

    Returns:
        list[list[PrimitiveOp]]

    Raises:
        SearchBudgetError: 任一条链没有合成成功
    """
    synthesis_config = synthesis_config or SynthesisConfig()
    original_sizes = original_sizes or [None] * len(targets)
    chains = []
    for index, (input_shape, target, size) in enumerate(zip(chain_inputs, targets, original_sizes)):
        catalog, classes = chain_catalog(input_shape, target, catalog_config, synthesis_config)
        task = SynthesisTask(input_shape, target, catalog, synthesis_config.max_steps, size,
                             synthesis_config.extra_steps, synthesis_config.enumerative_budget)
        result = stochastic_synthesize(task, rng)
        if not result.satisfied:
            raise SearchBudgetError(f"第 {index} 条链合成失败 ({result.outcome.value}: {result.reason})")
        ops = list(result.ops)
        if classes is not None:
            ops = diversify(ops, classes, rng)
        chains.append(ops)
    return chains


def synthesize_replacement(graph, selection, mutated_targets, rng, catalog_config=None, synthesis_config=None):
    """
    分解选区 -> 每条链按变异后的目标合成 -> 用原连接算子重新组装

    Returns:
        (ComputationGraph, list[list[PrimitiveOp]]): 新图和每条链的替换算子
    """
    decomposition = decompose_sequential(graph, selection)
    if len(mutated_targets) != len(decomposition.chains):
        raise ValueError(f"需要 {len(decomposition.chains)} 个链目标, 实际 {len(mutated_targets)} 个")
    shapes = graph.shapes
    chain_inputs = [shapes[graph.node_map[chain[0]].inputs[0]] for chain in decomposition.chains]
    sizes = [len(chain) for chain in decomposition.chains]
    chains = synthesize_chains(chain_inputs, mutated_targets, rng, catalog_config, synthesis_config, sizes)
    new_graph = replace_subgraph(graph, selection, chains, decomposition)
    return new_graph, chains
