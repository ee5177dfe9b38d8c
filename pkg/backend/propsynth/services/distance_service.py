"""
抽象距离服务

主要功能:
- d_mixing / d_depth / d_shape / d_total: 三种性质的距离及其和 (不可达时为 INF)
- DistanceContext: 针对一个合成任务预计算的可达性信息 (混合闭包、降采样因子、可设置通道数)
- feasible_mixing: 混合性质的最小不动点可达性检查
- covering_check / monotonicity_check: 覆盖性与单调性抽样检查
- strengthen_distance: 弱覆盖距离的加强构造

依赖模型:
- MixingMatrix, mix_compose, mix_star (models/lattice.py)
- op_abstract_semantics (services/property_inference.py)
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from propsynth.models.lattice import MixingMatrix, mix_compose, mix_join_all, mix_star
from propsynth.models.primitive import window_geometry
from propsynth.services.property_inference import append_abstract, op_abstract_semantics
from propsynth.utils.error_handler import ShapeError

logger = logging.getLogger(__name__)

INF = math.inf

# 可达形状搜索上限
_MAX_REACHABLE_SHAPES = 4096


def d_mixing(u, v, context=None, shape=None, target_shape=None):
    """
    不足元素个数；给出 context 和当前形状时，加上先换到某个可达形状的步数
    与该形状下单步仍无法补足的元素个数之和的最小值，当前形状出发不可达时为 INF

    Args:
        shape: 当前状态的张量形状
        target_shape: 目标形状，给出时只考虑仍能到达目标形状的中间形状
    """
    if u.shape != v.shape:
        return INF
    deficient = u.deficient_entries(v)
    if deficient == 0 or context is None:
        return deficient
    if shape is None or shape not in context.transitions:
        return deficient if context.feasible_mixing(u, v) else INF
    return context.mixing_distance(u, v, shape, target_shape)


def d_depth(u, v):
    return max(0, v - u)


def spatial_ratio(a, b):
    """空间维的统一缩小倍数；不可整除或各维倍数不同时返回 None"""
    ratios = set()
    for a_i, b_i in zip(a.spatial, b.spatial):
        if b_i > a_i or a_i % b_i:
            return None
        ratios.add(a_i // b_i)
    if len(ratios) > 1:
        return None
    return ratios.pop() if ratios else 1


def d_shape(a, b, context=None):
    if a.rank != b.rank or a.batch != b.batch:
        return INF
    ratio = spatial_ratio(a, b)
    if ratio is None:
        return INF
    channel_gap = 0 if a.channels == b.channels else 1
    if context is not None:
        if ratio > 1 and not context.can_downsample(ratio):
            return INF
        if channel_gap and b.channels not in context.channels:
            return INF
    return channel_gap + sum(a_i // b_i - 1 for a_i, b_i in zip(a.spatial, b.spatial))


def distance_components(state, target, context=None):
    """各分量距离；目标缺失的分量记为 0"""
    components = {'mixing': 0, 'depth': 0, 'shape': 0}
    if target.mixing is not None:
        components['mixing'] = d_mixing(state.mixing, target.mixing, context, state.shape, target.shape)
    if target.depth is not None:
        components['depth'] = d_depth(state.depth.count, target.depth)
    if target.shape is not None:
        components['shape'] = d_shape(state.shape, target.shape, context)
    components['total'] = sum(components.values())
    return components


def d_total(state, target, context=None):
    return distance_components(state, target, context)['total']


@lru_cache(maxsize=None)
def _factorable(ratio, windows):
    if ratio == 1:
        return True
    return any(ratio % w == 0 and _factorable(ratio // w, windows) for w in windows)


@dataclass(frozen=True)
class DistanceContext:
    """
    一个合成任务的可达性信息

    transitions: 形状 -> 单步可达的形状
    shape_generators: 形状 -> 该形状下所有算子混合矩阵的并
    """
    shapes: frozenset
    generator: MixingMatrix
    closure: MixingMatrix
    windows: tuple
    channels: frozenset
    generators: tuple = field(default=())
    transitions: dict = field(default_factory=dict, compare=False, repr=False)
    shape_generators: dict = field(default_factory=dict, compare=False, repr=False)
    _memo: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def build(cls, catalog, shape):
        """从 shape 出发广度优先搜索所有可达形状，收集混合生成元与形状能力"""
        simple_ops = [op for op in catalog if op.is_simple]
        rank = shape.rank
        seen = {shape}
        frontier = [shape]
        matrices = []
        transitions = {}
        shape_generators = {}
        while frontier:
            next_frontier = []
            for current in frontier:
                outs = []
                local = []
                for op in simple_ops:
                    try:
                        semantics = op_abstract_semantics(op, current)
                    except ShapeError:
                        continue
                    local.append(semantics.mixing)
                    out = semantics.output_shape
                    if out not in seen:
                        if len(seen) >= _MAX_REACHABLE_SHAPES:
                            logger.warning(f"可达形状超过 {_MAX_REACHABLE_SHAPES} 个, 停止扩展")
                            continue
                        seen.add(out)
                        next_frontier.append(out)
                    outs.append(out)
                matrices.extend(local)
                transitions[current] = tuple(dict.fromkeys(outs))
                shape_generators[current] = mix_join_all(local, rank, rank)
            frontier = next_frontier

        generator = mix_join_all(matrices, rank, rank)
        windows = set()
        channels = set()
        for op in simple_ops:
            geometry = window_geometry(op)
            if geometry is not None and geometry[1] > 1:
                windows.add(geometry[1])
            if op.get('features') is not None:
                channels.add(op.get('features'))
        unique = tuple(dict.fromkeys(matrices))
        return cls(frozenset(seen), generator, mix_star(generator), tuple(sorted(windows)),
                   frozenset(channels), unique, transitions, shape_generators)

    def feasible_mixing(self, u, v, shape=None, target_shape=None):
        """不给 shape 时用所有可达形状上的闭包；给出时只用从 shape 出发还能走到的形状"""
        if shape is None or shape not in self.transitions:
            return v <= mix_compose(self.closure, u)
        return v <= mix_compose(self.closure_from(shape, target_shape), u)

    def can_downsample(self, ratio):
        return _factorable(ratio, self.windows)

    def steps_from(self, shape, target_shape=None):
        """
        从 shape 出发到各可达形状的最少算子数

        给出 target_shape 时跳过到不了目标形状的中间形状 (形状距离为 INF)。
        """
        key = ('steps', shape, target_shape)
        if key not in self._memo:
            steps = {shape: 0}
            queue = deque([shape])
            while queue:
                current = queue.popleft()
                for out in self.transitions.get(current, ()):
                    if out in steps:
                        continue
                    if target_shape is not None and d_shape(out, target_shape, self) == INF:
                        continue
                    steps[out] = steps[current] + 1
                    queue.append(out)
            self._memo[key] = steps
        return self._memo[key]

    def closure_from(self, shape, target_shape=None):
        key = ('closure', shape, target_shape)
        if key not in self._memo:
            reachable = self.steps_from(shape, target_shape)
            generator = mix_join_all([self.shape_generators[s] for s in reachable if s in self.shape_generators],
                                     shape.rank, shape.rank)
            self._memo[key] = mix_star(generator)
        return self._memo[key]

    def _unfixable(self, u, need, target, shape):
        """need 中在 shape 下任何单个算子都补不足的元素"""
        reach = mix_compose(self.shape_generators[shape], u)
        return need & (reach.data < target.data)

    def mixing_distance(self, u, v, shape, target_shape=None):
        need = v.data > u.data
        deficient = int(np.count_nonzero(need))
        if not self._unfixable(u, need, v, shape).any():
            return deficient
        if not self.feasible_mixing(u, v, shape, target_shape):
            return INF
        # 例: 8×8 上没有算子能让空间维全耦合，先降采样到卷积核能覆盖的尺寸
        detour = min(
            steps + int(np.count_nonzero(self._unfixable(u, need, v, s)))
            for s, steps in self.steps_from(shape, target_shape).items()
            if s in self.shape_generators
        )
        return deficient + detour


def feasible_mixing(u0, v, catalog, shape):
    """
    最小不动点 U* = U ⊔ α(e)×U (对所有算子 e 和所有可达形状) 上的可达性

    格有限，迭代必然终止。
    """
    if u0.shape != v.shape:
        return False
    context = DistanceContext.build(catalog, shape)
    current = u0
    while True:
        updated = current
        for matrix in context.generators:
            updated = updated.join(mix_compose(matrix, updated))
        if updated == current:
            break
        current = updated
    return v <= current


# ---- 覆盖性与单调性 ----

@dataclass
class CoveringReport:
    checked: int = 0
    uncovered: list = field(default_factory=list)  # (state, target, d)
    violations: list = field(default_factory=list)  # (op label, 分量, 之前, 之后)

    @property
    def ok(self):
        return not self.uncovered and not self.violations


def _monotonicity_violations(op, state, target, after):
    found = []
    if target.mixing is not None and state.mixing.shape == target.mixing.shape:
        before_m = state.mixing.deficient_entries(target.mixing)
        after_m = after.mixing.deficient_entries(target.mixing)
        if after_m > before_m:
            found.append((op.label(), 'mixing', before_m, after_m))
    if target.depth is not None:
        before_d = d_depth(state.depth.count, target.depth)
        after_d = d_depth(after.depth.count, target.depth)
        if after_d > before_d:
            found.append((op.label(), 'depth', before_d, after_d))
    return found


def covering_check(catalog, samples, epsilon=1, context=None):
    """
    对每个 0 < d < INF 的样本 (state, target)，检查是否存在使 d_total 至少下降 epsilon 的算子，
    并记录任何使 d_mixing 或 d_depth 增大的单输入算子。
    """
    report = CoveringReport()
    for state, target in samples:
        ctx = context or DistanceContext.build(catalog, state.shape)
        d = d_total(state, target, ctx)
        report.violations.extend(monotonicity_check(catalog, [(state, target)]))
        if d == 0 or d == INF:
            continue
        report.checked += 1
        progress = False
        for op in catalog:
            if not op.is_simple:
                continue
            try:
                after = append_abstract(state, op)
            except ShapeError:
                continue
            if d_total(after, target, ctx) + epsilon <= d:
                progress = True
                break
        if not progress:
            report.uncovered.append((state, target, d))
    return report


def monotonicity_check(catalog, samples):
    """返回所有使 d_mixing 或 d_depth 增大的 (算子, 分量, 之前, 之后)"""
    violations = []
    for state, target in samples:
        for op in catalog:
            if not op.is_simple:
                continue
            try:
                after = append_abstract(state, op)
            except ShapeError:
                continue
            violations.extend(_monotonicity_violations(op, state, target, after))
    return violations


def strengthen_distance(distance, epsilon=1):
    """d'(x) = 0 (d(x) = 0 时)，否则 d(x) + epsilon"""
    def strengthened(*args, **kwargs):
        value = distance(*args, **kwargs)
        return 0 if value == 0 else value + epsilon
    return strengthened

