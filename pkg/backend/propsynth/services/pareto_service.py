"""
Pareto 选择服务

所有目标先统一为"越大越好" (最小化目标取负)，点记为 (次要目标 x, 主要目标 y)。
Pareto 权重是点到 Pareto 折线的 ℓ2 距离，x 轴按端点连线斜率的绝对值归一化；
Pareto 最优点的权重恰好为 0。
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)


def dominates(a, b):
    return a[0] >= b[0] and a[1] >= b[1] and (a[0] > b[0] or a[1] > b[1])


def non_dominated(points):
    unique = list(dict.fromkeys((float(x), float(y)) for x, y in points))
    front = [p for p in unique if not any(dominates(q, p) for q in unique)]
    return sorted(front)


@dataclass(frozen=True)
class ParetoContext:
    front: tuple  # 按 x 升序的 Pareto 最优点
    slope: float  # 端点连线斜率的绝对值；单点时为 None

    @classmethod
    def build(cls, points):
        front = tuple(non_dominated(points))
        if len(front) < 2:
            return cls(front, None)
        (x0, y0), (x1, y1) = front[0], front[-1]
        return cls(front, abs((y1 - y0) / (x1 - x0)))

    def weight(self, point):
        point = (float(point[0]), float(point[1]))
        if not self.front:
            return 0.0
        if not any(dominates(q, point) for q in self.front):
            return 0.0
        if self.slope is None:
            # 只有一个最优点 (如次要目标为常数) 时退化为 L1 距离
            x, y = self.front[0]
            return abs(point[0] - x) + abs(point[1] - y)
        curve = np.array([(x * self.slope, y) for x, y in self.front])
        target = np.array([point[0] * self.slope, point[1]])
        return float(min(_segment_distance(target, a, b) for a, b in zip(curve[:-1], curve[1:])))


def _segment_distance(p, a, b):
    direction = b - a
    length = float(direction @ direction)
    t = 0.0 if length == 0 else min(1.0, max(0.0, float((p - a) @ direction) / length))
    return float(np.linalg.norm(p - (a + t * direction)))


def _point(individual, primary, secondary):
    return individual.objective(secondary), individual.objective(primary)


def pareto_weights(population, primary, secondary):
    context = ParetoContext.build([_point(ind, primary, secondary) for ind in population])
    return [context.weight(_point(ind, primary, secondary)) for ind in population]


def top_k(population, primary, secondary, k_percent):
    """按 Pareto 权重稳定排序后取前 ceil(k% · n) 个 (至少 1 个)"""
    weights = pareto_weights(population, primary, secondary)
    order = np.argsort(np.array(weights), kind='stable')
    count = max(1, math.ceil(k_percent / 100.0 * len(population)))
    return [population[int(i)] for i in order[:count]]


def select(population, primary, secondaries, k_percent, rng):
    """随机选一个次要目标，在该目标下 Pareto 权重最小的前 k% 中均匀抽取一个个体"""
    if not population:
        raise ValueError("种群为空")
    if len(population) == 1:
        return population[0]
    secondary = secondaries[int(rng.integers(len(secondaries)))]
    candidates = top_k(population, primary, secondary, k_percent)
    return candidates[int(rng.integers(len(candidates)))]


def pareto_front(individuals, primary, secondary):
    """Pareto 最优个体，按次要目标 (统一方向后) 升序；同一点只保留第一个个体"""
    front = set(non_dominated([_point(ind, primary, secondary) for ind in individuals]))
    result = {}
    for ind in individuals:
        point = tuple(float(v) for v in _point(ind, primary, secondary))
        if point in front and point not in result:
            result[point] = ind
    return [result[p] for p in sorted(result)]
