"""
可计步的理论合成算法

主要功能:
- SteppedTask / MeteredDistance: 一步一步推进的计算，用声明的步数代价计量距离函数
- parallel_search / parallel_progressive_synthesize: 在覆盖集上轮转推进，返回最快完成的满足者
- universal_search / universal_progressive_synthesize: 不需要覆盖集，按阶段在所有字符串上交错执行
- distance_from_algorithm: 由完备可靠的合成算法构造距离函数
- greedy_progressive: 任意领域上的通用贪心，作为对照
- 玩具领域: 计数器领域、成对符号领域，以及 K 效率检查

"并行" 通过确定性的轮转协作调度模拟，步数可重复、可断言。
"""

import itertools
import logging
from collections import deque
from dataclasses import dataclass, field

from propsynth.services.distance_service import INF
from propsynth.services.synthesizer import Outcome
from propsynth.utils.error_handler import PropsynthError, SearchBudgetError

logger = logging.getLogger(__name__)


class SteppedTask:
    """包装一个生成器: 每次 step() 推进一步，生成器 return 的值即结果"""

    def __init__(self, generator):
        self._generator = generator
        self.steps = 0
        self.done = False
        self.value = None

    @classmethod
    def constant(cls, value, cost=1):
        def run():
            for _ in range(max(cost, 1) - 1):
                yield
            return value
        return cls(run())

    @property
    def running(self):
        return not self.done

    def step(self):
        if self.done:
            return
        self.steps += 1
        try:
            next(self._generator)
        except StopIteration as e:
            self.done = True
            self.value = e.value


class MeteredDistance:
    """
    带步数代价的函数: evaluate(*args) 执行 cost(*args) 步后给出 fn(*args)

    直接调用时返回同样的结果，不计步。
    """

    def __init__(self, fn, cost=None):
        self.fn = fn
        self.cost = cost or (lambda *args: 1)

    def __call__(self, *args):
        return self.fn(*args)

    def evaluate(self, *args):
        for _ in range(max(int(self.cost(*args)), 1) - 1):
            yield
        return self.fn(*args)

    def task(self, *args):
        return SteppedTask(self.evaluate(*args))

    def run(self, *args):
        """完整执行一次，返回 (结果, 步数)"""
        task = self.task(*args)
        while task.running:
            task.step()
        return task.value, task.steps


@dataclass
class TheoryResult:
    outcome: Outcome
    ops: tuple = ()
    steps: int = 0
    iterations: int = 0
    distance_trace: list = field(default_factory=list)

    @property
    def satisfied(self):
        return self.outcome is Outcome.SATISFIED


def parallel_search(tasks, max_steps=None):
    """
    轮转推进所有未完成的任务，每轮结束后按下标顺序检查，返回第一个以 True 完成的任务

    Returns:
        (下标, 总步数)
    """
    total = 0
    reported = set()
    while any(t.running for t in tasks):
        for task in tasks:
            if task.running:
                task.step()
                total += 1
        for index, task in enumerate(tasks):
            if task.done and index not in reported:
                reported.add(index)
                if task.value:
                    return index, total
        if max_steps is not None and total >= max_steps:
            break
    raise SearchBudgetError(f"并行搜索在 {total} 步内没有找到满足条件的任务")


def _apply_sequence(apply, state, sequence):
    for op in sequence:
        state = apply(state, op)
    return state


def _improves(metered_d, apply, state, target, transform, threshold, record):
    """计量版本的条件 d(t(p), v) + ε ≤ d_prev；变换不可用时一步返回 False"""
    try:
        after = apply(state, transform)
    except PropsynthError:
        return False
    value = yield from metered_d.evaluate(after, target)
    record[transform] = (after, value)
    return value <= threshold


def parallel_progressive_synthesize(p0, target, metered_d, covering, apply, epsilon=1, max_iterations=10_000):
    d_prev, total = metered_d.run(p0, target)
    trace = [d_prev]
    if d_prev == INF:
        return TheoryResult(Outcome.INFEASIBLE, steps=total, distance_trace=trace)
    state = p0
    chosen = []
    while d_prev > 0:
        if len(chosen) >= max_iterations:
            return TheoryResult(Outcome.FAILED, tuple(chosen), total, len(chosen), trace)
        record = {}
        tasks = [SteppedTask(_improves(metered_d, apply, state, target, t, d_prev - epsilon, record))
                 for t in covering]
        try:
            index, steps = parallel_search(tasks)
        except SearchBudgetError:
            logger.error(f"覆盖集中没有算子能让距离下降: d={d_prev}")
            return TheoryResult(Outcome.FAILED, tuple(chosen), total, len(chosen), trace)
        total += steps
        state, d_prev = record[covering[index]]
        chosen.append(covering[index])
        trace.append(d_prev)
    return TheoryResult(Outcome.SATISFIED, tuple(chosen), total, len(chosen), trace)


def universal_search(alphabet, metered_cond, max_phase=24):
    """
    按阶段 i = 0, 1, ... 交错执行所有字符串上的条件

    第 i 阶段: 先把长度恰为 i 的新实例各运行到 max(i-1, |E|^(i-1)) 步 (i = 0 时为 0)，
    再把长度不超过 i 的全部实例各运行到 max(i, |E|^i) 步；实例按 (长度, 字典序) 轮转。

    Returns:
        (字符串, 总步数)
    """
    alphabet = list(alphabet)
    size = len(alphabet)
    instances = {}
    order = []
    total = 0

    def run_to(strings, limit):
        nonlocal total
        while True:
            progressed = False
            for s in strings:
                task = instances[s]
                if task.done or task.steps >= limit:
                    continue
                task.step()
                total += 1
                progressed = True
                if task.done and task.value:
                    return s
            if not progressed:
                return None

    for phase in range(max_phase + 1):
        fresh = [tuple(s) for s in itertools.product(alphabet, repeat=phase)]
        for s in fresh:
            instances[s] = metered_cond.task(s)
        order.extend(fresh)
        catch_up = 0 if phase == 0 else max(phase - 1, size ** (phase - 1))
        found = run_to(fresh, catch_up)
        if found is None:
            found = run_to(order, max(phase, size ** phase))
        if found is not None:
            return found, total
    raise SearchBudgetError(f"通用搜索在 {max_phase} 个阶段内没有找到满足条件的字符串")


def universal_bound(alphabet_size, depth, verify_steps):
    """通用搜索的步数上界 2·S²·|E|^(2D+1) + (D+S)²"""
    return 2 * verify_steps ** 2 * alphabet_size ** (2 * depth + 1) + (depth + verify_steps) ** 2


def universal_progressive_synthesize(p0, target, metered_d, alphabet, apply, max_iterations=10_000, max_phase=24):
    d_prev, total = metered_d.run(p0, target)
    trace = [d_prev]
    if d_prev == INF:
        return TheoryResult(Outcome.INFEASIBLE, steps=total, distance_trace=trace)
    state = p0
    chosen = []
    iterations = 0
    while d_prev > 0:
        if iterations >= max_iterations:
            return TheoryResult(Outcome.FAILED, tuple(chosen), total, iterations, trace)
        record = {}
        current, threshold = state, d_prev

        def cond(sequence):
            try:
                after = _apply_sequence(apply, current, sequence)
            except PropsynthError:
                return False
            value = metered_d(after, target)
            record[sequence] = (after, value)
            return value < threshold

        def cost(sequence):
            try:
                after = _apply_sequence(apply, current, sequence)
            except PropsynthError:
                return 1
            return metered_d.cost(after, target)

        try:
            sequence, steps = universal_search(alphabet, MeteredDistance(cond, cost), max_phase)
        except SearchBudgetError:
            return TheoryResult(Outcome.FAILED, tuple(chosen), total, iterations, trace)
        total += steps
        iterations += 1
        state, d_prev = record[sequence]
        chosen.extend(sequence)
        trace.append(d_prev)
    return TheoryResult(Outcome.SATISFIED, tuple(chosen), total, iterations, trace)


def distance_from_algorithm(algorithm):
    """d(p, v) = INF (算法判定不可行时)，否则为算法输出的长度"""
    def distance(state, target):
        result = algorithm(state, target)
        return INF if result is None else len(result)
    return distance


def greedy_progressive(p0, target, distance, ops, apply, max_steps=10_000):
    d_prev = distance(p0, target)
    trace = [d_prev]
    if d_prev == INF:
        return TheoryResult(Outcome.INFEASIBLE, distance_trace=trace)
    state = p0
    chosen = []
    evaluations = 0
    while d_prev > 0:
        if len(chosen) >= max_steps:
            return TheoryResult(Outcome.FAILED, tuple(chosen), evaluations, len(chosen), trace)
        best = None
        for op in ops:
            evaluations += 1
            try:
                after = apply(state, op)
            except PropsynthError:
                continue
            value = distance(after, target)
            if best is None or value < best[2]:
                best = (op, after, value)
        if best is None or best[2] >= d_prev:
            return TheoryResult(Outcome.FAILED, tuple(chosen), evaluations, len(chosen), trace)
        chosen.append(best[0])
        state, d_prev = best[1], best[2]
        trace.append(d_prev)
    return TheoryResult(Outcome.SATISFIED, tuple(chosen), evaluations, len(chosen), trace)


# ---- 玩具领域 ----

class CounterDomain:
    """整数计数器: 算子 +1 / +2，目标为恰好等于 v"""

    ops = (1, 2)

    @staticmethod
    def apply(state, op):
        return state + op

    @staticmethod
    def algorithm(state, target):
        # 尽量多用 +2，余数用 +1；超过目标则不可行
        if state > target:
            return None
        gap = target - state
        return (2,) * (gap // 2) + (1,) * (gap % 2)

    @classmethod
    def distance(cls):
        return distance_from_algorithm(cls.algorithm)

    @classmethod
    def metered_distance(cls):
        # 算法的步数 = 输出长度 + 1
        return MeteredDistance(cls.distance(), lambda state, target: (len(cls.algorithm(state, target) or ()) + 1))


class PairedSymbolDomain:
    """
    由 'a' / 'b' 组成的字符串，目标为 'ab' 的出现次数至少为 v

    从不以 'a' 结尾的状态出发，单个符号不会让距离下降，只有两个符号的 "ab" 能推进。
    """

    ops = ('a', 'b')

    @staticmethod
    def apply(state, op):
        return state + op

    @staticmethod
    def distance(state, target):
        return max(0, target - state.count('ab'))

    @classmethod
    def metered_distance(cls):
        return MeteredDistance(cls.distance, lambda state, target: len(state) + 1)


def shortest_solution(p0, target, distance, ops, apply, max_length=12):
    """广度优先搜索最短的满足序列，找不到时返回 None"""
    queue = deque([(p0, ())])
    seen = {p0}
    while queue:
        state, sequence = queue.popleft()
        if distance(state, target) == 0:
            return sequence
        if len(sequence) >= max_length:
            continue
        for op in ops:
            try:
                after = apply(state, op)
            except PropsynthError:
                continue
            if after not in seen:
                seen.add(after)
                queue.append((after, sequence + (op,)))
    return None


def k_efficiency_check(cases, synthesize, distance, ops, apply, slack=0, max_length=12):
    """
    检查算法输出长度不超过最短解 + slack

    Args:
        cases: [(初始状态, 目标)]
        synthesize: (p0, target) -> TheoryResult

    Returns:
        list: 违反条件的 (初始状态, 目标, 输出长度, 最短长度)
    """
    violations = []
    for p0, target in cases:
        best = shortest_solution(p0, target, distance, ops, apply, max_length)
        result = synthesize(p0, target)
        if best is None:
            if result.satisfied:
                violations.append((p0, target, len(result.ops), None))
            continue
        if not result.satisfied or len(result.ops) > len(best) + slack:
            violations.append((p0, target, len(result.ops), len(best)))
    return violations
