"""
多目标演化服务

主要功能:
- evolve: 种子个体评估两次 (不同评估种子) 后，每轮 Pareto 选择父个体 -> 变异 -> 评估 -> 加入种群
- EvolutionHistory: 种群、每轮记录，以及按次要目标计算的 Pareto 前沿
- 输出目录: history.jsonl (每轮一行，无时间戳)、graphs/<id>.json、pareto.csv

变异失败或评估失败都会消耗一轮，但不会产生新个体；两种失败都会写入历史。
"""

import csv
import json
import logging
import os
from dataclasses import dataclass, field

from propsynth.config import RunConfig
from propsynth.models.individual import OBJECTIVES, Individual
from propsynth.services.graph_service import retag_blocks
from propsynth.services.mutation_service import mutate_graph
from propsynth.services.pareto_service import pareto_front, select
from propsynth.utils.error_handler import EvaluationError
from propsynth.utils.serialization import write_graph

logger = logging.getLogger(__name__)

_SEED_BOUND = 2 ** 31


@dataclass
class EvolutionHistory:
    primary: str
    secondaries: tuple
    population: list = field(default_factory=list)
    records: list = field(default_factory=list)

    def front(self, secondary=None):
        return pareto_front(self.population, self.primary, secondary or self.secondaries[0])

    def individual(self, individual_id):
        for ind in self.population:
            if ind.id == individual_id:
                return ind
        raise KeyError(individual_id)


class _Output:
    """把演化过程写入输出目录 (out_dir 为 None 时不写文件)，每条记录同时交给 on_record"""

    def __init__(self, out_dir, on_record=None):
        self.out_dir = out_dir
        self.on_record = on_record
        if out_dir is None:
            return
        os.makedirs(os.path.join(out_dir, 'graphs'), exist_ok=True)
        self._history = open(os.path.join(out_dir, 'history.jsonl'), 'w', encoding='utf-8')

    def record(self, record, individual=None):
        if self.out_dir is not None:
            self._history.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + '\n')
            self._history.flush()
            if individual is not None:
                write_graph(individual.graph, os.path.join(self.out_dir, 'graphs', f"{individual.id}.json"))
        if self.on_record is not None:
            self.on_record(record)

    def finish(self, history):
        if self.out_dir is None:
            return
        self._history.close()
        write_pareto_csv(history, os.path.join(self.out_dir, 'pareto.csv'))


def write_pareto_csv(history, path):
    """每个次要目标下的 Pareto 前沿各占若干行"""
    objectives = list(OBJECTIVES)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['secondary', 'id', 'parent'] + objectives)
        for secondary in history.secondaries:
            for ind in history.front(secondary):
                writer.writerow([secondary, ind.id, ind.parent_id or ''] +
                                [ind.metrics.get(name, '') for name in objectives])


def _evaluate(evaluator, graph, seed):
    try:
        metrics = evaluator(graph, seed)
    except Exception as e:
        raise EvaluationError(f"评估失败: {e}") from e
    missing = [name for name in OBJECTIVES if name not in metrics]
    if missing:
        raise EvaluationError(f"评估结果缺少目标: {missing}")
    return dict(metrics)


def evolve(seed_graph, evaluator, rng, config=None, out_dir=None, on_record=None):
    """
    运行 config.evolution.trials 轮演化

    Args:
        seed_graph: 初始计算图 (通常是已知的好结构)
        evaluator: (graph, seed) -> {accuracy_proxy, flops, params, throughput_proxy}
        rng: numpy Generator，决定选择、变异和评估种子
        on_record: 每写入一条历史记录时调用 on_record(record)，用于逐轮输出进度

    Returns:
        EvolutionHistory
    """
    config = config or RunConfig()
    evo = config.evolution
    seed_graph = retag_blocks(seed_graph)
    history = EvolutionHistory(evo.primary, tuple(evo.secondaries))
    output = _Output(out_dir, on_record)

    for index in range(2):
        eval_seed = int(rng.integers(_SEED_BOUND))
        metrics = _evaluate(evaluator, seed_graph, eval_seed)
        ind = Individual(f"seed-{index}", seed_graph, metrics, None, {}, -1)
        history.population.append(ind)
        record = dict(ind.to_dict(), status='evaluated', eval_seed=eval_seed)
        history.records.append(record)
        output.record(record, ind)
    logger.info(f"[TRIAL] seed metrics={history.population[0].metrics}")

    for trial in range(evo.trials):
        parent = select(history.population, evo.primary, evo.secondaries, evo.k_percent, rng)
        child_graph, mutation = mutate_graph(parent.graph, rng, config.mutation, config.catalog, config.synthesis)
        record = {'trial': trial, 'parent': parent.id, 'mutation': mutation.to_dict()}

        if child_graph is None:
            logger.info(f"[MUTATION_FAILED] trial={trial} parent={parent.id} "
                        f"kind={mutation.kind} reason={mutation.reason}")
            record['status'] = 'mutation_failed'
            history.records.append(record)
            output.record(record)
            continue

        eval_seed = int(rng.integers(_SEED_BOUND))
        try:
            metrics = _evaluate(evaluator, child_graph, eval_seed)
        except EvaluationError as e:
            logger.warning(f"[EVAL_FAILED] trial={trial} parent={parent.id}: {e}")
            record.update(status='eval_failed', error=str(e))
            history.records.append(record)
            output.record(record)
            continue

        child = Individual(f"ind-{trial:04d}", child_graph, metrics, parent.id, mutation.to_dict(), trial)
        history.population.append(child)
        record = dict(child.to_dict(), status='evaluated', eval_seed=eval_seed)
        history.records.append(record)
        output.record(record, child)
        logger.info(f"[TRIAL] trial={trial} parent={parent.id} kind={mutation.kind} "
                    f"{evo.primary}={metrics[evo.primary]:.4f} nodes={len(child_graph.nodes)}")

    output.finish(history)
    return history
