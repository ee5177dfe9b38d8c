"""
evolve 命令: 从种子计算图出发运行多目标演化，写出历史、计算图和 Pareto 前沿
"""

import logging
from dataclasses import replace

import click
import numpy as np

from propsynth.commands.base import guarded, load_run_config, prepare_out_dir
from propsynth.services.evaluation_service import get_evaluator
from propsynth.services.evolution_service import evolve
from propsynth.services.graph_service import ensure_valid
from propsynth.utils.serialization import read_graph

logger = logging.getLogger(__name__)


def _summary(record):
    if record.get('status') != 'evaluated':
        return f"trial {record['trial']}: {record['status']} (parent {record['parent']})"
    metrics = record['metrics']
    return (f"trial {record['trial']}: {record['id']} <- {record['parent']} "
            f"accuracy_proxy={metrics['accuracy_proxy']:.4f} params={metrics['params']} "
            f"flops={metrics['flops']}")


@click.command('evolve')
@click.argument('seed_graph', type=click.Path(dir_okay=False))
@click.option('--seed', type=int, required=True, help='随机种子 (必填)')
@click.option('--trials', type=int, default=None, help='覆盖配置中的演化轮数')
@click.option('--config', 'config_file', type=click.Path(dir_okay=False), default=None)
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), default=None)
@guarded('evolve')
def evolve_command(seed_graph, seed, trials, config_file, out_dir):
    """多目标演化搜索"""
    graph = ensure_valid(read_graph(seed_graph))
    config = load_run_config(config_file, seed)
    if trials is not None:
        config = replace(config, evolution=replace(config.evolution, trials=trials)).validate()

    history = evolve(graph, get_evaluator(config.evaluator), np.random.default_rng(config.seed),
                     config, prepare_out_dir(out_dir), on_record=lambda record: click.echo(_summary(record)))
    secondary = config.evolution.secondaries[0]
    front = history.front(secondary)
    click.echo(f"pareto front ({config.evolution.primary} vs {secondary}): "
               + ', '.join(ind.id for ind in front))
