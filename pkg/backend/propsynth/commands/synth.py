"""
synth 命令: 从输入形状出发合成满足目标文件的算子链

退出码: 满足 0，不可行 3，失败 4。--out 给出时写入 graph.json 和 trace.json。
"""

import json
import logging
import os
from dataclasses import replace

import click
import numpy as np

from propsynth.commands.base import guarded, load_run_config, prepare_out_dir
from propsynth.services.graph_service import chain_graph
from propsynth.services.synthesizer import SYNTHESIZERS, SynthesisTask, chain_catalog, diversify, synthesize
from propsynth.utils.error_handler import EXIT_INFEASIBLE, EXIT_OK, EXIT_SYNTHESIS_FAILED
from propsynth.utils.serialization import read_target, target_to_dict, write_graph

logger = logging.getLogger(__name__)


def run_synthesis(input_shape, target, config, mode='greedy'):
    """按运行配置构造目录与任务并合成；返回 (SynthesisResult, 最终算子列表)"""
    rng = np.random.default_rng(config.seed)
    catalog, classes = chain_catalog(input_shape, target, config.catalog, config.synthesis)
    synthesis = config.synthesis
    task = SynthesisTask(input_shape, target, catalog, synthesis.max_steps, None,
                         synthesis.extra_steps, synthesis.enumerative_budget)
    result = synthesize(task, mode, rng)
    ops = list(result.ops)
    if result.satisfied and classes is not None:
        ops = diversify(ops, classes, rng)
    return result, ops


@click.command('synth')
@click.argument('target_file', type=click.Path(dir_okay=False))
@click.option('--seed', type=int, required=True, help='随机种子 (必填)')
@click.option('--mode', type=click.Choice(sorted(SYNTHESIZERS)), default='greedy', show_default=True)
@click.option('--no-compress', is_flag=True, help='不压缩目录，直接在全部算子上搜索')
@click.option('--config', 'config_file', type=click.Path(dir_okay=False), default=None)
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), default=None)
@guarded('synth')
def synth_command(target_file, seed, mode, no_compress, config_file, out_dir):
    """合成满足目标性质的算子链"""
    input_shape, target = read_target(target_file)
    config = load_run_config(config_file, seed)
    if no_compress:
        config = replace(config, synthesis=replace(config.synthesis, compress=False))

    result, ops = run_synthesis(input_shape, target, config, mode)
    click.echo(f"outcome: {result.outcome.value}" + (f" ({result.reason})" if result.reason else ''))
    click.echo(f"distance trace: {' -> '.join(str(d) for d in result.distance_trace)}")
    click.echo(f"distance evaluations: {result.distance_evaluations}")
    for index, op in enumerate(ops, start=1):
        click.echo(f"  {index}. {op.label()}")

    if prepare_out_dir(out_dir):
        trace = dict(result.to_dict(), ops=[op.to_dict() for op in ops], mode=mode, seed=seed,
                     task=target_to_dict(input_shape, target))
        with open(os.path.join(out_dir, 'trace.json'), 'w', encoding='utf-8') as f:
            json.dump(trace, f, indent=2, sort_keys=True, ensure_ascii=False)
            f.write('\n')
        if result.satisfied:
            write_graph(chain_graph(ops, input_shape), os.path.join(out_dir, 'graph.json'))

    if result.satisfied:
        raise SystemExit(EXIT_OK)
    raise SystemExit(EXIT_INFEASIBLE if result.infeasible else EXIT_SYNTHESIS_FAILED)
