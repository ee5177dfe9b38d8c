"""
oracle-check 命令: 抽象语义与具体参考实现的交叉检查，有违反时退出码为 5
"""

import os

import click

from propsynth.commands.base import guarded, load_run_config, parse_shape_option, prepare_out_dir
from propsynth.models.shape import TensorShape
from propsynth.services.catalog_service import op_catalog
from propsynth.services.oracle_service import run_oracle_suite
from propsynth.utils.error_handler import EXIT_ORACLE_VIOLATION


@click.command('oracle-check')
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--shape', 'shape_text', default='1,6,6,8', show_default=True, help='检查使用的输入形状')
@click.option('--chains', type=int, default=20, show_default=True, help='随机算子链个数')
@click.option('--corrupt', default=None, help='故障注入: 把该种算子的抽象语义替换为全 ●')
@click.option('--config', 'config_file', type=click.Path(dir_okay=False), default=None)
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), default=None)
@guarded('oracle-check')
def oracle_command(seed, shape_text, chains, corrupt, config_file, out_dir):
    """抽象/具体语义交叉检查"""
    shape = TensorShape(parse_shape_option(shape_text))
    config = load_run_config(config_file, seed)
    catalog = op_catalog(config.catalog.for_channels(shape.channels))
    report = run_oracle_suite(catalog, shape, chains, seed, corrupt)
    text = report.render()
    click.echo(text, nl=False)
    if prepare_out_dir(out_dir):
        with open(os.path.join(out_dir, 'oracle_report.txt'), 'w', encoding='utf-8') as f:
            f.write(text)
    if not report.ok:
        raise SystemExit(EXIT_ORACLE_VIOLATION)
