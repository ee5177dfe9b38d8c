"""
命令行入口

propsynth 命令组下注册 infer / synth / evolve / oracle-check 四个子命令。

注意: 如果新增命令，必须在 register_commands 中注册。
"""

import click

from propsynth import __version__, configure_logging


@click.group('propsynth')
@click.version_option(__version__, prog_name='propsynth')
@click.option('--log-level', default=None, help='日志级别 (默认读取 PROPSYNTH_LOG)')
@click.option('--log-dir', default=None, type=click.Path(file_okay=False), help='文件日志目录')
def cli(log_level, log_dir):
    """基于程序性质的神经网络计算图合成"""
    configure_logging(log_level, log_dir)


def register_commands(group):
    from propsynth.commands.evolve import evolve_command
    from propsynth.commands.infer import infer_command
    from propsynth.commands.oracle import oracle_command
    from propsynth.commands.synth import synth_command

    group.add_command(infer_command)
    group.add_command(synth_command)
    group.add_command(evolve_command)
    group.add_command(oracle_command)
    return group


register_commands(cli)


def main():
    cli(prog_name='propsynth')
