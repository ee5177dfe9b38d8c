"""
命令共用的工具: 配置加载、错误到退出码的转换、输出目录
"""

import functools
import logging
import os
from dataclasses import replace

import click

from propsynth.config import RunConfig
from propsynth.utils.error_handler import ErrorHandler, PropsynthError

logger = logging.getLogger(__name__)


def load_run_config(path, seed=None):
    config = RunConfig.from_file(path) if path else RunConfig().validate()
    if seed is not None:
        config = replace(config, seed=seed)
    return config


def guarded(context):
    """把引擎异常转换为消息 + 退出码，命令体只需要处理成功路径"""
    def decorator(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except (PropsynthError, ValueError) as e:
                code, message = ErrorHandler.handle(e, context)
                logger.debug(f"{context} 失败", exc_info=True)
                click.echo(message, err=True)
                raise SystemExit(code)
        return wrapper
    return decorator


def prepare_out_dir(out_dir):
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    return out_dir


def parse_shape_option(value):
    try:
        dims = tuple(int(v) for v in value.split(','))
    except ValueError:
        raise click.BadParameter(f"形状应为逗号分隔的整数, 实际为 {value!r}")
    return dims
