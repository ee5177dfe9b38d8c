"""
propsynth: 基于程序性质的神经网络计算图合成引擎

主要功能:
- 计算图中间表示、算子目录、子图选择与替换 (models/, services/graph_service.py)
- 混合/深度/形状三种性质的抽象解释 (services/property_inference.py)
- 基于距离的渐进式合成与目录压缩 (services/synthesizer.py)
- 多目标演化搜索 (services/evolution_service.py)
- 命令行入口 (commands/)
"""

import logging
import os

__version__ = '0.3.0'

LOG_FORMAT = '%(asctime)s [%(levelname)s] %(name)s: %(message)s'

# 逐步合成轨迹使用的 logger 名称
STEP_TRACE_LOGGER = 'propsynth.services.synthesizer.trace'


class StepTraceFilter(logging.Filter):
    """只在 DEBUG 级别放行逐步合成轨迹，其他记录原样通过"""

    def __init__(self, root_level):
        super().__init__()
        self.root_level = root_level

    def filter(self, record):
        if record.name.startswith(STEP_TRACE_LOGGER):
            return self.root_level <= logging.DEBUG
        return True


def configure_logging(level=None, log_dir=None):
    """配置包级日志: 控制台 + 可选的文件日志"""
    from propsynth import config

    level_name = (level or config.PROPSYNTH_LOG or 'WARNING').upper()
    numeric_level = logging.getLevelName(level_name)
    if not isinstance(numeric_level, int):
        numeric_level = logging.WARNING

    package_logger = logging.getLogger('propsynth')
    package_logger.setLevel(numeric_level)
    for handler in list(package_logger.handlers):
        package_logger.removeHandler(handler)

    console_handler = logging.StreamHandler()
    console_handler.setFormatter(logging.Formatter(LOG_FORMAT))
    console_handler.addFilter(StepTraceFilter(numeric_level))
    package_logger.addHandler(console_handler)

    log_dir = log_dir or config.PROPSYNTH_LOG_DIR
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        file_handler = logging.FileHandler(os.path.join(log_dir, 'propsynth.log'))
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        file_handler.addFilter(StepTraceFilter(numeric_level))
        package_logger.addHandler(file_handler)

    # 语义缓存的命中日志太多，提高到 WARNING
    logging.getLogger('propsynth.utils.semantics_cache').setLevel(logging.WARNING)
    package_logger.propagate = False
    return package_logger
