"""
算子目录服务

主要功能:
- op_catalog: 按 CatalogConfig 的参数网格确定性地枚举具体算子
- catalog_summary: 按算子种类统计目录规模

依赖模型:
- PrimitiveOp, OpKind (models/primitive.py)
- CatalogConfig (config.py)

注意: 如果新增算子种类，必须同步修改这里的枚举顺序和 DESIGN.md 中的默认目录规模。
"""

import logging
from collections import Counter

from propsynth.config import CatalogConfig
from propsynth.models.primitive import OpKind, PrimitiveOp
from propsynth.utils.error_handler import CatalogError, OpSpecError

logger = logging.getLogger(__name__)

_PARAMETERLESS = (
    OpKind.RELU, OpKind.GELU, OpKind.SILU, OpKind.SIGMOID, OpKind.SOFTMAX, OpKind.LAYER_NORM,
)


def _strides(kernel, config):
    if kernel > 1 and config.include_strided:
        return (1, kernel)
    return (1,)


def op_catalog(config=None):
    """
    枚举目录中的全部具体算子 (不含 Add 连接算子)

    Args:
        config: CatalogConfig，为 None 时使用默认网格

    Returns:
        list[PrimitiveOp]: 顺序只取决于 config
    """
    config = config or CatalogConfig()
    features = config.resolved_features()
    if not features:
        raise CatalogError("features 网格为空")
    if not config.kernels:
        raise CatalogError("kernels 网格为空")
    if not config.windows:
        raise CatalogError("windows 网格为空")

    ops = []

    def emit(kind, **params):
        try:
            ops.append(PrimitiveOp.create(kind, **params))
        except OpSpecError as e:
            raise CatalogError(f"目录配置产生了非法算子: {e}")

    for f in features:
        emit(OpKind.DENSE, features=f)
    for f in features:
        for k in config.kernels:
            for s in _strides(k, config):
                emit(OpKind.CONVOLUTION, features=f, kernel=k, stride=s)
    if config.include_grouped:
        for g in config.groups:
            for f in features:
                if f % g:
                    continue
                for k in config.kernels:
                    for s in _strides(k, config):
                        emit(OpKind.GROUPED_CONVOLUTION, features=f, kernel=k, stride=s, groups=g)
    if config.include_dilated:
        for r in config.dilations:
            for f in features:
                for k in config.kernels:
                    if k >= 3 and k % 2 == 1:
                        emit(OpKind.DILATED_CONVOLUTION, features=f, kernel=k, stride=1, dilation=r)

    for value in config.scalar_values:
        emit(OpKind.SCALAR_MULTIPLY, value=value)
    for kind in _PARAMETERLESS:
        emit(kind)
    for momentum in config.batchnorm_momenta:
        emit(OpKind.BATCH_NORM, momentum=momentum)
    for g in config.groups:
        emit(OpKind.GROUP_NORM, groups=g)
    for rate in config.dropout_rates:
        emit(OpKind.DROPOUT, rate=rate)
    for kind in (OpKind.AVERAGE_POOL, OpKind.MAX_POOL):
        for w in config.windows:
            emit(kind, window=w)

    # 去重但保持顺序
    ops = list(dict.fromkeys(ops))
    logger.debug(f"目录共 {len(ops)} 个算子")
    return ops


def catalog_summary(catalog):
    counts = Counter(op.kind.value for op in catalog)
    return {'total': len(catalog), 'by_kind': dict(counts)}
