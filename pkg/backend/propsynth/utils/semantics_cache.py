"""
抽象语义缓存

按 (算子规格, 输入形状) 缓存每个算子的抽象语义；形状推断失败也会被缓存，
再次查询时重新抛出同一个 ShapeError。
"""

import logging
import threading

logger = logging.getLogger(__name__)

# 缓存已计算的抽象语义
_semantics_cache = {}
_cache_lock = threading.Lock()
_stats = {'hits': 0, 'misses': 0}


def get_semantics(op, shape, compute):
    """
    获取 (op, shape) 的抽象语义，未命中时调用 compute(op, shape)

    Args:
        op: PrimitiveOp
        shape: 输入 TensorShape
        compute: 计算函数，失败时抛出 ShapeError

    Returns:
        AbstractOpSemantics
    """
    key = (op, shape)
    with _cache_lock:
        cached = _semantics_cache.get(key)
        if cached is not None:
            _stats['hits'] += 1
    if cached is not None:
        if isinstance(cached, Exception):
            raise cached
        return cached

    try:
        value = compute(op, shape)
    except Exception as e:
        with _cache_lock:
            _stats['misses'] += 1
            _semantics_cache[key] = e
        logger.debug(f"语义缓存记录失败: {op.label()} @ {shape}: {e}")
        raise
    with _cache_lock:
        _stats['misses'] += 1
        _semantics_cache[key] = value
    return value


def cache_info():
    with _cache_lock:
        return {'size': len(_semantics_cache), **_stats}


def clear():
    with _cache_lock:
        _semantics_cache.clear()
        _stats['hits'] = 0
        _stats['misses'] = 0
