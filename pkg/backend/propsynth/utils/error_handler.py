"""
错误处理模块

提供整个合成引擎的错误处理功能，包括：
- 统一的异常层级（图结构、形状、算子参数、目录、配置、预算、评估）
- 异常到命令行退出码的映射
- 错误计数和统计（按类别、按退出码）
- 面向用户的错误消息格式化

注意: 如果新增、删除或修改异常类型，必须同步修改 EXIT_CODES 与文件开头的注释。
"""

import threading
import time
from collections import Counter, defaultdict

# 退出码约定
EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_INFEASIBLE = 3
EXIT_SYNTHESIS_FAILED = 4
EXIT_ORACLE_VIOLATION = 5


class PropsynthError(Exception):
    """所有引擎异常的基类"""


class GraphError(PropsynthError):
    """计算图结构错误"""


class GraphParseError(GraphError):
    """图文件解析失败，location 指明出错位置（行列号或 JSON 路径）"""

    def __init__(self, message, location=None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class ValidationError(GraphError):
    """图校验失败，problems 为全部违反的约束"""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems) or "invalid graph")


class BoundaryMismatchError(GraphError):
    """替换子图的边界与选区边界不一致"""


class ShapeError(PropsynthError):
    """形状推断失败（算子在该形状下不可用）"""


class OpSpecError(PropsynthError):
    """算子参数不满足约束"""


class CatalogError(PropsynthError):
    """算子目录配置错误"""


class OracleError(PropsynthError):
    """具体语义预言机无法运行（如形状超出上限）"""


class ConfigError(PropsynthError):
    """运行配置非法"""


class SearchBudgetError(PropsynthError):
    """搜索在预算内没有找到满足条件的结果"""


class EvaluationError(PropsynthError):
    """个体评估失败"""


EXIT_CODES = {
    GraphError: EXIT_INPUT_ERROR,
    ConfigError: EXIT_INPUT_ERROR,
    OpSpecError: EXIT_INPUT_ERROR,
    CatalogError: EXIT_INPUT_ERROR,
    ShapeError: EXIT_INPUT_ERROR,
    OracleError: EXIT_INPUT_ERROR,
    SearchBudgetError: EXIT_SYNTHESIS_FAILED,
    EvaluationError: EXIT_SYNTHESIS_FAILED,
}

# 错误计数和统计
_error_lock = threading.Lock()
_error_stats = {
    'last_reset': time.time(),
    'total_count': 0,
    'by_category': defaultdict(int),  # 按异常类别统计
    'by_exit_code': Counter(),  # 按退出码统计
    'recent_errors': [],  # 最近的错误列表
}
_MAX_RECENT = 50


class ErrorHandler:
    """错误处理器"""

    @staticmethod
    def exit_code_for(error):
        """返回异常对应的退出码，未知异常按输入错误处理"""
        for error_type in type(error).__mro__:
            if error_type in EXIT_CODES:
                return EXIT_CODES[error_type]
        if isinstance(error, (ValueError, KeyError, TypeError)):
            return EXIT_INPUT_ERROR
        return EXIT_SYNTHESIS_FAILED

    @staticmethod
    def handle(error, context=None):
        """记录错误并返回 (退出码, 用户可读消息)"""
        code = ErrorHandler.exit_code_for(error)
        message = ErrorHandler.format_message(error, context)
        ErrorHandler._record_error(type(error).__name__, code, message)
        return code, message

    @staticmethod
    def format_message(error, context=None):
        category = type(error).__name__
        prefix = f"[{context}] " if context else ""
        if isinstance(error, ValidationError) and len(error.problems) > 1:
            lines = "\n".join(f"  - {p}" for p in error.problems)
            return f"{prefix}{category}:\n{lines}"
        return f"{prefix}{category}: {error}"

    @staticmethod
    def _record_error(category, exit_code, message):
        """记录错误信息"""
        with _error_lock:
            _error_stats['total_count'] += 1
            _error_stats['by_category'][category] += 1
            _error_stats['by_exit_code'][exit_code] += 1
            _error_stats['recent_errors'].append({
                'category': category,
                'exit_code': exit_code,
                'message': message,
            })
            if len(_error_stats['recent_errors']) > _MAX_RECENT:
                _error_stats['recent_errors'] = _error_stats['recent_errors'][-_MAX_RECENT:]

    @staticmethod
    def get_error_stats():
        """获取错误统计信息"""
        with _error_lock:
            return {
                'total_count': _error_stats['total_count'],
                'by_category': dict(_error_stats['by_category']),
                'by_exit_code': dict(_error_stats['by_exit_code']),
                'recent_errors': list(_error_stats['recent_errors']),
                'since': _error_stats['last_reset'],
            }

    @staticmethod
    def reset_stats():
        """重置错误统计"""
        with _error_lock:
            _error_stats['last_reset'] = time.time()
            _error_stats['total_count'] = 0
            _error_stats['by_category'].clear()
            _error_stats['by_exit_code'].clear()
            _error_stats['recent_errors'] = []
