"""
原语算子模型

主要功能:
- OpKind: 17 种原语算子及其元数 (Add 为二元连接算子，其余为一元)
- PrimitiveOp: 不可变的具体算子 (种类 + 参数)，构造时校验参数约束
- infer_shape: 形状推断规则
- 窗口几何: 卷积/池化的 padding 与中心元素覆盖的位置数

注意: 如果新增算子种类，必须同步修改 PARAM_SPEC、infer_shape 以及
services/property_inference.py 中的线性表和 services/reference_executor.py 中的实现。
"""

import math
from dataclasses import dataclass
from enum import Enum

from propsynth.utils.error_handler import OpSpecError, ShapeError


class OpKind(Enum):
    DENSE = 'Dense'
    CONVOLUTION = 'Convolution'
    GROUPED_CONVOLUTION = 'GroupedConvolution'
    DILATED_CONVOLUTION = 'DilatedConvolution'
    ADD = 'Add'
    SCALAR_MULTIPLY = 'ScalarMultiply'
    RELU = 'ReLU'
    GELU = 'GeLU'
    SILU = 'SiLU'
    SIGMOID = 'Sigmoid'
    SOFTMAX = 'Softmax'
    BATCH_NORM = 'BatchNorm'
    LAYER_NORM = 'LayerNorm'
    GROUP_NORM = 'GroupNorm'
    DROPOUT = 'Dropout'
    AVERAGE_POOL = 'AveragePool'
    MAX_POOL = 'MaxPool'

    @property
    def arity(self):
        return 2 if self is OpKind.ADD else 1

    @property
    def family(self):
        """目录压缩时代表元按族选取；两种池化同族"""
        if self in (OpKind.AVERAGE_POOL, OpKind.MAX_POOL):
            return 'Pool'
        return self.value

    @classmethod
    def parse(cls, name):
        for kind in cls:
            if kind.value == name:
                return kind
        raise OpSpecError(f"未知的算子种类: {name}")


CONV_KINDS = (OpKind.CONVOLUTION, OpKind.GROUPED_CONVOLUTION, OpKind.DILATED_CONVOLUTION)
POOL_KINDS = (OpKind.AVERAGE_POOL, OpKind.MAX_POOL)
WINDOWED_KINDS = CONV_KINDS + POOL_KINDS

PARAM_SPEC = {
    OpKind.DENSE: ('features',),
    OpKind.CONVOLUTION: ('features', 'kernel', 'stride'),
    OpKind.GROUPED_CONVOLUTION: ('features', 'kernel', 'stride', 'groups'),
    OpKind.DILATED_CONVOLUTION: ('features', 'kernel', 'stride', 'dilation'),
    OpKind.ADD: (),
    OpKind.SCALAR_MULTIPLY: ('value',),
    OpKind.RELU: (),
    OpKind.GELU: (),
    OpKind.SILU: (),
    OpKind.SIGMOID: (),
    OpKind.SOFTMAX: (),
    OpKind.BATCH_NORM: ('momentum',),
    OpKind.LAYER_NORM: (),
    OpKind.GROUP_NORM: ('groups',),
    OpKind.DROPOUT: ('rate',),
    OpKind.AVERAGE_POOL: ('window',),
    OpKind.MAX_POOL: ('window',),
}

_SHORT_NAMES = {
    OpKind.CONVOLUTION: 'Conv',
    OpKind.GROUPED_CONVOLUTION: 'GConv',
    OpKind.DILATED_CONVOLUTION: 'DConv',
    OpKind.SCALAR_MULTIPLY: 'Scale',
    OpKind.AVERAGE_POOL: 'AvgPool',
}

_PARAM_ABBREV = {
    'features': 'f', 'kernel': 'k', 'stride': 's', 'groups': 'g', 'dilation': 'r',
    'value': 'c', 'momentum': 'm', 'rate': 'p', 'window': 'w',
}


@dataclass(frozen=True)
class PrimitiveOp:
    kind: OpKind
    params: tuple = ()

    def __post_init__(self):
        params = self.params
        if isinstance(params, dict):
            params = tuple(sorted(params.items()))
        object.__setattr__(self, 'params', tuple(params))
        _validate_params(self.kind, dict(self.params))

    @classmethod
    def create(cls, kind, **params):
        if isinstance(kind, str):
            kind = OpKind.parse(kind)
        return cls(kind, tuple(sorted(params.items())))

    def get(self, name, default=None):
        for key, value in self.params:
            if key == name:
                return value
        return default

    @property
    def arity(self):
        return self.kind.arity

    @property
    def is_simple(self):
        return self.kind.arity == 1

    def param_dict(self):
        return dict(self.params)

    def label(self):
        name = _SHORT_NAMES.get(self.kind, self.kind.value)
        if not self.params:
            return name
        ordered = [(k, self.get(k)) for k in PARAM_SPEC[self.kind]]
        inner = ','.join(f"{_PARAM_ABBREV.get(k, k)}={v}" for k, v in ordered)
        return f"{name}({inner})"

    def to_dict(self):
        return {'kind': self.kind.value, 'params': {k: self.get(k) for k in PARAM_SPEC[self.kind]}}

    def __str__(self):
        return self.label()


def _require_int(kind, params, name, minimum):
    value = params[name]
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise OpSpecError(f"{kind.value}.{name} 必须是 ≥ {minimum} 的整数, 当前为 {value!r}")
    return value


def _validate_params(kind, params):
    expected = PARAM_SPEC.get(kind)
    if expected is None:
        raise OpSpecError(f"未知的算子种类: {kind}")
    if set(params) != set(expected):
        raise OpSpecError(f"{kind.value} 参数应为 {list(expected)}, 实际为 {sorted(params)}")

    if 'features' in params:
        _require_int(kind, params, 'features', 1)
    if 'kernel' in params:
        kernel = _require_int(kind, params, 'kernel', 1)
        stride = _require_int(kind, params, 'stride', 1)
        # 步长只能是 1 或等于卷积核大小
        if stride not in (1, kernel):
            raise OpSpecError(f"{kind.value} 的步长必须为 1 或等于卷积核 ({kernel}), 当前为 {stride}")
    if kind is OpKind.GROUPED_CONVOLUTION:
        groups = _require_int(kind, params, 'groups', 2)
        if params['features'] % groups:
            raise OpSpecError(f"分组卷积输出通道 {params['features']} 不能被 groups={groups} 整除")
    if kind is OpKind.DILATED_CONVOLUTION:
        _require_int(kind, params, 'dilation', 2)
        if params['kernel'] < 3 or params['kernel'] % 2 == 0 or params['stride'] != 1:
            raise OpSpecError("空洞卷积要求奇数卷积核 ≥ 3 且步长为 1")
    if kind is OpKind.GROUP_NORM:
        _require_int(kind, params, 'groups', 2)
    if 'window' in params:
        _require_int(kind, params, 'window', 2)
    if kind is OpKind.SCALAR_MULTIPLY:
        value = params['value']
        if not isinstance(value, (int, float)) or value == 0 or not math.isfinite(value):
            raise OpSpecError(f"ScalarMultiply 的系数必须是非零有限数, 当前为 {value!r}")
    if kind is OpKind.DROPOUT and not 0.0 <= float(params['rate']) < 1.0:
        raise OpSpecError(f"Dropout rate 必须在 [0, 1) 内, 当前为 {params['rate']}")
    if kind is OpKind.BATCH_NORM and not 0.0 < float(params['momentum']) < 1.0:
        raise OpSpecError(f"BatchNorm momentum 必须在 (0, 1) 内, 当前为 {params['momentum']}")


# ---- 窗口几何 ----

def window_geometry(op):
    """返回窗口算子的 (kernel, stride, dilation)，非窗口算子返回 None"""
    if op.kind in CONV_KINDS:
        return op.get('kernel'), op.get('stride'), op.get('dilation', 1)
    if op.kind in POOL_KINDS:
        window = op.get('window')
        return window, window, 1
    return None


def window_padding(kernel, stride, dilation):
    """步长为 1 时按 same 方式补齐，步长等于窗口时不补齐"""
    if stride > 1:
        return 0, 0
    extent = dilation * (kernel - 1) + 1
    low = (extent - 1) // 2
    return low, extent - 1 - low


def window_output_size(size, kernel, stride):
    return size // stride if stride > 1 else size


def center_window_positions(size, kernel, stride, dilation):
    """中心输出元素在该维上读取的输入位置"""
    low, _ = window_padding(kernel, stride, dilation)
    center = window_output_size(size, kernel, stride) // 2
    start = center * stride - low
    return sorted({start + dilation * i for i in range(kernel) if 0 <= start + dilation * i < size})


# ---- 形状推断 ----

def infer_shape(op, input_shapes):
    """对 op 做形状推断，失败时抛出 ShapeError"""
    if len(input_shapes) != op.arity:
        raise ShapeError(f"{op.label()} 需要 {op.arity} 个输入, 实际 {len(input_shapes)} 个")
    shape = input_shapes[0]
    kind = op.kind

    if kind is OpKind.ADD:
        if input_shapes[0] != input_shapes[1]:
            raise ShapeError(f"Add 两个输入形状不一致: {input_shapes[0]} vs {input_shapes[1]}")
        return shape

    if kind in WINDOWED_KINDS:
        if not shape.spatial:
            raise ShapeError(f"{op.label()} 需要至少一个空间维, 输入为 {shape}")
        kernel, stride, _ = window_geometry(op)
        if stride > 1:
            if any(s % stride for s in shape.spatial):
                raise ShapeError(f"{op.label()} 的步长 {stride} 不能整除空间维 {shape.spatial}")
            shape = shape.with_spatial(s // stride for s in shape.spatial)

    if kind is OpKind.GROUPED_CONVOLUTION and shape.channels % op.get('groups'):
        raise ShapeError(f"输入通道 {shape.channels} 不能被 groups={op.get('groups')} 整除")
    if kind is OpKind.GROUP_NORM:
        groups = op.get('groups')
        if shape.channels % groups or shape.channels // groups < 2:
            raise ShapeError(f"GroupNorm 要求通道 {shape.channels} 可被 {groups} 整除且每组至少 2 个通道")
    if kind in (OpKind.LAYER_NORM, OpKind.SOFTMAX) and shape.channels < 2:
        raise ShapeError(f"{kind.value} 要求至少 2 个通道")

    if kind in (OpKind.DENSE,) + CONV_KINDS:
        shape = shape.with_channels(op.get('features'))
    return shape
