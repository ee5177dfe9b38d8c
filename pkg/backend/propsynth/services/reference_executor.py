"""
具体参考解释器与梯度预言机

主要功能:
- eval_op: 用 numpy 在小形状上执行每种原语算子 (推理模式，不含偏置/β 等加性项)
- contribution_pattern: 逐元素前向差分得到 "输出元素 <- 输入元素" 的贡献关系
- concrete_mixing / concrete_chain_mixing: 在中心切片和中心元素处计算配对与局部性
- linearity_test: 检验 a·f(x) + b·f(y) = f(a·x + b·y)

依赖模型:
- PrimitiveOp, infer_shape, 窗口几何 (models/primitive.py)
- MixingMatrix, Loc (models/lattice.py)

注意: 如果新增算子种类，必须同步修改 make_weights 和 _apply。
"""

import logging
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special

from propsynth import config
from propsynth.models.lattice import Loc, MixingMatrix
from propsynth.models.primitive import CONV_KINDS, OpKind, infer_shape, window_geometry, window_padding
from propsynth.utils.error_handler import OracleError, ShapeError

logger = logging.getLogger(__name__)

_OUT_AXES = 'HIJKLM'
_TAP_AXES = 'uvwxyz'
_CHUNK = 256  # 每批扰动的元素个数


@dataclass(frozen=True)
class DenseTensor:
    shape: object  # TensorShape
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.shape.dims:
            raise ShapeError(f"张量数据形状 {values.shape} 与 {self.shape} 不一致")
        object.__setattr__(self, 'values', values)

    @classmethod
    def random(cls, shape, rng, scale=1.0):
        return cls(shape, rng.standard_normal(shape.dims) * scale)


# ---- 权重 ----

def make_weights(op, input_shape, rng):
    """按算子和输入形状生成随机权重 (确定性取决于 rng)"""
    channels = input_shape.channels
    kind = op.kind
    if kind is OpKind.DENSE:
        return {'kernel': rng.standard_normal((channels, op.get('features')))}
    if kind in CONV_KINDS:
        groups = op.get('groups', 1)
        if channels % groups:
            raise ShapeError(f"输入通道 {channels} 不能被 groups={groups} 整除")
        taps = (op.get('kernel'),) * len(input_shape.spatial)
        shape = taps + (groups, channels // groups, op.get('features') // groups)
        return {'kernel': rng.standard_normal(shape)}
    if kind in (OpKind.BATCH_NORM, OpKind.LAYER_NORM, OpKind.GROUP_NORM):
        return {'scale': rng.uniform(0.5, 1.5, size=channels)}
    return {}


# ---- 算子执行 ----

def _windows(x, kernel, stride, dilation):
    """返回 (N, 输出空间..., C, 窗口...) 的只读视图"""
    spatial = x.ndim - 2
    low, high = window_padding(kernel, stride, dilation)
    padded = np.pad(x, [(0, 0)] + [(low, high)] * spatial + [(0, 0)])
    extent = dilation * (kernel - 1) + 1
    view = sliding_window_view(padded, (extent,) * spatial, axis=tuple(range(1, spatial + 1)))
    view = view[(Ellipsis,) + (slice(None, None, dilation),) * spatial]
    return view[(slice(None),) + (slice(None, None, stride),) * spatial]


def _convolve(x, kernel_weights, op):
    kernel, stride, dilation = window_geometry(op)
    spatial = x.ndim - 2
    if spatial > len(_OUT_AXES):
        raise ShapeError(f"参考解释器最多支持 {len(_OUT_AXES)} 个空间维")
    groups = kernel_weights.shape[spatial]
    windows = _windows(x, kernel, stride, dilation)
    out_spatial = windows.shape[1:1 + spatial]
    windows = windows.reshape((x.shape[0],) + out_spatial + (groups, x.shape[-1] // groups) + (kernel,) * spatial)
    out_axes = _OUT_AXES[:spatial]
    taps = _TAP_AXES[:spatial]
    result = np.einsum(f"n{out_axes}gc{taps},{taps}gcf->n{out_axes}gf", windows, kernel_weights)
    return result.reshape(result.shape[:-2] + (-1,))


def _gelu(x):
    return 0.5 * x * (1.0 + np.tanh(np.sqrt(2.0 / np.pi) * (x + 0.044715 * x ** 3)))


def _apply(op, arrays, weights):
    kind = op.kind
    x = arrays[0]
    if kind is OpKind.ADD:
        return arrays[0] + arrays[1]
    if kind is OpKind.DENSE:
        return np.einsum('...c,cf->...f', x, weights['kernel'])
    if kind in CONV_KINDS:
        return _convolve(x, weights['kernel'], op)
    if kind in (OpKind.AVERAGE_POOL, OpKind.MAX_POOL):
        kernel, stride, dilation = window_geometry(op)
        windows = _windows(x, kernel, stride, dilation)
        axes = tuple(range(-(x.ndim - 2), 0))
        return windows.mean(axis=axes) if kind is OpKind.AVERAGE_POOL else windows.max(axis=axes)
    if kind is OpKind.SCALAR_MULTIPLY:
        return float(op.get('value')) * x
    if kind is OpKind.RELU:
        return np.maximum(x, 0.0)
    if kind is OpKind.GELU:
        return _gelu(x)
    if kind is OpKind.SILU:
        return x * special.expit(x)
    if kind is OpKind.SIGMOID:
        return special.expit(x)
    if kind is OpKind.SOFTMAX:
        return special.softmax(x, axis=-1)
    if kind is OpKind.BATCH_NORM:
        # 推理模式: 统计量冻结，只剩逐通道缩放
        return x * weights['scale']
    if kind is OpKind.LAYER_NORM:
        return (x - x.mean(axis=-1, keepdims=True)) * weights['scale']
    if kind is OpKind.GROUP_NORM:
        groups = op.get('groups')
        grouped = x.reshape(x.shape[:-1] + (groups, x.shape[-1] // groups))
        centered = grouped - grouped.mean(axis=-1, keepdims=True)
        return centered.reshape(x.shape) * weights['scale']
    if kind is OpKind.DROPOUT:
        return x
    raise ShapeError(f"参考解释器不支持算子 {kind.value}")


def eval_op(op, inputs, weights):
    """
    执行单个算子

    Args:
        op: PrimitiveOp
        inputs: list[DenseTensor]
        weights: make_weights 的结果

    Returns:
        DenseTensor: 形状等于形状推断结果
    """
    output_shape = infer_shape(op, [t.shape for t in inputs])
    values = _apply(op, [t.values for t in inputs], weights)
    return DenseTensor(output_shape, values)


class ChainFunction:
    """顺序算子链在固定随机权重下的具体函数，可对任意 batch 大小求值"""

    def __init__(self, ops, input_shape, rng):
        self.ops = list(ops)
        self.input_shape = input_shape
        self.weights = []
        shape = input_shape
        for op in self.ops:
            if not op.is_simple:
                raise ShapeError(f"链中只能包含单输入算子: {op.label()}")
            self.weights.append(make_weights(op, shape, rng))
            shape = infer_shape(op, [shape])
        self.output_shape = shape

    def __call__(self, x):
        for op, weights in zip(self.ops, self.weights):
            x = _apply(op, [x], weights)
        return x


# ---- 贡献关系 ----

@dataclass(frozen=True)
class ContributionPattern:
    input_shape: object
    output_shape: object
    mask: np.ndarray  # (输出元素数, 输入元素数) 的布尔矩阵

    def contributors(self, out_index):
        """贡献给某个输出元素的全部输入元素下标"""
        row = self.mask[np.ravel_multi_index(out_index, self.output_shape.dims)]
        return {tuple(int(v) for v in idx) for idx in zip(*np.unravel_index(np.flatnonzero(row), self.input_shape.dims))}

    def preimage(self, out_indices):
        """一组输出元素的原像，返回输入形状的布尔数组"""
        flat = [np.ravel_multi_index(idx, self.output_shape.dims) for idx in out_indices]
        return np.any(self.mask[flat], axis=0).reshape(self.input_shape.dims)

    def center_slice(self, axis):
        center = self.output_shape.center()
        return [center[:axis] + (i,) + center[axis + 1:] for i in range(self.output_shape.dims[axis])]

    def mixing(self):
        """在中心元素 (局部性) 和中心切片 (配对) 处计算混合矩阵"""
        in_dims = self.input_shape.dims
        rank = len(in_dims)
        element_pre = self.preimage([self.output_shape.center()])
        locality = []
        for axis in range(rank):
            count = int(np.count_nonzero(_positions(element_pre, axis)))
            if count == 0:
                locality.append(Loc.O)
            elif count == in_dims[axis] and in_dims[axis] > 1:
                locality.append(Loc.A)
            elif count > 1:
                locality.append(Loc.M)
            else:
                locality.append(Loc.O)

        data = np.zeros((self.output_shape.rank, rank), dtype=np.int8)
        for out_axis in range(self.output_shape.rank):
            slice_pre = self.preimage(self.center_slice(out_axis))
            for in_axis in range(rank):
                # 长度为 1 的输入维只在对角线上配对
                if in_dims[in_axis] == 1 and in_axis != out_axis:
                    continue
                if np.all(_positions(slice_pre, in_axis)):
                    data[out_axis, in_axis] = int(locality[in_axis])
        return MixingMatrix(data)


def _positions(pre, axis):
    others = tuple(a for a in range(pre.ndim) if a != axis)
    return np.any(pre, axis=others)


def _check_size(shape, what):
    if shape.size > config.ORACLE_MAX_ELEMENTS:
        raise OracleError(f"{what} {shape} 共 {shape.size} 个元素, 超过上限 {config.ORACLE_MAX_ELEMENTS}")


def _perturbation_mask(fn, input_shape, base):
    """对每个输入元素做 ±δ 扰动，记录哪些输出元素发生变化"""
    size = input_shape.size
    batch = input_shape.batch
    baseline = fn(base)
    flat_base = baseline.reshape(batch, -1)
    mask = np.zeros((baseline.size, size), dtype=bool)
    delta = config.ORACLE_PERTURBATION
    threshold = config.ORACLE_THRESHOLD

    for start in range(0, size, _CHUNK):
        indices = np.arange(start, min(start + _CHUNK, size))
        for sign in (1.0, -1.0):
            # 算子从不混合 batch 维，扰动副本沿 batch 维堆叠
            stacked = np.repeat(base[None], len(indices), axis=0).reshape((-1,) + base.shape[1:])
            flat = stacked.reshape(len(indices), -1)
            flat[np.arange(len(indices)), indices] += sign * delta
            out = fn(flat.reshape((-1,) + base.shape[1:])).reshape(len(indices), batch, -1)
            diff = np.abs(out - flat_base[None])
            scale = np.maximum(1.0, np.abs(out) + np.abs(flat_base[None]))
            changed = (diff > threshold * scale).reshape(len(indices), -1)
            mask[:, indices] |= changed.T
    return mask


def chain_contribution_pattern(ops, input_shape, trials=None, seed=0):
    """
    顺序算子链的贡献关系

    多次随机抽样权重与基准输入 (尺度在 1 和 1e-3 之间交替)，对非零掩码取并集，
    避免偶然抵消造成的漏检。
    """
    trials = trials or config.ORACLE_TRIALS
    _check_size(input_shape, "输入")
    rng = np.random.default_rng(seed)
    mask = None
    output_shape = None
    for trial in range(trials):
        fn = ChainFunction(ops, input_shape, rng)
        output_shape = fn.output_shape
        _check_size(output_shape, "输出")
        scale = 1.0 if trial % 2 == 0 else 1e-3
        base = rng.standard_normal(input_shape.dims) * scale
        trial_mask = _perturbation_mask(fn, input_shape, base)
        mask = trial_mask if mask is None else mask | trial_mask
    return ContributionPattern(input_shape, output_shape, mask)


def contribution_pattern(op, input_shape, trials=None, seed=0):
    return chain_contribution_pattern([op], input_shape, trials, seed)


def concrete_mixing(op, input_shape, trials=None, seed=0):
    return contribution_pattern(op, input_shape, trials, seed).mixing()


def concrete_chain_mixing(ops, input_shape, trials=None, seed=0):
    return chain_contribution_pattern(ops, input_shape, trials, seed).mixing()


# ---- 线性检验 ----

def linearity_test(op, shape, trials=None, seed=0, tolerance=1e-9):
    """a·f(x) + b·f(y) 与 f(a·x + b·y) 在所有抽样上 (相对误差 tolerance 内) 相等时返回 True"""
    trials = trials or config.ORACLE_TRIALS
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        fn = ChainFunction([op], shape, rng)
        x = rng.standard_normal(shape.dims)
        y = rng.standard_normal(shape.dims)
        a, b = rng.standard_normal(2) * 2.0
        lhs = a * fn(x) + b * fn(y)
        rhs = fn(a * x + b * y)
        scale = max(1.0, float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))))
        if np.max(np.abs(lhs - rhs)) > tolerance * scale:
            logger.debug(f"{op.label()} 线性检验失败: a={a:.3f}, b={b:.3f}")
            return False
    return True
