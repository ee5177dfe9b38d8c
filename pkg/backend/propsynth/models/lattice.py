"""
性质取值模型: 局部性格、混合矩阵、深度状态、性质状态和目标

局部性 Loc 全序 X < O < M < A (无配对 ×, 一对一 ○, 多对一 ◑, 全对一 ●)。
(loc_add, loc_mul) 构成半环，混合矩阵在其上做矩阵乘法。
"""

from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np

from propsynth.utils.error_handler import ShapeError


class Loc(IntEnum):
    X = 0
    O = 1
    M = 2
    A = 3

    @property
    def glyph(self):
        return _GLYPHS[self]

    @classmethod
    def parse(cls, token):
        token = str(token).strip()
        if token in _GLYPH_LOOKUP:
            return _GLYPH_LOOKUP[token]
        raise ValueError(f"无法识别的局部性符号: {token!r}")


_GLYPHS = {Loc.X: '×', Loc.O: '○', Loc.M: '◑', Loc.A: '●'}
_GLYPH_LOOKUP = {glyph: loc for loc, glyph in _GLYPHS.items()}
_GLYPH_LOOKUP.update({loc.name: loc for loc in Loc})
_GLYPH_LOOKUP.update({'x': Loc.X, 'o': Loc.O, 'm': Loc.M, 'a': Loc.A, '.': Loc.X})

# y * z 查找表；行为 y，列为 z
_MUL_TABLE = np.array([
    [0, 0, 0, 0],
    [0, 1, 2, 3],
    [0, 2, 2, 3],
    [0, 3, 3, 3],
], dtype=np.int8)


def loc_add(y, z):
    return Loc(max(int(y), int(z)))


def loc_mul(y, z):
    return Loc(int(_MUL_TABLE[int(y), int(z)]))


class MixingMatrix:
    """行为输出维，列为输入维；不可变"""

    __slots__ = ('_data',)

    def __init__(self, data):
        array = np.array(data, dtype=np.int8)
        if array.ndim != 2:
            raise ShapeError(f"混合矩阵必须是二维的, 实际维数 {array.ndim}")
        if array.size and (array.min() < 0 or array.max() > 3):
            raise ValueError("混合矩阵元素必须在 X..A 之间")
        array.setflags(write=False)
        self._data = array

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n, dtype=np.int8) * int(Loc.O))

    @classmethod
    def zeros(cls, rows, cols):
        return cls(np.zeros((rows, cols), dtype=np.int8))

    @classmethod
    def from_rows(cls, rows):
        """从字符串行构造，例如 ['○××●', '×◑×●', ...]"""
        parsed = []
        for row in rows:
            tokens = row.split() if isinstance(row, str) and ' ' in row.strip() else list(row)
            parsed.append([int(Loc.parse(t)) for t in tokens])
        return cls(parsed)

    @property
    def data(self):
        return self._data

    @property
    def shape(self):
        return self._data.shape

    @property
    def rows(self):
        return self._data.shape[0]

    @property
    def cols(self):
        return self._data.shape[1]

    def __getitem__(self, index):
        return Loc(int(self._data[index]))

    def with_entry(self, row, col, loc):
        array = self._data.copy()
        array[row, col] = int(loc)
        return MixingMatrix(array)

    def __eq__(self, other):
        return isinstance(other, MixingMatrix) and self.shape == other.shape and bool(
            np.array_equal(self._data, other._data))

    def __hash__(self):
        return hash((self.shape, self._data.tobytes()))

    def __le__(self, other):
        # 偏序: 维度相同且逐元素 ≤
        return self.shape == other.shape and bool(np.all(self._data <= other._data))

    def __ge__(self, other):
        return other <= self

    def join(self, other):
        if self.shape != other.shape:
            raise ShapeError(f"混合矩阵维度不一致: {self.shape} vs {other.shape}")
        return MixingMatrix(np.maximum(self._data, other._data))

    def deficient_entries(self, target):
        """target 中严格大于本矩阵的元素个数"""
        return int(np.count_nonzero(target._data > self._data))

    def pairing(self):
        return (self._data > 0).astype(np.int8)

    def to_rows(self):
        return [''.join(Loc(int(v)).glyph for v in row) for row in self._data]

    def to_list(self):
        return self.to_rows()

    def __repr__(self):
        return f"MixingMatrix({self.to_rows()})"


def mix_compose(q, u):
    """q ∘ u: 先 u 后 q，矩阵乘法中加法取 max，乘法查表"""
    if q.cols != u.rows:
        raise ShapeError(f"混合矩阵内维不一致: {q.shape} × {u.shape}")
    products = _MUL_TABLE[q.data[:, :, None], u.data[None, :, :]]
    if products.shape[1] == 0:
        return MixingMatrix.zeros(q.rows, u.cols)
    return MixingMatrix(products.max(axis=1))


def mix_join_all(matrices, rows, cols):
    result = np.zeros((rows, cols), dtype=np.int8)
    for matrix in matrices:
        result = np.maximum(result, matrix.data)
    return MixingMatrix(result)


def mix_star(a):
    """Kleene 闭包 (I + A)^*，有限格上必然收敛"""
    current = MixingMatrix.identity(a.rows).join(a)
    while True:
        squared = mix_compose(current, current)
        if squared == current:
            return current
        current = squared


class OpRole(Enum):
    NONE = 'none'
    LINEAR = 'linear'
    NONLINEAR = 'nonlinear'


@dataclass(frozen=True)
class DepthState:
    count: int = 0
    last_kind: OpRole = OpRole.NONE

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("深度不能为负数")
        if (self.count == 0) != (self.last_kind is OpRole.NONE):
            raise ValueError(f"深度状态不一致: count={self.count}, last_kind={self.last_kind.value}")

    def advance(self, role):
        # 线性与非线性交替时深度加一
        if role is self.last_kind:
            return self
        return DepthState(self.count + 1, role)

    def to_dict(self):
        return {'count': self.count, 'last_kind': self.last_kind.value}


@dataclass(frozen=True)
class PropertyState:
    mixing: MixingMatrix
    depth: DepthState
    shape: object  # TensorShape

    @classmethod
    def identity(cls, shape):
        return cls(MixingMatrix.identity(shape.rank), DepthState(), shape)

    def to_dict(self):
        return {
            'mixing': self.mixing.to_rows(),
            'depth': self.depth.to_dict(),
            'shape': self.shape.to_list(),
        }


@dataclass(frozen=True)
class TargetSpec:
    mixing: MixingMatrix = None
    depth: int = None
    shape: object = None  # TensorShape

    def __post_init__(self):
        if self.mixing is None and self.depth is None and self.shape is None:
            raise ValueError("目标至少需要一个分量")
        if self.depth is not None and self.depth < 0:
            raise ValueError("深度目标不能为负数")

    @classmethod
    def from_state(cls, state):
        return cls(mixing=state.mixing, depth=state.depth.count, shape=state.shape)

    def to_dict(self):
        return {
            'mixing': self.mixing.to_rows() if self.mixing is not None else None,
            'depth': self.depth,
            'shape': self.shape.to_list() if self.shape is not None else None,
        }
