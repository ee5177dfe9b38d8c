"""
张量形状模型

约定: 第一维为 batch，最后一维为 channel，中间为空间维。
"""

from dataclasses import dataclass
from math import prod

from propsynth.utils.error_handler import ShapeError


@dataclass(frozen=True)
class TensorShape:
    dims: tuple

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, 'dims', dims)
        if len(dims) < 2:
            raise ShapeError(f"形状至少需要 batch 和 channel 两维: {dims}")
        if any(d < 1 for d in dims):
            raise ShapeError(f"形状各维必须 ≥ 1: {dims}")

    @classmethod
    def of(cls, *dims):
        return cls(tuple(dims))

    @property
    def rank(self):
        return len(self.dims)

    @property
    def batch(self):
        return self.dims[0]

    @property
    def channels(self):
        return self.dims[-1]

    @property
    def spatial(self):
        return self.dims[1:-1]

    @property
    def size(self):
        return prod(self.dims)

    def center(self):
        return tuple(d // 2 for d in self.dims)

    def with_channels(self, channels):
        return TensorShape(self.dims[:-1] + (channels,))

    def with_spatial(self, spatial):
        return TensorShape((self.batch,) + tuple(spatial) + (self.channels,))

    def with_batch(self, batch):
        return TensorShape((batch,) + self.dims[1:])

    def dim_labels(self):
        """维度标签: B, 空间维 (H, W 或 S1..Sn), C"""
        spatial = len(self.spatial)
        if spatial == 1:
            names = ['L']
        elif spatial == 2:
            names = ['H', 'W']
        elif spatial == 3:
            names = ['D', 'H', 'W']
        else:
            names = [f'S{i + 1}' for i in range(spatial)]
        return ['B'] + names + ['C']

    def to_list(self):
        return list(self.dims)

    def __str__(self):
        return '(' + ','.join(str(d) for d in self.dims) + ')'
