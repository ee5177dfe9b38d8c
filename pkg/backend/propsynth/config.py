import json
import os
from dataclasses import dataclass, field, fields, replace

from dotenv import load_dotenv

from propsynth.utils.error_handler import ConfigError

# 加载.env文件
load_dotenv()

# 日志相关配置
PROPSYNTH_LOG = os.getenv('PROPSYNTH_LOG', 'WARNING')  # 日志级别名
PROPSYNTH_LOG_DIR = os.getenv('PROPSYNTH_LOG_DIR')  # 为空时不写文件日志

# 具体语义预言机配置
ORACLE_MAX_ELEMENTS = int(os.getenv('PROPSYNTH_ORACLE_MAX_ELEMENTS', 4096))  # 单个张量元素上限
ORACLE_TRIALS = int(os.getenv('PROPSYNTH_ORACLE_TRIALS', 3))  # 随机权重抽样次数
ORACLE_THRESHOLD = float(os.getenv('PROPSYNTH_ORACLE_THRESHOLD', 1e-12))  # 前向差分非零阈值
ORACLE_PERTURBATION = float(os.getenv('PROPSYNTH_ORACLE_PERTURBATION', 1e3))

# 库函数默认种子（命令行必须显式给出 --seed）
DEFAULT_SEED = int(os.getenv('PROPSYNTH_DEFAULT_SEED', 0))


def _check_probability(name, value):
    if not 0.0 <= value <= 1.0:
        raise ConfigError(f"{name} 必须在 [0, 1] 内, 当前为 {value}")


@dataclass(frozen=True)
class CatalogConfig:
    """算子目录的参数网格。features 为空时按 base_channels × feature_multipliers 生成。"""
    features: tuple = ()
    feature_multipliers: tuple = (0.5, 1.0, 2.0, 4.0)
    base_channels: int = 16
    extra_features: tuple = ()
    kernels: tuple = (1, 2, 3, 5)
    windows: tuple = (2, 3)
    groups: tuple = (2, 4)
    dilations: tuple = (2,)
    dropout_rates: tuple = (0.1, 0.2)
    scalar_values: tuple = (0.5, 2.0)
    batchnorm_momenta: tuple = (0.9, 0.99)
    include_grouped: bool = True
    include_dilated: bool = True
    include_strided: bool = True

    def resolved_features(self):
        if self.features:
            values = list(self.features)
        else:
            values = [max(1, int(round(self.base_channels * m))) for m in self.feature_multipliers]
        values.extend(self.extra_features)
        return tuple(dict.fromkeys(int(v) for v in values))

    def for_channels(self, channels, extra=()):
        """以给定输入通道数为基准的目录配置（显式 features 保持不变）"""
        return replace(self, base_channels=int(channels),
                       extra_features=tuple(self.extra_features) + tuple(extra))


@dataclass(frozen=True)
class SynthesisConfig:
    max_steps: int = 64
    extra_steps: int = 2  # 随机阶段后允许的额外贪心步数
    compress: bool = True
    enumerative_budget: int = 200_000

    def validate(self):
        if self.max_steps < 0 or self.extra_steps < 0 or self.enumerative_budget < 0:
            raise ConfigError("合成预算不能为负数")


@dataclass(frozen=True)
class MutationConfig:
    subgraph_weight: float = 0.8
    delete_weight: float = 0.1
    duplicate_weight: float = 0.1
    share_prob: float = 0.5
    depth_keep_prob: float = 0.5
    max_depth_shift: int = 2
    shape_drop_prob: float = 0.5
    pairing_drop_prob: float = 0.5
    selection_mean_size: float = 3.0
    resample_attempts: int = 3

    def validate(self):
        for name in ('share_prob', 'depth_keep_prob', 'shape_drop_prob', 'pairing_drop_prob'):
            _check_probability(name, getattr(self, name))
        weights = (self.subgraph_weight, self.delete_weight, self.duplicate_weight)
        if any(w < 0 for w in weights) or sum(weights) <= 0:
            raise ConfigError("变异类型权重必须非负且不全为零")
        if self.selection_mean_size < 1:
            raise ConfigError("selection_mean_size 必须 ≥ 1")
        if self.max_depth_shift < 0 or self.resample_attempts < 1:
            raise ConfigError("max_depth_shift 必须 ≥ 0, resample_attempts 必须 ≥ 1")


@dataclass(frozen=True)
class EvolutionConfig:
    trials: int = 50
    k_percent: float = 25.0
    primary: str = 'accuracy_proxy'
    secondaries: tuple = ('params', 'flops', 'throughput_proxy')

    def validate(self):
        if self.trials < 0:
            raise ConfigError("trials 不能为负数")
        if not 0.0 < self.k_percent <= 100.0:
            raise ConfigError(f"k_percent 必须在 (0, 100] 内, 当前为 {self.k_percent}")
        if not self.secondaries:
            raise ConfigError("至少需要一个次要目标")


@dataclass(frozen=True)
class RunConfig:
    catalog: CatalogConfig = field(default_factory=CatalogConfig)
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)
    mutation: MutationConfig = field(default_factory=MutationConfig)
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    seed: int = DEFAULT_SEED
    evaluator: str = 'static'

    def validate(self):
        self.synthesis.validate()
        self.mutation.validate()
        self.evolution.validate()
        if self.evaluator not in ('static',):
            raise ConfigError(f"未知的评估器: {self.evaluator}")
        return self

    @classmethod
    def from_dict(cls, data):
        sections = {
            'catalog': CatalogConfig,
            'synthesis': SynthesisConfig,
            'mutation': MutationConfig,
            'evolution': EvolutionConfig,
        }
        kwargs = {}
        for key, value in data.items():
            if key in sections:
                kwargs[key] = _build_section(sections[key], key, value)
            elif key in ('seed', 'evaluator'):
                kwargs[key] = value
            else:
                raise ConfigError(f"未知的配置项: {key}")
        return cls(**kwargs).validate()

    @classmethod
    def from_file(cls, path):
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"配置文件不存在: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"配置文件解析失败 {path}:{e.lineno}:{e.colno}: {e.msg}")
        if not isinstance(data, dict):
            raise ConfigError("配置文件顶层必须是对象")
        return cls.from_dict(data)


def _build_section(section_cls, name, value):
    if not isinstance(value, dict):
        raise ConfigError(f"配置节 {name} 必须是对象")
    known = {f.name for f in fields(section_cls)}
    unknown = set(value) - known
    if unknown:
        raise ConfigError(f"配置节 {name} 含未知字段: {sorted(unknown)}")
    converted = {k: tuple(v) if isinstance(v, list) else v for k, v in value.items()}
    try:
        return section_cls(**converted)
    except TypeError as e:
        raise ConfigError(f"配置节 {name} 非法: {e}")
