"""
演化个体模型

Individual 记录计算图、目标向量 (accuracy_proxy 越大越好, flops/params 越小越好,
throughput_proxy 越大越好) 以及谱系 (父个体 id + 变异记录)。
"""

from dataclasses import dataclass, field

# 目标方向: True 表示越大越好
OBJECTIVES = {
    'accuracy_proxy': True,
    'flops': False,
    'params': False,
    'throughput_proxy': True,
}


@dataclass(frozen=True)
class Individual:
    id: str
    graph: object  # ComputationGraph
    metrics: dict = field(default_factory=dict)
    parent_id: str = None
    mutation: dict = field(default_factory=dict)
    trial: int = -1

    def objective(self, name):
        """返回按"越大越好"方向统一后的目标值"""
        if name not in OBJECTIVES:
            raise ValueError(f"未知的目标: {name}")
        value = float(self.metrics[name])
        return value if OBJECTIVES[name] else -value

    def with_metrics(self, metrics):
        return Individual(self.id, self.graph, dict(metrics), self.parent_id, dict(self.mutation), self.trial)

    def to_dict(self):
        return {
            'id': self.id,
            'parent': self.parent_id,
            'trial': self.trial,
            'mutation': self.mutation,
            'metrics': self.metrics,
            'graph': self.graph.fingerprint(),
            'nodes': len(self.graph.nodes),
        }

    def __repr__(self):
        return f"<Individual {self.id} parent={self.parent_id} metrics={self.metrics}>"
