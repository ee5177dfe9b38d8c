"""
计算图模型

主要功能:
- GraphInput / Node / Block: 图输入、算子节点 (有序输入列表)、带类型标签的块
- ComputationGraph: 不可变的 DAG；提供拓扑序、消费者索引、形状推断、networkx 视图
- 节点 id 与图输入 id 共用一个命名空间；图输出可以直接引用图输入 (恒等图)

依赖模型:
- PrimitiveOp, infer_shape (models/primitive.py)
- TensorShape (models/shape.py)

注意: 如果新增、删除或修改字段，必须同步修改 utils/serialization.py 中的文件格式。
"""

import hashlib
import json
import re
from dataclasses import dataclass, field
from functools import cached_property

import networkx as nx

from propsynth.models.primitive import infer_shape
from propsynth.utils.error_handler import GraphError, ShapeError


@dataclass(frozen=True)
class GraphInput:
    id: str
    shape: object  # TensorShape

    def to_dict(self):
        return {'id': self.id, 'shape': self.shape.to_list()}


@dataclass(frozen=True)
class Node:
    id: str
    op: object  # PrimitiveOp
    inputs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, 'inputs', tuple(self.inputs))

    def to_dict(self):
        data = self.op.to_dict()
        return {'id': self.id, 'kind': data['kind'], 'params': data['params'], 'inputs': list(self.inputs)}

    def __repr__(self):
        return f"<Node {self.id} {self.op.label()} <- {list(self.inputs)}>"


@dataclass(frozen=True)
class Block:
    label: str
    node_ids: tuple
    block_type: str = ''
    frozen: tuple = ()  # 块内不可变节点 (如残差连接的 Add)

    def __post_init__(self):
        object.__setattr__(self, 'node_ids', tuple(self.node_ids))
        object.__setattr__(self, 'frozen', tuple(self.frozen))

    @property
    def mutable_ids(self):
        return tuple(n for n in self.node_ids if n not in self.frozen)

    def to_dict(self):
        data = {'label': self.label, 'type': self.block_type, 'nodes': list(self.node_ids)}
        if self.frozen:
            data['frozen'] = list(self.frozen)
        return data


@dataclass(frozen=True, eq=False)
class ComputationGraph:
    inputs: tuple
    nodes: tuple
    outputs: tuple
    blocks: tuple = field(default=())

    def __post_init__(self):
        for name in ('inputs', 'nodes', 'outputs', 'blocks'):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    # ---- 索引 ----

    @cached_property
    def node_map(self):
        return {node.id: node for node in self.nodes}

    @cached_property
    def input_map(self):
        return {graph_input.id: graph_input for graph_input in self.inputs}

    @cached_property
    def consumers(self):
        """id -> [(消费者 id, 操作数位置)]"""
        result = {graph_input.id: [] for graph_input in self.inputs}
        for node in self.nodes:
            result.setdefault(node.id, [])
        for node in self.nodes:
            for position, source in enumerate(node.inputs):
                result.setdefault(source, []).append((node.id, position))
        return result

    def node(self, node_id):
        try:
            return self.node_map[node_id]
        except KeyError:
            raise GraphError(f"节点不存在: {node_id}")

    def has(self, value_id):
        return value_id in self.node_map or value_id in self.input_map

    def block(self, label):
        for block in self.blocks:
            if block.label == label:
                return block
        raise GraphError(f"块不存在: {label}")

    def block_of(self, node_id):
        for block in self.blocks:
            if node_id in block.node_ids:
                return block
        return None

    def to_networkx(self):
        digraph = nx.DiGraph()
        for graph_input in self.inputs:
            digraph.add_node(graph_input.id, is_input=True)
        for node in self.nodes:
            digraph.add_node(node.id, is_input=False)
        for node in self.nodes:
            for source in node.inputs:
                digraph.add_edge(source, node.id)
        return digraph

    @cached_property
    def topological_order(self):
        """节点 id 的拓扑序 (不含图输入)；同层按插入顺序"""
        digraph = self.to_networkx()
        if not nx.is_directed_acyclic_graph(digraph):
            raise GraphError("计算图存在环")
        position = {node.id: i for i, node in enumerate(self.nodes)}
        position.update({g.id: -1 for g in self.inputs})
        order = nx.lexicographical_topological_sort(digraph, key=lambda n: position.get(n, len(position)))
        return tuple(n for n in order if n in self.node_map)

    @cached_property
    def shapes(self):
        """所有值的形状；任一节点失败时抛出 ShapeError"""
        result = {graph_input.id: graph_input.shape for graph_input in self.inputs}
        for node_id in self.topological_order:
            node = self.node_map[node_id]
            try:
                input_shapes = [result[source] for source in node.inputs]
            except KeyError as e:
                raise GraphError(f"节点 {node_id} 的输入不存在: {e.args[0]}")
            try:
                result[node_id] = infer_shape(node.op, input_shapes)
            except ShapeError as e:
                raise ShapeError(f"节点 {node_id}: {e}")
        return result

    # ---- 构造辅助 ----

    def fresh_ids(self, count, prefix='n'):
        """生成 count 个未被占用的节点 id"""
        pattern = re.compile(rf'^{re.escape(prefix)}(\d+)$')
        highest = -1
        for value_id in list(self.node_map) + list(self.input_map):
            match = pattern.match(value_id)
            if match:
                highest = max(highest, int(match.group(1)))
        return [f"{prefix}{highest + 1 + i}" for i in range(count)]

    def evolve(self, **changes):
        data = {
            'inputs': self.inputs,
            'nodes': self.nodes,
            'outputs': self.outputs,
            'blocks': self.blocks,
        }
        data.update(changes)
        return ComputationGraph(**data)

    def to_dict(self):
        return {
            'inputs': [g.to_dict() for g in self.inputs],
            'nodes': [n.to_dict() for n in self.nodes],
            'outputs': list(self.outputs),
            'blocks': [b.to_dict() for b in self.blocks],
        }

    def fingerprint(self):
        """结构指纹，用于历史记录引用"""
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha1(payload.encode('utf-8')).hexdigest()[:16]

    def __eq__(self, other):
        return isinstance(other, ComputationGraph) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(self.fingerprint())

    def __repr__(self):
        return f"<ComputationGraph inputs={len(self.inputs)} nodes={len(self.nodes)} outputs={list(self.outputs)}>"
