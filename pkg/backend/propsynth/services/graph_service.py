"""
计算图服务

主要功能:
- validate: 列出图违反的所有约束 (报告式，不抛异常)
- select_subgraph: 在块内随机游走选出连通且凸的子图
- decompose_sequential / replace_subgraph: 拆分为顺序链 + 连接算子，并按链替换
- 块级操作: 块类型签名、删除块、复制块、同类型块之间的节点对应
- chain_graph: 由算子序列构造单输入单输出的链式图

依赖模型:
- ComputationGraph, Node, Block, GraphInput (models/graph.py)
- infer_shape (models/primitive.py)
"""

import hashlib
import logging
from dataclasses import dataclass, field

import networkx as nx

from propsynth.models.graph import Block, ComputationGraph, GraphInput, Node
from propsynth.models.primitive import infer_shape
from propsynth.utils.error_handler import (
    BoundaryMismatchError, GraphError, ShapeError, ValidationError,
)

logger = logging.getLogger(__name__)


@dataclass
class ValidationReport:
    problems: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.problems

    def add(self, message):
        self.problems.append(message)


def validate(graph):
    report = ValidationReport()
    seen = set()
    for value_id in [g.id for g in graph.inputs] + [n.id for n in graph.nodes]:
        if value_id in seen:
            report.add(f"重复的 id: {value_id}")
        seen.add(value_id)

    refs_ok = True
    for node in graph.nodes:
        if len(node.inputs) != node.op.arity:
            report.add(f"节点 {node.id} ({node.op.kind.value}) 需要 {node.op.arity} 个输入, 实际 {len(node.inputs)} 个")
        for source in node.inputs:
            if source not in seen:
                report.add(f"节点 {node.id} 引用了不存在的输入 {source}")
                refs_ok = False

    if not graph.outputs:
        report.add("图没有输出")
    for output_id in graph.outputs:
        if output_id not in seen:
            report.add(f"输出引用了不存在的值 {output_id}")
            refs_ok = False

    digraph = graph.to_networkx()
    acyclic = nx.is_directed_acyclic_graph(digraph)
    if not acyclic:
        report.add("计算图存在环")

    reachable = set()
    for graph_input in graph.inputs:
        reachable.add(graph_input.id)
        reachable |= nx.descendants(digraph, graph_input.id)
    for node in graph.nodes:
        if node.id not in reachable:
            report.add(f"节点 {node.id} 无法从任何图输入到达")

    if acyclic and refs_ok:
        shapes = {g.id: g.shape for g in graph.inputs}
        for node_id in graph.topological_order:
            node = graph.node_map[node_id]
            if any(s not in shapes for s in node.inputs):
                continue  # 上游已经失败
            try:
                shapes[node_id] = infer_shape(node.op, [shapes[s] for s in node.inputs])
            except ShapeError as e:
                report.add(f"节点 {node_id} 形状推断失败: {e}")

    owner = {}
    for block in graph.blocks:
        for node_id in block.node_ids:
            if node_id not in graph.node_map:
                report.add(f"块 {block.label} 引用了不存在的节点 {node_id}")
            elif node_id in owner:
                report.add(f"节点 {node_id} 同时属于块 {owner[node_id]} 和 {block.label}")
            owner[node_id] = block.label
        for node_id in block.frozen:
            if node_id not in block.node_ids:
                report.add(f"块 {block.label} 的不可变节点 {node_id} 不在块内")
    return report


def ensure_valid(graph):
    report = validate(graph)
    if not report.ok:
        raise ValidationError(report.problems)
    return graph


def chain_graph(ops, input_shape, input_id='x', prefix='n'):
    """由顺序算子序列构造链式图；空序列得到恒等图"""
    nodes = []
    previous = input_id
    for i, op in enumerate(ops):
        node_id = f"{prefix}{i}"
        nodes.append(Node(node_id, op, (previous,)))
        previous = node_id
    return ComputationGraph((GraphInput(input_id, input_shape),), tuple(nodes), (previous,))


# ---- 子图选择 ----

@dataclass(frozen=True)
class SubgraphSelection:
    node_ids: tuple
    boundary_inputs: tuple  # (来源, 消费者, 操作数位置)
    boundary_outputs: tuple  # (生产者, 消费者或 None, 位置)；None 表示图输出

    def __contains__(self, node_id):
        return node_id in self.node_ids

    def __len__(self):
        return len(self.node_ids)


def make_selection(graph, node_ids):
    chosen = set(node_ids)
    missing = chosen - set(graph.node_map)
    if missing:
        raise GraphError(f"选区包含不存在的节点: {sorted(missing)}")
    ordered = tuple(n for n in graph.topological_order if n in chosen)
    boundary_inputs = []
    boundary_outputs = []
    for node_id in ordered:
        node = graph.node_map[node_id]
        for position, source in enumerate(node.inputs):
            if source not in chosen:
                boundary_inputs.append((source, node_id, position))
        for consumer, position in graph.consumers.get(node_id, []):
            if consumer not in chosen:
                boundary_outputs.append((node_id, consumer, position))
    for index, output_id in enumerate(graph.outputs):
        if output_id in chosen:
            boundary_outputs.append((output_id, None, index))
    return SubgraphSelection(ordered, tuple(boundary_inputs), tuple(boundary_outputs))


def is_convex(graph, node_ids, digraph=None):
    """不存在离开选区又重新进入的路径"""
    chosen = set(node_ids)
    digraph = digraph if digraph is not None else graph.to_networkx()
    outside = set()
    for node_id in chosen:
        outside |= nx.descendants(digraph, node_id)
    outside -= chosen
    for node_id in outside:
        if nx.descendants(digraph, node_id) & chosen:
            return False
    return True


def is_connected(graph, node_ids, digraph=None):
    digraph = digraph if digraph is not None else graph.to_networkx()
    if not node_ids:
        return False
    return nx.is_weakly_connected(digraph.subgraph(node_ids))


def _pick(rng, items):
    return items[int(rng.integers(len(items)))]


def select_subgraph(graph, block_label, rng, mean_size=3.0):
    """
    在指定块的可变节点中随机游走选出子图

    从随机种子节点出发，每一步以 1 - 1/mean_size 的概率继续扩展一个相邻节点，
    只接受保持凸性的扩展，期望大小为 mean_size (受可用节点数截断)。
    """
    block = graph.block(block_label)
    candidates = [n for n in graph.topological_order if n in set(block.mutable_ids)]
    if not candidates:
        raise GraphError(f"块 {block_label} 没有可变节点")
    digraph = graph.to_networkx()
    candidate_set = set(candidates)
    selection = [_pick(rng, candidates)]
    stop_prob = 1.0 / max(mean_size, 1.0)

    while rng.random() >= stop_prob:
        chosen = set(selection)
        neighbours = set()
        for node_id in selection:
            neighbours |= set(digraph.predecessors(node_id)) | set(digraph.successors(node_id))
        options = [n for n in candidates if n in neighbours and n in candidate_set and n not in chosen
                   and is_convex(graph, chosen | {n}, digraph)]
        if not options:
            break
        selection.append(_pick(rng, options))
    return make_selection(graph, selection)


# ---- 顺序分解 ----

@dataclass(frozen=True)
class Decomposition:
    chains: tuple  # 每条链为节点 id 元组，按拓扑序
    connectors: tuple


def decompose_sequential(graph, selection):
    chosen = set(selection.node_ids)
    outputs = set(graph.outputs)
    chain_of = {}
    chains = []
    connectors = []
    for node_id in selection.node_ids:
        node = graph.node_map[node_id]
        if not node.op.is_simple:
            connectors.append(node_id)
            continue
        source = node.inputs[0]
        continues = (
            source in chosen
            and source in chain_of
            and source not in outputs
            and [c for c, _ in graph.consumers.get(source, [])] == [node_id]
        )
        if continues:
            chains[chain_of[source]].append(node_id)
            chain_of[node_id] = chain_of[source]
        else:
            chain_of[node_id] = len(chains)
            chains.append([node_id])
    return Decomposition(tuple(tuple(c) for c in chains), tuple(connectors))


def chain_ops(graph, chain):
    return [graph.node_map[n].op for n in chain]


def replace_subgraph(graph, selection, replacement_chains, decomposition=None):
    """
    用新的算子序列替换选区中的每条顺序链，连接算子原样保留

    链尾节点沿用原 id，选区外的节点不受影响；替换为空序列时，链尾的消费者改接链的来源。
    """
    decomposition = decomposition or decompose_sequential(graph, selection)
    if len(replacement_chains) != len(decomposition.chains):
        raise BoundaryMismatchError(
            f"需要 {len(decomposition.chains)} 条替换链, 实际 {len(replacement_chains)} 条")
    for ops in replacement_chains:
        for op in ops:
            if not op.is_simple:
                raise BoundaryMismatchError(f"替换链只能包含单输入算子: {op.label()}")

    total_new = sum(max(len(ops) - 1, 0) for ops in replacement_chains)
    fresh = iter(graph.fresh_ids(total_new))
    remap = {}  # 被删除的链尾 -> 新的值 id (仅空链)
    new_nodes_for = {}  # 链首 id -> 新节点列表
    removed = set()

    def resolve(value_id):
        while value_id in remap:
            value_id = remap[value_id]
        return value_id

    for chain, ops in zip(decomposition.chains, replacement_chains):
        head = graph.node_map[chain[0]]
        tail_id = chain[-1]
        removed.update(chain)
        source = head.inputs[0]
        if not ops:
            remap[tail_id] = source
            new_nodes_for[chain[0]] = []
            continue
        nodes = []
        previous = source
        for i, op in enumerate(ops):
            node_id = tail_id if i == len(ops) - 1 else next(fresh)
            nodes.append(Node(node_id, op, (previous,)))
            previous = node_id
        new_nodes_for[chain[0]] = nodes

    rebuilt = []
    for node in graph.nodes:
        if node.id in new_nodes_for:
            for new_node in new_nodes_for[node.id]:
                rebuilt.append(Node(new_node.id, new_node.op, tuple(resolve(s) for s in new_node.inputs)))
        elif node.id in removed:
            continue
        elif any(s in remap for s in node.inputs):
            rebuilt.append(Node(node.id, node.op, tuple(resolve(s) for s in node.inputs)))
        else:
            rebuilt.append(node)

    outputs = tuple(resolve(o) for o in graph.outputs)
    blocks = []
    for block in graph.blocks:
        ids = []
        for node_id in block.node_ids:
            if node_id in new_nodes_for:
                ids.extend(n.id for n in new_nodes_for[node_id])
            elif node_id not in removed:
                ids.append(node_id)
        blocks.append(Block(block.label, tuple(ids), block.block_type, block.frozen))

    result = graph.evolve(nodes=tuple(rebuilt), outputs=outputs, blocks=tuple(blocks))
    return ensure_valid(result)


# ---- 块操作 ----

def block_order(graph, block):
    members = set(block.node_ids)
    return [n for n in graph.topological_order if n in members]


def block_signature(graph, block):
    """块类型 = (拓扑序上的算子种类序列, 边界形状) 的哈希"""
    members = set(block.node_ids)
    shapes = graph.shapes
    kinds = [graph.node_map[n].op.kind.value for n in block_order(graph, block)]
    boundary_in = []
    boundary_out = []
    for node_id in block_order(graph, block):
        node = graph.node_map[node_id]
        for source in node.inputs:
            if source not in members:
                boundary_in.append(str(shapes[source]))
        external = [c for c, _ in graph.consumers.get(node_id, []) if c not in members]
        if external or node_id in graph.outputs:
            boundary_out.append(str(shapes[node_id]))
    payload = '|'.join(['>'.join(kinds), ','.join(boundary_in), ','.join(boundary_out)])
    return hashlib.sha1(payload.encode('utf-8')).hexdigest()[:10]


def retag_blocks(graph):
    """重新计算所有块的类型标签"""
    blocks = tuple(
        Block(b.label, b.node_ids, block_signature(graph, b), b.frozen) for b in graph.blocks)
    return graph.evolve(blocks=blocks)


def same_type_blocks(graph, label):
    block = graph.block(label)
    return [b for b in graph.blocks if b.label != label and b.block_type == block.block_type]


def corresponding_nodes(graph, block, other, node_ids):
    """同类型块之间按拓扑序位置对应节点"""
    source_order = block_order(graph, block)
    target_order = block_order(graph, other)
    if len(source_order) != len(target_order):
        return None
    index = {n: i for i, n in enumerate(source_order)}
    return [target_order[index[n]] for n in node_ids]


def _block_boundary(graph, block):
    members = set(block.node_ids)
    sources = []
    for node_id in block_order(graph, block):
        for source in graph.node_map[node_id].inputs:
            if source not in members and source not in sources:
                sources.append(source)
    exits = [n for n in block_order(graph, block)
             if n in graph.outputs or any(c not in members for c, _ in graph.consumers.get(n, []))]
    if len(sources) != 1 or len(exits) != 1:
        raise GraphError(f"块 {block.label} 需要单一入口和出口 (入口 {sources}, 出口 {exits})")
    return sources[0], exits[0]


def delete_block(graph, label):
    block = graph.block(label)
    source, exit_id = _block_boundary(graph, block)
    members = set(block.node_ids)

    def resolve(value_id):
        return source if value_id == exit_id else value_id

    nodes = tuple(
        n if exit_id not in n.inputs else Node(n.id, n.op, tuple(resolve(s) for s in n.inputs))
        for n in graph.nodes if n.id not in members)
    outputs = tuple(resolve(o) for o in graph.outputs)
    blocks = tuple(b for b in graph.blocks if b.label != label)
    return ensure_valid(graph.evolve(nodes=nodes, outputs=outputs, blocks=blocks))


def duplicate_block(graph, label, after_label):
    """复制块 label，插入到块 after_label 的出口之后"""
    block = graph.block(label)
    source, exit_id = _block_boundary(graph, block)
    _, anchor = _block_boundary(graph, graph.block(after_label))
    ordered = block_order(graph, block)
    fresh = graph.fresh_ids(len(ordered))
    rename = dict(zip(ordered, fresh))

    copies = []
    for node_id in ordered:
        node = graph.node_map[node_id]
        inputs = tuple(rename.get(s, anchor if s == source else s) for s in node.inputs)
        copies.append(Node(rename[node_id], node.op, inputs))
    new_exit = rename[exit_id]

    rebuilt = []
    for node in graph.nodes:
        if anchor in node.inputs:
            node = Node(node.id, node.op, tuple(new_exit if s == anchor else s for s in node.inputs))
        rebuilt.append(node)
        if node.id == anchor:
            rebuilt.extend(copies)
    if anchor in graph.input_map:
        rebuilt = copies + rebuilt
    outputs = tuple(new_exit if o == anchor else o for o in graph.outputs)

    labels = {b.label for b in graph.blocks}
    suffix = 1
    while f"{label}_copy{suffix}" in labels:
        suffix += 1
    copy_block = Block(f"{label}_copy{suffix}", tuple(fresh), block.block_type,
                       tuple(rename[n] for n in block.frozen))
    blocks = []
    for b in graph.blocks:
        blocks.append(b)
        if b.label == after_label:
            blocks.append(copy_block)
    return ensure_valid(graph.evolve(nodes=tuple(rebuilt), outputs=outputs, blocks=tuple(blocks)))
