"""
性质引导的变异服务

主要功能:
- mutate_properties: 随机弱化一条链的性质 (深度偏移、丢弃形状、把非对角配对降为 X)
- chain_properties: 选区中每条顺序链在其输入形状上的抽象性质
- mutate_graph: 按权重选择子图变异 / 删除块 / 复制块，失败时返回 None
- 子图变异可以按 share_prob 传播到同类型块的对应节点

依赖模型:
- TargetSpec, PropertyState (models/lattice.py)
- SubgraphSelection, Decomposition (services/graph_service.py)

注意: 如果新增变异类型，必须同步修改 config.MutationConfig 中的权重和 MUTATION_KINDS。
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from propsynth.config import CatalogConfig, MutationConfig, SynthesisConfig
from propsynth.models.lattice import Loc, PropertyState, TargetSpec
from propsynth.services.catalog_service import op_catalog
from propsynth.services.distance_service import INF, DistanceContext, d_total
from propsynth.services.graph_service import (
    chain_ops,
    corresponding_nodes,
    decompose_sequential,
    delete_block,
    duplicate_block,
    make_selection,
    replace_subgraph,
    retag_blocks,
    same_type_blocks,
    select_subgraph,
)
from propsynth.services.property_inference import chain_state
from propsynth.services.synthesizer import synthesize_replacement
from propsynth.utils.error_handler import PropsynthError

logger = logging.getLogger(__name__)

MUTATION_KINDS = ('subgraph', 'delete', 'duplicate')


@dataclass
class MutationRecord:
    kind: str
    block: str = None
    nodes: list = field(default_factory=list)
    targets: list = field(default_factory=list)
    shared_with: list = field(default_factory=list)
    reason: str = None

    def to_dict(self):
        data = {'kind': self.kind, 'block': self.block}
        if self.nodes:
            data['nodes'] = list(self.nodes)
        if self.targets:
            data['targets'] = [t.to_dict() for t in self.targets]
        if self.shared_with:
            data['shared_with'] = list(self.shared_with)
        if self.reason:
            data['reason'] = self.reason
        return data


def mutate_properties(state, rng, config=None):
    """
    从推断出的性质生成随机弱化的目标

    - 深度: 以 depth_keep_prob 保持，否则偏移 ±1..±max_depth_shift，下限 0
    - 形状: 以 shape_drop_prob 丢弃 (不再约束)
    - 混合: 每个非 X 的非对角元以 pairing_drop_prob 降为 X，对角元保持
    """
    config = config or MutationConfig()
    depth = state.depth.count
    if rng.random() >= config.depth_keep_prob and config.max_depth_shift > 0:
        shifts = [s for s in range(-config.max_depth_shift, config.max_depth_shift + 1) if s != 0]
        depth = max(0, depth + shifts[int(rng.integers(len(shifts)))])

    shape = None if rng.random() < config.shape_drop_prob else state.shape

    mixing = state.mixing
    for row in range(mixing.rows):
        for col in range(mixing.cols):
            if row == col or mixing[row, col] == Loc.X:
                continue
            if rng.random() < config.pairing_drop_prob:
                mixing = mixing.with_entry(row, col, Loc.X)
    return TargetSpec(mixing=mixing, depth=depth, shape=shape)


def chain_properties(graph, decomposition):
    """每条链: (输入形状, 链的抽象性质)"""
    shapes = graph.shapes
    result = []
    for chain in decomposition.chains:
        input_shape = shapes[graph.node_map[chain[0]].inputs[0]]
        result.append((input_shape, chain_state(chain_ops(graph, chain), input_shape)))
    return result


def target_feasible(input_shape, target, catalog_config=None):
    """从链输入出发，目标在目录下是否可达 (d_total < INF)"""
    catalog_config = catalog_config or CatalogConfig()
    extra = ()
    if target.shape is not None and target.shape.channels != input_shape.channels:
        extra = (target.shape.channels,)
    catalog = op_catalog(catalog_config.for_channels(input_shape.channels, extra=extra))
    context = DistanceContext.build(catalog, input_shape)
    return d_total(PropertyState.identity(input_shape), target, context) != INF


def _sample_targets(chain_states, rng, mutation_config, catalog_config):
    for attempt in range(mutation_config.resample_attempts):
        targets = [mutate_properties(state, rng, mutation_config) for _, state in chain_states]
        if all(target_feasible(shape, t, catalog_config) for (shape, _), t in zip(chain_states, targets)):
            return targets
        logger.debug(f"变异目标不可达, 重新采样 ({attempt + 1}/{mutation_config.resample_attempts})")
    return None


def _share(graph, new_graph, block, selection, chains, rng, share_prob):
    """把替换链按位置对应地应用到同类型块；形状不兼容的块跳过"""
    shared = []
    for other in same_type_blocks(graph, block.label):
        if rng.random() >= share_prob:
            continue
        mapped = corresponding_nodes(graph, block, other, selection.node_ids)
        if mapped is None:
            continue
        try:
            other_selection = make_selection(new_graph, mapped)
            decomposition = decompose_sequential(new_graph, other_selection)
            if len(decomposition.chains) != len(chains):
                continue
            new_graph = replace_subgraph(new_graph, other_selection, chains, decomposition)
        except PropsynthError as e:
            logger.debug(f"块 {other.label} 不能共享变异: {e}")
            continue
        shared.append(other.label)
    return new_graph, shared


def subgraph_mutation(graph, rng, mutation_config=None, catalog_config=None, synthesis_config=None):
    mutation_config = mutation_config or MutationConfig()
    blocks = [b for b in graph.blocks if b.mutable_ids]
    if not blocks:
        return None, MutationRecord('subgraph', reason='no mutable block')
    block = blocks[int(rng.integers(len(blocks)))]
    record = MutationRecord('subgraph', block.label)

    selection = select_subgraph(graph, block.label, rng, mutation_config.selection_mean_size)
    record.nodes = list(selection.node_ids)
    decomposition = decompose_sequential(graph, selection)
    if not decomposition.chains:
        record.reason = 'selection has no chain'
        return None, record

    targets = _sample_targets(chain_properties(graph, decomposition), rng, mutation_config, catalog_config)
    if targets is None:
        record.reason = 'infeasible targets'
        return None, record
    record.targets = targets

    try:
        new_graph, chains = synthesize_replacement(graph, selection, targets, rng, catalog_config, synthesis_config)
    except PropsynthError as e:
        record.reason = str(e)
        return None, record

    new_graph, record.shared_with = _share(graph, new_graph, block, selection, chains, rng,
                                           mutation_config.share_prob)
    return retag_blocks(new_graph), record


def delete_mutation(graph, rng):
    if len(graph.blocks) < 2:
        return None, MutationRecord('delete', reason='only one block')
    block = graph.blocks[int(rng.integers(len(graph.blocks)))]
    record = MutationRecord('delete', block.label)
    try:
        return retag_blocks(delete_block(graph, block.label)), record
    except PropsynthError as e:
        record.reason = str(e)
        return None, record


def duplicate_mutation(graph, rng):
    if not graph.blocks:
        return None, MutationRecord('duplicate', reason='no block')
    block = graph.blocks[int(rng.integers(len(graph.blocks)))]
    anchor = graph.blocks[int(rng.integers(len(graph.blocks)))]
    record = MutationRecord('duplicate', block.label, nodes=[anchor.label])
    try:
        return retag_blocks(duplicate_block(graph, block.label, anchor.label)), record
    except PropsynthError as e:
        record.reason = str(e)
        return None, record


def mutate_graph(graph, rng, mutation_config=None, catalog_config=None, synthesis_config=None):
    """
    随机选择一种变异并应用

    Returns:
        (ComputationGraph 或 None, MutationRecord)；None 表示本次变异失败
    """
    mutation_config = mutation_config or MutationConfig()
    weights = np.array([mutation_config.subgraph_weight, mutation_config.delete_weight,
                        mutation_config.duplicate_weight], dtype=float)
    kind = MUTATION_KINDS[int(rng.choice(len(MUTATION_KINDS), p=weights / weights.sum()))]
    if kind == 'subgraph':
        return subgraph_mutation(graph, rng, mutation_config, catalog_config, synthesis_config or SynthesisConfig())
    if kind == 'delete':
        return delete_mutation(graph, rng)
    return duplicate_mutation(graph, rng)
