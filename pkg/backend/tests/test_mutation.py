import numpy as np

from propsynth.config import CatalogConfig, MutationConfig, SynthesisConfig
from propsynth.models import Loc, TargetSpec
from propsynth.services.graph_service import decompose_sequential, make_selection, validate
from propsynth.services.mutation_service import (
    chain_properties, mutate_graph, mutate_properties, target_feasible,
)
from propsynth.services.property_inference import chain_state, satisfies
from propsynth.services.synthesizer import synthesize_replacement

SMALL_CATALOG = CatalogConfig(kernels=(1, 3), windows=(2,), include_grouped=False, include_dilated=False)
KEEP_ALL = MutationConfig(depth_keep_prob=1.0, shape_drop_prob=0.0, pairing_drop_prob=0.0)
DROP_ALL = MutationConfig(depth_keep_prob=1.0, shape_drop_prob=1.0, pairing_drop_prob=1.0)


def _conv_relu_state(graph):
    selection = make_selection(graph, ['c1', 'r1'])
    decomposition = decompose_sequential(graph, selection)
    [(input_shape, state)] = chain_properties(graph, decomposition)
    return selection, input_shape, state


def test_keep_all_reproduces_state(cnn2_graph, rng):
    _, _, state = _conv_relu_state(cnn2_graph)
    assert mutate_properties(state, rng, KEEP_ALL) == TargetSpec.from_state(state)


def test_drop_all_leaves_diagonal(cnn2_graph, rng):
    _, _, state = _conv_relu_state(cnn2_graph)
    target = mutate_properties(state, rng, DROP_ALL)
    assert target.shape is None
    assert target.depth == state.depth.count
    for row in range(target.mixing.rows):
        for col in range(target.mixing.cols):
            expected = state.mixing[row, col] if row == col else Loc.X
            assert target.mixing[row, col] == expected


def test_mutated_mixing_never_exceeds_state(cnn2_graph):
    _, _, state = _conv_relu_state(cnn2_graph)
    rng = np.random.default_rng(5)
    for _ in range(20):
        target = mutate_properties(state, rng)
        assert target.mixing <= state.mixing
        assert target.depth >= 0
        assert target.shape in (None, state.shape)


def test_target_feasibility(cnn2_graph):
    _, input_shape, state = _conv_relu_state(cnn2_graph)
    assert target_feasible(input_shape, TargetSpec.from_state(state), SMALL_CATALOG)
    assert not target_feasible(input_shape, TargetSpec(shape=input_shape.with_spatial((5, 5))), SMALL_CATALOG)


def test_replacement_satisfies_targets(cnn2_graph, rng):
    selection, input_shape, state = _conv_relu_state(cnn2_graph)
    target = TargetSpec.from_state(state)
    new_graph, chains = synthesize_replacement(cnn2_graph, selection, [target], rng, SMALL_CATALOG,
                                               SynthesisConfig(extra_steps=6))
    assert validate(new_graph).ok
    assert satisfies(chain_state(chains[0], input_shape), target)
    assert new_graph.shapes['head'] == cnn2_graph.shapes['head']


def test_delete_only(cnn2_graph, rng):
    config = MutationConfig(subgraph_weight=0.0, delete_weight=1.0, duplicate_weight=0.0)
    graph, record = mutate_graph(cnn2_graph, rng, config, SMALL_CATALOG)
    assert record.kind == 'delete'
    assert len(graph.blocks) == 2
    assert validate(graph).ok


def test_duplicate_only(cnn2_graph, rng):
    config = MutationConfig(subgraph_weight=0.0, delete_weight=0.0, duplicate_weight=1.0)
    graph, record = mutate_graph(cnn2_graph, rng, config, SMALL_CATALOG)
    assert record.kind == 'duplicate'
    assert len(graph.blocks) == 4
    assert len(graph.nodes) > len(cnn2_graph.nodes)


def test_subgraph_mutation_result_is_valid_or_reported(cnn2_graph):
    config = MutationConfig(subgraph_weight=1.0, delete_weight=0.0, duplicate_weight=0.0)
    rng = np.random.default_rng(1)
    for _ in range(5):
        graph, record = mutate_graph(cnn2_graph, rng, config, SMALL_CATALOG, SynthesisConfig(extra_steps=4))
        assert record.kind == 'subgraph'
        if graph is None:
            assert record.reason
        else:
            assert validate(graph).ok
            assert record.nodes


def test_depth_keep_frequency(cnn2_graph):
    _, _, state = _conv_relu_state(cnn2_graph)
    assert state.depth.count >= 1
    rng = np.random.default_rng(11)
    trials = 10_000
    kept = sum(mutate_properties(state, rng).depth == state.depth.count for _ in range(trials))
    assert abs(kept / trials - MutationConfig().depth_keep_prob) <= 0.02
