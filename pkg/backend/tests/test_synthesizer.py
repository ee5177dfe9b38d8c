import itertools

import numpy as np
import pytest

from propsynth.config import CatalogConfig, SynthesisConfig
from propsynth.models import MixingMatrix, TargetSpec, TensorShape
from propsynth.services.catalog_service import op_catalog
from propsynth.services.distance_service import DistanceContext
from propsynth.services.mutation_service import mutate_properties
from propsynth.services.oracle_service import random_chains
from propsynth.services.property_inference import append_abstract, chain_state, op_abstract_semantics, satisfies
from propsynth.services.synthesizer import (
    Outcome, SynthesisTask, chain_catalog, compress_catalog, diversify, greedy_synthesize, synthesize,
)
from propsynth.utils.error_handler import ShapeError
from propsynth.utils.serialization import read_target
from conftest import fixture_path


def _fixture_task(name, compress=True, **kwargs):
    input_shape, target = read_target(fixture_path(name))
    catalog, classes = chain_catalog(input_shape, target, CatalogConfig(), SynthesisConfig(compress=compress))
    return SynthesisTask(input_shape, target, catalog, **kwargs), classes


def _strictly_decreasing(values):
    return all(b < a for a, b in zip(values, values[1:]))


def test_greedy_reaches_depth_target():
    task, _ = _fixture_task('depth4_target.json')
    result = greedy_synthesize(task)
    assert result.outcome is Outcome.SATISFIED
    assert len(result.ops) >= 4
    assert result.distance_trace[-1] == 0
    assert _strictly_decreasing(result.distance_trace)
    assert result.distance_evaluations == len(result.ops) * len(task.catalog)
    assert satisfies(chain_state(result.ops, task.input_shape), task.target)


def test_unreachable_shape_is_infeasible():
    task, _ = _fixture_task('infeasible_target.json')
    result = greedy_synthesize(task)
    assert result.outcome is Outcome.INFEASIBLE
    assert result.ops == ()


def test_satisfied_initial_state_needs_no_ops(mini_catalog, mini_shape):
    task = SynthesisTask(mini_shape, TargetSpec(mixing=MixingMatrix.identity(4)), mini_catalog)
    result = greedy_synthesize(task)
    assert result.satisfied
    assert result.ops == ()
    assert result.distance_trace == [0]


def test_greedy_respects_step_budget(mini_catalog, mini_shape):
    task = SynthesisTask(mini_shape, TargetSpec(depth=5), mini_catalog, max_steps=2)
    result = greedy_synthesize(task)
    assert result.outcome is Outcome.FAILED
    assert result.reason == 'budget'
    assert len(result.ops) == 2


def test_enumerative_is_never_longer(mini_catalog, mini_shape):
    target = TargetSpec(depth=2, shape=TensorShape((1, 4, 4, 4)))
    greedy = greedy_synthesize(SynthesisTask(mini_shape, target, mini_catalog))
    enumerative = synthesize(SynthesisTask(mini_shape, target, mini_catalog), 'enumerative',
                             np.random.default_rng(0))
    assert greedy.satisfied and enumerative.satisfied
    assert len(enumerative.ops) <= len(greedy.ops)
    assert satisfies(chain_state(enumerative.ops, mini_shape), target)


def test_enumerative_spends_more_evaluations(mini_catalog, mini_shape):
    target = TargetSpec(depth=4, shape=mini_shape)
    greedy = greedy_synthesize(SynthesisTask(mini_shape, target, mini_catalog))
    enumerative = synthesize(SynthesisTask(mini_shape, target, mini_catalog), 'enumerative',
                             np.random.default_rng(0))
    assert greedy.distance_evaluations == 24
    assert enumerative.distance_evaluations > 5 * greedy.distance_evaluations


def test_enumerative_budget(mini_catalog, mini_shape):
    task = SynthesisTask(mini_shape, TargetSpec(depth=4), mini_catalog, enumerative_budget=10)
    result = synthesize(task, 'enumerative', np.random.default_rng(0))
    assert result.outcome is Outcome.FAILED
    assert result.reason == 'budget'


def test_stochastic_is_reproducible(mini_catalog, mini_shape):
    target = TargetSpec(depth=3)
    runs = [synthesize(SynthesisTask(mini_shape, target, mini_catalog, original_size=3), 'stochastic',
                       np.random.default_rng(7)) for _ in range(2)]
    assert runs[0].to_dict() == runs[1].to_dict()
    assert runs[0].satisfied
    assert len(runs[0].ops) <= 3 + 2


def test_unknown_mode(mini_catalog, mini_shape):
    with pytest.raises(ValueError):
        synthesize(SynthesisTask(mini_shape, TargetSpec(depth=1), mini_catalog), 'beam', None)


def _brute_force_states(catalog, shape, max_length):
    """长度 ≤ max_length 的所有链的性质"""
    states = [chain_state([], shape)]
    frontier = list(states)
    for _ in range(max_length):
        next_frontier = []
        for state in frontier:
            for op in catalog:
                try:
                    next_frontier.append(append_abstract(state, op))
                except ShapeError:
                    continue
        states.extend(next_frontier)
        frontier = next_frontier
    return states


def test_greedy_infeasible_iff_no_short_chain(mini_catalog, mini_shape):
    identity = MixingMatrix.identity(4)
    dense = op_abstract_semantics(mini_catalog[0], mini_shape).mixing
    conv = op_abstract_semantics(mini_catalog[2], mini_shape).mixing
    all_to_one = MixingMatrix.from_rows(['●●●●'] * 4)
    shapes = [
        mini_shape,
        TensorShape((1, 4, 4, 4)),
        TensorShape((1, 8, 8, 8)),
        TensorShape((1, 5, 5, 4)),
        TensorShape((1, 8, 8, 12)),
    ]
    context = DistanceContext.build(mini_catalog, mini_shape)
    states = _brute_force_states(mini_catalog, mini_shape, 4)

    for mixing, depth, shape in itertools.product([identity, dense, conv, all_to_one], range(4), shapes):
        target = TargetSpec(mixing=mixing, depth=depth, shape=shape)
        result = greedy_synthesize(SynthesisTask(mini_shape, target, mini_catalog, context=context))
        reachable = any(satisfies(state, target) for state in states)
        assert (result.outcome is Outcome.INFEASIBLE) == (not reachable), target
        if result.satisfied:
            assert satisfies(chain_state(result.ops, mini_shape), target)


def test_compressed_classes_share_semantics():
    shape = TensorShape((1, 8, 8, 16))
    catalog, _ = chain_catalog(shape, TargetSpec(depth=1), CatalogConfig(), SynthesisConfig(compress=False))
    context = DistanceContext.build(catalog, shape)
    classes = compress_catalog(catalog, shape, context)
    assert len(classes) < len(catalog)
    assert sum(len(c.members) for c in classes) == len(catalog)
    for op_class in classes:
        for member in op_class.members:
            assert member.kind.family == op_class.representative.kind.family
            try:
                expected = op_abstract_semantics(op_class.representative, shape).signature()
            except ShapeError:
                expected = None
            try:
                actual = op_abstract_semantics(member, shape).signature()
            except ShapeError:
                actual = None
            assert actual == expected


def test_diversify_keeps_target_satisfied():
    task, classes = _fixture_task('depth4_target.json')
    result = greedy_synthesize(task)
    rng = np.random.default_rng(3)
    for _ in range(5):
        ops = diversify(result.ops, classes, rng)
        assert len(ops) == len(result.ops)
        assert satisfies(chain_state(ops, task.input_shape), task.target)


def test_fresh_stochastic_task_respects_extra_steps(mini_catalog, mini_shape):
    # 目标需要 池化、池化、卷积 三步，预算只有 1 + 1
    pool, conv = mini_catalog[4], mini_catalog[2]
    target = TargetSpec(mixing=chain_state([pool, pool, conv], mini_shape).mixing, depth=1)
    task = SynthesisTask(mini_shape, target, mini_catalog, extra_steps=1)
    assert task.max_steps == 64
    assert task.size_hint == 1
    result = synthesize(task, 'stochastic', np.random.default_rng(0))
    assert not result.satisfied
    assert len(result.ops) <= 2


def test_size_hint_uses_target_lower_bound(mini_shape):
    assert SynthesisTask(mini_shape, TargetSpec(depth=3), []).size_hint == 3
    assert SynthesisTask(mini_shape, TargetSpec(shape=TensorShape((1, 4, 4, 8))), []).size_hint == 2
    assert SynthesisTask(mini_shape, TargetSpec(mixing=MixingMatrix.identity(4)), []).size_hint == 0
    assert SynthesisTask(mini_shape, TargetSpec(depth=3), [], original_size=5).size_hint == 5


def _random_tasks(count, seed):
    """默认目录上随机链的推断性质经随机弱化后得到的目标"""
    shape = TensorShape((1, 8, 8, 16))
    catalog = op_catalog(CatalogConfig().for_channels(16))
    rng = np.random.default_rng(seed)
    return shape, [mutate_properties(chain_state(ops, shape), rng)
                   for ops in random_chains(catalog, shape, count, rng, min_length=1, max_length=4)]


def test_greedy_satisfies_random_tasks_on_default_catalog():
    shape, targets = _random_tasks(10, seed=0)
    for target in targets:
        for compress in (True, False):
            catalog, _ = chain_catalog(shape, target, CatalogConfig(), SynthesisConfig(compress=compress))
            result = greedy_synthesize(SynthesisTask(shape, target, catalog))
            assert result.satisfied, (target, compress, result.reason)
            assert satisfies(chain_state(result.ops, shape), target)
            assert _strictly_decreasing(result.distance_trace)
            assert result.distance_evaluations == len(result.ops) * len(catalog)


def test_enumerative_costs_more_on_default_catalog():
    shape = TensorShape((1, 8, 8, 16))
    target = TargetSpec(depth=4)
    catalog, _ = chain_catalog(shape, target)
    greedy = greedy_synthesize(SynthesisTask(shape, target, catalog))
    enumerative = synthesize(SynthesisTask(shape, target, catalog, enumerative_budget=50_000), 'enumerative',
                             np.random.default_rng(0))
    assert greedy.distance_evaluations == 4 * len(catalog)
    assert enumerative.distance_evaluations >= 10 * greedy.distance_evaluations
