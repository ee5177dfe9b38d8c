import numpy as np

from propsynth.config import CatalogConfig
from propsynth.models import MixingMatrix, PrimitiveOp, PropertyState, TargetSpec, TensorShape
from propsynth.services.distance_service import (
    INF, DistanceContext, covering_check, d_depth, d_mixing, d_shape, d_total, distance_components,
    feasible_mixing, monotonicity_check, strengthen_distance,
)
from propsynth.services.catalog_service import op_catalog
from propsynth.services.mutation_service import mutate_properties
from propsynth.services.oracle_service import random_chains
from propsynth.services.property_inference import chain_state

CONV = MixingMatrix.from_rows(['○××●', '×◑×●', '××◑●', '×××●'])
ALL_TO_ONE = MixingMatrix.from_rows(['●●●●'] * 4)


def test_d_shape():
    a = TensorShape((1, 8, 8, 16))
    assert d_shape(a, a) == 0
    assert d_shape(a, TensorShape((1, 4, 4, 16))) == 2
    assert d_shape(a, TensorShape((1, 4, 4, 32))) == 3
    assert d_shape(a, TensorShape((1, 2, 2, 16))) == 6
    assert d_shape(a, TensorShape((1, 5, 5, 16))) == INF
    assert d_shape(a, TensorShape((1, 16, 16, 16))) == INF
    assert d_shape(a, TensorShape((2, 8, 8, 16))) == INF
    assert d_shape(a, TensorShape((1, 8, 4, 16))) == INF


def test_d_mixing_counts_deficient_entries():
    identity = MixingMatrix.identity(4)
    assert d_mixing(identity, CONV) == 6
    assert d_mixing(CONV, identity) == 0
    assert d_mixing(identity, MixingMatrix.identity(3)) == INF


def test_d_depth():
    assert d_depth(0, 4) == 4
    assert d_depth(5, 4) == 0
    assert d_depth(4, 4) == 0


def test_context_capabilities(mini_catalog, mini_shape):
    context = DistanceContext.build(mini_catalog, mini_shape)
    assert context.can_downsample(2)
    assert context.can_downsample(4)
    assert not context.can_downsample(3)
    assert context.channels == frozenset({4, 8})
    assert TensorShape((1, 1, 1, 8)) in context.shapes


def test_context_makes_unreachable_targets_infinite(mini_catalog, mini_shape):
    context = DistanceContext.build(mini_catalog, mini_shape)
    state = PropertyState.identity(mini_shape)
    assert d_total(state, TargetSpec(shape=TensorShape((1, 4, 4, 8))), context) == 3
    assert d_total(state, TargetSpec(shape=TensorShape((1, 8, 8, 12))), context) == INF
    assert d_total(state, TargetSpec(mixing=ALL_TO_ONE), context) == INF
    assert d_total(state, TargetSpec(mixing=CONV), context) == 6


def test_feasible_mixing(mini_catalog, mini_shape):
    identity = MixingMatrix.identity(4)
    assert feasible_mixing(identity, CONV, mini_catalog, mini_shape)
    assert not feasible_mixing(identity, ALL_TO_ONE, mini_catalog, mini_shape)


def test_components_ignore_missing_parts(mini_shape):
    state = PropertyState.identity(mini_shape)
    components = distance_components(state, TargetSpec(depth=2))
    assert components == {'mixing': 0, 'depth': 2, 'shape': 0, 'total': 2}


def test_simple_ops_never_increase_distance(mini_catalog, mini_shape):
    conv_state = chain_state([mini_catalog[2]], mini_shape)
    samples = []
    for state in (PropertyState.identity(mini_shape), conv_state):
        samples.append((state, TargetSpec(mixing=CONV, depth=3)))
        samples.append((state, TargetSpec(depth=1)))
    assert monotonicity_check(mini_catalog, samples) == []


def test_covering(mini_catalog, mini_shape):
    state = PropertyState.identity(mini_shape)
    samples = [
        (state, TargetSpec(depth=2)),
        (state, TargetSpec(mixing=CONV)),
        (state, TargetSpec(shape=TensorShape((1, 4, 4, 4)))),
    ]
    report = covering_check(mini_catalog, samples)
    assert report.checked == 3
    assert report.ok


def test_strengthened_distance():
    strengthened = strengthen_distance(d_depth, epsilon=1)
    assert strengthened(4, 4) == 0
    assert strengthened(1, 3) == 3


def test_downsampling_plateau_is_visible(mini_catalog, mini_shape):
    # 8×8 上卷积无法让空间维全耦合，需要先池化两次
    pool, conv = mini_catalog[4], mini_catalog[2]
    target = TargetSpec(mixing=chain_state([pool, pool, conv], mini_shape).mixing)
    context = DistanceContext.build(mini_catalog, mini_shape)
    identity = PropertyState.identity(mini_shape)
    pooled = chain_state([pool], mini_shape)
    pooled_twice = chain_state([pool, pool], mini_shape)

    assert d_mixing(pooled.mixing, target.mixing) == d_mixing(identity.mixing, target.mixing)
    d0 = d_total(identity, target, context)
    d1 = d_total(pooled, target, context)
    d2 = d_total(pooled_twice, target, context)
    assert d0 != INF
    assert d0 > d1 > d2
    assert d2 == d_mixing(pooled_twice.mixing, target.mixing)


def test_pooled_to_one_cannot_recover_spatial_mixing(mini_catalog, mini_shape):
    pool, conv = mini_catalog[4], mini_catalog[2]
    target = TargetSpec(mixing=chain_state([pool, pool, conv], mini_shape).mixing)
    context = DistanceContext.build(mini_catalog, mini_shape)
    assert d_total(chain_state([pool, pool], mini_shape), target, context) != INF
    assert d_total(chain_state([pool, pool, pool], mini_shape), target, context) == INF


def test_default_catalog_covers_sampled_targets():
    shape = TensorShape((1, 8, 8, 16))
    catalog = op_catalog(CatalogConfig().for_channels(16))
    context = DistanceContext.build(catalog, shape)
    rng = np.random.default_rng(0)
    samples = []
    for ops in random_chains(catalog, shape, 500, rng, min_length=1, max_length=4):
        full = chain_state(ops, shape)
        target = mutate_properties(full, rng)
        for prefix in range(len(ops)):
            samples.append((chain_state(ops[:prefix], shape), target))
    assert len(samples) >= 1000
    report = covering_check(catalog, samples, context=context)
    assert report.checked > 0
    assert report.ok, report.uncovered[:3]
