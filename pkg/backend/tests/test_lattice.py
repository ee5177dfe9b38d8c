import itertools

import pytest

from propsynth.models import DepthState, Loc, MixingMatrix, OpRole, TargetSpec, loc_add, loc_mul, mix_compose
from propsynth.models.lattice import mix_join_all, mix_star

CONV_ROWS = ['○××●', '×◑×●', '××◑●', '×××●']
DENSE_ROWS = ['○××●', '×○×●', '××○●', '×××●']


def test_semiring_axioms_hold_for_all_triples():
    for y, z, w in itertools.product(Loc, repeat=3):
        assert loc_add(loc_add(y, z), w) == loc_add(y, loc_add(z, w))
        assert loc_mul(loc_mul(y, z), w) == loc_mul(y, loc_mul(z, w))
        assert loc_add(y, z) == loc_add(z, y)
        assert loc_mul(y, loc_add(z, w)) == loc_add(loc_mul(y, z), loc_mul(y, w))
        assert loc_mul(loc_add(z, w), y) == loc_add(loc_mul(z, y), loc_mul(w, y))
    for y in Loc:
        assert loc_add(y, Loc.X) == y
        assert loc_mul(y, Loc.O) == y
        assert loc_mul(y, Loc.X) == Loc.X


def test_multiplication_table():
    assert loc_mul(Loc.O, Loc.M) == Loc.M
    assert loc_mul(Loc.M, Loc.M) == Loc.M
    assert loc_mul(Loc.M, Loc.A) == Loc.A
    assert loc_mul(Loc.A, Loc.O) == Loc.A
    assert loc_add(Loc.O, Loc.M) == Loc.M


def test_glyph_parsing():
    matrix = MixingMatrix.from_rows(CONV_ROWS)
    assert matrix.to_rows() == CONV_ROWS
    assert MixingMatrix.from_rows(['o x', 'x m']).to_rows() == ['○×', '×◑']
    with pytest.raises(ValueError):
        Loc.parse('?')


def test_dense_then_conv_composes_to_conv():
    dense = MixingMatrix.from_rows(DENSE_ROWS)
    conv = MixingMatrix.from_rows(CONV_ROWS)
    assert mix_compose(dense, conv) == conv
    assert mix_compose(conv, dense) == conv


def test_identity_is_neutral_and_order_is_entrywise():
    conv = MixingMatrix.from_rows(CONV_ROWS)
    identity = MixingMatrix.identity(4)
    assert mix_compose(identity, conv) == conv
    assert mix_compose(conv, identity) == conv
    assert identity <= conv
    assert not conv <= identity
    assert identity.deficient_entries(conv) == 6


def test_join_and_star():
    dense = MixingMatrix.from_rows(DENSE_ROWS)
    conv = MixingMatrix.from_rows(CONV_ROWS)
    assert mix_join_all([dense, conv], 4, 4) == conv
    assert mix_star(MixingMatrix.identity(3)) == MixingMatrix.identity(3)
    star = mix_star(conv)
    assert conv <= star
    assert mix_compose(star, star) == star


def test_pairing_rows():
    conv = MixingMatrix.from_rows(CONV_ROWS)
    assert conv.pairing().tolist() == [[1, 0, 0, 1], [0, 1, 0, 1], [0, 0, 1, 1], [0, 0, 0, 1]]


def test_depth_counts_alternations():
    state = DepthState()
    state = state.advance(OpRole.LINEAR)
    assert state.count == 1
    state = state.advance(OpRole.LINEAR)
    assert state.count == 1
    state = state.advance(OpRole.NONLINEAR)
    state = state.advance(OpRole.LINEAR)
    assert state.count == 3
    with pytest.raises(ValueError):
        DepthState(2, OpRole.NONE)


def test_target_requires_a_component():
    with pytest.raises(ValueError):
        TargetSpec()
    with pytest.raises(ValueError):
        TargetSpec(depth=-1)
