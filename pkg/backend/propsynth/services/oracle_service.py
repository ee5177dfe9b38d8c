"""
抽象语义与具体语义的交叉检查

主要功能:
- 半环公理: 对全部 64 个 (y, z, w) 三元组检查结合律、交换律、分配律和单位元
- 单算子一致性: 目录中每个算子的抽象混合矩阵与前向差分得到的具体混合矩阵相等
- 算子链可靠性: 随机 2-3 个算子的链，抽象结果 ≤ 具体结果
- 线性表: LINEARITY 与具体线性检验一致 (ROLE_OVERRIDES 中的算子记为预期覆盖)
- 单调性: 任何简单算子都不会增大 d_mixing / d_depth

corrupt 参数把某种算子的抽象语义替换为全 ●，用于确认检查能发现错误。
"""

import itertools
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from propsynth.models.lattice import Loc, MixingMatrix, OpRole, TargetSpec, loc_add, loc_mul
from propsynth.models.primitive import OpKind
from propsynth.services.distance_service import monotonicity_check
from propsynth.services.property_inference import (
    LINEARITY, ROLE_OVERRIDES, chain_state, op_abstract_semantics, override_semantics,
)
from propsynth.services.reference_executor import concrete_chain_mixing, concrete_mixing, linearity_test
from propsynth.utils.error_handler import OracleError, ShapeError
from propsynth.utils.rendering import render_table

logger = logging.getLogger(__name__)

_MONOTONICITY_TARGETS = 4


@dataclass
class OracleSection:
    name: str
    header: tuple
    rows: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations


@dataclass
class OracleReport:
    sections: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self):
        return all(s.ok for s in self.sections)

    @property
    def violations(self):
        return [f"{s.name}: {v}" for s in self.sections for v in s.violations]

    def section(self, name):
        for s in self.sections:
            if s.name == name:
                return s
        raise KeyError(name)

    def render(self):
        parts = []
        for warning in self.warnings:
            parts.append(f"WARNING: {warning}")
        for s in self.sections:
            status = 'ok' if s.ok else f"{len(s.violations)} violation(s)"
            parts.append(f"== {s.name} [{status}] ==")
            if s.rows:
                parts.append(render_table(s.header, s.rows))
            parts.extend(f"  note: {n}" for n in s.notes)
            parts.extend(f"  VIOLATION: {v}" for v in s.violations)
        parts.append("PASS" if self.ok else f"FAIL ({len(self.violations)} violation(s))")
        return '\n'.join(parts) + '\n'


def semiring_section():
    section = OracleSection('semiring axioms', ('law', 'checked', 'failures'))
    laws = {
        'add associative': lambda y, z, w: loc_add(loc_add(y, z), w) == loc_add(y, loc_add(z, w)),
        'mul associative': lambda y, z, w: loc_mul(loc_mul(y, z), w) == loc_mul(y, loc_mul(z, w)),
        'add commutative': lambda y, z, w: loc_add(y, z) == loc_add(z, y),
        'mul commutative': lambda y, z, w: loc_mul(y, z) == loc_mul(z, y),
        'left distributive': lambda y, z, w: loc_mul(y, loc_add(z, w)) == loc_add(loc_mul(y, z), loc_mul(y, w)),
        'right distributive': lambda y, z, w: loc_mul(loc_add(z, w), y) == loc_add(loc_mul(z, y), loc_mul(w, y)),
        'identities': lambda y, z, w: (loc_add(y, Loc.X) == y and loc_mul(y, Loc.O) == y
                                       and loc_mul(y, Loc.X) == Loc.X),
    }
    triples = list(itertools.product(Loc, repeat=3))
    for name, law in laws.items():
        failures = [t for t in triples if not law(*t)]
        section.rows.append((name, len(triples), len(failures)))
        for y, z, w in failures:
            section.violations.append(f"{name} fails at ({y.glyph}, {z.glyph}, {w.glyph})")
    return section


def _rows(matrix):
    return '/'.join(matrix.to_rows())


def agreement_section(catalog, shape, seed):
    section = OracleSection('per-op agreement', ('op', 'abstract', 'concrete', 'status'))
    skipped = 0
    for op in catalog:
        if not op.is_simple:
            continue
        try:
            abstract = op_abstract_semantics(op, shape).mixing
        except ShapeError:
            skipped += 1
            continue
        concrete = concrete_mixing(op, shape, seed=seed)
        status = 'ok' if abstract == concrete else 'MISMATCH'
        section.rows.append((op.label(), _rows(abstract), _rows(concrete), status))
        if abstract != concrete:
            section.violations.append(f"{op.label()} at {shape}: abstract {_rows(abstract)} != concrete {_rows(concrete)}")
    if skipped:
        section.notes.append(f"{skipped} op(s) not applicable at {shape}")
    return section


def random_chains(catalog, shape, count, rng, min_length=2, max_length=3):
    """按形状逐个挑选可用算子组成随机链；无可用算子时提前截断"""
    simple = [op for op in catalog if op.is_simple]
    chains = []
    for _ in range(count):
        length = int(rng.integers(min_length, max_length + 1))
        ops = []
        current = shape
        for _ in range(length):
            applicable = []
            for op in simple:
                try:
                    applicable.append((op, op_abstract_semantics(op, current).output_shape))
                except ShapeError:
                    continue
            if not applicable:
                break
            op, current = applicable[int(rng.integers(len(applicable)))]
            ops.append(op)
        if ops:
            chains.append(ops)
    return chains


def chain_section(chains, shape, seed):
    section = OracleSection('chain soundness', ('chain', 'abstract', 'concrete', 'status'))
    skipped = 0
    for index, ops in enumerate(chains):
        label = ' > '.join(op.label() for op in ops)
        abstract = chain_state(ops, shape).mixing
        try:
            concrete = concrete_chain_mixing(ops, shape, seed=seed + index)
        except OracleError as e:
            logger.debug(f"跳过链 {label}: {e}")
            skipped += 1
            continue
        sound = abstract <= concrete
        section.rows.append((label, _rows(abstract), _rows(concrete), 'ok' if sound else 'UNSOUND'))
        if not sound:
            section.violations.append(f"{label}: abstract {_rows(abstract)} exceeds concrete {_rows(concrete)}")
    if skipped:
        section.notes.append(f"{skipped} chain(s) exceed the oracle size cap")
    return section


def linearity_section(catalog, shape, seed):
    section = OracleSection('linearity', ('kind', 'table', 'tested', 'status'))
    seen = set()
    for op in catalog:
        if not op.is_simple or op.kind in seen:
            continue
        try:
            op_abstract_semantics(op, shape)
        except ShapeError:
            continue
        seen.add(op.kind)
        table = LINEARITY[op.kind] is OpRole.LINEAR
        tested = linearity_test(op, shape, seed=seed)
        if table == tested:
            status = 'ok'
        elif op.kind in ROLE_OVERRIDES:
            status = 'override'
            section.notes.append(f"{op.kind.value} counted as {LINEARITY[op.kind].value} (role override)")
        else:
            status = 'MISMATCH'
            section.violations.append(f"{op.kind.value}: table says linear={table}, test says linear={tested}")
        section.rows.append((op.kind.value, 'linear' if table else 'nonlinear',
                             'linear' if tested else 'nonlinear', status))
    return section


def monotonicity_section(catalog, chains, shape, rng):
    section = OracleSection('monotonicity', ('samples', 'ops', 'violations'))
    rank = shape.rank
    samples = []
    for ops in [[]] + chains:
        for prefix in range(len(ops) + 1):
            state = chain_state(ops[:prefix], shape)
            for _ in range(_MONOTONICITY_TARGETS):
                mixing = MixingMatrix(rng.integers(0, 4, size=(rank, rank)).astype(np.int8))
                samples.append((state, TargetSpec(mixing=mixing, depth=int(rng.integers(0, 6)))))
    violations = monotonicity_check(catalog, samples)
    section.rows.append((len(samples), len([op for op in catalog if op.is_simple]), len(violations)))
    for label, component, before, after in violations:
        section.violations.append(f"{label} increases d_{component} from {before} to {after}")
    return section


def _all_to_one(semantics):
    rank = semantics.mixing.rows
    data = np.full((rank, semantics.mixing.cols), int(Loc.A), dtype=np.int8)
    return replace(semantics, mixing=MixingMatrix(data))


def run_oracle_suite(catalog, shape, chains=20, seed=0, corrupt=None):
    """
    运行全部交叉检查

    Args:
        catalog: 算子列表 (为空时只检查半环公理并给出警告)
        shape: 检查使用的输入形状
        chains: 随机链的个数
        corrupt: OpKind 或其名称；把该种算子的抽象语义替换为全 ●

    Returns:
        OracleReport
    """
    report = OracleReport()
    report.sections.append(semiring_section())
    if not catalog:
        report.warnings.append("catalog is empty; per-op checks pass vacuously")
        logger.warning("算子目录为空, 跳过单算子与算子链检查")
        return report

    if corrupt is not None:
        kind = corrupt if isinstance(corrupt, OpKind) else OpKind.parse(corrupt)
        report.warnings.append(f"abstract semantics of {kind.value} corrupted to all-to-one")
        with override_semantics(kind, _all_to_one):
            _run_checks(report, catalog, shape, chains, seed)
    else:
        _run_checks(report, catalog, shape, chains, seed)
    return report


def _run_checks(report, catalog, shape, chain_count, seed):
    rng = np.random.default_rng(seed)
    report.sections.append(agreement_section(catalog, shape, seed))
    chains = random_chains(catalog, shape, chain_count, rng)
    report.sections.append(chain_section(chains, shape, seed))
    report.sections.append(linearity_section(catalog, shape, seed))
    report.sections.append(monotonicity_section(catalog, chains, shape, rng))
    for section in report.sections:
        if not section.ok:
            logger.error(f"{section.name}: {len(section.violations)} 处违反")
