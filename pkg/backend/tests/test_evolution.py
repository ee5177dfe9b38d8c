import json
import os

import numpy as np
import pytest

from propsynth.config import CatalogConfig, EvolutionConfig, MutationConfig, RunConfig, SynthesisConfig
from propsynth.services.evaluation_service import StaticEvaluator
from propsynth.services.evolution_service import evolve
from propsynth.utils.error_handler import EvaluationError

SMALL = RunConfig(
    catalog=CatalogConfig(kernels=(1, 3), windows=(2,), include_grouped=False, include_dilated=False),
    synthesis=SynthesisConfig(max_steps=16),
    evolution=EvolutionConfig(trials=5, secondaries=('params', 'flops')),
)


def _with_trials(trials, **mutation):
    config = RunConfig(SMALL.catalog, SMALL.synthesis, MutationConfig(**mutation),
                       EvolutionConfig(trials=trials, secondaries=('params', 'flops')))
    return config.validate()


def test_zero_trials_evaluates_seed_twice(cnn2_graph):
    history = evolve(cnn2_graph, StaticEvaluator(), np.random.default_rng(0), _with_trials(0))
    assert [r['id'] for r in history.records] == ['seed-0', 'seed-1']
    assert all(r['status'] == 'evaluated' for r in history.records)
    assert history.records[0]['eval_seed'] != history.records[1]['eval_seed']
    assert history.population[0].graph.blocks[0].block_type


def test_run_writes_outputs(cnn2_graph, tmp_path):
    out = tmp_path / 'run'
    history = evolve(cnn2_graph, StaticEvaluator(), np.random.default_rng(0), SMALL, str(out))
    lines = (out / 'history.jsonl').read_text(encoding='utf-8').splitlines()
    assert len(lines) == 2 + 5
    assert [json.loads(line).get('trial') for line in lines][2:] == [0, 1, 2, 3, 4]
    graphs = sorted(os.listdir(out / 'graphs'))
    assert graphs == sorted(f"{ind.id}.json" for ind in history.population)
    header = (out / 'pareto.csv').read_text(encoding='utf-8').splitlines()[0]
    assert header == 'secondary,id,parent,accuracy_proxy,flops,params,throughput_proxy'
    for record in history.records[2:]:
        assert record['status'] in ('evaluated', 'mutation_failed', 'eval_failed')


def test_run_is_reproducible(cnn2_graph, tmp_path):
    for name in ('a', 'b'):
        evolve(cnn2_graph, StaticEvaluator(), np.random.default_rng(9), SMALL, str(tmp_path / name))
    for filename in ('history.jsonl', 'pareto.csv'):
        assert (tmp_path / 'a' / filename).read_bytes() == (tmp_path / 'b' / filename).read_bytes()


class _FailAfterSeeds:
    def __init__(self):
        self.calls = 0
        self.inner = StaticEvaluator()

    def __call__(self, graph, seed):
        self.calls += 1
        if self.calls > 2:
            raise RuntimeError('out of memory')
        return self.inner(graph, seed)


def test_evaluation_failures_are_recorded(cnn2_graph):
    config = _with_trials(3, subgraph_weight=0.0, delete_weight=0.0, duplicate_weight=1.0)
    history = evolve(cnn2_graph, _FailAfterSeeds(), np.random.default_rng(0), config)
    assert len(history.population) == 2
    statuses = [r['status'] for r in history.records[2:]]
    assert statuses == ['eval_failed'] * 3
    assert 'out of memory' in history.records[-1]['error']


def test_incomplete_metrics_fail_the_seed(cnn2_graph):
    with pytest.raises(EvaluationError):
        evolve(cnn2_graph, lambda graph, seed: {'accuracy_proxy': 0.5}, np.random.default_rng(0), _with_trials(0))


def test_front_contains_only_population(cnn2_graph):
    history = evolve(cnn2_graph, StaticEvaluator(), np.random.default_rng(3), SMALL)
    ids = {ind.id for ind in history.population}
    for secondary in ('params', 'flops'):
        front = history.front(secondary)
        assert front
        assert {ind.id for ind in front} <= ids


def test_records_are_streamed_after_writing(cnn2_graph, tmp_path):
    out = tmp_path / 'run'
    seen = []

    def on_record(record):
        lines = (out / 'history.jsonl').read_text(encoding='utf-8').splitlines()
        assert json.loads(lines[-1]) == json.loads(json.dumps(record))
        seen.append(record)

    history = evolve(cnn2_graph, StaticEvaluator(), np.random.default_rng(0), SMALL, str(out), on_record=on_record)
    assert seen == history.records


def test_search_finds_cheaper_models(cnn2_graph):
    config = _with_trials(40)
    runs = [evolve(cnn2_graph, StaticEvaluator(), np.random.default_rng(21), config) for _ in range(2)]
    assert runs[0].records == runs[1].records
    history = runs[0]
    seed_ids = {r['id'] for r in history.records[:2]}
    assert any(r['status'] == 'evaluated' for r in history.records[2:])
    front = history.front('params')
    assert any(ind.id not in seed_ids for ind in front)
