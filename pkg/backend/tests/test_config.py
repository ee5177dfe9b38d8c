import json
import logging

import pytest

from propsynth import STEP_TRACE_LOGGER, StepTraceFilter, configure_logging
from propsynth.config import CatalogConfig, RunConfig
from propsynth.utils.error_handler import ConfigError
from conftest import fixture_path


def test_defaults_validate():
    config = RunConfig().validate()
    assert config.evolution.k_percent == 25.0
    assert config.synthesis.compress


def test_demo_config():
    config = RunConfig.from_file(fixture_path('demo_config.json'))
    assert config.catalog.kernels == (1, 3)
    assert config.evolution.secondaries == ('params', 'flops')
    assert config.synthesis.max_steps == 16


@pytest.mark.parametrize('data', [
    {'unknown': 1},
    {'catalog': {'kernel': [3]}},
    {'catalog': []},
    {'mutation': {'share_prob': 1.5}},
    {'mutation': {'subgraph_weight': 0, 'delete_weight': 0, 'duplicate_weight': 0}},
    {'evolution': {'secondaries': []}},
    {'evaluator': 'trained'},
])
def test_invalid_configs(data):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(data)


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_file(str(tmp_path / 'missing.json'))
    broken = tmp_path / 'broken.json'
    broken.write_text('{"seed": ', encoding='utf-8')
    with pytest.raises(ConfigError):
        RunConfig.from_file(str(broken))
    listed = tmp_path / 'list.json'
    listed.write_text(json.dumps([1]), encoding='utf-8')
    with pytest.raises(ConfigError):
        RunConfig.from_file(str(listed))


def test_features_for_channels():
    assert CatalogConfig().resolved_features() == (8, 16, 32, 64)
    assert CatalogConfig(features=(3, 3, 5)).for_channels(99).resolved_features() == (3, 5)


def test_step_trace_only_at_debug():
    record = logging.LogRecord(STEP_TRACE_LOGGER, logging.INFO, __file__, 1, 'step', None, None)
    other = logging.LogRecord('propsynth.services.synthesizer', logging.INFO, __file__, 1, 'x', None, None)
    assert not StepTraceFilter(logging.INFO).filter(record)
    assert StepTraceFilter(logging.DEBUG).filter(record)
    assert StepTraceFilter(logging.INFO).filter(other)


def test_configure_logging_writes_file(tmp_path):
    logger = configure_logging('info', str(tmp_path))
    assert logger.level == logging.INFO
    logging.getLogger('propsynth.tests').info('hello')
    for handler in logger.handlers:
        handler.flush()
    assert 'hello' in (tmp_path / 'propsynth.log').read_text(encoding='utf-8')
    configure_logging('warning')
