import pytest

from propsynth.models import TensorShape
from propsynth.utils.error_handler import GraphParseError
from propsynth.utils.serialization import deserialize, load_target, read_graph, serialize, to_dot
from conftest import fixture_path


def test_serialized_text_is_stable(cnn2_graph):
    text = serialize(cnn2_graph)
    assert serialize(deserialize(text)) == text
    assert deserialize(text).fingerprint() == cnn2_graph.fingerprint()


def test_unknown_kind_reports_json_path():
    raw = '{"inputs": [{"id": "x", "shape": [1, 4]}], "nodes": [{"id": "a", "kind": "Tanh", "inputs": ["x"]}], "outputs": ["a"]}'
    with pytest.raises(GraphParseError) as excinfo:
        deserialize(raw)
    assert excinfo.value.location == '$.nodes[0].kind'


def test_syntax_error_reports_line_and_column():
    with pytest.raises(GraphParseError) as excinfo:
        deserialize('{\n  "inputs": [,]\n}', source='g.json')
    assert excinfo.value.location.startswith('g.json:2:')


@pytest.mark.parametrize('raw, location', [
    ('[]', '$'),
    ('{"nodes": [], "outputs": []}', '$'),
    ('{"inputs": [{"id": "x", "shape": [1, 0]}], "nodes": [], "outputs": ["x"]}', '$.inputs[0].shape'),
    ('{"inputs": [], "nodes": [], "outputs": [], "format_version": 7}', '$.format_version'),
    ('{"inputs": [], "nodes": [], "outputs": [], "blocks": [{"label": "b", "nodes": [], "frozen": "add"}]}',
     '$.blocks[0].frozen'),
    ('{"inputs": [], "nodes": [], "outputs": [], "blocks": [{"label": "b", "nodes": [3]}]}',
     '$.blocks[0].nodes'),
])
def test_structural_errors(raw, location):
    with pytest.raises(GraphParseError) as excinfo:
        deserialize(raw)
    assert excinfo.value.location == location


def test_missing_file():
    with pytest.raises(GraphParseError):
        read_graph(fixture_path('does_not_exist.json'))


def test_load_target():
    input_shape, target = load_target('{"input_shape": [1, 8, 8, 16], "target": {"depth": 2}}')
    assert input_shape == TensorShape((1, 8, 8, 16))
    assert target.depth == 2 and target.mixing is None and target.shape is None


@pytest.mark.parametrize('target', [
    '{}',
    '{"mixing": ["○×", "×○"]}',
    '{"depth": -1}',
    '{"shape": [1, 8, 16]}',
])
def test_bad_targets(target):
    with pytest.raises(GraphParseError):
        load_target('{"input_shape": [1, 8, 8, 16], "target": %s}' % target)


def test_dot_export(vit_graph):
    dot = to_dot(vit_graph)
    assert dot.startswith('digraph "propsynth" {')
    assert '"fc1" [label="Dense(f=64)"];' in dot
    assert '"fc2" [peripheries=2];' in dot
