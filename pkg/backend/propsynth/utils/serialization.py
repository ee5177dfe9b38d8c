"""
文件格式工具

主要功能:
- serialize / deserialize: 计算图 <-> JSON 文本 (字段顺序固定，便于 diff)
- load_target: 读取合成目标文件 {input_shape, target: {mixing, depth, shape}}
- to_dot: 导出 Graphviz DOT 文本 (节点标签 = 算子种类 + 参数)

解析错误统一抛出 GraphParseError，location 为 "行:列" 或 JSON 路径 (如 $.nodes[2].kind)。

注意: 如果修改了 models/graph.py 中的字段，必须同步修改 FORMAT_VERSION 和这里的读写逻辑。
"""

import json
import logging

from propsynth.models.graph import Block, ComputationGraph, GraphInput, Node
from propsynth.models.lattice import MixingMatrix, TargetSpec
from propsynth.models.primitive import OpKind, PrimitiveOp
from propsynth.models.shape import TensorShape
from propsynth.utils.error_handler import GraphParseError, OpSpecError, ShapeError

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


def serialize(graph):
    data = {'format_version': FORMAT_VERSION}
    data.update(graph.to_dict())
    return (json.dumps(data, indent=2, ensure_ascii=False) + '\n').encode('utf-8')


def _load_json(raw, source):
    if isinstance(raw, bytes):
        try:
            raw = raw.decode('utf-8')
        except UnicodeDecodeError as e:
            raise GraphParseError(f"不是合法的 UTF-8: {e.reason}", f"{source}@{e.start}")
    try:
        return json.loads(raw)
    except json.JSONDecodeError as e:
        raise GraphParseError(e.msg, f"{source}:{e.lineno}:{e.colno}")


def _require(container, key, path, expected_type):
    if not isinstance(container, dict) or key not in container:
        raise GraphParseError(f"缺少字段 {key!r}", path)
    value = container[key]
    if not isinstance(value, expected_type):
        raise GraphParseError(f"字段类型应为 {expected_type.__name__}", f"{path}.{key}")
    return value


def _parse_shape(value, path):
    if not isinstance(value, list) or not all(isinstance(d, int) and not isinstance(d, bool) for d in value):
        raise GraphParseError("形状必须是整数列表", path)
    try:
        return TensorShape(tuple(value))
    except ShapeError as e:
        raise GraphParseError(str(e), path)


def deserialize(raw, source='<graph>'):
    """解析图文件内容 (bytes 或 str)，只做结构解析，不做图校验"""
    data = _load_json(raw, source)
    if not isinstance(data, dict):
        raise GraphParseError("顶层必须是对象", '$')
    version = data.get('format_version', FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise GraphParseError(f"不支持的 format_version: {version}", '$.format_version')

    inputs = []
    for i, item in enumerate(_require(data, 'inputs', '$', list)):
        path = f"$.inputs[{i}]"
        inputs.append(GraphInput(_require(item, 'id', path, str), _parse_shape(item.get('shape'), f"{path}.shape")))

    nodes = []
    for i, item in enumerate(_require(data, 'nodes', '$', list)):
        path = f"$.nodes[{i}]"
        node_id = _require(item, 'id', path, str)
        kind = _require(item, 'kind', path, str)
        params = item.get('params', {}) or {}
        if not isinstance(params, dict):
            raise GraphParseError("params 必须是对象", f"{path}.params")
        try:
            op_kind = OpKind.parse(kind)
        except OpSpecError as e:
            raise GraphParseError(str(e), f"{path}.kind")
        try:
            op = PrimitiveOp.create(op_kind, **params)
        except OpSpecError as e:
            raise GraphParseError(str(e), f"{path}.params")
        node_inputs = _require(item, 'inputs', path, list)
        if not all(isinstance(s, str) for s in node_inputs):
            raise GraphParseError("inputs 必须是字符串列表", f"{path}.inputs")
        nodes.append(Node(node_id, op, tuple(node_inputs)))

    outputs = _require(data, 'outputs', '$', list)
    if not all(isinstance(o, str) for o in outputs):
        raise GraphParseError("outputs 必须是字符串列表", '$.outputs')

    blocks = []
    for i, item in enumerate(data.get('blocks', []) or []):
        path = f"$.blocks[{i}]"
        label = _require(item, 'label', path, str)
        block_nodes = _require(item, 'nodes', path, list)
        frozen = item.get('frozen', [])
        for key, value in (('nodes', block_nodes), ('frozen', frozen)):
            if not isinstance(value, list) or not all(isinstance(n, str) for n in value):
                raise GraphParseError(f"{key} 必须是字符串列表", f"{path}.{key}")
        block_type = item.get('type', '') or ''
        if not isinstance(block_type, str):
            raise GraphParseError("type 必须是字符串", f"{path}.type")
        blocks.append(Block(label, tuple(block_nodes), block_type, tuple(frozen)))
    return ComputationGraph(tuple(inputs), tuple(nodes), tuple(outputs), tuple(blocks))


def read_graph(path):
    try:
        with open(path, 'rb') as f:
            raw = f.read()
    except OSError as e:
        raise GraphParseError(f"无法读取文件: {e.strerror}", str(path))
    return deserialize(raw, source=str(path))


def write_graph(graph, path):
    with open(path, 'wb') as f:
        f.write(serialize(graph))


def load_target(raw, source='<target>'):
    """
    解析目标文件

    Returns:
        (TensorShape, TargetSpec): 输入形状和目标
    """
    data = _load_json(raw, source)
    if not isinstance(data, dict):
        raise GraphParseError("顶层必须是对象", '$')
    input_shape = _parse_shape(data.get('input_shape'), '$.input_shape')
    target = _require(data, 'target', '$', dict)

    mixing = None
    if target.get('mixing') is not None:
        rows = target['mixing']
        if not isinstance(rows, list) or not all(isinstance(r, str) for r in rows):
            raise GraphParseError("mixing 必须是字符串行列表", '$.target.mixing')
        try:
            mixing = MixingMatrix.from_rows(rows)
        except ValueError as e:
            raise GraphParseError(str(e), '$.target.mixing')
        if mixing.shape != (input_shape.rank, input_shape.rank):
            raise GraphParseError(f"mixing 维度应为 {input_shape.rank}×{input_shape.rank}", '$.target.mixing')

    depth = target.get('depth')
    if depth is not None and (isinstance(depth, bool) or not isinstance(depth, int) or depth < 0):
        raise GraphParseError("depth 必须是非负整数", '$.target.depth')
    shape = None
    if target.get('shape') is not None:
        shape = _parse_shape(target['shape'], '$.target.shape')
        if shape.rank != input_shape.rank:
            raise GraphParseError("目标形状的秩必须与输入一致", '$.target.shape')
    try:
        return input_shape, TargetSpec(mixing=mixing, depth=depth, shape=shape)
    except ValueError as e:
        raise GraphParseError(str(e), '$.target')


def read_target(path):
    try:
        with open(path, 'rb') as f:
            raw = f.read()
    except OSError as e:
        raise GraphParseError(f"无法读取文件: {e.strerror}", str(path))
    return load_target(raw, source=str(path))


def target_to_dict(input_shape, target):
    return {'input_shape': input_shape.to_list(), 'target': target.to_dict()}


def to_dot(graph, name='propsynth'):
    lines = [f'digraph "{name}" {{', '  rankdir=TB;']
    for graph_input in graph.inputs:
        lines.append(f'  "{graph_input.id}" [shape=box, label="{graph_input.id}\\n{graph_input.shape}"];')
    for index, block in enumerate(graph.blocks):
        lines.append(f'  subgraph "cluster_{index}" {{')
        lines.append(f'    label="{block.label}";')
        for node_id in block.node_ids:
            lines.append(f'    "{node_id}";')
        lines.append('  }')
    for node in graph.nodes:
        lines.append(f'  "{node.id}" [label="{node.op.label()}"];')
    for node in graph.nodes:
        for position, source in enumerate(node.inputs):
            edge_label = f' [label="{position}"]' if node.op.arity > 1 else ''
            lines.append(f'  "{source}" -> "{node.id}"{edge_label};')
    for output_id in graph.outputs:
        lines.append(f'  "{output_id}" [peripheries=2];')
    lines.append('}')
    return '\n'.join(lines) + '\n'
