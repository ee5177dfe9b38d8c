"""
infer 命令: 读取计算图文件，输出每个 (输入, 输出) 对的混合矩阵、配对表、深度和形状
"""

import csv
import io

import click

from propsynth.commands.base import guarded
from propsynth.services.property_inference import infer_graph_properties
from propsynth.utils.rendering import render_property
from propsynth.utils.serialization import read_graph, to_dot


def render_properties_csv(graph, properties):
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(['input', 'output', 'depth', 'input_shape', 'output_shape', 'mixing'])
    inputs = graph.input_map
    for (input_id, output_id), state in properties.items():
        writer.writerow([input_id, output_id, state.depth.count, str(inputs[input_id].shape),
                         str(state.shape), '/'.join(state.mixing.to_rows())])
    return buffer.getvalue()


@click.command('infer')
@click.argument('graph_file', type=click.Path(dir_okay=False))
@click.option('--format', 'output_format', type=click.Choice(['text', 'dot', 'csv']), default='text',
              show_default=True)
@guarded('infer')
def infer_command(graph_file, output_format):
    """推断计算图的性质"""
    graph = read_graph(graph_file)
    properties = infer_graph_properties(graph)
    if output_format == 'dot':
        click.echo(to_dot(graph), nl=False)
        return
    if output_format == 'csv':
        click.echo(render_properties_csv(graph, properties), nl=False)
        return
    inputs = graph.input_map
    blocks = [render_property(input_id, output_id, state, inputs[input_id].shape)
              for (input_id, output_id), state in properties.items()]
    click.echo('\n\n'.join(blocks))
