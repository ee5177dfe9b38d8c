"""
文本渲染工具

混合矩阵按 (输出维 × 输入维) 的符号表输出，行列都标注维度标签 (B, H, W, C ...)。
配对表把非 X 的元素记为 1。
"""

from propsynth.models.lattice import Loc


def _labels(labels, count):
    if labels is None or len(labels) != count:
        return [str(i) for i in range(count)]
    return list(labels)


def render_grid(cells, row_labels, col_labels):
    width = max([len(str(c)) for row in cells for c in row] + [len(c) for c in col_labels] + [1])
    label_width = max([len(r) for r in row_labels] + [1])
    lines = [' ' * label_width + ' ' + ' '.join(c.rjust(width) for c in col_labels)]
    for label, row in zip(row_labels, cells):
        lines.append(label.ljust(label_width) + ' ' + ' '.join(str(c).rjust(width) for c in row))
    return '\n'.join(lines)


def render_mixing(matrix, out_labels=None, in_labels=None):
    cells = [[Loc(int(v)).glyph for v in row] for row in matrix.data]
    return render_grid(cells, _labels(out_labels, matrix.rows), _labels(in_labels, matrix.cols))


def render_pairing(matrix, out_labels=None, in_labels=None):
    cells = [[int(v) for v in row] for row in matrix.pairing()]
    return render_grid(cells, _labels(out_labels, matrix.rows), _labels(in_labels, matrix.cols))


def render_property(input_id, output_id, state, input_shape):
    """一个 (输入, 输出) 对的完整性质报告"""
    out_labels = state.shape.dim_labels()
    in_labels = input_shape.dim_labels()
    lines = [
        f"{input_id} -> {output_id}",
        f"  shape: {input_shape} -> {state.shape}",
        f"  depth: {state.depth.count} (last: {state.depth.last_kind.value})",
        "  mixing:",
    ]
    lines.extend('    ' + line for line in render_mixing(state.mixing, out_labels, in_labels).splitlines())
    lines.append("  pairing:")
    lines.extend('    ' + line for line in render_pairing(state.mixing, out_labels, in_labels).splitlines())
    return '\n'.join(lines)


def render_table(header, rows):
    """等宽文本表格"""
    rows = [[str(c) for c in row] for row in rows]
    widths = [len(h) for h in header]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = ['  '.join(h.ljust(w) for h, w in zip(header, widths)).rstrip(),
             '  '.join('-' * w for w in widths)]
    for row in rows:
        lines.append('  '.join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return '\n'.join(lines)
