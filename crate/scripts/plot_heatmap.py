#!/usr/bin/env python3
"""Render a values+ranks CSV pair emitted by `emonli report` as an SVG heatmap.

Cells are colored by within-row rank (rank 1 = darkest) and annotated with the
value. No dependencies beyond the standard library.

Usage:
    plot_heatmap.py <name>.values.csv <name>.ranks.csv <out>.svg
"""

import csv
import sys


def read_table(path):
    with open(path, encoding="utf-8") as handle:
        rows = [r for r in csv.reader(handle) if r and not r[0].startswith("#")]
    if not rows:
        sys.exit(f"{path}: no table rows")
    header, body = rows[0], rows[1:]
    return header[1:], [r[0] for r in body], [r[1:] for r in body]


def rank_color(rank, n_ranks):
    # light yellow for the worst rank to deep blue for rank 1
    t = 1.0 if n_ranks <= 1 else 1.0 - (rank - 1) / (n_ranks - 1)
    r = int(255 - 205 * t)
    g = int(245 - 150 * t)
    b = int(180 + 60 * t)
    return f"rgb({r},{g},{b})"


def main():
    if len(sys.argv) != 4:
        sys.exit(__doc__.strip())
    values_path, ranks_path, out_path = sys.argv[1:]
    cols, row_keys, values = read_table(values_path)
    rank_cols, rank_rows, ranks = read_table(ranks_path)
    if cols != rank_cols:
        sys.exit("values and ranks files have different columns")

    ranks_by_row = dict(zip(rank_rows, ranks))
    cell_w, cell_h, left, top = 86, 30, 120, 60
    width = left + cell_w * len(cols) + 10
    height = top + cell_h * len(row_keys) + 10

    svg = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">'
    ]
    for ci, col in enumerate(cols):
        x = left + ci * cell_w + cell_w / 2
        svg.append(f'<text x="{x}" y="{top - 8}" text-anchor="middle">{col}</text>')
    for ri, row_key in enumerate(row_keys):
        y = top + ri * cell_h
        svg.append(
            f'<text x="{left - 8}" y="{y + cell_h / 2 + 4}" text-anchor="end">{row_key}</text>'
        )
        row_ranks = ranks_by_row.get(row_key)
        for ci, raw in enumerate(values[ri]):
            x = left + ci * cell_w
            if raw == "—" or row_ranks is None:
                fill = "rgb(238,238,238)"
                label = "—"
            else:
                rank = int(row_ranks[ci])
                fill = rank_color(rank, len(cols))
                label = f"{float(raw):.2f}"
            svg.append(
                f'<rect x="{x}" y="{y}" width="{cell_w - 2}" height="{cell_h - 2}" '
                f'fill="{fill}" stroke="white"/>'
            )
            svg.append(
                f'<text x="{x + (cell_w - 2) / 2}" y="{y + cell_h / 2 + 4}" '
                f'text-anchor="middle">{label}</text>'
            )
    svg.append("</svg>")

    with open(out_path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(svg) + "\n")
    print(f"wrote {out_path}")


if __name__ == "__main__":
    main()
