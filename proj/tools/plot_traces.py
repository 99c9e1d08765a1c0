#!/usr/bin/env python3
"""Render residual curves from trace or summary CSVs as a standalone SVG.

Usage:
  plot_traces.py out/figure1/trace_eps1_seed1000.csv ... -o curves.svg
  plot_traces.py --summary out/figure1/summary.csv -o curves.svg

Trace files carry columns k,residual,comp_gap,cum_bits,seed; summary files
carry epsilon,seed,k,mean_residual,std_residual,cum_bits (one curve per
epsilon). The y axis is log10.
"""

import argparse
import csv
import math
import sys

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#e377c2", "#7f7f7f"]


def read_trace(path, column):
    ks, ys = [], []
    with open(path) as f:
        for row in csv.DictReader(f):
            ks.append(int(row["k"]))
            ys.append(float(row[column]))
    return ks, ys


def read_summary(path):
    curves = {}
    with open(path) as f:
        for row in csv.DictReader(f):
            label = row["epsilon"]
            curves.setdefault(label, ([], []))
            curves[label][0].append(int(row["k"]))
            curves[label][1].append(float(row["mean_residual"]))
    return curves


def svg_plot(curves, out_path, width=760, height=480, xlabel="iteration k",
             ylabel="residual"):
    margin_l, margin_r, margin_t, margin_b = 70, 160, 20, 50
    plot_w = width - margin_l - margin_r
    plot_h = height - margin_t - margin_b

    all_x = [x for _, (xs, _) in curves.items() for x in xs]
    all_y = [y for _, (_, ys) in curves.items() for y in ys if y > 0]
    if not all_x or not all_y:
        sys.exit("nothing to plot (empty or nonpositive data)")
    x_lo, x_hi = min(all_x), max(all_x)
    y_lo = math.floor(math.log10(min(all_y)))
    y_hi = math.ceil(math.log10(max(all_y)))
    if y_hi == y_lo:
        y_hi += 1

    def px(x):
        return margin_l + plot_w * (x - x_lo) / max(1, x_hi - x_lo)

    def py(y):
        ly = math.log10(max(y, 1e-300))
        return margin_t + plot_h * (1 - (ly - y_lo) / (y_hi - y_lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{margin_l}" y="{margin_t}" width="{plot_w}" '
        f'height="{plot_h}" fill="none" stroke="#333"/>',
    ]
    for decade in range(y_lo, y_hi + 1):
        y = py(10.0 ** decade)
        parts.append(f'<line x1="{margin_l}" y1="{y:.1f}" '
                     f'x2="{margin_l + plot_w}" y2="{y:.1f}" '
                     f'stroke="#ddd"/>')
        parts.append(f'<text x="{margin_l - 8}" y="{y + 4:.1f}" '
                     f'text-anchor="end" font-size="12">1e{decade}</text>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        x_val = x_lo + frac * (x_hi - x_lo)
        x = px(x_val)
        parts.append(f'<text x="{x:.1f}" y="{margin_t + plot_h + 18}" '
                     f'text-anchor="middle" font-size="12">{int(x_val)}</text>')
    parts.append(f'<text x="{margin_l + plot_w / 2}" '
                 f'y="{height - 12}" text-anchor="middle" '
                 f'font-size="13">{xlabel}</text>')
    parts.append(f'<text x="18" y="{margin_t + plot_h / 2}" font-size="13" '
                 f'transform="rotate(-90 18 {margin_t + plot_h / 2})" '
                 f'text-anchor="middle">{ylabel}</text>')

    for i, (label, (xs, ys)) in enumerate(sorted(curves.items())):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{px(x):.1f},{py(y):.1f}"
                       for x, y in zip(xs, ys) if y > 0)
        parts.append(f'<polyline points="{pts}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        ly = margin_t + 16 + 18 * i
        parts.append(f'<line x1="{margin_l + plot_w + 10}" y1="{ly}" '
                     f'x2="{margin_l + plot_w + 34}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{margin_l + plot_w + 40}" y="{ly + 4}" '
                     f'font-size="12">{label}</text>')
    parts.append("</svg>")
    with open(out_path, "w") as f:
        f.write("\n".join(parts))
    print(f"wrote {out_path}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csvs", nargs="+", help="trace CSVs, or one summary CSV")
    ap.add_argument("-o", "--out", default="curves.svg")
    ap.add_argument("--column", default="residual",
                    help="trace column to plot (residual or comp_gap)")
    ap.add_argument("--summary", action="store_true",
                    help="treat the input as a summary CSV")
    args = ap.parse_args()

    if args.summary:
        curves = {f"eps={k}": v for k, v in read_summary(args.csvs[0]).items()}
    else:
        curves = {path: read_trace(path, args.column) for path in args.csvs}
    svg_plot(curves, args.out, ylabel=args.column if not args.summary
             else "mean residual")


if __name__ == "__main__":
    main()
