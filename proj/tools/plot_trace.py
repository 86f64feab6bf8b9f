#!/usr/bin/env python3
"""Dev plotting helper: render `semgrid plotdata` CSV (t,series,agent,value).

Usage:
    semgrid plotdata out/trace.csv --figure fig5 > fig5.csv
    tools/plot_trace.py fig5.csv fig5.png
"""

import csv
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__, file=sys.stderr)
        return 2
    src, dst = sys.argv[1], sys.argv[2]

    groups = defaultdict(lambda: defaultdict(lambda: ([], [])))
    with open(src, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames == ["label", "metric", "value"]:
            # bar-figure form
            labels, metrics = [], defaultdict(dict)
            for row in reader:
                if row["label"] not in labels:
                    labels.append(row["label"])
                try:
                    metrics[row["metric"]][row["label"]] = float(row["value"])
                except ValueError:
                    metrics[row["metric"]][row["label"]] = float("nan")
            fig, axes = plt.subplots(1, len(metrics), figsize=(4 * len(metrics), 3.2))
            if len(metrics) == 1:
                axes = [axes]
            for ax, (metric, vals) in zip(axes, sorted(metrics.items())):
                ax.bar(range(len(labels)), [vals.get(l, float("nan")) for l in labels])
                ax.set_xticks(range(len(labels)), labels, rotation=20)
                ax.set_title(metric)
            fig.tight_layout()
            fig.savefig(dst, dpi=130)
            return 0
        for row in reader:
            t, xs_ys = float(row["t"]), groups[row["series"]][row["agent"]]
            xs_ys[0].append(t)
            xs_ys[1].append(float(row["value"]))

    series = sorted(groups)
    fig, axes = plt.subplots(len(series), 1, figsize=(8, 2.2 * len(series)), sharex=True)
    if len(series) == 1:
        axes = [axes]
    for ax, name in zip(axes, series):
        for agent, (xs, ys) in sorted(groups[name].items()):
            ax.plot(xs, ys, linewidth=0.8, label=f"DER {agent}")
        ax.set_ylabel(name)
        ax.legend(fontsize=6, ncol=4, loc="upper right")
    axes[-1].set_xlabel("t [s]")
    fig.tight_layout()
    fig.savefig(dst, dpi=130)
    return 0


if __name__ == "__main__":
    sys.exit(main())
