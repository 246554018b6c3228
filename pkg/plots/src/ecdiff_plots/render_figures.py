"""Render one figure from a benchmark output directory.

Four figure kinds, each consuming a fixed subset of the artifact files:

    panels     dataset.csv + samples_{cfg_x1,cfg_x3,ec_x1}.csv
               2x2 scatter: edited contexts next to each method's samples
    bars       results.csv + summary.json
               grouped bars per metric, one bar per method, ci95 whiskers
    loss       losses.csv
               raw training curves, one line per (mode, seed), no smoothing
    mollifier  mollifier.csv
               (delta, grad_sup) passthrough on log-log axes

All inputs are parsed and validated before the output file is touched, so
a schema error never leaves a partial figure behind. Styles are pinned and
no timestamps are embedded: re-rendering identical inputs writes identical
bytes. Input files are only ever opened for reading.

Invoked standalone:

    ecdiff-plots --input out/ --kind panels --output panels.png
"""

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

KINDS = ("panels", "bars", "loss", "mollifier")

# scatter panels show one reference plus the three headline methods
PANELS = (
    ("context", None),
    ("CFG x1", "cfg_x1"),
    ("CFG x3", "cfg_x3"),
    ("EC x1", "ec_x1"),
)

# bar-chart metric order; anything else in the CSV is appended sorted.
# denoiser_calls is excluded: a 10..30 count would dwarf the unit-scale axes.
PREFERRED_METRICS = ("dcs", "dvs", "w1_sliced", "mmd")

FIGSIZES = {"panels": (8.0, 8.0), "bars": (8.0, 4.5), "loss": (8.0, 4.5), "mollifier": (6.0, 4.5)}

# pinned so repeated renders of the same inputs are byte-stable
STYLE = {
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "ecdiff-plots",
}


class SchemaError(Exception):
    """Input file missing, empty, or not matching the documented schema."""


@dataclass(frozen=True)
class FigureSpec:
    input_dir: Path
    kind: str
    output: Path

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; expected one of: {', '.join(KINDS)}")


class Table:
    """Columns of one artifact CSV, keyed by header name."""

    def __init__(self, path: Path, cols: dict):
        self.path = path
        self.cols = cols

    def strs(self, name: str) -> list:
        return self.cols[name]

    def floats(self, name: str) -> list:
        try:
            return [float(v) for v in self.cols[name]]
        except (TypeError, ValueError):
            raise SchemaError(f"{self.path.name}: column '{name}' has non-numeric entries") from None

    def __len__(self):
        return len(next(iter(self.cols.values())))


def read_table(path: Path, required: tuple) -> Table:
    """Parse an artifact CSV, skipping the leading '# key=value' meta line.

    Missing columns and empty tables are schema errors naming the file
    and column, not silently tolerated.
    """
    if not path.is_file():
        raise SchemaError(f"{path.name}: file not found in {path.parent}")
    with open(path, newline="") as f:
        pos = f.tell()
        if not f.readline().startswith("#"):
            f.seek(pos)
        reader = csv.DictReader(f)
        names = reader.fieldnames or ()
        for col in required:
            if col not in names:
                raise SchemaError(f"{path.name}: missing required column '{col}'")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path.name}: no data rows")
    return Table(path, {col: [row[col] for row in rows] for col in required})


def read_summary(path: Path) -> dict:
    if not path.is_file():
        raise SchemaError(f"{path.name}: file not found in {path.parent}")
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError:
        raise SchemaError(f"{path.name}: not valid JSON") from None
    if not isinstance(doc, dict) or "methods" not in doc:
        raise SchemaError(f"{path.name}: missing required key 'methods'")
    return doc["methods"]


def render_panels(spec: FigureSpec, fig) -> None:
    ds = read_table(spec.input_dir / "dataset.csv", ("ctx_0", "ctx_1"))
    clouds = {"context": (ds.floats("ctx_0"), ds.floats("ctx_1"))}
    for title, method in PANELS:
        if method is None:
            continue
        tab = read_table(spec.input_dir / f"samples_{method}.csv", ("x_0", "x_1"))
        clouds[title] = (tab.floats("x_0"), tab.floats("x_1"))

    axes = fig.subplots(2, 2, sharex=True, sharey=True)
    colors = ("0.45", "C0", "C1", "C2")
    for ax, (title, _), color in zip(axes.flat, PANELS, colors):
        xs, ys = clouds[title]
        ax.scatter(xs, ys, s=8, alpha=0.6, color=color, linewidths=0)
        ax.set_title(title)
        ax.set_aspect("equal", adjustable="box")


def render_bars(spec: FigureSpec, fig) -> None:
    res = read_table(spec.input_dir / "results.csv", ("method", "metric_name", "value"))
    summary = read_summary(spec.input_dir / "summary.json")

    methods = sorted(set(res.strs("method")))
    present = set(res.strs("metric_name"))
    metrics = [m for m in PREFERRED_METRICS if m in present]
    metrics += sorted(present - set(PREFERRED_METRICS) - {"denoiser_calls"})
    if not metrics:
        raise SchemaError(f"{res.path.name}: no plottable metric rows")

    values = {}
    for method, metric, value in zip(res.strs("method"), res.strs("metric_name"), res.floats("value")):
        values.setdefault((method, metric), []).append(value)

    ax = fig.subplots()
    width = 0.8 / len(methods)
    ticks = list(range(len(metrics)))
    for j, method in enumerate(methods):
        stats = summary.get(method)
        if not isinstance(stats, dict):
            raise SchemaError(f"summary.json: missing method '{method}'")
        heights, errs = [], [[], []]
        for metric in metrics:
            runs = values.get((method, metric))
            if runs is None:
                raise SchemaError(f"{res.path.name}: method '{method}' has no '{metric}' rows")
            cell = stats.get(metric, {})
            if "ci95" not in cell or len(cell["ci95"]) != 2:
                raise SchemaError(f"summary.json: method '{method}' metric '{metric}' missing 'ci95'")
            mean = sum(runs) / len(runs)
            heights.append(mean)
            lo, hi = (float(b) for b in cell["ci95"])
            errs[0].append(max(mean - lo, 0.0))
            errs[1].append(max(hi - mean, 0.0))
        offset = (j - (len(methods) - 1) / 2) * width
        ax.bar([t + offset for t in ticks], heights, width, yerr=errs, capsize=3, label=method)
    ax.set_xticks(ticks, metrics)
    ax.axhline(0.0, color="0.2", linewidth=0.8)
    ax.set_ylabel("metric value (mean over runs, ci95)")
    ax.legend(ncols=len(methods), frameon=False)


def render_loss(spec: FigureSpec, fig) -> None:
    tab = read_table(spec.input_dir / "losses.csv", ("step", "loss", "mode", "seed"))
    groups = {}
    for step, loss, mode, seed in zip(tab.floats("step"), tab.floats("loss"), tab.strs("mode"), tab.strs("seed")):
        groups.setdefault((mode, seed), ([], []))
        groups[(mode, seed)][0].append(step)
        groups[(mode, seed)][1].append(loss)

    colors = {mode: f"C{i}" for i, mode in enumerate(sorted({m for m, _ in groups}))}
    ax = fig.subplots()
    seen = set()
    for (mode, seed) in sorted(groups):
        steps, losses = groups[(mode, seed)]
        # raw per-step values; smoothing would hide the stochastic floor
        ax.plot(steps, losses, color=colors[mode], alpha=0.8, linewidth=1.0,
                label=mode if mode not in seen else None)
        seen.add(mode)
    ax.set_xlabel("step")
    ax.set_ylabel("training loss")
    ax.legend(frameon=False)


def render_mollifier(spec: FigureSpec, fig) -> None:
    tab = read_table(spec.input_dir / "mollifier.csv", ("delta", "grad_sup"))
    ax = fig.subplots()
    # data passthrough: the plotted series is exactly the CSV contents
    ax.plot(tab.floats("delta"), tab.floats("grad_sup"), marker="o", color="C3", linewidth=1.2)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("delta")
    ax.set_ylabel("sup |d/dx log p_delta|")


RENDERERS = {"panels": render_panels, "bars": render_bars, "loss": render_loss, "mollifier": render_mollifier}


def render(spec: FigureSpec) -> Path:
    """Render one figure and return the written path.

    Raises SchemaError (and writes nothing) when any input is missing,
    empty, or malformed.
    """
    with plt.rc_context(STYLE):
        fig = plt.figure(figsize=FIGSIZES[spec.kind])
        try:
            RENDERERS[spec.kind](spec, fig)
            fig.tight_layout()
            metadata = {"Date": None} if spec.output.suffix.lower() == ".svg" else None
            fig.savefig(spec.output, metadata=metadata)
        finally:
            plt.close(fig)
    return spec.output


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ecdiff-plots",
        description="Render one figure from a benchmark output directory.",
    )
    parser.add_argument("--input", required=True, type=Path, help="directory holding the benchmark artifacts")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--output", required=True, type=Path, help="figure file to write (.png or .svg)")
    args = parser.parse_args(argv)
    try:
        render(FigureSpec(args.input, args.kind, args.output))
    except SchemaError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    print(f"wrote {args.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
