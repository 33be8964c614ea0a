"""Render dqdsim preset CSVs into the three summary figures.

Reads only the documented CSV surfaces (metadata lines, one header row,
empty fields for undefined ratios) and emits one deterministic SVG per
figure, named by preset and config hash.

Usage: dqd-render <preset> <csv-dir> <out-dir>
"""

from __future__ import annotations

import argparse
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

matplotlib.rcParams["svg.hashsalt"] = "dqdplots"


class SchemaError(ValueError):
    """A CSV does not carry the expected header or series identity."""


@dataclass
class Series:
    path: Path
    meta: dict
    columns: dict          # name -> float array, NaN for empty fields

    @property
    def label(self) -> str:
        return self.meta.get("label", self.path.stem)


@dataclass
class PanelSpec:
    title: str
    x_column: str
    y_column: str
    x_label: str
    y_label: str


@dataclass
class FigureSpec:
    """One figure: which CSVs feed it, the panel grid, and per-series style."""

    preset: str
    series: list
    panels: list
    layout: tuple
    styles: dict = field(default_factory=dict)
    per_series_panels: bool = True   # False: one panel per file, columns as series

    def style_for(self, label: str) -> dict:
        if label not in self.styles:
            raise SchemaError(f"no line style defined for series {label!r}")
        return self.styles[label]


def read_series(path) -> Series:
    """Parse a dqdsim CSV: '#' metadata lines, one header, numeric rows.

    Empty fields (undefined ratios) become NaN so downstream plotting leaves
    gaps instead of inventing zeros.
    """
    path = Path(path)
    meta, header, rows = {}, None, []
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            meta[key.strip()] = val.strip()
            continue
        if header is None:
            header = [c.strip() for c in line.split(",")]
            continue
        cells = line.split(",")
        if len(cells) != len(header):
            raise SchemaError(f"{path.name}: row with {len(cells)} fields, "
                              f"header has {len(header)}")
        rows.append([float(c) if c.strip() else np.nan for c in cells])
    if header is None:
        raise SchemaError(f"{path.name}: no header row")
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    columns = {name: data[:, i] for i, name in enumerate(header)}
    return Series(path=path, meta=meta, columns=columns)


def _require_columns(series: Series, names) -> None:
    for name in names:
        if name not in series.columns:
            raise SchemaError(f"{series.path.name}: missing column {name!r}")


CUMULANT_HEADER = ("t", "omega0_t", "c1", "fano", "skewness", "sharpness")
FEEDBACK_HEADER = ("t", "omega0_t", "current", "error", "u1", "u2",
                   "eps_eff", "omega_eff")

FIG2_STYLES = {
    "gamma4_0": dict(color="c", linestyle="--"),
    "g1_0p1_g4_0p1": dict(color="b", linestyle="-."),
    "g1_0p5_g4_0p1": dict(color="purple", linestyle=":"),
    "g1_0p1_g4_0p5": dict(color="r", linestyle="-"),
}

FIG4_STYLES = {
    "eta_1_1": dict(color="b", linestyle="-."),
    "eta_0_2": dict(color="r", linestyle=":"),
    "eta_2_2": dict(color="purple", linestyle="-"),
}

SWEEP_STYLES = {
    "i_s_chid_0p1": dict(color="b", linestyle="-"),
    "i_s_chid_0p5": dict(color="r", linestyle="--"),
    "i_s_gamma4_0p1": dict(color="b", linestyle="-"),
    "i_s_gamma4_0p5": dict(color="r", linestyle="--"),
}


def build_spec(preset: str, csv_dir) -> FigureSpec:
    csv_dir = Path(csv_dir)

    def load(pattern, expect_header):
        paths = sorted(csv_dir.glob(pattern))
        if not paths:
            raise SchemaError(f"no {pattern} files in {csv_dir}")
        out = []
        for p in paths:
            s = read_series(p)
            _require_columns(s, expect_header)
            out.append(s)
        return out

    if preset == "fig2-cumulants":
        series = load("cumulants_*.csv", CUMULANT_HEADER)
        panels = [
            PanelSpec("mean count", "omega0_t", "c1", "ω₀t", "C₁"),
            PanelSpec("Fano factor", "omega0_t", "fano", "ω₀t", "C₂/C₁"),
            PanelSpec("skewness", "omega0_t", "skewness", "ω₀t", "C₃/C₁"),
            PanelSpec("sharpness", "omega0_t", "sharpness", "ω₀t", "C₄/C₁"),
        ]
        return FigureSpec(preset, series, panels, (2, 2), FIG2_STYLES)

    if preset == "fig3-stationary-sweep":
        series = load("stationary_*_sweep.csv", ("epsilon", "omega0"))
        panels = [PanelSpec(s.meta.get("sweep", s.path.stem), "epsilon",
                            "", "ε (μeV)", "I_s") for s in series]
        return FigureSpec(preset, series, panels, (1, len(series)),
                          SWEEP_STYLES, per_series_panels=False)

    if preset == "fig4-feedback":
        series = load("feedback_*.csv", FEEDBACK_HEADER)
        panels = [PanelSpec("current difference", "omega0_t", "error",
                            "ω₀t", "I₀ − I(t)")]
        return FigureSpec(preset, series, panels, (1, 1), FIG4_STYLES)

    raise SchemaError(f"unknown preset {preset!r}")


def build_figure(spec: FigureSpec):
    rows, cols = spec.layout
    fig, axs = plt.subplots(rows, cols, figsize=(4.2 * cols, 3.2 * rows),
                            squeeze=False)
    axes = axs.ravel()

    if spec.per_series_panels:
        for ax, panel in zip(axes, spec.panels):
            for s in spec.series:
                y = s.columns[panel.y_column]
                if np.all(np.isnan(y)) and y.size:
                    warnings.warn(f"{s.path.name}: column {panel.y_column!r} "
                                  "entirely undefined; drawn as a gap")
                if y.size == 0:
                    warnings.warn(f"{s.path.name}: no data rows; empty axes")
                ax.plot(s.columns[panel.x_column], y,
                        label=s.meta.get("series", s.label),
                        **spec.style_for(s.label))
            ax.set_title(panel.title)
            ax.set_xlabel(panel.x_label)
            ax.set_ylabel(panel.y_label)
            ax.legend(fontsize=7)
    else:
        for ax, panel, s in zip(axes, spec.panels, spec.series):
            value_cols = [c for c in s.columns
                          if c not in (panel.x_column, "omega0")]
            if not value_cols:
                raise SchemaError(f"{s.path.name}: no sweep value columns")
            for name in value_cols:
                y = s.columns[name]
                if y.size == 0:
                    warnings.warn(f"{s.path.name}: no data rows; empty axes")
                ax.plot(s.columns[panel.x_column], y, label=name,
                        **spec.style_for(name))
            ax.set_title(panel.title)
            ax.set_xlabel(panel.x_label)
            ax.set_ylabel(panel.y_label)
            ax.legend(fontsize=7)

    meta = spec.series[0].meta if spec.series else {}
    fig.suptitle(f"{spec.preset}  [{meta.get('config_hash', 'no-hash')}]",
                 fontsize=9)
    fig.tight_layout()
    return fig


def render(spec: FigureSpec, out_dir) -> Path:
    """Write the figure as a deterministic SVG named preset + config hash."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = spec.series[0].meta if spec.series else {}
    name = f"{spec.preset}_{meta.get('config_hash', 'no-hash')}.svg"
    out_path = out_dir / name
    fig = build_figure(spec)
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dqd-render",
        description="Render dqdsim preset CSVs into summary figures.")
    parser.add_argument("preset", choices=("fig2-cumulants",
                                           "fig3-stationary-sweep",
                                           "fig4-feedback"))
    parser.add_argument("csv_dir")
    parser.add_argument("out_dir")
    args = parser.parse_args(argv)
    try:
        spec = build_spec(args.preset, args.csv_dir)
        out = render(spec, args.out_dir)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
