"""Tests for the CSV loader, figure assembly, and the render acceptance runs
against the dqdsim CLI outputs."""

import subprocess
import sys
import warnings
from pathlib import Path

import numpy as np
import pytest

from dqdplots.render import (SchemaError, build_figure, build_spec, main,
                             read_series, render)

CUMULANT_HEADER = "t,omega0_t,c1,fano,skewness,sharpness"


def write_cumulant_csv(path, label, rows, hash_="abc123"):
    lines = [f"# preset=fig2-cumulants", f"# config_hash={hash_}",
             f"# variant=lindblad-consistent", f"# version=0.1.0",
             f"# series={label}", f"# label={label}", CUMULANT_HEADER]
    lines += rows
    Path(path).write_text("\n".join(lines) + "\n")


FIG2_LABELS = ("gamma4_0", "g1_0p1_g4_0p1", "g1_0p5_g4_0p1", "g1_0p1_g4_0p5")


@pytest.fixture
def synthetic_fig2(tmp_path):
    for label in FIG2_LABELS:
        if label == "gamma4_0":
            rows = [f"{t},{125.5 * t},0,,," for t in (0.0, 1.0, 2.0)]
        else:
            rows = [f"{t},{125.5 * t},{0.1 * t},0.9,0.5,0.2"
                    for t in (0.0, 1.0, 2.0)]
        write_cumulant_csv(tmp_path / f"cumulants_{label}.csv", label, rows)
    return tmp_path


def test_reader_parses_metadata_and_gaps(synthetic_fig2):
    s = read_series(synthetic_fig2 / "cumulants_gamma4_0.csv")
    assert s.meta["config_hash"] == "abc123"
    assert s.label == "gamma4_0"
    assert np.all(np.isnan(s.columns["fano"]))      # masked, never zero
    assert np.all(s.columns["c1"] == 0.0)


def test_reader_rejects_ragged_rows(tmp_path):
    path = tmp_path / "cumulants_bad.csv"
    write_cumulant_csv(path, "bad", ["0.0,1.0,2.0"])
    with pytest.raises(SchemaError, match="fields"):
        read_series(path)


def test_missing_column_is_named(tmp_path):
    path = tmp_path / "cumulants_gamma4_0.csv"
    Path(path).write_text("# label=gamma4_0\nt,omega0_t,c1,fano,skewness\n")
    with pytest.raises(SchemaError, match="sharpness"):
        build_spec("fig2-cumulants", tmp_path)


def test_unstyled_series_is_named(tmp_path):
    write_cumulant_csv(tmp_path / "cumulants_mystery.csv", "mystery",
                       ["0.0,0.0,0.0,,,"])
    spec = build_spec("fig2-cumulants", tmp_path)
    with pytest.raises(SchemaError, match="mystery"):
        build_figure(spec)


def test_fig2_layout_and_masking(synthetic_fig2):
    spec = build_spec("fig2-cumulants", synthetic_fig2)
    fig = build_figure(spec)
    assert len(fig.axes) == 4
    for ax in fig.axes:
        assert len(ax.lines) == 4
    # the zero-drain ratio series keeps its gaps in the figure data
    fano_axis = fig.axes[1]
    masked = [ln for ln in fano_axis.lines
              if np.all(np.isnan(ln.get_ydata()))]
    assert len(masked) == 1


def test_header_only_csv_renders_empty_axes(tmp_path):
    for label in FIG2_LABELS:
        write_cumulant_csv(tmp_path / f"cumulants_{label}.csv", label, [])
    spec = build_spec("fig2-cumulants", tmp_path)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        out = render(spec, tmp_path / "figs")
    assert out.exists()
    assert any("no data rows" in str(w.message) for w in caught)


def test_render_is_deterministic(synthetic_fig2, tmp_path):
    spec = build_spec("fig2-cumulants", synthetic_fig2)
    a = render(spec, tmp_path / "a")
    b = render(spec, tmp_path / "b")
    assert a.read_bytes() == b.read_bytes()
    assert a.name == "fig2-cumulants_abc123.svg"


def test_cli_schema_error_exit(tmp_path):
    assert main(["fig2-cumulants", str(tmp_path), str(tmp_path)]) == 1


# --- acceptance: render all three presets' CSVs -------------------------------

@pytest.fixture(scope="module")
def preset_outputs(tmp_path_factory):
    """Real preset CSVs produced through the dqdsim CLI surface."""
    root = tmp_path_factory.mktemp("preset_csvs")
    for preset in ("fig2-cumulants", "fig3-stationary-sweep", "fig4-feedback"):
        proc = subprocess.run(
            [sys.executable, "-m", "dqdsim.cli", "run", preset,
             "--output-dir", str(root / preset)],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
    return root


def test_acceptance_plot_regeneration(preset_outputs, tmp_path):
    expected = {
        "fig2-cumulants": (4, [4, 4, 4, 4]),
        "fig3-stationary-sweep": (2, [2, 2]),
        "fig4-feedback": (1, [3]),
    }
    for preset, (n_axes, lines_per_axis) in expected.items():
        spec = build_spec(preset, preset_outputs / preset)
        fig = build_figure(spec)
        assert len(fig.axes) == n_axes, preset
        assert [len(ax.lines) for ax in fig.axes] == lines_per_axis, preset
        out = render(spec, tmp_path / "figs")
        assert out.exists() and out.stat().st_size > 0

    # the zero-drain cumulant ratios arrive masked from the real run too
    spec = build_spec("fig2-cumulants", preset_outputs / "fig2-cumulants")
    frozen = [s for s in spec.series if s.label == "gamma4_0"]
    assert len(frozen) == 1
    assert np.all(np.isnan(frozen[0].columns["fano"]))
    assert np.all(frozen[0].columns["c1"] == 0.0)
    print("\nACCEPTANCE plot regeneration: PASS")
