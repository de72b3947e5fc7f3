import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from ksnbc_plots import (  # noqa: E402
    FigureSpec,
    SchemaMismatch,
    load_series,
    load_sweep,
    plot_ladder,
    plot_phase,
    plot_series,
)
from ksnbc_plots.figures import SERIES_COLUMNS, SWEEP_COLUMNS, render  # noqa: E402


def write_series(path, n=30):
    t = np.linspace(0, 1, n)
    with open(path, "w") as fh:
        fh.write(",".join(SERIES_COLUMNS) + "\n")
        for ti in t:
            row = {c: 1.0 + ti for c in SERIES_COLUMNS}
            row["t"] = ti
            row["dt"] = 1e-3
            fh.write(",".join(f"{row[c]:.17g}" for c in SERIES_COLUMNS) + "\n")
    return path


def write_sweep(path, ps=(1.1, 1.3, 1.5), mus=(0.25, 1.0, 4.0)):
    with open(path, "w") as fh:
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for p in ps:
            for mu in mus:
                outcome = "BlowUp" if p >= 1.5 and mu < 1 else "Completed"
                row = {c: "" for c in SWEEP_COLUMNS}
                row.update(p=p, mu=mu, chi=1.0, outcome=outcome,
                           classification="NoGuarantee", sup_sup_u=1.0,
                           sup_llogl=1.0, sup_phi=1.0, wall_time=0.1)
                fh.write(",".join(str(row[c]) for c in SWEEP_COLUMNS) + "\n")
    return path


class TestLoaders:
    def test_load_series(self, tmp_path):
        data = load_series(write_series(tmp_path / "s.csv"))
        assert set(data) == set(SERIES_COLUMNS)
        assert len(data["t"]) == 30

    def test_missing_column_named(self, tmp_path):
        path = tmp_path / "bad.csv"
        cols = [c for c in SERIES_COLUMNS if c != "psi"]
        path.write_text(",".join(cols) + "\n")
        with pytest.raises(SchemaMismatch) as exc:
            load_series(path)
        assert exc.value.missing == ("psi",)

    def test_load_sweep(self, tmp_path):
        rows = load_sweep(write_sweep(tmp_path / "sw.csv"))
        assert len(rows) == 9
        assert rows[0]["p"] == 1.1
        assert rows[-1]["outcome"] in ("Completed", "BlowUp")

    def test_sweep_schema_checked(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("p,mu\n1.1,0.5\n")
        with pytest.raises(SchemaMismatch):
            load_sweep(path)


class TestFigureSpec:
    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            FigureSpec(inputs=("x.csv",), kind="pie-chart", output=Path("o.png"))


class TestPlotSeries:
    def test_renders_nonzero_png(self, tmp_path):
        csv = write_series(tmp_path / "s.csv")
        spec = FigureSpec(inputs=(csv,), kind="series-panel",
                          output=tmp_path / "s.png")
        out = plot_series(csv, spec)
        assert out.exists() and out.stat().st_size > 0

    def test_single_sample_markers_no_crash(self, tmp_path):
        csv = write_series(tmp_path / "one.csv", n=1)
        spec = FigureSpec(inputs=(csv,), kind="series-panel",
                          output=tmp_path / "one.png")
        out = plot_series(csv, spec)
        assert out.stat().st_size > 0

    def test_log_y_option(self, tmp_path):
        csv = write_series(tmp_path / "s.csv")
        spec = FigureSpec(inputs=(csv,), kind="series-panel",
                          output=tmp_path / "log.png", log_y=True)
        assert plot_series(csv, spec).stat().st_size > 0


class TestPlotPhase:
    def test_renders_with_overlay(self, tmp_path):
        csv = write_sweep(tmp_path / "sw.csv")
        spec = FigureSpec(inputs=(csv,), kind="phase-diagram",
                          output=tmp_path / "ph.png")
        out = plot_phase(csv, spec)
        assert out.stat().st_size > 0

    def test_3d_threshold_overlays(self, tmp_path):
        csv = write_sweep(tmp_path / "sw.csv")
        spec = FigureSpec(inputs=(csv,), kind="phase-diagram",
                          output=tmp_path / "ph3.png",
                          show_3d_thresholds=True, mu0=26.5)
        assert plot_phase(csv, spec).stat().st_size > 0

    def test_uniform_outcome_single_color(self, tmp_path):
        csv = tmp_path / "sw.csv"
        write_sweep(csv, ps=(1.1, 1.2), mus=(0.5, 1.0))
        spec = FigureSpec(inputs=(csv,), kind="phase-diagram",
                          output=tmp_path / "mono.png")
        assert plot_phase(csv, spec).stat().st_size > 0

    def test_needs_two_by_two(self, tmp_path):
        csv = write_sweep(tmp_path / "sw.csv", ps=(1.1,), mus=(0.5, 1.0))
        spec = FigureSpec(inputs=(csv,), kind="phase-diagram",
                          output=tmp_path / "no.png")
        with pytest.raises(ValueError):
            plot_phase(csv, spec)


class TestLadderAndDispatch:
    def test_ladder(self, tmp_path):
        csv = write_series(tmp_path / "s.csv")
        spec = FigureSpec(inputs=(csv,), kind="ladder-plot",
                          output=tmp_path / "lad.png")
        assert plot_ladder(csv, spec).stat().st_size > 0

    def test_render_dispatch(self, tmp_path):
        csv = write_series(tmp_path / "s.csv")
        spec = FigureSpec(inputs=(csv,), kind="series-panel",
                          output=tmp_path / "d.png")
        assert render(spec).exists()


class TestScripts:
    def test_series_script(self, tmp_path):
        import series

        csv = write_series(tmp_path / "s.csv")
        assert series.main([str(csv), str(tmp_path / "out.png")]) == 0
        assert series.main(["/nope.csv", str(tmp_path / "x.png")]) == 1

    def test_phase_script_schema_error(self, tmp_path):
        import phase

        bad = tmp_path / "bad.csv"
        bad.write_text("p,mu\n1.1,0.5\n")
        assert phase.main([str(bad), str(tmp_path / "x.png")]) == 1

    def test_ladder_script(self, tmp_path):
        import ladder

        csv = write_series(tmp_path / "s.csv")
        assert ladder.main([str(csv), str(tmp_path / "lad.png")]) == 0
