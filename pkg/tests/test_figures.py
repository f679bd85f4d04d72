import pytest

from axsim.errors import ConfigError
from axsim.figures import RECIPES, run_figure

QUICK_FIGURES = ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "table5"]


@pytest.mark.parametrize("name", QUICK_FIGURES)
def test_quick_recipes_emit_rows_and_series(name, tmp_path):
    out = run_figure(name, quick=True)
    assert out.rows, name
    assert out.series, name
    paths = out.write(str(tmp_path))
    assert any(p.endswith(f"{name}.csv") for p in paths)
    for label, points in out.series.items():
        assert points, f"{name}:{label}"
        assert all(len(pt) == 2 for pt in points)


def test_unknown_recipe_rejected():
    with pytest.raises(ConfigError, match="fig3"):
        run_figure("fig77")


def test_fig4_quick_keeps_schema():
    full_cols = set(run_figure("table5", quick=True).rows[0])
    quick_cols = set(run_figure("fig4", quick=True).rows[0])
    assert quick_cols == full_cols


def test_fig9_reports_decreasing_thresholds(tmp_path):
    out = run_figure("fig9")
    thresholds = [float(n.rsplit("=", 1)[1]) for n in out.notes
                  if "w_nongemm_pct" in n]
    assert len(thresholds) == 3
    assert thresholds[0] > thresholds[1] > thresholds[2]
    paths = out.write(str(tmp_path))
    assert any("devmem_vs_pcie-8gb" in p for p in paths)


def test_fig8_splits_components():
    out = run_figure("fig8", quick=True)
    assert any(label.endswith("_gemm") for label in out.series)
    assert any(label.endswith("_nongemm") for label in out.series)
    for label, pts in out.series.items():
        if label.startswith("devmem"):
            assert all(y > 0 for _, y in pts)


def test_recipe_names_cover_the_documented_set():
    assert set(RECIPES) == {"fig2", "fig3", "fig4", "fig5", "fig6", "fig7",
                            "fig8", "fig9", "table5"}
