import numpy as np
import pandas as pd
import pytest
from plotly.offline import get_plotlyjs

from bukhgeim.charts import (
    create_empty_figure,
    plot_field_heatmap,
    plot_tau_curves,
    save_curves_svg,
    save_heatmap_svg,
)
from bukhgeim.experiments import ExperimentResult
from bukhgeim.report import generate_run_report, write_report

DIGEST = "0" * 63 + "f"


def _result(name="stability", passed=True):
    return ExperimentResult(
        name=name,
        table=pd.DataFrame({"epsilon": [0.1, 0.01], "distance": [1e-2, 1e-3]}),
        checks={"bound_holds": passed},
        summary={"C": 1.5, "nested": {"ignored": 1}},
        curves={"stability_curve": {"distance": ([0.1, 0.01], [1e-2, 1e-3])}},
        x_label="epsilon",
    )


class TestCharts:
    def test_empty_series_gives_placeholder(self):
        fig = plot_tau_curves({}, "empty", "value")
        assert fig.layout.annotations[0].text == create_empty_figure("No sweep points").layout.annotations[0].text
        assert fig.layout.xaxis.visible is False and not fig.data

    def test_trend_line_on_fitted_series(self):
        x = [1.0, 2.0, 4.0, 8.0]
        fig = plot_tau_curves({"err": (x, [1.0 / t for t in x])}, "rate", "error", fit="err")
        assert [trace.name for trace in fig.data] == ["err", "Trend"]
        assert "slope -1.000" in fig.layout.annotations[0].text

    def test_heatmap_masks_outside_the_domain(self, bump64):
        fig = plot_field_heatmap(bump64.field, "bump", (-0.25, 0.25))
        z = np.asarray(fig.data[0].z, dtype=float)
        assert np.isnan(z).any()
        assert np.nanmax(z) == pytest.approx(np.abs(bump64.values).max())

    def test_svg_is_deterministic(self, tmp_path, bump64):
        series = {"a": ([1.0, 2.0, 4.0], [1.0, 0.5, 0.25])}
        first = save_curves_svg(tmp_path / "a.svg", series, "t", "v", DIGEST).read_bytes()
        second = save_curves_svg(tmp_path / "b.svg", series, "t", "v", DIGEST).read_bytes()
        assert first == second
        assert first.startswith(b"<?xml")
        assert f"<!-- config_hash: {DIGEST} -->".encode() in first.splitlines()[1]

        heat = save_heatmap_svg(tmp_path / "h.svg", bump64.field, "bump", (-0.25, 0.25), DIGEST)
        assert heat.read_bytes() == save_heatmap_svg(tmp_path / "g.svg", bump64.field, "bump",
                                                     (-0.25, 0.25), DIGEST).read_bytes()


class TestReport:
    def test_sections_and_hash(self):
        html = generate_run_report([_result(), _result("forward", passed=False)], DIGEST)
        assert 'id="stability"' in html and 'id="forward"' in html
        assert DIGEST in html
        assert "Stability Curve" in html
        assert "status status-fail" in html and "status status-pass" in html
        assert "<td>C</td>" in html

    def test_plotly_bundle_is_embedded_once(self, tmp_path):
        path = write_report(tmp_path / "r.html", [_result(), _result("cgo")], DIGEST)
        text = path.read_text(encoding="utf-8")
        assert text.count(get_plotlyjs()) == 1
