"""Self-contained HTML run report: summary cards, per-study checks, tables and plotly figures."""

import html
import logging
from datetime import datetime
from pathlib import Path
from typing import List, Sequence

from plotly.offline import get_plotlyjs

from bukhgeim.charts import plot_field_heatmap, plot_tau_curves
from bukhgeim.io_formats import write_text

LOGGER = logging.getLogger(__name__)

SECTION_TITLES = {
    "statphase": "Stationary Phase Rate",
    "cgo": "CGO Threshold and Remainder",
    "forward": "Forward Problem",
    "stability": "Stability Curve",
    "uniqueness": "Uniqueness Sweep",
    "identity": "Reconstruction Identity",
    "recon": "Data-Driven Reconstruction",
}

REPORT_CSS = """
    @media print {
        body { margin: 0.5in; }
        .page-break { page-break-after: always; }
    }
    body {
        font-family: -apple-system, BlinkMacSystemFont, 'Segoe UI', Arial, sans-serif;
        line-height: 1.6;
        color: #333;
        max-width: 1000px;
        margin: 0 auto;
        padding: 20px;
        background-color: #fff;
    }
    .header { border-bottom: 3px solid #2c3e50; padding-bottom: 20px; margin-bottom: 30px; }
    .header h1 { color: #2c3e50; margin: 0; font-size: 32px; font-weight: 600; }
    .header .subtitle { color: #7f8c8d; margin: 10px 0 0 0; font-size: 18px; }
    .header .metadata { color: #95a5a6; font-size: 14px; margin-top: 10px; }
    .toc { background: #f8f9fa; border: 1px solid #e9ecef; padding: 20px; margin: 30px 0; border-radius: 8px; }
    .toc h2 { margin-top: 0; color: #2c3e50; font-size: 20px; }
    .toc ul { list-style: none; padding-left: 0; margin: 10px 0; }
    .toc li { padding: 5px 0; border-bottom: 1px dotted #e9ecef; }
    .toc a { color: #3498db; text-decoration: none; font-weight: 500; }
    .section { margin-bottom: 50px; page-break-inside: avoid; }
    .section h2 {
        color: #2c3e50; border-bottom: 2px solid #ecf0f1; padding-bottom: 10px;
        margin-bottom: 25px; font-size: 26px; font-weight: 600;
    }
    .section h3 { color: #34495e; margin-top: 30px; margin-bottom: 20px; font-size: 20px; font-weight: 600; }
    .metrics-grid { display: grid; grid-template-columns: repeat(auto-fit, minmax(220px, 1fr)); gap: 20px; margin: 25px 0; }
    .metric-card { background: #f8f9fa; padding: 20px; border-left: 4px solid #3498db; border-radius: 4px; }
    .metric-card.danger { border-left-color: #e74c3c; }
    .metric-card.success { border-left-color: #27ae60; }
    .metric-card h4 {
        margin: 0 0 5px 0; color: #7f8c8d; font-size: 14px;
        text-transform: uppercase; letter-spacing: 0.5px;
    }
    .metric-card .value { font-size: 32px; font-weight: bold; color: #2c3e50; margin: 5px 0; line-height: 1; }
    .metric-card .context { font-size: 14px; color: #7f8c8d; margin-top: 8px; }
    .success-box { background: #eafaf1; border: 1px solid #27ae60; padding: 20px; margin: 25px 0; border-radius: 4px; }
    .danger-box { background: #fadbd8; border: 1px solid #e74c3c; padding: 20px; margin: 25px 0; border-radius: 4px; }
    .definition-box { background: #f8f9fa; border-left: 3px solid #95a5a6; padding: 20px; margin: 25px 0; }
    table { width: 100%; border-collapse: collapse; margin: 25px 0; font-size: 13px; }
    th, td { padding: 8px 10px; text-align: left; border-bottom: 1px solid #ecf0f1; }
    th {
        background: #34495e; color: white; font-weight: 600;
        text-transform: uppercase; font-size: 12px; letter-spacing: 0.5px;
    }
    tr:hover { background: #f8f9fa; }
    .chart-container { margin: 25px 0; padding: 20px; background: #f8f9fa; border-radius: 4px; text-align: center; }
    .footer {
        margin-top: 60px; padding-top: 30px; border-top: 1px solid #ecf0f1;
        text-align: center; color: #7f8c8d; font-size: 14px;
    }
    .status { display: inline-block; padding: 4px 12px; border-radius: 20px; font-size: 12px; font-weight: 600; margin-left: 10px; color: white; }
    .status-pass { background: #27ae60; }
    .status-fail { background: #e74c3c; }
"""


def _section_id(name: str) -> str:
    return name.lower().replace(" ", "-")


def generate_table_of_contents(names: Sequence[str]) -> str:
    """Table of contents linking every study section."""
    items = "".join(
        f'<li><a href="#{_section_id(n)}">{html.escape(SECTION_TITLES.get(n, n))}</a></li>' for n in names
    )
    return f'<div class="toc"><h2>Contents</h2><ul>{items}</ul></div>'


def generate_summary(results: Sequence) -> str:
    """Metric cards: studies run, passed and failed."""
    passed = sum(1 for r in results if r.passed)
    failed = len(results) - passed
    total_checks = sum(len(r.checks) for r in results)
    return f"""
    <div class="section" id="summary">
        <h2>Summary</h2>
        <div class="metrics-grid">
            <div class="metric-card">
                <h4>Studies</h4>
                <p class="value">{len(results)}</p>
                <p class="context">{total_checks} property checks</p>
            </div>
            <div class="metric-card success">
                <h4>Passed</h4>
                <p class="value">{passed}</p>
            </div>
            <div class="metric-card {'danger' if failed else 'success'}">
                <h4>Failed</h4>
                <p class="value">{failed}</p>
            </div>
        </div>
    </div>
    """


def generate_result_section(result, color_scale) -> str:
    """Checks, summary scalars, the result table and its figures for one study."""
    title = SECTION_TITLES.get(result.name, result.name)
    status = "pass" if result.passed else "fail"
    box = "success-box" if result.passed else "danger-box"

    checks = "".join(
        f"<li><strong>{html.escape(k)}</strong>: {'pass' if ok else 'FAIL'}</li>"
        for k, ok in result.checks.items()
    ) or "<li>No property checks for this study.</li>"

    scalars = {k: v for k, v in result.summary.items() if isinstance(v, (int, float, str, bool))}
    scalar_rows = "".join(
        f"<tr><td>{html.escape(str(k))}</td><td>{html.escape(f'{v:.6g}' if isinstance(v, float) else str(v))}</td></tr>"
        for k, v in scalars.items()
    )

    figures = []
    for name, series in result.curves.items():
        fig = plot_tau_curves(series, name.replace("_", " ").title(), "value",
                              x_title=result.x_label, fit=next(iter(series), None))
        figures.append(fig)
    for name, f in result.heatmaps.items():
        figures.append(plot_field_heatmap(f, name.replace("_", " "), color_scale))

    charts = ""
    for fig in figures:
        charts += f'<div class="chart-container">{fig.to_html(full_html=False, include_plotlyjs=False)}</div>'

    return f"""
    <div class="section" id="{_section_id(result.name)}">
        <h2>{html.escape(title)} <span class="status status-{status}">{status.upper()}</span></h2>
        <div class="{box}"><ul>{checks}</ul></div>
        {'<table>' + scalar_rows + '</table>' if scalar_rows else ''}
        <h3>Results</h3>
        {result.table.to_html(index=False, float_format=lambda v: f'{v:.4e}', border=0)}
        {charts}
    </div>
    """


def generate_run_report(results: Sequence, config_hash: str, color_scale=(-0.25, 0.25),
                        title: str = "CGO Reconstruction Run Report") -> str:
    """
    Build the complete HTML report.

    Args:
        results: ExperimentResult objects in display order
        config_hash: SHA-256 of the resolved configuration
        color_scale: fixed heatmap range
        title: page title

    Returns:
        HTML string
    """
    report_date = datetime.now().strftime("%B %d, %Y at %I:%M %p")
    body = generate_summary(results)
    body += generate_table_of_contents([r.name for r in results])
    for result in results:
        body += generate_result_section(result, color_scale)

    return f"""<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="UTF-8">
<meta name="viewport" content="width=device-width, initial-scale=1.0">
<title>{html.escape(title)}</title>
<style>{REPORT_CSS}</style>
<script type="text/javascript">{get_plotlyjs()}</script>
</head>
<body>
<div class="header">
    <h1>{html.escape(title)}</h1>
    <p class="subtitle">Complex geometric optics solutions, Dirichlet-to-Neumann data and reconstruction</p>
    <div class="metadata">
        <strong>Generated:</strong> {report_date}<br>
        <strong>Config hash:</strong> <code>{config_hash}</code>
    </div>
</div>
{body}
<div class="footer">
    <p>Every table row in the CSV outputs carries the config hash above.</p>
</div>
</body>
</html>
"""


def write_report(path: Path, results: List, config_hash: str, color_scale=(-0.25, 0.25)) -> Path:
    text = generate_run_report(results, config_hash, color_scale)
    LOGGER.info("run report written to %s", path)
    return write_text(path, text)
