"""
Figures for sweeps and reconstructed fields.

Plotly figures feed the HTML run report; matplotlib writes the static SVG
files next to the CSV tables. SVG output is deterministic (fixed hash salt,
no timestamp metadata) and carries a ``<!-- config_hash: ... -->`` comment.
"""

import io
import logging
from pathlib import Path
from typing import Dict, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import plotly.graph_objects as go  # noqa: E402

from bukhgeim.grid import Field  # noqa: E402
from bukhgeim.io_formats import write_text  # noqa: E402

LOGGER = logging.getLogger(__name__)

# Study figure colours, keyed by what they mark
COLORS = {
    'text': '#2d3748',
    'axis': '#718096',
    'measured': '#2b6cb0',
    'bound': '#c53030',
    'limit': '#dd6b20',
    'pass': '#2f855a',
    'grid': '#edf2f7',
    'extra': '#6b46c1',
}

CHART_CONFIG = {
    'font': "Helvetica, Arial, sans-serif",
    'title': 16,
    'label': 13,
    'tick': 11,
    'note': 11,
    'height': 420,
    'margin': dict(l=64, r=24, t=56, b=56),
}

SERIES_COLORS = [COLORS['measured'], COLORS['bound'], COLORS['pass'], COLORS['limit'], COLORS['extra']]

SVG_RC = {
    "svg.hashsalt": "bukhgeim",
    "svg.fonttype": "none",
    "font.family": "sans-serif",
    "axes.edgecolor": COLORS['axis'],
    "axes.labelcolor": COLORS['text'],
    "grid.color": COLORS['grid'],
}


def create_clean_layout(
    fig: go.Figure,
    title: str = "",
    height: int = None,
    show_legend: bool = False,
    log_axes: bool = False,
) -> go.Figure:
    """
    Apply consistent, clean styling to all report charts.

    Args:
        fig: Plotly figure object
        title: Chart title
        height: Chart height (uses default if None)
        show_legend: Whether to show legend
        log_axes: Log scale on both axes (rate plots)

    Returns:
        Styled figure object
    """
    axis = dict(
        showgrid=True,
        gridcolor=COLORS['grid'],
        linecolor=COLORS['grid'],
        tickfont=dict(size=CHART_CONFIG['tick']),
        title_font=dict(size=CHART_CONFIG['label']),
    )
    if log_axes:
        axis['type'] = 'log'
    fig.update_layout(
        title={
            'text': title,
            'font': {
                'size': CHART_CONFIG['title'],
                'color': COLORS['text'],
                'family': CHART_CONFIG['font']
            },
            'x': 0,
            'xanchor': 'left',
            'pad': {'l': 0, 't': 10}
        },
        font=dict(family=CHART_CONFIG['font'], size=12, color=COLORS['text']),
        plot_bgcolor='white',
        paper_bgcolor='white',
        height=height or CHART_CONFIG['height'],
        margin=CHART_CONFIG['margin'],
        hovermode='closest',
        showlegend=show_legend,
        xaxis=dict(axis),
        yaxis=dict(axis),
    )
    return fig


def create_empty_figure(message: str) -> go.Figure:
    """Placeholder figure when a sweep produced no points."""
    fig = create_clean_layout(go.Figure())
    fig.add_annotation(text=f"<b>{message}</b>", xref="paper", yref="paper", x=0.5, y=0.5,
                       showarrow=False, font=dict(size=CHART_CONFIG['title'], color=COLORS['axis']))
    fig.update_xaxes(visible=False)
    fig.update_yaxes(visible=False)
    return fig


def plot_tau_curves(
    series: Dict[str, Tuple[Sequence[float], Sequence[float]]],
    title: str,
    y_title: str,
    x_title: str = "tau",
    fit: str = None,
) -> go.Figure:
    """
    Log-log curves with an optional dashed least-squares trend on one series.

    Args:
        series: name -> (x values, y values)
        title: chart title
        y_title: y axis label
        x_title: x axis label
        fit: name of the series to fit (smallest x dropped)

    Returns:
        Plotly figure
    """
    if not series or all(len(x) == 0 for x, _ in series.values()):
        return create_empty_figure("No sweep points")

    fig = go.Figure()
    for k, (name, (x, y)) in enumerate(series.items()):
        fig.add_trace(go.Scatter(
            x=list(x), y=list(y), mode='lines+markers', name=name,
            line=dict(color=SERIES_COLORS[k % len(SERIES_COLORS)], width=2),
            hovertemplate=f'{name}<br>{x_title}: %{{x:.3g}}<br>value: %{{y:.3e}}<extra></extra>',
        ))

    if fit in series:
        x, y = (np.asarray(v, dtype=float) for v in series[fit])
        keep = (x > 0) & (y > 0)
        x, y = x[keep][1:], y[keep][1:]
        if len(x) >= 2:
            z = np.polyfit(np.log(x), np.log(y), 1)
            trend = np.exp(np.poly1d(z)(np.log(x)))
            fig.add_trace(go.Scatter(
                x=x, y=trend, mode='lines', name='Trend',
                line=dict(color=COLORS['text'], width=2, dash='dash'),
                hovertemplate='Trend: %{y:.3e}<extra></extra>',
            ))
            fig.add_annotation(
                x=np.log10(x[-1]), y=np.log10(trend[-1]),
                text=f"slope {z[0]:.3f}",
                showarrow=True, arrowhead=2, ax=40, ay=-30,
                bgcolor="white", bordercolor=COLORS['text'], borderwidth=1,
                font=dict(size=CHART_CONFIG['note']),
            )

    fig = create_clean_layout(fig, title, height=450, show_legend=True, log_axes=True)
    fig.update_xaxes(title_text=x_title)
    fig.update_yaxes(title_text=y_title)
    return fig


def plot_field_heatmap(f: Field, title: str, scale: Tuple[float, float]) -> go.Figure:
    """Real part of a field over the extent of X, on a fixed colour scale."""
    grid = f.grid
    extent = grid.domain.extent
    keep = np.abs(grid.axis) <= extent
    axis = grid.axis[keep]
    values = np.real(f.values)[np.ix_(keep, keep)]
    values = np.where(grid.interior_mask[np.ix_(keep, keep)], values, np.nan)

    fig = go.Figure(data=go.Heatmap(
        z=values.T, x=axis, y=axis,
        zmin=scale[0], zmax=scale[1],
        colorscale=[[0, COLORS['measured']], [0.5, 'white'], [1, COLORS['bound']]],
        colorbar=dict(title="Re", thickness=15, len=0.7),
        hovertemplate='x1: %{x:.3f}<br>x2: %{y:.3f}<br>value: %{z:.3e}<extra></extra>',
    ))
    fig = create_clean_layout(fig, title, height=500)
    fig.update_xaxes(title_text="x1", scaleanchor="y")
    fig.update_yaxes(title_text="x2")
    return fig


def _svg_with_hash(fig, config_hash: str) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    text = buf.getvalue()
    comment = f"<!-- config_hash: {config_hash} -->\n"
    head, sep, rest = text.partition("?>\n")
    return head + sep + comment + rest if sep else comment + text


def save_heatmap_svg(
    path: Path, f: Field, title: str, scale: Tuple[float, float], config_hash: str
) -> Path:
    """Linear colour map of Re f over X, fixed scale, deterministic SVG."""
    grid = f.grid
    extent = grid.domain.extent
    keep = np.abs(grid.axis) <= extent
    values = np.real(f.values)[np.ix_(keep, keep)]
    values = np.ma.masked_where(~grid.interior_mask[np.ix_(keep, keep)], values)

    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(5.0, 4.2))
        im = ax.imshow(
            values.T, origin="lower", cmap="RdBu_r", vmin=scale[0], vmax=scale[1],
            extent=(-extent, extent, -extent, extent), interpolation="nearest",
        )
        fig.colorbar(im, ax=ax, shrink=0.85)
        ax.set_title(title, color=COLORS['text'])
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        svg = _svg_with_hash(fig, config_hash)
    LOGGER.debug("heatmap %s", path)
    return write_text(path, svg)


def save_curves_svg(
    path: Path,
    series: Dict[str, Tuple[Sequence[float], Sequence[float]]],
    title: str,
    y_label: str,
    config_hash: str,
    x_label: str = "tau",
) -> Path:
    """Log-log curves, one line per series, deterministic SVG."""
    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(5.5, 4.0))
        for k, (name, (x, y)) in enumerate(series.items()):
            x = np.asarray(x, dtype=float)
            y = np.asarray(y, dtype=float)
            keep = (x > 0) & (y > 0)
            ax.loglog(x[keep], y[keep], marker="o", label=name,
                      color=SERIES_COLORS[k % len(SERIES_COLORS)])
        ax.grid(True, which="both", linewidth=0.5)
        ax.set_title(title, color=COLORS['text'])
        ax.set_xlabel(x_label)
        ax.set_ylabel(y_label)
        if series:
            ax.legend(frameon=False)
        svg = _svg_with_hash(fig, config_hash)
    return write_text(path, svg)
