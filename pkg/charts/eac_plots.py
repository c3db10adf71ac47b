"""EAC scatter and per-class bar charts as static SVG files."""
import math
from typing import Optional, Sequence

import numpy as np

from charts.svg import PlotFrame, SvgCanvas
from metrics.eac import ClassEac, EntropyBin, RegressionLine
from metrics.uq import SampleStats, stats_arrays
from utils.logger import experiment_logger

WIDTH, HEIGHT = 640, 480
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 110, 40, 60

# certainty colour ramp, 0 -> 1
RAMP_STOPS = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
RAMP_RGB = np.array([
    [68, 1, 84],
    [59, 82, 139],
    [33, 145, 140],
    [94, 201, 98],
    [253, 231, 37],
], dtype=np.float64)

BAR_COLORS = {
    'entropy': '#d62728',
    'accuracy': '#1f77b4',
    'certainty': '#2ca02c',
}


def certainty_color(value: float) -> str:
    value = min(max(float(value), 0.0), 1.0)
    rgb = [int(round(np.interp(value, RAMP_STOPS, RAMP_RGB[:, k]))) for k in range(3)]
    return '#%02x%02x%02x' % tuple(rgb)


def _frame(xlim, ylim) -> PlotFrame:
    return PlotFrame(MARGIN_LEFT, MARGIN_TOP, WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
                     HEIGHT - MARGIN_TOP - MARGIN_BOTTOM, xlim, ylim)


def _cross(canvas: SvgCanvas, x: float, y: float, size: float = 6.0, arm: float = 1.6):
    """Filled plus-shaped marker centred on (x, y)."""
    canvas.polygon([
        (x - arm, y - size), (x + arm, y - size), (x + arm, y - arm), (x + size, y - arm),
        (x + size, y + arm), (x + arm, y + arm), (x + arm, y + size), (x - arm, y + size),
        (x - arm, y + arm), (x - size, y + arm), (x - size, y - arm), (x - arm, y - arm),
    ], fill='#000000')


def _colorbar(canvas: SvgCanvas, frame: PlotFrame, label: str):
    left = frame.left + frame.width + 25
    steps = 50
    step_h = frame.height / steps
    for i in range(steps):
        value = 1.0 - (i + 0.5) / steps
        canvas.rect(left, frame.top + i * step_h, 16, step_h + 0.5, fill=certainty_color(value))
    canvas.rect(left, frame.top, 16, frame.height, stroke='#333333')
    for value in (0.0, 0.5, 1.0):
        canvas.text(left + 22, frame.top + (1.0 - value) * frame.height + 4, f"{value:.1f}", size=10)
    canvas.text(left + 8, frame.top - 10, label, size=11, anchor='middle')


def emit_eac_scatter(stats: Sequence[SampleStats], bins: Sequence[EntropyBin],
                     regression: Optional[RegressionLine], path: str, num_classes: int,
                     title: str = 'Entropy / accuracy / certainty'):
    """Per-sample (entropy, mean_correct) points coloured by certainty.

    Axes are fixed to [0, ln C] x [0, 1]. Bin accuracies are drawn as crosses
    at the bin midpoints and the regression line, when present, is dashed.
    """
    max_entropy = math.log(num_classes)
    canvas = SvgCanvas(WIDTH, HEIGHT)
    frame = _frame((0.0, max_entropy), (0.0, 1.0))

    xticks = [(max_entropy * k / 4, f"{max_entropy * k / 4:.2f}") for k in range(5)]
    yticks = [(k / 5, f"{k / 5:.1f}") for k in range(6)]
    frame.draw_axes(canvas, xticks, yticks, 'Entropy (nats)', 'Accuracy')
    canvas.text(frame.left + frame.width / 2, MARGIN_TOP - 15, title, size=14, anchor='middle')

    if len(stats):
        h, mc, cert, _ = stats_arrays(stats)
        for x, y, c in zip(h, mc, cert):
            canvas.circle(frame.x(x), frame.y(y), 2.5, fill=certainty_color(c), opacity=0.6)

    for entropy_bin in bins:
        _cross(canvas, frame.x(entropy_bin.midpoint), frame.y(entropy_bin.accuracy))

    if regression is not None:
        clip_id = canvas.clip_rect(frame.left, frame.top, frame.width, frame.height)
        canvas.line([(frame.x(0.0), frame.y(regression(0.0))),
                     (frame.x(max_entropy), frame.y(regression(max_entropy)))],
                    color='#000000', width=1.5, dash='6,4', clip_id=clip_id)

    _colorbar(canvas, frame, 'Certainty')
    canvas.save(path)


def _bar_value(value: Optional[float], name: str, label: int) -> Optional[float]:
    if value is None:
        return None
    if value < 0.0 or value > 100.0:
        experiment_logger.logger.warning(f"class {label} {name} = {value:.6f}% outside [0, 100], clipped")
        return min(max(value, 0.0), 100.0)
    return value


def emit_eac_bars(rows: Sequence[ClassEac], path: str,
                  title: str = 'Per-class entropy, accuracy and certainty'):
    """Three bars per class: entropy as % of ln C, accuracy %, certainty %."""
    canvas = SvgCanvas(WIDTH, HEIGHT)
    groups = max(len(rows), 1)
    frame = _frame((0.0, float(groups)), (0.0, 100.0))

    xticks = [(i + 0.5, str(row.label)) for i, row in enumerate(rows)]
    yticks = [(k * 20.0, f"{k * 20}") for k in range(6)]
    frame.draw_axes(canvas, xticks, yticks, 'Class', 'Percent')
    canvas.text(frame.left + frame.width / 2, MARGIN_TOP - 15, title, size=14, anchor='middle')

    bar_width = 0.25
    for i, row in enumerate(rows):
        values = {
            'entropy': row.entropy_pct,
            'accuracy': None if row.accuracy is None else 100.0 * row.accuracy,
            'certainty': None if row.certainty is None else 100.0 * row.certainty,
        }
        if row.count == 0:
            canvas.text(frame.x(i + 0.5), frame.y(2.0), 'n=0', size=9, anchor='middle')
            continue
        for k, (name, raw) in enumerate(values.items()):
            value = _bar_value(raw, name, row.label)
            if value is None:
                continue
            x0 = frame.x(i + 0.125 + k * bar_width)
            x1 = frame.x(i + 0.125 + (k + 1) * bar_width)
            top = frame.y(value)
            canvas.rect(x0, top, x1 - x0, frame.bottom - top, fill=BAR_COLORS[name])

    legend_x = frame.left + frame.width + 15
    for k, name in enumerate(BAR_COLORS):
        y = frame.top + 10 + k * 20
        canvas.rect(legend_x, y - 9, 12, 12, fill=BAR_COLORS[name])
        canvas.text(legend_x + 18, y + 1, name, size=11)

    canvas.save(path)
