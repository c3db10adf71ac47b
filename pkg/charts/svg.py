"""Minimal SVG writer.

Shapes are appended as text commands and written in insertion order with
fixed number formatting, so identical inputs give byte-identical files.
"""
from typing import Iterable, List, Optional, Sequence, Tuple
from xml.sax.saxutils import escape

PREAMBLE = """\
<?xml version="1.0" encoding="UTF-8" standalone="no"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="%(width)d" height="%(height)d" viewBox="0 0 %(width)d %(height)d">
<rect x="0" y="0" width="%(width)d" height="%(height)d" style="fill:#ffffff"/>
"""

POSTAMBLE = """\
</svg>
"""


def _num(value: float) -> str:
    return f"{value:.2f}"


def _points(points: Iterable[Tuple[float, float]]) -> str:
    return ' '.join(f"{_num(x)},{_num(y)}" for x, y in points)


class SvgCanvas:
    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self.commands: List[str] = []
        self._clip_ids = 0

    def render(self) -> str:
        body = ''.join(item + '\n' for item in self.commands)
        return PREAMBLE % {'width': self.width, 'height': self.height} + body + POSTAMBLE

    def save(self, filename: str):
        with open(filename, 'w', encoding='utf-8', newline='\n') as f:
            f.write(self.render())

    def clip_rect(self, x: float, y: float, width: float, height: float) -> str:
        """Define a rectangular clip path and return its id."""
        self._clip_ids += 1
        clip_id = f"clip{self._clip_ids}"
        self.commands.append(
            f'<clipPath id="{clip_id}"><rect x="{_num(x)}" y="{_num(y)}" '
            f'width="{_num(width)}" height="{_num(height)}"/></clipPath>'
        )
        return clip_id

    def rect(self, x: float, y: float, width: float, height: float, fill: str = 'none',
             stroke: Optional[str] = None, stroke_width: float = 1.0):
        style = f"fill:{fill}"
        if stroke:
            style += f";stroke:{stroke};stroke-width:{_num(stroke_width)}"
        self.commands.append(
            f'<rect x="{_num(x)}" y="{_num(y)}" width="{_num(width)}" height="{_num(height)}" style="{style}"/>'
        )

    def circle(self, x: float, y: float, radius: float, fill: str = '#000000', opacity: float = 1.0):
        self.commands.append(
            f'<circle cx="{_num(x)}" cy="{_num(y)}" r="{_num(radius)}" '
            f'style="fill:{fill};fill-opacity:{_num(opacity)}"/>'
        )

    def line(self, points: Sequence[Tuple[float, float]], color: str = '#000000', width: float = 1.0,
             dash: Optional[str] = None, clip_id: Optional[str] = None):
        style = f"fill:none;stroke:{color};stroke-width:{_num(width)}"
        if dash:
            style += f";stroke-dasharray:{dash}"
        clip = f' clip-path="url(#{clip_id})"' if clip_id else ''
        self.commands.append(f'<polyline points="{_points(points)}" style="{style}"{clip}/>')

    def polygon(self, points: Sequence[Tuple[float, float]], fill: str = '#000000'):
        self.commands.append(f'<polygon points="{_points(points)}" style="fill:{fill};stroke:none"/>')

    def text(self, x: float, y: float, text: str, size: int = 12, anchor: str = 'start',
             color: str = '#333333', rotate: Optional[float] = None):
        transform = f' transform="rotate({_num(rotate)} {_num(x)} {_num(y)})"' if rotate is not None else ''
        self.commands.append(
            f'<text x="{_num(x)}" y="{_num(y)}" fill="{color}" font-size="{size}" '
            f'font-family="sans-serif" text-anchor="{anchor}"{transform}>{escape(text)}</text>'
        )


class PlotFrame:
    """Maps data coordinates onto a pixel rectangle (y grows upwards)."""

    def __init__(self, left: float, top: float, width: float, height: float,
                 xlim: Tuple[float, float], ylim: Tuple[float, float]):
        self.left, self.top, self.width, self.height = left, top, width, height
        self.xlim, self.ylim = xlim, ylim

    def x(self, value: float) -> float:
        lo, hi = self.xlim
        return self.left + (value - lo) / (hi - lo) * self.width

    def y(self, value: float) -> float:
        lo, hi = self.ylim
        return self.top + self.height - (value - lo) / (hi - lo) * self.height

    @property
    def bottom(self) -> float:
        return self.top + self.height

    def draw_axes(self, canvas: SvgCanvas, xticks: Sequence[Tuple[float, str]],
                  yticks: Sequence[Tuple[float, str]], xlabel: str, ylabel: str):
        canvas.rect(self.left, self.top, self.width, self.height, stroke='#333333')
        for value, label in xticks:
            px = self.x(value)
            canvas.line([(px, self.bottom), (px, self.bottom + 5)], color='#333333')
            canvas.text(px, self.bottom + 18, label, size=11, anchor='middle')
        for value, label in yticks:
            py = self.y(value)
            canvas.line([(self.left - 5, py), (self.left, py)], color='#333333')
            canvas.line([(self.left, py), (self.left + self.width, py)], color='#e0e0e0', width=0.5)
            canvas.text(self.left - 8, py + 4, label, size=11, anchor='end')
        canvas.text(self.left + self.width / 2, self.bottom + 38, xlabel, size=12, anchor='middle')
        ylabel_x = self.left - 45
        ylabel_y = self.top + self.height / 2
        canvas.text(ylabel_x, ylabel_y, ylabel, size=12, anchor='middle', rotate=-90)
