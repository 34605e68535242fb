"""Minimal static SVG line plots with zero dependencies.

Deterministic by construction: fixed canvas geometry, explicit decimal
formatting, no timestamps and no randomness, so the same data always
emits byte-identical files.  Only what the CLI artifacts need: multiple
polyline series over shared axes, ticks, labels, a legend.  Gating
logic must never depend on plotting; callers treat this as optional
output.
"""

from xml.sax.saxutils import escape

import numpy as np

__all__ = ["LinePlot"]

_PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#17becf",
    "#7f7f7f",
)

_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 64.0, 16.0, 28.0, 44.0


def _nice_step(span, n=5):
    """Tick step from the 1-2-2.5-5 ladder covering span/n."""
    if span <= 0:
        return 1.0
    raw = span / n
    mag = 10.0 ** np.floor(np.log10(raw))
    for m in (1.0, 2.0, 2.5, 5.0, 10.0):
        if m * mag >= raw:
            return m * mag
    return 10.0 * mag


def _ticks(lo, hi):
    step = _nice_step(hi - lo)
    first = np.ceil(lo / step) * step
    vals = np.arange(first, hi + 0.5 * step, step)
    # snap near-zero ticks produced by cancellation
    vals[np.abs(vals) < 1e-12 * step] = 0.0
    return vals


class LinePlot:
    """Accumulates (x, y) series and writes one SVG file."""

    def __init__(self, title="", xlabel="", ylabel="", width=640, height=420):
        self.title = title
        self.xlabel = xlabel
        self.ylabel = ylabel
        self.width = float(width)
        self.height = float(height)
        self.series = []

    def add(self, x, y, label="", dash=None):
        x = np.asarray(x, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        if x.shape != y.shape:
            raise ValueError("x and y must have the same length")
        self.series.append((x, y, str(label), dash))
        return self

    def _limits(self):
        xs = np.concatenate([s[0] for s in self.series])
        ys = np.concatenate([s[1] for s in self.series])
        xs, ys = xs[np.isfinite(xs)], ys[np.isfinite(ys)]
        if xs.size == 0:
            raise ValueError("no finite data to plot")
        x0, x1 = float(xs.min()), float(xs.max())
        y0, y1 = float(ys.min()), float(ys.max())
        if x1 == x0:
            x0, x1 = x0 - 1.0, x1 + 1.0
        if y1 == y0:
            y0, y1 = y0 - 1.0, y1 + 1.0
        pad = 0.04 * (y1 - y0)
        return x0, x1, y0 - pad, y1 + pad

    def render(self):
        """The SVG document as a string."""
        if not self.series:
            raise ValueError("no series added")
        x0, x1, y0, y1 = self._limits()
        px0, px1 = _MARGIN_L, self.width - _MARGIN_R
        py0, py1 = self.height - _MARGIN_B, _MARGIN_T

        def sx(v):
            return px0 + (v - x0) * (px1 - px0) / (x1 - x0)

        def sy(v):
            return py0 + (v - y0) * (py1 - py0) / (y1 - y0)

        out = []
        out.append(
            '<svg xmlns="http://www.w3.org/2000/svg" width="%g" height="%g" '
            'viewBox="0 0 %g %g" font-family="sans-serif">'
            % (self.width, self.height, self.width, self.height)
        )
        out.append('<rect width="%g" height="%g" fill="white"/>' % (self.width, self.height))
        # grid and ticks
        for tv in _ticks(x0, x1):
            px = sx(tv)
            out.append(
                '<line x1="%.2f" y1="%.2f" x2="%.2f" y2="%.2f" stroke="#dddddd"/>'
                % (px, py1, px, py0)
            )
            out.append(
                '<text x="%.2f" y="%.2f" font-size="11" text-anchor="middle">%s</text>'
                % (px, py0 + 16, escape("%.6g" % tv))
            )
        for tv in _ticks(y0, y1):
            py = sy(tv)
            out.append(
                '<line x1="%.2f" y1="%.2f" x2="%.2f" y2="%.2f" stroke="#dddddd"/>'
                % (px0, py, px1, py)
            )
            out.append(
                '<text x="%.2f" y="%.2f" font-size="11" text-anchor="end">%s</text>'
                % (px0 - 6, py + 4, escape("%.6g" % tv))
            )
        out.append(
            '<rect x="%.2f" y="%.2f" width="%.2f" height="%.2f" fill="none" stroke="black"/>'
            % (px0, py1, px1 - px0, py0 - py1)
        )
        # series as polylines, split at non-finite points
        for i, (xv, yv, _, dash) in enumerate(self.series):
            color = _PALETTE[i % len(_PALETTE)]
            dash_attr = ' stroke-dasharray="%s"' % dash if dash else ""
            good = np.isfinite(xv) & np.isfinite(yv)
            start = 0
            for stop in list(np.flatnonzero(~good)) + [xv.size]:
                seg = slice(start, stop)
                start = stop + 1
                if stop - seg.start < 2:
                    continue
                pts = " ".join(
                    "%.2f,%.2f" % (sx(a), sy(b)) for a, b in zip(xv[seg], yv[seg])
                )
                out.append(
                    '<polyline points="%s" fill="none" stroke="%s" stroke-width="1.5"%s/>'
                    % (pts, color, dash_attr)
                )
        # labels, title, legend
        if self.title:
            out.append(
                '<text x="%.2f" y="%.2f" font-size="13" text-anchor="middle">%s</text>'
                % (0.5 * (px0 + px1), _MARGIN_T - 10, escape(self.title))
            )
        if self.xlabel:
            out.append(
                '<text x="%.2f" y="%.2f" font-size="12" text-anchor="middle">%s</text>'
                % (0.5 * (px0 + px1), self.height - 10, escape(self.xlabel))
            )
        if self.ylabel:
            out.append(
                '<text x="14" y="%.2f" font-size="12" text-anchor="middle" '
                'transform="rotate(-90 14 %.2f)">%s</text>'
                % (0.5 * (py0 + py1), 0.5 * (py0 + py1), escape(self.ylabel))
            )
        ly = py1 + 14
        for i, (_, _, label, dash) in enumerate(self.series):
            if not label:
                continue
            color = _PALETTE[i % len(_PALETTE)]
            dash_attr = ' stroke-dasharray="%s"' % dash if dash else ""
            out.append(
                '<line x1="%.2f" y1="%.2f" x2="%.2f" y2="%.2f" stroke="%s" '
                'stroke-width="1.5"%s/>' % (px1 - 150, ly, px1 - 126, ly, color, dash_attr)
            )
            out.append(
                '<text x="%.2f" y="%.2f" font-size="11">%s</text>'
                % (px1 - 120, ly + 4, escape(label))
            )
            ly += 16
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.render())
