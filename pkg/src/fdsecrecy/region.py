"""Grid-sweep results, staircase region assembly and CSV output."""
import io
from dataclasses import dataclass, field

import numpy as np

from .channel import CovarianceDesign

TIE_TOL = 1e-9


@dataclass
class RegionResult:
    """Per-cell outcome of a (k, l) rate-target sweep.

    ``r1``/``r2`` are the rate targets; ``r1_lower``/``r2_lower`` the rates
    the cell certifies (equal to the targets under perfect CSI) and
    ``re`` the leakage rate (or its upper bound). ``sum`` is the clamped
    secrecy sum. Designs are stacked per cell; failed or infeasible cells
    hold NaN.
    """

    k: np.ndarray
    l: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    t_min: np.ndarray
    re: np.ndarray
    sum: np.ndarray
    status: np.ndarray
    phi1: np.ndarray
    psi1: np.ndarray
    phi2: np.ndarray
    psi2: np.ndarray
    r1_lower: np.ndarray = None
    r2_lower: np.ndarray = None
    aux: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.r1_lower is None:
            self.r1_lower = self.r1.copy()
        if self.r2_lower is None:
            self.r2_lower = self.r2.copy()

    def __len__(self):
        return len(self.k)

    @property
    def ok(self):
        return self.status == "optimal"

    @property
    def best_cell(self):
        """Index of the maximizing cell; ties go to the largest (k+l, k)."""
        ok = np.nonzero(self.ok)[0]
        if ok.size == 0:
            return None
        top = self.sum[ok].max()
        cand = ok[self.sum[ok] >= top - TIE_TOL]
        order = sorted(cand, key=lambda i: (self.k[i] + self.l[i], self.k[i]))
        return int(order[-1])

    @property
    def sum_max(self):
        b = self.best_cell
        return 0.0 if b is None else max(0.0, float(self.sum[b]))

    def design(self, i):
        d = CovarianceDesign(self.phi1[i].copy(), self.psi1[i].copy(),
                             self.phi2[i].copy(), self.psi2[i].copy())
        d.aux = {name: float(v[i]) for name, v in self.aux.items()}
        return d

    def cell(self, k, l):
        hit = np.nonzero((self.k == k) & (self.l == l))[0]
        if hit.size == 0:
            raise KeyError((k, l))
        return int(hit[0])


# --- staircase polygon ----------------------------------------------------

def _boxes(r, basis="certified"):
    """Box corners per feasible cell.

    ``certified`` uses the rates each cell certifies (r1_lower, r2_lower,
    sum); ``targets`` uses the grid targets with the sum reduced by the
    leakage bound. Target boxes are never larger than certified ones.
    """
    ok = r.ok
    if basis == "certified":
        return (np.asarray(r.r1_lower)[ok], np.asarray(r.r2_lower)[ok],
                np.asarray(r.sum)[ok])
    if basis == "targets":
        a, b = np.asarray(r.r1)[ok], np.asarray(r.r2)[ok]
        return a, b, np.maximum(0.0, a + b - np.asarray(r.re)[ok])
    raise ValueError(f"unknown region basis {basis!r}")


def staircase(a, b, s):
    """Upper-right boundary of the union of boxes ``R1<=a, R2<=b, R1+R2<=s``.

    Returns vertices ``[(R1, R2), ...]`` sorted by R1 ascending, starting on
    the R2 axis and ending on the R1 axis. Empty input gives ``[]``.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    s = np.asarray(s, float)
    keep = (a >= 0) & (b >= 0) & (s >= 0)
    a, b, s = a[keep], b[keep], s[keep]
    if a.size == 0:
        return []
    b = np.minimum(b, s)              # box height at R1 = 0
    e = np.minimum(a, s)              # right end of the box support
    kink = np.maximum(s - b, 0.0)     # where the diagonal cut starts

    def height(x):
        """Height of the union just right of each x (cells with e >= x)."""
        x = np.atleast_1d(x)
        out = np.full(x.shape, -np.inf)
        for lo in range(0, x.size, 256):
            xs = x[lo:lo + 256, None]
            act = e[None, :] >= xs
            val = np.where(act, np.minimum(b[None, :], s[None, :] - xs), -np.inf)
            out[lo:lo + 256] = val.max(axis=1)
        return out

    cand = np.unique(np.concatenate([[0.0], e, kink[kink <= e]]))
    # within each interval the envelope is max(flat level, diagonal); add the
    # crossing point of the best flat and best diagonal pieces
    extra = []
    mids = 0.5 * (cand[:-1] + cand[1:])
    for lo in range(0, mids.size, 256):
        xm = mids[lo:lo + 256, None]
        act = e[None, :] >= xm
        flat = act & (kink[None, :] >= xm)
        diag = act & ~flat
        bmax = np.where(flat, b[None, :], -np.inf).max(axis=1)
        smax = np.where(diag, s[None, :], -np.inf).max(axis=1)
        xc = smax - bmax
        left, right = cand[lo:lo + 256][:xm.size], cand[lo + 1:lo + 257][:xm.size]
        ok = np.isfinite(xc) & (xc > left) & (xc < right)
        extra.extend(xc[ok])
    xs = np.unique(np.concatenate([cand, extra]))
    xs = xs[xs <= e.max()]

    verts = []
    for x in xs:
        hl = height(x)[0]
        verts.append((float(x), float(max(hl, 0.0))))
        # downward jump where some boxes end
        hr = height(np.nextafter(x, np.inf))[0] if x < e.max() else 0.0
        if hr < hl - 1e-15:
            verts.append((float(x), float(max(hr, 0.0))))
    if verts[-1][1] > 0:
        verts.append((verts[-1][0], 0.0))
    return _simplify(verts)


def _simplify(verts, tol=1e-12):
    """Drop repeated points and interior points of straight runs."""
    out = []
    for v in verts:
        if out and abs(out[-1][0] - v[0]) <= tol and abs(out[-1][1] - v[1]) <= tol:
            continue
        out.append(v)
    changed = True
    while changed and len(out) > 2:
        changed = False
        for i in range(1, len(out) - 1):
            (x0, y0), (x1, y1), (x2, y2) = out[i - 1], out[i], out[i + 1]
            cross = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
            if abs(cross) <= tol:
                del out[i]
                changed = True
                break
    return out


def region_polygon(r, basis="certified"):
    """Staircase boundary of a :class:`RegionResult` (feasible cells only)."""
    return staircase(*_boxes(r, basis))


def polygon_height(verts, x):
    """Largest R2 on the region boundary at abscissa ``x`` (0 outside)."""
    x = np.atleast_1d(np.asarray(x, float))
    if not verts:
        return np.zeros(x.shape)
    vx = np.array([v[0] for v in verts])
    vy = np.array([v[1] for v in verts])
    out = np.zeros(x.shape)
    for i in range(len(verts) - 1):
        x0, x1, y0, y1 = vx[i], vx[i + 1], vy[i], vy[i + 1]
        if x1 == x0:
            hit = x == x0
            out[hit] = np.maximum(out[hit], max(y0, y1))
            continue
        hit = (x >= x0) & (x <= x1)
        y = y0 + (y1 - y0) * (x[hit] - x0) / (x1 - x0)
        out[hit] = np.maximum(out[hit], y)
    return out


def region_contains(outer, inner, slack=1e-6):
    """True if staircase ``inner`` lies inside ``outer`` (pointwise, with slack).

    Both are vertex lists from :func:`staircase`. The heights are compared
    at every vertex abscissa of either boundary and just to their right.
    """
    return region_excess(outer, inner) <= slack


def region_excess(outer, inner):
    """Largest amount by which ``inner`` pokes out of ``outer``."""
    if not inner:
        return 0.0
    xs = np.array(sorted({v[0] for v in inner} | {v[0] for v in outer}))
    xs = np.concatenate([xs, xs + 1e-9])
    xs = xs[xs <= max(v[0] for v in inner)]
    hi = polygon_height(inner, xs)
    ho = polygon_height(outer, xs)
    # beyond the outer region's R1 extent the outer height is 0
    return float(max(0.0, np.max(hi - ho)))


# --- CSV ------------------------------------------------------------------

def fmt(v):
    """9 significant digits, locale-free."""
    if isinstance(v, (str, np.str_)):
        return str(v)
    v = float(v)
    if np.isnan(v):
        return "nan"
    return f"{v:.9g}"


def region_csv(r, robust=False, header_comment=None):
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    cols = ["k", "l", "r1", "r2", "rE", "sum", "status"]
    if robust:
        cols[6:6] = ["r1Lower", "r2Lower", "rEUpper"]
    buf.write(",".join(cols) + "\n")
    for i in range(len(r)):
        row = [str(int(r.k[i])), str(int(r.l[i])), fmt(r.r1[i]), fmt(r.r2[i]),
               fmt(r.re[i]), fmt(r.sum[i])]
        if robust:
            row += [fmt(r.r1_lower[i]), fmt(r.r2_lower[i]), fmt(r.re[i])]
        row.append(str(r.status[i]))
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def polygon_csv(verts, header_comment=None):
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    buf.write("R1,R2\n")
    for x, y in verts:
        buf.write(f"{fmt(x)},{fmt(y)}\n")
    return buf.getvalue()


# --- SVG ------------------------------------------------------------------

SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
              "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22")


def _nice_ceiling(v):
    if not v > 0:
        return 1.0
    mag = 10.0 ** np.floor(np.log10(v))
    for m in (1.0, 2.0, 2.5, 5.0, 10.0):
        if m * mag >= v:
            return float(m * mag)
    return float(10 * mag)


def region_svg(polylines, title="", width=640, height=480, margin=64):
    """SVG 1.1 document overlaying staircase boundaries.

    ``polylines`` is a list of ``(label, vertices)``. Vertices are written in
    data coordinates with the same 9-digit strings as :func:`polygon_csv`;
    a group transform maps them onto the plot area.
    """
    from xml.sax.saxutils import escape, quoteattr

    xs = [x for _, v in polylines for x, _ in v] or [1.0]
    ys = [y for _, v in polylines for _, y in v] or [1.0]
    xmax, ymax = _nice_ceiling(max(xs)), _nice_ceiling(max(ys))
    pw, ph = width - 2 * margin, height - 2 * margin
    sx, sy = pw / xmax, ph / ymax
    x0, y0 = margin, height - margin
    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
           f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>']
    if title:
        out.append(f'<text x="{width / 2:g}" y="{margin / 2:g}" '
                   f'text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append(f'<g stroke="black" stroke-width="1">'
               f'<line x1="{x0}" y1="{y0}" x2="{x0 + pw}" y2="{y0}"/>'
               f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y0 - ph}"/></g>')
    for i in range(6):
        fx, fy = xmax * i / 5, ymax * i / 5
        px, py = x0 + pw * i / 5, y0 - ph * i / 5
        out.append(f'<line x1="{px:g}" y1="{y0}" x2="{px:g}" y2="{y0 + 5}" '
                   f'stroke="black"/><text x="{px:g}" y="{y0 + 18}" '
                   f'text-anchor="middle" font-size="11">{fx:g}</text>')
        out.append(f'<line x1="{x0 - 5}" y1="{py:g}" x2="{x0}" y2="{py:g}" '
                   f'stroke="black"/><text x="{x0 - 8}" y="{py + 4:g}" '
                   f'text-anchor="end" font-size="11">{fy:g}</text>')
    out.append(f'<text x="{x0 + pw / 2:g}" y="{height - 16}" text-anchor="middle" '
               f'font-size="12">R1 (bits/channel use)</text>')
    out.append(f'<text x="18" y="{y0 - ph / 2:g}" text-anchor="middle" '
               f'font-size="12" transform="rotate(-90 18 {y0 - ph / 2:g})">'
               f'R2 (bits/channel use)</text>')
    out.append(f'<g transform="translate({x0} {y0}) scale({sx:.9g} {-sy:.9g})">')
    for i, (label, verts) in enumerate(polylines):
        pts = " ".join(f"{fmt(x)},{fmt(y)}" for x, y in verts)
        color = SVG_COLORS[i % len(SVG_COLORS)]
        out.append(f'<polyline id={quoteattr("region-" + str(i))} '
                   f'data-label={quoteattr(label)} fill="none" stroke="{color}" '
                   f'stroke-width="2" vector-effect="non-scaling-stroke" '
                   f'points="{pts}"/>')
    out.append('</g>')
    for i, (label, _) in enumerate(polylines):
        color = SVG_COLORS[i % len(SVG_COLORS)]
        ly = margin + 16 * i
        out.append(f'<line x1="{width - margin - 110}" y1="{ly}" '
                   f'x2="{width - margin - 90}" y2="{ly}" stroke="{color}" '
                   f'stroke-width="2"/><text x="{width - margin - 84}" '
                   f'y="{ly + 4}" font-size="11">{escape(label)}</text>')
    out.append('</svg>')
    return "\n".join(out) + "\n"
