"""Run artefacts: legacy VTK states, CSV iteration logs and SVG convergence plots."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .filter import IterationRecord
from .mesh import DIM, Mesh

_VTK_TRIANGLE = 5


# -- VTK ------------------------------------------------------------------------------

def write_vtk(path, mesh: Mesh, z, title: str = "ftrcontact state") -> None:
    """Write the deformed mesh as a legacy ASCII unstructured grid.

    ``POINTS`` hold deformed coordinates, point data ``displacement`` holds
    ``z - X`` and cell data ``body`` the body id.  Values use ``%.17g`` so
    that :func:`read_vtk` reproduces ``z`` exactly.
    """
    z = np.asarray(z, dtype=float).reshape(-1, DIM)
    if len(z) != mesh.n_vertices:
        raise ValueError("state does not match the mesh")
    disp = z - mesh.vertices
    nt = len(mesh.triangles)
    lines = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {mesh.n_vertices} double"]
    lines += [f"{x:.17g} {y:.17g} 0" for x, y in z]
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {nt}")
    lines += [str(_VTK_TRIANGLE)] * nt
    lines += [f"CELL_DATA {nt}", "SCALARS body int 1", "LOOKUP_TABLE default"]
    lines += [str(b) for b in mesh.body]
    lines += [f"POINT_DATA {mesh.n_vertices}", "VECTORS displacement double"]
    lines += [f"{x:.17g} {y:.17g} 0" for x, y in disp]
    Path(path).write_text("\n".join(lines) + "\n")


class VtkState:
    def __init__(self, points, triangles, displacement, body):
        self.points = points
        self.triangles = triangles
        self.displacement = displacement
        self.body = body

    @property
    def z(self) -> np.ndarray:
        """Deformation coefficient vector (deformed vertex positions, interleaved)."""
        return self.points.ravel().copy()

    @property
    def reference(self) -> np.ndarray:
        return self.points - self.displacement


def read_vtk(path) -> VtkState:
    """Read a file produced by :func:`write_vtk` (2D triangles only)."""
    tokens = Path(path).read_text().split("\n")
    points = tris = disp = body = None
    i = 0
    while i < len(tokens):
        head = tokens[i].split()
        if not head:
            i += 1
            continue
        key = head[0].upper()
        if key == "POINTS":
            n = int(head[1])
            points = np.array([tokens[i + 1 + k].split()[:2] for k in range(n)], dtype=float)
            i += n + 1
        elif key == "CELLS":
            n = int(head[1])
            rows = [tokens[i + 1 + k].split() for k in range(n)]
            if any(r[0] != "3" for r in rows):
                raise ValueError("only triangle cells are supported")
            tris = np.array([r[1:4] for r in rows], dtype=np.int64)
            i += n + 1
        elif key == "VECTORS" and head[1] == "displacement":
            n = len(points)
            disp = np.array([tokens[i + 1 + k].split()[:2] for k in range(n)], dtype=float)
            i += n + 1
        elif key == "SCALARS" and head[1] == "body":
            n = len(tris)
            body = np.array([tokens[i + 2 + k] for k in range(n)], dtype=np.int64)
            i += n + 2
        else:
            i += 1
    if points is None or tris is None:
        raise ValueError(f"{path}: missing POINTS or CELLS section")
    if disp is None:
        disp = np.zeros_like(points)
    return VtkState(points, tris, disp, body)


# -- CSV ------------------------------------------------------------------------------

def write_csv(path, records) -> None:
    """Per-iteration log, one row per record (RFC 4180 line endings)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(IterationRecord.CSV_FIELDS)
        for r in records:
            w.writerow(r.csv_row())


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- SVG ------------------------------------------------------------------------------

_W, _H = 640, 400
_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 20, 30, 50
_COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _log_range(values):
    v = [x for x in values if x > 0 and math.isfinite(x)]
    if not v:
        return 0, 1
    lo, hi = math.floor(math.log10(min(v))), math.ceil(math.log10(max(v)))
    return lo, max(hi, lo + 1)


def line_plot_svg(series: dict, title: str, xlabel: str = "k", ylabel: str = "") -> str:
    """Log-scale line plot of one or more ``name -> (x, y)`` series as SVG text.

    Non-positive and non-finite values are skipped, which splits the line.
    """
    xs = [x for xv, _ in series.values() for x in xv]
    xmin, xmax = (min(xs), max(xs)) if xs else (0, 1)
    if xmax == xmin:
        xmax = xmin + 1
    lo, hi = _log_range([y for _, yv in series.values() for y in yv])
    pw, ph = _W - _LEFT - _RIGHT, _H - _TOP - _BOTTOM

    def px(x):
        return _LEFT + pw * (x - xmin) / (xmax - xmin)

    def py(y):
        return _TOP + ph * (hi - math.log10(y)) / (hi - lo)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
           f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
           f'<rect width="{_W}" height="{_H}" fill="white"/>',
           f'<text x="{_W / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<rect x="{_LEFT}" y="{_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    step = max(1, (hi - lo) // 8)
    for e in range(lo, hi + 1, step):
        y = py(10.0 ** e)
        out.append(f'<line x1="{_LEFT}" y1="{y:.2f}" x2="{_LEFT + pw}" y2="{y:.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{_LEFT - 6}" y="{y + 4:.2f}" text-anchor="end">1e{e}</text>')
    for x in np.linspace(xmin, xmax, 6):
        out.append(f'<text x="{px(x):.2f}" y="{_TOP + ph + 18}" text-anchor="middle">{x:.0f}</text>')
    out.append(f'<text x="{_LEFT + pw / 2}" y="{_H - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="16" y="{_TOP + ph / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {_TOP + ph / 2})">{escape(ylabel)}</text>')
    for idx, (name, (xv, yv)) in enumerate(series.items()):
        colour = _COLOURS[idx % len(_COLOURS)]
        runs, cur = [], []
        for x, y in zip(xv, yv):
            if y > 0 and math.isfinite(y):
                cur.append(f"{px(x):.2f},{py(y):.2f}")
            elif cur:
                runs.append(cur)
                cur = []
        if cur:
            runs.append(cur)
        for run in runs:
            out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{" ".join(run)}"/>')
        ly = _TOP + 16 + 16 * idx
        out.append(f'<line x1="{_LEFT + pw - 90}" y1="{ly - 4}" x2="{_LEFT + pw - 70}" y2="{ly - 4}" '
                   f'stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{_LEFT + pw - 64}" y="{ly}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def convergence_plots(records, directory, stem: str) -> list[Path]:
    """Write ``<stem>_chi.svg`` and ``<stem>_theta_delta.svg``; returns the paths."""
    directory = Path(directory)
    k = [r.k for r in records]
    chi_path = directory / f"{stem}_chi.svg"
    chi_path.write_text(line_plot_svg({"chi": (k, [r.chi for r in records])},
                                      f"{stem}: optimality measure", ylabel="chi"))
    td_path = directory / f"{stem}_theta_delta.svg"
    td_path.write_text(line_plot_svg({"theta": (k, [r.theta for r in records]),
                                      "delta": (k, [r.delta for r in records])},
                                     f"{stem}: infeasibility and trust region"))
    return [chi_path, td_path]
