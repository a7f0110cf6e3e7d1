"""Reader and writer for a subset of the Gmsh MSH 2.2 ASCII format.

Supported sections are ``$MeshFormat``, ``$PhysicalNames``, ``$Nodes`` and
``$Elements`` with element types 1 (2-node line) and 2 (3-node triangle).
Other element types are skipped.  The grammar is documented in
``docs/mesh_format.md``.
"""

from __future__ import annotations

import numpy as np

from .mesh import MARKERS, Mesh, MeshError, fix_orientation, orient_segments


def _sections(lines):
    out = {}
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        if line.startswith("$") and not line.startswith("$End"):
            name = line[1:]
            j = i + 1
            while j < len(lines) and lines[j].strip() != f"$End{name}":
                j += 1
            if j == len(lines):
                raise MeshError(f"unterminated section ${name}")
            out[name] = [ln for ln in lines[i + 1:j] if ln.strip()]
            i = j + 1
        else:
            i += 1
    return out


def read_msh(path, bindings: dict | None = None) -> Mesh:
    """Read a two-body mesh.

    ``bindings`` maps physical tags (given as ``int`` or physical name) to a
    boundary marker name for line elements or to a body id (1 or 2) for
    triangles.  Without an entry, a physical name equal to a marker name or
    to ``body1``/``body2`` binds itself, and an unnamed triangle tag ``1`` or
    ``2`` is taken as the body id.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    sec = _sections(lines)
    fmt = sec.get("MeshFormat", ["2.2 0 8"])[0].split()
    if not fmt[0].startswith("2") or fmt[1] != "0":
        raise MeshError(f"unsupported MSH format {' '.join(fmt)} (need ASCII 2.2)")

    names = {}
    for ln in sec.get("PhysicalNames", [])[1:]:
        parts = ln.split(maxsplit=2)
        names[int(parts[1])] = parts[2].strip().strip('"')

    bindings = dict(bindings or {})

    def resolve(tag):
        for key in (tag, names.get(tag), str(tag)):
            if key is not None and key in bindings:
                return bindings[key]
        name = names.get(tag)
        if name in MARKERS:
            return name
        if name in ("body1", "body2"):
            return int(name[-1])
        return None

    node_lines = sec["Nodes"]
    n = int(node_lines[0])
    ids, coords = [], []
    for ln in node_lines[1:n + 1]:
        parts = ln.split()
        ids.append(int(parts[0]))
        coords.append((float(parts[1]), float(parts[2])))
    index = {nid: k for k, nid in enumerate(ids)}
    verts = np.array(coords, dtype=float)

    tris, tbody, segs, smark = [], [], [], []
    el_lines = sec["Elements"]
    for ln in el_lines[1:int(el_lines[0]) + 1]:
        parts = [int(p) for p in ln.split()]
        etype, ntags = parts[1], parts[2]
        tag = parts[3] if ntags else 0
        nodes = [index[p] for p in parts[3 + ntags:]]
        if etype == 1:
            m = resolve(tag)
            if m is None:
                continue
            if m not in MARKERS:
                raise MeshError(f"line physical tag {tag} bound to non-marker {m!r}")
            segs.append(nodes)
            smark.append(m)
        elif etype == 2:
            b = resolve(tag)
            if b is None:
                b = tag if tag in (1, 2) else None
            if b not in (1, 2):
                raise MeshError(f"triangle physical tag {tag} has no body binding")
            tris.append(nodes)
            tbody.append(b)

    tris = np.array(tris, dtype=np.int64).reshape(-1, 3)
    if len(tris) == 0:
        raise MeshError("mesh has no triangles")
    used = np.unique(tris)
    remap = -np.ones(len(verts), dtype=np.int64)
    remap[used] = np.arange(len(used))
    tris = fix_orientation(verts[used], remap[tris])
    segs = remap[np.array(segs, dtype=np.int64).reshape(-1, 2)]
    if np.any(segs < 0):
        raise MeshError("boundary segment references a vertex outside all triangles")
    segs = orient_segments(tris, segs)
    return Mesh(verts[used], tris, segs, smark, np.array(tbody))


_TAGS = {"dirichlet": 11, "neumann": 12, "contact_nonmortar": 13, "contact_mortar": 14}


def write_msh(mesh: Mesh, path) -> None:
    """Write ``mesh`` so that :func:`read_msh` reproduces it without bindings."""
    out = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$PhysicalNames", "6"]
    out += [f"1 {t} \"{m}\"" for m, t in _TAGS.items()]
    out += ["2 1 \"body1\"", "2 2 \"body2\"", "$EndPhysicalNames", "$Nodes", str(mesh.n_vertices)]
    out += [f"{k + 1} {float(x)!r} {float(y)!r} 0" for k, (x, y) in enumerate(mesh.vertices)]
    out += ["$EndNodes", "$Elements", str(len(mesh.segments) + len(mesh.triangles))]
    k = 1
    for (a, b), m in zip(mesh.segments, mesh.markers):
        out.append(f"{k} 1 2 {_TAGS[m]} {_TAGS[m]} {a + 1} {b + 1}")
        k += 1
    for t, b in zip(mesh.triangles, mesh.body):
        out.append(f"{k} 2 2 {b} {b} {t[0] + 1} {t[1] + 1} {t[2] + 1}")
        k += 1
    out.append("$EndElements")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
