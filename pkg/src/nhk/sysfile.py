"""Text format for system definitions.

A definition file is line oriented: ``key = value`` pairs grouped under
``[section]`` headers, ``#`` comments, blank lines ignored.  Matrix
entries are expression strings over the declared coordinates; unspecified
entries are zero and symmetric blocks may give either triangle.

Top level:        name, kind (chaplygin | eps | hpd)
[coords]          shape = names..., group = names...
[dims]            s = <vertical dimension>   (optional; inferred otherwise)
[metric.g_shape]  <shape>,<shape> = expr     (symmetric)
[metric.g_cross]  <group>,<shape> = expr
[metric.g_group]  <group>,<group> = expr     (symmetric)
[connection]      <group>,<shape> = expr
[body_basis]      <group>,<i> = expr         (i = 1..s)
[structure_constants]  <a>,<b>,<c> = value   (the opposite pair is implied)
[potential]       V = expr
[group_frame]     <group>,<d> = expr         (d = 1..k, over group coords)

Missing blocks required by the declared kind are rejected.
"""

from __future__ import annotations

import numpy as np

from . import exprlang as xl
from .exprlang import Expr
from .geometry import GeometryError, SystemDef

_REQUIRED = {
    "chaplygin": ("metric.g_shape", "metric.g_group", "connection"),
    "eps": ("metric.g_group", "body_basis", "structure_constants"),
    "hpd": ("metric.g_shape", "metric.g_group", "connection"),
}


class SysFileError(Exception):
    pass


def _parse_lines(text: str) -> tuple[dict, dict]:
    top: dict[str, str] = {}
    sections: dict[str, dict[str, str]] = {}
    current: dict[str, str] | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            current = sections.setdefault(name, {})
            continue
        if "=" not in line:
            raise SysFileError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        target = top if current is None else current
        if key in target:
            raise SysFileError(f"line {lineno}: duplicate key {key!r}")
        target[key] = value
    return top, sections


def _index(label: str, names: tuple[str, ...], what: str) -> int:
    label = label.strip()
    if label in names:
        return names.index(label)
    if label.isdigit() and 1 <= int(label) <= len(names):
        return int(label) - 1
    raise SysFileError(f"unknown {what} label {label!r}")


def _matrix(section: dict[str, str], rows: tuple[str, ...], cols, symmetric: bool,
            what: str) -> list[list[str]]:
    ncols = cols if isinstance(cols, int) else len(cols)
    out = [["0"] * ncols for _ in rows]
    seen = set()
    for key, value in section.items():
        parts = [p.strip() for p in key.split(",")]
        if len(parts) != 2:
            raise SysFileError(f"{what}: expected 'row,col = expr', got {key!r}")
        i = _index(parts[0], rows, what)
        if isinstance(cols, int):
            j = int(parts[1]) - 1
            if not 0 <= j < cols:
                raise SysFileError(f"{what}: column {parts[1]!r} out of range")
        else:
            j = _index(parts[1], cols, what)
        for a, b in ((i, j),) if not symmetric else ((i, j), (j, i)):
            if (a, b) in seen and out[a][b] != value:
                raise SysFileError(f"{what}: conflicting entries for {key!r}")
            seen.add((a, b))
            out[a][b] = value
    return out


def loads(text: str) -> SystemDef:
    top, sections = _parse_lines(text)
    kind = top.get("kind")
    if kind not in ("chaplygin", "eps", "hpd"):
        raise SysFileError(f"missing or bad kind: {kind!r}")
    name = top.get("name", "unnamed")
    coords = sections.get("coords", {})
    shape = tuple(coords.get("shape", "").split())
    group = tuple(coords.get("group", "").split())
    if not group:
        raise SysFileError("no group coordinates declared")
    for block in _REQUIRED[kind]:
        if block not in sections:
            raise SysFileError(f"kind {kind!r} requires a [{block}] block")
    m, k = len(shape), len(group)
    s = 0
    if "body_basis" in sections:
        cols = [int(key.split(",")[1]) for key in sections["body_basis"]]
        s = max(cols) if cols else 0
    if "dims" in sections and "s" in sections["dims"]:
        declared = int(sections["dims"]["s"])
        if s and declared != s:
            raise SysFileError(f"declared s={declared} but body basis has {s} columns")
        s = declared
    structure = np.zeros((k, k, k))
    for key, value in sections.get("structure_constants", {}).items():
        parts = [p.strip() for p in key.split(",")]
        if len(parts) != 3:
            raise SysFileError(f"structure_constants: bad key {key!r}")
        a, b, c = (_index(p, group, "group") for p in parts)
        v = float(value)
        structure[a, b, c] = v
        structure[a, c, b] = -v
    try:
        return SystemDef.build(
            name, kind, shape_coords=shape, group_coords=group,
            g_shape=_matrix(sections.get("metric.g_shape", {}), shape, shape,
                            True, "metric.g_shape") if m else (),
            g_cross=_matrix(sections.get("metric.g_cross", {}), group, shape,
                            False, "metric.g_cross") if m else None,
            g_group=_matrix(sections.get("metric.g_group", {}), group, group,
                            True, "metric.g_group"),
            conn=_matrix(sections.get("connection", {}), group, shape, False,
                         "connection") if m else None,
            body_basis=_matrix(sections.get("body_basis", {}), group, s, False,
                               "body_basis") if s else None,
            structure=structure,
            potential=sections.get("potential", {}).get("V", "0"),
            group_frame=_matrix(sections["group_frame"], group, k, False,
                                "group_frame") if "group_frame" in sections else None,
        )
    except (GeometryError, xl.ParseError) as exc:
        raise SysFileError(str(exc)) from exc


def load(path) -> SystemDef:
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read())


def _emit_matrix(lines: list[str], header: str, mat, rows, cols) -> None:
    entries = []
    for i, row in enumerate(mat):
        for j, e in enumerate(row):
            text = xl.to_string(e)
            if text == "0":
                continue
            col = cols[j] if not isinstance(cols, int) else str(j + 1)
            entries.append(f"{rows[i]},{col} = {text}")
    if entries:
        lines.append(f"[{header}]")
        lines.extend(entries)
        lines.append("")


def dumps(sys: SystemDef) -> str:
    lines = [f"name = {sys.name}", f"kind = {sys.kind}", "", "[coords]"]
    if sys.shape_coords:
        lines.append(f"shape = {' '.join(sys.shape_coords)}")
    lines.append(f"group = {' '.join(sys.group_coords)}")
    lines.append("")
    if sys.s:
        lines.extend(["[dims]", f"s = {sys.s}", ""])
    _emit_matrix(lines, "metric.g_shape", sys.g_shape, sys.shape_coords,
                 sys.shape_coords)
    _emit_matrix(lines, "metric.g_cross", sys.g_cross, sys.group_coords,
                 sys.shape_coords)
    _emit_matrix(lines, "metric.g_group", sys.g_group, sys.group_coords,
                 sys.group_coords)
    _emit_matrix(lines, "connection", sys.conn, sys.group_coords,
                 sys.shape_coords)
    _emit_matrix(lines, "body_basis", sys.body_basis, sys.group_coords, sys.s)
    C = np.asarray(sys.structure)
    entries = []
    for a in range(sys.k):
        for b in range(sys.k):
            for c in range(b + 1, sys.k):
                if C[a, b, c] != 0.0:
                    entries.append(
                        f"{sys.group_coords[a]},{sys.group_coords[b]},"
                        f"{sys.group_coords[c]} = {float(C[a, b, c])!r}")
    if entries:
        lines.append("[structure_constants]")
        lines.extend(entries)
        lines.append("")
    pot = xl.to_string(sys.potential)
    if pot != "0":
        lines.extend(["[potential]", f"V = {pot}", ""])
    if sys.group_frame is not None:
        _emit_matrix(lines, "group_frame", sys.group_frame, sys.group_coords,
                     sys.k)
    return "\n".join(lines).rstrip() + "\n"


def dump(sys: SystemDef, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(sys))
