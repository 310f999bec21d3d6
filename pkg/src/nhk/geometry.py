"""System definitions and the derived tensors of reduced constrained mechanics.

Index conventions, fixed once for the whole package and asserted in tests:

* shape indices (alpha, beta, gamma, ...) run over the ``shape_coords``,
  dimension ``m``;
* group indices (a, b, c, ...) run over the Lie-algebra basis, dimension
  ``k`` (for matrix groups these also label group coordinates);
* constrained-vertical indices (i, j, ...) run over the body-basis
  columns, dimension ``s``.

Array storage is row major in that order.  Tensors named below:

* ``curv[a, alpha, beta]``          curvature of the kinematic connection,
  ``dA[a,alpha,beta] - dA[a,beta,alpha] + C[a,b,c] A[b,alpha] A[c,beta]``;
* ``basis_deriv[a, i, beta]``       shape derivative of the body basis
  corrected by the connection, ``de[a,i,beta] + C[a,b,c] e[b,i] A[c,beta]``;
* ``coupling[a, alpha]``            mixed momentum coupling
  ``g_cross[a,alpha] - g_group[a,b] A[b,alpha]``;
* ``gyro_shape[gamma, beta, alpha]`` gyroscopic coefficients
  ``coupling[b,eps] Ginv[eps,gamma] curv[b,beta,alpha]``;
* ``gyro_vert[k, j, i]``            vertical gyroscopic coefficients
  ``g_group[a,b] C[a,c,d] e[c,i] e[d,j] basis_dual[b,k]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from . import exprlang as xl
from .exprlang import Expr, EvalError

KINDS = ("chaplygin", "eps", "hpd")

COND_LIMIT = 1e12


class GeometryError(Exception):
    """Raised for inconsistent system definitions."""


class DegenerateMetricError(GeometryError):
    """A kinetic-energy block is numerically singular at the requested point."""


ExprMatrix = tuple[tuple[Expr, ...], ...]


def _as_expr(entry, variables) -> Expr:
    if isinstance(entry, Expr):
        return entry
    if isinstance(entry, str):
        return xl.parse(entry, variables)
    return xl.num(entry)


def expr_matrix(rows, nrows: int, ncols: int, variables) -> ExprMatrix:
    """Normalizes a nested list of numbers/strings/Exprs to an Expr matrix."""
    if nrows == 0 or ncols == 0:
        return tuple(tuple() for _ in range(nrows))
    mat = tuple(tuple(_as_expr(entry, variables) for entry in row) for row in rows)
    if len(mat) != nrows or any(len(row) != ncols for row in mat):
        raise GeometryError(f"expected a {nrows}x{ncols} matrix")
    return mat


@dataclass(frozen=True)
class SystemDef:
    """Definition of a nonholonomic system with symmetry.

    ``kind`` is one of ``chaplygin`` (no momentum equations, s = 0),
    ``eps`` (configuration space is the group itself, m = 0) or ``hpd``
    (the general case).  Metric blocks are Expr matrices over the shape
    coordinates; ``group_frame`` optionally maps the Lie-algebra basis to
    coordinate velocities for matrix groups (entries over the group
    coordinates) and is only needed when a multiplier depends on the
    group variables.
    """

    name: str
    kind: str
    shape_coords: tuple[str, ...]
    group_coords: tuple[str, ...]
    g_shape: ExprMatrix
    g_cross: ExprMatrix
    g_group: ExprMatrix
    conn: ExprMatrix
    body_basis: ExprMatrix
    structure: tuple[tuple[tuple[float, ...], ...], ...]
    potential: Expr
    group_frame: ExprMatrix | None = None

    @property
    def m(self) -> int:
        return len(self.shape_coords)

    @property
    def k(self) -> int:
        return len(self.group_coords)

    @property
    def s(self) -> int:
        return len(self.body_basis[0]) if self.k and self.body_basis else 0

    @property
    def n(self) -> int:
        return self.m + self.k

    @staticmethod
    def build(name: str, kind: str, shape_coords=(), group_coords=(),
              g_shape=(), g_cross=None, g_group=(), conn=None,
              body_basis=None, structure=None, potential=0.0,
              group_frame=None) -> "SystemDef":
        if kind not in KINDS:
            raise GeometryError(f"unknown kind {kind!r}; expected one of {KINDS}")
        shape_coords = tuple(shape_coords)
        group_coords = tuple(group_coords)
        m, k = len(shape_coords), len(group_coords)
        if kind == "eps" and m != 0:
            raise GeometryError("eps systems have no shape coordinates")
        if kind != "eps" and m == 0:
            raise GeometryError(f"{kind} systems need shape coordinates")
        variables = set(shape_coords) | set(group_coords)
        gs = expr_matrix(g_shape, m, m, variables)
        gc = expr_matrix(g_cross if g_cross is not None
                         else [[0.0] * m for _ in range(k)], k, m, variables)
        gg = expr_matrix(g_group, k, k, variables)
        A = expr_matrix(conn if conn is not None
                        else [[0.0] * m for _ in range(k)], k, m, variables)
        e = body_basis if body_basis is not None else [[] for _ in range(k)]
        s = len(e[0]) if k and len(e) else 0
        eb = expr_matrix(e, k, s, variables)
        if kind == "chaplygin" and s != 0:
            raise GeometryError("chaplygin systems have an empty body basis")
        if kind == "eps" and s == 0:
            raise GeometryError("eps systems need a body basis")
        C = structure if structure is not None else np.zeros((k, k, k))
        C = np.asarray(C, dtype=float)
        if C.shape != (k, k, k):
            raise GeometryError(f"structure constants must be {k}x{k}x{k}")
        if np.abs(C + C.transpose(0, 2, 1)).max() > 0.0:
            raise GeometryError("structure constants must be antisymmetric "
                                "in the lower index pair")
        frame = None
        if group_frame is not None:
            frame = expr_matrix(group_frame, k, k, set(group_coords))
        return SystemDef(
            name=name, kind=kind,
            shape_coords=shape_coords, group_coords=group_coords,
            g_shape=gs, g_cross=gc, g_group=gg, conn=A, body_basis=eb,
            structure=tuple(tuple(tuple(row) for row in plane) for plane in C),
            potential=_as_expr(potential, variables),
            group_frame=frame,
        )

    def validate(self, points: Sequence[np.ndarray], tol: float = 1e-10) -> list[str]:
        """Checks symmetry/independence invariants at sample points."""
        issues = []
        geo = compiled(self)
        C = np.asarray(self.structure)
        for r in points:
            blocks = geo.blocks(np.asarray(r, dtype=float))
            if self.m:
                gs = blocks.g_shape
                if np.abs(gs - gs.T).max() > tol * (1 + np.abs(gs).max()):
                    issues.append("g_shape is not symmetric")
                    break
            gg = blocks.g_group
            if self.k and np.abs(gg - gg.T).max() > tol * (1 + np.abs(gg).max()):
                issues.append("g_group is not symmetric")
                break
            if self.s:
                if np.linalg.matrix_rank(blocks.e, tol=1e-9) < self.s:
                    issues.append("body basis columns are linearly dependent")
                    break
                coupling = blocks.g_cross - gg @ blocks.A
                cross = coupling.T @ blocks.e if self.m else np.zeros(0)
                if self.m and np.abs(cross).max() > 1e-8 * (1 + np.abs(gg).max()):
                    issues.append(
                        "connection horizontal space is not orthogonal to the "
                        "constrained vertical directions (coupling.T @ e != 0)")
                    break
        return issues


@dataclass(frozen=True, eq=False)
class GeometryAtPoint:
    """All derived tensors at one shape point (see module docstring)."""

    r: np.ndarray
    g_shape: np.ndarray          # constrained shape metric, (m, m)
    g_shape_inv: np.ndarray
    g_vert: np.ndarray           # constrained vertical metric, (s, s)
    g_vert_inv: np.ndarray
    basis_dual: np.ndarray       # e @ g_vert_inv, (k, s)
    cross_momentum: np.ndarray   # coupling.T @ basis_dual, (m, s)
    coupling: np.ndarray         # (k, m)
    cross_kinetic: np.ndarray    # coupling.T @ e, (m, s); zero for valid defs
    curv: np.ndarray             # (k, m, m)
    basis_deriv: np.ndarray      # (k, s, m)
    gyro_shape: np.ndarray       # (m, m, m), [gamma, beta, alpha]
    gyro_vert: np.ndarray        # (s, s, s), [k, j, i]
    cond_shape: float
    cond_vert: float
    mult_shape: np.ndarray | None = None   # (m, m, m), [gamma, alpha, beta]
    mult_vert: np.ndarray | None = None    # (s, s, s), [k, i, j]


@dataclass(frozen=True, eq=False)
class _Blocks:
    g_shape: np.ndarray
    g_cross: np.ndarray
    g_group: np.ndarray
    A: np.ndarray
    e: np.ndarray
    V: float
    d_g_shape: np.ndarray
    d_g_cross: np.ndarray
    d_g_group: np.ndarray
    d_A: np.ndarray
    d_e: np.ndarray
    d_V: np.ndarray


class _MatrixField:
    """Expr matrix compiled entrywise, with first shape derivatives."""

    def __init__(self, mat: ExprMatrix, coords: tuple[str, ...]):
        self.shape = (len(mat), len(mat[0]) if mat and len(mat) else 0)
        self.coords = coords
        self._fns = [[xl.compile_fn(e_, coords) for e_ in row] for row in mat]
        self._dfns = [[[xl.compile_fn(xl.differentiate(e_, c), coords)
                        for c in coords] for e_ in row] for row in mat]
        self._const = all(not xl.free_variables(e_) for row in mat for e_ in row)
        self._cache_val = None
        if self._const:
            self._cache_val = np.array(
                [[fn() if not coords else fn(*([0.0] * len(coords))) for fn in row]
                 for row in self._fns]) if self.shape[0] else np.zeros(self.shape)

    def value(self, point: np.ndarray) -> np.ndarray:
        if self._const and self._cache_val is not None:
            return self._cache_val
        return np.array([[fn(*point) for fn in row] for row in self._fns]) \
            if self.shape[0] else np.zeros(self.shape)

    def deriv(self, point: np.ndarray) -> np.ndarray:
        out = np.zeros(self.shape + (len(self.coords),))
        if self._const:
            return out
        for i, row in enumerate(self._dfns):
            for j, fns in enumerate(row):
                for g, fn in enumerate(fns):
                    out[i, j, g] = fn(*point)
        return out


class CompiledSystem:
    """Fast evaluator for all tensor blocks of a SystemDef."""

    def __init__(self, sys: SystemDef):
        self.sys = sys
        coords = sys.shape_coords
        self._gs = _MatrixField(sys.g_shape, coords)
        self._gc = _MatrixField(sys.g_cross, coords)
        self._gg = _MatrixField(sys.g_group, coords)
        self._A = _MatrixField(sys.conn, coords)
        self._e = _MatrixField(sys.body_basis, coords)
        self._V = xl.compile_fn(sys.potential, coords)
        self._dV = [xl.compile_fn(xl.differentiate(sys.potential, c), coords)
                    for c in coords]
        self.C = np.asarray(sys.structure, dtype=float)
        self._frame = (_MatrixField(sys.group_frame, sys.group_coords)
                       if sys.group_frame is not None else None)

    def blocks(self, r: np.ndarray) -> _Blocks:
        r = np.asarray(r, dtype=float)
        return _Blocks(
            g_shape=self._gs.value(r), g_cross=self._gc.value(r),
            g_group=self._gg.value(r), A=self._A.value(r), e=self._e.value(r),
            V=self._V(*r),
            d_g_shape=self._gs.deriv(r), d_g_cross=self._gc.deriv(r),
            d_g_group=self._gg.deriv(r), d_A=self._A.deriv(r),
            d_e=self._e.deriv(r), d_V=np.array([fn(*r) for fn in self._dV]),
        )

    def group_frame(self, g_point: np.ndarray) -> np.ndarray:
        if self._frame is None:
            raise GeometryError(
                f"system {self.sys.name!r} defines no group_frame; one is "
                "required when a multiplier depends on group coordinates")
        return self._frame.value(np.asarray(g_point, dtype=float))

    # -- assembled tensors --------------------------------------------------

    def curvature(self, r) -> np.ndarray:
        b = self.blocks(r)
        return self._curvature(b)

    def _curvature(self, b: _Blocks) -> np.ndarray:
        B = b.d_A - b.d_A.transpose(0, 2, 1)
        if self.C.size:
            B = B + np.einsum('abc,bx,cy->axy', self.C, b.A, b.A)
        return B

    def basis_deriv(self, r) -> np.ndarray:
        b = self.blocks(r)
        return self._basis_deriv(b)

    def _basis_deriv(self, b: _Blocks) -> np.ndarray:
        F = b.d_e.copy()
        if self.C.size and self.sys.s:
            F = F + np.einsum('abc,bi,cx->aix', self.C, b.e, b.A)
        return F

    def shape_metric(self, b: _Blocks) -> np.ndarray:
        G = b.g_shape - b.A.T @ b.g_cross - b.g_cross.T @ b.A \
            + b.A.T @ b.g_group @ b.A
        return G

    def shape_metric_grad(self, b: _Blocks) -> np.ndarray:
        dG = b.d_g_shape.copy()
        for g in range(self.sys.m):
            dA = b.d_A[:, :, g]
            dgc = b.d_g_cross[:, :, g]
            dgg = b.d_g_group[:, :, g]
            dG[:, :, g] += (
                - dA.T @ b.g_cross - b.A.T @ dgc
                - dgc.T @ b.A - b.g_cross.T @ dA
                + dA.T @ b.g_group @ b.A + b.A.T @ dgg @ b.A
                + b.A.T @ b.g_group @ dA
            )
        return dG

    def vert_metric(self, b: _Blocks) -> np.ndarray:
        return b.e.T @ b.g_group @ b.e

    def vert_metric_grad(self, b: _Blocks) -> np.ndarray:
        s, m = self.sys.s, self.sys.m
        dGv = np.zeros((s, s, m))
        for g in range(m):
            de = b.d_e[:, :, g]
            dgg = b.d_g_group[:, :, g]
            dGv[:, :, g] = de.T @ b.g_group @ b.e + b.e.T @ dgg @ b.e \
                + b.e.T @ b.g_group @ de
        return dGv

    def coupling(self, b: _Blocks) -> np.ndarray:
        return b.g_cross - b.g_group @ b.A

    def coupling_grad(self, b: _Blocks) -> np.ndarray:
        k, m = self.sys.k, self.sys.m
        dM = b.d_g_cross.copy()
        for g in range(m):
            dM[:, :, g] -= b.d_g_group[:, :, g] @ b.A + b.g_group @ b.d_A[:, :, g]
        return dM

    def derived(self, r, mult=None, group_point=None) -> GeometryAtPoint:
        b = self.blocks(r)
        sys = self.sys
        m, k, s = sys.m, sys.k, sys.s
        G = self.shape_metric(b)
        M = self.coupling(b)
        Gv = self.vert_metric(b)
        if m:
            cond_shape = float(np.linalg.cond(G))
            if not np.isfinite(cond_shape) or cond_shape > COND_LIMIT:
                raise DegenerateMetricError(
                    f"shape metric condition number {cond_shape:.3e} at r={r}")
            Ginv = np.linalg.inv(G)
        else:
            cond_shape = 1.0
            Ginv = np.zeros((0, 0))
        if s:
            cond_vert = float(np.linalg.cond(Gv))
            if not np.isfinite(cond_vert) or cond_vert > COND_LIMIT:
                raise DegenerateMetricError(
                    f"vertical metric condition number {cond_vert:.3e} at r={r}")
            Gvinv = np.linalg.inv(Gv)
        else:
            cond_vert = 1.0
            Gvinv = np.zeros((0, 0))
        basis_dual = b.e @ Gvinv if s else np.zeros((k, 0))
        cross_momentum = M.T @ basis_dual if (m and s) else np.zeros((m, s))
        cross_kinetic = M.T @ b.e if (m and s) else np.zeros((m, s))
        B = self._curvature(b)
        F = self._basis_deriv(b)
        gyro_shape = np.einsum('be,eg,bxa->gxa', M, Ginv, B) if m else \
            np.zeros((0, 0, 0))
        if s:
            gyro_vert = np.einsum('ab,acd,ci,dj,bk->kji', b.g_group, self.C,
                                  b.e, b.e, basis_dual)
        else:
            gyro_vert = np.zeros((0, 0, 0))
        mult_shape = mult_vert = None
        if mult is not None:
            fr = mult.grad_shape(np.asarray(r, dtype=float))
            mult_shape = np.zeros((m, m, m))
            for g in range(m):
                for al in range(m):
                    for be in range(m):
                        mult_shape[g, al, be] = (
                            (1.0 if g == be else 0.0) * fr[al]
                            - (1.0 if g == al else 0.0) * fr[be])
            dfg = self.group_gradient(mult, group_point)
            mult_vert = np.zeros((s, s, s))
            if s and dfg is not None:
                dfe = dfg @ b.e          # (s,) contraction over algebra index
                for kk in range(s):
                    for i in range(s):
                        for j in range(s):
                            mult_vert[kk, i, j] = (
                                dfe[j] * (1.0 if kk == i else 0.0)
                                - dfe[i] * (1.0 if kk == j else 0.0))
        return GeometryAtPoint(
            r=np.asarray(r, dtype=float),
            g_shape=G, g_shape_inv=Ginv, g_vert=Gv, g_vert_inv=Gvinv,
            basis_dual=basis_dual, cross_momentum=cross_momentum,
            coupling=M, cross_kinetic=cross_kinetic,
            curv=B, basis_deriv=F,
            gyro_shape=gyro_shape, gyro_vert=gyro_vert,
            cond_shape=cond_shape, cond_vert=cond_vert,
            mult_shape=mult_shape, mult_vert=mult_vert,
        )

    def group_gradient(self, mult, group_point) -> np.ndarray | None:
        """df/dg^sigma contracted with the group frame; None if f is shape-only."""
        if not mult.depends_on_group:
            return None
        if group_point is None:
            raise GeometryError(
                "multiplier depends on group coordinates; a group point is "
                "required")
        frame = self.group_frame(group_point)
        dfg = mult.grad_group(np.asarray(group_point, dtype=float))
        return dfg @ frame


@lru_cache(maxsize=64)
def compiled(sys: SystemDef) -> CompiledSystem:
    return CompiledSystem(sys)


# ---------------------------------------------------------------------------
# module-level operations
# ---------------------------------------------------------------------------

def curvature(sys: SystemDef, r) -> np.ndarray:
    """Curvature tensor of the kinematic connection at ``r``, (k, m, m)."""
    return compiled(sys).curvature(np.asarray(r, dtype=float))


def f_coefficients(sys: SystemDef, r) -> np.ndarray:
    """Shape derivative of the body basis with connection correction, (k, s, m)."""
    return compiled(sys).basis_deriv(np.asarray(r, dtype=float))


def derived(sys: SystemDef, r, mult=None, group_point=None) -> GeometryAtPoint:
    """All derived tensors at ``r``; multiplier tensors when ``mult`` given."""
    return compiled(sys).derived(np.asarray(r, dtype=float), mult, group_point)
