"""Builtin registry of classic nonholonomic systems with known facts.

Each entry carries the system definition, the known reducing multiplier
and invariant-measure density where one exists, sampling boxes that avoid
coordinate singularities, a default initial condition for simulations,
and golden values used by the verification suite.  Golden values are
tagged by origin: ``known`` for published results, ``computed`` for
values frozen from an independent oracle run of this package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import exprlang as xl
from .exprlang import Expr
from .geometry import SystemDef


@dataclass(frozen=True)
class RegistryEntry:
    name: str
    system: SystemDef
    multiplier: Expr | None = None        # known reducing multiplier, if any
    measure: Expr | None = None           # known invariant measure density
    cyclic: tuple[str, ...] = ()          # expected conserved shape coordinates
    default_lambda: float = 0.5
    shape_box: tuple[tuple[float, float], ...] = ()
    momentum_box: tuple[float, float] = (-1.0, 1.0)
    group_box: tuple[tuple[float, float], ...] = ()
    default_ic: tuple[float, ...] = ()
    golden: dict = field(default_factory=dict)
    notes: str = ""

    @property
    def kind(self) -> str:
        return self.system.kind


class UnknownSystemError(KeyError):
    def __init__(self, name: str):
        super().__init__(
            f"unknown system {name!r}; registry: {', '.join(names())}")


def vertical_disk(mass: float = 1.0, radius: float = 1.0,
                  spin_inertia: float = 1.0, steer_inertia: float = 1.0) -> SystemDef:
    """Upright wheel rolling without slipping: shape (theta, phi), group (x, y).

    theta is the rolling angle, phi the heading; the contact constraints
    are xdot = radius*cos(phi)*thetadot, ydot = radius*sin(phi)*thetadot.
    """
    R = xl.num(radius)
    return SystemDef.build(
        "vertical_disk", "chaplygin",
        shape_coords=("theta", "phi"), group_coords=("x", "y"),
        g_shape=[[spin_inertia, 0], [0, steer_inertia]],
        g_group=[[mass, 0], [0, mass]],
        conn=[[-R * xl.cos(xl.var("phi")), 0],
              [-R * xl.sin(xl.var("phi")), 0]],
    )


def free_particle() -> SystemDef:
    """Unit-mass particle with the single constraint zdot + x*ydot = 0."""
    return SystemDef.build(
        "free_particle", "chaplygin",
        shape_coords=("x", "y"), group_coords=("z",),
        g_shape=[[1, 0], [0, 1]],
        g_group=[[1]],
        conn=[[0, "x"]],
    )


def chaplygin_sphere(i1: float = 1.0, i2: float = 2.0, i3: float = 3.0) -> SystemDef:
    """Unit ball rolling on the plane, distinct principal inertias.

    Shape coordinates are the Euler angles (theta, phi, psi); the group is
    the (x, y) translation of the contact point.
    """
    th, ph = xl.var("theta"), xl.var("phi")
    I1, I2, I3 = xl.num(i1), xl.num(i2), xl.num(i3)
    g_shape = [
        [I1 * xl.cos(ph) ** 2 + I2 * xl.sin(ph) ** 2, 0,
         (I1 - I2) * xl.sin(ph) * xl.cos(ph) * xl.sin(th)],
        [0, I3, I3 * xl.cos(th)],
        [(I1 - I2) * xl.sin(ph) * xl.cos(ph) * xl.sin(th), I3 * xl.cos(th),
         I1 * xl.sin(ph) ** 2 * xl.sin(th) ** 2
         + I2 * xl.cos(ph) ** 2 * xl.sin(th) ** 2 + I3 * xl.cos(th) ** 2],
    ]
    ps = xl.var("psi")
    conn = [
        [-xl.sin(ps), xl.cos(ps) * xl.sin(th), 0],
        [xl.cos(ps), xl.sin(ps) * xl.sin(th), 0],
    ]
    return SystemDef.build(
        "chaplygin_sphere", "chaplygin",
        shape_coords=("theta", "phi", "psi"), group_coords=("x", "y"),
        g_shape=g_shape, g_group=[[1, 0], [0, 1]], conn=conn,
    )


def snakeboard() -> SystemDef:
    """Board with steerable wheel pairs and a rotor, unit parameters.

    Shape (theta, phi, psi): board heading, wheel steer angle, rotor
    angle; group (x, y) translations.  Uses the symmetric-steer
    simplification (front and back wheel angles opposite).
    """
    th, ph = xl.var("theta"), xl.var("phi")
    cot = xl.cos(ph) / xl.sin(ph)
    return SystemDef.build(
        "snakeboard", "chaplygin",
        shape_coords=("theta", "phi", "psi"), group_coords=("x", "y"),
        g_shape=[[1, 0, 1], [0, 2, 0], [1, 0, 1]],
        g_group=[[1, 0], [0, 1]],
        conn=[[cot * xl.cos(th), 0, 0],
              [cot * xl.sin(th), 0, 0]],
    )


def chaplygin_sleigh() -> SystemDef:
    """Knife-edge body on the plane, treated on the group SE(2).

    Reduced inertia l(xi) = xi3^2 + (xi1^2 + xi2^2)/2 + xi2*xi3 with the
    constraint xi2 = 0; constrained directions are (xi1, xi3).
    """
    th = xl.var("theta")
    structure = np.zeros((3, 3, 3))
    structure[1, 0, 2] = -1.0   # [b1, b3] component along b2
    structure[1, 2, 0] = 1.0
    structure[0, 1, 2] = 1.0    # [b2, b3] component along b1
    structure[0, 2, 1] = -1.0
    return SystemDef.build(
        "chaplygin_sleigh", "eps",
        group_coords=("x", "y", "theta"),
        g_group=[[1, 0, 0], [0, 1, 1], [0, 1, 2]],
        body_basis=[[1, 0], [0, 0], [0, 1]],
        structure=structure,
        group_frame=[[xl.cos(th), -xl.sin(th), 0],
                     [xl.sin(th), xl.cos(th), 0],
                     [0, 0, 1]],
    )


def iliyev() -> SystemDef:
    """Five-coordinate flat system with two tan(q1)-coupled constraints."""
    t = xl.tan(xl.var("q1"))
    return SystemDef.build(
        "iliyev", "chaplygin",
        shape_coords=("q1", "q2", "q3"), group_coords=("q4", "q5"),
        g_shape=[[1, 0, 0], [0, 1, 0], [0, 0, 1]],
        g_group=[[1, 0], [0, 1]],
        conn=[[0, -t, 0], [0, 0, -t]],
    )


def _sphere_golden_noncanonical(i1=1.0, i2=2.0, i3=3.0):
    def golden(w, f_value, lam):
        th, ph = w
        return (-lam * (i3 + 1.0) * f_value ** 3 * math.sin(th)
                * (i1 * math.cos(ph) ** 2 + i2 * math.sin(ph) ** 2 + 1.0))
    return golden


def _build_registry() -> dict[str, RegistryEntry]:
    x = xl.var("x")
    q1 = xl.var("q1")
    ph = xl.var("phi")
    entries = [
        RegistryEntry(
            name="vertical_disk",
            system=vertical_disk(),
            multiplier=xl.num(1.0),
            measure=xl.num(1.0),
            shape_box=((-3.0, 3.0), (-3.0, 3.0)),
            default_ic=(0.0, 0.0, 1.0, 0.5),
            golden={
                "gyro_vanishes": ("known", True),
                "curvature_x_theta_phi": ("known", "radius*sin(phi)"),
            },
            notes="constant-density invariant measure; conditionally variational",
        ),
        RegistryEntry(
            name="free_particle",
            system=free_particle(),
            multiplier=(1 + x ** 2) ** xl.num(-0.5),
            measure=(1 + x ** 2) ** xl.num(-0.5),
            shape_box=((-2.0, 2.0), (-2.0, 2.0)),
            default_ic=(0.2, 0.0, 0.25, 0.2),
            golden={
                "curvature_z_xy": ("known", -1.0),
                "gyro_2_12_at_x1": ("known", 0.5),
            },
        ),
        RegistryEntry(
            name="chaplygin_sphere",
            system=chaplygin_sphere(),
            multiplier=None,
            measure=None,
            cyclic=("psi",),
            default_lambda=1.0,
            shape_box=((0.5, math.pi - 0.5), (0.3, math.pi - 0.3), (-2.0, 2.0)),
            default_ic=(1.2, 0.8, 0.0, 0.2, 0.15, 1.0),
            golden={
                "noncanonical": ("known", _sphere_golden_noncanonical()),
                "inertia": ("known", (1.0, 2.0, 3.0)),
            },
            notes="no 3-dof multiplier exists; Hamiltonizable after reduction "
                  "with a quadrature-built density",
        ),
        RegistryEntry(
            name="snakeboard",
            system=snakeboard(),
            multiplier=None,
            measure=None,
            cyclic=("psi",),
            default_lambda=0.5,
            shape_box=((-2.0, 2.0), (0.15, math.pi / 2 - 0.15), (-2.0, 2.0)),
            default_ic=(0.3, 0.8, 0.0, 0.4, 0.1, 0.5),
            golden={
                "reduced_multiplier": ("known", xl.tan(ph)),
                "noncanonical_12": ("known", lambda w, lam: lam / math.cos(w[1]) ** 2),
            },
            notes="reduced 2-dof system has measure density tan(phi)",
        ),
        RegistryEntry(
            name="chaplygin_sleigh",
            system=chaplygin_sleigh(),
            multiplier=xl.num(1.0),
            measure=None,
            group_box=((-1.0, 1.0), (-1.0, 1.0), (-math.pi, math.pi)),
            default_ic=(0.8, 0.6),
            golden={
                "no_invariant_measure": ("known", True),
                "structure_2_13": ("known", -1.0),
            },
            notes="Hamiltonizable with constant multiplier yet measureless",
        ),
        RegistryEntry(
            name="iliyev",
            system=iliyev(),
            multiplier=xl.cos(q1),
            measure=xl.cos(q1) ** 2,
            shape_box=((-1.2, 1.2), (-2.0, 2.0), (-2.0, 2.0)),
            default_ic=(0.2, 0.2, 0.2, 0.1, 0.15, 0.1),
            golden={
                "measure": ("known", "cos(q1)^2"),
            },
        ),
    ]
    return {entry.name: entry for entry in entries}


_REGISTRY = _build_registry()


def names() -> list[str]:
    return sorted(_REGISTRY)


def get(name: str) -> RegistryEntry:
    """Returns the registry entry for ``name``; lists the registry on miss."""
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnknownSystemError(name) from None
