import numpy as np
import pytest

from nhk import systems, sysfile
from nhk.geometry import derived
from nhk.sysfile import SysFileError, dumps, loads


@pytest.mark.parametrize("name", systems.names())
def test_round_trip_is_idempotent_and_value_preserving(name):
    sys = systems.get(name).system
    text = dumps(sys)
    again = loads(text)
    assert dumps(again) == text
    assert again.kind == sys.kind
    assert again.shape_coords == sys.shape_coords
    assert again.group_coords == sys.group_coords
    assert np.allclose(np.asarray(again.structure), np.asarray(sys.structure))
    entry = systems.get(name)
    rng = np.random.default_rng(0)
    for _ in range(5):
        if sys.m:
            r = np.array([rng.uniform(lo, hi) for lo, hi in entry.shape_box])
        else:
            r = np.zeros(0)
        a = derived(sys, r)
        b = derived(again, r)
        assert np.allclose(a.g_shape, b.g_shape, atol=1e-14)
        assert np.allclose(a.curv, b.curv, atol=1e-14)
        assert np.allclose(a.gyro_vert, b.gyro_vert, atol=1e-14)


def test_missing_required_block_is_rejected():
    text = "name = t\nkind = chaplygin\n\n[coords]\nshape = u\ngroup = w\n\n" \
           "[metric.g_shape]\nu,u = 1\n\n[metric.g_group]\nw,w = 1\n"
    with pytest.raises(SysFileError, match="requires"):
        loads(text)  # no [connection]


def test_symmetric_block_fills_other_triangle():
    text = (
        "name = t\nkind = chaplygin\n\n[coords]\nshape = u v\ngroup = w\n\n"
        "[metric.g_shape]\nu,u = 1\nv,v = 1\nu,v = u\n\n"
        "[metric.g_group]\nw,w = 1\n\n[connection]\nw,u = 0\n"
    )
    sys = loads(text)
    geo = derived(sys, [0.25, 0.0])
    assert geo.g_shape[0, 1] == geo.g_shape[1, 0] == 0.25


def test_bad_expression_reports_error():
    text = (
        "name = t\nkind = chaplygin\n\n[coords]\nshape = u\ngroup = w\n\n"
        "[metric.g_shape]\nu,u = 1 +* 2\n\n[metric.g_group]\nw,w = 1\n\n"
        "[connection]\nw,u = 0\n"
    )
    with pytest.raises(SysFileError):
        loads(text)


def test_unknown_coordinate_label():
    text = (
        "name = t\nkind = chaplygin\n\n[coords]\nshape = u\ngroup = w\n\n"
        "[metric.g_shape]\nq,q = 1\n\n[metric.g_group]\nw,w = 1\n\n"
        "[connection]\nw,u = 0\n"
    )
    with pytest.raises(SysFileError, match="unknown"):
        loads(text)


def test_file_io_round_trip(tmp_path):
    sys = systems.get("chaplygin_sleigh").system
    path = tmp_path / "sleigh.nhk"
    sysfile.dump(sys, path)
    assert dumps(sysfile.load(path)) == dumps(sys)
