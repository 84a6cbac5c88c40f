import xml.etree.ElementTree as ET

import numpy as np
import pytest

from fdsecrecy.region import (RegionResult, fmt, polygon_csv, polygon_height,
                              region_contains, region_csv, region_excess,
                              region_polygon, region_svg, staircase)


def _region(r1, r2, re, status=None):
    r1, r2, re = (np.asarray(a, float) for a in (r1, r2, re))
    n = r1.size
    status = np.array(status or ["optimal"] * n, dtype=object)
    z = np.zeros((n, 2, 2), complex)
    s = np.maximum(0.0, r1 + r2 - re)
    return RegionResult(np.arange(n), np.zeros(n, int), r1, r2, re, re, s,
                        status, z, z, z, z)


def test_single_box_with_diagonal_cut():
    v = staircase([1.0], [0.5], [1.2])
    np.testing.assert_allclose(v, [(0, 0.5), (0.7, 0.5), (1.0, 0.2), (1.0, 0)],
                               atol=1e-15)


def test_empty_and_rectangle():
    assert staircase([], [], []) == []
    assert staircase([1.0], [0.5], [2.0]) == [(0.0, 0.5), (1.0, 0.5), (1.0, 0.0)]


def test_union_of_boxes():
    v = staircase([1.0, 0.4], [0.2, 0.8], [2.0, 2.0])
    assert v == [(0.0, 0.8), (0.4, 0.8), (0.4, 0.2), (1.0, 0.2), (1.0, 0.0)]


def test_failed_cells_are_excluded():
    r = _region([1.0, 2.0], [1.0, 2.0], [0.0, 0.0], ["optimal", "failed"])
    assert region_polygon(r) == [(0.0, 1.0), (1.0, 1.0), (1.0, 0.0)]


def test_target_basis_never_exceeds_certified():
    r = _region([1.0], [0.5], [0.3])
    r.r1_lower = np.array([1.1])
    outer = region_polygon(r, "certified")
    inner = region_polygon(r, "targets")
    assert region_contains(outer, inner)
    with pytest.raises(ValueError):
        region_polygon(r, "bogus")


def test_containment_and_excess():
    big = staircase([1.0], [1.0], [1.5])
    small = staircase([0.8], [0.6], [1.2])
    assert region_contains(big, small)
    assert not region_contains(small, big)
    # just right of R1 = 0.8 the big region still reaches R2 = 0.7
    assert region_excess(small, big) == pytest.approx(0.7, abs=1e-8)
    assert region_excess(big, []) == 0.0


def test_polygon_height():
    v = staircase([1.0], [0.5], [1.2])
    np.testing.assert_allclose(polygon_height(v, [0.0, 0.7, 0.85, 1.0, 1.5]),
                               [0.5, 0.5, 0.35, 0.2, 0.0])


def test_fmt_nine_digits():
    assert fmt(1 / 3) == "0.333333333"
    assert fmt(float("nan")) == "nan"
    assert fmt("optimal") == "optimal"


def test_region_csv_columns():
    r = _region([0.5], [0.25], [0.1])
    lines = region_csv(r, robust=True, header_comment="eps = 0.02").splitlines()
    assert lines[0] == "# eps = 0.02"
    assert lines[1] == "k,l,r1,r2,rE,sum,r1Lower,r2Lower,rEUpper,status"
    assert lines[2] == "0,0,0.5,0.25,0.1,0.65,0.5,0.25,0.1,optimal"


def test_svg_polylines_match_csv():
    a = staircase([1.0 / 3, 0.2], [0.5, 0.7], [0.8, 0.8])
    b = staircase([0.25], [0.4], [0.6])
    doc = region_svg([("eps = 0", a), ("eps = <0.02>", b)], title="regions & co")
    root = ET.fromstring(doc)
    ns = {"s": "http://www.w3.org/2000/svg"}
    lines = root.findall(".//s:polyline", ns)
    assert [p.get("data-label") for p in lines] == ["eps = 0", "eps = <0.02>"]
    for poly, verts in zip(lines, (a, b)):
        csv_rows = polygon_csv(verts).splitlines()[1:]
        assert poly.get("points").split(" ") == csv_rows
