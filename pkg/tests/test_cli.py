import json
import xml.etree.ElementTree as ET

import pytest

from fdsecrecy.channel import bundled_config_text, parse_config
from fdsecrecy.cli import EXIT_FAILURE, EXIT_INFEASIBLE, EXIT_OK, main
from fdsecrecy.region import region_contains

SVG_NS = {"s": "http://www.w3.org/2000/svg"}


def _no_eve_config(tmp_path):
    text = bundled_config_text()
    lines = []
    for line in text.splitlines():
        if line.startswith("z1"):
            line = "z1 = 0, 0"
        elif line.startswith("z2"):
            line = "z2 = 0, 0"
        lines.append(line)
    path = tmp_path / "no_eve.cfg"
    path.write_text("\n".join(lines) + "\n")
    return path


def _polygon(path):
    rows = path.read_text().splitlines()
    rows = [r for r in rows if not r.startswith("#")][1:]
    return [tuple(float(v) for v in r.split(",")) for r in rows]


def test_perfect_region_without_eavesdropper_is_rectangle(tmp_path):
    cfg = _no_eve_config(tmp_path)
    out = tmp_path / "out"
    code = main(["perfect-region", "--config", str(cfg), "--grid", "3,3",
                 "--out", str(out)])
    assert code == EXIT_OK
    verts = _polygon(out / "perfect_polygon.csv")
    assert len(verts) == 3 and verts[0][0] == 0.0 and verts[-1][1] == 0.0
    assert verts[0][1] == verts[1][1] and verts[1][0] == verts[2][0]
    region = (out / "perfect_region.csv").read_text().splitlines()
    assert region[0] == "k,l,r1,r2,rE,sum,status" and len(region) == 17
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["parameters"]["grid"] == [3, 3]


def test_malformed_config_reports_line(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("m1 = 2\nm2 = 2\nh12 = 1, 1\nh21 = 1, 1\nz1 = 1, what\nz2 = 1, 1\n")
    code = main(["perfect-region", "--config", str(cfg), "--out",
                 str(tmp_path / "o")])
    assert code == EXIT_INFEASIBLE
    assert "line 5" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    code = main(["perfect-region", "--config", str(tmp_path / "nope.cfg"),
                 "--out", str(tmp_path / "o")])
    assert code == EXIT_INFEASIBLE
    assert "error" in capsys.readouterr().err


def test_robust_region_three_eps(tmp_path):
    out = tmp_path / "out"
    code = main(["robust-region", "--power-db", "3", "--eps", "0,0.02,0.06",
                 "--grid", "4,4", "--out", str(out)])
    assert code == EXIT_OK
    names = ["0", "0.02", "0.06"]
    for e in names:
        first = (out / f"robust_eps{e}_region.csv").read_text().splitlines()[0]
        assert first.startswith("# eps")
    root = ET.parse(out / "robust_regions.svg").getroot()
    polys = root.findall(".//s:polyline", SVG_NS)
    assert len(polys) == 3
    regions = []
    for poly, e in zip(polys, names):
        rows = (out / f"robust_eps{e}_polygon.csv").read_text().splitlines()[1:]
        assert poly.get("points").split(" ") == rows
        regions.append(_polygon(out / f"robust_eps{e}_polygon.csv"))
    assert region_contains(regions[0], regions[1])
    assert region_contains(regions[1], regions[2])


def test_outputs_are_reproducible(tmp_path):
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["robust-region", "--eps", "0.03", "--grid", "3,3",
                     "--out", str(out)]) == EXIT_OK
        runs.append({p.name: p.read_bytes() for p in out.iterdir()
                     if p.name != "manifest.json"})
    assert runs[0] == runs[1] and len(runs[0]) == 3


def test_power_min_exit_codes(tmp_path):
    out = tmp_path / "p"
    assert main(["power-min", "--eps", "0.02", "--out", str(out)]) == EXIT_OK
    assert (out / "power.csv").read_text().splitlines()[1] == "0,0,inf,0,optimal"
    code = main(["power-min", "--eps", "0.02", "--gamma-s1", "50", "--gamma-s2",
                 "50", "--out", str(out)])
    assert code == EXIT_INFEASIBLE
    code = main(["power-min", "--eps", "0.02", "--floors", "0,0.2,0.4",
                 "--gamma-e", "0.5", "--out", str(out)])
    assert code == EXIT_OK
    lines = (out / "power.csv").read_text().splitlines()
    assert len(lines) == 4 and all(l.endswith("optimal") for l in lines[1:])


def test_verify_kkt_small_grid(tmp_path):
    out = tmp_path / "k"
    assert main(["verify-kkt", "--grid", "4,4", "--out", str(out)]) == EXIT_OK
    text = (out / "kkt_report.txt").read_text()
    assert text.count("\n") == 26 and ",fail," not in text


def test_validate_passes(tmp_path):
    out = tmp_path / "v"
    code = main(["validate", "--samples", "2000", "--seed", "7", "--grid", "4,4",
                 "--out", str(out)])
    checks = json.loads((out / "validation.json").read_text())
    assert code == EXIT_OK and len(checks) == 4
    assert all(c["pass"] for c in checks)


def test_bad_arguments_exit_nonzero():
    with pytest.raises(SystemExit) as exc:
        main(["perfect-region", "--grid", "0,3"])
    assert exc.value.code != 0
