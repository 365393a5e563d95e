import json
import subprocess
import sys

import pytest

from scirate.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_ball_sizes(capsys):
    assert run(capsys, "ball", "--family", "z3", "--radius", "3")[:2] == (0, "sizes 1,7,25,63\n")
    assert run(capsys, "ball", "--family", "free2", "--radius", "3")[1] == "sizes 1,5,17,53\n"


def test_ball_from_presentation(tmp_path, capsys):
    path = tmp_path / "z2.txt"
    path.write_text("gens: a b\nrel: [a,b]\n")
    assert run(capsys, "ball", "--presentation", str(path), "--radius", "4")[1] == "sizes 1,5,13,25,41\n"


def test_bad_presentation_is_config_error(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text("gens: a\nrel: a b\n")
    code, _, err = run(capsys, "ball", "--presentation", str(path))
    assert code == 2 and "line 2" in err


def test_config_errors(capsys):
    assert run(capsys, "ball", "--family", "nonsense")[0] == 2
    assert run(capsys, "ball", "--radius", "-1")[0] == 2
    assert run(capsys, "rips", "--d", "0")[0] == 2
    assert run(capsys, "rips", "--m", "0")[0] == 2
    assert run(capsys, "vrate", "--rmin", "5", "--rmax", "3")[0] == 2
    assert run(capsys, "qi-audit", "--family", "z3")[0] == 2
    assert run(capsys, "qi-audit", "--family", "z3", "--compare", "heisenberg")[0] == 2
    assert run(capsys, "ball", "--family", "free3", "--radius", "8", "--max-ball", "1000")[0] == 2
    assert run(capsys, "frobnicate")[0] == 2


def test_certify_precondition_exit(capsys):
    code, _, err = run(capsys, "certify-sci", "--family", "z2", "--d", "1")
    assert code == 2 and "2d > r" in err


def test_certify_z2(capsys):
    code, out, err = run(capsys, "certify-sci", "--family", "z2", "--radius", "9", "--loops", "20")
    assert code == 0
    rep = json.loads(out)
    assert rep["all_filled"] and rep["d"] == 3
    assert err.startswith("filled 21 of 21")


def test_certify_colored_cyclic(capsys):
    code, out, _ = run(capsys, "certify-sci", "--family", "cyclic3", "--d", "2", "--m", "3", "--radius", "3", "--loops", "10")
    rep = json.loads(out)
    assert code == 0 and rep["free_action"]["free"]


def test_rips_reports_free_action(capsys):
    code, out, _ = run(capsys, "rips", "--family", "cyclic3", "--d", "2", "--radius", "3")
    rep = json.loads(out)
    assert code == 0
    assert rep["counts"] == {"vertices": 3, "edges": 3, "triangles": 1}
    assert not rep["free_action"]["free"]


def test_rips_export(tmp_path, capsys):
    path = tmp_path / "skel.txt"
    assert run(capsys, "rips", "--family", "z2", "--d", "2", "--radius", "1", "--out", str(path))[0] == 2
    assert run(capsys, "rips", "--family", "z2", "--d", "2", "--radius", "2", "--out", str(path))[0] == 0
    lines = path.read_text().splitlines()
    assert sum(1 for s in lines if s.startswith("v ")) == 13


def test_fill_loop(capsys):
    code, out, _ = run(capsys, "fill-loop", "--family", "z2", "--d", "2", "--loop", "e,a,ab,b")
    assert code == 0
    assert json.loads(out)["result"]["status"] == "filled"


def test_fill_loop_obstructed(capsys):
    loop = ",".join(["a^3", "a^2b", "ab^2", "b^3", "a^-1b^2", "a^-2b", "a^-3", "a^-2b^-1",
                     "a^-1b^-2", "b^-3", "ab^-2", "a^2b^-1"])
    code, out, _ = run(capsys, "fill-loop", "--family", "z2", "--d", "2", "--radius", "8",
                       "--inner", "2", "--outer", "8", "--loop", loop)
    res = json.loads(out)["result"]
    assert code == 0 and res["status"] == "obstructed"
    assert res["certificate"]["schema"] == "scirate.h1cert/1"


def test_fill_loop_outside_view(capsys):
    assert run(capsys, "fill-loop", "--family", "z2", "--d", "2", "--inner", "2", "--loop", "e,a,b")[0] == 2


def test_vrate_outputs(tmp_path, capsys):
    base = tmp_path / "z3"
    code, out, _ = run(capsys, "vrate", "--family", "z3", "--rmin", "2", "--rmax", "3", "--radius", "8",
                       "--out", str(base) + ".csv")
    assert code == 0
    assert out.splitlines()[:3] == ["r,N_lower,N_upper,inconclusive_count,truncation_R", "2,,2,0,8", "3,,3,0,8"]
    assert (tmp_path / "z3.csv").read_text() == out
    js = json.loads((tmp_path / "z3.json").read_text())
    assert js["estimate"]["schema"] == "scirate.vrate/1"


def test_vrate_z2_reports_no_upper_bound(capsys):
    code, out, _ = run(capsys, "vrate", "--family", "z2", "--rmin", "3", "--rmax", "4", "--radius", "10")
    assert code == 0
    assert "r=3: no upper bound found" in out


def test_vrate_margin_error(capsys):
    assert run(capsys, "vrate", "--family", "z2", "--rmin", "3", "--rmax", "4", "--radius", "6")[0] == 2


def test_qi_audit(capsys):
    code, out, _ = run(capsys, "qi-audit", "--family", "z2-altgens", "--compare", "z2", "--radius", "4")
    rep = json.loads(out)
    assert code == 0 and rep["audit"]["passed"]
    assert rep["map"]["kind"] == "change_of_generators" and rep["map"]["lambda"] == "2"
    code, out, _ = run(capsys, "qi-audit", "--family", "z1", "--compare", "z1", "--qi", "finite_index", "--radius", "8")
    rep = json.loads(out)
    assert code == 0 and (rep["map"]["lambda"], rep["map"]["C"]) == ("2", 1)


@pytest.mark.parametrize(
    "argv",
    [
        ["vrate", "--family", "z3", "--rmin", "2", "--rmax", "3", "--radius", "8", "--seed", "4"],
        ["certify-sci", "--family", "z2", "--radius", "9", "--loops", "15", "--seed", "9"],
    ],
)
def test_same_seed_same_bytes(tmp_path, capsys, argv):
    blobs = []
    for k in range(2):
        path = tmp_path / f"run{k}.json"
        assert run(capsys, *argv, "--out", str(path))[0] == 0
        produced = sorted(p for p in tmp_path.iterdir() if p.stem == f"run{k}")
        blobs.append([p.read_bytes() for p in produced])
    assert blobs[0] == blobs[1]


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "scirate.cli", "ball", "--family", "z2", "--radius", "2"],
                         capture_output=True, text=True, check=True)
    assert out.stdout == "sizes 1,5,13\n"
