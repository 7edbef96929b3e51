import csv
import io
import json
import shutil
import subprocess

import pytest

from energynet.cli import EXIT_INVALID, EXIT_NUMERIC, EXIT_OK, main


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def znet(tmp_path, capsys):
    p = tmp_path / "z.json"
    assert run(["gen", "--family", "zgeom", "--c", 2, "--size", 10, "--out", p], capsys)[0] == EXIT_OK
    return p


def test_gen_then_validate(znet, capsys, tmp_path):
    code, out, _ = run(["validate", znet], capsys)
    assert code == EXIT_OK
    assert json.loads(out)[0]["violations"] == []


def test_gen_tree(tmp_path, capsys):
    p = tmp_path / "t.json"
    assert run(["gen", "--family", "tree", "--c", 2, "--size", 3, "--out", p], capsys)[0] == EXIT_OK
    assert run(["validate", p], capsys)[0] == EXIT_OK


def test_validate_broken_file_lists_violations(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"origin": 0, "edges": [[0, 1, 1.0]]}'.replace("]]}", "], [2, 3, 1.0]]}"))
    code, out, _ = run(["validate", p], capsys)
    assert code == EXIT_INVALID
    assert [v["kind"] for v in json.loads(out)[0]["violations"]] == ["disconnected", "disconnected"]


def test_validate_malformed_json(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"origin": 0, "edges": [[0, 1, -1]]}')
    code, _, err = run(["validate", p], capsys)
    assert code == EXIT_INVALID and "positive" in err


def test_unknown_flag_rejected(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--bogus"])
    assert exc.value.code == 2


def test_h_energy_sweep(capsys):
    code, out, _ = run(["sweep", "--family", "zgeom", "--c", 2, "--quantity", "h-energy", "--radii", "5..30"], capsys)
    assert code == EXIT_OK
    rows = rows_of(out)
    assert [int(r["radius"]) for r in rows] == list(range(5, 31))
    assert float(rows[-1]["value"]) == pytest.approx(2.0, abs=1e-6)
    res = [float(r["residual"]) for r in rows]
    assert all(b < a for a, b in zip(res, res[1:]))
    assert all(r["pass"] == "true" for r in rows)


def test_sweep_report_and_report_command(tmp_path, capsys):
    csv_path, js = tmp_path / "s.csv", tmp_path / "s.json"
    argv = ["sweep", "--c", 2, "--quantity", "monopole", "--radii", "2..6", "--out", csv_path, "--report", js]
    assert run(argv, capsys)[0] == EXIT_OK
    recs = json.loads(js.read_text())
    assert [set(r) for r in recs] == [{"quantity", "radius", "value", "residual", "tolerance", "pass"}] * 5
    code, out, _ = run(["report", csv_path], capsys)
    assert code == EXIT_OK
    again = json.loads(out)
    assert [r["radius"] for r in again] == [2, 3, 4, 5, 6]
    assert [r["value"] for r in again] == pytest.approx([r["value"] for r in recs], rel=1e-15)


def test_empty_sweep_range(tmp_path, capsys):
    js = tmp_path / "e.json"
    code, out, _ = run(["sweep", "--c", 2, "--quantity", "h-energy", "--radii", "5..4", "--report", js], capsys)
    assert code == EXIT_OK
    assert rows_of(out) == []
    assert json.loads(js.read_text()) == []


@pytest.mark.parametrize("quantity", ["defect-energy", "green-energy"])
def test_other_sweeps_are_finite(quantity, capsys):
    code, out, _ = run(["sweep", "--c", 2, "--quantity", quantity, "--radii", "3..8"], capsys)
    assert code == EXIT_OK and len(rows_of(out)) == 6


def test_spectrum_sides_match(znet, capsys):
    code, out, err = run(["spectrum", znet, "--radius", 8, "--xi", "delta:1"], capsys)
    assert code == EXIT_OK
    rows = rows_of(out)
    sides = {s: [(float(r["lambda"]), float(r["weight"])) for r in rows if r["side"] == s]
             for s in ("ell2", "krein", "friedrichs")}
    big = lambda atoms: [a for a in atoms if a[1] > 1e-12]
    l2, kr = big(sides["ell2"]), big(sides["krein"])
    assert len(l2) == len(kr) > 0
    for (la, wa), (lb, wb) in zip(l2, kr):
        assert la == pytest.approx(lb, rel=1e-8) and wa == pytest.approx(wb, abs=1e-8)
    assert sides["friedrichs"]
    json.loads(err)


def test_spectrum_unknown_vertex(znet, capsys):
    assert run(["spectrum", znet, "--radius", 3, "--xi", "delta:99"], capsys)[0] == EXIT_INVALID


def test_kernel_output(znet, capsys):
    code, out, _ = run(["kernel", znet, "--radius", 3, "--mode", "wired"], capsys)
    assert code == EXIT_OK
    rows = rows_of(out)
    assert list(rows[0]) == ["x", "vertex", "value"] and len(rows) == 49


def test_defect_output(capsys):
    code, out, _ = run(["defect", "--family", "zgeom", "--c", 2, "--n", 20], capsys)
    assert code == EXIT_OK
    rows = {int(r["n"]): r for r in rows_of(out)}
    assert float(rows[2]["f"]) == pytest.approx(1.75, rel=1e-15)
    assert float(rows[0]["partial_energy"]) == 0.0


def test_green_output_and_numeric_failure(znet, tmp_path, capsys):
    code, out, _ = run(["green", znet, "--radius", 4, "--f", "delta:0"], capsys)
    assert code == EXIT_OK
    assert list(rows_of(out)[0]) == ["vertex", "f", "Gf"]
    # radius covers the whole network: nothing is grounded
    code, _, err = run(["green", znet, "--radius", 20, "--f", "delta:0"], capsys)
    assert code == EXIT_NUMERIC and "singular" in err


def test_outputs_are_deterministic(znet, tmp_path, capsys):
    outs = []
    for k in range(2):
        p = tmp_path / f"s{k}.csv"
        assert run(["spectrum", znet, "--radius", 5, "--xi", "random", "--seed", 7, "--out", p], capsys)[0] == EXIT_OK
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_sweep_independent_of_thread_count(monkeypatch, capsys):
    argv = ["sweep", "--c", 3, "--quantity", "h-energy", "--radii", "1..12"]
    monkeypatch.setenv("ENERGYNET_THREADS", "1")
    one = run(argv, capsys)[1]
    monkeypatch.setenv("ENERGYNET_THREADS", "4")
    assert run(argv, capsys)[1] == one


@pytest.mark.skipif(shutil.which("energynet") is None, reason="console script not installed")
def test_console_script(tmp_path):
    p = tmp_path / "z.json"
    subprocess.run(["energynet", "gen", "--family", "zgeom", "--c", "2", "--size", "4", "--out", str(p)], check=True)
    assert subprocess.run(["energynet", "validate", str(p)], capture_output=True).returncode == 0
