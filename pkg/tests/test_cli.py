import json

import pytest

from dynasep.cli import EXIT_IO, EXIT_OK, EXIT_TOLERANCE, EXIT_USAGE, main, report_schema_version


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_schema_version_constant():
    assert report_schema_version() == report_schema_version()
    assert report_schema_version().startswith("dynasep-report/")


def test_schema_in_csv_and_json(capsys):
    code, out, _ = run(capsys, "check-duality", "--n", "1", "--len", "3", "--q", "1/2", "--alpha", "1/3")
    assert code == EXIT_OK
    assert out.splitlines()[0] == f"# schema: {report_schema_version()}"
    code, out, _ = run(capsys, "check-duality", "--n", "1", "--len", "3", "--format", "json")
    assert json.loads(out)["schema"] == report_schema_version()


def test_check_duality_all_zero(capsys):
    code, out, _ = run(capsys, "check-duality", "--n", "2", "--len", "7", "--q", "1/2", "--alpha", "1/3",
                       "--backend", "exact", "--full")
    assert code == EXIT_OK
    rows = [line for line in out.splitlines() if not line.startswith("#")][1:]
    assert len(rows) == 640
    assert all(r.split(",")[-1] == "0" for r in rows)


def test_moments_residue(capsys):
    code, out, _ = run(capsys, "moments", "--n", "1", "--x=-1", "--t", "0", "--q", "0.5")
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["summary"]["value"] == pytest.approx(-0.5, abs=1e-12)
    assert set(doc["summary"]["checks"]) == {"imag", "convergence"}


def test_moments_coincident_flagged(capsys):
    code, out, _ = run(capsys, "moments", "--x=-1,-1", "--t", "0.2")
    assert code == EXIT_OK
    assert "unverified extension" in json.loads(out)["summary"]["note"]


def test_moments_monte_carlo(capsys):
    code, out, _ = run(capsys, "moments", "--x=-1", "--t", "0.3", "--trials", "4000", "--seed", "3")
    doc = json.loads(out)
    assert code == EXIT_OK and doc["summary"]["trials"] == 4000


def test_sumid(capsys):
    code, _, _ = run(capsys, "check-identities", "--identity", "sumid", "--nmax", "10")
    assert code == EXIT_OK


@pytest.mark.parametrize("identity", ["eigen", "keyit", "step", "half", "contour"])
def test_other_identities(capsys, identity):
    code, out, _ = run(capsys, "check-identities", "--identity", identity)
    assert code == EXIT_OK, out


def test_check_measure(capsys):
    code, out, _ = run(capsys, "check-measure", "--q", "1/2", "--alpha", "2/3")
    assert code == EXIT_OK, out
    assert "printed-zeta-ratio-k2,1.0" in out


def test_sample_initdata(capsys):
    code, out, _ = run(capsys, "sample-initdata", "--init", "half", "--xmin", "-3", "--xmax", "2", "--count", "4")
    assert code == EXIT_OK
    rows = [line for line in out.splitlines() if not line.startswith("#")][1:]
    assert len(rows) == 4 and all(r.split(",")[1].endswith("1 2") for r in rows)


def test_simulate_dump(tmp_path, capsys):
    dump = tmp_path / "traj.txt"
    code, out, _ = run(capsys, "simulate", "--xmin", "-4", "--xmax", "4", "--t", "2", "--seed", "5",
                       "--dump", str(dump))
    assert code == EXIT_OK
    lines = dump.read_text().splitlines()
    assert lines[0] == "-4 4 3 2 1 0 1 2 3 4" and lines[1] == "t site delta"


def test_reproducible_bytes(tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert main(["simulate", "--init", "stationary", "--t", "1", "--seed", "9", "--out", str(p)]) == EXIT_OK
    assert paths[0].read_bytes() == paths[1].read_bytes()
    other = tmp_path / "c.csv"
    main(["simulate", "--init", "stationary", "--t", "1", "--seed", "10", "--out", str(other)])
    assert other.read_bytes() != paths[0].read_bytes()


def test_threads_do_not_change_output(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["moments", "--x=-2", "--t", "0.5", "--trials", "3000", "--threads", "1", "--out", str(a)])
    main(["moments", "--x=-2", "--t", "0.5", "--trials", "3000", "--threads", "8", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_usage_errors(capsys):
    assert run(capsys, "check-duality", "--q", "2")[0] == EXIT_USAGE
    assert run(capsys, "moments", "--x", "a")[0] == EXIT_USAGE
    assert run(capsys, "no-such-command")[0] == EXIT_USAGE
    assert run(capsys, "moments", "--x=-2", "--radius", "0.9")[0] == EXIT_USAGE
    assert run(capsys, "moments", "--x=-2", "--q", "1/0")[0] == EXIT_USAGE
    assert run(capsys, "check-measure", "--threads", "0")[0] == EXIT_USAGE


def test_tolerance_failure(capsys):
    # a 2-node grid cannot resolve the integral, so node doubling changes the value
    code, out, _ = run(capsys, "moments", "--x=-2,-3", "--t", "1", "--nodes", "2")
    assert code == EXIT_TOLERANCE
    assert json.loads(out)["ok"] is False


def test_io_failure(tmp_path, capsys):
    missing = tmp_path / "no" / "such" / "dir" / "out.csv"
    assert run(capsys, "check-duality", "--n", "1", "--len", "3", "--out", str(missing))[0] == EXIT_IO
