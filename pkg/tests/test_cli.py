import json

import numpy as np
import pytest

from bosoncheck.cli import build_parser, main
from bosoncheck.experiments import ExperimentConfig, cmd_tv, run
from bosoncheck.linalg_core import RngStream, haar_column_orthonormal, save_matrix
from bosoncheck.samplers import SampleBatch


def run_cli(tmp_path, *args, name="report.json"):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def test_parser_flags():
    args = build_parser().parse_args(["verify", "--k-sweep", "5,10", "--tolerance", "boson_accept_min=0.8"])
    assert args.k_sweep == (5, 10)
    assert args.tolerance == [("boson_accept_min", 0.8)]
    with pytest.raises(SystemExit):
        build_parser().parse_args(["pdf", "--tolerance", "oops"])


def test_pdf_small_run(tmp_path):
    code, out = run_cli(tmp_path, "pdf", "--n", "3", "--samples", "20000", "--seed", "1")
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["passed"] and rep["experiment"] == "pdf"
    claims = {c["claim"] for c in rep["clauses"]}
    assert {"pdf.unit-mean.p", "pdf.unit-mean.d", "pdf.monotone.p", "pdf.monotone.d"} <= claims
    dens = (tmp_path / "report.p_density.csv").read_text().splitlines()
    assert dens[0] == "bin_left,bin_right,density" and len(dens) == 101


def test_pdf_n1_has_exponential_clause(tmp_path):
    code, out = run_cli(tmp_path, "pdf", "--n", "1", "--samples", "20000")
    rep = json.loads(out.read_text())
    assert "pdf.exponential-n1" in {c["claim"] for c in rep["clauses"]}
    assert code == 0


def test_pdf_guard(tmp_path):
    code, _ = run_cli(tmp_path, "pdf", "--n", "9")
    assert code == 2


def test_deviation_n1_closed_form(tmp_path):
    code, out = run_cli(tmp_path, "deviation", "--n", "1", "--samples", "100000", "--seed", "3")
    rep = json.loads(out.read_text())
    stats = {s["name"]: s for s in rep["statistics"]}
    assert stats["closed_form_half_mean_abs_deviation"]["value"] == pytest.approx(np.exp(-1))
    assert stats["reference_half_mean_abs_deviation"]["value"] == pytest.approx(0.3133, abs=1e-4)
    assert code == 0


def test_tv_report_flags_regime(tmp_path):
    code, out = run_cli(tmp_path, "tv", "--n", "2", "--m", "12", "--trials", "3")
    rep = json.loads(out.read_text())
    assert any("regime caveat" in note for note in rep["notes"])
    assert (tmp_path / "report.trials.csv").exists()
    assert code in (0, 1)


def test_tv_guard(tmp_path):
    code, _ = run_cli(tmp_path, "tv", "--n", "6", "--m", "20")
    assert code == 2


def test_tv_point_mass_and_single_photon():
    rep = cmd_tv(ExperimentConfig("tv", n=1, m=9, trials=2))
    A = haar_column_orthonormal(9, 1, RngStream(0, (0, 0)))
    expected = 0.5 * np.abs(np.abs(A[:, 0]) ** 2 - 1 / 9).sum()
    assert rep.artifacts["trials"][1][0][1] == pytest.approx(expected, abs=1e-14)


def test_distinguish_exact_small(tmp_path):
    code, out = run_cli(tmp_path, "distinguish", "--n", "3", "--m", "30", "--samples", "3000", "--trials", "2")
    rep = json.loads(out.read_text())
    names = {s["name"] for s in rep["statistics"]}
    for arm in ("boson", "uniform", "mockup-classical", "mockup-rownorm", "fermion"):
        assert f"{arm}_fraction_mean" in names
    assert "distinguish.rownorm-gap" in {c["claim"] for c in rep["clauses"]}
    head = (tmp_path / "report.rstar_density.csv").read_text().splitlines()[0]
    assert head == "arm,bin_left,bin_right,density"
    assert code in (0, 1)


def test_distinguish_surrogate_small(tmp_path):
    code, out = run_cli(tmp_path, "distinguish", "--mode", "surrogate", "--n", "8", "--samples", "4000",
                        "--trials", "2")
    rep = json.loads(out.read_text())
    assert rep["config"]["tolerances"]["gap_min"] == 0.10
    assert any("surrogate mode" in note for note in rep["notes"])
    assert code == 0


def test_verify_small(tmp_path):
    code, out = run_cli(tmp_path, "verify", "--trials", "5", "--k", "20", "--k-sweep", "5,20")
    rep = json.loads(out.read_text())
    assert {c["claim"] for c in rep["clauses"]} == {"verify.boson-accept", "verify.uniform-reject",
                                                    "verify.amplification"}
    lines = (tmp_path / "report.decisions.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 5
    assert code in (0, 1)


def test_fermion_small(tmp_path):
    code, out = run_cli(tmp_path, "fermion", "--samples", "20000")
    rep = json.loads(out.read_text())
    c = {c["claim"]: c for c in rep["clauses"]}
    assert c["fermion.pauli"]["passed"] and c["fermion.sampler-tv"]["passed"]


def test_tolerance_override_changes_exit_code(tmp_path):
    code, out = run_cli(tmp_path, "deviation", "--n", "3", "--samples", "10000",
                        "--tolerance", "half_mean_abs_min=0.99")
    assert code == 1
    rep = json.loads(out.read_text())
    clause = next(c for c in rep["clauses"] if c["claim"] == "deviation.half-mean-abs")
    assert clause["threshold"] == 0.99 and not clause["passed"]


def test_unknown_tolerance_is_an_error(tmp_path):
    code, _ = run_cli(tmp_path, "deviation", "--tolerance", "bogus=1")
    assert code == 2


def test_csv_report(tmp_path):
    code, out = run_cli(tmp_path, "deviation", "--n", "2", "--samples", "10000", "--format", "csv",
                        name="r.csv")
    lines = out.read_text().splitlines()
    assert lines[0].startswith("section,name,value")
    assert any(line.startswith("clause,deviation.half-mean-abs,") for line in lines)
    assert code == 0


def test_stdout_report(capsys):
    code = main(["deviation", "--n", "2", "--samples", "10000"])
    captured = capsys.readouterr()
    assert json.loads(captured.out)["experiment"] == "deviation"
    assert "wall-clock" in captured.err and "wall-clock" not in captured.out
    assert code == 0


@pytest.mark.parametrize("args", [
    ["pdf", "--n", "2", "--samples", "20000"],
    ["tv", "--n", "2", "--m", "10", "--trials", "2"],
    ["verify", "--trials", "2", "--k", "5", "--k-sweep", "5"],
])
def test_reports_are_byte_identical(tmp_path, args):
    a = tmp_path / "a"
    b = tmp_path / "b"
    a.mkdir()
    b.mkdir()
    main([*args, "--out", str(a / "r.json")])
    main([*args, "--out", str(b / "r.json")])
    for f in sorted(a.iterdir()):
        assert f.read_bytes() == (b / f.name).read_bytes()


def test_sample_command(tmp_path):
    code, out = run_cli(tmp_path, "sample", "--kind", "fermion", "--n", "3", "--m", "7", "--samples", "50",
                        "--seed", "9", name="b.jsonl")
    assert code == 0
    batch = SampleBatch.read_jsonl(out)
    assert len(batch) == 50 and batch.kind == "fermion" and batch.seed == 9
    assert (batch.occupations <= 1).all()


def test_sample_command_with_matrix(tmp_path):
    A = haar_column_orthonormal(6, 2, RngStream(4))
    path = tmp_path / "a.json"
    save_matrix(A, path)
    code, out = run_cli(tmp_path, "sample", "--kind", "lossy-boson", "--loss", "0.5", "--matrix", str(path),
                        "--samples", "30", name="b.jsonl")
    assert code == 0
    batch = SampleBatch.read_jsonl(out)
    assert batch.m == 6 and batch.photon_counts.max() <= 2


def test_config_validation():
    with pytest.raises(ValueError):
        run(ExperimentConfig("nope"))
    with pytest.raises(ValueError):
        run(ExperimentConfig("pdf", n=0))
    with pytest.raises(ValueError):
        run(ExperimentConfig("pdf", mode="fast"))
