import json

from mixlr.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, main
from mixlr.profiles import DEFAULT_MARKERS, parse_profile_table


def write_case(path, counts, total=4):
    doc = {"markers": {m: {"detected": counts.get(m, 0), "total": total}
                       for m in DEFAULT_MARKERS}}
    path.write_text(json.dumps(doc))


def test_synth_writes_parseable_csv(tmp_path):
    out = tmp_path / "singles.csv"
    code = main(["synth", "--out", str(out), "--seed", "3", "--n-per-fluid", "3"])
    assert code == EXIT_OK
    ds = parse_profile_table(out.read_text())
    assert len(ds) == 27


def test_train_then_evaluate(tmp_path, capsys):
    model = tmp_path / "model.json"
    code = main(["train", "--interest", "vaginal_mucosa,menstrual_secretion",
                 "--background", "penile=0", "--seed", "2",
                 "--out", str(model)])
    assert code == EXIT_OK
    case = tmp_path / "case.json"
    write_case(case, {"MUC4": 4, "MYOZ1": 4, "CYP2B7P1": 4})
    capsys.readouterr()
    code = main(["evaluate", "--model", str(model), "--case", str(case), "--json"])
    assert code == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["log10_lr"] > 0  # strong vaginal signal supports H1


def test_evaluate_text_report(tmp_path, capsys):
    model = tmp_path / "model.json"
    assert main(["train", "--interest", "saliva", "--seed", "1",
                 "--out", str(model)]) == EXIT_OK
    case = tmp_path / "case.json"
    write_case(case, {"HTN3": 4, "STATH": 4})
    capsys.readouterr()
    assert main(["evaluate", "--model", str(model), "--case", str(case)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "log10 LR =" in out and "n/2 rule" in out


def test_missing_data_file_is_data_error(tmp_path):
    case = tmp_path / "case.json"
    write_case(case, {})
    code = main(["evaluate", "--model", str(tmp_path / "nope.json"),
                 "--case", str(case)])
    assert code == EXIT_DATA


def test_bad_config_is_config_error(tmp_path):
    config = tmp_path / "exp.toml"
    config.write_text("runs = 0\n")
    code = main(["experiment", "--config", str(config), "--out",
                 str(tmp_path / "r")])
    assert code == EXIT_CONFIG


def test_bad_background_value_is_config_error(tmp_path):
    code = main(["train", "--interest", "vaginal_mucosa",
                 "--background", "blood=1.7", "--out", str(tmp_path / "m.json")])
    assert code == EXIT_CONFIG


def test_sensitivity_fluid_in_interest_is_config_error(tmp_path):
    config = tmp_path / "exp.toml"
    config.write_text(
        'runs = 1\ninterest_sets = [["vaginal_mucosa"]]\n[synthesize]\nn_per_fluid = 4\n')
    code = main(["sensitivity", "--config", str(config), "--fluid",
                 "vaginal_mucosa", "--out", str(tmp_path / "s")])
    assert code == EXIT_CONFIG


def test_unparseable_case_is_data_error(tmp_path):
    model = tmp_path / "model.json"
    code = main(["train", "--interest", "vaginal_mucosa", "--seed", "2",
                 "--out", str(model)])
    assert code == EXIT_OK
    case = tmp_path / "case.json"
    case.write_text(json.dumps({"markers": {"HBB2": {"detected": 1, "total": 4}}}))
    assert main(["evaluate", "--model", str(model), "--case", str(case)]) \
        == EXIT_DATA
