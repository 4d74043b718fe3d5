import json

import pytest

from mkv.cli import main
from mkv.specio import save_spec
from mkv.catalog import get_spec


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_reproduce_flat_json(capsys):
    code, out, _ = run(capsys, "reproduce", "flat-r3", "--json", "--grid", "3")
    assert code == 0
    doc = json.loads(out)
    assert doc["verdict"] == "pass"
    text = json.dumps(doc)
    assert "MIXED_KILLING" in text


def test_json_output_is_deterministic(capsys):
    _, a, _ = run(capsys, "killing", "flat-r3", "--field", "V", "--json", "--grid", "3")
    _, b, _ = run(capsys, "killing", "flat-r3", "--field", "V", "--json", "--grid", "3")
    assert a == b
    doc = json.loads(a)
    assert doc["fitted"]["classification"] == "MIXED_KILLING"
    assert doc["fitted"]["f"]["value"] == pytest.approx(2)


def test_killing_on_exported_file(capsys, tmp_path):
    path = tmp_path / "olszak.json"
    assert run(capsys, "export", "olszak-halfspace", str(path))[0] == 0
    code, out, _ = run(capsys, "killing", str(path), "--field", "xi", "--json", "--grid", "3")
    assert code == 0
    assert json.loads(out)["fitted"]["classification"] == "NONE"


def test_asymmetric_file_is_input_error(capsys, tmp_path):
    path = tmp_path / "bad.json"
    doc = {"name": "bad", "coordinates": ["x", "y"], "metric": [["1", "x"], ["0", "1"]]}
    path.write_text(json.dumps(doc))
    code, _, err = run(capsys, "validate", str(path))
    assert code == 2
    assert "metric[0][1]" in err


def test_unknown_subcommand(capsys):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


@pytest.mark.parametrize("argv", [
    ["killing", "flat-r3", "--field", "W"],
    ["validate", "no-such-file.json"],
    ["killing", "flat-r3", "--field", "V", "--point", "q=1"],
    ["validate", "olszak-halfspace", "--param", "b=2"],
    ["line", "--r", "x - 1", "--domain", "0", "2"],
])
def test_input_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert err.startswith("mkv: error:")


@pytest.mark.parametrize("argv, code", [
    (["validate", "flat-r3", "--grid", "2"], 0),
    (["curvature", "olszak-halfspace", "--grid", "2"], 0),
    (["contact", "group-H", "--grid", "2"], 0),
    (["reeb", "olszak-halfspace", "--grid", "2"], 0),
    (["collinear", "olszak-halfspace", "--alpha", "2", "--f", "1", "--grid", "2"], 1),
    (["contacttrans", "flat-r3", "--field", "dilation", "--grid", "2"], 0),
    (["line", "--r", "x", "--f", "2", "--domain", "0.5", "10"], 0),
    (["line", "--r", "x", "--f", "3", "--domain", "0.5", "30"], 1),
])
def test_exit_codes(capsys, argv, code):
    assert run(capsys, *argv)[0] == code


def test_point_override(capsys):
    code, out, _ = run(capsys, "killing", "olszak-halfspace", "--field", "xi", "--point", "z=2", "--json")
    assert code == 0
    doc = json.loads(out)
    assert [d["point"] for d in doc["details"]] == [[0.0, 0.0, 2.0]]


def test_tolerance_override_changes_verdict(capsys):
    # the collinear (o2) residual on the half-space is far above any small tolerance
    assert run(capsys, "collinear", "olszak-halfspace", "--alpha", "2", "--grid", "2")[0] == 1
    assert run(capsys, "collinear", "olszak-halfspace", "--alpha", "2", "--grid", "2", "--tol", "10")[0] == 0


def test_deform_writes_spec(capsys, tmp_path):
    out = tmp_path / "deformed.json"
    code, _, _ = run(capsys, "deform", "olszak-halfspace", "--u", "2", "--c", "1", "--output", str(out),
                     "--grid", "2")
    assert code == 0
    assert run(capsys, "contact", str(out), "--grid", "2")[0] == 0


def test_group_h_options(capsys, tmp_path):
    path = tmp_path / "h5.json"
    assert run(capsys, "export", "group-H", str(path), "--n", "2")[0] == 0
    assert json.loads(path.read_text())["dimension"] == 5


def test_reproduce_exported_file(capsys, tmp_path):
    path = tmp_path / "h.json"
    save_spec(get_spec("group-H"), path)
    assert run(capsys, "reproduce", str(path), "--grid", "2")[0] == 0


def test_text_output(capsys):
    code, out, _ = run(capsys, "reeb", "flat-r3", "--grid", "2")
    assert code == 0
    assert "PASS" in out.upper()


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert capsys.readouterr().out.startswith("mkv ")
