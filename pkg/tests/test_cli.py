import json

import numpy as np
import pytest

from cpdilation.cli import main
from cpdilation.errors import NotPSD, NotUnital
from cpdilation.cpmap import depolarizing, identity_map, power
from cpdilation.algebra import full_algebra
from cpdilation.jsonio import channel_to_json
from cpdilation.presets import PRESETS, load_preset


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_power_check_identity(capsys):
    code, out, _ = _run(capsys, "power-check", "--preset", "identity")
    assert code == 0 and "all checks passed" in out


def test_power_check_depolarizing_json(capsys):
    code, out, _ = _run(capsys, "power-check", "--preset", "depolarizing", "--depth", "4", "--json")
    assert code == 0
    report = json.loads(out)
    assert report["pass"] and report["failing_anchors"] == []
    assert max(c["defect"] for c in report["checks"]) <= 1e-8
    assert {c["name"] for c in report["checks"]} >= {"power-dilation", "corner", "increasing-projection"}


def test_output_is_byte_stable(capsys):
    runs = [_run(capsys, "arveson", "--preset", "random-rank2", "--seed", "3", "--json")[1] for _ in range(2)]
    assert runs[0] == runs[1]


@pytest.mark.parametrize("preset,command,anchor", [
    ("nonpsd", "stinespring", "NotPSD"),
    ("nonunital", "stinespring", "NotUnital"),
    ("nonsemigroup", "prodsys-check", "SemigroupDefect"),
])
def test_negative_controls(capsys, preset, command, anchor):
    code, out, _ = _run(capsys, command, "--preset", preset, "--json")
    assert code == 1
    assert json.loads(out)["failing_anchors"] == [anchor]


@pytest.mark.parametrize("argv", [
    ["stinespring"],
    ["stinespring", "--preset", "no-such-preset"],
    ["stinespring", "--preset", "identity", "--tol", "0.1"],
    ["stinespring", "--preset", "identity", "--depth", "9"],
    ["bogus", "--preset", "identity"],
    ["power-check", "--preset", "depolarizing-qutrit", "--depth", "4"],
])
def test_input_errors(capsys, argv):
    assert _run(capsys, *argv)[0] == 2


def test_input_files(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"kraus": [[[1, 0], [0]]]}')
    assert _run(capsys, "stinespring", "--input", str(bad))[0] == 2
    assert _run(capsys, "stinespring", "--input", str(tmp_path / "missing.json"))[0] == 2
    good = tmp_path / "dep.json"
    good.write_text(json.dumps({"channel": channel_to_json(depolarizing(0.3))}))
    assert _run(capsys, "arveson", "--input", str(good))[0] == 0


def test_maps_document(tmp_path, capsys):
    P = depolarizing(0.3)
    maps = [identity_map(full_algebra(2))] + [power(P, k) for k in (1, 2)]
    f = tmp_path / "maps.json"
    f.write_text(json.dumps({"maps": [channel_to_json(m) for m in maps]}))
    code, out, _ = _run(capsys, "prodsys-check", "--input", str(f), "--json")
    assert code == 0
    assert json.loads(out)["depth"] == 4  # horizon 2 caps the checks internally
    f.write_text(json.dumps({"maps": [channel_to_json(P)]}))
    assert _run(capsys, "prodsys-check", "--input", str(f))[0] == 2


def test_report_command(capsys):
    code, out, _ = _run(capsys, "report", "--preset", "depolarizing-half", "--depth", "2", "--json")
    assert code == 0
    names = [c["name"] for c in json.loads(out)["checks"]]
    assert "stinespring-identity" in names and "semigroup-dilation" in names


@pytest.mark.parametrize("name", sorted(set(PRESETS) - {"nonpsd", "nonunital", "nonsemigroup"}))
def test_presets_are_unital_channels(name):
    P, maps = load_preset(name, 0)
    assert maps is None
    assert np.allclose(P(np.eye(P.d)), np.eye(P.d))


def test_negative_presets_raise():
    with pytest.raises(NotPSD):
        load_preset("nonpsd")
    with pytest.raises(NotUnital):
        load_preset("nonunital")
    P, maps = load_preset("nonsemigroup")
    assert P is None and len(maps) == 3
