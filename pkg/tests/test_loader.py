import numpy as np
import pytest

from src.core.errors import MatrixParseError
from src.core.loader import get_setting, load_matrix, load_yaml
from conftest import write_csv, write_yaml


def test_load_yaml_ok(temp_project):
    cfgpath = temp_project["configs"] / "extra.yaml"
    cfgpath.write_text("a: 1\n", encoding="utf-8")
    data = load_yaml("extra.yaml")
    assert data["a"] == 1


def test_load_yaml_invalid_top_level(temp_project):
    p = temp_project["configs"] / "bad.yaml"
    p.write_text("- 1\n- 2\n", encoding="utf-8")
    try:
        load_yaml("bad.yaml")
        assert False, "expected SystemExit on invalid mapping"
    except SystemExit as e:
        assert "Invalid format" in str(e)


def test_load_yaml_missing_file(temp_project):
    with pytest.raises(SystemExit) as e:
        load_yaml("nope.yaml")
    assert "Config file not found" in str(e.value)


def test_load_yaml_syntax_error(temp_project):
    (temp_project["configs"] / "broken.yaml").write_text("a: [1, 2\n", encoding="utf-8")
    with pytest.raises(SystemExit) as e:
        load_yaml("broken.yaml")
    assert "YAML syntax error" in str(e.value)


def test_shipped_config_defaults(temp_project):
    cfg = load_yaml("shadowlab.yaml")
    assert get_setting(cfg, "quadrature.order") == 20
    assert get_setting(cfg, "sampling.samples") == 100000
    assert get_setting(cfg, "compare.ks_threshold") == 0.01
    assert get_setting(cfg, "quadrature.near_knot") == 0.25


def test_get_setting_defaults():
    cfg = {"a": {"b": 3, "c": None}, "d": 1}
    assert get_setting(cfg, "a.b") == 3
    assert get_setting(cfg, "a.c", 7) == 7
    assert get_setting(cfg, "a.x", "dflt") == "dflt"
    assert get_setting(cfg, "d.e", 5) == 5


def test_load_matrix_diag():
    m = load_matrix("diag:1, 2.5,-3")
    assert m.n == 3
    assert np.allclose(np.diag(m.entries), [1, 2.5, -3])
    assert m.real_symmetric


def test_load_matrix_rows_complex():
    m = load_matrix("rows:1,2-i;2+i,0")
    assert m.hermitian and not m.real
    assert m.entries[0, 1] == 2 - 1j


def test_load_matrix_file(temp_project):
    path = temp_project["root"] / "m.csv"
    write_csv(path, [["1", "0.5i"], ["-0.5i", "2"]])
    m = load_matrix(f"file:{path}")
    assert m.hermitian
    assert m.entries[1, 0] == -0.5j


def test_load_matrix_fixtures(temp_project):
    tri = load_matrix("fixture:tridiag4")
    assert tri.real_symmetric
    ent_a = load_matrix("fixture:ent-A")
    assert ent_a.entries[1, 1] == 1j and ent_a.entries[3, 3] == -1j
    assert not ent_a.hermitian
    ent_b = load_matrix("fixture:ent-B")
    assert ent_b.entries[0, 0] == 0.3 + 0.5j
    assert load_matrix("fixture:magicW").hermitian


def test_load_matrix_custom_fixture(temp_project):
    write_yaml(
        temp_project["configs"] / "fixtures.yaml",
        {"fixtures": {"pauli-x": {"rows": [[0, 1], [1, 0]]}}},
    )
    m = load_matrix("fixture:pauli-x")
    assert m.real_symmetric


@pytest.mark.parametrize(
    "source",
    ["1,2,3", "eig:1,2", "diag:", "rows:1,2;3", "diag:1,x", "fixture:missing", "file:/no/such.csv"],
)
def test_load_matrix_rejects(temp_project, source):
    with pytest.raises(MatrixParseError):
        load_matrix(source)
