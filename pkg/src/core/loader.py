from pathlib import Path
import sys

import numpy as np
import pandas as pd
import yaml

from src.core.errors import MatrixParseError
from src.core.linalg import ComplexMatrix, matrix_from_rows, parse_complex


BASE_DIR = Path(__file__).resolve().parents[2]
CONFIG_DIR = BASE_DIR / "configs"
FIXTURES_FILE = "fixtures.yaml"

_MISSING = object()


def load_yaml(name: str) -> dict:
    """
    Load and validate a YAML config file.
    """
    path = CONFIG_DIR / name
    if not path.exists():
        sys.exit(f"Config file not found: {path}")

    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        sys.exit(f"YAML syntax error in {name}: {e}")

    if not isinstance(data, dict):
        sys.exit(f"Invalid format in {name}: expected mapping at top level")

    return data


def get_setting(cfg: dict, key: str, default=None):
    """
    Dotted lookup, e.g. get_setting(cfg, "sampling.samples", 100000).
    """
    node = cfg
    for part in key.split("."):
        if not isinstance(node, dict):
            return default
        node = node.get(part, _MISSING)
        if node is _MISSING or node is None:
            return default
    return node


def _split(text: str, sep: str) -> list[str]:
    return [t.strip() for t in text.split(sep) if t.strip()]


def _diag(body: str) -> ComplexMatrix:
    values = [parse_complex(v) for v in _split(body, ",")]
    if not values:
        raise MatrixParseError("diag: needs at least one value")
    return ComplexMatrix.from_array(np.diag(values))


def _rows(body: str) -> ComplexMatrix:
    rows = [_split(r, ",") for r in _split(body, ";")]
    if not rows:
        raise MatrixParseError("rows: needs at least one row")
    return matrix_from_rows(rows)


def _file(body: str) -> ComplexMatrix:
    path = Path(body).expanduser()
    if not path.exists():
        raise MatrixParseError(f"Matrix file not found: {path}")
    try:
        df = pd.read_csv(path, header=None, dtype=str, skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise MatrixParseError(f"Unreadable matrix file {path}: {e}") from e
    if df.isna().any().any():
        raise MatrixParseError(f"Matrix file {path} has empty cells")
    return matrix_from_rows(df.values.tolist())


def load_fixtures() -> dict:
    return load_yaml(FIXTURES_FILE).get("fixtures", {})


def _fixture(name: str) -> ComplexMatrix:
    fixtures = load_fixtures()
    if name not in fixtures:
        raise MatrixParseError(f"Unknown fixture '{name}'. Available: {sorted(fixtures)}")
    entry = fixtures[name]
    rows = entry.get("rows") if isinstance(entry, dict) else entry
    if not isinstance(rows, list):
        raise MatrixParseError(f"Fixture '{name}' has no rows")
    return matrix_from_rows(rows)


def load_matrix(source: str) -> ComplexMatrix:
    """
    Matrix from `diag:v1,...`, `rows:a,b;c,d`, `file:<csv>` or `fixture:<name>`.
    """
    scheme, sep, body = source.partition(":")
    if not sep:
        raise MatrixParseError(f"Matrix source '{source}' has no scheme")
    readers = {"diag": _diag, "rows": _rows, "file": _file, "fixture": _fixture}
    if scheme not in readers:
        raise MatrixParseError(
            f"Unknown matrix scheme '{scheme}'. Expected one of {sorted(readers)}"
        )
    return readers[scheme](body.strip())
