import sys
from pathlib import Path
import json
import csv
import shutil
import pytest

PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))


def write_yaml(path: Path, data: dict):
    import yaml

    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        yaml.safe_dump(data, f, sort_keys=False)


def write_csv(path: Path, rows, header=None):
    """
    Plain rows (lists) are written without a header, dict rows with one.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        if rows and isinstance(rows[0], dict):
            if header is None:
                header = list(rows[0].keys())
            w = csv.DictWriter(f, fieldnames=header)
            w.writeheader()
            for r in rows:
                w.writerow(r)
        else:
            w = csv.writer(f)
            for r in rows:
                w.writerow(r)


def write_jsonl(path: Path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for r in rows:
            f.write(r if isinstance(r, str) else json.dumps(r))
            f.write("\n")


class L:
    def __init__(self):
        self.records = []

    def info(self, msg, *args):
        self.records.append(("info", msg % args if args else msg))

    def warning(self, msg, *args):
        self.records.append(("warning", msg % args if args else msg))

    def error(self, msg, *args):
        self.records.append(("error", msg % args if args else msg))

    def debug(self, msg, *args):
        self.records.append(("debug", msg % args if args else msg))

    def exception(self, msg, *args):
        self.records.append(("exception", msg % args if args else msg))


@pytest.fixture
def logger():
    return L()


@pytest.fixture
def temp_project(tmp_path, monkeypatch):
    (tmp_path / "configs").mkdir(parents=True, exist_ok=True)
    (tmp_path / "audit").mkdir(parents=True, exist_ok=True)
    (tmp_path / "out").mkdir(parents=True, exist_ok=True)
    for cfg in (PROJECT_ROOT / "configs").glob("*.yaml"):
        shutil.copy(cfg, tmp_path / "configs" / cfg.name)

    from src.core import (
        loader,
        audit,
    )

    monkeypatch.setattr(loader, "CONFIG_DIR", tmp_path / "configs", raising=False)
    monkeypatch.setattr(
        audit, "AUDIT_LEDGER", tmp_path / "audit" / "runs.jsonl", raising=False
    )
    monkeypatch.delenv("SHADOWLAB_SEED", raising=False)

    return {
        "root": tmp_path,
        "configs": tmp_path / "configs",
        "out": tmp_path / "out",
        "audit": tmp_path / "audit" / "runs.jsonl",
    }
