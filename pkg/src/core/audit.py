from pathlib import Path
from datetime import datetime, timezone
import hashlib
import json


BASE_DIR = Path(__file__).resolve().parents[2]
AUDIT_LEDGER = BASE_DIR / "audit" / "runs.jsonl"


def run_fingerprint(**config) -> str:
    """
    sha256 of the run configuration; equal fingerprints mean equal outputs.
    """
    payload = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def already_recorded(command: str, fingerprint: str) -> bool:

    if not AUDIT_LEDGER.exists():
        return False

    with AUDIT_LEDGER.open("r", encoding="utf-8") as f:
        for line in f:
            try:
                rec = json.loads(line)
                if (rec.get("command"), rec.get("fingerprint")) == (command, fingerprint):
                    return True
            except Exception:
                continue
    return False


def write_audit(**kwargs):
    rec = dict(kwargs)
    rec.setdefault("ts", datetime.now(timezone.utc).isoformat())
    AUDIT_LEDGER.parent.mkdir(parents=True, exist_ok=True)
    with AUDIT_LEDGER.open("a", encoding="utf-8") as f:
        f.write(json.dumps(rec, ensure_ascii=False, default=str) + "\n")
