"""Run reports: named checks with norms and tolerances, provenance, timings."""

from __future__ import annotations

import csv
import json
import math
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional


@dataclass(frozen=True)
class Check:
    name: str
    norm: float
    tolerance: float
    passed: bool
    detail: str = ""

    @classmethod
    def at_most(cls, name: str, norm: float, tolerance: float, detail: str = "") -> "Check":
        norm = float(norm)
        return cls(name, norm, float(tolerance), bool(math.isfinite(norm) and norm <= tolerance), detail)


@dataclass
class RunReport:
    command: str
    checks: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, check: Check) -> Check:
        self.checks.append(check)
        return check

    @contextmanager
    def timed(self, label: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[label] = self.timings.get(label, 0.0) + time.perf_counter() - t0

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "passed": self.passed,
            "checks": [asdict(c) for c in self.checks],
            "tables": self.tables,
            "provenance": self.provenance,
            "timings": self.timings,
        }

    def text(self) -> str:
        lines = [f"{self.command}: {'PASS' if self.passed else 'FAIL'} ({len(self.checks)} checks)"]
        for c in self.checks:
            mark = "pass" if c.passed else "FAIL"
            extra = f"  {c.detail}" if c.detail else ""
            lines.append(f"  [{mark}] {c.name}: {c.norm:.3e} <= {c.tolerance:.3e}{extra}")
        for name, rows in self.tables.items():
            lines.append(f"  table {name}:")
            if rows:
                keys = list(rows[0])
                lines.append("    " + "  ".join(f"{k:>14}" for k in keys))
                for row in rows:
                    lines.append("    " + "  ".join(_cell(row[k]) for k in keys))
        prov = ", ".join(f"{k}={v}" for k, v in self.provenance.items())
        lines.append(f"  provenance: {prov}")
        return "\n".join(lines)

    def write(self, directory: Path, formats=("json", "text", "csv")) -> list:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        if "json" in formats:
            p = directory / "report.json"
            p.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_jsonable) + "\n")
            written.append(p)
        if "text" in formats:
            p = directory / "report.txt"
            p.write_text(self.text() + "\n")
            written.append(p)
        if "csv" in formats:
            p = directory / "checks.csv"
            with p.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["name", "norm", "tolerance", "passed"])
                for c in self.checks:
                    w.writerow([c.name, repr(c.norm), repr(c.tolerance), int(c.passed)])
            written.append(p)
            for name, rows in self.tables.items():
                if not rows:
                    continue
                p = directory / f"{name}.csv"
                with p.open("w", newline="") as fh:
                    w = csv.DictWriter(fh, fieldnames=list(rows[0]))
                    w.writeheader()
                    w.writerows(rows)
                written.append(p)
        return written


def _cell(v) -> str:
    if isinstance(v, float):
        return f"{v:>14.6e}"
    return f"{v!s:>14}"


def _jsonable(v):
    if hasattr(v, "item"):
        return v.item()
    if isinstance(v, (set, tuple)):
        return list(v)
    return str(v)


def load_report(path: Path) -> Optional[dict]:
    p = Path(path)
    return json.loads(p.read_text()) if p.is_file() else None
