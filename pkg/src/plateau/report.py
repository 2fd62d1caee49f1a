"""Run reports: every number with its tolerance, producing module and verdict.

JSON output is deterministic (sorted keys, no timings unless requested) so
that two runs on identical inputs are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path


def file_digest(path) -> str:
    p = Path(path)
    if not p.exists() and Path(str(p) + ".json").exists():
        p = Path(str(p) + ".json")
    return hashlib.sha256(p.read_bytes()).hexdigest()


def _clean(x):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if hasattr(x, "tolist"):
        return _clean(x.tolist())
    if isinstance(x, bool) or x is None or isinstance(x, str):
        return x
    if isinstance(x, int):
        return x
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return str(x)


@dataclass
class Row:
    name: str
    value: object
    module: str
    tol: float | None = None
    passed: bool | None = None  # None: informational

    def as_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "module": self.module, "tol": self.tol, "pass": self.passed}


@dataclass
class RunReport:
    command: str
    inputs: dict = field(default_factory=dict)  # path -> sha256
    tolerances: dict = field(default_factory=dict)  # name -> {value, source, module}
    rows: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    error: str | None = None
    error_kind: str | None = None
    timings: dict = field(default_factory=dict)
    _t0: float = field(default_factory=time.perf_counter, repr=False)

    def add_input(self, path) -> None:
        try:
            self.inputs[str(path)] = file_digest(path)
        except OSError:
            self.inputs[str(path)] = None

    def tolerance(self, name: str, value, module: str, overridden: bool) -> float:
        self.tolerances[name] = {"value": value, "source": "flag" if overridden else "default", "module": module}
        return value

    def add(self, name, value, module, tol=None, passed=None) -> Row:
        r = Row(name, value, module, tol, None if passed is None else bool(passed))
        self.rows.append(r)
        return r

    def check(self, name, value, module, tol, ok) -> Row:
        return self.add(name, value, module, tol, ok)

    @property
    def verdicts(self) -> dict:
        return {r.name: r.passed for r in self.rows if r.passed is not None}

    @property
    def all_pass(self) -> bool:
        return self.error is None and all(self.verdicts.values())

    def stop_clock(self) -> None:
        self.timings["wall_seconds"] = time.perf_counter() - self._t0

    def as_dict(self, timings: bool = False) -> dict:
        out = {
            "command": self.command,
            "inputs": self.inputs,
            "tolerances": self.tolerances,
            "results": [r.as_dict() for r in self.rows],
            "verdicts": self.verdicts,
            "all_pass": self.all_pass,
            "details": self.details,
        }
        if self.error is not None:
            out["error"] = {"kind": self.error_kind, "message": self.error}
        if timings:
            out["timings"] = self.timings
        return _clean(out)

    def to_json(self, timings: bool = False) -> str:
        return json.dumps(self.as_dict(timings), sort_keys=True, indent=2)

    def to_text(self) -> str:
        lines = [f"plateau {self.command}"]
        for path, dig in self.inputs.items():
            lines.append(f"  input  {path}  sha256={dig[:16] if dig else '?'}")
        for name, t in sorted(self.tolerances.items()):
            lines.append(f"  tol    {name} = {_fmt(t['value'])} ({t['source']}, {t['module']})")
        if self.rows:
            w = max(len(r.name) for r in self.rows)
            for r in self.rows:
                verdict = "" if r.passed is None else ("PASS" if r.passed else "FAIL")
                tol = "" if r.tol is None else f"tol={_fmt(r.tol)}"
                lines.append(f"  {r.name:<{w}}  {_fmt(r.value):>24}  {tol:<14} {verdict:<4}  [{r.module}]")
        if self.error is not None:
            lines.append(f"  error  {self.error_kind}: {self.error}")
        if "wall_seconds" in self.timings:
            lines.append(f"  time   {self.timings['wall_seconds']:.3f} s")
        lines.append("  verdict: " + ("PASS" if self.all_pass else "FAIL"))
        return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, bool) or v is None:
        return str(v)
    if isinstance(v, float):
        return f"{v:.10g}"
    if isinstance(v, dict):
        return " ".join(f"{k}={_fmt(x)}" for k, x in v.items())
    if isinstance(v, (list, tuple)):
        inner = ", ".join(_fmt(x) for x in v[:6])
        return f"[{inner}{', ...' if len(v) > 6 else ''}]"
    return str(v)
