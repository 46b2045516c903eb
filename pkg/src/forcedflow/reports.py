"""Pass/fail records produced by the estimate checks."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field


@dataclass
class EstimateReport:
    """One inequality or structural check.

    ``margin = rhs - lhs`` and ``passed`` is ``margin >= -slack``.
    """

    name: str
    lhs: float
    rhs: float
    slack: float = 0.0
    constants: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)
    applicable: bool = True
    note: str = ""
    margin: float = field(init=False)
    passed: bool = field(init=False)

    def __post_init__(self):
        self.lhs = float(self.lhs)
        self.rhs = float(self.rhs)
        self.margin = self.rhs - self.lhs if not (math.isinf(self.rhs) and math.isinf(self.lhs)) else 0.0
        self.passed = (not self.applicable) or bool(self.margin >= -self.slack)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        if not self.applicable:
            flag = "N/A "
        text = f"[{flag}] {self.name}: lhs={self.lhs:.6g} rhs={self.rhs:.6g} margin={self.margin:.3g}"
        return text + (f" slack={self.slack:.3g}" if self.slack else "")


def combine(name: str, parts: list[EstimateReport]) -> EstimateReport:
    """Collapse several sub-reports into the worst one, keeping the rest as witnesses."""
    live = [p for p in parts if p.applicable]
    if not live:
        return EstimateReport(name, 0.0, 0.0, applicable=False, note="no applicable sub-checks")
    worst = min(live, key=lambda p: p.margin + p.slack)
    rep = EstimateReport(name, worst.lhs, worst.rhs, slack=worst.slack, constants=dict(worst.constants),
                         witnesses={"worst": worst.name, "parts": [p.to_dict() for p in parts]})
    return rep


def reports_to_json(reports: list[EstimateReport]) -> str:
    ordered = sorted(reports, key=lambda r: r.name)
    return json.dumps([r.to_dict() for r in ordered], indent=1)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _jsonable(obj.tolist())
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
    return obj
