"""Run summaries and their text and JSON renderings."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .characteristics import BOUND_RTOL
from .criteria import CriterionReport

# Non-finite floats are stored as these strings so the JSON stays standard.
_NONFINITE = {"inf": math.inf, "-inf": -math.inf, "nan": math.nan}


def _encode(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    return obj


def _decode(obj):
    if isinstance(obj, str) and obj in _NONFINITE:
        return _NONFINITE[obj]
    if isinstance(obj, dict):
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def bound_verdict(t_detect: float | None, t_star: float | None, rtol: float) -> bool | None:
    if t_detect is None or t_star is None:
        return None
    return t_detect <= t_star * (1.0 + rtol)


@dataclass
class SeedResult:
    seed: float
    criterion: CriterionReport | None = None
    t_star: float | None = None
    t_detect: float | None = None
    detect_method: str | None = None
    bound_rtol: float = BOUND_RTOL
    bound_satisfied: bool | None = None
    violations: int | None = None
    extras: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.bound_satisfied = bound_verdict(self.t_detect, self.t_star, self.bound_rtol)

    @property
    def member(self) -> bool | None:
        return None if self.criterion is None else self.criterion.member

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "criterion": None if self.criterion is None else self.criterion.to_dict(),
            "t_star": self.t_star,
            "t_detect": self.t_detect,
            "detect_method": self.detect_method,
            "bound_rtol": self.bound_rtol,
            "bound_satisfied": self.bound_satisfied,
            "violations": self.violations,
            "extras": dict(self.extras),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SeedResult":
        crit = d.get("criterion")
        return cls(
            seed=d["seed"],
            criterion=None if crit is None else CriterionReport.from_dict(crit),
            t_star=d.get("t_star"),
            t_detect=d.get("t_detect"),
            detect_method=d.get("detect_method"),
            bound_rtol=d.get("bound_rtol", BOUND_RTOL),
            violations=d.get("violations"),
            extras=dict(d.get("extras", {})),
        )


@dataclass
class RunSummary:
    system: str
    config: dict
    seeds: list[SeedResult] = field(default_factory=list)
    status: str = "ok"
    files: list[str] = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    generated: str | None = None

    @property
    def bound_violations(self) -> int:
        """Certified members whose detected time exceeds the bound."""
        n = sum(
            1 for s in self.seeds if s.member and s.bound_satisfied is False
        )
        return n + int(self.extras.get("bound_violations", 0))

    def to_dict(self) -> dict:
        return {
            "generated": self.generated,
            "system": self.system,
            "status": self.status,
            "config": self.config,
            "seeds": [s.to_dict() for s in self.seeds],
            "files": list(self.files),
            "extras": dict(self.extras),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunSummary":
        return cls(
            system=d["system"],
            config=d["config"],
            seeds=[SeedResult.from_dict(s) for s in d.get("seeds", [])],
            status=d.get("status", "ok"),
            files=list(d.get("files", [])),
            extras=dict(d.get("extras", {})),
            generated=d.get("generated"),
        )


def summary_to_json(summary: RunSummary) -> str:
    return json.dumps(_encode(summary.to_dict()), indent=2, allow_nan=False) + "\n"


def summary_from_json(text: str) -> RunSummary:
    return RunSummary.from_dict(_decode(json.loads(text)))


def _fmt(x: float | None, spec: str = ".4f") -> str:
    if x is None:
        return "-"
    return format(x, spec)


def _verdict(flag: bool | None) -> str:
    return {True: "PASS", False: "FAIL", None: "n/a"}[flag]


def _text(summary: RunSummary) -> str:
    lines = []
    if summary.generated is not None:
        lines.append(f"# generated {summary.generated}")
    crit = summary.config.get("criterion", "-")
    lines.append(f"system={summary.system} criterion={crit} status={summary.status}")
    for key in sorted(summary.extras):
        value = summary.extras[key]
        shown = _fmt(value, ".6g") if isinstance(value, float) else str(value)
        lines.append(f"  {key}={shown}")
    header = ["seed", "member", "t_star", "t_detect", "bound", "violations", "margins"]
    lines.append(" | ".join(header))
    for s in summary.seeds:
        if s.criterion is None:
            member, margins = "-", ""
        else:
            member = f"{s.criterion.theorem}:{'yes' if s.criterion.member else 'no'}"
            margins = " ".join(f"{k}={v:.4g}" for k, v in s.criterion.margins.items())
            if s.criterion.window is not None:
                margins += f" window={s.criterion.window:.4f}"
        row = [
            f"a={s.seed:.4f}",
            member,
            f"t*={_fmt(s.t_star)}",
            f"t_detect={_fmt(s.t_detect)}",
            _verdict(s.bound_satisfied),
            f"violations={'-' if s.violations is None else s.violations}",
            margins,
        ]
        lines.append(" | ".join(row))
        for key in sorted(s.extras):
            lines.append(f"    {key}={_fmt(s.extras[key], '.6g')}")
    if summary.files:
        lines.append("files: " + ", ".join(summary.files))
    return "\n".join(lines) + "\n"


def emit_report(summary: RunSummary, format: str = "text") -> str:
    """Render a summary as a text table or as JSON."""
    if format == "json":
        return summary_to_json(summary)
    if format == "text":
        return _text(summary)
    raise ValueError(f"unknown report format {format!r}")
