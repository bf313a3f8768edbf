"""Pass/fail records for numerically checked inequalities and limits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"
VERDICTS = (PASS, FAIL, INCONCLUSIVE)


@dataclass
class Check:
    """One checked statement.

    ``margin`` is signed: positive means the inequality holds with room to
    spare, negative means it is violated by that amount.  Inconclusive checks
    may carry a NaN margin but must give a reason.
    """

    name: str
    claim: str
    verdict: str
    margin: float
    context: dict[str, Any] = field(default_factory=dict)
    reason: str = ""

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")
        self.margin = float(self.margin)
        if not math.isfinite(self.margin) and not (self.verdict == INCONCLUSIVE and self.reason):
            raise ValueError(f"check {self.name!r}: non-finite margin needs an inconclusive verdict and reason")

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "claim": self.claim,
            "verdict": self.verdict,
            "margin": self.margin if math.isfinite(self.margin) else None,
            "context": self.context,
            "reason": self.reason,
        }


@dataclass
class TheoremReport:
    checks: list[Check] = field(default_factory=list)

    def add(self, name, claim, verdict, margin, reason="", **context) -> Check:
        c = Check(name, claim, verdict, margin, dict(context), reason)
        self.checks.append(c)
        return c

    def add_bound(self, name, claim, margin, tol=0.0, **context) -> Check:
        """Record ``margin >= -tol`` as pass/fail."""
        verdict = PASS if margin >= -tol else FAIL
        return self.add(name, claim, verdict, margin, tolerance=tol, **context)

    def inconclusive(self, name, claim, reason, margin=float("nan"), **context) -> Check:
        return self.add(name, claim, INCONCLUSIVE, margin, reason=reason, **context)

    def extend(self, other: "TheoremReport") -> "TheoremReport":
        self.checks.extend(other.checks)
        return self

    def __iter__(self):
        return iter(self.checks)

    def __len__(self):
        return len(self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def names(self) -> list[str]:
        return [c.name for c in self.checks]

    @property
    def failed(self) -> list[Check]:
        return [c for c in self.checks if c.verdict == FAIL]

    @property
    def inconclusive_checks(self) -> list[Check]:
        return [c for c in self.checks if c.verdict == INCONCLUSIVE]

    @property
    def ok(self) -> bool:
        """No check failed (inconclusive does not count as failure)."""
        return not self.failed

    @property
    def all_passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def to_dict(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "counts": {v: sum(c.verdict == v for c in self.checks) for v in VERDICTS},
            "checks": [c.to_dict() for c in self.checks],
        }

    def summary_lines(self) -> list[str]:
        return [f"[{c.verdict.upper():>12}] {c.name}: margin={c.margin:.3e} {c.reason}".rstrip() for c in self.checks]
