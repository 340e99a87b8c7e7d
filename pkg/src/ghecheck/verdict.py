"""Verdict records shared by every check."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class Verdict:
    name: str
    passed: bool
    summary: str = ""
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        return "%s %s%s" % ("PASS" if self.passed else "FAIL", self.name,
                            (": " + self.summary) if self.summary else "")

    def to_json(self) -> dict:
        return {"name": self.name, "passed": self.passed, "summary": self.summary,
                "details": self.details}
