"""Verification report containers.

Exact checks produce a ``CheckReport``: a list of violations, each carrying
the exact (or float) residual at the site where an identity failed.  Monte
Carlo checks produce ``MonteCarloResult`` records carrying estimate, standard
error and z-score against the target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .prob import FLOAT_TOL, Prob, format_prob, probs_equal, residual


@dataclass(frozen=True)
class Violation:
    site: str
    expected: Prob
    actual: Prob

    @property
    def residual(self) -> Prob:
        return residual(self.actual, self.expected)

    def __str__(self) -> str:
        return (
            f"{self.site}: expected {format_prob(self.expected)}, "
            f"got {format_prob(self.actual)} (residual {format_prob(self.residual)})"
        )


@dataclass
class CheckReport:
    name: str
    checked: int = 0
    violations: list[Violation] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def record(self, site: str, expected: Prob, actual: Prob, tol: float = FLOAT_TOL) -> None:
        """Compare one identity instance; keep it only if it fails."""
        self.checked += 1
        if not probs_equal(expected, actual, tol):
            self.violations.append(Violation(site, expected, actual))

    def note(self, message: str) -> None:
        self.notes.append(message)

    def max_residual(self) -> float:
        if not self.violations:
            return 0.0
        return max(abs(float(v.residual)) for v in self.violations)

    def summary(self) -> str:
        status = "ok" if self.ok else f"{len(self.violations)} violation(s)"
        return f"{self.name}: {self.checked} checked, {status}"

    def __str__(self) -> str:
        lines = [self.summary()]
        lines.extend(f"  {v}" for v in self.violations[:50])
        if len(self.violations) > 50:
            lines.append(f"  ... {len(self.violations) - 50} more")
        lines.extend(f"  note: {n}" for n in self.notes)
        return "\n".join(lines)


@dataclass(frozen=True)
class MonteCarloResult:
    name: str
    estimate: float
    target: float
    std_error: float
    replicates: int

    @property
    def z_score(self) -> float:
        diff = self.estimate - self.target
        if self.std_error == 0.0:
            return 0.0 if diff == 0.0 else math.inf
        return diff / self.std_error

    def within(self, z: float = 3.0) -> bool:
        return abs(self.z_score) <= z

    def __str__(self) -> str:
        return (
            f"{self.name}: estimate {self.estimate:.6g} vs target {self.target:.6g} "
            f"(se {self.std_error:.3g}, z {self.z_score:+.2f}, n {self.replicates})"
        )
