"""
Sampled validation of the structural assumptions on a (g, psi) pair
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from hkflow.errors import ParameterError
from hkflow.profiles import GSpec, PsiSpec, hellinger_limit_at_zero

logger = logging.getLogger(__name__)

SAMPLE_MIN = 1e-6
SAMPLE_MAX = 1e6
SAMPLE_POINTS = 2000
# last-decade growth of psi' below this fraction of |psi'(s_max)| reads as bounded
GROWTH_FRACTION = 1e-3
# growth shrinking faster than this per decade suggests psi' levels off beyond the sample
DECAY_FRACTION = 0.5
CHECK_NAMES = (
    "g_at_one",
    "g_increasing",
    "sg_extends_to_zero",
    "dominating_bound",
    "psi_at_one",
    "psi_positive",
    "psi_convex",
    "psiprime_unbounded",
    "signs_agree",
)


def default_sample() -> np.ndarray:
    """Geometric grid on [1e-6, 1e6]; an even point count keeps s = 1 out of it"""
    return np.geomspace(SAMPLE_MIN, SAMPLE_MAX, SAMPLE_POINTS)


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst_s: Optional[float] = None
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "passed": self.passed, "worst_s": self.worst_s, "detail": self.detail}


@dataclass
class ValidationReport:
    g: GSpec
    psi: PsiSpec
    checks: List[CheckResult] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    @property
    def errors(self) -> List[str]:
        return [f"{c.name}: {c.detail}" for c in self.checks if not c.passed]

    @property
    def is_valid(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "g": self.g.to_dict(),
            "psi": self.psi.to_dict(),
            "checks": [c.to_dict() for c in self.checks],
            "errors": self.errors,
            "warnings": list(self.warnings),
            "is_valid": self.is_valid,
        }


def _decade_growth(psi: PsiSpec, top: float) -> float:
    """psi'(top) - psi'(top / 10)"""
    return float(psi.psiprime(top) - psi.psiprime(top / 10.0))


def _worst(s: np.ndarray, badness: np.ndarray) -> Optional[float]:
    if s.size == 0:
        return None
    return float(s[int(np.nanargmax(badness))])


class PairValidator:
    """Validates a (g, psi) pair against its assumptions on a sample grid"""

    @staticmethod
    def validate_g_at_one(g: GSpec) -> CheckResult:
        value = float(g.g(1.0))
        return CheckResult("g_at_one", value == 0.0, 1.0, f"g(1) = {value:.3g}")

    @staticmethod
    def validate_g_increasing(g: GSpec, s: np.ndarray) -> CheckResult:
        gp = g.gprime(s)
        values = g.g(s)
        ok = bool(np.all(gp > 0) and np.all(np.diff(values) > 0))
        return CheckResult("g_increasing", ok, _worst(s, -gp), f"min g' = {np.min(gp):.3g}")

    @staticmethod
    def validate_sg_extension(g: GSpec, s: np.ndarray) -> CheckResult:
        """s*g(s) must be finite and shrink towards sg(0) = 0 as s decreases to 0"""
        sg = g.sg(s)
        finite = bool(np.all(np.isfinite(sg)))
        low = s < 1e-2
        magnitude = np.abs(sg[low])
        shrinking = bool(np.all(np.diff(magnitude) >= 0))
        return CheckResult(
            "sg_extends_to_zero",
            finite and shrinking and float(g.sg(0.0)) == 0.0,
            float(s[0]),
            f"|sg(s_min)| = {magnitude[0]:.3g}" if magnitude.size else "",
        )

    @staticmethod
    def validate_dominating_bound(g: GSpec, s: np.ndarray) -> CheckResult:
        """|g| + s|g'| finite and locally bounded on the sample"""
        bound = np.abs(g.g(s)) + s * np.abs(g.gprime(s))
        ok = bool(np.all(np.isfinite(bound)))
        return CheckResult("dominating_bound", ok, _worst(s, np.nan_to_num(bound, nan=np.inf)),
                           f"max |g| + s|g'| = {np.max(bound):.3g}")

    @staticmethod
    def validate_psi_at_one(psi: PsiSpec) -> CheckResult:
        value = float(psi.psi(1.0))
        slope = float(psi.psiprime(1.0))
        ok = abs(value) <= 1e-12 and abs(slope) <= 1e-12
        return CheckResult("psi_at_one", ok, 1.0, f"psi(1) = {value:.3g}, psi'(1) = {slope:.3g}")

    @staticmethod
    def validate_psi_positive(psi: PsiSpec, s: np.ndarray) -> CheckResult:
        values = psi.psi(s)
        ok = bool(np.all(values > 0))
        return CheckResult("psi_positive", ok, _worst(s, -values), f"min psi = {np.min(values):.3g}")

    @staticmethod
    def validate_psi_convex(psi: PsiSpec, s: np.ndarray) -> CheckResult:
        curvature = psi.psidoubleprime(s)
        ok = bool(np.all(curvature > 0))
        return CheckResult("psi_convex", ok, _worst(s, -curvature), f"min psi'' = {np.min(curvature):.3g}")

    @staticmethod
    def validate_psiprime_unbounded(psi: PsiSpec, s: np.ndarray) -> CheckResult:
        upper = s[s > 1.0]
        slope = psi.psiprime(upper)
        increasing = bool(np.all(np.diff(slope) > 0))
        top = float(upper[-1])
        growth = _decade_growth(psi, top)
        growing = growth >= GROWTH_FRACTION * max(1.0, abs(float(slope[-1])))
        return CheckResult(
            "psiprime_unbounded",
            increasing and growing,
            top,
            f"psi'(s_max) = {slope[-1]:.3g}, last-decade growth = {growth:.3g} "
            f"(sampled up to s_max = {top:.3g}, not a limit as s -> inf)",
        )

    @staticmethod
    def validate_signs(g: GSpec, psi: PsiSpec, s: np.ndarray) -> CheckResult:
        expected = np.sign(s - 1.0)
        mismatch = (np.sign(g.g(s)) != expected) | (np.sign(psi.psiprime(s)) != expected)
        return CheckResult("signs_agree", not bool(np.any(mismatch)),
                           float(s[np.argmax(mismatch)]) if np.any(mismatch) else None,
                           f"{int(np.sum(mismatch))} sample points disagree")

    @staticmethod
    def validate_pair(g: GSpec, psi: PsiSpec, sample: Optional[np.ndarray] = None) -> ValidationReport:
        """
        Validate all assumptions and return a report.
        Failures become report entries; only a malformed sample raises.
        """
        s = default_sample() if sample is None else np.sort(np.asarray(sample, dtype=float))
        if s.size < 1000 or s[0] > SAMPLE_MIN or s[-1] < SAMPLE_MAX or s[0] <= 0:
            raise ParameterError(
                f"sample must hold >= 1000 points covering [{SAMPLE_MIN:g}, {SAMPLE_MAX:g}] with s > 0"
            )
        off_one = s[s != 1.0]

        report = ValidationReport(g=g, psi=psi)
        report.checks.extend([
            PairValidator.validate_g_at_one(g),
            PairValidator.validate_g_increasing(g, s),
            PairValidator.validate_sg_extension(g, s),
            PairValidator.validate_dominating_bound(g, s),
            PairValidator.validate_psi_at_one(psi),
            PairValidator.validate_psi_positive(psi, off_one),
            PairValidator.validate_psi_convex(psi, off_one),
            PairValidator.validate_psiprime_unbounded(psi, s),
            PairValidator.validate_signs(g, psi, off_one),
        ])

        if float(psi.psidoubleprime(1.0)) == 0.0:
            report.warnings.append("psi''(1) = 0 is allowed: convexity is required only for s != 1")
        top = float(s[-1])
        last, previous = _decade_growth(psi, top), _decade_growth(psi, top / 10.0)
        if report.check("psiprime_unbounded").passed and last < DECAY_FRACTION * previous:
            report.warnings.append(
                f"psi' grows by {last:.3g} over the last sampled decade against {previous:.3g} before it: "
                "the unboundedness check passed on [1, s_max] only and psi' may stay bounded as s -> inf"
            )
        if not np.isfinite(hellinger_limit_at_zero(g, psi)):
            report.warnings.append("s g(s) psi'(s) diverges as s -> 0: cells with r = 0 give infinite production")

        if report.is_valid:
            logger.info("pair (%s, %s) passed all %d checks", g.to_dict(), psi.to_dict(), len(report.checks))
        else:
            logger.warning("pair (%s, %s) failed: %s", g.to_dict(), psi.to_dict(), "; ".join(report.errors))
        return report


def validate_pair(g: GSpec, psi: PsiSpec, sample: Optional[np.ndarray] = None) -> ValidationReport:
    return PairValidator.validate_pair(g, psi, sample)
