"""
Reaction profiles g and entropy densities psi

Every profile is an immutable value with closed-form derivatives and
antiderivatives.  All methods are vectorised over numpy arrays:

    GSpec    g, g', G(s) = int_0^s xi g'(xi) dxi, s*g(s) and its slope
    PsiSpec  psi, psi', psi''
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

from hkflow.errors import ParameterError

logger = logging.getLogger(__name__)

G_KINDS = ("log", "power", "arctangential")
PSI_KINDS = ("beckner", "abs_power", "driving")


def _as_array(s) -> np.ndarray:
    return np.asarray(s, dtype=float)


@dataclass(frozen=True)
class GSpec:
    """Fitness profile g: (0, inf) -> R with g(1) = 0 and g' > 0"""

    kind: str
    alpha: Optional[float] = None

    def __post_init__(self):
        if self.kind not in G_KINDS:
            raise ParameterError(f"unknown g kind '{self.kind}', expected one of {G_KINDS}")
        if self.kind == "power":
            if self.alpha is None:
                raise ParameterError("power g requires alpha")
            alpha = float(self.alpha)
            if not math.isfinite(alpha) or alpha <= 0.0 or alpha == 1.0:
                raise ParameterError(f"power g requires alpha > 0 and alpha != 1, got {self.alpha}")
            object.__setattr__(self, "alpha", alpha)
        elif self.alpha is not None:
            raise ParameterError(f"alpha is only meaningful for power g, got kind '{self.kind}'")

    # g itself is only defined for s > 0
    def g(self, s):
        s = _as_array(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == "log":
                return np.log(s)
            if self.kind == "power":
                a = self.alpha
                return (s ** (a - 1.0) - 1.0) / (a - 1.0)
            return 0.5 * np.log(2.0 * s * s / (1.0 + s * s))

    def gprime(self, s):
        s = _as_array(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == "log":
                return 1.0 / s
            if self.kind == "power":
                return s ** (self.alpha - 2.0)
            return 1.0 / (s * (1.0 + s * s))

    def s_gprime(self, s):
        """G'(s) = s g'(s), the effective diffusivity in the r variable"""
        s = _as_array(s)
        with np.errstate(divide="ignore"):
            if self.kind == "log":
                return np.ones_like(s)
            if self.kind == "power":
                return s ** (self.alpha - 1.0)
            return 1.0 / (1.0 + s * s)

    def G(self, s):
        s = _as_array(s)
        if self.kind == "log":
            return s.copy()
        if self.kind == "power":
            return s ** self.alpha / self.alpha
        return np.arctan(s)

    def sg(self, s):
        """Continuous extension of s*g(s) to s = 0 (value 0 there)"""
        s = _as_array(s)
        positive = s > 0
        safe = np.where(positive, s, 1.0)
        if self.kind == "power":
            a = self.alpha
            return (s ** a - s) / (a - 1.0)
        return np.where(positive, safe * self.g(safe), 0.0)

    def sg_slope(self, s):
        """d(s g(s))/ds = g(s) + s g'(s) for s > 0"""
        s = _as_array(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == "log":
                return np.log(s) + 1.0
            if self.kind == "power":
                a = self.alpha
                return (a * s ** (a - 1.0) - 1.0) / (a - 1.0)
            return self.g(s) + 1.0 / (1.0 + s * s)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"kind": self.kind}
        if self.alpha is not None:
            data["alpha"] = self.alpha
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GSpec":
        if not isinstance(data, dict) or "kind" not in data:
            raise ParameterError(f"g profile must be an object with a 'kind', got {data!r}")
        unknown = set(data) - {"kind", "alpha"}
        if unknown:
            raise ParameterError(f"unexpected g profile fields {sorted(unknown)}")
        return make_g(data["kind"], data.get("alpha"))


@dataclass(frozen=True)
class PsiSpec:
    """Convex entropy density psi with psi(1) = psi'(1) = 0"""

    kind: str
    p: Optional[float] = None
    base: Optional[GSpec] = None

    def __post_init__(self):
        if self.kind not in PSI_KINDS:
            raise ParameterError(f"unknown psi kind '{self.kind}', expected one of {PSI_KINDS}")
        if self.kind == "driving":
            if not isinstance(self.base, GSpec):
                raise ParameterError("driving psi requires a base g profile")
            if self.p is not None:
                raise ParameterError("driving psi takes no exponent p")
            return
        if self.base is not None:
            raise ParameterError(f"base is only meaningful for driving psi, got kind '{self.kind}'")
        if self.p is None:
            raise ParameterError(f"{self.kind} psi requires an exponent p")
        p = float(self.p)
        lowest = 1.0 if self.kind == "beckner" else 2.0
        if not math.isfinite(p) or p < lowest:
            raise ParameterError(f"{self.kind} psi requires p >= {lowest:g}, got {self.p}")
        object.__setattr__(self, "p", p)

    def psi(self, s):
        s = _as_array(s)
        if self.kind == "driving":
            g = self.base
            return g.sg(s) - g.G(s) + g.G(1.0)
        if self.kind == "abs_power":
            return np.abs(s - 1.0) ** self.p
        p = self.p
        if p == 1.0:
            safe = np.where(s > 0, s, 1.0)
            return np.where(s > 0, safe * np.log(safe), 0.0) - s + 1.0
        return (s ** p - p * s + p - 1.0) / (p * (p - 1.0))

    def psiprime(self, s):
        s = _as_array(s)
        if self.kind == "driving":
            return self.base.g(s)
        if self.kind == "abs_power":
            p = self.p
            return p * np.abs(s - 1.0) ** (p - 1.0) * np.sign(s - 1.0)
        p = self.p
        with np.errstate(divide="ignore"):
            if p == 1.0:
                return np.log(s)
            return (s ** (p - 1.0) - 1.0) / (p - 1.0)

    def psidoubleprime(self, s):
        s = _as_array(s)
        if self.kind == "driving":
            return self.base.gprime(s)
        p = self.p
        with np.errstate(divide="ignore"):
            if self.kind == "abs_power":
                if p == 2.0:
                    return np.full_like(s, 2.0)
                return p * (p - 1.0) * np.abs(s - 1.0) ** (p - 2.0)
            return s ** (p - 2.0)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"kind": self.kind}
        if self.p is not None:
            data["p"] = self.p
        if self.base is not None:
            data["base"] = self.base.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PsiSpec":
        if not isinstance(data, dict) or "kind" not in data:
            raise ParameterError(f"psi profile must be an object with a 'kind', got {data!r}")
        unknown = set(data) - {"kind", "p", "base"}
        if unknown:
            raise ParameterError(f"unexpected psi profile fields {sorted(unknown)}")
        base = data.get("base")
        return make_psi(data["kind"], data.get("p"), GSpec.from_dict(base) if base is not None else None)


def make_g(kind: str, alpha: Optional[float] = None) -> GSpec:
    """Build a reaction profile; rejects alpha <= 0 and alpha == 1 for the power kind"""
    return GSpec(kind=kind, alpha=alpha)


def make_psi(kind: str, p: Optional[float] = None, base: Optional[GSpec] = None) -> PsiSpec:
    """Build an entropy density; driving kind is psi_g(s) = int_1^s g"""
    return PsiSpec(kind=kind, p=p, base=base)


def _check_point(s: float) -> float:
    s = float(s)
    if not math.isfinite(s) or s < 0.0:
        raise ParameterError(f"profiles are evaluated on s >= 0, got {s}")
    return s


def eval_g(spec: GSpec, s: float) -> Dict[str, Optional[float]]:
    """
    Evaluate g, g', G and the extension of s*g(s) at one point.
    g and g' are reported as None at s = 0.
    """
    s = _check_point(s)
    defined = s > 0
    return {
        "g": float(spec.g(s)) if defined else None,
        "gprime": float(spec.gprime(s)) if defined else None,
        "G": float(spec.G(s)),
        "sg": float(spec.sg(s)),
    }


def eval_psi(spec: PsiSpec, s: float) -> Dict[str, Optional[float]]:
    """Evaluate psi and its derivatives; psi'' is None at s = 0"""
    s = _check_point(s)
    return {
        "psi": float(spec.psi(s)),
        "psiprime": float(spec.psiprime(s)),
        "psidoubleprime": float(spec.psidoubleprime(s)) if s > 0 else None,
    }


def hellinger_limit_at_zero(g: GSpec, psi: PsiSpec) -> float:
    """
    lim_{s -> 0+} s g(s) psi'(s) for the built-in pairs.

    Near 0 every built-in g and psi' is bounded, logarithmic, or behaves
    like s^(a-1)/(1-a) (power kind with a < 1).  The product s g psi' only
    survives when g and psi' = base g are both of power kind with
    a + b <= 1, where it tends to 1/((a-1)(b-1)) or diverges.
    """
    if psi.kind != "driving" or g.kind != "power" or psi.base.kind != "power":
        return 0.0
    a, b = g.alpha, psi.base.alpha
    if a >= 1.0 or b >= 1.0 or a + b > 1.0:
        return 0.0
    if a + b < 1.0:
        return math.inf
    return 1.0 / ((a - 1.0) * (b - 1.0))
