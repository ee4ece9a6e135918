"""Rational maps as dynamical systems on the Riemann sphere.

Evaluation is total on the sphere (poles map to infinity, infinity by the
leading-coefficient behavior), critical and fixed points are solved with
multiplicities, and critical orbits are classified against attracting /
repelling cycles with a hard iteration budget.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .poly import INF, Poly, chordal, is_infinity, roots_all, roots_flat

__all__ = [
    "CriticalOrbitReport",
    "OrbitVerdict",
    "RationalMap",
    "classify_postcritical",
    "critical_points",
    "evaluate",
    "fixed_points",
    "orbit",
    "preimages",
]

# Multiplier-modulus thresholds for cycle classification.
SUPERATTRACTING_THRESHOLD = 1e-10
INDIFFERENT_BAND = 1e-6


def _rev_horner(coeffs: np.ndarray, u: complex) -> complex:
    # sum_k c_k u^(d-k): Horner over ascending coefficients.
    acc = 0.0 + 0.0j
    for c in coeffs:
        acc = acc * u + c
    return acc


def _resultant_relative(p: Poly, q: Poly) -> float:
    """|res(p, q)| scaled by coefficient magnitudes (0 for a common factor)."""
    m, n = p.degree, q.degree
    if m == 0 or n == 0:
        return 1.0 if (abs(p.coeffs[0]) > 0 or m > 0) and (abs(q.coeffs[0]) > 0 or n > 0) else 0.0
    s = np.zeros((m + n, m + n), dtype=np.complex128)
    pc = p.coeffs[::-1]  # descending
    qc = q.coeffs[::-1]
    for i in range(n):
        s[i, i : i + m + 1] = pc
    for i in range(m):
        s[n + i, i : i + n + 1] = qc
    det = np.linalg.det(s)
    scale = float(np.max(np.abs(p.coeffs))) ** n * float(np.max(np.abs(q.coeffs))) ** m
    return abs(det) / scale if scale > 0 else 0.0


class RationalMap:
    """A rational map f = P/Q with coprime polynomials P, Q.

    ``degree`` is max(deg P, deg Q).  Construction rejects a zero denominator
    and near-common factors (relative resultant below ``coprime_tol``).
    Degree-1 maps are accepted so Moebius charts can be analyzed; the puzzle
    layer insists on degree >= 2.
    """

    def __init__(self, num, den=(1.0,), coprime_tol: float = 1e-10):
        self.num = num if isinstance(num, Poly) else Poly(num)
        self.den = den if isinstance(den, Poly) else Poly(den)
        if self.den.is_zero():
            raise ValueError("denominator is the zero polynomial")
        if self.num.is_zero():
            raise ValueError("numerator is the zero polynomial (constant map)")
        self.degree = max(self.num.degree, self.den.degree)
        if self.degree < 1:
            raise ValueError("constant maps are not dynamical systems")
        if _resultant_relative(self.num, self.den) <= coprime_tol:
            raise ValueError("numerator and denominator are not coprime at tolerance")
        self.dnum = self.num.deriv()
        self.dden = self.den.deriv()
        # Wronskian P'Q - PQ': zeros are the finite critical points, and
        # f' = W / Q^2 wherever Q != 0.
        self.wron = self.dnum * self.den - self.num * self.dden
        self._inverted: RationalMap | None = None

    # -- evaluation ---------------------------------------------------------

    def __call__(self, z: complex) -> complex:
        z = complex(z)  # Python complex: overflow raises instead of warning
        if is_infinity(z):
            dp, dq = self.num.degree, self.den.degree
            if dp > dq:
                return INF
            if dp < dq:
                return 0.0 + 0.0j
            return complex(self.num.coeffs[-1] / self.den.coeffs[-1])
        if abs(z) <= 1.0:
            pv = self.num(z)
            qv = self.den(z)
            if qv == 0:
                return INF
            return pv / qv
        # Inverted chart keeps Horner stable for |z| > 1:
        # P(z) = z^dP * pnorm(1/z) with pnorm the ascending-coefficient Horner.
        u = 1.0 / z
        pv = _rev_horner(self.num.coeffs, u)
        qv = _rev_horner(self.den.coeffs, u)
        if qv == 0:
            return INF
        dp, dq = self.num.degree, self.den.degree
        ratio = pv / qv
        if dp == dq:
            return ratio
        try:
            val = z ** (dp - dq) * ratio
        except OverflowError:
            return INF
        if is_infinity(val):
            return INF
        return val

    def derivative_at(self, z: complex) -> complex:
        """f'(z) at a finite non-pole point."""
        qv = self.den(z)
        if qv == 0:
            raise ZeroDivisionError("derivative chart breaks at a pole")
        return self.wron(z) / (qv * qv)

    def spherical_derivative_norm(self, z: complex) -> float:
        """Norm of the derivative with respect to the chordal metric; total."""
        if is_infinity(z):
            return self.inverted().spherical_derivative_norm(0.0)
        if abs(z) > 1.0:
            return self.inverted().spherical_derivative_norm(1.0 / z)
        pv, qv = self.num(z), self.den(z)
        wv = self.wron(z)
        if qv == 0:
            return abs(wv) / abs(pv) ** 2 * (1.0 + abs(z) ** 2)
        w = pv / qv
        return abs(wv) / abs(qv) ** 2 * (1.0 + abs(z) ** 2) / (1.0 + abs(w) ** 2)

    def inverted(self) -> "RationalMap":
        """The conjugate by z -> 1/z, i.e. w -> 1/f(1/w)."""
        if self._inverted is None:
            m = self.degree
            a = self.num.reversed(m + 1)
            b = self.den.reversed(m + 1)
            self._inverted = RationalMap(b, a)
        return self._inverted

    # -- solved sets --------------------------------------------------------

    def critical_points(self, tol: float = 1e-12) -> list[tuple[complex, int]]:
        """Finite critical points from the Wronskian plus infinity, with
        multiplicities summing to 2 deg - 2."""
        target = 2 * self.degree - 2
        if self.wron.is_zero():
            raise ValueError("degenerate map: identically critical")
        finite = roots_all(self.wron, tol) if self.wron.degree >= 1 else []
        total = sum(m for _, m in finite)
        out = list(finite)
        if total < target:
            out.append((INF, target - total))
        elif total > target:
            raise ArithmeticError("critical multiplicities exceed 2d-2; solver corruption")
        return out

    def preimages(self, w: complex, tol: float = 1e-12) -> list[complex]:
        """All deg-many solutions of f(z) = w, sphere-aware, repeated by
        multiplicity and canonically ordered (infinity last)."""
        d = self.degree
        if is_infinity(w):
            finite = roots_flat(self.den, tol) if self.den.degree >= 1 else []
            inf_mult = self.num.degree - self.den.degree
        else:
            r = self.num - w * self.den
            if r.is_zero():
                raise ValueError("map is constant; preimages undefined")
            finite = roots_flat(r, tol) if r.degree >= 1 else []
            inf_mult = d - r.degree
        out = list(finite)
        out.extend([INF] * max(0, inf_mult))
        if len(out) != d:
            raise ArithmeticError("preimage count does not match the degree")
        return out

    def fixed_points(self, tol: float = 1e-12) -> list[tuple[complex, complex, str]]:
        """All sphere fixed points as (point, multiplier, class).

        Class thresholds on |multiplier|: superattracting < 1e-10,
        attracting < 1 - 1e-6, repelling > 1 + 1e-6, else indifferent.
        """
        zq = Poly(np.concatenate([[0.0], self.den.coeffs]))
        fp_poly = self.num - zq
        if fp_poly.is_zero():
            raise ValueError("identity map: every point is fixed")
        out: list[tuple[complex, complex, str]] = []
        if fp_poly.degree >= 1:
            for z, _m in roots_all(fp_poly, tol):
                lam = self.derivative_at(z)
                out.append((z, lam, _classify_multiplier(abs(lam))))
        if self.num.degree > self.den.degree:
            g = self.inverted()
            lam = g.derivative_at(0.0)
            out.append((INF, lam, _classify_multiplier(abs(lam))))
        return out

    def orbit(self, z: complex, n: int) -> list[complex]:
        if n < 0:
            raise ValueError("orbit length must be >= 0")
        pts = [z]
        for _ in range(n):
            pts.append(self(pts[-1]))
        return pts

    # -- serialization ------------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(
            {
                "num": [[c.real, c.imag] for c in self.num.coeffs],
                "den": [[c.real, c.imag] for c in self.den.coeffs],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "RationalMap":
        data = json.loads(text)
        num = [complex(re, im) for re, im in data["num"]]
        den = [complex(re, im) for re, im in data["den"]]
        return cls(num, den)

    def __repr__(self) -> str:
        return f"RationalMap(num={list(self.num.coeffs)}, den={list(self.den.coeffs)})"


def _classify_multiplier(mod: float) -> str:
    if mod < SUPERATTRACTING_THRESHOLD:
        return "superattracting"
    if mod < 1.0 - INDIFFERENT_BAND:
        return "attracting"
    if mod > 1.0 + INDIFFERENT_BAND:
        return "repelling"
    return "indifferent"


@dataclass
class OrbitVerdict:
    """Tagged classification of one critical orbit."""

    kind: str  # attracted | lands_on_repelling | escaped_to_attracting_infinity | undecided
    cycle: list[complex] = field(default_factory=list)
    period: int = 0
    preperiod: int = 0
    point: complex | None = None
    budget: int = 0
    multiplier_modulus: float | None = None


@dataclass
class CriticalOrbitReport:
    critical_point: complex
    multiplicity: int
    verdict: OrbitVerdict
    orbit_prefix: list[complex]


def _cycle_multiplier_modulus(f: RationalMap, cycle: list[complex]) -> float:
    mod = 1.0
    for z in cycle:
        mod *= f.spherical_derivative_norm(z)
    return mod


def _refine_cycle(f: RationalMap, z0: complex, period: int, rounds: int = 256) -> list[complex]:
    """Settle a near-cycle point by iterating f^period; returns the cycle."""
    z = z0
    for _ in range(rounds):
        w = z
        for _ in range(period):
            w = f(w)
        if chordal(w, z) < 1e-15:
            z = w
            break
        z = w
    cyc = [z]
    for _ in range(period - 1):
        cyc.append(f(cyc[-1]))
    return cyc


def _minimal_period(f: RationalMap, z: complex, period: int, tol: float) -> int:
    for q in range(1, period):
        if period % q == 0:
            w = z
            for _ in range(q):
                w = f(w)
            if chordal(w, z) < tol:
                return q
    return period


def classify_postcritical(
    f: RationalMap,
    budget: int = 2000,
    tol: float = 1e-9,
    max_period: int = 64,
    prefix_len: int = 32,
) -> list[CriticalOrbitReport]:
    """Classify every critical orbit within the iteration budget.

    ``attracted`` requires a return within ``tol`` (chordal) to a previously
    visited point whose settled cycle has multiplier modulus < 1;
    ``lands_on_repelling`` requires landing on a modulus > 1 cycle that the
    orbit then stays on; otherwise ``undecided`` -- never guessed.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    inf_attracting = False
    if f.num.degree > f.den.degree:
        lam = abs(f.inverted().derivative_at(0.0))
        inf_attracting = lam < 1.0 - INDIFFERENT_BAND

    reports = []
    for c, mult in f.critical_points():
        reports.append(
            CriticalOrbitReport(
                critical_point=c,
                multiplicity=mult,
                verdict=_classify_orbit(f, c, budget, tol, max_period, inf_attracting),
                orbit_prefix=f.orbit(c, prefix_len),
            )
        )
    return reports


def _classify_orbit(
    f: RationalMap,
    start: complex,
    budget: int,
    tol: float,
    max_period: int,
    inf_attracting: bool,
) -> OrbitVerdict:
    hist: list[complex] = [start]
    z = start
    for k in range(1, budget + 1):
        z = f(z)
        if inf_attracting and (is_infinity(z) or abs(z) > 1e9):
            return OrbitVerdict(kind="escaped_to_attracting_infinity", preperiod=k)
        hist.append(z)
        pmax = min(k, max_period)
        for p in range(1, pmax + 1):
            if chordal(z, hist[k - p]) < tol:
                verdict = _resolve_cycle(f, hist, k, p, tol)
                if verdict is not None:
                    return verdict
                break
    return OrbitVerdict(kind="undecided", budget=budget)


def _resolve_cycle(
    f: RationalMap, hist: list[complex], k: int, p: int, tol: float
) -> OrbitVerdict | None:
    candidate = hist[k - p]
    mod_raw = _cycle_multiplier_modulus(f, hist[k - p : k])
    if mod_raw < 1.0:
        cycle = _refine_cycle(f, candidate, p)
        period = _minimal_period(f, cycle[0], p, tol)
        cycle = cycle[:period]
        mod = _cycle_multiplier_modulus(f, cycle)
        if mod < 1.0 - INDIFFERENT_BAND:
            return OrbitVerdict(
                kind="attracted",
                cycle=cycle,
                period=period,
                preperiod=max(0, k - p),
                multiplier_modulus=mod,
            )
        return None  # indifferent band: keep iterating / undecided
    if mod_raw > 1.0 + INDIFFERENT_BAND:
        period = _minimal_period(f, candidate, p, tol)
        # Landing must persist: the orbit keeps returning to the cycle.
        w = hist[k]
        stays = True
        for _ in range(2 * period):
            w = f(w)
            if is_infinity(w) and not any(is_infinity(c) for c in hist[k - p : k]):
                stays = False
                break
        if stays:
            ref = hist[k]
            for _ in range(period):
                ref = f(ref)
            stays = chordal(ref, hist[k]) < tol * max(10.0, mod_raw * 4.0)
        if stays:
            return OrbitVerdict(
                kind="lands_on_repelling",
                point=candidate,
                period=period,
                preperiod=max(0, k - p),
                multiplier_modulus=mod_raw,
            )
        return None
    return None


# -- spec-level operation wrappers -----------------------------------------


def evaluate(f: RationalMap, z: complex) -> complex:
    return f(z)


def critical_points(f: RationalMap) -> list[tuple[complex, int]]:
    return f.critical_points()


def preimages(f: RationalMap, w: complex) -> list[complex]:
    return f.preimages(w)


def fixed_points(f: RationalMap) -> list[tuple[complex, complex, str]]:
    return f.fixed_points()


def orbit(f: RationalMap, z: complex, n: int) -> list[complex]:
    return f.orbit(z, n)
