"""Complex scalars on the extended plane and polynomials with robust all-roots solving.

Points are plain Python/numpy complex numbers; the point at infinity is the
module constant ``INF`` (any complex with a non-finite component is treated as
infinity by :func:`is_infinity`).  Polynomials store ascending-degree complex
coefficient arrays.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

__all__ = [
    "INF",
    "PlanePoint",
    "Poly",
    "RootSolveError",
    "chordal",
    "is_infinity",
    "polish_root",
    "roots_all",
]

#: A point of the extended complex plane.  Finite points are ordinary complex
#: numbers; infinity is the marker ``INF``.
PlanePoint = complex

#: Canonical point-at-infinity marker.
INF: complex = complex(math.inf, 0.0)


def is_infinity(z: complex) -> bool:
    """True when ``z`` represents the point at infinity (any non-finite part)."""
    return not (math.isfinite(z.real) and math.isfinite(z.imag))


def chordal(z: complex, w: complex) -> float:
    """Chordal (spherical) distance between extended-plane points, range [0, 2]."""
    zi, wi = is_infinity(z), is_infinity(w)
    if zi and wi:
        return 0.0
    if zi:
        return 2.0 / math.hypot(1.0, abs(w))
    if wi:
        return 2.0 / math.hypot(1.0, abs(z))
    return 2.0 * abs(z - w) / (math.hypot(1.0, abs(z)) * math.hypot(1.0, abs(w)))


class RootSolveError(RuntimeError):
    """Raised when the simultaneous root iteration fails to converge.

    Carries the worst relative residual and the last iterates so callers can
    report or retry.
    """

    def __init__(self, message: str, residual: float, last: np.ndarray | None = None):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual
        self.last = last


class NewtonDivergenceError(RuntimeError):
    """Newton refinement left the basin; carries the last iterate."""

    def __init__(self, message: str, last: complex):
        super().__init__(message)
        self.last = last


class Poly:
    """Polynomial with ascending complex coefficients.

    The zero polynomial is represented by the single coefficient 0.  Leading
    zeros are trimmed on construction (relative to the largest coefficient),
    so ``degree`` is exact.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=np.complex128))
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a non-empty 1-D sequence")
        if not (np.all(np.isfinite(c.real)) and np.all(np.isfinite(c.imag))):
            raise ValueError("coefficients must be finite")
        scale = np.max(np.abs(c))
        if scale == 0.0:
            c = c[:1]
        else:
            nz = np.nonzero(np.abs(c) > 0.0)[0]
            c = c[: nz[-1] + 1]
        self.coeffs = c

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return self.degree == 0 and self.coeffs[0] == 0

    def __call__(self, z):
        """Horner evaluation; accepts scalars or arrays."""
        if np.isscalar(z) or isinstance(z, complex):
            z = complex(z)
            acc = 0.0 + 0.0j
            for c in self.coeffs[::-1]:
                acc = acc * z + c
            return complex(acc)
        z = np.asarray(z, dtype=np.complex128)
        acc = np.zeros_like(z)
        for c in self.coeffs[::-1]:
            acc = acc * z + c
        return acc

    def deriv(self) -> "Poly":
        if self.degree == 0:
            return Poly([0.0])
        k = np.arange(1, len(self.coeffs))
        return Poly(self.coeffs[1:] * k)

    def __mul__(self, other):
        if isinstance(other, Poly):
            return Poly(np.convolve(self.coeffs, other.coeffs))
        return Poly(self.coeffs * other)

    __rmul__ = __mul__

    def __add__(self, other: "Poly") -> "Poly":
        n = max(len(self.coeffs), len(other.coeffs))
        a = np.zeros(n, dtype=np.complex128)
        a[: len(self.coeffs)] = self.coeffs
        a[: len(other.coeffs)] += other.coeffs
        return Poly(a)

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-1.0) * other

    def reversed(self, length: int | None = None) -> "Poly":
        """Coefficients reversed, optionally zero-padded to ``length`` first."""
        c = self.coeffs
        if length is not None and length > len(c):
            c = np.concatenate([c, np.zeros(length - len(c), dtype=np.complex128)])
        return Poly(c[::-1])

    def shifted(self, c: complex) -> "Poly":
        """The polynomial z -> p(z + c)."""
        out = Poly([self.coeffs[-1]])
        base = Poly([c, 1.0])
        for a in self.coeffs[-2::-1]:
            out = out * base + Poly([a])
        return out

    def __repr__(self) -> str:
        return f"Poly({list(self.coeffs)})"


def cauchy_bound(p: Poly) -> float:
    """Radius bounding every root: 1 + max |a_k / a_n|."""
    if p.degree < 1:
        raise ValueError("cauchy_bound needs a nonconstant polynomial")
    lead = abs(p.coeffs[-1])
    return 1.0 + float(np.max(np.abs(p.coeffs[:-1]))) / lead


def _residual_scale(p: Poly, z: complex) -> float:
    # scale(p, z) = max coefficient magnitude times max(1, |z|)^deg
    return float(np.max(np.abs(p.coeffs))) * max(1.0, abs(z)) ** p.degree


def _aberth(p: Poly, tol: float, max_iter: int) -> np.ndarray:
    """Simultaneous Aberth--Ehrlich iteration from a deterministic ring."""
    n = p.degree
    dp = p.deriv()
    r = cauchy_bound(p)
    # Off-axis start angles break the symmetry of real-coefficient inputs.
    k = np.arange(n)
    z = r * np.exp(2j * np.pi * (k + 0.25) / n + 0.5j / n)
    for _ in range(max_iter):
        pv = p(z)
        dv = dp(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = np.where(dv != 0, pv / np.where(dv != 0, dv, 1.0), 0.0)
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            inv = 1.0 / diff
            np.fill_diagonal(inv, 0.0)
            s = inv.sum(axis=1)
            denom = 1.0 - newton * s
            step = np.where(np.abs(denom) > 1e-300, newton / np.where(denom != 0, denom, 1.0), newton)
        bad = ~np.isfinite(step)
        if bad.any():
            step = np.where(bad, 0.0, step)
            z = z + 1e-3 * r * np.exp(1j * k[: len(z)])  # nudge coincident iterates
            continue
        z = z - step
        if np.max(np.abs(step)) <= 1e-16 * max(1.0, float(np.max(np.abs(z)))):
            break
    return z


def roots_all(p: Poly, tol: float = 1e-12, max_iter: int = 400) -> list[tuple[complex, int]]:
    """All roots of ``p`` with multiplicities, canonically ordered.

    Uses simultaneous Aberth--Ehrlich iteration started on a deterministic
    ring at the Cauchy bound, then clusters iterates closer than
    ``sqrt(tol) * max(1, cauchy_bound)`` and reports each cluster centroid
    with the cluster size as multiplicity.  Output is sorted lexicographically
    by (re, im), so repeated calls are bit-identical.

    Every returned root z satisfies ``|p(z)| <= tol * scale(p, z)`` with
    ``scale(p, z) = max|coeff| * max(1, |z|)^deg``; otherwise
    :class:`RootSolveError` is raised.

    Parameters
    ----------
    p : Poly
        Nonconstant polynomial.
    tol : float
        Relative residual tolerance, > 0.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if p.degree < 1:
        raise ValueError("roots_all requires a nonconstant polynomial")
    z = _aberth(p, tol, max_iter)

    # Cluster for multiplicity.  Linking is generous (an m-fold root leaves
    # iterates ringed at radius ~ eps^(1/m)), but every merge must validate
    # against the residual bound or it is split back apart.
    radius = math.sqrt(math.sqrt(tol)) * max(1.0, cauchy_bound(p))
    out: list[tuple[complex, int]] = []
    worst = [0.0]
    _cluster_validated(p, list(z), radius, tol, out, worst)
    if worst[0] > tol:
        raise RootSolveError("root iteration did not reach tolerance", worst[0], z)
    out.sort(key=lambda rm: (rm[0].real, rm[0].imag))
    return out


def _link_groups(pts: list[complex], radius: float) -> list[list[complex]]:
    n = len(pts)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(pts[i] - pts[j]) <= radius:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[rj] = ri
    groups: dict[int, list[complex]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(pts[i])
    return list(groups.values())


def _cluster_validated(
    p: Poly,
    pts: list[complex],
    radius: float,
    tol: float,
    out: list[tuple[complex, int]],
    worst: list[float],
) -> None:
    for group in _link_groups(pts, radius):
        m = len(group)
        centroid = complex(np.mean(np.asarray(group)))
        if m >= 2:
            # An m-fold root is a simple root of the (m-1)-th derivative;
            # refining there recovers the precision the cluster lacks.
            d = p
            for _ in range(m - 1):
                d = d.deriv()
            try:
                centroid = polish_root(d, centroid, tol)
            except NewtonDivergenceError:
                pass
        resid = abs(p(centroid)) / _residual_scale(p, centroid)
        if m == 1 or resid <= tol:
            worst[0] = max(worst[0], resid)
            out.append((centroid, m))
        elif radius > 1e-9:
            _cluster_validated(p, group, radius / 4.0, tol, out, worst)
        else:
            for pt in group:
                worst[0] = max(worst[0], abs(p(pt)) / _residual_scale(p, pt))
                out.append((complex(pt), 1))


def roots_flat(p: Poly, tol: float = 1e-12) -> list[complex]:
    """Roots repeated by multiplicity, canonically ordered."""
    out: list[complex] = []
    for z, m in roots_all(p, tol):
        out.extend([z] * m)
    return out


def polish_root(
    p: Poly,
    z0: complex,
    tol: float = 1e-12,
    max_iter: int = 50,
    multiple: bool = False,
) -> complex:
    """Newton-refine a root estimate.

    Returns ``z0`` unchanged if it already meets the residual tolerance.  In
    ``multiple`` mode the iteration runs on p/p' (simple-rooted), which keeps
    quadratic convergence at multiple roots.

    Raises
    ------
    NewtonDivergenceError
        When the step count is exhausted or the step grows beyond the basin
        heuristic; the exception carries the last iterate.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if abs(p(z0)) <= tol * _residual_scale(p, z0):
        return z0
    dp = p.deriv()
    ddp = dp.deriv()
    z = z0
    prev_step = math.inf
    for _ in range(max_iter):
        pv = p(z)
        dv = dp(z)
        if multiple:
            # Newton on p/p': step = p p' / (p'^2 - p p'')
            denom = dv * dv - pv * ddp(z)
            if denom == 0:
                raise NewtonDivergenceError("degenerate Newton denominator", z)
            step = pv * dv / denom
        else:
            if dv == 0:
                raise NewtonDivergenceError("zero derivative at iterate", z)
            step = pv / dv
        z = z - step
        s = abs(step)
        if s > 4.0 * prev_step and s > 1e-12 * max(1.0, abs(z)):
            raise NewtonDivergenceError("Newton step growing; outside basin", z)
        prev_step = max(s, 1e-300)
        if abs(p(z)) <= tol * _residual_scale(p, z):
            return complex(z)
    raise NewtonDivergenceError("Newton did not converge in the step budget", z)
