"""Metric measurements on curves and compacta.

Turning of a compact set about two of its points is diam / separation; a
Jordan curve has K-bounded turning when every point pair's smaller-diameter
subarc turns by at most K (Ahlfors' quasicircle criterion).  Fatness of a
compact region measures the worst area fraction it claims inside centered
disks that do not contain it.  Sampled maxima are lower bounds for the true
constants; every report carries its resolution so downstream checks rely on
refinement stability rather than exactness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curves import JordanPolyline, scanline_mask, segments_cross, winding_number
from .poly import is_infinity

__all__ = [
    "FatnessReport",
    "TurningReport",
    "diameter",
    "distortion_probe",
    "fatness",
    "nesting_relation",
    "smaller_subarc",
    "turning",
    "turning_constant",
]


@dataclass
class TurningReport:
    curve_id: str
    K_estimate: float
    witness_pair: tuple[complex, complex]
    sample_count: int
    resolution: float

    def to_dict(self) -> dict:
        return {
            "curve_id": self.curve_id,
            "K_estimate": self.K_estimate,
            "witness_pair": [
                [self.witness_pair[0].real, self.witness_pair[0].imag],
                [self.witness_pair[1].real, self.witness_pair[1].imag],
            ],
            "sample_count": self.sample_count,
            "resolution": self.resolution,
        }


@dataclass
class FatnessReport:
    component_id: str
    tau_estimate: float
    witness: tuple[complex, float]  # (center, radius)
    probe_count: int
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "component_id": self.component_id,
            "tau_estimate": self.tau_estimate,
            "witness": {
                "center": [self.witness[0].real, self.witness[0].imag],
                "radius": self.witness[1],
            },
            "probe_count": self.probe_count,
            "degenerate": self.degenerate,
        }


def _convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain on complex points; returns hull vertices."""
    pts = np.unique(points)
    order = np.lexsort((pts.imag, pts.real))
    pts = pts[order]
    if len(pts) <= 2:
        return pts

    def build(seq):
        hull = []
        for p in seq:
            while len(hull) > 1:
                o = (hull[-1] - hull[-2]).real * (p - hull[-2]).imag - (
                    hull[-1] - hull[-2]
                ).imag * (p - hull[-2]).real
                if o <= 0:
                    hull.pop()
                else:
                    break
            hull.append(p)
        return hull

    upper = build(pts)
    lower = build(pts[::-1])
    return np.asarray(upper[:-1] + lower[:-1])


def diameter(points) -> float:
    """Euclidean diameter of a finite point set (hull + exhaustive hull pairs)."""
    pts = np.asarray(list(points) if not isinstance(points, np.ndarray) else points, dtype=np.complex128)
    if pts.size < 2:
        raise ValueError("diameter needs at least 2 points")
    if not np.all(np.isfinite(pts.real) & np.isfinite(pts.imag)):
        raise ValueError("diameter is undefined with the infinity marker present")
    hull = _convex_hull(pts)
    if len(hull) == 1:
        return 0.0
    d = np.abs(hull[:, None] - hull[None, :])
    return float(d.max())


def turning(K, z1: complex, z2: complex, resolution: float | None = None) -> float:
    """diam(K) / |z1 - z2| for z1, z2 on the connected sampled compactum K.

    Returns math.inf when z1 == z2.  K must be connected at the stated
    resolution (consecutive gaps), and both points must lie on K within it.
    """
    pts = np.asarray(list(K) if not isinstance(K, np.ndarray) else K, dtype=np.complex128)
    if pts.size < 2:
        raise ValueError("turning needs a compactum with at least 2 samples")
    gaps = np.abs(np.diff(pts))
    if resolution is None:
        resolution = float(gaps.max()) if gaps.size else 0.0
    elif gaps.size and gaps.max() > resolution:
        raise ValueError("K is not connected at the stated resolution")
    for z in (z1, z2):
        if float(np.min(np.abs(pts - z))) > resolution:
            raise ValueError("turning endpoints must lie on K")
    sep = abs(z1 - z2)
    if sep == 0.0:
        return math.inf
    value = diameter(pts) / sep
    assert value >= 1.0 - 1e-9, "turning fell below 1; endpoint separation exceeds the diameter"
    return max(value, 1.0)


def _snap_index(curve: JordanPolyline, z: complex, resolution: float) -> int:
    d = np.abs(curve.vertices - z)
    i = int(np.argmin(d))
    if d[i] > resolution:
        raise ValueError("point does not lie on the curve at resolution")
    return i


def smaller_subarc(curve: JordanPolyline, p: complex, q: complex) -> np.ndarray:
    """Of the two arcs of the curve between p and q, the one with smaller
    diameter; ties break deterministically toward the arc holding the lower
    strictly-interior vertex index."""
    v = curve.vertices
    m = len(v)
    res = float(np.max(np.abs(np.roll(v, -1) - v)))
    i = _snap_index(curve, p, res)
    j = _snap_index(curve, q, res)
    if i == j:
        raise ValueError("subarc endpoints coincide at resolution")
    fwd_idx = np.arange(i, i + (j - i) % m + 1) % m
    bwd_idx = np.arange(j, j + (i - j) % m + 1) % m
    fwd, bwd = v[fwd_idx], v[bwd_idx]
    d_f, d_b = diameter(fwd), diameter(bwd)
    if abs(d_f - d_b) <= 1e-12 * max(d_f, d_b):
        min_f = fwd_idx[1:-1].min() if len(fwd_idx) > 2 else m
        min_b = bwd_idx[1:-1].min() if len(bwd_idx) > 2 else m
        return fwd if min_f <= min_b else bwd
    return fwd if d_f < d_b else bwd


def _arc_tables(v: np.ndarray) -> np.ndarray:
    """D[i, l] = diameter of the forward arc v[i..i+l] (indices mod M).

    Recurrences, O(M^2):
      m[i, l] = max(m[i+1, l-1], |v_i - v_{i+l}|)   (farthest from the arc end)
      D[i, l] = max(D[i, l-1], m[i, l])
    """
    n = len(v)
    D = np.zeros((n, n), dtype=np.float64)
    m_prev = np.zeros(n, dtype=np.float64)
    for ell in range(1, n):
        chord = np.abs(v - np.roll(v, -ell))
        m_cur = np.maximum(np.roll(m_prev, -1), chord)
        D[:, ell] = np.maximum(D[:, ell - 1], m_cur)
        m_prev = m_cur
    return D


def turning_constant(
    curve: JordanPolyline, budget: int = 4_000_000, seed: int = 0, curve_id: str = ""
) -> TurningReport:
    """Max sampled turning of smaller subarcs over vertex pairs.

    Exhaustive over all pairs while M^2 <= budget (dynamic programming over
    arc diameters), else stratified random pairs with a seeded generator.
    The sampled max is a lower bound that tightens under refinement.
    """
    v = curve.vertices
    n = len(v)
    res = float(np.max(np.abs(np.roll(v, -1) - v)))
    best = 0.0
    witness = (complex(v[0]), complex(v[1]))
    if n * n <= budget:
        D = _arc_tables(v)
        count = 0
        idx = np.arange(n)
        for ell in range(1, n):
            chord = np.abs(v - np.roll(v, -ell))
            # smaller of forward arc (i, ell) and complementary arc (i+ell, n-ell)
            comp = D[(idx + ell) % n, n - ell]
            small = np.minimum(D[:, ell], comp)
            with np.errstate(divide="ignore", invalid="ignore"):
                delta = np.where(chord > 0, small / np.where(chord > 0, chord, 1.0), 0.0)
            i = int(np.argmax(delta))
            if delta[i] > best:
                best = float(delta[i])
                witness = (complex(v[i]), complex(v[(i + ell) % n]))
            count += n
    else:
        rng = np.random.default_rng(seed)
        strata = 32
        per = max(1, budget // (strata * max(1, n)))
        count = 0
        for s in range(strata):
            lo = max(1, (s * (n - 1)) // strata)
            hi = max(lo + 1, ((s + 1) * (n - 1)) // strata)
            for _ in range(per):
                i = int(rng.integers(0, n))
                ell = int(rng.integers(lo, hi))
                j = (i + ell) % n
                arc = smaller_subarc(curve, complex(v[i]), complex(v[j]))
                chord = abs(v[i] - v[j])
                if chord == 0:
                    continue
                val = diameter(arc) / chord
                count += 1
                if val > best:
                    best = float(val)
                    witness = (complex(v[i]), complex(v[j]))
    best = max(best, 1.0)
    return TurningReport(
        curve_id=curve_id,
        K_estimate=best,
        witness_pair=witness,
        sample_count=count,
        resolution=res,
    )


def _region_grid(curve: JordanPolyline, resolution_divisor: int = 512):
    """Cell centers of the rasterized filled region and the cell area."""
    v = curve.vertices
    diam = diameter(v)
    if diam == 0:
        return np.empty(0, dtype=np.complex128), 0.0, 0.0
    h = diam / resolution_divisor
    x0, x1, y0, y1 = curve.bbox()
    xs = np.arange(x0 + h / 2, x1, h)
    ys = np.arange(y0 + h / 2, y1, h)
    if len(xs) == 0 or len(ys) == 0:
        return np.empty(0, dtype=np.complex128), h, diam
    X, Y = np.meshgrid(xs, ys)
    centers = (X + 1j * Y).ravel()
    inside = scanline_mask(v, xs, ys).ravel()
    return centers[inside], h, diam


def fatness(
    region_boundary: JordanPolyline,
    probes: int = 64,
    seed: int = 0,
    resolution_divisor: int = 512,
    component_id: str = "",
) -> FatnessReport:
    """Minimum area fraction area(A n B(x, r)) / area(B) over probe disks.

    Probe centers sample the boundary and the interior; radii run a geometric
    ladder from the grid resolution up to just below each center's containment
    radius (so B never contains A).  Areas of A n B count grid cells at
    resolution diam/512; area(B) is exact.
    """
    cells, h, diam = _region_grid(region_boundary, resolution_divisor)
    if len(cells) == 0:
        return FatnessReport(
            component_id=component_id,
            tau_estimate=0.0,
            witness=(complex(region_boundary.vertices[0]), 0.0),
            probe_count=0,
            degenerate=True,
        )
    cell_area = h * h
    rng = np.random.default_rng(seed)
    v = region_boundary.vertices
    n_boundary = probes // 2
    n_interior = probes - n_boundary
    b_idx = rng.choice(len(v), size=min(n_boundary, len(v)), replace=False)
    i_idx = rng.choice(len(cells), size=min(n_interior, len(cells)), replace=False)
    centers = np.concatenate([v[np.sort(b_idx)], cells[np.sort(i_idx)]])

    best = math.inf
    witness = (complex(centers[0]), 0.0)
    count = 0
    hull_pts = np.concatenate([v, cells[:: max(1, len(cells) // 256)]])
    for x in centers:
        dist = np.abs(cells - x)
        dist.sort()
        r_max = float(np.max(np.abs(hull_pts - x)))  # containment radius
        if r_max <= h:
            continue
        r = max(h, r_max * 1e-3)
        radii = []
        while r < r_max * 0.999:
            radii.append(r)
            r *= 1.35
        radii.append(r_max * 0.999)
        inside_counts = np.searchsorted(dist, np.asarray(radii))
        for r, m in zip(radii, inside_counts):
            count += 1
            ratio = (m * cell_area) / (math.pi * r * r)
            if ratio < best:
                best = float(ratio)
                witness = (complex(x), float(r))
    if not math.isfinite(best):
        best = 0.0
    best = min(best, 1.0)
    return FatnessReport(
        component_id=component_id,
        tau_estimate=best,
        witness=witness,
        probe_count=count,
        degenerate=False,
    )


def nesting_relation(a: JordanPolyline, b: JordanPolyline) -> str:
    """One of ``a_in_b``, ``b_in_a``, ``disjoint``, ``violation``.

    Mutual vertex membership plus a proper segment-crossing test; violation
    is reported only when the boundaries cross at resolution (or membership
    is inconsistent, which signals the same thing).
    """
    ax0, ax1, ay0, ay1 = a.bbox()
    bx0, bx1, by0, by1 = b.bbox()
    if ax1 < bx0 or bx1 < ax0 or ay1 < by0 or by1 < ay0:
        return "disjoint"
    if segments_cross(a.vertices, b.vertices):
        return "violation"
    a_in = winding_number(b.vertices, a.vertices) != 0
    b_in = winding_number(a.vertices, b.vertices) != 0
    if a_in.all() and not b_in.any():
        return "a_in_b"
    if b_in.all() and not a_in.any():
        return "b_in_a"
    if not a_in.any() and not b_in.any():
        return "disjoint"
    return "violation"


def distortion_probe(
    f,
    p: int,
    pair,
    K_samples,
    z1: complex,
    z2: complex,
) -> float:
    """Ratio of the turning of K to the turning of its p-step forward image.

    ``pair`` is (inner piece at depth n+p, target piece at depth n); when the
    pieces carry image references the p-step chain is verified.  The ratio is
    an empirical lower witness for the proper-map turning distortion constant.
    """
    inner, outer = pair
    if inner is not None and hasattr(inner, "image"):
        walk = inner
        for _ in range(p):
            if walk.image is None:
                raise ValueError("image chain breaks before p steps")
            walk = walk.image
        if outer is not None and walk is not outer:
            raise ValueError("pieces are not related by the p-step image chain")
    pts = np.asarray(list(K_samples), dtype=np.complex128)
    if inner is not None and hasattr(inner, "boundary"):
        inside = winding_number(inner.boundary.vertices, pts) != 0
        if not inside.all():
            raise ValueError("K_samples must lie inside the inner piece")
    img = pts.copy()
    w1, w2 = complex(z1), complex(z2)
    for _ in range(p):
        img = np.asarray([f(z) for z in img], dtype=np.complex128)
        w1, w2 = f(w1), f(w2)
    if is_infinity(w1) or is_infinity(w2) or not np.all(np.isfinite(img.real)):
        raise ValueError("image leaves the finite plane; probe undefined")
    if abs(w1 - w2) < 1e-14 * max(1.0, float(np.max(np.abs(img)))):
        raise ValueError("degenerate image separation")
    num = turning(pts, z1, z2)
    den = turning(img, w1, w2)
    return num / den
