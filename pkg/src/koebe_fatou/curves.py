"""Closed polylines on the plane: sampling, winding numbers, intersection tests.

A :class:`JordanPolyline` is a discretized Jordan curve: an ordered array of
complex vertices whose last element connects back to the first.  Lifted
curves additionally carry a strictly increasing ``params`` array (unwrapped
angles on the depth-0 circle) used for exact on-curve interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["JordanPolyline", "circle_polyline", "winding_number", "signed_area"]


def signed_area(vertices: np.ndarray) -> float:
    """Shoelace area; positive for counterclockwise orientation."""
    v = np.asarray(vertices)
    w = np.roll(v, -1)
    return 0.5 * float(np.sum(v.real * w.imag - v.imag * w.real))


def winding_number(vertices: np.ndarray, points) -> np.ndarray:
    """Winding numbers of a closed polyline around one or many points.

    Robust signed-angle accumulation; returns integers (0 outside, +-1 inside
    a Jordan curve).  Points exactly on the curve get an arbitrary side.
    """
    v = np.asarray(vertices, dtype=np.complex128)
    p = np.atleast_1d(np.asarray(points, dtype=np.complex128))
    out = np.empty(len(p), dtype=np.int64)
    step = max(1, int(4e6 // max(1, len(v))))  # bound the M*K temporary
    for i in range(0, len(p), step):
        u = v[None, :] - p[i : i + step, None]
        ratio = np.roll(u, -1, axis=1) / np.where(u == 0, 1e-300, u)
        total = np.angle(ratio).sum(axis=1) / (2.0 * np.pi)
        out[i : i + step] = np.rint(total).astype(np.int64)
    return out


def point_in(vertices: np.ndarray, point: complex) -> bool:
    return bool(winding_number(vertices, [point])[0] != 0)


def _orient(a, b, c):
    # 2x signed area of the triangle; vectorized.
    return (b.real - a.real) * (c.imag - a.imag) - (b.imag - a.imag) * (c.real - a.real)


def segments_cross(va: np.ndarray, vb: np.ndarray) -> bool:
    """True when any closed-polyline segment of ``va`` properly crosses one of ``vb``."""
    a1 = np.asarray(va, dtype=np.complex128)
    a2 = np.roll(a1, -1)
    b1 = np.asarray(vb, dtype=np.complex128)
    b2 = np.roll(b1, -1)
    # Mutual bounding-box prefilter on whole segments.
    bx0 = np.minimum(b1.real, b2.real).min()
    bx1 = np.maximum(b1.real, b2.real).max()
    by0 = np.minimum(b1.imag, b2.imag).min()
    by1 = np.maximum(b1.imag, b2.imag).max()
    keep_a = ~(
        (np.maximum(a1.real, a2.real) < bx0)
        | (np.minimum(a1.real, a2.real) > bx1)
        | (np.maximum(a1.imag, a2.imag) < by0)
        | (np.minimum(a1.imag, a2.imag) > by1)
    )
    if not keep_a.any():
        return False
    a1, a2 = a1[keep_a], a2[keep_a]
    ax0 = np.minimum(a1.real, a2.real).min()
    ax1 = np.maximum(a1.real, a2.real).max()
    ay0 = np.minimum(a1.imag, a2.imag).min()
    ay1 = np.maximum(a1.imag, a2.imag).max()
    keep_b = ~(
        (np.maximum(b1.real, b2.real) < ax0)
        | (np.minimum(b1.real, b2.real) > ax1)
        | (np.maximum(b1.imag, b2.imag) < ay0)
        | (np.minimum(b1.imag, b2.imag) > ay1)
    )
    if not keep_b.any():
        return False
    b1, b2 = b1[keep_b], b2[keep_b]
    # Broadcast (len a, len b); chunk the a-axis to bound memory.
    step = max(1, int(4e6 // max(1, len(b1))))
    for i in range(0, len(a1), step):
        s1, s2 = a1[i : i + step, None], a2[i : i + step, None]
        d1 = _orient(s1, s2, b1[None, :])
        d2 = _orient(s1, s2, b2[None, :])
        d3 = _orient(b1[None, :], b2[None, :], s1)
        d4 = _orient(b1[None, :], b2[None, :], s2)
        if np.any((d1 * d2 < 0) & (d3 * d4 < 0)):
            return True
    return False


def self_intersects(vertices: np.ndarray) -> bool:
    """Proper self-crossing test for a closed polyline (adjacent pairs excluded)."""
    v = np.asarray(vertices, dtype=np.complex128)
    n = len(v)
    a1 = v
    a2 = np.roll(v, -1)
    d1 = _orient(a1[:, None], a2[:, None], a1[None, :])
    d2 = _orient(a1[:, None], a2[:, None], a2[None, :])
    prod = d1 * d2
    cross = (prod < 0) & (prod.T < 0)
    # mask adjacency (i, i), (i, i+-1 mod n)
    idx = np.arange(n)
    cross[idx, idx] = False
    cross[idx, (idx + 1) % n] = False
    cross[(idx + 1) % n, idx] = False
    return bool(np.any(cross))


def scanline_mask(vertices: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Even-odd rasterization of the filled curve onto a grid of cell centers.

    Returns a boolean (len(ys), len(xs)) mask.  Scanline crossing counts, so
    cost is O(rows * edges) instead of O(cells * edges).
    """
    v = np.asarray(vertices, dtype=np.complex128)
    x1, y1 = v.real, v.imag
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    mask = np.zeros((len(ys), len(xs)), dtype=bool)
    for row, y in enumerate(ys):
        hit = ((y1 <= y) & (y < y2)) | ((y2 <= y) & (y < y1))
        if not hit.any():
            continue
        t = (y - y1[hit]) / (y2[hit] - y1[hit])
        xc = np.sort(x1[hit] + t * (x2[hit] - x1[hit]))
        # Even-odd fill between crossing pairs.
        left = np.searchsorted(xc, xs, side="right")
        mask[row] = (left % 2) == 1
    return mask


@dataclass
class JordanPolyline:
    """Closed polyline with optional lift parameters.

    ``params``, when present, is strictly increasing and parallel to
    ``vertices``: entry k is the unwrapped base-circle angle of vertex k under
    the forward composition of the owning lift.
    """

    vertices: np.ndarray
    depth_tag: int = 0
    params: np.ndarray | None = field(default=None, repr=False)
    #: Total unwrapped parameter increase around the loop (2*pi*covering).
    param_span: float = 0.0
    #: (center, radius) when the polyline discretizes an exact circle.
    circle: tuple[complex, float] | None = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.complex128)
        if self.vertices.ndim != 1 or len(self.vertices) < 16:
            raise ValueError("a Jordan polyline needs at least 16 vertices")
        if self.params is not None:
            self.params = np.asarray(self.params, dtype=np.float64)
            if len(self.params) != len(self.vertices):
                raise ValueError("params must parallel vertices")
            if self.param_span == 0.0:
                self.param_span = 2.0 * np.pi

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def orientation(self) -> str:
        return "positive" if signed_area(self.vertices) > 0 else "negative"

    def segment_lengths(self) -> np.ndarray:
        return np.abs(np.roll(self.vertices, -1) - self.vertices)

    def length(self) -> float:
        return float(self.segment_lengths().sum())

    def bbox(self) -> tuple[float, float, float, float]:
        v = self.vertices
        return (
            float(v.real.min()),
            float(v.real.max()),
            float(v.imag.min()),
            float(v.imag.max()),
        )

    def contains_point(self, z: complex) -> bool:
        return point_in(self.vertices, z)

    def winding(self, points) -> np.ndarray:
        return winding_number(self.vertices, points)

    def validate(self, target_step: float | None = None) -> None:
        """Raise when the polyline violates its structural contract:
        vertex count, simple-ness at resolution, and spacing in [h/4, 4h]."""
        if self_intersects(self.vertices):
            raise ValueError("polyline self-intersects at resolution")
        if target_step is not None:
            gaps = self.segment_lengths()
            if gaps.max() > 4.0 * target_step or gaps.min() < 0.25 * target_step:
                raise ValueError("vertex spacing outside [h/4, 4h] of the target step")

    def resampled_positions(self, n: int) -> np.ndarray:
        """Equal-arclength positions along the polyline (chord interpolation).

        This is a geometric predictor only; lifted curves re-polish the
        points back onto the true curve afterwards.
        """
        v = np.concatenate([self.vertices, self.vertices[:1]])
        seg = np.abs(np.diff(v))
        s = np.concatenate([[0.0], np.cumsum(seg)])
        total = s[-1]
        t = np.linspace(0.0, total, n, endpoint=False)
        idx = np.searchsorted(s, t, side="right") - 1
        idx = np.clip(idx, 0, len(seg) - 1)
        frac = (t - s[idx]) / np.where(seg[idx] == 0, 1.0, seg[idx])
        return v[idx] + frac * (v[idx + 1] - v[idx])


def circle_polyline(center: complex, radius: float, n: int = 804, depth_tag: int = 0) -> JordanPolyline:
    """Counterclockwise circle discretization with angle parameters attached."""
    theta = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return JordanPolyline(
        vertices=center + radius * np.exp(1j * theta),
        depth_tag=depth_tag,
        params=theta.copy(),
        param_span=2.0 * np.pi,
        circle=(complex(center), float(radius)),
    )
