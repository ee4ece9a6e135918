import math

import numpy as np
import pytest

from conftest import ellipse_polyline, square_polyline
from koebe_fatou.curves import (
    JordanPolyline,
    circle_polyline,
    scanline_mask,
    segments_cross,
    self_intersects,
    signed_area,
    winding_number,
)
from koebe_fatou.geometry import (
    diameter,
    distortion_probe,
    fatness,
    nesting_relation,
    smaller_subarc,
    turning,
    turning_constant,
)
from koebe_fatou.poly import INF
from koebe_fatou.ratmap import RationalMap

# Exhaustive-pair maxima, frozen from the brute-force oracle below.  The
# square max sits at the golden-section pair (t, 0)-(1-t, 1) and equals
# sqrt((3 + sqrt 5)/4); the naive candidate pairs (side midpoints /
# minor-axis endpoints) are realized lower bounds but not the maxima.
SQUARE_K = math.sqrt((3.0 + math.sqrt(5.0)) / 4.0)  # 1.1441228...
ELLIPSE41_K = 2.1249974126760467
SQUARE_CANDIDATE = math.sqrt(5.0) / 2.0  # 1.1180339...
# Turning at the minor-axis pair of the 4:1 ellipse: the half-arc diameter
# maximizer sits at sin t = b^2/(a^2 - b^2), slightly past the vertex, so the
# value exceeds sqrt(17)/2 = 2.06155 (the vertex-chord heuristic).
ELLIPSE41_CANDIDATE = 2.06559061946723


def naive_turning_max(curve):
    """Brute-force oracle: per-pair smaller-arc diameter, no shared tables."""
    v = curve.vertices
    n = len(v)
    best = 0.0
    for i in range(n):
        for ell in range(1, n):
            j = (i + ell) % n
            chord = abs(v[i] - v[j])
            if chord == 0:
                continue
            fwd = v[np.arange(i, i + ell + 1) % n]
            bwd = v[np.arange(j, j + (n - ell) + 1) % n]
            df = np.abs(fwd[:, None] - fwd[None, :]).max()
            db = np.abs(bwd[:, None] - bwd[None, :]).max()
            best = max(best, min(df, db) / chord)
    return best


# -- curves primitives --------------------------------------------------------


def test_winding_and_masks():
    c = circle_polyline(0, 1.0, 64)
    assert winding_number(c.vertices, [0.2 + 0.1j])[0] != 0
    assert winding_number(c.vertices, [2.0])[0] == 0
    xs = np.linspace(-1.5, 1.5, 31)
    mask = scanline_mask(c.vertices, xs, xs)
    X, Y = np.meshgrid(xs, xs)
    inside = X**2 + Y**2 < 0.95
    outside = X**2 + Y**2 > 1.05
    assert mask[inside].all()
    assert not mask[outside].any()


def test_signed_area_orientation():
    c = circle_polyline(0, 2.0, 128)
    assert signed_area(c.vertices) == pytest.approx(math.pi * 4, rel=1e-2)
    assert c.orientation == "positive"
    rev = JordanPolyline(c.vertices[::-1].copy())
    assert rev.orientation == "negative"


def test_self_intersection_detection():
    assert not self_intersects(circle_polyline(0, 1.0, 64).vertices)
    t = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    bowtie = np.sin(2 * t) + 1j * np.sin(t)  # figure eight
    assert self_intersects(bowtie)


def test_segments_cross():
    a = circle_polyline(0, 1.0, 64).vertices
    b = circle_polyline(1.0, 1.0, 64).vertices
    c = circle_polyline(5.0, 1.0, 64).vertices
    assert segments_cross(a, b)
    assert not segments_cross(a, c)


def test_polyline_contract_validation():
    with pytest.raises(ValueError):
        JordanPolyline(np.zeros(8, dtype=complex))  # too few vertices
    c = circle_polyline(0, 1.0, 64)
    c.validate(target_step=2 * np.pi / 64)
    with pytest.raises(ValueError):
        c.validate(target_step=2 * np.pi / 6400)  # spacing way over 4h


# -- diameter / turning -------------------------------------------------------


def test_diameter_examples():
    assert diameter([0, 1]) == pytest.approx(1.0)
    assert diameter([0, 1, 1 + 1j]) == pytest.approx(math.sqrt(2))
    c = circle_polyline(0, 1.0, 256)
    assert diameter(c.vertices) == pytest.approx(2.0, abs=1e-3)
    with pytest.raises(ValueError):
        diameter([0, INF])
    with pytest.raises(ValueError):
        diameter([1.0])


def test_turning_examples():
    seg = np.linspace(0, 1, 11).astype(complex)
    assert turning(seg, 0, 1) == pytest.approx(1.0)
    assert turning(seg, 0, 0) == math.inf
    elbow = np.concatenate([np.linspace(0, 1, 11), 1 + 1j * np.linspace(0, 1, 11)[1:]])
    assert turning(elbow, 0, 1) == pytest.approx(math.sqrt(2), rel=1e-9)
    with pytest.raises(ValueError):
        turning(seg, 0, 5.0)  # endpoint off the compactum


def test_turning_at_least_one():
    rng = np.random.default_rng(5)
    for _ in range(50):
        pts = rng.normal(size=12) + 1j * rng.normal(size=12)
        i, j = rng.integers(0, 12, size=2)
        if pts[i] == pts[j]:
            continue
        assert turning(pts, pts[i], pts[j]) >= 1.0


def test_smaller_subarc_quarter():
    c = circle_polyline(0, 1.0, 64)
    arc = smaller_subarc(c, 1.0, 1j)
    assert len(arc) == 17
    mid = np.exp(1j * np.pi / 4)
    assert np.min(np.abs(arc - mid)) < 0.05


def test_smaller_subarc_tie_deterministic():
    c = circle_polyline(0, 1.0, 64)
    a1 = smaller_subarc(c, 1.0, -1.0)
    a2 = smaller_subarc(c, 1.0, -1.0)
    assert np.array_equal(a1, a2)


def test_smaller_subarc_square_corner():
    # p, q midpoints of adjacent sides: the corner arc wins (brute comparison)
    sq = square_polyline(100)
    p = 0.0 - 0.5j  # bottom midpoint (centered square)
    q = 0.5 + 0.0j  # right midpoint
    arc = smaller_subarc(sq, p, q)
    corner = 0.5 - 0.5j
    assert np.min(np.abs(arc - corner)) < 0.02
    assert diameter(arc) < math.sqrt(2) * 0.99


def test_turning_constant_circle():
    rep = turning_constant(circle_polyline(0, 1.0, 512))
    assert abs(rep.K_estimate - 1.0) <= 1e-9


def test_turning_constant_matches_naive_oracle():
    for curve in (square_polyline(30), ellipse_polyline(2.0, 0.5, 120)):
        fast = turning_constant(curve).K_estimate
        slow = naive_turning_max(curve)
        assert fast == pytest.approx(slow, rel=1e-12)


def test_turning_constant_square_and_ellipse_dense():
    rep = turning_constant(square_polyline(500))
    assert rep.K_estimate == pytest.approx(SQUARE_K, abs=1e-3)
    rep = turning_constant(ellipse_polyline(2.0, 0.5, 2000))
    assert rep.K_estimate == pytest.approx(ELLIPSE41_K, abs=5e-3)


def test_candidate_witness_pairs_are_realized_lower_bounds():
    sq = square_polyline(500)
    arc = smaller_subarc(sq, -0.5j, +0.5j)  # midpoints of opposite sides
    assert turning(arc, -0.5j, 0.5j) == pytest.approx(SQUARE_CANDIDATE, abs=1e-3)
    ell = ellipse_polyline(2.0, 0.5, 2000)
    arc = smaller_subarc(ell, 0.5j, -0.5j)  # minor-axis endpoints
    assert turning(arc, 0.5j, -0.5j) == pytest.approx(ELLIPSE41_CANDIDATE, abs=1e-3)


def test_turning_constant_budget_sampling_path():
    c = ellipse_polyline(2.0, 0.5, 800)
    exhaustive = turning_constant(c).K_estimate
    sampled = turning_constant(c, budget=1000, seed=3).K_estimate
    assert 1.0 <= sampled <= exhaustive + 1e-12


def test_turning_refinement_monotone():
    for make in (
        lambda n: square_polyline(n),
        lambda n: ellipse_polyline(2.0, 0.5, 4 * n),
        lambda n: circle_polyline(0, 1.0, 4 * n),
    ):
        coarse = turning_constant(make(100)).K_estimate
        fine = turning_constant(make(200)).K_estimate
        assert fine >= coarse * 0.99


def test_similarity_invariance_sampled():
    rng = np.random.default_rng(11)
    for _ in range(200):
        n = rng.integers(8, 40)
        k = rng.normal(size=n) + 1j * rng.normal(size=n)
        i, j = rng.integers(0, n, size=2)
        if k[i] == k[j]:
            continue
        a = complex(*rng.normal(size=2))
        b = complex(*rng.normal(size=2))
        if abs(a) < 1e-3:
            continue
        t0 = turning(k, k[i], k[j])
        t1 = turning(a * k + b, a * k[i] + b, a * k[j] + b)
        assert abs(t1 - t0) <= 1e-12 * t0


# -- fatness ------------------------------------------------------------------


def test_fatness_unit_disk():
    rep = fatness(circle_polyline(0, 1.0, 512), probes=64, seed=2)
    assert rep.tau_estimate == pytest.approx(0.25, abs=0.02)
    assert not rep.degenerate
    assert rep.probe_count > 0


def test_fatness_square_corner_scale():
    rep = fatness(square_polyline(128), probes=64, seed=2)
    assert 0.1 <= rep.tau_estimate <= 0.2  # corner probe at r -> sqrt(2) gives ~1/(2 pi)


def test_fatness_degenerate_segment():
    seg = np.concatenate([np.linspace(0, 1, 16), np.linspace(1, 0, 16)]).astype(complex)
    rep = fatness(JordanPolyline(seg))
    assert rep.tau_estimate == 0.0
    assert rep.degenerate


def test_fatness_convex_floor():
    for curve in (
        circle_polyline(0, 1.0, 256),
        square_polyline(64),
        ellipse_polyline(2.0, 1.0, 256),
    ):
        assert fatness(curve, probes=48, seed=4).tau_estimate >= 0.1


# -- nesting ------------------------------------------------------------------


def test_nesting_relation_cases():
    c1 = circle_polyline(0, 1.0, 64)
    c2 = circle_polyline(0, 2.0, 64)
    c3 = circle_polyline(5.0, 1.0, 64)
    c4 = circle_polyline(1.0, 1.0, 64)
    assert nesting_relation(c1, c2) == "a_in_b"
    assert nesting_relation(c2, c1) == "b_in_a"
    assert nesting_relation(c1, c3) == "disjoint"
    assert nesting_relation(c1, c4) == "violation"


# -- distortion probe ---------------------------------------------------------


def test_distortion_probe_identity_and_similarity():
    arc = (1.5 + 0.3 * np.exp(1j * np.linspace(0, 1, 40))).astype(complex)
    ratio = distortion_probe(
        RationalMap([0, 0, 1]), 0, (None, None), arc, arc[0], arc[-1]
    )
    assert ratio == pytest.approx(1.0)
    # a degree-1 similarity map scales distances uniformly: ratio exactly 1
    sim = RationalMap([1 + 2j, 3 - 1j])  # z -> (3-i) z + (1+2i)
    ratio = distortion_probe(sim, 1, (None, None), arc, arc[0], arc[-1])
    assert ratio == pytest.approx(1.0, abs=1e-12)


def test_distortion_probe_squaring_map():
    arc = (2.0 + 0.2 * np.exp(1j * np.linspace(0, 2, 50))).astype(complex)
    ratio = distortion_probe(
        RationalMap([0, 0, 1]), 1, (None, None), arc, arc[0], arc[-1]
    )
    assert math.isfinite(ratio) and ratio > 0


def test_distortion_probe_degenerate_image_rejected():
    sq = RationalMap([0, 0, 1])
    arc = np.asarray([1.0, 1.0j, -1.0, -1.0j, 1.0], dtype=complex)
    with pytest.raises(ValueError):
        distortion_probe(sq, 1, (None, None), arc, 1.0, -1.0)  # f(1) = f(-1)
