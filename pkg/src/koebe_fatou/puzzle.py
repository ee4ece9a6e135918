"""Puzzle-piece partition of an attracting basin of infinity.

Start from an invariant round disk around the fixed point at infinity, pull
its boundary circle back through the map depth by depth, and organize the
bounded complementary components of the lifted curves into a forest with
nesting (parent) and map-action (image) edges.  Maximal nested chains of
pieces approximate Julia components; their diameters, map degrees, and
periodicity under the induced action are the measured quantities downstream.

Every lifted vertex carries its unwrapped angle on the depth-0 circle and is
Newton-polished against the full composition, so the boundary residual stays
near machine precision at every depth and arclength resampling is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import _kernels
from .curves import JordanPolyline, circle_polyline, scanline_mask, winding_number
from .geometry import diameter, nesting_relation
from .poly import INF, chordal, is_infinity, roots_all
from .ratmap import CriticalOrbitReport, RationalMap

__all__ = [
    "End",
    "EndClass",
    "InvariantDisk",
    "LiftError",
    "PuzzleForest",
    "PuzzlePiece",
    "assemble_forest",
    "build_invariant_disk",
    "chain_degree",
    "lift_boundary",
    "piece_degree",
    "track_ends",
]


class LiftError(RuntimeError):
    """Curve lifting failed (branch collision, open strand, or precondition)."""


class ForestError(RuntimeError):
    """Structural inconsistency detected while assembling or querying a forest."""


@dataclass
class InvariantDisk:
    """Round disk U0 = {|z| > R} around the attracting fixed point at infinity.

    ``margin`` is the measured minimal chordal clearance: of f(boundary
    samples) from the boundary circle, and of postcritical orbit prefixes
    from the circle.  Both are strictly positive by construction.
    """

    boundary: JordanPolyline
    radius: float
    margin: float
    contains_infinity: bool = True


@dataclass
class PuzzlePiece:
    id: int
    depth: int
    boundary: JordanPolyline
    parent: "PuzzlePiece | None" = field(default=None, repr=False)
    image: "PuzzlePiece | None" = field(default=None, repr=False)
    local_degree: int | None = None
    critical_points_inside: list = field(default_factory=list)
    poles_inside: list = field(default_factory=list)
    diameter: float = 0.0
    refined: bool = True  # False when the piece cap stopped deeper lifting

    def interior_point(self) -> complex:
        return _interior_point(self.boundary)

    def contains(self, z: complex) -> bool:
        if is_infinity(z):
            return False
        return bool(winding_number(self.boundary.vertices, [z])[0] != 0)


@dataclass
class EndClass:
    kind: str  # periodic | eventually_periodic | shrinking_trivial_candidate | undecided
    period: int = 0
    preperiod: int = 0


@dataclass
class End:
    chain: dict[int, PuzzlePiece]  # depth -> piece, contiguous range
    classification: EndClass
    stable_degree: int
    meets_postcritical: bool

    @property
    def deepest(self) -> PuzzlePiece:
        return self.chain[max(self.chain)]


class PuzzleForest:
    """Immutable-after-assembly partition tree; queries are read-only."""

    def __init__(self, f: RationalMap, disk: InvariantDisk):
        self.f = f
        self.disk = disk
        self.pieces: list[PuzzlePiece] = []
        self.by_depth: list[list[PuzzlePiece]] = []
        self.postcritical_prefix: list[complex] = []
        self.truncated_depths: list[int] = []

    @property
    def depth(self) -> int:
        return len(self.by_depth) - 1

    def new_piece(self, **kw) -> PuzzlePiece:
        piece = PuzzlePiece(id=len(self.pieces), **kw)
        self.pieces.append(piece)
        return piece

    # -- audits -------------------------------------------------------------

    def lift_residual(self, max_depth: int | None = None, stride: int = 8) -> float:
        """Max chordal distance of f^n(boundary samples) from the base circle."""
        f = self.f
        pn = np.ascontiguousarray(f.num.coeffs)
        pd = np.ascontiguousarray(f.den.coeffs)
        radius = self.disk.radius
        worst = 0.0
        for pieces in self.by_depth[1:]:
            for piece in pieces:
                n = piece.depth
                if max_depth is not None and n > max_depth:
                    continue
                v = piece.boundary.vertices[::stride]
                w = _kernels.eval_forward(pn, pd, np.ascontiguousarray(v), n)
                gap = np.abs(np.abs(w) - radius)
                # chordal distance to the nearest circle point
                ch = 2.0 * gap / (np.hypot(1.0, np.abs(w)) * math.hypot(1.0, radius))
                worst = max(worst, float(np.max(ch)))
        return worst

    def audit_trichotomy(self, fast: bool = True) -> list[tuple[int, int, str]]:
        """Cross-depth nesting violations (empty on healthy forests).

        The fast path tests proper boundary crossings plus one winding probe
        per side (sufficient for simple closed curves: with no crossing, a
        connected curve lies wholly on one side); anomalies re-run the full
        relation before being reported.
        """
        from .curves import segments_cross

        violations: list[tuple[int, int, str]] = []
        flat = [p for p in self.pieces]
        boxes = np.array([p.boundary.bbox() for p in flat])
        for i, a in enumerate(flat):
            for j in range(i + 1, len(flat)):
                b = flat[j]
                if a.depth == b.depth:
                    continue
                if (
                    boxes[i, 1] < boxes[j, 0]
                    or boxes[j, 1] < boxes[i, 0]
                    or boxes[i, 3] < boxes[j, 2]
                    or boxes[j, 3] < boxes[i, 2]
                ):
                    continue  # disjoint boxes: closures disjoint
                if fast:
                    if not segments_cross(a.boundary.vertices, b.boundary.vertices):
                        continue
                    rel = "violation"
                else:
                    rel = nesting_relation(a.boundary, b.boundary)
                if rel == "violation":
                    rel = nesting_relation(a.boundary, b.boundary)
                    if rel == "violation":
                        violations.append((a.id, b.id, rel))
        return violations

    def audit_commutation(self) -> list[int]:
        """Pieces (depth >= 2) where image(parent) != parent(image)."""
        bad = []
        for piece in self.pieces:
            if piece.depth >= 2:
                if piece.parent.image is not piece.image.parent:
                    bad.append(piece.id)
        return bad

    def to_json_dict(self) -> dict:
        return {
            "depth": self.depth,
            "radius": self.disk.radius,
            "pieces": [
                {
                    "id": p.id,
                    "depth": p.depth,
                    "parent": p.parent.id if p.parent else None,
                    "image": p.image.id if p.image else None,
                    "degree": p.local_degree,
                    "diameter": p.diameter,
                    "crits": [[c.real, c.imag, m] for c, m in p.critical_points_inside],
                    "poles": [[c.real, c.imag, m] for c, m in p.poles_inside],
                    "vertices": [[v.real, v.imag] for v in p.boundary.vertices],
                }
                for p in self.pieces
            ],
        }


# -- invariant disk ----------------------------------------------------------


def build_invariant_disk(
    f: RationalMap,
    reports: list[CriticalOrbitReport] | None = None,
    margin: float = 0.05,
    grid_ratio: float = 1.05,
    radius_cap: float = 1e4,
    probe_samples: int = 256,
) -> InvariantDisk:
    """Smallest admissible round disk about infinity on a geometric radius grid.

    Admissibility at radius R: every boundary sample maps strictly outside
    radius R(1 + margin), and no finite postcritical orbit-prefix point has
    |q| within the relative margin band of R.  The reported ``margin`` field
    is the measured minimal chordal clearance.
    """
    inf_entry = [e for e in f.fixed_points() if is_infinity(e[0])]
    if not inf_entry:
        raise ValueError("infinity is not a fixed point of the map")
    _, lam, cls = inf_entry[0]
    if cls not in ("attracting", "superattracting"):
        raise ValueError(
            f"fixed point at infinity is {cls} (multiplier {lam:.6g}); need attracting"
        )
    if reports is None:
        from .ratmap import classify_postcritical

        reports = classify_postcritical(f)
    prefix: list[complex] = []
    for rep in reports:
        for q in rep.orbit_prefix:
            if not is_infinity(q) and abs(q) < 1e12:
                prefix.append(complex(q))
    # Zeros of f must stay inside the complementary disk: with the boundary
    # mapped strictly outside AND no zeros in U0, the maximum principle on
    # 1/f certifies f(U0) inside U0 (the closure condition on U0).
    zero_reach = 0.0
    if f.num.degree >= 1:
        zero_reach = max(abs(z) for z, _m in roots_all(f.num))

    theta = np.exp(1j * np.linspace(0.0, 2.0 * np.pi, probe_samples, endpoint=False))
    radius = 1.0
    chosen = None
    while radius <= radius_cap:
        ok = zero_reach < radius * (1.0 - margin)
        if ok:
            w = np.asarray([f(z) for z in radius * theta])
            finite = np.isfinite(w.real) & np.isfinite(w.imag)
            mags = np.where(finite, np.abs(w), np.inf)
            if np.min(mags) <= radius * (1.0 + margin):
                ok = False
        if ok:
            for q in prefix:
                if radius * (1.0 - margin) <= abs(q) <= radius * (1.0 + margin):
                    ok = False
                    break
        if ok:
            chosen = radius
            break
        radius *= grid_ratio
    if chosen is None:
        raise ValueError("no admissible invariant-disk radius below the cap")

    n = max(64, int(math.ceil(256.0 * math.pi)))
    boundary = circle_polyline(0.0, chosen, n, depth_tag=0)
    # measured chordal clearances for the stored margin
    w = np.asarray([f(z) for z in boundary.vertices[::4]])
    finite = np.isfinite(w.real) & np.isfinite(w.imag)
    clear = [
        chordal(complex(val), chosen * val / abs(val))
        for val in w[finite]
    ]
    clear += [2.0 / math.hypot(1.0, chosen)]  # infinity itself
    for q in prefix:
        nearest = chosen * (q / abs(q)) if q != 0 else complex(chosen)
        clear.append(chordal(q, nearest))
    return InvariantDisk(
        boundary=boundary,
        radius=chosen,
        margin=float(min(clear)),
    )


# -- lifting ------------------------------------------------------------------


@dataclass
class LiftedCurve:
    curve: JordanPolyline
    image: JordanPolyline
    covering: int


def _coeff_arrays(f: RationalMap):
    return (
        np.ascontiguousarray(f.num.coeffs),
        np.ascontiguousarray(f.den.coeffs),
        np.ascontiguousarray(f.dnum.coeffs),
        np.ascontiguousarray(f.dden.coeffs),
        np.ascontiguousarray(f.wron.coeffs),
    )


def _critical_value_clearance(f: RationalMap, curve: JordanPolyline) -> float:
    vals = []
    for c, _m in f.critical_points():
        w = f(c)
        if not is_infinity(w):
            vals.append(w)
    if not vals:
        return math.inf
    v = curve.vertices
    return min(float(np.min(np.abs(v - w))) for w in vals)


def _match_closing(starts: np.ndarray, closing: np.ndarray) -> list[int]:
    """Permutation sigma with closing[j] == starts[sigma[j]]; strict matching."""
    d = len(starts)
    if d == 1:
        if abs(closing[0] - starts[0]) > 1e-5 * (1.0 + abs(starts[0])):
            raise LiftError("strand did not close onto its start")
        return [0]
    sep = min(
        abs(starts[i] - starts[j]) for i in range(d) for j in range(i + 1, d)
    )
    tol = max(0.25 * sep, 1e-12)
    sigma = []
    for j in range(d):
        dist = np.abs(starts - closing[j])
        i = int(np.argmin(dist))
        if dist[i] > tol:
            raise LiftError("open strand after full traversal")
        sigma.append(i)
    if sorted(sigma) != list(range(d)):
        raise LiftError("strand endpoints do not permute the starts")
    return sigma


def _polish_targets(f, z, t, depth, radius, tol):
    pn, pd, _, _, wrn = _coeff_arrays(f)
    out, res, ok = _kernels.polish_composed(
        pn, pd, wrn, np.ascontiguousarray(z), np.ascontiguousarray(t), depth, radius, tol, 12
    )
    if not ok:
        raise LiftError("composed polish hit a pole; corrupted lift")
    return out, float(np.max(res)) if len(res) else 0.0


def _run_walk(f, wv, starts, lift_tol):
    """Walk all strands over the closed vertex array wv (with repeat at end)."""
    pn, pd, dpn, dpd, wrn = _coeff_arrays(f)
    out_z, out_sep, closing, status, fail_k = _kernels.walk_strands(
        pn, pd, dpn, dpd, wrn, wv, starts, lift_tol, 18
    )
    if status == _kernels.STATUS_COLLISION:
        raise LiftError(
            f"branch collision persisted after substep refinement near sample {fail_k}"
        )
    if status != _kernels.STATUS_OK:
        raise LiftError(f"strand walk failed with status {status} near sample {fail_k}")
    return out_z, out_sep, closing


def _cycles_of(sigma: list[int]) -> list[list[int]]:
    seen = [False] * len(sigma)
    cycles = []
    for j0 in range(len(sigma)):
        if seen[j0]:
            continue
        cyc = [j0]
        seen[j0] = True
        j = sigma[j0]
        while j != j0:
            cyc.append(j)
            seen[j] = True
            j = sigma[j]
        cycles.append(cyc)
    return cycles


def _image_point_at(f, image, t_new, pred, image_depth, base_radius, lift_tol):
    """Exact on-curve image points at new parameters, from chord predictors.

    For the base circle this is closed-form; otherwise the predictor is
    polished against the image's own composition and the movement must stay
    a small fraction of the local spacing (ambiguity aborts the lift).
    """
    if image_depth == 0:
        return base_radius * np.exp(1j * t_new)
    out, _ = _polish_targets(f, pred, t_new, image_depth, base_radius, lift_tol)
    return out


def _refine_image(f, wv, tv, need, image_depth, base_radius, lift_tol):
    """Insert exact midpoints into image intervals flagged by ``need``."""
    pred = 0.5 * (wv[:-1][need] + wv[1:][need])
    t_new = 0.5 * (tv[:-1][need] + tv[1:][need])
    pts = _image_point_at(f, None, t_new, pred, image_depth, base_radius, lift_tol)
    move = np.abs(pts - pred)
    spacing = np.abs(wv[1:][need] - wv[:-1][need])
    if np.any(move > 0.35 * spacing + 1e-12):
        raise LiftError("image refinement is ambiguous; sampling too coarse")
    n_old = len(wv) - 1
    new_wv = []
    new_tv = []
    ins = 0
    for k in range(n_old):
        new_wv.append(wv[k])
        new_tv.append(tv[k])
        if need[k]:
            new_wv.append(pts[ins])
            new_tv.append(t_new[ins])
            ins += 1
    new_wv.append(wv[-1])
    new_tv.append(tv[-1])
    return np.asarray(new_wv, dtype=np.complex128), np.asarray(new_tv, dtype=np.float64)


def _neck_gaps(out_z: np.ndarray, cycles: list[list[int]], k_query: int = 32) -> np.ndarray:
    """Local neck width at every strand position.

    Strand positions out_z[j, k] form the lifted loops of one image curve
    (strands concatenate along the monodromy cycles).  A neighbor counts as
    a neck partner when it belongs to another loop, or to the same loop at
    along-curve arc distance more than 2.5x its Euclidean distance (the
    curve left and came back; smooth arcs stay below ratio ~1.6 and right
    angles below 1.42, while even stubby lobes exceed 2.5).  Sampling must
    stay well below this width or polyline chords shortcut across fjords
    and amputate the lobes that hold deeper pieces.
    """
    d, m = out_z.shape
    loop_id = np.empty(d * m, dtype=np.int64)
    arc_pos = np.empty(d * m, dtype=np.float64)
    loop_total = np.empty(d * m, dtype=np.float64)
    flat_index = np.empty((d, m), dtype=np.int64)
    base = 0
    for li, cyc in enumerate(cycles):
        loop_v = np.concatenate([out_z[j] for j in cyc])
        seg = np.abs(np.diff(np.concatenate([loop_v, loop_v[:1]])))
        cum = np.concatenate([[0.0], np.cumsum(seg[:-1])])
        total = float(seg.sum())
        for pos, j in enumerate(cyc):
            sl = slice(base + pos * m, base + (pos + 1) * m)
            loop_id[sl] = li
            arc_pos[sl] = cum[pos * m : (pos + 1) * m]
            loop_total[sl] = total
            flat_index[j] = np.arange(sl.start, sl.stop)
        base += len(cyc) * m
    flat_v = np.empty(d * m, dtype=np.complex128)
    for j in range(d):
        flat_v[flat_index[j]] = out_z[j]

    pts = np.column_stack([flat_v.real, flat_v.imag])
    tree = cKDTree(pts)
    k_eff = min(k_query, len(pts))
    dist, idx = tree.query(pts, k=k_eff)
    gaps = np.full(d * m, np.inf)
    for col in range(1, k_eff):
        nb = idx[:, col]
        dcol = dist[:, col]
        same = loop_id[nb] == loop_id
        s = np.abs(arc_pos[nb] - arc_pos)
        s = np.minimum(s, loop_total - s)
        qualifies = (~same) | (s > 2.5 * dcol)
        cand = np.where(qualifies, dcol, np.inf)
        gaps = np.minimum(gaps, cand)
    out = np.empty((d, m), dtype=np.float64)
    for j in range(d):
        out[j] = gaps[flat_index[j]]
    return out


def _turn_angles(loop_v: np.ndarray) -> np.ndarray:
    """Unsigned tangent turn at every vertex of a closed vertex run."""
    prev = np.roll(loop_v, 1)
    nxt = np.roll(loop_v, -1)
    v1 = loop_v - prev
    v2 = nxt - loop_v
    ratio = v2 / np.where(v1 == 0, 1e-300, v1)
    return np.abs(np.angle(ratio))


def _decimate_on_sheet(
    loop_v: np.ndarray,
    loop_t: np.ndarray,
    loop_gap: np.ndarray,
    step_divisor: int,
    min_vertices: int = 64,
    max_turn: float = 0.3,
) -> tuple[np.ndarray, np.ndarray]:
    """Thin a dense on-sheet vertex run to ~diam/step_divisor spacing.

    Only existing continuation points are kept (no interpolation).  Spacing
    additionally respects a third of the local neck gap (chords must not
    shortcut across fjords) and the accumulated tangent turn (chords must
    not flatten tight wraps whose curvature radius is below the step).
    """
    diam = diameter(loop_v)
    seg = np.abs(np.diff(np.concatenate([loop_v, loop_v[:1]])))
    turn = _turn_angles(loop_v)
    total = float(seg.sum())
    h = diam / step_divisor if diam > 0 else total / 256.0
    h = min(h, total / max(min_vertices, 16))
    keep = [0]
    acc = 0.0
    acc_turn = 0.0
    for k in range(1, len(loop_v)):
        acc += seg[k - 1]
        acc_turn += turn[k]
        limit = min(0.9 * h, loop_gap[k] / 3.0) if np.isfinite(loop_gap[k]) else 0.9 * h
        if acc >= max(limit, 1e-300) or acc_turn >= max_turn:
            keep.append(k)
            acc = 0.0
            acc_turn = 0.0
    if len(keep) < 16:
        keep = list(range(len(loop_v)))
    idx = np.asarray(keep)
    return loop_v[idx], loop_t[idx]


def _lift_one(
    f: RationalMap,
    image: JordanPolyline,
    new_depth: int,
    base_radius: float | None,
    lift_tol: float,
    step_divisor: int = 256,
    max_refine_rounds: int = 12,
    max_image_vertices: int = 32768,
) -> list[LiftedCurve]:
    """All preimage components of one image curve.

    The strand walk retains positions only over exact image vertices;
    whenever the resulting output spacing is coarser than the per-loop
    target, the flagged image intervals are refined with exactly-polished
    midpoints and the walk repeats.  Every retained vertex is therefore a
    continuation point over an exact on-curve target -- chord interpolation
    never touches the output, which is what rules out sheet-hopping.
    """
    clearance = _critical_value_clearance(f, image)
    if clearance < lift_tol * 1e3:
        raise LiftError(
            f"curve passes within {clearance:.3e} of a critical value; lift refused"
        )
    w0 = complex(image.vertices[0])
    starts_ms = f.preimages(w0)
    if any(is_infinity(z) for z in starts_ms):
        raise LiftError("curve meets the critical value at infinity")
    starts = np.asarray(starts_ms, dtype=np.complex128)
    d = len(starts)
    image_depth = new_depth - 1

    wv = np.concatenate([image.vertices, image.vertices[:1]])
    tv = np.concatenate([image.params, [image.params[0] + image.param_span]])

    sigma = None
    out_z = out_sep = None
    for _round in range(max_refine_rounds):
        out_z, out_sep, closing = _run_walk(f, wv, starts, lift_tol)
        sigma_new = _match_closing(starts, closing)
        if sigma is not None and sigma_new != sigma:
            raise LiftError("monodromy changed under image refinement; lift unstable")
        sigma = sigma_new
        cycles = _cycles_of(sigma)
        caps = np.zeros(d)
        for cyc in cycles:
            loop_v = np.concatenate([out_z[j] for j in cyc])
            loop_diam = diameter(loop_v)
            for j in cyc:
                caps[j] = loop_diam / step_divisor if loop_diam > 0 else np.inf
        # Output gaps per strand over every image interval (closing wrap
        # included); besides the per-loop density target, spacing must stay
        # below a third of the local neck gap (self- and sibling approach)
        # so polyline chords cannot shortcut across fjords.
        m = out_z.shape[1]
        neck = _neck_gaps(out_z, cycles)
        need = np.zeros(m, dtype=bool)
        for cyc in cycles:
            nxt = {cyc[i]: cyc[(i + 1) % len(cyc)] for i in range(len(cyc))}
            for j in cyc:
                gaps = np.empty(m)
                gaps[: m - 1] = np.abs(np.diff(out_z[j]))
                gaps[m - 1] = abs(out_z[nxt[j], 0] - out_z[j, m - 1])
                limit = np.minimum(0.75 * caps[j], neck[j] / 3.0)
                need |= gaps > limit
            # curvature fidelity: tight wraps need steps below the local
            # turning radius or chords flatten them away
            loop = np.concatenate([out_z[j] for j in cyc])
            turn = _turn_angles(loop)
            for p in np.nonzero(turn > 0.35)[0]:
                k = p % m
                need[k] = True
                need[(k - 1) % m] = True
        if not need.any():
            break
        if len(wv) - 1 + int(need.sum()) > max_image_vertices:
            raise LiftError("image refinement exceeded the vertex budget")
        if base_radius is None:
            # no exact parameterization available: refuse rather than guess
            raise LiftError(
                "output needs refinement but the image has no exact parameterization"
            )
        wv, tv = _refine_image(f, wv, tv, need, image_depth, base_radius, lift_tol)
    else:
        raise LiftError("output density not reached within the refinement budget")

    neck = _neck_gaps(out_z, _cycles_of(sigma))
    results: list[LiftedCurve] = []
    for cyc in _cycles_of(sigma):
        loop_v = np.concatenate([out_z[j] for j in cyc])
        loop_t = np.concatenate(
            [tv[:-1] + pos * image.param_span for pos in range(len(cyc))]
        )
        loop_gap = np.concatenate([neck[j] for j in cyc])
        span = len(cyc) * image.param_span
        v, t = _decimate_on_sheet(loop_v, loop_t, loop_gap, step_divisor)
        if base_radius is not None and new_depth >= 1:
            polished, _res = _polish_targets(f, v, t, new_depth, base_radius, lift_tol)
            seg_scale = np.abs(np.roll(v, -1) - v)
            if np.any(np.abs(polished - v) > 0.35 * seg_scale + 1e-12):
                raise LiftError("final polish moved a vertex off its sheet")
            v = polished
        curve = JordanPolyline(
            vertices=v, depth_tag=new_depth, params=t, param_span=span
        )
        results.append(LiftedCurve(curve=curve, image=image, covering=len(cyc)))
    return results


def lift_boundary(
    f: RationalMap, curves: list[JordanPolyline], lift_tol: float = 1e-11
) -> list[LiftedCurve]:
    """All components of the preimage of the given closed curves.

    Each input curve is walked sample by sample; the ``degree``-many preimage
    branches are continued by predictor (previous root) and Newton corrector,
    with adaptive substeps near branch collisions, then fused into closed
    loops by the monodromy permutation.  Outputs are tagged with their image
    curve and the covering degree (strands fused).

    Inputs must stay clear of the critical values of f.  Circles centered at
    the origin (from :func:`circle_polyline`) get exact on-circle polishing;
    generic polylines are lifted against their own sample points.
    """
    out: list[LiftedCurve] = []
    for curve in curves:
        work = curve
        if work.params is None:
            n = len(work.vertices)
            work = JordanPolyline(
                vertices=work.vertices,
                depth_tag=work.depth_tag,
                params=np.linspace(0.0, 2.0 * np.pi, n, endpoint=False),
                param_span=2.0 * np.pi,
                circle=work.circle,
            )
        base_radius = None
        if work.circle is not None and work.circle[0] == 0:
            base_radius = work.circle[1]
        out.extend(
            _lift_one(f, work, work.depth_tag + 1, base_radius, lift_tol)
        )
    return out


# -- piece helpers ------------------------------------------------------------


def _interior_point(curve: JordanPolyline) -> complex:
    """Deterministic robust interior point (coarse pole of inaccessibility)."""
    v = curve.vertices
    c = complex(np.mean(v))
    if winding_number(v, [c])[0] != 0:
        return c
    x0, x1, y0, y1 = curve.bbox()
    for n in (16, 32, 64, 128):
        xs = np.linspace(x0, x1, n + 2)[1:-1]
        ys = np.linspace(y0, y1, n + 2)[1:-1]
        mask = scanline_mask(v, xs, ys)
        if mask.any():
            X, Y = np.meshgrid(xs, ys)
            centers = (X + 1j * Y)[mask]
            dist = np.min(np.abs(centers[:, None] - v[None, :: max(1, len(v) // 256)]), axis=1)
            return complex(centers[int(np.argmax(dist))])
    raise ForestError("could not find an interior point of the piece")


def _winding_of_loop(points: np.ndarray, base: complex) -> int:
    u = points - base
    ratio = np.roll(u, -1) / np.where(u == 0, 1e-300, u)
    total = float(np.angle(ratio).sum() / (2.0 * np.pi))
    w = int(round(total))
    if abs(total - w) > 0.1:
        raise ForestError("non-integer boundary winding; corrupted loop")
    return w


def piece_degree(f: RationalMap, piece: PuzzlePiece) -> int:
    """Covering number of f from the piece boundary onto its image boundary.

    Computed as the total argument winding of f over the boundary around an
    interior base point of the image piece, cross-checked against
    Riemann-Hurwitz (1 + interior critical multiplicities mapping into the
    image) whenever the piece holds no pole.
    """
    if piece.image is None:
        raise ForestError("piece has no image edge")
    base = piece.image.interior_point()
    w = np.asarray([f(z) for z in piece.boundary.vertices], dtype=np.complex128)
    if not np.all(np.isfinite(w.real) & np.isfinite(w.imag)):
        raise ForestError("boundary maps through a pole; corrupted lift")
    deg = abs(_winding_of_loop(w, base))
    if not piece.poles_inside:
        rh = 1
        for c, mult in piece.critical_points_inside:
            if piece.image.contains(f(c)):
                rh += mult
        if deg != rh:
            raise ForestError(
                f"winding degree {deg} disagrees with Riemann-Hurwitz {rh}"
            )
    return deg


# -- forest assembly ----------------------------------------------------------


def _discard_enclosed(curves: list[LiftedCurve]) -> list[LiftedCurve]:
    """Keep only outermost curves: enclosed ones bound preimage components
    that are separated from infinity and are not part of the basin boundary."""
    keep = []
    pts = [c.curve.vertices[0] for c in curves]
    for i, lc in enumerate(curves):
        enclosed = False
        for j, other in enumerate(curves):
            if i == j:
                continue
            if winding_number(other.curve.vertices, [pts[i]])[0] != 0:
                enclosed = True
                break
        if not enclosed:
            keep.append(lc)
    return keep


def assemble_forest(
    f: RationalMap,
    u0: InvariantDisk,
    N: int,
    cap: int = 4096,
    seed: int = 0,
    lift_tol: float = 1e-11,
    step_divisor: int = 256,
    reports: list[CriticalOrbitReport] | None = None,
) -> PuzzleForest:
    """Build the depth-0..N puzzle forest by iterated boundary lifting.

    Depth-by-depth: lift every (selected) depth-(n-1) boundary curve, keep
    the outermost preimage components, and wire parent and image edges.
    When a depth exceeds ``cap`` pieces, only the largest pieces plus a
    seeded random sample are refined further (deep piece counts grow like
    degree^n; the measurements only need per-end chains).
    """
    if N < 1:
        raise ValueError("forest depth must be >= 1")
    if f.degree < 2:
        raise ValueError("puzzle construction needs degree >= 2")
    forest = PuzzleForest(f, u0)
    if reports is not None:
        for rep in reports:
            for q in rep.orbit_prefix:
                if not is_infinity(q):
                    forest.postcritical_prefix.append(complex(q))
    crits = [(c, m) for c, m in f.critical_points() if not is_infinity(c)]
    poles = (
        [(z, m) for z, m in roots_all(f.den)] if f.den.degree >= 1 else []
    )

    radius = u0.radius
    root = forest.new_piece(
        depth=0,
        boundary=u0.boundary,
        parent=None,
        image=None,
        local_degree=None,
        critical_points_inside=[(c, m) for c, m in crits if abs(c) < radius],
        poles_inside=[(p, m) for p, m in poles if abs(p) < radius],
        diameter=2.0 * radius,
    )
    forest.by_depth.append([root])
    rng = np.random.default_rng(seed)

    curve_to_piece: dict[int, PuzzlePiece] = {id(u0.boundary): root}
    for depth in range(1, N + 1):
        parents = [p for p in forest.by_depth[depth - 1] if p.refined]
        if len(parents) > cap:
            parents_sorted = sorted(parents, key=lambda p: (-p.diameter, p.id))
            sample_n = min(64, max(1, cap // 16))
            head = parents_sorted[: cap - sample_n]
            tail = parents_sorted[cap - sample_n :]
            idx = rng.choice(len(tail), size=min(sample_n, len(tail)), replace=False)
            chosen = head + [tail[i] for i in sorted(idx)]
            chosen_ids = {p.id for p in chosen}
            for p in parents:
                if p.id not in chosen_ids:
                    p.refined = False
            parents = chosen
            forest.truncated_depths.append(depth)
        lifted: list[LiftedCurve] = []
        for parent_piece in parents:
            try:
                lifted.extend(
                    _lift_one(
                        f,
                        parent_piece.boundary,
                        depth,
                        radius,
                        lift_tol,
                        step_divisor,
                    )
                )
            except LiftError as exc:
                raise LiftError(f"depth {depth}: {exc}") from exc
        kept = _discard_enclosed(lifted)
        level: list[PuzzlePiece] = []
        for lc in kept:
            image_piece = curve_to_piece[id(lc.image)]
            v = lc.curve.vertices
            inside_crits = [(c, m) for c, m in crits if winding_number(v, [c])[0] != 0]
            inside_poles = [(p, m) for p, m in poles if winding_number(v, [p])[0] != 0]
            piece = forest.new_piece(
                depth=depth,
                boundary=lc.curve,
                parent=None,
                image=image_piece,
                local_degree=lc.covering,
                critical_points_inside=inside_crits,
                poles_inside=inside_poles,
                diameter=diameter(v),
            )
            # parent: the unique previous-depth piece containing this curve
            probe = v[0]
            parent = None
            for cand in forest.by_depth[depth - 1]:
                x0, x1, y0, y1 = cand.boundary.bbox()
                if not (x0 <= probe.real <= x1 and y0 <= probe.imag <= y1):
                    continue
                if winding_number(cand.boundary.vertices, [probe])[0] != 0:
                    parent = cand
                    break
            if parent is None:
                raise ForestError(f"depth {depth}: lifted curve has no parent piece")
            inside = winding_number(parent.boundary.vertices, v[:: max(1, len(v) // 64)])
            if not np.all(inside != 0):
                raise ForestError(f"depth {depth}: curve straddles its parent piece")
            piece.parent = parent
            # cross-check the covering degree by the winding definition
            wdeg = piece_degree(f, piece)
            if wdeg != lc.covering:
                raise ForestError(
                    f"depth {depth}: monodromy covering {lc.covering} != winding {wdeg}"
                )
            curve_to_piece[id(lc.curve)] = piece
            level.append(piece)
        forest.by_depth.append(level)
    return forest


# -- ends ---------------------------------------------------------------------


def chain_degree(forest: PuzzleForest, end: End, p: int, n: int) -> int:
    """Degree of f^p from the end's depth-(n+p) piece onto its p-step image."""
    if n + p > forest.depth:
        raise ValueError("n + p exceeds the forest depth")
    if (n + p) not in end.chain:
        raise ValueError("end chain does not cover depth n + p")
    piece = end.chain[n + p]
    deg = 1
    for _ in range(p):
        if piece.image is None or piece.local_degree is None:
            raise ForestError("broken image chain")
        deg *= piece.local_degree
        piece = piece.image
    return deg


def _image_walk(piece: PuzzlePiece, steps: int) -> PuzzlePiece | None:
    for _ in range(steps):
        if piece.image is None:
            return None
        piece = piece.image
    return piece


def track_ends(
    forest: PuzzleForest,
    shrink_ratio: float = 0.9,
    max_period: int = 8,
    max_preperiod: int = 8,
    min_window: int = 3,
) -> list[End]:
    """Maximal nested chains from the deepest level, with classification.

    Shrinking candidates (diameter ratio <= shrink_ratio over the last three
    depths) are flagged first: that is the numerical stand-in for point
    components.  Otherwise the induced action on chains decides periodicity:
    periodic(p) demands the p-step image of the chain returns to the chain at
    every available depth, eventually_periodic additionally allows a shift.
    """
    if forest.depth < 3:
        raise ValueError("end tracking needs forest depth >= 3")
    deepest = forest.by_depth[forest.depth]
    ends: list[End] = []
    for leaf in deepest:
        chain: dict[int, PuzzlePiece] = {}
        piece = leaf
        while piece is not None and piece.depth >= 1:
            chain[piece.depth] = piece
            piece = piece.parent
        n_max = max(chain)
        diams = [chain[k].diameter for k in sorted(chain)]
        ratios = [
            diams[i + 1] / diams[i] if diams[i] > 0 else 1.0
            for i in range(len(diams) - 1)
        ]
        shrinking = len(ratios) >= 3 and all(r <= shrink_ratio for r in ratios[-3:])
        classification = None
        if shrinking:
            classification = EndClass(kind="shrinking_trivial_candidate")
        else:
            for k in range(0, min(max_preperiod, n_max - min_window) + 1):
                period = _chain_period(chain, n_max, k, max_period, min_window)
                if period:
                    if k == 0:
                        classification = EndClass(kind="periodic", period=period)
                    else:
                        classification = EndClass(
                            kind="eventually_periodic", period=period, preperiod=k
                        )
                    break
            if classification is None:
                classification = EndClass(kind="undecided")
        meets = any(
            chain[n_max].contains(q) for q in forest.postcritical_prefix
        )
        ends.append(
            End(
                chain=chain,
                classification=classification,
                stable_degree=chain[n_max].local_degree or 1,
                meets_postcritical=meets,
            )
        )
    return ends


def _chain_period(
    chain: dict[int, PuzzlePiece], n_max: int, shift: int, max_period: int, min_window: int
) -> int:
    """Smallest p such that image^(shift+p)(chain[n]) == image^shift-chain at
    matching depths, verified at every available depth; 0 when none."""
    for p in range(1, max_period + 1):
        checks = 0
        good = True
        for n in sorted(chain):
            if n + shift + p > n_max:
                continue
            src = chain.get(n + shift + p)
            dst = chain.get(n + shift)
            if src is None or dst is None:
                continue
            a = _image_walk(src, shift + p)
            b = _image_walk(dst, shift)
            if a is None or b is None:
                good = False
                break
            if a is not b:
                good = False
                break
            checks += 1
        if good and checks >= min_window:
            return p
    return 0
