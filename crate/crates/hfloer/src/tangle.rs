//! The homoclinic tangle: every polished crossing of the four branch curves,
//! organized by branch pair and arclength, with the map action matched
//! between points, orbit classes, the primary/non-primary classification,
//! and the Maslov grading of primary points.
//!
//! Conventions used throughout:
//!   * `u_param`, `s_param` are cumulative arclengths from the fixed point
//!     along the respective branch curve; on both manifolds the point closer
//!     to the fixed point along the stable branch is the *later* one in the
//!     intrinsic branch ordering.
//!   * a point is primary when no other crossing of the same branch pair is
//!     strictly closer to the fixed point along both its branch segments.
//!   * the Maslov index of a primary point is the corrected total turning
//!     (in units of pi) of the closed loop that runs from the point to the
//!     fixed point along the unstable branch and back along the stable one,
//!     with the corner turns at the two endpoints reduced mod pi -- into
//!     (0, pi) at the fixed point and into (-pi, 0) at the base point.

use crate::cross::{find_pair_crossings, insert_bracket_vertices, Crossing, CrossingSettings};
use crate::error::{Error, Result};
use crate::geom::{mod_into_0_pi, turn_angle, P2};
use crate::maps::{FixedPoint, MapModel};
use crate::trace::{BranchCurve, BranchId, ManifoldKind, Side};

#[derive(Clone, Copy, Debug)]
pub struct HomoclinicPoint {
    pub pos: P2,
    pub u_side: Side,
    pub s_side: Side,
    pub t_u: f64,
    pub t_s: f64,
    pub u_param: f64,
    pub s_param: f64,
    pub dir_u: P2,
    pub dir_s: P2,
    pub angle: f64,
    pub det_sign: i8,
    pub residual: f64,
}

impl HomoclinicPoint {
    pub fn pair(&self) -> (Side, Side) {
        (self.u_side, self.s_side)
    }
}

pub fn pair_slot(us: Side, ss: Side) -> usize {
    (matches!(us, Side::Minus) as usize) * 2 + matches!(ss, Side::Minus) as usize
}

pub const ALL_PAIRS: [(Side, Side); 4] = [
    (Side::Plus, Side::Plus),
    (Side::Plus, Side::Minus),
    (Side::Minus, Side::Plus),
    (Side::Minus, Side::Minus),
];

pub fn branch_slot(id: BranchId) -> usize {
    (matches!(id.kind, ManifoldKind::Stable) as usize) * 2 + matches!(id.side, Side::Minus) as usize
}

#[derive(Clone, Copy, Debug)]
pub struct TangleSettings {
    pub crossing: CrossingSettings,
    /// Euclidean tolerance when matching a point against the image of
    /// another under the map.
    pub match_tol: f64,
    /// Relative window on chart parameters for the same matching (chart
    /// parameters multiply by exactly lambda under the map).
    pub match_rel: f64,
}

impl TangleSettings {
    pub fn from_crossing(crossing: CrossingSettings) -> Self {
        TangleSettings { crossing, match_tol: 1e-6, match_rel: 1e-7 }
    }
}

pub struct Tangle {
    pub model: MapModel,
    pub fp: FixedPoint,
    /// Branch curves in `branch_slot` order: u+, u-, s+, s-.
    pub curves: Vec<BranchCurve>,
    /// All surviving crossings, sorted by (pair, t_u).
    pub points: Vec<HomoclinicPoint>,
    /// Index of phi(point) / phi^-1(point) when detected.
    pub next: Vec<Option<usize>>,
    pub prev: Vec<Option<usize>>,
    pub orbit_id: Vec<usize>,
    pub n_orbits: usize,
    pub primary: Vec<bool>,
    /// Per-pair point indices sorted by u_param.
    pub pair_idxs: [Vec<usize>; 4],
    pub warnings: Vec<String>,
}

impl Tangle {
    pub fn x(&self) -> P2 {
        self.fp.x
    }

    pub fn curve(&self, id: BranchId) -> &BranchCurve {
        &self.curves[branch_slot(id)]
    }

    pub fn u_curve(&self, side: Side) -> &BranchCurve {
        &self.curves[branch_slot(BranchId { kind: ManifoldKind::Unstable, side })]
    }

    pub fn s_curve(&self, side: Side) -> &BranchCurve {
        &self.curves[branch_slot(BranchId { kind: ManifoldKind::Stable, side })]
    }

    /// Walk the orbit n steps (negative n walks backwards). None when the
    /// chain leaves the detected window.
    pub fn iterate(&self, idx: usize, n: i64) -> Option<usize> {
        let mut i = idx;
        if n >= 0 {
            for _ in 0..n {
                i = self.next[i]?;
            }
        } else {
            for _ in 0..(-n) {
                i = self.prev[i]?;
            }
        }
        Some(i)
    }

    /// Does the fixed point lie inside the open unstable arc between p and q?
    /// True exactly when the two points sit on different half-branches.
    pub fn x_in_u_arc(&self, p: usize, q: usize) -> bool {
        self.points[p].u_side != self.points[q].u_side
    }

    pub fn x_in_s_arc(&self, p: usize, q: usize) -> bool {
        self.points[p].s_side != self.points[q].s_side
    }

    /// Is point r strictly inside the open arc of the unstable manifold
    /// between p and q? When the arc passes through the fixed point it is
    /// the union of the two seed-side pieces.
    pub fn u_arc_contains(&self, p: usize, q: usize, r: usize) -> bool {
        let (pp, qq, rr) = (&self.points[p], &self.points[q], &self.points[r]);
        if pp.u_side == qq.u_side {
            rr.u_side == pp.u_side
                && rr.u_param > pp.u_param.min(qq.u_param)
                && rr.u_param < pp.u_param.max(qq.u_param)
        } else {
            (rr.u_side == pp.u_side && rr.u_param < pp.u_param)
                || (rr.u_side == qq.u_side && rr.u_param < qq.u_param)
        }
    }

    pub fn s_arc_contains(&self, p: usize, q: usize, r: usize) -> bool {
        let (pp, qq, rr) = (&self.points[p], &self.points[q], &self.points[r]);
        if pp.s_side == qq.s_side {
            rr.s_side == pp.s_side
                && rr.s_param > pp.s_param.min(qq.s_param)
                && rr.s_param < pp.s_param.max(qq.s_param)
        } else {
            (rr.s_side == pp.s_side && rr.s_param < pp.s_param)
                || (rr.s_side == qq.s_side && rr.s_param < qq.s_param)
        }
    }

    /// Vertex chain of the unstable arc from p to q (endpoints included),
    /// routed through the fixed point when the two points sit on different
    /// half-branches.
    pub fn u_arc_polyline(&self, p: usize, q: usize) -> Vec<P2> {
        let (pp, qq) = (&self.points[p], &self.points[q]);
        let mut out = vec![pp.pos];
        if pp.u_side == qq.u_side {
            let curve = self.u_curve(pp.u_side);
            let range = curve.verts_strictly_between(pp.u_param.min(qq.u_param), pp.u_param.max(qq.u_param));
            if pp.u_param < qq.u_param {
                out.extend(range.map(|i| curve.verts[i]));
            } else {
                out.extend(range.rev().map(|i| curve.verts[i]));
            }
        } else {
            let cp = self.u_curve(pp.u_side);
            out.extend(cp.verts_strictly_between(0.0, pp.u_param).rev().map(|i| cp.verts[i]));
            out.push(self.x());
            let cq = self.u_curve(qq.u_side);
            out.extend(cq.verts_strictly_between(0.0, qq.u_param).map(|i| cq.verts[i]));
        }
        out.push(qq.pos);
        out
    }

    pub fn s_arc_polyline(&self, p: usize, q: usize) -> Vec<P2> {
        let (pp, qq) = (&self.points[p], &self.points[q]);
        let mut out = vec![pp.pos];
        if pp.s_side == qq.s_side {
            let curve = self.s_curve(pp.s_side);
            let range = curve.verts_strictly_between(pp.s_param.min(qq.s_param), pp.s_param.max(qq.s_param));
            if pp.s_param < qq.s_param {
                out.extend(range.map(|i| curve.verts[i]));
            } else {
                out.extend(range.rev().map(|i| curve.verts[i]));
            }
        } else {
            let cp = self.s_curve(pp.s_side);
            out.extend(cp.verts_strictly_between(0.0, pp.s_param).rev().map(|i| cp.verts[i]));
            out.push(self.x());
            let cq = self.s_curve(qq.s_side);
            out.extend(cq.verts_strictly_between(0.0, qq.s_param).map(|i| cq.verts[i]));
        }
        out.push(qq.pos);
        out
    }

    /// Maslov index of a point: corrected turning of the loop
    /// point -> fixed point (along W^u) -> point (along W^s), in units of pi.
    /// Returns the index and the rounding residual.
    pub fn maslov_index(&self, idx: usize) -> Result<(i32, f64)> {
        let p = &self.points[idx];
        let cu = self.u_curve(p.u_side);
        let cs_ = self.s_curve(p.s_side);
        let mut verts: Vec<(P2, Corner)> = Vec::new();
        verts.push((p.pos, Corner::Base));
        for i in cu.verts_strictly_between(0.0, p.u_param).rev() {
            verts.push((cu.verts[i], Corner::Regular));
        }
        verts.push((self.x(), Corner::Fixed));
        for i in cs_.verts_strictly_between(0.0, p.s_param) {
            verts.push((cs_.verts[i], Corner::Regular));
        }
        let verts = prune_loop(verts);
        let total = corrected_loop_turning(&verts)?;
        let mu = (total / std::f64::consts::PI).round();
        let residual = (total / std::f64::consts::PI - mu).abs();
        if residual >= 0.1 {
            return Err(Error::Invariant(format!(
                "grading loop turning {:.6} pi is not near an integer (point {idx})",
                total / std::f64::consts::PI
            )));
        }
        Ok((mu as i32, residual))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Corner {
    Regular,
    /// The loop's corner at the fixed point: turn reduced into (0, pi).
    Fixed,
    /// The loop's corner at the base point: turn reduced into (-pi, 0).
    Base,
}

/// Drop regular vertices that sit within 1e-9 of their kept predecessor (or
/// of the closing vertex); marked corners always survive.
pub fn prune_loop(verts: Vec<(P2, Corner)>) -> Vec<(P2, Corner)> {
    const EPS: f64 = 1e-9;
    let mut out: Vec<(P2, Corner)> = Vec::with_capacity(verts.len());
    for (pos, c) in verts {
        match out.last() {
            Some((last, lc)) if (pos - last).norm() < EPS => {
                if c != Corner::Regular {
                    if *lc == Corner::Regular {
                        out.pop();
                        out.push((pos, c));
                    }
                    // two special corners colliding would be degenerate;
                    // leave both and let the residual check complain
                    else {
                        out.push((pos, c));
                    }
                }
            }
            _ => out.push((pos, c)),
        }
    }
    // closing collision: last regular vertex too close to the base vertex
    while out.len() > 2 {
        let (last, lc) = *out.last().unwrap();
        if lc == Corner::Regular && (last - out[0].0).norm() < EPS {
            out.pop();
        } else {
            break;
        }
    }
    out
}

/// Total turning of a closed marked polyline with the corner corrections
/// applied at the Fixed and Base vertices.
pub fn corrected_loop_turning(verts: &[(P2, Corner)]) -> Result<f64> {
    let n = verts.len();
    if n < 3 {
        return Err(Error::Invariant("grading loop collapsed to fewer than 3 vertices".into()));
    }
    let mut total = 0.0;
    for i in 0..n {
        let prev = verts[(i + n - 1) % n].0;
        let here = verts[i].0;
        let next = verts[(i + 1) % n].0;
        let raw = turn_angle(here - prev, next - here);
        total += match verts[i].1 {
            Corner::Regular => raw,
            Corner::Fixed => mod_into_0_pi(raw),
            Corner::Base => mod_into_0_pi(raw) - std::f64::consts::PI,
        };
    }
    Ok(total)
}

/// Assemble the tangle: run the crossing pass on all four branch pairs,
/// anchor every crossing into the polylines, compute arclength coordinates,
/// match the map action, chain orbits, and classify primaries.
pub fn build_tangle(
    model: MapModel,
    fp: FixedPoint,
    mut curves: Vec<BranchCurve>,
    ts: &TangleSettings,
) -> Result<Tangle> {
    assert_eq!(curves.len(), 4);
    let mut warnings = Vec::new();
    let mut raw_points: Vec<(Side, Side, Crossing)> = Vec::new();
    for (us, ss) in ALL_PAIRS {
        let u = &curves[branch_slot(BranchId { kind: ManifoldKind::Unstable, side: us })];
        let s = &curves[branch_slot(BranchId { kind: ManifoldKind::Stable, side: ss })];
        let (crossings, warns) = find_pair_crossings(u, s, &ts.crossing)?;
        warnings.extend(warns);
        raw_points.extend(crossings.into_iter().map(|c| (us, ss, c)));
    }

    // plant bracket vertices so every crossing lies on both polylines
    let bbox = ts.crossing.bbox;
    for (us, ss, c) in &raw_points {
        let ui = branch_slot(BranchId { kind: ManifoldKind::Unstable, side: *us });
        insert_bracket_vertices(&mut curves[ui], c.t_u, c.speed_u, &bbox)?;
        let si = branch_slot(BranchId { kind: ManifoldKind::Stable, side: *ss });
        insert_bracket_vertices(&mut curves[si], c.t_s, c.speed_s, &bbox)?;
    }
    for c in curves.iter_mut() {
        c.rebuild_params();
    }

    let mut points: Vec<HomoclinicPoint> = raw_points
        .iter()
        .map(|(us, ss, c)| {
            let cu = &curves[branch_slot(BranchId { kind: ManifoldKind::Unstable, side: *us })];
            let cs_ = &curves[branch_slot(BranchId { kind: ManifoldKind::Stable, side: *ss })];
            HomoclinicPoint {
                pos: c.pos,
                u_side: *us,
                s_side: *ss,
                t_u: c.t_u,
                t_s: c.t_s,
                u_param: cu.param_of(c.t_u, c.pos),
                s_param: cs_.param_of(c.t_s, c.pos),
                dir_u: c.dir_u,
                dir_s: c.dir_s,
                angle: c.angle,
                det_sign: c.det_sign,
                residual: c.residual,
            }
        })
        .collect();
    points.sort_by(|a, b| {
        (pair_slot(a.u_side, a.s_side), a.t_u)
            .partial_cmp(&(pair_slot(b.u_side, b.s_side), b.t_u))
            .unwrap()
    });

    let n = points.len();
    let lambda = fp.lambda;

    let mut pair_idxs: [Vec<usize>; 4] = Default::default();
    for (i, p) in points.iter().enumerate() {
        pair_idxs[pair_slot(p.u_side, p.s_side)].push(i);
    }
    // within a pair, t_u order and u_param order agree (arclength is
    // monotone in the chart parameter); keep them sorted by u_param
    for idxs in pair_idxs.iter_mut() {
        idxs.sort_by(|&a, &b| points[a].u_param.partial_cmp(&points[b].u_param).unwrap());
    }

    // match the map action: phi multiplies t_u by lambda and divides t_s by
    // lambda within the same branch pair
    let mut next: Vec<Option<usize>> = vec![None; n];
    let mut prev: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let p = &points[i];
        let slot = pair_slot(p.u_side, p.s_side);
        let target_tu = lambda * p.t_u;
        let target_ts = p.t_s / lambda;
        let mut found: Option<usize> = None;
        let mut count = 0;
        for &j in &pair_idxs[slot] {
            let q = &points[j];
            if (q.t_u - target_tu).abs() <= ts.match_rel * target_tu
                && (q.t_s - target_ts).abs() <= ts.match_rel * target_ts
            {
                count += 1;
                found = Some(j);
            }
        }
        if count > 1 {
            return Err(Error::AmbiguousMatch { idx: i, count, tol: ts.match_rel });
        }
        if let Some(j) = found {
            // cross-check with the geometric image
            let img = model.apply(p.pos);
            if (points[j].pos - img).norm() > ts.match_tol {
                return Err(Error::Invariant(format!(
                    "chart-parameter match of point {i} disagrees with the map image by {:.3e}",
                    (points[j].pos - img).norm()
                )));
            }
            next[i] = Some(j);
            if prev[j].is_some() {
                return Err(Error::AmbiguousMatch { idx: j, count: 2, tol: ts.match_rel });
            }
            prev[j] = Some(i);
        }
    }

    // orbit classes: chase each chain once, numbering by first appearance
    let mut orbit_id = vec![usize::MAX; n];
    let mut n_orbits = 0;
    for i in 0..n {
        if orbit_id[i] != usize::MAX {
            continue;
        }
        let mut head = i;
        while let Some(p) = prev[head] {
            if p == i {
                break; // cannot happen (t_u strictly grows), but stay safe
            }
            head = p;
        }
        let id = n_orbits;
        n_orbits += 1;
        let mut cur = Some(head);
        while let Some(c) = cur {
            orbit_id[c] = id;
            cur = next[c];
        }
    }

    // primary classification: sweep each pair by increasing u_param and keep
    // the running minimum of s_param; a point is primary iff nothing before
    // it (strictly smaller u_param) is also strictly closer on the stable
    // side
    let mut primary = vec![false; n];
    for idxs in &pair_idxs {
        let mut min_s = f64::INFINITY;
        for &i in idxs {
            primary[i] = points[i].s_param <= min_s;
            min_s = min_s.min(points[i].s_param);
        }
    }

    Ok(Tangle {
        model,
        fp,
        curves,
        points,
        next,
        prev,
        orbit_id,
        n_orbits,
        primary,
        pair_idxs,
        warnings,
    })
}

/// The first intersection of a branch pair: the point minimizing the larger
/// of its two arclength coordinates, each normalized by the seed offset of
/// its curve. The normalization is monotone, so the minimizer is independent
/// of trace depth, and the minimizing point is always primary.
pub fn first_intersection(t: &Tangle, us: Side, ss: Side) -> Option<usize> {
    let u0 = t.u_curve(us).params[0];
    let s0 = t.s_curve(ss).params[0];
    t.pair_idxs[pair_slot(us, ss)]
        .iter()
        .copied()
        .min_by(|&a, &b| {
            let sa = (t.points[a].u_param / u0).max(t.points[a].s_param / s0);
            let sb = (t.points[b].u_param / u0).max(t.points[b].s_param / s0);
            sa.partial_cmp(&sb).unwrap()
        })
}

/// One representative per primary orbit of a branch pair, taken from the
/// fundamental window bounded by the first intersection p0 and its image:
/// u_param in (u(p0), u(phi p0)] and s_param in [s(phi p0), s(p0)). The
/// orbit of p0 itself is represented by phi(p0), which sits on the closed
/// corner of the window.
pub fn fundamental_representatives(t: &Tangle, us: Side, ss: Side) -> Result<Vec<usize>> {
    let Some(p0) = first_intersection(t, us, ss) else {
        return Ok(Vec::new());
    };
    if !t.primary[p0] {
        return Err(Error::Invariant(format!(
            "first intersection of pair ({}{}) is not primary",
            t.u_curve(us).id.label(),
            t.s_curve(ss).id.label()
        )));
    }
    let p1 = t.next[p0].ok_or_else(|| {
        Error::WindowInsufficient(format!(
            "image of the first intersection of pair ({},{}) was not detected; \
             increase depth or the box",
            t.u_curve(us).id.label(),
            t.s_curve(ss).id.label()
        ))
    })?;
    let (u_lo, u_hi) = (t.points[p0].u_param, t.points[p1].u_param);
    let (s_lo, s_hi) = (t.points[p1].s_param, t.points[p0].s_param);
    let mut reps: Vec<usize> = t.pair_idxs[pair_slot(us, ss)]
        .iter()
        .copied()
        .filter(|&i| t.primary[i])
        .filter(|&i| {
            let p = &t.points[i];
            p.u_param > u_lo && p.u_param <= u_hi && p.s_param >= s_lo && p.s_param < s_hi
        })
        .collect();
    reps.sort_by(|&a, &b| t.points[a].u_param.partial_cmp(&t.points[b].u_param).unwrap());

    // each primary orbit must enter the window exactly once
    let mut seen = std::collections::BTreeSet::new();
    for &r in &reps {
        if !seen.insert(t.orbit_id[r]) {
            return Err(Error::Invariant(format!(
                "orbit {} has two representatives in the fundamental window",
                t.orbit_id[r]
            )));
        }
    }
    Ok(reps)
}

/// Shared fixture for the intersection-level test suites: the cubic map at
/// a = 3.0 in a generous box, traced to the requested depth.
#[cfg(test)]
pub(crate) fn build_henon_tangle(depth: usize, delta: f64) -> Tangle {
    use crate::maps::find_fixed_point;
    use crate::trace::{trace_branch, Chart, TraceSettings};

    let model = MapModel::CubicHenon { a: 3.0 };
    let fp = find_fixed_point(&model, P2::new(0.01, 0.01)).unwrap();
    let bbox = crate::geom::BBox::new(-6.0, -6.0, 6.0, 6.0);
    let s = TraceSettings {
        delta,
        delta_inner: 1e-6,
        seed_c: 1.0,
        depth,
        h_max: 1e-2,
        theta_max: 0.1,
        max_vertices: 2_000_000,
        bbox,
    };
    let curves: Vec<_> = BranchId::all()
        .iter()
        .map(|&id| trace_branch(Chart::for_branch(model, &fp, id, 1e-6), &s).unwrap())
        .collect();
    let ts = TangleSettings::from_crossing(CrossingSettings::from_bbox(bbox));
    build_tangle(model, fp, curves, &ts).unwrap()
}
