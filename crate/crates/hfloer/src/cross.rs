//! Finding and polishing the transversal crossings of an unstable and a
//! stable branch curve.
//!
//! Detection runs on the polylines (uniform-grid broad phase, exact proper
//! segment crossing narrow phase), then every hit is polished by a Newton
//! iteration directly on the two chart parameters, so the reported point is
//! a genuine intersection of the smooth curves rather than of their chords.
//! Polished crossings are re-anchored into both polylines by inserting a
//! pair of on-curve bracket vertices around the crossing, close enough that
//! the chord passes within 1e-10 of it; the crossing stays a proper crossing
//! of the refined polylines, so a second detection pass reproduces the set.

use crate::error::{Error, Result};
use crate::geom::{cross2, seg_cross, BBox, SegmentGrid, P2};
use crate::trace::BranchCurve;

#[derive(Clone, Copy, Debug)]
pub struct CrossingSettings {
    pub bbox: BBox,
    /// Broad-phase cell size; anything comparable to h_max works.
    pub grid_cell: f64,
    /// Crossings with angle below this are rejected as near-tangencies.
    pub alpha_min: f64,
    /// Two crossings within this relative distance in both chart parameters
    /// are the same point seen twice.
    pub dedup_rel: f64,
    /// Arc half-width of the bracket vertices planted around each polished
    /// crossing.
    pub bracket_halfwidth: f64,
    pub newton_max_iter: usize,
    /// Hard acceptance bound on the polished residual |U(Tu) - S(Ts)|.
    pub residual_max: f64,
}

impl CrossingSettings {
    pub fn from_bbox(bbox: BBox) -> Self {
        CrossingSettings {
            bbox,
            grid_cell: 2e-2,
            alpha_min: 1e-3,
            dedup_rel: 1e-9,
            bracket_halfwidth: 1e-6,
            newton_max_iter: 30,
            residual_max: 1e-11,
        }
    }
}

/// A polished transversal crossing of one unstable and one stable branch.
#[derive(Clone, Copy, Debug)]
pub struct Crossing {
    pub pos: P2,
    pub t_u: f64,
    pub t_s: f64,
    /// Unit tangents of the two curves at the crossing.
    pub dir_u: P2,
    pub dir_s: P2,
    /// |dV/dT| of each chart at the crossing (arc speed).
    pub speed_u: f64,
    pub speed_s: f64,
    /// Crossing angle in (0, pi), measured from dir_u to dir_s.
    pub angle: f64,
    /// Sign of det(dir_u, dir_s).
    pub det_sign: i8,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawHit {
    pub u_seg: usize,
    pub s_seg: usize,
    pub t_frac: f64,
    pub u_frac: f64,
}

fn segment_touches_box(a: P2, b: P2, bbox: &BBox) -> bool {
    let lo_x = a.x.min(b.x);
    let hi_x = a.x.max(b.x);
    let lo_y = a.y.min(b.y);
    let hi_y = a.y.max(b.y);
    hi_x >= bbox.min.x && lo_x <= bbox.max.x && hi_y >= bbox.min.y && lo_y <= bbox.max.y
}

fn in_box_segments(curve: &BranchCurve, bbox: &BBox) -> Vec<usize> {
    (0..curve.len() - 1)
        .filter(|&i| segment_touches_box(curve.verts[i], curve.verts[i + 1], bbox))
        .collect()
}

/// Broad phase + narrow phase over the in-box polyline segments. Hits whose
/// crossing position falls outside the box are dropped: they come from long
/// chords of excursions the curves make far outside the region of interest.
pub fn detect_raw(u: &BranchCurve, s: &BranchCurve, bbox: &BBox, cell: f64) -> Vec<RawHit> {
    let u_segs = in_box_segments(u, bbox);
    let s_segs = in_box_segments(s, bbox);
    let s_geom: Vec<(P2, P2)> = s_segs.iter().map(|&i| (s.verts[i], s.verts[i + 1])).collect();
    let grid = SegmentGrid::build(&s_geom, cell, *bbox);

    let mut hits = Vec::new();
    let mut cand: Vec<u32> = Vec::new();
    for &iu in &u_segs {
        let a0 = u.verts[iu];
        let a1 = u.verts[iu + 1];
        grid.candidates(a0, a1, &mut cand);
        cand.sort_unstable();
        cand.dedup();
        for &c in &cand {
            let is_ = s_segs[c as usize];
            let (b0, b1) = s_geom[c as usize];
            if let Some((t, uu)) = seg_cross(a0, a1, b0, b1) {
                if bbox.contains(a0 + t * (a1 - a0)) {
                    hits.push(RawHit { u_seg: iu, s_seg: is_, t_frac: t, u_frac: uu });
                }
            }
        }
    }
    hits.sort_by(|a, b| (a.u_seg, a.s_seg).partial_cmp(&(b.u_seg, b.s_seg)).unwrap());
    hits
}

/// Quadratic reference detector sharing the narrow-phase predicate; the test
/// suite holds the grid version to this one.
pub fn detect_raw_brute(u: &BranchCurve, s: &BranchCurve, bbox: &BBox) -> Vec<RawHit> {
    let u_segs = in_box_segments(u, bbox);
    let s_segs = in_box_segments(s, bbox);
    let mut hits = Vec::new();
    for &iu in &u_segs {
        for &is_ in &s_segs {
            if let Some((t, uu)) =
                seg_cross(u.verts[iu], u.verts[iu + 1], s.verts[is_], s.verts[is_ + 1])
            {
                let pos = u.verts[iu] + t * (u.verts[iu + 1] - u.verts[iu]);
                if bbox.contains(pos) {
                    hits.push(RawHit { u_seg: iu, s_seg: is_, t_frac: t, u_frac: uu });
                }
            }
        }
    }
    hits.sort_by(|a, b| (a.u_seg, a.s_seg).partial_cmp(&(b.u_seg, b.s_seg)).unwrap());
    hits
}

/// Newton polish of one raw hit, working on the pair of chart parameters.
/// Falls back to bracket subdivision when Newton leaves the trust region.
pub fn refine_crossing(u: &BranchCurve, s: &BranchCurve, hit: &RawHit, cs: &CrossingSettings) -> Result<Crossing> {
    let (mut tu_lo, mut tu_hi) = (u.ts[hit.u_seg], u.ts[hit.u_seg + 1]);
    let (mut ts_lo, mut ts_hi) = (s.ts[hit.s_seg], s.ts[hit.s_seg + 1]);
    let mut tu = tu_lo + hit.t_frac * (tu_hi - tu_lo);
    let mut ts = ts_lo + hit.u_frac * (ts_hi - ts_lo);

    for _round in 0..12 {
        if let Some(c) = newton_polish(u, s, tu, ts, tu_lo * 0.5, tu_hi * 2.0, ts_lo * 0.5, ts_hi * 2.0, cs) {
            return Ok(c);
        }
        // Newton did not settle: cut both brackets at the geometric mean and
        // re-bracket on the four sub-chords
        let tu_m = (tu_lo * tu_hi).sqrt();
        let ts_m = (ts_lo * ts_hi).sqrt();
        let ua = u.chart.eval(tu_lo)?;
        let um = u.chart.eval(tu_m)?;
        let ub = u.chart.eval(tu_hi)?;
        let sa = s.chart.eval(ts_lo)?;
        let sm = s.chart.eval(ts_m)?;
        let sb = s.chart.eval(ts_hi)?;
        let mut found = false;
        'outer: for (ul, uv0, uv1) in [(0, ua, um), (1, um, ub)] {
            for (sl, sv0, sv1) in [(0, sa, sm), (1, sm, sb)] {
                if let Some((tf, uf)) = seg_cross(uv0, uv1, sv0, sv1) {
                    let (nu_lo, nu_hi) = if ul == 0 { (tu_lo, tu_m) } else { (tu_m, tu_hi) };
                    let (ns_lo, ns_hi) = if sl == 0 { (ts_lo, ts_m) } else { (ts_m, ts_hi) };
                    tu_lo = nu_lo;
                    tu_hi = nu_hi;
                    ts_lo = ns_lo;
                    ts_hi = ns_hi;
                    tu = tu_lo + tf * (tu_hi - tu_lo);
                    ts = ts_lo + uf * (ts_hi - ts_lo);
                    found = true;
                    break 'outer;
                }
            }
        }
        if !found {
            // the chord crossing dissolved under subdivision: tangential
            // near-miss, report it as a failed refinement at the midpoint
            let pos = u.chart.eval((tu_lo * tu_hi).sqrt())?;
            return Err(Error::RefinementFailed { x: pos.x, y: pos.y, residual: f64::NAN });
        }
    }
    let pos = u.chart.eval(tu)?;
    Err(Error::RefinementFailed { x: pos.x, y: pos.y, residual: f64::NAN })
}

#[allow(clippy::too_many_arguments)]
fn newton_polish(
    u: &BranchCurve,
    s: &BranchCurve,
    mut tu: f64,
    mut ts: f64,
    tu_min: f64,
    tu_max: f64,
    ts_min: f64,
    ts_max: f64,
    cs: &CrossingSettings,
) -> Option<Crossing> {
    for _ in 0..cs.newton_max_iter {
        let (pu, du) = u.chart.eval_with_derivative(tu).ok()?;
        let (ps, ds) = s.chart.eval_with_derivative(ts).ok()?;
        let f = pu - ps;
        let scale = 1.0 + pu.norm();
        if f.norm() <= 1e-14 * scale {
            return finish_crossing(tu, ts, pu, du, ds, f.norm(), cs);
        }
        // solve [du, -ds] [a, b]^T = -f
        let det = cross2(du, -ds);
        if det == 0.0 {
            return None;
        }
        let a = cross2(-f, -ds) / det;
        let b = cross2(du, -f) / det;
        tu += a;
        ts += b;
        if !(tu > tu_min && tu < tu_max && ts > ts_min && ts < ts_max) {
            return None;
        }
    }
    // converged slowly; accept if the residual is already below the hard bound
    let (pu, du) = u.chart.eval_with_derivative(tu).ok()?;
    let (ps, ds) = s.chart.eval_with_derivative(ts).ok()?;
    let f = (pu - ps).norm();
    if f <= cs.residual_max {
        return finish_crossing(tu, ts, pu, du, ds, f, cs);
    }
    None
}

fn finish_crossing(tu: f64, ts: f64, pos: P2, du: P2, ds: P2, residual: f64, cs: &CrossingSettings) -> Option<Crossing> {
    if residual > cs.residual_max {
        return None;
    }
    let speed_u = du.norm();
    let speed_s = ds.norm();
    let eu = du / speed_u;
    let es = ds / speed_s;
    let det = cross2(eu, es);
    let angle = det.abs().atan2(eu.dot(&es));
    Some(Crossing {
        pos,
        t_u: tu,
        t_s: ts,
        dir_u: eu,
        dir_s: es,
        speed_u,
        speed_s,
        angle,
        det_sign: if det >= 0.0 { 1 } else { -1 },
        residual,
    })
}

/// Merge duplicate sightings of the same crossing (relative distance below
/// `dedup_rel` in both chart parameters), keeping the smallest residual.
pub fn dedup_crossings(mut list: Vec<Crossing>, dedup_rel: f64) -> Vec<Crossing> {
    list.sort_by(|a, b| a.t_u.partial_cmp(&b.t_u).unwrap());
    let mut out: Vec<Crossing> = Vec::with_capacity(list.len());
    for c in list {
        let dup = out.iter_mut().rev().take_while(|k| (k.t_u - c.t_u).abs() <= dedup_rel * c.t_u).find(|k| {
            (k.t_s - c.t_s).abs() <= dedup_rel * c.t_s.max(k.t_s)
        });
        match dup {
            Some(k) => {
                if c.residual < k.residual {
                    *k = c;
                }
            }
            None => out.push(c),
        }
    }
    out
}

/// Full pass for one branch pair: detect, polish, reject near-tangencies,
/// dedup. Returns the surviving crossings sorted by t_u plus human-readable
/// warnings for whatever was rejected.
pub fn find_pair_crossings(u: &BranchCurve, s: &BranchCurve, cs: &CrossingSettings) -> Result<(Vec<Crossing>, Vec<String>)> {
    let raw = detect_raw(u, s, &cs.bbox, cs.grid_cell);
    let mut polished = Vec::with_capacity(raw.len());
    let mut warnings = Vec::new();
    for hit in &raw {
        match refine_crossing(u, s, hit, cs) {
            Ok(c) => {
                if c.angle < cs.alpha_min || c.angle > std::f64::consts::PI - cs.alpha_min {
                    warnings.push(format!(
                        "near tangency rejected at ({:.6}, {:.6}): angle {:.3e} below {:.1e} ({} x {})",
                        c.pos.x, c.pos.y, c.angle.min(std::f64::consts::PI - c.angle), cs.alpha_min,
                        u.id.label(), s.id.label(),
                    ));
                } else {
                    polished.push(c);
                }
            }
            Err(Error::RefinementFailed { x, y, .. }) => {
                // a chord crossing that dissolves under subdivision is a
                // tangency of the smooth curves at polyline resolution
                warnings.push(format!(
                    "near tangency rejected at ({x:.6}, {y:.6}): chord crossing dissolved under refinement ({} x {})",
                    u.id.label(), s.id.label(),
                ));
            }
            Err(e) => return Err(e),
        }
    }
    Ok((dedup_crossings(polished, cs.dedup_rel), warnings))
}

/// Plant a pair of on-curve vertices around chart parameter `t` so that the
/// polyline passes within ~1e-10 of the curve point at `t`. The half-width
/// adapts to the local curvature.
pub fn insert_bracket_vertices(curve: &mut BranchCurve, t: f64, speed: f64, bbox: &BBox) -> Result<()> {
    // curvature estimate from the turn of the chart velocity across 2*eps
    let eps = 1e-4 * t;
    let (_, d0) = curve.chart.eval_with_derivative(t - eps)?;
    let (_, d1) = curve.chart.eval_with_derivative(t + eps)?;
    let dd0 = d0 / d0.norm();
    let dd1 = d1 / d1.norm();
    let dturn = crate::geom::turn_angle(dd0, dd1).abs();
    let arc = 2.0 * eps * speed;
    let kappa = (dturn / arc).max(1e-6);
    let w = (2.0e-10 / kappa).sqrt().clamp(1e-9, 1e-6);
    let dt = (w / speed).max(t * 1e-13);
    for t_new in [t - dt, t + dt] {
        if t_new > 0.0 {
            let pos = curve.chart.eval(t_new)?;
            curve.insert_vertex(t_new, pos, bbox);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::BBox;
    use crate::maps::{find_fixed_point, MapModel};
    use crate::trace::{trace_branch, BranchId, Chart, ManifoldKind, Side, TraceSettings};

    fn henon_curves(depth: usize) -> (BranchCurve, BranchCurve) {
        let model = MapModel::CubicHenon { a: 3.0 };
        let fp = find_fixed_point(&model, P2::new(0.01, 0.01)).unwrap();
        let s = TraceSettings {
            delta: 0.05,
            delta_inner: 1e-6,
            seed_c: 1.0,
            depth,
            h_max: 1e-2,
            theta_max: 0.1,
            max_vertices: 2_000_000,
            bbox: BBox::new(-6.0, -6.0, 6.0, 6.0),
        };
        let cu = trace_branch(
            Chart::for_branch(model, &fp, BranchId { kind: ManifoldKind::Unstable, side: Side::Plus }, 1e-6),
            &s,
        )
        .unwrap();
        let cs_ = trace_branch(
            Chart::for_branch(model, &fp, BranchId { kind: ManifoldKind::Stable, side: Side::Plus }, 1e-6),
            &s,
        )
        .unwrap();
        (cu, cs_)
    }

    #[test]
    fn grid_detection_agrees_with_brute_force() {
        let (u, s) = henon_curves(7);
        let bbox = BBox::new(-6.0, -6.0, 6.0, 6.0);
        let fast = detect_raw(&u, &s, &bbox, 2e-2);
        let slow = detect_raw_brute(&u, &s, &bbox);
        assert!(!fast.is_empty());
        assert_eq!(fast, slow);
    }

    #[test]
    fn polished_crossings_sit_on_both_curves() {
        let (u, s) = henon_curves(7);
        let cs = CrossingSettings::from_bbox(BBox::new(-6.0, -6.0, 6.0, 6.0));
        let (crossings, _) = find_pair_crossings(&u, &s, &cs).unwrap();
        assert!(!crossings.is_empty());
        for c in &crossings {
            let pu = u.chart.eval(c.t_u).unwrap();
            let ps = s.chart.eval(c.t_s).unwrap();
            assert!((pu - ps).norm() < 1e-11);
            assert!((pu - c.pos).norm() < 1e-12);
            assert!(c.residual < 1e-11);
            assert!(c.angle > 1e-3 && c.angle < std::f64::consts::PI - 1e-3);
        }
    }

    #[test]
    fn bracket_insertion_puts_the_crossing_on_the_polyline() {
        let (mut u, mut s) = henon_curves(7);
        let cs = CrossingSettings::from_bbox(BBox::new(-6.0, -6.0, 6.0, 6.0));
        let (crossings, _) = find_pair_crossings(&u, &s, &cs).unwrap();
        let bbox = cs.bbox;
        for c in &crossings {
            insert_bracket_vertices(&mut u, c.t_u, c.speed_u, &bbox).unwrap();
            insert_bracket_vertices(&mut s, c.t_s, c.speed_s, &bbox).unwrap();
        }
        u.rebuild_params();
        s.rebuild_params();
        for c in &crossings {
            for (curve, t) in [(&u, c.t_u), (&s, c.t_s)] {
                let i = curve.segment_of_t(t);
                let (a, b) = (curve.verts[i], curve.verts[i + 1]);
                let ab = b - a;
                let tt = ((c.pos - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
                let dist = (c.pos - (a + tt * ab)).norm();
                assert!(dist < 1e-10, "crossing off the {} polyline by {dist:.2e}", curve.id.label());
            }
        }
    }

    #[test]
    fn second_detection_pass_reproduces_the_point_set() {
        let (mut u, mut s) = henon_curves(7);
        let cs = CrossingSettings::from_bbox(BBox::new(-6.0, -6.0, 6.0, 6.0));
        let (crossings, _) = find_pair_crossings(&u, &s, &cs).unwrap();
        for c in &crossings {
            insert_bracket_vertices(&mut u, c.t_u, c.speed_u, &cs.bbox).unwrap();
            insert_bracket_vertices(&mut s, c.t_s, c.speed_s, &cs.bbox).unwrap();
        }
        u.rebuild_params();
        s.rebuild_params();
        let (again, _) = find_pair_crossings(&u, &s, &cs).unwrap();
        assert_eq!(crossings.len(), again.len());
        for (a, b) in crossings.iter().zip(&again) {
            assert!((a.t_u - b.t_u).abs() < 1e-9 * a.t_u);
            assert!((a.t_s - b.t_s).abs() < 1e-9 * a.t_s);
        }
    }

    #[test]
    fn dedup_merges_float_twins_and_keeps_near_pairs() {
        let mk = |tu: f64, ts: f64, residual: f64| Crossing {
            pos: P2::new(0.0, 0.0),
            t_u: tu,
            t_s: ts,
            dir_u: P2::new(1.0, 0.0),
            dir_s: P2::new(0.0, 1.0),
            speed_u: 1.0,
            speed_s: 1.0,
            angle: 1.0,
            det_sign: 1,
            residual,
        };
        // identical up to 1e-12 relative: merged, smaller residual wins
        let merged = dedup_crossings(vec![mk(1.0, 2.0, 1e-12), mk(1.0 + 1e-12, 2.0 - 1e-12, 1e-14)], 1e-9);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].residual, 1e-14);
        // separated by 1e-5 relative: genuinely distinct crossings survive
        let kept = dedup_crossings(vec![mk(1.0, 2.0, 1e-12), mk(1.0 + 1e-5, 2.0 - 1e-5, 1e-12)], 1e-9);
        assert_eq!(kept.len(), 2);
        // same t_u but different t_s is never merged
        let kept2 = dedup_crossings(vec![mk(1.0, 2.0, 1e-12), mk(1.0, 3.0, 1e-12)], 1e-9);
        assert_eq!(kept2.len(), 2);
    }
}
