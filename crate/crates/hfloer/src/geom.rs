//! Small planar-geometry toolbox shared by the tracer, the crossing finder
//! and the index computations: proper segment crossings, turning angles, and
//! a uniform grid for the segment broad phase.

use nalgebra::Vector2;

pub type P2 = Vector2<f64>;

pub fn cross2(a: P2, b: P2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Signed turning angle from direction `a` to direction `b`, in (-pi, pi].
pub fn turn_angle(a: P2, b: P2) -> f64 {
    cross2(a, b).atan2(a.dot(&b))
}

/// Reduce an angle mod pi into the open interval (0, pi).
///
/// Used for the corner contributions of piecewise-smooth loops: a transversal
/// corner only sees the crossing angle of the two tangent lines, which is
/// well-defined mod pi. Exact multiples of pi (parallel tangents) are outside
/// the domain; callers guarantee transversality beforehand.
pub fn mod_into_0_pi(a: f64) -> f64 {
    let mut r = a % std::f64::consts::PI;
    if r <= 0.0 {
        r += std::f64::consts::PI;
    }
    r
}

/// Proper crossing of open segments (a0,a1) and (b0,b1).
///
/// Returns the parameters (t, u) with both strictly inside (0,1) such that
/// a0 + t(a1-a0) = b0 + u(b1-b0), or None when the segments are disjoint,
/// merely touch at an endpoint, or are parallel. Endpoint touches are
/// deliberately excluded: polyline vertices shared by adjacent segments must
/// not register as crossings.
pub fn seg_cross(a0: P2, a1: P2, b0: P2, b1: P2) -> Option<(f64, f64)> {
    let r = a1 - a0;
    let s = b1 - b0;
    let denom = cross2(r, s);
    if denom == 0.0 {
        return None;
    }
    let qp = b0 - a0;
    let t = cross2(qp, s) / denom;
    let u = cross2(qp, r) / denom;
    if t > 0.0 && t < 1.0 && u > 0.0 && u < 1.0 {
        Some((t, u))
    } else {
        None
    }
}

/// Does the closed polyline `verts[0] -> ... -> verts[n-1] -> verts[0]`
/// properly cross itself? Adjacent segments (sharing a vertex) are skipped.
/// Brute force over segment pairs; loops here are short (hundreds of
/// vertices), so O(n^2) is fine and keeps the predicate trivially auditable.
pub fn closed_polyline_self_crosses(verts: &[P2]) -> bool {
    let n = verts.len();
    if n < 4 {
        return false;
    }
    let seg = |i: usize| (verts[i], verts[(i + 1) % n]);
    for i in 0..n {
        for j in (i + 2)..n {
            // the last segment (n-1, 0) is adjacent to the first one
            if i == 0 && j == n - 1 {
                continue;
            }
            let (a0, a1) = seg(i);
            let (b0, b1) = seg(j);
            if seg_cross(a0, a1, b0, b1).is_some() {
                return true;
            }
        }
    }
    false
}

/// Total turning of a closed polyline divided by 2*pi (the winding of the
/// tangent). Corners are counted with their raw turn in (-pi, pi].
pub fn polyline_winding(verts: &[P2]) -> f64 {
    let n = verts.len();
    let mut total = 0.0;
    for i in 0..n {
        let prev = verts[(i + n - 1) % n];
        let here = verts[i];
        let next = verts[(i + 1) % n];
        total += turn_angle(here - prev, next - here);
    }
    total / (2.0 * std::f64::consts::PI)
}

#[derive(Clone, Copy, Debug)]
pub struct BBox {
    pub min: P2,
    pub max: P2,
}

impl BBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        BBox { min: P2::new(x0.min(x1), y0.min(y1)), max: P2::new(x0.max(x1), y0.max(y1)) }
    }

    pub fn contains(&self, p: P2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Box grown by `m` on every side.
    pub fn grown(&self, m: f64) -> BBox {
        BBox { min: P2::new(self.min.x - m, self.min.y - m), max: P2::new(self.max.x + m, self.max.y + m) }
    }

    /// Does the closed segment [a, b] meet the box? Slab clipping: intersect
    /// the parameter interval [0, 1] with the slabs of both axes.
    pub fn intersects_segment(&self, a: P2, b: P2) -> bool {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for (p, d, min, max) in [
            (a.x, b.x - a.x, self.min.x, self.max.x),
            (a.y, b.y - a.y, self.min.y, self.max.y),
        ] {
            if d == 0.0 {
                if p < min || p > max {
                    return false;
                }
            } else {
                let (t0, t1) = ((min - p) / d, (max - p) / d);
                lo = lo.max(t0.min(t1));
                hi = hi.min(t0.max(t1));
            }
        }
        lo <= hi
    }
}

/// Uniform grid over segment bounding boxes, restricted to a window of
/// interest. Each cell keeps the indices of the segments whose AABB overlaps
/// it; candidate pairs for the narrow phase are segments sharing a cell.
/// Cell ranges are clamped to the window so that segments reaching far
/// outside it (long chords of box-leaving excursions) cost a bounded number
/// of cells instead of one per crossed cell out to their remote endpoint.
pub struct SegmentGrid {
    cell: f64,
    window: BBox,
    map: std::collections::HashMap<(i64, i64), Vec<u32>>,
}

impl SegmentGrid {
    pub fn build(segs: &[(P2, P2)], cell: f64, window: BBox) -> Self {
        let mut grid = SegmentGrid { cell, window, map: std::collections::HashMap::new() };
        for (idx, (a, b)) in segs.iter().enumerate() {
            let ((i0, i1), (j0, j1)) = grid.clamped_ranges(*a, *b);
            for i in i0..=i1 {
                for j in j0..=j1 {
                    grid.map.entry((i, j)).or_default().push(idx as u32);
                }
            }
        }
        grid
    }

    /// Indices of stored segments whose cells overlap the AABB of (a, b).
    /// May contain duplicates; the caller's narrow phase is idempotent.
    pub fn candidates(&self, a: P2, b: P2, out: &mut Vec<u32>) {
        out.clear();
        let ((i0, i1), (j0, j1)) = self.clamped_ranges(a, b);
        for i in i0..=i1 {
            for j in j0..=j1 {
                if let Some(v) = self.map.get(&(i, j)) {
                    out.extend_from_slice(v);
                }
            }
        }
    }

    fn clamped_ranges(&self, a: P2, b: P2) -> ((i64, i64), (i64, i64)) {
        (
            cell_range(
                a.x.min(b.x).max(self.window.min.x),
                a.x.max(b.x).min(self.window.max.x),
                self.cell,
            ),
            cell_range(
                a.y.min(b.y).max(self.window.min.y),
                a.y.max(b.y).min(self.window.max.y),
                self.cell,
            ),
        )
    }
}

fn cell_range(a: f64, b: f64, cell: f64) -> (i64, i64) {
    let lo = (a.min(b) / cell).floor() as i64;
    let hi = (a.max(b) / cell).floor() as i64;
    (lo, hi.max(lo))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_segments_found_with_correct_params() {
        let (t, u) = seg_cross(
            P2::new(-1.0, 0.0),
            P2::new(1.0, 0.0),
            P2::new(0.5, -1.0),
            P2::new(0.5, 1.0),
        )
        .unwrap();
        assert!((t - 0.75).abs() < 1e-15);
        assert!((u - 0.5).abs() < 1e-15);
    }

    #[test]
    fn endpoint_touch_is_not_a_crossing() {
        assert!(seg_cross(
            P2::new(0.0, 0.0),
            P2::new(1.0, 0.0),
            P2::new(1.0, 0.0),
            P2::new(1.0, 1.0)
        )
        .is_none());
    }

    #[test]
    fn parallel_segments_do_not_cross() {
        assert!(seg_cross(
            P2::new(0.0, 0.0),
            P2::new(1.0, 0.0),
            P2::new(0.0, 1.0),
            P2::new(1.0, 1.0)
        )
        .is_none());
    }

    #[test]
    fn square_loop_is_simple_and_winds_once() {
        let sq = [
            P2::new(0.0, 0.0),
            P2::new(1.0, 0.0),
            P2::new(1.0, 1.0),
            P2::new(0.0, 1.0),
        ];
        assert!(!closed_polyline_self_crosses(&sq));
        assert!((polyline_winding(&sq) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn figure_eight_crosses_itself() {
        let fig8 = [
            P2::new(0.0, 0.0),
            P2::new(2.0, 2.0),
            P2::new(2.0, 0.0),
            P2::new(0.0, 2.0),
        ];
        assert!(closed_polyline_self_crosses(&fig8));
    }

    #[test]
    fn angle_reduction_lands_in_open_interval() {
        for a in [-7.0, -2.9, -0.5, 0.5, 1.5707963267948966, 3.2, 9.0] {
            let r = mod_into_0_pi(a);
            assert!(r > 0.0 && r < std::f64::consts::PI, "a={a} r={r}");
            // congruent mod pi
            let k = ((a - r) / std::f64::consts::PI).round();
            assert!((a - r - k * std::f64::consts::PI).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_reports_overlapping_segment() {
        let window = BBox::new(-2.0, -2.0, 2.0, 2.0);
        let segs = vec![(P2::new(0.0, 0.0), P2::new(1.0, 1.0))];
        let grid = SegmentGrid::build(&segs, 0.25, window);
        let mut out = Vec::new();
        grid.candidates(P2::new(0.4, 0.6), P2::new(0.6, 0.4), &mut out);
        assert!(out.contains(&0));
    }

    #[test]
    fn grid_stays_small_for_segments_reaching_far_outside_the_window() {
        let window = BBox::new(-1.0, -1.0, 1.0, 1.0);
        // a chord running out to 1e8 must not allocate cells along the way
        let segs = vec![(P2::new(0.5, 0.5), P2::new(1e8, 3e7))];
        let grid = SegmentGrid::build(&segs, 0.01, window);
        let mut out = Vec::new();
        grid.candidates(P2::new(0.4, 0.4), P2::new(0.9, 0.6), &mut out);
        assert!(out.contains(&0));
    }

    #[test]
    fn segment_box_intersection_covers_the_pass_through_case() {
        let b = BBox::new(-1.0, -1.0, 1.0, 1.0);
        // both endpoints far outside, chord passing through the box
        assert!(b.intersects_segment(P2::new(-10.0, -9.5), P2::new(10.0, 9.5)));
        // chord passing beside the box
        assert!(!b.intersects_segment(P2::new(-10.0, 3.0), P2::new(10.0, 3.2)));
        // endpoint inside
        assert!(b.intersects_segment(P2::new(0.0, 0.5), P2::new(0.0, 99.0)));
        // vertical segment left of the box
        assert!(!b.intersects_segment(P2::new(-2.0, -5.0), P2::new(-2.0, 5.0)));
        // collinear with an edge
        assert!(b.intersects_segment(P2::new(-3.0, 1.0), P2::new(3.0, 1.0)));
    }
}
