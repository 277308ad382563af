//! Tracing the four half-branches of the invariant manifolds of a hyperbolic
//! fixed point as adaptively refined polylines.
//!
//! A branch is parametrized by a chart coordinate T > 0: the point at T is
//! obtained by placing a seed on the eigenline at distance T*lambda^-J from
//! the fixed point (inside the linear regime) and pushing it back out with J
//! iterations of the map (inverse map for stable branches, which are the
//! unstable branches of phi^-1 with the same expanding multiplier). The chart
//! satisfies V(lambda T) = phi(V(T)) by construction, so one fundamental
//! domain [T0, lambda T0] determines the whole branch and T doubles as an
//! iteration-invariant coordinate.

use crate::error::{Error, Result};
use crate::geom::{turn_angle, BBox, P2};
use crate::maps::{FixedPoint, MapModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ManifoldKind {
    Unstable,
    Stable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BranchId {
    pub kind: ManifoldKind,
    pub side: Side,
}

impl BranchId {
    pub fn label(&self) -> &'static str {
        match (self.kind, self.side) {
            (ManifoldKind::Unstable, Side::Plus) => "u+",
            (ManifoldKind::Unstable, Side::Minus) => "u-",
            (ManifoldKind::Stable, Side::Plus) => "s+",
            (ManifoldKind::Stable, Side::Minus) => "s-",
        }
    }

    pub fn all() -> [BranchId; 4] {
        [
            BranchId { kind: ManifoldKind::Unstable, side: Side::Plus },
            BranchId { kind: ManifoldKind::Unstable, side: Side::Minus },
            BranchId { kind: ManifoldKind::Stable, side: Side::Plus },
            BranchId { kind: ManifoldKind::Stable, side: Side::Minus },
        ]
    }
}

/// When intermediate iterates blow past this radius the orbit has left any
/// region where the trace could be meaningful. Generous on purpose: far
/// tail excursions between in-box folds reach enormous coordinates under
/// polynomial maps (each fold generation roughly cubes the peak), and the
/// curve returns to the region of interest afterwards, so the march must
/// survive them. Squares of coordinates this size still fit in f64.
const ESCAPE_RADIUS: f64 = 1e30;

/// Evaluator for one branch: knows which direction to iterate and along which
/// eigenvector to seed.
#[derive(Clone, Copy, Debug)]
pub struct Chart {
    pub model: MapModel,
    pub id: BranchId,
    pub x: P2,
    /// Expanding multiplier of the iteration direction (always > 1).
    pub lambda: f64,
    /// Signed unit eigenvector of the branch.
    pub e: P2,
    /// Seeds are dropped at distance <= delta_inner * lambda from the fixed
    /// point, deep inside the linear regime.
    pub delta_inner: f64,
    forward: bool,
}

impl Chart {
    pub fn for_branch(model: MapModel, fp: &FixedPoint, id: BranchId, delta_inner: f64) -> Chart {
        let (e0, forward) = match id.kind {
            ManifoldKind::Unstable => (fp.e_u, true),
            ManifoldKind::Stable => (fp.e_s, false),
        };
        let e = match id.side {
            Side::Plus => e0,
            Side::Minus => -e0,
        };
        Chart { model, id, x: fp.x, lambda: fp.lambda, e, delta_inner, forward }
    }

    fn step(&self, z: P2) -> P2 {
        if self.forward {
            self.model.apply(z)
        } else {
            self.model.apply_inv(z)
        }
    }

    fn step_back(&self, z: P2) -> P2 {
        if self.forward {
            self.model.apply_inv(z)
        } else {
            self.model.apply(z)
        }
    }

    fn step_jacobian(&self, z: P2) -> nalgebra::Matrix2<f64> {
        if self.forward {
            self.model.jacobian(z)
        } else {
            self.model.jacobian_inv(z)
        }
    }

    /// Number of iterations needed to reach chart parameter T from a seed in
    /// the linear regime. The tiny slack keeps exact powers of lambda from
    /// rounding up.
    pub fn iterations_for(&self, t: f64) -> usize {
        let j = ((t / self.delta_inner).ln() / self.lambda.ln() - 1e-12).ceil();
        j.max(0.0) as usize
    }

    pub fn eval(&self, t: f64) -> Result<P2> {
        Ok(self.eval_with_derivative(t)?.0)
    }

    /// Branch point V(T) and the chart velocity dV/dT, the latter from the
    /// chain rule along the seed orbit.
    pub fn eval_with_derivative(&self, t: f64) -> Result<(P2, P2)> {
        debug_assert!(t > 0.0);
        let j = self.iterations_for(t);
        let scale = self.lambda.powi(-(j as i32));
        let mut z = self.x + t * scale * self.e;
        let mut d = scale * self.e;
        for step in 0..j {
            d = self.step_jacobian(z) * d;
            z = self.step(z);
            if !z.x.is_finite()
                || !z.y.is_finite()
                || !d.x.is_finite()
                || !d.y.is_finite()
                || z.norm() > ESCAPE_RADIUS
            {
                return Err(Error::OrbitEscaped {
                    what: format!("branch point at T = {t:.6e}"),
                    steps: step + 1,
                });
            }
        }
        Ok((z, d))
    }

    /// Transverse residual of a branch point, measured by pulling it back
    /// into the linear regime and reading off the coordinate along the other
    /// eigendirection. Backward iteration re-amplifies any off-manifold
    /// component by lambda per step, which makes the test sharp -- but it
    /// amplifies floating-point noise the same way, so it is only decidable
    /// for points within `max_pullback_steps` iterations of the seed.
    /// (Deeper vertices are forward images of verified ones and forward
    /// iteration contracts the transverse direction.)
    pub fn transverse_residual(&self, t: f64, other_e: P2) -> Option<f64> {
        let j = self.iterations_for(t);
        if j > self.max_pullback_steps() {
            return None;
        }
        let mut z = self.eval(t).ok()?;
        for _ in 0..j {
            z = self.step_back(z);
        }
        let r = z - self.x;
        // coordinates in the (e, other_e) basis
        let det = self.e.x * other_e.y - self.e.y * other_e.x;
        let beta = (self.e.x * r.y - self.e.y * r.x) / det;
        Some(beta.abs())
    }

    pub fn max_pullback_steps(&self) -> usize {
        // keep lambda^n * 1e-16 safely under the 1e-10 tolerance
        ((3e5_f64).ln() / self.lambda.ln()).floor() as usize
    }
}

/// Check that the outer seed scale delta still sits in the regime where the
/// map is linear to second order: one application of the map must move
/// x + delta*e to x + lambda*delta*e up to c*delta^2.
pub fn seed_linearity_check(chart: &Chart, delta: f64, c: f64) -> Result<()> {
    let from = chart.x + delta * chart.e;
    let expect = chart.x + chart.lambda * delta * chart.e;
    let err = (chart.step(from) - expect).norm();
    let bound = c * delta * delta;
    if err > bound {
        return Err(Error::DeltaTooLarge { delta, err, bound });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
pub struct TraceSettings {
    /// Chart parameter of the first vertex (start of the traced window).
    pub delta: f64,
    /// Seed drop-off scale inside the linear regime.
    pub delta_inner: f64,
    /// Linearity-check constant for the seed contract.
    pub seed_c: f64,
    /// Number of fundamental domains beyond the first: T ranges over
    /// [delta, delta * lambda^(depth+1)].
    pub depth: usize,
    /// In-box chord length bound.
    pub h_max: f64,
    /// In-box turning bound per vertex (radians).
    pub theta_max: f64,
    pub max_vertices: usize,
    /// Region of interest; refinement is enforced on segments touching the
    /// slightly grown box, and crossing detection later restricts to it.
    pub bbox: BBox,
}

impl TraceSettings {
    pub fn t_max(&self, lambda: f64) -> f64 {
        self.delta * lambda.powi(self.depth as i32 + 1)
    }
}

/// A traced half-branch: vertices with their chart parameters and cumulative
/// arclength from the fixed point. `ts` is strictly increasing and `params`
/// strictly increasing with params[0] = |verts[0] - x| (the seed offset).
#[derive(Clone, Debug)]
pub struct BranchCurve {
    pub id: BranchId,
    pub chart: Chart,
    pub ts: Vec<f64>,
    pub verts: Vec<P2>,
    pub params: Vec<f64>,
    pub in_box: Vec<bool>,
}

impl BranchCurve {
    pub fn len(&self) -> usize {
        self.verts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verts.is_empty()
    }

    /// Index i such that ts[i] <= t < ts[i+1]; clamped at the ends.
    pub fn segment_of_t(&self, t: f64) -> usize {
        match self.ts.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(self.ts.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.ts.len() - 2),
        }
    }

    /// Insert a vertex at chart parameter t (position supplied by the
    /// caller, typically a refined crossing). No-op when t collides with an
    /// existing vertex parameter. Params must be rebuilt afterwards.
    pub fn insert_vertex(&mut self, t: f64, pos: P2, bbox: &BBox) {
        let i = match self.ts.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(_) => return,
            Err(i) => i,
        };
        self.ts.insert(i, t);
        self.verts.insert(i, pos);
        self.in_box.insert(i, bbox.grown(REFINE_MARGIN).contains(pos));
        self.params.clear();
    }

    pub fn rebuild_params(&mut self) {
        self.params = cumulative_params(&self.verts, self.chart.x);
    }

    /// Arclength interval (exclusive) -> vertex index range. Returns indices
    /// i with lo < params[i] < hi.
    pub fn verts_strictly_between(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let start = self.params.partition_point(|&p| p <= lo);
        let end = self.params.partition_point(|&p| p < hi);
        start..end
    }

    pub fn max_param(&self) -> f64 {
        *self.params.last().unwrap()
    }

    /// Arclength coordinate of an on-curve point with chart parameter `t`
    /// (exact when the point is a vertex; chord-accurate between brackets).
    pub fn param_of(&self, t: f64, pos: P2) -> f64 {
        let i = self.segment_of_t(t);
        self.params[i] + (pos - self.verts[i]).norm()
    }

    /// Smallest distance from the fixed point over vertices whose arclength
    /// parameter lies in [lo, hi] -- the guard that the classification
    /// windows use to confirm no crossings can hide between the seed offset
    /// and the start of the traced polyline.
    pub fn min_distance_to_x(&self, lo: f64, hi: f64) -> f64 {
        let x = self.chart.x;
        self.params
            .iter()
            .zip(&self.verts)
            .filter(|(p, _)| **p >= lo && **p <= hi)
            .map(|(_, v)| (v - x).norm())
            .fold(f64::INFINITY, f64::min)
    }
}

const REFINE_MARGIN: f64 = 0.5;
const INITIAL_PER_DOMAIN: usize = 8;

/// Densest allowed ratio between consecutive chart parameters of the
/// initial grid. The tangle repeats itself under the map with period
/// log(lambda) in log T, so the relative T-width of an in-box excursion of
/// the curve is the same at every depth; a grid this dense in log T puts
/// several vertices into each excursion wherever it happens, which the
/// box-local refinement rules then resolve fully. A multiplicative march
/// coarser than this can step straight over a deep re-entry whose
/// endpoints and chord all lie outside the box, silently losing crossings.
const T_RATIO_MAX: f64 = 1.002;

fn cumulative_params(verts: &[P2], x: P2) -> Vec<f64> {
    let mut out = Vec::with_capacity(verts.len());
    let mut acc = (verts[0] - x).norm();
    out.push(acc);
    for w in verts.windows(2) {
        acc += (w[1] - w[0]).norm();
        out.push(acc);
    }
    out
}

/// Trace one branch: geometric initial grid (INITIAL_PER_DOMAIN points per
/// fundamental domain), then alternate length- and angle-driven refinement
/// passes until every in-box segment is shorter than h_max and every in-box
/// corner turns less than theta_max. New parameters are geometric means, so
/// refinement respects the multiplicative structure of the chart.
pub fn trace_branch(chart: Chart, s: &TraceSettings) -> Result<BranchCurve> {
    seed_linearity_check(&chart, s.delta, s.seed_c)?;

    let id = chart.id;
    let mut ts: Vec<f64> = Vec::new();
    let per_domain = INITIAL_PER_DOMAIN
        .max((chart.lambda.ln() / T_RATIO_MAX.ln()).ceil() as usize);
    let total = (s.depth + 1) * per_domain;
    for i in 0..=total {
        ts.push(s.delta * chart.lambda.powf(i as f64 / per_domain as f64));
    }

    let active_box = s.bbox.grown(REFINE_MARGIN);
    let mut verts: Vec<P2> = Vec::with_capacity(ts.len());
    for &t in &ts {
        verts.push(chart.eval(t)?);
    }

    loop {
        let n = verts.len();
        if n > s.max_vertices {
            return Err(Error::TooManyVertices {
                branch: id.label().to_string(),
                cap: s.max_vertices,
                depth: s.depth,
            });
        }
        // a segment is box-local if it touches the grown box anywhere, not
        // merely at an endpoint: a long chord of a box-passing excursion
        // must be refined even when both of its endpoints are far away
        let active: Vec<bool> = (0..n - 1)
            .map(|i| active_box.intersects_segment(verts[i], verts[i + 1]))
            .collect();
        let mut split = vec![false; n - 1];
        for i in 0..n - 1 {
            if active[i] && (verts[i + 1] - verts[i]).norm() > s.h_max {
                split[i] = true;
            }
        }
        // the turning rule stays box-local: far from the box the chords are
        // astronomically long and their directions numerically meaningless,
        // so shape control out there would chase rounding noise; in-box
        // coverage is guaranteed by the density of the initial grid instead
        for i in 1..n - 1 {
            if !(active[i - 1] || active[i]) {
                continue;
            }
            let a = verts[i] - verts[i - 1];
            let b = verts[i + 1] - verts[i];
            if a.norm() == 0.0 || b.norm() == 0.0 {
                continue;
            }
            if turn_angle(a, b).abs() > s.theta_max {
                split[i - 1] = true;
                split[i] = true;
            }
        }
        if !split.iter().any(|&x| x) {
            break;
        }
        let mut new_ts = Vec::with_capacity(n + split.iter().filter(|&&x| x).count());
        let mut new_verts = Vec::with_capacity(new_ts.capacity());
        for i in 0..n - 1 {
            new_ts.push(ts[i]);
            new_verts.push(verts[i]);
            if split[i] {
                let tm = (ts[i] * ts[i + 1]).sqrt();
                if tm > ts[i] && tm < ts[i + 1] {
                    new_ts.push(tm);
                    new_verts.push(chart.eval(tm)?);
                }
            }
        }
        new_ts.push(ts[n - 1]);
        new_verts.push(verts[n - 1]);
        if new_ts.len() == ts.len() {
            break; // geometric means collapsed onto grid points: done
        }
        ts = new_ts;
        verts = new_verts;
    }

    let in_box: Vec<bool> = verts.iter().map(|v| active_box.contains(*v)).collect();
    let params = cumulative_params(&verts, chart.x);
    Ok(BranchCurve { id, chart, ts, verts, params, in_box })
}
