//! Orchestration: from a parsed config through the numbered stages to
//! homology and artifact files.
//!
//!   0  fixed point, hyperbolicity, seed and area contracts, manifolds
//!   1  homoclinic intersections and the orbit matching
//!   2  first intersections and fundamental windows
//!   3  orbit class table (primary classification)
//!   4  Maslov grading of the window representatives
//!   5  bigon counts and signs (and the optional wide scan)
//!   6  boundary matrices
//!   7  homology, torsion check, rank cross-check, count inequalities
//!
//! Errors escape wrapped with their step number; the error family decides
//! the exit code (geometry/window trouble vs theorem violation).

use crate::artifacts::{self, OrbitClassRow};
use crate::complex::{
    assemble_boundaries, collect_generators, wide_scan, ChainComplexData, WideScanRecord,
};
use crate::config::RunConfig;
use crate::error::{Error, Result, StepContext};
use crate::homology::{homology, morse_report, rational_rank, HomologyGroup, MorseReport};
use crate::maps::{find_fixed_point, max_area_deviation, FixedPoint};
use crate::tangle::{
    build_tangle, first_intersection, pair_slot, Tangle, ALL_PAIRS,
};
use crate::trace::{trace_branch, BranchCurve, BranchId, Chart};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// How far the anchored boundary scan reaches around each window
/// representative. The counted offsets provably stay within one step; the
/// rest of the range is the proven margin.
pub const BOUNDARY_SCAN: i64 = 4;

const AREA_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct StageTimings {
    pub trace_ms: u64,
    pub intersections_ms: u64,
    pub grading_ms: u64,
    pub boundary_ms: u64,
    pub homology_ms: u64,
    pub total_ms: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct WideScanSummary {
    pub reach: i64,
    pub probes: usize,
    pub bigons_found: usize,
    pub refuted_by_window: usize,
    pub refuted_by_geometry: usize,
}

/// The run summary serialized as report.json. Every field except timing is
/// deterministic.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub model: String,
    pub lambda: f64,
    pub fixed_point: [f64; 2],
    pub pair_labels: [String; 4],
    pub points_per_pair: [usize; 4],
    pub total_points: usize,
    pub total_orbits: usize,
    pub classes_in_window: usize,
    pub primary_classes: usize,
    pub generator_counts: BTreeMap<i32, usize>,
    pub homology_ranks: BTreeMap<i32, usize>,
    pub torsion: BTreeMap<i32, Vec<i64>>,
    pub boundary_nonzero: usize,
    pub morse: MorseReport,
    pub wide_scan: Option<WideScanSummary>,
    pub warnings: Vec<String>,
    pub timing_ms: StageTimings,
}

pub struct RunOutcome {
    pub fp: FixedPoint,
    pub tangle: Tangle,
    pub complex: ChainComplexData,
    pub groups: Vec<HomologyGroup>,
    pub morse: MorseReport,
    pub classes: Vec<OrbitClassRow>,
    pub wide: Option<Vec<WideScanRecord>>,
    pub report: RunReport,
}

/// Steps 0 and 1: from model to matched tangle.
fn build_stage(cfg: &RunConfig) -> Result<(FixedPoint, Tangle, u64, u64)> {
    let t0 = Instant::now();
    let fp = find_fixed_point(&cfg.model, cfg.guess).step(0, "hyperbolic fixed point")?;

    let curves: Vec<BranchCurve> = BranchId::all()
        .par_iter()
        .map(|&id| trace_branch(Chart::for_branch(cfg.model, &fp, id, cfg.trace.delta_inner), &cfg.trace))
        .collect::<Result<_>>()
        .step(0, "manifold tracing")?;

    // the area-preservation contract, sampled along the traced curves
    let samples = curves
        .iter()
        .flat_map(|c| c.verts.iter().step_by(17).copied())
        .chain(std::iter::once(fp.x));
    let dev = max_area_deviation(&cfg.model, samples);
    if dev >= AREA_TOL {
        return Err(Error::NotAreaPreserving { dev, x: fp.x.x, y: fp.x.y }
            .at_step(0, "area preservation"));
    }
    let trace_ms = t0.elapsed().as_millis() as u64;

    let t1 = Instant::now();
    let tangle = build_tangle(cfg.model, fp, curves, &cfg.tangle)
        .step(1, "homoclinic intersections")?;
    let intersections_ms = t1.elapsed().as_millis() as u64;
    Ok((fp, tangle, trace_ms, intersections_ms))
}

/// Steps 2 and 3: fundamental windows and the orbit class table. Each row
/// is an orbit with its representative inside the unstable fundamental
/// window (u(p0), u(phi p0)] of its branch pair.
fn orbit_class_rows(t: &Tangle) -> Result<Vec<OrbitClassRow>> {
    let mut rows = Vec::new();
    for (us, ss) in ALL_PAIRS {
        let Some(p0) = first_intersection(t, us, ss) else { continue };
        let p1 = t.next[p0].ok_or_else(|| {
            Error::WindowInsufficient(format!(
                "image of the first intersection of pair {} was not detected",
                artifacts::pair_label(us, ss)
            ))
        })?;
        let (u_lo, u_hi) = (t.points[p0].u_param, t.points[p1].u_param);
        let mut seen = std::collections::BTreeSet::new();
        for &i in &t.pair_idxs[pair_slot(us, ss)] {
            let p = &t.points[i];
            if p.u_param > u_lo && p.u_param <= u_hi && seen.insert(t.orbit_id[i]) {
                rows.push(OrbitClassRow {
                    orbit: t.orbit_id[i],
                    point: i,
                    pair: artifacts::pair_label(us, ss),
                    x: p.pos.x,
                    y: p.pos.y,
                    u_param: p.u_param,
                    s_param: p.s_param,
                    maslov: None, // graded later, for primary rows only
                    primary: t.primary[i],
                });
            }
        }
    }
    Ok(rows)
}

/// Collapse repeated identical warnings into one line with a multiplicity,
/// keeping first-seen order.
fn dedup_warnings(raw: &[String]) -> Vec<String> {
    let mut order: Vec<&String> = Vec::new();
    let mut counts: BTreeMap<&String, usize> = BTreeMap::new();
    for w in raw {
        if *counts.entry(w).or_insert(0) == 0 {
            order.push(w);
        }
        *counts.get_mut(w).unwrap() += 1;
    }
    order
        .into_iter()
        .map(|w| match counts[w] {
            1 => w.clone(),
            n => format!("{w} (x{n})"),
        })
        .collect()
}

pub fn run_pipeline(cfg: &RunConfig) -> Result<RunOutcome> {
    let t_start = Instant::now();
    let (fp, tangle, trace_ms, intersections_ms) = build_stage(cfg)?;
    let mut warnings = dedup_warnings(&tangle.warnings);
    if tangle.points.is_empty() {
        warnings.push(
            "no homoclinic intersections detected; the complex is empty \
             (deepen the trace or enlarge the box if crossings are expected)"
                .to_string(),
        );
    }

    let t2 = Instant::now();
    let mut classes = orbit_class_rows(&tangle).step(2, "fundamental windows")?;
    let generators = collect_generators(&tangle).step(4, "index grading")?;
    for g in &generators {
        if let Some(row) = classes.iter_mut().find(|r| r.point == g.point) {
            row.maslov = Some(g.mu);
        }
    }
    let primary_classes = classes.iter().filter(|r| r.primary).count();
    if primary_classes != generators.len() {
        return Err(Error::Invariant(format!(
            "{} primary classes in the window but {} graded generators",
            primary_classes,
            generators.len()
        ))
        .at_step(3, "primary classification"));
    }
    let grading_ms = t2.elapsed().as_millis() as u64;

    let t5 = Instant::now();
    let cx = assemble_boundaries(&tangle, generators, BOUNDARY_SCAN)
        .step(6, "boundary matrices")?;
    let wide = if cfg.wide_scan {
        Some(wide_scan(&tangle, &cx, cfg.n_scan).step(5, "wide bigon scan")?)
    } else {
        None
    };
    let boundary_ms = t5.elapsed().as_millis() as u64;

    let t7 = Instant::now();
    let groups = homology(&cx.counts, &cx.boundaries).step(7, "homology")?;
    for g in &groups {
        if !g.torsion.is_empty() {
            return Err(Error::Invariant(format!(
                "torsion {:?} in degree {}",
                g.torsion, g.degree
            ))
            .at_step(7, "torsion check"));
        }
    }
    // independent rank oracle: rational elimination on every boundary
    for (&k, m) in &cx.boundaries {
        let snf_rank = groups
            .iter()
            .find(|g| g.degree == k)
            .map_or(0, |g| g.boundary_rank_out);
        if rational_rank(m) != snf_rank {
            return Err(Error::Invariant(format!(
                "rational rank of the boundary at degree {k} disagrees with its normal form"
            ))
            .at_step(7, "rank cross-check"));
        }
    }
    let morse = morse_report(&cx.counts, &groups);
    if !(morse.weak_ok && morse.alternating_ok && morse.euler_ok) {
        return Err(Error::Invariant("count-rank inequality failed".into())
            .at_step(7, "count inequalities"));
    }
    if morse.total_count != primary_classes {
        return Err(Error::Invariant(format!(
            "generator total {} does not match primary class count {}",
            morse.total_count, primary_classes
        ))
        .at_step(7, "count inequalities"));
    }
    let homology_ms = t7.elapsed().as_millis() as u64;

    let boundary_nonzero = cx.hits.len();
    let points_per_pair =
        [0, 1, 2, 3].map(|s| tangle.pair_idxs[s].len());
    let pair_labels =
        ALL_PAIRS.map(|(us, ss)| artifacts::pair_label(us, ss));
    let wide_summary = wide.as_ref().map(|records| WideScanSummary {
        reach: cfg.n_scan,
        probes: records.len(),
        bigons_found: 0, // a found bigon is a hard error above
        refuted_by_window: records.iter().filter(|r| !r.resolution.passed_windows()).count(),
        refuted_by_geometry: records.iter().filter(|r| r.resolution.passed_windows()).count(),
    });

    let report = RunReport {
        model: cfg.model.name().to_string(),
        lambda: fp.lambda,
        fixed_point: [fp.x.x, fp.x.y],
        pair_labels,
        points_per_pair,
        total_points: tangle.points.len(),
        total_orbits: tangle.n_orbits,
        classes_in_window: classes.len(),
        primary_classes,
        generator_counts: cx.counts.clone(),
        homology_ranks: groups.iter().map(|g| (g.degree, g.rank)).collect(),
        torsion: groups.iter().map(|g| (g.degree, g.torsion.clone())).collect(),
        boundary_nonzero,
        morse: morse.clone(),
        wide_scan: wide_summary,
        warnings,
        timing_ms: StageTimings {
            trace_ms,
            intersections_ms,
            grading_ms,
            boundary_ms,
            homology_ms,
            total_ms: t_start.elapsed().as_millis() as u64,
        },
    };

    Ok(RunOutcome { fp, tangle, complex: cx, groups, morse, classes, wide, report })
}

/// The dry run: stages 0 through 3 only — everything needed to judge
/// whether tracing parameters support the pair, without grading or algebra.
#[derive(Clone, Debug, Serialize)]
pub struct ValidateReport {
    pub model: String,
    pub lambda: f64,
    pub fixed_point: [f64; 2],
    pub pair_labels: [String; 4],
    pub points_per_pair: [usize; 4],
    pub first_intersection_found: [bool; 4],
    pub total_points: usize,
    pub total_orbits: usize,
    pub classes_in_window: usize,
    pub primary_in_window: usize,
    pub warnings: Vec<String>,
}

pub fn validate_pipeline(cfg: &RunConfig) -> Result<ValidateReport> {
    let (fp, tangle, _, _) = build_stage(cfg)?;
    let classes = orbit_class_rows(&tangle).step(2, "fundamental windows")?;
    Ok(ValidateReport {
        model: cfg.model.name().to_string(),
        lambda: fp.lambda,
        fixed_point: [fp.x.x, fp.x.y],
        pair_labels: ALL_PAIRS.map(|(us, ss)| artifacts::pair_label(us, ss)),
        points_per_pair: [0, 1, 2, 3].map(|s| tangle.pair_idxs[s].len()),
        first_intersection_found: ALL_PAIRS
            .map(|(us, ss)| first_intersection(&tangle, us, ss).is_some()),
        total_points: tangle.points.len(),
        total_orbits: tangle.n_orbits,
        classes_in_window: classes.len(),
        primary_in_window: classes.iter().filter(|r| r.primary).count(),
        warnings: dedup_warnings(&tangle.warnings),
    })
}

/// Write every artifact of a finished run into out_dir; returns the paths
/// written in order.
pub fn emit_artifacts(
    outcome: &RunOutcome,
    cfg: &RunConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    #[derive(Serialize)]
    struct HomologyJson<'a> {
        groups: &'a [HomologyGroup],
        morse: &'a MorseReport,
    }

    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, text: String| -> Result<()> {
        let path = out_dir.join(name);
        std::fs::write(&path, text)?;
        written.push(path);
        Ok(())
    };

    put("points.csv", artifacts::points_csv(&outcome.tangle))?;
    put("classes.csv", artifacts::classes_csv(&outcome.classes))?;
    put("complex.json", artifacts::complex_json(&outcome.tangle, &outcome.complex)?)?;
    put(
        "homology.json",
        artifacts::to_json(&HomologyJson { groups: &outcome.groups, morse: &outcome.morse })?,
    )?;
    put("report.json", artifacts::to_json(&outcome.report)?)?;
    put("tangle.svg", crate::svg::render_tangle_svg(&outcome.tangle, cfg.trace.bbox))?;
    if cfg.dump_curves {
        put("curves.csv", artifacts::curves_csv(&outcome.tangle))?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn henon_cfg(extra: &str) -> RunConfig {
        parse_config(&format!(
            "model = henon\na = 3.0\ndelta = 0.03\ndepth = 9\nbox = -6 -6 6 6\n{extra}"
        ))
        .unwrap()
    }

    #[test]
    fn full_run_reproduces_the_reference_structure() {
        let out = run_pipeline(&henon_cfg("")).unwrap();
        assert_eq!(out.report.primary_classes, 12);
        assert_eq!(out.report.generator_counts[&1], 2);
        assert_eq!(out.report.generator_counts[&2], 6);
        assert_eq!(out.report.generator_counts[&3], 4);
        assert_eq!(out.report.homology_ranks[&1], 1);
        assert_eq!(out.report.homology_ranks[&2], 2);
        assert_eq!(out.report.homology_ranks[&3], 1);
        assert!(out.report.torsion.values().all(|t| t.is_empty()));
        assert!(out.report.morse.weak_ok);
        assert!(out.wide.is_none());
        // classes table: primary rows carry gradings, and they are exactly
        // the generators
        let graded = out.classes.iter().filter(|c| c.maslov.is_some()).count();
        assert_eq!(graded, 12);
        assert!(out.classes.len() >= 12);
    }

    #[test]
    fn wide_scan_summary_lands_in_the_report() {
        let out = run_pipeline(&henon_cfg("wide_scan = true\nn_scan = 5\n")).unwrap();
        let w = out.report.wide_scan.as_ref().unwrap();
        assert_eq!(w.reach, 5);
        assert_eq!(w.bigons_found, 0);
        assert_eq!(w.probes, w.refuted_by_window + w.refuted_by_geometry);
        assert!(w.probes > 0);
    }

    #[test]
    fn too_shallow_a_trace_names_the_failing_step() {
        // depth 5 detects crossings but not the image of the first one:
        // the failure must carry the step label and the window exit family
        let cfg = parse_config("model = henon\na = 3.0\ndelta = 0.03\ndepth = 5\nbox = -6 -6 6 6\n")
            .unwrap();
        match run_pipeline(&cfg) {
            Err(e) => {
                assert_eq!(e.exit_code(), 3, "wrong family: {e}");
                let msg = e.to_string();
                assert!(msg.contains("step 2"), "{msg}");
                assert!(msg.contains("window insufficient"), "{msg}");
            }
            Ok(_) => panic!("depth 5 should not support the complex"),
        }
    }

    #[test]
    fn an_empty_tangle_succeeds_vacuously_with_a_warning() {
        // depth 1 traces too short an arc to meet the stable manifold at
        // all: zero crossings, zero homology, and a warning saying so
        let cfg = parse_config("model = henon\na = 3.0\ndelta = 0.03\ndepth = 1\nbox = -6 -6 6 6\n")
            .unwrap();
        let out = run_pipeline(&cfg).unwrap();
        assert_eq!(out.report.total_points, 0);
        assert_eq!(out.report.primary_classes, 0);
        assert!(out.report.homology_ranks.values().all(|&r| r == 0));
        assert!(out.report.warnings.iter().any(|w| w.contains("no homoclinic intersections")));
    }

    #[test]
    fn elliptic_model_fails_at_step_zero() {
        let cfg = parse_config("model = standard_map\nk = 1.2\nguess_x = 0.5\nguess_y = 0.0\n")
            .unwrap();
        match run_pipeline(&cfg) {
            Err(e) => {
                let msg = e.to_string();
                assert!(msg.contains("step 0"), "{msg}");
            }
            Ok(_) => panic!("the elliptic fixed point must be rejected"),
        }
    }

    #[test]
    fn validate_stops_before_grading() {
        let report = validate_pipeline(&henon_cfg("")).unwrap();
        assert_eq!(report.points_per_pair.iter().sum::<usize>(), report.total_points);
        assert!(report.first_intersection_found.iter().all(|&b| b));
        assert!(report.primary_in_window >= 12);
        assert!(report.lambda > 2.6 && report.lambda < 2.63);
    }

    #[test]
    fn artifacts_are_written_and_deterministic() {
        let cfg = henon_cfg("dump_curves = true\n");
        let out = run_pipeline(&cfg).unwrap();
        let dir1 = std::env::temp_dir().join("hfloer_test_artifacts_1");
        let dir2 = std::env::temp_dir().join("hfloer_test_artifacts_2");
        let w1 = emit_artifacts(&out, &cfg, &dir1).unwrap();
        assert_eq!(w1.len(), 7);

        // a second full pipeline run must give byte-identical files
        // (report.json excluded: it contains timing)
        let out2 = run_pipeline(&cfg).unwrap();
        emit_artifacts(&out2, &cfg, &dir2).unwrap();
        for name in ["points.csv", "classes.csv", "complex.json", "homology.json", "tangle.svg", "curves.csv"] {
            let a = std::fs::read(dir1.join(name)).unwrap();
            let b = std::fs::read(dir2.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between reruns");
        }
        std::fs::remove_dir_all(&dir1).ok();
        std::fs::remove_dir_all(&dir2).ok();
    }
}
