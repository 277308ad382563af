//! File artifacts: JSON with full-precision floats, CSV tables, and the
//! parsers that read matrix and complex files back in. Everything emitted
//! here is deterministic — same input, same bytes — except where a field is
//! explicitly documented as timing.

use crate::complex::{ChainComplexData, Generator};
use crate::error::{Error, Result};
use crate::homology::IntMatrix;
use crate::tangle::Tangle;
use crate::trace::Side;
use num_bigint::BigInt;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use std::collections::BTreeMap;
use std::io;

/// 17 significant digits: the shortest scientific form that round-trips
/// every f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty JSON with floats in full-precision scientific notation.
struct SciFormatter<'a> {
    inner: PrettyFormatter<'a>,
}

impl Formatter for SciFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object_value(writer)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let formatter = SciFormatter { inner: PrettyFormatter::new() };
    let mut ser = serde_json::Serializer::with_formatter(&mut out, formatter);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits utf-8"))
}

pub fn side_char(s: Side) -> char {
    match s {
        Side::Plus => '+',
        Side::Minus => '-',
    }
}

pub fn pair_label(us: Side, ss: Side) -> String {
    format!("u{}s{}", side_char(us), side_char(ss))
}

/// points.csv: every detected transverse homoclinic point.
pub fn points_csv(t: &Tangle) -> String {
    let mut out = String::from("branch_pair,x,y,u_param,s_param,sign,angle\n");
    for p in &t.points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            pair_label(p.u_side, p.s_side),
            fmt_f64(p.pos.x),
            fmt_f64(p.pos.y),
            fmt_f64(p.u_param),
            fmt_f64(p.s_param),
            p.det_sign,
            fmt_f64(p.angle),
        ));
    }
    out
}

/// One orbit class with its representative in the fundamental window.
#[derive(Clone, Debug, Serialize)]
pub struct OrbitClassRow {
    pub orbit: usize,
    pub point: usize,
    pub pair: String,
    pub x: f64,
    pub y: f64,
    pub u_param: f64,
    pub s_param: f64,
    /// Graded only when primary.
    pub maslov: Option<i32>,
    pub primary: bool,
}

/// classes.csv: one row per orbit class represented in the fundamental
/// window, primary or not.
pub fn classes_csv(classes: &[OrbitClassRow]) -> String {
    let mut out = String::from("orbit_id,rep_x,rep_y,u_param,s_param,maslov,primary\n");
    for c in classes {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            c.orbit,
            fmt_f64(c.x),
            fmt_f64(c.y),
            fmt_f64(c.u_param),
            fmt_f64(c.s_param),
            c.maslov.map_or(String::new(), |m| m.to_string()),
            c.primary,
        ));
    }
    out
}

/// curves.csv: vertex dump of all four traced branches.
pub fn curves_csv(t: &Tangle) -> String {
    let mut out = String::from("kind,side,index,x,y,param\n");
    for curve in &t.curves {
        let kind = match curve.id.kind {
            crate::trace::ManifoldKind::Unstable => "unstable",
            crate::trace::ManifoldKind::Stable => "stable",
        };
        for (i, (v, param)) in curve.verts.iter().zip(&curve.params).enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                kind,
                side_char(curve.id.side),
                i,
                fmt_f64(v.x),
                fmt_f64(v.y),
                fmt_f64(*param),
            ));
        }
    }
    out
}

#[derive(Serialize)]
struct GeneratorJson {
    id: usize,
    degree: i32,
    orbit: usize,
    pair: String,
    x: f64,
    y: f64,
    u_param: f64,
    s_param: f64,
    grading_residual: f64,
}

#[derive(Serialize)]
struct BoundaryJson {
    /// Source degree k; the matrix maps degree k onto degree k-1.
    degree: i32,
    rows: usize,
    cols: usize,
    matrix: Vec<Vec<i64>>,
}

#[derive(Serialize)]
struct ComplexJson {
    generators: Vec<GeneratorJson>,
    boundaries: Vec<BoundaryJson>,
}

fn matrix_to_rows(m: &IntMatrix) -> Vec<Vec<i64>> {
    (0..m.rows)
        .map(|i| {
            (0..m.cols)
                .map(|j| i64::try_from(&m[(i, j)]).expect("boundary entries are signs"))
                .collect()
        })
        .collect()
}

/// complex.json: the graded generators and dense boundary matrices.
pub fn complex_json(t: &Tangle, cx: &ChainComplexData) -> Result<String> {
    let generators = cx
        .generators
        .iter()
        .enumerate()
        .map(|(id, g): (usize, &Generator)| {
            let p = &t.points[g.point];
            GeneratorJson {
                id,
                degree: g.mu,
                orbit: g.orbit,
                pair: pair_label(g.pair.0, g.pair.1),
                x: p.pos.x,
                y: p.pos.y,
                u_param: p.u_param,
                s_param: p.s_param,
                grading_residual: g.mu_residual,
            }
        })
        .collect();
    let boundaries = cx
        .boundaries
        .iter()
        .map(|(&degree, m)| BoundaryJson {
            degree,
            rows: m.rows,
            cols: m.cols,
            matrix: matrix_to_rows(m),
        })
        .collect();
    to_json(&ComplexJson { generators, boundaries })
}

/// Read complex.json back: generator counts per degree and the boundary
/// matrices, shape-checked. This is the replay path: homology computed from
/// the file must match homology computed in memory.
pub fn parse_complex_json(text: &str) -> Result<(BTreeMap<i32, usize>, BTreeMap<i32, IntMatrix>)> {
    #[derive(serde::Deserialize)]
    struct GeneratorIn {
        degree: i32,
    }
    #[derive(serde::Deserialize)]
    struct BoundaryIn {
        degree: i32,
        rows: usize,
        cols: usize,
        matrix: Vec<Vec<i64>>,
    }
    #[derive(serde::Deserialize)]
    struct ComplexIn {
        generators: Vec<GeneratorIn>,
        boundaries: Vec<BoundaryIn>,
    }
    let parsed: ComplexIn =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("complex file: {e}")))?;
    let mut counts: BTreeMap<i32, usize> = BTreeMap::new();
    for g in &parsed.generators {
        *counts.entry(g.degree).or_insert(0) += 1;
    }
    let mut boundaries = BTreeMap::new();
    for b in parsed.boundaries {
        if b.matrix.len() != b.rows || b.matrix.iter().any(|r| r.len() != b.cols) {
            return Err(Error::Config(format!(
                "complex file: boundary at degree {} does not match its declared shape",
                b.degree
            )));
        }
        let expect_rows = counts.get(&(b.degree - 1)).copied().unwrap_or(0);
        let expect_cols = counts.get(&b.degree).copied().unwrap_or(0);
        if b.rows != expect_rows || b.cols != expect_cols {
            return Err(Error::Config(format!(
                "complex file: boundary at degree {} is {}x{} but the generator lists \
                 give {}x{}",
                b.degree, b.rows, b.cols, expect_rows, expect_cols
            )));
        }
        if boundaries.insert(b.degree, IntMatrix::from_rows_i64(b.matrix)?).is_some() {
            return Err(Error::Config(format!(
                "complex file: two boundaries for degree {}",
                b.degree
            )));
        }
    }
    Ok((counts, boundaries))
}

/// Read a standalone matrix file: either a bare JSON array of integer rows
/// or an object with a "matrix" field holding one.
pub fn parse_matrix_json(text: &str) -> Result<IntMatrix> {
    #[derive(serde::Deserialize)]
    #[serde(untagged)]
    enum MatrixIn {
        Bare(Vec<Vec<i64>>),
        Tagged { matrix: Vec<Vec<i64>> },
    }
    let parsed: MatrixIn =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("matrix file: {e}")))?;
    let rows = match parsed {
        MatrixIn::Bare(r) | MatrixIn::Tagged { matrix: r } => r,
    };
    IntMatrix::from_rows_i64(rows)
}

/// The snf subcommand's output: everything needed to check u a v = d by
/// hand. Entries are decimal strings because unimodular transforms can
/// outgrow any fixed-width integer.
#[derive(Serialize)]
pub struct SnfJson {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub divisors: Vec<String>,
    pub d: Vec<Vec<String>>,
    pub u: Vec<Vec<String>>,
    pub v: Vec<Vec<String>>,
}

fn matrix_to_strings(m: &IntMatrix) -> Vec<Vec<String>> {
    (0..m.rows).map(|i| (0..m.cols).map(|j| m[(i, j)].to_string()).collect()).collect()
}

pub fn snf_json(a: &IntMatrix, s: &crate::homology::Snf) -> Result<String> {
    to_json(&SnfJson {
        rows: a.rows,
        cols: a.cols,
        rank: s.rank,
        divisors: s.divisors.iter().map(BigInt::to_string).collect(),
        d: matrix_to_strings(&s.d),
        u: matrix_to_strings(&s.u),
        v: matrix_to_strings(&s.v),
    })
}
