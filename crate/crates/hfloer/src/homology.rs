//! Integer linear algebra for the chain complex: dense BigInt matrices,
//! Smith normal form with invertible transformation tracking, an
//! independently coded reduction oracle, rational rank by fraction
//! elimination, homology groups with torsion, and the Morse-type
//! count-versus-rank report.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        IntMatrix { rows, cols, data: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IntMatrix::zero(n, n);
        for i in 0..n {
            m[(i, i)] = BigInt::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<i64>>) -> Self {
        Self::from_rows_i64(rows).expect("ragged rows")
    }

    /// Fallible constructor for matrices read from files.
    pub fn from_rows_i64(rows: Vec<Vec<i64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if rows.iter().any(|x| x.len() != c) {
            return Err(Error::Config("matrix rows have unequal lengths".into()));
        }
        Ok(IntMatrix { rows: r, cols: c, data: rows.into_iter().flatten().map(BigInt::from).collect() })
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows, "shape mismatch");
        let mut out = IntMatrix::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let term = a * &other[(k, j)];
                    out[(i, j)] += term;
                }
            }
        }
        out
    }

    pub fn submatrix_rows(&self, from: usize) -> IntMatrix {
        let mut out = IntMatrix::zero(self.rows - from, self.cols);
        for i in from..self.rows {
            for j in 0..self.cols {
                out[(i - from, j)] = self[(i, j)].clone();
            }
        }
        out
    }

    pub fn column(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// row[target] += k * row[source]
    fn add_row(&mut self, target: usize, source: usize, k: &BigInt) {
        if k.is_zero() {
            return;
        }
        for j in 0..self.cols {
            let term = k * &self[(source, j)];
            self[(target, j)] += term;
        }
    }

    /// col[target] += k * col[source]
    fn add_col(&mut self, target: usize, source: usize, k: &BigInt) {
        if k.is_zero() {
            return;
        }
        for i in 0..self.rows {
            let term = k * &self[(i, source)];
            self[(i, target)] += term;
        }
    }

    fn negate_row(&mut self, i: usize) {
        for j in 0..self.cols {
            let v = -self[(i, j)].clone();
            self[(i, j)] = v;
        }
    }

    fn negate_col(&mut self, j: usize) {
        for i in 0..self.rows {
            let v = -self[(i, j)].clone();
            self[(i, j)] = v;
        }
    }
}

impl std::ops::Index<(usize, usize)> for IntMatrix {
    type Output = BigInt;
    fn index(&self, (i, j): (usize, usize)) -> &BigInt {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut BigInt {
        &mut self.data[i * self.cols + j]
    }
}

/// Smith normal form decomposition u * a * v = d with unimodular u, v whose
/// inverses are accumulated alongside.
pub struct Snf {
    pub d: IntMatrix,
    pub u: IntMatrix,
    pub u_inv: IntMatrix,
    pub v: IntMatrix,
    pub v_inv: IntMatrix,
    /// Nonzero diagonal entries d1 | d2 | ... (positive).
    pub divisors: Vec<BigInt>,
    pub rank: usize,
}

/// Diagonalize by Euclidean row/column reduction, tracking the row
/// transforms in (u, u_inv) and the column transforms in (v, v_inv).
pub fn smith_normal_form(a: &IntMatrix) -> Snf {
    let mut d = a.clone();
    let (r, c) = (d.rows, d.cols);
    let mut u = IntMatrix::identity(r);
    let mut u_inv = IntMatrix::identity(r);
    let mut v = IntMatrix::identity(c);
    let mut v_inv = IntMatrix::identity(c);

    // elementary op wrappers keeping the inverses in sync:
    //   left multiply by E -> u = E u, u_inv = u_inv E^-1
    //   right multiply by E -> v = v E, v_inv = E^-1 v_inv
    macro_rules! row_swap {
        ($i:expr, $j:expr) => {{
            d.swap_rows($i, $j);
            u.swap_rows($i, $j);
            u_inv.swap_cols($i, $j);
        }};
    }
    macro_rules! col_swap {
        ($i:expr, $j:expr) => {{
            d.swap_cols($i, $j);
            v.swap_cols($i, $j);
            v_inv.swap_rows($i, $j);
        }};
    }
    macro_rules! row_add {
        ($t:expr, $s:expr, $k:expr) => {{
            let k = $k;
            d.add_row($t, $s, &k);
            u.add_row($t, $s, &k);
            u_inv.add_col($s, $t, &(-&k)); // right-multiplied by (I + k e_ts)^-1 = I - k e_ts
        }};
    }
    macro_rules! col_add {
        ($t:expr, $s:expr, $k:expr) => {{
            let k = $k;
            d.add_col($t, $s, &k);
            v.add_col($t, $s, &k);
            v_inv.add_row($s, $t, &(-&k)); // left-multiplied by the inverse, same negation
        }};
    }

    let n = r.min(c);
    let mut t = 0;
    while t < n {
        // smallest nonzero entry in the remaining block becomes the pivot
        let mut pivot: Option<(usize, usize)> = None;
        for i in t..r {
            for j in t..c {
                if !d[(i, j)].is_zero()
                    && pivot.is_none_or(|(pi, pj)| d[(i, j)].abs() < d[(pi, pj)].abs())
                {
                    pivot = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = pivot else { break };
        row_swap!(t, pi);
        col_swap!(t, pj);

        loop {
            // clear the pivot column and row by Euclidean steps
            let mut dirty = false;
            for i in t + 1..r {
                if !d[(i, t)].is_zero() {
                    let q = rounded_quotient(&d[(i, t)], &d[(t, t)]);
                    row_add!(i, t, -q);
                    if !d[(i, t)].is_zero() {
                        // remainder smaller than the pivot: promote it
                        row_swap!(t, i);
                        dirty = true;
                    }
                }
            }
            for j in t + 1..c {
                if !d[(t, j)].is_zero() {
                    let q = rounded_quotient(&d[(t, j)], &d[(t, t)]);
                    col_add!(j, t, -q);
                    if !d[(t, j)].is_zero() {
                        col_swap!(t, j);
                        dirty = true;
                    }
                }
            }
            if dirty {
                continue;
            }
            // divisibility: the pivot must divide the whole remaining block
            let mut fixed = true;
            'scan: for i in t + 1..r {
                for j in t + 1..c {
                    if !(&d[(i, j)] % &d[(t, t)]).is_zero() {
                        row_add!(t, i, BigInt::one());
                        fixed = false;
                        break 'scan;
                    }
                }
            }
            if fixed {
                break;
            }
        }
        if d[(t, t)].is_negative() {
            d.negate_row(t);
            u.negate_row(t);
            u_inv.negate_col(t);
        }
        t += 1;
    }

    let divisors: Vec<BigInt> =
        (0..n).map(|i| d[(i, i)].clone()).filter(|x| !x.is_zero()).collect();
    let rank = divisors.len();
    Snf { d, u, u_inv, v, v_inv, divisors, rank }
}

/// Nearest-integer quotient, which makes the Euclidean remainder at most
/// half the divisor.
fn rounded_quotient(a: &BigInt, b: &BigInt) -> BigInt {
    let two = BigInt::from(2);
    let (q, rem) = num_integer::Integer::div_mod_floor(a, b);
    if &(rem * two) > &b.abs() {
        q + BigInt::one()
    } else {
        q
    }
}

/// Structural self-check of a decomposition: u a v = d, u u_inv = 1,
/// v v_inv = 1, d diagonal with a divisibility chain.
pub fn verify_snf(a: &IntMatrix, s: &Snf) -> Result<()> {
    if s.u.mul(a).mul(&s.v) != s.d {
        return Err(Error::Invariant("normal form mismatch: u a v != d".into()));
    }
    if s.u.mul(&s.u_inv) != IntMatrix::identity(a.rows)
        || s.v.mul(&s.v_inv) != IntMatrix::identity(a.cols)
    {
        return Err(Error::Invariant("transform inverses do not invert".into()));
    }
    for i in 0..s.d.rows {
        for j in 0..s.d.cols {
            if i != j && !s.d[(i, j)].is_zero() {
                return Err(Error::Invariant("normal form is not diagonal".into()));
            }
        }
    }
    for w in s.divisors.windows(2) {
        if !(&w[1] % &w[0]).is_zero() {
            return Err(Error::Invariant("divisor chain broken".into()));
        }
    }
    Ok(())
}

/// Independent reduction used as the test oracle: no transform tracking,
/// different control flow (explicit gcd-style shrinking per block, then a
/// divisibility sweep over the collected diagonal).
pub fn invariant_factors_naive(a: &IntMatrix) -> Vec<BigInt> {
    let mut m = a.clone();
    let (r, c) = (m.rows, m.cols);
    let mut diag: Vec<BigInt> = Vec::new();
    let mut t = 0;
    while t < r.min(c) {
        let mut pivot: Option<(usize, usize)> = None;
        for i in t..r {
            for j in t..c {
                if !m[(i, j)].is_zero()
                    && pivot.is_none_or(|(pi, pj)| m[(i, j)].abs() < m[(pi, pj)].abs())
                {
                    pivot = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = pivot else { break };
        m.swap_rows(t, pi);
        m.swap_cols(t, pj);
        loop {
            let mut clean = true;
            for i in t + 1..r {
                if !m[(i, t)].is_zero() {
                    let q = rounded_quotient(&m[(i, t)], &m[(t, t)]);
                    m.add_row(i, t, &(-q));
                    if !m[(i, t)].is_zero() {
                        m.swap_rows(t, i);
                        clean = false;
                    }
                }
            }
            for j in t + 1..c {
                if !m[(t, j)].is_zero() {
                    let q = rounded_quotient(&m[(t, j)], &m[(t, t)]);
                    m.add_col(j, t, &(-q));
                    if !m[(t, j)].is_zero() {
                        m.swap_cols(t, j);
                        clean = false;
                    }
                }
            }
            if clean {
                break;
            }
        }
        diag.push(m[(t, t)].abs());
        t += 1;
    }
    diag.retain(|x| !x.is_zero());
    // enforce the divisibility chain by gcd/lcm swaps
    let n = diag.len();
    for i in 0..n {
        for j in i + 1..n {
            if !(&diag[j] % &diag[i]).is_zero() {
                let g = num_integer::Integer::gcd(&diag[i], &diag[j]);
                let l = &diag[i] * &diag[j] / &g;
                diag[i] = g;
                diag[j] = l;
            }
        }
    }
    diag
}

/// Rank over the rationals by plain fraction Gaussian elimination;
/// independent of everything above.
pub fn rational_rank(a: &IntMatrix) -> usize {
    let mut m: Vec<Vec<BigRational>> = (0..a.rows)
        .map(|i| (0..a.cols).map(|j| BigRational::from(a[(i, j)].clone())).collect())
        .collect();
    let mut rank = 0;
    let mut col = 0;
    while rank < a.rows && col < a.cols {
        let Some(pivot_row) = (rank..a.rows).find(|&i| !m[i][col].is_zero()) else {
            col += 1;
            continue;
        };
        m.swap(rank, pivot_row);
        let p = m[rank][col].clone();
        for i in 0..a.rows {
            if i != rank && !m[i][col].is_zero() {
                let f = &m[i][col] / &p;
                for j in col..a.cols {
                    let x = &m[rank][j] * &f;
                    m[i][j] -= x;
                }
            }
        }
        rank += 1;
        col += 1;
    }
    rank
}

/// Columns of v beyond the rank form a basis of the kernel (saturated, since
/// v is unimodular).
pub fn kernel_basis(a: &IntMatrix, s: &Snf) -> IntMatrix {
    let k = a.cols - s.rank;
    let mut out = IntMatrix::zero(a.cols, k);
    for j in 0..k {
        for i in 0..a.cols {
            out[(i, j)] = s.v[(i, s.rank + j)].clone();
        }
    }
    out
}

/// One degree of the homology of a chain complex.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct HomologyGroup {
    pub degree: i32,
    pub generators: usize,
    pub boundary_rank_out: usize,
    pub boundary_rank_in: usize,
    pub rank: usize,
    /// Invariant factors > 1 of the torsion subgroup (empty = free).
    pub torsion: Vec<i64>,
}

/// Homology of a complex given as generator counts per degree and boundary
/// matrices d_k: C_k -> C_(k-1). Degrees not present are zero.
pub fn homology(counts: &BTreeMap<i32, usize>, boundaries: &BTreeMap<i32, IntMatrix>) -> Result<Vec<HomologyGroup>> {
    let count = |k: i32| counts.get(&k).copied().unwrap_or(0);
    let matrix = |k: i32| -> IntMatrix {
        boundaries
            .get(&k)
            .cloned()
            .unwrap_or_else(|| IntMatrix::zero(count(k - 1), count(k)))
    };

    // shape and composition checks
    for (&k, m) in boundaries {
        if m.rows != count(k - 1) || m.cols != count(k) {
            return Err(Error::Invariant(format!(
                "boundary at degree {k} has shape {}x{} but the complex needs {}x{}",
                m.rows,
                m.cols,
                count(k - 1),
                count(k)
            )));
        }
        if count(k - 2) > 0 && count(k) > 0 {
            let square = matrix(k - 1).mul(m);
            if !square.is_zero() {
                return Err(Error::Invariant(format!(
                    "boundary does not square to zero between degrees {k} and {}",
                    k - 2
                )));
            }
        }
    }

    let mut out = Vec::new();
    let degrees: Vec<i32> = counts.keys().copied().filter(|&k| count(k) > 0).collect();
    for &k in &degrees {
        let c_k = count(k);
        let d_k = matrix(k);
        let d_k1 = matrix(k + 1);
        let snf_k = smith_normal_form(&d_k);
        verify_snf(&d_k, &snf_k)?;
        let snf_k1 = smith_normal_form(&d_k1);
        verify_snf(&d_k1, &snf_k1)?;
        let r_out = snf_k.rank;
        let r_in = snf_k1.rank;
        let rank = c_k - r_out - r_in;

        // torsion from the presentation of ker d_k by im d_(k+1): express a
        // basis of the image in kernel coordinates using v_inv of d_k
        let torsion: Vec<i64> = if r_in == 0 || c_k == 0 {
            Vec::new()
        } else {
            let mut image = IntMatrix::zero(c_k, r_in);
            for j in 0..r_in {
                // d_(k+1) * (column j of v of its own snf) has entries
                // divisor_j * (column j of u_inv); build it directly
                for i in 0..c_k {
                    image[(i, j)] = &snf_k1.u_inv[(i, j)] * &snf_k1.divisors[j];
                }
            }
            let coords = snf_k.v_inv.mul(&image);
            for i in 0..r_out {
                for j in 0..r_in {
                    if !coords[(i, j)].is_zero() {
                        return Err(Error::Invariant(
                            "image of the boundary is not contained in the kernel".into(),
                        ));
                    }
                }
            }
            let presentation = coords.submatrix_rows(r_out);
            let pres_snf = smith_normal_form(&presentation);
            verify_snf(&presentation, &pres_snf)?;
            if pres_snf.rank != r_in {
                return Err(Error::Invariant("presentation rank disagrees with image rank".into()));
            }
            pres_snf
                .divisors
                .iter()
                .filter(|x| **x > BigInt::one())
                .map(|x| i64::try_from(x).expect("torsion factor fits in i64"))
                .collect()
        };

        out.push(HomologyGroup {
            degree: k,
            generators: c_k,
            boundary_rank_out: r_out,
            boundary_rank_in: r_in,
            rank,
            torsion,
        });
    }
    Ok(out)
}

/// One weak inequality instance: rank <= count in a single degree.
#[derive(Clone, Debug, serde::Serialize)]
pub struct MorseWeak {
    pub degree: i32,
    pub count: usize,
    pub rank: usize,
    pub ok: bool,
}

/// One alternating partial-sum instance:
/// sum over k <= upto of (-1)^(upto-k) (count_k - rank_k) >= 0.
#[derive(Clone, Debug, serde::Serialize)]
pub struct MorseAlternating {
    pub upto: i32,
    pub sum: i64,
    pub ok: bool,
}

/// The count-versus-rank inequalities relating generator counts to homology
/// ranks: every weak instance, every alternating partial sum, and the Euler
/// equality.
#[derive(Clone, Debug, serde::Serialize)]
pub struct MorseReport {
    pub degrees: Vec<i32>,
    pub counts: Vec<usize>,
    pub ranks: Vec<usize>,
    pub weak: Vec<MorseWeak>,
    pub alternating: Vec<MorseAlternating>,
    pub weak_ok: bool,
    pub alternating_ok: bool,
    pub euler_counts: i64,
    pub euler_ranks: i64,
    pub euler_ok: bool,
    pub total_count: usize,
    pub torsion_free: bool,
}

pub fn morse_report(counts: &BTreeMap<i32, usize>, groups: &[HomologyGroup]) -> MorseReport {
    let lo = counts.keys().copied().min().unwrap_or(0).min(-3);
    let hi = counts.keys().copied().max().unwrap_or(0).max(3);
    let degrees: Vec<i32> = (lo..=hi).collect();
    let count = |k: i32| counts.get(&k).copied().unwrap_or(0);
    let rank = |k: i32| groups.iter().find(|g| g.degree == k).map_or(0, |g| g.rank);

    let weak: Vec<MorseWeak> = degrees
        .iter()
        .map(|&k| MorseWeak { degree: k, count: count(k), rank: rank(k), ok: rank(k) <= count(k) })
        .collect();
    let alternating: Vec<MorseAlternating> = degrees
        .iter()
        .map(|&l| {
            let mut sum: i64 = 0;
            for k in lo..=l {
                let diff = count(k) as i64 - rank(k) as i64;
                let sign = if (l - k) % 2 == 0 { 1 } else { -1 };
                sum += sign * diff;
            }
            MorseAlternating { upto: l, sum, ok: sum >= 0 }
        })
        .collect();
    let euler_counts: i64 = degrees
        .iter()
        .map(|&k| (if k.rem_euclid(2) == 0 { 1i64 } else { -1 }) * count(k) as i64)
        .sum();
    let euler_ranks: i64 = degrees
        .iter()
        .map(|&k| (if k.rem_euclid(2) == 0 { 1i64 } else { -1 }) * rank(k) as i64)
        .sum();
    MorseReport {
        counts: degrees.iter().map(|&k| count(k)).collect(),
        ranks: degrees.iter().map(|&k| rank(k)).collect(),
        degrees,
        weak_ok: weak.iter().all(|w| w.ok),
        alternating_ok: alternating.iter().all(|a| a.ok),
        weak,
        alternating,
        euler_counts,
        euler_ranks,
        euler_ok: euler_counts == euler_ranks,
        total_count: counts.values().sum(),
        torsion_free: groups.iter().all(|g| g.torsion.is_empty()),
    }
}
