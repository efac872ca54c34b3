//! Degree-bounded ideal membership over prime fields.
//!
//! For a homogeneous target `t` of degree `d` and homogeneous generators
//! `g_i`, `t` lies in the ideal `⟨g_i⟩` iff it lies in the linear span of the
//! products `m·g_i` with `deg m + deg g_i = d`. Each product becomes one row
//! of a sparse coefficient matrix whose columns are the degree-`d` monomials,
//! and membership reduces to comparing ranks with and without the target.
//!
//! Ranks are computed mod several ~31-bit primes. `rank_p ≤ rank_ℚ` always,
//! so a rank increase mod `p` certifies non-membership over ℚ whenever
//! `rank_p` of the span equals its rational rank; agreement across every
//! prime is reported as evidence for that. A member verdict is evidence only.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{Monomial, SparsePolynomial};
use crate::tensor::Scalar;

/// Fixed primes below `2³¹`: `2³¹−1`, `2³¹−19`, `2³¹−61`.
pub const DEFAULT_PRIMES: [u32; 3] = [2_147_483_647, 2_147_483_629, 2_147_483_587];

/// Largest dense matrix (entries) the floating-point probe will factor.
pub const FLOAT_PROBE_MAX_ENTRIES: usize = 4_000_000;

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of monomials of degree `d` in `nvars` variables.
pub fn count_monomials(nvars: usize, d: u32) -> u64 {
    if nvars == 0 {
        return (d == 0) as u64;
    }
    binomial(nvars as u64 + d as u64 - 1, d as u64)
}

/// Streams the degree-`d` monomials in descending graded-lex order, i.e.
/// the sorted variable lists in ascending lexicographic order.
pub struct MonomialsOfDegree {
    nvars: u32,
    current: Option<Vec<u32>>,
}

pub fn monomials_of_degree(nvars: usize, d: u32) -> MonomialsOfDegree {
    let current = if nvars == 0 && d > 0 {
        None
    } else {
        Some(vec![0; d as usize])
    };
    MonomialsOfDegree {
        nvars: nvars as u32,
        current,
    }
}

impl Iterator for MonomialsOfDegree {
    type Item = Monomial;

    fn next(&mut self) -> Option<Monomial> {
        let cur = self.current.as_mut()?;
        let out = Monomial::from_vars(cur);
        // Advance: bump the last slot that can still grow, reset the tail.
        match cur.iter().rposition(|&v| v + 1 < self.nvars) {
            Some(i) => {
                let v = cur[i] + 1;
                cur[i..].iter_mut().for_each(|x| *x = v);
            }
            None => self.current = None,
        }
        Some(out)
    }
}

/// Column position of degree-`d` monomials within [`monomials_of_degree`].
pub struct MonomialIndex {
    nvars: usize,
    degree: u32,
    // multiset[k][r] = number of non-decreasing length-r sequences drawn
    // from k values.
    multiset: Vec<Vec<u64>>,
}

impl MonomialIndex {
    pub fn new(nvars: usize, degree: u32) -> Self {
        let d = degree as usize;
        let multiset = (0..=nvars)
            .map(|k| (0..=d).map(|r| count_monomials(k, r as u32)).collect())
            .collect();
        Self {
            nvars,
            degree,
            multiset,
        }
    }

    pub fn ncols(&self) -> u64 {
        self.multiset[self.nvars][self.degree as usize]
    }

    pub fn position(&self, m: &Monomial) -> u64 {
        debug_assert_eq!(m.degree(), self.degree);
        let d = self.degree as usize;
        let mut pos = 0u64;
        let mut lo = 0usize;
        for (i, v) in m.vars().enumerate() {
            let v = v as usize;
            let rest = d - i - 1;
            for u in lo..v {
                pos += self.multiset[self.nvars - u][rest];
            }
            lo = v;
        }
        pos
    }
}

fn mod_p(c: &BigInt, p: u32) -> u32 {
    let r = c % BigInt::from(p);
    let r = if r < BigInt::zero() { r + p } else { r };
    r.to_u32().expect("residue below modulus")
}

fn mul_mod(a: u32, b: u32, p: u32) -> u32 {
    ((a as u64 * b as u64) % p as u64) as u32
}

fn inv_mod(a: u32, p: u32) -> u32 {
    // Fermat: a^(p-2).
    let (mut base, mut exp, mut acc) = (a as u64, p as u64 - 2, 1u64);
    let m = p as u64;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        exp >>= 1;
    }
    acc as u32
}

/// Sparse row: `(column, residue)` pairs, columns strictly increasing.
pub type SparseRow = Vec<(u32, u32)>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimeFieldMatrix {
    modulus: u32,
    ncols: usize,
    rows: Vec<SparseRow>,
}

impl PrimeFieldMatrix {
    pub fn new(modulus: u32, ncols: usize, rows: Vec<SparseRow>) -> Result<Self> {
        for row in &rows {
            if row.windows(2).any(|w| w[0].0 >= w[1].0)
                || row.iter().any(|&(c, v)| c as usize >= ncols || v >= modulus)
            {
                return Err(Error::Precondition(
                    "rows need increasing in-range columns and reduced residues".into(),
                ));
            }
        }
        Ok(Self {
            modulus,
            ncols,
            rows,
        })
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Writes `row col value` lines (0-based), preceded by a
    /// `# rows cols modulus` header.
    pub fn write_triplets(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "# {} {} {}", self.nrows(), self.ncols, self.modulus)?;
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                writeln!(out, "{r} {c} {v}")?;
            }
        }
        Ok(())
    }

    pub fn write_triplets_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_triplets(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

fn poly_row(poly: &SparsePolynomial, shift: &Monomial, index: &MonomialIndex, p: u32) -> SparseRow {
    let mut row: SparseRow = poly
        .terms()
        .filter_map(|(m, c)| {
            let r = mod_p(c, p);
            (r != 0).then(|| (index.position(&m.mul(shift)) as u32, r))
        })
        .collect();
    row.sort_unstable_by_key(|&(c, _)| c);
    row
}

fn check_homogeneous(poly: &SparsePolynomial, what: &str) -> Result<u32> {
    poly.homogeneous_degree().ok_or_else(|| {
        Error::InvalidPolynomial(format!("{what} must be a nonzero homogeneous polynomial"))
    })
}

/// Rows `m·g` for every generator `g` and every monomial `m` of degree
/// `d − deg g`, reduced mod `p`.
pub fn span_matrix(gens: &[&SparsePolynomial], d: u32, p: u32) -> Result<PrimeFieldMatrix> {
    let nvars = gens.first().map_or(0, |g| g.nvars());
    let mut degrees = Vec::with_capacity(gens.len());
    for g in gens {
        let dg = check_homogeneous(g, "generator")?;
        if dg > d {
            return Err(Error::Precondition(format!(
                "generator of degree {dg} exceeds target degree {d}"
            )));
        }
        if g.nvars() != nvars {
            return Err(Error::DimensionMismatch("generators over different variable sets".into()));
        }
        degrees.push(dg);
    }
    let index = MonomialIndex::new(nvars, d);
    let ncols = usize::try_from(index.ncols())
        .ok()
        .filter(|&c| c <= u32::MAX as usize)
        .ok_or_else(|| Error::Precondition("too many columns".into()))?;
    let rows = gens
        .par_iter()
        .zip(&degrees)
        .flat_map_iter(|(g, &dg)| {
            monomials_of_degree(nvars, d - dg)
                .map(|m| poly_row(g, &m, &index, p))
                .collect::<Vec<_>>()
        })
        .filter(|r| !r.is_empty())
        .collect();
    Ok(PrimeFieldMatrix {
        modulus: p,
        ncols,
        rows,
    })
}

/// Row-echelon basis with one pivot row per leading column. Pivot rows are
/// monic; only leading terms are eliminated.
struct Echelon {
    p: u32,
    pivots: HashMap<u32, SparseRow>,
}

impl Echelon {
    fn new(p: u32) -> Self {
        Self {
            p,
            pivots: HashMap::new(),
        }
    }

    fn rank(&self) -> usize {
        self.pivots.len()
    }

    // row − c·pivot, skipping the shared leading entry.
    fn eliminate(&self, row: &[(u32, u32)], pivot: &[(u32, u32)], c: u32) -> SparseRow {
        let p = self.p;
        let mut out = Vec::with_capacity(row.len() + pivot.len());
        let (mut i, mut j) = (1, 1);
        while i < row.len() || j < pivot.len() {
            let take_row = j >= pivot.len() || (i < row.len() && row[i].0 < pivot[j].0);
            let take_piv = i >= row.len() || (j < pivot.len() && pivot[j].0 < row[i].0);
            if take_row {
                out.push(row[i]);
                i += 1;
            } else if take_piv {
                out.push((pivot[j].0, (p - mul_mod(c, pivot[j].1, p)) % p));
                j += 1;
            } else {
                let v = (row[i].1 + p - mul_mod(c, pivot[j].1, p)) % p;
                if v != 0 {
                    out.push((row[i].0, v));
                }
                i += 1;
                j += 1;
            }
        }
        out
    }

    /// Reduces until the leading column has no pivot; `None` if the row
    /// reduces to zero.
    fn reduce(&self, mut row: SparseRow) -> Option<SparseRow> {
        while let Some(&(col, c)) = row.first() {
            match self.pivots.get(&col) {
                Some(piv) => row = self.eliminate(&row, piv, c),
                None => return Some(row),
            }
        }
        None
    }

    fn insert(&mut self, row: SparseRow) -> bool {
        match self.reduce(row) {
            Some(mut r) => {
                let inv = inv_mod(r[0].1, self.p);
                r.iter_mut().for_each(|e| e.1 = mul_mod(e.1, inv, self.p));
                self.pivots.insert(r[0].0, r);
                true
            }
            None => false,
        }
    }
}

fn echelon_of(m: &PrimeFieldMatrix) -> Echelon {
    // Sparsest rows first keeps fill low: binomial rows settle the monomial
    // identifications before denser rows are reduced against them.
    let mut order: Vec<usize> = (0..m.rows.len()).collect();
    order.sort_by_key(|&i| (m.rows[i].len(), m.rows[i].first().map(|e| e.0)));
    let mut ech = Echelon::new(m.modulus);
    for i in order {
        ech.insert(m.rows[i].clone());
    }
    ech
}

/// Rank over `F_p` by sparse elimination.
pub fn rank_mod_p(m: &PrimeFieldMatrix) -> usize {
    echelon_of(m).rank()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Target reduced to zero mod every prime. Evidence, not a certificate.
    MemberModAllPrimes,
    /// Rank increased mod every prime.
    NonMember,
    /// Primes disagree; some prime is bad for this matrix.
    Inconsistent,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeRanks {
    pub prime: u32,
    pub rank_without_target: usize,
    pub rank_with_target: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipVerdict {
    pub target: String,
    pub degree: u32,
    pub primes: Vec<u32>,
    pub ranks: Vec<PrimeRanks>,
    pub verdict: Verdict,
    pub rows: usize,
    pub cols: usize,
    pub nnz: usize,
    /// Span ranks agree across all primes; together with a rank increase
    /// this makes a bad prime for every modulus very unlikely.
    pub ranks_agree: bool,
    pub interpretation: String,
    /// Relative least-squares residual of the target against the real span,
    /// when the matrix is small enough to factor densely.
    pub float_residual: Option<f64>,
}

impl MembershipVerdict {
    pub fn is_member(&self) -> bool {
        self.verdict == Verdict::MemberModAllPrimes
    }
}

fn interpretation(v: Verdict) -> String {
    match v {
        Verdict::NonMember => "rank increases mod every prime: the target is outside the degree slice of the ideal over the rationals unless every prime is bad for the span".into(),
        Verdict::MemberModAllPrimes => "target lies in the span mod every prime: evidence of membership, not a certificate over the rationals".into(),
        Verdict::Inconsistent => "primes disagree: at least one prime is bad for this matrix".into(),
    }
}

/// Tests whether `target` lies in the degree-`d` slice of `⟨gens⟩`, with `d`
/// the target's degree, mod each prime.
pub fn ideal_membership(
    name: &str,
    target: &SparsePolynomial,
    gens: &[&SparsePolynomial],
    primes: &[u32],
) -> Result<MembershipVerdict> {
    let d = check_homogeneous(target, "target")?;
    if primes.is_empty() {
        return Err(Error::Precondition("at least one prime is required".into()));
    }
    if let Some(&p) = primes.iter().find(|&&p| !is_prime(p as u64)) {
        return Err(Error::Precondition(format!("{p} is not prime")));
    }
    if gens.iter().any(|g| g.nvars() != target.nvars()) {
        return Err(Error::DimensionMismatch("target and generators use different variables".into()));
    }
    let index = MonomialIndex::new(target.nvars(), d);
    let per_prime: Vec<(PrimeRanks, usize, usize)> = primes
        .par_iter()
        .map(|&p| {
            let m = span_matrix(gens, d, p)?;
            let ech = echelon_of(&m);
            let rank = ech.rank();
            let t = poly_row(target, &Monomial::one(), &index, p);
            let grows = ech.reduce(t).is_some();
            Ok((
                PrimeRanks {
                    prime: p,
                    rank_without_target: rank,
                    rank_with_target: rank + grows as usize,
                },
                m.nrows(),
                m.nnz(),
            ))
        })
        .collect::<Result<_>>()?;
    let grows: Vec<bool> = per_prime
        .iter()
        .map(|(r, _, _)| r.rank_with_target > r.rank_without_target)
        .collect();
    let verdict = if grows.iter().all(|&g| g) {
        Verdict::NonMember
    } else if grows.iter().all(|&g| !g) {
        Verdict::MemberModAllPrimes
    } else {
        Verdict::Inconsistent
    };
    let ranks_agree = per_prime
        .windows(2)
        .all(|w| w[0].0.rank_without_target == w[1].0.rank_without_target);
    let cols = index.ncols() as usize;
    let rows = per_prime[0].1;
    let float_residual = if rows.saturating_mul(cols) <= FLOAT_PROBE_MAX_ENTRIES {
        Some(membership_float_probe(target, gens)?)
    } else {
        None
    };
    Ok(MembershipVerdict {
        target: name.to_string(),
        degree: d,
        primes: primes.to_vec(),
        ranks: per_prime.iter().map(|(r, _, _)| r.clone()).collect(),
        verdict,
        rows,
        cols,
        nnz: per_prime[0].2,
        ranks_agree,
        interpretation: interpretation(verdict),
        float_residual,
    })
}

/// `‖t − Π t‖ / ‖t‖`, with `Π` the orthogonal projection onto the real span
/// of the rows `m·g`. Zero for a zero target.
pub fn membership_float_probe(target: &SparsePolynomial, gens: &[&SparsePolynomial]) -> Result<f64> {
    if target.is_zero() {
        return Ok(0.0);
    }
    let d = check_homogeneous(target, "target")?;
    let nvars = target.nvars();
    let index = MonomialIndex::new(nvars, d);
    let ncols = index.ncols() as usize;
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    for g in gens {
        let dg = check_homogeneous(g, "generator")?;
        if dg > d {
            return Err(Error::Precondition("generator degree exceeds target degree".into()));
        }
        for m in monomials_of_degree(nvars, d - dg) {
            rows.push(
                g.terms()
                    .map(|(t, c)| (index.position(&t.mul(&m)) as usize, c.as_f64()))
                    .collect(),
            );
        }
    }
    if rows.len().saturating_mul(ncols) > FLOAT_PROBE_MAX_ENTRIES {
        return Err(Error::Precondition(format!(
            "{}×{ncols} span is too large for the dense probe",
            rows.len()
        )));
    }
    let mut t = vec![0.0; ncols];
    for (m, c) in target.terms() {
        t[index.position(m) as usize] = c.as_f64();
    }
    let tnorm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
    if rows.is_empty() {
        return Ok(1.0);
    }
    // Columns of `a` span the row space of the span matrix.
    let mut a = DMatrix::<f64>::zeros(ncols, rows.len());
    for (j, row) in rows.iter().enumerate() {
        for &(c, v) in row {
            a[(c, j)] += v;
        }
    }
    let svd = a.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.max();
    let tv = nalgebra::DVector::from_vec(t);
    let mut proj = nalgebra::DVector::zeros(ncols);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > 1e-10 * smax {
            let col = u.column(k);
            proj += col * col.dot(&tv);
        }
    }
    Ok((tv - proj).norm() / tnorm)
}

/// `Σ c_i m_i g_i` with random small coefficients and random shift
/// monomials, homogeneous of degree `d`. Used as a planted member.
pub fn planted_member(
    gens: &[&SparsePolynomial],
    d: u32,
    terms: usize,
    rng: &mut impl Rng,
) -> Result<SparsePolynomial> {
    let nvars = gens
        .first()
        .map(|g| g.nvars())
        .ok_or_else(|| Error::Precondition("no generators".into()))?;
    let mut out = SparsePolynomial::zero(nvars);
    for _ in 0..terms {
        let g = gens[rng.random_range(0..gens.len())];
        let dg = check_homogeneous(g, "generator")?;
        if dg > d {
            return Err(Error::Precondition("generator degree exceeds target degree".into()));
        }
        let vars: Vec<u32> = (0..d - dg).map(|_| rng.random_range(0..nvars as u32)).collect();
        let c = BigInt::from(rng.random_range(1i64..=9) * if rng.random_bool(0.5) { 1 } else { -1 });
        let shifted = g.mul_monomial(&Monomial::from_vars(&vars));
        for (m, k) in shifted.terms() {
            out.add_term(m.clone(), k * &c);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::rng_for_seed;
    use crate::poly::{gen_h, gen_p, gen_q};

    // Dense Gaussian elimination mod p, independent of the sparse code.
    fn dense_rank(rows: &[Vec<u64>], p: u64) -> usize {
        let mut a: Vec<Vec<u64>> = rows.to_vec();
        let ncols = a.first().map_or(0, Vec::len);
        let mut rank = 0;
        for col in 0..ncols {
            let Some(piv) = (rank..a.len()).find(|&r| a[r][col] != 0) else {
                continue;
            };
            a.swap(rank, piv);
            let inv = inv_mod(a[rank][col] as u32, p as u32) as u64;
            for r in 0..a.len() {
                if r != rank && a[r][col] != 0 {
                    let f = a[r][col] * inv % p;
                    for c in 0..ncols {
                        a[r][c] = (a[r][c] + p - f * a[rank][c] % p) % p;
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    fn densify(m: &PrimeFieldMatrix) -> Vec<Vec<u64>> {
        m.rows()
            .iter()
            .map(|r| {
                let mut v = vec![0u64; m.ncols()];
                for &(c, x) in r {
                    v[c as usize] = x as u64;
                }
                v
            })
            .collect()
    }

    #[test]
    fn default_primes_are_distinct_primes() {
        for p in DEFAULT_PRIMES {
            assert!(is_prime(p as u64));
            assert!(p > 1 << 30);
        }
        assert!(!is_prime(2_147_483_649));
        assert_ne!(DEFAULT_PRIMES[0], DEFAULT_PRIMES[1]);
        assert_ne!(DEFAULT_PRIMES[1], DEFAULT_PRIMES[2]);
    }

    #[test]
    fn monomial_enumeration() {
        let all: Vec<_> = monomials_of_degree(2, 2).collect();
        assert_eq!(
            all,
            vec![
                Monomial::from_vars(&[0, 0]),
                Monomial::from_vars(&[0, 1]),
                Monomial::from_vars(&[1, 1])
            ]
        );
        assert_eq!(monomials_of_degree(16, 2).count(), 136);
        assert_eq!(monomials_of_degree(5, 0).collect::<Vec<_>>(), vec![Monomial::one()]);
        assert_eq!(count_monomials(81, 3), 91_881);
        assert_eq!(monomials_of_degree(0, 2).count(), 0);
    }

    #[test]
    fn enumeration_is_strictly_descending_and_ranked() {
        for (nvars, d) in [(4, 3), (7, 2), (3, 5), (16, 2)] {
            let idx = MonomialIndex::new(nvars, d);
            let all: Vec<_> = monomials_of_degree(nvars, d).collect();
            assert_eq!(all.len() as u64, idx.ncols());
            for w in all.windows(2) {
                assert!(w[0] > w[1]);
            }
            for (i, m) in all.iter().enumerate() {
                assert_eq!(idx.position(m), i as u64);
            }
        }
    }

    #[test]
    fn modular_helpers() {
        let p = DEFAULT_PRIMES[0];
        assert_eq!(mod_p(&BigInt::from(-1), p), p - 1);
        for a in [1u32, 2, 12345, p - 1] {
            assert_eq!(mul_mod(a, inv_mod(a, p), p), 1);
        }
    }

    #[test]
    fn span_matrix_examples() {
        let p = DEFAULT_PRIMES[0];
        let g = SparsePolynomial::var(16, 0).sub(&SparsePolynomial::var(16, 1));
        let m = span_matrix(&[&g], 1, p).unwrap();
        assert_eq!(m.nrows(), 1);
        assert_eq!(m.rows()[0], vec![(0, 1), (1, p - 1)]);

        let pg = gen_p(2).unwrap();
        let gens: Vec<_> = pg.polys().collect();
        let m = span_matrix(&gens, 2, p).unwrap();
        assert_eq!(m.nrows(), 112);
        assert_eq!(m.ncols(), 136);

        let m = span_matrix(&[], 2, p).unwrap();
        assert_eq!(m.nrows(), 0);
        assert!(span_matrix(&gens, 0, p).is_err());
    }

    #[test]
    fn rank_examples() {
        let p = DEFAULT_PRIMES[1];
        let id = PrimeFieldMatrix::new(p, 5, (0..5).map(|i| vec![(i, 1)]).collect()).unwrap();
        assert_eq!(rank_mod_p(&id), 5);
        let rep = PrimeFieldMatrix::new(p, 3, vec![vec![(0, 2), (2, 5)]; 2]).unwrap();
        assert_eq!(rank_mod_p(&rep), 1);
        assert!(PrimeFieldMatrix::new(p, 3, vec![vec![(2, 1), (1, 1)]]).is_err());
        assert!(PrimeFieldMatrix::new(p, 3, vec![vec![(0, p)]]).is_err());
    }

    #[test]
    fn sparse_rank_matches_dense_oracle() {
        let p = 101u32;
        for seed in 0..30 {
            let mut rng = rng_for_seed(seed);
            // Narrow column ranges on odd seeds force rank deficiency.
            let width = if seed % 2 == 1 { 30 } else { 80 };
            let rows: Vec<SparseRow> = (0..50)
                .map(|_| {
                    let mut r: Vec<(u32, u32)> = (0..rng.random_range(0..6))
                        .map(|_| (rng.random_range(0..width), rng.random_range(1..p)))
                        .collect();
                    r.sort_unstable_by_key(|e| e.0);
                    r.dedup_by_key(|e| e.0);
                    r
                })
                .collect();
            let m = PrimeFieldMatrix::new(p, 80, rows).unwrap();
            assert_eq!(rank_mod_p(&m), dense_rank(&densify(&m), p as u64), "seed {seed}");
        }
    }

    #[test]
    fn span_rank_matches_dense_oracle_for_small_families() {
        let p = DEFAULT_PRIMES[2];
        let pg = gen_p(2).unwrap();
        let qg = gen_q(2).unwrap();
        let gens: Vec<_> = pg.polys().chain(qg.polys()).collect();
        let m = span_matrix(&gens, 2, p).unwrap();
        assert_eq!(rank_mod_p(&m), dense_rank(&densify(&m), p as u64));
    }

    #[test]
    fn generator_is_member_of_its_own_family() {
        let qg = gen_q(2).unwrap();
        let gens: Vec<_> = qg.polys().collect();
        let v = ideal_membership("g", gens[0], &gens, &DEFAULT_PRIMES).unwrap();
        assert!(v.is_member());
        assert!(v.ranks_agree);
        assert!(v.float_residual.unwrap() <= 1e-10);
    }

    #[test]
    fn planted_members_are_detected() {
        let pg = gen_p(2).unwrap();
        let qg = gen_q(2).unwrap();
        let gens: Vec<_> = pg.polys().chain(qg.polys()).collect();
        for seed in 0..5 {
            let t = planted_member(&gens, 2, 6, &mut rng_for_seed(seed)).unwrap();
            if t.is_zero() {
                continue;
            }
            let v = ideal_membership("planted", &t, &gens, &DEFAULT_PRIMES).unwrap();
            assert!(v.is_member(), "seed {seed}");
            assert!(v.float_residual.unwrap() <= 1e-10);
        }
    }

    #[test]
    fn h2_is_not_in_the_ideal_of_p2_and_q2() {
        let pg = gen_p(2).unwrap();
        let qg = gen_q(2).unwrap();
        let gens: Vec<_> = pg.polys().chain(qg.polys()).collect();
        let h = gen_h(2).unwrap();
        let v = ideal_membership("h2", &h, &gens, &DEFAULT_PRIMES).unwrap();
        assert_eq!(v.verdict, Verdict::NonMember);
        assert!(v.ranks_agree);
        for r in &v.ranks {
            assert_eq!(r.rank_with_target, r.rank_without_target + 1);
        }
        assert!(v.float_residual.unwrap() >= 1e-3);
        let json = serde_json::to_value(&v).unwrap();
        assert_eq!(json["verdict"], "non-member");
    }

    #[test]
    fn membership_rejects_bad_input() {
        let h = gen_h(2).unwrap();
        let inhom = h.add(&SparsePolynomial::var(16, 0));
        assert!(ideal_membership("x", &inhom, &[], &DEFAULT_PRIMES).is_err());
        assert!(ideal_membership("x", &h, &[], &[]).is_err());
        assert!(ideal_membership("x", &h, &[], &[100]).is_err());
        assert_eq!(membership_float_probe(&SparsePolynomial::zero(16), &[]).unwrap(), 0.0);
    }

    #[test]
    fn triplet_dump() {
        let p = 7;
        let m = PrimeFieldMatrix::new(p, 3, vec![vec![(0, 1), (2, 6)], vec![(1, 3)]]).unwrap();
        let mut buf = Vec::new();
        m.write_triplets(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# 2 3 7\n0 0 1\n0 2 6\n1 1 3\n");
    }
}
