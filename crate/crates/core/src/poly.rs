//! Exact sparse polynomials in the `n⁴` entries `p_ijkl` of an order-4
//! tensor, and generators for the families `P_n`, `Q_n` and `h_n`.
//!
//! Variable `p_ijkl` (0-based) has index `i·n³ + j·n² + k·n + l`, which is
//! also its row-major offset in a [`DenseTensor`]. Terms are ordered
//! graded-lexicographically with variable 0 the most significant; the
//! leading term is the greatest one.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equations::{decode_cycle, signed_permutations, Family};
use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Scalar};

/// Largest `n` accepted by [`gen_h`].
pub const GEN_H_MAX_N: usize = 4;

/// Exponent vector stored as `(variable, exponent)` pairs sorted by variable,
/// with every exponent positive.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(u32, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Self(Vec::new())
    }

    pub fn var(v: u32) -> Self {
        Self(vec![(v, 1)])
    }

    pub fn from_pairs(mut pairs: Vec<(u32, u32)>) -> Result<Self> {
        pairs.retain(|&(_, e)| e > 0);
        pairs.sort_unstable();
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidPolynomial(format!(
                "repeated variable in monomial {pairs:?}"
            )));
        }
        Ok(Self(pairs))
    }

    /// Product of the listed variables (repetition allowed).
    pub fn from_vars(vars: &[u32]) -> Self {
        let mut sorted = vars.to_vec();
        sorted.sort_unstable();
        let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(sorted.len());
        for v in sorted {
            match pairs.last_mut() {
                Some((last, e)) if *last == v => *e += 1,
                _ => pairs.push((v, 1)),
            }
        }
        Self(pairs)
    }

    /// Variables with repetition, ascending.
    pub fn vars(&self) -> impl Iterator<Item = u32> + '_ {
        self.0
            .iter()
            .flat_map(|&(v, e)| std::iter::repeat_n(v, e as usize))
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    pub fn exponent(&self, v: u32) -> u32 {
        self.0
            .binary_search_by_key(&v, |&(var, _)| var)
            .map_or(0, |i| self.0[i].1)
    }

    pub fn max_var(&self) -> Option<u32> {
        self.0.last().map(|&(v, _)| v)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    pub fn eval<T: Scalar>(&self, point: &[T]) -> T {
        self.0.iter().fold(T::one(), |acc, &(v, e)| {
            let x = &point[v as usize];
            (0..e).fold(acc, |a, _| a * x.clone())
        })
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        // Lex with variable 0 most significant: at the first variable whose
        // exponents differ, the larger exponent wins.
        for (x, y) in self.0.iter().zip(&other.0) {
            if x.0 != y.0 {
                return if x.0 < y.0 {
                    Ordering::Greater
                } else {
                    Ordering::Less
                };
            }
            if x.1 != y.1 {
                return x.1.cmp(&y.1);
            }
        }
        // Equal degrees and a common prefix imply equal lengths.
        Ordering::Equal
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Polynomial with integer coefficients; no stored zeros.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparsePolynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, BigInt>,
}

impl SparsePolynomial {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn var(nvars: usize, v: u32) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::var(v), BigInt::one());
        p
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Monomial, BigInt)>) -> Result<Self> {
        let mut p = Self::zero(nvars);
        for (m, c) in terms {
            if m.max_var().is_some_and(|v| v as usize >= nvars) {
                return Err(Error::InvalidPolynomial(format!(
                    "variable {} out of range for {nvars} variables",
                    m.max_var().unwrap()
                )));
            }
            p.add_term(m, c);
        }
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in ascending order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &BigInt)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &Monomial) -> BigInt {
        self.terms.get(m).cloned().unwrap_or_default()
    }

    pub fn leading_term(&self) -> Option<(&Monomial, &BigInt)> {
        self.terms.iter().next_back()
    }

    pub fn add_term(&mut self, m: Monomial, c: BigInt) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        Self {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.nvars.max(other.nvars));
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Self {
        // Multiplication by a monomial is injective on monomials, so the
        // coefficient map carries over unchanged.
        Self {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(t, c)| (t.mul(m), c.clone()))
                .collect(),
        }
    }

    /// Total degree if every term has the same degree (zero has none).
    pub fn homogeneous_degree(&self) -> Option<u32> {
        let mut degrees = self.terms.keys().map(Monomial::degree);
        let d = degrees.next()?;
        degrees.all(|x| x == d).then_some(d)
    }

    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).max()
    }

    /// Multiplies by −1 if needed so the leading coefficient is positive.
    pub fn normalize_sign(self) -> Self {
        match self.leading_term() {
            Some((_, c)) if c.is_negative() => self.neg(),
            _ => self,
        }
    }

    pub fn eval<T: Scalar>(&self, point: &DenseTensor<T>) -> Result<T> {
        if point.len() != self.nvars {
            return Err(Error::DimensionMismatch(format!(
                "polynomial in {} variables evaluated at a point with {} entries",
                self.nvars,
                point.len()
            )));
        }
        let data = point.data();
        Ok(T::sum_ordered(
            self.terms.iter().map(|(m, c)| T::from_bigint(c) * m.eval(data)),
        ))
    }

    /// Analytic gradient at a real point.
    pub fn gradient(&self, point: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.nvars];
        for (m, c) in &self.terms {
            let c = c.as_f64();
            for (k, &(v, e)) in m.0.iter().enumerate() {
                let mut prod = c * e as f64 * point[v as usize].powi(e as i32 - 1);
                for (j, &(u, f)) in m.0.iter().enumerate() {
                    if j != k {
                        prod *= point[u as usize].powi(f as i32);
                    }
                }
                g[v as usize] += prod;
            }
        }
        g
    }

    fn to_file(&self, n: usize) -> PolyFile {
        PolyFile {
            n,
            nvars: self.nvars,
            terms: self.term_entries(),
        }
    }

    fn term_entries(&self) -> Vec<TermEntry> {
        self.terms
            .iter()
            .rev()
            .map(|(m, c)| TermEntry {
                coeff: c.to_string(),
                monomial: m.0.iter().map(|&(v, e)| [v, e]).collect(),
            })
            .collect()
    }

    fn from_entries(nvars: usize, entries: Vec<TermEntry>) -> Result<Self> {
        let mut terms = Vec::with_capacity(entries.len());
        for t in entries {
            let c = BigInt::from_str(&t.coeff)
                .map_err(|_| Error::Format(format!("bad coefficient {:?}", t.coeff)))?;
            let m = Monomial::from_pairs(t.monomial.iter().map(|&[v, e]| (v, e)).collect())?;
            terms.push((m, c));
        }
        Self::from_terms(nvars, terms)
    }

    /// Polynomial file JSON; `n` is the tensor side the variables refer to.
    pub fn to_json(&self, n: usize) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file(n))?)
    }

    pub fn from_json(s: &str) -> Result<(usize, Self)> {
        let file: PolyFile = serde_json::from_str(s)?;
        if file.nvars != file.n.pow(4) {
            return Err(Error::Format(format!(
                "nvars = {} but n⁴ = {}",
                file.nvars,
                file.n.pow(4)
            )));
        }
        Ok((file.n, Self::from_entries(file.nvars, file.terms)?))
    }
}

#[derive(Serialize, Deserialize)]
struct TermEntry {
    coeff: String,
    monomial: Vec<[u32; 2]>,
}

#[derive(Serialize, Deserialize)]
struct PolyFile {
    n: usize,
    nvars: usize,
    terms: Vec<TermEntry>,
}

/// `p_ijkl` ↦ variable index (0-based).
pub fn var_index(n: usize, i: usize, j: usize, k: usize, l: usize) -> u32 {
    (((i * n + j) * n + k) * n + l) as u32
}

/// Inverse of [`var_index`].
pub fn var_tuple(n: usize, v: u32) -> [usize; 4] {
    let v = v as usize;
    [v / (n * n * n), (v / (n * n)) % n, (v / n) % n, v % n]
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generator {
    /// 1-based index data that produced the generator. `P`:
    /// `[a, b, c, d, swap_ab, swap_cd]`; `Q`: `[family, a, b, c, d, e, f]`;
    /// `h`: `[]`.
    pub provenance: Vec<usize>,
    pub poly: SparsePolynomial,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquationSystem {
    pub n: usize,
    pub family: Family,
    pub generators: Vec<Generator>,
}

impl EquationSystem {
    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn polys(&self) -> impl Iterator<Item = &SparsePolynomial> {
        self.generators.iter().map(|g| &g.poly)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = SystemFile {
            n: self.n,
            family: self.family,
            nvars: self.n.pow(4),
            generators: self
                .generators
                .iter()
                .map(|g| GeneratorEntry {
                    provenance: g.provenance.clone(),
                    terms: g.poly.term_entries(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: SystemFile = serde_json::from_str(s)?;
        let generators = file
            .generators
            .into_iter()
            .map(|g| {
                Ok(Generator {
                    provenance: g.provenance,
                    poly: SparsePolynomial::from_entries(file.nvars, g.terms)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            n: file.n,
            family: file.family,
            generators,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct GeneratorEntry {
    provenance: Vec<usize>,
    terms: Vec<TermEntry>,
}

#[derive(Serialize, Deserialize)]
struct SystemFile {
    n: usize,
    family: Family,
    nvars: usize,
    generators: Vec<GeneratorEntry>,
}

fn check_n(n: usize, max: usize) -> Result<()> {
    if n < 2 || n > max {
        return Err(Error::NOutOfRange { n, min: 2, max });
    }
    Ok(())
}

/// Sign-normalizes, drops zeros and keeps the first of each duplicate.
fn dedup_up_to_sign(candidates: impl IntoIterator<Item = Generator>) -> Vec<Generator> {
    let mut seen: HashSet<Vec<(Monomial, BigInt)>> = HashSet::new();
    let mut out = Vec::new();
    for mut g in candidates {
        if g.poly.is_zero() {
            continue;
        }
        g.poly = g.poly.normalize_sign();
        let key: Vec<(Monomial, BigInt)> =
            g.poly.terms.iter().map(|(m, c)| (m.clone(), c.clone())).collect();
        if seen.insert(key) {
            out.push(g);
        }
    }
    out
}

/// Every distinct nonzero `p_abcd − p_σ1(a)σ1(b)σ2(c)σ2(d)`, up to sign, with
/// no reduction beyond that.
pub fn gen_p_literal(n: usize) -> Result<EquationSystem> {
    check_n(n, usize::MAX)?;
    let nvars = n.pow(4);
    let mut candidates = Vec::new();
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    for (s1, s2) in [(1, 0), (0, 1), (1, 1)] {
                        let (a2, b2) = if s1 == 1 { (b, a) } else { (a, b) };
                        let (c2, d2) = if s2 == 1 { (d, c) } else { (c, d) };
                        let poly = SparsePolynomial::var(nvars, var_index(n, a, b, c, d))
                            .sub(&SparsePolynomial::var(nvars, var_index(n, a2, b2, c2, d2)));
                        candidates.push(Generator {
                            provenance: vec![a + 1, b + 1, c + 1, d + 1, s1, s2],
                            poly,
                        });
                    }
                }
            }
        }
    }
    Ok(EquationSystem {
        n,
        family: Family::P,
        generators: dedup_up_to_sign(candidates),
    })
}

/// A basis of the span of `P_n`: one relation `p_x − p_rep(x)` for every
/// entry `x` that differs from its orbit representative
/// `rep(a,b,c,d) = (min(a,b), max(a,b), min(c,d), max(c,d))`. Each is a
/// member of the family, and together they span all of it; there are
/// `n⁴ − (n(n+1)/2)²` of them.
pub fn gen_p(n: usize) -> Result<EquationSystem> {
    check_n(n, usize::MAX)?;
    let nvars = n.pow(4);
    let mut generators = Vec::new();
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let (s1, s2) = ((a > b) as usize, (c > d) as usize);
                    if s1 == 0 && s2 == 0 {
                        continue;
                    }
                    let rep = var_index(n, a.min(b), a.max(b), c.min(d), c.max(d));
                    let poly = SparsePolynomial::var(nvars, var_index(n, a, b, c, d))
                        .sub(&SparsePolynomial::var(nvars, rep))
                        .normalize_sign();
                    generators.push(Generator {
                        provenance: vec![a + 1, b + 1, c + 1, d + 1, s1, s2],
                        poly,
                    });
                }
            }
        }
    }
    Ok(EquationSystem {
        n,
        family: Family::P,
        generators,
    })
}

fn q_poly(n: usize, family: usize, [a, b, c, d, e, f]: [usize; 6]) -> SparsePolynomial {
    let nvars = n.pow(4);
    let mut poly = SparsePolynomial::zero(nvars);
    for t in 0..n {
        let (x1, y1, x2, y2) = if family == 1 {
            (
                var_index(n, a, b, e, t),
                var_index(n, c, d, f, t),
                var_index(n, a, b, f, t),
                var_index(n, c, d, e, t),
            )
        } else {
            (
                var_index(n, e, t, a, b),
                var_index(n, f, t, c, d),
                var_index(n, f, t, a, b),
                var_index(n, e, t, c, d),
            )
        };
        poly.add_term(Monomial::from_vars(&[x1, y1]), BigInt::one());
        poly.add_term(Monomial::from_vars(&[x2, y2]), -BigInt::one());
    }
    poly
}

/// All distinct nonzero `g¹` and `g²`, deduplicated up to sign.
pub fn gen_q(n: usize) -> Result<EquationSystem> {
    check_n(n, usize::MAX)?;
    let mut candidates = Vec::new();
    for family in [1, 2] {
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        for e in 0..n {
                            for f in 0..n {
                                if e == f {
                                    continue;
                                }
                                let idx = [a, b, c, d, e, f];
                                let mut provenance = vec![family];
                                provenance.extend(idx.iter().map(|i| i + 1));
                                candidates.push(Generator {
                                    provenance,
                                    poly: q_poly(n, family, idx),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(EquationSystem {
        n,
        family: Family::Q,
        generators: dedup_up_to_sign(candidates),
    })
}

/// `h_n` expanded symbolically by streaming the `(k, σ, γ)` triple sum into
/// a term map. `k` codes are split across workers; private maps are merged
/// by exact addition.
pub fn gen_h(n: usize) -> Result<SparsePolynomial> {
    check_n(n, GEN_H_MAX_N)?;
    let nvars = n.pow(4);
    let perms = signed_permutations(n);
    let merged = (0..n.pow(n as u32))
        .into_par_iter()
        .fold(HashMap::<Monomial, BigInt>::new, |mut acc, code| {
            let mut k = vec![0usize; n];
            decode_cycle(code, n, &mut k);
            let mut vars = vec![0u32; n];
            for (sigma, s_sign) in &perms {
                for (gamma, g_sign) in &perms {
                    for m in 0..n {
                        vars[m] = var_index(n, k[m], sigma[m], k[(m + n - 1) % n], gamma[m]);
                    }
                    *acc.entry(Monomial::from_vars(&vars)).or_default() += s_sign * g_sign;
                }
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (m, c) in b {
                *a.entry(m).or_default() += c;
            }
            a
        });
    SparsePolynomial::from_terms(nvars, merged)
}

pub fn gen_h_system(n: usize) -> Result<EquationSystem> {
    Ok(EquationSystem {
        n,
        family: Family::H,
        generators: vec![Generator {
            provenance: Vec::new(),
            poly: gen_h(n)?,
        }],
    })
}

pub fn generate(family: Family, n: usize) -> Result<EquationSystem> {
    match family {
        Family::P => gen_p(n),
        Family::Q => gen_q(n),
        Family::H => gen_h_system(n),
    }
}
