//! Dense tensors in row-major layout (last index fastest), with contraction,
//! mode permutation and symmetry diagnostics.
//!
//! A tensor holds exactly one scalar kind: `f64` for numerics or
//! [`BigInt`] for exact evaluation. Operations are generic over [`Scalar`], so
//! the two kinds can never be mixed in a single call.

mod io;

use std::fmt::Debug;
use std::ops::Index;

use num_bigint::BigInt;
use num_traits::{Num, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub use io::{AnyTensor, ScalarKind};

/// Scalar types a [`DenseTensor`] may hold.
pub trait Scalar:
    Clone + Debug + PartialEq + PartialOrd + Num + Signed + ToPrimitive + Send + Sync + 'static
{
    const KIND: ScalarKind;

    fn from_i64(v: i64) -> Self;

    fn from_bigint(v: &BigInt) -> Self;

    /// Lossy conversion used for reporting and normalization.
    fn as_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Determinant of an `n x n` row-major matrix. The buffer is used as
    /// scratch space.
    fn determinant(m: &mut [Self], n: usize) -> Self;

    /// Sums in iteration order. Reals use Neumaier compensation.
    fn sum_ordered(values: impl IntoIterator<Item = Self>) -> Self {
        values.into_iter().fold(Self::zero(), |a, b| a + b)
    }
}

impl Scalar for f64 {
    const KIND: ScalarKind = ScalarKind::Real;

    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn from_bigint(v: &BigInt) -> Self {
        v.to_f64().unwrap_or(f64::NAN)
    }

    fn as_f64(&self) -> f64 {
        *self
    }

    fn sum_ordered(values: impl IntoIterator<Item = f64>) -> f64 {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for x in values {
            let t = sum + x;
            if sum.abs() >= x.abs() {
                comp += (sum - t) + x;
            } else {
                comp += (x - t) + sum;
            }
            sum = t;
        }
        sum + comp
    }

    // Gaussian elimination with partial pivoting.
    fn determinant(m: &mut [f64], n: usize) -> f64 {
        debug_assert_eq!(m.len(), n * n);
        let mut det = 1.0;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&a, &b| m[a * n + col].abs().total_cmp(&m[b * n + col].abs()))
                .unwrap();
            if m[pivot * n + col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for j in 0..n {
                    m.swap(col * n + j, pivot * n + j);
                }
                det = -det;
            }
            let p = m[col * n + col];
            det *= p;
            for r in col + 1..n {
                let factor = m[r * n + col] / p;
                if factor != 0.0 {
                    for j in col..n {
                        m[r * n + j] -= factor * m[col * n + j];
                    }
                }
            }
        }
        det
    }
}

impl Scalar for BigInt {
    const KIND: ScalarKind = ScalarKind::Integer;

    fn from_i64(v: i64) -> Self {
        BigInt::from(v)
    }

    fn from_bigint(v: &BigInt) -> Self {
        v.clone()
    }

    // Bareiss fraction-free elimination; every division is exact.
    fn determinant(m: &mut [BigInt], n: usize) -> BigInt {
        debug_assert_eq!(m.len(), n * n);
        if n == 0 {
            return BigInt::from(1);
        }
        let mut sign = 1i64;
        let mut prev = BigInt::from(1);
        for k in 0..n - 1 {
            if m[k * n + k].is_zero() {
                match (k + 1..n).find(|&r| !m[r * n + k].is_zero()) {
                    Some(r) => {
                        for j in 0..n {
                            m.swap(k * n + j, r * n + j);
                        }
                        sign = -sign;
                    }
                    None => return BigInt::zero(),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = &m[i * n + j] * &m[k * n + k] - &m[i * n + k] * &m[k * n + j];
                    m[i * n + j] = v / &prev;
                }
            }
            prev = m[k * n + k].clone();
        }
        let det = m[n * n - 1].clone();
        if sign < 0 {
            -det
        } else {
            det
        }
    }
}

/// An order-d array stored flat in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor<T> {
    dims: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> DenseTensor<T> {
    pub fn new(dims: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::ZeroDim(dims));
        }
        let expected: usize = dims.iter().product();
        if data.len() != expected {
            return Err(Error::DataLength {
                len: data.len(),
                dims,
                expected,
            });
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let len = dims.iter().product();
        Self {
            dims,
            data: vec![T::zero(); len],
        }
    }

    /// Builds a tensor by evaluating `f` at every multi-index, in flat order.
    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> T) -> Self {
        let len: usize = dims.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..len {
            data.push(f(&idx));
            increment(&mut idx, &dims);
        }
        Self { dims, data }
    }

    pub fn vector(v: Vec<T>) -> Self {
        Self {
            dims: vec![v.len()],
            data: v,
        }
    }

    /// Order-0 tensor holding a single value.
    pub fn scalar(v: T) -> Self {
        Self {
            dims: Vec::new(),
            data: vec![v],
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Side length if every mode has the same size.
    pub fn cubical_side(&self) -> Option<usize> {
        let first = *self.dims.first()?;
        self.dims.iter().all(|&d| d == first).then_some(first)
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        idx.iter().zip(&self.dims).fold(0, |acc, (&i, &d)| {
            debug_assert!(i < d);
            acc * d + i
        })
    }

    pub fn multi_index(&self, mut offset: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims.len()];
        for (slot, &d) in idx.iter_mut().zip(&self.dims).rev() {
            *slot = offset % d;
            offset /= d;
        }
        idx
    }

    pub fn get(&self, idx: &[usize]) -> &T {
        &self.data[self.offset(idx)]
    }

    pub fn map<U: Scalar>(&self, f: impl FnMut(&T) -> U) -> DenseTensor<U> {
        DenseTensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn scale(&self, c: &T) -> Self {
        self.map(|x| x.clone() * c.clone())
    }

    /// Entrywise sum; dims must agree.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!(
                "cannot add {:?} and {:?}",
                self.dims, other.dims
            )));
        }
        Ok(Self {
            dims: self.dims.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        })
    }

    /// Outer product; dims are concatenated.
    pub fn outer(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let mut data = Vec::with_capacity(self.len() * other.len());
        for a in &self.data {
            for b in &other.data {
                data.push(a.clone() * b.clone());
            }
        }
        Self { dims, data }
    }

    /// Returns `R` with `R[i_0..i_{d-1}] = self[i_{perm^-1}]`, i.e. mode `k`
    /// of the result is mode `perm[k]` of `self`.
    pub fn permute_modes(&self, perm: &[usize]) -> Result<Self> {
        let d = self.order();
        let mut seen = vec![false; d];
        if perm.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "permutation of length {} for order {d}",
                perm.len()
            )));
        }
        for &p in perm {
            if p >= d {
                return Err(Error::ModeOutOfRange { mode: p, order: d });
            }
            if std::mem::replace(&mut seen[p], true) {
                return Err(Error::DimensionMismatch(format!(
                    "{perm:?} is not a permutation"
                )));
            }
        }
        let dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let mut src = vec![0usize; d];
        Ok(Self::from_fn(dims, |idx| {
            for (k, &p) in perm.iter().enumerate() {
                src[p] = idx[k];
            }
            self.get(&src).clone()
        }))
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .map(|x| x.abs())
            .fold(T::zero(), |m, x| if x > m { x } else { m })
    }

    pub fn frobenius_norm_sq(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, x| acc + x.clone() * x.clone())
    }
}

impl<T: Scalar> Index<&[usize]> for DenseTensor<T> {
    type Output = T;

    fn index(&self, idx: &[usize]) -> &T {
        self.get(idx)
    }
}

/// Odometer increment of a multi-index in row-major order.
pub(crate) fn increment(idx: &mut [usize], dims: &[usize]) {
    for (i, &d) in idx.iter_mut().zip(dims).rev() {
        *i += 1;
        if *i < d {
            return;
        }
        *i = 0;
    }
}

/// Contracts mode `mode_a` of `a` with mode `mode_b` of `b` (0-based).
///
/// The result carries the remaining modes of `a` followed by the remaining
/// modes of `b`, and `R[.., ..] = sum_c a[.., c, ..] * b[.., c, ..]`.
pub fn contract<T: Scalar>(
    a: &DenseTensor<T>,
    b: &DenseTensor<T>,
    mode_a: usize,
    mode_b: usize,
) -> Result<DenseTensor<T>> {
    if mode_a >= a.order() {
        return Err(Error::ModeOutOfRange {
            mode: mode_a,
            order: a.order(),
        });
    }
    if mode_b >= b.order() {
        return Err(Error::ModeOutOfRange {
            mode: mode_b,
            order: b.order(),
        });
    }
    let k = a.dims[mode_a];
    if k != b.dims[mode_b] {
        return Err(Error::DimensionMismatch(format!(
            "mode {mode_a} of {:?} vs mode {mode_b} of {:?}",
            a.dims, b.dims
        )));
    }
    // View each operand as (left, k, right).
    let a_right: usize = a.dims[mode_a + 1..].iter().product();
    let b_right: usize = b.dims[mode_b + 1..].iter().product();
    let a_rows = a.len() / k;
    let b_rows = b.len() / k;

    let mut dims: Vec<usize> = Vec::with_capacity(a.order() + b.order() - 2);
    dims.extend(a.dims.iter().enumerate().filter(|&(i, _)| i != mode_a).map(|(_, &d)| d));
    dims.extend(b.dims.iter().enumerate().filter(|&(i, _)| i != mode_b).map(|(_, &d)| d));

    let a_off = |row: usize, c: usize| (row / a_right) * k * a_right + c * a_right + row % a_right;
    let b_off = |row: usize, c: usize| (row / b_right) * k * b_right + c * b_right + row % b_right;

    let mut data = Vec::with_capacity(a_rows * b_rows);
    for ra in 0..a_rows {
        for rb in 0..b_rows {
            let mut acc = T::zero();
            for c in 0..k {
                acc = acc + a.data[a_off(ra, c)].clone() * b.data[b_off(rb, c)].clone();
            }
            data.push(acc);
        }
    }
    Ok(DenseTensor { dims, data })
}

/// `T •_q T`: the contraction of `t` with itself along mode `q`.
pub fn self_contract<T: Scalar>(t: &DenseTensor<T>, q: usize) -> Result<DenseTensor<T>> {
    contract(t, t, q, q)
}

/// Maximum of `|t[idx] - t[idx with modes i, j swapped]|` over every entry and
/// every transposition `(i j)` inside each group. Zero exactly when `t` is
/// invariant under all permutations within each group.
pub fn symmetry_residual<T: Scalar>(t: &DenseTensor<T>, groups: &[Vec<usize>]) -> Result<T> {
    let d = t.order();
    let mut used = vec![false; d];
    let mut pairs = Vec::new();
    for group in groups {
        for &m in group {
            if m >= d {
                return Err(Error::ModeOutOfRange { mode: m, order: d });
            }
            if std::mem::replace(&mut used[m], true) {
                return Err(Error::OverlappingGroups(m));
            }
        }
        for (x, &i) in group.iter().enumerate() {
            for &j in &group[x + 1..] {
                if t.dims[i] != t.dims[j] {
                    return Err(Error::DimensionMismatch(format!(
                        "modes {i} and {j} have sizes {} and {}",
                        t.dims[i], t.dims[j]
                    )));
                }
                pairs.push((i, j));
            }
        }
    }
    let mut worst = T::zero();
    let mut idx = vec![0usize; d];
    let mut swapped = vec![0usize; d];
    for off in 0..t.len() {
        for &(i, j) in &pairs {
            if idx[i] < idx[j] {
                swapped.copy_from_slice(&idx);
                swapped.swap(i, j);
                let diff = (t.data[off].clone() - t.get(&swapped).clone()).abs();
                if diff > worst {
                    worst = diff;
                }
            }
        }
        increment(&mut idx, &t.dims);
    }
    Ok(worst)
}

/// Square root of the sum of squared entries.
pub fn frobenius_norm<T: Scalar>(t: &DenseTensor<T>) -> f64 {
    t.frobenius_norm_sq().as_f64().sqrt()
}

/// `v ⊗ v ⊗ ... ⊗ v` (`order` copies).
pub fn tensor_power<T: Scalar>(v: &[T], order: usize) -> DenseTensor<T> {
    DenseTensor::from_fn(vec![v.len(); order], |idx| {
        idx.iter().fold(T::one(), |acc, &i| acc * v[i].clone())
    })
}

/// Converts an exact tensor to the real kind.
pub fn to_real(t: &DenseTensor<BigInt>) -> DenseTensor<f64> {
    t.map(|x| x.as_f64())
}
