//! Numeric evaluation of the linear relations `P_n`, the quadratic relations
//! `Q_n` and the degree-`n` invariant `h_n` on concrete order-4 tensors.
//!
//! Indices are 0-based internally; reported `argmax` tuples are 1-based.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{frobenius_norm, DenseTensor, Scalar};

/// Largest `n` accepted by [`eval_h_naive`].
pub const NAIVE_H_MAX_N: usize = 5;
/// Largest `n` accepted by [`eval_h_det`].
pub const DET_H_MAX_N: usize = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    P,
    Q,
    #[serde(rename = "h")]
    H,
}

impl Family {
    pub fn degree(self, n: usize) -> u32 {
        match self {
            Family::P => 1,
            Family::Q => 2,
            Family::H => n as u32,
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::P => "P",
            Family::Q => "Q",
            Family::H => "h",
        })
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "P" | "p" => Ok(Family::P),
            "Q" | "q" => Ok(Family::Q),
            "h" | "H" => Ok(Family::H),
            other => Err(Error::Format(format!("unknown family {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub family: Family,
    pub n: usize,
    pub max_abs: f64,
    /// `max_abs / ‖p‖_F^degree`; zero for the zero tensor.
    pub normalized: f64,
    /// 1-based identification of the worst equation. For `P`:
    /// `[a, b, c, d, a', b', c', d']`; for `Q`: `[family, a, b, c, d, e, f]`;
    /// empty for `h`.
    pub argmax: Vec<usize>,
}

impl ResidualReport {
    fn new<T: Scalar>(family: Family, p: &DenseTensor<T>, n: usize, max_abs: f64, argmax: Vec<usize>) -> Self {
        let scale = frobenius_norm(p).powi(family.degree(n) as i32);
        Self {
            family,
            n,
            max_abs,
            normalized: if scale > 0.0 { max_abs / scale } else { 0.0 },
            argmax,
        }
    }
}

/// Side `n` of an order-4 cubical tensor with `n >= 2`.
pub fn train_side<T: Scalar>(p: &DenseTensor<T>) -> Result<usize> {
    match (p.order(), p.cubical_side()) {
        (4, Some(n)) if n >= 2 => Ok(n),
        _ => Err(Error::WrongShape(p.dims().to_vec())),
    }
}

#[inline]
fn at<T>(p: &[T], n: usize, a: usize, b: usize, c: usize, d: usize) -> &T {
    &p[((a * n + b) * n + c) * n + d]
}

fn one_based(idx: &[usize]) -> Vec<usize> {
    idx.iter().map(|i| i + 1).collect()
}

/// `max |p_abcd − p_σ1(ab) σ2(cd)|` over the three nontrivial swap patterns.
pub fn eval_p_residual<T: Scalar>(p: &DenseTensor<T>) -> Result<ResidualReport> {
    let n = train_side(p)?;
    let data = p.data();
    let mut worst = T::zero();
    let mut argmax = vec![1; 8];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let x = at(data, n, a, b, c, d);
                    for (a2, b2, c2, d2) in [(b, a, c, d), (a, b, d, c), (b, a, d, c)] {
                        let diff = (x.clone() - at(data, n, a2, b2, c2, d2).clone()).abs();
                        if diff > worst {
                            worst = diff;
                            argmax = one_based(&[a, b, c, d, a2, b2, c2, d2]);
                        }
                    }
                }
            }
        }
    }
    Ok(ResidualReport::new(Family::P, p, n, worst.as_f64(), argmax))
}

/// `g¹_{abcdef} = Σ_t p_abet p_cdft − p_abft p_cdet` (0-based indices).
pub fn q1_value<T: Scalar>(p: &DenseTensor<T>, idx: [usize; 6]) -> T {
    let n = p.dims()[0];
    let data = p.data();
    let [a, b, c, d, e, f] = idx;
    (0..n).fold(T::zero(), |acc, t| {
        acc + at(data, n, a, b, e, t).clone() * at(data, n, c, d, f, t).clone()
            - at(data, n, a, b, f, t).clone() * at(data, n, c, d, e, t).clone()
    })
}

/// `g²_{abcdef} = Σ_t p_etab p_ftcd − p_ftab p_etcd` (0-based indices).
pub fn q2_value<T: Scalar>(p: &DenseTensor<T>, idx: [usize; 6]) -> T {
    let n = p.dims()[0];
    let data = p.data();
    let [a, b, c, d, e, f] = idx;
    (0..n).fold(T::zero(), |acc, t| {
        acc + at(data, n, e, t, a, b).clone() * at(data, n, f, t, c, d).clone()
            - at(data, n, f, t, a, b).clone() * at(data, n, e, t, c, d).clone()
    })
}

/// Worst `|g¹|`, `|g²|` over all index tuples. Both are antisymmetric in
/// `(e, f)`, so only `e < f` is visited.
pub fn eval_q_residual<T: Scalar>(p: &DenseTensor<T>) -> Result<ResidualReport> {
    let n = train_side(p)?;
    let (worst, argmax) = (0..n * n)
        .into_par_iter()
        .map(|ab| {
            let (a, b) = (ab / n, ab % n);
            let mut worst = T::zero();
            let mut argmax = vec![1, 1, 1, 1, 1, 1, 1];
            for c in 0..n {
                for d in 0..n {
                    for e in 0..n {
                        for f in e + 1..n {
                            let idx = [a, b, c, d, e, f];
                            for (fam, v) in [(1, q1_value(p, idx)), (2, q2_value(p, idx))] {
                                let v = v.abs();
                                if v > worst {
                                    worst = v;
                                    let mut arg = vec![fam];
                                    arg.extend(one_based(&idx));
                                    argmax = arg;
                                }
                            }
                        }
                    }
                }
            }
            (worst, argmax)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((T::zero(), vec![1; 7]), |best, item| if item.0 > best.0 { item } else { best });
    Ok(ResidualReport::new(Family::Q, p, n, worst.as_f64(), argmax))
}

/// All permutations of `0..n` with their signs, in lexicographic order.
pub fn signed_permutations(n: usize) -> Vec<(Vec<usize>, i64)> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<(Vec<usize>, i64)>) {
        let n = used.len();
        if prefix.len() == n {
            let inversions = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .filter(|&(i, j)| prefix[i] > prefix[j])
                .count();
            out.push((prefix.clone(), if inversions % 2 == 0 { 1 } else { -1 }));
            return;
        }
        for k in 0..n {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                rec(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// Decodes `code` into base-`n` digits `k_0..k_{n-1}` (first digit most
/// significant).
pub(crate) fn decode_cycle(code: usize, n: usize, k: &mut [usize]) {
    let mut c = code;
    for slot in k.iter_mut().rev() {
        *slot = c % n;
        c /= n;
    }
}

fn h_guard<T: Scalar>(p: &DenseTensor<T>, max_n: usize) -> Result<usize> {
    let n = train_side(p)?;
    if n > max_n {
        return Err(Error::NOutOfRange { n, min: 2, max: max_n });
    }
    Ok(n)
}

/// The literal triple sum defining `h_n`:
/// `Σ_k Σ_σ Σ_γ sgn σ sgn γ Π_m p[k_m, σ(m), k_{m−1}, γ(m)]`, where factor 0
/// takes `k_{n−1}` as its third index.
pub fn eval_h_naive<T: Scalar>(p: &DenseTensor<T>) -> Result<T> {
    let n = h_guard(p, NAIVE_H_MAX_N)?;
    let perms = signed_permutations(n);
    let data = p.data();
    let mut total = T::zero();
    let mut k = vec![0usize; n];
    for code in 0..n.pow(n as u32) {
        decode_cycle(code, n, &mut k);
        for (sigma, s_sign) in &perms {
            for (gamma, g_sign) in &perms {
                let mut prod = T::from_i64(s_sign * g_sign);
                for m in 0..n {
                    let prev = k[(m + n - 1) % n];
                    prod = prod * at(data, n, k[m], sigma[m], prev, gamma[m]).clone();
                }
                total = total + prod;
            }
        }
    }
    Ok(total)
}

/// `h_n` with the `γ`-sum folded into a determinant: for fixed `k` and `σ`,
/// `Σ_γ sgn γ Π_m M[m][γ(m)] = det M` with `M[m][j] = p[k_m, σ(m), k_{m−1}, j]`.
pub fn eval_h_det<T: Scalar>(p: &DenseTensor<T>) -> Result<T> {
    let n = h_guard(p, DET_H_MAX_N)?;
    let perms = signed_permutations(n);
    let data = p.data();
    let partials: Vec<T> = (0..n.pow(n as u32))
        .into_par_iter()
        .map(|code| {
            let mut k = vec![0usize; n];
            decode_cycle(code, n, &mut k);
            let mut scratch = Vec::with_capacity(n * n);
            let mut acc = T::zero();
            for (sigma, sign) in &perms {
                scratch.clear();
                for m in 0..n {
                    let prev = k[(m + n - 1) % n];
                    for j in 0..n {
                        scratch.push(at(data, n, k[m], sigma[m], prev, j).clone());
                    }
                }
                let det = T::determinant(&mut scratch, n);
                if !det.is_zero() {
                    acc = acc + T::from_i64(*sign) * det;
                }
            }
            acc
        })
        .collect();
    Ok(T::sum_ordered(partials))
}

/// `|h_n(p)|` as a report, normalized by `‖p‖_F^n`.
pub fn eval_h_report<T: Scalar>(p: &DenseTensor<T>) -> Result<ResidualReport> {
    let n = train_side(p)?;
    let h = eval_h_det(p)?;
    Ok(ResidualReport::new(Family::H, p, n, h.abs().as_f64(), Vec::new()))
}
