//! Jacobian-rank dimension checks.
//!
//! The parametrization `(λ, V, μ, W) ↦ train` is differentiated in a
//! skew-exponential chart around a random point, giving `n(n+1)` free
//! parameters whose image should have dimension `n(n+1) − 1`. The defining
//! equations are differentiated analytically at a train point; at a smooth
//! point their corank is the local dimension of the variety they cut out.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{build_train, train_closed_form, TrainModel};
use crate::poly::{gen_h, gen_p, gen_q, SparsePolynomial};
use crate::tensor::Scalar;

/// Singular values above `RANK_TOL · σ_max` count towards the rank.
pub const RANK_TOL: f64 = 1e-6;
/// Central-difference step, scaled by `max(1, |θ_k|)`.
pub const FD_STEP: f64 = 1e-5;
/// A spectral gap below this makes the rank indeterminate.
pub const INDETERMINATE_GAP: f64 = 1e2;
/// Gap required for a pass.
pub const PASS_GAP: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JacobianMode {
    Param,
    Variety,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    Equal,
    AtLeast,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankStatus {
    Pass,
    Fail,
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobianReport {
    pub n: usize,
    pub seed: Option<u64>,
    pub mode: JacobianMode,
    pub rows: usize,
    pub cols: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// `cols − rank` (the local dimension in variety mode).
    pub corank: usize,
    /// `σ_rank / σ_{rank+1}`; `None` when there is no next singular value or
    /// it is exactly zero.
    pub gap_ratio: Option<f64>,
    /// Expected rank (param mode) or corank (variety mode).
    pub expected: usize,
    pub comparison: Comparison,
    pub status: RankStatus,
    pub pass: bool,
}

impl JacobianReport {
    /// The quantity compared against `expected`.
    pub fn measured(&self) -> usize {
        match self.mode {
            JacobianMode::Param => self.rank,
            JacobianMode::Variety => self.corank,
        }
    }
}

/// `n(n+1) − 1`.
pub fn expected_dimension(n: usize) -> usize {
    n * (n + 1) - 1
}

/// Skew-symmetric matrix from its strict upper triangle, row by row.
pub fn skew(n: usize, x: &[f64]) -> Result<DMatrix<f64>> {
    if x.len() != n * (n.saturating_sub(1)) / 2 {
        return Err(Error::DimensionMismatch(format!(
            "{} chart coordinates for n = {n}",
            x.len()
        )));
    }
    let mut k = DMatrix::zeros(n, n);
    let mut it = x.iter();
    for i in 0..n {
        for j in i + 1..n {
            let v = *it.next().expect("length checked");
            k[(i, j)] = v;
            k[(j, i)] = -v;
        }
    }
    Ok(k)
}

/// Matrix exponential by scaling and squaring a truncated Taylor series.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.norm();
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(s);
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=30 {
        term = &term * &scaled / k as f64;
        result += &term;
        if term.norm() <= 1e-17 * result.norm() {
            break;
        }
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

/// Central differences; column `k` is `∂f/∂θ_k` with step
/// `step · max(1, |θ_k|)`.
pub fn finite_difference_jacobian(
    f: impl Fn(&[f64]) -> Vec<f64>,
    point: &[f64],
    step: f64,
) -> Result<DMatrix<f64>> {
    if !(step > 0.0) {
        return Err(Error::Precondition(format!("step must be positive, got {step}")));
    }
    let m = f(point).len();
    let mut jac = DMatrix::zeros(m, point.len());
    let mut probe = point.to_vec();
    for k in 0..point.len() {
        let h = step * point[k].abs().max(1.0);
        probe[k] = point[k] + h;
        let plus = f(&probe);
        probe[k] = point[k] - h;
        let minus = f(&probe);
        probe[k] = point[k];
        for (r, (a, b)) in plus.iter().zip(&minus).enumerate() {
            jac[(r, k)] = (a - b) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Sorted singular values, numerical rank and gap ratio.
pub fn numerical_rank(jac: &DMatrix<f64>) -> (Vec<f64>, usize, Option<f64>) {
    let mut sv: Vec<f64> = if jac.nrows() == 0 || jac.ncols() == 0 {
        Vec::new()
    } else {
        jac.clone().singular_values().iter().copied().collect()
    };
    sv.sort_by(|a, b| b.total_cmp(a));
    let smax = sv.first().copied().unwrap_or(0.0);
    let rank = if smax > 0.0 {
        sv.iter().filter(|&&s| s > RANK_TOL * smax).count()
    } else {
        0
    };
    let gap = match (rank.checked_sub(1).map(|i| sv[i]), sv.get(rank)) {
        (Some(a), Some(&b)) if b > 0.0 => Some(a / b),
        _ => None,
    };
    (sv, rank, gap)
}

fn make_report(
    n: usize,
    seed: Option<u64>,
    mode: JacobianMode,
    jac: &DMatrix<f64>,
    expected: usize,
    comparison: Comparison,
) -> JacobianReport {
    let (singular_values, rank, gap_ratio) = numerical_rank(jac);
    let corank = jac.ncols() - rank;
    let measured = match mode {
        JacobianMode::Param => rank,
        JacobianMode::Variety => corank,
    };
    let matches = match comparison {
        Comparison::Equal => measured == expected,
        Comparison::AtLeast => measured >= expected,
    };
    let gap = gap_ratio.unwrap_or(f64::INFINITY);
    let status = if gap < INDETERMINATE_GAP {
        RankStatus::Indeterminate
    } else if matches && gap >= PASS_GAP {
        RankStatus::Pass
    } else {
        RankStatus::Fail
    };
    JacobianReport {
        n,
        seed,
        mode,
        rows: jac.nrows(),
        cols: jac.ncols(),
        singular_values,
        rank,
        corank,
        gap_ratio,
        expected,
        comparison,
        status,
        pass: status == RankStatus::Pass,
    }
}

/// Parametrization Jacobian at `model`, in the chart
/// `(λ, x, μ, y) ↦ train(λ, V₀·exp(skew x), μ, W₀·exp(skew y))` at `x = y = 0`.
pub fn param_jacobian(model: &TrainModel) -> Result<DMatrix<f64>> {
    let n = model.n();
    let c = n * (n - 1) / 2;
    let v0 = model.left.frame().clone();
    let w0 = model.right.frame().clone();
    let mut theta = Vec::with_capacity(n * (n + 1));
    theta.extend_from_slice(model.left.lambdas());
    theta.extend(std::iter::repeat_n(0.0, c));
    theta.extend_from_slice(model.right.lambdas());
    theta.extend(std::iter::repeat_n(0.0, c));
    let f = |t: &[f64]| -> Vec<f64> {
        let (lam, rest) = t.split_at(n);
        let (x, rest) = rest.split_at(c);
        let (mu, y) = rest.split_at(n);
        let v = &v0 * expm(&skew(n, x).expect("chart size"));
        let w = &w0 * expm(&skew(n, y).expect("chart size"));
        train_closed_form(lam, &v, mu, &w).into_data()
    };
    finite_difference_jacobian(f, &theta, FD_STEP)
}

pub fn param_jacobian_rank_at(model: &TrainModel, seed: Option<u64>) -> Result<JacobianReport> {
    let n = model.n();
    let jac = param_jacobian(model)?;
    Ok(make_report(
        n,
        seed,
        JacobianMode::Param,
        &jac,
        expected_dimension(n),
        Comparison::Equal,
    ))
}

/// Rank of the parametrization Jacobian at a random train; expected `n(n+1) − 1`.
pub fn param_jacobian_rank(n: usize, seed: u64) -> Result<JacobianReport> {
    if n < 2 {
        return Err(Error::NOutOfRange { n, min: 2, max: usize::MAX });
    }
    param_jacobian_rank_at(&TrainModel::sample(n, seed)?, Some(seed))
}

/// All generators of `P_n ∪ Q_n ∪ {h_n}`.
pub fn defining_equations(n: usize) -> Result<Vec<SparsePolynomial>> {
    let mut polys: Vec<SparsePolynomial> = gen_p(n)?.generators.into_iter().map(|g| g.poly).collect();
    polys.extend(gen_q(n)?.generators.into_iter().map(|g| g.poly));
    polys.push(gen_h(n)?);
    Ok(polys)
}

/// Analytic Jacobian of `polys` at `point`, one row per polynomial. Rows
/// are normalized; rows that vanish relative to the largest are dropped.
pub fn equation_jacobian(polys: &[SparsePolynomial], point: &[f64]) -> DMatrix<f64> {
    let grads: Vec<Vec<f64>> = polys.iter().map(|p| p.gradient(point)).collect();
    let norms: Vec<f64> = grads
        .iter()
        .map(|g| g.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let top = norms.iter().copied().fold(0.0, f64::max);
    let kept: Vec<(&Vec<f64>, f64)> = grads
        .iter()
        .zip(norms)
        .filter(|&(_, nrm)| nrm > 1e-12 * top && nrm > 0.0)
        .collect();
    DMatrix::from_fn(kept.len(), point.len(), |r, c| kept[r].0[c] / kept[r].1)
}

const VARIETY_MAX_N: usize = 3;

/// Corank of the defining-equation Jacobian at `point`, rescaled to unit
/// norm when nonzero (the equations are homogeneous, so the rank is
/// unchanged by scaling).
pub fn variety_jacobian_corank_at(
    n: usize,
    point: &[f64],
    seed: Option<u64>,
) -> Result<JacobianReport> {
    if !(2..=VARIETY_MAX_N).contains(&n) {
        return Err(Error::NOutOfRange { n, min: 2, max: VARIETY_MAX_N });
    }
    if point.len() != n.pow(4) {
        return Err(Error::DimensionMismatch(format!(
            "point has {} entries, expected {}",
            point.len(),
            n.pow(4)
        )));
    }
    let norm = point.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scaled: Vec<f64> = if norm > 0.0 {
        point.iter().map(|x| x / norm).collect()
    } else {
        point.to_vec()
    };
    let jac = equation_jacobian(&defining_equations(n)?, &scaled);
    let comparison = if n == 2 { Comparison::Equal } else { Comparison::AtLeast };
    Ok(make_report(
        n,
        seed,
        JacobianMode::Variety,
        &jac,
        expected_dimension(n),
        comparison,
    ))
}

/// Local dimension of the zero set of `P_n ∪ Q_n ∪ {h_n}` at a random train.
/// Expected `n(n+1) − 1`: asserted equal for `n = 2`, as a lower bound for `n = 3`.
pub fn variety_jacobian_corank(n: usize, seed: u64) -> Result<JacobianReport> {
    if !(2..=VARIETY_MAX_N).contains(&n) {
        return Err(Error::NOutOfRange { n, min: 2, max: VARIETY_MAX_N });
    }
    let p = build_train(&TrainModel::sample(n, seed)?);
    variety_jacobian_corank_at(n, p.data(), Some(seed))
}

/// Max deviation between analytic gradients and central differences.
pub fn gradient_fd_deviation(polys: &[SparsePolynomial], point: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in polys {
        let analytic = DVector::from_vec(p.gradient(point));
        let fd = finite_difference_jacobian(
            |x| {
                vec![p
                    .terms()
                    .map(|(m, c)| {
                        let c = c.as_f64();
                        c * m.pairs().iter().map(|&(v, e)| x[v as usize].powi(e as i32)).product::<f64>()
                    })
                    .sum()]
            },
            point,
            FD_STEP,
        )?;
        let fd = DVector::from_iterator(point.len(), fd.row(0).iter().copied());
        worst = worst.max((analytic - fd).amax());
    }
    Ok(worst)
}
