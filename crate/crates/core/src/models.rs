//! Symmetric odeco node tensors, length-2 trains built from them, and the
//! non-orthogonal rank-limited trains used for comparison.
//!
//! A node is `T = Σ_i λ_i v_i⊗v_i⊗v_i` with orthonormal `v_i` stored as the
//! rows of `frame`. A train glues two nodes along their third modes:
//! `p_abcd = Σ_s T_abs S_cds`.

use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{contract, frobenius_norm, self_contract, symmetry_residual, DenseTensor};

/// Orthonormality tolerance on `frame · frameᵀ`.
pub const FRAME_TOL: f64 = 1e-12;

/// Deterministic generator for one work item.
pub fn rng_for_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OdecoModel {
    lambdas: Vec<f64>,
    frame: DMatrix<f64>,
}

impl OdecoModel {
    pub fn new(lambdas: Vec<f64>, frame: DMatrix<f64>) -> Result<Self> {
        let n = lambdas.len();
        if n < 2 {
            return Err(Error::InvalidModel(format!("n = {n}, need n >= 2")));
        }
        if frame.nrows() != n || frame.ncols() != n {
            return Err(Error::InvalidModel(format!(
                "frame is {}x{}, expected {n}x{n}",
                frame.nrows(),
                frame.ncols()
            )));
        }
        let err = orthonormality_error(&frame);
        if err > FRAME_TOL {
            return Err(Error::InvalidModel(format!(
                "frame rows are not orthonormal (max deviation {err:e})"
            )));
        }
        Ok(Self { lambdas, frame })
    }

    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Rows are the orthonormal vectors `v_i`.
    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    pub fn sample(n: usize, rng: &mut impl Rng) -> Result<Self> {
        let frame = haar_frame(n, rng)?;
        let lambdas = sample_weights(n, rng);
        Self::new(lambdas, frame)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainModel {
    pub left: OdecoModel,
    pub right: OdecoModel,
}

impl TrainModel {
    pub fn new(left: OdecoModel, right: OdecoModel) -> Result<Self> {
        if left.n() != right.n() {
            return Err(Error::InvalidModel(format!(
                "left n = {} but right n = {}",
                left.n(),
                right.n()
            )));
        }
        Ok(Self { left, right })
    }

    pub fn n(&self) -> usize {
        self.left.n()
    }

    /// Random train with Haar frames and weights bounded away from zero.
    pub fn sample(n: usize, seed: u64) -> Result<Self> {
        let mut rng = rng_for_seed(seed);
        let left = OdecoModel::sample(n, &mut rng)?;
        let right = OdecoModel::sample(n, &mut rng)?;
        Self::new(left, right)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            n: self.n(),
            left: NodeFile::from(&self.left),
            right: NodeFile::from(&self.right),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(s)?;
        let left = file.left.into_model()?;
        let right = file.right.into_model()?;
        if left.n() != file.n {
            return Err(Error::InvalidModel(format!(
                "declared n = {} but nodes have n = {}",
                file.n,
                left.n()
            )));
        }
        Self::new(left, right)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    n: usize,
    left: NodeFile,
    right: NodeFile,
}

#[derive(Serialize, Deserialize)]
struct NodeFile {
    lambdas: Vec<f64>,
    frame: Vec<Vec<f64>>,
}

impl From<&OdecoModel> for NodeFile {
    fn from(m: &OdecoModel) -> Self {
        let frame = m
            .frame
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        Self {
            lambdas: m.lambdas.clone(),
            frame,
        }
    }
}

impl NodeFile {
    fn into_model(self) -> Result<OdecoModel> {
        let n = self.lambdas.len();
        if self.frame.len() != n || self.frame.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidModel(format!("frame must be {n}x{n}")));
        }
        let frame = DMatrix::from_fn(n, n, |i, j| self.frame[i][j]);
        OdecoModel::new(self.lambdas, frame)
    }
}

/// Non-orthogonal symmetric model `Σ_i λ_i u_i^{⊗3}` with unit `u_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct GenericRankModel {
    n: usize,
    lambdas: Vec<f64>,
    directions: Vec<Vec<f64>>,
}

impl GenericRankModel {
    pub fn new(n: usize, lambdas: Vec<f64>, directions: Vec<Vec<f64>>) -> Result<Self> {
        let r = lambdas.len();
        if n < 2 {
            return Err(Error::InvalidModel(format!("n = {n}, need n >= 2")));
        }
        if r > n || directions.len() != r {
            return Err(Error::InvalidModel(format!(
                "need r <= n weights and r directions, got r = {r}, {} directions, n = {n}",
                directions.len()
            )));
        }
        for u in &directions {
            if u.len() != n {
                return Err(Error::InvalidModel(format!("direction of length {}", u.len())));
            }
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > FRAME_TOL {
                return Err(Error::InvalidModel(format!("direction has norm {norm}")));
            }
        }
        Ok(Self {
            n,
            lambdas,
            directions,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    /// `r` independent uniformly random unit directions.
    pub fn sample(n: usize, r: usize, rng: &mut impl Rng) -> Result<Self> {
        let directions = (0..r).map(|_| random_unit(n, rng)).collect();
        let lambdas = sample_weights(r, rng);
        Self::new(n, lambdas, directions)
    }

    /// Rank-2 model whose two directions have inner product `overlap`.
    pub fn planted_pair(n: usize, overlap: f64, rng: &mut impl Rng) -> Result<Self> {
        if !(-1.0..=1.0).contains(&overlap) {
            return Err(Error::InvalidModel(format!("overlap {overlap} outside [-1, 1]")));
        }
        let frame = haar_frame(n, rng)?;
        let u1: Vec<f64> = frame.row(0).iter().copied().collect();
        let s = (1.0 - overlap * overlap).sqrt();
        let u2: Vec<f64> = frame
            .row(0)
            .iter()
            .zip(frame.row(1).iter())
            .map(|(a, b)| overlap * a + s * b)
            .collect();
        let u2 = normalize(u2);
        Self::new(n, sample_weights(2, rng), vec![u1, u2])
    }

    pub fn build(&self) -> DenseTensor<f64> {
        symmetric_cube_sum(self.n, &self.lambdas, self.directions.iter().map(|u| u.as_slice()))
    }
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

fn random_unit(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    normalize((0..n).map(|_| rng.sample(StandardNormal)).collect())
}

/// Max entry of `|F·Fᵀ − I|`.
pub fn orthonormality_error(frame: &DMatrix<f64>) -> f64 {
    let gram = frame * frame.transpose();
    let n = gram.nrows();
    (gram - DMatrix::<f64>::identity(n, n)).amax()
}

/// Weights drawn uniformly from `[-2, -0.5] ∪ [0.5, 2]`.
pub fn sample_weights(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let magnitude = rng.random_range(0.5..=2.0);
            if rng.random_bool(0.5) {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect()
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs
/// fixed so that R has a positive diagonal. Rows (equivalently columns) are
/// orthonormal.
pub fn haar_frame(n: usize, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::InvalidModel(format!("n = {n}, need n >= 2")));
    }
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q.transpose())
}

pub fn sample_orthonormal_frame(n: usize, seed: u64) -> Result<DMatrix<f64>> {
    haar_frame(n, &mut rng_for_seed(seed))
}

fn symmetric_cube_sum<'a>(
    n: usize,
    lambdas: &[f64],
    vectors: impl Iterator<Item = &'a [f64]>,
) -> DenseTensor<f64> {
    let mut data = vec![0.0; n * n * n];
    for (&lambda, v) in lambdas.iter().zip(vectors) {
        for a in 0..n {
            for b in 0..n {
                let ab = lambda * v[a] * v[b];
                for c in 0..n {
                    data[(a * n + b) * n + c] += ab * v[c];
                }
            }
        }
    }
    DenseTensor::new(vec![n, n, n], data).expect("cube dims")
}

/// `Σ_i λ_i v_i⊗v_i⊗v_i`.
pub fn build_odeco(model: &OdecoModel) -> DenseTensor<f64> {
    let rows: Vec<Vec<f64>> = model
        .frame
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect();
    symmetric_cube_sum(model.n(), &model.lambdas, rows.iter().map(|r| r.as_slice()))
}

/// Contraction of the two node tensors along their third modes.
pub fn build_train(model: &TrainModel) -> DenseTensor<f64> {
    contract(&build_odeco(&model.left), &build_odeco(&model.right), 2, 2)
        .expect("node tensors share n")
}

/// `p_abcd = Σ_{i,j} λ_i μ_j v_ia v_ib w_jc w_jd ⟨v_i, w_j⟩`, evaluated from
/// raw weights and frames (rows are the vectors). Orthonormality is not
/// required, which lets the parametrization Jacobian reuse it.
pub fn train_closed_form(
    lambdas: &[f64],
    v: &DMatrix<f64>,
    mus: &[f64],
    w: &DMatrix<f64>,
) -> DenseTensor<f64> {
    let n = v.ncols();
    let inner = v * w.transpose();
    let mut data = vec![0.0; n * n * n * n];
    for i in 0..lambdas.len() {
        for j in 0..mus.len() {
            let coeff = lambdas[i] * mus[j] * inner[(i, j)];
            if coeff == 0.0 {
                continue;
            }
            for a in 0..n {
                for b in 0..n {
                    let ab = coeff * v[(i, a)] * v[(i, b)];
                    for c in 0..n {
                        let abc = ab * w[(j, c)];
                        let base = ((a * n + b) * n + c) * n;
                        for d in 0..n {
                            data[base + d] += abc * w[(j, d)];
                        }
                    }
                }
            }
        }
    }
    DenseTensor::new(vec![n; 4], data).expect("train dims")
}

pub fn build_train_closed_form(model: &TrainModel) -> DenseTensor<f64> {
    train_closed_form(
        &model.left.lambdas,
        &model.left.frame,
        &model.right.lambdas,
        &model.right.frame,
    )
}

/// Train whose nodes are the (not necessarily orthogonal) models.
pub fn build_generic_train(
    left: &GenericRankModel,
    right: &GenericRankModel,
) -> Result<DenseTensor<f64>> {
    if left.n != right.n {
        return Err(Error::InvalidModel(format!(
            "left n = {} but right n = {}",
            left.n, right.n
        )));
    }
    contract(&left.build(), &right.build(), 2, 2)
}

/// How `certify_odeco` should read its input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    /// Symmetric input: one contraction along the first mode, which must be
    /// fully symmetric in all `2d − 2` remaining indices.
    Symmetric,
    /// Arbitrary input: for every mode `q`, `T •_q T` must be symmetric under
    /// each swap `i_ℓ ↔ j_ℓ`.
    General,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdecoCertificate {
    /// Worst symmetry violation, normalized by `‖t‖²`.
    pub residual: f64,
    pub pass: bool,
}

/// Odeco test through the symmetries of self-contractions.
pub fn certify_odeco(
    t: &DenseTensor<f64>,
    tol: f64,
    symmetry: Symmetry,
) -> Result<OdecoCertificate> {
    let d = t.order();
    if d < 3 {
        return Err(Error::Precondition(format!(
            "certification needs order >= 3, got {d}"
        )));
    }
    let mut worst = 0.0f64;
    match symmetry {
        Symmetry::Symmetric => {
            if t.cubical_side().is_none() {
                return Err(Error::DimensionMismatch(format!(
                    "symmetric input must be cubical, got {:?}",
                    t.dims()
                )));
            }
            let scale = t.max_abs().max(f64::MIN_POSITIVE);
            let own = symmetry_residual(t, &[(0..d).collect()])?;
            if own > 1e-12 * scale {
                return Err(Error::Precondition(format!(
                    "input declared symmetric has symmetry residual {own:e}"
                )));
            }
            let c = self_contract(t, 0)?;
            worst = symmetry_residual(&c, &[(0..2 * d - 2).collect()])?;
        }
        Symmetry::General => {
            for q in 0..d {
                let c = self_contract(t, q)?;
                let groups: Vec<Vec<usize>> = (0..d - 1).map(|l| vec![l, l + d - 1]).collect();
                worst = worst.max(symmetry_residual(&c, &groups)?);
            }
        }
    }
    let norm_sq = frobenius_norm(t).powi(2);
    let residual = if norm_sq > 0.0 { worst / norm_sq } else { 0.0 };
    Ok(OdecoCertificate {
        residual,
        pass: residual <= tol,
    })
}
