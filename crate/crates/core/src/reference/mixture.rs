use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{dim, invalid, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

/// Mixture of isotropic Gaussians `sum_i w_i N(mu_i, v_i I)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureSpec", into = "MixtureSpec")]
pub struct GaussianMixture {
    dim: usize,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<f64>,
}

/// Plain-text form of a mixture, as read from and written to mixture files.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub d: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
}

impl TryFrom<MixtureSpec> for GaussianMixture {
    type Error = crate::Error;

    fn try_from(s: MixtureSpec) -> Result<Self> {
        let g = GaussianMixture::new(s.weights, s.means, s.variances)?;
        if g.dim != s.d {
            return Err(dim(format!("mixture declares d = {} but means have {}", s.d, g.dim)));
        }
        Ok(g)
    }
}

impl From<GaussianMixture> for MixtureSpec {
    fn from(g: GaussianMixture) -> Self {
        MixtureSpec { d: g.dim, weights: g.weights, means: g.means, variances: g.variances }
    }
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Normalize log-weights in place into probabilities.
pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in v.iter_mut() {
        *x = (*x - m).exp();
        total += *x;
    }
    v.iter_mut().for_each(|x| *x /= total);
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, variances: Vec<f64>) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(invalid("mixture needs at least one component"));
        }
        if means.len() != k || variances.len() != k {
            return Err(dim(format!("{k} weights but {} means and {} variances", means.len(), variances.len())));
        }
        let d = means[0].len();
        if d == 0 || means.iter().any(|m| m.len() != d) {
            return Err(dim("means must share a nonzero dimension"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(invalid("mixture weights must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("mixture weights sum to {total}, not 1")));
        }
        if variances.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(invalid("component variances must be positive and finite"));
        }
        if means.iter().flatten().any(|m| !m.is_finite()) {
            return Err(invalid("component means must be finite"));
        }
        Ok(Self { dim: d, weights, means, variances })
    }

    /// A single Gaussian `N(mean, variance I)`.
    pub fn gaussian(mean: Vec<f64>, variance: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![mean], vec![variance])
    }

    /// `k` equal-weight components on a circle, component `j` at angle
    /// `j * 360 / k` degrees.
    pub fn ring(k: usize, radius: f64, variance: f64) -> Result<Self> {
        let means = (0..k)
            .map(|j| {
                let a = 2.0 * PI * j as f64 / k as f64;
                vec![radius * a.cos(), radius * a.sin()]
            })
            .collect();
        Self::new(vec![1.0 / k as f64; k], means, vec![variance; k])
    }

    /// Six modes at radius 5 with variance 0.01, placed every 60 degrees
    /// starting on the positive x axis.
    pub fn six_modes() -> Self {
        let mut g = Self::ring(6, 5.0, 0.01).expect("valid preset");
        // 1/6 * 6 can miss 1 by an ulp; pin exact equal weights
        g.weights = vec![1.0 / 6.0; 6];
        g
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// Mixture mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (w, m) in self.weights.iter().zip(&self.means) {
            for (o, v) in out.iter_mut().zip(m) {
                *o += w * v;
            }
        }
        out
    }

    /// Per-coordinate second moment `E[x_j^2]`, equal across coordinates only
    /// for symmetric mixtures.
    pub fn second_moment(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for ((w, m), v) in self.weights.iter().zip(&self.means).zip(&self.variances) {
            for (o, mu) in out.iter_mut().zip(m) {
                *o += w * (v + mu * mu);
            }
        }
        out
    }

    pub fn sample(&self, n: usize, rng: &mut Rng) -> Matrix {
        let mut cumulative = Vec::with_capacity(self.weights.len());
        let mut acc = 0.0;
        for w in &self.weights {
            acc += w;
            cumulative.push(acc);
        }
        let mut out = Matrix::zeros(n, self.dim);
        for i in 0..n {
            let u = rng.uniform() * acc;
            let c = cumulative.iter().position(|&c| u < c).unwrap_or(self.weights.len() - 1);
            let sd = self.variances[c].sqrt();
            let row = out.row_mut(i);
            for (r, mu) in row.iter_mut().zip(&self.means[c]) {
                *r = mu + sd * rng.normal();
            }
        }
        out
    }

    /// Convolution with `N(0, s^2 I)`: every variance grows by `s^2`.
    pub fn smooth(&self, s: f64) -> Result<Self> {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(invalid(format!("smoothing std must be >= 0, got {s}")));
        }
        let mut g = self.clone();
        g.variances.iter_mut().for_each(|v| *v += s * s);
        Ok(g)
    }

    fn component_log_terms(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim as f64;
        for (i, o) in out.iter_mut().enumerate() {
            let v = self.variances[i];
            *o = self.weights[i].ln() - 0.5 * d * (2.0 * PI * v).ln() - sq_dist(x, &self.means[i]) / (2.0 * v);
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(dim(format!("point has {} coordinates, mixture is {}-dimensional", x.len(), self.dim)));
        }
        Ok(())
    }

    pub fn log_pdf(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let mut terms = vec![0.0; self.n_components()];
        self.component_log_terms(x, &mut terms);
        Ok(log_sum_exp(&terms))
    }

    /// Posterior component probabilities at `x`.
    pub fn responsibilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let mut r = vec![0.0; self.n_components()];
        self.component_log_terms(x, &mut r);
        softmax_in_place(&mut r);
        Ok(r)
    }

    /// `grad log p(x) = sum_i r_i(x) (mu_i - x) / v_i`.
    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = self.responsibilities(x)?;
        let mut out = vec![0.0; self.dim];
        for (i, ri) in r.iter().enumerate() {
            let scale = ri / self.variances[i];
            for (o, (xj, mj)) in out.iter_mut().zip(x.iter().zip(&self.means[i])) {
                *o += scale * (mj - xj);
            }
        }
        Ok(out)
    }
}

/// `N(0, variance I)` in `dim` dimensions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsotropicGaussian {
    dim: usize,
    variance: f64,
}

impl IsotropicGaussian {
    pub fn new(dim: usize, variance: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(invalid(format!("variance must be positive, got {variance}")));
        }
        Ok(Self { dim, variance })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        -0.5 * self.dim as f64 * (2.0 * PI * self.variance).ln() - r2 / (2.0 * self.variance)
    }

    pub fn sample(&self, n: usize, rng: &mut Rng) -> Matrix {
        let sd = self.variance.sqrt();
        let mut data = rng.normals(n * self.dim);
        data.iter_mut().for_each(|v| *v *= sd);
        Matrix::new(n, self.dim, data).expect("sized above")
    }
}

/// Brownian transition density with diffusion coefficient `tau`:
/// `[2 pi tau (t - s)]^(-d/2) exp(-|x - y|^2 / (2 tau (t - s)))`.
pub fn heat_kernel(tau: f64, s: f64, x: &[f64], t: f64, y: &[f64]) -> Result<f64> {
    if !(t > s) {
        return Err(invalid(format!("heat kernel needs t > s, got s = {s}, t = {t}")));
    }
    if !(tau > 0.0) {
        return Err(invalid(format!("tau must be positive, got {tau}")));
    }
    if x.len() != y.len() {
        return Err(dim("heat kernel endpoints differ in dimension"));
    }
    let var = tau * (t - s);
    let d = x.len() as f64;
    Ok((2.0 * PI * var).powf(-0.5 * d) * (-sq_dist(x, y) / (2.0 * var)).exp())
}
