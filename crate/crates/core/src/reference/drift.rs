//! Closed-form density ratio and bridge drifts for Gaussian-mixture targets.
//!
//! For a target `p = sum_i w_i N(mu_i, v_i I)`, smoothing by `sigma` gives a
//! mixture with variances `V_i = v_i + sigma^2`, and
//!
//! * `f(x) = q_sigma(x) / N(x; 0, tau I)`,
//! * `D2(t, x) = grad log q_{sqrt(1-t) sigma}(x)`,
//! * `D1(t, x) = grad log E_{z ~ N(0, tau I)} f(x + sqrt(1-t) z)`.
//!
//! Writing `s = 1 - t` and `D_i = s tau + t V_i`, each component contributes
//!
//! ```text
//! log E_i = log w_i - d/2 log(D_i / tau) - t |mu_i|^2 / (2 D_i)
//!           + mu_i . x / D_i + (V_i - tau) |x|^2 / (2 tau D_i)
//! grad_i  = (tau mu_i + (V_i - tau) x) / (tau D_i)
//! ```
//!
//! and `D1` is the `E_i`-weighted average of `grad_i`. Both expressions stay
//! finite for every `t` in `[0, 1]` and reduce to `log f` and `grad log f` at
//! `t = 1`.

use crate::error::{dim, invalid, Result};
use crate::reference::mixture::{log_sum_exp, softmax_in_place, GaussianMixture, IsotropicGaussian};

fn check_scales(sigma: f64, tau: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(invalid(format!("sigma must be positive, got {sigma}")));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(invalid(format!("tau must be positive, got {tau}")));
    }
    Ok(())
}

fn check_dim(g: &GaussianMixture, x: &[f64]) -> Result<()> {
    if x.len() != g.dim() {
        return Err(dim(format!("point has {} coordinates, target is {}-dimensional", x.len(), g.dim())));
    }
    Ok(())
}

/// `log f(x) = log q_sigma(x) - log N(x; 0, tau I)`.
pub fn log_density_ratio_exact(g: &GaussianMixture, sigma: f64, tau: f64, x: &[f64]) -> Result<f64> {
    check_scales(sigma, tau)?;
    let reference = IsotropicGaussian::new(g.dim(), tau)?;
    Ok(g.smooth(sigma)?.log_pdf(x)? - reference.log_pdf(x))
}

/// `f(x)`. Returns `+inf` (with a diagnostic on stderr) when `f` overflows,
/// which only happens far outside the support of interest.
pub fn density_ratio_exact(g: &GaussianMixture, sigma: f64, tau: f64, x: &[f64]) -> Result<f64> {
    let lf = log_density_ratio_exact(g, sigma, tau, x)?;
    let f = lf.exp();
    if f.is_infinite() {
        eprintln!("warning: density ratio overflows at {x:?} (log f = {lf})");
    }
    Ok(f)
}

/// `grad log f(x) = grad log q_sigma(x) + x / tau`.
pub fn grad_log_density_ratio_exact(g: &GaussianMixture, sigma: f64, tau: f64, x: &[f64]) -> Result<Vec<f64>> {
    check_scales(sigma, tau)?;
    let mut s = g.smooth(sigma)?.score(x)?;
    for (v, xi) in s.iter_mut().zip(x) {
        *v += xi / tau;
    }
    Ok(s)
}

fn check_time(t: f64, allow_one: bool) -> Result<()> {
    let ok = if allow_one { (0.0..=1.0).contains(&t) } else { (0.0..1.0).contains(&t) };
    if !ok {
        let range = if allow_one { "[0, 1]" } else { "[0, 1)" };
        return Err(invalid(format!("time must lie in {range}, got {t}")));
    }
    Ok(())
}

/// Stage-2 drift `grad log q_{sqrt(1-t) sigma}(x)`.
pub fn drift_stage2_exact(g: &GaussianMixture, sigma: f64, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    check_time(t, true)?;
    if !(sigma > 0.0) {
        return Err(invalid(format!("sigma must be positive, got {sigma}")));
    }
    g.smooth((1.0 - t).sqrt() * sigma)?.score(x)
}

/// Per-component `log E_i` and `D_i` for the stage-1 potential.
fn stage1_terms(g: &GaussianMixture, sigma: f64, tau: f64, t: f64, x: &[f64], log_e: &mut [f64], dens: &mut [f64]) {
    let s = 1.0 - t;
    let d = g.dim() as f64;
    let r2: f64 = x.iter().map(|v| v * v).sum();
    for i in 0..g.n_components() {
        let mu = &g.means()[i];
        let big_v = g.variances()[i] + sigma * sigma;
        let di = s * tau + t * big_v;
        let mu2: f64 = mu.iter().map(|v| v * v).sum();
        let mux: f64 = mu.iter().zip(x).map(|(a, b)| a * b).sum();
        log_e[i] = g.weights()[i].ln() - 0.5 * d * (di / tau).ln() - t * mu2 / (2.0 * di)
            + mux / di
            + (big_v - tau) * r2 / (2.0 * tau * di);
        dens[i] = di;
    }
}

/// `log E_{z ~ N(0, tau I)} f(x + sqrt(1-t) z)` for `t` in `[0, 1]`; equals
/// `log f(x)` at `t = 1`.
pub fn log_stage1_potential(g: &GaussianMixture, sigma: f64, tau: f64, t: f64, x: &[f64]) -> Result<f64> {
    check_scales(sigma, tau)?;
    check_time(t, true)?;
    check_dim(g, x)?;
    let k = g.n_components();
    let (mut log_e, mut dens) = (vec![0.0; k], vec![0.0; k]);
    stage1_terms(g, sigma, tau, t, x, &mut log_e, &mut dens);
    Ok(log_sum_exp(&log_e))
}

/// Stage-1 drift `D1(t, x)` for `t` in `[0, 1)`.
pub fn drift_stage1_exact(g: &GaussianMixture, sigma: f64, tau: f64, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    check_scales(sigma, tau)?;
    check_time(t, false)?;
    check_dim(g, x)?;
    let k = g.n_components();
    let (mut w, mut dens) = (vec![0.0; k], vec![0.0; k]);
    stage1_terms(g, sigma, tau, t, x, &mut w, &mut dens);
    softmax_in_place(&mut w);
    let mut out = vec![0.0; g.dim()];
    for i in 0..k {
        let big_v = g.variances()[i] + sigma * sigma;
        let scale = w[i] / (tau * dens[i]);
        for (o, (mu, xi)) in out.iter_mut().zip(g.means()[i].iter().zip(x)) {
            *o += scale * (tau * mu + (big_v - tau) * xi);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    fn npdf(x: f64, mean: f64, var: f64) -> f64 {
        (-(x - mean) * (x - mean) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
    }

    /// `E_{z ~ N(0, tau I)} f(x + sqrt(1-t) z)` by direct 1D quadrature of the
    /// defining integral, one coordinate at a time per component (isotropic
    /// components factorize). Uses only densities, none of the closed form.
    fn stage1_potential_quadrature(g: &GaussianMixture, sigma: f64, tau: f64, t: f64, x: &[f64], n: usize) -> f64 {
        let s = 1.0 - t;
        let mut total = 0.0;
        for i in 0..g.n_components() {
            let var = g.variances()[i] + sigma * sigma;
            let mut prod = g.weights()[i];
            for (j, xj) in x.iter().enumerate() {
                let mu = g.means()[i][j];
                // integrand over w = x + sqrt(1-t) z: q(w) / phi_tau(w) * N(w; x, s tau)
                prod *= simpson(|w| npdf(w, mu, var) / npdf(w, 0.0, tau) * npdf(w, *xj, s * tau), -30.0, 30.0, n);
            }
            total += prod;
        }
        total
    }

    fn drift1_quadrature(g: &GaussianMixture, sigma: f64, tau: f64, t: f64, x: &[f64], n: usize) -> Vec<f64> {
        let h = 1e-4;
        (0..x.len())
            .map(|j| {
                let mut xp = x.to_vec();
                xp[j] += h;
                let mut xm = x.to_vec();
                xm[j] -= h;
                (stage1_potential_quadrature(g, sigma, tau, t, &xp, n).ln()
                    - stage1_potential_quadrature(g, sigma, tau, t, &xm, n).ln())
                    / (2.0 * h)
            })
            .collect()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn gaussian_ratio_at_origin() {
        let g = GaussianMixture::gaussian(vec![0.0, 0.0], 0.25).unwrap();
        let f0 = density_ratio_exact(&g, 1.0, 2.0, &[0.0, 0.0]).unwrap();
        assert!((f0 - 1.6).abs() < 1e-12, "{f0}");
    }

    #[test]
    fn matched_variance_ratio_is_one() {
        let (sigma, tau) = (1.0, 5.0);
        let g = GaussianMixture::gaussian(vec![0.0, 0.0], tau - sigma * sigma).unwrap();
        for x in [[0.0, 0.0], [3.0, -1.0], [-7.5, 2.2]] {
            let f = density_ratio_exact(&g, sigma, tau, &x).unwrap();
            assert!((f - 1.0).abs() < 1e-12);
            for t in [0.0, 0.3, 0.9] {
                let d1 = drift_stage1_exact(&g, sigma, tau, t, &x).unwrap();
                assert!(d1.iter().all(|v| v.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn log_ratio_difference_matches_quadrature() {
        // q_sigma(x) = int p(y) phi_sigma(x - y) dy evaluated numerically in 1D.
        let g = GaussianMixture::new(vec![0.3, 0.7], vec![vec![-1.0], vec![2.0]], vec![0.2, 0.5]).unwrap();
        let (sigma, tau) = (0.8, 3.0);
        let q = |x: f64| simpson(|y| g.log_pdf(&[y]).unwrap().exp() * npdf(x, y, sigma * sigma), -25.0, 25.0, 100_000);
        let log_f_quad = |x: f64| q(x).ln() - npdf(x, 0.0, tau).ln();
        for x in [-2.5, -0.3, 1.1, 3.7] {
            let exact = log_density_ratio_exact(&g, sigma, tau, &[x]).unwrap()
                - log_density_ratio_exact(&g, sigma, tau, &[0.0]).unwrap();
            let quad = log_f_quad(x) - log_f_quad(0.0);
            assert!((exact - quad).abs() <= 1e-8 * quad.abs().max(1e-3), "{exact} vs {quad}");
        }
    }

    #[test]
    fn stage2_gaussian_analytic() {
        let s2 = 0.3;
        let sigma = 1.2;
        let g = GaussianMixture::gaussian(vec![0.0, 0.0], s2).unwrap();
        for t in [0.0, 0.25, 0.5, 0.99, 1.0] {
            let x = [0.7, -1.9];
            let d = drift_stage2_exact(&g, sigma, t, &x).unwrap();
            let var = s2 + (1.0 - t) * sigma * sigma;
            for j in 0..2 {
                assert!((d[j] + x[j] / var).abs() < 1e-12);
            }
        }
        let six = GaussianMixture::six_modes();
        assert_eq!(drift_stage2_exact(&six, 1.0, 1.0, &[1.0, 2.0]).unwrap(), six.score(&[1.0, 2.0]).unwrap());
        assert!(drift_stage2_exact(&six, 1.0, 0.4, &[0.0, 0.0]).unwrap().iter().all(|v| v.abs() < 1e-9));
        assert!(drift_stage2_exact(&six, 1.0, 1.5, &[0.0, 0.0]).is_err());
        assert!(drift_stage2_exact(&six, 1.0, -0.1, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn stage1_symmetric_origin() {
        let six = GaussianMixture::six_modes();
        for t in [0.0, 0.3, 0.8, 0.999] {
            let d = drift_stage1_exact(&six, 1.0, 5.0, t, &[0.0, 0.0]).unwrap();
            assert!(d.iter().all(|v| v.abs() < 1e-9), "{d:?}");
        }
        assert!(drift_stage1_exact(&six, 1.0, 5.0, 1.0, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn stage1_potential_at_one_is_log_ratio() {
        let six = GaussianMixture::six_modes();
        for x in [[0.0, 0.0], [4.0, 1.0], [-3.0, -3.0]] {
            let a = log_stage1_potential(&six, 1.0, 5.0, 1.0, &x).unwrap();
            let b = log_density_ratio_exact(&six, 1.0, 5.0, &x).unwrap();
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn stage1_gaussian_matches_quadrature() {
        let g = GaussianMixture::gaussian(vec![0.0, 0.0], 0.25).unwrap();
        let (sigma, tau) = (1.0, 2.0);
        for t in [0.0, 0.3, 0.7, 0.9] {
            for x in [[0.5, -0.2], [1.5, 2.0], [-2.0, 0.1]] {
                let exact = drift_stage1_exact(&g, sigma, tau, t, &x).unwrap();
                let quad = drift1_quadrature(&g, sigma, tau, t, &x, 60_000);
                for j in 0..2 {
                    assert!(close(exact[j], quad[j], 1e-6), "t {t} x {x:?}: {exact:?} vs {quad:?}");
                }
                let lp = log_stage1_potential(&g, sigma, tau, t, &x).unwrap();
                let lq = stage1_potential_quadrature(&g, sigma, tau, t, &x, 60_000).ln();
                assert!(close(lp, lq, 1e-8));
            }
        }
    }

    #[test]
    fn stage1_limit_identity() {
        let six = GaussianMixture::six_modes();
        let (sigma, tau) = (1.0, 5.0);
        for i in 0..21 {
            for j in 0..21 {
                let x = [-6.0 + 0.6 * i as f64, -6.0 + 0.6 * j as f64];
                let limit = grad_log_density_ratio_exact(&six, sigma, tau, &x).unwrap();
                let near = drift_stage1_exact(&six, sigma, tau, 0.999, &x).unwrap();
                let nearer = drift_stage1_exact(&six, sigma, tau, 1.0 - 1e-6, &x).unwrap();
                for k in 0..2 {
                    // the gap shrinks linearly in 1 - t
                    assert!(close(near[k], limit[k], 1e-2), "{x:?}: {near:?} vs {limit:?}");
                    assert!(close(nearer[k], limit[k], 1e-5), "{x:?}: {nearer:?} vs {limit:?}");
                }
            }
        }
    }

    #[test]
    fn six_mode_grid_matches_oracles() {
        let six = GaussianMixture::six_modes();
        let (sigma, tau) = (1.0, 5.0);
        let h = 1e-5;
        for i in 0..21 {
            for j in 0..21 {
                let x = [-6.0 + 0.6 * i as f64, -6.0 + 0.6 * j as f64];
                for t in [0.0, 0.5] {
                    let exact = drift_stage1_exact(&six, sigma, tau, t, &x).unwrap();
                    let quad = drift1_quadrature(&six, sigma, tau, t, &x, 12_000);
                    for k in 0..2 {
                        assert!(close(exact[k], quad[k], 1e-6), "D1 t {t} {x:?}: {exact:?} vs {quad:?}");
                    }
                }
                for t in [0.0, 0.5, 1.0] {
                    let d2 = drift_stage2_exact(&six, sigma, t, &x).unwrap();
                    let q = six.smooth((1.0 - t).sqrt() * sigma).unwrap();
                    for k in 0..2 {
                        let mut xp = x;
                        xp[k] += h;
                        let mut xm = x;
                        xm[k] -= h;
                        let fd = (q.log_pdf(&xp).unwrap() - q.log_pdf(&xm).unwrap()) / (2.0 * h);
                        assert!(close(d2[k], fd, 1e-6), "D2 t {t} {x:?}");
                    }
                }
            }
        }
    }
}
