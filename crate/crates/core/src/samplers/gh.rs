//! Generalized hyperbolic laws as normal variance-mean mixtures
//! `S = mu + X Delta beta + sqrt(X) N` with `X ~ GIG(lambda, delta, gamma)`,
//! `gamma = sqrt(alpha^2 - beta' Delta beta)` and `N ~ N(0, Delta)`.

use super::gig::{GigParams, GigSampler};
use super::{fill_rows, MvnFactor, RngStream};
use crate::error::{invalid, Result};
use crate::levy::check_psd;
use crate::sample::SampleMatrix;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhParams {
    pub lambda: f64,
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub delta: f64,
    pub mu: Vec<f64>,
    /// Row-major `d x d` dispersion matrix with determinant 1.
    pub dispersion: Vec<Vec<f64>>,
}

impl GhParams {
    pub fn new(
        lambda: f64,
        alpha: f64,
        beta: Vec<f64>,
        delta: f64,
        mu: Vec<f64>,
        dispersion: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let p = Self { lambda, alpha, beta, delta, mu, dispersion };
        p.validate()?;
        Ok(p)
    }

    /// One-dimensional NIG (`lambda = -1/2`, `Delta = 1`).
    pub fn nig_1d(alpha: f64, beta: f64, delta: f64, mu: f64) -> Result<Self> {
        Self::new(-0.5, alpha, vec![beta], delta, vec![mu], vec![vec![1.0]])
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn dispersion_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.dispersion[i][j])
    }

    /// `Delta beta`.
    pub fn delta_beta(&self) -> Vec<f64> {
        (self.dispersion_matrix() * DVector::from_column_slice(&self.beta)).iter().copied().collect()
    }

    /// `beta' Delta beta`.
    pub fn beta_quadratic(&self) -> f64 {
        self.delta_beta().iter().zip(&self.beta).map(|(a, b)| a * b).sum()
    }

    /// `sqrt(alpha^2 - beta' Delta beta)`.
    pub fn gamma(&self) -> f64 {
        (self.alpha * self.alpha - self.beta_quadratic()).sqrt()
    }

    pub fn mixing(&self) -> GigParams {
        GigParams { lambda: self.lambda, delta: self.delta, gamma: self.gamma() }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 || self.beta.len() != d || self.dispersion.len() != d || self.dispersion.iter().any(|r| r.len() != d)
        {
            return invalid(format!("GH parameter dimensions disagree (mu has {d} entries)"));
        }
        if !(self.alpha > 0.0) {
            return invalid(format!("alpha must be positive, got {}", self.alpha));
        }
        let dm = self.dispersion_matrix();
        let eig = check_psd(&dm, 1e-12, 0.0)?;
        if eig.iter().any(|e| *e <= 0.0) {
            return invalid("dispersion matrix must be positive definite");
        }
        let det = dm.determinant();
        if (det - 1.0).abs() > 1e-8 {
            return invalid(format!("dispersion matrix must have determinant 1, got {det}"));
        }
        let q = self.beta_quadratic();
        if !(self.alpha * self.alpha > q) {
            return invalid(format!("need alpha^2 > beta' Delta beta ({} <= {q})", self.alpha * self.alpha));
        }
        self.mixing().validate()
    }

    /// Mean `mu + E[X] Delta beta`.
    pub fn mean(&self) -> Vec<f64> {
        let ex = super::gig::gig_mean(&self.mixing());
        self.mu.iter().zip(self.delta_beta()).map(|(m, db)| m + ex * db).collect()
    }
}

/// `n` draws from the GH law.
pub fn sample_gh(p: &GhParams, n: usize, stream: &RngStream) -> Result<SampleMatrix> {
    p.validate()?;
    let d = p.dim();
    let mixing = GigSampler::new(&p.mixing())?;
    let factor = MvnFactor::new(&p.dispersion_matrix())?;
    let db = p.delta_beta();
    let data = fill_rows(n, d, stream, |rng, row| {
        let x = mixing.sample(rng);
        let mut z = vec![0.0; d];
        factor.sample_into(rng, x.sqrt(), &mut z, row);
        for i in 0..d {
            row[i] += p.mu[i] + x * db[i];
        }
    });
    Ok(SampleMatrix::new(d, data)?.with_provenance(stream.provenance("gh")))
}

/// NIG process on `t_grid` built from independent NIG increments
/// (`delta dt`, `mu dt` over each step). Rows stack the path values at the
/// grid times: `[S_{t_1}, ..., S_{t_m}]`.
pub fn sample_nig_process(p: &GhParams, t_grid: &[f64], n: usize, stream: &RngStream) -> Result<SampleMatrix> {
    p.validate()?;
    if (p.lambda + 0.5).abs() > 1e-12 {
        return invalid(format!("NIG process needs lambda = -1/2, got {}", p.lambda));
    }
    if t_grid.is_empty() || t_grid[0] <= 0.0 || t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("time grid must be positive and strictly increasing");
    }
    let d = p.dim();
    let gamma = p.gamma();
    let factor = MvnFactor::new(&p.dispersion_matrix())?;
    let db = p.delta_beta();
    let mut steps = Vec::with_capacity(t_grid.len());
    let mut prev = 0.0;
    for &t in t_grid {
        let dt = t - prev;
        steps.push((dt, GigSampler::new(&GigParams { lambda: -0.5, delta: p.delta * dt, gamma })?));
        prev = t;
    }
    let width = d * t_grid.len();
    let data = fill_rows(n, width, stream, |rng, row| {
        let mut level = vec![0.0; d];
        let mut z = vec![0.0; d];
        let mut noise = vec![0.0; d];
        for (k, (dt, mix)) in steps.iter().enumerate() {
            let x = mix.sample(rng);
            factor.sample_into(rng, x.sqrt(), &mut z, &mut noise);
            for i in 0..d {
                level[i] += p.mu[i] * dt + x * db[i] + noise[i];
            }
            row[k * d..(k + 1) * d].copy_from_slice(&level);
        }
    });
    Ok(SampleMatrix::new(width, data)?.with_provenance(stream.provenance("nig-process")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::gig_mean;
    use crate::stats;

    #[test]
    fn validation() {
        assert!(GhParams::nig_1d(1.0, 0.5, 1.0, 0.0).is_ok());
        assert!(GhParams::nig_1d(1.0, 1.0, 1.0, 0.0).is_err());
        let bad_det = GhParams::new(-0.5, 2.0, vec![0.0, 0.0], 1.0, vec![0.0, 0.0], vec![vec![2.0, 0.0], vec![0.0, 1.0]]);
        assert!(bad_det.is_err());
        let ok = GhParams::new(
            -0.5,
            2.0,
            vec![0.1, 0.2],
            1.0,
            vec![0.0, 0.0],
            vec![vec![1.25, 0.75], vec![0.75, 1.25]],
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn symmetric_mixture_moments() {
        let p = GhParams::nig_1d(1.5, 0.0, 1.0, 0.0).unwrap();
        let s = sample_gh(&p, 1_000_000, &RngStream::new(10, 0)).unwrap();
        let x = s.as_slice();
        assert!(stats::mean(x).abs() < 4.0 * stats::stderr(x));
        let ex = gig_mean(&p.mixing());
        assert!((ex - 1.0 / 1.5).abs() < 1e-10);
        let v = stats::variance(x);
        assert!((v - ex).abs() < 4.0 * stats::variance_stderr(x), "var {v} vs {ex}");
    }

    #[test]
    fn large_delta_is_nearly_normal() {
        let p = GhParams::nig_1d(1.0, 0.3, 2000.0, 0.0).unwrap();
        let s = sample_gh(&p, 200_000, &RngStream::new(11, 0)).unwrap();
        assert!(stats::skewness(s.as_slice()).abs() < 0.05);
        let small = GhParams::nig_1d(1.0, 0.3, 0.5, 0.0).unwrap();
        let s = sample_gh(&small, 200_000, &RngStream::new(11, 0)).unwrap();
        assert!(stats::skewness(s.as_slice()) > 0.5);
    }

    #[test]
    fn process_marginals() {
        let p = GhParams::nig_1d(2.0, 0.5, 1.0, 0.1).unwrap();
        let one = sample_nig_process(&p, &[1.0], 100_000, &RngStream::new(12, 0)).unwrap();
        let direct = sample_gh(&p, 100_000, &RngStream::new(12, 1)).unwrap();
        let d = stats::ks_two_sample(one.as_slice(), direct.as_slice());
        assert!(d < stats::ks_two_sample_band(0.01, 100_000, 100_000), "{d}");

        let two = sample_nig_process(&p, &[1.0, 2.0], 100_000, &RngStream::new(12, 2)).unwrap();
        let p2 = GhParams::nig_1d(2.0, 0.5, 2.0, 0.2).unwrap();
        let at2 = sample_gh(&p2, 100_000, &RngStream::new(12, 3)).unwrap();
        let d = stats::ks_two_sample(&two.column(1), at2.as_slice());
        assert!(d < stats::ks_two_sample_band(0.01, 100_000, 100_000), "{d}");

        let sym = GhParams::nig_1d(2.0, 0.0, 1.0, 0.0).unwrap();
        let paths = sample_nig_process(&sym, &[0.5, 1.0], 50_000, &RngStream::new(12, 4)).unwrap();
        let incr: Vec<f64> = paths.iter_rows().map(|r| r[1] - r[0]).collect();
        assert!(stats::skewness(&incr).abs() < 0.1);
        assert!(sample_nig_process(&GhParams::new(1.0, 2.0, vec![0.0], 1.0, vec![0.0], vec![vec![1.0]]).unwrap(), &[1.0], 1, &RngStream::new(0, 0)).is_err());
    }
}
