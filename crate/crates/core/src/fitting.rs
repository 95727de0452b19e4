//! Least-squares fits of hologron energetics and collapse-quality metrics.

use crate::error::{Error, Result};
use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use serde::{Deserialize, Serialize};

/// Design matrices with a larger singular-value ratio are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub names: Vec<String>,
    pub params: Vec<f64>,
    /// Square roots of the covariance diagonal.
    pub sigmas: Vec<f64>,
    pub window: (f64, f64),
    /// Euclidean norm of the residual vector.
    pub residual: f64,
    pub points: usize,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.params[i], self.sigmas[i]))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit results serialize")
    }
}

/// Ordinary least squares with covariance `s² (XᵀX)⁻¹`, `s² = RSS / (n - p)`.
pub struct LinearFit {
    pub beta: Vec<f64>,
    pub covariance: Mat<f64>,
    pub residual: f64,
}

pub fn linear_least_squares(design: &Mat<f64>, y: &[f64]) -> Result<LinearFit> {
    let (n, p) = (design.nrows(), design.ncols());
    if n < p || n == 0 {
        return Err(Error::FitDomain(format!("{n} points cannot determine {p} parameters")));
    }
    let sv = design.singular_values().map_err(|e| Error::Solver(format!("{e:?}")))?;
    let condition = sv[0] / sv[p - 1];
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::Conditioning(condition));
    }
    let gram = design.transpose() * design;
    let gram_inv = gram.partial_piv_lu().inverse();
    let rhs = Mat::from_fn(n, 1, |i, _| y[i]);
    let beta_m = &gram_inv * (design.transpose() * &rhs);
    let fitted = design * &beta_m;
    let residuals: Vec<f64> = (0..n).map(|i| y[i] - fitted[(i, 0)]).collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let s2 = if n > p { rss / (n - p) as f64 } else { 0.0 };
    let covariance = Mat::from_fn(p, p, |i, j| s2 * gram_inv[(i, j)]);
    Ok(LinearFit {
        beta: (0..p).map(|i| beta_m[(i, 0)]).collect(),
        covariance,
        residual: rss.sqrt(),
    })
}

fn sigmas(cov: &Mat<f64>) -> Vec<f64> {
    (0..cov.nrows()).map(|i| cov[(i, i)].max(0.0).sqrt()).collect()
}

/// Log-linear fit of `E = (mc²/2) exp(ρ/ℓ)` over `lo <= ρ <= hi`.
pub fn fit_single_particle(points: &[(f64, f64)], lo: f64, hi: f64) -> Result<FitResult> {
    let sel: Vec<(f64, f64)> = points.iter().copied().filter(|(r, _)| *r >= lo && *r <= hi).collect();
    if sel.len() < 4 {
        return Err(Error::FitDomain(format!("{} points in window [{lo}, {hi}], need 4", sel.len())));
    }
    if let Some((r, e)) = sel.iter().find(|(_, e)| !(*e > 0.0)) {
        return Err(Error::FitDomain(format!("non-positive energy {e} at radius {r}")));
    }
    let design = Mat::from_fn(sel.len(), 2, |i, j| if j == 0 { 1.0 } else { sel[i].0 });
    let y: Vec<f64> = sel.iter().map(|(_, e)| e.ln()).collect();
    let fit = linear_least_squares(&design, &y)?;
    let (a, b) = (fit.beta[0], fit.beta[1]);
    let s = sigmas(&fit.covariance);
    let mc2 = 2.0 * a.exp();
    Ok(FitResult {
        model: "1p".into(),
        names: vec!["inv_ell".into(), "ell".into(), "mc2".into()],
        params: vec![b, 1.0 / b, mc2],
        sigmas: vec![s[1], s[1] / (b * b), mc2 * s[0]],
        window: (lo, hi),
        residual: fit.residual,
        points: sel.len(),
    })
}

fn separation_window(points: &[(f64, f64)], dmin: f64, dmax: f64) -> Vec<(f64, f64)> {
    points.iter().copied().filter(|(d, _)| *d >= dmin && *d <= dmax).collect()
}

/// `Ṽ(d) = C1 - C2 exp(-d/ℓ)` with `ℓ` fixed.
pub fn fit_tail(points: &[(f64, f64)], ell: f64, dmin: f64, dmax: f64) -> Result<FitResult> {
    let sel = separation_window(points, dmin, dmax);
    let design = Mat::from_fn(sel.len(), 2, |i, j| if j == 0 { 1.0 } else { -(-sel[i].0 / ell).exp() });
    let y: Vec<f64> = sel.iter().map(|p| p.1).collect();
    let fit = linear_least_squares(&design, &y)?;
    Ok(FitResult {
        model: "tail".into(),
        names: vec!["C1".into(), "C2".into()],
        params: fit.beta.clone(),
        sigmas: sigmas(&fit.covariance),
        window: (dmin, dmax),
        residual: fit.residual,
        points: sel.len(),
    })
}

/// Multiplicities and exponents `Δ - 1` of the operator groups in the W model.
pub const W_GROUPS: [(f64, f64); 4] = [(1.0, 0.0), (4.0, 1.0), (2.0, 1.5), (6.0, 2.0)];

/// `Ṽ(d) = A + 4B e^{-d/ℓ} + 2C e^{-1.5d/ℓ} + 6D e^{-2d/ℓ}` with `ℓ` fixed.
pub fn fit_w(points: &[(f64, f64)], ell: f64, dmin: f64, dmax: f64) -> Result<FitResult> {
    fit_w_groups(points, ell, dmin, dmax, 4)
}

/// W model truncated to its first `groups` terms.
pub fn fit_w_groups(points: &[(f64, f64)], ell: f64, dmin: f64, dmax: f64, groups: usize) -> Result<FitResult> {
    let sel = separation_window(points, dmin, dmax);
    let design = Mat::from_fn(sel.len(), groups, |i, j| {
        let (mult, exponent) = W_GROUPS[j];
        mult * (-exponent * sel[i].0 / ell).exp()
    });
    let y: Vec<f64> = sel.iter().map(|p| p.1).collect();
    let fit = linear_least_squares(&design, &y)?;
    Ok(FitResult {
        model: "W".into(),
        names: ["A", "B", "C", "D"][..groups].iter().map(|s| s.to_string()).collect(),
        params: fit.beta.clone(),
        sigmas: sigmas(&fit.covariance),
        window: (dmin, dmax),
        residual: fit.residual,
        points: sel.len(),
    })
}

/// RMS spread across curves at each grid point, relative to the RMS value of the family.
pub fn family_spread(curves: &[Vec<f64>]) -> Result<f64> {
    if curves.len() < 2 {
        return Err(Error::Alignment(format!("need at least two curves, got {}", curves.len())));
    }
    let len = curves[0].len();
    if len == 0 || curves.iter().any(|c| c.len() != len) {
        return Err(Error::Alignment("curves have different lengths".into()));
    }
    let m = curves.len() as f64;
    let mut var = 0.0;
    let mut scale = 0.0;
    for k in 0..len {
        let mean = curves.iter().map(|c| c[k]).sum::<f64>() / m;
        var += curves.iter().map(|c| (c[k] - mean).powi(2)).sum::<f64>() / m;
        scale += curves.iter().map(|c| c[k] * c[k]).sum::<f64>() / m;
    }
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok((var / scale).sqrt())
}

/// Relative spread of the normalized family over that of the raw family.
pub fn collapse_quality(raw: &[Vec<f64>], normalized: &[Vec<f64>]) -> Result<f64> {
    if raw.len() != normalized.len() || raw.iter().zip(normalized).any(|(a, b)| a.len() != b.len()) {
        return Err(Error::Alignment("raw and normalized families differ in shape".into()));
    }
    let before = family_spread(raw)?;
    let after = family_spread(normalized)?;
    if before == 0.0 {
        return Ok(if after == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(after / before)
}

/// Standard deviation over absolute mean.
pub fn relative_spread(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean.abs()
}

/// Mean and standard error of a sample.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn exact_exponential_is_recovered() {
        let pts: Vec<(f64, f64)> = (2..12).map(|r| (r as f64, 1.25 * (0.69 * r as f64).exp())).collect();
        let fit = fit_single_particle(&pts, 4.0, 10.0).unwrap();
        assert!((fit.get("inv_ell").unwrap().0 - 0.69).abs() < 1e-10);
        assert!((fit.get("mc2").unwrap().0 - 2.5).abs() < 1e-10);
        assert!(fit.sigmas.iter().all(|s| *s < 1e-8));
        assert_eq!(fit.points, 7);
    }

    #[test]
    fn single_particle_domain_errors() {
        let pts = vec![(4.0, 1.0), (5.0, -1.0), (6.0, 2.0), (7.0, 3.0)];
        assert!(matches!(fit_single_particle(&pts, 4.0, 7.0), Err(Error::FitDomain(_))));
        assert!(matches!(fit_single_particle(&pts[..3], 4.0, 7.0), Err(Error::FitDomain(_))));
    }

    #[test]
    fn tail_and_w_recover_synthetic_parameters() {
        let ell = 1.0 / LN_2;
        let tail: Vec<(f64, f64)> = (1..12).map(|d| (d as f64, 0.08 - 13.6 * (-(d as f64) / ell).exp())).collect();
        let fit = fit_tail(&tail, ell, 3.0, 11.0).unwrap();
        assert!((fit.params[0] - 0.08).abs() < 1e-10 && (fit.params[1] - 13.6).abs() < 1e-9);
        let w = |d: f64| {
            0.08 + 4.0 * -3.4 * (-d / ell).exp() + 2.0 * 25.0 * (-1.5 * d / ell).exp() + 6.0 * -7.9 * (-2.0 * d / ell).exp()
        };
        let pts: Vec<(f64, f64)> = (1..10).map(|d| (d as f64, w(d as f64))).collect();
        let fit = fit_w(&pts, ell, 1.0, 9.0).unwrap();
        for (got, want) in fit.params.iter().zip([0.08, -3.4, 25.0, -7.9]) {
            assert!((got - want).abs() < 1e-8, "{got} {want}");
        }
        let restricted = fit_w_groups(&pts, ell, 1.0, 9.0, 1).unwrap();
        assert!(restricted.residual > fit.residual);
    }

    #[test]
    fn conditioning_is_checked() {
        let design = Mat::from_fn(4, 2, |i, _| i as f64);
        assert!(matches!(linear_least_squares(&design, &[0.0, 1.0, 2.0, 3.0]), Err(Error::Conditioning(_))));
    }

    #[test]
    fn collapse_quality_limits() {
        let raw = vec![vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0], vec![4.0, 8.0, 12.0]];
        let same = vec![vec![1.0, 2.0, 3.0]; 3];
        assert_eq!(collapse_quality(&raw, &same).unwrap(), 0.0);
        assert!((collapse_quality(&raw, &raw).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(collapse_quality(&raw, &same[..2]), Err(Error::Alignment(_))));
        assert!(matches!(family_spread(&[vec![1.0]]), Err(Error::Alignment(_))));
    }

    #[test]
    fn stderr_of_constant_sample_is_zero() {
        let (m, s) = mean_stderr(&[2.0; 10]);
        assert_eq!((m, s), (2.0, 0.0));
        assert!((relative_spread(&[1.0, 3.0]) - 0.5).abs() < 1e-15);
    }
}
