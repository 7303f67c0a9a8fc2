//! Growth of the optimal bound with the far threshold, and exponent checks.
//!
//! If every admissible `σ` has `E_μ(σᵖ) ≤ OPT(T)` on pairs at distance at
//! least `T`, then `OPT(T)^{1/p}` caps how fast `σ` can grow: its log-log
//! slope in `T` bounds the compression exponent from above.

use rayon::prelude::*;

use crate::certsolver::{self, CertificateProblem};
use crate::cones::Exponent;
use crate::error::{Error, Result};
use crate::metric::{BoundFunction, FiniteMetricSpace};

/// The bound as a function of the threshold, with a power-law fit.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressionReport {
    pub p: Exponent,
    pub thresholds: Vec<f64>,
    /// `OPT(T)` per threshold.
    pub bounds: Vec<f64>,
    /// Slope of `log OPT(T)^{1/p}` against `log T` over the upper half of
    /// the thresholds.
    pub fitted_beta: f64,
    /// `exp` of the fitted intercept, so `OPT(T)^{1/p} ≈ K·T^β`.
    pub k_fit: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    /// Number of (largest) thresholds used by the fit.
    pub fitted_points: usize,
}

impl CompressionReport {
    /// `OPT(T)^{1/p}`: no admissible map can grow faster than this on far
    /// pairs, on average.
    pub fn growth_floor(&self) -> Vec<f64> {
        self.bounds.iter().map(|&b| self.p.root(b)).collect()
    }

    /// `fitted_beta` widened by the slope's standard error. A finite sweep
    /// only brackets the exponent.
    pub fn beta_interval(&self) -> (f64, f64) {
        let xs: Vec<f64> = self.fit_window().iter().map(|t| t.ln()).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let spread: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
        let width = if spread > 0.0 { self.residual / spread.sqrt() } else { 0.0 };
        (self.fitted_beta - width, self.fitted_beta + width)
    }

    fn fit_window(&self) -> &[f64] {
        &self.thresholds[self.thresholds.len() - self.fitted_points..]
    }
}

/// Fitted thresholds: the upper half, and never fewer than two.
fn window_len(n: usize) -> usize {
    n.div_ceil(2).max(2)
}

/// Least-squares line `y = a + b·x`; returns `(b, a, rms residual)`.
fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    (slope, intercept, (sse / n).sqrt())
}

/// Solves for every threshold (in parallel) and fits the growth exponent.
pub fn opt_curve(
    space: &FiniteMetricSpace,
    thresholds: &[f64],
    p: Exponent,
    rho_plus: &BoundFunction,
) -> Result<CompressionReport> {
    let mut ts = thresholds.to_vec();
    if ts.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::invalid("thresholds must be positive and finite"));
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    if ts.len() < 3 {
        return Err(Error::invalid(format!(
            "a compression fit needs at least 3 distinct thresholds, got {}",
            ts.len()
        )));
    }
    let bounds = ts
        .par_iter()
        .map(|&t| {
            let prob = CertificateProblem::new(space.clone(), t, p).with_rho_plus(rho_plus.clone());
            certsolver::solve(&prob).map(|(_, cert)| cert.bound)
        })
        .collect::<Result<Vec<f64>>>()?;
    let fitted_points = window_len(ts.len());
    let start = ts.len() - fitted_points;
    if bounds[start..].iter().any(|b| !(*b > 0.0)) {
        return Err(Error::Numerical("a fitted bound is not positive".into()));
    }
    let xs: Vec<f64> = ts[start..].iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = bounds[start..].iter().map(|&b| p.root(b).ln()).collect();
    let (fitted_beta, intercept, residual) = fit_line(&xs, &ys);
    Ok(CompressionReport {
        p,
        thresholds: ts,
        bounds,
        fitted_beta,
        k_fit: intercept.exp(),
        residual,
        fitted_points,
    })
}

/// Outcome of [`certify_exponent`] at one scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentVerdict {
    pub scale: f64,
    pub bound: f64,
    /// `(K·nᵝ)ᵖ`.
    pub allowed: f64,
    pub pass: bool,
}

/// Absolute slack when comparing a bound with `(K·nᵝ)ᵖ`.
pub const EXPONENT_TOL: f64 = 1e-6;

/// At each scale `n`, checks that the bound at threshold `n` (with
/// `ρ₊ = identity`) is at most `(K·nᵝ)ᵖ`.
pub fn certify_exponent(
    space: &FiniteMetricSpace,
    beta: f64,
    k: f64,
    scales: &[f64],
    p: Exponent,
) -> Result<Vec<ExponentVerdict>> {
    if !(beta.is_finite() && k.is_finite() && k >= 0.0) {
        return Err(Error::invalid("exponent and constant must be finite, constant nonnegative"));
    }
    scales
        .par_iter()
        .map(|&n| {
            let prob = CertificateProblem::new(space.clone(), n, p);
            let (_, cert) = certsolver::solve(&prob)?;
            let allowed = p.pow(k * n.powf(beta));
            Ok(ExponentVerdict {
                scale: n,
                bound: cert.bound,
                allowed,
                pass: cert.bound <= allowed + EXPONENT_TOL,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{from_graph, Graph};

    #[test]
    fn line_fit_recovers_exact_power() {
        let xs: Vec<f64> = [1.0f64, 2.0, 4.0].iter().map(|x| x.ln()).collect();
        let ys: Vec<f64> = [3.0f64, 6.0, 12.0].iter().map(|y| y.ln()).collect();
        let (b, a, r) = fit_line(&xs, &ys);
        assert!((b - 1.0).abs() < 1e-12);
        assert!((a.exp() - 3.0).abs() < 1e-12);
        assert!(r < 1e-12);
    }

    #[test]
    fn window_is_upper_half() {
        assert_eq!(window_len(3), 2);
        assert_eq!(window_len(4), 2);
        assert_eq!(window_len(5), 3);
    }

    #[test]
    fn too_few_thresholds_is_an_error() {
        let s = from_graph(&Graph::path(5)).unwrap();
        assert!(opt_curve(&s, &[2.0], Exponent::Two, &BoundFunction::Identity).is_err());
        assert!(opt_curve(&s, &[2.0, 2.0, 3.0], Exponent::Two, &BoundFunction::Identity).is_err());
    }

    #[test]
    fn path_has_linear_growth() {
        let s = from_graph(&Graph::path(9)).unwrap();
        let r = opt_curve(&s, &[2.0, 4.0, 8.0], Exponent::Two, &BoundFunction::Identity).unwrap();
        for (t, b) in r.thresholds.iter().zip(&r.bounds) {
            assert!((b - t * t).abs() < 1e-3 * t * t, "T={t} bound={b}");
        }
        assert!((r.fitted_beta - 1.0).abs() < 1e-3);
        let (lo, hi) = r.beta_interval();
        assert!(lo <= r.fitted_beta && r.fitted_beta <= hi);
    }

    #[test]
    fn exponent_checks_on_a_path() {
        let s = from_graph(&Graph::path(9)).unwrap();
        let scales = [2.0, 4.0];
        let linear = certify_exponent(&s, 1.0, 1.0, &scales, Exponent::Two).unwrap();
        assert!(linear.iter().all(|v| v.pass));
        let sqrt = certify_exponent(&s, 0.5, 1.0, &scales, Exponent::Two).unwrap();
        assert!(sqrt.iter().all(|v| !v.pass));
        let loose = certify_exponent(&s, 1.0, s.diameter(), &scales, Exponent::Two).unwrap();
        assert!(loose.iter().all(|v| v.pass));
    }
}
