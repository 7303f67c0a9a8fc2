//! Brute-force references for small spaces.
//!
//! [`best_min_far`] searches directly over point configurations, so its
//! value is a lower bound on the optimum. [`exhaustive_cut_opt`] solves the
//! `p = 1` problem over every cut with an independent LP solver.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::certsolver::CertificateProblem;
use crate::cones::{self, Exponent, PointConfiguration};
use crate::error::{Error, Result};
use crate::metric::{BoundFunction, FiniteMetricSpace};

/// Largest space accepted by [`exhaustive_cut_opt`].
pub const EXHAUSTIVE_MAX_POINTS: usize = 12;

/// Settings for [`best_min_far`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmbedSearchConfig {
    pub restarts: usize,
    pub steps: usize,
    /// Initial step size relative to the space's scale; it decays
    /// geometrically by a factor of 10⁵ over the run.
    pub step_size: f64,
    /// Embedding dimension, defaulting to the number of points.
    pub dimension: Option<usize>,
    /// Restart `i` draws its start from `seed + i`.
    pub seed: u64,
}

impl Default for EmbedSearchConfig {
    fn default() -> Self {
        EmbedSearchConfig {
            restarts: 8,
            steps: 4000,
            step_size: 0.05,
            dimension: None,
            seed: 0,
        }
    }
}

/// The search objective. Any configuration becomes feasible after scaling
/// by its worst constraint ratio, so the search maximizes the scale-free
/// quantity `log min_far ‖xᵢ − xⱼ‖² − log max_constrained ‖xᵢ − xⱼ‖²/uᵢⱼ`,
/// with both extremes smoothed by log-sum-exp.
#[derive(Debug, Clone)]
pub struct SearchObjective {
    n: usize,
    dim: usize,
    spread: f64,
    far: Vec<(usize, usize)>,
    /// Constrained pairs with the log of their squared-length bound.
    constrained: Vec<(usize, usize, f64)>,
}

const SOFTMIN_START: f64 = 10.0;
const SOFTMIN_END: f64 = 1e5;
const TINY: f64 = 1e-300;
/// Overall decay of the step size across a run.
const STEP_DECAY: f64 = 1e-5;

impl SearchObjective {
    pub fn new(space: &FiniteMetricSpace, threshold: f64, rho_plus: &BoundFunction, dimension: Option<usize>) -> Result<Self> {
        let prob = CertificateProblem::new(space.clone(), threshold, Exponent::Two).with_rho_plus(rho_plus.clone());
        prob.validate()?;
        let n = space.len();
        let far: Vec<(usize, usize)> = prob.far_pairs().unordered().collect();
        let mut constrained = Vec::new();
        for (i, j) in space.unordered_pairs() {
            if let Some(u) = prob.upper_bound(i, j) {
                if !(u > 0.0) {
                    return Err(Error::invalid(format!("pair ({i}, {j}) is forced to coincide")));
                }
                constrained.push((i, j, u.ln()));
            }
        }
        if constrained.is_empty() {
            let (i, j) = far[0];
            return Err(Error::Unbounded(i, j));
        }
        let spread = constrained.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
        Ok(SearchObjective {
            n,
            dim: dimension.unwrap_or(n).max(1),
            spread: (0.5 * spread).exp(),
            far,
            constrained,
        })
    }

    pub fn num_coords(&self) -> usize {
        self.n * self.dim
    }

    fn sq(&self, x: &[f64], i: usize, j: usize) -> f64 {
        let (a, b) = (&x[i * self.dim..(i + 1) * self.dim], &x[j * self.dim..(j + 1) * self.dim]);
        a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
    }

    /// Adds `coef · ∂ log‖xᵢ − xⱼ‖²/∂x` to `grad`.
    fn add_log_gradient(&self, x: &[f64], i: usize, j: usize, coef: f64, grad: &mut [f64]) {
        let c = 2.0 * coef / self.sq(x, i, j).max(TINY);
        for k in 0..self.dim {
            let d = (x[i * self.dim + k] - x[j * self.dim + k]) * c;
            grad[i * self.dim + k] += d;
            grad[j * self.dim + k] -= d;
        }
    }

    /// Smoothed objective at sharpness `beta`, with its gradient.
    pub fn value_and_gradient(&self, x: &[f64], beta: f64) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; x.len()];
        let far: Vec<f64> = self.far.iter().map(|&(i, j)| self.sq(x, i, j).max(TINY).ln()).collect();
        let ratios: Vec<f64> = self
            .constrained
            .iter()
            .map(|&(i, j, lu)| self.sq(x, i, j).max(TINY).ln() - lu)
            .collect();
        let (low, wf) = soft_extreme(&far, -beta);
        let (high, wc) = soft_extreme(&ratios, beta);
        for (&(i, j), w) in self.far.iter().zip(&wf) {
            self.add_log_gradient(x, i, j, *w, &mut grad);
        }
        for (&(i, j, _), w) in self.constrained.iter().zip(&wc) {
            self.add_log_gradient(x, i, j, -*w, &mut grad);
        }
        (low - high, grad)
    }

    /// Scales the configuration until every constraint holds and returns
    /// the minimum far squared distance.
    fn finalize(&self, x: &mut [f64]) -> f64 {
        let worst = self
            .constrained
            .iter()
            .map(|&(i, j, lu)| self.sq(x, i, j).max(TINY).ln() - lu)
            .fold(f64::NEG_INFINITY, f64::max);
        let s = (-0.5 * worst).exp();
        x.iter_mut().for_each(|v| *v *= s);
        // rounding in the scale may leave a constraint a hair over its bound
        let over = self
            .constrained
            .iter()
            .map(|&(i, j, lu)| self.sq(x, i, j) / lu.exp())
            .fold(1.0, f64::max);
        x.iter_mut().for_each(|v| *v /= over.sqrt());
        self.far
            .iter()
            .map(|&(i, j)| self.sq(x, i, j))
            .fold(f64::INFINITY, f64::min)
    }

    fn run(&self, cfg: &EmbedSearchConfig, seed: u64) -> (f64, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x: Vec<f64> = (0..self.num_coords())
            .map(|_| self.spread * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        // Adam moments
        let mut m = vec![0.0; x.len()];
        let mut v = vec![0.0; x.len()];
        let (b1, b2) = (0.9f64, 0.999f64);
        let steps = cfg.steps.max(1);
        for k in 0..steps {
            let frac = k as f64 / steps as f64;
            let beta = SOFTMIN_START * (SOFTMIN_END / SOFTMIN_START).powf(frac);
            let lr = cfg.step_size * self.spread * STEP_DECAY.powf(frac);
            let (_, g) = self.value_and_gradient(&x, beta);
            let t = (k + 1) as i32;
            for c in 0..x.len() {
                m[c] = b1 * m[c] + (1.0 - b1) * g[c];
                v[c] = b2 * v[c] + (1.0 - b2) * g[c] * g[c];
                let mh = m[c] / (1.0 - b1.powi(t));
                let vh = v[c] / (1.0 - b2.powi(t));
                x[c] += lr * mh / (vh.sqrt() + 1e-12);
            }
            // keep the overall scale near the feasible one
            let worst = self
                .constrained
                .iter()
                .map(|&(i, j, lu)| self.sq(&x, i, j).max(TINY).ln() - lu)
                .fold(f64::NEG_INFINITY, f64::max);
            let s = (-0.5 * worst).exp();
            x.iter_mut().for_each(|v| *v *= s);
        }
        let value = self.finalize(&mut x);
        (value, x)
    }
}

/// `(1/s)·log Σ exp(s·vᵢ)` with its softmax weights; a smooth maximum for
/// `s > 0` and a smooth minimum for `s < 0`.
fn soft_extreme(values: &[f64], s: f64) -> (f64, Vec<f64>) {
    let anchor = if s > 0.0 {
        values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    } else {
        values.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let e: Vec<f64> = values.iter().map(|v| (s * (v - anchor)).exp()).collect();
    let total: f64 = e.iter().sum();
    (anchor + total.ln() / s, e.iter().map(|w| w / total).collect())
}

/// Best `min_{Δ_T} ‖F(x) − F(y)‖²` found by penalized gradient ascent over
/// maps `F` into Euclidean space with `‖F(x) − F(y)‖ ≤ ρ₊(d(x, y))` on pairs
/// at distance at least 1. Every returned configuration is feasible, so the
/// value is a lower bound on the optimum.
pub fn best_min_far(
    space: &FiniteMetricSpace,
    threshold: f64,
    rho_plus: &BoundFunction,
    cfg: &EmbedSearchConfig,
) -> Result<(f64, PointConfiguration)> {
    let obj = SearchObjective::new(space, threshold, rho_plus, cfg.dimension)?;
    let runs: Vec<(f64, Vec<f64>)> = (0..cfg.restarts.max(1) as u64)
        .into_par_iter()
        .map(|r| obj.run(cfg, cfg.seed.wrapping_add(r)))
        .collect();
    // max value, lowest restart index on ties
    let (value, x) = runs
        .into_iter()
        .reduce(|best, next| if next.0 > best.0 { next } else { best })
        .expect("at least one restart");
    let coords = x.chunks(obj.dim).map(<[f64]>::to_vec).collect();
    Ok((value, PointConfiguration::new(coords)?))
}

/// The exact `p = 1` optimum: an LP over nonnegative weights on every cut.
pub fn exhaustive_cut_opt(space: &FiniteMetricSpace, threshold: f64) -> Result<f64> {
    exhaustive_cut_opt_with(&CertificateProblem::new(space.clone(), threshold, Exponent::One))
}

/// [`exhaustive_cut_opt`] for a full problem description (`ρ₊`, cutoff).
pub fn exhaustive_cut_opt_with(prob: &CertificateProblem) -> Result<f64> {
    let n = prob.space.len();
    if n > EXHAUSTIVE_MAX_POINTS {
        return Err(Error::TooLarge {
            n,
            limit: EXHAUSTIVE_MAX_POINTS,
        });
    }
    prob.validate()?;
    let masks = cones::cut_masks(n)?;
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let cut_vars: Vec<_> = masks.iter().map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    let t = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    let far = prob.far_pairs();
    for (i, j) in prob.space.unordered_pairs() {
        let terms: Vec<_> = masks
            .iter()
            .zip(&cut_vars)
            .filter(|(m, _)| cones::separates(**m, i, j))
            .map(|(_, &v)| (v, 1.0))
            .collect();
        if let Some(u) = prob.upper_bound(i, j) {
            lp.add_constraint(terms.clone(), ComparisonOp::Le, u);
        }
        if far.contains(i, j) {
            let mut row = terms;
            row.push((t, -1.0));
            lp.add_constraint(row, ComparisonOp::Ge, 0.0);
        }
    }
    match lp.solve() {
        Ok(sol) => Ok(sol.objective()),
        Err(minilp::Error::Unbounded) => {
            let (i, j) = far.unordered().next().expect("validated nonempty");
            Err(Error::Unbounded(i, j))
        }
        Err(e) => Err(Error::Numerical(format!("reference LP failed: {e}"))),
    }
}
