//! Optimal Poincaré constants and their dual measures.
//!
//! For a finite metric space `X`, a threshold `T` and a control function
//! `ρ₊`, the solver computes
//!
//! ```text
//! OPT(T) = max { min_{(x,y) ∈ Δ_T} q(x,y) :  q in the p-cone,
//!                                              q(x,y) ≤ ρ₊(d(x,y))ᵖ on constrained pairs }
//! ```
//!
//! together with a symmetric probability measure `μ` on `Δ_T` such that
//! `E_μ(q) ≤ bound` for **every** feasible `q`. The measure is read off the
//! dual variables of the rows `q(x,y) ≥ t`; the bound is the dual objective
//! normalized by their total mass, so the certificate is valid whenever the
//! duals are feasible for the relaxation that was solved.
//!
//! For `p = 2` the cone is approximated from outside by cutting planes
//! `Σ bᵢ bⱼ qᵢⱼ ≤ 0` taken from negative eigenvectors of the centered
//! transform; every relaxation contains the true feasible set, so the
//! certificate extracted after any number of cuts is sound (only looser).
//! For `p = 1` the cut cone is written out exactly over its generators.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::cones::{self, centered_transform, separates, ConeCut, Exponent, Kernel};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::lp::{LinearProgram, LpStatus, Simplex};
use crate::sdp::PairProgram;
use crate::metric::{delta_pairs, BoundFunction, FiniteMetricSpace, PairMeasure, PairSet};

/// Default cap on the number of cone cuts.
pub const DEFAULT_MAX_CUTS: usize = 500;
/// Relative stopping tolerance on the most negative centered eigenvalue.
pub const EIGEN_STOP_TOL: f64 = 1e-7;
/// `verify` passes when no sample exceeds the bound by more than this.
pub const VERIFY_TOL: f64 = 1e-6;
/// Total weight of the tie-breaking cost on pair variables.
pub(crate) const PERTURBATION: f64 = 1e-7;

/// The optimization problem behind a certificate.
#[derive(Debug, Clone)]
pub struct CertificateProblem {
    pub space: FiniteMetricSpace,
    pub threshold: f64,
    pub rho_plus: BoundFunction,
    pub p: Exponent,
    /// Pairs closer than this carry no upper-bound constraint.
    pub lower_cutoff: f64,
    /// Constrain every pair regardless of `lower_cutoff`.
    pub constrain_all: bool,
}

impl CertificateProblem {
    /// Problem with `ρ₊ = identity` and cutoff 1.
    pub fn new(space: FiniteMetricSpace, threshold: f64, p: Exponent) -> Self {
        CertificateProblem {
            space,
            threshold,
            rho_plus: BoundFunction::Identity,
            p,
            lower_cutoff: 1.0,
            constrain_all: false,
        }
    }

    pub fn with_rho_plus(mut self, rho: BoundFunction) -> Self {
        self.rho_plus = rho;
        self
    }

    pub fn with_lower_cutoff(mut self, cutoff: f64) -> Self {
        self.lower_cutoff = cutoff;
        self
    }

    pub fn constrain_all_pairs(mut self, yes: bool) -> Self {
        self.constrain_all = yes;
        self
    }

    pub fn far_pairs(&self) -> PairSet {
        delta_pairs(&self.space, self.threshold)
    }

    pub fn is_constrained(&self, i: usize, j: usize) -> bool {
        self.constrain_all || self.space.dist(i, j) >= self.lower_cutoff
    }

    /// `ρ₊(d(i, j))ᵖ` for constrained pairs.
    pub fn upper_bound(&self, i: usize, j: usize) -> Option<f64> {
        self.is_constrained(i, j)
            .then(|| self.p.pow(self.rho_plus.eval(self.space.dist(i, j))))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return Err(Error::invalid("threshold must be finite and nonnegative"));
        }
        if self.lower_cutoff.is_nan() {
            return Err(Error::invalid("lower cutoff is NaN"));
        }
        self.rho_plus.validate()?;
        if self.far_pairs().is_empty() {
            return Err(Error::EmptyFarSet(self.threshold));
        }
        Ok(())
    }

    /// Bound on `σ(i, j)` implied by the triangle inequality along
    /// constrained pairs (`ρ₊`-weighted shortest paths). Infinite when `i` and
    /// `j` are not linked.
    fn path_bounds(&self) -> Matrix {
        let n = self.space.len();
        let mut b = Matrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else if self.is_constrained(i, j) {
                self.rho_plus.eval(self.space.dist(i, j))
            } else {
                f64::INFINITY
            }
        });
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = b[(i, k)] + b[(k, j)];
                    if via < b[(i, j)] {
                        b[(i, j)] = via;
                    }
                }
            }
        }
        b
    }

    /// Upper bounds per unordered pair: the constraint itself for
    /// constrained pairs, the implied path bound otherwise.
    fn variable_bounds(&self, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
        let paths = self.path_bounds();
        let far = self.far_pairs();
        let mut out = Vec::with_capacity(pairs.len());
        for &(i, j) in pairs {
            let u = match self.upper_bound(i, j) {
                Some(u) => u,
                None => self.p.pow(paths[(i, j)]),
            };
            if u.is_infinite() && far.contains(i, j) {
                return Err(Error::Unbounded(i, j));
            }
            out.push(u);
        }
        Ok(out)
    }
}

/// A feasible kernel with its value `t = min_{Δ_T} q`.
#[derive(Debug, Clone)]
pub struct PrimalSolution {
    pub q: Kernel,
    pub t: f64,
    pub cuts_used: usize,
    pub max_cone_violation: f64,
}

/// The dual object: a symmetric probability `μ` on `Δ_T` with
/// `E_μ(σᵖ) ≤ bound` for every admissible `σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub p: Exponent,
    pub threshold: f64,
    /// `Kᵖ`.
    pub bound: f64,
    pub measure: PairMeasure,
    pub duality_gap: f64,
    pub cuts: usize,
}

impl Certificate {
    /// `K`, the `p`-th root of the bound.
    pub fn constant(&self) -> f64 {
        self.p.root(self.bound)
    }
}

/// Algorithm for `p = 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Up to [`AUTO_INTERIOR_POINT_ABOVE`] points, cutting planes with a
    /// budget of [`AUTO_CUTS_PER_POINT`] cuts per point, then the
    /// interior-point method if the budget runs out. Larger spaces go
    /// straight to the interior-point method.
    #[default]
    Auto,
    CuttingPlane,
    InteriorPoint,
}

/// Size above which [`Method::Auto`] switches to the interior-point method.
/// Eigenvector cuts converge slowly once the space has many far pairs in
/// general position (random regular graphs of a few dozen vertices).
pub const AUTO_INTERIOR_POINT_ABOVE: usize = 24;
/// Cut budget per point for [`Method::Auto`] before it changes method.
pub const AUTO_CUTS_PER_POINT: usize = 4;

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub method: Method,
    pub max_cuts: usize,
    /// Negative eigenvectors added per separation round.
    pub cuts_per_round: usize,
    /// Stop after this many cuts and return the relaxation's certificate
    /// instead of failing.
    pub truncate_at: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            method: Method::Auto,
            max_cuts: DEFAULT_MAX_CUTS,
            cuts_per_round: 8,
            truncate_at: None,
        }
    }
}

/// Solves with default options.
pub fn solve(prob: &CertificateProblem) -> Result<(PrimalSolution, Certificate)> {
    solve_with(prob, &SolverOptions::default())
}

pub fn solve_with(prob: &CertificateProblem, opts: &SolverOptions) -> Result<(PrimalSolution, Certificate)> {
    prob.validate()?;
    match prob.p {
        Exponent::Two => match opts.method {
            Method::InteriorPoint => solve_interior_point(prob),
            Method::CuttingPlane => solve_negative_type(prob, opts),
            Method::Auto if opts.truncate_at.is_some() => solve_negative_type(prob, opts),
            Method::Auto if prob.space.len() > AUTO_INTERIOR_POINT_ABOVE => solve_interior_point(prob),
            Method::Auto => {
                let budget = SolverOptions {
                    max_cuts: opts.max_cuts.min(AUTO_CUTS_PER_POINT * prob.space.len()),
                    ..opts.clone()
                };
                // a stalled or capped simplex is not fatal here: the barrier
                // method does not share its failure modes
                match solve_negative_type(prob, &budget) {
                    Err(e) if e.is_numerical() => {
                        solve_interior_point(prob)
                    }
                    other => other,
                }
            }
        },
        Exponent::One => solve_cut_cone(prob),
    }
}

/// Certificate from the relaxation after at most `cuts` cone cuts.
pub fn solve_truncated(prob: &CertificateProblem, cuts: usize) -> Result<(PrimalSolution, Certificate)> {
    let opts = SolverOptions {
        method: Method::CuttingPlane,
        truncate_at: Some(cuts),
        cuts_per_round: 1,
        ..SolverOptions::default()
    };
    solve_with(prob, &opts)
}

fn unordered_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

fn kernel_from_pairs(n: usize, pairs: &[(usize, usize)], x: &[f64]) -> Kernel {
    let mut q = Matrix::zeros(n, n);
    for (&(i, j), v) in pairs.iter().zip(x) {
        let v = v.max(0.0);
        q[(i, j)] = v;
        q[(j, i)] = v;
    }
    Kernel::new(q).expect("nonnegative symmetric by construction")
}

fn solve_negative_type(prob: &CertificateProblem, opts: &SolverOptions) -> Result<(PrimalSolution, Certificate)> {
    let n = prob.space.len();
    let pairs = unordered_pairs(n);
    let np = pairs.len();
    let bounds = prob.variable_bounds(&pairs)?;
    let far = prob.far_pairs();

    // variables: one per unordered pair, then t. The pair variables get a
    // tiny positive cost that breaks the massive dual degeneracy of `max t`;
    // certificates are priced against the unperturbed objective.
    let scale = pairs
        .iter()
        .zip(&bounds)
        .filter(|(&(i, j), _)| far.contains(i, j))
        .map(|(_, u)| *u)
        .fold(f64::INFINITY, f64::min);
    let scale = if scale.is_finite() && scale > 0.0 { scale } else { 1.0 };
    let mut objective: Vec<f64> = bounds
        .iter()
        .enumerate()
        .map(|(k, u)| {
            // distinct weights in [1, 2) so no two pairs tie
            let w = 1.0 + (k as f64 * 0.618_033_988_749_895).fract();
            PERTURBATION * scale * w / (np as f64 * u.max(1e-12))
        })
        .collect();
    objective.push(1.0);
    let mut true_objective = vec![0.0; np + 1];
    true_objective[np] = 1.0;
    let mut lp = LinearProgram::new(objective);
    for (k, u) in bounds.iter().enumerate() {
        lp.set_upper(k, *u);
    }
    let mut far_rows = Vec::new();
    for (k, &(i, j)) in pairs.iter().enumerate() {
        if far.contains(i, j) {
            let mut row = vec![0.0; np + 1];
            row[k] = -1.0;
            row[np] = 1.0;
            far_rows.push((lp.add_row(row, 0.0), k));
        }
    }
    let mut simplex = Simplex::new(&lp)?;
    // the relaxation without cuts is solved by q = upper bounds
    for k in 0..np {
        simplex.start_at_upper(k)?;
    }
    match simplex.optimize()? {
        LpStatus::Optimal => {}
        _ => return Err(Error::Numerical("initial relaxation has no optimum".into())),
    }

    let limit = opts.truncate_at.unwrap_or(opts.max_cuts);
    let mut cuts = 0usize;
    let converged = loop {
        let x = simplex.primal();
        let q = kernel_from_pairs(n, &pairs, &x[..np]);
        let b = centered_transform(&q);
        let eig = linalg::symmetric_eigen(&b)?;
        let stop = -EIGEN_STOP_TOL * (1.0 + b.trace());
        if eig.values[0] >= stop {
            break true;
        }
        if cuts >= limit {
            break false;
        }
        let room = limit - cuts;
        let mut added = 0;
        for k in 0..n {
            if added >= opts.cuts_per_round.min(room) || eig.values[k] >= stop {
                break;
            }
            let Ok(cut) = ConeCut::new(&eig.vector(k)) else {
                continue;
            };
            let mut row: Vec<f64> = pairs.iter().map(|&(i, j)| cut.pair_coefficient(i, j)).collect();
            row.push(0.0);
            match simplex.add_row(row, 0.0)? {
                LpStatus::Optimal => {}
                _ => return Err(Error::Numerical("cut made the relaxation infeasible".into())),
            }
            added += 1;
        }
        if added == 0 {
            break true;
        }
        cuts += added;
    };

    let far_idx: Vec<usize> = far_rows.iter().map(|(r, _)| *r).collect();
    let (bound, far_weights) = dual_bound(&simplex, &far_idx, &true_objective)?;
    let measure = PairMeasure::from_unordered(
        n,
        far_rows
            .iter()
            .zip(&far_weights)
            .map(|(&(_, k), &w)| (pairs[k].0, pairs[k].1, w)),
    )?;

    let x = simplex.primal();
    let relaxed = kernel_from_pairs(n, &pairs, &x[..np]);
    let primal = feasible_projection(prob, &relaxed, &far, cuts)?;

    if opts.truncate_at.is_none() && !converged {
        return Err(Error::IterationCap {
            cuts,
            lower: primal.t,
            upper: bound,
        });
    }
    let cert = Certificate {
        p: prob.p,
        threshold: prob.threshold,
        bound,
        measure,
        duality_gap: (bound - primal.t).max(0.0),
        cuts,
    };
    Ok((primal, cert))
}

fn solve_interior_point(prob: &CertificateProblem) -> Result<(PrimalSolution, Certificate)> {
    let n = prob.space.len();
    let pairs = unordered_pairs(n);
    let bounds = prob.variable_bounds(&pairs)?;
    if bounds.iter().any(|u| !u.is_finite()) {
        // a pair without any implied bound has no place in the barrier
        // program; the cutting-plane LP handles it as a free variable
        return solve_negative_type(prob, &SolverOptions::default());
    }
    let far = prob.far_pairs();
    let far_idx: Vec<usize> = (0..pairs.len())
        .filter(|&k| far.contains(pairs[k].0, pairs[k].1))
        .collect();
    let program = PairProgram {
        n,
        pairs: pairs.clone(),
        upper: bounds.clone(),
        far: far_idx.clone(),
    };
    let sol = program.solve()?;
    let mass: f64 = sol.far_weights.iter().sum();
    if !(mass > 1e-12) {
        return Err(Error::Numerical("dual measure has no mass".into()));
    }
    let mu: Vec<f64> = sol.far_weights.iter().map(|w| w / mass).collect();

    // Rounding the duals into an exact certificate: with
    // Z = Σ (y_k/Λ) a_k a_kᵀ − Σ μ_f a_f a_fᵀ and ε = max(0, −λ_min(Z)),
    // the weights w_k = y_k/Λ + ε/n make Σ (μ − w)_k a_k a_kᵀ = −Z − εI ⪯ 0
    // (the a_k over all pairs sum to n·I), so E_μ(q) ≤ Σ max(w_k, 0) u_k.
    let mut weights: Vec<f64> = sol.y_upper.iter().map(|y| y / mass).collect();
    let mut lap = Matrix::zeros(n, n);
    let mut coeff = weights.clone();
    for (f, &k) in far_idx.iter().enumerate() {
        coeff[k] -= mu[f];
    }
    for (&(i, j), &c) in pairs.iter().zip(&coeff) {
        lap[(i, j)] -= c;
        lap[(j, i)] -= c;
        lap[(i, i)] += c;
        lap[(j, j)] += c;
    }
    // restrict to the centered subspace, where the all-ones direction is gone
    let shifted = Matrix::from_fn(n, n, |i, j| lap[(i, j)] + lap.max_abs().max(1.0));
    let eig = linalg::symmetric_eigen(&shifted)?;
    let lambda_min = eig.values[0];
    let eps = (-lambda_min).max(0.0) + 1e-12 * lap.max_abs().max(1.0);
    for w in &mut weights {
        *w = (*w + eps / n as f64).max(0.0);
    }
    let bound: f64 = weights.iter().zip(&bounds).map(|(w, u)| w * u).sum();
    let measure = PairMeasure::from_unordered(
        n,
        far_idx
            .iter()
            .zip(&mu)
            .map(|(&k, &w)| (pairs[k].0, pairs[k].1, w)),
    )?;

    let g = &sol.gram;
    let relaxed = Kernel::from_upper(n, |i, j| (g[(i, i)] + g[(j, j)] - 2.0 * g[(i, j)]).max(0.0))?;
    let primal = feasible_projection(prob, &relaxed, &far, 0)?;
    let cert = Certificate {
        p: prob.p,
        threshold: prob.threshold,
        bound,
        measure,
        duality_gap: (bound - primal.t).max(0.0),
        cuts: 0,
    };
    Ok((primal, cert))
}

/// Dual bound `Σ uⱼ wⱼ / Σ_far y` with row duals clamped to be nonnegative
/// and bound duals recomputed so that dual feasibility holds exactly for
/// every bounded variable.
pub(crate) fn dual_bound(simplex: &Simplex, far_rows: &[usize], objective: &[f64]) -> Result<(f64, Vec<f64>)> {
    let y: Vec<f64> = simplex.row_duals().into_iter().map(|v| v.max(0.0)).collect();
    let w = simplex.bound_duals_for(&y, objective);
    let mass: f64 = far_rows.iter().map(|&r| y[r]).sum();
    if !(mass > 1e-12) {
        return Err(Error::Numerical("dual measure has no mass".into()));
    }
    let dual_obj = simplex.dual_objective(&y, &w);
    Ok((dual_obj / mass, far_rows.iter().map(|&r| y[r] / mass).collect()))
}

/// Projects a relaxed kernel onto the negative-type cone (clipping negative
/// eigenvalues of the centered transform), then scales it down until every
/// upper-bound constraint holds.
fn feasible_projection(
    prob: &CertificateProblem,
    relaxed: &Kernel,
    far: &PairSet,
    cuts: usize,
) -> Result<PrimalSolution> {
    let n = relaxed.len();
    let eig = linalg::symmetric_eigen(&centered_transform(relaxed))?;
    let gram = Matrix::from_fn(n, n, |i, j| {
        (0..n)
            .filter(|&k| eig.values[k] > 0.0)
            .map(|k| eig.values[k] * eig.vectors[(i, k)] * eig.vectors[(j, k)])
            .sum()
    });
    let projected = Kernel::from_upper(n, |i, j| {
        (gram[(i, i)] + gram[(j, j)] - 2.0 * gram[(i, j)]).max(0.0)
    })?;
    let mut scale: f64 = 1.0;
    for (i, j) in prob.space.unordered_pairs() {
        if let Some(u) = prob.upper_bound(i, j) {
            let v = projected.get(i, j);
            if v > u {
                scale = scale.min(u / v);
            }
        }
    }
    let q = projected.scaled(scale);
    let t = far.unordered().map(|(i, j)| q.get(i, j)).fold(f64::INFINITY, f64::min);
    let max_cone_violation = cone_violation(&q)?;
    Ok(PrimalSolution {
        q,
        t,
        cuts_used: cuts,
        max_cone_violation,
    })
}

/// `max(0, max_b Σ bᵢ bⱼ qᵢⱼ)` over centered unit `b`.
pub fn cone_violation(q: &Kernel) -> Result<f64> {
    if q.len() < 2 {
        return Ok(0.0);
    }
    let (lambda, _) = cones::most_negative_direction(q)?;
    Ok((-2.0 * lambda).max(0.0))
}

fn solve_cut_cone(prob: &CertificateProblem) -> Result<(PrimalSolution, Certificate)> {
    let n = prob.space.len();
    let masks = cones::cut_masks(n)?;
    let pairs = unordered_pairs(n);
    let far = prob.far_pairs();
    // the same path check as p = 2 detects unboundedness up front
    prob.variable_bounds(&pairs)?;

    let nm = masks.len();
    // Every far row has a zero right-hand side, which stalls the simplex.
    // Tiny distinct right-hand sides break the degeneracy; the certificate
    // is priced against the true data below.
    let scale = pairs
        .iter()
        .filter_map(|&(i, j)| prob.upper_bound(i, j))
        .fold(f64::INFINITY, f64::min);
    let scale = if scale.is_finite() && scale > 0.0 { scale } else { 1.0 };
    let jitter = |k: usize| 1.0 + (k as f64 * 0.618_033_988_749_895).fract();
    let mut objective = vec![0.0; nm + 1];
    objective[nm] = 1.0;
    let mut lp = LinearProgram::new(objective);
    let mut bound_rows = Vec::new();
    for &(i, j) in &pairs {
        if let Some(u) = prob.upper_bound(i, j) {
            let mut row: Vec<f64> = masks
                .iter()
                .map(|&m| if separates(m, i, j) { 1.0 } else { 0.0 })
                .collect();
            row.push(0.0);
            bound_rows.push((lp.add_row(row, u), u));
        }
    }
    let mut far_rows = Vec::new();
    for &(i, j) in &pairs {
        if far.contains(i, j) {
            let mut row: Vec<f64> = masks
                .iter()
                .map(|&m| if separates(m, i, j) { -1.0 } else { 0.0 })
                .collect();
            row.push(1.0);
            let slack = PERTURBATION * scale * jitter(far_rows.len());
            far_rows.push((lp.add_row(row, slack), (i, j)));
        }
    }
    let mut simplex = Simplex::new(&lp)?;
    match simplex.optimize()? {
        LpStatus::Optimal => {}
        LpStatus::Unbounded => {
            let (_, (i, j)) = far_rows[0];
            return Err(Error::Unbounded(i, j));
        }
        LpStatus::Infeasible => return Err(Error::Numerical("cut LP infeasible".into())),
    }
    // dual feasibility does not depend on the right-hand side, so y
    // certifies a bound for the unperturbed problem
    let y: Vec<f64> = simplex.row_duals().into_iter().map(|v| v.max(0.0)).collect();
    let mass: f64 = far_rows.iter().map(|&(r, _)| y[r]).sum();
    if !(mass > 1e-12) {
        return Err(Error::Numerical("dual measure has no mass".into()));
    }
    let bound = bound_rows.iter().map(|&(r, u)| u * y[r]).sum::<f64>() / mass;
    let weights: Vec<f64> = far_rows.iter().map(|&(r, _)| y[r] / mass).collect();
    let measure = PairMeasure::from_unordered(
        n,
        far_rows.iter().zip(&weights).map(|(&(_, (i, j)), &w)| (i, j, w)),
    )?;

    let lambda = simplex.primal();
    let q = Kernel::from_upper(n, |i, j| {
        masks
            .iter()
            .zip(&lambda)
            .filter(|(m, _)| separates(**m, i, j))
            .map(|(_, w)| w.max(0.0))
            .sum()
    })?;
    let t = far.unordered().map(|(i, j)| q.get(i, j)).fold(f64::INFINITY, f64::min);
    let primal = PrimalSolution {
        q,
        t,
        cuts_used: 0,
        max_cone_violation: 0.0,
    };
    let cert = Certificate {
        p: prob.p,
        threshold: prob.threshold,
        bound,
        measure,
        duality_gap: (bound - t).abs(),
        cuts: 0,
    };
    Ok((primal, cert))
}

/// Why a sample kernel is not admissible for a problem.
pub fn check_feasible(prob: &CertificateProblem, q: &Kernel) -> Result<()> {
    let n = prob.space.len();
    if q.len() != n {
        return Err(Error::invalid(format!("sample has {} points, space has {n}", q.len())));
    }
    for (i, j) in prob.space.unordered_pairs() {
        if let Some(u) = prob.upper_bound(i, j) {
            let v = q.get(i, j);
            if v > u + 1e-9 * (1.0 + u) {
                return Err(Error::invalid(format!(
                    "sample violates the upper bound on pair ({i}, {j}): {v} > {u}"
                )));
            }
        }
    }
    if !cones::in_cone(q, prob.p)? {
        return Err(Error::invalid(format!("sample is not in the p = {} cone", prob.p)));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub expectations: Vec<f64>,
    /// `max_k E_μ(q_k) - bound`; `-∞` when no samples are given.
    pub max_excess: f64,
    pub pass: bool,
}

/// Checks `E_μ(q) ≤ bound` on admissible samples. Inadmissible samples are
/// rejected with the violated constraint.
pub fn verify(cert: &Certificate, prob: &CertificateProblem, samples: &[Kernel]) -> Result<VerifyReport> {
    if cert.measure.num_points() != prob.space.len() {
        return Err(Error::invalid("certificate and space sizes differ"));
    }
    if !cert.measure.is_supported_on(&prob.far_pairs()) {
        return Err(Error::invalid("certificate measure is not supported on the far-pair set"));
    }
    let mut expectations = Vec::with_capacity(samples.len());
    for (k, q) in samples.iter().enumerate() {
        check_feasible(prob, q).map_err(|e| Error::invalid(format!("sample {k}: {e}")))?;
        expectations.push(cert.measure.expectation(q));
    }
    let max_excess = expectations
        .iter()
        .map(|e| e - cert.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(VerifyReport {
        expectations,
        max_excess,
        pass: max_excess <= VERIFY_TOL,
    })
}

/// A random admissible kernel: squared distances of Gaussian points
/// (`p = 2`) or a random cut combination (`p = 1`), scaled down until every
/// constraint holds, with a random extra shrink in `[0.5, 1]` half of the
/// time.
pub fn random_feasible_kernel<R: Rng + ?Sized>(prob: &CertificateProblem, rng: &mut R) -> Result<Kernel> {
    let n = prob.space.len();
    let raw = match prob.p {
        Exponent::Two => {
            let dim = n.max(1);
            let pts: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
                .collect();
            Kernel::squared_distances(&pts)
        }
        Exponent::One => {
            let masks = cones::cut_masks(n)?;
            let w: Vec<f64> = masks
                .iter()
                .map(|_| if rng.gen_bool(0.5) { rng.gen::<f64>() } else { 0.0 })
                .collect();
            Kernel::from_upper(n, |i, j| {
                masks
                    .iter()
                    .zip(&w)
                    .filter(|(m, _)| separates(**m, i, j))
                    .map(|(_, w)| w)
                    .sum()
            })?
        }
    };
    let mut scale = f64::INFINITY;
    for (i, j) in prob.space.unordered_pairs() {
        if let Some(u) = prob.upper_bound(i, j) {
            let v = raw.get(i, j);
            if v > 0.0 {
                scale = scale.min(u / v);
            }
        }
    }
    if !scale.is_finite() {
        scale = 1.0;
    }
    if rng.gen_bool(0.5) {
        scale *= rng.gen_range(0.5..1.0);
    }
    Ok(raw.scaled(scale))
}

/// Certificates for a family of spaces, each with its own threshold.
#[derive(Debug, Clone)]
pub struct FamilyReport {
    pub certificates: Vec<Certificate>,
    /// `sup_n Kₙᵖ`, the family constant.
    pub sup_bound: f64,
}

/// Solves every member concurrently; results keep the input order.
pub fn family_sweep(
    spaces: &[FiniteMetricSpace],
    thresholds: &[f64],
    p: Exponent,
    rho_plus: &BoundFunction,
) -> Result<FamilyReport> {
    if spaces.len() != thresholds.len() {
        return Err(Error::invalid(format!(
            "{} spaces but {} thresholds",
            spaces.len(),
            thresholds.len()
        )));
    }
    let results: Vec<Result<Certificate>> = spaces
        .par_iter()
        .zip(thresholds.par_iter())
        .map(|(space, &t)| {
            let prob = CertificateProblem::new(space.clone(), t, p).with_rho_plus(rho_plus.clone());
            solve(&prob).map(|(_, cert)| cert)
        })
        .collect();
    let certificates = results.into_iter().collect::<Result<Vec<_>>>()?;
    let sup_bound = certificates.iter().map(|c| c.bound).fold(f64::NEG_INFINITY, f64::max);
    Ok(FamilyReport {
        certificates,
        sup_bound,
    })
}
