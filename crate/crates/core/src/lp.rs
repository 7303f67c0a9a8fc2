//! Dense bounded-variable simplex with dual values.
//!
//! Solves `maximize c·x  subject to  A x ≤ b,  0 ≤ x ≤ u` where every
//! `b_i ≥ 0` for the rows present at construction (so the all-slack basis
//! is feasible and no phase one is needed). Rows added later may have any
//! right-hand side; the solver re-optimizes from the previous basis with the
//! dual simplex, which is what a cutting-plane loop wants.
//!
//! Pricing is Dantzig's largest coefficient with ties broken by the lowest
//! index. After a run of degenerate pivots the solver switches to Bland's
//! rule until the objective moves again, so it cannot cycle. All choices are
//! deterministic.

use crate::error::{Error, Result};
use crate::linalg::dot;

const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-10;
const DEGENERATE_RUN: usize = 50;
/// Pivots between recomputations of the tableau from the original rows.
const REFACTOR_EVERY: usize = 200;

/// `maximize c·x` over `A x ≤ b, 0 ≤ x ≤ upper`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            upper: vec![f64::INFINITY; n],
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_upper(&mut self, var: usize, bound: f64) {
        self.upper[var] = bound;
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, rhs: f64) -> usize {
        assert_eq!(coeffs.len(), self.num_vars());
        self.rows.push(coeffs);
        self.rhs.push(rhs);
        self.rows.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Unbounded,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Place {
    Basic(usize),
    Lower,
    Upper,
}

/// Simplex state over a dense tableau `B⁻¹ [A | I]`.
#[derive(Debug, Clone)]
pub struct Simplex {
    n_struct: usize,
    objective: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    tableau: Vec<Vec<f64>>,
    /// current values of the basic variables, one per row
    beta: Vec<f64>,
    /// reduced costs `c_j - c_B B⁻¹ a_j`
    reduced: Vec<f64>,
    basis: Vec<usize>,
    place: Vec<Place>,
    pivots: usize,
    max_pivots: usize,
}

impl Simplex {
    pub fn new(lp: &LinearProgram) -> Result<Self> {
        let n = lp.num_vars();
        if lp.upper.len() != n {
            return Err(Error::invalid("upper bound vector has the wrong length"));
        }
        if let Some(i) = lp.rhs.iter().position(|b| *b < 0.0 || !b.is_finite()) {
            return Err(Error::invalid(format!(
                "initial row {i} needs a finite nonnegative right-hand side"
            )));
        }
        if let Some(j) = lp.upper.iter().position(|u| *u < 0.0 || u.is_nan()) {
            return Err(Error::invalid(format!("variable {j} has a negative upper bound")));
        }
        let mut s = Simplex {
            n_struct: n,
            objective: lp.objective.clone(),
            upper: lp.upper.clone(),
            rows: Vec::new(),
            rhs: Vec::new(),
            tableau: Vec::new(),
            beta: Vec::new(),
            reduced: lp.objective.clone(),
            basis: Vec::new(),
            place: vec![Place::Lower; n],
            pivots: 0,
            max_pivots: 0,
        };
        for (row, b) in lp.rows.iter().zip(&lp.rhs) {
            s.push_row(row.clone(), *b);
        }
        Ok(s)
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn pivots(&self) -> usize {
        self.pivots
    }

    fn n_cols(&self) -> usize {
        self.n_struct + self.rows.len()
    }

    fn col_upper(&self, j: usize) -> f64 {
        if j < self.n_struct {
            self.upper[j]
        } else {
            f64::INFINITY
        }
    }

    fn col_cost(&self, j: usize) -> f64 {
        if j < self.n_struct {
            self.objective[j]
        } else {
            0.0
        }
    }

    fn value_of_nonbasic(&self, j: usize) -> f64 {
        match self.place[j] {
            Place::Upper => self.col_upper(j),
            _ => 0.0,
        }
    }

    /// Appends `coeffs · x ≤ rhs` with its slack basic in the new row.
    fn push_row(&mut self, coeffs: Vec<f64>, rhs: f64) {
        let new_col = self.n_cols();
        for row in &mut self.tableau {
            row.push(0.0);
        }
        self.reduced.push(0.0);
        self.place.push(Place::Basic(self.rows.len()));

        let mut trow = vec![0.0; new_col + 1];
        trow[..self.n_struct].copy_from_slice(&coeffs);
        trow[new_col] = 1.0;
        // eliminate the currently basic structural columns
        for (r, &bv) in self.basis.iter().enumerate() {
            if bv < self.n_struct {
                let f = trow[bv];
                if f != 0.0 {
                    for (t, a) in trow.iter_mut().zip(&self.tableau[r]) {
                        *t -= f * a;
                    }
                    trow[bv] = 0.0;
                }
            }
        }
        let activity: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(j, a)| a * self.current_value(j))
            .sum();
        self.tableau.push(trow);
        self.beta.push(rhs - activity);
        self.basis.push(new_col);
        self.rows.push(coeffs);
        self.rhs.push(rhs);
    }

    fn current_value(&self, j: usize) -> f64 {
        match self.place[j] {
            Place::Basic(r) => self.beta[r],
            _ => self.value_of_nonbasic(j),
        }
    }

    /// Adds a row to a (possibly solved) problem and re-optimizes with the
    /// dual simplex. Call [`Simplex::optimize`] instead if the basis was not
    /// optimal before.
    pub fn add_row(&mut self, coeffs: Vec<f64>, rhs: f64) -> Result<LpStatus> {
        assert_eq!(coeffs.len(), self.n_struct);
        self.push_row(coeffs, rhs);
        self.dual_simplex()
    }

    /// Moves a nonbasic structural variable from its lower to its upper
    /// bound before optimizing, as a warm start. Fails if the variable is
    /// basic or unbounded, or if the move leaves the basis infeasible.
    pub fn start_at_upper(&mut self, j: usize) -> Result<()> {
        if j >= self.n_struct || self.place[j] != Place::Lower || !self.upper[j].is_finite() {
            return Err(Error::invalid(format!("variable {j} cannot start at its upper bound")));
        }
        self.flip(j);
        Ok(())
    }

    fn is_primal_feasible(&self) -> bool {
        self.beta.iter().zip(&self.basis).all(|(&v, &bv)| {
            let ub = self.col_upper(bv);
            let tol = FEAS_TOL * (1.0 + ub.min(v.abs()));
            v >= -tol && v <= ub + tol
        })
    }

    /// Runs the primal simplex from the current (primal feasible) basis.
    pub fn optimize(&mut self) -> Result<LpStatus> {
        if !self.is_primal_feasible() {
            return Err(Error::invalid("the starting basis is not primal feasible"));
        }
        self.reset_budget();
        let mut stalled = 0usize;
        let mut last_obj = self.objective_value();
        loop {
            let bland = stalled >= DEGENERATE_RUN;
            let Some((j, dir)) = self.choose_entering(bland) else {
                return Ok(LpStatus::Optimal);
            };
            match self.primal_step(j, dir)? {
                true => {}
                false => return Ok(LpStatus::Unbounded),
            }
            let obj = self.objective_value();
            if obj > last_obj + 1e-12 * (1.0 + last_obj.abs()) {
                stalled = 0;
                last_obj = obj;
            } else {
                stalled += 1;
            }
        }
    }

    fn reset_budget(&mut self) {
        self.max_pivots = self.pivots + 50 * (self.n_cols() + self.rows.len()) + 10_000;
    }

    fn bump(&mut self) -> Result<()> {
        self.pivots += 1;
        if self.pivots > self.max_pivots {
            return Err(Error::Numerical(format!(
                "simplex exceeded its pivot budget ({} pivots)",
                self.pivots
            )));
        }
        Ok(())
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n_cols() {
            let r = self.reduced[j];
            let dir = match self.place[j] {
                Place::Basic(_) => continue,
                Place::Lower if r > OPT_TOL => 1.0,
                Place::Upper if r < -OPT_TOL => -1.0,
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if best.map_or(true, |(_, _, m)| r.abs() > m) {
                best = Some((j, dir, r.abs()));
            }
        }
        best.map(|(j, d, _)| (j, d))
    }

    /// Moves nonbasic `j` in direction `dir`. Returns false when unbounded.
    fn primal_step(&mut self, j: usize, dir: f64) -> Result<bool> {
        let mut theta = self.col_upper(j);
        let mut leave: Option<(usize, bool)> = None;
        for r in 0..self.rows.len() {
            let a = self.tableau[r][j] * dir;
            if a > PIVOT_TOL {
                // basic decreases toward 0
                let lim = self.beta[r].max(0.0) / a;
                if lim < theta || (lim == theta && leave.is_some_and(|(lr, _)| self.basis[r] < self.basis[lr])) {
                    theta = lim;
                    leave = Some((r, false));
                }
            } else if a < -PIVOT_TOL {
                let ub = self.col_upper(self.basis[r]);
                if ub.is_finite() {
                    let lim = (ub - self.beta[r]).max(0.0) / -a;
                    if lim < theta || (lim == theta && leave.is_some_and(|(lr, _)| self.basis[r] < self.basis[lr])) {
                        theta = lim;
                        leave = Some((r, true));
                    }
                }
            }
        }
        if theta.is_infinite() {
            return Ok(false);
        }
        self.bump()?;
        let delta = dir * theta;
        for r in 0..self.rows.len() {
            let a = self.tableau[r][j];
            if a != 0.0 {
                self.beta[r] -= a * delta;
            }
        }
        match leave {
            None => {
                // bound flip
                self.place[j] = if dir > 0.0 { Place::Upper } else { Place::Lower };
            }
            Some((r, to_upper)) => {
                let entering_value = self.value_of_nonbasic(j) + delta;
                let leaving = self.basis[r];
                self.pivot(r, j);
                self.beta[r] = entering_value;
                self.place[leaving] = if to_upper { Place::Upper } else { Place::Lower };
            }
        }
        Ok(true)
    }

    /// Gauss-Jordan pivot making column `j` basic in row `r`.
    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.tableau[r][j];
        let prow: Vec<f64> = self.tableau[r].iter().map(|x| x / p).collect();
        let nz: Vec<usize> = prow
            .iter()
            .enumerate()
            .filter(|(_, x)| **x != 0.0)
            .map(|(k, _)| k)
            .collect();
        for (i, row) in self.tableau.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[j];
            if f != 0.0 {
                for &k in &nz {
                    row[k] -= f * prow[k];
                }
                row[j] = 0.0;
            }
        }
        let f = self.reduced[j];
        if f != 0.0 {
            for &k in &nz {
                self.reduced[k] -= f * prow[k];
            }
            self.reduced[j] = 0.0;
        }
        self.tableau[r] = prow;
        self.tableau[r][j] = 1.0;
        self.place[j] = Place::Basic(r);
        self.basis[r] = j;
    }

    fn dual_simplex(&mut self) -> Result<LpStatus> {
        self.reset_budget();
        let mut stalled = 0usize;
        let mut last_obj = self.objective_value();
        let mut since_refactor = 0usize;
        loop {
            let bland = stalled >= DEGENERATE_RUN;
            if since_refactor >= REFACTOR_EVERY || stalled == DEGENERATE_RUN {
                self.refactor()?;
                since_refactor = 0;
            }
            since_refactor += 1;
            let Some((r, below)) = self.choose_leaving_row(bland) else {
                return Ok(LpStatus::Optimal);
            };
            let Some((j, flips)) = self.dual_ratio_test(r, below, bland) else {
                return Ok(LpStatus::Infeasible);
            };
            self.bump()?;
            for f in flips {
                self.flip(f);
            }
            let target = if below { 0.0 } else { self.col_upper(self.basis[r]) };
            let delta = (self.beta[r] - target) / self.tableau[r][j];
            for i in 0..self.rows.len() {
                let a = self.tableau[i][j];
                if a != 0.0 {
                    self.beta[i] -= a * delta;
                }
            }
            let entering_value = self.value_of_nonbasic(j) + delta;
            let leaving = self.basis[r];
            self.pivot(r, j);
            self.beta[r] = entering_value;
            self.place[leaving] = if below { Place::Lower } else { Place::Upper };

            // the dual objective is nonincreasing
            let obj = self.objective_value();
            if obj < last_obj - 1e-12 * (1.0 + last_obj.abs()) {
                stalled = 0;
                last_obj = obj;
            } else {
                stalled += 1;
            }
        }
    }

    /// Rebuilds the tableau, basic values and reduced costs from the original
    /// rows and the current basis, discarding accumulated rounding error.
    fn refactor(&mut self) -> Result<()> {
        let m = self.rows.len();
        let n = self.n_struct;
        let cols = n + m;
        // basis matrix, augmented with the identity for Gauss-Jordan
        let mut b = vec![vec![0.0; 2 * m]; m];
        for (k, &bv) in self.basis.iter().enumerate() {
            for i in 0..m {
                b[i][k] = if bv < n {
                    self.rows[i][bv]
                } else if bv - n == i {
                    1.0
                } else {
                    0.0
                };
            }
        }
        for (i, row) in b.iter_mut().enumerate() {
            row[m + i] = 1.0;
        }
        for k in 0..m {
            let p = (k..m)
                .max_by(|&x, &y| b[x][k].abs().total_cmp(&b[y][k].abs()))
                .unwrap_or(k);
            if b[p][k].abs() < 1e-13 {
                return Err(Error::Numerical("basis matrix became singular".into()));
            }
            b.swap(k, p);
            let piv = b[k][k];
            for x in b[k].iter_mut() {
                *x /= piv;
            }
            let prow = b[k].clone();
            for (i, row) in b.iter_mut().enumerate() {
                if i != k && row[k] != 0.0 {
                    let f = row[k];
                    for (x, y) in row.iter_mut().zip(&prow) {
                        *x -= f * y;
                    }
                }
            }
        }
        // b[.][m..] now holds B⁻¹ with row k belonging to basis position k
        let inv: Vec<&[f64]> = b.iter().map(|row| &row[m..]).collect();
        let mut tableau = vec![vec![0.0; cols]; m];
        for (r, trow) in tableau.iter_mut().enumerate() {
            for (i, &w) in inv[r].iter().enumerate() {
                if w != 0.0 {
                    for (t, a) in trow[..n].iter_mut().zip(&self.rows[i]) {
                        *t += w * a;
                    }
                    trow[n + i] = w;
                }
            }
        }
        // right-hand side net of nonbasic variables at their upper bound
        let mut rhs = self.rhs.clone();
        for j in 0..n {
            if self.place[j] == Place::Upper {
                let u = self.upper[j];
                for (ri, row) in rhs.iter_mut().zip(&self.rows) {
                    *ri -= row[j] * u;
                }
            }
        }
        let beta: Vec<f64> = inv.iter().map(|w| dot(w, &rhs)).collect();
        let mut y = vec![0.0; m];
        for (r, &bv) in self.basis.iter().enumerate() {
            let c = self.col_cost(bv);
            if c != 0.0 {
                for (yi, w) in y.iter_mut().zip(inv[r]) {
                    *yi += c * w;
                }
            }
        }
        let mut reduced = vec![0.0; cols];
        for (j, d) in reduced.iter_mut().enumerate() {
            if matches!(self.place[j], Place::Basic(_)) {
                continue;
            }
            *d = if j < n {
                self.objective[j] - self.rows.iter().zip(&y).map(|(a, yi)| a[j] * yi).sum::<f64>()
            } else {
                -y[j - n]
            };
        }
        for (r, &bv) in self.basis.iter().enumerate() {
            tableau[r][bv] = 1.0;
        }
        self.tableau = tableau;
        self.beta = beta;
        self.reduced = reduced;
        Ok(())
    }

    /// Moves a boxed nonbasic variable to its opposite bound.
    fn flip(&mut self, j: usize) {
        let u = self.col_upper(j);
        let (delta, place) = match self.place[j] {
            Place::Lower => (u, Place::Upper),
            Place::Upper => (-u, Place::Lower),
            Place::Basic(_) => unreachable!("only nonbasic variables flip"),
        };
        for i in 0..self.rows.len() {
            let a = self.tableau[i][j];
            if a != 0.0 {
                self.beta[i] -= a * delta;
            }
        }
        self.place[j] = place;
    }

    fn choose_leaving_row(&self, bland: bool) -> Option<(usize, bool)> {
        let mut best: Option<(usize, bool, f64)> = None;
        for r in 0..self.rows.len() {
            let v = self.beta[r];
            let ub = self.col_upper(self.basis[r]);
            let tol = FEAS_TOL * (1.0 + ub.min(v.abs()));
            let (infeas, below) = if v < -tol {
                (-v, true)
            } else if v > ub + tol {
                (v - ub, false)
            } else {
                continue;
            };
            let better = match best {
                None => true,
                Some((br, _, _)) if bland => self.basis[r] < self.basis[br],
                Some((_, _, m)) => infeas > m,
            };
            if better {
                best = Some((r, below, infeas));
            }
        }
        best.map(|(r, b, _)| (r, b))
    }

    /// Bound-flipping ratio test on row `r`. Returns the entering column and
    /// the boxed columns to flip before pivoting.
    fn dual_ratio_test(&self, r: usize, below: bool, bland: bool) -> Option<(usize, Vec<usize>)> {
        let row = &self.tableau[r];
        // (ratio, column, |alpha|)
        let mut cands: Vec<(f64, usize, f64)> = Vec::new();
        for j in 0..self.n_cols() {
            let a = row[j];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let eligible = match (self.place[j], below) {
                (Place::Basic(_), _) => false,
                (Place::Lower, true) | (Place::Upper, false) => a < 0.0,
                (Place::Upper, true) | (Place::Lower, false) => a > 0.0,
            };
            if eligible {
                // a reduced cost on the wrong side of zero is tolerance noise
                let d = match self.place[j] {
                    Place::Upper => self.reduced[j],
                    _ => -self.reduced[j],
                };
                cands.push((d.max(0.0) / a.abs(), j, a.abs()));
            }
        }
        if cands.is_empty() {
            return None;
        }
        cands.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));

        let v = self.beta[r];
        let mut slope = if below {
            -v
        } else {
            v - self.col_upper(self.basis[r])
        };
        let mut flips = Vec::new();
        let mut k = 0;
        while k < cands.len() {
            // group near-ties and prefer the largest pivot among them
            let level = cands[k].0;
            let mut end = k;
            while end < cands.len() && cands[end].0 <= level + 1e-12 * (1.0 + level) {
                end += 1;
            }
            let group = &cands[k..end];
            let capacity: f64 = group
                .iter()
                .map(|&(_, j, a)| a * self.col_upper(j))
                .sum();
            if capacity.is_finite() && slope - capacity > 0.0 {
                slope -= capacity;
                flips.extend(group.iter().map(|&(_, j, _)| j));
                k = end;
                continue;
            }
            let pick = if bland {
                group.iter().min_by_key(|c| c.1)
            } else {
                group
                    .iter()
                    .max_by(|x, y| x.2.total_cmp(&y.2).then(y.1.cmp(&x.1)))
            };
            return pick.map(|c| (c.1, flips));
        }
        // every candidate can flip without clearing the infeasibility
        None
    }

    pub fn objective_value(&self) -> f64 {
        (0..self.n_struct)
            .map(|j| self.objective[j] * self.current_value(j))
            .sum()
    }

    /// Values of the structural variables.
    pub fn primal(&self) -> Vec<f64> {
        (0..self.n_struct).map(|j| self.current_value(j)).collect()
    }

    /// Row duals `y = c_B B⁻¹`, one per row, nonnegative at optimality.
    pub fn row_duals(&self) -> Vec<f64> {
        let m = self.rows.len();
        let mut y = vec![0.0; m];
        for (r, &bv) in self.basis.iter().enumerate() {
            let c = self.col_cost(bv);
            if c != 0.0 {
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi += c * self.tableau[r][self.n_struct + i];
                }
            }
        }
        y
    }

    /// Duals of the upper bounds `x_j ≤ u_j`: the reduced costs of the
    /// variables sitting at their upper bound, recomputed from `row_duals`.
    pub fn bound_duals(&self, y: &[f64]) -> Vec<f64> {
        self.bound_duals_for(y, &self.objective)
    }

    /// Bound duals that make `y` dual feasible for a different objective
    /// (used when the solved objective carried a tie-breaking perturbation).
    pub fn bound_duals_for(&self, y: &[f64], objective: &[f64]) -> Vec<f64> {
        (0..self.n_struct)
            .map(|j| {
                if !self.upper[j].is_finite() {
                    return 0.0;
                }
                let priced: f64 = self.rows.iter().zip(y).map(|(a, yi)| a[j] * yi).sum();
                (objective[j] - priced).max(0.0)
            })
            .collect()
    }

    /// `Σ b_i y_i + Σ u_j w_j` evaluated at the given duals.
    pub fn dual_objective(&self, y: &[f64], w: &[f64]) -> f64 {
        let rows: f64 = self.rhs.iter().zip(y).map(|(b, v)| b * v).sum();
        let bounds: f64 = self
            .upper
            .iter()
            .zip(w)
            .filter(|(_, w)| **w > 0.0)
            .map(|(u, w)| u * w)
            .sum();
        rows + bounds
    }
}

/// Convenience wrapper: builds and solves in one call.
pub fn solve(lp: &LinearProgram) -> Result<(LpStatus, Simplex)> {
    let mut s = Simplex::new(lp)?;
    let status = s.optimize()?;
    Ok((status, s))
}
