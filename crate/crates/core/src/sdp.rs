//! Primal-dual interior-point method for the `p = 2` certificate program.
//!
//! A negative-type kernel is written through its centered Gram matrix,
//! `q(i, j) = aᵢⱼᵀ H aᵢⱼ` with `H ⪰ 0` of size `n − 1` and
//! `aᵢⱼ = Vᵀ(eᵢ − eⱼ)` for an orthonormal basis `V` of the vectors summing
//! to zero. The program
//!
//! ```text
//! maximize t   subject to   q(i, j) + s = u(i, j)   for every pair
//!                           q(f) − t − r = 0        for every far pair f
//!                           H ⪰ 0,  s, r, t ≥ 0
//! ```
//!
//! is solved with the HKM search direction and Mehrotra's predictor-corrector
//! steps. Only the structure of this one family is exploited: every
//! constraint matrix is rank one, so the Schur complement is a Hadamard
//! product of two small Gram tables.

use faer::prelude::*;
use faer::{Col, Mat, Side};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Cholesky, Matrix};

const MAX_ITERATIONS: usize = 100;
const TOLERANCE: f64 = 1e-10;
const STEP_FRACTION: f64 = 0.98;

/// The program data. `upper` has one finite entry per pair.
#[derive(Debug, Clone)]
pub(crate) struct PairProgram {
    pub n: usize,
    pub pairs: Vec<(usize, usize)>,
    pub upper: Vec<f64>,
    /// Indices into `pairs`.
    pub far: Vec<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct PairSolution {
    /// Centered Gram matrix `V H Vᵀ` of the primal iterate.
    pub gram: Matrix,
    /// Multipliers of the upper-bound rows.
    pub y_upper: Vec<f64>,
    /// Multipliers of the far rows, nonnegative.
    pub far_weights: Vec<f64>,
}

/// Orthonormal basis of `{x : Σ xᵢ = 0}` as the columns of an
/// `n × (n − 1)` matrix (Helmert vectors).
pub(crate) fn centered_basis(n: usize) -> Matrix {
    let mut v = Matrix::zeros(n, n.saturating_sub(1));
    for k in 1..n {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            v[(i, k - 1)] = 1.0 / norm;
        }
        v[(k, k - 1)] = -(k as f64) / norm;
    }
    v
}

fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let (n, m, p) = (a.rows(), a.cols(), b.cols());
    let mut c = Matrix::zeros(n, p);
    for i in 0..n {
        for k in 0..m {
            let x = a[(i, k)];
            if x != 0.0 {
                for j in 0..p {
                    c[(i, j)] += x * b[(k, j)];
                }
            }
        }
    }
    c
}

fn transpose(a: &Matrix) -> Matrix {
    Matrix::from_fn(a.cols(), a.rows(), |i, j| a[(j, i)])
}

fn symmetrize(a: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows(), a.cols(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

fn add(a: &Matrix, b: &Matrix, s: f64) -> Matrix {
    Matrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)] + s * b[(i, j)])
}

fn inner(a: &Matrix, b: &Matrix) -> f64 {
    (0..a.rows())
        .flat_map(|i| (0..a.cols()).map(move |j| (i, j)))
        .map(|(i, j)| a[(i, j)] * b[(i, j)])
        .sum()
}

fn inverse(a: &Matrix) -> Result<Matrix> {
    let chol = Cholesky::new(a)?;
    let n = a.rows();
    let mut inv = Matrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = chol.solve(&e);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    Ok(symmetrize(&inv))
}

/// Largest step `α ≤ 1/STEP_FRACTION` keeping `x + α dx` positive
/// semidefinite.
fn max_step_psd(x: &Matrix, dx: &Matrix) -> Result<f64> {
    let chol = Cholesky::new(x)?;
    let n = x.rows();
    // L⁻¹ dX L⁻ᵀ, column by column
    let mut half = Matrix::zeros(n, n);
    for j in 0..n {
        let col = chol.solve_lower(&dx.column(j));
        for i in 0..n {
            half[(i, j)] = col[i];
        }
    }
    let ht = transpose(&half);
    let mut full = Matrix::zeros(n, n);
    for j in 0..n {
        let col = chol.solve_lower(&ht.column(j));
        for i in 0..n {
            full[(i, j)] = col[i];
        }
    }
    let lambda = symmetric_eigen(&symmetrize(&full))?.values[0];
    Ok(if lambda >= 0.0 { f64::INFINITY } else { -1.0 / lambda })
}

fn max_step_lp(x: &[f64], dx: &[f64]) -> f64 {
    x.iter()
        .zip(dx)
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

/// Cholesky factor of the Schur complement. Near the optimum the matrix
/// becomes numerically singular; a growing multiple of the identity is
/// added until the factorization succeeds.
struct SchurFactor(faer::solvers::Cholesky<f64>);

impl SchurFactor {
    fn new(m: &Mat<f64>) -> Result<Self> {
        let n = m.nrows();
        let max_diag = (0..n).map(|i| m.read(i, i).abs()).fold(0.0, f64::max).max(1e-300);
        let mut shift = 0.0;
        for _ in 0..12 {
            let shifted;
            let target = if shift == 0.0 {
                m
            } else {
                shifted = Mat::from_fn(n, n, |i, j| m.read(i, j) + if i == j { shift } else { 0.0 });
                &shifted
            };
            if let Ok(chol) = target.cholesky(Side::Lower) {
                return Ok(SchurFactor(chol));
            }
            shift = if shift == 0.0 { 1e-14 * max_diag } else { shift * 100.0 };
        }
        Err(Error::Numerical("Schur complement could not be factored".into()))
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Col::from_fn(b.len(), |i| b[i]);
        let x = self.0.solve(&rhs);
        (0..b.len()).map(|i| x.read(i)).collect()
    }
}

struct Iterate {
    x: Matrix,
    z: Matrix,
    /// LP block `[s (pairs), r (far), t]`
    xl: Vec<f64>,
    zl: Vec<f64>,
    y: Vec<f64>,
}

impl PairProgram {
    fn num_rows(&self) -> usize {
        self.pairs.len() + self.far.len()
    }

    fn pair_of_row(&self, row: usize) -> usize {
        if row < self.pairs.len() {
            row
        } else {
            self.far[row - self.pairs.len()]
        }
    }

    /// `aᵢⱼᵀ M aᵢⱼ` for every pair, given `G = V M Vᵀ`.
    fn pair_forms(&self, g: &Matrix) -> Vec<f64> {
        self.pairs
            .iter()
            .map(|&(i, j)| g[(i, i)] + g[(j, j)] - 2.0 * g[(i, j)])
            .collect()
    }

    /// `𝒜(M, m_l)`: row values of a PSD-block matrix and an LP vector.
    fn apply(&self, v: &Matrix, vt: &Matrix, m: &Matrix, ml: &[f64]) -> Vec<f64> {
        let np = self.pairs.len();
        let forms = self.pair_forms(&mat_mul(&mat_mul(v, m), vt));
        let t = ml[np + self.far.len()];
        let mut out = Vec::with_capacity(self.num_rows());
        for k in 0..np {
            out.push(forms[k] + ml[k]);
        }
        for (f, &p) in self.far.iter().enumerate() {
            out.push(forms[p] - ml[np + f] - t);
        }
        out
    }

    /// `𝒜*(y)`: the PSD block `Vᵀ L(w) V` and the LP block.
    fn adjoint(&self, v: &Matrix, vt: &Matrix, y: &[f64]) -> (Matrix, Vec<f64>) {
        let np = self.pairs.len();
        let mut w = y[..np].to_vec();
        for (f, &p) in self.far.iter().enumerate() {
            w[p] += y[np + f];
        }
        let n = self.n;
        let mut lap = Matrix::zeros(n, n);
        for (&(i, j), &wk) in self.pairs.iter().zip(&w) {
            lap[(i, j)] -= wk;
            lap[(j, i)] -= wk;
            lap[(i, i)] += wk;
            lap[(j, j)] += wk;
        }
        let psd = symmetrize(&mat_mul(&mat_mul(vt, &lap), v));
        let mut lp = Vec::with_capacity(np + self.far.len() + 1);
        lp.extend_from_slice(&y[..np]);
        lp.extend(y[np..].iter().map(|v| -v));
        lp.push(-y[np..].iter().sum::<f64>());
        (psd, lp)
    }

    fn rhs(&self) -> Vec<f64> {
        let mut b = self.upper.clone();
        b.extend(std::iter::repeat(0.0).take(self.far.len()));
        b
    }

    pub fn solve(&self) -> Result<PairSolution> {
        let n = self.n;
        let np = self.pairs.len();
        let nf = self.far.len();
        if n < 2 || nf == 0 {
            return Err(Error::invalid("interior-point program needs a far pair"));
        }
        if self.upper.iter().any(|u| !u.is_finite() || *u < 0.0) {
            return Err(Error::invalid("interior-point program needs finite bounds"));
        }
        let d = n - 1;
        let nl = np + nf + 1;
        let m = np + nf;
        let v = centered_basis(n);
        let vt = transpose(&v);
        let b = self.rhs();
        let mut c_lp = vec![0.0; nl];
        c_lp[nl - 1] = 1.0;
        let b_norm = b.iter().map(|x| x * x).sum::<f64>().sqrt();

        let scale = self.upper.iter().copied().fold(1.0, f64::max);
        let mut it = Iterate {
            x: Matrix::identity(d).scaled(scale),
            z: Matrix::identity(d).scaled(scale),
            xl: vec![scale; nl],
            zl: vec![scale; nl],
            y: vec![0.0; m],
        };

        let step = |it: &mut Iterate| -> Result<bool> {
            let (aty, aty_l) = self.adjoint(&v, &vt, &it.y);
            // dual residual 𝒜*y − Z − C
            let rd = add(&aty, &it.z, -1.0);
            let rd_l: Vec<f64> = (0..nl).map(|k| aty_l[k] - it.zl[k] - c_lp[k]).collect();
            let ax = self.apply(&v, &vt, &it.x, &it.xl);
            let rp: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();

            let pobj = it.xl[nl - 1];
            let dobj: f64 = b.iter().zip(&it.y).map(|(b, y)| b * y).sum();
            let gap = inner(&it.x, &it.z) + it.xl.iter().zip(&it.zl).map(|(a, b)| a * b).sum::<f64>();
            let mu = gap / (d + nl) as f64;
            let p_inf = rp.iter().map(|x| x * x).sum::<f64>().sqrt() / (1.0 + b_norm);
            let d_inf = (inner(&rd, &rd) + rd_l.iter().map(|x| x * x).sum::<f64>()).sqrt() / 2.0;
            let rel_gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
            if p_inf < TOLERANCE && d_inf < TOLERANCE && rel_gap < TOLERANCE {
                return Ok(true);
            }

            let zinv = inverse(&it.z)?;
            // Schur complement M = 𝒜(X 𝒜*(·) Z⁻¹) as a Hadamard product
            let gx = mat_mul(&mat_mul(&v, &it.x), &vt);
            let gz = mat_mul(&mat_mul(&v, &zinv), &vt);
            let cross = |g: &Matrix, p: usize, q: usize| -> f64 {
                let (i, j) = self.pairs[p];
                let (k, l) = self.pairs[q];
                g[(i, k)] - g[(i, l)] - g[(j, k)] + g[(j, l)]
            };
            let mut schur = Mat::<f64>::zeros(m, m);
            for r1 in 0..m {
                let p1 = self.pair_of_row(r1);
                for r2 in 0..=r1 {
                    let p2 = self.pair_of_row(r2);
                    let v = cross(&gx, p1, p2) * cross(&gz, p1, p2);
                    schur.write(r1, r2, v);
                    schur.write(r2, r1, v);
                }
            }
            let ratio: Vec<f64> = it.xl.iter().zip(&it.zl).map(|(x, z)| x / z).collect();
            for k in 0..np {
                schur.write(k, k, schur.read(k, k) + ratio[k]);
            }
            for f in 0..nf {
                let (a, b) = (np + f, np + f);
                schur.write(a, b, schur.read(a, b) + ratio[np + f]);
                for g in 0..nf {
                    let b = np + g;
                    schur.write(a, b, schur.read(a, b) + ratio[nl - 1]);
                }
            }
            let schur = SchurFactor::new(&schur)?;

            // solves for one right-hand side of the complementarity equation
            let direction = |k_psd: &Matrix, k_lp: &[f64]| -> (Matrix, Vec<f64>, Vec<f64>, Matrix, Vec<f64>) {
                // N = K − X R_d Z⁻¹
                let n_psd = symmetrize(&add(k_psd, &mat_mul(&mat_mul(&it.x, &rd), &zinv), -1.0));
                let n_lp: Vec<f64> = (0..nl).map(|k| k_lp[k] - ratio[k] * rd_l[k]).collect();
                let an = self.apply(&v, &vt, &n_psd, &n_lp);
                let rhs: Vec<f64> = an.iter().zip(&rp).map(|(a, r)| a - r).collect();
                let dy = schur.solve(&rhs);
                let (ady, ady_l) = self.adjoint(&v, &vt, &dy);
                let dz = add(&ady, &rd, 1.0);
                let dz_l: Vec<f64> = (0..nl).map(|k| ady_l[k] + rd_l[k]).collect();
                let dx = symmetrize(&add(k_psd, &mat_mul(&mat_mul(&it.x, &dz), &zinv), -1.0));
                let dx_l: Vec<f64> = (0..nl).map(|k| k_lp[k] - ratio[k] * dz_l[k]).collect();
                (dx, dx_l, dy, dz, dz_l)
            };

            // predictor
            let k_aff = it.x.scaled(-1.0);
            let k_aff_l: Vec<f64> = it.xl.iter().map(|x| -x).collect();
            let (dx_a, dxl_a, _, dz_a, dzl_a) = direction(&k_aff, &k_aff_l);
            let ap = max_step_psd(&it.x, &dx_a)?.min(max_step_lp(&it.xl, &dxl_a)).min(1.0);
            let ad = max_step_psd(&it.z, &dz_a)?.min(max_step_lp(&it.zl, &dzl_a)).min(1.0);
            let gap_aff = inner(&add(&it.x, &dx_a, ap), &add(&it.z, &dz_a, ad))
                + (0..nl)
                    .map(|k| (it.xl[k] + ap * dxl_a[k]) * (it.zl[k] + ad * dzl_a[k]))
                    .sum::<f64>();
            let sigma = ((gap_aff / gap).max(0.0)).powi(3).min(1.0);

            // corrector: K = σμZ⁻¹ − X − ΔX_aff ΔZ_aff Z⁻¹
            let second = mat_mul(&mat_mul(&dx_a, &dz_a), &zinv);
            let k_c = add(&add(&zinv.scaled(sigma * mu), &it.x, -1.0), &second, -1.0);
            let k_c_l: Vec<f64> = (0..nl)
                .map(|k| (sigma * mu - dxl_a[k] * dzl_a[k]) / it.zl[k] - it.xl[k])
                .collect();
            let (dx, dxl, dy, dz, dzl) = direction(&k_c, &k_c_l);
            let ap = (STEP_FRACTION * max_step_psd(&it.x, &dx)?.min(max_step_lp(&it.xl, &dxl))).min(1.0);
            let ad = (STEP_FRACTION * max_step_psd(&it.z, &dz)?.min(max_step_lp(&it.zl, &dzl))).min(1.0);

            it.x = symmetrize(&add(&it.x, &dx, ap));
            for k in 0..nl {
                it.xl[k] += ap * dxl[k];
                it.zl[k] += ad * dzl[k];
            }
            it.z = symmetrize(&add(&it.z, &dz, ad));
            for (yk, dyk) in it.y.iter_mut().zip(&dy) {
                *yk += ad * dyk;
            }
            Ok(false)
        };

        // The loop ends at convergence or when the iterate gets too close to
        // the boundary for the factorizations; either way the current duals
        // are rounded into an exact certificate by the caller.
        let mut iterations = 0;
        while iterations < MAX_ITERATIONS {
            iterations += 1;
            match step(&mut it) {
                Ok(true) => break,
                Ok(false) => {}
                Err(e) if iterations == 1 => return Err(e),
                Err(_) => break,
            }
        }

        let gram = mat_mul(&mat_mul(&v, &it.x), &vt);
        Ok(PairSolution {
            gram,
            y_upper: it.y[..np].to_vec(),
            far_weights: it.y[np..].iter().map(|v| (-v).max(0.0)).collect(),
        })
    }
}
