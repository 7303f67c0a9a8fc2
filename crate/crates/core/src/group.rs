//! Finite groups with invariant lengths.
//!
//! A conditionally negative definite function `ψ` on a group `G` is the
//! invariant version of a negative-type kernel: `q(g, h) = ψ(g⁻¹h)`. The
//! invariant certificate maximizes `min ψ` over far elements among such `ψ`
//! bounded by the squared word length, and reads a symmetric probability on
//! far elements off the dual.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::certsolver::{dual_bound, Certificate, PERTURBATION};
use crate::cones::{self, ConeCut, Exponent, Kernel, NegativeTypeVerdict};
use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::lp::{LinearProgram, LpStatus, Simplex};
use crate::metric::{FiniteMetricSpace, PairMeasure};

/// Orders up to this size get an exhaustive associativity check.
pub const EXHAUSTIVE_ASSOCIATIVITY: usize = 64;
const SAMPLED_TRIPLES: usize = 10_000;
/// Default cap on cone cuts in [`invariant_certificate`].
pub const GROUP_MAX_CUTS: usize = 500;
const STOP_TOL: f64 = 1e-7;

/// Multiplication table of a finite group with a symmetric generating set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupTable {
    mult: Vec<Vec<usize>>,
    inverses: Vec<usize>,
    generators: Vec<usize>,
    identity: usize,
}

impl GroupTable {
    /// Checks the group axioms and that the generators are closed under
    /// inverses. Whether they generate is checked by [`word_length`].
    pub fn new(mult: Vec<Vec<usize>>, generators: Vec<usize>) -> Result<Self> {
        let n = mult.len();
        if n == 0 {
            return Err(Error::invalid("a group needs at least one element"));
        }
        for (a, row) in mult.iter().enumerate() {
            if row.len() != n {
                return Err(Error::invalid(format!("row {a} of the table has the wrong length")));
            }
            if let Some(b) = row.iter().position(|&c| c >= n) {
                return Err(Error::invalid(format!("product {a}·{b} is out of range")));
            }
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|g| mult[e][g] == g && mult[g][e] == g))
            .ok_or_else(|| Error::invalid("the table has no identity element"))?;
        let mut inverses = Vec::with_capacity(n);
        for g in 0..n {
            let inv = (0..n)
                .find(|&h| mult[g][h] == identity && mult[h][g] == identity)
                .ok_or_else(|| Error::invalid(format!("element {g} has no inverse")))?;
            inverses.push(inv);
        }
        let assoc = |a: usize, b: usize, c: usize| mult[mult[a][b]][c] == mult[a][mult[b][c]];
        if n <= EXHAUSTIVE_ASSOCIATIVITY {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        if !assoc(a, b, c) {
                            return Err(Error::invalid(format!("not associative at ({a}, {b}, {c})")));
                        }
                    }
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            for _ in 0..SAMPLED_TRIPLES {
                let (a, b, c) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
                if !assoc(a, b, c) {
                    return Err(Error::invalid(format!("not associative at ({a}, {b}, {c})")));
                }
            }
        }
        let mut generators = generators;
        generators.sort_unstable();
        generators.dedup();
        for &s in &generators {
            if s >= n {
                return Err(Error::invalid(format!("generator {s} is out of range")));
            }
            if generators.binary_search(&inverses[s]).is_err() {
                return Err(Error::invalid(format!(
                    "generating set is not symmetric: the inverse of {s} is missing"
                )));
            }
        }
        Ok(GroupTable {
            mult,
            inverses,
            generators,
            identity,
        })
    }

    /// `Z/n` generated by `±1`.
    pub fn cyclic(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("cyclic group of order 0"));
        }
        let mult = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
        let gens = if n == 1 { vec![] } else { vec![1, n - 1] };
        GroupTable::new(mult, gens)
    }

    /// Dihedral group of order `2n`: element `k + n·e` is `rᵏ sᵉ`.
    /// Generated by `r`, `r⁻¹` and `s`.
    pub fn dihedral(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("dihedral group needs n ≥ 2"));
        }
        let mult = (0..2 * n)
            .map(|a| {
                let (k1, e1) = (a % n, a / n);
                (0..2 * n)
                    .map(|b| {
                        let (k2, e2) = (b % n, b / n);
                        let k = if e1 == 0 { k1 + k2 } else { k1 + n - k2 };
                        k % n + n * (e1 ^ e2)
                    })
                    .collect()
            })
            .collect();
        GroupTable::new(mult, vec![1, n - 1, n])
    }

    /// Symmetric group on `m ≤ 5` letters, generated by the adjacent
    /// transpositions. Elements are the permutations in lexicographic order.
    pub fn symmetric(m: usize) -> Result<Self> {
        if m == 0 || m > 5 {
            return Err(Error::invalid("symmetric group supported for 1 ≤ m ≤ 5"));
        }
        let perms = permutations(m);
        let index = |p: &[usize]| perms.iter().position(|q| q == p).expect("closed under composition");
        let mult = perms
            .iter()
            .map(|p| {
                perms
                    .iter()
                    .map(|q| index(&(0..m).map(|i| p[q[i]]).collect::<Vec<_>>()))
                    .collect()
            })
            .collect();
        let gens = (0..m.saturating_sub(1))
            .map(|i| {
                let mut t: Vec<usize> = (0..m).collect();
                t.swap(i, i + 1);
                index(&t)
            })
            .collect();
        GroupTable::new(mult, gens)
    }

    /// The eight quaternion units `±1, ±i, ±j, ±k` (in that order),
    /// generated by `±i, ±j`.
    pub fn quaternion() -> Result<Self> {
        // unit index u ∈ {1, i, j, k} with sign: element = 2u + (sign bit)
        const TABLE: [[(usize, bool); 4]; 4] = [
            [(0, false), (1, false), (2, false), (3, false)],
            [(1, false), (0, true), (3, false), (2, true)],
            [(2, false), (3, true), (0, true), (1, false)],
            [(3, false), (2, false), (1, true), (0, true)],
        ];
        let mult = (0..8)
            .map(|a: usize| {
                (0..8)
                    .map(|b: usize| {
                        let (u, neg) = TABLE[a / 2][b / 2];
                        2 * u + ((a % 2) ^ (b % 2) ^ neg as usize)
                    })
                    .collect()
            })
            .collect();
        GroupTable::new(mult, vec![2, 3, 4, 5])
    }

    /// Direct product; element `(a, b)` has index `a·|B| + b`.
    pub fn product(a: &GroupTable, b: &GroupTable) -> Result<Self> {
        let nb = b.order();
        let n = a.order() * nb;
        let mult = (0..n)
            .map(|x| {
                (0..n)
                    .map(|y| a.mul(x / nb, y / nb) * nb + b.mul(x % nb, y % nb))
                    .collect()
            })
            .collect();
        let mut gens: Vec<usize> = a.generators.iter().map(|&g| g * nb + b.identity).collect();
        gens.extend(b.generators.iter().map(|&h| a.identity * nb + h));
        GroupTable::new(mult, gens)
    }

    pub fn order(&self) -> usize {
        self.mult.len()
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.mult[a][b]
    }

    pub fn inverse(&self, g: usize) -> usize {
        self.inverses[g]
    }

    pub fn generators(&self) -> &[usize] {
        &self.generators
    }

    pub fn table(&self) -> &[Vec<usize>] {
        &self.mult
    }

    /// `g⁻¹h`.
    pub fn quotient(&self, g: usize, h: usize) -> usize {
        self.mult[self.inverses[g]][h]
    }

    /// The invariant kernel `(g, h) ↦ f(g⁻¹h)`.
    pub fn invariant_matrix(&self, f: &[f64]) -> Matrix {
        let n = self.order();
        Matrix::from_fn(n, n, |g, h| f[self.quotient(g, h)])
    }

    /// The left-invariant metric `d(g, h) = L(g⁻¹h)`.
    pub fn cayley_space(&self, length: &LengthFunction) -> Result<FiniteMetricSpace> {
        let labels = (0..self.order()).map(|g| g.to_string()).collect();
        FiniteMetricSpace::new(labels, self.invariant_matrix(&length.values))
    }
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    let mut current: Vec<usize> = (0..m).collect();
    fn rec(k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == cur.len() {
            out.push(cur.clone());
            return;
        }
        for i in k..cur.len() {
            cur.swap(k, i);
            rec(k + 1, cur, out);
            cur.swap(k, i);
        }
    }
    rec(0, &mut current, &mut out);
    out.sort();
    out
}

/// A length per group element.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthFunction {
    pub values: Vec<f64>,
}

impl LengthFunction {
    /// `L(1) = 0`, `L(g⁻¹) = L(g)` and `L(gh) ≤ L(g) + L(h)`, up to `tol`.
    pub fn check_axioms(&self, group: &GroupTable, tol: f64) -> Result<()> {
        let n = group.order();
        if self.values.len() != n {
            return Err(Error::invalid("length function has the wrong size"));
        }
        if self.values[group.identity()].abs() > tol {
            return Err(Error::invalid("length of the identity is not 0"));
        }
        for g in 0..n {
            if (self.values[g] - self.values[group.inverse(g)]).abs() > tol {
                return Err(Error::invalid(format!("length is not symmetric at {g}")));
            }
            for h in 0..n {
                if self.values[group.mul(g, h)] > self.values[g] + self.values[h] + tol {
                    return Err(Error::invalid(format!("length is not subadditive at ({g}, {h})")));
                }
            }
        }
        Ok(())
    }
}

/// Word length with respect to the generators, by breadth-first search.
pub fn word_length(group: &GroupTable) -> Result<LengthFunction> {
    let n = group.order();
    let mut dist: Vec<Option<usize>> = vec![None; n];
    dist[group.identity()] = Some(0);
    let mut queue = VecDeque::from([group.identity()]);
    while let Some(g) = queue.pop_front() {
        let d = dist[g].expect("queued elements are reached");
        for &s in group.generators() {
            let h = group.mul(g, s);
            if dist[h].is_none() {
                dist[h] = Some(d + 1);
                queue.push_back(h);
            }
        }
    }
    let unreached: Vec<usize> = (0..n).filter(|&g| dist[g].is_none()).collect();
    if !unreached.is_empty() {
        return Err(Error::invalid(format!(
            "generators do not generate the group; unreached elements {unreached:?}"
        )));
    }
    Ok(LengthFunction {
        values: dist.into_iter().map(|d| d.unwrap_or(0) as f64).collect(),
    })
}

/// Candidate conditionally negative definite function, one value per element.
#[derive(Debug, Clone, PartialEq)]
pub struct CndFunction {
    pub psi: Vec<f64>,
}

/// Candidate positive definite function, one value per element.
#[derive(Debug, Clone, PartialEq)]
pub struct PdFunction {
    pub phi: Vec<f64>,
}

impl PdFunction {
    /// Smallest eigenvalue of `[φ(g⁻¹h)]`.
    pub fn min_eigenvalue(&self, group: &GroupTable) -> Result<f64> {
        if self.phi.len() != group.order() {
            return Err(Error::invalid("function has the wrong size"));
        }
        let m = group.invariant_matrix(&self.phi);
        Ok(symmetric_eigen(&m)?.values[0])
    }

    pub fn is_positive_definite(&self, group: &GroupTable, tol: f64) -> Result<bool> {
        Ok(self.min_eigenvalue(group)? >= -tol)
    }
}

/// Tests whether `ψ` is conditionally negative definite: its invariant
/// kernel has nonpositive centered quadratic form (up to `tol`).
pub fn is_cnd(psi: &CndFunction, group: &GroupTable, tol: f64) -> Result<NegativeTypeVerdict> {
    let n = group.order();
    if psi.psi.len() != n {
        return Err(Error::invalid("function has the wrong size"));
    }
    if psi.psi.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("function has a non-finite value"));
    }
    let scale = psi.psi.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if psi.psi[group.identity()].abs() > 1e-12 * scale {
        return Err(Error::invalid("ψ(1) must be 0"));
    }
    for g in 0..n {
        if (psi.psi[g] - psi.psi[group.inverse(g)]).abs() > 1e-12 * scale {
            return Err(Error::invalid(format!("ψ is not symmetric at element {g}")));
        }
    }
    // a negative value is violated by b = δ₁ − δ_g
    if let Some(g) = (0..n).find(|&g| psi.psi[g] < -tol) {
        let mut b = vec![0.0; n];
        b[group.identity()] = 1.0;
        b[g] = -1.0;
        return Ok(NegativeTypeVerdict::Violated(ConeCut::new(&b)?));
    }
    let clipped: Vec<f64> = psi.psi.iter().map(|v| v.max(0.0)).collect();
    let mut kernel = group.invariant_matrix(&clipped);
    for g in 0..n {
        kernel[(g, g)] = 0.0;
    }
    cones::is_negative_type(&Kernel::new(kernel)?, tol)
}

/// `φ = exp(−tψ)`, positive definite by Schoenberg's theorem.
pub fn schoenberg_transform(psi: &CndFunction, group: &GroupTable, t: f64) -> Result<PdFunction> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid("the transform parameter must be positive"));
    }
    let scale = psi.psi.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if let NegativeTypeVerdict::Violated(cut) = is_cnd(psi, group, 1e-9 * scale)? {
        let clipped: Vec<f64> = psi.psi.iter().map(|v| v.max(0.0)).collect();
        let m = group.invariant_matrix(&clipped);
        let violation = m.quadratic_form(cut.vector()).max(0.0);
        return Err(Error::NotInCone {
            violation,
            witness: cut.vector().to_vec(),
        });
    }
    Ok(PdFunction {
        phi: psi.psi.iter().map(|v| (-t * v).exp()).collect(),
    })
}

/// A random conditionally negative definite function: a sum of one to three
/// terms `‖λ(g)v − v‖²` for Gaussian vectors `v` in the left regular
/// representation.
pub fn random_cnd<R: Rng + ?Sized>(group: &GroupTable, rng: &mut R) -> CndFunction {
    let n = group.order();
    let mut psi = vec![0.0; n];
    for _ in 0..rng.gen_range(1..=3) {
        let v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for (g, out) in psi.iter_mut().enumerate() {
            // (λ(g)v)(h) = v(g⁻¹h)
            *out += (0..n)
                .map(|h| (v[group.quotient(g, h)] - v[h]).powi(2))
                .sum::<f64>();
        }
    }
    psi[group.identity()] = 0.0;
    CndFunction { psi }
}

/// Probability measure on group elements.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementMeasure {
    pub weights: Vec<f64>,
}

impl ElementMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::invalid("element weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("element measure has mass {total}, expected 1")));
        }
        Ok(ElementMeasure { weights })
    }

    pub fn dirac(order: usize, g: usize) -> Result<Self> {
        if g >= order {
            return Err(Error::invalid("element out of range"));
        }
        let mut w = vec![0.0; order];
        w[g] = 1.0;
        ElementMeasure::new(w)
    }

    pub fn is_symmetric(&self, group: &GroupTable) -> bool {
        (0..self.weights.len()).all(|g| (self.weights[g] - self.weights[group.inverse(g)]).abs() <= 1e-12)
    }

    pub fn expectation(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// The pair measure `μ(g)/|G|` on every pair `(h, hg)`: the average of
    /// `μ` over left translates.
    pub fn to_pair_measure(&self, group: &GroupTable) -> Result<PairMeasure> {
        let n = group.order();
        if self.weights[group.identity()] > 0.0 {
            return Err(Error::invalid("measure charges the identity, which gives no pair"));
        }
        let mut entries = Vec::new();
        for (g, &w) in self.weights.iter().enumerate() {
            if w > 0.0 {
                for h in 0..n {
                    entries.push((h, group.mul(h, g), w / n as f64));
                }
            }
        }
        PairMeasure::new(n, entries)
    }
}

/// Result of [`invariant_certificate`].
#[derive(Debug, Clone, PartialEq)]
pub struct GroupCertificate {
    pub threshold: f64,
    /// Bound on `E_μ(ψ)` over admissible `ψ`.
    pub bound: f64,
    pub measure: ElementMeasure,
    pub duality_gap: f64,
    pub cuts: usize,
    /// A feasible function attaining `min_far ψ = bound − duality_gap`.
    pub psi: CndFunction,
}

impl GroupCertificate {
    /// The same certificate on the Cayley metric, as pairs.
    pub fn to_certificate(&self, group: &GroupTable) -> Result<Certificate> {
        Ok(Certificate {
            p: Exponent::Two,
            threshold: self.threshold,
            bound: self.bound,
            measure: self.measure.to_pair_measure(group)?,
            duality_gap: self.duality_gap,
            cuts: self.cuts,
        })
    }
}

/// Maximizes `t` over conditionally negative definite `ψ` with
/// `ψ(g) ≤ L₀(g)²` and `ψ ≥ t` on `{L₀ ≥ threshold}`, by cutting planes over
/// one variable per inverse pair `{g, g⁻¹}`.
pub fn invariant_certificate(group: &GroupTable, threshold: f64) -> Result<GroupCertificate> {
    let n = group.order();
    let length = word_length(group)?;
    if !threshold.is_finite() || threshold < 0.0 {
        return Err(Error::invalid("threshold must be finite and nonnegative"));
    }
    // one class per inverse pair of non-identity elements
    let classes: Vec<usize> = (0..n)
        .filter(|&g| g != group.identity() && g <= group.inverse(g))
        .collect();
    let class_of: Vec<Option<usize>> = (0..n)
        .map(|g| classes.iter().position(|&c| c == g || c == group.inverse(g)))
        .collect();
    let far: Vec<usize> = (0..classes.len())
        .filter(|&c| length.values[classes[c]] >= threshold)
        .collect();
    if far.is_empty() {
        return Err(Error::EmptyFarSet(threshold));
    }
    let nc = classes.len();
    let upper: Vec<f64> = classes.iter().map(|&g| length.values[g].powi(2)).collect();
    let scale = far.iter().map(|&c| upper[c]).fold(f64::INFINITY, f64::min).max(1e-12);
    let mut objective: Vec<f64> = (0..nc)
        .map(|c| {
            let w = 1.0 + (c as f64 * 0.618_033_988_749_895).fract();
            PERTURBATION * scale * w / (nc as f64 * upper[c])
        })
        .collect();
    objective.push(1.0);
    let mut true_objective = vec![0.0; nc + 1];
    true_objective[nc] = 1.0;
    let mut lp = LinearProgram::new(objective);
    for (c, &u) in upper.iter().enumerate() {
        lp.set_upper(c, u);
    }
    let mut far_rows = Vec::new();
    for &c in &far {
        let mut row = vec![0.0; nc + 1];
        row[c] = -1.0;
        row[nc] = 1.0;
        far_rows.push(lp.add_row(row, 0.0));
    }
    let mut simplex = Simplex::new(&lp)?;
    for c in 0..nc {
        simplex.start_at_upper(c)?;
    }
    if simplex.optimize()? != LpStatus::Optimal {
        return Err(Error::Numerical("initial relaxation has no optimum".into()));
    }

    let psi_of = |x: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|g| class_of[g].map_or(0.0, |c| x[c].max(0.0)))
            .collect()
    };
    let mut cuts = 0;
    loop {
        let psi = psi_of(&simplex.primal());
        let mut m = group.invariant_matrix(&psi);
        for g in 0..n {
            m[(g, g)] = 0.0;
        }
        let kernel = Kernel::new(m)?;
        let centered = cones::centered_transform(&kernel);
        let eig = symmetric_eigen(&centered)?;
        let stop = -STOP_TOL * (1.0 + centered.trace());
        if eig.values[0] >= stop {
            break;
        }
        if cuts >= GROUP_MAX_CUTS {
            return Err(Error::IterationCap {
                cuts,
                lower: f64::NAN,
                upper: dual_bound(&simplex, &far_rows, &true_objective)?.0,
            });
        }
        let mut added = 0;
        for k in 0..n.min(8) {
            if eig.values[k] >= stop {
                break;
            }
            let Ok(cut) = ConeCut::new(&eig.vector(k)) else {
                continue;
            };
            let b = cut.vector();
            let mut row = vec![0.0; nc + 1];
            for g in 0..n {
                for h in 0..n {
                    if let Some(c) = class_of[group.quotient(g, h)] {
                        row[c] += b[g] * b[h];
                    }
                }
            }
            if simplex.add_row(row, 0.0)? != LpStatus::Optimal {
                return Err(Error::Numerical("cut made the relaxation infeasible".into()));
            }
            added += 1;
        }
        if added == 0 {
            break;
        }
        cuts += added;
    }

    let (bound, far_weights) = dual_bound(&simplex, &far_rows, &true_objective)?;
    let mut weights = vec![0.0; n];
    for (&c, &w) in far.iter().zip(&far_weights) {
        let g = classes[c];
        let inv = group.inverse(g);
        weights[g] += 0.5 * w;
        weights[inv] += 0.5 * w;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let measure = ElementMeasure::new(weights)?;

    let psi = feasible_invariant(group, &psi_of(&simplex.primal()), &length)?;
    let t = far
        .iter()
        .map(|&c| psi.psi[classes[c]])
        .fold(f64::INFINITY, f64::min);
    Ok(GroupCertificate {
        threshold,
        bound,
        measure,
        duality_gap: (bound - t).max(0.0),
        cuts,
        psi,
    })
}

/// Projects an invariant function onto the cnd cone (the positive part of
/// its centered kernel stays invariant), averages over translates to remove
/// rounding asymmetry, and scales it under the squared length.
fn feasible_invariant(group: &GroupTable, psi: &[f64], length: &LengthFunction) -> Result<CndFunction> {
    let n = group.order();
    let mut m = group.invariant_matrix(psi);
    for g in 0..n {
        m[(g, g)] = 0.0;
    }
    let kernel = Kernel::new(m)?;
    let eig = symmetric_eigen(&cones::centered_transform(&kernel))?;
    let gram = Matrix::from_fn(n, n, |i, j| {
        (0..n)
            .filter(|&k| eig.values[k] > 0.0)
            .map(|k| eig.values[k] * eig.vectors[(i, k)] * eig.vectors[(j, k)])
            .sum()
    });
    let mut out = vec![0.0; n];
    for (g, v) in out.iter_mut().enumerate() {
        *v = (0..n)
            .map(|h| {
                let hg = group.mul(h, g);
                (gram[(h, h)] + gram[(hg, hg)] - 2.0 * gram[(h, hg)]).max(0.0)
            })
            .sum::<f64>()
            / n as f64;
    }
    for g in 0..n {
        let sym = 0.5 * (out[g] + out[group.inverse(g)]);
        out[g] = sym;
    }
    out[group.identity()] = 0.0;
    let mut scale: f64 = 1.0;
    for g in 0..n {
        let u = length.values[g].powi(2);
        if out[g] > u {
            scale = scale.min(u / out[g]);
        }
    }
    Ok(CndFunction {
        psi: out.iter().map(|v| v * scale).collect(),
    })
}

/// Expectations `E_{μ_n}(φ_k)` and the uniformity of `φ_k → 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeTReport {
    /// `expectations[n][k]`.
    pub expectations: Vec<Vec<f64>>,
    /// `sup_n (1 − E_{μ_n}(φ_k))`, one per `k`.
    pub sup_defects: Vec<f64>,
    /// The defects never increase along `k`.
    pub monotone: bool,
    /// Monotone and the last defect is at most the tolerance.
    pub uniform: bool,
}

pub fn relative_t_report(measures: &[ElementMeasure], phis: &[PdFunction], tol: f64) -> Result<RelativeTReport> {
    if measures.is_empty() || phis.is_empty() {
        return Err(Error::invalid("report needs at least one measure and one function"));
    }
    let order = measures[0].weights.len();
    if measures.iter().any(|m| m.weights.len() != order) || phis.iter().any(|p| p.phi.len() != order) {
        return Err(Error::invalid("measures and functions must live on the same group"));
    }
    let expectations: Vec<Vec<f64>> = measures
        .iter()
        .map(|m| phis.iter().map(|p| m.expectation(&p.phi)).collect())
        .collect();
    let sup_defects: Vec<f64> = (0..phis.len())
        .map(|k| {
            expectations
                .iter()
                .map(|row| 1.0 - row[k])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let monotone = sup_defects.windows(2).all(|w| w[1] <= w[0] + 1e-15);
    let uniform = monotone && *sup_defects.last().expect("nonempty") <= tol;
    Ok(RelativeTReport {
        expectations,
        sup_defects,
        monotone,
        uniform,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_lengths() {
        let z6 = GroupTable::cyclic(6).unwrap();
        assert_eq!(word_length(&z6).unwrap().values, vec![0.0, 1.0, 2.0, 3.0, 2.0, 1.0]);
        let trivial = GroupTable::cyclic(1).unwrap();
        assert_eq!(word_length(&trivial).unwrap().values, vec![0.0]);
        let s3 = GroupTable::symmetric(3).unwrap();
        let l = word_length(&s3).unwrap();
        assert_eq!(l.values.iter().cloned().fold(0.0, f64::max), 3.0);
        l.check_axioms(&s3, 0.0).unwrap();
    }

    #[test]
    fn non_generating_set_is_reported() {
        let mult = GroupTable::cyclic(6).unwrap().table().to_vec();
        let g = GroupTable::new(mult, vec![2, 4]).unwrap();
        let err = word_length(&g).unwrap_err().to_string();
        assert!(err.contains("[1, 3, 5]"), "{err}");
    }

    #[test]
    fn bad_tables_are_rejected() {
        assert!(GroupTable::new(vec![vec![0, 1], vec![1, 1]], vec![]).is_err());
        assert!(GroupTable::new(vec![vec![0, 1, 2], vec![1, 2, 0], vec![2, 0, 1]], vec![1]).is_err());
    }

    #[test]
    fn constructors_have_expected_orders() {
        assert_eq!(GroupTable::dihedral(5).unwrap().order(), 10);
        assert_eq!(GroupTable::symmetric(4).unwrap().order(), 24);
        assert_eq!(GroupTable::quaternion().unwrap().order(), 8);
        let z2 = GroupTable::cyclic(2).unwrap();
        let z3 = GroupTable::cyclic(3).unwrap();
        let p = GroupTable::product(&z2, &z3).unwrap();
        assert_eq!(p.order(), 6);
        assert_eq!(word_length(&p).unwrap().values.iter().cloned().fold(0.0, f64::max), 2.0);
    }

    #[test]
    fn quaternion_relations() {
        let q = GroupTable::quaternion().unwrap();
        let (i, j, k, minus_one) = (2, 4, 6, 1);
        assert_eq!(q.mul(i, i), minus_one);
        assert_eq!(q.mul(i, j), k);
        assert_eq!(q.mul(j, i), k + 1);
    }

    #[test]
    fn cnd_examples_on_z4_and_z6() {
        let z4 = GroupTable::cyclic(4).unwrap();
        let raw = CndFunction { psi: vec![0.0, 1.0, 4.0, 1.0] };
        assert!(!is_cnd(&raw, &z4, 1e-9).unwrap().is_member());
        let capped = CndFunction { psi: vec![0.0, 1.0, 2.0, 1.0] };
        assert!(is_cnd(&capped, &z4, 1e-9).unwrap().is_member());
        assert!(is_cnd(&CndFunction { psi: vec![0.0; 4] }, &z4, 1e-9).unwrap().is_member());
        let z6 = GroupTable::cyclic(6).unwrap();
        let wl = CndFunction { psi: word_length(&z6).unwrap().values };
        assert!(is_cnd(&wl, &z6, 1e-9).unwrap().is_member());
    }

    #[test]
    fn schoenberg_of_zero_is_all_ones() {
        let z4 = GroupTable::cyclic(4).unwrap();
        let phi = schoenberg_transform(&CndFunction { psi: vec![0.0; 4] }, &z4, 1.0).unwrap();
        assert_eq!(phi.phi, vec![1.0; 4]);
        assert!(phi.is_positive_definite(&z4, 1e-8).unwrap());
        let raw = CndFunction { psi: vec![0.0, 1.0, 4.0, 1.0] };
        assert!(matches!(schoenberg_transform(&raw, &z4, 1.0), Err(Error::NotInCone { .. })));
    }

    #[test]
    fn z4_certificate_matches_square() {
        let z4 = GroupTable::cyclic(4).unwrap();
        let cert = invariant_certificate(&z4, 2.0).unwrap();
        assert!((cert.bound - 2.0).abs() < 1e-6, "bound {}", cert.bound);
        assert!((cert.measure.weights[2] - 1.0).abs() < 1e-12);
        assert!(cert.measure.is_symmetric(&z4));
    }

    #[test]
    fn z12_certificate_matches_cycle_space() {
        let z12 = GroupTable::cyclic(12).unwrap();
        let cert = invariant_certificate(&z12, 6.0).unwrap();
        assert!((cert.bound - 14.928_203_230_275_509).abs() < 1e-4, "bound {}", cert.bound);
        assert!(cert.duality_gap < 1e-4);
        assert!(is_cnd(&cert.psi, &z12, 1e-8).unwrap().is_member());
        let pairs = cert.to_certificate(&z12).unwrap();
        assert!((pairs.measure.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trivial_group_has_no_far_set() {
        let g = GroupTable::cyclic(1).unwrap();
        assert!(matches!(invariant_certificate(&g, 1.0), Err(Error::EmptyFarSet(_))));
    }

    #[test]
    fn pair_measure_bridge_is_symmetric() {
        let z6 = GroupTable::cyclic(6).unwrap();
        let mu = ElementMeasure::new(vec![0.0, 0.25, 0.0, 0.5, 0.0, 0.25]).unwrap();
        let pm = mu.to_pair_measure(&z6).unwrap();
        assert!((pm.total_mass() - 1.0).abs() < 1e-12);
        assert!((pm.weight(0, 3) - 0.5 / 6.0).abs() < 1e-15);
        assert!((pm.weight(2, 1) - 0.25 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn relative_t_flags_dirac_at_far_element() {
        let z4 = GroupTable::cyclic(4).unwrap();
        let psi = CndFunction { psi: vec![0.0, 1.0, 2.0, 1.0] };
        let phi = schoenberg_transform(&psi, &z4, 10.0).unwrap();
        let mu = ElementMeasure::dirac(4, 2).unwrap();
        let report = relative_t_report(&[mu], &[phi], 1e-3).unwrap();
        assert!(report.expectations[0][0] < 1e-8);
        assert!(!report.uniform);
        let ones = PdFunction { phi: vec![1.0; 4] };
        let r = relative_t_report(&[ElementMeasure::dirac(4, 1).unwrap()], &[ones], 1e-12).unwrap();
        assert!(r.uniform);
    }
}
