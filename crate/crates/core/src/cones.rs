//! The cones of `p`-th powers of embeddable metrics.
//!
//! For `p = 2` this is the cone of negative-type kernels: squared distances
//! of point configurations in Euclidean space. Membership is tested through
//! the centered transform `B = -½ J q J`, which is positive semidefinite
//! exactly when `q` is of negative type. A negative eigenvalue of `B` gives a
//! separating functional `q ↦ Σ bᵢ bⱼ qᵢⱼ` with `Σ bᵢ = 0`.
//!
//! For `p = 1` it is the cut cone: nonnegative combinations of the cut
//! semimetrics `δ_S`, which are exactly the `L¹`-embeddable metrics. It is
//! handled by enumerating cuts, so sizes are capped at [`MAX_CUT_POINTS`].

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::lp::{LinearProgram, LpStatus, Simplex};
use crate::metric::FiniteMetricSpace;

/// Largest point count for which cuts are enumerated.
pub const MAX_CUT_POINTS: usize = 16;

/// The exponent `p` of the cone: 1 (cut cone) or 2 (negative type).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Exponent {
    One,
    Two,
}

impl Exponent {
    pub fn value(self) -> u32 {
        match self {
            Exponent::One => 1,
            Exponent::Two => 2,
        }
    }

    pub fn pow(self, x: f64) -> f64 {
        match self {
            Exponent::One => x,
            Exponent::Two => x * x,
        }
    }

    pub fn root(self, x: f64) -> f64 {
        match self {
            Exponent::One => x,
            Exponent::Two => x.max(0.0).sqrt(),
        }
    }
}

impl TryFrom<u32> for Exponent {
    type Error = Error;

    fn try_from(p: u32) -> Result<Self> {
        match p {
            1 => Ok(Exponent::One),
            2 => Ok(Exponent::Two),
            other => Err(Error::invalid(format!("p must be 1 or 2, got {other}"))),
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Symmetric nonnegative matrix with zero diagonal, read as `σᵖ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    q: Matrix,
}

impl Kernel {
    pub fn new(q: Matrix) -> Result<Self> {
        if !q.is_square() {
            return Err(Error::invalid("kernel matrix is not square"));
        }
        let n = q.rows();
        let tol = 1e-12 * (1.0 + q.max_abs());
        for i in 0..n {
            for j in 0..n {
                let x = q[(i, j)];
                if !x.is_finite() {
                    return Err(Error::invalid(format!("kernel entry ({i}, {j}) is not finite")));
                }
                if x < 0.0 {
                    return Err(Error::invalid(format!("kernel entry ({i}, {j}) is negative")));
                }
                if (x - q[(j, i)]).abs() > tol {
                    return Err(Error::invalid(format!("kernel is not symmetric at ({i}, {j})")));
                }
            }
            if q[(i, i)] != 0.0 {
                return Err(Error::invalid(format!("kernel diagonal entry {i} is nonzero")));
            }
        }
        Ok(Kernel { q })
    }

    pub fn zeros(n: usize) -> Self {
        Kernel { q: Matrix::zeros(n, n) }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Kernel::new(Matrix::from_rows(rows)?)
    }

    /// Builds a kernel from the upper triangle `f(i, j)`, `i < j`. Negative
    /// values are rejected.
    pub fn from_upper(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut q = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                q[(i, j)] = v;
                q[(j, i)] = v;
            }
        }
        Kernel::new(q)
    }

    /// Squared Euclidean distances of a point list.
    pub fn squared_distances(points: &[Vec<f64>]) -> Self {
        let n = points.len();
        let q = Matrix::from_fn(n, n, |i, j| {
            points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        });
        Kernel { q }
    }

    /// `d(i, j)ᵖ` for a metric space.
    pub fn metric_power(space: &FiniteMetricSpace, p: Exponent) -> Self {
        let n = space.len();
        Kernel {
            q: Matrix::from_fn(n, n, |i, j| p.pow(space.dist(i, j))),
        }
    }

    pub fn len(&self) -> usize {
        self.q.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.q.rows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.q[(i, j)]
    }

    pub fn matrix(&self) -> &Matrix {
        &self.q
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.q.to_rows()
    }

    pub fn scaled(&self, s: f64) -> Kernel {
        assert!(s >= 0.0, "kernels scale by nonnegative factors");
        Kernel { q: self.q.scaled(s) }
    }

    /// `self + s·other`, `s ≥ 0`.
    pub fn add_scaled(&self, other: &Kernel, s: f64) -> Kernel {
        assert_eq!(self.len(), other.len());
        assert!(s >= 0.0, "kernels scale by nonnegative factors");
        let n = self.len();
        Kernel {
            q: Matrix::from_fn(n, n, |i, j| self.q[(i, j)] + s * other.q[(i, j)]),
        }
    }

    /// `σ = q^{1/p}` as a distance matrix (not validated as a metric).
    pub fn root(&self, p: Exponent) -> Matrix {
        let n = self.len();
        Matrix::from_fn(n, n, |i, j| p.root(self.q[(i, j)]))
    }
}

/// Centered transform `B = -½ J q J` with `J = I - 11ᵀ/n`.
pub fn centered_transform(q: &Kernel) -> Matrix {
    let n = q.len();
    if n == 0 {
        return Matrix::zeros(0, 0);
    }
    let m = q.matrix();
    let nf = n as f64;
    let row_mean: Vec<f64> = (0..n).map(|i| m.row(i).iter().sum::<f64>() / nf).collect();
    let grand = row_mean.iter().sum::<f64>() / nf;
    Matrix::from_fn(n, n, |i, j| -0.5 * (m[(i, j)] - row_mean[i] - row_mean[j] + grand))
}

/// A centered unit vector `b`, read as the functional `q ↦ Σᵢⱼ bᵢ bⱼ qᵢⱼ`.
/// Every negative-type kernel has a nonpositive value.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeCut {
    b: Vec<f64>,
}

impl ConeCut {
    /// Centers and normalizes `v`. Fails on vectors that are (numerically)
    /// constant.
    pub fn new(v: &[f64]) -> Result<Self> {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let mut b: Vec<f64> = v.iter().map(|x| x - mean).collect();
        let norm = linalg::norm2(&b);
        if !(norm > 1e-12 * (1.0 + linalg::norm2(v))) {
            return Err(Error::invalid("cut direction is constant"));
        }
        b.iter_mut().for_each(|x| *x /= norm);
        // re-center after normalizing so the sum is exact to rounding
        let drift = b.iter().sum::<f64>() / n;
        b.iter_mut().for_each(|x| *x -= drift);
        Ok(ConeCut { b })
    }

    pub fn vector(&self) -> &[f64] {
        &self.b
    }

    /// `Σᵢⱼ bᵢ bⱼ qᵢⱼ` over ordered pairs.
    pub fn value(&self, q: &Kernel) -> f64 {
        q.matrix().quadratic_form(&self.b)
    }

    /// Coefficient of the unordered pair `(i, j)` in the functional.
    pub fn pair_coefficient(&self, i: usize, j: usize) -> f64 {
        2.0 * self.b[i] * self.b[j]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NegativeTypeVerdict {
    Member,
    Violated(ConeCut),
}

impl NegativeTypeVerdict {
    pub fn is_member(&self) -> bool {
        matches!(self, NegativeTypeVerdict::Member)
    }
}

/// Smallest eigenvalue of the centered transform with its eigenvector.
pub fn most_negative_direction(q: &Kernel) -> Result<(f64, Vec<f64>)> {
    let eig = linalg::symmetric_eigen(&centered_transform(q))?;
    Ok((eig.values[0], eig.vector(0)))
}

/// Tests `Σ bᵢ bⱼ qᵢⱼ ≤ tol` for all centered unit `b`.
pub fn is_negative_type(q: &Kernel, tol: f64) -> Result<NegativeTypeVerdict> {
    if q.len() < 2 {
        return Ok(NegativeTypeVerdict::Member);
    }
    let (lambda, v) = most_negative_direction(q)?;
    // for centered unit b, bᵀ q b = -2 bᵀ B b
    if -2.0 * lambda <= tol {
        return Ok(NegativeTypeVerdict::Member);
    }
    let cut = ConeCut::new(&v)?;
    if cut.value(q) > 0.0 {
        Ok(NegativeTypeVerdict::Violated(cut))
    } else {
        Ok(NegativeTypeVerdict::Member)
    }
}

/// Points in Euclidean space, one row per point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfiguration {
    coords: Vec<Vec<f64>>,
}

impl PointConfiguration {
    pub fn new(coords: Vec<Vec<f64>>) -> Result<Self> {
        let dim = coords.first().map_or(0, Vec::len);
        if coords.iter().any(|c| c.len() != dim) {
            return Err(Error::invalid("points have different dimensions"));
        }
        Ok(PointConfiguration { coords })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.coords.first().map_or(0, Vec::len)
    }

    pub fn coords(&self) -> &[Vec<f64>] {
        &self.coords
    }

    pub fn squared_distances(&self) -> Kernel {
        Kernel::squared_distances(&self.coords)
    }
}

/// Gram factorization of the centered transform: returns points whose
/// squared distances reproduce `q`.
pub fn embed_from_kernel(q: &Kernel) -> Result<PointConfiguration> {
    let n = q.len();
    let scale = 1.0 + q.matrix().max_abs();
    if let NegativeTypeVerdict::Violated(cut) = is_negative_type(q, 1e-9 * scale)? {
        return Err(Error::NotInCone {
            violation: cut.value(q),
            witness: cut.vector().to_vec(),
        });
    }
    let eig = linalg::symmetric_eigen(&centered_transform(q))?;
    let keep: Vec<usize> = (0..n)
        .rev()
        .filter(|&k| eig.values[k] > 1e-12 * scale)
        .collect();
    let coords = (0..n)
        .map(|i| {
            keep.iter()
                .map(|&k| eig.vectors[(i, k)] * eig.values[k].sqrt())
                .collect()
        })
        .collect();
    PointConfiguration::new(coords)
}

/// Bit masks of the cuts `S ∌ n-1`, `S ≠ ∅`, in increasing order.
pub fn cut_masks(n: usize) -> Result<Vec<u32>> {
    if n > MAX_CUT_POINTS {
        return Err(Error::TooLarge {
            n,
            limit: MAX_CUT_POINTS,
        });
    }
    if n < 2 {
        return Ok(Vec::new());
    }
    Ok((1..(1u32 << (n - 1))).collect())
}

/// `δ_S(i, j)` for a cut mask.
pub fn separates(mask: u32, i: usize, j: usize) -> bool {
    ((mask >> i) & 1) != ((mask >> j) & 1)
}

/// The `2^(n-1) - 1` cut semimetrics on `n` points.
pub fn cut_generators(n: usize) -> Result<Vec<Kernel>> {
    Ok(cut_masks(n)?
        .into_iter()
        .map(|mask| {
            let q = Matrix::from_fn(n, n, |i, j| if separates(mask, i, j) { 1.0 } else { 0.0 });
            Kernel { q }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum CutConeVerdict {
    /// Nonnegative weights aligned with [`cut_generators`].
    Member(Vec<f64>),
    /// A functional `F(x) = Σ_{i<j} fᵢⱼ xᵢⱼ` (stored symmetric, zero diagonal)
    /// with `F ≤ 0` on every cut and `F(q) > 0`.
    Violated(Matrix),
}

impl CutConeVerdict {
    pub fn is_member(&self) -> bool {
        matches!(self, CutConeVerdict::Member(_))
    }
}

/// Absolute reconstruction tolerance for cut-cone membership, relative to
/// `max(1, max q)`.
pub const CUT_TOL: f64 = 1e-8;

/// Decides membership in the cut cone by linear programming:
/// maximize the total reconstructed mass `Σ_S λ_S |δ_S|` subject to
/// `Σ_S λ_S δ_S ≤ q` pairwise. The cone contains `q` exactly when every
/// constraint is tight at the optimum.
pub fn in_cut_cone(q: &Kernel) -> Result<CutConeVerdict> {
    let n = q.len();
    let masks = cut_masks(n)?;
    if n < 2 {
        return Ok(CutConeVerdict::Member(Vec::new()));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let objective = masks
        .iter()
        .map(|&m| pairs.iter().filter(|&&(i, j)| separates(m, i, j)).count() as f64)
        .collect();
    let mut lp = LinearProgram::new(objective);
    for &(i, j) in &pairs {
        let row = masks
            .iter()
            .map(|&m| if separates(m, i, j) { 1.0 } else { 0.0 })
            .collect();
        lp.add_row(row, q.get(i, j));
    }
    let mut simplex = Simplex::new(&lp)?;
    if simplex.optimize()? != LpStatus::Optimal {
        return Err(Error::Numerical("cut-cone LP did not reach an optimum".into()));
    }
    let weights: Vec<f64> = simplex.primal().into_iter().map(|w| w.max(0.0)).collect();
    let tol = CUT_TOL * q.matrix().max_abs().max(1.0);
    let worst = pairs
        .iter()
        .map(|&(i, j)| {
            let rebuilt: f64 = masks
                .iter()
                .zip(&weights)
                .filter(|(m, _)| separates(**m, i, j))
                .map(|(_, w)| w)
                .sum();
            (q.get(i, j) - rebuilt).abs()
        })
        .fold(0.0, f64::max);
    if worst <= tol {
        return Ok(CutConeVerdict::Member(weights));
    }
    let y = simplex.row_duals();
    let mut f = Matrix::zeros(n, n);
    for (&(i, j), yij) in pairs.iter().zip(&y) {
        f[(i, j)] = 1.0 - yij;
        f[(j, i)] = 1.0 - yij;
    }
    Ok(CutConeVerdict::Violated(f))
}

/// `F(q) = Σ_{i<j} fᵢⱼ qᵢⱼ` for a functional returned by [`in_cut_cone`].
pub fn functional_value(f: &Matrix, q: &Kernel) -> f64 {
    let n = q.len();
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| f[(i, j)] * q.get(i, j))
        .sum()
}

/// Membership in the `p`-cone with the default tolerances.
pub fn in_cone(q: &Kernel, p: Exponent) -> Result<bool> {
    match p {
        Exponent::Two => {
            let tol = 1e-9 * (1.0 + q.matrix().max_abs());
            Ok(is_negative_type(q, tol)?.is_member())
        }
        Exponent::One => Ok(in_cut_cone(q)?.is_member()),
    }
}

/// Combines sections `σₙᵖ` with weights `1/Kₙᵖ` into
/// `σᵖ = Σ (σₙ/Kₙ)ᵖ`, a conic combination that stays in the `p`-cone.
pub fn combine_sections(sections: &[(Kernel, f64)], p: Exponent) -> Result<Kernel> {
    let Some((first, _)) = sections.first() else {
        return Err(Error::invalid("no sections to combine"));
    };
    let n = first.len();
    let mut budget = 0.0;
    for (k, (q, big_k)) in sections.iter().enumerate() {
        if q.len() != n {
            return Err(Error::invalid(format!(
                "section {k} has {} points, expected {n}",
                q.len()
            )));
        }
        if !(*big_k > 0.0 && big_k.is_finite()) {
            return Err(Error::invalid(format!("section {k} has a nonpositive constant")));
        }
        budget += 1.0 / p.pow(*big_k);
    }
    if budget > 1.0 + 1e-12 {
        return Err(Error::invalid(format!(
            "constants violate the normalization: Σ 1/Kₙᵖ = {budget} > 1"
        )));
    }
    let mut out = Kernel::zeros(n);
    for (q, big_k) in sections {
        out = out.add_scaled(q, 1.0 / p.pow(*big_k));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c4_squared() -> Kernel {
        Kernel::from_rows(&[
            vec![0.0, 1.0, 4.0, 1.0],
            vec![1.0, 0.0, 1.0, 4.0],
            vec![4.0, 1.0, 0.0, 1.0],
            vec![1.0, 4.0, 1.0, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn kernel_validation() {
        assert!(Kernel::from_rows(&[vec![0.0, -1.0], vec![-1.0, 0.0]]).is_err());
        assert!(Kernel::from_rows(&[vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        assert!(Kernel::from_rows(&[vec![1.0, 1.0], vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn line_points_are_negative_type() {
        let q = Kernel::squared_distances(&[vec![0.0], vec![1.0], vec![3.0]]);
        assert!(is_negative_type(&q, 1e-9).unwrap().is_member());
        assert!(is_negative_type(&Kernel::zeros(3), 1e-9).unwrap().is_member());
    }

    #[test]
    fn c4_squared_is_violated() {
        let q = c4_squared();
        let NegativeTypeVerdict::Violated(cut) = is_negative_type(&q, 1e-9).unwrap() else {
            panic!("C4 squared metric must not be negative type");
        };
        assert!(cut.value(&q) > 0.0);
        // the alternating vector is the witness, up to sign
        let b = cut.vector();
        assert!((b[0].abs() - 0.5).abs() < 1e-9);
        assert!((b[0] + b[1]).abs() < 1e-9 && (b[0] - b[2]).abs() < 1e-9);
        let alt = ConeCut::new(&[1.0, -1.0, 1.0, -1.0]).unwrap();
        // diagonals 4+4 against edges 1+1+1+1, over ordered pairs and /4
        assert!((alt.value(&q) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn embedding_reproduces_kernel() {
        let q = Kernel::from_rows(&[vec![0.0, 4.0], vec![4.0, 0.0]]).unwrap();
        let pts = embed_from_kernel(&q).unwrap();
        assert_eq!(pts.dimension(), 1);
        assert!((pts.coords()[0][0] - pts.coords()[1][0]).abs() - 2.0 < 1e-12);

        let square = Kernel::squared_distances(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
        ]);
        let pts = embed_from_kernel(&square).unwrap();
        assert_eq!(pts.dimension(), 2);
        let back = pts.squared_distances();
        for i in 0..4 {
            for j in 0..4 {
                assert!((back.get(i, j) - square.get(i, j)).abs() < 1e-8);
            }
        }

        let pts = embed_from_kernel(&Kernel::zeros(3)).unwrap();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts.dimension(), 0);
    }

    #[test]
    fn embedding_refuses_non_members() {
        match embed_from_kernel(&c4_squared()) {
            Err(Error::NotInCone { violation, witness }) => {
                assert!(violation > 0.0);
                assert_eq!(witness.len(), 4);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cut_generator_counts() {
        assert_eq!(cut_generators(2).unwrap().len(), 1);
        assert_eq!(cut_generators(2).unwrap()[0].get(0, 1), 1.0);
        assert_eq!(cut_generators(3).unwrap().len(), 3);
        let four = cut_generators(4).unwrap();
        assert_eq!(four.len(), 7);
        let total = four.iter().fold(Kernel::zeros(4), |acc, k| acc.add_scaled(k, 1.0));
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(total.get(i, j), if i == j { 0.0 } else { 4.0 });
            }
        }
        assert!(matches!(cut_generators(17), Err(Error::TooLarge { n: 17, .. })));
    }

    #[test]
    fn line_metric_is_in_cut_cone() {
        let q = Kernel::from_rows(&[
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 1.0],
            vec![2.0, 1.0, 0.0],
        ])
        .unwrap();
        let CutConeVerdict::Member(w) = in_cut_cone(&q).unwrap() else {
            panic!("line metric must be L1");
        };
        assert!(w.iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn c4_squared_is_not_l1() {
        let q = c4_squared();
        let CutConeVerdict::Violated(f) = in_cut_cone(&q).unwrap() else {
            panic!("C4 squared violates the triangle inequality");
        };
        assert!(functional_value(&f, &q) > 1e-6);
        for cut in cut_generators(4).unwrap() {
            assert!(functional_value(&f, &cut) <= 1e-9);
        }
    }

    #[test]
    fn combine_examples() {
        let q = Kernel::squared_distances(&[vec![0.0], vec![1.0], vec![3.0]]);
        let same = combine_sections(&[(q.clone(), 1.0)], Exponent::Two).unwrap();
        assert_eq!(same, q);
        let s2 = 2f64.sqrt();
        let halves = combine_sections(&[(q.clone(), s2), (q.clone(), s2)], Exponent::Two).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((halves.get(i, j) - q.get(i, j)).abs() < 1e-12);
            }
        }
        let err = combine_sections(&[(q.clone(), 1.0), (q.clone(), 1.0)], Exponent::Two);
        assert!(err.is_err());
        let other = Kernel::squared_distances(&[vec![2.0], vec![0.0], vec![1.0]]);
        let mixed = combine_sections(&[(q, 2.0), (other, 2.0)], Exponent::Two).unwrap();
        assert!(is_negative_type(&mixed, 1e-9).unwrap().is_member());
    }

    #[test]
    fn exponent_parsing() {
        assert_eq!(Exponent::try_from(2).unwrap(), Exponent::Two);
        assert!(Exponent::try_from(3).is_err());
    }
}
