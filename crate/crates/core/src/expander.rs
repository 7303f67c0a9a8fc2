//! Classical expanders: random regular graphs, the spectral Poincaré
//! constant, and the conversion of a classical expander into a far-pair
//! measure with an explicit constant.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::certsolver::{random_feasible_kernel, CertificateProblem};
use crate::cones::{embed_from_kernel, Exponent};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, symmetric_eigen, Cholesky, Matrix};
use crate::metric::{delta_pairs, from_graph, Graph, PairMeasure};

/// Consecutive rejected pairings before `random_regular` gives up.
pub const MAX_REJECTIONS: u64 = 1000;

/// Random simple connected `k`-regular graph from the permutation model.
///
/// The `n·k` half-edges are shuffled and paired off; pairings with loops,
/// repeated edges or more than one component are thrown away. Attempt `a`
/// draws from stream `a` of a ChaCha generator seeded with `seed`, so the
/// output depends only on `(n, k, seed)`.
pub fn random_regular(n: usize, k: usize, seed: u64) -> Result<Graph> {
    if k < 3 || n <= k || (n * k) % 2 == 1 {
        return Err(Error::invalid(format!(
            "random_regular needs k ≥ 3, n > k and n·k even (got n={n}, k={k})"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for attempt in 0..MAX_REJECTIONS {
        rng.set_stream(attempt);
        rng.set_word_pos(0);
        let mut stubs: Vec<usize> = (0..n * k).map(|s| s / k).collect();
        stubs.shuffle(&mut rng);
        let mut edges = Vec::with_capacity(n * k / 2);
        let mut simple = true;
        for pair in stubs.chunks(2) {
            let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if a == b || edges.contains(&(a, b)) {
                simple = false;
                break;
            }
            edges.push((a, b));
        }
        if !simple {
            continue;
        }
        let g = Graph::new(n, edges)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::Numerical(format!(
        "random_regular rejected {MAX_REJECTIONS} consecutive pairings (n={n}, k={k})"
    )))
}

/// How the edge sum of the Poincaré inequality counts an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EdgeConvention {
    /// Each edge appears twice, once per orientation. `C = 1/λ₂`.
    #[default]
    Ordered,
    /// Each edge appears once. `C = 2/λ₂`.
    Unordered,
}

impl fmt::Display for EdgeConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeConvention::Ordered => "ordered",
            EdgeConvention::Unordered => "unordered",
        })
    }
}

impl FromStr for EdgeConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ordered" => Ok(EdgeConvention::Ordered),
            "unordered" => Ok(EdgeConvention::Unordered),
            other => Err(Error::invalid(format!(
                "unknown edge convention {other:?} (expected ordered or unordered)"
            ))),
        }
    }
}

/// Spectral data of a connected graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralStats {
    /// Second-smallest Laplacian eigenvalue.
    pub lambda2: f64,
    /// Poincaré constant under `convention`.
    pub c: f64,
    /// Common degree, when the graph is regular.
    pub k: Option<usize>,
    pub convention: EdgeConvention,
}

/// Combinatorial Laplacian `D − A`.
pub fn laplacian(g: &Graph) -> Matrix {
    let n = g.num_vertices();
    let mut l = Matrix::zeros(n, n);
    for (a, b) in g.edges() {
        l[(a, b)] -= 1.0;
        l[(b, a)] -= 1.0;
        l[(a, a)] += 1.0;
        l[(b, b)] += 1.0;
    }
    l
}

fn stats(g: &Graph, lambda2: f64, convention: EdgeConvention) -> SpectralStats {
    let c = match convention {
        EdgeConvention::Ordered => 1.0 / lambda2,
        EdgeConvention::Unordered => 2.0 / lambda2,
    };
    SpectralStats {
        lambda2,
        c,
        k: g.regular_degree(),
        convention,
    }
}

fn require_connected(g: &Graph) -> Result<()> {
    if g.num_vertices() < 2 {
        return Err(Error::invalid("the Poincaré constant needs at least two vertices"));
    }
    if !g.is_connected() {
        let dist = g.bfs(0);
        let far = dist.iter().position(Option::is_none).unwrap_or(0);
        return Err(Error::Disconnected(0, far));
    }
    Ok(())
}

/// The smallest `C` in the Poincaré inequality, from the full spectrum of
/// the Laplacian.
pub fn poincare_constant(g: &Graph, convention: EdgeConvention) -> Result<SpectralStats> {
    require_connected(g)?;
    let eig = symmetric_eigen(&laplacian(g))?;
    Ok(stats(g, eig.values[1], convention))
}

/// Same as [`poincare_constant`], but finds `λ₂` by inverse iteration on
/// `L + J` (`J` the all-ones matrix), which moves the constant vector's
/// eigenvalue from 0 to `n`.
pub fn poincare_constant_iterative(g: &Graph, convention: EdgeConvention) -> Result<SpectralStats> {
    require_connected(g)?;
    let n = g.num_vertices();
    let mut m = laplacian(g);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] += 1.0;
        }
    }
    let chol = Cholesky::new(&m)?;
    let mut x: Vec<f64> = (0..n).map(|i| ((i + 1) as f64 * 0.754_877_666).fract() - 0.5).collect();
    let scale = m.max_abs();
    let mut theta = f64::NAN;
    for _ in 0..20_000 {
        let nx = norm2(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        let mx = m.mul_vec(&x);
        theta = dot(&x, &mx);
        let residual = mx
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - theta * b).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= 1e-11 * scale {
            return Ok(stats(g, theta, convention));
        }
        x = chol.solve(&x);
    }
    Err(Error::Numerical(format!(
        "inverse iteration did not converge (last estimate {theta})"
    )))
}

/// A classical expander recast as far-pair data.
#[derive(Debug, Clone, PartialEq)]
pub struct ConversionResult {
    /// `log_k(n/2)`.
    pub r: f64,
    /// Uniform probability on the ordered pairs at distance `≥ r`.
    pub measure: PairMeasure,
    /// `(2kC)^{1/2}`.
    pub big_k: f64,
    pub far_mass_fraction: f64,
    pub spectral: SpectralStats,
}

impl ConversionResult {
    pub fn degree(&self) -> usize {
        self.spectral.k.unwrap_or(0)
    }

    /// `2kC`, the bound on `E_μ(σ²)` for maps that are 1-Lipschitz on edges.
    pub fn variance_bound(&self) -> f64 {
        self.big_k * self.big_k
    }
}

/// Converts a connected `k`-regular graph: threshold `r = log_k(n/2)`, the
/// uniform measure on pairs at distance at least `r`, and `K = (2kC)^{1/2}`.
pub fn classical_to_generalized(g: &Graph, convention: EdgeConvention) -> Result<ConversionResult> {
    let n = g.num_vertices();
    let k = g
        .regular_degree()
        .ok_or_else(|| Error::invalid("conversion needs a regular graph"))?;
    if k < 2 || n <= 2 {
        return Err(Error::invalid(format!(
            "conversion needs degree ≥ 2 and more than two vertices (got n={n}, k={k})"
        )));
    }
    let spectral = poincare_constant(g, convention)?;
    let r = (n as f64 / 2.0).ln() / (k as f64).ln();
    let space = from_graph(g)?;
    let far = delta_pairs(&space, r);
    if far.is_empty() {
        return Err(Error::invalid(format!(
            "empty far-pair set at threshold {r}; use a larger graph for this degree"
        )));
    }
    let measure = PairMeasure::uniform(n, &far)?;
    let big_k = (2.0 * k as f64 * spectral.c).sqrt();
    Ok(ConversionResult {
        r,
        measure,
        big_k,
        far_mass_fraction: far.len() as f64 / (n * n) as f64,
        spectral,
    })
}

/// Monte-Carlo check that `E_μ(σ²) ≤ 2kC` for maps 1-Lipschitz on edges.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub trials: usize,
    pub max_observed: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Dimension of the random projections used by [`empirical_variance_bound`].
const PROJECTION_DIM: usize = 3;

/// Samples maps into `R³` by projecting random feasible configurations,
/// rescales each so its largest stretch over adjacent pairs is exactly 1,
/// and records `E_μ(σ²)`. Trial `i` uses seed `seed + i`.
pub fn empirical_variance_bound(
    g: &Graph,
    trials: usize,
    seed: u64,
    convention: EdgeConvention,
) -> Result<VarianceReport> {
    let conv = classical_to_generalized(g, convention)?;
    let space = from_graph(g)?;
    let prob = CertificateProblem::new(space, conv.r, Exponent::Two);
    let edges: Vec<(usize, usize)> = g.edges().collect();
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_add(t as u64));
            let q = random_feasible_kernel(&prob, &mut rng)?;
            let pts = embed_from_kernel(&q)?;
            let dim = pts.dimension().max(1);
            let proj: Vec<Vec<f64>> = (0..PROJECTION_DIM)
                .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
                .collect();
            let image: Vec<Vec<f64>> = pts
                .coords()
                .iter()
                .map(|x| proj.iter().map(|row| dot(row, &x[..dim.min(x.len())])).collect())
                .collect();
            let sq = |a: usize, b: usize| -> f64 {
                image[a].iter().zip(&image[b]).map(|(u, v)| (u - v).powi(2)).sum()
            };
            let stretch = edges.iter().map(|&(a, b)| sq(a, b)).fold(0.0, f64::max);
            if stretch == 0.0 {
                return Ok(0.0);
            }
            Ok(conv.measure.expectation_of(|a, b| sq(a, b)) / stretch)
        })
        .collect::<Result<_>>()?;
    let max_observed = values.iter().copied().fold(0.0, f64::max);
    let bound = conv.variance_bound();
    Ok(VarianceReport {
        trials,
        max_observed,
        bound,
        pass: max_observed <= bound * (1.0 + 1e-9),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_vertices_cubic_is_k4() {
        let g = random_regular(4, 3, 0).unwrap();
        assert_eq!(g.num_edges(), 6);
        assert_eq!(g.regular_degree(), Some(3));
    }

    #[test]
    fn generator_is_deterministic() {
        let a = random_regular(10, 3, 1).unwrap();
        let b = random_regular(10, 3, 1).unwrap();
        assert_eq!(a, b);
        assert!(a.is_connected());
        assert_eq!(a.regular_degree(), Some(3));
    }

    #[test]
    fn generator_rejects_bad_parameters() {
        assert!(random_regular(5, 3, 0).is_err());
        assert!(random_regular(3, 3, 0).is_err());
        assert!(random_regular(6, 2, 0).is_err());
    }

    #[test]
    fn spectral_examples() {
        let k4 = poincare_constant(&Graph::complete(4), EdgeConvention::Ordered).unwrap();
        assert!((k4.lambda2 - 4.0).abs() < 1e-12);
        assert!((k4.c - 0.25).abs() < 1e-12);
        let edge = poincare_constant(&Graph::path(2), EdgeConvention::Ordered).unwrap();
        assert!((edge.lambda2 - 2.0).abs() < 1e-12);
        assert!((edge.c - 0.5).abs() < 1e-12);
        let un = poincare_constant(&Graph::path(2), EdgeConvention::Unordered).unwrap();
        assert!((un.c - 1.0).abs() < 1e-12);
        assert!(matches!(
            poincare_constant(&Graph::new(3, [(0, 1)]).unwrap(), EdgeConvention::Ordered),
            Err(Error::Disconnected(0, 2))
        ));
    }

    #[test]
    fn conversion_of_k4_and_c8() {
        let k4 = classical_to_generalized(&Graph::complete(4), EdgeConvention::Ordered).unwrap();
        assert!((k4.big_k - 1.5f64.sqrt()).abs() < 1e-12);
        assert!((k4.far_mass_fraction - 0.75).abs() < 1e-15);
        let c8 = classical_to_generalized(&Graph::cycle(8), EdgeConvention::Ordered).unwrap();
        assert!((c8.r - 2.0).abs() < 1e-12);
        // each vertex has 5 vertices at distance ≥ 2
        assert_eq!(c8.measure.support_len(), 40);
        assert!(classical_to_generalized(&Graph::path(4), EdgeConvention::Ordered).is_err());
    }

    #[test]
    fn edge_convention_parses() {
        assert_eq!("ordered".parse::<EdgeConvention>().unwrap(), EdgeConvention::Ordered);
        assert_eq!("unordered".parse::<EdgeConvention>().unwrap(), EdgeConvention::Unordered);
        assert!("both".parse::<EdgeConvention>().is_err());
    }
}
