//! Finite (pseudo-)metric spaces, far-pair sets, pair measures and graphs.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::cones::Kernel;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Relative tolerance used when checking metric axioms on floating input.
pub const AXIOM_TOL: f64 = 1e-9;

/// A finite pseudo-metric space: labelled points with a distance matrix.
///
/// Zero distances between distinct points are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    labels: Vec<String>,
    dist: Matrix,
}

impl FiniteMetricSpace {
    pub fn new(labels: Vec<String>, dist: Matrix) -> Result<Self> {
        if labels.len() != dist.rows() {
            return Err(Error::invalid(format!(
                "{} labels for {} points",
                labels.len(),
                dist.rows()
            )));
        }
        validate_metric(&dist)?;
        Ok(FiniteMetricSpace { labels, dist })
    }

    /// Space with labels `"0"`, `"1"`, ...
    pub fn from_matrix(dist: Matrix) -> Result<Self> {
        let labels = (0..dist.rows()).map(|i| i.to_string()).collect();
        Self::new(labels, dist)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_matrix(Matrix::from_rows(rows)?)
    }

    /// Euclidean distances between the given points.
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let n = points.len();
        let dist = Matrix::from_fn(n, n, |i, j| {
            points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        });
        Self::from_matrix(dist)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[(i, j)]
    }

    pub fn matrix(&self) -> &Matrix {
        &self.dist
    }

    pub fn diameter(&self) -> f64 {
        self.dist.max_abs()
    }

    /// All distances multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor >= 0.0 && factor.is_finite()) {
            return Err(Error::invalid("scale factor must be finite and nonnegative"));
        }
        Ok(FiniteMetricSpace {
            labels: self.labels.clone(),
            dist: self.dist.scaled(factor),
        })
    }

    /// Unordered pairs `i < j`.
    pub fn unordered_pairs(&self) -> impl Iterator<Item = (usize, usize)> {
        let n = self.len();
        (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
    }
}

/// Checks symmetry, zero diagonal, nonnegativity and the triangle inequality.
pub fn validate_metric(d: &Matrix) -> Result<()> {
    if !d.is_square() {
        return Err(Error::invalid("distance matrix is not square"));
    }
    let n = d.rows();
    let tol = AXIOM_TOL * (1.0 + d.max_abs());
    for i in 0..n {
        for j in 0..n {
            let x = d[(i, j)];
            if !x.is_finite() {
                return Err(Error::invalid(format!("distance ({i}, {j}) is not finite")));
            }
            if x < 0.0 {
                return Err(Error::invalid(format!("distance ({i}, {j}) is negative")));
            }
        }
        if d[(i, i)] != 0.0 {
            return Err(Error::invalid(format!("diagonal entry {i} is nonzero")));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            if (d[(i, j)] - d[(j, i)]).abs() > tol {
                return Err(Error::invalid(format!("distance ({i}, {j}) is not symmetric")));
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[(i, j)] > d[(i, k)] + d[(k, j)] + tol {
                    return Err(Error::invalid(format!(
                        "triangle inequality fails for ({i}, {j}) through {k}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Ordered pairs at distance at least `threshold`. Diagonal pairs are never
/// members, even at threshold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    threshold: f64,
    pairs: Vec<(usize, usize)>,
}

impl PairSet {
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Ordered pairs, lexicographically sorted.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// The `i < j` representatives.
    pub fn unordered(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied().filter(|(i, j)| i < j)
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.pairs.binary_search(&(i, j)).is_ok()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// The far-pair set `{(i, j) : i ≠ j, d(i, j) ≥ r}`.
pub fn delta_pairs(space: &FiniteMetricSpace, r: f64) -> PairSet {
    let n = space.len();
    let pairs = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && space.dist(i, j) >= r)
        .collect();
    PairSet {
        threshold: r,
        pairs,
    }
}

/// Symmetric probability measure on ordered pairs of `n` points.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMeasure {
    n: usize,
    weights: BTreeMap<(usize, usize), f64>,
}

/// Tolerance on the total mass of a [`PairMeasure`].
pub const MASS_TOL: f64 = 1e-12;

impl PairMeasure {
    /// Validates mass, symmetry and index range. Zero weights are dropped.
    pub fn new(n: usize, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut weights = BTreeMap::new();
        for (i, j, w) in entries {
            if i >= n || j >= n {
                return Err(Error::invalid(format!("pair ({i}, {j}) out of range for {n} points")));
            }
            if i == j {
                return Err(Error::invalid(format!("diagonal pair ({i}, {i}) in measure")));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::invalid(format!("weight of ({i}, {j}) must be finite and nonnegative")));
            }
            if w > 0.0 {
                *weights.entry((i, j)).or_insert(0.0) += w;
            }
        }
        let total: f64 = weights.values().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::invalid(format!("measure has total mass {total}, expected 1")));
        }
        for (&(i, j), &w) in &weights {
            let back = weights.get(&(j, i)).copied().unwrap_or(0.0);
            if (w - back).abs() > MASS_TOL {
                return Err(Error::invalid(format!("measure is not symmetric at ({i}, {j})")));
            }
        }
        Ok(PairMeasure { n, weights })
    }

    /// Builds a measure from nonnegative weights on unordered pairs: each
    /// weight is split evenly over both orientations, then everything is
    /// renormalized to mass one.
    pub fn from_unordered(n: usize, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let entries: Vec<_> = entries.into_iter().filter(|e| e.2 > 0.0).collect();
        let total: f64 = entries.iter().map(|e| e.2).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::invalid("measure needs positive finite total weight"));
        }
        let mut weights = BTreeMap::new();
        for (i, j, w) in entries {
            if i >= n || j >= n || i == j {
                return Err(Error::invalid(format!("bad pair ({i}, {j}) for {n} points")));
            }
            let half = 0.5 * w / total;
            *weights.entry((i, j)).or_insert(0.0) += half;
            *weights.entry((j, i)).or_insert(0.0) += half;
        }
        Ok(PairMeasure { n, weights })
    }

    /// Uniform measure over a nonempty pair set.
    pub fn uniform(n: usize, set: &PairSet) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::EmptyFarSet(set.threshold()));
        }
        let w = 1.0 / set.len() as f64;
        Ok(PairMeasure {
            n,
            weights: set.pairs().iter().map(|&p| (p, w)).collect(),
        })
    }

    pub fn num_points(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights.get(&(i, j)).copied().unwrap_or(0.0)
    }

    /// `(i, j, w)` triples with positive weight, sorted by pair.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.weights.iter().map(|(&(i, j), &w)| (i, j, w))
    }

    pub fn support_len(&self) -> usize {
        self.weights.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.values().sum()
    }

    pub fn is_supported_on(&self, set: &PairSet) -> bool {
        self.weights.keys().all(|&(i, j)| set.contains(i, j))
    }

    /// `Σ q(i, j) μ(i, j)`: the mean of `q` under this measure.
    pub fn expectation(&self, q: &Kernel) -> f64 {
        self.entries().map(|(i, j, w)| w * q.get(i, j)).sum()
    }

    /// Same sum for any function of the pair.
    pub fn expectation_of(&self, mut f: impl FnMut(usize, usize) -> f64) -> f64 {
        self.entries().map(|(i, j, w)| w * f(i, j)).sum()
    }
}

/// Nondecreasing nonnegative control function `ρ₊` on distances.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundFunction {
    Identity,
    /// `t^β`
    Power(f64),
    /// `a·t + b`
    Affine { a: f64, b: f64 },
    /// Piecewise-linear through sorted `(t, value)` breakpoints; constant
    /// outside the table.
    Table(Vec<(f64, f64)>),
    /// `t ↦ λ·inner(t/λ)`, the bound after rescaling distances by `λ`.
    Scaled(f64, Box<BoundFunction>),
}

impl BoundFunction {
    pub fn validate(&self) -> Result<()> {
        match self {
            BoundFunction::Identity => Ok(()),
            BoundFunction::Power(beta) if *beta >= 0.0 && beta.is_finite() => Ok(()),
            BoundFunction::Power(_) => Err(Error::invalid("power exponent must be nonnegative")),
            BoundFunction::Affine { a, b } if *a >= 0.0 && *b >= 0.0 && a.is_finite() && b.is_finite() => Ok(()),
            BoundFunction::Affine { .. } => Err(Error::invalid("affine bound needs a, b ≥ 0")),
            BoundFunction::Table(points) => {
                if points.is_empty() {
                    return Err(Error::invalid("empty bound table"));
                }
                for w in points.windows(2) {
                    if !(w[1].0 > w[0].0) || w[1].1 < w[0].1 {
                        return Err(Error::invalid("bound table must be sorted and nondecreasing"));
                    }
                }
                if points.iter().any(|p| !(p.1 >= 0.0) || !p.0.is_finite() || !p.1.is_finite()) {
                    return Err(Error::invalid("bound table values must be finite and nonnegative"));
                }
                Ok(())
            }
            BoundFunction::Scaled(lambda, inner) => {
                if !(*lambda > 0.0 && lambda.is_finite()) {
                    return Err(Error::invalid("scale factor must be positive"));
                }
                inner.validate()
            }
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            BoundFunction::Identity => t,
            BoundFunction::Power(beta) => t.powf(*beta),
            BoundFunction::Affine { a, b } => a * t + b,
            BoundFunction::Table(points) => {
                let first = points[0];
                let last = points[points.len() - 1];
                if t <= first.0 {
                    return first.1;
                }
                if t >= last.0 {
                    return last.1;
                }
                let k = points.partition_point(|p| p.0 <= t);
                let (t0, v0) = points[k - 1];
                let (t1, v1) = points[k];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
            BoundFunction::Scaled(lambda, inner) => lambda * inner.eval(t / lambda),
        }
    }

    /// The same function after rescaling distances and values by `lambda`:
    /// `t ↦ λ ρ(t / λ)`.
    pub fn rescaled(&self, lambda: f64) -> BoundFunction {
        match self {
            BoundFunction::Identity => BoundFunction::Identity,
            BoundFunction::Scaled(mu, inner) => BoundFunction::Scaled(lambda * mu, inner.clone()),
            other => BoundFunction::Scaled(lambda, Box::new(other.clone())),
        }
    }
}

impl fmt::Display for BoundFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundFunction::Identity => write!(f, "identity"),
            BoundFunction::Power(b) => write!(f, "power:{b}"),
            BoundFunction::Affine { a, b } => write!(f, "affine:{a},{b}"),
            BoundFunction::Table(points) => {
                write!(f, "table:")?;
                for (k, (t, v)) in points.iter().enumerate() {
                    if k > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{t},{v}")?;
                }
                Ok(())
            }
            BoundFunction::Scaled(lambda, inner) => write!(f, "scaled:{lambda}:{inner}"),
        }
    }
}

impl FromStr for BoundFunction {
    type Err = Error;

    /// `identity`, `power:0.5`, `affine:2,1` or `table:0,0;1,1;4,2`.
    fn from_str(s: &str) -> Result<Self> {
        let num = |x: &str| -> Result<f64> {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad number {x:?} in bound function")))
        };
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let f = match kind.trim() {
            "identity" | "id" => BoundFunction::Identity,
            "power" => BoundFunction::Power(num(rest)?),
            "affine" => {
                let (a, b) = rest
                    .split_once(',')
                    .ok_or_else(|| Error::invalid("affine bound needs a,b"))?;
                BoundFunction::Affine { a: num(a)?, b: num(b)? }
            }
            "table" => BoundFunction::Table(
                rest.split(';')
                    .map(|pt| {
                        let (t, v) = pt
                            .split_once(',')
                            .ok_or_else(|| Error::invalid("table entries are t,value"))?;
                        Ok((num(t)?, num(v)?))
                    })
                    .collect::<Result<_>>()?,
            ),
            "scaled" => {
                let (lambda, inner) = rest
                    .split_once(':')
                    .ok_or_else(|| Error::invalid("scaled bound needs lambda:inner"))?;
                BoundFunction::Scaled(num(lambda)?, Box::new(inner.parse()?))
            }
            other => return Err(Error::invalid(format!("unknown bound function {other:?}"))),
        };
        f.validate()?;
        Ok(f)
    }
}

/// Simple undirected graph on vertices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    /// Edges are stored as `(min, max)`; duplicates collapse.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::invalid(format!("edge ({a}, {b}) out of range for {n} vertices")));
            }
            if a == b {
                return Err(Error::invalid(format!("self-loop at vertex {a}")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Graph { n, edges: set })
    }

    pub fn path(n: usize) -> Self {
        Graph::new(n, (1..n).map(|i| (i - 1, i))).expect("valid path")
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "a cycle needs at least 3 vertices");
        Graph::new(n, (0..n).map(|i| (i, (i + 1) % n))).expect("valid cycle")
    }

    pub fn complete(n: usize) -> Self {
        Graph::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)))).expect("valid clique")
    }

    pub fn complete_bipartite(a: usize, b: usize) -> Self {
        Graph::new(a + b, (0..a).flat_map(|i| (a..a + b).map(move |j| (i, j)))).expect("valid")
    }

    pub fn petersen() -> Self {
        let outer = (0..5).map(|i| (i, (i + 1) % 5));
        let spokes = (0..5).map(|i| (i, i + 5));
        let inner = (0..5).map(|i| (5 + i, 5 + (i + 2) % 5));
        Graph::new(10, outer.chain(spokes).chain(inner)).expect("valid")
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// `Some(k)` when every vertex has degree `k`.
    pub fn regular_degree(&self) -> Option<usize> {
        let deg = self.degrees();
        let k = *deg.first()?;
        deg.iter().all(|&d| d == k).then_some(k)
    }

    /// Hop distances from `source`; `None` for unreachable vertices.
    pub fn bfs(&self, source: usize) -> Vec<Option<usize>> {
        bfs_lists(&self.neighbors(), source)
    }

    pub fn is_connected(&self) -> bool {
        self.n == 0 || self.bfs(0).iter().all(Option::is_some)
    }
}

fn bfs_lists(adj: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v].expect("queued vertices are reached");
        for &w in &adj[v] {
            if dist[w].is_none() {
                dist[w] = Some(d + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Shortest-path (hop count) metric of a connected graph.
pub fn from_graph(g: &Graph) -> Result<FiniteMetricSpace> {
    let n = g.num_vertices();
    let adj = g.neighbors();
    let mut dist = Matrix::zeros(n, n);
    for s in 0..n {
        for (t, d) in bfs_lists(&adj, s).into_iter().enumerate() {
            match d {
                Some(d) => dist[(s, t)] = d as f64,
                None => return Err(Error::Disconnected(s, t)),
            }
        }
    }
    FiniteMetricSpace::from_matrix(dist)
}
