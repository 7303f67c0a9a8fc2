//! Instances shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use poincert::linalg::Matrix;
use poincert::metric::{from_graph, FiniteMetricSpace, Graph};
use rand::Rng;

/// A named space with a far threshold.
pub struct Instance {
    pub name: &'static str,
    pub space: FiniteMetricSpace,
    pub threshold: f64,
}

fn inst(name: &'static str, space: FiniteMetricSpace, threshold: f64) -> Instance {
    Instance { name, space, threshold }
}

/// Every small instance (at most five points) the suite cross-checks.
pub fn small_corpus() -> Vec<Instance> {
    let g = |g: Graph| from_graph(&g).unwrap();
    vec![
        inst("two points", FiniteMetricSpace::from_rows(&[vec![0.0, 3.0], vec![3.0, 0.0]]).unwrap(), 3.0),
        inst("triangle", g(Graph::complete(3)), 1.0),
        inst("P3", g(Graph::path(3)), 2.0),
        inst("P4", g(Graph::path(4)), 2.0),
        inst("P5", g(Graph::path(5)), 3.0),
        inst("C4", g(Graph::cycle(4)), 2.0),
        inst("C5", g(Graph::cycle(5)), 2.0),
        inst("K4", g(Graph::complete(4)), 1.0),
        inst("star K1,4", g(Graph::complete_bipartite(1, 4)), 2.0),
        inst("K2,3", g(Graph::complete_bipartite(2, 3)), 2.0),
        inst(
            "plane points",
            FiniteMetricSpace::from_points(&[vec![0.0, 0.0], vec![3.0, 0.0], vec![0.0, 4.0], vec![3.0, 4.0], vec![1.5, 2.0]])
                .unwrap(),
            3.0,
        ),
    ]
}

/// Brute-force breadth-first search distances, independent of the library.
pub fn bfs_distances(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<Option<usize>>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    (0..n)
        .map(|s| {
            let mut d = vec![None; n];
            d[s] = Some(0);
            let mut frontier = vec![s];
            let mut level = 0;
            while !frontier.is_empty() {
                level += 1;
                let mut next = Vec::new();
                for &v in &frontier {
                    for &w in &adj[v] {
                        if d[w].is_none() {
                            d[w] = Some(level);
                            next.push(w);
                        }
                    }
                }
                frontier = next;
            }
            d
        })
        .collect()
}

/// Eigenvalues from nalgebra, ascending.
pub fn eigenvalues(m: &Matrix) -> Vec<f64> {
    let n = m.rows();
    let dm = DMatrix::from_fn(n, n, |i, j| m[(i, j)]);
    let mut v: Vec<f64> = dm.symmetric_eigenvalues().iter().cloned().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Centered transform `-½ J q J`, written out independently.
pub fn centered(q: &Matrix) -> Matrix {
    let n = q.rows();
    let nf = n as f64;
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut v = q[(i, j)];
            for k in 0..n {
                v -= (q[(i, k)] + q[(k, j)]) / nf;
            }
            for k in 0..n {
                for l in 0..n {
                    v += q[(k, l)] / (nf * nf);
                }
            }
            out[(i, j)] = -0.5 * v;
        }
    }
    out
}

/// A random metric: shortest paths over random positive edge weights on a
/// complete graph.
pub fn random_metric<R: Rng>(n: usize, rng: &mut R) -> FiniteMetricSpace {
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let w = rng.gen_range(1.0..4.0f64);
            d[i][j] = w;
            d[j][i] = w;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    FiniteMetricSpace::from_rows(&d).unwrap()
}

/// A threshold that leaves a nonempty far set: the median pair distance.
pub fn median_distance(space: &FiniteMetricSpace) -> f64 {
    let mut d: Vec<f64> = space.unordered_pairs().map(|(i, j)| space.dist(i, j)).collect();
    d.sort_by(f64::total_cmp);
    d[d.len() / 2]
}
