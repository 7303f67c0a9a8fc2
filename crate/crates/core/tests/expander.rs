mod common;

use std::f64::consts::PI;

use common::bfs_distances;
use nalgebra::DMatrix;
use poincert::certsolver::{solve, CertificateProblem};
use poincert::cones::Exponent;
use poincert::expander::{
    classical_to_generalized, empirical_variance_bound, poincare_constant, poincare_constant_iterative,
    random_regular, EdgeConvention,
};
use poincert::metric::{from_graph, Graph};
use poincert::Error;

/// Laplacian spectrum computed from the edge list alone.
fn oracle_spectrum(g: &Graph) -> Vec<f64> {
    let n = g.num_vertices();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for (a, b) in g.edges() {
        l[(a, b)] = -1.0;
        l[(b, a)] = -1.0;
        l[(a, a)] += 1.0;
        l[(b, b)] += 1.0;
    }
    let mut v: Vec<f64> = l.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

const ORDERED: EdgeConvention = EdgeConvention::Ordered;

#[test]
fn complete_graph_k4() {
    let g = random_regular(4, 3, 0).unwrap();
    assert_eq!(g.num_edges(), 6);
    let s = poincare_constant(&g, ORDERED).unwrap();
    assert!((s.lambda2 - 4.0).abs() < 1e-10);
    assert!((s.c - 0.25).abs() < 1e-10);
    assert_eq!(s.k, Some(3));
    let spec = oracle_spectrum(&Graph::complete(4));
    assert!(spec[0].abs() < 1e-10 && spec[1..].iter().all(|v| (v - 4.0).abs() < 1e-10));

    let conv = classical_to_generalized(&g, ORDERED).unwrap();
    assert!((conv.big_k - 1.5f64.sqrt()).abs() < 1e-10);
    assert!((conv.variance_bound() - 1.5).abs() < 1e-10);
}

#[test]
fn cycles_match_circulant_formula() {
    for n in 3..=20 {
        let g = Graph::cycle(n);
        let s = poincare_constant(&g, ORDERED).unwrap();
        let expected = 2.0 - 2.0 * (2.0 * PI / n as f64).cos();
        assert!((s.lambda2 - expected).abs() < 1e-10, "C{n}");
        assert!((s.lambda2 - oracle_spectrum(&g)[1]).abs() < 1e-10);
    }
}

#[test]
fn single_edge() {
    let s = poincare_constant(&Graph::path(2), ORDERED).unwrap();
    assert!((s.lambda2 - 2.0).abs() < 1e-12);
    assert!((s.c - 0.5).abs() < 1e-12);
    let u = poincare_constant(&Graph::path(2), EdgeConvention::Unordered).unwrap();
    assert!((u.c - 1.0).abs() < 1e-12);
}

#[test]
fn random_functions_obey_the_inequality() {
    let g = random_regular(12, 3, 5).unwrap();
    let s = poincare_constant(&g, ORDERED).unwrap();
    let n = g.num_vertices() as f64;
    let edges: Vec<_> = g.edges().collect();
    let mut seed = 1u64;
    for _ in 0..200 {
        let f: Vec<f64> = (0..g.num_vertices())
            .map(|_| {
                seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (seed >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect();
        let mut all = 0.0;
        for x in &f {
            for y in &f {
                all += (x - y).powi(2);
            }
        }
        let ordered_edges: f64 = 2.0 * edges.iter().map(|&(a, b)| (f[a] - f[b]).powi(2)).sum::<f64>();
        assert!(all / (n * n) <= s.c / n * ordered_edges * (1.0 + 1e-12));
    }
}

#[test]
fn cycle_c8_conversion() {
    let conv = classical_to_generalized(&Graph::cycle(8), ORDERED).unwrap();
    assert!((conv.r - 2.0).abs() < 1e-12);
    let s = from_graph(&Graph::cycle(8)).unwrap();
    let far: Vec<(usize, usize)> = s.unordered_pairs().filter(|&(i, j)| s.dist(i, j) >= 2.0).collect();
    // each vertex has 5 vertices at distance 2, 3 or 4
    assert_eq!(far.len(), 8 * 5 / 2);
    for (i, j) in s.unordered_pairs() {
        let w = conv.measure.weight(i, j);
        if s.dist(i, j) >= 2.0 {
            assert!((w - 1.0 / 40.0).abs() < 1e-12);
        } else {
            assert_eq!(w, 0.0);
        }
    }
    assert!((conv.far_mass_fraction - 40.0 / 64.0).abs() < 1e-12);
}

#[test]
fn circle_embedding_of_c8_obeys_the_bound() {
    let conv = classical_to_generalized(&Graph::cycle(8), ORDERED).unwrap();
    let radius = 1.0 / (2.0 * (PI / 8.0).sin());
    let pts: Vec<(f64, f64)> = (0..8)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / 8.0;
            (radius * a.cos(), radius * a.sin())
        })
        .collect();
    let value = conv
        .measure
        .expectation_of(|a, b| (pts[a].0 - pts[b].0).powi(2) + (pts[a].1 - pts[b].1).powi(2));
    assert!(value <= conv.variance_bound(), "{value} > {}", conv.variance_bound());
}

#[test]
fn rejects_bad_inputs() {
    assert!(matches!(classical_to_generalized(&Graph::path(4), ORDERED), Err(Error::Invalid(_))));
    let two = Graph::new(4, [(0, 1), (2, 3)]).unwrap();
    assert!(matches!(poincare_constant(&two, ORDERED), Err(Error::Disconnected(..))));
    assert!(random_regular(5, 3, 0).is_err());
    assert!(random_regular(4, 2, 0).is_err());
    assert!(random_regular(3, 3, 0).is_err());
}

#[test]
fn generated_graphs_are_connected_cubic() {
    let g = random_regular(50, 3, 7).unwrap();
    assert_eq!(g.regular_degree(), Some(3));
    let edges: Vec<_> = g.edges().collect();
    assert!(bfs_distances(50, &edges)[0].iter().all(Option::is_some));
    let spec = oracle_spectrum(&g);
    assert!(spec[1] > 1e-8);
    let ours = poincare_constant(&g, ORDERED).unwrap();
    assert!((ours.lambda2 - spec[1]).abs() < 1e-9 * spec[1].max(1.0));
}

#[test]
fn generation_is_deterministic() {
    let a = random_regular(10, 3, 1).unwrap();
    let b = random_regular(10, 3, 1).unwrap();
    assert_eq!(a, b);
    let c = random_regular(10, 3, 2).unwrap();
    assert_eq!(c.regular_degree(), Some(3));
}

#[test]
fn iterative_matches_dense() {
    let mut graphs = vec![Graph::cycle(30), Graph::petersen(), Graph::complete(7), Graph::path(40)];
    for (n, seed) in [(20, 1), (50, 2), (80, 3), (100, 4)] {
        graphs.push(random_regular(n, 3, seed).unwrap());
    }
    graphs.push(random_regular(64, 4, 9).unwrap());
    for g in &graphs {
        let dense = poincare_constant(g, ORDERED).unwrap().lambda2;
        let iter = poincare_constant_iterative(g, ORDERED).unwrap().lambda2;
        assert!((dense - iter).abs() <= 1e-8 * dense, "{dense} vs {iter}");
    }
}

#[test]
fn sampled_variance_is_below_the_bound() {
    let k4 = empirical_variance_bound(&Graph::complete(4), 100, 3, ORDERED).unwrap();
    assert_eq!(k4.trials, 100);
    assert!((k4.bound - 1.5).abs() < 1e-10);
    assert!(k4.max_observed <= 1.5 && k4.pass);
    assert!(k4.max_observed > 0.0);
    let cubic = empirical_variance_bound(&random_regular(16, 3, 4).unwrap(), 50, 0, ORDERED).unwrap();
    assert!(cubic.pass);
}

#[test]
fn certificates_beat_the_converted_bound() {
    for (n, seed) in [(8, 1), (10, 2), (12, 3), (16, 4), (20, 5)] {
        let g = random_regular(n, 3, seed).unwrap();
        let conv = classical_to_generalized(&g, ORDERED).unwrap();
        assert!(conv.far_mass_fraction >= 0.5, "n={n}: {}", conv.far_mass_fraction);
        assert!(conv.measure.is_supported_on(&poincert::metric::delta_pairs(&from_graph(&g).unwrap(), conv.r)));
        let prob = CertificateProblem::new(from_graph(&g).unwrap(), conv.r, Exponent::Two);
        let (_, cert) = solve(&prob).unwrap();
        assert!(
            cert.bound <= conv.variance_bound() * (1.0 + 1e-3),
            "n={n}: OPT {} above 2kC {}",
            cert.bound,
            conv.variance_bound()
        );
    }
}
