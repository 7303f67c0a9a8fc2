mod common;

use common::bfs_distances;
use poincert::cones::Kernel;
use poincert::metric::{delta_pairs, from_graph, validate_metric, FiniteMetricSpace, Graph, PairMeasure};
use poincert::linalg::Matrix;
use proptest::prelude::*;

#[test]
fn triangle_graph_is_uniform() {
    let s = from_graph(&Graph::complete(3)).unwrap();
    for (i, j) in s.unordered_pairs() {
        assert_eq!(s.dist(i, j), 1.0);
    }
}

#[test]
fn path_ends_are_two_hops_apart() {
    assert_eq!(from_graph(&Graph::path(3)).unwrap().dist(0, 2), 2.0);
}

#[test]
fn petersen_diameter_matches_bfs() {
    let g = Graph::petersen();
    let edges: Vec<_> = g.edges().collect();
    let oracle = bfs_distances(10, &edges);
    let s = from_graph(&g).unwrap();
    for i in 0..10 {
        for j in 0..10 {
            assert_eq!(s.dist(i, j), oracle[i][j].unwrap() as f64);
        }
    }
    assert_eq!(s.diameter(), 2.0);
}

#[test]
fn disconnected_graph_is_an_error() {
    let g = Graph::new(4, [(0, 1), (2, 3)]).unwrap();
    let msg = from_graph(&g).unwrap_err().to_string();
    assert!(msg.contains("not connected"), "{msg}");
}

#[test]
fn delta_pairs_examples() {
    let two = FiniteMetricSpace::from_rows(&[vec![0.0, 5.0], vec![5.0, 0.0]]).unwrap();
    assert_eq!(delta_pairs(&two, 5.0).pairs(), &[(0, 1), (1, 0)]);
    let c4 = from_graph(&Graph::cycle(4)).unwrap();
    let far = delta_pairs(&c4, 2.0);
    assert_eq!(far.pairs(), &[(0, 2), (1, 3), (2, 0), (3, 1)]);
    // diagonal pairs never belong, even at r = 0
    assert_eq!(delta_pairs(&c4, 0.0).len(), 12);
}

#[test]
fn expectation_examples() {
    let c4 = from_graph(&Graph::cycle(4)).unwrap();
    let mu = PairMeasure::uniform(4, &delta_pairs(&c4, 2.0)).unwrap();
    let square = Kernel::squared_distances(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]);
    // hand sum: four pairs of squared diagonal 2, weight 1/4 each
    assert!((mu.expectation(&square) - 2.0).abs() < 1e-15);
    assert_eq!(mu.expectation(&Kernel::zeros(4)), 0.0);
    let half = PairMeasure::new(2, [(0, 1, 0.5), (1, 0, 0.5)]).unwrap();
    let q = Kernel::from_rows(&[vec![0.0, 9.0], vec![9.0, 0.0]]).unwrap();
    assert_eq!(half.expectation(&q), 9.0);
}

#[test]
fn measures_must_be_symmetric_probabilities() {
    assert!(PairMeasure::new(2, [(0, 1, 1.0)]).is_err());
    assert!(PairMeasure::new(2, [(0, 1, 0.4), (1, 0, 0.4)]).is_err());
    assert!(PairMeasure::new(2, [(0, 0, 1.0)]).is_err());
}

fn random_metric_matrix(points: &[(f64, f64)]) -> Matrix {
    let n = points.len();
    Matrix::from_fn(n, n, |i, j| {
        (points[i].0 - points[j].0).abs() + (points[i].1 - points[j].1).abs()
    })
}

fn points() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 3..7)
}

proptest! {
    #[test]
    fn valid_metrics_are_accepted(pts in points()) {
        prop_assert!(validate_metric(&random_metric_matrix(&pts)).is_ok());
    }

    #[test]
    fn asymmetry_is_rejected(pts in points(), bump in 0.01..1.0f64) {
        let mut d = random_metric_matrix(&pts);
        d[(0, 1)] += bump;
        prop_assert!(validate_metric(&d).is_err());
    }

    #[test]
    fn nonzero_diagonal_is_rejected(pts in points(), bump in 0.01..1.0f64) {
        let mut d = random_metric_matrix(&pts);
        d[(1, 1)] = bump;
        prop_assert!(validate_metric(&d).is_err());
    }

    #[test]
    fn triangle_violation_is_rejected(pts in points(), extra in 0.01..5.0f64) {
        let mut d = random_metric_matrix(&pts);
        // stretch one pair past the path through a third point
        let v = d[(0, 2)] + d[(2, 1)] + extra;
        d[(0, 1)] = v;
        d[(1, 0)] = v;
        prop_assert!(validate_metric(&d).is_err());
    }

    #[test]
    fn far_sets_shrink_as_threshold_grows(pts in points(), r1 in 0.0..20.0f64, dr in 0.0..20.0f64) {
        let s = FiniteMetricSpace::from_matrix(random_metric_matrix(&pts)).unwrap();
        let small = delta_pairs(&s, r1);
        let large = delta_pairs(&s, r1 + dr);
        prop_assert!(large.pairs().iter().all(|&(i, j)| small.contains(i, j)));
    }

    #[test]
    fn expectation_is_bilinear(
        pts in points(),
        other in points(),
        a in 0.0..3.0f64,
        b in 0.0..3.0f64,
        t in 0.0..1.0f64,
    ) {
        let n = pts.len().min(other.len());
        let p1: Vec<Vec<f64>> = pts[..n].iter().map(|p| vec![p.0, p.1]).collect();
        let p2: Vec<Vec<f64>> = other[..n].iter().map(|p| vec![p.0, p.1]).collect();
        let q1 = Kernel::squared_distances(&p1);
        let q2 = Kernel::squared_distances(&p2);
        let combo = q1.scaled(a).add_scaled(&q2, b);
        let m1 = PairMeasure::from_unordered(n, [(0, 1, 1.0)]).unwrap();
        let m2 = PairMeasure::from_unordered(n, (1..n).map(|j| (0, j, j as f64))).unwrap();
        let lhs = m1.expectation(&combo);
        let rhs = a * m1.expectation(&q1) + b * m1.expectation(&q2);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        let mixed = PairMeasure::new(
            n,
            m1.entries().map(|(i, j, w)| (i, j, t * w)).chain(m2.entries().map(|(i, j, w)| (i, j, (1.0 - t) * w))),
        ).unwrap();
        let lhs = mixed.expectation(&q1);
        let rhs = t * m1.expectation(&q1) + (1.0 - t) * m2.expectation(&q1);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }
}
