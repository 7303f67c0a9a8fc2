//! One PASS/FAIL line per acceptance criterion, written straight to stderr
//! so it shows up even when test output is captured.

mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use common::{median_distance, random_metric, small_corpus};
use poincert::certsolver::{self, random_feasible_kernel, solve, solve_truncated, CertificateProblem};
use poincert::compression::opt_curve;
use poincert::cones::{combine_sections, is_negative_type, Exponent, Kernel};
use poincert::expander::{classical_to_generalized, random_regular, EdgeConvention};
use poincert::group::{invariant_certificate, is_cnd, random_cnd, schoenberg_transform, GroupTable};
use poincert::metric::{from_graph, BoundFunction, FiniteMetricSpace, Graph};
use poincert::oracle::{best_min_far, exhaustive_cut_opt, EmbedSearchConfig, SearchObjective};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Check = Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn gaussian_points(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect()).collect()
}

fn c4_certificate() -> Check {
    let prob = CertificateProblem::new(from_graph(&Graph::cycle(4)).unwrap(), 2.0, Exponent::Two);
    let (_, cert) = solve(&prob).map_err(fail)?;
    ensure((cert.bound - 2.0).abs() <= 1e-4, || format!("bound {}", cert.bound))?;
    let m = &cert.measure;
    ensure(m.support_len() == 4, || format!("support of size {}", m.support_len()))?;
    for (i, j) in [(0, 2), (1, 3)] {
        ensure(m.weight(i, j) > 0.0 && m.weight(i, j) == m.weight(j, i), || format!("weight on ({i}, {j})"))?;
    }
    let square = Kernel::squared_distances(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]);
    let report = certsolver::verify(&cert, &prob, &[square]).map_err(fail)?;
    ensure((report.expectations[0] - 2.0).abs() <= 1e-4, || format!("expectation {}", report.expectations[0]))?;
    let (found, _) = best_min_far(&prob.space, 2.0, &BoundFunction::Identity, &EmbedSearchConfig::default()).map_err(fail)?;
    ensure((found - 2.0).abs() <= 1e-3, || format!("search found {found}"))
}

fn path_exactness() -> Check {
    let p17 = from_graph(&Graph::path(17)).unwrap();
    for t in [2.0, 4.0, 8.0] {
        let (_, cert) = solve(&CertificateProblem::new(p17.clone(), t, Exponent::Two)).map_err(fail)?;
        ensure((cert.bound - t * t).abs() <= 1e-3 * t * t, || format!("P17 T={t}: {}", cert.bound))?;
    }
    let p33 = from_graph(&Graph::path(33)).unwrap();
    let r = opt_curve(&p33, &[2.0, 4.0, 8.0, 16.0], Exponent::Two, &BoundFunction::Identity).map_err(fail)?;
    ensure((r.fitted_beta - 1.0).abs() <= 0.02, || format!("fitted exponent {}", r.fitted_beta))
}

fn p1_exactness() -> Check {
    for n in 2..=10 {
        let s = from_graph(&Graph::path(n)).unwrap();
        for t in 1..n {
            let t = t as f64;
            let (_, cert) = solve(&CertificateProblem::new(s.clone(), t, Exponent::One)).map_err(fail)?;
            ensure((cert.bound - t).abs() <= 1e-8, || format!("P{n} T={t}: {}", cert.bound))?;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for k in 0..20 {
        let s = random_metric(2 + k % 7, &mut rng);
        let t = median_distance(&s);
        let exact = exhaustive_cut_opt(&s, t).map_err(fail)?;
        let (_, cert) = solve(&CertificateProblem::new(s, t, Exponent::One)).map_err(fail)?;
        ensure((exact - cert.bound).abs() <= 1e-8, || format!("metric {k}: {exact} vs {}", cert.bound))?;
    }
    Ok(())
}

fn expander_conversion() -> Check {
    let k4 = classical_to_generalized(&Graph::complete(4), EdgeConvention::Ordered).map_err(fail)?;
    ensure((k4.big_k - 1.22474).abs() <= 1e-4, || format!("K4 constant {}", k4.big_k))?;
    for (n, seed) in [(30, 1), (60, 1)] {
        let g = random_regular(n, 3, seed).map_err(fail)?;
        let conv = classical_to_generalized(&g, EdgeConvention::Ordered).map_err(fail)?;
        ensure(conv.far_mass_fraction >= 0.5, || format!("n={n}: far mass {}", conv.far_mass_fraction))?;
        let prob = CertificateProblem::new(from_graph(&g).unwrap(), conv.r, Exponent::Two);
        let (_, cert) = solve(&prob).map_err(fail)?;
        let cap = conv.variance_bound() * (1.0 + 1e-3);
        ensure(cert.bound <= cap, || format!("n={n}: OPT {} above {cap}", cert.bound))?;
    }
    Ok(())
}

fn anytime_soundness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for k in 0..10 {
        let s = random_metric(4 + k % 5, &mut rng);
        let prob = CertificateProblem::new(s.clone(), median_distance(&s), Exponent::Two);
        let samples: Vec<Kernel> = (0..1000)
            .map(|_| random_feasible_kernel(&prob, &mut rng))
            .collect::<Result<_, _>>()
            .map_err(fail)?;
        for cuts in [1, 2, 5] {
            let (_, cert) = solve_truncated(&prob, cuts).map_err(fail)?;
            let report = certsolver::verify(&cert, &prob, &samples).map_err(fail)?;
            ensure(report.max_excess <= 1e-6, || {
                format!("instance {k}, {cuts} cuts: excess {}", report.max_excess)
            })?;
        }
    }
    Ok(())
}

fn cone_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for k in 0..100 {
        let n = 3 + k % 6;
        let terms = 1 + k % 4;
        let mut q = Kernel::zeros(n);
        for _ in 0..terms {
            let part = Kernel::squared_distances(&gaussian_points(n, 1 + k % 3, &mut rng));
            q = q.add_scaled(&part, rng.gen_range(0.0..3.0));
        }
        let tol = 1e-9 * (1.0 + q.matrix().max_abs());
        ensure(is_negative_type(&q, tol).map_err(fail)?.is_member(), || format!("combination {k}"))?;
    }
    for k in 0..20 {
        let n = 4 + k % 5;
        let count = 1 + k % 4;
        // constants with Σ 1/K² = 1 or just below
        let sections: Vec<(Kernel, f64)> = (0..count)
            .map(|_| {
                let q = Kernel::squared_distances(&gaussian_points(n, 3, &mut rng));
                (q, (count as f64).sqrt() * rng.gen_range(1.0..1.5))
            })
            .collect();
        let combined = combine_sections(&sections, Exponent::Two).map_err(fail)?;
        let tol = 1e-9 * (1.0 + combined.matrix().max_abs());
        ensure(is_negative_type(&combined, tol).map_err(fail)?.is_member(), || format!("sections {k}"))?;
        let sigma = combined.root(Exponent::Two);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let slack = sigma[(a, b)] + sigma[(b, c)] - sigma[(a, c)];
                    ensure(slack >= -1e-9, || format!("sections {k}: triangle ({a}, {b}, {c})"))?;
                }
            }
        }
    }
    Ok(())
}

fn group_symmetrization() -> Check {
    let z12 = invariant_certificate(&GroupTable::cyclic(12).unwrap(), 6.0).map_err(fail)?;
    let (_, c12) = solve(&CertificateProblem::new(from_graph(&Graph::cycle(12)).unwrap(), 6.0, Exponent::Two)).map_err(fail)?;
    ensure((z12.bound - c12.bound).abs() <= 1e-4, || format!("Z/12 {} vs C12 {}", z12.bound, c12.bound))?;
    let z4 = invariant_certificate(&GroupTable::cyclic(4).unwrap(), 2.0).map_err(fail)?;
    ensure((z4.bound - 2.0).abs() <= 1e-4, || format!("Z/4 {}", z4.bound))
}

fn schoenberg_checks() -> Check {
    let mut groups: Vec<GroupTable> = (2..=16).map(|n| GroupTable::cyclic(n).unwrap()).collect();
    groups.extend((3..=8).map(|n| GroupTable::dihedral(n).unwrap()));
    groups.push(GroupTable::quaternion().unwrap());
    groups.push(GroupTable::symmetric(3).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for k in 0..50 {
        let g = &groups[k % groups.len()];
        let psi = random_cnd(g, &mut rng);
        ensure(is_cnd(&psi, g, 1e-8).map_err(fail)?.is_member(), || format!("input {k} is not cnd"))?;
        for t in [0.1, 1.0, 10.0] {
            let phi = schoenberg_transform(&psi, g, t).map_err(fail)?;
            let min = phi.min_eigenvalue(g).map_err(fail)?;
            ensure(min >= -1e-8, || format!("input {k}, t={t}: min eigenvalue {min}"))?;
        }
    }
    Ok(())
}

fn oracle_consistency() -> Check {
    for inst in small_corpus() {
        let (_, cert) = solve(&CertificateProblem::new(inst.space.clone(), inst.threshold, Exponent::Two)).map_err(fail)?;
        let (v, _) = best_min_far(&inst.space, inst.threshold, &BoundFunction::Identity, &EmbedSearchConfig::default())
            .map_err(fail)?;
        ensure(v <= cert.bound + 1e-4, || format!("{}: search {v} above bound {}", inst.name, cert.bound))?;
        ensure(cert.bound - v <= 1e-3 * cert.bound, || format!("{}: search {v} vs bound {}", inst.name, cert.bound))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let spaces: Vec<(FiniteMetricSpace, f64)> = small_corpus().into_iter().map(|i| (i.space, i.threshold)).collect();
    for k in 0..20 {
        let (s, t) = &spaces[k % spaces.len()];
        let obj = SearchObjective::new(s, *t, &BoundFunction::Identity, None).map_err(fail)?;
        let x: Vec<f64> = (0..obj.num_coords()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, g) = obj.value_and_gradient(&x, 20.0);
        let h = 1e-6;
        let mut err = 0.0;
        for c in 0..x.len() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[c] += h;
            xm[c] -= h;
            let fd = (obj.value_and_gradient(&xp, 20.0).0 - obj.value_and_gradient(&xm, 20.0).0) / (2.0 * h);
            err += (fd - g[c]).powi(2);
        }
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        ensure(err.sqrt() <= 1e-5 * norm, || format!("gradient at configuration {k}: error {}", err.sqrt()))?;
    }
    Ok(())
}

struct Criterion {
    number: usize,
    name: &'static str,
    limit: Option<Duration>,
    check: fn() -> Check,
}

#[test]
fn acceptance() {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion { number: 1, name: "C4 certificate", limit: secs(1), check: c4_certificate },
        Criterion { number: 2, name: "path exactness", limit: secs(30), check: path_exactness },
        Criterion { number: 3, name: "p=1 exactness", limit: secs(60), check: p1_exactness },
        Criterion { number: 4, name: "expander conversion", limit: secs(600), check: expander_conversion },
        Criterion { number: 5, name: "anytime dual soundness", limit: secs(120), check: anytime_soundness },
        Criterion { number: 6, name: "cone properties", limit: None, check: cone_properties },
        Criterion { number: 7, name: "group symmetrization", limit: None, check: group_symmetrization },
        Criterion { number: 8, name: "Schoenberg checks", limit: None, check: schoenberg_checks },
        Criterion { number: 9, name: "oracle consistency", limit: None, check: oracle_consistency },
    ];
    let mut failures = Vec::new();
    let _ = writeln!(std::io::stderr());
    for c in &criteria {
        let start = Instant::now();
        let mut outcome = (c.check)();
        let elapsed = start.elapsed();
        if let (Ok(()), Some(limit)) = (&outcome, c.limit) {
            if elapsed > limit {
                outcome = Err(format!("took {elapsed:.2?}, limit {limit:.0?}"));
            }
        }
        let line = match &outcome {
            Ok(()) => format!("criterion {}: PASS  {} ({elapsed:.2?})", c.number, c.name),
            Err(why) => {
                failures.push(c.number);
                format!("criterion {}: FAIL  {} ({elapsed:.2?}): {why}", c.number, c.name)
            }
        };
        // libtest only captures the print macros
        let _ = writeln!(std::io::stderr(), "{line}");
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
