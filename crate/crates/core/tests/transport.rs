mod common;

use mfs_core::measure::{EmpiricalMeasure, MeasurePath};
use mfs_core::transport::{self, assignment, simplex, DEFAULT_SUPPORT_CAP};
use mfs_core::Error;
use proptest::prelude::*;
use rand::SeedableRng;

fn w(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64) -> f64 {
    transport::wasserstein(mu, nu, p).unwrap()
}

#[test]
fn solvers_equal_brute_force_on_small_uniform_instances() {
    let mut rng = common::Rng8::seed_from_u64(6);
    for case in 0..200 {
        let n = 1 + case % 6;
        let p = [1.0, 2.0, 1.5][case % 3];
        let (_, _, cost) = common::random_uniform_pair(&mut rng, n, 2, p);
        let brute = common::brute_force_assignment(&cost, n);
        let hungarian = assignment::mean_cost(&cost, n);
        let uniform = vec![1.0 / n as f64; n];
        let lp = simplex::solve(&cost, n, n, &uniform, &uniform).unwrap().cost;
        assert!((hungarian - brute).abs() <= 1e-10, "case {case}: {hungarian} vs {brute}");
        assert!((lp - brute).abs() <= 1e-10, "case {case}: {lp} vs {brute}");
    }
}

#[test]
fn support_cap_is_enforced() {
    let mu = EmpiricalMeasure::uniform(2, vec![0.0; 2 * 3000]).unwrap();
    let nu = EmpiricalMeasure::uniform(2, vec![1.0; 2 * 1100]).unwrap();
    match transport::wasserstein(&mu, &nu, 2.0) {
        Err(Error::SupportCapExceeded { size: 4100, cap }) => assert_eq!(cap, DEFAULT_SUPPORT_CAP),
        other => panic!("{other:?}"),
    }
}

#[test]
fn path_distance_needs_matching_grids() {
    let m = EmpiricalMeasure::dirac(&[0.0]).unwrap();
    let a = MeasurePath::new(vec![0.0, 0.1], vec![m.clone(), m.clone()]).unwrap();
    let b = MeasurePath::new(vec![0.0, 0.2], vec![m.clone(), m]).unwrap();
    assert!(transport::wasserstein_path(&a, &b, 2.0).is_err());
}

fn measure(dim: usize, max_atoms: usize) -> impl Strategy<Value = EmpiricalMeasure> {
    (1..=max_atoms)
        .prop_flat_map(move |n| {
            (
                prop::collection::vec(-2.0f64..2.0, n * dim),
                prop::collection::vec(0.05f64..1.0, n),
            )
        })
        .prop_map(move |(atoms, raw)| {
            let total: f64 = raw.iter().sum();
            let weights = raw.iter().map(|x| x / total).collect();
            EmpiricalMeasure::new(dim, atoms, weights).unwrap()
        })
}

fn uniform_measure(dim: usize, max_atoms: usize) -> impl Strategy<Value = EmpiricalMeasure> {
    (1..=max_atoms)
        .prop_flat_map(move |n| prop::collection::vec(-2.0f64..2.0, n * dim))
        .prop_map(move |atoms| EmpiricalMeasure::uniform(dim, atoms).unwrap())
}

proptest! {
    #![proptest_config(common::proptest_config(200))]

    #[test]
    fn symmetric(mu in measure(2, 8), nu in measure(2, 8), p in 1.0f64..3.0) {
        let (a, b) = (w(&mu, &nu, p), w(&nu, &mu, p));
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a), "{} {}", a, b);
    }

    #[test]
    fn triangle_inequality(a in measure(2, 8), b in measure(2, 8), c in measure(2, 8), p in 1.0f64..3.0) {
        prop_assert!(w(&a, &c, p) <= w(&a, &b, p) + w(&b, &c, p) + 1e-9);
    }

    #[test]
    fn zero_iff_equal(mu in measure(2, 6)) {
        prop_assert!(w(&mu, &mu, 2.0) <= 1e-7);
        // Same atoms, different weights: strictly positive.
        let n = mu.len();
        prop_assume!(n >= 2 && mu.canonical().len() == n);
        let uni = EmpiricalMeasure::uniform(2, mu.atoms().to_vec()).unwrap();
        let differ = mu.weights().iter().any(|&x| (x - 1.0 / n as f64).abs() > 1e-3);
        prop_assume!(differ);
        prop_assert!(w(&mu, &uni, 2.0) > 0.0);
    }

    #[test]
    fn permuted_atoms_are_the_same_measure(mu in uniform_measure(3, 7), shift in 0usize..7) {
        let n = mu.len();
        let atoms: Vec<f64> = (0..n).flat_map(|i| mu.atom((i + shift) % n).to_vec()).collect();
        let nu = EmpiricalMeasure::uniform(3, atoms).unwrap();
        prop_assert_eq!(transport::wasserstein_cost(&mu, &nu, 2.0, DEFAULT_SUPPORT_CAP).unwrap(), 0.0);
    }

    #[test]
    fn one_dimensional_path_equals_lp(mu in measure(1, 10), nu in measure(1, 10), p in 1.0f64..3.0) {
        let fast = transport::wasserstein_cost(&mu, &nu, p, DEFAULT_SUPPORT_CAP).unwrap();
        let cost: Vec<f64> = (0..mu.len())
            .flat_map(|i| (0..nu.len()).map(move |j| (i, j)))
            .map(|(i, j)| (mu.atom(i)[0] - nu.atom(j)[0]).abs().powf(p))
            .collect();
        let lp = simplex::solve(&cost, mu.len(), nu.len(), mu.weights(), nu.weights()).unwrap().cost;
        prop_assert!((fast - lp).abs() <= 1e-10, "{} vs {}", fast, lp);
    }

    #[test]
    fn monotone_in_p(mu in measure(2, 7), nu in measure(2, 7), p in 1.0f64..2.5, dq in 0.0f64..1.5) {
        prop_assert!(w(&mu, &nu, p) <= w(&mu, &nu, p + dq) + 1e-9);
    }

    #[test]
    fn unequal_uniform_sizes_match_replication(mu in uniform_measure(2, 3), nu in uniform_measure(2, 4)) {
        // Replicating each atom to the common size lcm(n, m) turns the LP into an assignment.
        let (n, m) = (mu.len(), nu.len());
        let l = num_lcm(n, m);
        let rep = |x: &EmpiricalMeasure, k: usize| {
            EmpiricalMeasure::uniform(2, (0..x.len()).flat_map(|i| std::iter::repeat_n(x.atom(i).to_vec(), k).flatten()).collect()).unwrap()
        };
        let direct = transport::wasserstein_cost(&mu, &nu, 2.0, DEFAULT_SUPPORT_CAP).unwrap();
        let replicated = transport::wasserstein_cost(&rep(&mu, l / n), &rep(&nu, l / m), 2.0, DEFAULT_SUPPORT_CAP).unwrap();
        prop_assert!((direct - replicated).abs() <= 1e-10, "{} vs {}", direct, replicated);
    }
}

fn num_lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 { a } else { gcd(b, a % b) }
    }
    a / gcd(a, b) * b
}
