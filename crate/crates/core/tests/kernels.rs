mod common;

use mfs_core::kernels::registry::{self, ModelParams};
use mfs_core::kernels::{CuckerSmale, CuckerSmaleParams, KernelSet, S1Convention, Truncation};
use mfs_core::measure::EmpiricalMeasure;
use proptest::prelude::*;

fn cs(truncated: bool, convention: S1Convention) -> KernelSet {
    let mut p = CuckerSmaleParams::flocking(1.0, 0.6);
    p.half_dim = 2;
    p.phi_lambda = 0.3;
    p.phi_gamma = 0.8;
    if truncated {
        p.truncation = Some(Truncation { radius: 0.5, margin: 0.7 });
    }
    CuckerSmale::new(p).unwrap().into_set().with_s1_convention(convention)
}

#[test]
fn analytic_jacobians_match_finite_differences() {
    for (i, k) in common::kernel_zoo().iter().enumerate() {
        let err = common::jacobian_error(k, 100, 40 + i as u64);
        assert!(err <= 1e-4, "{}: relative error {err:e}", k.name());
    }
}

#[test]
fn catalog_is_sorted_and_buildable() {
    let names: Vec<_> = registry::catalog().iter().map(|m| m.name).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    assert_eq!(common::kernel_zoo().len(), names.len());
    let err = registry::build("nope", &ModelParams::default()).unwrap_err().to_string();
    for n in names {
        assert!(err.contains(n), "{err}");
    }
}

#[test]
fn s2_oracle_for_geometric_noise() {
    // σ = r·diag(x): S₂_i = ½ Σ_{k,l} ∂_k σ_{il} σ_{kl} = ½ r² x_i.
    let k = registry::build(
        "geometric-noise",
        &ModelParams {
            dim: Some(3),
            rate: Some(0.8),
            ..Default::default()
        },
    )
    .unwrap();
    let x = [0.5, -1.25, 2.0];
    let s2 = k.eval_s2(&x).unwrap();
    for (s, xi) in s2.iter().zip(x) {
        assert!((s - 0.5 * 0.64 * xi).abs() < 1e-15);
    }
}

#[test]
fn s1_oracle_for_linear_common_noise() {
    // c(x, y) = r·x: ∇ₓc = r·I, ∇_y c = 0, so s₁ = ½ r² x under both conventions.
    let p = ModelParams {
        dim: Some(2),
        rate: Some(0.6),
        ..Default::default()
    };
    for conv in [S1Convention::HalfBoth, S1Convention::PaperLiteral] {
        let k = registry::build("linear-common", &ModelParams { s1_convention: conv, ..p.clone() }).unwrap();
        let s = k.eval_s1(&[1.0, -2.0], &[3.0, 0.5], &[-1.0, 4.0]).unwrap();
        assert!((s[0] - 0.18).abs() < 1e-15 && (s[1] + 0.36).abs() < 1e-15, "{s:?}");
    }
}

#[test]
fn conventions_coincide_on_constant_phi_cucker_smale() {
    // With φ constant and no truncation, ∇_y c(x,y) c(y,z) integrates to zero
    // against the empirical measure, so the two conventions give the same S.
    let mut p = CuckerSmaleParams::flocking(1.0, 0.5);
    p.phi_lambda = 0.4;
    let half = CuckerSmale::new(p.clone()).unwrap().into_set();
    let lit = half.clone().with_s1_convention(S1Convention::PaperLiteral);
    let mu = EmpiricalMeasure::from_points(&[vec![0.0, 1.0], vec![0.3, -0.5], vec![1.0, 0.2]]).unwrap();
    for x in [[0.1, 0.4], [2.0, -1.0]] {
        let a = half.mean_field_s(&mu, &x).unwrap();
        let b = lit.mean_field_s(&mu, &x).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-14, "{a:?} {b:?}");
        }
    }
    // With a truncation they differ.
    let t_half = cs(true, S1Convention::HalfBoth);
    let t_lit = cs(true, S1Convention::PaperLiteral);
    let mu = EmpiricalMeasure::from_points(&[
        vec![0.0, 0.0, 1.0, 0.0],
        vec![0.3, 0.1, -0.5, 0.2],
        vec![1.0, -0.4, 0.2, 0.9],
    ])
    .unwrap();
    let x = [0.2, 0.0, 0.4, -0.3];
    let a = t_half.mean_field_s(&mu, &x).unwrap();
    let b = t_lit.mean_field_s(&mu, &x).unwrap();
    assert!(a.iter().zip(&b).any(|(u, v)| (u - v).abs() > 1e-6), "{a:?} {b:?}");
}

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, d)
}

fn cloud(d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(point(d), 1..7)
}

/// Grid values `m / 8` so every product and sum below is exact.
fn dyadic_cloud(d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec((-16i32..16).prop_map(|m| m as f64 / 8.0), d), 1..5)
}

fn duplicated(mu: &EmpiricalMeasure) -> EmpiricalMeasure {
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for (a, w) in mu.iter() {
        for _ in 0..2 {
            atoms.extend_from_slice(a);
            weights.push(w / 2.0);
        }
    }
    EmpiricalMeasure::new(mu.dim(), atoms, weights).unwrap()
}

proptest! {
    #![proptest_config(common::proptest_config(128))]

    #[test]
    fn cucker_smale_drift_is_antisymmetric(x in point(4), y in point(4)) {
        for k in [cs(false, S1Convention::HalfBoth), cs(true, S1Convention::HalfBoth)] {
            // Position rows of b carry the particle's own velocity; only the
            // velocity rows are interactions.
            let bxy = k.b(&x, &y);
            let byx = k.b(&y, &x);
            for i in 2..4 {
                prop_assert_eq!(bxy[i], -byx[i]);
            }
            let cxy = k.c(&x, &y);
            let cyx = k.c(&y, &x);
            for i in 0..4 {
                prop_assert_eq!(cxy[i], -cyx[i]);
            }
        }
    }

    #[test]
    fn cucker_smale_interaction_sums_cancel(pts in cloud(4)) {
        let k = cs(false, S1Convention::HalfBoth);
        // Velocity rows of Σ_{i,j} b(x_i, x_j), summed so each (i,j) meets its (j,i).
        let mut total = [0.0f64; 2];
        for i in 0..pts.len() {
            for j in 0..i {
                let a = k.b(&pts[i], &pts[j]);
                let b = k.b(&pts[j], &pts[i]);
                for c in 0..2 {
                    total[c] += a[2 + c] + b[2 + c];
                }
            }
            let own = k.b(&pts[i], &pts[i]);
            for c in 0..2 {
                total[c] += own[2 + c];
            }
        }
        prop_assert_eq!(total, [0.0; 2]);
    }

    #[test]
    fn duplicated_atoms_leave_fields_exact_on_dyadic_data(pts in dyadic_cloud(2), x in dyadic_cloud(2)) {
        let mu = EmpiricalMeasure::from_points(&pts).unwrap();
        let dup = duplicated(&mu);
        let kernels = [
            registry::build("linear-common", &ModelParams { dim: Some(2), rate: Some(0.5), ..Default::default() }).unwrap(),
            registry::build("constant-drift", &ModelParams { drift: Some(vec![0.25, -1.0]), common: Some(vec![0.5, 0.125]), ..Default::default() }).unwrap(),
        ];
        // Uniform weights 1/n are dyadic only for n a power of two.
        prop_assume!(pts.len().is_power_of_two());
        for k in &kernels {
            let x = &x[0];
            prop_assert_eq!(k.mean_field_b(&mu, x).unwrap(), k.mean_field_b(&dup, x).unwrap());
            prop_assert_eq!(k.mean_field_c(&mu, x).unwrap(), k.mean_field_c(&dup, x).unwrap());
            prop_assert_eq!(k.mean_field_s(&mu, x).unwrap(), k.mean_field_s(&dup, x).unwrap());
        }
    }

    #[test]
    fn duplicated_atoms_leave_fields_unchanged(pts in cloud(4), x in point(4)) {
        let mu = EmpiricalMeasure::from_points(&pts).unwrap();
        let dup = duplicated(&mu);
        for k in [cs(true, S1Convention::HalfBoth), cs(false, S1Convention::PaperLiteral)] {
            let pairs = [
                (k.mean_field_b(&mu, &x).unwrap(), k.mean_field_b(&dup, &x).unwrap()),
                (k.mean_field_c(&mu, &x).unwrap(), k.mean_field_c(&dup, &x).unwrap()),
                (k.mean_field_s(&mu, &x).unwrap(), k.mean_field_s(&dup, &x).unwrap()),
            ];
            for (a, b) in pairs {
                for (u, v) in a.iter().zip(&b) {
                    prop_assert!((u - v).abs() <= 1e-13 * (1.0 + u.abs()), "{} vs {}", u, v);
                }
            }
        }
    }

    #[test]
    fn factorised_cache_matches_double_sum(pts in cloud(4), x in point(4)) {
        let mu = EmpiricalMeasure::from_points(&pts).unwrap();
        for k in [cs(true, S1Convention::HalfBoth), cs(true, S1Convention::PaperLiteral)] {
            let cache = k.field_cache(&mu).unwrap();
            let mut drift = vec![0.0; 4];
            let mut common = vec![0.0; 4];
            cache.ito_fields(&x, &mut drift, &mut common);
            let b = k.mean_field_b(&mu, &x).unwrap();
            let s = k.mean_field_s(&mu, &x).unwrap();
            let c = k.mean_field_c(&mu, &x).unwrap();
            for i in 0..4 {
                prop_assert!((drift[i] - b[i] - s[i]).abs() <= 1e-12);
                prop_assert!((common[i] - c[i]).abs() <= 1e-12);
            }
        }
    }
}
