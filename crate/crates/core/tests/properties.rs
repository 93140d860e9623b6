mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rkhs_fusion::fusion_optimizer::fusion_objective;
use rkhs_fusion::prelude::*;

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig {
        cases: n,
        ..ProptestConfig::default()
    }
}

// Knowledge spaces.

proptest! {
    #![proptest_config(cases(100))]

    #[test]
    fn kernel_is_exactly_symmetric(seed in any::<u64>(), x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let fs = random_feature_set(&mut rng(seed), 1, 6);
        prop_assert_eq!(kernel_eval(&fs, &[x], &[y]).to_bits(), kernel_eval(&fs, &[y], &[x]).to_bits());
    }

    #[test]
    fn reproducing_property_in_agent_space(seed in any::<u64>(), y in -2.0f64..2.0) {
        let mut r = rng(seed);
        let fs = random_feature_set(&mut r, 1, 6);
        let f = random_agent_function(&mut r, &fs);
        let fy = eval_function(&fs, &f, &[y]).unwrap();
        let via_kernel = inner_product(&f, &fs.section(&[y])).unwrap();
        prop_assert!((via_kernel - fy).abs() <= 1e-10 * (1.0 + fy.abs()));
    }

    #[test]
    fn gram_quadratic_form_is_a_squared_norm(seed in any::<u64>(), m in 1usize..8) {
        let mut r = rng(seed);
        let fs = random_feature_set(&mut r, 1, 6);
        let points: Vec<Vec<f64>> = (0..m).map(|_| random_point(&mut r, fs.domain())).collect();
        let beta = random_vector(&mut r, m);
        let k = gram_matrix(&fs, &points).unwrap();
        let form = (beta.transpose() * &k * &beta)[(0, 0)];
        // Σ_k β_k K(·, x_k) has coefficients Eᵀβ.
        let g = fs.function(fs.evaluation_matrix(&points).transpose() * &beta).unwrap();
        let norm = inner_product(&g, &g).unwrap();
        prop_assert!((form - norm).abs() <= 1e-10 * norm.abs().max(1e-300) + 1e-300, "{form} vs {norm}");
    }
}

proptest! {
    #![proptest_config(cases(200))]

    #[test]
    fn gram_matrix_is_positive_semidefinite(seed in any::<u64>(), m in 1usize..=8) {
        let mut r = rng(seed);
        let fs = random_feature_set(&mut r, 1, 6);
        let points: Vec<Vec<f64>> = (0..m).map(|_| random_point(&mut r, fs.domain())).collect();
        let k = gram_matrix(&fs, &points).unwrap();
        let min = k.clone().symmetric_eigen().eigenvalues.min();
        prop_assert!(min >= -1e-10 * k.trace(), "min eigenvalue {min}");
    }
}

// Regression.

fn random_problem(r: &mut rand_chacha::ChaCha8Rng) -> (FeatureSet, Dataset, f64) {
    let fs = random_feature_set(r, 1, 5);
    let m = r.random_range(1..25);
    let shift = r.random_range(-1.0..1.0);
    let data = sampled_dataset(r, m, |x| (1.3 * x + shift).sin() + 0.2 * x * x);
    let ridge = [1e-6, 1e-2, 1.0][r.random_range(0..3)];
    (fs, data, ridge)
}

proptest! {
    #![proptest_config(cases(50))]

    #[test]
    fn dual_null_space_does_not_change_the_estimate(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (fs, data, ridge) = random_problem(&mut r);
        let sol = solve_dual(&RegressionProblem::new(&data, ridge, &fs).unwrap()).unwrap();
        let e = fs.evaluation_matrix(data.inputs());
        // Null vectors of K = EEᵀ are those of Eᵀ.
        let svd = e.transpose().svd(false, true);
        let v_t = svd.v_t.unwrap();
        let s_max = svd.singular_values.max();
        let rank = svd.singular_values.iter().filter(|&&s| s > 1e-12 * s_max).count();
        let mut alpha = sol.dual_coeffs.clone();
        for k in rank..v_t.nrows() {
            alpha += v_t.row(k).transpose() * r.random_range(-5.0..5.0);
        }
        let w = rkhs_fusion::regression::representer_coefficients(&fs, data.inputs(), &alpha);
        let g = fs.evaluation_matrix(&grid(-2.0, 2.0, 50));
        let (before, after) = (&g * sol.function.coeffs(), &g * w);
        prop_assert!((&after - &before).amax() <= 1e-10 * (1.0 + before.amax()));
    }

    #[test]
    fn primal_gradient_vanishes_at_dual_solution(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (fs, data, ridge) = random_problem(&mut r);
        let p = RegressionProblem::new(&data, ridge, &fs).unwrap();
        let w = solve_dual(&p).unwrap().function.coeffs().clone();
        let grad = DVector::from_fn(w.len(), |j, _| {
            let h = 1e-6 * (1.0 + w[j].abs());
            let mut plus = w.clone();
            let mut minus = w.clone();
            plus[j] += h;
            minus[j] -= h;
            (p.objective(&plus) - p.objective(&minus)) / (2.0 * h)
        });
        let ety = fs.evaluation_matrix(data.inputs()).transpose() * DVector::from_column_slice(data.outputs());
        prop_assert!(grad.norm() <= 1e-5 * (1.0 + ety.norm()), "gradient {}", grad.norm());
    }

    #[test]
    fn dual_solution_beats_perturbations(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (fs, data, ridge) = random_problem(&mut r);
        let p = RegressionProblem::new(&data, ridge, &fs).unwrap();
        let sol = solve_dual(&p).unwrap();
        for _ in 0..20 {
            let delta = random_vector(&mut r, fs.len()) * 10f64.powf(r.random_range(-4.0..0.0));
            let perturbed = sol.function.coeffs() + delta;
            prop_assert!(sol.objective_value <= p.objective(&perturbed) * (1.0 + 1e-12));
        }
    }
}

// Fusion space.

proptest! {
    #![proptest_config(cases(40))]

    #[test]
    fn fusion_kernel_is_the_sum_kernel(seed in any::<u64>()) {
        let mut r = rng(seed);
        let basis = random_basis(&mut r);
        for _ in 0..25 {
            let (x, y) = ([r.random_range(-2.0..2.0)], [r.random_range(-2.0..2.0)]);
            let k1 = kernel_eval(basis.feature_set(Agent::One), &x, &y);
            let k2 = kernel_eval(basis.feature_set(Agent::Two), &x, &y);
            let k = fusion_kernel(&basis, &x, &y);
            prop_assert!((k - k1 - k2).abs() <= 1e-10 * (1.0 + k1.abs() + k2.abs()));
        }
    }

    #[test]
    fn operators_partition_the_identity(seed in any::<u64>()) {
        let basis = random_basis(&mut rng(seed));
        let r = basis.rank();
        let l1 = basis.operator_matrix(Agent::One);
        let l2 = basis.operator_matrix(Agent::Two);
        prop_assert!(max_abs(&(l1.matrix() + l2.matrix() - DMatrix::identity(r, r))) <= 1e-10);
        for l in [&l1, &l2] {
            for lambda in l.matrix().clone().symmetric_eigen().eigenvalues.iter() {
                prop_assert!((-1e-9..=1.0 + 1e-9).contains(lambda), "eigenvalue {lambda}");
            }
            let root = sqrt_operator(l).unwrap();
            prop_assert!(max_abs(&(root.matrix() * root.matrix() - l.matrix())) <= 1e-9);
        }
    }

    #[test]
    fn upload_is_a_contraction(seed in any::<u64>()) {
        let mut r = rng(seed);
        let basis = random_basis(&mut r);
        for agent in Agent::BOTH {
            let f = random_agent_function(&mut r, basis.feature_set(agent));
            let up = basis.upload(&f).unwrap();
            prop_assert!(up.norm() <= f.norm_squared().sqrt() * (1.0 + 1e-10));
        }
    }

    #[test]
    fn reproducing_property_in_fusion_space(seed in any::<u64>()) {
        let mut r = rng(seed);
        let basis = random_basis(&mut r);
        let f = basis.function(random_vector(&mut r, basis.rank())).unwrap();
        let y = random_point(&mut r, basis.domain());
        let fy = basis.eval(&f, &y).unwrap();
        prop_assert!((h_inner_product(&f, &basis.section(&y)).unwrap() - fy).abs() <= 1e-10 * (1.0 + fy.abs()));
    }

    #[test]
    fn split_components_is_the_cheapest_decomposition(seed in any::<u64>()) {
        let mut r = rng(seed);
        let basis = random_basis(&mut r);
        let raw = random_vector(&mut r, basis.raw_dim());
        let f = fusion_from_raw(&basis, &raw);
        let (g1, g2) = basis.split_components(&f).unwrap();
        let rebuilt = basis.upload(&g1).unwrap().combine(1.0, &basis.upload(&g2).unwrap(), 1.0).unwrap();
        prop_assert!((rebuilt.coeffs() - f.coeffs()).amax() <= 1e-10 * (1.0 + f.coeffs().amax()));
        let split = g1.norm_squared() + g2.norm_squared();
        prop_assert!((split - f.norm_squared()).abs() <= 1e-10 * (1.0 + split));
        let null = basis.null_space();
        for _ in 0..20 {
            let alt = &raw + null * random_vector(&mut r, null.ncols()) * 3.0;
            prop_assert!(split <= alt.norm_squared() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn download_lands_in_agent_space_isometrically(seed in any::<u64>()) {
        let mut r = rng(seed);
        let basis = random_basis(&mut r);
        let f = basis.function(random_vector(&mut r, basis.rank())).unwrap();
        for agent in Agent::BOTH {
            prop_assert!(basis.download(&f, agent).is_ok());
            let g = basis.projection(agent).apply(&f).unwrap();
            let down = basis.download(&g, agent).unwrap();
            prop_assert!(close(down.norm_squared().sqrt(), g.norm(), 1e-8, 1e-300));
        }
    }
}

proptest! {
    #![proptest_config(cases(100))]

    #[test]
    fn square_root_of_random_psd_matrix(seed in any::<u64>(), n in 1usize..7) {
        let mut r = rng(seed);
        let a = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
        let keep = r.random_range(0..=n);
        let d = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| if i < keep { r.random_range(0.0..4.0) } else { 0.0 }));
        let q = a.qr().q();
        let m = &q * d * q.transpose();
        let root = sqrt_psd(&m).unwrap();
        prop_assert!(max_abs(&(&root * &root - &m)) <= 1e-9);
        prop_assert!(max_abs(&(&root - root.transpose())) == 0.0);
        prop_assert!(root.symmetric_eigen().eigenvalues.min() >= -1e-12);
    }
}

// Fusion.

fn random_fusion_instance(
    r: &mut rand_chacha::ChaCha8Rng,
) -> (FusionBasis, FusionFunction, FusionFunction, DissimilarityBasis, f64) {
    let basis = random_basis(r);
    let f1 = basis
        .upload(&random_agent_function(r, basis.feature_set(Agent::One)))
        .unwrap();
    let f2 = basis
        .upload(&random_agent_function(r, basis.feature_set(Agent::Two)))
        .unwrap();
    let family = DissimilarityBasis::sampled_sections(&basis, 40, vec![(-2.0, 2.0)], r.random()).unwrap();
    let ridge = [0.0, 1e-3, 1.0][r.random_range(0..3)];
    (basis, f1, f2, family, ridge)
}

proptest! {
    #![proptest_config(cases(50))]

    #[test]
    fn fused_objective_beats_corner_weights(seed in any::<u64>()) {
        let (_, f1, f2, family, ridge) = random_fusion_instance(&mut rng(seed));
        let r = fuse(&f1, &f2, &family, ridge).unwrap();
        for (a, b) in [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.0, 0.0)] {
            let corner = fusion_objective(&f1, &f2, &family, ridge, a, b).unwrap();
            prop_assert!(r.objective <= corner * (1.0 + 1e-12) + 1e-300);
        }
    }

    #[test]
    fn fusion_gradient_vanishes(seed in any::<u64>()) {
        let (_, f1, f2, family, ridge) = random_fusion_instance(&mut rng(seed));
        let r = fuse(&f1, &f2, &family, ridge).unwrap();
        let obj = |a, b| fusion_objective(&f1, &f2, &family, ridge, a, b).unwrap();
        let h = 1e-6;
        let ga = (obj(r.a + h, r.b) - obj(r.a - h, r.b)) / (2.0 * h);
        let gb = (obj(r.a, r.b + h) - obj(r.a, r.b - h)) / (2.0 * h);
        prop_assert!(ga.abs().max(gb.abs()) <= 1e-6 * (1.0 + r.objective.abs()), "gradient ({ga}, {gb})");
    }

    #[test]
    fn rescaling_both_inputs_keeps_the_weights(seed in any::<u64>(), c in prop_oneof![-5.0f64..-0.2, 0.2f64..5.0]) {
        let (_, f1, f2, family, ridge) = random_fusion_instance(&mut rng(seed));
        let r = fuse(&f1, &f2, &family, ridge).unwrap();
        prop_assume!(!r.degenerate);
        let scaled = fuse(&f1.scale(c), &f2.scale(c), &family, ridge).unwrap();
        prop_assert!(!scaled.degenerate);
        prop_assert!(close(scaled.a, r.a, 1e-8, 1.0) && close(scaled.b, r.b, 1e-8, 1.0));
        let diff = (scaled.fused.coeffs() - r.fused.coeffs() * c).amax();
        prop_assert!(diff <= 1e-8 * (1.0 + (r.fused.coeffs() * c).amax()), "fused functions differ by {diff}");
    }

    // Each input is also a target of the dissimilarity, so rescaling one of
    // them alone is not a reparametrization: without the norm penalty the
    // weights stay at one half.
    #[test]
    fn rescaling_one_input_is_not_a_reparametrization(seed in any::<u64>(), c in prop_oneof![-5.0f64..-0.2, 0.2f64..5.0]) {
        let (_, f1, f2, family, _) = random_fusion_instance(&mut rng(seed));
        let r = fuse(&f1.scale(c), &f2, &family, 0.0).unwrap();
        prop_assume!(!r.degenerate);
        prop_assert!(close(r.a, 0.5, 1e-8, 1.0) && close(r.b, 0.5, 1e-8, 1.0), "({}, {})", r.a, r.b);
    }
}
