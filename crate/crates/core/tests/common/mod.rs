//! Random instances and independent oracles shared by the integration and
//! acceptance tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rkhs_fusion::prelude::*;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mutually independent features that stay well conditioned on [-2, 2].
pub fn feature_pool() -> Vec<Feature> {
    vec![
        Feature::monomial(0),
        Feature::monomial(1),
        Feature::monomial(2),
        Feature::monomial(3),
        Feature::monomial(4),
        FeaturePrimitive::Exp(0.5).into(),
        FeaturePrimitive::Exp(-0.3).into(),
        FeaturePrimitive::Sin(1.0).into(),
        FeaturePrimitive::Cos(1.0).into(),
        FeaturePrimitive::Sin(2.0).into(),
    ]
}

pub fn test_domain() -> DomainBox {
    DomainBox::interval(-2.0, 2.0).unwrap()
}

/// `lo..=hi` distinct features from the pool, in random order.
pub fn random_feature_set(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> FeatureSet {
    let pool = feature_pool();
    let n = rng.random_range(lo..=hi);
    let features = sample(rng, pool.len(), n)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect();
    FeatureSet::new(features, test_domain()).unwrap()
}

/// Two agents drawing from the same pool, so shared features (and hence a
/// nontrivial null space) occur often.
pub fn random_basis(rng: &mut ChaCha8Rng) -> FusionBasis {
    let fs1 = random_feature_set(rng, 1, 4);
    let fs2 = random_feature_set(rng, 1, 4);
    FusionBasis::new(&fs1, &fs2).unwrap()
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0))
}

pub fn random_agent_function(rng: &mut ChaCha8Rng, fs: &FeatureSet) -> AgentFunction {
    fs.function(random_vector(rng, fs.len())).unwrap()
}

pub fn random_point(rng: &mut ChaCha8Rng, domain: &DomainBox) -> Vec<f64> {
    domain
        .bounds()
        .iter()
        .map(|&(lo, hi)| rng.random_range(lo..=hi))
        .collect()
}

pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|k| vec![lo + (hi - lo) * k as f64 / (n - 1) as f64])
        .collect()
}

/// A fusion function given by raw coefficients over both agents' features.
pub fn fusion_from_raw(basis: &FusionBasis, raw: &DVector<f64>) -> FusionFunction {
    let n1 = basis.feature_set(Agent::One).len();
    let f1 = basis
        .feature_set(Agent::One)
        .function(raw.rows(0, n1).into_owned())
        .unwrap();
    let f2 = basis
        .feature_set(Agent::Two)
        .function(raw.rows(n1, raw.len() - n1).into_owned())
        .unwrap();
    basis
        .upload(&f1)
        .unwrap()
        .combine(1.0, &basis.upload(&f2).unwrap(), 1.0)
        .unwrap()
}

/// Minimum of `‖α¹‖² + ‖α²‖²` over all decompositions of the function with
/// raw coefficients `raw`.
///
/// Decompositions are `raw + N t` with `N` a basis of the null space of the
/// raw features, found from a plain SVD of their values on a dense grid.
/// The minimum is a small least-squares problem in `t`.
pub fn minimal_norm_oracle(basis: &FusionBasis, raw: &DVector<f64>) -> f64 {
    let (lo, hi) = basis.domain().bounds()[0];
    let points = grid(lo, hi, 400);
    let features = basis.raw_features();
    let e = DMatrix::from_fn(points.len(), features.len(), |k, j| features[j].eval(&points[k]));
    let svd = e.svd(false, true);
    let v_t = svd.v_t.unwrap();
    let s_max = svd.singular_values.max();
    let null: Vec<DVector<f64>> = (0..features.len())
        .filter(|&k| k >= svd.singular_values.len() || svd.singular_values[k] <= 1e-9 * s_max)
        .map(|k| v_t.row(k).transpose())
        .collect();
    if null.is_empty() {
        return raw.norm_squared();
    }
    let n = DMatrix::from_columns(&null);
    let t = n.clone().svd(true, true).solve(&(-raw), 1e-14).unwrap();
    (raw + n * t).norm_squared()
}

/// The fusion objective computed directly from `ψ`-coefficients.
pub fn objective_from_coeffs(
    c1: &DVector<f64>,
    c2: &DVector<f64>,
    family: &[DVector<f64>],
    ridge: f64,
    a: f64,
    b: f64,
) -> f64 {
    let w = c1 * a + c2 * b;
    let d = |g: &DVector<f64>| {
        let diff = &w - g;
        family.iter().map(|v| diff.dot(v).powi(2)).sum::<f64>()
    };
    d(c1) + d(c2) + ridge * w.norm_squared()
}

/// `J(a, b) - J(a0, b0)` for the objective of [`objective_from_coeffs`],
/// written as a sum of differences of squares `(u - u0)(u + u0)` so that the
/// large constant part of `J` cancels exactly. Near the optimum the
/// variation of `J` is often far below the rounding error of `J` itself
/// (one input tiny next to the other), so comparing raw objective values
/// cannot locate the minimizer to 1e-6.
pub fn objective_delta(
    c1: &DVector<f64>,
    c2: &DVector<f64>,
    family: &[DVector<f64>],
    ridge: f64,
    (a0, b0): (f64, f64),
    (a, b): (f64, f64),
) -> f64 {
    let dw = c1 * (a - a0) + c2 * (b - b0);
    let sum = c1 * (a + a0) + c2 * (b + b0);
    let d = |g: &DVector<f64>| {
        let twice = &sum - g * 2.0;
        family.iter().map(|v| dw.dot(v) * twice.dot(v)).sum::<f64>()
    };
    d(c1) + d(c2) + ridge * dw.dot(&sum)
}

/// Grid search on `[lo, hi]^2` with spacing `step`, followed by repeated
/// zooms: a 21 × 21 window around the incumbent, recentred while the best
/// point sits on its edge, with the spacing divided by ten each round.
/// `delta(from, to)` is the objective increase from `from` to `to`.
pub fn grid_refine_2d(delta: impl Fn((f64, f64), (f64, f64)) -> f64, lo: f64, hi: f64, step: f64) -> (f64, f64) {
    let n = ((hi - lo) / step).round() as usize;
    let mut best = (lo, lo);
    for i in 0..=n {
        for j in 0..=n {
            let p = (lo + i as f64 * step, lo + j as f64 * step);
            if delta(best, p) < 0.0 {
                best = p;
            }
        }
    }
    let mut h = step;
    while h > 1e-10 {
        loop {
            let centre = best;
            let mut edge = false;
            for i in -10i32..=10 {
                for j in -10i32..=10 {
                    let p = (centre.0 + i as f64 * h, centre.1 + j as f64 * h);
                    if delta(best, p) < 0.0 {
                        best = p;
                        edge = i.abs() == 10 || j.abs() == 10;
                    }
                }
            }
            if !edge {
                break;
            }
        }
        h /= 10.0;
    }
    best
}

/// One-dimensional version of [`grid_refine_2d`].
pub fn grid_refine_1d(delta: impl Fn(f64, f64) -> f64, lo: f64, hi: f64, step: f64) -> f64 {
    let n = ((hi - lo) / step).round() as usize;
    let mut best = lo;
    for i in 0..=n {
        let s = lo + i as f64 * step;
        if delta(best, s) < 0.0 {
            best = s;
        }
    }
    let mut h = step;
    while h > 1e-12 {
        loop {
            let c = best;
            let mut edge = false;
            for i in -10i32..=10 {
                let s = c + i as f64 * h;
                if delta(best, s) < 0.0 {
                    best = s;
                    edge = i.abs() == 10;
                }
            }
            if !edge {
                break;
            }
        }
        h /= 10.0;
    }
    best
}

/// Reference fusion weights by grid+refine in `(a, b)`.
///
/// When `f² = λ f¹` the objective depends on `s = a + λ b` only; the oracle
/// then searches `s` and returns the minimum-norm point `s (1, λ) / (1 + λ²)`
/// on that line.
pub fn fusion_oracle(f1: &FusionFunction, f2: &FusionFunction, family: &DissimilarityBasis, ridge: f64) -> (f64, f64) {
    let vs: Vec<DVector<f64>> = family.vectors().iter().map(|v| v.coeffs().clone()).collect();
    let (c1, c2) = (f1.coeffs(), f2.coeffs());
    let lambda = c1.dot(c2) / c1.norm_squared();
    if (c2 - c1 * lambda).norm() <= 1e-12 * c2.norm() {
        let s = grid_refine_1d(
            |s0, s| objective_delta(c1, c2, &vs, ridge, (s0, 0.0), (s, 0.0)),
            -6.0,
            6.0,
            0.05,
        );
        let t = s / (1.0 + lambda * lambda);
        return (t, lambda * t);
    }
    grid_refine_2d(
        |from, to| objective_delta(c1, c2, &vs, ridge, from, to),
        -3.0,
        3.0,
        0.05,
    )
}

/// Dataset with uniformly random inputs over the test domain.
pub fn sampled_dataset(rng: &mut ChaCha8Rng, m: usize, f: impl Fn(f64) -> f64) -> Dataset {
    let mut xs: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..=2.0)).collect();
    xs.sort_by(f64::total_cmp);
    let ys = xs.iter().map(|&x| f(x)).collect();
    Dataset::from_scalar(&xs, ys).unwrap()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.amax()
}

/// Relative agreement `|x - y| ≤ tol · max(|y|, floor)`.
pub fn close(x: f64, y: f64, tol: f64, floor: f64) -> bool {
    (x - y).abs() <= tol * y.abs().max(floor)
}
