use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{linspace, ExperimentConfig};
use crate::error::{Error, Result};
use crate::feature_space::Dataset;
use crate::fusion_space::Agent;

/// Splits `total` samples across intervals proportionally to their length
/// by largest remainder; ties go to the earlier interval. Degenerate
/// (zero-length) unions are split evenly.
pub fn allocate(regions: &[(f64, f64)], total: usize) -> Vec<usize> {
    let lengths: Vec<f64> = regions.iter().map(|&(lo, hi)| hi - lo).collect();
    let sum: f64 = lengths.iter().sum();
    let shares: Vec<f64> = if sum > 0.0 {
        lengths.iter().map(|l| total as f64 * l / sum).collect()
    } else {
        vec![total as f64 / regions.len() as f64; regions.len()]
    };
    let mut counts: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let mut order: Vec<usize> = (0..regions.len()).collect();
    order.sort_by(|&a, &b| {
        (shares[b] - shares[b].floor())
            .total_cmp(&(shares[a] - shares[a].floor()))
            .then(a.cmp(&b))
    });
    let assigned: usize = counts.iter().sum();
    for &i in order.iter().cycle().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Evenly spaced inputs over the agent's regions with outputs from the true
/// function plus optional seeded Gaussian noise.
pub fn generate_data(cfg: &ExperimentConfig, agent: Agent) -> Result<Dataset> {
    let a = &cfg.agents[agent.index()];
    if a.input_regions.is_empty() {
        return Err(Error::EmptyInput("agent input regions"));
    }
    let truth = cfg.true_function.resolve();
    let xs: Vec<f64> = a
        .input_regions
        .iter()
        .zip(allocate(&a.input_regions, a.sample_count))
        .flat_map(|(&(lo, hi), n)| linspace(lo, hi, n))
        .collect();
    let mut ys: Vec<f64> = xs.iter().map(|&x| truth.eval(&[x])).collect();
    if a.noise_std > 0.0 {
        let normal = Normal::new(0.0, a.noise_std).map_err(|e| Error::Config(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(a.noise_seed);
        for y in &mut ys {
            *y += normal.sample(&mut rng);
        }
    }
    Dataset::from_scalar(&xs, ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn allocation_is_proportional() {
        assert_eq!(allocate(&[(-10.0, -5.0), (5.0, 10.0)], 20), vec![10, 10]);
        assert_eq!(allocate(&[(0.0, 1.0), (0.0, 2.0)], 4), vec![1, 3]);
        assert_eq!(allocate(&[(0.0, 1.0), (2.0, 3.0), (4.0, 5.0)], 4), vec![2, 1, 1]);
        assert_eq!(allocate(&[(1.0, 1.0), (2.0, 2.0)], 3), vec![2, 1]);
        assert_eq!(allocate(&[(0.0, 1.0)], 7), vec![7]);
    }
}
