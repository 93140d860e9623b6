//! Regularized least squares in one agent's space: the representer (dual)
//! solve against the ridge normal equations.

use rkhs_fusion::prelude::*;

pub fn main() -> Result<()> {
    let fs = FeatureSet::new(
        (0..3).map(Feature::monomial).collect(),
        DomainBox::interval(-10.0, 10.0)?,
    )?;
    let xs: Vec<f64> = (0..20).map(|k| -5.0 + 10.0 * k as f64 / 19.0).collect();
    // A cubic the agent cannot represent exactly.
    let ys = xs.iter().map(|x| 0.5 - x + 0.3 * x * x - 0.1 * x * x * x).collect();
    let data = Dataset::from_scalar(&xs, ys)?;

    for ridge in [1e-6, 1.0, 1e3] {
        let problem = RegressionProblem::new(&data, ridge, &fs)?;
        let dual = solve_dual(&problem)?;
        let primal = solve_primal_oracle(&problem)?;
        let gap = (dual.function.coeffs() - primal.function.coeffs()).amax();
        println!(
            "ridge {ridge:>7.0e}: coeffs {:.5?} objective {:.6} dual/primal gap {gap:.1e}",
            dual.function.coeffs().as_slice(),
            dual.objective_value
        );
    }
    Ok(())
}
