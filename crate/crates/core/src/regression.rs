//! Regularized least squares in a finite-dimensional RKHS.
//!
//! The problem is `min_f Σ_l (y_l − f(x_l))² + ϱ‖f‖²`. [`solve_dual`] follows
//! the representer route, `α = (KᵀK + ϱK)⁺ Kᵀy` and `f = Σ_l α_l K(·, x_l)`;
//! [`solve_primal_oracle`] solves the ridge normal equations in feature
//! coordinates and serves as an independent check.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::feature_space::{AgentFunction, Dataset, FeatureSet};
use crate::fusion_space::{FusionBasis, FusionFunction};
use crate::linalg;

/// Default regularization weight.
pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Relative singular-value cutoff for the evaluation matrix in the dual solve.
const DUAL_RANK_TOL: f64 = 1e-12;

/// A finite-dimensional RKHS with an orthonormal basis `e_1, …, e_n`, so that
/// `K(x, y) = Σ_j e_j(x) e_j(y)` and `‖f‖²` is the squared coefficient norm.
pub trait HypothesisSpace {
    type Function: Clone;

    fn dim(&self) -> usize;

    fn input_dim(&self) -> usize;

    /// `E[k][j] = e_j(points[k])`.
    fn evaluation_matrix(&self, points: &[Vec<f64>]) -> DMatrix<f64>;

    fn wrap(&self, coeffs: DVector<f64>) -> Self::Function;

    fn coefficients<'a>(&self, f: &'a Self::Function) -> Result<&'a DVector<f64>>;

    /// Gram matrix of the kernel over `points`.
    fn kernel_matrix(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        let e = self.evaluation_matrix(points);
        &e * e.transpose()
    }
}

impl HypothesisSpace for FeatureSet {
    type Function = AgentFunction;

    fn dim(&self) -> usize {
        self.len()
    }

    fn input_dim(&self) -> usize {
        FeatureSet::input_dim(self)
    }

    fn evaluation_matrix(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        FeatureSet::evaluation_matrix(self, points)
    }

    fn wrap(&self, coeffs: DVector<f64>) -> AgentFunction {
        self.function(coeffs)
            .expect("coefficient length matches space dimension")
    }

    fn coefficients<'a>(&self, f: &'a AgentFunction) -> Result<&'a DVector<f64>> {
        self.check(f)?;
        Ok(f.coeffs())
    }
}

impl HypothesisSpace for FusionBasis {
    type Function = FusionFunction;

    fn dim(&self) -> usize {
        self.rank()
    }

    fn input_dim(&self) -> usize {
        FusionBasis::input_dim(self)
    }

    fn evaluation_matrix(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        FusionBasis::evaluation_matrix(self, points)
    }

    fn wrap(&self, coeffs: DVector<f64>) -> FusionFunction {
        self.function(coeffs).expect("coefficient length matches basis rank")
    }

    fn coefficients<'a>(&self, f: &'a FusionFunction) -> Result<&'a DVector<f64>> {
        self.check(f)?;
        Ok(f.coeffs())
    }
}

/// Data, ridge weight and hypothesis space of one regression.
#[derive(Debug, Clone, Copy)]
pub struct RegressionProblem<'a, S> {
    pub data: &'a Dataset,
    pub ridge: f64,
    pub space: &'a S,
}

impl<'a, S: HypothesisSpace> RegressionProblem<'a, S> {
    pub fn new(data: &'a Dataset, ridge: f64, space: &'a S) -> Result<Self> {
        let p = RegressionProblem { data, ridge, space };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !self.ridge.is_finite() {
            return Err(Error::NonFinite("ridge"));
        }
        if self.ridge <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "ridge must be positive, got {}",
                self.ridge
            )));
        }
        if self.data.input_dim() != self.space.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "dataset input dimension",
                expected: self.space.input_dim(),
                got: self.data.input_dim(),
            });
        }
        Ok(())
    }

    fn targets(&self) -> DVector<f64> {
        DVector::from_column_slice(self.data.outputs())
    }

    /// `Σ (y_l − f(x_l))² + ϱ‖w‖²` for basis coefficients `w`.
    pub fn objective(&self, coeffs: &DVector<f64>) -> f64 {
        let e = self.space.evaluation_matrix(self.data.inputs());
        let residual = self.targets() - e * coeffs;
        residual.norm_squared() + self.ridge * coeffs.norm_squared()
    }
}

/// A fitted estimate.
#[derive(Debug, Clone)]
pub struct RegressionSolution<F> {
    /// Representer coefficients, one per data point.
    pub dual_coeffs: DVector<f64>,
    pub function: F,
    pub objective_value: f64,
}

/// Representer-theorem solve.
///
/// Returns the minimum-norm `α` solving `(KᵀK + ϱK)α = Kᵀy`. The Gram matrix
/// `K = EEᵀ` is not formed: its eigenpairs are read off the thin SVD
/// `E = U S Vᵀ`, giving `α = U diag(1/(s² + ϱ)) Uᵀ y`, which lies in the
/// range of `K`. The estimate is materialized as `w = Eᵀα`.
pub fn solve_dual<S: HypothesisSpace>(p: &RegressionProblem<'_, S>) -> Result<RegressionSolution<S::Function>> {
    p.validate()?;
    let e = p.space.evaluation_matrix(p.data.inputs());
    linalg::check_finite(e.iter(), "basis evaluation at data points")?;
    let y = p.targets();
    let svd = linalg::sorted_svd(&e)?;
    let s_max = svd.singular_values.first().copied().unwrap_or(0.0);
    let mut alpha = DVector::zeros(y.len());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > DUAL_RANK_TOL * s_max && s > 0.0 {
            let u = svd.u.column(k);
            alpha.axpy(u.dot(&y) / (s * s + p.ridge), &u, 1.0);
        }
    }
    let coeffs = e.transpose() * &alpha;
    let objective_value = p.objective(&coeffs);
    Ok(RegressionSolution {
        dual_coeffs: alpha,
        function: p.space.wrap(coeffs),
        objective_value,
    })
}

/// Primal oracle: Cholesky solve of `(EᵀE + ϱI) w = Eᵀy`.
///
/// Dual coefficients are recovered from stationarity, `α = (y − Ew)/ϱ`.
pub fn solve_primal_oracle<S: HypothesisSpace>(
    p: &RegressionProblem<'_, S>,
) -> Result<RegressionSolution<S::Function>> {
    p.validate()?;
    let e = p.space.evaluation_matrix(p.data.inputs());
    linalg::check_finite(e.iter(), "basis evaluation at data points")?;
    let y = p.targets();
    let n = e.ncols();
    let normal = e.transpose() * &e + DMatrix::identity(n, n) * p.ridge;
    let chol = normal
        .cholesky()
        .ok_or(Error::Numerical("ridge normal equations are not positive definite"))?;
    let coeffs = chol.solve(&(e.transpose() * &y));
    let alpha = (&y - &e * &coeffs) / p.ridge;
    let objective_value = p.objective(&coeffs);
    Ok(RegressionSolution {
        dual_coeffs: alpha,
        function: p.space.wrap(coeffs),
        objective_value,
    })
}

/// Regression in the fusion space on the pooled data of both agents.
pub fn solve_centralized(
    d1: &Dataset,
    d2: &Dataset,
    basis: &FusionBasis,
    ridge: f64,
) -> Result<RegressionSolution<FusionFunction>> {
    let pooled = d1.concat(d2)?;
    solve_dual(&RegressionProblem::new(&pooled, ridge, basis)?)
}

/// Materializes `Σ_l α_l K(·, x_l)` as basis coefficients `Eᵀα`.
pub fn representer_coefficients<S: HypothesisSpace>(
    space: &S,
    points: &[Vec<f64>],
    alpha: &DVector<f64>,
) -> DVector<f64> {
    space.evaluation_matrix(points).transpose() * alpha
}
