//! Distributed function estimation by two agents with different feature
//! spaces.
//!
//! Each agent fits a regularized least-squares estimate in the RKHS spanned
//! by its own features ([`feature_space`], [`regression`]). Estimates are
//! uploaded into the fusion space `H` whose kernel is the sum of the agents'
//! kernels ([`fusion_space`]), combined there by a two-coefficient fusion
//! problem ([`fusion_optimizer`]) and downloaded back through the square
//! roots of the operators `L̄ⁱ`. [`pipeline`] runs the whole exchange from a
//! JSON config and writes plot-ready artifacts. Only coefficient vectors
//! cross between agents and the fusion center.
//!
//! ```
//! use rkhs_fusion::prelude::*;
//!
//! let domain = DomainBox::interval(-10.0, 10.0)?;
//! let fs1 = FeatureSet::new((0..3).map(Feature::monomial).collect(), domain.clone())?;
//! let fs2 = FeatureSet::new(vec![Feature::monomial(2), Feature::monomial(3)], domain)?;
//! let basis = FusionBasis::new(&fs1, &fs2)?;
//! assert_eq!(basis.rank(), 4);
//! // K(x, y) = 1 + xy + 2x²y² + x³y³
//! assert!((basis.kernel(&[1.0], &[1.0]) - 5.0).abs() < 1e-12);
//! # Ok::<(), rkhs_fusion::Error>(())
//! ```

pub mod error;
pub mod feature_space;
pub mod fusion_optimizer;
pub mod fusion_space;
mod linalg;
pub mod pipeline;
pub mod regression;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::feature_space::{
        eval_feature, eval_function, gram_matrix, inner_product, kernel_eval, verify_independence, AgentFunction,
        Dataset, DomainBox, Feature, FeaturePrimitive, FeatureSet, Independence,
    };
    pub use crate::fusion_optimizer::{dissimilarity, fuse, DissimilarityBasis, FusionResult};
    pub use crate::fusion_space::{
        build_fusion_basis, fusion_kernel, h_inner_product, sqrt_operator, sqrt_psd, Agent, FusionBasis,
        FusionFunction, OperatorKind, OperatorMatrix,
    };
    pub use crate::regression::{
        solve_centralized, solve_dual, solve_primal_oracle, HypothesisSpace, RegressionProblem, RegressionSolution,
    };
}
