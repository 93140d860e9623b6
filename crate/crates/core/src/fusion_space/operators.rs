//! Operators on the fusion space in the `ψ` basis.
//!
//! `L̄ⁱ f(x) = ⟨f, Kⁱ(·, x)⟩_H` has matrix `Bⁱᵀ Bⁱ`, where row `j` of `Bⁱ`
//! holds the `ψ`-coefficients of `φⁱ_j`. Since `Σ_i Bⁱᵀ Bⁱ = T Tᵀ = I`, the
//! two operators partition the identity. Downloading to agent `i` applies
//! `√L̄ⁱ` and re-expresses the result in the agent's own features.

use nalgebra::DMatrix;

use super::{Agent, BasisId, FusionBasis, FusionFunction, DEFAULT_CONVERSION_TOL};
use crate::error::{Error, Result};
use crate::feature_space::AgentFunction;
use crate::linalg;

/// Eigenvalues in `[-NEGATIVE_TOL, 0)` are clipped to zero.
pub const NEGATIVE_TOL: f64 = 1e-9;

/// Eigenvalues at or below `FLUSH_TOL · max(1, λ_max)` are treated as exact
/// zeros before taking square roots; roundoff-level eigenvalues would
/// otherwise turn into `~1e-8` entries of the root.
pub const FLUSH_TOL: f64 = 1e-12;

/// Eigenvalues above this count as the range when building projections.
pub const RANGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    LBar(Agent),
    SqrtL(Agent),
    ProjM(Agent),
}

/// Symmetric `r × r` matrix of an operator on `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    matrix: DMatrix<f64>,
    kind: OperatorKind,
    basis: BasisId,
}

impl OperatorMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn basis(&self) -> BasisId {
        self.basis
    }

    pub fn apply(&self, f: &FusionFunction) -> Result<FusionFunction> {
        if f.basis != self.basis {
            return Err(Error::Binding("operator and function belong to different bases"));
        }
        Ok(FusionFunction {
            coeffs: &self.matrix * &f.coeffs,
            basis: self.basis,
        })
    }
}

/// Symmetric positive semidefinite square root by eigendecomposition.
pub fn sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            what: "square root input columns",
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    linalg::check_finite(m.iter(), "square root input")?;
    let (values, vectors) = linalg::symmetric_eigen(m);
    let lambda_max = values.first().copied().unwrap_or(0.0);
    let flush = FLUSH_TOL * lambda_max.max(1.0);
    let mut roots = Vec::with_capacity(values.len());
    for &lambda in &values {
        if lambda < -NEGATIVE_TOL {
            return Err(Error::NotPositive(lambda));
        }
        roots.push(if lambda <= flush { 0.0 } else { lambda.sqrt() });
    }
    let scaled = DMatrix::from_fn(vectors.nrows(), vectors.ncols(), |i, k| vectors[(i, k)] * roots[k]);
    Ok(linalg::symmetrize(&(scaled * vectors.transpose())))
}

/// `√L` for an operator of kind `L̄ⁱ` (or a projection, whose root is itself).
pub fn sqrt_operator(l: &OperatorMatrix) -> Result<OperatorMatrix> {
    let kind = match l.kind {
        OperatorKind::LBar(a) => OperatorKind::SqrtL(a),
        OperatorKind::ProjM(a) => OperatorKind::ProjM(a),
        OperatorKind::SqrtL(_) => {
            return Err(Error::InvalidParameter("operator is already a square root".into()));
        }
    };
    Ok(OperatorMatrix {
        matrix: sqrt_psd(&l.matrix)?,
        kind,
        basis: l.basis,
    })
}

impl FusionBasis {
    /// Matrix of `L̄ⁱ` in the `ψ` basis.
    pub fn operator_matrix(&self, agent: Agent) -> OperatorMatrix {
        let b = self.agent_block(agent);
        OperatorMatrix {
            matrix: linalg::symmetrize(&(b.transpose() * b)),
            kind: OperatorKind::LBar(agent),
            basis: self.id,
        }
    }

    /// `√L̄ⁱ`.
    pub fn sqrt_operator_matrix(&self, agent: Agent) -> Result<OperatorMatrix> {
        sqrt_operator(&self.operator_matrix(agent))
    }

    /// Orthogonal projection onto `𝓜ⁱ = 𝒩(√L̄ⁱ)⊥`, the span of eigenvectors
    /// of `L̄ⁱ` with eigenvalue above [`RANGE_TOL`].
    pub fn projection(&self, agent: Agent) -> OperatorMatrix {
        let (values, vectors) = linalg::symmetric_eigen(self.operator_matrix(agent).matrix());
        let r = self.rank();
        let mut p = DMatrix::zeros(r, r);
        for (k, &lambda) in values.iter().enumerate() {
            if lambda > RANGE_TOL {
                let v = vectors.column(k);
                p += v * v.transpose();
            }
        }
        OperatorMatrix {
            matrix: linalg::symmetrize(&p),
            kind: OperatorKind::ProjM(agent),
            basis: self.id,
        }
    }

    /// `√L̄ⁱ f` in the `ψ` basis, as sent from the fusion center. The
    /// projection onto `𝓜ⁱ` is absorbed because `√L̄ⁱ` vanishes on its
    /// null space.
    pub fn download_coeffs(&self, f: &FusionFunction, agent: Agent) -> Result<FusionFunction> {
        self.check(f)?;
        self.sqrt_operator_matrix(agent)?.apply(f)
    }

    /// Download: `√L̄ⁱ ∘ Π_{𝓜ⁱ}` followed by conversion to agent coordinates.
    pub fn download(&self, f: &FusionFunction, agent: Agent) -> Result<AgentFunction> {
        let g = self.download_coeffs(f, agent)?;
        self.convert_to_agent(&g, agent, DEFAULT_CONVERSION_TOL)
            .map_err(|e| match e {
                Error::NotInAgentSpace { .. } => Error::Numerical("downloaded function left the agent space"),
                other => other,
            })
    }
}
