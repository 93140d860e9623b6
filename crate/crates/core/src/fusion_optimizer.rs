//! Fusion of two uploaded estimates into a single function `a·f¹ + b·f²`.
//!
//! The dissimilarity of two functions against a family `𝔟 = {b_k}` is
//! `d(f, g) = Σ_k ⟨f − g, b_k⟩²_H`. The fused estimate minimizes
//! `d(af¹ + bf², f¹) + d(af¹ + bf², f²) + ϱ‖af¹ + bf²‖²_H` over `(a, b)`,
//! a quadratic whose normal equations are `(2G + ϱN) z = G·1` with
//! `G = [[p·p, p·q], [p·q, q·q]]`, `p_k = ⟨f¹, b_k⟩`, `q_k = ⟨f², b_k⟩` and
//! `N` the Gram matrix of `f¹, f²` in `H`.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion_space::{h_inner_product, BasisId, FusionBasis, FusionFunction, SpanReport};
use crate::linalg;

/// Default number of kernel-section anchors.
pub const DEFAULT_ANCHOR_COUNT: usize = 40;

/// Relative eigenvalue cutoff below which the 2×2 system counts as singular.
const SINGULAR_TOL: f64 = 1e-10;

/// How the dissimilarity family was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DissimilaritySource {
    /// Kernel sections `K(·, x̄_j)` at explicit anchors.
    KernelSections {
        anchors: Vec<Vec<f64>>,
    },
    /// Kernel sections at anchors drawn uniformly from a box with a seed.
    SampledSections {
        count: usize,
        range: Vec<(f64, f64)>,
        seed: u64,
    },
    /// The orthonormal basis `ψ_1, …, ψ_r` itself.
    Orthonormal,
    Custom,
}

/// A finite family `𝔟 ⊂ H` defining the dissimilarity measure.
#[derive(Debug, Clone)]
pub struct DissimilarityBasis {
    vectors: Vec<FusionFunction>,
    basis: BasisId,
    source: DissimilaritySource,
    rank: SpanReport,
}

impl DissimilarityBasis {
    pub fn custom(basis: &FusionBasis, vectors: Vec<FusionFunction>) -> Result<Self> {
        Self::assemble(basis, vectors, DissimilaritySource::Custom)
    }

    pub fn kernel_sections(basis: &FusionBasis, anchors: Vec<Vec<f64>>) -> Result<Self> {
        let vectors = anchors.iter().map(|y| basis.section(y)).collect();
        Self::assemble(basis, vectors, DissimilaritySource::KernelSections { anchors })
    }

    /// `count` kernel sections at anchors sampled uniformly from `range`
    /// (one interval per input coordinate) with a ChaCha8 stream seeded by
    /// `seed`.
    pub fn sampled_sections(basis: &FusionBasis, count: usize, range: Vec<(f64, f64)>, seed: u64) -> Result<Self> {
        let anchors = sample_anchors(count, &range, seed)?;
        if range.len() != basis.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "anchor range",
                expected: basis.input_dim(),
                got: range.len(),
            });
        }
        let vectors = anchors.iter().map(|y| basis.section(y)).collect();
        Self::assemble(
            basis,
            vectors,
            DissimilaritySource::SampledSections { count, range, seed },
        )
    }

    pub fn orthonormal(basis: &FusionBasis) -> Result<Self> {
        let r = basis.rank();
        let vectors = (0..r)
            .map(|k| basis.function(DVector::from_fn(r, |i, _| if i == k { 1.0 } else { 0.0 })))
            .collect::<Result<Vec<_>>>()?;
        Self::assemble(basis, vectors, DissimilaritySource::Orthonormal)
    }

    fn assemble(basis: &FusionBasis, vectors: Vec<FusionFunction>, source: DissimilaritySource) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::EmptyInput("dissimilarity family"));
        }
        if vectors.iter().any(|v| v.basis() != basis.id()) {
            return Err(Error::Binding("dissimilarity vector belongs to a different basis"));
        }
        let stacked = DMatrix::from_columns(&vectors.iter().map(|v| v.coeffs().clone()).collect::<Vec<_>>());
        let rank = linalg::matrix_rank(&stacked, 1e-10)?;
        Ok(DissimilarityBasis {
            vectors,
            basis: basis.id(),
            source,
            rank: SpanReport {
                rank: rank.min(basis.rank()),
                dim: basis.rank(),
            },
        })
    }

    pub fn vectors(&self) -> &[FusionFunction] {
        &self.vectors
    }

    pub fn source(&self) -> &DissimilaritySource {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Rank of the family against `dim H`; `𝔟` spans `H` iff they agree.
    pub fn span(&self) -> SpanReport {
        self.rank
    }

    fn check(&self, f: &FusionFunction) -> Result<()> {
        if f.basis() == self.basis {
            Ok(())
        } else {
            Err(Error::Binding(
                "function and dissimilarity family belong to different bases",
            ))
        }
    }

    fn projections(&self, f: &FusionFunction) -> Result<DVector<f64>> {
        self.check(f)?;
        let values = self
            .vectors
            .iter()
            .map(|b| h_inner_product(f, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(values))
    }
}

pub fn sample_anchors(count: usize, range: &[(f64, f64)], seed: u64) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(Error::EmptyInput("anchor count"));
    }
    if range.is_empty() {
        return Err(Error::EmptyInput("anchor range"));
    }
    for &(lo, hi) in range {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::InvalidParameter(format!("bad anchor range [{lo}, {hi}]")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            range
                .iter()
                .map(|&(lo, hi)| if lo == hi { lo } else { rng.random_range(lo..=hi) })
                .collect()
        })
        .collect())
}

/// `d_𝔟(f, g) = Σ_k ⟨f − g, b_k⟩²_H`.
pub fn dissimilarity(f: &FusionFunction, g: &FusionFunction, family: &DissimilarityBasis) -> Result<f64> {
    let diff = f.combine(1.0, g, -1.0)?;
    Ok(family.projections(&diff)?.norm_squared())
}

/// The fusion objective evaluated from its definition.
pub fn fusion_objective(
    f1: &FusionFunction,
    f2: &FusionFunction,
    family: &DissimilarityBasis,
    ridge: f64,
    a: f64,
    b: f64,
) -> Result<f64> {
    let w = f1.combine(a, f2, b)?;
    Ok(dissimilarity(&w, f1, family)? + dissimilarity(&w, f2, family)? + ridge * h_inner_product(&w, &w)?)
}

/// Output of [`fuse`].
#[derive(Debug, Clone)]
pub struct FusionResult {
    pub a: f64,
    pub b: f64,
    /// `a·f¹ + b·f²`.
    pub fused: FusionFunction,
    pub objective: f64,
    /// The normal equations were singular and the minimum-norm `(a, b)` was
    /// returned.
    pub degenerate: bool,
}

/// Closed-form solution of the fusion problem.
pub fn fuse(f1: &FusionFunction, f2: &FusionFunction, family: &DissimilarityBasis, ridge: f64) -> Result<FusionResult> {
    if !ridge.is_finite() || ridge < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "fusion ridge must be finite and nonnegative, got {ridge}"
        )));
    }
    linalg::check_finite(f1.coeffs().iter().chain(f2.coeffs().iter()), "fusion inputs")?;
    let p = family.projections(f1)?;
    let q = family.projections(f2)?;
    let g = Matrix2::new(p.dot(&p), p.dot(&q), p.dot(&q), q.dot(&q));
    let n12 = h_inner_product(f1, f2)?;
    let gram = Matrix2::new(f1.norm_squared(), n12, n12, f2.norm_squared());
    let system = g * 2.0 + gram * ridge;
    let rhs = g * Vector2::new(1.0, 1.0);

    let eig = system.symmetric_eigen();
    let lambda_max = eig.eigenvalues.amax();
    let mut z = Vector2::zeros();
    let mut rank = 0;
    for k in 0..2 {
        let lambda = eig.eigenvalues[k];
        if lambda > SINGULAR_TOL * lambda_max && lambda > 0.0 {
            let v = eig.eigenvectors.column(k);
            z += v * (v.dot(&rhs) / lambda);
            rank += 1;
        }
    }
    let (a, b) = (z[0], z[1]);
    let fused = f1.combine(a, f2, b)?;
    let objective = fusion_objective(f1, f2, family, ridge, a, b)?;
    Ok(FusionResult {
        a,
        b,
        fused,
        objective,
        degenerate: rank < 2,
    })
}
