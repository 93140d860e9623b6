//! The fusion space `H = H¹ + H²` with kernel `K = K¹ + K²`.
//!
//! Both agents' features are concatenated into `D` raw features. Linear
//! dependencies among them form the null space `𝒩 ⊂ R^D` of the map
//! `(α¹, α²) ↦ Σ α¹_j φ¹_j + Σ α²_j φ²_j`. An orthonormal `r × D` matrix `T`
//! spanning `𝒩⊥` defines the basis `ψ_k = Σ_m T[k][m] raw_m`, which is
//! orthonormal for the minimal-decomposition norm
//! `‖f‖²_H = min_{f¹+f²=f} ‖f¹‖² + ‖f²‖²` and reproduces `K`:
//! `Σ_k ψ_k(x) ψ_k(y) = K¹(x, y) + K²(x, y)`.
//!
//! Functions of `H` are stored as `ψ`-coefficient vectors, so the inner
//! product of `H` is the Euclidean dot product.

mod operators;

use std::fmt;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::feature_space::{AgentFunction, DomainBox, Feature, FeatureSet};
use crate::linalg;

pub use operators::{sqrt_operator, sqrt_psd, OperatorKind, OperatorMatrix};

/// Default relative singular-value threshold for null-space detection.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Default residual tolerance when expressing a fusion function in agent
/// coordinates.
pub const DEFAULT_CONVERSION_TOL: f64 = 1e-8;

/// Probe points per raw feature used by [`FusionBasis::new`].
pub const PROBES_PER_RAW_FEATURE: usize = 8;

/// Orthonormality tolerance for transforms loaded from outside.
const TRANSFORM_TOL: f64 = 1e-12;

/// One of the two agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Agent {
    One,
    Two,
}

impl Agent {
    pub const BOTH: [Agent; 2] = [Agent::One, Agent::Two];

    pub fn index(self) -> usize {
        match self {
            Agent::One => 0,
            Agent::Two => 1,
        }
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }
}

impl TryFrom<u8> for Agent {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Agent::One),
            2 => Ok(Agent::Two),
            other => Err(format!("agent must be 1 or 2, got {other}")),
        }
    }
}

impl From<Agent> for u8 {
    fn from(a: Agent) -> u8 {
        a.number()
    }
}

impl fmt::Display for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Handle binding fusion functions and operators to their basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisId(u64);

/// Orthonormal basis of the fusion space.
#[derive(Debug, Clone)]
pub struct FusionBasis {
    agents: [FeatureSet; 2],
    raw_features: Vec<Feature>,
    null_space: DMatrix<f64>,
    transform: DMatrix<f64>,
    digest: String,
    id: BasisId,
}

impl FusionBasis {
    /// Builds the basis using the default probe set (`8·D` quasi-uniform
    /// points plus the box corners) and rank tolerance.
    pub fn new(fs1: &FeatureSet, fs2: &FeatureSet) -> Result<Self> {
        let d = fs1.len() + fs2.len();
        let probes = fs1.domain().probes(PROBES_PER_RAW_FEATURE * d, 0);
        build_fusion_basis(fs1, fs2, &probes, DEFAULT_RANK_TOL)
    }

    /// Rebuilds a basis from an externally supplied transform `T` (for
    /// example one read back from `operators.json`).
    ///
    /// `T` must have orthonormal rows and its orthogonal complement must be
    /// a genuine null space of the raw features.
    pub fn from_transform(fs1: &FeatureSet, fs2: &FeatureSet, transform: DMatrix<f64>) -> Result<Self> {
        check_compatible(fs1, fs2)?;
        let d = fs1.len() + fs2.len();
        if transform.ncols() != d {
            return Err(Error::DimensionMismatch {
                what: "basis transform columns",
                expected: d,
                got: transform.ncols(),
            });
        }
        let r = transform.nrows();
        if r == 0 || linalg::max_abs(&(&transform * transform.transpose() - DMatrix::identity(r, r))) > TRANSFORM_TOL {
            return Err(Error::InvalidParameter(
                "basis transform rows are not orthonormal".into(),
            ));
        }
        let null_space = complement_columns(&transform)?;
        let raw_features: Vec<Feature> = fs1.features().iter().chain(fs2.features()).cloned().collect();
        let probes = fs1.domain().probes(PROBES_PER_RAW_FEATURE * d, 0);
        let e = crate::feature_space::evaluation_matrix(&raw_features, &probes);
        let (rank, _) = linalg::rank_and_null_space(&e, DEFAULT_RANK_TOL)?;
        if rank != r {
            return Err(Error::InvalidParameter(format!(
                "basis transform has rank {r} but the raw features span {rank} dimensions"
            )));
        }
        if null_space.ncols() > 0 {
            let leak = linalg::max_abs(&(&e * &null_space)) / linalg::max_abs(&e).max(f64::MIN_POSITIVE);
            if leak > 1e-8 {
                return Err(Error::InvalidParameter(format!(
                    "basis transform complement is not a null space of the features (leak {leak:e})"
                )));
            }
        }
        Ok(Self::assemble(
            fs1.clone(),
            fs2.clone(),
            raw_features,
            null_space,
            transform,
        ))
    }

    fn assemble(
        fs1: FeatureSet,
        fs2: FeatureSet,
        raw_features: Vec<Feature>,
        null_space: DMatrix<f64>,
        transform: DMatrix<f64>,
    ) -> Self {
        let digest = basis_digest(&raw_features, fs1.len(), fs1.domain(), &transform);
        let id = BasisId(u64::from_str_radix(&digest[..16], 16).expect("hex digest"));
        FusionBasis {
            agents: [fs1, fs2],
            raw_features,
            null_space,
            transform,
            digest,
            id,
        }
    }

    pub fn id(&self) -> BasisId {
        self.id
    }

    /// Hex SHA-256 of the basis (raw features, agent split, domain and `T`
    /// at 17 significant digits).
    pub fn digest(&self) -> &str {
        &self.digest
    }

    /// `r = D − dim 𝒩`.
    pub fn rank(&self) -> usize {
        self.transform.nrows()
    }

    pub fn raw_dim(&self) -> usize {
        self.raw_features.len()
    }

    pub fn input_dim(&self) -> usize {
        self.agents[0].input_dim()
    }

    pub fn domain(&self) -> &DomainBox {
        self.agents[0].domain()
    }

    pub fn raw_features(&self) -> &[Feature] {
        &self.raw_features
    }

    pub fn feature_set(&self, agent: Agent) -> &FeatureSet {
        &self.agents[agent.index()]
    }

    /// Index range of `agent`'s features within the raw features.
    pub fn agent_slice(&self, agent: Agent) -> Range<usize> {
        let n1 = self.agents[0].len();
        match agent {
            Agent::One => 0..n1,
            Agent::Two => n1..self.raw_dim(),
        }
    }

    /// Orthonormal columns spanning the detected null space `𝒩`.
    pub fn null_space(&self) -> &DMatrix<f64> {
        &self.null_space
    }

    /// The `r × D` matrix `T` with `ψ = T · raw`.
    pub fn transform(&self) -> &DMatrix<f64> {
        &self.transform
    }

    /// `B^i`: row `j` holds the `ψ`-coefficients of agent feature `φ^i_j`.
    pub fn agent_block(&self, agent: Agent) -> DMatrix<f64> {
        let s = self.agent_slice(agent);
        self.transform.columns(s.start, s.len()).transpose()
    }

    pub fn eval_raw(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.raw_dim(), self.raw_features.iter().map(|f| f.eval(x)))
    }

    /// `(ψ_1(x), …, ψ_r(x))`.
    pub fn eval_basis(&self, x: &[f64]) -> DVector<f64> {
        &self.transform * self.eval_raw(x)
    }

    /// `E[k][j] = ψ_j(points[k])`.
    pub fn evaluation_matrix(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        let raw = crate::feature_space::evaluation_matrix(&self.raw_features, points);
        raw * self.transform.transpose()
    }

    pub fn function(&self, coeffs: DVector<f64>) -> Result<FusionFunction> {
        if coeffs.len() != self.rank() {
            return Err(Error::DimensionMismatch {
                what: "fusion function coefficients",
                expected: self.rank(),
                got: coeffs.len(),
            });
        }
        Ok(FusionFunction { coeffs, basis: self.id })
    }

    pub fn zero(&self) -> FusionFunction {
        FusionFunction {
            coeffs: DVector::zeros(self.rank()),
            basis: self.id,
        }
    }

    /// Kernel section `K(·, y)`, with coefficients `ψ(y)`.
    pub fn section(&self, y: &[f64]) -> FusionFunction {
        FusionFunction {
            coeffs: self.eval_basis(y),
            basis: self.id,
        }
    }

    pub fn eval(&self, f: &FusionFunction, x: &[f64]) -> Result<f64> {
        self.check(f)?;
        Ok(f.coeffs.dot(&self.eval_basis(x)))
    }

    pub(crate) fn check(&self, f: &FusionFunction) -> Result<()> {
        if f.basis == self.id {
            Ok(())
        } else {
            Err(Error::Binding("fusion function belongs to a different basis"))
        }
    }

    /// `K(x, y) = Σ_k ψ_k(x) ψ_k(y)`.
    pub fn kernel(&self, x: &[f64], y: &[f64]) -> f64 {
        self.eval_basis(x).dot(&self.eval_basis(y))
    }

    /// The agent owning `f`'s feature set. When both agents share the same
    /// feature set agent 1 is reported; the uploaded function is the same
    /// either way.
    pub fn owner(&self, f: &AgentFunction) -> Result<Agent> {
        Agent::BOTH
            .into_iter()
            .find(|&a| self.agents[a.index()].id() == f.space())
            .ok_or(Error::Binding(
                "agent function is not from either registered feature set",
            ))
    }

    /// Upload: the inclusion `Hⁱ → H`, `f ↦ f`, expressed in the `ψ` basis as
    /// `T · embed(α)`.
    pub fn upload(&self, f: &AgentFunction) -> Result<FusionFunction> {
        let agent = self.owner(f)?;
        let mut raw = DVector::zeros(self.raw_dim());
        raw.rows_mut(self.agent_slice(agent).start, f.coeffs().len())
            .copy_from(f.coeffs());
        Ok(FusionFunction {
            coeffs: &self.transform * raw,
            basis: self.id,
        })
    }

    /// The unique minimal-norm decomposition `f = L¹(f) + L²(f)`: lift the
    /// coefficients to `𝒩⊥ ⊂ R^D` with `Tᵀ` and split by agent.
    pub fn split_components(&self, f: &FusionFunction) -> Result<(AgentFunction, AgentFunction)> {
        self.check(f)?;
        let lifted = self.transform.transpose() * &f.coeffs;
        let part = |agent: Agent| {
            let s = self.agent_slice(agent);
            self.agents[agent.index()].function(lifted.rows(s.start, s.len()).into_owned())
        };
        Ok((part(Agent::One)?, part(Agent::Two)?))
    }

    /// Expresses `f` in agent coordinates by solving `Bⁱᵀ c = coeffs(f)` in
    /// the least-squares sense; fails when the residual exceeds
    /// `tol · (1 + ‖coeffs(f)‖)`.
    pub fn convert_to_agent(&self, f: &FusionFunction, agent: Agent, tol: f64) -> Result<AgentFunction> {
        self.check(f)?;
        let bt = self.agent_block(agent).transpose();
        let (c, _) = linalg::min_norm_solve(&bt, &f.coeffs, 1e-12)?;
        let residual = (&bt * &c - &f.coeffs).norm();
        if residual > tol * (1.0 + f.coeffs.norm()) {
            return Err(Error::NotInAgentSpace {
                agent: agent.number(),
                residual,
            });
        }
        self.agents[agent.index()].function(c)
    }

    /// Rank of the kernel sections `{K(·, y)}` over `probes`; they span `H`
    /// iff the rank equals `r`.
    pub fn kernel_sections_span(&self, probes: &[Vec<f64>]) -> Result<SpanReport> {
        if probes.is_empty() {
            return Err(Error::EmptyInput("kernel section probes"));
        }
        let stacked = self.evaluation_matrix(probes);
        let rank = linalg::matrix_rank(&stacked, DEFAULT_RANK_TOL)?;
        Ok(SpanReport {
            rank: rank.min(self.rank()),
            dim: self.rank(),
        })
    }

    /// Rotates `ψ` so that each basis function is proportional to a raw
    /// feature, when such a diagonal form exists.
    ///
    /// Raw features whose `ψ`-coefficient vectors are parallel (shared
    /// features such as `x²` in both agents) are grouped; if the group
    /// directions are mutually orthogonal and number `r`, they are taken as
    /// the new basis, in order of first appearance and sign-fixed so that
    /// each basis function is a positive multiple of the first raw feature of
    /// its group.
    /// Returns `None` when no such form exists.
    pub fn canonical_alignment(&self) -> Option<FusionBasis> {
        const PARALLEL: f64 = 1e-9;
        let mut directions: Vec<DVector<f64>> = Vec::new();
        for m in 0..self.raw_dim() {
            let t = self.transform.column(m).into_owned();
            let n = t.norm();
            if n <= 1e-12 {
                return None;
            }
            let u = t / n;
            if !directions.iter().any(|d| d.dot(&u).abs() > 1.0 - PARALLEL) {
                directions.push(u);
            }
        }
        if directions.len() != self.rank() {
            return None;
        }
        let q = DMatrix::from_rows(&directions.iter().map(|d| d.transpose()).collect::<Vec<_>>());
        if linalg::max_abs(&(&q * q.transpose() - DMatrix::identity(self.rank(), self.rank()))) > PARALLEL {
            return None;
        }
        let transform = q * &self.transform;
        Some(Self::assemble(
            self.agents[0].clone(),
            self.agents[1].clone(),
            self.raw_features.clone(),
            self.null_space.clone(),
            transform,
        ))
    }
}

/// Builds the fusion basis from both agents' feature sets.
///
/// The raw features are evaluated at `probes`; singular values below
/// `rank_tol · σ_max` mark null directions. The rank is re-checked on a fresh
/// probe set and a disagreement is reported as a degenerate probe set.
pub fn build_fusion_basis(
    fs1: &FeatureSet,
    fs2: &FeatureSet,
    probes: &[Vec<f64>],
    rank_tol: f64,
) -> Result<FusionBasis> {
    check_compatible(fs1, fs2)?;
    let raw_features: Vec<Feature> = fs1.features().iter().chain(fs2.features()).cloned().collect();
    let d = raw_features.len();
    if probes.len() < 2 * d {
        return Err(Error::TooFewProbes {
            needed: 2 * d,
            got: probes.len(),
        });
    }
    if let Some(bad) = probes.iter().find(|p| p.len() != fs1.input_dim()) {
        return Err(Error::DimensionMismatch {
            what: "probe point",
            expected: fs1.input_dim(),
            got: bad.len(),
        });
    }
    let e = crate::feature_space::evaluation_matrix(&raw_features, probes);
    linalg::check_finite(e.iter(), "raw features at probes")?;
    let (rank, null_space) = linalg::rank_and_null_space(&e, rank_tol)?;

    let fresh = fs1.domain().probes(probes.len().max(PROBES_PER_RAW_FEATURE * d), 7919);
    let e_fresh = crate::feature_space::evaluation_matrix(&raw_features, &fresh);
    let (fresh_rank, _) = linalg::rank_and_null_space(&e_fresh, rank_tol)?;
    if fresh_rank != rank {
        return Err(Error::DegenerateProbes {
            probed: rank,
            fresh: fresh_rank,
        });
    }

    let transform = linalg::orthonormal_complement(&null_space)?;
    Ok(FusionBasis::assemble(
        fs1.clone(),
        fs2.clone(),
        raw_features,
        null_space,
        transform,
    ))
}

fn check_compatible(fs1: &FeatureSet, fs2: &FeatureSet) -> Result<()> {
    if fs1.input_dim() != fs2.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "agent input dimension",
            expected: fs1.input_dim(),
            got: fs2.input_dim(),
        });
    }
    if fs1.domain() != fs2.domain() {
        return Err(Error::InvalidParameter("agents must share the same domain box".into()));
    }
    Ok(())
}

fn complement_columns(transform: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = transform.ncols();
    let projector = DMatrix::identity(d, d) - transform.transpose() * transform;
    let (values, vectors) = linalg::symmetric_eigen(&projector);
    let cols: Vec<DVector<f64>> = values
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > 0.5)
        .map(|(k, _)| vectors.column(k).into_owned())
        .collect();
    Ok(if cols.is_empty() {
        DMatrix::zeros(d, 0)
    } else {
        DMatrix::from_columns(&cols)
    })
}

/// Formats a real with 17 significant digits.
pub(crate) fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn basis_digest(raw: &[Feature], n1: usize, domain: &DomainBox, transform: &DMatrix<f64>) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(raw).expect("features serialize"));
    h.update((n1 as u64).to_le_bytes());
    h.update(serde_json::to_vec(domain).expect("domain serializes"));
    for i in 0..transform.nrows() {
        for j in 0..transform.ncols() {
            h.update(fmt_real(transform[(i, j)]).as_bytes());
            h.update(b",");
        }
        h.update(b";");
    }
    hex::encode(h.finalize())
}

/// A function of the fusion space as `ψ`-coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionFunction {
    coeffs: DVector<f64>,
    basis: BasisId,
}

impl FusionFunction {
    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    pub fn basis(&self) -> BasisId {
        self.basis
    }

    /// `‖f‖²_H`.
    pub fn norm_squared(&self) -> f64 {
        self.coeffs.norm_squared()
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.norm()
    }

    /// `a·self + b·other` (same basis).
    pub fn combine(&self, a: f64, other: &FusionFunction, b: f64) -> Result<FusionFunction> {
        if self.basis != other.basis {
            return Err(Error::Binding("combining fusion functions from different bases"));
        }
        Ok(FusionFunction {
            coeffs: &self.coeffs * a + &other.coeffs * b,
            basis: self.basis,
        })
    }

    pub fn scale(&self, c: f64) -> FusionFunction {
        FusionFunction {
            coeffs: &self.coeffs * c,
            basis: self.basis,
        }
    }
}

/// `⟨f, g⟩_H`: Euclidean dot of `ψ`-coefficients.
pub fn h_inner_product(f: &FusionFunction, g: &FusionFunction) -> Result<f64> {
    if f.basis != g.basis {
        return Err(Error::Binding("inner product of fusion functions from different bases"));
    }
    Ok(f.coeffs.dot(&g.coeffs))
}

/// `K(x, y)` of the fusion space.
pub fn fusion_kernel(basis: &FusionBasis, x: &[f64], y: &[f64]) -> f64 {
    basis.kernel(x, y)
}

/// Rank of a family of kernel sections against the space dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SpanReport {
    pub rank: usize,
    pub dim: usize,
}

impl SpanReport {
    pub fn spans(&self) -> bool {
        self.rank == self.dim
    }
}
