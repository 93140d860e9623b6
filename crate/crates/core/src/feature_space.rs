//! Agent knowledge spaces: finite feature dictionaries viewed as RKHSs.
//!
//! An agent's space is the span of its features `φ_1, …, φ_n`. Functions are
//! stored as coefficient vectors and the inner product is the Euclidean dot
//! product of coefficients, so the features are orthonormal by definition.
//! The reproducing kernel is `K(x, y) = Σ_j φ_j(x) φ_j(y)`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg;

/// Relative singular-value threshold used when checking feature independence.
pub const DEFAULT_INDEPENDENCE_TOL: f64 = 1e-10;

/// Probe points per feature used by the default independence check.
pub const PROBES_PER_FEATURE: usize = 8;

/// One-dimensional feature primitive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PrimitiveRepr", into = "PrimitiveRepr")]
pub enum FeaturePrimitive {
    /// `x^power`
    Monomial(u32),
    /// `exp(rate * x)`
    Exp(f64),
    /// `sin(freq * x)`
    Sin(f64),
    /// `cos(freq * x)`
    Cos(f64),
}

#[derive(Serialize, Deserialize)]
struct PrimitiveRepr {
    kind: String,
    param: f64,
}

impl TryFrom<PrimitiveRepr> for FeaturePrimitive {
    type Error = String;

    fn try_from(repr: PrimitiveRepr) -> std::result::Result<Self, String> {
        if !repr.param.is_finite() {
            return Err(format!("non-finite param for feature kind {:?}", repr.kind));
        }
        match repr.kind.as_str() {
            "monomial" => {
                if repr.param < 0.0 || repr.param.fract() != 0.0 || repr.param > u32::MAX as f64 {
                    Err(format!(
                        "monomial power must be a nonnegative integer, got {}",
                        repr.param
                    ))
                } else {
                    Ok(FeaturePrimitive::Monomial(repr.param as u32))
                }
            }
            "exp" => Ok(FeaturePrimitive::Exp(repr.param)),
            "sin" => Ok(FeaturePrimitive::Sin(repr.param)),
            "cos" => Ok(FeaturePrimitive::Cos(repr.param)),
            other => Err(format!("unknown feature kind {other:?}")),
        }
    }
}

impl From<FeaturePrimitive> for PrimitiveRepr {
    fn from(p: FeaturePrimitive) -> Self {
        let (kind, param) = match p {
            FeaturePrimitive::Monomial(k) => ("monomial", k as f64),
            FeaturePrimitive::Exp(r) => ("exp", r),
            FeaturePrimitive::Sin(w) => ("sin", w),
            FeaturePrimitive::Cos(w) => ("cos", w),
        };
        PrimitiveRepr {
            kind: kind.to_string(),
            param,
        }
    }
}

impl FeaturePrimitive {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            FeaturePrimitive::Monomial(0) => 1.0,
            FeaturePrimitive::Monomial(k) => x.powi(k as i32),
            FeaturePrimitive::Exp(rate) => (rate * x).exp(),
            FeaturePrimitive::Sin(freq) => (freq * x).sin(),
            FeaturePrimitive::Cos(freq) => (freq * x).cos(),
        }
    }

    fn param_is_finite(&self) -> bool {
        match *self {
            FeaturePrimitive::Monomial(_) => true,
            FeaturePrimitive::Exp(v) | FeaturePrimitive::Sin(v) | FeaturePrimitive::Cos(v) => v.is_finite(),
        }
    }

    fn write_on(&self, f: &mut fmt::Formatter<'_>, var: &str) -> fmt::Result {
        match *self {
            FeaturePrimitive::Monomial(0) => write!(f, "1"),
            FeaturePrimitive::Monomial(1) => write!(f, "{var}"),
            FeaturePrimitive::Monomial(k) => write!(f, "{var}^{k}"),
            FeaturePrimitive::Exp(r) => write!(f, "exp({r}{var})"),
            FeaturePrimitive::Sin(w) => write!(f, "sin({w}{var})"),
            FeaturePrimitive::Cos(w) => write!(f, "cos({w}{var})"),
        }
    }
}

/// A feature on `R^d`: the product of one primitive per input coordinate.
///
/// Serialized as a single primitive object when `d = 1` and as an array of
/// primitives otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "FeatureRepr", into = "FeatureRepr")]
pub struct Feature {
    factors: Vec<FeaturePrimitive>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FeatureRepr {
    Single(FeaturePrimitive),
    Product(Vec<FeaturePrimitive>),
}

impl From<FeatureRepr> for Feature {
    fn from(repr: FeatureRepr) -> Self {
        match repr {
            FeatureRepr::Single(p) => Feature { factors: vec![p] },
            FeatureRepr::Product(factors) => Feature { factors },
        }
    }
}

impl From<Feature> for FeatureRepr {
    fn from(f: Feature) -> Self {
        if f.factors.len() == 1 {
            FeatureRepr::Single(f.factors[0])
        } else {
            FeatureRepr::Product(f.factors)
        }
    }
}

impl From<FeaturePrimitive> for Feature {
    fn from(p: FeaturePrimitive) -> Self {
        Feature { factors: vec![p] }
    }
}

impl Feature {
    pub fn product(factors: Vec<FeaturePrimitive>) -> Self {
        Feature { factors }
    }

    pub fn monomial(power: u32) -> Self {
        FeaturePrimitive::Monomial(power).into()
    }

    pub fn factors(&self) -> &[FeaturePrimitive] {
        &self.factors
    }

    pub fn input_dim(&self) -> usize {
        self.factors.len()
    }

    /// Evaluates the feature at `x`; `x.len()` must equal `input_dim()`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.factors.len());
        self.factors.iter().zip(x).map(|(p, &xi)| p.eval(xi)).product()
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.len() == 1 {
            return self.factors[0].write_on(f, "x");
        }
        for (i, p) in self.factors.iter().enumerate() {
            if i > 0 {
                write!(f, "*")?;
            }
            p.write_on(f, &format!("x{i}"))?;
        }
        Ok(())
    }
}

/// Evaluates a single feature at a point.
pub fn eval_feature(feature: &Feature, x: &[f64]) -> f64 {
    feature.eval(x)
}

/// Axis-aligned closed box in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DomainBox {
    bounds: Vec<(f64, f64)>,
}

impl DomainBox {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::EmptyInput("domain box"));
        }
        for &(lo, hi) in &bounds {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::NonFinite("domain box"));
            }
            if lo > hi {
                return Err(Error::InvalidParameter(format!("empty interval [{lo}, {hi}]")));
            }
        }
        Ok(DomainBox { bounds })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        DomainBox::new(vec![(lo, hi)])
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// Deterministic quasi-uniform probe points: the box corners followed by
    /// a Halton sequence mapped into the box, `count` points in total (at
    /// least the number of corners). `offset` selects a different segment of
    /// the Halton sequence.
    pub fn probes(&self, count: usize, offset: usize) -> Vec<Vec<f64>> {
        const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
        let d = self.dim();
        let mut points = Vec::with_capacity(count);
        if offset == 0 && d <= 10 {
            for mask in 0..(1usize << d) {
                points.push(
                    self.bounds
                        .iter()
                        .enumerate()
                        .map(|(i, &(lo, hi))| if mask >> i & 1 == 0 { lo } else { hi })
                        .collect(),
                );
            }
            points.dedup();
        }
        let mut index = 1 + offset as u64;
        while points.len() < count {
            let p = self
                .bounds
                .iter()
                .enumerate()
                .map(|(i, &(lo, hi))| lo + (hi - lo) * radical_inverse(index, PRIMES[i % PRIMES.len()]))
                .collect();
            points.push(p);
            index += 1;
        }
        points
    }
}

fn radical_inverse(mut n: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut factor = inv;
    let mut r = 0.0;
    while n > 0 {
        r += (n % base) as f64 * factor;
        n /= base;
        factor *= inv;
    }
    r
}

/// Opaque handle binding coefficient vectors to the feature set they belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpaceId(u64);

/// An agent's ordered, linearly independent feature dictionary.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    features: Vec<Feature>,
    domain: DomainBox,
    id: SpaceId,
}

impl PartialEq for FeatureSet {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl FeatureSet {
    /// Builds a feature set, checking independence on the default probe set.
    pub fn new(features: Vec<Feature>, domain: DomainBox) -> Result<Self> {
        let probes = domain.probes(PROBES_PER_FEATURE * features.len().max(1), 0);
        Self::with_probes(features, domain, &probes, DEFAULT_INDEPENDENCE_TOL)
    }

    /// Builds a feature set, checking independence on caller-supplied probes.
    pub fn with_probes(features: Vec<Feature>, domain: DomainBox, probes: &[Vec<f64>], tol: f64) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::EmptyInput("feature set"));
        }
        for f in &features {
            if f.input_dim() != domain.dim() {
                return Err(Error::DimensionMismatch {
                    what: "feature input dimension",
                    expected: domain.dim(),
                    got: f.input_dim(),
                });
            }
            if !f.factors.iter().all(FeaturePrimitive::param_is_finite) {
                return Err(Error::NonFinite("feature parameter"));
            }
        }
        match verify_independence(&features, probes, tol)? {
            Independence::Independent => {}
            Independence::Dependent { null_vectors } => return Err(Error::DependentFeatures { null_vectors }),
        }
        let id = SpaceId(digest_u64(&features, &domain));
        Ok(FeatureSet { features, domain, id })
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn input_dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn id(&self) -> SpaceId {
        self.id
    }

    /// Feature values `(φ_1(x), …, φ_n(x))`.
    pub fn eval_features(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.features.iter().map(|f| f.eval(x)))
    }

    /// Evaluation matrix `E[k][j] = φ_j(points[k])`.
    pub fn evaluation_matrix(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        evaluation_matrix(&self.features, points)
    }

    /// Binds a coefficient vector to this space.
    pub fn function(&self, coeffs: DVector<f64>) -> Result<AgentFunction> {
        if coeffs.len() != self.len() {
            return Err(Error::DimensionMismatch {
                what: "agent function coefficients",
                expected: self.len(),
                got: coeffs.len(),
            });
        }
        Ok(AgentFunction { coeffs, space: self.id })
    }

    /// The null function of this space.
    pub fn zero(&self) -> AgentFunction {
        AgentFunction {
            coeffs: DVector::zeros(self.len()),
            space: self.id,
        }
    }

    /// Kernel section `K(·, y)`, whose coefficients are `φ_j(y)`.
    pub fn section(&self, y: &[f64]) -> AgentFunction {
        AgentFunction {
            coeffs: self.eval_features(y),
            space: self.id,
        }
    }

    pub fn eval(&self, f: &AgentFunction, x: &[f64]) -> Result<f64> {
        self.check(f)?;
        Ok(eval_function_unchecked(&self.features, &f.coeffs, x))
    }

    pub fn kernel(&self, x: &[f64], y: &[f64]) -> f64 {
        kernel_eval(self, x, y)
    }

    pub(crate) fn check(&self, f: &AgentFunction) -> Result<()> {
        if f.space == self.id {
            Ok(())
        } else {
            Err(Error::Binding("agent function belongs to a different feature set"))
        }
    }
}

fn digest_u64(features: &[Feature], domain: &DomainBox) -> u64 {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(features).expect("features serialize"));
    for &(lo, hi) in domain.bounds() {
        h.update(lo.to_bits().to_le_bytes());
        h.update(hi.to_bits().to_le_bytes());
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("digest has 8 bytes"))
}

pub(crate) fn evaluation_matrix(features: &[Feature], points: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(points.len(), features.len(), |k, j| features[j].eval(&points[k]))
}

fn eval_function_unchecked(features: &[Feature], coeffs: &DVector<f64>, x: &[f64]) -> f64 {
    features.iter().zip(coeffs.iter()).map(|(f, &a)| a * f.eval(x)).sum()
}

/// A function `Σ α_j φ_j` in an agent space.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentFunction {
    coeffs: DVector<f64>,
    space: SpaceId,
}

impl AgentFunction {
    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    pub fn space(&self) -> SpaceId {
        self.space
    }

    /// `‖f‖² = Σ α_j²`.
    pub fn norm_squared(&self) -> f64 {
        self.coeffs.norm_squared()
    }
}

/// `f(x) = Σ α_j φ_j(x)`.
pub fn eval_function(fs: &FeatureSet, f: &AgentFunction, x: &[f64]) -> Result<f64> {
    fs.eval(f, x)
}

/// `K(x, y) = Σ_j φ_j(x) φ_j(y)`, summed in declaration order so the result
/// is bit-for-bit symmetric.
pub fn kernel_eval(fs: &FeatureSet, x: &[f64], y: &[f64]) -> f64 {
    fs.features.iter().map(|f| f.eval(x) * f.eval(y)).sum()
}

/// Gram matrix `M[k][l] = K(x_k, x_l)`.
pub fn gram_matrix(fs: &FeatureSet, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if points.is_empty() {
        return Err(Error::EmptyInput("gram matrix points"));
    }
    let n = points.len();
    let values: Vec<DVector<f64>> = points.iter().map(|p| fs.eval_features(p)).collect();
    let mut m = DMatrix::zeros(n, n);
    for k in 0..n {
        for l in k..n {
            let v: f64 = values[k].iter().zip(values[l].iter()).map(|(a, b)| a * b).sum();
            m[(k, l)] = v;
            m[(l, k)] = v;
        }
    }
    Ok(m)
}

/// `⟨f, g⟩ = Σ α_j β_j`.
pub fn inner_product(f: &AgentFunction, g: &AgentFunction) -> Result<f64> {
    if f.space != g.space {
        return Err(Error::Binding("inner product of functions from different feature sets"));
    }
    Ok(f.coeffs.dot(&g.coeffs))
}

/// Outcome of a numerical independence check.
#[derive(Debug, Clone, PartialEq)]
pub enum Independence {
    Independent,
    /// Unit-norm coefficient vectors `c` with `Σ c_j φ_j ≈ 0` on the probes.
    Dependent {
        null_vectors: Vec<Vec<f64>>,
    },
}

/// Checks linear independence of `features` from their values at `probes`.
///
/// The evaluation matrix is column-equilibrated and its SVD taken; the set is
/// independent iff the smallest singular value exceeds `tol` times the
/// largest.
pub fn verify_independence(features: &[Feature], probes: &[Vec<f64>], tol: f64) -> Result<Independence> {
    if features.is_empty() {
        return Err(Error::EmptyInput("feature set"));
    }
    if probes.len() < features.len() {
        return Err(Error::TooFewProbes {
            needed: features.len(),
            got: probes.len(),
        });
    }
    let e = evaluation_matrix(features, probes);
    linalg::check_finite(e.iter(), "feature evaluation at probes")?;
    let (_, null) = linalg::rank_and_null_space(&e, tol)?;
    if null.ncols() == 0 {
        Ok(Independence::Independent)
    } else {
        let null_vectors = (0..null.ncols())
            .map(|k| {
                let mut v = null.column(k).into_owned();
                linalg::fix_sign(&mut v);
                v.iter().copied().collect()
            })
            .collect();
        Ok(Independence::Dependent { null_vectors })
    }
}

/// Input/output samples held by one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    outputs: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, outputs: Vec<f64>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::EmptyInput("dataset"));
        }
        if inputs.len() != outputs.len() {
            return Err(Error::DimensionMismatch {
                what: "dataset outputs",
                expected: inputs.len(),
                got: outputs.len(),
            });
        }
        let d = inputs[0].len();
        if d == 0 {
            return Err(Error::EmptyInput("dataset input point"));
        }
        if let Some(bad) = inputs.iter().find(|x| x.len() != d) {
            return Err(Error::DimensionMismatch {
                what: "dataset input point",
                expected: d,
                got: bad.len(),
            });
        }
        linalg::check_finite(inputs.iter().flatten(), "dataset inputs")?;
        linalg::check_finite(outputs.iter(), "dataset outputs")?;
        Ok(Dataset { inputs, outputs })
    }

    /// One-dimensional convenience constructor.
    pub fn from_scalar(inputs: &[f64], outputs: Vec<f64>) -> Result<Self> {
        Dataset::new(inputs.iter().map(|&x| vec![x]).collect(), outputs)
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }

    /// Concatenation of two datasets (same input dimension).
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        let mut inputs = self.inputs.clone();
        inputs.extend(other.inputs.iter().cloned());
        let mut outputs = self.outputs.clone();
        outputs.extend_from_slice(&other.outputs);
        Dataset::new(inputs, outputs)
    }
}
