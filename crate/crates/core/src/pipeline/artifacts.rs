use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::metrics::{grid_values, MetricsReport, ESTIMATE_NAMES};
use crate::error::{Error, Result};
use crate::feature_space::{DomainBox, Feature, FeatureSet};
use crate::fusion_space::{Agent, FusionBasis};

pub const CONFIG_FILE: &str = "config.json";
pub const OPERATORS_FILE: &str = "operators.json";
pub const MESSAGES_FILE: &str = "messages.jsonl";
pub const METRICS_FILE: &str = "metrics.json";
pub const ESTIMATES_FILE: &str = "estimates.csv";

/// Contents of `operators.json`: the fusion basis and the operator matrices
/// in it. Matrices are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorsArtifact {
    pub basis_digest: String,
    pub rank: usize,
    pub raw_features: Vec<Feature>,
    pub raw_feature_descriptors: Vec<String>,
    pub agent_feature_counts: [usize; 2],
    pub domain: DomainBox,
    #[serde(rename = "T")]
    pub transform: Vec<Vec<f64>>,
    #[serde(rename = "L1")]
    pub l1: Vec<Vec<f64>>,
    #[serde(rename = "L2")]
    pub l2: Vec<Vec<f64>>,
    #[serde(rename = "sqrtL1")]
    pub sqrt_l1: Vec<Vec<f64>>,
    #[serde(rename = "sqrtL2")]
    pub sqrt_l2: Vec<Vec<f64>>,
}

pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Result<DMatrix<f64>> {
    if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch {
            what: "matrix row",
            expected: cols,
            got: bad.len(),
        });
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        cols,
        rows.iter().flatten().copied(),
    ))
}

impl OperatorsArtifact {
    pub fn from_basis(basis: &FusionBasis) -> Result<Self> {
        let op = |a| rows(basis.operator_matrix(a).matrix());
        let sqrt = |a| basis.sqrt_operator_matrix(a).map(|m| rows(m.matrix()));
        Ok(OperatorsArtifact {
            basis_digest: basis.digest().to_owned(),
            rank: basis.rank(),
            raw_features: basis.raw_features().to_vec(),
            raw_feature_descriptors: basis.raw_features().iter().map(|f| f.to_string()).collect(),
            agent_feature_counts: [basis.feature_set(Agent::One).len(), basis.feature_set(Agent::Two).len()],
            domain: basis.domain().clone(),
            transform: rows(basis.transform()),
            l1: op(Agent::One),
            l2: op(Agent::Two),
            sqrt_l1: sqrt(Agent::One)?,
            sqrt_l2: sqrt(Agent::Two)?,
        })
    }

    /// Rebuilds the basis and checks that it hashes to the recorded digest.
    pub fn rebuild_basis(&self) -> Result<FusionBasis> {
        let [n1, n2] = self.agent_feature_counts;
        if n1 + n2 != self.raw_features.len() || n1 == 0 || n2 == 0 {
            return Err(Error::ArtifactMismatch(
                "agent feature counts do not match the raw features".into(),
            ));
        }
        let fs1 = FeatureSet::new(self.raw_features[..n1].to_vec(), self.domain.clone())?;
        let fs2 = FeatureSet::new(self.raw_features[n1..].to_vec(), self.domain.clone())?;
        let transform = from_rows(&self.transform, n1 + n2)?;
        let basis = FusionBasis::from_transform(&fs1, &fs2, transform)?;
        if basis.digest() != self.basis_digest {
            return Err(Error::ArtifactMismatch(format!(
                "rebuilt basis digest {} differs from recorded {}",
                basis.digest(),
                self.basis_digest
            )));
        }
        Ok(basis)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|_| Error::MissingArtifact(path.to_owned()))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes `estimates.csv` from `config.json`, `operators.json` and
/// `metrics.json` in `dir`: one row per grid point with the true function and
/// all six estimates.
pub fn emit_plot_data(dir: &Path) -> Result<PathBuf> {
    for name in [CONFIG_FILE, OPERATORS_FILE, METRICS_FILE] {
        let p = dir.join(name);
        if !p.is_file() {
            return Err(Error::MissingArtifact(p));
        }
    }
    let cfg: ExperimentConfig = read_json(&dir.join(CONFIG_FILE))?;
    let ops: OperatorsArtifact = read_json(&dir.join(OPERATORS_FILE))?;
    let report: MetricsReport = read_json(&dir.join(METRICS_FILE))?;
    let basis = ops.rebuild_basis()?;
    if report.basis_digest != basis.digest() {
        return Err(Error::ArtifactMismatch(
            "metrics and operators refer to different bases".into(),
        ));
    }
    let path = dir.join(ESTIMATES_FILE);
    write_estimates(&path, &cfg, &basis, &report)?;
    Ok(path)
}

pub(crate) fn write_estimates(
    path: &Path,
    cfg: &ExperimentConfig,
    basis: &FusionBasis,
    report: &MetricsReport,
) -> Result<()> {
    let grid = cfg.grid();
    let points: Vec<Vec<f64>> = grid.iter().map(|&x| vec![x]).collect();
    let eval = basis.evaluation_matrix(&points);
    if let Some((name, c)) = report
        .psi_coeffs
        .entries()
        .into_iter()
        .find(|(_, c)| c.len() != basis.rank())
    {
        return Err(Error::ArtifactMismatch(format!(
            "{name} has {} coefficients, basis rank {}",
            c.len(),
            basis.rank()
        )));
    }
    let values = grid_values(&eval, &report.psi_coeffs);
    let columns = values.entries();
    let truth = DVector::from_iterator(grid.len(), grid.iter().map(|&x| report.true_function.eval(&[x])));

    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(path)
        .map_err(csv_err)?;
    let mut header = vec!["x", "true"];
    header.extend(ESTIMATE_NAMES);
    w.write_record(&header).map_err(csv_err)?;
    for (k, x) in grid.iter().enumerate() {
        let mut row = vec![x.to_string(), truth[k].to_string()];
        row.extend(columns.iter().map(|(_, v)| v[k].to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}
