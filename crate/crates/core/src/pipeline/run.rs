use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::artifacts::{
    read_json, write_estimates, write_json, OperatorsArtifact, CONFIG_FILE, MESSAGES_FILE, METRICS_FILE, OPERATORS_FILE,
};
use super::config::{Expansion, ExperimentConfig, FusionConfig};
use super::data::generate_data;
use super::messages::{find_message, read_messages, write_messages, Direction, TransferMessage};
use super::metrics::{AgentCoeffs, EstimateMetrics, FusionSummary, MetricsReport, PerEstimate, Seeds};
use crate::error::{Error, Result};
use crate::feature_space::{AgentFunction, Dataset, FeatureSet};
use crate::fusion_optimizer::{fuse, DissimilarityBasis, FusionResult};
use crate::fusion_space::{Agent, FusionBasis, FusionFunction, SpanReport, DEFAULT_CONVERSION_TOL};
use crate::regression::{solve_centralized, solve_dual, RegressionProblem, RegressionSolution};

/// Largest relative deviation tolerated when replaying from messages.
pub const REPLAY_TOL: f64 = 1e-12;

/// Fusion basis for the config's feature sets on the config's domain,
/// rotated to the canonical raw-feature alignment when one exists.
pub fn build_basis(cfg: &ExperimentConfig) -> Result<FusionBasis> {
    let domain = cfg.domain()?;
    let fs1 = FeatureSet::new(cfg.agents[0].features.clone(), domain.clone())?;
    let fs2 = FeatureSet::new(cfg.agents[1].features.clone(), domain)?;
    let basis = FusionBasis::new(&fs1, &fs2)?;
    Ok(basis.canonical_alignment().unwrap_or(basis))
}

/// An agent's local estimate and the message it uploads.
#[derive(Debug, Clone)]
pub struct LocalFit {
    pub agent: Agent,
    pub data: Dataset,
    pub estimate: RegressionSolution<AgentFunction>,
    pub upload: TransferMessage,
}

/// Agent side: generate data, fit in the agent's own space, upload.
pub fn fit_agent(cfg: &ExperimentConfig, basis: &FusionBasis, agent: Agent) -> Result<LocalFit> {
    let data = generate_data(cfg, agent).map_err(Error::at("data"))?;
    let space = basis.feature_set(agent);
    let estimate = RegressionProblem::new(&data, cfg.agents[agent.index()].ridge, space)
        .and_then(|p| solve_dual(&p))
        .map_err(Error::at("local fit"))?;
    let uploaded = basis.upload(&estimate.function).map_err(Error::at("upload"))?;
    Ok(LocalFit {
        agent,
        data,
        estimate,
        upload: TransferMessage::new(Direction::Upload, agent, basis, &uploaded),
    })
}

/// What the fusion center produces from the two upload messages.
#[derive(Debug, Clone)]
pub struct CenterOutput {
    pub uploads: [FusionFunction; 2],
    pub fusion: FusionResult,
    pub family_span: SpanReport,
    /// `√L̄ⁱ` applied to the fused estimate, in the `ψ` basis.
    pub downloads: [FusionFunction; 2],
    pub messages: [TransferMessage; 2],
}

/// Fusion-center side. Sees only the basis, the fusion settings and the
/// upload messages.
pub fn fusion_center(basis: &FusionBasis, cfg: &FusionConfig, messages: &[TransferMessage]) -> Result<CenterOutput> {
    let open = |agent| find_message(messages, Direction::Upload, agent).and_then(|m| m.open(basis));
    let uploads = [open(Agent::One), open(Agent::Two)];
    let [f1, f2] = uploads.map(|u| u.map_err(Error::at("upload")));
    let (f1, f2) = (f1?, f2?);

    let family = DissimilarityBasis::sampled_sections(basis, cfg.n_b, vec![cfg.anchor_range], cfg.seed)
        .map_err(Error::at("fusion"))?;
    let fusion = fuse(&f1, &f2, &family, cfg.ridge).map_err(Error::at("fusion"))?;

    let down = |agent| {
        basis
            .download_coeffs(&fusion.fused, agent)
            .map_err(Error::at("download"))
    };
    let downloads = [down(Agent::One)?, down(Agent::Two)?];
    let messages =
        [Agent::One, Agent::Two].map(|a| TransferMessage::new(Direction::Download, a, basis, &downloads[a.index()]));
    Ok(CenterOutput {
        uploads: [f1, f2],
        family_span: family.span(),
        fusion,
        downloads,
        messages,
    })
}

/// Agent side of a download: re-express the received function in the
/// agent's own features.
pub fn receive_download(basis: &FusionBasis, message: &TransferMessage) -> Result<AgentFunction> {
    let g = message.open(basis)?;
    basis.convert_to_agent(&g, message.agent_id, DEFAULT_CONVERSION_TOL)
}

/// Result of [`run_pipeline`].
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: MetricsReport,
    pub out_dir: PathBuf,
    pub basis: FusionBasis,
    pub fits: [LocalFit; 2],
    pub center: CenterOutput,
    pub downloaded: [AgentFunction; 2],
    pub centralized: FusionFunction,
}

fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn grid_points(cfg: &ExperimentConfig) -> Vec<Vec<f64>> {
    cfg.grid().into_iter().map(|x| vec![x]).collect()
}

fn truth_on(points: &[Vec<f64>], truth: &Expansion) -> DVector<f64> {
    DVector::from_iterator(points.len(), points.iter().map(|x| truth.eval(x)))
}

fn metrics_for(eval: &DMatrix<f64>, truth: &DVector<f64>, psi: &[f64]) -> Result<EstimateMetrics> {
    let c = DVector::from_column_slice(psi);
    EstimateMetrics::compute(&(eval * &c), truth, &c)
}

/// Local fits, upload, fusion, download and the pooled-data baseline,
/// followed by metrics and artifacts in `out_dir`.
pub fn run_pipeline(cfg: &ExperimentConfig, out_dir: &Path) -> Result<PipelineRun> {
    cfg.validate().map_err(Error::at("config"))?;
    let basis = build_basis(cfg).map_err(Error::at("basis"))?;

    let fits = [fit_agent(cfg, &basis, Agent::One)?, fit_agent(cfg, &basis, Agent::Two)?];
    let uploads = [fits[0].upload.clone(), fits[1].upload.clone()];
    let center = fusion_center(&basis, &cfg.fusion, &uploads)?;
    let downloaded = [
        receive_download(&basis, &center.messages[0]).map_err(Error::at("download"))?,
        receive_download(&basis, &center.messages[1]).map_err(Error::at("download"))?,
    ];
    let centralized = solve_centralized(&fits[0].data, &fits[1].data, &basis, cfg.centralized_ridge)
        .map_err(Error::at("centralized"))?
        .function;

    let psi = PerEstimate {
        f1_up: to_vec(center.uploads[0].coeffs()),
        f2_up: to_vec(center.uploads[1].coeffs()),
        fused: to_vec(center.fusion.fused.coeffs()),
        f1_down: to_vec(center.downloads[0].coeffs()),
        f2_down: to_vec(center.downloads[1].coeffs()),
        centralized: to_vec(centralized.coeffs()),
    };
    let truth = cfg.true_function.resolve();
    let points = grid_points(cfg);
    let eval = basis.evaluation_matrix(&points);
    let truth_values = truth_on(&points, &truth);
    let m = |c: &Vec<f64>| metrics_for(&eval, &truth_values, c);
    let estimates = PerEstimate {
        f1_up: m(&psi.f1_up),
        f2_up: m(&psi.f2_up),
        fused: m(&psi.fused),
        f1_down: m(&psi.f1_down),
        f2_down: m(&psi.f2_down),
        centralized: m(&psi.centralized),
    };
    let estimates = collect_metrics(estimates).map_err(Error::at("metrics"))?;

    let report = MetricsReport {
        basis_digest: basis.digest().to_owned(),
        rank: basis.rank(),
        seeds: Seeds {
            true_function: cfg.true_function.seed(),
            noise: [cfg.agents[0].noise_seed, cfg.agents[1].noise_seed],
            anchors: cfg.fusion.seed,
        },
        true_function: truth,
        fusion: FusionSummary {
            a: center.fusion.a,
            b: center.fusion.b,
            degenerate: center.fusion.degenerate,
            objective: center.fusion.objective,
            anchor_count: cfg.fusion.n_b,
            anchor_span_rank: center.family_span.rank,
        },
        estimates,
        psi_coeffs: psi,
        agent_coeffs: AgentCoeffs {
            f1_up: to_vec(fits[0].estimate.function.coeffs()),
            f2_up: to_vec(fits[1].estimate.function.coeffs()),
            f1_down: to_vec(downloaded[0].coeffs()),
            f2_down: to_vec(downloaded[1].coeffs()),
        },
    };

    write_artifacts(cfg, &basis, &uploads, &center, &report, out_dir).map_err(Error::at("artifacts"))?;
    Ok(PipelineRun {
        report,
        out_dir: out_dir.to_owned(),
        basis,
        fits,
        center,
        downloaded,
        centralized,
    })
}

fn collect_metrics(m: PerEstimate<Result<EstimateMetrics>>) -> Result<PerEstimate<EstimateMetrics>> {
    Ok(PerEstimate {
        f1_up: m.f1_up?,
        f2_up: m.f2_up?,
        fused: m.fused?,
        f1_down: m.f1_down?,
        f2_down: m.f2_down?,
        centralized: m.centralized?,
    })
}

fn write_artifacts(
    cfg: &ExperimentConfig,
    basis: &FusionBasis,
    uploads: &[TransferMessage; 2],
    center: &CenterOutput,
    report: &MetricsReport,
    out_dir: &Path,
) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    write_json(&out_dir.join(CONFIG_FILE), cfg)?;
    write_json(&out_dir.join(OPERATORS_FILE), &OperatorsArtifact::from_basis(basis)?)?;
    let messages: Vec<TransferMessage> = uploads.iter().chain(&center.messages).cloned().collect();
    write_messages(&out_dir.join(MESSAGES_FILE), &messages)?;
    write_json(&out_dir.join(METRICS_FILE), report)?;
    write_estimates(&out_dir.join(super::artifacts::ESTIMATES_FILE), cfg, basis, report)
}

/// Outcome of [`replay_fusion`].
#[derive(Debug, Clone, Serialize)]
pub struct ReplayReport {
    pub basis_digest: String,
    pub a: f64,
    pub b: f64,
    pub degenerate: bool,
    pub fused_coeffs: Vec<f64>,
    pub downloads: Vec<TransferMessage>,
    /// Largest relative deviation from the recorded values.
    pub max_deviation: f64,
    pub values_compared: usize,
}

struct Comparison {
    max_deviation: f64,
    count: usize,
    worst: String,
}

impl Comparison {
    fn check(&mut self, what: &str, replayed: &[f64], recorded: &[f64]) -> Result<()> {
        if replayed.len() != recorded.len() {
            return Err(Error::ArtifactMismatch(format!(
                "{what}: {} replayed values, {} recorded",
                replayed.len(),
                recorded.len()
            )));
        }
        for (x, y) in replayed.iter().zip(recorded) {
            let dev = (x - y).abs() / y.abs().max(1.0);
            if dev.is_nan() || dev > self.max_deviation {
                self.max_deviation = if dev.is_nan() { f64::INFINITY } else { dev };
                self.worst = what.to_owned();
            }
            self.count += 1;
        }
        Ok(())
    }
}

fn metric_values(m: &EstimateMetrics) -> [f64; 3] {
    [m.rmse_on_grid, m.sup_error_on_grid, m.h_norm]
}

/// Re-runs the fusion center from the artifacts in `dir` using only the
/// basis, the fusion settings and the upload messages, and checks the
/// result against the recorded fused and downloaded entries.
pub fn replay_fusion(dir: &Path) -> Result<ReplayReport> {
    let stage = Error::at("replay");
    let cfg: ExperimentConfig = read_json(&dir.join(CONFIG_FILE)).map_err(Error::at("replay"))?;
    let ops: OperatorsArtifact = read_json(&dir.join(OPERATORS_FILE)).map_err(Error::at("replay"))?;
    let recorded: MetricsReport = read_json(&dir.join(METRICS_FILE)).map_err(Error::at("replay"))?;
    let messages = read_messages(&dir.join(MESSAGES_FILE)).map_err(Error::at("replay"))?;
    let basis = ops.rebuild_basis().map_err(Error::at("replay"))?;

    let center = fusion_center(&basis, &cfg.fusion, &messages)?;
    let downloaded = [
        receive_download(&basis, &center.messages[0]).map_err(Error::at("download"))?,
        receive_download(&basis, &center.messages[1]).map_err(Error::at("download"))?,
    ];
    let points = grid_points(&cfg);
    let eval = basis.evaluation_matrix(&points);
    let truth = truth_on(&points, &cfg.true_function.resolve());

    let mut cmp = Comparison {
        max_deviation: 0.0,
        count: 0,
        worst: String::new(),
    };
    let result = (|| -> Result<()> {
        let f = &center.fusion;
        cmp.check(
            "fusion coefficients",
            &[f.a, f.b, f.objective],
            &[recorded.fusion.a, recorded.fusion.b, recorded.fusion.objective],
        )?;
        if f.degenerate != recorded.fusion.degenerate {
            return Err(Error::ArtifactMismatch("degeneracy flag differs".into()));
        }
        let entries = [
            (
                "fused",
                center.fusion.fused.coeffs(),
                &recorded.psi_coeffs.fused,
                &recorded.estimates.fused,
            ),
            (
                "f1_down",
                center.downloads[0].coeffs(),
                &recorded.psi_coeffs.f1_down,
                &recorded.estimates.f1_down,
            ),
            (
                "f2_down",
                center.downloads[1].coeffs(),
                &recorded.psi_coeffs.f2_down,
                &recorded.estimates.f2_down,
            ),
        ];
        for (name, coeffs, rec_coeffs, rec_metrics) in entries {
            let replayed = to_vec(coeffs);
            cmp.check(name, &replayed, rec_coeffs)?;
            let m = metrics_for(&eval, &truth, &replayed)?;
            cmp.check(name, &metric_values(&m), &metric_values(rec_metrics))?;
        }
        cmp.check(
            "f1_down agent coefficients",
            &to_vec(downloaded[0].coeffs()),
            &recorded.agent_coeffs.f1_down,
        )?;
        cmp.check(
            "f2_down agent coefficients",
            &to_vec(downloaded[1].coeffs()),
            &recorded.agent_coeffs.f2_down,
        )?;
        for agent in Agent::BOTH {
            let m = find_message(&messages, Direction::Download, agent)?;
            cmp.check("download message", &center.messages[agent.index()].coeffs, &m.coeffs)?;
        }
        Ok(())
    })();
    result.map_err(stage)?;
    if cmp.max_deviation > REPLAY_TOL {
        return Err(Error::Stage {
            stage: "replay",
            source: Box::new(Error::ArtifactMismatch(format!(
                "{} deviates from the recorded value by {:e}",
                cmp.worst, cmp.max_deviation
            ))),
        });
    }
    Ok(ReplayReport {
        basis_digest: basis.digest().to_owned(),
        a: center.fusion.a,
        b: center.fusion.b,
        degenerate: center.fusion.degenerate,
        fused_coeffs: to_vec(center.fusion.fused.coeffs()),
        downloads: center.messages.to_vec(),
        max_deviation: cmp.max_deviation,
        values_compared: cmp.count,
    })
}
