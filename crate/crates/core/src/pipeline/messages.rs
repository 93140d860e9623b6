use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion_space::{Agent, FusionBasis, FusionFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Upload,
    Download,
}

/// What crosses between an agent and the fusion center: a coefficient vector
/// in the `ψ` basis and the digest of that basis. Nothing else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferMessage {
    pub direction: Direction,
    pub agent_id: Agent,
    pub basis_digest: String,
    pub coeffs: Vec<f64>,
}

impl TransferMessage {
    pub fn new(direction: Direction, agent: Agent, basis: &FusionBasis, f: &FusionFunction) -> Self {
        TransferMessage {
            direction,
            agent_id: agent,
            basis_digest: basis.digest().to_owned(),
            coeffs: f.coeffs().iter().copied().collect(),
        }
    }

    /// Binds the payload to `basis` after checking the digest and length.
    pub fn open(&self, basis: &FusionBasis) -> Result<FusionFunction> {
        if self.basis_digest != basis.digest() {
            return Err(Error::ArtifactMismatch(format!(
                "message for agent {} references basis {}, expected {}",
                self.agent_id,
                self.basis_digest,
                basis.digest()
            )));
        }
        basis.function(DVector::from_column_slice(&self.coeffs))
    }
}

pub fn write_messages(path: &Path, messages: &[TransferMessage]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for m in messages {
        serde_json::to_writer(&mut out, m)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_messages(path: &Path) -> Result<Vec<TransferMessage>> {
    let file = File::open(path).map_err(|_| Error::MissingArtifact(path.to_owned()))?;
    let mut messages = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            messages.push(serde_json::from_str(&line)?);
        }
    }
    Ok(messages)
}

/// The unique message with the given direction and agent.
pub fn find_message(messages: &[TransferMessage], direction: Direction, agent: Agent) -> Result<&TransferMessage> {
    let mut hits = messages
        .iter()
        .filter(|m| m.direction == direction && m.agent_id == agent);
    match (hits.next(), hits.next()) {
        (Some(m), None) => Ok(m),
        (None, _) => Err(Error::ArtifactMismatch(format!(
            "no {direction:?} message for agent {agent}"
        ))),
        (Some(_), Some(_)) => Err(Error::ArtifactMismatch(format!(
            "duplicate {direction:?} messages for agent {agent}"
        ))),
    }
}
