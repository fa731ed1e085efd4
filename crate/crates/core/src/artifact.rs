//! Surrogate persistence: a single JSON document with a trailing CRC-32
//! checksum over the canonical serialization.
//!
//! Reservoir matrices are regenerated from the stored seed rather than
//! serialized; the reservoir *trajectory* is stored, since prediction
//! contracts against it. All floats use the shortest round-trip decimal
//! representation, so save/load/predict is bit-identical to the in-memory
//! surrogate and rewriting an artifact reproduces it byte for byte.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ctesn::{OutputNorm, Payload, ReservoirSpec, TrainMeta, TrainedSurrogate, Variant};
use crate::rbf::{Kernel, RbfInterpolant};
use crate::sampling::ParameterSpace;

pub const ARTIFACT_FORMAT: &str = "ctesn-surrogate";
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("not a surrogate artifact (format field '{0}')")]
    FormatMismatch(String),
    #[error("artifact version {found} is not supported (expected {ARTIFACT_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("artifact checksum mismatch: stored {stored}, computed {computed}")]
    ChecksumMismatch { stored: String, computed: String },
    #[error("invalid artifact data: {0}")]
    InvalidData(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RbfDoc {
    kernel: Kernel,
    centers: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    norm_lo: Vec<f64>,
    norm_width: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum PayloadDoc {
    Lp {
        map: RbfDoc,
    },
    Np {
        map: RbfDoc,
        centers: Vec<Vec<f64>>,
        r_norm_lo: Vec<f64>,
        r_norm_width: Vec<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ArtifactFile {
    format: String,
    version: u32,
    variant: Variant,
    model: String,
    reservoir: ReservoirSpec,
    p_star: Vec<f64>,
    space: ParameterSpace,
    labels: Vec<String>,
    output_norm: OutputNorm,
    /// Vectorization order of the parameter-map outputs.
    w_out_order: String,
    grid_times: Vec<f64>,
    reservoir_trajectory: Vec<Vec<f64>>,
    payload: PayloadDoc,
    train_meta: TrainMeta,
    checksum: String,
}

fn mat_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn rows_to_mat(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, ArtifactError> {
    let nr = rows.len();
    if nr == 0 {
        return Err(ArtifactError::InvalidData("empty matrix".into()));
    }
    let nc = rows[0].len();
    if rows.iter().any(|r| r.len() != nc) {
        return Err(ArtifactError::InvalidData("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

fn rbf_to_doc(rbf: &RbfInterpolant) -> RbfDoc {
    let (lo, width) = rbf.norm();
    RbfDoc {
        kernel: rbf.kernel(),
        centers: mat_to_rows(rbf.centers()),
        weights: mat_to_rows(rbf.weights()),
        norm_lo: lo.to_vec(),
        norm_width: width.to_vec(),
    }
}

fn rbf_from_doc(doc: &RbfDoc) -> Result<RbfInterpolant, ArtifactError> {
    RbfInterpolant::from_parts(
        rows_to_mat(&doc.centers)?,
        rows_to_mat(&doc.weights)?,
        doc.kernel,
        doc.norm_lo.clone(),
        doc.norm_width.clone(),
    )
    .map_err(|e| ArtifactError::InvalidData(e.to_string()))
}

fn to_doc(surr: &TrainedSurrogate, model: &str) -> ArtifactFile {
    let payload = match &surr.payload {
        Payload::Lp { map } => PayloadDoc::Lp { map: rbf_to_doc(map) },
        Payload::Np { map, centers, r_norm_lo, r_norm_width } => PayloadDoc::Np {
            map: rbf_to_doc(map),
            centers: mat_to_rows(centers),
            r_norm_lo: r_norm_lo.clone(),
            r_norm_width: r_norm_width.clone(),
        },
    };
    ArtifactFile {
        format: ARTIFACT_FORMAT.into(),
        version: ARTIFACT_VERSION,
        variant: surr.variant(),
        model: model.into(),
        reservoir: surr.spec.clone(),
        p_star: surr.p_star.clone(),
        space: surr.space.clone(),
        labels: surr.labels.clone(),
        output_norm: surr.out_norm.clone(),
        w_out_order: "row-major".into(),
        grid_times: surr.grid_times.clone(),
        reservoir_trajectory: mat_to_rows(&surr.r_values),
        payload,
        train_meta: surr.train_meta.clone(),
        checksum: String::new(),
    }
}

fn from_doc(doc: &ArtifactFile) -> Result<TrainedSurrogate, ArtifactError> {
    let payload = match &doc.payload {
        PayloadDoc::Lp { map } => Payload::Lp { map: rbf_from_doc(map)? },
        PayloadDoc::Np { map, centers, r_norm_lo, r_norm_width } => Payload::Np {
            map: rbf_from_doc(map)?,
            centers: rows_to_mat(centers)?,
            r_norm_lo: r_norm_lo.clone(),
            r_norm_width: r_norm_width.clone(),
        },
    };
    if payload.variant() != doc.variant {
        return Err(ArtifactError::InvalidData("variant field disagrees with payload".into()));
    }
    Ok(TrainedSurrogate::from_parts(
        doc.reservoir.clone(),
        doc.p_star.clone(),
        doc.space.clone(),
        doc.labels.clone(),
        doc.output_norm.clone(),
        doc.grid_times.clone(),
        rows_to_mat(&doc.reservoir_trajectory)?,
        payload,
        doc.train_meta.clone(),
    ))
}

fn checksum_of(doc: &ArtifactFile) -> Result<String, ArtifactError> {
    let mut blank = doc.clone();
    blank.checksum = String::new();
    let canonical = serde_json::to_string(&blank)?;
    Ok(format!("{:08x}", crc32fast::hash(canonical.as_bytes())))
}

/// Serialize a surrogate (tagged with its source model name) to JSON bytes.
pub fn surrogate_to_json(surr: &TrainedSurrogate, model: &str) -> Result<Vec<u8>, ArtifactError> {
    let mut doc = to_doc(surr, model);
    doc.checksum = checksum_of(&doc)?;
    Ok(serde_json::to_vec(&doc)?)
}

/// Parse and verify JSON bytes into a surrogate plus its model name.
pub fn surrogate_from_json(bytes: &[u8]) -> Result<(TrainedSurrogate, String), ArtifactError> {
    let doc: ArtifactFile = serde_json::from_slice(bytes)?;
    if doc.format != ARTIFACT_FORMAT {
        return Err(ArtifactError::FormatMismatch(doc.format));
    }
    if doc.version != ARTIFACT_VERSION {
        return Err(ArtifactError::VersionMismatch { found: doc.version });
    }
    let computed = checksum_of(&doc)?;
    if computed != doc.checksum {
        return Err(ArtifactError::ChecksumMismatch { stored: doc.checksum, computed });
    }
    Ok((from_doc(&doc)?, doc.model.clone()))
}

pub fn save_surrogate(
    surr: &TrainedSurrogate,
    model: &str,
    path: &Path,
) -> Result<(), ArtifactError> {
    fs::write(path, surrogate_to_json(surr, model)?)?;
    Ok(())
}

pub fn load_surrogate(path: &Path) -> Result<(TrainedSurrogate, String), ArtifactError> {
    surrogate_from_json(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctesn::{train_npctesn, ReservoirSpec, TrainOptions};
    use crate::models;

    fn small_surrogate() -> TrainedSurrogate {
        let model = models::robertson();
        let spec = ReservoirSpec::with_defaults(3, 42);
        let opts = TrainOptions { n_train: 10, seed: 3, ..TrainOptions::for_model(&model) };
        train_npctesn(&model, &model.param_space, &spec, &opts).unwrap()
    }

    #[test]
    fn round_trip_predictions_bit_identical() {
        let surr = small_surrogate();
        let bytes = surrogate_to_json(&surr, "robertson").unwrap();
        let (back, model) = surrogate_from_json(&bytes).unwrap();
        assert_eq!(model, "robertson");
        let p = [0.0405, 2.95e7, 1.01e4];
        let a = surr.predict(&p, &surr.grid_times).unwrap();
        let b = back.predict(&p, &back.grid_times).unwrap();
        assert_eq!(a.trajectory, b.trajectory);
    }

    #[test]
    fn serialization_is_deterministic() {
        let surr = small_surrogate();
        let a = surrogate_to_json(&surr, "robertson").unwrap();
        let b = surrogate_to_json(&surr, "robertson").unwrap();
        assert_eq!(a, b);
        // and a re-serialized loaded artifact is byte-identical too
        let (back, _) = surrogate_from_json(&a).unwrap();
        let c = surrogate_to_json(&back, "robertson").unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn tampered_artifact_rejected() {
        let surr = small_surrogate();
        let bytes = surrogate_to_json(&surr, "robertson").unwrap();
        let text = String::from_utf8(bytes).unwrap();
        // corrupt one stored value
        let tampered = text.replacen("0.04", "0.05", 1);
        assert_ne!(text, tampered, "tamper target must exist");
        match surrogate_from_json(tampered.as_bytes()) {
            Err(ArtifactError::ChecksumMismatch { .. }) => {}
            other => panic!("expected checksum failure, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn wrong_version_rejected() {
        let surr = small_surrogate();
        let bytes = surrogate_to_json(&surr, "robertson").unwrap();
        let text = String::from_utf8(bytes).unwrap().replace("\"version\":1", "\"version\":2");
        assert!(matches!(
            surrogate_from_json(text.as_bytes()),
            Err(ArtifactError::VersionMismatch { found: 2 })
        ));
    }

    #[test]
    fn wrong_format_rejected() {
        let surr = small_surrogate();
        let bytes = surrogate_to_json(&surr, "robertson").unwrap();
        let text =
            String::from_utf8(bytes).unwrap().replace(ARTIFACT_FORMAT, "something-else");
        assert!(matches!(
            surrogate_from_json(text.as_bytes()),
            Err(ArtifactError::FormatMismatch(_))
        ));
    }
}
