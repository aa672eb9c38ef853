//! Versioned JSON model files.
//!
//! Floats are written as decimal with 17 significant digits, which is enough
//! for a lossless f64 round-trip, so deserialize(serialize(model)) predicts
//! bit-identically.

use crate::error::{Error, Result};
use crate::model::FeatureMask;
use crate::svm::SvmModel;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    kernel: String,
    gamma: f64,
    nu: f64,
    bias: f64,
    rho: f64,
    feature_mask: u8,
    label_map: LabelMap,
    support_vectors: Vec<Vec<f64>>,
    dual_coeffs: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelMap {
    #[serde(rename = "+1")]
    positive: String,
    #[serde(rename = "-1")]
    negative: String,
}

/// serde_json formatter that renders every f64 with 17 significant digits.
struct FullPrecision;

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serializes a model to the versioned JSON document.
pub fn write_model<W: Write>(out: &mut W, model: &SvmModel) -> Result<()> {
    if model.support_vectors.is_empty() {
        return Err(Error::ModelSchema("model has no support vectors".into()));
    }
    let file = ModelFile {
        format: "catmine-model".to_string(),
        version: MODEL_VERSION,
        kernel: "rbf".to_string(),
        gamma: model.gamma,
        nu: model.nu,
        bias: model.bias,
        rho: model.rho,
        feature_mask: model.feature_mask.bits(),
        label_map: LabelMap {
            positive: "interesting".to_string(),
            negative: "non_interesting".to_string(),
        },
        support_vectors: model.support_vectors.clone(),
        dual_coeffs: model.dual_coeffs.clone(),
    };
    let mut serializer = serde_json::Serializer::with_formatter(&mut *out, FullPrecision);
    file.serialize(&mut serializer)
        .map_err(|e| Error::ModelSchema(e.to_string()))?;
    out.write_all(b"\n")
        .map_err(|e| Error::ModelSchema(e.to_string()))?;
    Ok(())
}

pub fn save_model(path: &Path, model: &SvmModel) -> Result<()> {
    let mut buf = Vec::new();
    write_model(&mut buf, model)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Parses and validates a model document.
pub fn read_model(text: &str) -> Result<SvmModel> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::ModelSchema(e.to_string()))?;
    if file.format != "catmine-model" {
        return Err(Error::ModelSchema(format!(
            "unexpected format tag {:?}",
            file.format
        )));
    }
    if file.version != MODEL_VERSION {
        return Err(Error::ModelVersion {
            found: file.version,
            expected: MODEL_VERSION,
        });
    }
    if file.kernel != "rbf" {
        return Err(Error::ModelSchema(format!("unknown kernel {:?}", file.kernel)));
    }
    let mask = FeatureMask::new(file.feature_mask)
        .map_err(|_| Error::ModelSchema(format!("bad feature mask {}", file.feature_mask)))?;
    if file.support_vectors.is_empty() {
        return Err(Error::ModelSchema("model has no support vectors".into()));
    }
    if file.support_vectors.len() != file.dual_coeffs.len() {
        return Err(Error::ModelSchema(format!(
            "{} support vectors but {} dual coefficients",
            file.support_vectors.len(),
            file.dual_coeffs.len()
        )));
    }
    let dim = mask.len();
    if file.support_vectors.iter().any(|sv| sv.len() != dim) {
        return Err(Error::ModelSchema(format!(
            "support vector width does not match the {dim}-slot mask"
        )));
    }
    if !crate::svm::positive_finite(file.gamma) {
        return Err(Error::ModelSchema("gamma must be positive".into()));
    }
    if !(file.nu > 0.0 && file.nu <= 1.0) {
        return Err(Error::ModelSchema("nu must be in (0, 1]".into()));
    }
    Ok(SvmModel {
        support_vectors: file.support_vectors,
        dual_coeffs: file.dual_coeffs,
        bias: file.bias,
        rho: file.rho,
        gamma: file.gamma,
        nu: file.nu,
        feature_mask: mask,
    })
}

pub fn load_model(path: &Path) -> Result<SvmModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_model(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> SvmModel {
        SvmModel {
            support_vectors: vec![vec![0.1, 1.0 / 3.0], vec![0.9, 2.0f64.sqrt() / 2.0]],
            dual_coeffs: vec![0.25, -0.25],
            bias: -0.017_543_2,
            rho: 0.121_212_121_212,
            gamma: 3e-4,
            nu: 0.45,
            feature_mask: FeatureMask::new(0b11).unwrap(),
        }
    }

    #[test]
    fn roundtrip_is_bit_identical() {
        let m = model();
        let mut buf = Vec::new();
        write_model(&mut buf, &m).unwrap();
        let parsed = read_model(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(parsed, m);
        // decision values identical to the last bit on a probe set
        for probe in [[0.0, 0.0], [0.5, 0.25], [1.0, 1.0]] {
            let a = m.decision_raw(&probe).unwrap();
            let b = parsed.decision_raw(&probe).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_bad_documents() {
        let mut empty = model();
        empty.support_vectors.clear();
        empty.dual_coeffs.clear();
        let mut buf = Vec::new();
        assert!(write_model(&mut buf, &empty).is_err());

        assert!(read_model("{\"truncated\":").is_err());

        let mut buf = Vec::new();
        write_model(&mut buf, &model()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let wrong_version = text.replace("\"version\":1", "\"version\":99");
        assert!(matches!(
            read_model(&wrong_version),
            Err(Error::ModelVersion { found: 99, .. })
        ));
    }

    #[test]
    fn serialization_is_deterministic() {
        let m = model();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_model(&mut a, &m).unwrap();
        write_model(&mut b, &m).unwrap();
        assert_eq!(a, b);
    }
}
