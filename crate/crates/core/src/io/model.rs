//! Trained-model files.
//!
//! Layout, all little-endian: magic `P3MD`, `u32` version, `u8` family tag
//! (1 LDA, 2 SVM, 3 lasso), `u64` feature dimension `d`, then `f64`s:
//!
//! - LDA: shrinkage, ln p0, ln p1, mu0 (d), mu1 (d), sigma_inv (d x d, row-major)
//! - SVM: C, b, w (d)
//! - lasso: lambda, beta0, beta (d)

use std::path::Path;

use nalgebra::DMatrix;

use super::{atomic_write, read_file};
use crate::classify::{BayesLdaModel, LassoGlmModel, LinearSvmModel, TrainedClassifier};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"P3MD";
pub const MODEL_VERSION: u32 = 1;

pub fn encode_model(model: &TrainedClassifier) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    let (tag, values): (u8, Vec<f64>) = match model {
        TrainedClassifier::BayesLda(m) => {
            let mut v = vec![m.shrinkage, m.log_priors.0, m.log_priors.1];
            v.extend(&m.mu0);
            v.extend(&m.mu1);
            let d = m.dim();
            for i in 0..d {
                for j in 0..d {
                    v.push(m.sigma_inv[(i, j)]);
                }
            }
            (1, v)
        }
        TrainedClassifier::Svm(m) => {
            let mut v = vec![m.c, m.b];
            v.extend(&m.w);
            (2, v)
        }
        TrainedClassifier::LassoGlm(m) => {
            let mut v = vec![m.lambda, m.beta0];
            v.extend(&m.beta);
            (3, v)
        }
    };
    out.push(tag);
    out.extend_from_slice(&(model.dim() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<TrainedClassifier> {
    const PREFIX: usize = 4 + 4 + 1 + 8;
    if bytes.len() < PREFIX {
        return Err(Error::TruncatedPayload {
            expected: PREFIX,
            found: bytes.len(),
        });
    }
    if &bytes[..4] != MODEL_MAGIC {
        return Err(Error::MalformedHeader {
            line: 0,
            message: "not a model file".into(),
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != MODEL_VERSION {
        return Err(Error::FormatVersionUnsupported {
            found: version.to_string(),
        });
    }
    let tag = bytes[8];
    let d = u64::from_le_bytes(bytes[9..17].try_into().expect("8 bytes")) as usize;
    let count = match tag {
        1 => 3 + 2 * d + d * d,
        2 | 3 => 2 + d,
        other => return Err(Error::UnknownFamily(format!("model tag {other}"))),
    };
    let payload = &bytes[PREFIX..];
    if payload.len() != count * 8 {
        return Err(Error::TruncatedPayload {
            expected: count * 8,
            found: payload.len(),
        });
    }
    let v: Vec<f64> = payload
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();
    Ok(match tag {
        1 => {
            let mu0 = v[3..3 + d].to_vec();
            let mu1 = v[3 + d..3 + 2 * d].to_vec();
            let sigma_inv = DMatrix::from_row_slice(d, d, &v[3 + 2 * d..]);
            TrainedClassifier::BayesLda(BayesLdaModel::from_parts(
                mu0,
                mu1,
                sigma_inv,
                (v[1], v[2]),
                v[0],
            )?)
        }
        2 => TrainedClassifier::Svm(LinearSvmModel {
            c: v[0],
            b: v[1],
            w: v[2..].to_vec(),
        }),
        _ => TrainedClassifier::LassoGlm(LassoGlmModel {
            lambda: v[0],
            beta0: v[1],
            beta: v[2..].to_vec(),
        }),
    })
}

pub fn write_model(model: &TrainedClassifier, path: &Path) -> Result<()> {
    atomic_write(path, &encode_model(model))
}

pub fn read_model(path: &Path) -> Result<TrainedClassifier> {
    decode_model(&read_file(path)?)
}
