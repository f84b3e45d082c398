//! Epoch container: a line-oriented text header followed by raw
//! little-endian `f64` samples, epoch-major, then channel, then time.
//!
//! ```text
//! P300EPOCHS 1
//! dataset=synthetic
//! sample_rate_hz=128
//! paradigm=six_class
//! stage=raw
//! reference=...
//! channels=Fz,Cz,Pz,Oz
//! time_samples=128
//! epoch_count=2
//! e 3 1 0 0          (class, is_target, run, trial)
//! e 1 0 0 0
//! end_header
//! <payload>
//! ```

use std::path::Path;

use super::{atomic_write, read_file};
use crate::dataset::{Epoch, EpochSet};
use crate::error::{Error, Result};

pub const CONTAINER_MAGIC: &str = "P300EPOCHS";
pub const CONTAINER_VERSION: u32 = 1;
const END: &str = "end_header";

/// An epoch set plus the tag of the dataset it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochContainer {
    pub dataset: String,
    pub set: EpochSet,
}

fn one_line(s: &str) -> String {
    s.replace(['\n', '\r'], " ")
}

pub fn encode_container(c: &EpochContainer) -> Result<Vec<u8>> {
    let set = &c.set;
    set.validate()?;
    let n_times = set.n_times();
    let mut header = String::new();
    header.push_str(&format!("{CONTAINER_MAGIC} {CONTAINER_VERSION}\n"));
    header.push_str(&format!("dataset={}\n", one_line(&c.dataset)));
    header.push_str(&format!("sample_rate_hz={}\n", set.sample_rate_hz));
    header.push_str(&format!("paradigm={}\n", set.paradigm.as_str()));
    header.push_str(&format!("stage={}\n", set.stage.as_str()));
    header.push_str(&format!("reference={}\n", one_line(&set.reference_note)));
    header.push_str(&format!("channels={}\n", set.channel_labels.join(",")));
    header.push_str(&format!("time_samples={n_times}\n"));
    header.push_str(&format!("epoch_count={}\n", set.epochs.len()));
    for e in &set.epochs {
        header.push_str(&format!(
            "e {} {} {} {}\n",
            e.stimulus_class,
            u8::from(e.is_target),
            e.run_id,
            e.sequence_index
        ));
    }
    header.push_str(END);
    header.push('\n');

    let mut out = header.into_bytes();
    out.reserve(set.epochs.len() * set.channel_labels.len() * n_times * 8);
    for e in &set.epochs {
        for row in &e.data {
            for v in row {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

struct HeaderLines<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> HeaderLines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        self.lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or(Error::MalformedHeader {
                line: 0,
                message: "header ends early".into(),
            })
    }

    fn field(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (line, text) = self.next()?;
        match text.split_once('=') {
            Some((k, v)) if k == key => Ok((line, v)),
            _ => Err(Error::MalformedHeader {
                line,
                message: format!("expected {key}=..., got {text:?}"),
            }),
        }
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (line, v) = self.field(key)?;
        v.parse().map_err(|_| Error::MalformedHeader {
            line,
            message: format!("bad {key} value {v:?}"),
        })
    }
}

pub fn decode_container(bytes: &[u8]) -> Result<EpochContainer> {
    let marker = format!("\n{END}\n");
    let end = bytes
        .windows(marker.len())
        .position(|w| w == marker.as_bytes())
        .ok_or(Error::MalformedHeader {
            line: 0,
            message: format!("no {END} line"),
        })?;
    let header_len = end + marker.len();
    let header = std::str::from_utf8(&bytes[..end]).map_err(|e| Error::MalformedHeader {
        line: 0,
        message: format!("header is not UTF-8: {e}"),
    })?;
    let mut h = HeaderLines {
        lines: header.lines().enumerate(),
    };

    let (line, first) = h.next()?;
    let version = match first.split_once(' ') {
        Some((CONTAINER_MAGIC, v)) => v.trim(),
        _ => {
            return Err(Error::MalformedHeader {
                line,
                message: format!("missing {CONTAINER_MAGIC} signature"),
            })
        }
    };
    if version != CONTAINER_VERSION.to_string() {
        return Err(Error::FormatVersionUnsupported {
            found: version.to_string(),
        });
    }
    let dataset = h.field("dataset")?.1.to_string();
    let sample_rate_hz: f64 = h.parsed("sample_rate_hz")?;
    let paradigm = h.parsed("paradigm")?;
    let stage = h.parsed("stage")?;
    let reference_note = h.field("reference")?.1.to_string();
    let (_, chan) = h.field("channels")?;
    let channel_labels: Vec<String> = if chan.is_empty() {
        Vec::new()
    } else {
        chan.split(',').map(str::to_string).collect()
    };
    let n_times: usize = h.parsed("time_samples")?;
    let n_epochs: usize = h.parsed("epoch_count")?;

    let mut meta = Vec::with_capacity(n_epochs);
    for _ in 0..n_epochs {
        let (line, text) = h.next()?;
        let bad = |message: String| Error::MalformedHeader { line, message };
        let parts: Vec<&str> = text.split(' ').collect();
        if parts.len() != 5 || parts[0] != "e" {
            return Err(bad(format!("expected epoch line, got {text:?}")));
        }
        let class: u8 = parts[1].parse().map_err(|_| bad("bad stimulus class".into()))?;
        let target = match parts[2] {
            "0" => false,
            "1" => true,
            _ => return Err(bad("is_target must be 0 or 1".into())),
        };
        let run: u64 = parts[3].parse().map_err(|_| bad("bad run id".into()))?;
        let seq: u32 = parts[4].parse().map_err(|_| bad("bad trial index".into()))?;
        meta.push((class, target, run, seq));
    }
    if let Some((line, text)) = h.lines.next() {
        return Err(Error::MalformedHeader {
            line: line + 1,
            message: format!("unexpected line {text:?} before {END}"),
        });
    }

    let payload = &bytes[header_len..];
    let row_bytes = n_times * 8;
    let expected = n_epochs * channel_labels.len() * row_bytes;
    if payload.len() != expected {
        if row_bytes == 0 || !payload.len().is_multiple_of(row_bytes) {
            return Err(Error::TruncatedPayload {
                expected,
                found: payload.len(),
            });
        }
        return Err(Error::CountMismatch(format!(
            "header declares {n_epochs} epochs x {} channels x {n_times} samples, payload holds {} rows",
            channel_labels.len(),
            payload.len() / row_bytes
        )));
    }

    let mut chunks = payload.chunks_exact(8).map(|b| {
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        f64::from_le_bytes(a)
    });
    let epochs = meta
        .into_iter()
        .map(|(stimulus_class, is_target, run_id, sequence_index)| Epoch {
            data: (0..channel_labels.len())
                .map(|_| chunks.by_ref().take(n_times).collect())
                .collect(),
            sample_rate_hz,
            stimulus_class,
            is_target,
            channel_labels: channel_labels.clone(),
            run_id,
            sequence_index,
        })
        .collect();
    let set = EpochSet {
        sample_rate_hz,
        channel_labels,
        paradigm,
        stage,
        reference_note,
        epochs,
    };
    set.validate()?;
    Ok(EpochContainer { dataset, set })
}

pub fn write_container(c: &EpochContainer, path: &Path) -> Result<()> {
    atomic_write(path, &encode_container(c)?)
}

pub fn read_container(path: &Path) -> Result<EpochContainer> {
    decode_container(&read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Paradigm, Stage};

    fn sample() -> EpochContainer {
        let labels: Vec<String> = ["Fz", "Cz"].iter().map(|s| s.to_string()).collect();
        let epochs = (0..3)
            .map(|i| Epoch {
                data: vec![vec![i as f64, -0.5, f64::MIN_POSITIVE], vec![1e300, -0.0, 3.25]],
                sample_rate_hz: 3.0,
                stimulus_class: i as u8,
                is_target: i == 1,
                channel_labels: labels.clone(),
                run_id: 7,
                sequence_index: i,
            })
            .collect();
        EpochContainer {
            dataset: "unit".into(),
            set: EpochSet {
                sample_rate_hz: 3.0,
                channel_labels: labels,
                paradigm: Paradigm::SixClass,
                stage: Stage::Raw,
                reference_note: "left\nmastoid".into(),
                epochs,
            },
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = sample();
        let bytes = encode_container(&c).unwrap();
        let back = decode_container(&bytes).unwrap();
        assert_eq!(back.set.epochs, c.set.epochs);
        assert_eq!(back.set.reference_note, "left mastoid");
        assert_eq!(encode_container(&back).unwrap(), bytes);
        assert!(back.set.epochs[0].data[1][1].is_sign_negative());
    }

    #[test]
    fn payload_length_errors() {
        let bytes = encode_container(&sample()).unwrap();
        assert!(matches!(
            decode_container(&bytes[..bytes.len() - 1]),
            Err(Error::TruncatedPayload { .. })
        ));
        // Drop one whole channel row.
        assert!(matches!(
            decode_container(&bytes[..bytes.len() - 24]),
            Err(Error::CountMismatch(_))
        ));
    }

    #[test]
    fn header_errors_name_the_line() {
        let text = String::from_utf8_lossy(&encode_container(&sample()).unwrap()).into_owned();
        let v2 = text.replacen("P300EPOCHS 1", "P300EPOCHS 2", 1);
        assert!(matches!(
            decode_container(v2.as_bytes()),
            Err(Error::FormatVersionUnsupported { found }) if found == "2"
        ));
        let bad = text.replacen("time_samples=3", "time_samples=x", 1);
        assert!(matches!(
            decode_container(bad.as_bytes()),
            Err(Error::MalformedHeader { line: 8, .. })
        ));
        let bad = text.replacen("e 1 1 7 1", "e 1 2 7 1", 1);
        assert!(matches!(
            decode_container(bad.as_bytes()),
            Err(Error::MalformedHeader { line: 11, .. })
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.p3c");
        let c = sample();
        write_container(&c, &path).unwrap();
        assert_eq!(read_container(&path).unwrap().set.epochs, c.set.epochs);
    }
}
