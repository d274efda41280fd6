use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::BinaryMask;
use crate::metrics::seg_metrics;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecisionSource {
    Oracle,
    Human,
}

/// One line of `decisions.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationDecision {
    pub sample_id: String,
    pub accepted: bool,
    pub source: DecisionSource,
    pub ts: String,
}

impl CurationDecision {
    pub fn new(sample_id: impl Into<String>, accepted: bool, source: DecisionSource) -> Self {
        Self {
            sample_id: sample_id.into(),
            accepted,
            source,
            ts: now_iso8601(),
        }
    }
}

pub fn now_iso8601() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum CurationMode {
    Oracle { iou_threshold: f64 },
    /// Decisions are read from `decisions.jsonl` in each iteration directory.
    Human,
}

impl Default for CurationMode {
    fn default() -> Self {
        CurationMode::Oracle { iou_threshold: 0.8 }
    }
}

/// Accept iff IoU with gt is at least `threshold`.
pub fn oracle_accepts(mask: &BinaryMask, gt: &BinaryMask, threshold: f64) -> Result<bool> {
    Ok(seg_metrics(mask, gt)?.iou >= threshold)
}

/// Flip exactly `round(rate · n)` decisions chosen by a seeded draw.
pub fn inject_noise(decisions: &mut [CurationDecision], rate: f64, seed: u64) -> Vec<usize> {
    let k = (rate * decisions.len() as f64).round() as usize;
    let mut picks = Rng::new(seed).sample_indices(decisions.len(), k);
    picks.sort_unstable();
    for &i in &picks {
        decisions[i].accepted = !decisions[i].accepted;
    }
    picks
}

/// Oracle decisions for `(id, mask, gt)` triples, then noise injection.
pub fn curate_oracle(
    items: &[(&str, &BinaryMask, &BinaryMask)],
    threshold: f64,
    noise_rate: f64,
    seed: u64,
) -> Result<Vec<CurationDecision>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::config("iou_threshold", format!("{threshold} outside (0, 1)")));
    }
    if !(0.0..=0.3).contains(&noise_rate) {
        return Err(Error::config("noise_injection_rate", format!("{noise_rate} outside [0, 0.3]")));
    }
    let mut out = items
        .iter()
        .map(|(id, m, g)| Ok(CurationDecision::new(*id, oracle_accepts(m, g, threshold)?, DecisionSource::Oracle)))
        .collect::<Result<Vec<_>>>()?;
    if noise_rate > 0.0 {
        inject_noise(&mut out, noise_rate, seed);
    }
    Ok(out)
}

/// Append decisions atomically: the existing file plus the new lines is
/// written to a temporary file which then replaces the original.
pub fn append_decisions(path: &Path, decisions: &[CurationDecision]) -> Result<()> {
    let mut body = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(Error::io(path, e)),
    };
    if !body.is_empty() && !body.ends_with(b"\n") {
        body.push(b'\n');
    }
    for d in decisions {
        serde_json::to_writer(&mut body, d).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        body.push(b'\n');
    }
    let tmp = path.with_extension("jsonl.tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&body).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_decisions(path: &Path, decisions: &[CurationDecision]) -> Result<()> {
    if path.exists() {
        fs::remove_file(path).map_err(|e| Error::io(path, e))?;
    }
    append_decisions(path, decisions)
}

/// All decisions in file order; `None` when the file does not exist.
pub fn read_decisions(path: &Path) -> Result<Option<Vec<CurationDecision>>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(Error::io(path, e)),
    };
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|e| Error::Json {
                path: path.to_path_buf(),
                source: e,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Latest decision per sample id.
pub fn latest_decisions(decisions: &[CurationDecision]) -> HashMap<String, CurationDecision> {
    let mut map = HashMap::new();
    for d in decisions {
        map.insert(d.sample_id.clone(), d.clone());
    }
    map
}
