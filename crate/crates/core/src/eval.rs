//! Batch evaluation of a template store against a labeled corpus, with
//! per-axis accuracy breakdowns for the three perturbation dimensions.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio::{extract_features, load_audio, AudioClip};
use crate::endpoint::endpoint_segments;
use crate::error::{Error, Result};
use crate::recognizer::{recognize_segment, RecognizerConfig, TemplateStore};
use crate::synth::{manifest_from_tsv, CorpusItem, ManifestEntry};

/// Scores within this of the top are credited as ties. Homophone labels
/// share identical templates, so the truth label can trail the winner by
/// rounding noise alone.
pub const TIE_CREDIT: f64 = 1e-12;

/// Accuracy bucket for one value of one perturbation axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisCell {
    pub value: f64,
    pub correct: usize,
    pub total: usize,
}

impl AxisCell {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// Outcome of one evaluation pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub filter_enabled: bool,
    pub total: usize,
    pub correct: usize,
    /// Clips that did not endpoint to exactly one segment (counted wrong).
    pub unsegmented: usize,
    pub by_stretch: Vec<AxisCell>,
    pub by_gain: Vec<AxisCell>,
    pub by_tilt: Vec<AxisCell>,
}

impl EvalReport {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

fn bump(cells: &mut Vec<AxisCell>, value: f64, correct: bool) {
    match cells.iter_mut().find(|c| c.value == value) {
        Some(c) => {
            c.total += 1;
            c.correct += usize::from(correct);
        }
        None => cells.push(AxisCell {
            value,
            correct: usize::from(correct),
            total: 1,
        }),
    }
}

/// Score one labeled clip. Returns whether the truth label won top rank,
/// crediting exact-tie losses within [`TIE_CREDIT`], or None when the clip
/// does not endpoint to one segment.
pub fn eval_clip(
    clip: &AudioClip,
    truth: &str,
    store: &TemplateStore,
    cfg: &RecognizerConfig,
) -> Result<Option<bool>> {
    let frames = extract_features(clip, &cfg.framing);
    let segments = endpoint_segments(&frames, &cfg.endpoint);
    if segments.len() != 1 {
        return Ok(None);
    }
    let seg = &segments[0];
    let result = recognize_segment(seg, store, cfg)?;
    let top = result.hypotheses[0].score;
    let truth_score = result
        .hypotheses
        .iter()
        .find(|h| h.word == truth)
        .map(|h| h.score);
    Ok(Some(match truth_score {
        Some(s) => s >= top - TIE_CREDIT,
        None => false,
    }))
}

/// Evaluate an in-memory corpus.
pub fn run_eval(
    store: &TemplateStore,
    items: &[CorpusItem],
    cfg: &RecognizerConfig,
) -> Result<EvalReport> {
    let mut report = EvalReport {
        filter_enabled: cfg.filter_enabled,
        total: 0,
        correct: 0,
        unsegmented: 0,
        by_stretch: Vec::new(),
        by_gain: Vec::new(),
        by_tilt: Vec::new(),
    };
    for item in items {
        let outcome = eval_clip(&item.clip, &item.entry.label, store, cfg)?;
        let correct = outcome.unwrap_or(false);
        if outcome.is_none() {
            report.unsegmented += 1;
        }
        report.total += 1;
        report.correct += usize::from(correct);
        bump(&mut report.by_stretch, item.entry.stretch, correct);
        bump(&mut report.by_gain, item.entry.gain_db, correct);
        bump(&mut report.by_tilt, item.entry.tilt_db_per_band, correct);
    }
    Ok(report)
}

/// Evaluate a corpus on disk: a manifest next to its clip directory.
pub fn run_eval_dir(
    store: &TemplateStore,
    manifest_path: &Path,
    clip_dir: &Path,
    cfg: &RecognizerConfig,
) -> Result<EvalReport> {
    let manifest = std::fs::read_to_string(manifest_path)?;
    let entries = manifest_from_tsv(&manifest)?;
    if entries.is_empty() {
        return Err(Error::Corpus("manifest lists no clips".into()));
    }
    let items: Vec<CorpusItem> = entries
        .into_iter()
        .map(|entry| {
            let clip = load_audio(&clip_dir.join(&entry.file))?;
            Ok(CorpusItem {
                clip,
                entry,
                clipped_samples: 0,
            })
        })
        .collect::<Result<_>>()?;
    run_eval(store, &items, cfg)
}

/// Render the per-axis tables as aligned text.
pub fn report_to_text(report: &EvalReport) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "filter: {}  accuracy: {:.4} ({}/{})  unsegmented: {}",
        if report.filter_enabled { "on" } else { "off" },
        report.accuracy(),
        report.correct,
        report.total,
        report.unsegmented
    );
    for (name, cells) in [
        ("stretch", &report.by_stretch),
        ("gain_db", &report.by_gain),
        ("tilt", &report.by_tilt),
    ] {
        let _ = writeln!(out, "  by {name}:");
        for c in cells {
            let _ = writeln!(
                out,
                "    {:>6} -> {:.4} ({}/{})",
                c.value,
                c.accuracy(),
                c.correct,
                c.total
            );
        }
    }
    out
}

/// Mappings for `ManifestEntry` consumers that only need labels.
impl ManifestEntry {
    pub fn is_identity(&self) -> bool {
        self.stretch == 1.0 && self.gain_db == 0.0 && self.tilt_db_per_band == 0.0
    }
}
