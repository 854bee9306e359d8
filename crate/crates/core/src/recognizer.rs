//! Template enrollment and isolated-word recognition. Per-frame
//! similarities exp(-c) are aggregated along the alignment path by the
//! product t-norm and length-normalized, so a word score is the geometric
//! mean of its step similarities: score = exp(-normalized DTW cost).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio::{extract_features, AudioClip, FeatureFrame, FramingConfig};
use crate::dtw::{dtw_distance, BandConstraint};
use crate::endpoint::{endpoint_segments, EndpointConfig, Segment};
use crate::error::{Error, Result};
use crate::filter::{filter_segment, FilterParams};
use crate::fuzzy::VariableSet;

pub const STORE_SCHEMA_VERSION: u32 = 1;

/// One enrolled exemplar of a word.
///
/// The raw extraction-time frames are kept alongside the normalized form:
/// whenever the lexicon mean moves, every normalized sequence is re-derived
/// by a single filter pass from raw, so no template accumulates correction
/// history and identical clips always yield identical templates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub word: String,
    /// Filter-normalized feature sequence.
    pub frames: Vec<FeatureFrame>,
    /// Frame count of `frames`; the second scoring pass uses it as the
    /// speed reference.
    pub duration_frames: usize,
    /// Pre-filter feature sequence of the enrolled segment.
    pub raw_frames: Vec<FeatureFrame>,
    pub source: String,
}

/// The lexicon: every enrolled template, possibly several per word.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TemplateStore {
    pub templates: Vec<Template>,
}

/// On-disk form, versioned so format drift fails loudly.
#[derive(Serialize, Deserialize)]
struct StoreFile {
    schema_version: u32,
    templates: Vec<Template>,
}

impl TemplateStore {
    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// Mean raw segment duration in frames; the enrollment and first-pass
    /// speed reference. Raw durations keep the reference independent of
    /// the normalization it feeds.
    pub fn mean_duration(&self) -> Option<f64> {
        if self.templates.is_empty() {
            return None;
        }
        let sum: usize = self.templates.iter().map(|t| t.raw_frames.len()).sum();
        Some(sum as f64 / self.templates.len() as f64)
    }

    /// Mean raw segment log-energy in dB: the enrolled speaking level. A
    /// segment's emphasis offset is measured against this anchor, so a
    /// uniformly loud or quiet clip profiles as emphasized rather than
    /// neutral.
    pub fn mean_energy(&self) -> Option<f64> {
        if self.templates.is_empty() {
            return None;
        }
        let sum: f64 = self
            .templates
            .iter()
            .map(|t| {
                t.raw_frames.iter().map(|f| f.log_energy).sum::<f64>() / t.raw_frames.len() as f64
            })
            .sum();
        Some(sum / self.templates.len() as f64)
    }

    /// Distinct words, in first-enrollment order.
    pub fn words(&self) -> Vec<&str> {
        let mut words: Vec<&str> = Vec::new();
        for t in &self.templates {
            if !words.contains(&t.word.as_str()) {
                words.push(&t.word);
            }
        }
        words
    }

    pub fn contains_word(&self, word: &str) -> bool {
        let needle = word.to_lowercase();
        self.templates.iter().any(|t| t.word == needle)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = StoreFile {
            schema_version: STORE_SCHEMA_VERSION,
            templates: self.templates.clone(),
        };
        let text = serde_json::to_string(&file)
            .map_err(|e| Error::StoreFormat(format!("serialize: {e}")))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TemplateStore> {
        let text = fs::read_to_string(path)?;
        let file: StoreFile = serde_json::from_str(&text)
            .map_err(|e| Error::StoreFormat(format!("{}: {e}", path.display())))?;
        if file.schema_version != STORE_SCHEMA_VERSION {
            return Err(Error::StoreFormat(format!(
                "{}: schema version {} (this build reads {})",
                path.display(),
                file.schema_version,
                STORE_SCHEMA_VERSION
            )));
        }
        Ok(TemplateStore {
            templates: file.templates,
        })
    }
}

/// Thresholds and pipeline settings for enrollment and recognition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognizerConfig {
    pub framing: FramingConfig,
    pub endpoint: EndpointConfig,
    pub vars: VariableSet,
    pub filter: FilterParams,
    pub filter_enabled: bool,
    /// Sakoe-Chiba half-width override; None picks max(len)/10 per pair.
    pub band_half_width: Option<usize>,
    /// Top scores closer than this are ambiguous (homophones).
    pub epsilon_ambiguous: f64,
    /// Confidence margin below this requests confirmation.
    pub theta_confirm: f64,
    /// Top score below this requests confirmation.
    pub confirm_score: f64,
    /// Top score below this flags out-of-vocabulary.
    pub s_oov: f64,
}

impl Default for RecognizerConfig {
    fn default() -> Self {
        Self {
            framing: FramingConfig::default(),
            endpoint: EndpointConfig::default(),
            vars: VariableSet::default(),
            filter: FilterParams::default(),
            filter_enabled: true,
            band_half_width: None,
            epsilon_ambiguous: 0.01,
            theta_confirm: 0.1,
            confirm_score: 0.5,
            s_oov: 0.2,
        }
    }
}

impl RecognizerConfig {
    fn band_for(&self, n: usize, m: usize) -> BandConstraint {
        match self.band_half_width {
            Some(h) => BandConstraint::HalfWidth(h),
            None => BandConstraint::auto_for(n, m),
        }
    }
}

/// One ranked hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub word: String,
    pub score: f64,
}

/// Recognition outcome for one endpointed segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionResult {
    pub segment: usize,
    /// Sorted by score descending, ties broken by label.
    pub hypotheses: Vec<Hypothesis>,
    /// Top-1 minus top-2 word score; 1.0 when only one word is enrolled.
    pub confidence: f64,
    pub ambiguous: bool,
    pub needs_confirmation: bool,
    pub out_of_vocabulary: bool,
}

impl RecognitionResult {
    pub fn top(&self) -> &Hypothesis {
        &self.hypotheses[0]
    }
}

/// Similarity of a segment to one template: the geometric mean of
/// per-step similarities along the optimal alignment path.
pub fn match_score(
    segment_frames: &[FeatureFrame],
    template: &Template,
    band: BandConstraint,
) -> Result<f64> {
    let d = dtw_distance(segment_frames, &template.frames, band)?;
    Ok((-d).exp())
}

/// Enroll one word from isolated-word clips, atomically: every clip must
/// endpoint to exactly one segment or nothing is added.
///
/// Each batch moves the lexicon mean, so every template (old and new) is
/// re-derived from raw against the updated mean; the first clip of an
/// empty store is its own reference (v = 0). `sources` are provenance
/// strings stored per clip.
pub fn enroll(
    store: &mut TemplateStore,
    word: &str,
    clips: &[(AudioClip, String)],
    cfg: &RecognizerConfig,
) -> Result<usize> {
    if clips.is_empty() {
        return Err(Error::EmptyInput);
    }
    let word = word.to_lowercase();

    let mut isolated = Vec::with_capacity(clips.len());
    for (clip, source) in clips {
        let frames = extract_features(clip, &cfg.framing);
        let segments = endpoint_segments(&frames, &cfg.endpoint);
        if segments.len() != 1 {
            return Err(Error::EnrollmentNotIsolated {
                clip: source.clone(),
                segments: segments.len(),
            });
        }
        isolated.push((segments.into_iter().next().unwrap(), source.clone()));
    }

    let mut templates = store.templates.clone();
    for (segment, source) in isolated {
        templates.push(Template {
            word: word.clone(),
            frames: Vec::new(),
            duration_frames: 0,
            raw_frames: segment.frames,
            source,
        });
    }
    rebuild_normalized(&mut templates, cfg)?;
    store.templates = templates;
    Ok(clips.len())
}

/// Re-derive every normalized sequence from its raw frames with a single
/// filter pass against the current mean raw duration and enrolled level.
///
/// Normalization is a pure function of (raw segment, lexicon means): no
/// template carries correction history, enrollment order leaves no
/// fingerprint, and identical clips stay bit-identical templates.
fn rebuild_normalized(templates: &mut [Template], cfg: &RecognizerConfig) -> Result<()> {
    let reference =
        templates.iter().map(|t| t.raw_frames.len()).sum::<usize>() as f64 / templates.len() as f64;
    let level = templates
        .iter()
        .map(|t| t.raw_frames.iter().map(|f| f.log_energy).sum::<f64>() / t.raw_frames.len() as f64)
        .sum::<f64>()
        / templates.len() as f64;
    for t in templates {
        if cfg.filter_enabled {
            let seg = Segment {
                start_frame: 0,
                end_frame: t.raw_frames.len(),
                frames: t.raw_frames.clone(),
            };
            let (filtered, _, _) = filter_segment(&seg, reference, level, &cfg.vars, &cfg.filter)?;
            t.frames = filtered.frames;
        } else {
            t.frames = t.raw_frames.clone();
        }
        t.duration_frames = t.frames.len();
    }
    Ok(())
}

/// Score every template against one segment and fold to ranked per-word
/// hypotheses. Returns the hypotheses and the best single template.
fn rank_templates<'s>(
    frames: &[FeatureFrame],
    store: &'s TemplateStore,
    cfg: &RecognizerConfig,
) -> Result<(Vec<Hypothesis>, &'s Template)> {
    let mut best: Option<(f64, &Template)> = None;
    let mut by_word: Vec<Hypothesis> = Vec::new();
    for template in &store.templates {
        let band = cfg.band_for(frames.len(), template.frames.len());
        let score = match_score(frames, template, band)?;
        let better = match best {
            None => true,
            // Deterministic template choice: higher score wins, label
            // breaks exact ties.
            Some((s, t)) => score > s || (score == s && template.word < t.word),
        };
        if better {
            best = Some((score, template));
        }
        match by_word.iter_mut().find(|h| h.word == template.word) {
            Some(h) => h.score = h.score.max(score),
            None => by_word.push(Hypothesis {
                word: template.word.clone(),
                score,
            }),
        }
    }
    by_word.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("scores are finite")
            .then_with(|| a.word.cmp(&b.word))
    });
    Ok((by_word, best.expect("store checked non-empty").1))
}

fn result_from(
    segment: usize,
    hypotheses: Vec<Hypothesis>,
    cfg: &RecognizerConfig,
) -> RecognitionResult {
    let top = hypotheses[0].score;
    let confidence = if hypotheses.len() > 1 {
        top - hypotheses[1].score
    } else {
        1.0
    };
    let ambiguous = hypotheses.len() > 1 && confidence < cfg.epsilon_ambiguous;
    RecognitionResult {
        segment,
        hypotheses,
        confidence,
        ambiguous,
        needs_confirmation: confidence < cfg.theta_confirm || top < cfg.confirm_score,
        out_of_vocabulary: top < cfg.s_oov,
    }
}

/// Recognize every isolated word in a clip.
///
/// Each segment is filtered against the lexicon mean duration, scored
/// against every template, then re-filtered once with the best template's
/// duration as the speed reference and re-scored; the second pass resolves
/// the circularity of not knowing the word's own time base up front.
pub fn recognize(
    clip: &AudioClip,
    store: &TemplateStore,
    cfg: &RecognizerConfig,
) -> Result<Vec<RecognitionResult>> {
    if store.is_empty() {
        return Err(Error::NoTemplates);
    }
    let frames = extract_features(clip, &cfg.framing);
    let segments = endpoint_segments(&frames, &cfg.endpoint);

    let mut results = Vec::with_capacity(segments.len());
    for (id, raw) in segments.iter().enumerate() {
        let result = recognize_segment(raw, store, cfg).map_err(|e| Error::InSegment {
            segment: id,
            source: Box::new(e),
        })?;
        results.push(RecognitionResult {
            segment: id,
            ..result
        });
    }
    Ok(results)
}

/// Recognize from a pre-endpointed segment (already feature-extracted).
/// Used where the caller owns endpointing, e.g. batch evaluation.
///
/// The emphasis anchor is the store's enrolled level, so a uniformly loud
/// or quiet rendition profiles with e != 0 and is pulled back toward the
/// level the templates were spoken at.
pub fn recognize_segment(
    raw: &Segment,
    store: &TemplateStore,
    cfg: &RecognizerConfig,
) -> Result<RecognitionResult> {
    let reference = store.mean_duration().ok_or(Error::NoTemplates)?;
    if !cfg.filter_enabled {
        let (hypotheses, _) = rank_templates(&raw.frames, store, cfg)?;
        return Ok(result_from(0, hypotheses, cfg));
    }
    let level = store.mean_energy().ok_or(Error::NoTemplates)?;
    let (first, _, _) = filter_segment(raw, reference, level, &cfg.vars, &cfg.filter)?;
    let (_, best) = rank_templates(&first.frames, store, cfg)?;
    let (second, _, _) = filter_segment(
        raw,
        best.duration_frames as f64,
        level,
        &cfg.vars,
        &cfg.filter,
    )?;
    let (hypotheses, _) = rank_templates(&second.frames, store, cfg)?;
    Ok(result_from(0, hypotheses, cfg))
}

/// Speaker's reply to a confirmation request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Answer {
    Yes,
    No { correction: Option<String> },
}

/// Where a transcript word came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    /// Accepted without confirmation.
    Auto,
    /// Speaker answered yes.
    Confirmed,
    /// Speaker supplied the word.
    User,
    /// Speaker answered no and offered nothing.
    Rejected,
}

/// Final transcript line for one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub segment: usize,
    pub word: Option<String>,
    pub origin: Origin,
    /// Set when a user correction is not an enrolled word.
    pub out_of_lexicon: bool,
}

impl TranscriptEntry {
    /// Accept a result as-is (no confirmation was needed).
    pub fn auto(result: &RecognitionResult) -> TranscriptEntry {
        TranscriptEntry {
            segment: result.segment,
            word: Some(result.top().word.clone()),
            origin: Origin::Auto,
            out_of_lexicon: false,
        }
    }
}

/// Resolve a flagged result with the speaker's answer.
pub fn confirm(
    result: &RecognitionResult,
    answer: &Answer,
    store: &TemplateStore,
) -> TranscriptEntry {
    match answer {
        Answer::Yes => TranscriptEntry {
            segment: result.segment,
            word: Some(result.top().word.clone()),
            origin: Origin::Confirmed,
            out_of_lexicon: false,
        },
        Answer::No {
            correction: Some(word),
        } => {
            let word = word.to_lowercase();
            let out_of_lexicon = !store.contains_word(&word);
            TranscriptEntry {
                segment: result.segment,
                word: Some(word),
                origin: Origin::User,
                out_of_lexicon,
            }
        }
        Answer::No { correction: None } => TranscriptEntry {
            segment: result.segment,
            word: None,
            origin: Origin::Rejected,
            out_of_lexicon: false,
        },
    }
}
