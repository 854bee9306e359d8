//! Machine-readable output records: one self-contained JSON object per
//! line, discriminated by a `record` tag so streams from different verbs
//! can be mixed and parsed back without context.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::filter::{ParalinguisticProfile, ParalinguisticRecord, Weights};
use crate::recognizer::{RecognitionResult, TranscriptEntry};

/// Every record the command-line tools can emit in records format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum Record {
    /// Per-segment fuzzy profile with derived correction weights.
    Profile {
        segment: usize,
        profile: ParalinguisticProfile,
        weights: Weights,
    },
    /// Side-channel record for one filtered segment.
    Filtered(ParalinguisticRecord),
    /// Recognition outcome for one segment.
    Result(RecognitionResult),
    /// Final transcript line after any confirmation.
    Transcript(TranscriptEntry),
    /// One template added to the store.
    Enrolled {
        word: String,
        source: String,
        duration_frames: usize,
    },
    /// Store state after an enrollment run.
    EnrollSummary {
        words: usize,
        templates: usize,
        mean_duration_frames: f64,
    },
    /// Corpus generation outcome.
    SynthSummary {
        enroll_clips: usize,
        eval_clips: usize,
        clipped_samples: usize,
        manifest: String,
    },
    /// Batch evaluation outcome.
    EvalReport(EvalReport),
}

impl Record {
    /// One line of JSON, no trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records contain only serializable finite data")
    }

    pub fn from_line(line: &str) -> Result<Record> {
        serde_json::from_str(line).map_err(|e| Error::Config(format!("bad record line: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recognizer::{Hypothesis, Origin};

    #[test]
    fn every_variant_round_trips_as_one_line() {
        let records = vec![
            Record::Result(RecognitionResult {
                segment: 0,
                hypotheses: vec![Hypothesis {
                    word: "scalar".into(),
                    score: 0.91,
                }],
                confidence: 1.0,
                ambiguous: false,
                needs_confirmation: false,
                out_of_vocabulary: false,
            }),
            Record::Transcript(TranscriptEntry {
                segment: 0,
                word: Some("scalar".into()),
                origin: Origin::Auto,
                out_of_lexicon: false,
            }),
            Record::Enrolled {
                word: "scalar".into(),
                source: "scalar.wav".into(),
                duration_frames: 35,
            },
            Record::EnrollSummary {
                words: 10,
                templates: 50,
                mean_duration_frames: 41.9,
            },
            Record::SynthSummary {
                enroll_clips: 50,
                eval_clips: 750,
                clipped_samples: 0,
                manifest: "manifest.tsv".into(),
            },
        ];
        for r in records {
            let line = r.to_line();
            assert!(!line.contains('\n'));
            assert_eq!(Record::from_line(&line).unwrap(), r);
        }
    }

    #[test]
    fn unknown_tag_rejected() {
        assert!(Record::from_line(r#"{"record":"bogus"}"#).is_err());
        assert!(Record::from_line("not json").is_err());
    }
}
