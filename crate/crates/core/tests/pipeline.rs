//! End-to-end properties of the enrollment + filter + matching pipeline
//! that no single module owns.

use std::sync::OnceLock;

use parling_core::audio::AudioClip;
use parling_core::recognizer::{enroll, recognize, RecognizerConfig, TemplateStore};
use parling_core::synth::{
    apply_gain, build_enrollment_set, default_lexicon, make_word, time_stretch,
};

const SEED: u64 = 42;

fn store() -> &'static TemplateStore {
    static STORE: OnceLock<TemplateStore> = OnceLock::new();
    STORE.get_or_init(|| {
        let cfg = RecognizerConfig::default();
        let mut store = TemplateStore::default();
        for (label, clips) in build_enrollment_set(&default_lexicon(), SEED).unwrap() {
            enroll(&mut store, &label, &clips, &cfg).unwrap();
        }
        store
    })
}

fn neutral_clip(label: &str) -> AudioClip {
    let spec = default_lexicon()
        .into_iter()
        .find(|w| w.label == label)
        .unwrap();
    make_word(&spec.seeded(SEED)).unwrap()
}

fn top_word(clip: &AudioClip) -> String {
    let cfg = RecognizerConfig::default();
    let results = recognize(clip, store(), &cfg).unwrap();
    assert_eq!(results.len(), 1);
    results[0].top().word.clone()
}

// The lexicon's homophone pair ties exactly and the tie breaks by label,
// so the baseline is the spec label except for the second twin.
fn expected_top(label: &str) -> &str {
    if label == "tale" {
        "tail"
    } else {
        label
    }
}

#[test]
fn uniform_gain_never_changes_the_top_word() {
    for spec in &default_lexicon() {
        let clip = neutral_clip(&spec.label);
        let baseline = top_word(&clip);
        assert_eq!(baseline, expected_top(&spec.label));
        for gain_db in [-12.0, -6.0, 6.0, 12.0] {
            let (gained, _) = apply_gain(&clip, gain_db);
            assert_eq!(
                top_word(&gained),
                baseline,
                "{} at {gain_db:+} dB",
                spec.label
            );
        }
    }
}

#[test]
fn stretch_inside_the_enrolled_range_keeps_the_top_word() {
    for spec in &default_lexicon() {
        let clip = neutral_clip(&spec.label);
        let baseline = top_word(&clip);
        assert_eq!(baseline, expected_top(&spec.label));
        for factor in [0.7, 0.85, 1.15, 1.3] {
            let stretched = time_stretch(&clip, factor);
            assert_eq!(
                top_word(&stretched),
                baseline,
                "{} stretched x{factor}",
                spec.label
            );
        }
    }
}

#[test]
fn an_utterance_of_several_words_yields_one_result_each() {
    let a = neutral_clip("scalar");
    let b = neutral_clip("window");
    let rate = a.sample_rate;
    // Half a second of silence comfortably exceeds the merge gap.
    let mut samples = a.samples.clone();
    samples.extend(std::iter::repeat_n(0.0, rate as usize / 2));
    samples.extend(b.samples.iter().copied());
    let utterance = AudioClip {
        samples,
        sample_rate: rate,
    };

    let cfg = RecognizerConfig::default();
    let results = recognize(&utterance, store(), &cfg).unwrap();
    let words: Vec<&str> = results.iter().map(|r| r.top().word.as_str()).collect();
    assert_eq!(words, ["scalar", "window"]);
    assert_eq!(results[0].segment, 0);
    assert_eq!(results[1].segment, 1);
}

#[test]
fn a_reloaded_store_scores_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.json");
    store().save(&path).unwrap();
    let reloaded = TemplateStore::load(&path).unwrap();

    let cfg = RecognizerConfig::default();
    let clip = neutral_clip("matrix");
    let before = recognize(&clip, store(), &cfg).unwrap();
    let after = recognize(&clip, &reloaded, &cfg).unwrap();
    assert_eq!(before, after);
}
