//! Release gate: the eight end-to-end properties the artifact promises,
//! each reported as one "ACCEPTANCE <name>: PASS/FAIL" line.

use std::panic::{catch_unwind, UnwindSafe};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use parling_core::audio::{extract_features, save_audio, FeatureFrame, FramingConfig, NUM_BANDS};
use parling_core::dtw::{brute_force_dtw, dtw_with, BandConstraint};
use parling_core::endpoint::Segment;
use parling_core::eval::run_eval;
use parling_core::filter::{filter_segment, filter_utterance, profile_segment, FilterParams};
use parling_core::fuzzy::{LinguisticVariable, VariableSet};
use parling_core::recognizer::{enroll, recognize, RecognizerConfig, TemplateStore};
use parling_core::synth::{
    apply_gain, build_enrollment_set, build_eval_corpus, default_lexicon, make_word, CorpusItem,
    PerturbationGrid,
};

const CORPUS_SEED: u64 = 42;

fn criterion(name: &str, body: impl FnOnce() + UnwindSafe) {
    let result = catch_unwind(body);
    match result {
        Ok(()) => println!("ACCEPTANCE {name}: PASS"),
        Err(payload) => {
            println!("ACCEPTANCE {name}: FAIL");
            std::panic::resume_unwind(payload);
        }
    }
}

/// Corpus and stores shared by the expensive criteria, built once.
struct Setup {
    /// Keeps the directory alive for the whole test process.
    #[allow(dead_code)]
    dir: tempfile::TempDir,
    corpus: Vec<CorpusItem>,
    store_filtered: TemplateStore,
    store_raw: TemplateStore,
    store_path: PathBuf,
    /// Enrollment clips of the homophone pair, at every repertoire rate.
    tail_clips: Vec<PathBuf>,
}

fn setup() -> &'static Setup {
    static SETUP: OnceLock<Setup> = OnceLock::new();
    SETUP.get_or_init(|| {
        let dir = tempfile::tempdir().expect("tempdir");
        let lexicon = default_lexicon();
        let corpus =
            build_eval_corpus(&lexicon, &PerturbationGrid::default(), CORPUS_SEED).expect("corpus");

        let cfg_filtered = RecognizerConfig {
            filter_enabled: true,
            ..RecognizerConfig::default()
        };
        let cfg_raw = RecognizerConfig {
            filter_enabled: false,
            ..RecognizerConfig::default()
        };

        let mut store_filtered = TemplateStore::default();
        let mut store_raw = TemplateStore::default();
        let mut tail_clips = Vec::new();
        for (label, clips) in build_enrollment_set(&lexicon, CORPUS_SEED).expect("enrollment") {
            if label == "tail" {
                for (clip, source) in &clips {
                    let path = dir.path().join(source);
                    save_audio(clip, &path).expect("write clip");
                    tail_clips.push(path);
                }
            }
            enroll(&mut store_filtered, &label, &clips, &cfg_filtered).expect("enroll filtered");
            enroll(&mut store_raw, &label, &clips, &cfg_raw).expect("enroll raw");
        }

        let store_path = dir.path().join("store.json");
        store_filtered.save(&store_path).expect("save store");
        Setup {
            dir,
            corpus,
            store_filtered,
            store_raw,
            store_path,
            tail_clips,
        }
    })
}

#[test]
fn dtw_oracle_equivalence() {
    criterion("dtw_oracle_equivalence", || {
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
        for pair in 0..500 {
            let n = rng.gen_range(1..=6);
            let m = rng.gen_range(1..=6);
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let cost = |x: &f64, y: &f64| (x - y).abs();
            let fast = dtw_with(&a, &b, BandConstraint::Unbounded, cost).unwrap();
            let oracle = brute_force_dtw(&a, &b, cost).unwrap();
            assert_eq!(
                fast.total_cost, oracle.total_cost,
                "pair {pair}: {n}x{m} dtw {} vs enumeration {}",
                fast.total_cost, oracle.total_cost
            );
        }
        let elapsed = started.elapsed();
        assert!(elapsed.as_secs_f64() < 5.0, "500 pairs took {elapsed:?}");
    });
}

#[test]
fn fuzzy_partition() {
    criterion("fuzzy_partition", || {
        let vars = VariableSet::default();
        let check = |var: &LinguisticVariable| {
            let (lo, hi) = var.universe();
            for k in 0..1000 {
                let x = lo + (hi - lo) * k as f64 / 999.0;
                let degrees = var.fuzzify(x);
                let mut sum = 0.0;
                for &mu in &degrees.0 {
                    assert!((0.0..=1.0).contains(&mu), "{} at {x}: mu {mu}", var.name());
                    sum += mu;
                }
                assert!(
                    (sum - 1.0).abs() <= 1e-9,
                    "{} at {x}: partition sum {sum}",
                    var.name()
                );
            }
        };
        check(&vars.accent);
        check(&vars.speed);
        check(&vars.emphasis);
    });
}

/// Frames that profile exactly neutral against a matching reference:
/// accent ratio at the soft/sharp crossover, energy at the anchor.
fn neutral_segment(len: usize, level_db: f64) -> Segment {
    let frame = FeatureFrame {
        log_energy: level_db,
        hf_ratio: 0.45,
        band_energies: [level_db; NUM_BANDS],
    };
    Segment {
        start_frame: 0,
        end_frame: len,
        frames: vec![frame; len],
    }
}

fn frames_bits(frames: &[FeatureFrame]) -> Vec<u64> {
    let mut bits = Vec::with_capacity(frames.len() * (2 + NUM_BANDS));
    for f in frames {
        bits.push(f.log_energy.to_bits());
        bits.push(f.hf_ratio.to_bits());
        bits.extend(f.band_energies.iter().map(|b| b.to_bits()));
    }
    bits
}

#[test]
fn neutral_fixed_point() {
    criterion("neutral_fixed_point", || {
        let vars = VariableSet::default();
        let params = FilterParams::default();
        let seg = neutral_segment(40, -40.0);
        let (out, records) =
            filter_utterance(std::slice::from_ref(&seg), 40.0, &vars, &params).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(
            frames_bits(&out[0].frames),
            frames_bits(&seg.frames),
            "neutral frames must survive the filter bit for bit"
        );
        let rec = &records[0];
        assert!(rec.corrections.is_zero(), "{:?}", rec.corrections);
        assert_eq!(rec.before, rec.after);
    });
}

#[test]
fn filter_contraction() {
    criterion("filter_contraction", || {
        let vars = VariableSet::default();
        let params = FilterParams::default();
        let reference = 64.0;
        let anchor = -40.0;
        for e in [-15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0] {
            for v in [-1.5f64, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5] {
                let duration = ((reference * (-v).exp2()).round() as usize).max(1);
                let mut seg = neutral_segment(duration, anchor + e);
                let mut prev_e = f64::INFINITY;
                for pass in 0..5 {
                    let p = profile_segment(&seg, reference, anchor, &vars).unwrap();
                    assert!(
                        p.emphasis.crisp.abs() <= prev_e,
                        "(e={e}, v={v}) pass {pass}: |e| grew {prev_e} -> {}",
                        p.emphasis.crisp.abs()
                    );
                    prev_e = p.emphasis.crisp.abs();
                    let (out, _, _) =
                        filter_segment(&seg, reference, anchor, &vars, &params).unwrap();
                    seg = out;
                }
                let last = profile_segment(&seg, reference, anchor, &vars).unwrap();
                assert!(
                    last.emphasis.crisp.abs() <= prev_e,
                    "(e={e}, v={v}) final |e| grew"
                );
                assert!(
                    last.speed.normal >= 0.9,
                    "(e={e}, v={v}) normal degree {} after five passes",
                    last.speed.normal
                );
                assert!(
                    last.emphasis.medium >= 0.9,
                    "(e={e}, v={v}) medium degree {} after five passes",
                    last.emphasis.medium
                );
            }
        }
    });
}

#[test]
fn axis_separation() {
    criterion("axis_separation", || {
        let framing = FramingConfig::default();
        let floor = parling_core::audio::ENERGY_FLOOR_DB;
        for spec in &default_lexicon() {
            let clip = make_word(&spec.seeded(CORPUS_SEED)).unwrap();
            let before = extract_features(&clip, &framing);
            for gain_db in [12.0, -12.0] {
                let (gained, clipped) = apply_gain(&clip, gain_db);
                assert_eq!(clipped, 0, "{} at {gain_db:+} dB clipped", spec.label);
                let after = extract_features(&gained, &framing);
                assert_eq!(before.len(), after.len());
                for (k, (fa, fb)) in before.iter().zip(&after).enumerate() {
                    assert!(
                        (fa.hf_ratio - fb.hf_ratio).abs() < 1e-6,
                        "{} frame {k}: hf_ratio moved {} -> {}",
                        spec.label,
                        fa.hf_ratio,
                        fb.hf_ratio
                    );
                    // The energy floor clamps silence on both sides of the
                    // gain; the exact-shift claim applies where it doesn't.
                    if fa.log_energy > floor && fa.log_energy + gain_db > floor {
                        assert!(
                            (fb.log_energy - fa.log_energy - gain_db).abs() < 1e-6,
                            "{} frame {k}: log_energy {} -> {} under {gain_db:+} dB",
                            spec.label,
                            fa.log_energy,
                            fb.log_energy
                        );
                    }
                }
            }
        }
    });
}

#[test]
fn filter_benefit() {
    criterion("filter_benefit", || {
        let s = setup();
        let mut cfg = RecognizerConfig::default();

        let started = Instant::now();
        cfg.filter_enabled = true;
        let with_filter = run_eval(&s.store_filtered, &s.corpus, &cfg).unwrap();
        let elapsed = started.elapsed();

        cfg.filter_enabled = false;
        let without = run_eval(&s.store_raw, &s.corpus, &cfg).unwrap();

        let acc_f = with_filter.correct as f64 / with_filter.total as f64;
        let acc_r = without.correct as f64 / without.total as f64;
        assert_eq!(with_filter.total, 750);
        assert!(
            acc_f >= 0.90,
            "with-filter accuracy {acc_f:.4} below 0.90 ({}/{})",
            with_filter.correct,
            with_filter.total
        );
        assert!(
            acc_f >= acc_r,
            "filtering hurt: {acc_f:.4} with vs {acc_r:.4} without"
        );
        assert!(
            elapsed.as_secs_f64() < 60.0,
            "750-clip eval took {elapsed:?}"
        );
    });
}

#[test]
fn homophone_handling() {
    criterion("homophone_handling", || {
        let s = setup();
        let cfg = RecognizerConfig::default();
        for path in &s.tail_clips {
            let clip = parling_core::audio::load_audio(path).unwrap();
            let results = recognize(&clip, &s.store_filtered, &cfg).unwrap();
            assert_eq!(results.len(), 1, "{}", path.display());
            let r = &results[0];
            let score = |word: &str| {
                r.hypotheses
                    .iter()
                    .find(|h| h.word == word)
                    .unwrap_or_else(|| panic!("no hypothesis for {word}"))
                    .score
            };
            let diff = (score("tail") - score("tale")).abs();
            assert!(diff < 1e-9, "{}: score difference {diff}", path.display());
            assert!(r.ambiguous, "{}: not flagged ambiguous", path.display());
        }

        // The interactive path must ask before committing either spelling.
        let output = Command::new(env!("CARGO_BIN_EXE_parling"))
            .args(["recognize", "--interactive", "--input"])
            .arg(&s.tail_clips[2])
            .arg("--store")
            .arg(&s.store_path)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .and_then(|mut child| {
                use std::io::Write;
                child.stdin.take().unwrap().write_all(b"y\n")?;
                child.wait_with_output()
            })
            .expect("run recognizer");
        assert!(output.status.success(), "{output:?}");
        let prompt = String::from_utf8_lossy(&output.stderr);
        assert!(
            prompt.contains("accept? [Y/n/word]"),
            "no confirmation prompt on stderr: {prompt:?}"
        );
        let stdout = String::from_utf8_lossy(&output.stdout);
        assert!(stdout.contains("ambiguous"), "{stdout:?}");
    });
}

fn run_cli(args: &[&str], dir: &std::path::Path) -> std::process::Output {
    let output = Command::new(env!("CARGO_BIN_EXE_parling"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("run CLI");
    assert!(
        output.status.success(),
        "parling {args:?}: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

/// Every file under `dir`, relative path -> content.
fn tree_bytes(dir: &std::path::Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    let mut files = std::collections::BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(dir)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                files.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

#[test]
fn determinism() {
    criterion("determinism", || {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();

        let synth_a = run_cli(
            &["synth", "--out", "a", "--seed", "42", "--format", "records"],
            d,
        );
        let synth_b = run_cli(
            &["synth", "--out", "b", "--seed", "42", "--format", "records"],
            d,
        );
        let tree_a = tree_bytes(&d.join("a"));
        let tree_b = tree_bytes(&d.join("b"));
        assert_eq!(
            tree_a.keys().collect::<Vec<_>>(),
            tree_b.keys().collect::<Vec<_>>()
        );
        for (name, bytes) in &tree_a {
            assert_eq!(Some(bytes), tree_b.get(name), "{name} differs between runs");
        }
        // The summaries match apart from the differing output paths.
        let summary = |out: &[u8]| {
            let line = String::from_utf8_lossy(out);
            match parling_core::records::Record::from_line(line.trim()).unwrap() {
                parling_core::records::Record::SynthSummary {
                    enroll_clips,
                    eval_clips,
                    clipped_samples,
                    ..
                } => (enroll_clips, eval_clips, clipped_samples),
                other => panic!("unexpected record: {other:?}"),
            }
        };
        assert_eq!(summary(&synth_a.stdout), summary(&synth_b.stdout));

        run_cli(
            &["enroll", "--store", "store.json", "--lexicon", "a/enroll"],
            d,
        );
        let eval_args = [
            "eval",
            "--store",
            "store.json",
            "--corpus",
            "a/manifest.tsv",
            "--with-filter",
            "--format",
            "records",
        ];
        let eval_a = run_cli(&eval_args, d);
        let eval_b = run_cli(&eval_args, d);
        assert_eq!(eval_a.stdout, eval_b.stdout, "eval output drifted");
        assert!(!eval_a.stdout.is_empty());
    });
}
