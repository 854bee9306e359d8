//! Command-line front end for the word recognizer: corpus synthesis,
//! enrollment, paralinguistic analysis, filtering, recognition, and batch
//! evaluation.
//!
//! Exit codes are a stable contract: 0 success, 1 usage or I/O error,
//! 2 recognition flagged out-of-vocabulary in batch (non-interactive) mode.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use parling_core::audio::{extract_features, load_audio, AudioClip};
use parling_core::config::AppConfig;
use parling_core::endpoint::{endpoint_segments, Segment};
use parling_core::eval::{report_to_text, run_eval_dir};
use parling_core::filter::{
    correction_weights, filter_utterance, pooled_mean_log_energy, profile_segment,
    ParalinguisticProfile, ParalinguisticRecord, Weights,
};
use parling_core::recognizer::{
    confirm, enroll, recognize, Answer, Origin, RecognitionResult, RecognizerConfig, TemplateStore,
    TranscriptEntry,
};
use parling_core::records::Record;
use parling_core::synth::{
    default_lexicon, manifest_from_tsv, write_corpus, PerturbationGrid, WordSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Human-readable tables.
    Table,
    /// One self-contained JSON record per line.
    Records,
}

#[derive(Parser)]
#[command(
    name = "parling",
    version,
    about = "Isolated-word recognizer with a fuzzy paralinguistic front end"
)]
struct Cli {
    /// Configuration file of dotted `key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Output format for standard output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,

    /// Corpus seed (synthesis only).
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Progress notes on standard error.
    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Add word templates to a store from isolated-word clips.
    Enroll(EnrollArgs),
    /// Report per-segment accent, speed, and emphasis profiles.
    Analyze(AnalyzeArgs),
    /// Run the normalization filter and report the side channel.
    Filter(FilterArgs),
    /// Recognize every isolated word in a clip against a store.
    Recognize(RecognizeArgs),
    /// Generate a synthetic lexicon corpus: enrollment clips, a
    /// perturbed evaluation set, and its manifest.
    Synth(SynthArgs),
    /// Score a store against a corpus manifest.
    Eval(EvalArgs),
}

#[derive(Args)]
struct EnrollArgs {
    /// Template store to create or extend.
    #[arg(long, value_name = "FILE")]
    store: PathBuf,

    /// Directory of WAV clips; each file enrolls as the word named by
    /// its stem up to the first "__".
    #[arg(long, value_name = "DIR", conflicts_with_all = ["word", "audio"], required_unless_present = "word")]
    lexicon: Option<PathBuf>,

    /// Word label for the clips given with --audio.
    #[arg(long, requires = "audio")]
    word: Option<String>,

    /// Isolated-word clips to enroll under --word.
    #[arg(long, value_name = "FILE", num_args = 1.., requires = "word")]
    audio: Vec<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Utterance to profile.
    #[arg(long, value_name = "FILE")]
    input: PathBuf,

    /// Template store supplying the speed and level references; without
    /// one the utterance is measured against itself.
    #[arg(long, value_name = "FILE")]
    store: Option<PathBuf>,
}

#[derive(Args)]
struct FilterArgs {
    /// Utterance to filter.
    #[arg(long, value_name = "FILE")]
    input: PathBuf,

    /// Template store supplying the speed reference; without one the
    /// utterance is measured against its own mean duration.
    #[arg(long, value_name = "FILE")]
    store: Option<PathBuf>,
}

#[derive(Args)]
struct RecognizeArgs {
    /// Utterance to recognize.
    #[arg(long, value_name = "FILE")]
    input: PathBuf,

    /// Template store to match against.
    #[arg(long, value_name = "FILE")]
    store: PathBuf,

    /// Confirm flagged results over standard input.
    #[arg(long)]
    interactive: bool,

    /// Match raw features, skipping the normalization filter.
    #[arg(long)]
    no_filter: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Directory to write enroll/, eval/, and manifest.tsv under.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,

    /// JSON word-spec list; omitted, the built-in ten-word lexicon.
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,

    /// Perturbation grid: "default", "identity", or a JSON grid file.
    #[arg(long, default_value = "default", value_name = "GRID")]
    grid: String,
}

#[derive(Args)]
struct EvalArgs {
    /// Template store to score.
    #[arg(long, value_name = "FILE")]
    store: PathBuf,

    /// Corpus manifest (tab-separated, as written by synth).
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,

    /// Directory holding the clips; defaults to an "eval" directory next
    /// to the manifest when present, else the manifest's directory.
    #[arg(long, value_name = "DIR")]
    clips: Option<PathBuf>,

    /// Run the normalization filter before matching.
    #[arg(
        long,
        conflicts_with = "no_filter",
        required_unless_present = "no_filter"
    )]
    with_filter: bool,

    /// Match raw features.
    #[arg(long)]
    no_filter: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; anything else is
            // a usage error.
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut out = io::stdout().lock();
    match run(&cli, &mut out) {
        Ok(code) => ExitCode::from(code),
        // A consumer closing the pipe early is not a failure.
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .filter_map(|cause| cause.downcast_ref::<io::Error>())
        .any(|io| io.kind() == io::ErrorKind::BrokenPipe)
}

fn run(cli: &Cli, out: &mut dyn Write) -> Result<u8> {
    let app = match &cli.config {
        Some(path) => {
            AppConfig::load(path).with_context(|| format!("config {}", path.display()))?
        }
        None => AppConfig::default(),
    };
    let cfg = app.to_recognizer_config()?;
    match &cli.command {
        Command::Enroll(args) => cmd_enroll(cli, args, &cfg, out),
        Command::Analyze(args) => cmd_analyze(cli, args, &cfg, out),
        Command::Filter(args) => cmd_filter(cli, args, &cfg, out),
        Command::Recognize(args) => cmd_recognize(cli, args, cfg, out),
        Command::Synth(args) => cmd_synth(cli, args, out),
        Command::Eval(args) => cmd_eval(cli, args, cfg, out),
    }
}

fn emit(out: &mut dyn Write, record: &Record) -> io::Result<()> {
    writeln!(out, "{}", record.to_line())
}

fn load_clip(path: &Path) -> Result<AudioClip> {
    load_audio(path).with_context(|| format!("audio {}", path.display()))
}

/// Feature-extract and endpoint one utterance.
fn segment_clip(path: &Path, cfg: &RecognizerConfig) -> Result<Vec<Segment>> {
    let clip = load_clip(path)?;
    let frames = extract_features(&clip, &cfg.framing);
    Ok(endpoint_segments(&frames, &cfg.endpoint))
}

/// Word label for a lexicon-directory clip: file stem up to the first
/// "__" variant marker.
fn label_from_path(path: &Path) -> Option<String> {
    let stem = path.file_stem()?.to_str()?;
    let label = stem.split("__").next().unwrap_or(stem);
    if label.is_empty() {
        None
    } else {
        Some(label.to_string())
    }
}

fn cmd_enroll(
    cli: &Cli,
    args: &EnrollArgs,
    cfg: &RecognizerConfig,
    out: &mut dyn Write,
) -> Result<u8> {
    let mut jobs: Vec<(String, PathBuf)> = Vec::new();
    if let Some(dir) = &args.lexicon {
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .with_context(|| format!("lexicon directory {}", dir.display()))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
            })
            .collect();
        paths.sort();
        for path in paths {
            match label_from_path(&path) {
                Some(label) => jobs.push((label, path)),
                None => eprintln!("skipping {}: no word label in file name", path.display()),
            }
        }
        if jobs.is_empty() {
            bail!("lexicon directory {} holds no WAV clips", dir.display());
        }
    } else {
        let word = args.word.as_deref().expect("clap enforces --word");
        for path in &args.audio {
            jobs.push((word.to_string(), path.clone()));
        }
    }

    let mut store = if args.store.exists() {
        TemplateStore::load(&args.store)?
    } else {
        TemplateStore::default()
    };

    // One batch per file: rebuilt normalization is history-free, so this
    // matches a single batch while keeping per-file error reporting.
    let mut rejected = 0usize;
    for (word, path) in &jobs {
        let source = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let outcome = load_clip(path)
            .and_then(|clip| Ok(enroll(&mut store, word, &[(clip, source.clone())], cfg)?));
        match outcome {
            Ok(_) => {
                let added = store.templates.last().expect("just enrolled");
                if cli.verbose {
                    eprintln!(
                        "enrolled {} from {} ({} frames)",
                        added.word,
                        path.display(),
                        added.duration_frames
                    );
                }
                if cli.format == Format::Records {
                    emit(
                        out,
                        &Record::Enrolled {
                            word: added.word.clone(),
                            source: added.source.clone(),
                            duration_frames: added.duration_frames,
                        },
                    )?;
                }
            }
            Err(e) => {
                rejected += 1;
                eprintln!("reject {}: {e:#}", path.display());
            }
        }
    }

    if jobs.len() > rejected {
        store.save(&args.store)?;
    }
    let words = store.words();
    let mean = store.mean_duration().unwrap_or(0.0);
    match cli.format {
        Format::Records => emit(
            out,
            &Record::EnrollSummary {
                words: words.len(),
                templates: store.templates.len(),
                mean_duration_frames: mean,
            },
        )?,
        Format::Table => {
            writeln!(out, "{:<12} templates", "word")?;
            for word in &words {
                let count = store.templates.iter().filter(|t| &t.word == word).count();
                writeln!(out, "{word:<12} {count}")?;
            }
            writeln!(
                out,
                "{}: {} words, {} templates, mean duration {:.1} frames",
                args.store.display(),
                words.len(),
                store.templates.len(),
                mean
            )?;
        }
    }
    Ok(u8::from(rejected > 0))
}

/// Speed and level references for analyze/filter: from the store when one
/// is usable, else the utterance itself (with a warning naming the verb).
fn references(store: &Option<PathBuf>, segments: &[Segment]) -> Result<(f64, f64)> {
    if let Some(path) = store {
        let store = TemplateStore::load(path)?;
        if let (Some(reference), Some(level)) = (store.mean_duration(), store.mean_energy()) {
            return Ok((reference, level));
        }
        eprintln!(
            "warning: store {} holds no templates; measuring against the utterance itself",
            path.display()
        );
    } else {
        eprintln!("warning: no store given; measuring against the utterance itself");
    }
    let n: usize = segments.iter().map(|s| s.len()).sum();
    let reference = n as f64 / segments.len() as f64;
    Ok((reference, pooled_mean_log_energy(segments)))
}

fn degree_cells(pairs: &[(&str, f64)]) -> String {
    pairs
        .iter()
        .map(|(name, value)| format!("{name} {value:.3}"))
        .collect::<Vec<_>>()
        .join("  ")
}

fn print_profile(
    out: &mut dyn Write,
    segment: usize,
    frames: usize,
    p: &ParalinguisticProfile,
    w: &Weights,
) -> io::Result<()> {
    writeln!(out, "segment {segment}: {frames} frames")?;
    writeln!(
        out,
        "  accent    crisp {:+.3}  {}  weight {:.3}",
        p.accent.crisp,
        degree_cells(&[("soft", p.accent.soft), ("sharp", p.accent.sharp)]),
        w.accent
    )?;
    writeln!(
        out,
        "  speed     crisp {:+.3}  {}  weight {:.3}",
        p.speed.crisp,
        degree_cells(&[
            ("slow", p.speed.slow),
            ("normal", p.speed.normal),
            ("fast", p.speed.fast),
        ]),
        w.speed
    )?;
    writeln!(
        out,
        "  emphasis  crisp {:+.3}  {}  weight {:.3}",
        p.emphasis.crisp,
        degree_cells(&[
            ("light", p.emphasis.light),
            ("medium", p.emphasis.medium),
            ("heavy", p.emphasis.heavy),
        ]),
        w.emphasis
    )
}

fn cmd_analyze(
    cli: &Cli,
    args: &AnalyzeArgs,
    cfg: &RecognizerConfig,
    out: &mut dyn Write,
) -> Result<u8> {
    let segments = segment_clip(&args.input, cfg)?;
    if segments.is_empty() {
        if cli.format == Format::Table {
            writeln!(out, "0 segments")?;
        }
        return Ok(0);
    }
    let (reference, level) = references(&args.store, &segments)?;
    if cli.verbose {
        eprintln!("speed reference {reference:.1} frames, level anchor {level:.1} dB");
    }
    for (id, seg) in segments.iter().enumerate() {
        let profile = profile_segment(seg, reference, level, &cfg.vars)?;
        let weights = correction_weights(&profile);
        match cli.format {
            Format::Records => emit(
                out,
                &Record::Profile {
                    segment: id,
                    profile,
                    weights,
                },
            )?,
            Format::Table => print_profile(out, id, seg.len(), &profile, &weights)?,
        }
    }
    Ok(0)
}

fn print_filtered(out: &mut dyn Write, rec: &ParalinguisticRecord) -> io::Result<()> {
    let c = &rec.corrections;
    writeln!(
        out,
        "segment {}: resample x{:.3}, gain {:+.2} dB, tilt {:+.2} dB/band",
        rec.segment, c.resample_factor, c.gain_shift_db, c.tilt_db_per_band
    )?;
    writeln!(
        out,
        "  speed     {:+.3} -> {:+.3}",
        rec.before.speed.crisp, rec.after.speed.crisp
    )?;
    writeln!(
        out,
        "  emphasis  {:+.3} -> {:+.3}",
        rec.before.emphasis.crisp, rec.after.emphasis.crisp
    )?;
    writeln!(
        out,
        "  accent    {:+.3} -> {:+.3}",
        rec.before.accent.crisp, rec.after.accent.crisp
    )
}

fn cmd_filter(
    cli: &Cli,
    args: &FilterArgs,
    cfg: &RecognizerConfig,
    out: &mut dyn Write,
) -> Result<u8> {
    let segments = segment_clip(&args.input, cfg)?;
    if segments.is_empty() {
        if cli.format == Format::Table {
            writeln!(out, "0 segments")?;
        }
        return Ok(0);
    }
    // The filter pools its own emphasis anchor across the utterance's
    // segments; only the speed reference comes from outside.
    let (reference, _) = references(&args.store, &segments)?;
    let (_, records) = filter_utterance(&segments, reference, &cfg.vars, &cfg.filter)?;
    for rec in &records {
        match cli.format {
            Format::Records => emit(out, &Record::Filtered(rec.clone()))?,
            Format::Table => print_filtered(out, rec)?,
        }
    }
    Ok(0)
}

fn flags_of(r: &RecognitionResult) -> Vec<&'static str> {
    let mut flags = Vec::new();
    if r.ambiguous {
        flags.push("ambiguous");
    }
    if r.needs_confirmation {
        flags.push("confirm");
    }
    if r.out_of_vocabulary {
        flags.push("oov");
    }
    flags
}

fn print_result(out: &mut dyn Write, r: &RecognitionResult) -> io::Result<()> {
    writeln!(out, "segment {}", r.segment)?;
    for (rank, h) in r.hypotheses.iter().take(3).enumerate() {
        writeln!(out, "  {}. {:<12} {:.4}", rank + 1, h.word, h.score)?;
    }
    let flags = flags_of(r);
    if flags.is_empty() {
        writeln!(out, "  confidence {:.4}", r.confidence)
    } else {
        writeln!(
            out,
            "  confidence {:.4}  [{}]",
            r.confidence,
            flags.join(", ")
        )
    }
}

/// Ask the operator about one flagged result. Empty reply or "y" accepts,
/// "n" rejects, anything else is a correction. End of input accepts.
fn prompt_answer(r: &RecognitionResult) -> Result<Answer> {
    let top = r.top();
    let mut err = std::io::stderr();
    write!(
        err,
        "segment {}: heard \"{}\" (score {:.3}{}); accept? [Y/n/word] ",
        r.segment,
        top.word,
        top.score,
        r.hypotheses
            .get(1)
            .filter(|_| r.ambiguous)
            .map(|h| format!(", ambiguous with \"{}\"", h.word))
            .unwrap_or_default()
    )?;
    err.flush()?;
    let mut line = String::new();
    std::io::stdin().lock().read_line(&mut line)?;
    let reply = line.trim();
    Ok(match reply.to_lowercase().as_str() {
        "" | "y" | "yes" => Answer::Yes,
        "n" | "no" => Answer::No { correction: None },
        _ => Answer::No {
            correction: Some(reply.to_string()),
        },
    })
}

fn print_transcript(out: &mut dyn Write, entries: &[TranscriptEntry]) -> io::Result<()> {
    writeln!(out, "transcript:")?;
    for t in entries {
        let origin = match t.origin {
            Origin::Auto => "auto",
            Origin::Confirmed => "confirmed",
            Origin::User => "user",
            Origin::Rejected => "rejected",
        };
        let note = if t.out_of_lexicon {
            ", not enrolled"
        } else {
            ""
        };
        match &t.word {
            Some(word) => writeln!(out, "  segment {}: {word} ({origin}{note})", t.segment)?,
            None => writeln!(out, "  segment {}: ({origin})", t.segment)?,
        }
    }
    Ok(())
}

fn cmd_recognize(
    cli: &Cli,
    args: &RecognizeArgs,
    mut cfg: RecognizerConfig,
    out: &mut dyn Write,
) -> Result<u8> {
    if args.no_filter {
        cfg.filter_enabled = false;
    }
    let store = TemplateStore::load(&args.store)
        .with_context(|| format!("store {}", args.store.display()))?;
    let clip = load_clip(&args.input)?;
    let results = recognize(&clip, &store, &cfg)?;

    let mut transcript = Vec::with_capacity(results.len());
    let mut flagged_oov = false;
    for r in &results {
        if cli.format == Format::Records {
            emit(out, &Record::Result(r.clone()))?;
        } else {
            print_result(out, r)?;
        }
        let needs_prompt = r.ambiguous || r.needs_confirmation || r.out_of_vocabulary;
        if args.interactive && needs_prompt {
            // Show the pending block before asking about it.
            out.flush()?;
            let answer = prompt_answer(r)?;
            transcript.push(confirm(r, &answer, &store));
        } else {
            flagged_oov |= r.out_of_vocabulary;
            transcript.push(TranscriptEntry::auto(r));
        }
    }
    match cli.format {
        Format::Records => {
            for t in &transcript {
                emit(out, &Record::Transcript(t.clone()))?;
            }
        }
        Format::Table => print_transcript(out, &transcript)?,
    }
    Ok(if flagged_oov && !args.interactive {
        2
    } else {
        0
    })
}

fn load_grid(value: &str) -> Result<PerturbationGrid> {
    let grid = match value {
        "default" => PerturbationGrid::default(),
        "identity" => PerturbationGrid::identity(),
        path => {
            let text = fs::read_to_string(path).with_context(|| format!("grid file {path}"))?;
            serde_json::from_str(&text).with_context(|| format!("grid file {path}"))?
        }
    };
    grid.validate()?;
    Ok(grid)
}

fn cmd_synth(cli: &Cli, args: &SynthArgs, out: &mut dyn Write) -> Result<u8> {
    let lexicon: Vec<WordSpec> = match &args.spec {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("spec {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("spec {}", path.display()))?
        }
        None => default_lexicon(),
    };
    for spec in &lexicon {
        spec.validate()?;
    }
    let grid = load_grid(&args.grid)?;

    let layout = write_corpus(&args.out, &lexicon, &grid, cli.seed)?;
    let eval_clips = lexicon.len() * grid.len();
    if cli.verbose {
        eprintln!(
            "seed {} over {} words x {} grid cells",
            cli.seed,
            lexicon.len(),
            grid.len()
        );
    }
    match cli.format {
        Format::Records => emit(
            out,
            &Record::SynthSummary {
                enroll_clips: layout.enroll_files.len(),
                eval_clips,
                clipped_samples: layout.clipped_samples,
                manifest: layout.manifest_path.display().to_string(),
            },
        )?,
        Format::Table => {
            writeln!(
                out,
                "wrote {} enrollment clips, {} evaluation clips ({} clipped samples)",
                layout.enroll_files.len(),
                eval_clips,
                layout.clipped_samples
            )?;
            writeln!(out, "manifest: {}", layout.manifest_path.display())?;
        }
    }
    Ok(0)
}

fn cmd_eval(
    cli: &Cli,
    args: &EvalArgs,
    mut cfg: RecognizerConfig,
    out: &mut dyn Write,
) -> Result<u8> {
    cfg.filter_enabled = args.with_filter;
    let store = TemplateStore::load(&args.store)
        .with_context(|| format!("store {}", args.store.display()))?;
    let manifest_dir = args.corpus.parent().unwrap_or(Path::new("."));
    let clip_dir = match &args.clips {
        Some(dir) => dir.clone(),
        None => {
            let eval_dir = manifest_dir.join("eval");
            if eval_dir.is_dir() {
                eval_dir
            } else {
                manifest_dir.to_path_buf()
            }
        }
    };

    let manifest = fs::read_to_string(&args.corpus)
        .with_context(|| format!("manifest {}", args.corpus.display()))?;
    let mut missing = 0usize;
    for entry in manifest_from_tsv(&manifest)? {
        let path = clip_dir.join(&entry.file);
        if !path.exists() {
            eprintln!("missing clip: {}", path.display());
            missing += 1;
        }
    }
    if missing > 0 {
        bail!("{missing} clips missing under {}", clip_dir.display());
    }

    let report = run_eval_dir(&store, &args.corpus, &clip_dir, &cfg)?;
    match cli.format {
        Format::Records => emit(out, &Record::EvalReport(report))?,
        Format::Table => write!(out, "{}", report_to_text(&report))?,
    }
    Ok(0)
}
