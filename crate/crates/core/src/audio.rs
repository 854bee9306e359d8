//! Audio ingestion, framing/windowing, and per-frame acoustic features:
//! log-energy, high-frequency energy ratio, and log band energies.

use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical sample rate; other rates are accepted and band edges scale
/// with their Nyquist frequency.
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// Floor for every log-energy quantity, dBFS. Avoids log(0) on silence.
pub const ENERGY_FLOOR_DB: f64 = -80.0;

/// Number of equal-width analysis bands between 0 and Nyquist.
pub const NUM_BANDS: usize = 8;

/// Framing and spectrum parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramingConfig {
    pub window_ms: f64,
    pub hop_ms: f64,
    pub hf_cutoff_hz: f64,
}

impl Default for FramingConfig {
    fn default() -> Self {
        Self {
            window_ms: 25.0,
            hop_ms: 10.0,
            hf_cutoff_hz: 2000.0,
        }
    }
}

impl FramingConfig {
    pub fn window_samples(&self, sample_rate: u32) -> usize {
        ((self.window_ms * sample_rate as f64) / 1000.0)
            .round()
            .max(1.0) as usize
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        ((self.hop_ms * sample_rate as f64) / 1000.0)
            .round()
            .max(1.0) as usize
    }
}

/// Mono audio with amplitudes in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// One frame's acoustic observation vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureFrame {
    /// 20*log10 of the windowed RMS, floored at [`ENERGY_FLOOR_DB`].
    pub log_energy: f64,
    /// Fraction of one-sided spectral energy at or above the HF cutoff.
    pub hf_ratio: f64,
    /// 10*log10 of per-band energy sums, floored at extraction time.
    /// Corrections applied later may push entries below the floor.
    pub band_energies: [f64; NUM_BANDS],
}

/// Read a RIFF WAV file: PCM 16-bit integer or 32-bit float, mono or
/// multi-channel (downmixed by averaging).
pub fn load_audio(path: &Path) -> Result<AudioClip> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::UnsupportedFormat(format!(
            "{}: zero channels",
            path.display()
        )));
    }
    let mono: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => {
            let samples: Vec<f64> = reader
                .samples::<i16>()
                .map(|s| s.map(|v| v as f64 / 32768.0))
                .collect::<std::result::Result<_, _>>()?;
            downmix(&samples, channels)
        }
        (hound::SampleFormat::Float, 32) => {
            let samples: Vec<f64> = reader
                .samples::<f32>()
                .map(|s| s.map(|v| v as f64))
                .collect::<std::result::Result<_, _>>()?;
            downmix(&samples, channels)
        }
        (fmt, bits) => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: {bits}-bit {fmt:?} (supported: 16-bit int, 32-bit float)",
                path.display()
            )));
        }
    };
    if mono.is_empty() {
        return Err(Error::EmptyAudio(path.display().to_string()));
    }
    Ok(AudioClip {
        samples: mono,
        sample_rate: spec.sample_rate,
    })
}

/// Write a clip as 16-bit PCM WAV, clamping samples to [-1, 1].
pub fn save_audio(clip: &AudioClip, path: &Path) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &x in &clip.samples {
        writer.write_sample((x.clamp(-1.0, 1.0) * 32767.0).round() as i16)?;
    }
    writer.finalize()?;
    Ok(())
}

fn downmix(interleaved: &[f64], channels: usize) -> Vec<f64> {
    if channels == 1 {
        return interleaved.to_vec();
    }
    interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect()
}

fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (len - 1) as f64).cos())
        .collect()
}

/// Slice the clip into Hamming-windowed frames. Trailing partial windows
/// are dropped, so frame count = floor((N - W)/H) + 1, or 0 when N < W.
pub fn frame_signal(clip: &AudioClip, cfg: &FramingConfig) -> Vec<Vec<f64>> {
    let w = cfg.window_samples(clip.sample_rate);
    let h = cfg.hop_samples(clip.sample_rate);
    let n = clip.samples.len();
    if n < w {
        return Vec::new();
    }
    let window = hamming(w);
    let count = (n - w) / h + 1;
    (0..count)
        .map(|k| {
            let start = k * h;
            clip.samples[start..start + w]
                .iter()
                .zip(&window)
                .map(|(s, c)| s * c)
                .collect()
        })
        .collect()
}

/// 20*log10(RMS) of a windowed frame, floored at [`ENERGY_FLOOR_DB`].
pub fn log_energy(windowed: &[f64]) -> f64 {
    if windowed.is_empty() {
        return ENERGY_FLOOR_DB;
    }
    let mean_sq = windowed.iter().map(|s| s * s).sum::<f64>() / windowed.len() as f64;
    if mean_sq == 0.0 {
        return ENERGY_FLOOR_DB;
    }
    (20.0 * mean_sq.sqrt().log10()).max(ENERGY_FLOOR_DB)
}

/// Magnitude-squared one-sided spectrum features of a windowed frame:
/// the high-frequency energy ratio and the 8 log band energies.
pub fn spectrum_features(
    windowed: &[f64],
    sample_rate: u32,
    hf_cutoff_hz: f64,
) -> (f64, [f64; NUM_BANDS]) {
    let fft = FftPlanner::new().plan_fft_forward(windowed.len());
    spectrum_features_with(windowed, sample_rate, hf_cutoff_hz, fft.as_ref())
}

fn spectrum_features_with(
    windowed: &[f64],
    sample_rate: u32,
    hf_cutoff_hz: f64,
    fft: &dyn Fft<f64>,
) -> (f64, [f64; NUM_BANDS]) {
    let w = windowed.len();
    let mut buf: Vec<Complex<f64>> = windowed.iter().map(|&s| Complex::new(s, 0.0)).collect();
    fft.process(&mut buf);

    let nyquist = sample_rate as f64 / 2.0;
    let band_width = nyquist / NUM_BANDS as f64;
    let mut total = 0.0;
    let mut hf = 0.0;
    let mut band_sums = [0.0f64; NUM_BANDS];
    for (k, x) in buf.iter().enumerate().take(w / 2 + 1) {
        let energy = x.norm_sqr();
        let freq = k as f64 * sample_rate as f64 / w as f64;
        total += energy;
        if freq >= hf_cutoff_hz {
            hf += energy;
        }
        let band = ((freq / band_width) as usize).min(NUM_BANDS - 1);
        band_sums[band] += energy;
    }
    let hf_ratio = if total == 0.0 { 0.0 } else { hf / total };
    let mut band_energies = [ENERGY_FLOOR_DB; NUM_BANDS];
    for (out, sum) in band_energies.iter_mut().zip(band_sums) {
        if sum > 0.0 {
            *out = (10.0 * sum.log10()).max(ENERGY_FLOOR_DB);
        }
    }
    (hf_ratio, band_energies)
}

/// Full feature extraction: frame, window, and compute every frame's
/// [`FeatureFrame`].
pub fn extract_features(clip: &AudioClip, cfg: &FramingConfig) -> Vec<FeatureFrame> {
    let frames = frame_signal(clip, cfg);
    if frames.is_empty() {
        return Vec::new();
    }
    let fft = FftPlanner::new().plan_fft_forward(frames[0].len());
    frames
        .iter()
        .map(|frame| {
            let (hf_ratio, band_energies) =
                spectrum_features_with(frame, clip.sample_rate, cfg.hf_cutoff_hz, fft.as_ref());
            FeatureFrame {
                log_energy: log_energy(frame),
                hf_ratio,
                band_energies,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tone(freq: f64, rate: u32, len: usize, amp: f64) -> AudioClip {
        let samples = (0..len)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin())
            .collect();
        AudioClip {
            samples,
            sample_rate: rate,
        }
    }

    fn noise(seed: u64, rate: u32, len: usize, amp: f64) -> AudioClip {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..len).map(|_| rng.gen_range(-amp..amp)).collect();
        AudioClip {
            samples,
            sample_rate: rate,
        }
    }

    #[test]
    fn wav_round_trip_16_bit_mono() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut writer = hound::WavWriter::create(&path, spec).unwrap();
        for i in 0..16_000i32 {
            writer.write_sample((i % 1000 - 500) as i16).unwrap();
        }
        writer.finalize().unwrap();

        let clip = load_audio(&path).unwrap();
        assert_eq!(clip.len(), 16_000);
        assert_eq!(clip.sample_rate, 16_000);
        assert!((clip.duration_seconds() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wav_sample_scaling_convention() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8_000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut writer = hound::WavWriter::create(&path, spec).unwrap();
        writer.write_sample(32767i16).unwrap();
        writer.write_sample(-32768i16).unwrap();
        writer.finalize().unwrap();

        let clip = load_audio(&path).unwrap();
        assert_eq!(clip.sample_rate, 8_000);
        assert!((clip.samples[0] - 32767.0 / 32768.0).abs() < 1e-12);
        assert_eq!(clip.samples[1], -1.0);
    }

    #[test]
    fn wav_stereo_downmix_averages() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 16_000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut writer = hound::WavWriter::create(&path, spec).unwrap();
        writer.write_sample(1000i16).unwrap();
        writer.write_sample(3000i16).unwrap();
        writer.finalize().unwrap();

        let clip = load_audio(&path).unwrap();
        assert_eq!(clip.len(), 1);
        assert!((clip.samples[0] - 2000.0 / 32768.0).abs() < 1e-12);
    }

    #[test]
    fn wav_float_format_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut writer = hound::WavWriter::create(&path, spec).unwrap();
        writer.write_sample(0.25f32).unwrap();
        writer.finalize().unwrap();
        let clip = load_audio(&path).unwrap();
        assert_eq!(clip.samples, vec![0.25]);
    }

    #[test]
    fn wav_unsupported_bit_depth_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 8,
            sample_format: hound::SampleFormat::Int,
        };
        let mut writer = hound::WavWriter::create(&path, spec).unwrap();
        writer.write_sample(10i8).unwrap();
        writer.finalize().unwrap();
        assert!(matches!(
            load_audio(&path),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn wav_with_no_samples_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        hound::WavWriter::create(&path, spec)
            .unwrap()
            .finalize()
            .unwrap();
        assert!(matches!(load_audio(&path), Err(Error::EmptyAudio(_))));
    }

    #[test]
    fn frame_count_examples_at_16k() {
        let cfg = FramingConfig::default();
        for (len, want) in [(400usize, 1usize), (560, 2), (399, 0), (559, 1)] {
            let clip = AudioClip {
                samples: vec![0.1; len],
                sample_rate: 16_000,
            };
            assert_eq!(frame_signal(&clip, &cfg).len(), want, "len {len}");
        }
    }

    #[test]
    fn log_energy_floor_on_silence() {
        let clip = AudioClip {
            samples: vec![0.0; 400],
            sample_rate: 16_000,
        };
        let frames = frame_signal(&clip, &FramingConfig::default());
        assert_eq!(log_energy(&frames[0]), ENERGY_FLOOR_DB);
    }

    #[test]
    fn log_energy_of_full_scale_frame_matches_window_rms_oracle() {
        // Constant 1.0 input: the windowed frame IS the Hamming window, so
        // the expected value is the direct RMS of the window coefficients.
        let clip = AudioClip {
            samples: vec![1.0; 400],
            sample_rate: 16_000,
        };
        let frames = frame_signal(&clip, &FramingConfig::default());
        let got = log_energy(&frames[0]);
        let coeffs = hamming(400);
        let rms = (coeffs.iter().map(|c| c * c).sum::<f64>() / 400.0).sqrt();
        let oracle = 20.0 * rms.log10();
        assert!((got - oracle).abs() < 1e-12, "got {got}, oracle {oracle}");
    }

    #[test]
    fn log_energy_halving_amplitude_drops_6db() {
        let clip = noise(7, 16_000, 400, 0.8);
        let half = AudioClip {
            samples: clip.samples.iter().map(|s| s * 0.5).collect(),
            sample_rate: 16_000,
        };
        let cfg = FramingConfig::default();
        let e1 = log_energy(&frame_signal(&clip, &cfg)[0]);
        let e2 = log_energy(&frame_signal(&half, &cfg)[0]);
        assert!((e1 - e2 - 20.0 * 2.0f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn tone_hf_ratio_examples() {
        let cfg = FramingConfig::default();
        let low = extract_features(&tone(100.0, 16_000, 800, 0.5), &cfg);
        assert!(low[0].hf_ratio < 0.05, "100 Hz: {}", low[0].hf_ratio);
        let high = extract_features(&tone(4000.0, 16_000, 800, 0.5), &cfg);
        assert!(high[0].hf_ratio > 0.95, "4 kHz: {}", high[0].hf_ratio);
    }

    #[test]
    fn white_noise_hf_ratio_near_bin_fraction() {
        // Flat spectrum: expected ratio = (Nyquist - cutoff)/Nyquist = 0.75.
        let cfg = FramingConfig::default();
        let mut sum = 0.0;
        let n = 100;
        for seed in 0..n {
            let clip = noise(seed, 16_000, 400, 0.5);
            let feats = extract_features(&clip, &cfg);
            sum += feats[0].hf_ratio;
        }
        let mean = sum / n as f64;
        assert!((mean - 0.75).abs() < 0.05, "mean hf_ratio {mean}");
    }

    #[test]
    fn band_energies_concentrate_on_tone_band() {
        let cfg = FramingConfig::default();
        // 4.5 kHz sits in band 4 (bands are 1 kHz wide at 16 kHz).
        let feats = extract_features(&tone(4500.0, 16_000, 800, 0.5), &cfg);
        let bands = feats[0].band_energies;
        let top = bands
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(top, 4, "bands: {bands:?}");
    }

    #[test]
    fn gain_covariance_shifts_log_energy_and_keeps_hf_ratio() {
        let cfg = FramingConfig::default();
        let clip = noise(11, 16_000, 4000, 0.25);
        let g = 3.1622776601683795; // +10 dB
        let scaled = AudioClip {
            samples: clip.samples.iter().map(|s| s * g).collect(),
            sample_rate: 16_000,
        };
        let base = extract_features(&clip, &cfg);
        let shifted = extract_features(&scaled, &cfg);
        let expect = 20.0 * g.log10();
        for (f0, f1) in base.iter().zip(&shifted) {
            assert!(f0.log_energy > ENERGY_FLOOR_DB && f1.log_energy > ENERGY_FLOOR_DB);
            assert!((f1.log_energy - f0.log_energy - expect).abs() < 1e-6);
            assert!((f1.hf_ratio - f0.hf_ratio).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_and_short_clips_yield_no_frames() {
        let cfg = FramingConfig::default();
        let clip = AudioClip {
            samples: vec![],
            sample_rate: 16_000,
        };
        assert!(extract_features(&clip, &cfg).is_empty());
    }

    proptest! {
        #[test]
        fn frame_count_formula_matches_direct_loop(len in 0usize..5000) {
            let cfg = FramingConfig::default();
            let clip = AudioClip { samples: vec![0.01; len], sample_rate: 16_000 };
            let frames = frame_signal(&clip, &cfg);
            // Direct loop oracle: count full windows stepping by the hop.
            let (w, h) = (400usize, 160usize);
            let mut count = 0;
            let mut start = 0;
            while start + w <= len {
                count += 1;
                start += h;
            }
            prop_assert_eq!(frames.len(), count);
        }

        #[test]
        fn features_finite_for_arbitrary_finite_input(
            seed in 0u64..1000,
            len in 400usize..2000,
            amp in 1e-9f64..1.0,
        ) {
            let clip = noise(seed, 16_000, len, amp);
            for f in extract_features(&clip, &FramingConfig::default()) {
                prop_assert!(f.log_energy.is_finite());
                prop_assert!(f.hf_ratio.is_finite());
                prop_assert!((0.0..=1.0).contains(&f.hf_ratio));
                prop_assert!(f.band_energies.iter().all(|b| b.is_finite()));
                prop_assert!(f.log_energy >= ENERGY_FLOOR_DB);
            }
        }
    }
}
