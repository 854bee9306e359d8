//! Application configuration: a flat key-value text file with dotted
//! section keys. Every knob has an embedded default; unknown keys are
//! rejected so typos fail loudly instead of silently using defaults.

use std::fs;
use std::path::{Path, PathBuf};

use crate::audio::FramingConfig;
use crate::endpoint::EndpointConfig;
use crate::error::{Error, Result};
use crate::filter::FilterParams;
use crate::fuzzy::VariableSet;
use crate::recognizer::RecognizerConfig;

/// Parsed and validated application configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct AppConfig {
    /// Optional variable-definitions file overriding the shipped
    /// membership functions (see [`VariableSet::from_key_values`]).
    pub variables_path: Option<PathBuf>,
    pub framing: FramingConfig,
    pub endpoint: EndpointConfig,
    pub filter_enabled: bool,
    pub tilt_target: f64,
    /// None picks the alignment band automatically per sequence pair.
    pub band_half_width: Option<usize>,
    pub epsilon_ambiguous: f64,
    pub theta_confirm: f64,
    pub confirm_score: f64,
    pub s_oov: f64,
}

impl Default for AppConfig {
    fn default() -> Self {
        let r = RecognizerConfig::default();
        Self {
            variables_path: None,
            framing: r.framing,
            endpoint: r.endpoint,
            filter_enabled: r.filter_enabled,
            tilt_target: r.filter.tilt_target,
            band_half_width: r.band_half_width,
            epsilon_ambiguous: r.epsilon_ambiguous,
            theta_confirm: r.theta_confirm,
            confirm_score: r.confirm_score,
            s_oov: r.s_oov,
        }
    }
}

impl AppConfig {
    /// Parse dotted key-value text over the defaults. Keys:
    ///
    /// ```text
    /// variables.path          = vars.conf
    /// framing.window_ms       = 25
    /// framing.hop_ms          = 10
    /// framing.hf_cutoff_hz    = 2000
    /// endpoint.open_threshold_db  = -45
    /// endpoint.close_threshold_db = -55
    /// endpoint.min_gap_ms     = 200
    /// endpoint.min_segment_ms = 80
    /// filter.enabled          = true
    /// filter.tilt_target      = 0.45
    /// recognizer.band_half_width   = auto
    /// recognizer.epsilon_ambiguous = 0.01
    /// recognizer.theta_confirm     = 0.1
    /// recognizer.confirm_score     = 0.5
    /// recognizer.s_oov             = 0.2
    /// ```
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut cfg = AppConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_key_values(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = |v: &str| -> Result<f64> {
            v.parse()
                .map_err(|_| Error::Config(format!("key '{key}': '{v}' is not a number")))
        };
        match key {
            "variables.path" => self.variables_path = Some(PathBuf::from(value)),
            "framing.window_ms" => self.framing.window_ms = num(value)?,
            "framing.hop_ms" => self.framing.hop_ms = num(value)?,
            "framing.hf_cutoff_hz" => self.framing.hf_cutoff_hz = num(value)?,
            "endpoint.open_threshold_db" => self.endpoint.open_threshold_db = num(value)?,
            "endpoint.close_threshold_db" => self.endpoint.close_threshold_db = num(value)?,
            "endpoint.min_gap_ms" => self.endpoint.min_gap_ms = num(value)?,
            "endpoint.min_segment_ms" => self.endpoint.min_segment_ms = num(value)?,
            "filter.enabled" => {
                self.filter_enabled = match value {
                    "true" => true,
                    "false" => false,
                    other => {
                        return Err(Error::Config(format!(
                            "key '{key}': '{other}' is not true/false"
                        )))
                    }
                }
            }
            "filter.tilt_target" => self.tilt_target = num(value)?,
            "recognizer.band_half_width" => {
                self.band_half_width = if value == "auto" {
                    None
                } else {
                    Some(value.parse().map_err(|_| {
                        Error::Config(format!(
                            "key '{key}': '{value}' is not 'auto' or a whole number"
                        ))
                    })?)
                }
            }
            "recognizer.epsilon_ambiguous" => self.epsilon_ambiguous = num(value)?,
            "recognizer.theta_confirm" => self.theta_confirm = num(value)?,
            "recognizer.confirm_score" => self.confirm_score = num(value)?,
            "recognizer.s_oov" => self.s_oov = num(value)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(Error::Config(reason));
        if !(self.framing.window_ms > 0.0 && self.framing.hop_ms > 0.0) {
            return fail("framing window_ms and hop_ms must be positive".into());
        }
        if self.framing.hop_ms > self.framing.window_ms {
            return fail(format!(
                "framing.hop_ms {} exceeds window_ms {}",
                self.framing.hop_ms, self.framing.window_ms
            ));
        }
        if self.framing.hf_cutoff_hz <= 0.0 {
            return fail("framing.hf_cutoff_hz must be positive".into());
        }
        if self.endpoint.close_threshold_db > self.endpoint.open_threshold_db {
            return fail(format!(
                "endpoint close threshold {} above open threshold {} breaks hysteresis",
                self.endpoint.close_threshold_db, self.endpoint.open_threshold_db
            ));
        }
        if self.endpoint.min_gap_ms < 0.0 || self.endpoint.min_segment_ms < 0.0 {
            return fail("endpoint durations must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.tilt_target) {
            return fail(format!(
                "filter.tilt_target {} outside [0, 1]",
                self.tilt_target
            ));
        }
        for (name, v) in [
            ("recognizer.epsilon_ambiguous", self.epsilon_ambiguous),
            ("recognizer.theta_confirm", self.theta_confirm),
            ("recognizer.confirm_score", self.confirm_score),
            ("recognizer.s_oov", self.s_oov),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} {v} outside [0, 1]"));
            }
        }
        Ok(())
    }

    /// Assemble the pipeline configuration, loading variable overrides if
    /// a definitions path is set.
    pub fn to_recognizer_config(&self) -> Result<RecognizerConfig> {
        let vars = match &self.variables_path {
            Some(path) => VariableSet::from_key_values(&fs::read_to_string(path)?)?,
            None => VariableSet::default(),
        };
        let mut endpoint = self.endpoint;
        // The endpointing hop must match the framing that feeds it.
        endpoint.hop_ms = self.framing.hop_ms;
        Ok(RecognizerConfig {
            framing: self.framing,
            endpoint,
            vars,
            filter: FilterParams {
                tilt_target: self.tilt_target,
                ..FilterParams::default()
            },
            filter_enabled: self.filter_enabled,
            band_half_width: self.band_half_width,
            epsilon_ambiguous: self.epsilon_ambiguous,
            theta_confirm: self.theta_confirm,
            confirm_score: self.confirm_score,
            s_oov: self.s_oov,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = AppConfig::from_key_values("").unwrap();
        assert_eq!(cfg, AppConfig::default());
        let rc = cfg.to_recognizer_config().unwrap();
        assert_eq!(rc, RecognizerConfig::default());
    }

    #[test]
    fn keys_parse_and_override() {
        let cfg = AppConfig::from_key_values(
            "# comment\n\
             framing.window_ms = 30\n\
             endpoint.open_threshold_db = -40\n\
             filter.enabled = false\n\
             recognizer.band_half_width = 7\n\
             recognizer.s_oov = 0.3\n",
        )
        .unwrap();
        assert_eq!(cfg.framing.window_ms, 30.0);
        assert_eq!(cfg.endpoint.open_threshold_db, -40.0);
        assert!(!cfg.filter_enabled);
        assert_eq!(cfg.band_half_width, Some(7));
        assert_eq!(cfg.s_oov, 0.3);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(matches!(
            AppConfig::from_key_values("recognizer.oov = 0.2"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            AppConfig::from_key_values("no equals sign"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            AppConfig::from_key_values("filter.enabled = yes"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            AppConfig::from_key_values("framing.window_ms = wide"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn bounds_are_enforced() {
        // Hysteresis inverted.
        assert!(AppConfig::from_key_values(
            "endpoint.open_threshold_db = -60\nendpoint.close_threshold_db = -40"
        )
        .is_err());
        // Hop larger than window.
        assert!(AppConfig::from_key_values("framing.hop_ms = 40").is_err());
        // Threshold outside [0, 1].
        assert!(AppConfig::from_key_values("recognizer.s_oov = 1.5").is_err());
        assert!(AppConfig::from_key_values("filter.tilt_target = -0.1").is_err());
    }

    #[test]
    fn variables_path_feeds_membership_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let vars = dir.path().join("vars.conf");
        std::fs::write(
            &vars,
            "accent.universe = 0 1\n\
             accent.term.soft = 0 0 0.4 0.6\n\
             accent.term.sharp = 0.4 0.6 1 1\n",
        )
        .unwrap();
        let text = format!("variables.path = {}", vars.display());
        let cfg = AppConfig::from_key_values(&text).unwrap();
        let rc = cfg.to_recognizer_config().unwrap();
        assert_ne!(rc.vars, VariableSet::default());
        assert_eq!(rc.vars.speed, VariableSet::default().speed);
    }

    #[test]
    fn endpoint_hop_follows_framing() {
        let cfg = AppConfig::from_key_values("framing.hop_ms = 5").unwrap();
        let rc = cfg.to_recognizer_config().unwrap();
        assert_eq!(rc.endpoint.hop_ms, 5.0);
    }
}
