//! Flat `key = value` benchmark configuration.
//!
//! One key per line, `#` starts a comment. Lists are comma separated. Every
//! key has a default; unknown and repeated keys are rejected. The effective
//! configuration can be written back with [`BenchConfig::to_text`] and parses
//! to the same value.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::background::GmmConfig;
use crate::chromacity::ChromacityParams;
use crate::error::{Error, Result};
use crate::geometry::GeometryParams;
use crate::physical::PhysicalParams;
use crate::texture_lr::LrParams;
use crate::texture_sr::{GaborConfig, SrParams};
use crate::tracking::TrackerParams;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub gmm: GmmConfig,
    pub chromacity: ChromacityParams,
    pub physical: PhysicalParams,
    pub geometry: GeometryParams,
    pub sr: SrParams,
    /// Bank used by the fast SR variant; the other SR settings are shared.
    pub sr_fast_bank: GaborConfig,
    pub lr: LrParams,
    pub tracker: TrackerParams,
    /// MOT match gate in pixels; 0 uses a tenth of the frame diagonal.
    pub mot_gate: f64,
    pub lambda_grid: Vec<f64>,
    /// Leading frames left out of the timing average.
    pub timing_warmup: usize,
    pub output_dir: PathBuf,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            gmm: GmmConfig::default(),
            chromacity: ChromacityParams::default(),
            physical: PhysicalParams::default(),
            geometry: GeometryParams::default(),
            sr: SrParams::default(),
            sr_fast_bank: GaborConfig::reduced(),
            lr: LrParams::default(),
            tracker: TrackerParams::default(),
            mot_gate: 0.0,
            lambda_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            timing_warmup: 3,
            output_dir: PathBuf::from("out"),
        }
    }
}

trait Field {
    fn set(&mut self, raw: &str) -> std::result::Result<(), String>;
    fn show(&self) -> String;
}

impl Field for f64 {
    fn set(&mut self, raw: &str) -> std::result::Result<(), String> {
        *self = raw
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("expected a finite number, found {raw:?}"))?;
        Ok(())
    }

    fn show(&self) -> String {
        self.to_string()
    }
}

impl Field for usize {
    fn set(&mut self, raw: &str) -> std::result::Result<(), String> {
        *self = raw.parse().map_err(|_| format!("expected a non-negative integer, found {raw:?}"))?;
        Ok(())
    }

    fn show(&self) -> String {
        self.to_string()
    }
}

impl Field for bool {
    fn set(&mut self, raw: &str) -> std::result::Result<(), String> {
        *self = match raw {
            "true" | "yes" | "on" | "1" => true,
            "false" | "no" | "off" | "0" => false,
            _ => return Err(format!("expected true or false, found {raw:?}")),
        };
        Ok(())
    }

    fn show(&self) -> String {
        self.to_string()
    }
}

impl Field for PathBuf {
    fn set(&mut self, raw: &str) -> std::result::Result<(), String> {
        if raw.is_empty() {
            return Err("expected a path".into());
        }
        *self = PathBuf::from(raw);
        Ok(())
    }

    fn show(&self) -> String {
        self.display().to_string()
    }
}

fn parse_list(raw: &str) -> std::result::Result<Vec<f64>, String> {
    raw.split(',')
        .map(|s| {
            let mut v = 0.0;
            v.set(s.trim())?;
            Ok(v)
        })
        .collect()
}

fn show_list(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

impl Field for Vec<f64> {
    fn set(&mut self, raw: &str) -> std::result::Result<(), String> {
        *self = parse_list(raw)?;
        Ok(())
    }

    fn show(&self) -> String {
        show_list(self)
    }
}

impl Field for [f64; 3] {
    fn set(&mut self, raw: &str) -> std::result::Result<(), String> {
        *self = parse_list(raw)?
            .try_into()
            .map_err(|v: Vec<f64>| format!("expected 3 values, found {}", v.len()))?;
        Ok(())
    }

    fn show(&self) -> String {
        show_list(self)
    }
}

impl BenchConfig {
    fn fields(&mut self) -> Vec<(&'static str, &mut dyn Field)> {
        let Self {
            gmm,
            chromacity: ch,
            physical: ph,
            geometry: ge,
            sr,
            sr_fast_bank: fast,
            lr,
            tracker,
            mot_gate,
            lambda_grid,
            timing_warmup,
            output_dir,
        } = self;
        vec![
            ("gmm.components", &mut gmm.components),
            ("gmm.learning_rate", &mut gmm.learning_rate),
            ("gmm.match_sigma", &mut gmm.match_sigma),
            ("gmm.background_ratio", &mut gmm.background_ratio),
            ("gmm.min_variance", &mut gmm.min_variance),
            ("gmm.initial_variance", &mut gmm.initial_variance),
            ("gmm.initial_weight", &mut gmm.initial_weight),
            ("gmm.morphology", &mut gmm.morphology),
            ("chromacity.beta1", &mut ch.beta1),
            ("chromacity.beta2", &mut ch.beta2),
            ("chromacity.tau_s", &mut ch.tau_s),
            ("chromacity.tau_h", &mut ch.tau_h),
            ("chromacity.window", &mut ch.window),
            ("physical.components", &mut ph.components),
            ("physical.learning_rate", &mut ph.learning_rate),
            ("physical.gradient_sigma", &mut ph.gradient_sigma),
            ("physical.posterior_threshold", &mut ph.posterior_threshold),
            ("physical.confident_weight", &mut ph.confident_weight),
            ("physical.warmup_frames", &mut ph.warmup_frames),
            ("physical.v_lo", &mut ph.v_lo),
            ("physical.v_hi", &mut ph.v_hi),
            ("physical.s_max", &mut ph.s_max),
            ("physical.match_sigma", &mut ph.match_sigma),
            ("physical.min_variance", &mut ph.min_variance),
            ("physical.initial_variance", &mut ph.initial_variance),
            ("physical.outlier_density", &mut ph.outlier_density),
            ("geometry.prominence", &mut ge.prominence),
            ("geometry.smoothing", &mut ge.smoothing),
            ("geometry.min_row_change", &mut ge.min_row_change),
            ("geometry.weight_s", &mut ge.weight_s),
            ("geometry.weight_t", &mut ge.weight_t),
            ("geometry.weight_g", &mut ge.weight_g),
            ("geometry.threshold", &mut ge.threshold),
            ("geometry.min_shadow_pixels", &mut ge.min_shadow_pixels),
            ("geometry.min_blob_pixels", &mut ge.min_blob_pixels),
            ("geometry.min_intensity_variance", &mut ge.min_intensity_variance),
            ("sr.kernel_size", &mut sr.bank.size),
            ("sr.wavelengths", &mut sr.bank.wavelengths),
            ("sr.orientations", &mut sr.bank.orientations),
            ("sr.phases", &mut sr.bank.phases),
            ("sr.sigma_ratio", &mut sr.bank.sigma_ratio),
            ("sr.tau_d", &mut sr.tau_d),
            ("sr.gain_lo", &mut sr.gain_lo),
            ("sr.epsilon", &mut sr.epsilon),
            ("sr_fast.kernel_size", &mut fast.size),
            ("sr_fast.wavelengths", &mut fast.wavelengths),
            ("sr_fast.orientations", &mut fast.orientations),
            ("sr_fast.phases", &mut fast.phases),
            ("sr_fast.sigma_ratio", &mut fast.sigma_ratio),
            ("lr.beta1", &mut lr.weak.beta1),
            ("lr.beta2", &mut lr.weak.beta2),
            ("lr.tau_s", &mut lr.weak.tau_s),
            ("lr.tau_h", &mut lr.weak.tau_h),
            ("lr.tau_m", &mut lr.tau_m),
            ("lr.tau_a", &mut lr.tau_a),
            ("lr.tau_c", &mut lr.tau_c),
            ("lr.edge_split", &mut lr.edge_split),
            ("lr.edge_threshold", &mut lr.edge_threshold),
            ("lr.min_region", &mut lr.min_region),
            ("tracker.min_area", &mut tracker.min_area),
            ("tracker.gate", &mut tracker.gate),
            ("tracker.max_missed", &mut tracker.max_missed),
            ("mot.gate", mot_gate),
            ("eval.lambda_grid", lambda_grid),
            ("timing.warmup_frames", timing_warmup),
            ("output.dir", output_dir),
        ]
    }

    /// Every accepted key, in echo order.
    pub fn keys() -> Vec<&'static str> {
        Self::default().fields().into_iter().map(|(k, _)| k).collect()
    }

    /// Parses `text` on top of the defaults and validates the result.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        Self::default().merged(text, source_name)
    }

    /// Applies the keys set in `text` on top of `self` and validates.
    pub fn merged(&self, text: &str, source_name: &str) -> Result<Self> {
        let mut cfg = self.clone();
        let mut seen = HashSet::new();
        {
            let mut fields = cfg.fields();
            for (n, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let lineno = n + 1;
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| Error::parse(source_name, lineno, "expected `key = value`"))?;
                let (key, value) = (key.trim(), value.trim());
                let Some((name, field)) = fields.iter_mut().find(|(k, _)| *k == key) else {
                    return Err(Error::parse(source_name, lineno, format!("unknown key `{key}`")));
                };
                if !seen.insert(*name) {
                    return Err(Error::parse(source_name, lineno, format!("`{key}` is set twice")));
                }
                field
                    .set(value)
                    .map_err(|reason| Error::parse(source_name, lineno, format!("`{key}`: {reason}")))?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        self.gmm.validate()?;
        self.chromacity.validate("chromacity")?;
        self.physical.validate()?;
        self.geometry.validate()?;
        self.sr.validate()?;
        self.sr_fast_bank.validate()?;
        self.lr.validate()?;
        self.tracker.validate()?;
        if !(self.mot_gate >= 0.0) {
            return Err(Error::param("mot.gate", "must be >= 0"));
        }
        if self.lambda_grid.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::param("eval.lambda_grid", "values must lie in [0, 1]"));
        }
        if self.lambda_grid.is_empty() {
            return Err(Error::param("eval.lambda_grid", "must not be empty"));
        }
        Ok(())
    }

    /// The full effective configuration, one key per line.
    pub fn to_text(&self) -> String {
        let mut copy = self.clone();
        let mut out = String::new();
        for (k, v) in copy.fields() {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v.show());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_round_trip() {
        let d = BenchConfig::default();
        d.validate().unwrap();
        assert_eq!(BenchConfig::parse(&d.to_text(), "echo").unwrap(), d);
    }

    #[test]
    fn sets_values_and_ignores_comments() {
        let c = BenchConfig::parse(
            "# global\nchromacity.window = 3\nlr.edge_split=false # trailing\neval.lambda_grid = 0, 0.5 ,1\n\nphysical.min_variance = 1e-3,2e-3,3e-3\n",
            "c",
        )
        .unwrap();
        assert_eq!(c.chromacity.window, 3);
        assert!(!c.lr.edge_split);
        assert_eq!(c.lambda_grid, vec![0.0, 0.5, 1.0]);
        assert_eq!(c.physical.min_variance, [1e-3, 2e-3, 3e-3]);
    }

    #[test]
    fn rejects_bad_input() {
        let err_line = |text: &str| match BenchConfig::parse(text, "c") {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("{text:?}: {other:?}"),
        };
        assert_eq!(err_line("\nnot.a.key = 1\n"), 2);
        assert_eq!(err_line("chromacity.window\n"), 1);
        assert_eq!(err_line("chromacity.window = x\n"), 1);
        assert_eq!(err_line("sr.tau_d = 1\nsr.tau_d = 2\n"), 2);
        assert_eq!(err_line("physical.min_variance = 1,2\n"), 1);
        assert_eq!(err_line("gmm.morphology = maybe\n"), 1);
        assert_eq!(err_line("sr.tau_d = inf\n"), 1);
        assert!(matches!(
            BenchConfig::parse("chromacity.window = 4\n", "c"),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            BenchConfig::parse("eval.lambda_grid = 0, 1.5\n", "c"),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn overrides_apply_on_top() {
        let base = BenchConfig::parse("sr.tau_d = 0.5\n", "global").unwrap();
        let seq = base.merged("lr.tau_c = 0.7\n", "seq").unwrap();
        assert_eq!(seq.sr.tau_d, 0.5);
        assert_eq!(seq.lr.tau_c, 0.7);
    }

    #[test]
    fn keys_are_unique() {
        let keys = BenchConfig::keys();
        let set: HashSet<_> = keys.iter().collect();
        assert_eq!(set.len(), keys.len());
    }

    proptest! {
        #[test]
        fn echo_reproduces(tau_d in 0.0f64..2.0, beta1 in 0.01f64..0.5, grid in proptest::collection::vec(0.0f64..=1.0, 1..6)) {
            let mut c = BenchConfig::default();
            c.sr.tau_d = tau_d;
            c.chromacity.beta1 = beta1;
            c.lambda_grid = grid;
            prop_assert_eq!(BenchConfig::parse(&c.to_text(), "echo").unwrap(), c);
        }

        #[test]
        fn never_panics(text in "\\PC{0,300}") {
            let _ = BenchConfig::parse(&text, "fuzz");
        }
    }
}
