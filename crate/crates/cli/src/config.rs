//! Run configuration: a TOML file with sections, or the same structure as
//! JSON.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dnls_core::glassey::{TestFunctionOptions, Thresholds};
use dnls_core::grids::{GridSpec, DEFAULT_K_MAX, DEFAULT_N, DEFAULT_R_MAX};
use dnls_core::nls::StepSchedule;
use dnls_core::pointop::{ModelParams, Sign};
use serde::{Deserialize, Deserializer, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub initial_data: InitialData,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("dnls-out")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(deserialize_with = "dimension")]
    pub n: u8,
    pub alpha: f64,
    pub sign: Sign,
    pub p: f64,
    /// Marks a contrast run outside the long-range window (e.g. p = 3 in
    /// 2D); the probe refuses such powers unless this is set.
    #[serde(default)]
    pub comparison: bool,
}

fn dimension<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<u8, D::Error> {
    let n = u8::deserialize(d)?;
    if n == 2 || n == 3 {
        Ok(n)
    } else {
        Err(serde::de::Error::custom(format!("dimension must be 2 or 3, got {n}")))
    }
}

impl ModelConfig {
    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.n, self.alpha, self.sign, self.p).context("invalid [model] section")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub size: usize,
    pub r_max: f64,
    pub k_max: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { size: DEFAULT_N, r_max: DEFAULT_R_MAX, k_max: DEFAULT_K_MAX }
    }
}

impl GridConfig {
    pub fn build(&self, n: u8) -> Result<GridSpec> {
        GridSpec::new(n, self.size, self.r_max, self.k_max).context("invalid [grid] section")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// `amplitude·exp(-r²/2width²)`, optionally band-limited in the
    /// generalized spectrum.
    Gaussian {
        width: f64,
        amplitude: f64,
        #[serde(default)]
        band: Option<[f64; 2]>,
    },
    /// `amplitude·Φ_α` (normalised bound state).
    BoundStateShaped { amplitude: f64 },
    /// A position-space snapshot file on the configured grid.
    FromFile { path: PathBuf },
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData::Gaussian { width: 3.0, amplitude: 0.05, band: Some([0.8, 1.4]) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub t_end: f64,
    pub steps: StepSchedule,
    pub snapshot_times: Vec<f64>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            t_end: 200.0,
            steps: StepSchedule::Geometric { dt: 0.01, growth: 0.05, dt_max: 10.0 },
            snapshot_times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    /// Target accuracy of the test-function approximation.
    pub epsilon: f64,
    /// Estimate `v₊♯` from a linear pre-run and aim the test function at it.
    pub targeted: bool,
    pub test_function: TestFunctionOptions,
    pub thresholds: Thresholds,
    pub records_per_decade: usize,
    pub tail_decades: f64,
    /// `false` runs the linear flow.
    pub nonlinear: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            epsilon: 1e-2,
            targeted: true,
            test_function: TestFunctionOptions { r_out: 250.0, ..Default::default() },
            thresholds: Thresholds::default(),
            records_per_decade: 20,
            tail_decades: 0.5,
            nonlinear: true,
        }
    }
}

/// Cartesian grid of probes for the `sweep` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub p: Vec<f64>,
    pub alpha: Vec<f64>,
    pub sign: Vec<Sign>,
}

impl RunConfig {
    /// Parses TOML, or JSON when the text starts with `{`. Errors carry the
    /// line and the offending field.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| anyhow::anyhow!("config parse error: {e}"))?
        } else {
            toml::from_str(text).map_err(|e| anyhow::anyhow!("config parse error: {e}"))?
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Semantic checks that the deserializer cannot express.
    pub fn check(&self) -> Result<()> {
        self.model.params()?;
        self.grid.build(self.model.n)?;
        match &self.initial_data {
            InitialData::Gaussian { width, amplitude, band } => {
                if !(*width > 0.0 && amplitude.is_finite()) {
                    bail!("initial_data: gaussian needs width > 0 and a finite amplitude");
                }
                if let Some([lo, hi]) = band {
                    if !(hi > lo && *lo >= 0.0) {
                        bail!("initial_data.band: need 0 <= lo < hi, got [{lo}, {hi}]");
                    }
                }
            }
            InitialData::BoundStateShaped { amplitude } => {
                if !amplitude.is_finite() {
                    bail!("initial_data.amplitude must be finite");
                }
            }
            InitialData::FromFile { .. } => {}
        }
        if !(self.schedule.t_end >= 1.0) {
            bail!("schedule.t_end must be at least 1, got {}", self.schedule.t_end);
        }
        self.schedule.steps.validate().context("invalid schedule.steps")?;
        if self.rng_seed > MAX_SEED {
            bail!("rng_seed must be at most {MAX_SEED} (TOML integers are signed 64-bit)");
        }
        if let Some(s) = &self.sweep {
            if s.p.is_empty() || s.alpha.is_empty() || s.sign.is_empty() {
                bail!("sweep: p, alpha and sign lists must be non-empty");
            }
        }
        Ok(())
    }

    /// Serialised form embedded in every artifact.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serialisable")
    }
}

/// Largest seed that survives the TOML config echo.
pub const MAX_SEED: u64 = i64::MAX as u64;

/// The configurations shipped with the binary (see `examples/` of this
/// crate).
pub const BUNDLED: [(&str, &str); 4] = [
    ("2d_p2_longrange", include_str!("../examples/2d_p2_longrange.toml")),
    ("2d_p3_shortrange", include_str!("../examples/2d_p3_shortrange.toml")),
    ("3d_p1.3_longrange", include_str!("../examples/3d_p1.3_longrange.toml")),
    ("3d_p1.7_shortrange", include_str!("../examples/3d_p1.7_shortrange.toml")),
];

pub fn bundled(name: &str) -> Result<RunConfig> {
    let name = name.trim_end_matches(".toml");
    let name = name.rsplit('/').next().unwrap_or(name);
    match BUNDLED.iter().find(|(n, _)| *n == name) {
        Some((_, text)) => RunConfig::parse(text),
        None => bail!("no bundled config named {name:?}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = "[model]\nn = 3\nalpha = -1.0\nsign = \"focusing\"\np = 1.2\n";

    #[test]
    fn defaults_fill_optional_sections() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.grid, GridConfig::default());
        assert_eq!(cfg.schedule.t_end, 200.0);
        assert_eq!(cfg.probe.thresholds, Thresholds::default());
        assert_eq!(cfg.output_dir, PathBuf::from("dnls-out"));
        assert!(!cfg.model.comparison);
        assert_eq!(cfg.model.sign, Sign::Focusing);
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let bad = MINIMAL.replace("p = 1.2", "p = 0.5");
        assert!(format!("{:#}", RunConfig::parse(&bad).unwrap_err()).contains("p > 1"));
        let bad = format!("{MINIMAL}[schedule]\nt_end = 0.5\n");
        assert!(format!("{:#}", RunConfig::parse(&bad).unwrap_err()).contains("schedule.t_end"));
        let bad =
            format!("{MINIMAL}[initial_data]\nkind = \"gaussian\"\nwidth = 1.0\namplitude = 1.0\nband = [2.0, 1.0]\n");
        assert!(format!("{:#}", RunConfig::parse(&bad).unwrap_err()).contains("band"));
    }

    #[test]
    fn syntax_errors_report_the_line() {
        let err = format!("{:#}", RunConfig::parse("[model]\nn = 2\nalpha = \n").unwrap_err());
        assert!(err.contains("line 3"), "{err}");
        let err = format!("{:#}", RunConfig::parse("{\"model\": {\"n\": 2,\n \"alpha\": x}}").unwrap_err());
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn seeds_must_fit_the_echo() {
        let bad = format!("rng_seed = {}\n{MINIMAL}", u64::MAX);
        assert!(RunConfig::parse(&bad).is_err());
        let json = format!(
            "{{\"rng_seed\": {}, \"model\": {{\"n\": 2, \"alpha\": 0.0, \"sign\": \"focusing\", \"p\": 2.0}}}}",
            u64::MAX
        );
        assert!(format!("{:#}", RunConfig::parse(&json).unwrap_err()).contains("rng_seed"));
    }

    #[test]
    fn initial_data_variants_parse() {
        let cfg =
            RunConfig::parse(&format!("{MINIMAL}[initial_data]\nkind = \"bound_state_shaped\"\namplitude = 0.5\n"))
                .unwrap();
        assert_eq!(cfg.initial_data, InitialData::BoundStateShaped { amplitude: 0.5 });
        let cfg =
            RunConfig::parse(&format!("{MINIMAL}[initial_data]\nkind = \"from_file\"\npath = \"a.bin\"\n")).unwrap();
        assert_eq!(cfg.initial_data, InitialData::FromFile { path: PathBuf::from("a.bin") });
    }

    proptest! {
        #[test]
        fn toml_and_json_round_trip(
            n in 2u8..=3, alpha in -5.0f64..5.0, p in 1.01f64..5.0, focusing: bool, seed in 0..=MAX_SEED, t_end in 1.0f64..1e3,
        ) {
            let mut cfg = RunConfig::parse(MINIMAL).unwrap();
            cfg.model = ModelConfig { n, alpha, p, sign: if focusing { Sign::Focusing } else { Sign::Defocusing }, comparison: false };
            cfg.rng_seed = seed;
            cfg.schedule.t_end = t_end;
            prop_assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg.clone());
            prop_assert_eq!(RunConfig::parse(&serde_json::to_string(&cfg).unwrap()).unwrap(), cfg);
        }
    }
}
