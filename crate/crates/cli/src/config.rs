//! Experiment configuration: TOML text with strict keys, defaults for every
//! parameter except `epsilon`, and a canonical re-serialization recorded in
//! each manifest.

use std::path::PathBuf;

use bohmchaos::bohm::{ClassifierConfig, IntegratorConfig};
use bohmchaos::classical::{AreaConfig, ClassicalConfig, RotationConfig};
use bohmchaos::grid::PgmEncoding;
use bohmchaos::state::{CoherentSpec, InitialState};
use bohmchaos::OscillatorParams;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsSection {
    pub omega_x: f64,
    pub omega_y: f64,
    pub mass_x: f64,
    pub mass_y: f64,
    pub hbar: f64,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        let p = OscillatorParams::default();
        Self {
            omega_x: p.omega_x,
            omega_y: p.omega_y,
            mass_x: p.mass_x,
            mass_y: p.mass_y,
            hbar: p.hbar,
        }
    }
}

/// Subcommand knobs; each subcommand reads the keys it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Single-trajectory start `(x, y)` for `bohm` and `lcn`.
    pub start: [f64; 2],
    /// Trajectory sampling interval.
    pub cadence: f64,
    /// Shadow renormalization interval `t₀`.
    pub renormalization: f64,
    /// Born-sampled ensemble size for `fraction`.
    pub ensemble: usize,
    /// Spacing of the fraction curve.
    pub fraction_step: f64,
    /// Snapshot times for `density`.
    pub times: Vec<f64>,
    /// Half-width of the square plotting region.
    pub region: f64,
    pub resolution: usize,
    pub pgm: PgmEncoding,
    /// Corner grid spacing of the node finder.
    pub node_step: f64,
    /// Interval between node scans.
    pub node_dt: f64,
    /// Interval of `eav`/`levels` time series.
    pub sample_dt: f64,
    /// Classical energy; the time-averaged quantum `E_av` when absent.
    pub energy: Option<f64>,
    /// Averaging window `[0, T]` of that `E_av`.
    pub energy_horizon: f64,
    /// Perturbations swept by `tc` and `czv`; `[epsilon]` when empty.
    pub epsilons: Vec<f64>,
    pub tc_dt: f64,
    pub tc_max: f64,
    /// Section orbits launched along `ẋ = 0`.
    pub orbits: usize,
    pub crossings: usize,
    pub scan_points: usize,
    pub czv_samples: usize,
    /// Also bisect for the escape perturbation of the configured state.
    pub escape: bool,
    pub escape_range: [f64; 2],
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            start: [1.3, 1.5],
            cadence: 0.1,
            renormalization: 1.0,
            ensemble: 100,
            fraction_step: 10.0,
            times: vec![0.0],
            region: 6.0,
            resolution: 200,
            pgm: PgmEncoding::Binary,
            node_step: 0.05,
            node_dt: 0.5,
            sample_dt: 0.5,
            energy: None,
            energy_horizon: 1e4,
            epsilons: Vec::new(),
            tc_dt: 0.5,
            tc_max: 200.0,
            orbits: 12,
            crossings: 400,
            scan_points: 40,
            czv_samples: 401,
            escape: false,
            escape_range: [0.05, 0.2],
        }
    }
}

impl RunConfig {
    fn validate(&self) -> Result<(), (&'static str, String)> {
        let positive = [
            ("cadence", self.cadence),
            ("renormalization", self.renormalization),
            ("fraction_step", self.fraction_step),
            ("region", self.region),
            ("node_step", self.node_step),
            ("node_dt", self.node_dt),
            ("sample_dt", self.sample_dt),
            ("energy_horizon", self.energy_horizon),
            ("tc_dt", self.tc_dt),
            ("tc_max", self.tc_max),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err((k, format!("{k} must be positive, got {v}")));
            }
        }
        let counts = [
            ("ensemble", self.ensemble),
            ("resolution", self.resolution),
            ("orbits", self.orbits),
            ("crossings", self.crossings),
            ("scan_points", self.scan_points),
        ];
        for (k, v) in counts {
            if v == 0 {
                return Err((k, format!("{k} must be at least 1")));
            }
        }
        if self.czv_samples < 2 {
            return Err(("czv_samples", "czv_samples must be at least 2".into()));
        }
        if let Some(e) = self.energy {
            if !(e > 0.0 && e.is_finite()) {
                return Err(("energy", format!("energy must be positive, got {e}")));
            }
        }
        if self.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(("times", "times must be finite and non-negative".into()));
        }
        if self.epsilons.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(("epsilons", "epsilons must be finite and non-negative".into()));
        }
        let [lo, hi] = self.escape_range;
        if !(lo > 0.0 && hi > lo) {
            return Err(("escape_range", "escape_range must satisfy 0 < lo < hi".into()));
        }
        Ok(())
    }
}

fn default_state() -> InitialState {
    InitialState::Coherent(CoherentSpec::default())
}

/// On-disk layout. `epsilon` has no default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    out: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cutoff: Option<usize>,
    #[serde(default)]
    params: PhysicsSection,
    #[serde(default = "default_state")]
    state: InitialState,
    #[serde(default)]
    integrator: IntegratorConfig,
    #[serde(default)]
    classifier: ClassifierConfig,
    #[serde(default)]
    classical: ClassicalConfig,
    #[serde(default)]
    rotation: RotationConfig,
    #[serde(default)]
    area: AreaConfig,
    #[serde(default)]
    run: RunConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: OscillatorParams,
    pub cutoff: usize,
    pub state: InitialState,
    pub integrator: IntegratorConfig,
    pub classifier: ClassifierConfig,
    pub classical: ClassicalConfig,
    pub rotation: RotationConfig,
    pub area: AreaConfig,
    pub run: RunConfig,
    pub seed: u64,
    /// Horizon; each subcommand has its own default.
    pub t_end: Option<f64>,
    pub out: PathBuf,
}

/// Command-line values that replace config keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub t_end: Option<f64>,
    pub out: Option<PathBuf>,
}

pub const DEFAULT_SEED: u64 = 1;
pub const MAX_CUTOFF: usize = 60;

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// 1-based line of the first `key = …` assignment at or after line `from`.
fn key_line_from(text: &str, key: &str, from: usize) -> Option<usize> {
    text.lines()
        .enumerate()
        .skip(from.saturating_sub(1))
        .find(|(_, l)| {
            l.trim_start()
                .strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|(i, _)| i + 1)
}

fn key_line(text: &str, key: &str) -> Option<usize> {
    key_line_from(text, key, 1)
}

/// Line of a parse error. Tagged tables report their header; the named
/// field, when the message quotes one, is searched from there.
fn parse_error_line(text: &str, e: &toml::de::Error) -> Option<usize> {
    let line = e.span().map(|s| line_of_offset(text, s.start))?;
    let quoted = e.message().split('`').nth(1);
    Some(quoted.and_then(|k| key_line_from(text, k, line)).unwrap_or(line))
}

/// First word of a validation message, if it names a key present in the text.
fn message_line(text: &str, message: &str) -> Option<usize> {
    let word: String = message.chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect();
    key_line(text, &word)
}

pub fn parse_config(text: &str) -> CliResult<ExperimentConfig> {
    parse_config_with(text, &Overrides::default())
}

pub fn parse_config_with(text: &str, overrides: &Overrides) -> CliResult<ExperimentConfig> {
    let file: FileConfig = toml::from_str(text).map_err(|e| {
        CliError::config(parse_error_line(text, &e), e.message().trim().to_string())
    })?;
    let epsilon = overrides
        .epsilon
        .or(file.epsilon)
        .ok_or_else(|| CliError::config(None, "epsilon required"))?;
    let ph = file.params;
    let params = OscillatorParams {
        omega_x: ph.omega_x,
        omega_y: ph.omega_y,
        mass_x: ph.mass_x,
        mass_y: ph.mass_y,
        hbar: ph.hbar,
        epsilon,
    };
    let fail = |key: Option<&str>, message: String| {
        let line = key.and_then(|k| key_line(text, k)).or_else(|| message_line(text, &message));
        CliError::config(line, message)
    };
    params.validate().map_err(|e| fail(None, strip_prefix(&e)))?;
    let cutoff = file.cutoff.unwrap_or_else(|| file.state.default_cutoff());
    if cutoff == 0 || cutoff > MAX_CUTOFF {
        return Err(fail(Some("cutoff"), format!("cutoff must lie in 1..={MAX_CUTOFF}, got {cutoff}")));
    }
    match &file.state {
        InitialState::Superposition(s) => s.validate().map_err(|e| fail(Some("terms"), strip_prefix(&e)))?,
        InitialState::Coherent(c) => {
            if c.level_cap.is_some_and(|cap| cap > cutoff) {
                return Err(fail(Some("level_cap"), "level_cap exceeds the basis cutoff".into()));
            }
        }
    }
    file.integrator.validate().map_err(|e| fail(None, strip_prefix(&e)))?;
    file.classifier.validate().map_err(|e| fail(None, strip_prefix(&e)))?;
    file.classical.validate().map_err(|e| fail(None, strip_prefix(&e)))?;
    file.run.validate().map_err(|(k, m)| fail(Some(k), m))?;
    let t_end = overrides.t_end.or(file.t_end);
    if let Some(t) = t_end {
        if !(t > 0.0 && t.is_finite()) {
            return Err(fail(Some("t_end"), format!("t_end must be positive, got {t}")));
        }
    }
    Ok(ExperimentConfig {
        params,
        cutoff,
        state: file.state,
        integrator: file.integrator,
        classifier: file.classifier,
        classical: file.classical,
        rotation: file.rotation,
        area: file.area,
        run: file.run,
        seed: overrides.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        t_end,
        out: overrides
            .out
            .clone()
            .or(file.out.map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out")),
    })
}

fn strip_prefix(e: &bohmchaos::Error) -> String {
    match e {
        bohmchaos::Error::InvalidParameter(m) => m.clone(),
        other => other.to_string(),
    }
}

impl ExperimentConfig {
    /// Fully explicit TOML text; parsing it yields this configuration.
    pub fn canonical(&self) -> String {
        let p = &self.params;
        let file = FileConfig {
            epsilon: Some(p.epsilon),
            seed: Some(self.seed),
            t_end: self.t_end,
            out: Some(self.out.to_string_lossy().into_owned()),
            cutoff: Some(self.cutoff),
            params: PhysicsSection {
                omega_x: p.omega_x,
                omega_y: p.omega_y,
                mass_x: p.mass_x,
                mass_y: p.mass_y,
                hbar: p.hbar,
            },
            state: self.state.clone(),
            integrator: self.integrator,
            classifier: self.classifier,
            classical: self.classical,
            rotation: self.rotation,
            area: self.area,
            run: self.run.clone(),
        };
        toml::to_string(&file).expect("configuration types serialize to TOML")
    }

    /// Same configuration at another perturbation.
    pub fn with_epsilon(&self, epsilon: f64) -> OscillatorParams {
        OscillatorParams { epsilon, ..self.params }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err_line(text: &str) -> (Option<usize>, String) {
        match parse_config(text).unwrap_err() {
            CliError::Config { line, message } => (line, message),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_requires_epsilon() {
        let (line, msg) = err_line("");
        assert_eq!(line, None);
        assert_eq!(msg, "epsilon required");
    }

    #[test]
    fn epsilon_only_gives_defaults() {
        let c = parse_config("epsilon = 0.05\n").unwrap();
        assert_eq!(c.params, OscillatorParams::with_epsilon(0.05));
        assert_eq!(c.cutoff, 12);
        assert_eq!(c.state, InitialState::Coherent(CoherentSpec::default()));
        assert_eq!(c.integrator, IntegratorConfig::default());
        assert_eq!(c.seed, DEFAULT_SEED);
    }

    #[test]
    fn superposition_uses_its_cutoff() {
        let c = parse_config("epsilon = 0.09\n[state]\nkind = \"superposition\"\n").unwrap();
        assert_eq!(c.cutoff, 8);
    }

    #[test]
    fn negative_frequency_rejected_with_line() {
        let (line, msg) = err_line("epsilon = 0.05\n\n[params]\nomega_y = -1\n");
        assert_eq!(line, Some(4));
        assert!(msg.contains("omega_y must be positive"), "{msg}");
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let (line, msg) = err_line("epsilon = 0.05\n[integrator]\nabs_tol = 1e-9\nbogus = 3\n");
        assert_eq!(line, Some(4));
        assert!(msg.contains("bogus"), "{msg}");
        let (line, _) = err_line("epsilon = 0.05\n[state]\nkind = \"coherent\"\namplitude = 2\n");
        assert_eq!(line, Some(4));
    }

    #[test]
    fn type_mismatch_rejected_with_line() {
        let (line, _) = err_line("epsilon = 0.05\n[run]\nensemble = \"many\"\n");
        assert_eq!(line, Some(3));
    }

    #[test]
    fn overrides_win() {
        let o = Overrides {
            epsilon: Some(0.01),
            seed: Some(9),
            t_end: Some(50.0),
            out: Some("x".into()),
        };
        let c = parse_config_with("epsilon = 0.05\nseed = 3\nt_end = 10\n", &o).unwrap();
        assert_eq!((c.params.epsilon, c.seed, c.t_end), (0.01, 9, Some(50.0)));
        assert_eq!(c.out, PathBuf::from("x"));
        assert!(parse_config_with("", &o).is_ok());
    }

    #[test]
    fn canonical_text_round_trips() {
        let text = "epsilon = 0.05\nt_end = 20\n[state]\nkind = \"superposition\"\n[run]\ntimes = [0, 5.5]\nenergy = 2.5\n";
        let c = parse_config(text).unwrap();
        let canon = c.canonical();
        let again = parse_config(&canon).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.canonical(), canon);
    }
}
