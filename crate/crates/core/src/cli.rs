//! Batch front end: `dosc <spectrum|groundstate|dynamics|compare|weak> --config run.json`.
//!
//! A run reads one JSON config, applies `--override key=value` edits, writes its
//! CSV/JSON products into the output directory and exits with 0 (ok),
//! 1 (usage or config), 2 (positivity) or 3 (numerical failure). Failures are
//! also reported as a JSON object on stderr.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dynamics::{self, DampingClassification, RelaxationReport, ShortTimeReport};
use crate::error::{DoscError, Result};
use crate::fano::{compute_pi, FanoOptions, SpectralSolution};
use crate::groundstate::{
    characteristic_function, ground_state_moments, interpretation_identities, GroundStateSummary,
    IdentityReport,
};
use crate::measure::FrequencyMeasure;
use crate::oracle::{
    compare, discretize, normal_modes, recurrence_estimate, relaxation_run, Continuum,
    DiscretizationScheme, FiniteBathModel, HistogramBins, NormalModeDecomposition, RelaxationRun,
};
use crate::spectra::{
    positivity_check, CouplingFamily, CouplingSpectrum, PositivityReport, UnitSystem,
};
use crate::weakcoupling::{lorentzian_fit, write_fit_csv};

/// Writes a line to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

/// Spectrum descriptor as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectrumConfig {
    /// Give exactly one of `amplitude` (κ) or `strength` (κ²Λ/ω₀).
    OhmicExp {
        #[serde(default)]
        amplitude: Option<f64>,
        #[serde(default)]
        strength: Option<f64>,
        cutoff: f64,
        #[serde(default)]
        omega_max: Option<f64>,
    },
    FlatBand {
        level: f64,
        lower: f64,
        upper: f64,
        #[serde(default)]
        omega_max: Option<f64>,
    },
    GaussianPeak {
        level: f64,
        center: f64,
        width: f64,
        #[serde(default)]
        omega_max: Option<f64>,
    },
    Tabulated {
        omegas: Vec<f64>,
        values: Vec<f64>,
        #[serde(default)]
        omega_max: Option<f64>,
    },
    /// `V ≡ 0`.
    Uncoupled,
    /// A finite bath given mode by mode; `couplings` are `V_k`, so `K₀k = V_k√(ω₀ω_k)`.
    Discrete {
        bath_freqs: Vec<f64>,
        couplings: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub t_max: f64,
    /// Intervals between `0` and `t_max`.
    pub steps: usize,
    pub x0: f64,
    pub p0: f64,
    /// Horizon of the damping classification.
    pub scan_window: f64,
    pub relaxation_threshold: f64,
    /// Panel budget when the grid must be refined to resolve `t_max`.
    pub max_panels: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            t_max: 50.0,
            steps: 5000,
            x0: 1.0,
            p0: 0.0,
            scan_window: 50.0,
            relaxation_threshold: dynamics::RELAXATION_THRESHOLD,
            max_panels: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelaxationConfig {
    pub x0: f64,
    pub samples: usize,
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        RelaxationConfig {
            x0: 1.0,
            samples: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub modes: usize,
    pub scheme: DiscretizationScheme,
    pub bins: HistogramBins,
    /// When set, `compare` also evolves a displaced oscillator and checks relaxation
    /// on `[20/γ, recurrence/2]` with `γ` the fitted HWHM.
    pub relaxation: Option<RelaxationConfig>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            modes: 4000,
            scheme: DiscretizationScheme::Uniform,
            bins: HistogramBins::default(),
            relaxation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub var_rel: f64,
    pub pi_l1: f64,
    pub relaxation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            var_rel: 0.005,
            pi_l1: 0.02,
            relaxation: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeakConfig {
    /// `|ξ|` at which the characteristic function is reported.
    pub xi: f64,
}

impl Default for WeakConfig {
    fn default() -> Self {
        WeakConfig { xi: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub units: UnitSystem,
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub grid: FanoOptions,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub weak: WeakConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn parse_error(e: serde_path_to_error::Error<serde_json::Error>) -> DoscError {
    let path = e.path().to_string();
    DoscError::Config(format!("at `{path}`: {}", e.into_inner()))
}

impl RunConfig {
    /// Parses a config document, applying `key=value` overrides first.
    /// Override values are read as JSON and fall back to plain strings.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let config: RunConfig = if overrides.is_empty() {
            let mut de = serde_json::Deserializer::from_str(text);
            let c = serde_path_to_error::deserialize(&mut de).map_err(parse_error)?;
            de.end().map_err(|e| DoscError::Config(e.to_string()))?;
            c
        } else {
            let mut doc: Value =
                serde_json::from_str(text).map_err(|e| DoscError::Config(e.to_string()))?;
            for o in overrides {
                apply_override(&mut doc, o)?;
            }
            serde_path_to_error::deserialize(doc).map_err(parse_error)?
        };
        config.units.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            DoscError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        RunConfig::parse(&text, overrides)
    }

    /// The continuum spectrum, or `None` for a finite bath.
    pub fn coupling_spectrum(&self) -> Result<Option<CouplingSpectrum>> {
        let (family, omega_max) = match &self.spectrum {
            SpectrumConfig::OhmicExp {
                amplitude,
                strength,
                cutoff,
                omega_max,
            } => {
                let amplitude = match (amplitude, strength) {
                    (Some(a), None) => *a,
                    (None, Some(s)) => {
                        if !(*s >= 0.0 && *cutoff > 0.0) {
                            return Err(DoscError::Config(format!(
                                "ohmic_exp needs strength >= 0 and cutoff > 0, got {s}, {cutoff}"
                            )));
                        }
                        (s * self.units.omega0 / cutoff).sqrt()
                    }
                    _ => {
                        return Err(DoscError::Config(
                            "ohmic_exp needs exactly one of `amplitude` or `strength`".into(),
                        ))
                    }
                };
                (
                    CouplingFamily::OhmicExp {
                        amplitude,
                        cutoff: *cutoff,
                    },
                    *omega_max,
                )
            }
            SpectrumConfig::FlatBand {
                level,
                lower,
                upper,
                omega_max,
            } => (
                CouplingFamily::FlatBand {
                    level: *level,
                    lower: *lower,
                    upper: *upper,
                },
                *omega_max,
            ),
            SpectrumConfig::GaussianPeak {
                level,
                center,
                width,
                omega_max,
            } => (
                CouplingFamily::GaussianPeak {
                    level: *level,
                    center: *center,
                    width: *width,
                },
                *omega_max,
            ),
            SpectrumConfig::Tabulated {
                omegas,
                values,
                omega_max,
            } => (
                CouplingFamily::Tabulated {
                    omegas: omegas.clone(),
                    values: values.clone(),
                },
                *omega_max,
            ),
            SpectrumConfig::Uncoupled => {
                let w0 = self.units.omega0;
                (
                    CouplingFamily::FlatBand {
                        level: 0.0,
                        lower: 0.5 * w0,
                        upper: 2.0 * w0,
                    },
                    None,
                )
            }
            SpectrumConfig::Discrete { .. } => return Ok(None),
        };
        Ok(Some(CouplingSpectrum::new(family, omega_max)?))
    }

    pub fn discrete_model(&self) -> Result<Option<FiniteBathModel>> {
        match &self.spectrum {
            SpectrumConfig::Discrete {
                bath_freqs,
                couplings,
            } => Ok(Some(FiniteBathModel::manual(
                self.units.omega0,
                bath_freqs.clone(),
                couplings.clone(),
            )?)),
            _ => Ok(None),
        }
    }
}

fn apply_override(doc: &mut Value, item: &str) -> Result<()> {
    let (key, raw) = item.split_once('=').ok_or_else(|| {
        DoscError::Config(format!("override `{item}` is not of the form key=value"))
    })?;
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(DoscError::Config(format!(
            "override `{item}` has an empty key segment"
        )));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        let Value::Object(map) = node else {
            return Err(DoscError::Config(format!(
                "override `{key}`: `{}` is not an object",
                parts[..i].join(".")
            )));
        };
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert(Value::Null);
    }
    Ok(())
}

#[derive(Debug, Parser)]
#[command(
    name = "dosc",
    version,
    about = "Exact diagonalisation of the strongly-damped quantum harmonic oscillator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Config edit `dotted.key=value`; the value is parsed as JSON when possible.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// π(ω) on an adaptive grid: pi.csv, bound_states.csv, spectrum.json.
    Spectrum,
    /// Reduced ground state: groundstate.json, groundstate.txt.
    Groundstate,
    /// Kernels and mean trajectory: kernels.csv, trajectory.csv, damping.json.
    Dynamics,
    /// Continuum against the finite-bath oracle: comparison.json, pi_histogram.csv.
    Compare,
    /// Lorentzian fit near resonance: weak.json, fit.csv.
    Weak,
}

/// Where the frequency measure of a run comes from.
enum Source {
    Continuum(Box<SpectralSolution>),
    /// `V ≡ 0`; `π` is a point mass at `ω₀`.
    Uncoupled,
    Discrete(Box<NormalModeDecomposition>),
}

impl Source {
    fn build(config: &RunConfig) -> Result<Source> {
        if let Some(model) = config.discrete_model()? {
            let d = normal_modes(&model)?;
            return Ok(Source::Discrete(Box::new(d)));
        }
        let spec = config.coupling_spectrum()?.expect("continuum family");
        if spec.is_uncoupled() {
            return Ok(Source::Uncoupled);
        }
        Ok(Source::Continuum(Box::new(compute_pi(
            &spec,
            &config.units,
            &config.grid,
        )?)))
    }

    fn measure(&self, units: &UnitSystem) -> Result<FrequencyMeasure> {
        match self {
            Source::Continuum(sol) => sol.measure(),
            Source::Uncoupled => FrequencyMeasure::point_mass(units.omega0),
            Source::Discrete(d) => d.measure(),
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Source::Continuum(_) => "continuum",
            Source::Uncoupled => "uncoupled",
            Source::Discrete(_) => "discrete",
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub family: String,
    pub omega_max: f64,
    pub positivity: PositivityReport,
    pub truncation_tail: f64,
    pub nodes: usize,
    pub panels: usize,
    pub resolution: f64,
    pub norm_defect: f64,
    pub sum_rule_defect: f64,
    pub error_estimate: f64,
    pub mean: f64,
    pub mean_inverse: f64,
    pub fourth_moment_reliable: bool,
    pub resonances: Vec<f64>,
    pub bound_states: Vec<crate::fano::BoundState>,
}

impl SpectrumSummary {
    pub fn of(sol: &SpectralSolution) -> Result<Self> {
        Ok(SpectrumSummary {
            family: sol.spectrum.family_name().into(),
            omega_max: sol.spectrum.omega_max(),
            positivity: positivity_check(&sol.spectrum, &sol.units)?,
            truncation_tail: sol.spectrum.truncation_tail(),
            nodes: sol.omega.len(),
            panels: sol.grid.panels().len(),
            resolution: sol.resolution(),
            norm_defect: sol.norm_defect,
            sum_rule_defect: sol.sum_rule_defect(),
            error_estimate: sol.error_estimate,
            mean: sol.moment(|w| w),
            mean_inverse: sol.moment(|w| 1.0 / w),
            fourth_moment_reliable: sol.fourth_moment_reliable,
            resonances: sol.grid.peaks.clone(),
            bound_states: sol.bound_states.clone(),
        })
    }
}

fn cmd_spectrum(config: &RunConfig, out: &Path) -> Result<()> {
    let spec = match config.coupling_spectrum()? {
        Some(s) => s,
        None => {
            return Err(DoscError::Config(
                "`spectrum` needs a continuum family, not a discrete bath".into(),
            ))
        }
    };
    let sol = compute_pi(&spec, &config.units, &config.grid)?;
    sol.write_csv(create(&out.join("pi.csv"))?)?;
    sol.write_bound_states_csv(create(&out.join("bound_states.csv"))?)?;
    let summary = SpectrumSummary::of(&sol)?;
    write_json(&out.join("spectrum.json"), &summary)?;
    say!("norm defect      {:.3e}", summary.norm_defect);
    say!("sum-rule defect  {:.3e}", summary.sum_rule_defect);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStateOutput {
    pub source: String,
    pub summary: GroundStateSummary,
    pub identities: IdentityReport,
}

fn cmd_groundstate(config: &RunConfig, out: &Path) -> Result<()> {
    let source = Source::build(config)?;
    let m = source.measure(&config.units)?;
    let summary = ground_state_moments(&m, &config.units)?;
    let identities = interpretation_identities(&m, &config.units)?;
    let report = format!(
        "{}  mutual information = 2S (defect {:.3e})\n  potential coefficient <<w^2>> = {} (defect {:.3e})\n",
        summary.report_text(),
        identities.mutual_info_defect,
        identities.potential_coefficient,
        identities.potential_defect
    );
    write_json(
        &out.join("groundstate.json"),
        &GroundStateOutput {
            source: source.label().into(),
            summary,
            identities,
        },
    )?;
    fs::write(out.join("groundstate.txt"), &report)?;
    say!("{}", report.trim_end());
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DampingOutput {
    pub source: String,
    pub classification: DampingClassification,
    pub short_time: ShortTimeReport,
    pub relaxation: RelaxationReport,
}

fn cmd_dynamics(config: &RunConfig, out: &Path) -> Result<()> {
    let t = &config.time;
    if t.steps == 0 || !(t.t_max > 0.0) {
        return Err(DoscError::Config(
            "time.t_max must be positive and time.steps at least 1".into(),
        ));
    }
    let mut source = Source::build(config)?;
    let horizon = t.t_max.max(t.scan_window);
    if let Source::Continuum(sol) = &source {
        if sol.resolution() * horizon > crate::measure::ANTI_ALIASING {
            source = Source::Continuum(Box::new(sol.refine_for_time(
                horizon,
                t.max_panels,
                &config.grid,
            )?));
        }
    }
    let m = source.measure(&config.units)?;
    let times = dynamics::uniform_times(t.t_max, t.steps);
    let k = dynamics::kernels(&m, &times)?;
    let traj = dynamics::mean_trajectory(&k, t.x0, t.p0, &config.units);
    k.write_csv(create(&out.join("kernels.csv"))?)?;
    dynamics::write_trajectory_csv(&k, &traj, create(&out.join("trajectory.csv"))?)?;
    let output = DampingOutput {
        source: source.label().into(),
        classification: dynamics::classify_damping(&m, &config.units, t.scan_window)?,
        short_time: dynamics::short_time_check(&m, &config.units)?,
        relaxation: dynamics::relaxation_check(&k, t.relaxation_threshold),
    };
    write_json(&out.join("damping.json"), &output)?;
    say!("damping          {:?}", output.classification.class);
    if let Some(ts) = output.classification.first_stationary_time {
        say!("first stationary t = {ts}");
    }
    say!("relaxed          {}", output.relaxation.relaxed);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonOutput {
    pub report: crate::oracle::ComparisonReport,
    pub relaxation: Option<RelaxationRun>,
    pub passed: bool,
}

fn cmd_compare(config: &RunConfig, out: &Path) -> Result<()> {
    let spec = match config.coupling_spectrum()? {
        Some(s) => s,
        None => {
            return Err(DoscError::Config(
                "`compare` needs a continuum family to discretise".into(),
            ))
        }
    };
    let o = &config.oracle;
    let model = discretize(&spec, &config.units, o.modes, o.scheme)?;
    let decomp = normal_modes(&model)?;
    let tolerances = (config.tolerances.var_rel, config.tolerances.pi_l1);
    let sol = if spec.is_uncoupled() {
        None
    } else {
        Some(compute_pi(&spec, &config.units, &config.grid)?)
    };
    let continuum = match &sol {
        Some(s) => Continuum::Solution(s, &config.grid),
        None => Continuum::Uncoupled(&config.units),
    };
    let report = compare(continuum, &model, &decomp, o.scheme, o.bins, tolerances)?;
    let hist = crate::oracle::discrete_pi_histogram(
        &decomp,
        &o.bins.edges(
            &decomp,
            sol.as_ref()
                .and_then(|s| s.omega.last().copied())
                .unwrap_or(0.0),
        )?,
    )?;
    hist.write_csv(create(&out.join("pi_histogram.csv"))?)?;
    let relaxation = match (&o.relaxation, &sol) {
        (Some(r), Some(s)) => {
            let fit = lorentzian_fit(s, &config.grid)?;
            let window = (20.0 / fit.hwhm_fit, 0.5 * recurrence_estimate(&decomp));
            Some(relaxation_run(
                &model,
                &decomp,
                &config.units,
                r.x0,
                window,
                r.samples,
                config.tolerances.relaxation,
            )?)
        }
        _ => None,
    };
    let passed = report.passed && relaxation.as_ref().is_none_or(|r| r.passed);
    say!("var_x rel error  {:.3e}", report.var_x_rel_error);
    say!("var_p rel error  {:.3e}", report.var_p_rel_error);
    say!("pi L1 distance   {:.3e}", report.pi_l1_distance);
    if let Some(r) = &relaxation {
        say!(
            "relaxation       window [{:.2}, {:.2}] passed {}",
            r.window.0,
            r.window.1,
            r.passed
        );
    }
    say!("verdict          {}", if passed { "PASS" } else { "FAIL" });
    write_json(
        &out.join("comparison.json"),
        &ComparisonOutput {
            report,
            relaxation,
            passed,
        },
    )?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakOutput {
    pub report: crate::weakcoupling::WeakCouplingReport,
    pub hwhm_rel_error: f64,
    /// `(center_fit - ω₀ - F(ω₀)) / hwhm_pred`.
    pub center_offset: f64,
    pub xi: f64,
    /// `χ` at `ξ = |ξ|` and at `ξ = i|ξ|`.
    pub chi_real: f64,
    pub chi_imag: f64,
    /// `exp(-|ξ|²/2)`.
    pub chi_vacuum: f64,
}

fn cmd_weak(config: &RunConfig, out: &Path) -> Result<()> {
    let spec = match config.coupling_spectrum()? {
        Some(s) => s,
        None => return Err(DoscError::Config("`weak` needs a continuum family".into())),
    };
    let sol = compute_pi(&spec, &config.units, &config.grid)?;
    let report = lorentzian_fit(&sol, &config.grid)?;
    write_fit_csv(&sol, &report, create(&out.join("fit.csv"))?)?;
    let m = sol.measure()?;
    let xi = config.weak.xi;
    let output = WeakOutput {
        hwhm_rel_error: report.hwhm_rel_error(),
        center_offset: report.center_offset(config.units.omega0),
        xi,
        chi_real: characteristic_function(&m, &config.units, xi, 0.0),
        chi_imag: characteristic_function(&m, &config.units, 0.0, xi),
        chi_vacuum: (-0.5 * xi * xi).exp(),
        report,
    };
    say!("F(omega0)        {}", output.report.f0);
    say!(
        "hwhm fit / pred  {} / {}",
        output.report.hwhm_fit,
        output.report.hwhm_pred
    );
    say!("residual L1      {:.3e}", output.report.residual_l1);
    write_json(&out.join("weak.json"), &output)?;
    Ok(())
}

/// Runs one subcommand against a parsed config, writing into `out`.
pub fn execute(command: Command, config: &RunConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    write_json(&out.join("config.json"), config)?;
    match command {
        Command::Spectrum => cmd_spectrum(config, out),
        Command::Groundstate => cmd_groundstate(config, out),
        Command::Dynamics => cmd_dynamics(config, out),
        Command::Compare => cmd_compare(config, out),
        Command::Weak => cmd_weak(config, out),
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("DOSC_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        DoscError::Config(format!(
            "DOSC_THREADS must be a positive integer, got `{raw}`"
        ))
    })?;
    // A second initialisation in the same process is harmless.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn report_error(kind: &str, message: &str, code: i32) -> i32 {
    eprintln!(
        "{}",
        json!({ "error": kind, "message": message, "exit_code": code })
    );
    code
}

/// Entry point of the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            say!("{}", e.to_string().trim_end());
            return 0;
        }
        Err(e) => return report_error("usage", e.to_string().trim_end(), 1),
    };
    let result = (|| {
        configure_threads()?;
        let path = cli
            .config
            .as_deref()
            .ok_or_else(|| DoscError::Config("--config PATH is required".into()))?;
        let config = RunConfig::load(path, &cli.overrides)?;
        let out = cli
            .out
            .clone()
            .or_else(|| config.output.clone())
            .unwrap_or_else(|| PathBuf::from("dosc-out"));
        execute(cli.command, &config, &out)
    })();
    match result {
        Ok(()) => 0,
        Err(e) => report_error(e.kind(), &e.to_string(), e.exit_code()),
    }
}
