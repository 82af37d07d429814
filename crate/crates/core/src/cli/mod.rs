//! Command-line front end: configuration loading, subcommand dispatch and
//! atomic result output.

mod config;
mod output;
mod presets;

pub use config::{
    parse_axis, resolve_output_dir, AxisSpec, CriticalConfig, CrossCorrConfig, GridSpec,
    OutputConfig, RunConfig, Spacing, SweepConfig, OUTPUT_DIR_ENV,
};
pub use output::Artifacts;
pub use presets::{preset_configs, Figure};

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::error::Error;
use crate::experiments::{
    critical_pump, cross_correlation_scan, manifest, run_scenario, sweep, with_workers,
    PointOutcome,
};
use crate::moments::MomentLayout;
use crate::spectrum::count_peaks;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Run(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Run(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Run(e) => match e {
                Error::InvalidParameter(_) => "invalid_parameter",
                Error::DimensionMismatch { .. } => "dimension_mismatch",
                Error::ExpansionTooLarge { .. } => "expansion_too_large",
                Error::StepUnderflow { .. } => "step_underflow",
                Error::NonFinite { .. } => "non_finite",
                Error::NotConverged { .. } => "not_converged",
                Error::Singular { .. } => "singular",
                Error::SingularResolvent { .. } => "singular_resolvent",
                Error::Multimodal { .. } => "multimodal",
                Error::NoPeak => "no_peak",
                Error::UnresolvedWidth => "unresolved_width",
                Error::AboveRange { .. } => "above_range",
                Error::NotSteady => "not_steady",
                Error::Parse(_) => "parse",
                Error::Io(_) => "io",
            },
        }
    }

    /// Machine-readable error report.
    pub fn report(&self) -> serde_json::Value {
        json!({
            "status": "error",
            "kind": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        })
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "srlaser",
    version,
    about = "Steady-state superradiant laser simulator"
)]
struct Cli {
    /// Worker threads for parallel grids (default: one per logical core).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML config, or a JSON effective config from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. `--set rates.pump=0.05`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (beats the environment variable and the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Steady-state moments of one operating point.
    Steady(Common),
    /// Emission spectrum of one operating point.
    Spectrum(Common),
    /// Parameter sweep over the configured axes.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Axis `PARAM=v1,v2,..`, `PARAM=log:lo:hi:n` or `PARAM=linear:lo:hi:n`;
        /// replaces the configured axes.
        #[arg(long = "axis")]
        axes: Vec<String>,
    },
    /// Smallest pump with a single spectral peak.
    CriticalPump(Common),
    /// Inter-cluster coherences along a pump grid.
    Crosscorr(Common),
    /// Built-in figure preset.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
        #[command(flatten)]
        common: Common,
    },
    /// Print the effective configuration without running anything.
    Config(Common),
}

/// What a successful run produced.
#[derive(Debug)]
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    /// Set for `config`, which prints instead of writing files.
    pub stdout: Option<String>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn execute<I, T>(args: I) -> Result<Outcome, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Usage(e.to_string()))?;
    let workers = cli.workers;
    if workers == Some(0) {
        return Err(CliError::Usage("--workers must be >= 1".into()));
    }
    with_workers(workers, move || dispatch(cli.command))?
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<T> = args.into_iter().collect();
    if let Err(e) = Cli::try_parse_from(args.clone()) {
        use clap::error::ErrorKind;
        if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
            print!("{e}");
            return 0;
        }
    }
    match execute(args) {
        Ok(o) => {
            match o.stdout {
                Some(text) => print!("{text}"),
                None => {
                    let paths: Vec<String> =
                        o.outputs.iter().map(|p| p.display().to_string()).collect();
                    println!("{}", json!({ "status": "ok", "outputs": paths }));
                }
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.report());
            e.exit_code()
        }
    }
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let base = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut cfg = base.with_overrides(&common.overrides)?;
    cfg.output.directory = resolve_output_dir(common.out.as_deref(), &cfg);
    Ok(cfg)
}

fn dispatch(command: Command) -> Result<Outcome, CliError> {
    let (cfg, arts) = match command {
        Command::Config(c) => {
            let cfg = load(&c)?;
            cfg.scenario().validate()?;
            return Ok(Outcome {
                outputs: Vec::new(),
                stdout: Some(cfg.to_json()),
            });
        }
        Command::Steady(c) => {
            let cfg = load(&c)?;
            let arts = steady_artifacts(&cfg)?;
            (cfg, arts)
        }
        Command::Spectrum(c) => {
            let cfg = load(&c)?;
            let mut arts = Artifacts::new();
            spectrum_artifacts(&cfg, "", &mut arts)?;
            (cfg, arts)
        }
        Command::Sweep { common, axes } => {
            let mut cfg = load(&common)?;
            if !axes.is_empty() {
                cfg.sweep.axes = axes
                    .iter()
                    .map(|a| parse_axis(a))
                    .collect::<Result<_, _>>()?;
            }
            let mut arts = Artifacts::new();
            sweep_artifacts(&cfg, "sweep", &mut arts)?;
            (cfg, arts)
        }
        Command::CriticalPump(c) => {
            let cfg = load(&c)?;
            let mut arts = Artifacts::new();
            critical_artifacts(&cfg, "critical_pump", &mut arts)?;
            (cfg, arts)
        }
        Command::Crosscorr(c) => {
            let cfg = load(&c)?;
            let mut arts = Artifacts::new();
            crosscorr_artifacts(&cfg, "crosscorr", &mut arts)?;
            (cfg, arts)
        }
        Command::Reproduce { figure, common } => {
            let base = load(&common)?;
            let arts = presets::reproduce(figure, &common.overrides)?;
            let outputs = arts.commit(&base.output.directory)?;
            return Ok(Outcome {
                outputs,
                stdout: None,
            });
        }
    };
    let mut arts = arts;
    arts.add("effective_config.json", cfg.to_json());
    let outputs = arts.commit(&cfg.output.directory)?;
    Ok(Outcome {
        outputs,
        stdout: None,
    })
}

fn json_err(e: serde_json::Error) -> CliError {
    CliError::Run(Error::Parse(e.to_string()))
}

fn steady_artifacts(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let s = cfg.scenario();
    s.validate()?;
    let e = s.ensemble.build()?;
    let steady = crate::moments::steady_moments(&e, &s.rates, &s.solver)?;
    let layout = MomentLayout::for_ensemble(&e);
    let st = &steady.state;
    let mut arts = Artifacts::new();
    arts.add("steady_state.txt", st.to_text(&layout));
    arts.add("ensemble.txt", e.to_table());
    arts.add_json(
        "steady.json",
        &json!({
            "photon_number": st.photon_number,
            "population": st.population,
            "physicality_violations": st.physicality_violations(st.default_tolerance()),
            "convergence": steady.report,
        }),
    );
    Ok(arts)
}

/// Runs one operating point and adds `<prefix>spectrum.csv/json`.
pub(crate) fn spectrum_artifacts(
    cfg: &RunConfig,
    prefix: &str,
    arts: &mut Artifacts,
) -> Result<PointOutcome, CliError> {
    let o = run_scenario(&cfg.scenario())?;
    let written = if cfg.output.normalize {
        o.spectrum.normalized()
    } else {
        o.spectrum.clone()
    };
    let mut summary = o.spectrum.summary_json();
    let extra = json!({
        "photon_number": o.steady.state.photon_number,
        "converged": o.steady.report.converged,
        "peak_count": count_peaks(&o.spectrum, cfg.spectrum.prominence_frac),
        "normalized_output": cfg.output.normalize,
        "clusters": o.ensemble.len(),
        "total_atoms": o.ensemble.total_atoms(),
    });
    if let (Some(m), Some(x)) = (summary.as_object_mut(), extra.as_object()) {
        m.extend(x.clone());
    }
    arts.add(format!("{prefix}spectrum.csv"), written.to_csv());
    arts.add_json(format!("{prefix}spectrum.json"), &summary);
    Ok(o)
}

pub(crate) fn sweep_artifacts(
    cfg: &RunConfig,
    name: &str,
    arts: &mut Artifacts,
) -> Result<crate::experiments::SweepResult, CliError> {
    if cfg.sweep.axes.is_empty() {
        return Err(CliError::Config("sweep needs at least one axis".into()));
    }
    let axes: Vec<_> = cfg
        .sweep
        .axes
        .iter()
        .map(|a| a.to_axis())
        .collect::<Result<_, _>>()?;
    let result = sweep(&cfg.scenario(), &axes)?;
    add_sweep(cfg, name, &result, arts)?;
    Ok(result)
}

pub(crate) fn add_sweep(
    cfg: &RunConfig,
    name: &str,
    result: &crate::experiments::SweepResult,
    arts: &mut Artifacts,
) -> Result<(), CliError> {
    let failures = result.records.iter().filter(|r| r.error.is_some()).count();
    let details = json!({
        "axes": result.axes,
        "points": result.records.len(),
        "failures": failures,
        "threshold_n": result.threshold_n,
    });
    arts.add(format!("{name}.csv"), result.to_csv()?);
    arts.add_json(
        format!("{name}_manifest.json"),
        &manifest(cfg, cfg.ensemble.seed, details)?,
    );
    Ok(())
}

pub(crate) fn critical_artifacts(
    cfg: &RunConfig,
    name: &str,
    arts: &mut Artifacts,
) -> Result<crate::experiments::CriticalPump, CliError> {
    let c = &cfg.critical;
    let res = critical_pump(&cfg.scenario(), c.r_min, c.r_max, c.tol_r)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["R", "peak_count"]).map_err(csv_err)?;
    for (r, n) in &res.evaluations {
        w.write_record([format!("{r:.17e}"), n.to_string()])
            .map_err(csv_err)?;
    }
    arts.add(
        format!("{name}.csv"),
        w.into_inner().map_err(|e| csv_err(e.into_error().into()))?,
    );
    let details = serde_json::to_value(&res).map_err(json_err)?;
    arts.add_json(
        format!("{name}.json"),
        &manifest(cfg, cfg.ensemble.seed, details)?,
    );
    Ok(res)
}

pub(crate) fn crosscorr_artifacts(
    cfg: &RunConfig,
    name: &str,
    arts: &mut Artifacts,
) -> Result<crate::experiments::CrossCorrelationScan, CliError> {
    let s = cfg.scenario();
    s.validate()?;
    let pumps = cfg.crosscorr.pumps.resolve()?;
    let e = s.ensemble.build()?;
    let scan = cross_correlation_scan(&e, &s.rates, &pumps, &s.solver)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["R", "abs_first_centre"]).map_err(csv_err)?;
    for (r, v) in scan.pumps.iter().zip(scan.pair_trace()) {
        let v = v.map(|x| format!("{x:.17e}")).unwrap_or_default();
        w.write_record([format!("{r:.17e}"), v]).map_err(csv_err)?;
    }
    arts.add(format!("{name}.csv"), scan.to_csv()?);
    arts.add(
        format!("{name}_pair.csv"),
        w.into_inner().map_err(|e| csv_err(e.into_error().into()))?,
    );
    let details = json!({ "pair": scan.pair, "clusters": scan.clusters, "errors": scan.errors });
    arts.add_json(
        format!("{name}_manifest.json"),
        &manifest(cfg, cfg.ensemble.seed, details)?,
    );
    Ok(scan)
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Run(Error::Io(e.to_string()))
}
