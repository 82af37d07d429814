use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::CliError;
use crate::ensemble::SystemRates;
use crate::experiments::{Axis, EnsembleSpec, Param, Scenario};
use crate::solver::IntegratorConfig;
use crate::spectrum::SpectrumOptions;

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "SRLASER_OUTPUT_DIR";

/// Complete run configuration. All rates and frequencies are in units of κ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub rates: SystemRates,
    pub ensemble: EnsembleSpec,
    pub solver: IntegratorConfig,
    pub spectrum: SpectrumOptions,
    pub output: OutputConfig,
    pub sweep: SweepConfig,
    pub critical: CriticalConfig,
    pub crosscorr: CrossCorrConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Scale written spectra to `max S = 1`.
    pub normalize: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("results"),
            normalize: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

/// A parameter grid: either explicit `values` or `n` points from `lo` to `hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub values: Vec<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub n: Option<usize>,
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn range(lo: f64, hi: f64, n: usize, spacing: Spacing) -> Self {
        Self {
            values: Vec::new(),
            lo: Some(lo),
            hi: Some(hi),
            n: Some(n),
            spacing,
        }
    }

    pub fn resolve(&self) -> Result<Vec<f64>, CliError> {
        let range = (self.lo, self.hi, self.n);
        match (self.values.is_empty(), range) {
            (false, (None, None, None)) => Ok(self.values.clone()),
            (true, (Some(lo), Some(hi), Some(n))) => {
                if n < 2 || !(hi > lo) {
                    return Err(CliError::Config(format!(
                        "grid needs lo < hi and n >= 2, got [{lo}, {hi}] with n = {n}"
                    )));
                }
                match self.spacing {
                    Spacing::Log => Axis::log(Param::R, lo, hi, n)
                        .map(|a| a.values)
                        .map_err(|e| CliError::Config(e.to_string())),
                    Spacing::Linear => Ok((0..n)
                        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
                        .collect()),
                }
            }
            _ => Err(CliError::Config(
                "grid needs either `values` or all of `lo`, `hi`, `n`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub param: Param,
    pub grid: GridSpec,
}

impl AxisSpec {
    pub fn to_axis(&self) -> Result<Axis, CliError> {
        let mut values = self.grid.resolve()?;
        if self.param == Param::N {
            values.iter_mut().for_each(|v| *v = v.round());
        }
        Ok(Axis::new(self.param, values))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axes: Vec<AxisSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriticalConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub tol_r: f64,
}

impl Default for CriticalConfig {
    fn default() -> Self {
        Self {
            r_min: 1e-3,
            r_max: 1.0,
            tol_r: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossCorrConfig {
    pub pumps: GridSpec,
}

impl Default for CrossCorrConfig {
    fn default() -> Self {
        Self {
            pumps: GridSpec::range(1e-3, 0.2, 12, Spacing::Log),
        }
    }
}

impl RunConfig {
    pub fn scenario(&self) -> Scenario {
        Scenario {
            rates: self.rates,
            ensemble: self.ensemble.clone(),
            solver: self.solver.clone(),
            spectrum: self.spectrum.clone(),
        }
    }

    /// Parses TOML, or JSON when the text is a JSON object.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("json: {e}")))
        } else {
            toml::from_str(text).map_err(|e| CliError::Config(format!("toml: {e}")))
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies `key.path=value` overrides in order.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self, CliError> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut tree = serde_json::to_value(self).map_err(|e| CliError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        serde_json::from_value(tree).map_err(|e| CliError::Config(format!("after overrides: {e}")))
    }

    /// Pretty JSON that [`RunConfig::parse`] reads back to an equal value.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

fn apply_override(tree: &mut Value, spec: &str) -> Result<(), CliError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override `{spec}` is not key=value")))?;
    let mut node = tree;
    for key in path.trim().split('.') {
        let next = match node {
            Value::Object(map) => map.get_mut(key),
            Value::Array(items) => key.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        };
        node = next.ok_or_else(|| CliError::Usage(format!("unknown config key `{path}`")))?;
    }
    let raw = raw.trim();
    let mut value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.into()));
    // `1e4` parses as a float; integer fields need it as an integer.
    if node.is_u64() {
        if let Some(f) = value.as_f64() {
            if f >= 0.0 && f.fract() == 0.0 && f <= u64::MAX as f64 {
                value = Value::from(f as u64);
            }
        }
    }
    *node = value;
    Ok(())
}

/// Parses `PARAM=v1,v2,...`, `PARAM=log:lo:hi:n` or `PARAM=linear:lo:hi:n`.
pub fn parse_axis(spec: &str) -> Result<AxisSpec, CliError> {
    let bad = || CliError::Usage(format!("bad axis `{spec}`"));
    let (name, rest) = spec.split_once('=').ok_or_else(bad)?;
    let param: Param = name.trim().parse().map_err(|_| bad())?;
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let grid = match rest.split(':').collect::<Vec<_>>().as_slice() {
        [kind @ ("log" | "linear"), lo, hi, n] => GridSpec::range(
            num(lo)?,
            num(hi)?,
            n.trim().parse().map_err(|_| bad())?,
            if *kind == "log" {
                Spacing::Log
            } else {
                Spacing::Linear
            },
        ),
        [list] => GridSpec {
            values: list.split(',').map(num).collect::<Result<_, _>>()?,
            ..GridSpec::default()
        },
        _ => return Err(bad()),
    };
    Ok(AxisSpec { param, grid })
}

/// Output directory precedence: flag, then environment, then config.
pub fn resolve_output_dir(flag: Option<&Path>, config: &RunConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => config.output.directory.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_sections_parse() {
        let c = RunConfig::parse(
            "[rates]\npump = 0.05\n[ensemble]\nclusters = 11\ntotal_atoms = 500\n\
             [[sweep.axes]]\nparam = \"N\"\ngrid = { lo = 10.0, hi = 1000.0, n = 3 }\n",
        )
        .unwrap();
        assert_eq!(c.rates.pump, 0.05);
        assert_eq!(c.rates.gamma, 0.001);
        assert_eq!(c.ensemble.clusters, 11);
        assert_eq!(
            c.sweep.axes[0].to_axis().unwrap().values,
            vec![10.0, 100.0, 1000.0]
        );
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse("[rates]\npmup = 0.05\n").is_err());
        assert!(RunConfig::parse("[nonsense]\n").is_err());
        let c = RunConfig::default();
        assert!(c.with_overrides(&["rates.pmup=1".into()]).is_err());
        assert!(c.with_overrides(&["rates.pump".into()]).is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut c = RunConfig::default();
        c.rates.pump = 0.1 + 0.2;
        c.ensemble.sigma = 1.0 / 30.0;
        let back = RunConfig::parse(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn overrides_coerce_types() {
        let c = RunConfig::default()
            .with_overrides(&[
                "ensemble.total_atoms=1e4".into(),
                "ensemble.mode=composite".into(),
                "spectrum.half_span=0.5".into(),
                "ensemble.imbalance={\"at_detuning\":0.027,\"fraction\":0.01}".into(),
            ])
            .unwrap();
        assert_eq!(c.ensemble.total_atoms, 10_000);
        assert_eq!(c.spectrum.half_span, Some(0.5));
        assert_eq!(c.ensemble.imbalance.unwrap().at_detuning, 0.027);
        assert!(RunConfig::default()
            .with_overrides(&["ensemble.total_atoms=2.5".into()])
            .is_err());
    }

    #[test]
    fn axis_flags() {
        let a = parse_axis("R=log:0.001:0.1:3").unwrap().to_axis().unwrap();
        assert_eq!(a.param, Param::R);
        assert!((a.values[1] - 0.01).abs() < 1e-15);
        let b = parse_axis("N=10,20").unwrap().to_axis().unwrap();
        assert_eq!(b.values, vec![10.0, 20.0]);
        let l = parse_axis("xi=linear:0:1:5").unwrap().to_axis().unwrap();
        assert_eq!(l.values, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(parse_axis("Q=1").is_err());
        assert!(parse_axis("R=log:1:2").is_err());
    }

    #[test]
    fn grid_needs_one_form() {
        let mut g = GridSpec::range(1.0, 2.0, 2, Spacing::Log);
        g.values = vec![1.0];
        assert!(g.resolve().is_err());
        assert!(GridSpec::default().resolve().is_err());
    }
}
