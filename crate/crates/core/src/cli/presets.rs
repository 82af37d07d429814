//! Built-in parameter sets for each published figure. Seeds are pinned so
//! every preset is bit-deterministic.

use std::fmt::Write as _;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::json;

use super::config::{AxisSpec, GridSpec, RunConfig, Spacing};
use super::{
    add_sweep, critical_artifacts, crosscorr_artifacts, spectrum_artifacts, sweep_artifacts,
    Artifacts, CliError,
};
use crate::experiments::{linewidth_vs_n, CouplingSpec, EnsembleMode, Imbalance, Param};
use crate::spectrum::width_at;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
    Fig5a,
    Fig5b,
    Fig5c,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5a => "fig5a",
            Figure::Fig5b => "fig5b",
            Figure::Fig5c => "fig5c",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
            Figure::Fig8 => "fig8",
            Figure::Fig9 => "fig9",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Job {
    Spectrum,
    Sweep,
    LinewidthVsN,
    CriticalPump,
    Crosscorr,
}

/// One pipeline invocation of a preset.
#[derive(Debug, Clone, Serialize)]
pub struct PresetRun {
    pub name: String,
    pub job: Job,
    pub config: RunConfig,
}

fn run(name: impl Into<String>, job: Job, config: RunConfig) -> PresetRun {
    PresetRun {
        name: name.into(),
        job,
        config,
    }
}

/// Identical atoms: a single resonant cluster.
fn identical(n: u64, g: f64, pump: f64) -> RunConfig {
    let mut c = RunConfig::default();
    c.ensemble.clusters = 1;
    c.ensemble.sigma = 0.0;
    c.ensemble.total_atoms = n;
    c.ensemble.g = g;
    c.rates.gamma = 0.001;
    c.rates.pump = pump;
    c
}

/// `M` Gaussian clusters over `±span`, uniform coupling.
fn gaussian(m: usize, n: u64, sigma: f64, span: f64, g: f64, pump: f64) -> RunConfig {
    let mut c = RunConfig::default();
    c.ensemble.clusters = m;
    c.ensemble.total_atoms = n;
    c.ensemble.sigma = sigma;
    c.ensemble.span = Some(span);
    c.ensemble.g = g;
    c.rates.gamma = 0.001;
    c.rates.pump = pump;
    c
}

fn axis(param: Param, lo: f64, hi: f64, n: usize) -> AxisSpec {
    AxisSpec {
        param,
        grid: GridSpec::range(lo, hi, n, Spacing::Log),
    }
}

/// Pump rates of the four spectra in the synchronization figure.
pub const FIG5_PUMPS: [f64; 4] = [0.001, 0.01, 0.02, 0.05];

/// Every run of a preset, before user overrides.
pub fn preset_configs(fig: Figure) -> Vec<PresetRun> {
    match fig {
        Figure::Fig2 => {
            let mut nr = identical(10_000, 0.002, 0.05);
            nr.sweep.axes = vec![axis(Param::N, 1e2, 1e6, 9), axis(Param::R, 1e-3, 1.0, 13)];
            let mut cut_n = identical(10_000, 0.002, 0.05);
            cut_n.sweep.axes = vec![axis(Param::N, 1e2, 1e6, 17)];
            let mut gr = identical(50_000, 0.002, 0.05);
            gr.rates.cav_dephasing = 1.0;
            gr.sweep.axes = vec![axis(Param::G, 1e-4, 1e-2, 9), axis(Param::R, 1e-3, 1.0, 13)];
            let mut cut_r = identical(50_000, 0.001, 0.05);
            cut_r.rates.cav_dephasing = 1.0;
            cut_r.sweep.axes = vec![axis(Param::R, 1e-3, 1.0, 25)];
            let mut cut_r_nu = cut_r.clone();
            cut_r_nu.rates.atom_dephasing = 0.01;
            vec![
                run("fig2_N_R", Job::Sweep, nr),
                run("fig2_cut_N", Job::Sweep, cut_n),
                run("fig2_g_R", Job::Sweep, gr),
                run("fig2_cut_R", Job::Sweep, cut_r),
                run("fig2_cut_R_nu", Job::Sweep, cut_r_nu),
            ]
        }
        Figure::Fig3 => {
            let mut c = identical(50_000, 0.001, 0.01);
            c.sweep.axes = vec![
                axis(Param::Xi, 1e-3, 10.0, 9),
                axis(Param::Nu, 1e-4, 0.1, 7),
            ];
            vec![run("fig3_xi_nu", Job::Sweep, c)]
        }
        Figure::Fig4 => [5u64, 500, 5000]
            .iter()
            .map(|&n| {
                run(
                    format!("fig4_N{n}"),
                    Job::Spectrum,
                    gaussian(5, n, 1.0, 1.0, 0.002, 0.01),
                )
            })
            .collect(),
        Figure::Fig5a | Figure::Fig5b | Figure::Fig5c => FIG5_PUMPS
            .iter()
            .map(|&r| {
                let mut c = gaussian(31, 10_000, 0.1, 0.1, 0.002, r);
                c.output.normalize = true;
                match fig {
                    Figure::Fig5b => {
                        c.ensemble.imbalance = Some(Imbalance {
                            at_detuning: 0.027,
                            fraction: 0.01,
                        })
                    }
                    Figure::Fig5c => {
                        c.ensemble.fluctuation = 0.1;
                        c.ensemble.seed = 1;
                    }
                    _ => {}
                }
                run(format!("{}_R{r}", fig.name()), Job::Spectrum, c)
            })
            .collect(),
        Figure::Fig6 => {
            let mut runs = Vec::new();
            for n in [100u64, 10_000] {
                for sigma in [0.02, 0.05, 0.1, 0.15, 0.2] {
                    let mut c = gaussian(31, n, sigma, 3.0 * sigma, 0.001, 0.01);
                    c.critical.r_min = 1e-3;
                    c.critical.r_max = 1.0;
                    c.critical.tol_r = 0.004 * sigma;
                    runs.push(run(format!("fig6_N{n}_sigma{sigma}"), Job::CriticalPump, c));
                }
            }
            runs
        }
        Figure::Fig7 => {
            let mut runs = Vec::new();
            for (label, sigma) in [("300", 1.0 / 300.0), ("30", 1.0 / 30.0), ("3", 1.0 / 3.0)] {
                let mut c = gaussian(31, 10_000, sigma, 3.0 * sigma, 0.001, 0.05);
                c.sweep.axes = vec![axis(Param::N, 1e3, 1e6, 13)];
                runs.push(run(
                    format!("fig7_sigma_k_over_{label}"),
                    Job::LinewidthVsN,
                    c,
                ));
            }
            let mut c = gaussian(11, 10_000, 1.0 / 30.0, 0.1, 0.001, 0.05);
            c.ensemble.mode = EnsembleMode::Composite;
            c.ensemble.coupling_clusters = 5;
            c.ensemble.g0 = 0.0013;
            c.sweep.axes = vec![axis(Param::N, 1e3, 1e6, 13)];
            runs.push(run("fig7_composite_sigma_k_over_30", Job::LinewidthVsN, c));
            runs
        }
        Figure::Fig8 => {
            let mut base = gaussian(11, 10_000, 1.0 / 30.0, 0.1, 0.001, 0.05);
            base.ensemble.mode = EnsembleMode::Composite;
            base.ensemble.coupling_clusters = 5;
            base.ensemble.g0 = 0.0013;
            base.sweep.axes = vec![axis(Param::N, 1e3, 1e6, 13)];
            let variant = |xi: f64, nu: f64, pump: f64| {
                let mut c = base.clone();
                c.rates.cav_dephasing = xi;
                c.rates.atom_dephasing = nu;
                c.rates.pump = pump;
                c
            };
            vec![
                run("fig8_clean", Job::LinewidthVsN, variant(0.0, 0.0, 0.05)),
                run("fig8_xi1", Job::LinewidthVsN, variant(1.0, 0.0, 0.05)),
                run("fig8_xi0.01", Job::LinewidthVsN, variant(0.01, 0.0, 0.05)),
                run(
                    "fig8_xi1_nu0.01",
                    Job::LinewidthVsN,
                    variant(1.0, 0.01, 0.005),
                ),
            ]
        }
        Figure::Fig9 => {
            let scan = gaussian(31, 10_000, 0.1, 0.1, 0.002, 0.05);
            let mut single = scan.clone();
            single.crosscorr.pumps = GridSpec {
                values: vec![0.05],
                ..GridSpec::default()
            };
            vec![
                run("fig9a_R0.05", Job::Crosscorr, single),
                run("fig9b_scan", Job::Crosscorr, scan),
            ]
        }
    }
}

/// Runs every job of a preset with `overrides` applied to each config.
pub fn reproduce(fig: Figure, overrides: &[String]) -> Result<Artifacts, CliError> {
    let mut runs = preset_configs(fig);
    for r in &mut runs {
        r.config = r.config.with_overrides(overrides)?;
        r.config.scenario().validate()?;
    }
    let mut arts = Artifacts::new();
    let mut summary = String::new();
    for r in &runs {
        let cfg = &r.config;
        match r.job {
            Job::Spectrum => {
                let o = spectrum_artifacts(cfg, &format!("{}_", r.name), &mut arts)?;
                let s = &o.spectrum;
                let central = s
                    .peaks
                    .iter()
                    .min_by(|a, b| a.position.abs().total_cmp(&b.position.abs()))
                    .and_then(|p| width_at(&s.frequencies, &s.values, p.index).ok());
                if summary.is_empty() {
                    summary.push_str(
                        "run,N,R,peak_count,fwhm,central_fwhm,lineshift,photon_number,weight\n",
                    );
                }
                let _ = writeln!(
                    summary,
                    "{},{},{:e},{},{},{},{},{:.17e},{:.17e}",
                    r.name,
                    o.ensemble.total_atoms(),
                    cfg.rates.pump,
                    s.peaks.len(),
                    opt(s.fwhm),
                    opt(central),
                    opt(s.lineshift),
                    o.steady.state.photon_number,
                    s.weight
                );
            }
            Job::Sweep => {
                sweep_artifacts(cfg, &r.name, &mut arts)?;
            }
            Job::LinewidthVsN => {
                let n_axis = cfg
                    .sweep
                    .axes
                    .iter()
                    .find(|a| a.param == Param::N)
                    .ok_or_else(|| CliError::Config("linewidth run needs an N axis".into()))?
                    .to_axis()?;
                let coupling = match cfg.ensemble.mode {
                    EnsembleMode::Composite => CouplingSpec::Clusters {
                        k: cfg.ensemble.coupling_clusters,
                        g0: cfg.ensemble.g0,
                    },
                    _ => CouplingSpec::Uniform { g: cfg.ensemble.g },
                };
                let res = linewidth_vs_n(
                    &cfg.scenario(),
                    cfg.ensemble.sigma,
                    &n_axis.values,
                    coupling,
                    (cfg.rates.cav_dephasing, cfg.rates.atom_dephasing),
                    cfg.rates.pump,
                )?;
                add_sweep(cfg, &r.name, &res, &mut arts)?;
            }
            Job::CriticalPump => {
                let c = critical_artifacts(cfg, &r.name, &mut arts)?;
                if summary.is_empty() {
                    summary.push_str("run,N,sigma,critical_pump,method,ratio_to_0.4sigma\n");
                }
                let sigma = cfg.ensemble.sigma;
                let _ = writeln!(
                    summary,
                    "{},{},{:e},{:.17e},{},{:.6}",
                    r.name,
                    cfg.ensemble.total_atoms,
                    sigma,
                    c.critical_pump,
                    serde_json::to_value(c.method)
                        .map_err(super::json_err)?
                        .as_str()
                        .unwrap_or(""),
                    c.critical_pump / (0.4 * sigma)
                );
            }
            Job::Crosscorr => {
                crosscorr_artifacts(cfg, &r.name, &mut arts)?;
            }
        }
    }
    if !summary.is_empty() {
        arts.add(format!("{}_summary.csv", fig.name()), summary);
    }
    arts.add_json(
        format!("{}_preset.json", fig.name()),
        &json!({ "figure": fig, "runs": runs }),
    );
    Ok(arts)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.17e}")).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for fig in Figure::value_variants() {
            let runs = preset_configs(*fig);
            assert!(!runs.is_empty());
            for r in runs {
                r.config.scenario().validate().unwrap();
                for a in &r.config.sweep.axes {
                    a.to_axis().unwrap();
                }
                r.config.crosscorr.pumps.resolve().unwrap();
            }
        }
    }

    #[test]
    fn fig4_uses_five_clusters_at_cluster_detunings() {
        let runs = preset_configs(Figure::Fig4);
        let e = runs[0].config.ensemble.build().unwrap();
        assert_eq!(e.detunings(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(e.populations(), vec![1; 5]);
    }

    #[test]
    fn names_match_cli_values() {
        for fig in Figure::value_variants() {
            assert_eq!(fig.to_possible_value().unwrap().get_name(), fig.name());
        }
    }
}
