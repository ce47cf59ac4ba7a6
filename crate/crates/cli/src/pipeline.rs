//! The `run` subcommand: simulate, evaluate the functionals on the cached
//! output states, select `sigma`, fit, and write the CSV.
//!
//! The first pass integrates the flow with the `sigma = 0` evaluator and
//! keeps every output state. The second pass reduces those states to their
//! `sigma`-independent integrals in parallel; selection and the final
//! records are then linear combinations of them.

use std::path::{Path, PathBuf};

use lyapdecay_core::bogovskii::BogovskiiSolver;
use lyapdecay_core::fluid::compute_rho_s;
use lyapdecay_core::lyapunov::{
    check_differential_inequality, evaluate_sigma, fit_decay, select_sigma_from, DecayReport, DiagnosticsEvaluator,
    DiagnosticsRecord, DifferentialInequalityReport, SelectionConstants, SigmaSelection, StateFunctionals,
};
use lyapdecay_core::solver::run;
use lyapdecay_core::{Error, State};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::output::{format_float, svg_log_plot, write_csv};
use crate::presets::build_initial;
use crate::CliError;

/// Records before this time are excluded from the post-transient checks.
pub const TRANSIENT_END: f64 = 0.1;
/// Random trials of the Bogovskii operator-norm probe.
pub const NORM_PROBE_TRIALS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub enum FitOutcome {
    Fitted(DecayReport),
    /// `V_sigma` vanishes identically in the window: nothing decays.
    Flat,
    Unavailable(String),
}

impl FitOutcome {
    pub fn v_rate(&self) -> Option<f64> {
        match self {
            FitOutcome::Fitted(r) => Some(r.v_sigma.rate),
            FitOutcome::Flat => Some(0.0),
            FitOutcome::Unavailable(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub rho_s: f64,
    pub constants: SelectionConstants,
    pub selection: SigmaSelection,
    /// Set when a fixed `sigma` violates one of the selection inequalities.
    pub selection_warning: Option<String>,
    pub fit_window: (f64, f64),
    pub fit: FitOutcome,
    pub diff_ineq: DifferentialInequalityReport,
    /// Fraction of records after the transient with `W_sigma >= C V_sigma`.
    pub decay_ineq_fraction: f64,
    pub rho_bound_ok: bool,
    pub max_mass_drift: f64,
    pub config_warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub records: Vec<DiagnosticsRecord>,
    pub summary: RunSummary,
}

#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    /// Records produced before the failure (`sigma = 0`).
    pub partial: Vec<DiagnosticsRecord>,
}

pub fn simulate(cfg: &RunConfig) -> Result<RunArtifacts, RunFailure> {
    let grid = cfg.grid_spec();
    let params = cfg.fluid_params();
    let fail = |error: Error, partial: &[DiagnosticsRecord]| RunFailure {
        error,
        partial: partial.to_vec(),
    };

    let initial = build_initial(&cfg.init, grid).map_err(|e| fail(e, &[]))?;
    let rho_s = compute_rho_s(&initial.rho).map_err(|e| fail(e, &[]))?.rho_s;
    let mass0 = initial.mass();

    let pass1 = DiagnosticsEvaluator::uncoupled(params, rho_s);
    let mut states: Vec<State> = Vec::new();
    let mut first: Vec<DiagnosticsRecord> = Vec::new();
    let outcome = run(initial, &params, &cfg.solver, &pass1, &mut |s: &State, r: &DiagnosticsRecord| {
        states.push(s.clone());
        first.push(*r);
        Ok(())
    });
    let outcome = outcome.map_err(|e| fail(e, &first))?;

    let post = || -> lyapdecay_core::Result<RunArtifacts> {
        let bog = BogovskiiSolver::new(grid, cfg.bogovskii)?;
        let samples = states
            .par_iter()
            .map(|s| StateFunctionals::compute(s, &params, rho_s, Some(&bog)))
            .collect::<lyapdecay_core::Result<Vec<_>>>()?;
        let constants = SelectionConstants::probe(&params, rho_s, &bog, NORM_PROBE_TRIALS, cfg.init.seed)?;
        let (selection, selection_warning) = match (cfg.lyapunov.sigma_auto, cfg.lyapunov.sigma) {
            (false, Some(sigma)) => evaluate_sigma(&samples, sigma, &constants, &params),
            _ => (select_sigma_from(&samples, &constants, &params)?, None),
        };
        let records: Vec<DiagnosticsRecord> = samples
            .iter()
            .zip(&first)
            .map(|(f, r1)| {
                DiagnosticsRecord::from_functionals(
                    f,
                    selection.sigma,
                    Some(selection.decay_constant),
                    &params,
                    r1.rho_bound_ok,
                )
            })
            .collect();

        let fit_window = cfg.fit_window();
        let fit = match fit_decay(&records, fit_window) {
            Ok(r) => FitOutcome::Fitted(r),
            Err(Error::InsufficientData(msg)) => {
                let in_window = records
                    .iter()
                    .filter(|r| r.t >= fit_window.0 - 1e-12 && r.t <= fit_window.1 + 1e-12);
                if in_window.clone().count() > 0 && in_window.clone().all(|r| r.v_sigma == 0.0) {
                    FitOutcome::Flat
                } else {
                    FitOutcome::Unavailable(msg)
                }
            }
            Err(e) => return Err(e),
        };
        let diff_ineq = if records.len() >= 2 {
            check_differential_inequality(&records, selection.decay_constant, TRANSIENT_END)?
        } else {
            DifferentialInequalityReport {
                slack: 0.0,
                intervals: Vec::new(),
                fraction_ok: 1.0,
                fraction_ok_after_transient: 1.0,
            }
        };
        let late: Vec<&DiagnosticsRecord> = records.iter().filter(|r| r.t > TRANSIENT_END).collect();
        let decay_ineq_fraction = if late.is_empty() {
            1.0
        } else {
            late.iter().filter(|r| r.decay_ineq_ok).count() as f64 / late.len() as f64
        };
        let max_mass_drift = records
            .iter()
            .map(|r| (r.mass - mass0).abs() / mass0)
            .fold(0.0, f64::max);
        Ok(RunArtifacts {
            summary: RunSummary {
                steps: outcome.steps,
                rho_s,
                constants,
                selection,
                selection_warning,
                fit_window,
                fit,
                diff_ineq,
                decay_ineq_fraction,
                rho_bound_ok: outcome.rho_bound_ok,
                max_mass_drift,
                config_warnings: Vec::new(),
            },
            records,
        })
    };
    post().map_err(|e| fail(e, &first))
}

/// The `#` trailer of the CSV, one `key = value` per line.
pub fn summary_lines(s: &RunSummary) -> Vec<String> {
    let sel = &s.selection;
    let k = &s.constants;
    let mut out = vec![
        format!("steps = {}", s.steps),
        format!("rho_s = {}", format_float(s.rho_s)),
        format!("sigma = {}", format_float(sel.sigma)),
        format!("sigma_halvings = {}", sel.halvings),
        format!("c0 = {}", format_float(sel.c0)),
        format!("c1 = {}", format_float(sel.c1)),
        format!("c2 = {}", format_float(sel.c2)),
        format!("c2_effective = {}", format_float(sel.c2_effective)),
        format!("C = {}", format_float(sel.decay_constant)),
        format!("K1 = {}", format_float(k.k1)),
        format!("K2 = {}", format_float(k.k2)),
        format!("c_omega = {}", format_float(sel.c_omega)),
        format!("pressure_coercivity = {}", format_float(sel.pressure_coercivity)),
        format!("poincare_ratio = {}", format_float(sel.poincare)),
        format!(
            "fit_window = {} {}",
            format_float(s.fit_window.0),
            format_float(s.fit_window.1)
        ),
    ];
    match &s.fit {
        FitOutcome::Fitted(r) => {
            out.push(format!("V_sigma_rate = {}", format_float(r.v_sigma.rate)));
            out.push(format!("V_sigma_intercept = {}", format_float(r.v_sigma.intercept)));
            out.push(format!("V_sigma_r_squared = {}", format_float(r.v_sigma.r_squared)));
            out.push(format!("energy_L2_rate = {}", format_float(r.energy_l2.rate)));
            out.push(format!("energy_L2_r_squared = {}", format_float(r.energy_l2.r_squared)));
        }
        FitOutcome::Flat => {
            out.push("V_sigma_rate = 0e0".into());
            out.push("V_sigma_r_squared = 0e0".into());
        }
        FitOutcome::Unavailable(msg) => out.push(format!("fit_unavailable = {msg}")),
    }
    out.push(format!("diff_ineq_slack = {}", format_float(s.diff_ineq.slack)));
    out.push(format!("diff_ineq_fraction = {}", format_float(s.diff_ineq.fraction_ok)));
    out.push(format!(
        "diff_ineq_fraction_post_transient = {}",
        format_float(s.diff_ineq.fraction_ok_after_transient)
    ));
    for c in s.diff_ineq.flagged() {
        out.push(format!(
            "diff_ineq_flagged = {} {} {}",
            format_float(c.t_start),
            format_float(c.t_end),
            format_float(c.lhs)
        ));
    }
    out.push(format!("decay_ineq_fraction_post_transient = {}", format_float(s.decay_ineq_fraction)));
    out.push(format!("max_relative_mass_drift = {}", format_float(s.max_mass_drift)));
    out.push(format!("rho_bound_ok = {}", s.rho_bound_ok));
    out.push(format!("hypothesis_violated = {}", !s.rho_bound_ok));
    if let Some(w) = &s.selection_warning {
        out.push(format!("sigma_warning = {w}"));
    }
    out.push(format!("config_warnings = {}", s.config_warnings.len()));
    for w in &s.config_warnings {
        out.push(format!("warning = {w}"));
    }
    out
}

pub fn svg_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("svg")
}

/// Runs `cfg` and writes its CSV (and SVG when requested). On failure the
/// records produced so far are written with an `ABORTED` trailer.
pub fn run_to_files(cfg: &RunConfig, config_warnings: &[String], svg: bool) -> Result<RunArtifacts, CliError> {
    let csv_path = PathBuf::from(&cfg.output.csv_path);
    match simulate(cfg) {
        Ok(mut art) => {
            art.summary.config_warnings = config_warnings.to_vec();
            write_csv(&csv_path, &art.records, &summary_lines(&art.summary))
                .map_err(|e| CliError::Numerical(format!("writing {}: {e}", csv_path.display())))?;
            if svg || cfg.output.svg {
                let p = svg_path(&csv_path);
                std::fs::write(&p, svg_log_plot(&art.records))
                    .map_err(|e| CliError::Numerical(format!("writing {}: {e}", p.display())))?;
            }
            Ok(art)
        }
        Err(failure) => {
            let reason = failure.error.to_string();
            let trailer = vec![format!("ABORTED: {reason}")];
            let written = write_csv(&csv_path, &failure.partial, &trailer);
            let mut msg = reason;
            if let Err(e) = written {
                msg.push_str(&format!(" (partial CSV not written: {e})"));
            }
            Err(match failure.error {
                Error::InvalidParameter(_) => CliError::Config(msg),
                _ => CliError::Numerical(msg),
            })
        }
    }
}
