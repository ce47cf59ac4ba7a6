//! Corrected Lyapunov functional `V_sigma`, its dissipation `W_sigma`,
//! constructive selection of the coupling constant and the comparison
//! constants, the finite-difference differential-inequality check, and
//! exponential decay fitting.
//!
//! With `B` the discrete Bogovskii operator and `rho_s` the equilibrium
//! density,
//!
//! ```text
//! V_sigma = ∫ 1/2 rho|u|^2 + f(rho; rho_s) - sigma rho u · B[rho - rho_s]
//! W_sigma = ∫ mu|grad u|^2 + (lambda+mu)(div u)^2
//!         - sigma ∫ rho u · B[div(rho u)]
//!         + sigma ∫ rho u⊗u : grad B[rho - rho_s]
//!         + sigma ∫ (rho^gamma - rho_s^gamma)(rho - rho_s)
//!         - sigma mu ∫ grad u : grad B[rho - rho_s]
//!         - sigma (lambda+mu) ∫ div u (rho - rho_s)
//! ```
//!
//! Every integral that involves `B` is `sigma`-independent, so a state is
//! reduced once to [`StateFunctionals`] and `V_sigma`, `W_sigma` are then
//! cheap linear combinations for any `sigma`.

use ndarray::Array2;

use crate::bogovskii::{operator_norm_probe, BogovskiiSolver};
use crate::error::{Error, Result};
use crate::fluid::{energy_parts, entropy_bounds_probe, entropy_f, FluidParams, State};
use crate::grid::{divergence, velocity_gradient, velocity_norms, VectorField};

/// Number of samples used for the entropy comparison constants.
pub const ENTROPY_PROBE_SAMPLES: usize = 1000;
/// First trial value of the coupling constant.
pub const SIGMA_START: f64 = 0.1;
/// Halvings attempted before selection gives up.
pub const MAX_HALVINGS: usize = 40;
/// Relative slack of the differential-inequality check, as a fraction of
/// `max W_sigma`.
pub const DIFF_INEQ_SLACK: f64 = 0.05;
/// Allowed relative drift of the mean density from `rho_s` before the
/// functionals refuse to evaluate (mass must be conserved).
const MASS_DRIFT_TOL: f64 = 1e-10;

/// `sigma`-independent integrals of one state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateFunctionals {
    pub t: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub mass: f64,
    pub max_rho: f64,
    /// `∫ rho |u|^2` with face velocities averaged to cells.
    pub kinetic_l2: f64,
    /// `∫ (rho - rho_s)^2`.
    pub rho_dist_l2: f64,
    /// `∫ |u|^2` over faces.
    pub u_l2: f64,
    /// `∫ f(rho; rho_s)`.
    pub entropy: f64,
    pub grad_norm_sq: f64,
    pub div_norm_sq: f64,
    /// `∫ rho u · B[rho - rho_s]`.
    pub cross: f64,
    /// `∫ rho u · B[div(rho u)]`.
    pub transport: f64,
    /// `∫ rho u⊗u : grad B[rho - rho_s]`.
    pub convection: f64,
    /// `∫ (rho^gamma - rho_s^gamma)(rho - rho_s)`.
    pub pressure: f64,
    /// `∫ grad u : grad B[rho - rho_s]`.
    pub viscous: f64,
    /// `∫ div u (rho - rho_s)`.
    pub compression: f64,
    /// `||B[rho - rho_s]||^2_{L2}`.
    pub bogovskii_l2: f64,
    /// Whether the `B`-dependent integrals were computed (zero otherwise).
    pub coupled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VSigma {
    pub value: f64,
    /// `-sigma ∫ rho u · B[rho - rho_s]`.
    pub cross_term: f64,
}

/// The six contributions to `W_sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WSigmaTerms {
    /// `mu ∫|grad u|^2 + (lambda+mu) ∫(div u)^2`
    pub dissipation: f64,
    /// `-sigma ∫ rho u · B[div(rho u)]`
    pub transport: f64,
    /// `sigma ∫ rho u⊗u : grad B[rho - rho_s]`
    pub convection: f64,
    /// `sigma ∫ (rho^gamma - rho_s^gamma)(rho - rho_s)`
    pub pressure: f64,
    /// `-sigma mu ∫ grad u : grad B[rho - rho_s]`
    pub viscous_coupling: f64,
    /// `-sigma (lambda+mu) ∫ div u (rho - rho_s)`
    pub compression_coupling: f64,
}

impl WSigmaTerms {
    pub fn total(&self) -> f64 {
        self.dissipation
            + self.transport
            + self.convection
            + self.pressure
            + self.viscous_coupling
            + self.compression_coupling
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.dissipation,
            self.transport,
            self.convection,
            self.pressure,
            self.viscous_coupling,
            self.compression_coupling,
        ]
    }
}

impl StateFunctionals {
    /// Reduces `state` to its integrals. Without a solver the `B` terms are
    /// left at zero, which is exact for `sigma = 0`.
    pub fn compute(
        state: &State,
        params: &FluidParams,
        rho_s: f64,
        solver: Option<&BogovskiiSolver>,
    ) -> Result<Self> {
        let grid = *state.grid();
        let vol = grid.cell_volume();
        let gamma = params.gamma();
        let rho = state.rho.values();

        let parts = energy_parts(state, params);
        let norms = velocity_norms(&state.u);
        let div_u = divergence(&state.u);
        let p_s = params.pressure_at(rho_s);

        let mut entropy = 0.0;
        let mut rho_dist = 0.0;
        let mut pressure = 0.0;
        let mut compression = 0.0;
        for ((i, j), &r) in rho.indexed_iter() {
            let d = r - rho_s;
            entropy += entropy_f(r, rho_s, gamma)?;
            rho_dist += d * d;
            pressure += (params.pressure_at(r) - p_s) * d;
            compression += div_u.get(i, j) * d;
        }

        let mut out = StateFunctionals {
            t: state.t,
            energy: parts.total(),
            dissipation: params.mu() * norms.grad_norm_sq + params.lambda_plus_mu() * norms.div_norm_sq,
            mass: state.mass(),
            max_rho: state.rho.max(),
            kinetic_l2: 2.0 * parts.kinetic,
            rho_dist_l2: rho_dist * vol,
            u_l2: state.u.dot(&state.u)?,
            entropy: entropy * vol,
            grad_norm_sq: norms.grad_norm_sq,
            div_norm_sq: norms.div_norm_sq,
            pressure: pressure * vol,
            compression: compression * vol,
            ..Default::default()
        };

        if let Some(solver) = solver {
            out.coupled = true;
            let mean = state.rho.mean();
            if (mean - rho_s).abs() > MASS_DRIFT_TOL * rho_s {
                return Err(Error::Degenerate(format!(
                    "mean density {mean} drifted from rho_s = {rho_s}; mass is not conserved"
                )));
            }
            // rho - rho_s differs from rho - mean(rho) only by round-off
            let fluct = state.rho.map(|r| r - mean);
            let b_rho = solver.solve_centered(&fluct)?.v;
            let momentum = face_momentum(state);
            let b_flux = solver.solve_centered(&divergence(&momentum))?.v;

            let grad_b = velocity_gradient(&b_rho);
            out.cross = momentum.dot(&b_rho)?;
            out.transport = momentum.dot(&b_flux)?;
            out.viscous = velocity_gradient(&state.u).contract(&grad_b)?;
            out.convection = convection_integral(state, &grad_b.dudx, &grad_b.dvdy, &grad_b.dudy, &grad_b.dvdx);
            out.bogovskii_l2 = b_rho.dot(&b_rho)?;
        }
        Ok(out)
    }

    pub fn v_sigma(&self, sigma: f64) -> VSigma {
        let cross_term = -sigma * self.cross;
        VSigma {
            value: 0.5 * self.kinetic_l2 + self.entropy + cross_term,
            cross_term,
        }
    }

    pub fn w_sigma(&self, sigma: f64, params: &FluidParams) -> WSigmaTerms {
        WSigmaTerms {
            dissipation: self.dissipation,
            transport: -sigma * self.transport,
            convection: sigma * self.convection,
            pressure: sigma * self.pressure,
            viscous_coupling: -sigma * params.mu() * self.viscous,
            compression_coupling: -sigma * params.lambda_plus_mu() * self.compression,
        }
    }

    /// `∫ 1/2 rho|u|^2 + f(rho; rho_s)`, i.e. `V_0`.
    pub fn relative_entropy_energy(&self) -> f64 {
        0.5 * self.kinetic_l2 + self.entropy
    }

    /// `∫ rho|u|^2 + (rho - rho_s)^2`, the quantity bounded in the decay estimate.
    pub fn energy_l2(&self) -> f64 {
        self.kinetic_l2 + self.rho_dist_l2
    }
}

/// Face momentum `rho_face u` with `rho_face` the mean of the adjacent cells.
pub fn face_momentum(state: &State) -> VectorField {
    let grid = *state.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let rho = state.rho.values();
    let ux = state.u.ux();
    let uy = state.u.uy();
    let mx = Array2::from_shape_fn((nx + 1, ny), |(i, j)| {
        if i == 0 || i == nx {
            0.0
        } else {
            0.5 * (rho[[i - 1, j]] + rho[[i, j]]) * ux[[i, j]]
        }
    });
    let my = Array2::from_shape_fn((nx, ny + 1), |(i, j)| {
        if j == 0 || j == ny {
            0.0
        } else {
            0.5 * (rho[[i, j - 1]] + rho[[i, j]]) * uy[[i, j]]
        }
    });
    VectorField::from_arrays(grid, mx, my).expect("shapes follow the grid")
}

/// `∫ rho u^k u^l ∂_l B^k`: diagonal terms at cell centers, off-diagonal
/// terms at interior vertices (wall vertices carry zero velocity).
fn convection_integral(
    state: &State,
    dbx_dx: &Array2<f64>,
    dby_dy: &Array2<f64>,
    dbx_dy: &Array2<f64>,
    dby_dx: &Array2<f64>,
) -> f64 {
    let grid = *state.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let rho = state.rho.values();
    let (ubar, vbar) = state.u.cell_averages();
    let ux = state.u.ux();
    let uy = state.u.uy();
    let mut sum = 0.0;
    for i in 0..nx {
        for j in 0..ny {
            let (a, b) = (ubar[[i, j]], vbar[[i, j]]);
            sum += rho[[i, j]] * (a * a * dbx_dx[[i, j]] + b * b * dby_dy[[i, j]]);
        }
    }
    for i in 1..nx {
        for j in 1..ny {
            let r = 0.25 * (rho[[i - 1, j - 1]] + rho[[i, j - 1]] + rho[[i - 1, j]] + rho[[i, j]]);
            let a = 0.5 * (ux[[i, j - 1]] + ux[[i, j]]);
            let b = 0.5 * (uy[[i - 1, j]] + uy[[i, j]]);
            sum += r * a * b * (dbx_dy[[i, j]] + dby_dx[[i, j]]);
        }
    }
    sum * grid.cell_volume()
}

/// `(V_sigma, cross term)` of a state.
pub fn v_sigma(
    state: &State,
    rho_s: f64,
    sigma: f64,
    params: &FluidParams,
    bog: &BogovskiiSolver,
) -> Result<VSigma> {
    Ok(StateFunctionals::compute(state, params, rho_s, Some(bog))?.v_sigma(sigma))
}

/// `W_sigma` split into its six contributions.
pub fn w_sigma(
    state: &State,
    rho_s: f64,
    sigma: f64,
    params: &FluidParams,
    bog: &BogovskiiSolver,
) -> Result<WSigmaTerms> {
    Ok(StateFunctionals::compute(state, params, rho_s, Some(bog))?.w_sigma(sigma, params))
}

/// One row of the diagnostics time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub mass: f64,
    pub kinetic_l2: f64,
    pub rho_dist_l2: f64,
    pub u_l2: f64,
    pub v_sigma: f64,
    pub w_sigma: f64,
    pub cross_term: f64,
    /// `rho <= rho_bar` has held at every step so far.
    pub rho_bound_ok: bool,
    /// `W_sigma >= C V_sigma`; false when `C` is not yet known.
    pub decay_ineq_ok: bool,
}

impl DiagnosticsRecord {
    pub fn from_functionals(
        f: &StateFunctionals,
        sigma: f64,
        decay_constant: Option<f64>,
        params: &FluidParams,
        rho_bound_ok: bool,
    ) -> Self {
        let v = f.v_sigma(sigma);
        let w = f.w_sigma(sigma, params).total();
        DiagnosticsRecord {
            t: f.t,
            energy: f.energy,
            dissipation: f.dissipation,
            mass: f.mass,
            kinetic_l2: f.kinetic_l2,
            rho_dist_l2: f.rho_dist_l2,
            u_l2: f.u_l2,
            v_sigma: v.value,
            w_sigma: w,
            cross_term: v.cross_term,
            rho_bound_ok,
            decay_ineq_ok: decay_constant.is_some_and(|c| w >= c * v.value),
        }
    }

    pub fn energy_l2(&self) -> f64 {
        self.kinetic_l2 + self.rho_dist_l2
    }
}

/// Builds [`DiagnosticsRecord`]s for a fixed `sigma` (and optionally `C`).
#[derive(Debug, Clone)]
pub struct DiagnosticsEvaluator {
    params: FluidParams,
    rho_s: f64,
    sigma: f64,
    decay_constant: Option<f64>,
    solver: Option<BogovskiiSolver>,
}

impl DiagnosticsEvaluator {
    /// `sigma = 0` evaluator; needs no Bogovskii solves.
    pub fn uncoupled(params: FluidParams, rho_s: f64) -> Self {
        Self {
            params,
            rho_s,
            sigma: 0.0,
            decay_constant: None,
            solver: None,
        }
    }

    pub fn coupled(params: FluidParams, rho_s: f64, sigma: f64, decay_constant: Option<f64>, solver: BogovskiiSolver) -> Self {
        Self {
            params,
            rho_s,
            sigma,
            decay_constant,
            solver: Some(solver),
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn rho_s(&self) -> f64 {
        self.rho_s
    }
    pub fn params(&self) -> &FluidParams {
        &self.params
    }

    pub fn functionals(&self, state: &State) -> Result<StateFunctionals> {
        StateFunctionals::compute(state, &self.params, self.rho_s, self.solver.as_ref())
    }

    pub fn record(&self, state: &State, rho_bound_ok: bool) -> Result<DiagnosticsRecord> {
        let f = self.functionals(state)?;
        Ok(DiagnosticsRecord::from_functionals(
            &f,
            self.sigma,
            self.decay_constant,
            &self.params,
            rho_bound_ok,
        ))
    }
}

/// Problem-level constants feeding the `sigma` search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConstants {
    /// Lower entropy comparison constant on `[0, rho_bar]`.
    pub k1: f64,
    /// Upper entropy comparison constant on `[0, rho_bar]`.
    pub k2: f64,
    /// Squared operator-norm estimate of `B` (`L2 -> W^{1,2}`).
    pub c_omega_probe: f64,
    pub rho_bar: f64,
}

impl SelectionConstants {
    pub fn probe(params: &FluidParams, rho_s: f64, solver: &BogovskiiSolver, n_trials: usize, seed: u64) -> Result<Self> {
        if !(params.rho_bar() > rho_s) {
            return Err(Error::InvalidParameter(format!(
                "rho_bar = {} must exceed the equilibrium density {rho_s}",
                params.rho_bar()
            )));
        }
        let (k1, k2) = entropy_bounds_probe(rho_s, params.rho_bar(), params.gamma(), ENTROPY_PROBE_SAMPLES)?;
        let norm = operator_norm_probe(solver, n_trials, seed)?;
        Ok(Self {
            k1,
            k2,
            c_omega_probe: norm * norm,
            rho_bar: params.rho_bar(),
        })
    }
}

/// Coupling constant and the comparison constants realized on a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaSelection {
    pub sigma: f64,
    /// `V_sigma >= c0 ∫ rho|u|^2 + (rho - rho_s)^2`.
    pub c0: f64,
    /// `V_sigma <= c1 ∫ |u|^2 + (rho - rho_s)^2`.
    pub c1: f64,
    /// Required coercivity `W_sigma >= c2 ∫ |u|^2 + (rho - rho_s)^2`.
    pub c2: f64,
    /// Smallest observed `W_sigma / ∫ |u|^2 + (rho - rho_s)^2` (at least `c2`).
    pub c2_effective: f64,
    /// Decay constant with `W_sigma >= C V_sigma`, `C = c2_effective / c1`.
    pub decay_constant: f64,
    /// Empirical `c(Ω)` with `||B[rho - rho_s]||^2 <= c(Ω) ||rho - rho_s||^2`.
    pub c_omega: f64,
    /// Smallest observed `∫(rho^gamma - rho_s^gamma)(rho - rho_s) / ∫(rho - rho_s)^2`.
    pub pressure_coercivity: f64,
    /// Largest observed `∫|u|^2 / ∫|grad u|^2`.
    pub poincare: f64,
    pub halvings: usize,
}

/// Constants for a given `sigma`, plus the first inequality that failed on
/// the sample, if any.
pub fn evaluate_sigma(
    samples: &[StateFunctionals],
    sigma: f64,
    consts: &SelectionConstants,
    params: &FluidParams,
) -> (SigmaSelection, Option<String>) {
    let ratio_max = |num: fn(&StateFunctionals) -> f64, den: fn(&StateFunctionals) -> f64| {
        samples
            .iter()
            .filter(|s| den(s) > 0.0)
            .map(|s| num(s) / den(s))
            .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))))
    };
    let ratio_min = |num: fn(&StateFunctionals) -> f64, den: fn(&StateFunctionals) -> f64| {
        samples
            .iter()
            .filter(|s| den(s) > 0.0)
            .map(|s| num(s) / den(s))
            .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.min(r))))
    };

    let pressure_coercivity = ratio_min(|s| s.pressure, |s| s.rho_dist_l2).unwrap_or(1.0);
    let c_omega = ratio_max(|s| s.bogovskii_l2, |s| s.rho_dist_l2)
        .unwrap_or(0.0)
        .max(consts.c_omega_probe);
    let poincare = ratio_max(|s| s.u_l2, |s| s.grad_norm_sq).unwrap_or(0.0);

    let c0 = 0.25 * consts.k1.min(1.0);
    let c2 = 0.5 * sigma * pressure_coercivity.min(1.0);
    let c1 = (0.5 * consts.rho_bar * (1.0 + sigma)).max(consts.k2 + 0.5 * sigma * consts.rho_bar * c_omega);

    let mut failure = None;
    let mut c2_effective: Option<f64> = None;
    for s in samples {
        let v = s.v_sigma(sigma).value;
        let w = s.w_sigma(sigma, params).total();
        let lower = c0 * s.energy_l2();
        let coercive = s.u_l2 + s.rho_dist_l2;
        if failure.is_none() && !(v >= lower) {
            failure = Some(format!(
                "equivalence lower bound V = {v:e} < c0 * {:e} at t = {}",
                s.energy_l2(),
                s.t
            ));
        }
        if failure.is_none() && !(v <= c1 * coercive) {
            failure = Some(format!("equivalence upper bound V = {v:e} > c1 * {coercive:e} at t = {}", s.t));
        }
        if failure.is_none() && !(w >= c2 * coercive) {
            failure = Some(format!("coercivity W = {w:e} < c2 * {coercive:e} at t = {}", s.t));
        }
        if coercive > 0.0 {
            let r = w / coercive;
            c2_effective = Some(c2_effective.map_or(r, |c| c.min(r)));
        }
    }
    let c2_effective = c2_effective.unwrap_or(c2).max(c2);
    let selection = SigmaSelection {
        sigma,
        c0,
        c1,
        c2,
        c2_effective,
        decay_constant: c2_effective / c1,
        c_omega,
        pressure_coercivity,
        poincare,
        halvings: 0,
    };
    (selection, failure)
}

/// Halves `sigma` from [`SIGMA_START`] until both equivalence bounds and the
/// coercivity bound hold on every sample.
pub fn select_sigma_from(
    samples: &[StateFunctionals],
    consts: &SelectionConstants,
    params: &FluidParams,
) -> Result<SigmaSelection> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("sigma selection needs at least one sample".into()));
    }
    if let Some(s) = samples.iter().find(|s| s.max_rho > consts.rho_bar) {
        return Err(Error::SelectionFailure {
            sigma: SIGMA_START,
            reason: format!(
                "density {} exceeds rho_bar = {} at t = {}; the upper-bound hypothesis fails",
                s.max_rho, consts.rho_bar, s.t
            ),
        });
    }
    if samples.iter().any(|s| !s.coupled) {
        return Err(Error::InsufficientData("samples lack the Bogovskii integrals".into()));
    }
    let mut sigma = SIGMA_START;
    let mut last = String::new();
    for halvings in 0..=MAX_HALVINGS {
        let (mut sel, failure) = evaluate_sigma(samples, sigma, consts, params);
        match failure {
            None => {
                sel.halvings = halvings;
                return Ok(sel);
            }
            Some(reason) => last = reason,
        }
        sigma *= 0.5;
    }
    Err(Error::SelectionFailure {
        sigma: sigma * 2.0,
        reason: last,
    })
}

/// Evaluates the states and runs [`select_sigma_from`].
pub fn select_sigma(
    states: &[State],
    rho_s: f64,
    params: &FluidParams,
    bog: &BogovskiiSolver,
    consts: &SelectionConstants,
) -> Result<SigmaSelection> {
    let samples = states
        .iter()
        .map(|s| StateFunctionals::compute(s, params, rho_s, Some(bog)))
        .collect::<Result<Vec<_>>>()?;
    select_sigma_from(&samples, consts, params)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalCheck {
    pub t_start: f64,
    pub t_end: f64,
    /// `ΔV/Δt + C V(midpoint)`.
    pub lhs: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DifferentialInequalityReport {
    pub slack: f64,
    pub intervals: Vec<IntervalCheck>,
    pub fraction_ok: f64,
    /// Fraction over intervals starting at or after `transient_end`.
    pub fraction_ok_after_transient: f64,
}

impl DifferentialInequalityReport {
    pub fn flagged(&self) -> impl Iterator<Item = &IntervalCheck> {
        self.intervals.iter().filter(|c| !c.ok)
    }
}

/// Checks `ΔV_sigma/Δt + C V_sigma(midpoint) <= 0.05 max W_sigma` on every
/// pair of consecutive records; the midpoint value is the mean of the two
/// endpoints.
pub fn check_differential_inequality(
    series: &[DiagnosticsRecord],
    decay_constant: f64,
    transient_end: f64,
) -> Result<DifferentialInequalityReport> {
    if series.len() < 2 {
        return Err(Error::InsufficientData(
            "differential inequality check needs at least two records".into(),
        ));
    }
    let slack = DIFF_INEQ_SLACK * series.iter().map(|r| r.w_sigma).fold(0.0, f64::max);
    let intervals: Vec<IntervalCheck> = series
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            let lhs = (b.v_sigma - a.v_sigma) / (b.t - a.t) + decay_constant * 0.5 * (a.v_sigma + b.v_sigma);
            IntervalCheck {
                t_start: a.t,
                t_end: b.t,
                lhs,
                ok: lhs <= slack,
            }
        })
        .collect();
    let fraction = |it: &mut dyn Iterator<Item = &IntervalCheck>| {
        let (mut n, mut ok) = (0usize, 0usize);
        for c in it {
            n += 1;
            ok += c.ok as usize;
        }
        if n == 0 {
            1.0
        } else {
            ok as f64 / n as f64
        }
    };
    let fraction_ok = fraction(&mut intervals.iter());
    let fraction_ok_after_transient = fraction(&mut intervals.iter().filter(|c| c.t_start >= transient_end - 1e-12));
    Ok(DifferentialInequalityReport {
        slack,
        intervals,
        fraction_ok,
        fraction_ok_after_transient,
    })
}

/// Least-squares fit `log y = intercept - rate t` over a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub t_start: f64,
    pub t_end: f64,
    pub rate: f64,
    pub intercept: f64,
    /// Coefficient of determination in log space; 0 when the data are flat.
    pub r_squared: f64,
    pub samples: usize,
    /// Points in the window dropped because the value was not positive.
    pub excluded: usize,
}

/// Ordinary least squares on `(t, ln y)` for points with `t` in the window.
pub fn fit_log_linear(points: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let (t0, t1) = window;
    if !(t0 < t1) {
        return Err(Error::InvalidParameter(format!("fit window [{t0}, {t1}] is empty")));
    }
    let tol = 1e-9 * t1.abs().max(1.0);
    let in_window: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(t, _)| t >= t0 - tol && t <= t1 + tol)
        .collect();
    let data: Vec<(f64, f64)> = in_window.iter().filter(|p| p.1 > 0.0).map(|&(t, y)| (t, y.ln())).collect();
    let excluded = in_window.len() - data.len();
    if data.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "decay fit needs at least 3 positive samples in [{t0}, {t1}], found {} ({excluded} nonpositive excluded)",
            data.len()
        )));
    }
    let n = data.len() as f64;
    let mean_t = data.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = data.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = data.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
    let sty: f64 = data.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_y)).sum();
    let syy: f64 = data.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    if stt == 0.0 {
        return Err(Error::InsufficientData("decay fit needs distinct sample times".into()));
    }
    if data.iter().all(|p| p.1 == data[0].1) {
        return Ok(DecayFit {
            t_start: t0,
            t_end: t1,
            rate: 0.0,
            intercept: data[0].1,
            r_squared: 0.0,
            samples: data.len(),
            excluded,
        });
    }
    let slope = sty / stt;
    let intercept = mean_y - slope * mean_t;
    let ss_res: f64 = data.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 0.0 };
    Ok(DecayFit {
        t_start: t0,
        t_end: t1,
        rate: -slope,
        intercept,
        r_squared,
        samples: data.len(),
        excluded,
    })
}

/// Decay fits of `V_sigma` and of `∫ rho|u|^2 + (rho - rho_s)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayReport {
    pub v_sigma: DecayFit,
    pub energy_l2: DecayFit,
}

pub fn fit_decay(series: &[DiagnosticsRecord], window: (f64, f64)) -> Result<DecayReport> {
    let v: Vec<(f64, f64)> = series.iter().map(|r| (r.t, r.v_sigma)).collect();
    let e: Vec<(f64, f64)> = series.iter().map(|r| (r.t, r.energy_l2())).collect();
    Ok(DecayReport {
        v_sigma: fit_log_linear(&v, window)?,
        energy_l2: fit_log_linear(&e, window)?,
    })
}
