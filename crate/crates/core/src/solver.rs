//! Explicit time integration of the isentropic Navier-Stokes system on the
//! MAC grid.
//!
//! Continuity is advanced in conservative form with first-order upwind mass
//! fluxes, so total mass changes only through boundary faces (where the
//! no-slip velocity makes the flux zero). Momentum lives on faces as
//! `rho_face * u` with `rho_face` the arithmetic mean of the adjacent cells;
//! it is transported with the same mass fluxes (averaged to the momentum
//! control volume) and upwinded velocity, pushed by the centered pressure
//! gradient and the viscous stress `mu Δu + (lambda + mu) grad div u`.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::fluid::{FluidParams, State};
use crate::grid::{divergence, vector_laplacian, ScalarField, VectorField};
use crate::lyapunov::{DiagnosticsEvaluator, DiagnosticsRecord};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Fraction of the acoustic CFL limit, in `(0, 1]`.
    pub cfl: f64,
    /// Fraction of the explicit viscous limit, in `(0, 1]`.
    pub visc_safety: f64,
    /// Densities at or below this are treated as vacuum.
    pub rho_floor: f64,
    pub t_end: f64,
    /// Diagnostics cadence.
    pub output_dt: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            visc_safety: 0.5,
            rho_floor: 0.0,
            t_end: 2.0,
            output_dt: 0.01,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must lie in (0, 1], got {v}")))
            }
        };
        unit("cfl", self.cfl)?;
        unit("visc_safety", self.visc_safety)?;
        if !(self.rho_floor >= 0.0 && self.rho_floor.is_finite()) {
            return Err(Error::InvalidParameter(format!("rho_floor must be >= 0, got {}", self.rho_floor)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!("t_end must be positive, got {}", self.t_end)));
        }
        if !(self.output_dt > 0.0 && self.output_dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("output_dt must be positive, got {}", self.output_dt)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub dt_used: f64,
    /// `max |u| + max c_s` of the state the step started from.
    pub max_wave_speed: f64,
    pub max_rho: f64,
    pub min_rho: f64,
    /// `max_rho <= rho_bar` after the step.
    pub rho_bound_ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct TimeStepLimits {
    acoustic: f64,
    viscous: f64,
    wave_speed: f64,
}

fn time_step_limits(state: &State, params: &FluidParams, config: &SolverConfig) -> Result<TimeStepLimits> {
    let h = state.grid().h();
    let mut max_c: f64 = 0.0;
    let mut min_pos = f64::INFINITY;
    for &r in state.rho.values().iter() {
        if r > config.rho_floor {
            max_c = max_c.max(params.sound_speed(r));
            min_pos = min_pos.min(r);
        }
    }
    if !min_pos.is_finite() {
        return Err(Error::Degenerate("every cell is vacuum; no time step can be chosen".into()));
    }
    let wave_speed = state.u.max_abs() + max_c;
    let acoustic = config.cfl * h / wave_speed;
    let viscous = config.visc_safety * min_pos * h * h / (4.0 * (params.lambda() + 2.0 * params.mu()));
    Ok(TimeStepLimits {
        acoustic,
        viscous,
        wave_speed,
    })
}

/// `min(cfl h / (max|u| + max c_s), visc_safety rho_min h^2 / (4 (lambda + 2 mu)))`.
pub fn stable_dt(state: &State, params: &FluidParams, config: &SolverConfig) -> Result<f64> {
    let l = time_step_limits(state, params, config)?;
    Ok(l.acoustic.min(l.viscous))
}

/// One explicit step of size [`stable_dt`].
pub fn step(state: &State, params: &FluidParams, config: &SolverConfig) -> Result<(State, StepReport)> {
    let dt = stable_dt(state, params, config)?;
    step_with_dt(state, params, config, dt)
}

/// One explicit step of the given size. `dt` should not exceed [`stable_dt`].
pub fn step_with_dt(
    state: &State,
    params: &FluidParams,
    config: &SolverConfig,
    dt: f64,
) -> Result<(State, StepReport)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    let wave_speed = time_step_limits(state, params, config)?.wave_speed;
    let grid = *state.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let (dx, dy) = (grid.dx(), grid.dy());
    let rho = state.rho.values();
    let ux = state.u.ux();
    let uy = state.u.uy();
    let t_new = state.t + dt;

    // upwind mass fluxes on faces; boundary faces carry none
    let fx = Array2::from_shape_fn((nx + 1, ny), |(i, j)| {
        if i == 0 || i == nx {
            return 0.0;
        }
        let u = ux[[i, j]];
        u * if u >= 0.0 { rho[[i - 1, j]] } else { rho[[i, j]] }
    });
    let fy = Array2::from_shape_fn((nx, ny + 1), |(i, j)| {
        if j == 0 || j == ny {
            return 0.0;
        }
        let v = uy[[i, j]];
        v * if v >= 0.0 { rho[[i, j - 1]] } else { rho[[i, j]] }
    });

    let rho_new = Array2::from_shape_fn((nx, ny), |(i, j)| {
        rho[[i, j]] - dt * ((fx[[i + 1, j]] - fx[[i, j]]) / dx + (fy[[i, j + 1]] - fy[[i, j]]) / dy)
    });
    for ((i, j), &r) in rho_new.indexed_iter() {
        if r.is_nan() {
            return Err(Error::NumericalFailure {
                t: t_new,
                reason: format!("density became NaN at cell ({i}, {j})"),
            });
        }
        if r < 0.0 {
            return Err(Error::SchemeFailure {
                t: t_new,
                reason: format!("negative density {r:e} at cell ({i}, {j}); dt = {dt:e} too large or flow unresolved"),
            });
        }
    }

    let p = rho.mapv(|r| params.pressure_at(r));
    let div = divergence(&state.u);
    let div = div.values();
    let lap = vector_laplacian(&state.u);
    let (lap_x, lap_y) = (lap.ux(), lap.uy());
    let (mu, lm) = (params.mu(), params.lambda_plus_mu());

    // Momentum fluxes. x-momentum: through cell centers in x, through
    // vertices in y. y-momentum: through vertices in x, through centers in y.
    let upwind = |flux: f64, back: f64, front: f64| flux * if flux >= 0.0 { back } else { front };
    let gx_center = Array2::from_shape_fn((nx, ny), |(i, j)| {
        upwind(0.5 * (fx[[i, j]] + fx[[i + 1, j]]), ux[[i, j]], ux[[i + 1, j]])
    });
    let gx_vertex = Array2::from_shape_fn((nx + 1, ny + 1), |(i, j)| {
        if i == 0 || i == nx || j == 0 || j == ny {
            return 0.0;
        }
        upwind(0.5 * (fy[[i - 1, j]] + fy[[i, j]]), ux[[i, j - 1]], ux[[i, j]])
    });
    let gy_center = Array2::from_shape_fn((nx, ny), |(i, j)| {
        upwind(0.5 * (fy[[i, j]] + fy[[i, j + 1]]), uy[[i, j]], uy[[i, j + 1]])
    });
    let gy_vertex = Array2::from_shape_fn((nx + 1, ny + 1), |(i, j)| {
        if i == 0 || i == nx || j == 0 || j == ny {
            return 0.0;
        }
        upwind(0.5 * (fx[[i, j - 1]] + fx[[i, j]]), uy[[i - 1, j]], uy[[i, j]])
    });

    let floor = config.rho_floor;
    let recover = |m: f64, r: f64| if r > floor { m / r } else { 0.0 };

    let ux_new = Array2::from_shape_fn((nx + 1, ny), |(i, j)| {
        if i == 0 || i == nx {
            return 0.0;
        }
        let rf = 0.5 * (rho[[i - 1, j]] + rho[[i, j]]);
        let advection = (gx_center[[i, j]] - gx_center[[i - 1, j]]) / dx
            + (gx_vertex[[i, j + 1]] - gx_vertex[[i, j]]) / dy;
        let force = -(p[[i, j]] - p[[i - 1, j]]) / dx
            + mu * lap_x[[i, j]]
            + lm * (div[[i, j]] - div[[i - 1, j]]) / dx;
        let m = rf * ux[[i, j]] - dt * advection + dt * force;
        recover(m, 0.5 * (rho_new[[i - 1, j]] + rho_new[[i, j]]))
    });
    let uy_new = Array2::from_shape_fn((nx, ny + 1), |(i, j)| {
        if j == 0 || j == ny {
            return 0.0;
        }
        let rf = 0.5 * (rho[[i, j - 1]] + rho[[i, j]]);
        let advection = (gy_vertex[[i + 1, j]] - gy_vertex[[i, j]]) / dx
            + (gy_center[[i, j]] - gy_center[[i, j - 1]]) / dy;
        let force = -(p[[i, j]] - p[[i, j - 1]]) / dy
            + mu * lap_y[[i, j]]
            + lm * (div[[i, j]] - div[[i, j - 1]]) / dy;
        let m = rf * uy[[i, j]] - dt * advection + dt * force;
        recover(m, 0.5 * (rho_new[[i, j - 1]] + rho_new[[i, j]]))
    });

    let u_new = VectorField::from_arrays(grid, ux_new, uy_new)?;
    if !u_new.is_finite() {
        return Err(Error::NumericalFailure {
            t: t_new,
            reason: "velocity became non-finite".into(),
        });
    }
    let rho_new = ScalarField::from_array(grid, rho_new)?;
    let (max_rho, min_rho) = (rho_new.max(), rho_new.min());
    let next = State {
        t: t_new,
        rho: rho_new,
        u: u_new,
    };
    Ok((
        next,
        StepReport {
            dt_used: dt,
            max_wave_speed: wave_speed,
            max_rho,
            min_rho,
            rho_bound_ok: max_rho <= params.rho_bar(),
        },
    ))
}

/// Receives one record per output time, together with the state it was
/// computed from.
pub trait DiagnosticsSink {
    fn accept(&mut self, state: &State, record: &DiagnosticsRecord) -> Result<()>;
}

impl<F> DiagnosticsSink for F
where
    F: FnMut(&State, &DiagnosticsRecord) -> Result<()>,
{
    fn accept(&mut self, state: &State, record: &DiagnosticsRecord) -> Result<()> {
        self(state, record)
    }
}

/// Summary of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub state: State,
    pub steps: usize,
    pub records: usize,
    /// False once any step exceeded `rho_bar`.
    pub rho_bound_ok: bool,
}

/// Advances `initial` to `config.t_end`, landing exactly on every multiple of
/// `output_dt` (and on `t_end`) and handing a record to `sink` there,
/// including at the initial time.
pub fn run(
    initial: State,
    params: &FluidParams,
    config: &SolverConfig,
    diagnostics: &DiagnosticsEvaluator,
    sink: &mut impl DiagnosticsSink,
) -> Result<RunOutcome> {
    config.validate()?;
    let t_end = config.t_end;
    let eps = 1e-12 * t_end.max(config.output_dt);
    let mut state = initial;
    let mut bound_ok = state.rho.max() <= params.rho_bar();
    let mut records = 0;
    let mut steps = 0;

    let rec = diagnostics.record(&state, bound_ok)?;
    sink.accept(&state, &rec)?;
    records += 1;

    let mut k: u64 = 1;
    while state.t < t_end - eps {
        let next_output = (k as f64 * config.output_dt).min(t_end);
        let mut dt = stable_dt(&state, params, config)?;
        let landing = state.t + dt >= next_output - eps;
        if landing {
            dt = next_output - state.t;
        }
        let (mut next, report) = step_with_dt(&state, params, config, dt)?;
        steps += 1;
        bound_ok &= report.rho_bound_ok;
        if landing {
            next.t = next_output;
        }
        state = next;
        if landing {
            let rec = diagnostics.record(&state, bound_ok)?;
            sink.accept(&state, &rec)?;
            records += 1;
            while k as f64 * config.output_dt <= state.t + eps {
                k += 1;
            }
        }
    }
    Ok(RunOutcome {
        state,
        steps,
        records,
        rho_bound_ok: bound_ok,
    })
}
