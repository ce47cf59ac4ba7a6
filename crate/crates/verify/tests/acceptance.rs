//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use lyapdecay_cli::checks::{dense_oracle_error, entropy_suite, residuals, ORACLE_MATCH};
use lyapdecay_cli::config::{PresetName, RunConfig};
use lyapdecay_cli::pipeline::{run_to_files, simulate, FitOutcome, RunArtifacts};
use lyapdecay_cli::presets::build_initial;
use lyapdecay_core::bogovskii::{BogovskiiSolver, SaddleSolverConfig};
use lyapdecay_core::fluid::dissipation;
use lyapdecay_core::grid::{divergence, gradient};
use lyapdecay_core::lyapunov::{v_sigma, w_sigma, StateFunctionals};
use lyapdecay_core::{GridSpec, ScalarField, VectorField};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(checks: Vec<(bool, String)>, elapsed: Duration, budget: Duration) -> Outcome {
    let mut pass = elapsed <= budget;
    let mut parts = Vec::new();
    for (ok, msg) in checks {
        pass &= ok;
        parts.push(if ok { msg } else { format!("FAILED {msg}") });
    }
    parts.push(format!("{:.2}s (budget {}s)", elapsed.as_secs_f64(), budget.as_secs()));
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn errored(e: impl std::fmt::Display) -> Outcome {
    Outcome {
        pass: false,
        detail: format!("error: {e}"),
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let res = (|| -> lyapdecay_core::Result<Vec<(bool, String)>> {
        let cfg = SaddleSolverConfig::default();
        let r = residuals(GridSpec::unit_square(64)?, cfg, 5, 1)?;
        let worst = r.iter().copied().fold(0.0, f64::max);
        let dense = dense_oracle_error(GridSpec::unit_square(6)?, cfg, 5, 2)?;
        Ok(vec![
            (worst <= 1e-9, format!("64x64 worst relative residual {worst:.2e} <= 1e-9")),
            (dense <= ORACLE_MATCH, format!("6x6 dense KKT max face difference {dense:.2e} <= 1e-10")),
        ])
    })();
    match res {
        Ok(c) => outcome(c, start.elapsed(), Duration::from_secs(10)),
        Err(e) => errored(e),
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let (mut total, mut failed) = (0, Vec::new());
    for (label, gamma) in [("1.4", 1.4), ("5/3", 5.0 / 3.0), ("2", 2.0)] {
        for row in entropy_suite(gamma, 1.0, 4.0).rows {
            total += 1;
            if !row.pass {
                failed.push(format!("gamma={label} {}: {}", row.name, row.value));
            }
        }
    }
    let mut checks = vec![(true, format!("{} of {total} entropy rows pass", total - failed.len()))];
    checks.extend(failed.into_iter().map(|m| (false, m)));
    outcome(checks, start.elapsed(), Duration::from_secs(5))
}

fn bump_config(dir: &std::path::Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.init.preset = PresetName::GaussianBump;
    cfg.init.amplitude = 0.1;
    cfg.output.csv_path = dir.join("bump.csv").to_string_lossy().into_owned();
    cfg
}

fn criterion_3(art: &RunArtifacts, elapsed: Duration) -> Outcome {
    let recs = &art.records;
    let m0 = recs[0].mass;
    let e0 = recs[0].energy;
    let drift = recs.iter().map(|r| (r.mass - m0).abs() / m0).fold(0.0, f64::max);
    let rise = recs
        .windows(2)
        .map(|w| (w[1].energy - w[0].energy) / e0)
        .fold(f64::NEG_INFINITY, f64::max);
    let bound = recs.iter().all(|r| r.rho_bound_ok) && art.summary.rho_bound_ok;
    outcome(
        vec![
            (drift <= 1e-12, format!("max relative mass drift {drift:.2e} <= 1e-12")),
            (rise <= 1e-10, format!("largest relative energy change between outputs {rise:.2e} <= 1e-10")),
            (bound, format!("rho <= rho_bar throughout: {bound}")),
        ],
        elapsed,
        Duration::from_secs(120),
    )
}

fn criterion_4(art: &RunArtifacts) -> Outcome {
    let sel = &art.summary.selection;
    let recs = &art.records;
    let lower = recs.iter().filter(|r| r.v_sigma < sel.c0 * r.energy_l2()).count();
    let upper = recs
        .iter()
        .filter(|r| r.v_sigma > sel.c1 * (r.u_l2 + r.rho_dist_l2))
        .count();
    let late: Vec<_> = recs.iter().filter(|r| r.t > 0.1).collect();
    let holds = late
        .iter()
        .filter(|r| r.w_sigma >= sel.decay_constant * r.v_sigma)
        .count();
    let flagged = late.iter().filter(|r| r.decay_ineq_ok).count() as f64 / late.len() as f64;
    outcome(
        vec![
            (
                sel.c0 > 0.0 && sel.c1 > 0.0 && sel.decay_constant > 0.0,
                format!(
                    "sigma = {}, c0 = {:.4}, c1 = {:.4}, C = {:.4}",
                    sel.sigma, sel.c0, sel.c1, sel.decay_constant
                ),
            ),
            (lower == 0, format!("lower equivalence bound violated at {lower} of {} records", recs.len())),
            (upper == 0, format!("upper equivalence bound violated at {upper} of {} records", recs.len())),
            (
                holds == late.len(),
                format!("W >= C V at {holds} of {} records after t = 0.1", late.len()),
            ),
            (flagged >= 0.99, format!("decay_ineq_ok fraction {flagged:.4} >= 0.99")),
        ],
        Duration::ZERO,
        Duration::from_secs(1),
    )
}

fn criterion_5(art: &RunArtifacts) -> Outcome {
    let s = &art.summary;
    let mut checks = vec![(
        s.fit_window == (0.5, 2.0),
        format!("fit window [{}, {}]", s.fit_window.0, s.fit_window.1),
    )];
    match &s.fit {
        FitOutcome::Fitted(r) => {
            let (v, e) = (r.v_sigma, r.energy_l2);
            let ratio = v.rate / e.rate;
            checks.push((v.rate > 0.0, format!("V_sigma rate {:.4} > 0", v.rate)));
            checks.push((v.r_squared >= 0.99, format!("V_sigma R^2 {:.5} >= 0.99", v.r_squared)));
            checks.push((e.rate > 0.0, format!("L2 quantity rate {:.4} > 0", e.rate)));
            checks.push((
                (0.5..=2.0).contains(&ratio),
                format!("rate ratio {ratio:.4} within a factor of 2"),
            ));
        }
        other => checks.push((false, format!("no fit: {other:?}"))),
    }
    let frac = s.diff_ineq.fraction_ok_after_transient;
    checks.push((frac >= 0.95, format!("differential inequality post-transient fraction {frac:.4} >= 0.95")));
    outcome(checks, Duration::ZERO, Duration::from_secs(1))
}

fn random_scalar(grid: GridSpec, rng: &mut ChaCha8Rng) -> ScalarField {
    let vals = Array2::from_shape_fn((grid.nx(), grid.ny()), |_| rng.random_range(-1.0..1.0));
    ScalarField::from_array(grid, vals).unwrap()
}

fn random_vector(grid: GridSpec, rng: &mut ChaCha8Rng) -> VectorField {
    let ux = Array2::from_shape_fn((grid.nx() + 1, grid.ny()), |_| rng.random_range(-1.0..1.0));
    let uy = Array2::from_shape_fn((grid.nx(), grid.ny() + 1), |_| rng.random_range(-1.0..1.0));
    let mut w = VectorField::from_arrays(grid, ux, uy).unwrap();
    w.enforce_no_slip();
    w
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_sbp: f64 = 0.0;
    let mut worst_lap: f64 = 0.0;
    for (nx, ny, lx, ly) in [(8, 8, 1.0, 1.0), (17, 11, 1.5, 0.7), (64, 48, 1.0, 0.75)] {
        let grid = GridSpec::new(nx, ny, lx, ly).unwrap();
        for _ in 0..3 {
            let phi = random_scalar(grid, &mut rng);
            let w = random_vector(grid, &mut rng);
            let grad = gradient(&phi);
            let lhs = divergence(&w).dot(&phi).unwrap();
            let rhs = -w.dot(&grad).unwrap();
            let scale = divergence(&w).norm_l2() * phi.norm_l2() + w.norm_l2() * grad.norm_l2();
            worst_sbp = worst_sbp.max((lhs - rhs).abs() / scale);

            let dg = divergence(&grad);
            let p = phi.values();
            let (dx2, dy2) = (grid.dx() * grid.dx(), grid.dy() * grid.dy());
            let mut num: f64 = 0.0;
            let mut den: f64 = 0.0;
            for i in 0..nx {
                for j in 0..ny {
                    let c = p[[i, j]];
                    let mut lap = 0.0;
                    if i > 0 {
                        lap += (p[[i - 1, j]] - c) / dx2;
                    }
                    if i + 1 < nx {
                        lap += (p[[i + 1, j]] - c) / dx2;
                    }
                    if j > 0 {
                        lap += (p[[i, j - 1]] - c) / dy2;
                    }
                    if j + 1 < ny {
                        lap += (p[[i, j + 1]] - c) / dy2;
                    }
                    num = num.max((dg.get(i, j) - lap).abs());
                    den = den.max(lap.abs());
                }
            }
            worst_lap = worst_lap.max(num / den);
        }
    }
    outcome(
        vec![
            (worst_sbp <= 1e-12, format!("summation by parts relative defect {worst_sbp:.2e}")),
            (worst_lap <= 1e-12, format!("div grad vs 5-point Laplacian relative defect {worst_lap:.2e}")),
        ],
        start.elapsed(),
        Duration::from_secs(1),
    )
}

fn criterion_7(dir: &std::path::Path) -> Outcome {
    let start = Instant::now();
    let res = (|| -> Result<Vec<(bool, String)>, String> {
        let mut cfg = RunConfig::default();
        cfg.grid.nx = 24;
        cfg.grid.ny = 20;
        cfg.init.preset = PresetName::Random;
        cfg.init.amplitude = 0.2;
        cfg.init.seed = 11;
        cfg.solver.t_end = 0.3;

        let grid = cfg.grid_spec();
        let params = cfg.fluid_params();
        let mut state = build_initial(&cfg.init, grid).map_err(|e| e.to_string())?;
        state.u = random_vector(grid, &mut ChaCha8Rng::seed_from_u64(3)).scaled(0.1);
        let bog = BogovskiiSolver::new(grid, cfg.bogovskii).map_err(|e| e.to_string())?;
        let rho_s = state.rho.mean();
        let v = v_sigma(&state, rho_s, 0.0, &params, &bog).map_err(|e| e.to_string())?;
        let w = w_sigma(&state, rho_s, 0.0, &params, &bog).map_err(|e| e.to_string())?;
        let f = StateFunctionals::compute(&state, &params, rho_s, Some(&bog)).map_err(|e| e.to_string())?;
        let d = dissipation(&state, &params);

        let mut paths = Vec::new();
        for k in 0..2 {
            let mut c = cfg.clone();
            c.output.csv_path = dir.join(format!("det{k}.csv")).to_string_lossy().into_owned();
            run_to_files(&c, &[], false).map_err(|e| e.to_string())?;
            paths.push(c.output.csv_path);
        }
        let a = std::fs::read(&paths[0]).map_err(|e| e.to_string())?;
        let b = std::fs::read(&paths[1]).map_err(|e| e.to_string())?;
        Ok(vec![
            (
                v.value == f.relative_entropy_energy() && v.cross_term == 0.0,
                format!("sigma = 0: V = {:e} equals relative entropy energy exactly", v.value),
            ),
            (w.total() == d, format!("sigma = 0: W = {:e} equals dissipation exactly", w.total())),
            (
                a == b && !a.is_empty(),
                format!("two identical runs give byte-identical CSV ({} bytes)", a.len()),
            ),
        ])
    })();
    match res {
        Ok(c) => outcome(c, start.elapsed(), Duration::from_secs(60)),
        Err(e) => errored(e),
    }
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temporary directory");
    let mut results: Vec<(u32, Outcome)> = vec![(1, criterion_1()), (2, criterion_2())];

    let cfg = bump_config(dir.path());
    let start = Instant::now();
    match simulate(&cfg) {
        Ok(art) => {
            let elapsed = start.elapsed();
            results.push((3, criterion_3(&art, elapsed)));
            results.push((4, criterion_4(&art)));
            results.push((5, criterion_5(&art)));
        }
        Err(f) => {
            for n in 3..=5 {
                results.push((n, errored(&f.error)));
            }
        }
    }
    results.push((6, criterion_6()));
    results.push((7, criterion_7(dir.path())));

    let mut all = true;
    for (n, o) in &results {
        all &= o.pass;
        println!("criterion {n}: {}  {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
