//! Self-check subcommands: Bogovskii solver correctness and the relative
//! entropy comparison constants. Each check yields a table of rows.

use std::fmt;

use lyapdecay_core::bogovskii::{operator_norm_probe, random_zero_mean, BogovskiiSolver, SaddleSolverConfig};
use lyapdecay_core::dense::dense_bogovskii;
use lyapdecay_core::fluid::{entropy_bounds_probe, entropy_f, entropy_f_quadrature, entropy_ratio};
use lyapdecay_core::grid::divergence;
use lyapdecay_core::{Error, GridSpec, Result, ScalarField, VectorField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;

/// Saddle tolerance used when comparing against the dense solve.
pub const ORACLE_TOL: f64 = 1e-12;
pub const ORACLE_MATCH: f64 = 1e-10;
pub const QUADRATURE_TOL: f64 = 1e-13;
pub const ENTROPY_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: String,
    pub value: String,
    pub pass: bool,
}

impl CheckRow {
    fn new(name: impl Into<String>, value: impl Into<String>, pass: bool) -> Self {
        Self {
            name: name.into(),
            value: value.into(),
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CheckTable {
    pub rows: Vec<CheckRow>,
}

impl CheckTable {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    fn push(&mut self, row: CheckRow) {
        self.rows.push(row);
    }

    fn push_result(&mut self, name: &str, res: Result<CheckRow>) {
        self.push(res.unwrap_or_else(|e| CheckRow::new(name, format!("error: {e}"), false)));
    }
}

impl fmt::Display for CheckTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
        for r in &self.rows {
            writeln!(f, "{:<4}  {:<w$}  {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.value)?;
        }
        Ok(())
    }
}

fn max_face_diff(a: &VectorField, b: &VectorField) -> f64 {
    let dx = a.ux().iter().zip(b.ux().iter()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let dy = a.uy().iter().zip(b.uy().iter()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    dx.max(dy)
}

/// Largest dense-vs-iterative face difference over `seeds` random data.
pub fn dense_oracle_error(grid: GridSpec, base: SaddleSolverConfig, seeds: usize, seed: u64) -> Result<f64> {
    let cfg = SaddleSolverConfig {
        tol: base.tol.min(ORACLE_TOL),
        ..base
    };
    let solver = BogovskiiSolver::new(grid, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..seeds {
        let f = random_zero_mean(grid, &mut rng);
        let dense = dense_bogovskii(&grid, &f)?;
        worst = worst.max(max_face_diff(&solver.solve(&f)?.v, &dense));
    }
    Ok(worst)
}

/// True relative residuals `||div B[f] - f|| / ||f||` for `n` seeded data.
pub fn residuals(grid: GridSpec, cfg: SaddleSolverConfig, n: usize, seed: u64) -> Result<Vec<f64>> {
    let solver = BogovskiiSolver::new(grid, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let f = random_zero_mean(grid, &mut rng);
            let v = solver.solve(&f)?.v;
            let r = divergence(&v).zip_map(&f, |d, g| d - g)?;
            Ok(r.norm_l2() / f.norm_l2())
        })
        .collect()
}

pub fn bogovskii_check(cfg: &RunConfig) -> CheckTable {
    let mut t = CheckTable::default();
    let base = cfg.bogovskii;
    let seed = cfg.init.seed;

    for (nx, ny) in [(6, 6), (8, 8), (8, 5)] {
        let name = format!("dense oracle {nx}x{ny}");
        let res = GridSpec::new(nx, ny, cfg.grid.lx, cfg.grid.ly)
            .and_then(|g| dense_oracle_error(g, base, 3, seed))
            .map(|e| CheckRow::new(&name, format!("max face error {e:.3e} (<= {ORACLE_MATCH:e})"), e <= ORACLE_MATCH));
        t.push_result(&name, res);
    }

    let grid = cfg.grid_spec();
    let name = format!("residual {}x{}", grid.nx(), grid.ny());
    let res = residuals(grid, base, 5, seed).map(|r| {
        let worst = r.iter().copied().fold(0.0, f64::max);
        CheckRow::new(
            &name,
            format!("worst of 5 relative residuals {worst:.3e} (<= {:e})", base.tol),
            worst <= base.tol,
        )
    });
    t.push_result(&name, res);

    let res = BogovskiiSolver::new(grid, base).and_then(|s| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sol = s.solve(&random_zero_mean(grid, &mut rng))?;
        let zero = s.solve(&ScalarField::zeros(grid))?;
        Ok(CheckRow::new(
            "no-slip and zero datum",
            format!("boundary faces zero: {}, B[0] = 0: {}", sol.v.is_no_slip(), zero.v.max_abs() == 0.0),
            sol.v.is_no_slip() && zero.v.max_abs() == 0.0,
        ))
    });
    t.push_result("no-slip and zero datum", res);

    let res = BogovskiiSolver::new(grid, base).map(|s| {
        let gross = ScalarField::constant(grid, 1.0);
        let rejected = matches!(s.solve(&gross), Err(Error::Compatibility { .. }));
        CheckRow::new("nonzero mean rejected", format!("compatibility error: {rejected}"), rejected)
    });
    t.push_result("nonzero mean rejected", res);

    let mut norms = Vec::new();
    for div in [4, 2, 1] {
        let (nx, ny) = ((cfg.grid.nx / div).max(4), (cfg.grid.ny / div).max(4));
        let name = format!("operator norm {nx}x{ny}");
        let res = GridSpec::new(nx, ny, cfg.grid.lx, cfg.grid.ly)
            .and_then(|g| BogovskiiSolver::new(g, base))
            .and_then(|s| operator_norm_probe(&s, 5, seed))
            .map(|c| {
                norms.push(c);
                CheckRow::new(&name, format!("||B|| >= {c:.6}"), c.is_finite() && c > 0.0)
            });
        t.push_result(&name, res);
    }
    if norms.len() == 3 {
        let spread = norms.iter().copied().fold(0.0, f64::max) / norms.iter().copied().fold(f64::INFINITY, f64::min);
        t.push(CheckRow::new(
            "operator norm stable under refinement",
            format!("max/min = {spread:.4} (<= 2)"),
            spread <= 2.0,
        ));
    }
    t
}

/// Closed-form integrand, quadrature oracle, limits and comparison
/// constants for one `(gamma, r0, r_max)`.
pub fn entropy_suite(gamma: f64, r0: f64, r_max: f64) -> CheckTable {
    let mut t = CheckTable::default();
    let scale = r0.powf(gamma).max(1.0);

    let res = entropy_bounds_probe(r0, r_max, gamma, ENTROPY_SAMPLES).map(|(k1, k2)| {
        CheckRow::new("K1, K2", format!("K1 = {k1:.9}, K2 = {k2:.9}"), k1 > 0.0 && k2 >= k1)
    });
    t.push_result("K1, K2", res);

    let res = (|| -> Result<CheckRow> {
        let mut worst: f64 = 0.0;
        for k in 0..ENTROPY_SAMPLES {
            let r = r_max * k as f64 / (ENTROPY_SAMPLES - 1) as f64;
            let d = (entropy_f(r, r0, gamma)? - entropy_f_quadrature(r, r0, gamma, QUADRATURE_TOL)?).abs();
            worst = worst.max(d);
        }
        Ok(CheckRow::new(
            "closed form vs quadrature",
            format!("max abs difference {worst:.3e} over {ENTROPY_SAMPLES} samples"),
            worst <= 1e-9 * scale,
        ))
    })();
    t.push_result("closed form vs quadrature", res);

    let at_zero = r0.powf(gamma - 2.0);
    let res = entropy_ratio(0.0, r0, gamma).map(|g| {
        CheckRow::new(
            "g(0) = r0^(gamma-2)",
            format!("{g:.12} vs {at_zero:.12}"),
            (g - at_zero).abs() <= 1e-9 * at_zero.max(1.0),
        )
    });
    t.push_result("g(0) = r0^(gamma-2)", res);

    let at_r0 = 0.5 * gamma * r0.powf(gamma - 2.0);
    let res = (|| -> Result<CheckRow> {
        let lo = entropy_ratio(r0 - 1e-4, r0, gamma)?;
        let hi = entropy_ratio(r0 + 1e-4, r0, gamma)?;
        let tol = 1e-5 * at_r0.max(1.0);
        Ok(CheckRow::new(
            "g(r0 +- 1e-4) = gamma/2 r0^(gamma-2)",
            format!("{lo:.9}, {hi:.9} vs {at_r0:.9}"),
            (lo - at_r0).abs() <= tol && (hi - at_r0).abs() <= tol,
        ))
    })();
    t.push_result("g(r0 +- 1e-4) = gamma/2 r0^(gamma-2)", res);

    if gamma == 2.0 {
        let res = (|| -> Result<CheckRow> {
            let mut worst: f64 = 0.0;
            for k in 0..ENTROPY_SAMPLES {
                let r = r_max * k as f64 / (ENTROPY_SAMPLES - 1) as f64;
                worst = worst.max((entropy_f(r, r0, gamma)? - (r - r0).powi(2)).abs());
            }
            Ok(CheckRow::new(
                "gamma = 2: f = (r - r0)^2",
                format!("max abs difference {worst:.3e}"),
                worst <= 1e-12 * scale,
            ))
        })();
        t.push_result("gamma = 2: f = (r - r0)^2", res);
    }
    t
}

pub fn entropy_check(cfg: &RunConfig) -> CheckTable {
    entropy_suite(cfg.fluid.gamma, cfg.init.rho_s, cfg.fluid.rho_bar)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_suite_rows() {
        for gamma in [5.0 / 3.0, 2.0] {
            let t = entropy_suite(gamma, 1.0, 4.0);
            assert!(t.passed(), "gamma = {gamma}\n{t}");
        }
        assert_eq!(entropy_suite(2.0, 1.0, 4.0).rows.len(), 5);

        // g(1 + x) = gamma/2 + gamma (gamma - 2) x / 6 + O(x^2): at gamma = 1.4
        // the offset at |x| = 1e-4 is 1.4e-5, outside the 1e-5 band
        let t = entropy_suite(1.4, 1.0, 4.0);
        let failing: Vec<_> = t.rows.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
        assert_eq!(failing, ["g(r0 +- 1e-4) = gamma/2 r0^(gamma-2)"]);
        let hi = entropy_ratio(1.0 + 1e-4, 1.0, 1.4).unwrap();
        assert!((hi - 0.7 - 1.4 * (1.4 - 2.0) / 6.0 * 1e-4).abs() < 1e-8);
    }

    #[test]
    fn entropy_suite_reports_bad_range() {
        let t = entropy_suite(1.4, 4.0, 2.0);
        assert!(!t.passed());
        assert!(t.rows[0].value.starts_with("error"));
    }

    #[test]
    fn bogovskii_check_passes_on_small_config() {
        let mut cfg = RunConfig::default();
        cfg.grid.nx = 16;
        cfg.grid.ny = 12;
        let t = bogovskii_check(&cfg);
        assert!(t.passed(), "{t}");
        let text = t.to_string();
        assert!(text.contains("dense oracle 6x6"));
        assert!(text.lines().all(|l| l.starts_with("PASS")));
    }
}
