//! Discrete solution operator for `div v = f`, `v = 0` on the boundary.
//!
//! `B[f]` is the minimizer of the discrete `integral |grad v|^2` over face
//! fields with zero boundary faces and `divergence(v) = f - mean(f)`. Its
//! optimality system is the Stokes-type saddle problem
//!
//! ```text
//! -Δ_h v + grad q = 0,    div v = f
//! ```
//!
//! solved by conjugate gradients on the Schur complement
//! `S = -div (-Δ_h)^{-1} grad`, which is symmetric positive definite on
//! zero-mean cell fields.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{
    divergence, gradient, velocity_gradient, velocity_norms, GridSpec, ScalarField, TensorFieldNorms, VectorField,
    VelocityGradient,
};
use crate::poisson::{cg_face_solve, FastFaceSolver, InnerSolver};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleSolverConfig {
    /// Target for `||div v - f|| / ||f||`.
    pub tol: f64,
    /// `None` means `10 (nx + ny)`.
    pub max_iter: Option<usize>,
    /// Compatibility threshold on `|mean f| * sqrt(|Ω|) / ||f||`.
    pub mean_tol: f64,
    pub inner: InnerSolver,
}

impl Default for SaddleSolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: None,
            mean_tol: 1e-10,
            inner: InnerSolver::default(),
        }
    }
}

impl SaddleSolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("saddle tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == Some(0) {
            return Err(Error::InvalidParameter("saddle max_iter must be at least 1".into()));
        }
        if !(self.mean_tol >= 0.0) {
            return Err(Error::InvalidParameter(format!("mean_tol must be nonnegative, got {}", self.mean_tol)));
        }
        Ok(())
    }

    pub fn max_iter_for(&self, grid: &GridSpec) -> usize {
        self.max_iter.unwrap_or(10 * (grid.nx() + grid.ny()))
    }
}

/// Right-hand side whose integral vanishes up to `mean_tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct BogovskiiProblem {
    f: ScalarField,
}

impl BogovskiiProblem {
    pub fn new(f: ScalarField, mean_tol: f64) -> Result<Self> {
        check_compatibility(&f, mean_tol)?;
        Ok(Self { f })
    }

    pub fn rhs(&self) -> &ScalarField {
        &self.f
    }
}

fn check_compatibility(f: &ScalarField, mean_tol: f64) -> Result<()> {
    let mean = f.mean();
    let norm = f.norm_l2();
    if mean.abs() * f.grid().area().sqrt() > mean_tol * norm {
        return Err(Error::Compatibility { mean, norm });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BogovskiiSolution {
    pub v: VectorField,
    /// Lagrange multiplier `q` of the divergence constraint.
    pub multiplier: ScalarField,
    /// `||div v - (f - mean f)||_{L2}`.
    pub residual_div: f64,
    /// `residual_div` relative to `||f - mean f||_{L2}` (0 for a zero datum).
    pub relative_residual: f64,
    pub iterations: usize,
}

/// Reusable workspace; construction precomputes the inner-solver bases.
#[derive(Debug, Clone)]
pub struct BogovskiiSolver {
    grid: GridSpec,
    config: SaddleSolverConfig,
    fast: Option<FastFaceSolver>,
}

impl BogovskiiSolver {
    pub fn new(grid: GridSpec, config: SaddleSolverConfig) -> Result<Self> {
        config.validate()?;
        let fast = match config.inner {
            InnerSolver::FastDiagonalization => Some(FastFaceSolver::new(&grid)),
            InnerSolver::ConjugateGradient => None,
        };
        Ok(Self { grid, config, fast })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn config(&self) -> &SaddleSolverConfig {
        &self.config
    }

    fn inverse_laplacian(&self, w: &VectorField) -> VectorField {
        match &self.fast {
            Some(fast) => fast.solve(w),
            None => {
                let max = 50 * (self.grid.nx() + self.grid.ny());
                cg_face_solve(w, 0.1 * self.config.tol, max).0
            }
        }
    }

    pub fn solve_problem(&self, problem: &BogovskiiProblem) -> Result<BogovskiiSolution> {
        self.solve(&problem.f)
    }

    /// Computes `B[f]`. Fails on gross compatibility violations or when the
    /// iteration limit is hit.
    pub fn solve(&self, f: &ScalarField) -> Result<BogovskiiSolution> {
        if f.grid() != &self.grid {
            return Err(Error::Shape("right-hand side lives on a different grid".into()));
        }
        check_compatibility(f, self.config.mean_tol)?;
        self.solve_centered(f)
    }

    /// Like [`BogovskiiSolver::solve`] but without the compatibility check,
    /// for data whose mean vanishes by construction and is off only by
    /// round-off (e.g. the divergence of a no-slip field). The mean is still
    /// removed before solving.
    pub fn solve_centered(&self, f: &ScalarField) -> Result<BogovskiiSolution> {
        if f.grid() != &self.grid {
            return Err(Error::Shape("right-hand side lives on a different grid".into()));
        }
        let grid = self.grid;
        let mean = f.mean();
        let rhs = f.map(|x| x - mean);
        let rhs_norm = rhs.norm_l2();

        let mut v = VectorField::zeros(grid);
        let mut q = ScalarField::zeros(grid);
        if rhs_norm == 0.0 {
            return Ok(BogovskiiSolution {
                v,
                multiplier: q,
                residual_div: 0.0,
                relative_residual: 0.0,
                iterations: 0,
            });
        }

        let max_iter = self.config.max_iter_for(&grid);
        let tol = self.config.tol;
        let mut r = rhs.clone();
        let mut p = r.clone();
        let mut rr = r.dot(&r)?;
        let mut rel = 1.0;
        for it in 1..=max_iter {
            // z = (-Δ_h)^{-1} grad p;  S p = -div z
            let z = self.inverse_laplacian(&gradient(&p));
            let sp = divergence(&z).map(|x| -x);
            let curvature = p.dot(&sp)?;
            if !(curvature > 0.0) {
                return Err(Error::NumericalFailure {
                    t: 0.0,
                    reason: format!("Schur complement lost positivity at iteration {it}"),
                });
            }
            let alpha = rr / curvature;
            axpy_cells(&mut q, alpha, &p);
            v.add_scaled(-alpha, &z);
            axpy_cells(&mut r, -alpha, &sp);
            remove_mean(&mut r);
            let rr_new = r.dot(&r)?;
            rel = rr_new.sqrt() / rhs_norm;
            if rel <= tol {
                // confirm against the true residual
                let true_res = residual(&v, &rhs);
                let true_rel = true_res / rhs_norm;
                if true_rel <= tol {
                    v.enforce_no_slip();
                    let qm = q.mean();
                    return Ok(BogovskiiSolution {
                        v,
                        multiplier: q.map(|x| x - qm),
                        residual_div: true_res,
                        relative_residual: true_rel,
                        iterations: it,
                    });
                }
                rel = true_rel;
            }
            let beta = rr_new / rr;
            rr = rr_new;
            let mut next = r.clone();
            axpy_cells(&mut next, beta, &p);
            p = next;
        }
        Err(Error::IterationLimit {
            iterations: max_iter,
            residual: rel,
        })
    }
}

fn axpy_cells(y: &mut ScalarField, alpha: f64, x: &ScalarField) {
    y.values_mut().scaled_add(alpha, &x.values());
}

fn remove_mean(r: &mut ScalarField) {
    let m = r.mean();
    r.values_mut().mapv_inplace(|x| x - m);
}

fn residual(v: &VectorField, rhs: &ScalarField) -> f64 {
    let div = divergence(v);
    div.zip_map(rhs, |a, b| a - b).map(|s| s.norm_l2()).unwrap_or(f64::NAN)
}

/// Convenience wrapper building a one-off solver.
pub fn solve(problem: &BogovskiiProblem, grid: GridSpec, config: SaddleSolverConfig) -> Result<BogovskiiSolution> {
    BogovskiiSolver::new(grid, config)?.solve_problem(problem)
}

/// Gradient of `B[f]` at its staggered locations plus its raw norms.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionGradient {
    pub norms: TensorFieldNorms,
    pub gradient: VelocityGradient,
}

pub fn gradient_of_solution(sol: &BogovskiiSolution) -> SolutionGradient {
    SolutionGradient {
        norms: velocity_norms(&sol.v),
        gradient: velocity_gradient(&sol.v),
    }
}

/// `||v||_{W^{1,2}} = sqrt(||v||^2 + ||grad v||^2)`.
pub fn w12_norm(v: &VectorField) -> f64 {
    let l2 = v.dot(v).unwrap_or(0.0);
    (l2 + velocity_norms(v).grad_norm_sq).sqrt()
}

/// Largest observed `||B f||_{W^{1,2}} / ||f||_{L2}` over `n_trials` seeded
/// random zero-mean right-hand sides.
pub fn operator_norm_probe(solver: &BogovskiiSolver, n_trials: usize, seed: u64) -> Result<f64> {
    if n_trials == 0 {
        return Err(Error::InvalidParameter("operator norm probe needs at least one trial".into()));
    }
    let grid = *solver.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_trials {
        let f = random_zero_mean(grid, &mut rng);
        let sol = solver.solve(&f)?;
        worst = worst.max(w12_norm(&sol.v) / f.norm_l2());
    }
    Ok(worst)
}

/// Uniform `[-1, 1)` cell values with the mean removed.
pub fn random_zero_mean(grid: GridSpec, rng: &mut impl Rng) -> ScalarField {
    let values = Array2::from_shape_fn((grid.nx(), grid.ny()), |_| rng.random_range(-1.0..1.0));
    let mut f = ScalarField::from_array(grid, values).expect("shape from grid");
    remove_mean(&mut f);
    f
}

/// `||B[div g]||_{L2} / ||g||_{L2}` for a face field with zero boundary faces.
/// Also returns the solution for reuse.
pub fn divergence_form_probe(g: &VectorField, solver: &BogovskiiSolver) -> Result<(f64, BogovskiiSolution)> {
    if !g.is_no_slip() {
        return Err(Error::Domain("divergence-form probe needs zero boundary faces".into()));
    }
    let f = divergence(g);
    // The discrete divergence theorem makes integrate(f) vanish up to the
    // round-off of the telescoping face sums.
    let grid = g.grid();
    let flux_scale = g.ux().iter().map(|v| v.abs()).sum::<f64>() * grid.dy()
        + g.uy().iter().map(|v| v.abs()).sum::<f64>() * grid.dx();
    let total = crate::grid::integrate(&f);
    if total.abs() > solver.config.mean_tol * flux_scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Internal(format!(
            "divergence of a no-slip field integrates to {total:e}; discrete duality is broken"
        )));
    }
    let sol = solver.solve_centered(&f)?;
    let gn = g.norm_l2();
    let ratio = if gn == 0.0 { 0.0 } else { sol.v.norm_l2() / gn };
    Ok((ratio, sol))
}
