//! Solvers for `-Δ_h u = w` on face fields with homogeneous no-slip walls.
//!
//! Each velocity component decouples. On the x-faces the unknowns are the
//! interior faces `1 <= i < nx`; in `x` the boundary faces are held at zero
//! (Dirichlet stencil), in `y` the wall sits half a cell away and is realized
//! by the ghost `u_ghost = -u` (reflection stencil). The y-faces are the
//! transpose of that picture. Both 1-D operators have sine eigenvectors, so
//! the 2-D operator is inverted exactly by a separable change of basis.

use std::f64::consts::PI;

use ndarray::{s, Array1, Array2, ArrayView2, Zip};

use crate::grid::{vector_laplacian, GridSpec, VectorField};

/// How the velocity Laplacian is inverted inside the saddle-point iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnerSolver {
    /// Exact solve by separable sine-basis diagonalization.
    #[default]
    FastDiagonalization,
    /// Unpreconditioned conjugate gradient on the 5-point stencil.
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stencil1d {
    /// Boundary values pinned to zero on the grid line itself.
    Dirichlet,
    /// Zero value half a cell outside, via `u_ghost = -u`.
    Reflection,
}

/// Orthonormal eigenbasis (columns) and eigenvalues of a 1-D second-difference
/// operator `-(u_{k+1} - 2u_k + u_{k-1}) / h^2`.
fn eigenbasis(n: usize, h: f64, kind: Stencil1d) -> (Array2<f64>, Array1<f64>) {
    let mut q = Array2::zeros((n, n));
    let mut lam = Array1::zeros(n);
    for k in 1..=n {
        let (theta, phase) = match kind {
            Stencil1d::Dirichlet => (k as f64 * PI / (n + 1) as f64, 1.0),
            Stencil1d::Reflection => (k as f64 * PI / n as f64, 0.5),
        };
        lam[k - 1] = (2.0 - 2.0 * theta.cos()) / (h * h);
        let mut col = q.column_mut(k - 1);
        for j in 0..n {
            col[j] = (theta * (j as f64 + phase)).sin();
        }
        let norm = col.dot(&col).sqrt();
        col /= norm;
    }
    (q, lam)
}

#[derive(Debug, Clone)]
struct SeparableSolver {
    qa: Array2<f64>,
    qb: Array2<f64>,
    denom: Array2<f64>,
}

impl SeparableSolver {
    fn new(a: (usize, f64, Stencil1d), b: (usize, f64, Stencil1d)) -> Self {
        let (qa, la) = eigenbasis(a.0, a.1, a.2);
        let (qb, lb) = eigenbasis(b.0, b.1, b.2);
        let denom = Array2::from_shape_fn((a.0, b.0), |(i, j)| la[i] + lb[j]);
        Self { qa, qb, denom }
    }

    fn solve(&self, rhs: ArrayView2<f64>) -> Array2<f64> {
        let mut hat = self.qa.t().dot(&rhs).dot(&self.qb);
        Zip::from(&mut hat).and(&self.denom).for_each(|h, &d| *h /= d);
        self.qa.dot(&hat).dot(&self.qb.t())
    }
}

/// Exact inverse of `-vector_laplacian` on no-slip face fields.
#[derive(Debug, Clone)]
pub(crate) struct FastFaceSolver {
    x_faces: SeparableSolver,
    y_faces: SeparableSolver,
}

impl FastFaceSolver {
    pub(crate) fn new(grid: &GridSpec) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        Self {
            x_faces: SeparableSolver::new(
                (nx - 1, grid.dx(), Stencil1d::Dirichlet),
                (ny, grid.dy(), Stencil1d::Reflection),
            ),
            y_faces: SeparableSolver::new(
                (nx, grid.dx(), Stencil1d::Reflection),
                (ny - 1, grid.dy(), Stencil1d::Dirichlet),
            ),
        }
    }

    pub(crate) fn solve(&self, w: &VectorField) -> VectorField {
        let g = *w.grid();
        let (nx, ny) = (g.nx(), g.ny());
        let mut out = VectorField::zeros(g);
        let ux = self.x_faces.solve(w.ux().slice(s![1..nx, ..]));
        out.ux_mut().slice_mut(s![1..nx, ..]).assign(&ux);
        let uy = self.y_faces.solve(w.uy().slice(s![.., 1..ny]));
        out.uy_mut().slice_mut(s![.., 1..ny]).assign(&uy);
        out
    }
}

/// Conjugate gradient for `-vector_laplacian(u) = w` with zero boundary faces.
/// Stops at relative residual `rel_tol`; returns the iterate and the number of
/// iterations used.
pub(crate) fn cg_face_solve(w: &VectorField, rel_tol: f64, max_iter: usize) -> (VectorField, usize) {
    let g = *w.grid();
    let mut x = VectorField::zeros(g);
    let mut r = w.clone();
    r.enforce_no_slip();
    let b_norm = r.norm_l2();
    if b_norm == 0.0 {
        return (x, 0);
    }
    let mut p = r.clone();
    let mut rr = r.dot(&r).unwrap_or(0.0);
    for it in 1..=max_iter {
        let ap = vector_laplacian(&p).scaled(-1.0);
        let alpha = rr / p.dot(&ap).unwrap_or(f64::NAN);
        x.add_scaled(alpha, &p);
        r.add_scaled(-alpha, &ap);
        let rr_new = r.dot(&r).unwrap_or(0.0);
        if rr_new.sqrt() <= rel_tol * b_norm {
            return (x, it);
        }
        let beta = rr_new / rr;
        rr = rr_new;
        p = r.axpy(beta, &p).expect("same grid");
    }
    (x, max_iter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_face_field(g: GridSpec, seed: u64) -> VectorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = VectorField::zeros(g);
        w.ux_mut().mapv_inplace(|_| rng.random_range(-1.0..1.0));
        w.uy_mut().mapv_inplace(|_| rng.random_range(-1.0..1.0));
        w.enforce_no_slip();
        w
    }

    #[test]
    fn eigenbasis_is_orthonormal_and_diagonalizes() {
        for kind in [Stencil1d::Dirichlet, Stencil1d::Reflection] {
            let n = 7;
            let h = 0.3;
            let (q, lam) = eigenbasis(n, h, kind);
            let qtq = q.t().dot(&q);
            for i in 0..n {
                for j in 0..n {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((qtq[[i, j]] - e).abs() < 1e-13);
                }
            }
            let end = if kind == Stencil1d::Dirichlet { 2.0 } else { 3.0 };
            let t = Array2::from_shape_fn((n, n), |(i, j)| {
                let d = if i == 0 || i == n - 1 { end } else { 2.0 };
                if i == j {
                    d / (h * h)
                } else if i.abs_diff(j) == 1 {
                    -1.0 / (h * h)
                } else {
                    0.0
                }
            });
            let tq = t.dot(&q);
            for k in 0..n {
                for j in 0..n {
                    assert!((tq[[j, k]] - lam[k] * q[[j, k]]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn fast_solver_inverts_laplacian() {
        let g = GridSpec::new(9, 6, 1.0, 0.7).unwrap();
        let w = random_face_field(g, 5);
        let u = FastFaceSolver::new(&g).solve(&w);
        assert!(u.is_no_slip());
        let back = vector_laplacian(&u).scaled(-1.0);
        let err = back.axpy(-1.0, &w).unwrap().norm_l2();
        assert!(err < 1e-11 * w.norm_l2(), "{err}");
    }

    #[test]
    fn cg_agrees_with_fast_solver() {
        let g = GridSpec::new(8, 10, 1.2, 1.0).unwrap();
        let w = random_face_field(g, 9);
        let fast = FastFaceSolver::new(&g).solve(&w);
        let (cg, iters) = cg_face_solve(&w, 1e-12, 1000);
        assert!(iters > 0 && iters < 1000);
        let diff = cg.axpy(-1.0, &fast).unwrap().norm_l2();
        assert!(diff < 1e-9 * fast.norm_l2());
    }
}
