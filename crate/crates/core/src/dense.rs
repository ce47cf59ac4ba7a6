//! Dense direct solve of the discrete Bogovskii problem, for checking the
//! iterative solver on small grids.
//!
//! The gradient energy is assembled entry by entry from the stencil
//! definitions (cell-center differences, and vertex differences with the
//! half-weighted wall rows), then the KKT system
//! `[2H  Dᵀ 0; D 0 1; 0 1ᵀ 0]` is solved by LU. The bordering row pins the
//! multiplier to zero mean.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField, VectorField};

/// Largest cell count accepted by [`dense_bogovskii`].
pub const MAX_DENSE_CELLS: usize = 1024;

struct Layout {
    nx: usize,
    ny: usize,
}

impl Layout {
    fn n_ux(&self) -> usize {
        (self.nx - 1) * self.ny
    }
    fn n_uy(&self) -> usize {
        self.nx * (self.ny - 1)
    }
    fn n_vel(&self) -> usize {
        self.n_ux() + self.n_uy()
    }
    /// Interior x-face (i in 1..nx, j in 0..ny).
    fn ux(&self, i: usize, j: usize) -> Option<usize> {
        (i >= 1 && i < self.nx).then(|| (i - 1) * self.ny + j)
    }
    /// Interior y-face (i in 0..nx, j in 1..ny).
    fn uy(&self, i: usize, j: usize) -> Option<usize> {
        (j >= 1 && j < self.ny).then(|| self.n_ux() + i * (self.ny - 1) + (j - 1))
    }
}

/// Dense solve of `min sum w d^2  s.t.  div v = f` with the multiplier pinned
/// to zero mean by a bordering row.
pub fn dense_bogovskii(grid: &GridSpec, f: &ScalarField) -> Result<VectorField> {
    if f.grid() != grid {
        return Err(Error::Shape("datum lives on a different grid".into()));
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    if nx * ny > MAX_DENSE_CELLS {
        return Err(Error::InvalidParameter(format!(
            "dense reference limited to {MAX_DENSE_CELLS} cells, got {nx}x{ny}"
        )));
    }
    let (dx, dy) = (grid.dx(), grid.dy());
    let vol = dx * dy;
    let lay = Layout { nx, ny };
    let nv = lay.n_vel();
    let nc = nx * ny;
    let mut h = DMatrix::<f64>::zeros(nv, nv);
    let mut add_diff = |terms: &[(Option<usize>, f64)], w: f64| {
        for &(a, ca) in terms {
            for &(b, cb) in terms {
                if let (Some(a), Some(b)) = (a, b) {
                    h[(a, b)] += w * ca * cb;
                }
            }
        }
    };
    // x-component: differences in x at cell centers, in y at vertices
    for j in 0..ny {
        for i in 0..nx {
            add_diff(&[(lay.ux(i + 1, j), 1.0 / dx), (lay.ux(i, j), -1.0 / dx)], vol);
        }
    }
    for i in 1..nx {
        add_diff(&[(lay.ux(i, 0), 2.0 / dy)], 0.5 * vol);
        add_diff(&[(lay.ux(i, ny - 1), -2.0 / dy)], 0.5 * vol);
        for j in 1..ny {
            add_diff(&[(lay.ux(i, j), 1.0 / dy), (lay.ux(i, j - 1), -1.0 / dy)], vol);
        }
    }
    // y-component
    for i in 0..nx {
        for j in 0..ny {
            add_diff(&[(lay.uy(i, j + 1), 1.0 / dy), (lay.uy(i, j), -1.0 / dy)], vol);
        }
    }
    for j in 1..ny {
        add_diff(&[(lay.uy(0, j), 2.0 / dx)], 0.5 * vol);
        add_diff(&[(lay.uy(nx - 1, j), -2.0 / dx)], 0.5 * vol);
        for i in 1..nx {
            add_diff(&[(lay.uy(i, j), 1.0 / dx), (lay.uy(i - 1, j), -1.0 / dx)], vol);
        }
    }

    let n = nv + nc + 1;
    let mut kkt = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    kkt.view_mut((0, 0), (nv, nv)).copy_from(&(2.0 * &h));
    let mean = f.mean();
    for j in 0..ny {
        for i in 0..nx {
            let row = nv + i * ny + j;
            let entries = [
                (lay.ux(i + 1, j), 1.0 / dx),
                (lay.ux(i, j), -1.0 / dx),
                (lay.uy(i, j + 1), 1.0 / dy),
                (lay.uy(i, j), -1.0 / dy),
            ];
            for (col, c) in entries {
                if let Some(col) = col {
                    kkt[(row, col)] = c;
                    kkt[(col, row)] = c;
                }
            }
            kkt[(row, n - 1)] = 1.0;
            kkt[(n - 1, row)] = 1.0;
            rhs[row] = f.get(i, j) - mean;
        }
    }
    let x = kkt
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Internal("dense KKT system is singular".into()))?;

    let ux = Array2::from_shape_fn((nx + 1, ny), |(i, j)| lay.ux(i, j).map_or(0.0, |k| x[k]));
    let uy = Array2::from_shape_fn((nx, ny + 1), |(i, j)| lay.uy(i, j).map_or(0.0, |k| x[k]));
    VectorField::from_arrays(*grid, ux, uy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::divergence;

    #[test]
    fn rejects_foreign_grid_and_oversize() {
        let g = GridSpec::new(4, 4, 1.0, 1.0).unwrap();
        let other = GridSpec::new(4, 5, 1.0, 1.0).unwrap();
        assert!(matches!(dense_bogovskii(&g, &ScalarField::zeros(other)), Err(Error::Shape(_))));
        let big = GridSpec::new(40, 40, 1.0, 1.0).unwrap();
        assert!(matches!(
            dense_bogovskii(&big, &ScalarField::zeros(big)),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn solution_has_requested_divergence() {
        let g = GridSpec::new(5, 4, 1.0, 0.8).unwrap();
        let f = ScalarField::from_fn(g, |x, y| (3.0 * x).cos() + y - 0.4);
        let f = ScalarField::from_array(g, f.values().mapv(|v| v - f.mean())).unwrap();
        let v = dense_bogovskii(&g, &f).unwrap();
        let d = divergence(&v);
        let err = (&d.values() - &f.values()).mapv(f64::abs).fold(0.0, |a: f64, &b| a.max(b));
        assert!(err < 1e-11, "{err}");
    }
}
