//! Uniform MAC discretization of an axis-aligned rectangle.
//!
//! Scalars live at cell centers `(i, j)`, `0 <= i < nx`, `0 <= j < ny`, at
//! physical position `((i + 1/2) dx, (j + 1/2) dy)`. The x-velocity lives on
//! vertical faces `(i, j)`, `0 <= i <= nx`, at `(i dx, (j + 1/2) dy)`; the
//! y-velocity on horizontal faces `(i, j)`, `0 <= j <= ny`, at
//! `((i + 1/2) dx, j dy)`. Faces with `i = 0, nx` (resp. `j = 0, ny`) are
//! boundary faces.
//!
//! All integrals use midpoint quadrature with weight `dx * dy` per cell and
//! per face. With that weighting [`divergence`] and [`gradient`] are exact
//! negative adjoints of each other on fields with zero boundary faces.

use ndarray::{Array2, ArrayView2, ArrayViewMut2, Zip};

use crate::error::{Error, Result};

/// Grid dimensions and spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    dx: f64,
    dy: f64,
}

impl GridSpec {
    pub const MIN_CELLS: usize = 4;

    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < Self::MIN_CELLS || ny < Self::MIN_CELLS {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least {0}x{0} cells, got {nx}x{ny}",
                Self::MIN_CELLS
            )));
        }
        if !(lx.is_finite() && lx > 0.0 && ly.is_finite() && ly > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "domain side lengths must be positive, got lx = {lx}, ly = {ly}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            dx: lx / nx as f64,
            dy: ly / ny as f64,
        })
    }

    /// Unit square with `n x n` cells.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn dy(&self) -> f64 {
        self.dy
    }
    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dy
    }
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }
    /// Smallest mesh width.
    pub fn h(&self) -> f64 {
        self.dx.min(self.dy)
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dy)
    }
    pub fn x_face(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.dx, (j as f64 + 0.5) * self.dy)
    }
    pub fn y_face(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.dx, j as f64 * self.dy)
    }

    fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(Error::Shape(format!(
                "fields live on different grids ({}x{} vs {}x{})",
                self.nx, self.ny, other.nx, other.ny
            )));
        }
        Ok(())
    }
}

/// Cell-centered scalar field, stored as an `nx x ny` array.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Array2<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self {
            grid,
            values: Array2::from_elem((grid.nx, grid.ny), value),
        }
    }

    pub fn from_array(grid: GridSpec, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (grid.nx, grid.ny) {
            return Err(Error::Shape(format!(
                "scalar field expects {:?}, got {:?}",
                (grid.nx, grid.ny),
                values.dim()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x, y)` at cell centers.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn((grid.nx, grid.ny), |(i, j)| {
            let (x, y) = grid.cell_center(i, j);
            f(x, y)
        });
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }
    pub fn values_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        self.values.view_mut()
    }
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.mapv(f),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let mut values = self.values.clone();
        Zip::from(&mut values)
            .and(&other.values)
            .for_each(|a, &b| *a = f(*a, b));
        Ok(Self {
            grid: self.grid,
            values,
        })
    }

    /// `integrate(self * other)`.
    pub fn dot(&self, other: &ScalarField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let s: f64 = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a * b)
            .sum();
        Ok(s * self.grid.cell_volume())
    }

    /// Discrete `L2` norm.
    pub fn norm_l2(&self) -> f64 {
        self.dot(self).unwrap_or(0.0).sqrt()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Area-weighted mean.
    pub fn mean(&self) -> f64 {
        integrate(self) / self.grid.area()
    }
}

/// Face-centered velocity field (MAC layout).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: GridSpec,
    ux: Array2<f64>,
    uy: Array2<f64>,
}

impl VectorField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            ux: Array2::zeros((grid.nx + 1, grid.ny)),
            uy: Array2::zeros((grid.nx, grid.ny + 1)),
        }
    }

    pub fn from_arrays(grid: GridSpec, ux: Array2<f64>, uy: Array2<f64>) -> Result<Self> {
        if ux.dim() != (grid.nx + 1, grid.ny) || uy.dim() != (grid.nx, grid.ny + 1) {
            return Err(Error::Shape(format!(
                "vector field expects ux {:?} and uy {:?}, got {:?} and {:?}",
                (grid.nx + 1, grid.ny),
                (grid.nx, grid.ny + 1),
                ux.dim(),
                uy.dim()
            )));
        }
        Ok(Self { grid, ux, uy })
    }

    /// Samples a continuous field at face locations. Boundary faces are
    /// sampled too; call [`VectorField::enforce_no_slip`] to zero them.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let ux = Array2::from_shape_fn((grid.nx + 1, grid.ny), |(i, j)| {
            let (x, y) = grid.x_face(i, j);
            f(x, y).0
        });
        let uy = Array2::from_shape_fn((grid.nx, grid.ny + 1), |(i, j)| {
            let (x, y) = grid.y_face(i, j);
            f(x, y).1
        });
        Self { grid, ux, uy }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    pub fn ux(&self) -> ArrayView2<'_, f64> {
        self.ux.view()
    }
    pub fn uy(&self) -> ArrayView2<'_, f64> {
        self.uy.view()
    }
    pub fn ux_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        self.ux.view_mut()
    }
    pub fn uy_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        self.uy.view_mut()
    }

    /// Sets every boundary-face component to zero.
    pub fn enforce_no_slip(&mut self) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        for j in 0..ny {
            self.ux[[0, j]] = 0.0;
            self.ux[[nx, j]] = 0.0;
        }
        for i in 0..nx {
            self.uy[[i, 0]] = 0.0;
            self.uy[[i, ny]] = 0.0;
        }
    }

    /// True when every boundary-face component is exactly zero.
    pub fn is_no_slip(&self) -> bool {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        (0..ny).all(|j| self.ux[[0, j]] == 0.0 && self.ux[[nx, j]] == 0.0)
            && (0..nx).all(|i| self.uy[[i, 0]] == 0.0 && self.uy[[i, ny]] == 0.0)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            grid: self.grid,
            ux: &self.ux * alpha,
            uy: &self.uy * alpha,
        }
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &VectorField) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let mut out = self.clone();
        out.add_scaled(alpha, other);
        Ok(out)
    }

    pub(crate) fn add_scaled(&mut self, alpha: f64, other: &VectorField) {
        self.ux.scaled_add(alpha, &other.ux);
        self.uy.scaled_add(alpha, &other.uy);
    }

    /// Face inner product `dx dy * sum(ux*wx + uy*wy)`.
    pub fn dot(&self, other: &VectorField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let sx: f64 = self.ux.iter().zip(other.ux.iter()).map(|(a, b)| a * b).sum();
        let sy: f64 = self.uy.iter().zip(other.uy.iter()).map(|(a, b)| a * b).sum();
        Ok((sx + sy) * self.grid.cell_volume())
    }

    pub fn norm_l2(&self) -> f64 {
        self.dot(self).unwrap_or(0.0).sqrt()
    }

    /// Largest face-velocity magnitude component.
    pub fn max_abs(&self) -> f64 {
        self.ux
            .iter()
            .chain(self.uy.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.ux.iter().chain(self.uy.iter()).all(|v| v.is_finite())
    }

    /// Face values averaged to cell centers, `(u_bar, v_bar)`.
    pub fn cell_averages(&self) -> (Array2<f64>, Array2<f64>) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let ubar = Array2::from_shape_fn((nx, ny), |(i, j)| {
            0.5 * (self.ux[[i, j]] + self.ux[[i + 1, j]])
        });
        let vbar = Array2::from_shape_fn((nx, ny), |(i, j)| {
            0.5 * (self.uy[[i, j]] + self.uy[[i, j + 1]])
        });
        (ubar, vbar)
    }
}

/// Raw gradient and divergence integrals of a velocity field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorFieldNorms {
    pub grad_norm_sq: f64,
    pub div_norm_sq: f64,
}

/// Cell divergence of a face field.
pub fn divergence(w: &VectorField) -> ScalarField {
    let g = w.grid;
    let (idx, idy) = (1.0 / g.dx, 1.0 / g.dy);
    let values = Array2::from_shape_fn((g.nx, g.ny), |(i, j)| {
        (w.ux[[i + 1, j]] - w.ux[[i, j]]) * idx + (w.uy[[i, j + 1]] - w.uy[[i, j]]) * idy
    });
    ScalarField { grid: g, values }
}

/// Face gradient of a cell field; boundary faces are zero.
pub fn gradient(phi: &ScalarField) -> VectorField {
    let g = phi.grid;
    let (idx, idy) = (1.0 / g.dx, 1.0 / g.dy);
    let p = &phi.values;
    let ux = Array2::from_shape_fn((g.nx + 1, g.ny), |(i, j)| {
        if i == 0 || i == g.nx {
            0.0
        } else {
            (p[[i, j]] - p[[i - 1, j]]) * idx
        }
    });
    let uy = Array2::from_shape_fn((g.nx, g.ny + 1), |(i, j)| {
        if j == 0 || j == g.ny {
            0.0
        } else {
            (p[[i, j]] - p[[i, j - 1]]) * idy
        }
    });
    VectorField { grid: g, ux, uy }
}

/// Midpoint quadrature `dx dy * sum(values)`.
pub fn integrate(phi: &ScalarField) -> f64 {
    phi.values.sum() * phi.grid.cell_volume()
}

/// Componentwise vector Laplacian on faces with no-slip ghosts
/// (`u_ghost = -u_interior` across walls). Boundary faces of the result are
/// zero. `-vector_laplacian` is the operator whose quadratic form is
/// [`TensorFieldNorms::grad_norm_sq`].
pub fn vector_laplacian(u: &VectorField) -> VectorField {
    let g = u.grid;
    let (nx, ny) = (g.nx, g.ny);
    let (idx2, idy2) = (1.0 / (g.dx * g.dx), 1.0 / (g.dy * g.dy));
    let ux = &u.ux;
    let uy = &u.uy;
    let lx = Array2::from_shape_fn((nx + 1, ny), |(i, j)| {
        if i == 0 || i == nx {
            return 0.0;
        }
        let c = ux[[i, j]];
        let down = if j == 0 { -c } else { ux[[i, j - 1]] };
        let up = if j + 1 == ny { -c } else { ux[[i, j + 1]] };
        (ux[[i + 1, j]] - 2.0 * c + ux[[i - 1, j]]) * idx2 + (up - 2.0 * c + down) * idy2
    });
    let ly = Array2::from_shape_fn((nx, ny + 1), |(i, j)| {
        if j == 0 || j == ny {
            return 0.0;
        }
        let c = uy[[i, j]];
        let left = if i == 0 { -c } else { uy[[i - 1, j]] };
        let right = if i + 1 == nx { -c } else { uy[[i + 1, j]] };
        (right - 2.0 * c + left) * idx2 + (uy[[i, j + 1]] - 2.0 * c + uy[[i, j - 1]]) * idy2
    });
    VectorField {
        grid: g,
        ux: lx,
        uy: ly,
    }
}

/// All four first derivatives of a face field at their natural staggered
/// locations.
///
/// `dudx` and `dvdy` sit at cell centers (`nx x ny`). `dudy` (derivative of
/// the x-component in y) and `dvdx` sit at grid vertices (`(nx+1) x (ny+1)`);
/// on a wall the one-sided value `2 u / h` is used, matching the ghost
/// reflection, and the vertex carries half weight.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGradient {
    grid: GridSpec,
    pub dudx: Array2<f64>,
    pub dvdy: Array2<f64>,
    pub dudy: Array2<f64>,
    pub dvdx: Array2<f64>,
}

impl VelocityGradient {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Quadrature weight of `dudy` at vertex `(i, j)`.
    pub fn dudy_weight(&self, _i: usize, j: usize) -> f64 {
        let w = self.grid.cell_volume();
        if j == 0 || j == self.grid.ny {
            0.5 * w
        } else {
            w
        }
    }

    /// Quadrature weight of `dvdx` at vertex `(i, j)`.
    pub fn dvdx_weight(&self, i: usize, _j: usize) -> f64 {
        let w = self.grid.cell_volume();
        if i == 0 || i == self.grid.nx {
            0.5 * w
        } else {
            w
        }
    }

    /// Discrete `integral(grad a : grad b)` summed component by component.
    pub fn contract(&self, other: &VelocityGradient) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let vol = self.grid.cell_volume();
        let centers: f64 = self
            .dudx
            .iter()
            .zip(other.dudx.iter())
            .chain(self.dvdy.iter().zip(other.dvdy.iter()))
            .map(|(a, b)| a * b)
            .sum();
        let mut vertices = 0.0;
        for ((i, j), a) in self.dudy.indexed_iter() {
            vertices += self.dudy_weight(i, j) * a * other.dudy[[i, j]];
        }
        for ((i, j), a) in self.dvdx.indexed_iter() {
            vertices += self.dvdx_weight(i, j) * a * other.dvdx[[i, j]];
        }
        Ok(centers * vol + vertices)
    }

    pub fn norm_sq(&self) -> f64 {
        self.contract(self).unwrap_or(0.0)
    }
}

pub fn velocity_gradient(u: &VectorField) -> VelocityGradient {
    let g = u.grid;
    let (nx, ny) = (g.nx, g.ny);
    let (idx, idy) = (1.0 / g.dx, 1.0 / g.dy);
    let ux = &u.ux;
    let uy = &u.uy;
    let dudx = Array2::from_shape_fn((nx, ny), |(i, j)| (ux[[i + 1, j]] - ux[[i, j]]) * idx);
    let dvdy = Array2::from_shape_fn((nx, ny), |(i, j)| (uy[[i, j + 1]] - uy[[i, j]]) * idy);
    let dudy = Array2::from_shape_fn((nx + 1, ny + 1), |(i, j)| {
        if j == 0 {
            2.0 * ux[[i, 0]] * idy
        } else if j == ny {
            -2.0 * ux[[i, ny - 1]] * idy
        } else {
            (ux[[i, j]] - ux[[i, j - 1]]) * idy
        }
    });
    let dvdx = Array2::from_shape_fn((nx + 1, ny + 1), |(i, j)| {
        if i == 0 {
            2.0 * uy[[0, j]] * idx
        } else if i == nx {
            -2.0 * uy[[nx - 1, j]] * idx
        } else {
            (uy[[i, j]] - uy[[i - 1, j]]) * idx
        }
    });
    VelocityGradient {
        grid: g,
        dudx,
        dvdy,
        dudy,
        dvdx,
    }
}

/// `grad_norm_sq` is the discrete `integral |grad u|^2` with wall ghosts
/// reflecting `u = 0`; `div_norm_sq` is `integrate(divergence(u)^2)`.
pub fn velocity_norms(u: &VectorField) -> TensorFieldNorms {
    let grad_norm_sq = velocity_gradient(u).norm_sq();
    let div = divergence(u);
    TensorFieldNorms {
        grad_norm_sq,
        div_norm_sq: div.dot(&div).unwrap_or(0.0),
    }
}
