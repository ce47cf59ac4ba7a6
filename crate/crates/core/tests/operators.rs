//! Discrete operator identities on random fields.

use lyapdecay_core::grid::{divergence, gradient, integrate};
use lyapdecay_core::{GridSpec, ScalarField, VectorField};
use ndarray::Array2;
use proptest::prelude::*;

fn grid_strategy() -> impl Strategy<Value = GridSpec> {
    (4usize..24, 4usize..24, 0.2f64..3.0, 0.2f64..3.0).prop_map(|(nx, ny, lx, ly)| GridSpec::new(nx, ny, lx, ly).unwrap())
}

fn scalar(grid: GridSpec, seed: &[f64]) -> ScalarField {
    let (nx, ny) = (grid.nx(), grid.ny());
    let vals = Array2::from_shape_fn((nx, ny), |(i, j)| seed[(i * 31 + j * 17) % seed.len()] * (1.0 + (i * j) as f64 * 1e-3));
    ScalarField::from_array(grid, vals).unwrap()
}

fn vector(grid: GridSpec, seed: &[f64]) -> VectorField {
    let (nx, ny) = (grid.nx(), grid.ny());
    let ux = Array2::from_shape_fn((nx + 1, ny), |(i, j)| seed[(i * 7 + j * 13 + 3) % seed.len()] + 0.01 * j as f64);
    let uy = Array2::from_shape_fn((nx, ny + 1), |(i, j)| seed[(i * 5 + j * 11 + 1) % seed.len()] - 0.02 * i as f64);
    let mut w = VectorField::from_arrays(grid, ux, uy).unwrap();
    w.enforce_no_slip();
    w
}

/// 5-point Laplacian with zero normal flux through the walls.
fn five_point_neumann(phi: &ScalarField) -> Array2<f64> {
    let g = phi.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let (dx2, dy2) = (g.dx() * g.dx(), g.dy() * g.dy());
    let p = phi.values();
    Array2::from_shape_fn((nx, ny), |(i, j)| {
        let c = p[[i, j]];
        let mut s = 0.0;
        if i > 0 {
            s += (p[[i - 1, j]] - c) / dx2;
        }
        if i + 1 < nx {
            s += (p[[i + 1, j]] - c) / dx2;
        }
        if j > 0 {
            s += (p[[i, j - 1]] - c) / dy2;
        }
        if j + 1 < ny {
            s += (p[[i, j + 1]] - c) / dy2;
        }
        s
    })
}

fn seeds() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 37)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn summation_by_parts(grid in grid_strategy(), a in seeds(), b in seeds()) {
        let phi = scalar(grid, &a);
        let w = vector(grid, &b);
        let lhs = divergence(&w).dot(&phi).unwrap();
        let rhs = -w.dot(&gradient(&phi)).unwrap();
        let scale = divergence(&w).norm_l2() * phi.norm_l2() + w.norm_l2() * gradient(&phi).norm_l2();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn div_grad_is_five_point_laplacian(grid in grid_strategy(), a in seeds()) {
        let phi = scalar(grid, &a);
        let dg = divergence(&gradient(&phi));
        let reference = five_point_neumann(&phi);
        let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in dg.values().iter().zip(reference.iter()) {
            prop_assert!((x - y).abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn integrate_is_linear_and_monotone(grid in grid_strategy(), a in seeds(), b in seeds(), s in -3.0f64..3.0) {
        let f = scalar(grid, &a);
        let g = scalar(grid, &b);
        let comb = f.zip_map(&g, |x, y| s * x + y).unwrap();
        let lin = s * integrate(&f) + integrate(&g);
        let scale = (s.abs() + 1.0) * grid.area();
        prop_assert!((integrate(&comb) - lin).abs() <= 1e-12 * scale);
        let above = f.map(|v| v.abs() + 1e-3);
        prop_assert!(integrate(&above) > 0.0);
        prop_assert!(integrate(&f.map(|v| v.abs())) >= integrate(&f));
    }
}

#[test]
fn constant_integrates_to_area() {
    let g = GridSpec::new(7, 9, 1.3, 0.4).unwrap();
    let area = integrate(&ScalarField::constant(g, 2.0));
    assert!((area - 2.0 * 1.3 * 0.4).abs() < 1e-14);
}
