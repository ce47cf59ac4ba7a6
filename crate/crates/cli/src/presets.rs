use std::f64::consts::PI;

use lyapdecay_core::{Error, GridSpec, Result, ScalarField, State, VectorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{InitSection, PresetName};

/// Highest wavenumber in each direction of the `random` preset.
const RANDOM_MODES: usize = 3;

/// Builds the initial state for `preset` around the equilibrium density
/// `rho_s`. Every density preset has mean exactly `rho_s` up to round-off.
pub fn build_initial(init: &InitSection, grid: GridSpec) -> Result<State> {
    let rho_s = init.rho_s;
    let amp = init.amplitude;
    let (lx, ly) = (grid.lx(), grid.ly());
    let (rho, u) = match init.preset {
        PresetName::Equilibrium => (ScalarField::constant(grid, rho_s), VectorField::zeros(grid)),
        PresetName::GaussianBump => {
            let bump = ScalarField::from_fn(grid, |x, y| {
                let (sx, sy) = (x / lx - 0.5, y / ly - 0.5);
                (-50.0 * (sx * sx + sy * sy)).exp()
            });
            let mean = bump.mean();
            (bump.map(|b| rho_s * (1.0 + amp * (b - mean))), VectorField::zeros(grid))
        }
        PresetName::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(init.seed);
            let mut modes = Vec::with_capacity(RANDOM_MODES * RANDOM_MODES);
            for k in 1..=RANDOM_MODES {
                for l in 1..=RANDOM_MODES {
                    let c: f64 = rng.random_range(-1.0..1.0);
                    modes.push((k as f64, l as f64, c / (k * k + l * l) as f64));
                }
            }
            let raw = ScalarField::from_fn(grid, |x, y| {
                modes
                    .iter()
                    .map(|&(k, l, c)| c * (k * PI * x / lx).cos() * (l * PI * y / ly).cos())
                    .sum()
            });
            let mean = raw.mean();
            let centered = raw.map(|v| v - mean);
            let peak = centered.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let scale = if peak > 0.0 { amp / peak } else { 0.0 };
            (centered.map(|v| rho_s * (1.0 + scale * v)), VectorField::zeros(grid))
        }
        PresetName::Vortex => {
            let mut u = VectorField::from_fn(grid, |x, y| {
                let (sx, sy) = (x / lx, y / ly);
                (
                    amp * (PI * sx).sin().powi(2) * (2.0 * PI * sy).sin(),
                    -amp * (2.0 * PI * sx).sin() * (PI * sy).sin().powi(2),
                )
            });
            // sin^2 vanishes on the walls only up to round-off
            u.enforce_no_slip();
            (ScalarField::constant(grid, rho_s), u)
        }
    };
    let min = rho.min();
    if min < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "preset {} with amplitude {amp} gives negative density (minimum {min:e})",
            init.preset.as_str()
        )));
    }
    State::new(0.0, rho, u)
}
