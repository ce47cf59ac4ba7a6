//! Pressure law, equilibrium density, relative-entropy integrand and the
//! energy/dissipation functionals.

use crate::error::{Error, Result};
use crate::grid::{integrate, velocity_norms, GridSpec, ScalarField, VectorField};
use crate::quadrature::adaptive_simpson;

/// Spatial dimension of the implemented discretization.
pub const DIM: usize = 2;

/// Isentropic fluid with pressure `P(rho) = rho^gamma` (the constant `a` is 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidParams {
    gamma: f64,
    mu: f64,
    lambda: f64,
    rho_bar: f64,
}

impl FluidParams {
    pub fn new(gamma: f64, mu: f64, lambda: f64, rho_bar: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(Error::InvalidParameter(format!("gamma must exceed 1, got {gamma}")));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
        }
        // lambda + (2/N) mu >= 0
        let bulk = lambda + 2.0 / DIM as f64 * mu;
        if !lambda.is_finite() || bulk < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "lambda + mu must be nonnegative, got lambda = {lambda}, mu = {mu}"
            )));
        }
        if !(rho_bar.is_finite() && rho_bar > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rho_bar must be positive, got {rho_bar}"
            )));
        }
        Ok(Self {
            gamma,
            mu,
            lambda,
            rho_bar,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn rho_bar(&self) -> f64 {
        self.rho_bar
    }
    /// Coefficient of `(div u)^2` in the dissipation.
    pub fn lambda_plus_mu(&self) -> f64 {
        self.lambda + self.mu
    }

    pub fn pressure_at(&self, rho: f64) -> f64 {
        rho.powf(self.gamma)
    }

    /// Isentropic sound speed `sqrt(gamma rho^(gamma-1))`.
    pub fn sound_speed(&self, rho: f64) -> f64 {
        (self.gamma * rho.max(0.0).powf(self.gamma - 1.0)).sqrt()
    }
}

/// Snapshot `(t, rho, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub rho: ScalarField,
    pub u: VectorField,
}

impl State {
    /// Validates nonnegative density, matching grids and no-slip velocity.
    pub fn new(t: f64, rho: ScalarField, u: VectorField) -> Result<Self> {
        if rho.grid() != u.grid() {
            return Err(Error::Shape("density and velocity grids differ".into()));
        }
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
        }
        check_nonnegative(&rho)?;
        if !u.is_no_slip() {
            return Err(Error::Domain("velocity has nonzero boundary faces".into()));
        }
        Ok(Self { t, rho, u })
    }

    pub fn grid(&self) -> &GridSpec {
        self.rho.grid()
    }

    pub fn mass(&self) -> f64 {
        integrate(&self.rho)
    }
}

fn check_nonnegative(rho: &ScalarField) -> Result<()> {
    for ((i, j), &v) in rho.values().indexed_iter() {
        if !(v >= 0.0) {
            return Err(Error::NegativeDensity { i, j, value: v });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumState {
    pub rho_s: f64,
}

/// Pointwise `rho^gamma`.
pub fn pressure(rho: &ScalarField, params: &FluidParams) -> Result<ScalarField> {
    check_nonnegative(rho)?;
    Ok(rho.map(|r| params.pressure_at(r)))
}

/// Mean density of the initial data, the constant solution of the
/// stationary problem.
pub fn compute_rho_s(rho0: &ScalarField) -> Result<EquilibriumState> {
    check_nonnegative(rho0)?;
    let mass = integrate(rho0);
    if !(mass > 0.0) {
        return Err(Error::Degenerate("initial density has zero total mass".into()));
    }
    Ok(EquilibriumState {
        rho_s: mass / rho0.grid().area(),
    })
}

/// Below this relative offset `|r/r0 - 1|` the entropy integrand is
/// evaluated from its Taylor series.
const SERIES_CUTOFF: f64 = 1e-2;
const SERIES_TERMS: usize = 14;

/// `(1 + x)^gamma - 1 - gamma x`, divided by `x^2`, for `x >= -1`.
fn scaled_remainder(x: f64, gamma: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        // sum_{k>=2} binom(gamma, k) x^(k-2)
        let mut coeff = gamma * (gamma - 1.0) / 2.0;
        let mut xp = 1.0;
        let mut sum = 0.0;
        for k in 2..SERIES_TERMS {
            sum += coeff * xp;
            coeff *= (gamma - k as f64) / (k as f64 + 1.0);
            xp *= x;
        }
        sum
    } else {
        ((gamma * x.ln_1p()).exp_m1() - gamma * x) / (x * x)
    }
}

fn check_entropy_args(r: f64, r0: f64) -> Result<()> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("entropy integrand needs r >= 0, got {r}")));
    }
    if !(r0 > 0.0) || !r0.is_finite() {
        return Err(Error::Domain(format!("entropy integrand needs r0 > 0, got {r0}")));
    }
    Ok(())
}

/// Relative-entropy integrand `f(r) = r * integral_{r0}^{r} (h^gamma - r0^gamma) / h^2 dh`.
///
/// Closed form `r^gamma/(gamma-1) + r0^gamma - gamma r r0^(gamma-1)/(gamma-1)`,
/// rewritten as `r0^gamma/(gamma-1) * ((1+x)^gamma - 1 - gamma x)` with
/// `x = r/r0 - 1` so that it stays accurate near `r0`.
pub fn entropy_f(r: f64, r0: f64, gamma: f64) -> Result<f64> {
    check_entropy_args(r, r0)?;
    let x = r / r0 - 1.0;
    Ok(r0.powf(gamma) / (gamma - 1.0) * x * x * scaled_remainder(x, gamma))
}

/// `g(r) = f(r) / (r - r0)^2`, continuously extended by `(gamma/2) r0^(gamma-2)` at `r = r0`.
pub fn entropy_ratio(r: f64, r0: f64, gamma: f64) -> Result<f64> {
    check_entropy_args(r, r0)?;
    let x = r / r0 - 1.0;
    Ok(r0.powf(gamma - 2.0) / (gamma - 1.0) * scaled_remainder(x, gamma))
}

/// Reference evaluation of [`entropy_f`] by adaptive quadrature of the
/// defining integral. Independent of the closed form; used for validation.
pub fn entropy_f_quadrature(r: f64, r0: f64, gamma: f64, tol: f64) -> Result<f64> {
    check_entropy_args(r, r0)?;
    if r == 0.0 {
        // r * integral -> r0^gamma as r -> 0; the integral itself diverges.
        return Ok(r0.powf(gamma));
    }
    if r == r0 {
        return Ok(0.0);
    }
    // h = exp(s): (h^gamma - r0^gamma)/h^2 dh = (h^(gamma-1) - r0^gamma / h) ds
    let p0 = r0.powf(gamma);
    let integrand = |s: f64| {
        let h = s.exp();
        h.powf(gamma - 1.0) - p0 / h
    };
    let (a, b) = (r0.ln(), r.ln());
    let integral = adaptive_simpson(integrand, a, b, tol / r.max(1.0));
    Ok(r * integral)
}

/// Empirical constants `(K1, K2)` with `K1 (r-r0)^2 <= f(r) <= K2 (r-r0)^2`
/// on `[0, r_max]`: the extremes of `g` over `n_samples` uniform samples.
pub fn entropy_bounds_probe(r0: f64, r_max: f64, gamma: f64, n_samples: usize) -> Result<(f64, f64)> {
    if !(r0 > 0.0 && r_max > r0) {
        return Err(Error::InvalidParameter(format!(
            "entropy probe needs 0 < r0 < r_max, got r0 = {r0}, r_max = {r_max}"
        )));
    }
    if n_samples < 100 {
        return Err(Error::InvalidParameter(format!(
            "entropy probe needs at least 100 samples, got {n_samples}"
        )));
    }
    if !(gamma > 1.0) {
        return Err(Error::InvalidParameter(format!("gamma must exceed 1, got {gamma}")));
    }
    let step = r_max / (n_samples - 1) as f64;
    let mut k1 = f64::INFINITY;
    let mut k2 = f64::NEG_INFINITY;
    for k in 0..n_samples {
        let g = entropy_ratio(k as f64 * step, r0, gamma)?;
        k1 = k1.min(g);
        k2 = k2.max(g);
    }
    Ok((k1, k2))
}

/// Kinetic and internal parts of the total energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts {
    pub kinetic: f64,
    pub internal: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.kinetic + self.internal
    }
}

/// Kinetic energy uses face velocities averaged to cell centers:
/// `1/2 rho (u_bar^2 + v_bar^2)`.
pub fn energy_parts(state: &State, params: &FluidParams) -> EnergyParts {
    let (ubar, vbar) = state.u.cell_averages();
    let rho = state.rho.values();
    let vol = state.grid().cell_volume();
    let mut kinetic = 0.0;
    let mut internal = 0.0;
    for (&r, (&a, &b)) in rho.iter().zip(ubar.iter().zip(vbar.iter())) {
        kinetic += 0.5 * r * (a * a + b * b);
        internal += params.pressure_at(r);
    }
    EnergyParts {
        kinetic: kinetic * vol,
        internal: internal * vol / (params.gamma - 1.0),
    }
}

/// `E = integral 1/2 rho |u|^2 + rho^gamma / (gamma - 1)`.
pub fn total_energy(state: &State, params: &FluidParams) -> f64 {
    energy_parts(state, params).total()
}

/// `mu integral |grad u|^2 + (lambda + mu) integral (div u)^2`.
pub fn dissipation(state: &State, params: &FluidParams) -> f64 {
    let n = velocity_norms(&state.u);
    params.mu * n.grad_norm_sq + params.lambda_plus_mu() * n.div_norm_sq
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn params(gamma: f64) -> FluidParams {
        FluidParams::new(gamma, 0.1, 0.0, 4.0).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(FluidParams::new(1.0, 0.1, 0.0, 4.0).is_err());
        assert!(FluidParams::new(1.4, 0.0, 0.0, 4.0).is_err());
        assert!(FluidParams::new(1.4, 0.1, -0.2, 4.0).is_err());
        assert!(FluidParams::new(1.4, 0.1, -0.1, 4.0).is_ok());
        assert!(FluidParams::new(1.4, 0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn pressure_values() {
        let g = GridSpec::unit_square(4).unwrap();
        let p = pressure(&ScalarField::constant(g, 1.0), &params(1.7)).unwrap();
        assert!(p.values().iter().all(|&v| v == 1.0));
        let p = pressure(&ScalarField::constant(g, 2.0), &params(2.0)).unwrap();
        assert!(p.values().iter().all(|&v| v == 4.0));
        let p = pressure(&ScalarField::constant(g, 2.0), &params(1.4)).unwrap();
        assert_relative_eq!(p.get(0, 0), 2.639_015_821_545_788_5, max_relative = 1e-15);
    }

    #[test]
    fn pressure_rejects_negative_density() {
        let g = GridSpec::unit_square(4).unwrap();
        let mut rho = ScalarField::constant(g, 1.0);
        rho.values_mut()[[2, 1]] = -0.5;
        match pressure(&rho, &params(1.4)) {
            Err(Error::NegativeDensity { i: 2, j: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rho_s_of_constant_and_perturbed() {
        let g = GridSpec::unit_square(16).unwrap();
        assert_eq!(compute_rho_s(&ScalarField::constant(g, 2.0)).unwrap().rho_s, 2.0);
        let rho = ScalarField::from_fn(g, |x, y| 1.0 + 0.1 * (2.0 * PI * x).sin() * (2.0 * PI * y).sin());
        assert_relative_eq!(compute_rho_s(&rho).unwrap().rho_s, 1.0, epsilon = 1e-14);
        assert!(matches!(
            compute_rho_s(&ScalarField::zeros(g)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn entropy_special_values() {
        for gamma in [1.2, 1.4, 5.0 / 3.0, 2.0, 3.5] {
            for r0 in [0.3, 1.0, 2.5] {
                assert_eq!(entropy_f(r0, r0, gamma).unwrap(), 0.0);
            }
        }
        assert_eq!(entropy_f(0.0, 1.0, 2.0).unwrap(), 1.0);
        assert_relative_eq!(entropy_f(3.0, 1.0, 2.0).unwrap(), 4.0, epsilon = 1e-12);
        for k in 0..=400 {
            let r = k as f64 * 0.01;
            assert_relative_eq!(entropy_f(r, 1.0, 2.0).unwrap(), (r - 1.0).powi(2), epsilon = 1e-12);
        }
        assert!(entropy_f(-1.0, 1.0, 1.4).is_err());
        assert!(entropy_f(1.0, 0.0, 1.4).is_err());
    }

    #[test]
    fn entropy_ratio_limits() {
        for gamma in [1.4, 5.0 / 3.0, 2.0, 3.0] {
            for r0 in [0.5, 1.0, 2.0] {
                let at_zero = entropy_ratio(0.0, r0, gamma).unwrap();
                assert_relative_eq!(at_zero, r0.powf(gamma - 2.0), max_relative = 1e-12);
                let lim = gamma / 2.0 * r0.powf(gamma - 2.0);
                assert_relative_eq!(entropy_ratio(r0, r0, gamma).unwrap(), lim, max_relative = 1e-14);
                for d in [1e-4, -1e-4, 1e-9] {
                    let g = entropy_ratio(r0 + d, r0, gamma).unwrap();
                    assert!((g - lim).abs() < 1e-3 * lim.max(1.0) * d.abs() / 1e-4 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn closed_form_matches_quadrature() {
        for &(r, r0, gamma) in &[(0.5, 1.0, 1.4), (3.7, 1.0, 5.0 / 3.0), (0.01, 2.0, 4.5), (9.0, 0.1, 1.05)] {
            let closed = entropy_f(r, r0, gamma).unwrap();
            let quad = entropy_f_quadrature(r, r0, gamma, 1e-12).unwrap();
            assert!((closed - quad).abs() < 1e-9, "{r} {r0} {gamma}: {closed} vs {quad}");
        }
    }

    #[test]
    fn bounds_probe() {
        let (k1, k2) = entropy_bounds_probe(1.0, 4.0, 2.0, 1000).unwrap();
        assert_relative_eq!(k1, 1.0, epsilon = 1e-12);
        assert_relative_eq!(k2, 1.0, epsilon = 1e-12);
        let (k1, k2) = entropy_bounds_probe(1.0, 4.0, 1.4, 1000).unwrap();
        assert!(0.0 < k1 && k1 < k2 && k2.is_finite());
        assert!(entropy_bounds_probe(1.0, 0.5, 1.4, 1000).is_err());
        assert!(entropy_bounds_probe(1.0, 4.0, 1.4, 10).is_err());
    }

    #[test]
    fn energy_of_equilibrium_and_scaling() {
        let g = GridSpec::unit_square(8).unwrap();
        let p = params(2.0);
        let eq = State::new(0.0, ScalarField::constant(g, 1.0), VectorField::zeros(g)).unwrap();
        assert_relative_eq!(total_energy(&eq, &p), 1.0, epsilon = 1e-15);
        assert_eq!(dissipation(&eq, &p), 0.0);

        let rho = ScalarField::from_fn(g, |x, y| 1.0 + 0.3 * x * y);
        let mut u = VectorField::from_fn(g, |x, y| (x * (1.0 - x) * y, -y * x));
        u.enforce_no_slip();
        let s = State::new(0.0, rho.clone(), u.clone()).unwrap();
        let s2 = State::new(0.0, rho.clone(), u.scaled(2.0)).unwrap();
        let e1 = energy_parts(&s, &p);
        let e2 = energy_parts(&s2, &p);
        assert_relative_eq!(e2.kinetic, 4.0 * e1.kinetic, max_relative = 1e-14);
        let still = State::new(0.0, rho.clone(), VectorField::zeros(g)).unwrap();
        let internal = integrate(&pressure(&rho, &p).unwrap()) / (p.gamma() - 1.0);
        assert_relative_eq!(total_energy(&still, &p), internal, max_relative = 1e-14);
    }

    #[test]
    fn dissipation_degenerate_bulk_coefficient() {
        let g = GridSpec::unit_square(16).unwrap();
        let p = FluidParams::new(1.4, 0.2, -0.2, 4.0).unwrap();
        let mut u = VectorField::from_fn(g, |x, y| ((PI * x).sin() * y, x * y));
        u.enforce_no_slip();
        let s = State::new(0.0, ScalarField::constant(g, 1.0), u.clone()).unwrap();
        assert_relative_eq!(
            dissipation(&s, &p),
            0.2 * velocity_norms(&u).grad_norm_sq,
            max_relative = 1e-15
        );
    }

    #[test]
    fn manufactured_dissipation() {
        let g = GridSpec::unit_square(256).unwrap();
        let mut u = VectorField::from_fn(g, |x, y| ((PI * x).sin() * (PI * y).sin(), 0.0));
        u.enforce_no_slip();
        let s = State::new(0.0, ScalarField::constant(g, 1.0), u).unwrap();
        // grad part pi^2/2, div part integral (pi cos(pi x) sin(pi y))^2 = pi^2/4
        let exact = 0.1 * (PI * PI / 2.0 + PI * PI / 4.0);
        let d = dissipation(&s, &params(1.4));
        assert!((d - exact).abs() / exact < 0.01);
    }
}
