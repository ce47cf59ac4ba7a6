use lyapdecay_cli::config::{parse_config, render, PresetName, RunConfig};
use lyapdecay_core::poisson::InnerSolver;
use proptest::prelude::*;

fn config_strategy() -> impl Strategy<Value = RunConfig> {
    (
        (4usize..200, 4usize..200, 0.1f64..10.0, 0.1f64..10.0),
        (1.01f64..3.0, 1e-3f64..2.0, -1.0f64..1.0, 1.5f64..10.0),
        (0.05f64..=1.0, 0.05f64..=1.0, 0.0f64..0.1, 0.01f64..5.0, 1e-3f64..0.5),
        (any::<bool>(), proptest::option::of(0.0f64..1.0), 0.0f64..0.99),
        (0usize..4, 0.0f64..0.5, any::<u64>(), 0.2f64..1.4),
        ("[a-z0-9_/.-]{1,20}", any::<bool>()),
        (1e-14f64..1e-3, proptest::option::of(1usize..10_000), 0.0f64..1e-6, any::<bool>()),
    )
        .prop_map(|(g, f, s, l, i, o, b)| {
            let mut c = RunConfig::default();
            (c.grid.nx, c.grid.ny, c.grid.lx, c.grid.ly) = g;
            (c.fluid.gamma, c.fluid.mu, c.fluid.lambda, c.fluid.rho_bar) = f;
            // keep lambda + mu >= 0
            c.fluid.lambda = c.fluid.lambda.max(-c.fluid.mu);
            (c.solver.cfl, c.solver.visc_safety, c.solver.rho_floor, c.solver.t_end, c.solver.output_dt) = s;
            c.lyapunov.sigma_auto = l.0 || l.1.is_none();
            c.lyapunov.sigma = l.1;
            c.lyapunov.fit_window_start_fraction = l.2;
            c.init.preset = PresetName::ALL[i.0];
            (c.init.amplitude, c.init.seed, c.init.rho_s) = (i.1, i.2, i.3);
            (c.output.csv_path, c.output.svg) = o;
            c.bogovskii.tol = b.0;
            c.bogovskii.max_iter = b.1;
            c.bogovskii.mean_tol = b.2;
            c.bogovskii.inner = if b.3 { InnerSolver::ConjugateGradient } else { InnerSolver::FastDiagonalization };
            c
        })
}

proptest! {
    #[test]
    fn parse_inverts_render(cfg in config_strategy()) {
        let parsed = parse_config(&render(&cfg)).unwrap();
        prop_assert_eq!(parsed.config, cfg);
        prop_assert!(parsed.warnings.is_empty());
    }
}
