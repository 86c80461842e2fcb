use std::sync::Arc;

use logconvex::cli::{parse_sweep_values, ExperimentConfig};
use logconvex::coeffs::{yosida, ParabolicProblem};
use logconvex::noise::{build_basis, sample_brownian, uniform_times, Domain, NoiseSpec};
use logconvex::parabolic::{solve_random_pde, Grid1D, SchemeParams};
use logconvex::tamednse::{leray_project, phi_eps, random_field, taming_g, FourierVelocity};
use proptest::prelude::*;

fn field(sigma: f64, seed: u64) -> logconvex::noise::WienerField {
    let grid = Grid1D::new(32).unwrap();
    let basis = Arc::new(build_basis(Domain::Interval(grid), 3).unwrap());
    let spec = NoiseSpec::power_law(3, sigma, 1.0).unwrap();
    sample_brownian(basis, spec, uniform_times(0.2, 40), seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn noise_scales_linearly_with_amplitude(seed in any::<u64>(), s in 0.0f64..5.0, m in 0usize..=40) {
        let f = field(0.7, seed);
        let g = f.with_scaled_amplitude(s);
        let (a, b) = (f.eval_at(m), g.eval_at(m));
        for (x, y) in a.w.iter().zip(&b.w).chain(a.dw.iter().zip(&b.dw)).chain(a.d2w.iter().zip(&b.d2w)) {
            prop_assert!((s * x - y).abs() <= 1e-12 * (1.0 + x.abs() * s));
        }
    }

    #[test]
    fn yosida_is_monotone_and_below_psi(eps in 1e-3f64..1.0, r1 in -20.0f64..20.0, r2 in -20.0f64..20.0) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        for name in ["cubic", "arctan"] {
            let p = ParabolicProblem::library(name, 1.0).unwrap();
            let (a, b) = (yosida(&p, eps, 0.0, 0.5, lo).unwrap(), yosida(&p, eps, 0.0, 0.5, hi).unwrap());
            prop_assert!(a <= b + 1e-12, "{name}: ψ_ε({lo}) = {a} > ψ_ε({hi}) = {b}");
            prop_assert!(b.abs() <= p.psi(0.0, 0.5, hi).abs() + 1e-12);
            prop_assert!((eps * b).abs() <= hi.abs() + 1e-12);
        }
    }

    #[test]
    fn taming_is_nonnegative_monotone_and_lipschitz(n in 0.0f64..50.0, nu in 0.1f64..5.0, r1 in 0.0f64..100.0, r2 in 0.0f64..100.0) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let (a, b) = (taming_g(lo, n, nu).unwrap(), taming_g(hi, n, nu).unwrap());
        prop_assert!(a >= 0.0 && a <= b);
        prop_assert!(b - a <= (hi - lo) / nu + 1e-12);
        if hi <= n {
            prop_assert_eq!(b, 0.0);
        }
    }

    #[test]
    fn linear_problem_solution_map_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let p = ParabolicProblem::library("heat", 0.2).unwrap();
        let f = field(0.5, seed);
        let grid = Grid1D::new(32).unwrap();
        let x = grid.sample(|s| s.sin());
        let y = grid.sample(|s| (3.0 * s).sin() + 0.1 * s * (std::f64::consts::PI - s));
        let mix: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
        let sx = solve_random_pde(&p, &f, &x, SchemeParams::default()).unwrap();
        let sy = solve_random_pde(&p, &f, &y, SchemeParams::default()).unwrap();
        let sm = solve_random_pde(&p, &f, &mix, SchemeParams::default()).unwrap();
        for ((u, v), w) in sx.last().iter().zip(sy.last()).zip(sm.last()) {
            prop_assert!((a * u + b * v - w).abs() <= 1e-12 * (1.0 + a.abs() + b.abs()));
        }
    }

    #[test]
    fn leray_projection_is_idempotent(seed in any::<u64>(), k in 2usize..5, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mut v = random_field(k, seed);
        let compressible = FourierVelocity::from_physical(k, |x| {
            [a * (x[0] + x[1]).sin(), b * (2.0 * x[2]).cos() * x[1].sin(), (a - b) * x[2].sin()]
        });
        v.axpy(1.0, &compressible);
        let p = leray_project(&v);
        let pp = leray_project(&p);
        prop_assert!(p.sub(&pp).l2_sq() <= 1e-28 * (1.0 + p.l2_sq()));
        prop_assert!(p.divergence_defect() <= 1e-12);
        prop_assert!(p.l2_sq() <= v.l2_sq() * (1.0 + 1e-12));
    }

    #[test]
    fn phi_is_scale_invariant_as_eps_vanishes(seed in any::<u64>(), s in 0.1f64..10.0) {
        let u = random_field(3, seed);
        let (a, b) = (phi_eps(&u, 0.0), phi_eps(&u.scaled(s), 0.0));
        prop_assert!((a - b).abs() <= 1e-12 * a);
        prop_assert!(phi_eps(&u, 1.0) < a);
        prop_assert!(a >= 1.0 - 1e-12);
    }

    #[test]
    fn config_normal_form_round_trips(seed in any::<u64>(), sigma in 0.0f64..2.0, n in 8usize..512, paths in 1u64..50, exp in 0usize..4) {
        let experiment = logconvex::cli::EXPERIMENTS[exp];
        let text = format!(
            "[run]\nexperiment = \"{experiment}\"\nseed = {seed}\npaths = {paths}\n[noise]\nsigma = {sigma:?}\n[grid]\nn = {n}\n\
             [problem]\nname = \"heat\"\n[control]\ntarget = [1.0]\n[nse]\nK = 4\n"
        );
        let cfg = ExperimentConfig::load(&text, None).unwrap();
        let normal = cfg.normal_form();
        let again = ExperimentConfig::load(&normal, None).unwrap();
        prop_assert_eq!(&again, &cfg);
        prop_assert_eq!(again.normal_form(), normal);
    }

    #[test]
    fn sweep_value_parsing_never_panics(text in "\\PC*") {
        if let Ok(values) = parse_sweep_values(&text) {
            prop_assert!(!values.is_empty() && values.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn sweep_values_round_trip(values in prop::collection::vec(-1e6f64..1e6, 1..8)) {
        let text = values.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(", ");
        prop_assert_eq!(parse_sweep_values(&text).unwrap(), values);
    }

    #[test]
    fn config_parse_never_panics(text in "(\\[[a-z]{1,8}\\]\n|[a-zA-Z_]{1,8} = [-0-9.e\"a-z\\[\\], ]{0,12}\n){0,8}") {
        let _ = ExperimentConfig::load(&text, None);
    }
}
