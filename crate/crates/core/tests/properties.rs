use proptest::prelude::*;

use sdlab::bound_calculus::g_bound;
use sdlab::experiments::{gj_series, initial_omega, least_squares_slope, GjQuadrature};
use sdlab::io::config_digest;
use sdlab::pde::norms::{check_symmetry_values, integral};
use sdlab::pde::{solve_linear, GridPreset, LinearProblem, SolverConfig};
use sdlab::special_functions::{heat_kernel, Drift};
use sdlab::{BoundParams, CoefficientSeries, DriftSpec, Interpolation, KernelParams};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn heat_kernel_is_even_and_positive(t in 1e-3f64..10.0, y in -20.0f64..20.0, nu in 0.1f64..4.0) {
        let p = KernelParams::new(nu).unwrap();
        let a = heat_kernel(t, y, p).unwrap();
        let b = heat_kernel(t, -y, p).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn g_is_at_least_one_and_grows(beta in 0.05f64..0.95, mu1 in 0.0f64..5.0, c in 0.0f64..3.0, t1 in 0.05f64..1.0, dt in 0.01f64..1.0) {
        let g = CoefficientSeries::constant(c, 0.0, 2.0).unwrap();
        let p = BoundParams { beta, mu1, ..Default::default() };
        let a = g_bound(&g, 0.0, t1, &p).unwrap();
        let b = g_bound(&g, 0.0, t1 + dt, &p).unwrap();
        prop_assert!(a >= 1.0);
        prop_assert!(b >= a * (1.0 - 1e-12));
    }

    #[test]
    fn drift_is_odd_and_increasing(beta in 0.05f64..0.95, x in 0.0f64..50.0, dx in 1e-3f64..5.0) {
        for spec in [DriftSpec::h0(beta), DriftSpec::h_eps(beta, 0.01), DriftSpec::h_bar(beta, 0.5)] {
            let h = Drift::new(spec).unwrap();
            prop_assert_eq!(h.value(-x), -h.value(x));
            prop_assert!(h.value(x + dx) >= h.value(x));
        }
    }

    #[test]
    fn series_rejects_negative_values(vals in prop::collection::vec(-1.0f64..1.0, 2..20)) {
        let times: Vec<f64> = (0..vals.len()).map(|k| k as f64).collect();
        let r = CoefficientSeries::new(times, vals.clone(), Interpolation::Linear);
        prop_assert_eq!(r.is_ok(), vals.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn series_rejects_unsorted_times(mut times in prop::collection::vec(0.0f64..10.0, 2..20)) {
        let sorted = times.windows(2).all(|w| w[1] > w[0]);
        let n = times.len();
        let r = CoefficientSeries::new(std::mem::take(&mut times), vec![1.0; n], Interpolation::Linear);
        prop_assert_eq!(r.is_ok(), sorted);
    }

    #[test]
    fn digest_ignores_key_order(entries in prop::collection::btree_map("[a-z]{1,6}", -1000i64..1000, 1..12)) {
        let forward: Vec<String> = entries.iter().map(|(k, v)| format!("\"{k}\": {v}")).collect();
        let backward: Vec<String> = forward.iter().rev().cloned().collect();
        let a: serde_json::Value = serde_json::from_str(&format!("{{{}}}", forward.join(","))).unwrap();
        let b: serde_json::Value = serde_json::from_str(&format!("{{{}}}", backward.join(","))).unwrap();
        prop_assert_eq!(config_digest(&a), config_digest(&b));
    }

    #[test]
    fn initial_omega_stays_above_its_floor(k2 in 0.01f64..100.0, eps in 1e-4f64..1.0, xi in 0.0f64..50.0) {
        let floor = k2 - 0.5 * (std::f64::consts::PI * eps).sqrt();
        let v = initial_omega(k2, eps, xi);
        prop_assert!(v >= floor - 1e-12 && v <= k2);
    }

    #[test]
    fn slope_recovers_power_laws(a in -3.0f64..3.0, c in -2.0f64..2.0) {
        let x: Vec<f64> = [0.2f64, 0.1, 0.05, 0.025].iter().map(|e| e.ln()).collect();
        let y: Vec<f64> = x.iter().map(|l| c + a * l).collect();
        prop_assert!((least_squares_slope(&x, &y) - a).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn gj_partial_sums_do_not_decrease(beta in 0.1f64..0.9, eps in 0.01f64..1.0, s in 0.1f64..2.0, y in -2.0f64..2.0) {
        let q = GjQuadrature { time_steps: 12, space_nodes: 161, half_width: 0.0 };
        let gj = gj_series(3, beta, 1.0, eps, s, y, &q).unwrap();
        prop_assert!(gj.terms.iter().all(|&g| g >= 0.0));
        prop_assert!(gj.partial_sums.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn divergence_form_keeps_mass_sign_and_symmetry(beta in 0.1f64..0.9, mu1 in 0.0f64..4.0, c in 0.0f64..2.0) {
        let grid = GridPreset::coarse().build().unwrap();
        let g = CoefficientSeries::constant(c, 0.0, 0.3).unwrap();
        let p = LinearProblem::new(DriftSpec::h0(beta), mu1, mu1, 1.0, g);
        let v0 = grid.sample(|x| (-x * x).exp());
        let f = solve_linear(&v0, &p, &SolverConfig { dt: 1e-3, ..Default::default() }, &grid, 0.3).unwrap();
        let m0 = integral(&grid, &v0);
        let m1 = integral(&grid, f.last()) + f.boundary_outflow;
        prop_assert!(((m1 - m0) / m0).abs() < 1e-8);
        let sym = check_symmetry_values(&grid, f.last(), 1e-8).unwrap();
        prop_assert!(sym.pass, "{:?}", sym);
    }
}
