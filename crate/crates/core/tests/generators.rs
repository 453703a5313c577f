mod common;

use common::{gen, random_generator, tau_by_integral, theta_range};
use hopac::{kendall_tau_inverse, solve_tau_lambda_u, Family, Generator};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn family() -> impl Strategy<Value = Family> {
    prop::sample::select(Family::ALL.to_vec())
}

fn op_family() -> impl Strategy<Value = Family> {
    prop::sample::select(Family::OP.to_vec())
}

fn generator() -> impl Strategy<Value = Generator> {
    (family(), 0.0..1.0f64, 1.0..4.0f64).prop_map(|(f, s, b)| {
        let (lo, hi) = theta_range(f);
        gen(f, lo + s * (hi - lo), b)
    })
}

/// Five-point central difference.
fn diff(f: impl Fn(f64) -> f64, t: f64, h: f64) -> f64 {
    (f(t - 2.0 * h) - 8.0 * f(t - h) + 8.0 * f(t + h) - f(t + 2.0 * h)) / (12.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn psi_is_a_decreasing_map_into_unit_interval(g in generator(), t in 0.0..50.0f64, dt in 1e-6..5.0f64) {
        let a = g.psi(t).unwrap();
        let b = g.psi(t + dt).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a);
    }

    #[test]
    fn psi_inverts_psi_inverse(g in generator(), s in 0.0..=1.0f64) {
        let t = g.psi_inverse(s).unwrap();
        prop_assert!(t >= 0.0);
        prop_assert!((g.psi(t).unwrap() - s).abs() <= 1e-10, "{} {} {}", g, s, t);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn derivatives_match_finite_differences(g in generator(), t in 0.05..20.0f64) {
        let h = 1e-3 * t;
        let d1 = g.psi_d1(t).unwrap();
        let d2 = g.psi_d2(t).unwrap();
        prop_assert!(d1 <= 0.0 && d2 >= 0.0);
        let fd1 = diff(|x| g.psi(x).unwrap(), t, h);
        let fd2 = diff(|x| g.psi_d1(x).unwrap(), t, h);
        prop_assert!((d1 - fd1).abs() <= 1e-6 * d1.abs().max(1e-300), "{} t={} {} {}", g, t, d1, fd1);
        prop_assert!((d2 - fd2).abs() <= 1e-6 * d2.abs().max(1e-300), "{} t={} {} {}", g, t, d2, fd2);
    }

    #[test]
    fn first_derivative_follows_chain_rule(g in generator(), t in 0.01..20.0f64) {
        let b = g.beta();
        let x = t.powf(1.0 / b);
        let chain = g.base().psi_d1(x).unwrap() * x / (b * t);
        let d1 = g.psi_d1(t).unwrap();
        prop_assert!((d1 - chain).abs() <= 1e-10 * d1.abs());
    }

    #[test]
    fn tau_increases_with_beta(f in op_family(), s in 0.0..1.0f64, b in 1.0..5.0f64, db in 0.01..2.0f64) {
        let (lo, hi) = theta_range(f);
        let theta = lo + s * (hi - lo);
        let t1 = gen(f, theta, b).kendall_tau();
        let t2 = gen(f, theta, b + db).kendall_tau();
        prop_assert!(t2 > t1);
        prop_assert!(t1 < 1.0 && t1 >= -1.0);
    }

    #[test]
    fn tau_inverse_round_trips(g in generator()) {
        let theta = kendall_tau_inverse(g.family(), g.kendall_tau(), g.beta()).unwrap();
        prop_assert!((theta - g.theta()).abs() <= 1e-6 * g.theta().max(1.0), "{} -> {}", g, theta);
    }

    #[test]
    fn gumbel_op_is_a_gumbel(theta in 1.0..4.0f64, beta in 1.0..4.0f64, t in 0.01..20.0f64, s in 0.001..1.0f64) {
        let a = gen(Family::Gumbel, theta, beta);
        let b = gen(Family::Gumbel, theta * beta, 1.0);
        prop_assert_eq!(a.psi(t).unwrap(), b.psi(t).unwrap());
        prop_assert_eq!(a.psi_inverse(s).unwrap(), b.psi_inverse(s).unwrap());
        prop_assert_eq!(a.kendall_tau(), b.kendall_tau());
        prop_assert_eq!(a.tail_coefficients(), b.tail_coefficients());
    }

    #[test]
    fn tail_coefficients_lie_in_unit_interval(g in generator()) {
        let tc = g.tail_coefficients();
        prop_assert!((0.0..=1.0).contains(&tc.lambda_l));
        prop_assert!((0.0..=1.0).contains(&tc.lambda_u));
    }

    #[test]
    fn solved_pairs_hit_their_targets(f in op_family(), tau in 0.0..0.9f64, lam in 0.0..0.9f64) {
        if let Some((theta, beta)) = solve_tau_lambda_u(f, tau, lam).unwrap() {
            let g = gen(f, theta, beta);
            prop_assert!((g.kendall_tau() - tau).abs() < 1e-6);
            prop_assert!((g.tail_coefficients().lambda_u - lam).abs() < 1e-6);
        }
    }

    #[test]
    fn json_round_trip(g in generator()) {
        let s = serde_json::to_string(&g).unwrap();
        let back: Generator = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(g, back);
    }
}

#[test]
fn closed_form_taus_match_the_integral() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for f in Family::ALL {
        for _ in 0..10 {
            let g = random_generator(f, &mut rng).base();
            let oracle = tau_by_integral(f, g.theta());
            assert!((g.kendall_tau() - oracle).abs() < 1e-6, "{g}: {} vs {oracle}", g.kendall_tau());
        }
    }
}

#[test]
fn ali_mikhail_haq_tau_stays_below_one_third() {
    let g = gen(Family::AliMikhailHaq, 0.999, 1.0);
    assert!(g.kendall_tau() < 1.0 / 3.0);
    assert!(kendall_tau_inverse(Family::AliMikhailHaq, 0.5, 1.0).is_err());
}

#[test]
fn unattainable_joe_pair_by_grid_search() {
    assert!(solve_tau_lambda_u(Family::Joe, 0.5, 0.01).unwrap().is_none());
    // No grid point comes close to both targets at once.
    let mut best = f64::INFINITY;
    for i in 0..400 {
        let theta = 1.0 + i as f64 * 0.02;
        for k in 0..400 {
            let beta = 1.0 + k as f64 * 0.02;
            let g = gen(Family::Joe, theta, beta);
            let d = (g.kendall_tau() - 0.5).abs() + (g.tail_coefficients().lambda_u - 0.01).abs();
            best = best.min(d);
        }
    }
    assert!(best > 0.1, "closest grid point at distance {best}");
}

#[test]
fn clayton_solution_has_expected_beta() {
    let (theta, beta) = solve_tau_lambda_u(Family::Clayton, 0.3, 0.3).unwrap().unwrap();
    let beta0 = 2f64.ln() / 1.7f64.ln();
    assert!((beta - beta0).abs() < 1e-9);
    // theta / (theta + 2) = 1 - 0.7 beta
    let t0 = 1.0 - 0.7 * beta0;
    assert!((theta - 2.0 * t0 / (1.0 - t0)).abs() < 1e-9);
    assert!((theta - 0.18723).abs() < 1e-4);
}
