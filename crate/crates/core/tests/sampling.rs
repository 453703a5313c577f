mod common;

use common::{four_leaf_clayton, gen, random_generator, six_leaf_clayton, tau_brute};
use hopac::estimation::kendall_tau_b;
use hopac::evaluation::lambda_u_empirical;
use hopac::sampling::{
    empirical_laplace, op_frailties, sample_frailty, sample_hopac, sample_inner_frailty, sample_op_frailty,
    sample_opac, sample_positive_stable,
};
use hopac::simstudy::random_hopac;
use hopac::{Family, Generator, HacTree, RngStream};
use rand::Rng;

const TS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];

#[test]
fn stable_laplace_transform() {
    let mut rng = RngStream::new(1, 0).rng();
    let gamma = (std::f64::consts::PI / 4.0).cos().powi(2);
    let draws: Vec<f64> = (0..100_000).map(|_| sample_positive_stable(0.5, gamma, &mut rng).unwrap()).collect();
    for t in [0.5, 1.0, 2.0] {
        let expect = (-(t as f64).sqrt()).exp();
        assert!((empirical_laplace(&draws, t) - expect).abs() < 0.01, "t = {t}");
    }
    assert_eq!(sample_positive_stable(1.0, 1.0, &mut rng).unwrap(), 1.0);
    assert!(sample_positive_stable(1.5, 1.0, &mut rng).is_err());
    assert!(sample_positive_stable(0.0, 1.0, &mut rng).is_err());
}

#[test]
fn stable_draws_are_positive() {
    let mut rng = RngStream::new(2, 0).rng();
    for k in 0..1_000_000 {
        let alpha = 0.05 + 0.9 * (k % 10) as f64 / 10.0;
        let gamma = (std::f64::consts::PI * alpha / 2.0).cos().powf(1.0 / alpha);
        let s = sample_positive_stable(alpha, gamma, &mut rng).unwrap();
        assert!(s > 0.0 && s.is_finite(), "alpha {alpha}: {s}");
    }
}

#[test]
fn base_frailties() {
    let mut rng = RngStream::new(3, 0).rng();
    let v: Vec<f64> = (0..100_000).map(|_| sample_frailty(&gen(Family::Clayton, 1.0, 1.0), &mut rng).unwrap()).collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    assert!((mean - 1.0).abs() < 0.015, "{mean}");
    for _ in 0..1000 {
        assert_eq!(sample_frailty(&gen(Family::AliMikhailHaq, 0.0, 1.0), &mut rng).unwrap(), 1.0);
        assert_eq!(sample_frailty(&gen(Family::Joe, 1.0, 1.0), &mut rng).unwrap(), 1.0);
    }
    assert!(sample_frailty(&gen(Family::Clayton, 1.0, 2.0), &mut rng).is_err());
}

#[test]
fn op_frailty_without_power_is_the_base_frailty() {
    for f in Family::ALL {
        let g = random_generator(f, &mut RngStream::new(4, 0).rng()).base();
        let a = op_frailties(&g, 100, &mut RngStream::new(5, 0).rng());
        let mut rng = RngStream::new(5, 0).rng();
        let b: Vec<f64> = (0..100).map(|_| sample_frailty(&g, &mut rng).unwrap()).collect();
        assert_eq!(a, b, "{g}");
        assert!(a.iter().all(|&v| v > 0.0));
    }
}

#[test]
fn op_frailties_have_the_generator_as_laplace_transform() {
    let mut pick = RngStream::new(6, 0).rng();
    for f in Family::ALL {
        for k in 0..10 {
            let g = random_generator(f, &mut pick);
            let draws = op_frailties(&g, 100_000, &mut RngStream::new(6, 1 + k).rng());
            assert!(draws.iter().all(|&v| v > 0.0));
            for t in TS {
                let err = (empirical_laplace(&draws, t) - g.psi(t).unwrap()).abs();
                assert!(err < 0.01, "{g} at t = {t}: {err}");
            }
        }
    }
}

/// Inner frailties have Laplace transform `exp(-v psi_p^{-1}(psi_c(t)))`.
fn check_inner(parent: &Generator, child: &Generator, v: f64, stream: RngStream) {
    let mut rng = stream.rng();
    let draws: Vec<f64> = (0..100_000).map(|_| sample_inner_frailty(parent, child, v, &mut rng).unwrap()).collect();
    for t in TS {
        let expect = (-v * parent.psi_inverse(child.psi(t).unwrap()).unwrap()).exp();
        let err = (empirical_laplace(&draws, t) - expect).abs();
        assert!(err < 0.01, "{parent} > {child}, v = {v}, t = {t}: {err}");
    }
}

#[test]
fn inner_frailties_under_both_rules() {
    let mut pick = RngStream::new(7, 0).rng();
    let mut k = 0;
    for f in Family::OP {
        for _ in 0..4 {
            let p = random_generator(f, &mut pick);
            // R2: same theta, larger beta
            let c2 = gen(f, p.theta(), p.beta() + pick.random_range(0.0..2.0));
            // R1: parent with beta = 1, child with larger theta
            let p1 = p.base();
            let (_, hi) = common::theta_range(f);
            let c1 = gen(f, pick.random_range(p1.theta()..hi), pick.random_range(1.0..3.0));
            for v in [1.0, 3.0] {
                k += 1;
                check_inner(&p, &c2, v, RngStream::new(7, k));
                k += 1;
                check_inner(&p1, &c1, v, RngStream::new(7, k));
            }
        }
    }
}

#[test]
fn inner_frailty_degenerate_cases() {
    let mut rng = RngStream::new(8, 0).rng();
    let p = gen(Family::Clayton, 1.0, 2.0);
    assert_eq!(sample_inner_frailty(&p, &p, 2.5, &mut rng).unwrap(), 2.5);
    let q = gen(Family::Clayton, 1.5, 1.0);
    assert_eq!(sample_inner_frailty(&q, &q, 2.5, &mut rng).unwrap(), 2.5);
    // neither rule
    assert!(sample_inner_frailty(&p, &gen(Family::Clayton, 2.0, 3.0), 1.0, &mut rng).is_err());
}

#[test]
fn joe_inner_frailty_is_a_sibuya_sum() {
    let p = gen(Family::Joe, 1.0, 1.0);
    let c = gen(Family::Joe, 2.0, 1.0);
    for k in [1.0, 4.0] {
        let mut rng = RngStream::new(9, k as u64).rng();
        let draws: Vec<f64> = (0..100_000).map(|_| sample_inner_frailty(&p, &c, k, &mut rng).unwrap()).collect();
        assert!(draws.iter().all(|&v| v >= k && v.fract() == 0.0));
        for t in TS {
            let sib = 1.0 - (1.0 - (-t).exp()).sqrt();
            assert!((empirical_laplace(&draws, t) - sib.powf(k)).abs() < 0.01);
        }
    }
}

#[test]
fn opac_sample_tau_and_tails() {
    let g = gen(Family::Clayton, 2.0, 2.0);
    let s = sample_opac(&g, 2, 10_000, &RngStream::new(10, 0)).unwrap();
    let tau = kendall_tau_b(&s.column(0), &s.column(1));
    assert!((tau - 0.75).abs() < 0.02, "{tau}");

    let j = gen(Family::Joe, 2.0, 1.0);
    let s = sample_opac(&j, 2, 100_000, &RngStream::new(10, 1)).unwrap();
    let lam = lambda_u_empirical(&s.column(0), &s.column(1), 500).unwrap();
    assert!((lam - (2.0 - 2f64.sqrt())).abs() < 0.05, "{lam}");
}

#[test]
fn samples_are_reproducible_and_inside_the_unit_cube() {
    for f in Family::OP {
        for seed in 0..5 {
            let t = random_hopac(f, 6, &mut RngStream::new(seed, 99).rng()).unwrap();
            let a = sample_hopac(&t, 500, &RngStream::new(seed, 1)).unwrap();
            let b = sample_hopac(&t, 500, &RngStream::new(seed, 1)).unwrap();
            let c = sample_hopac(&t, 500, &RngStream::new(seed, 2)).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, c);
            assert!(a.as_slice().iter().all(|&u| u > 0.0 && u < 1.0));
            // a prefix of a longer sample is the shorter sample
            assert_eq!(sample_hopac(&t, 200, &RngStream::new(seed, 1)).unwrap(), a.head(200));
        }
    }
}

#[test]
fn single_fork_tree_is_an_opac() {
    for f in Family::ALL {
        let g = random_generator(f, &mut RngStream::new(11, 0).rng());
        let t = HacTree::new(2, vec![(3, [1, 2], g)]).unwrap();
        let s = RngStream::new(11, 1);
        assert_eq!(sample_hopac(&t, 300, &s).unwrap(), sample_opac(&g, 2, 300, &s).unwrap());
    }
}

#[test]
fn nested_sampling_rejects_invalid_trees() {
    let c = |th, b| gen(Family::Clayton, th, b);
    let t = HacTree::new(3, vec![(4, [1, 2], c(2.0, 3.0)), (5, [4, 3], c(1.0, 2.0))]).unwrap();
    assert!(sample_hopac(&t, 10, &RngStream::new(1, 1)).is_err());
}

#[test]
fn six_leaf_upper_tails_follow_the_model() {
    let t = six_leaf_clayton();
    let s = sample_hopac(&t, 100_000, &RngStream::new(12, 0)).unwrap();
    let m = t.pairwise_matrix();
    for i in 0..6 {
        for j in i + 1..6 {
            let lam = lambda_u_empirical(&s.column(i), &s.column(j), 500).unwrap();
            assert!((lam - m.lambda_u[i][j]).abs() < 0.07, "pair ({}, {}): {lam} vs {}", i + 1, j + 1, m.lambda_u[i][j]);
        }
    }
}

#[test]
fn leaves_under_one_fork_are_exchangeable() {
    // pairs (1,3) and (2,4) share the root as youngest common ancestor
    let t = four_leaf_clayton();
    let batches = 20;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for k in 0..batches {
        let s1 = sample_hopac(&t, 500, &RngStream::new(13, 2 * k)).unwrap();
        let s2 = sample_hopac(&t, 500, &RngStream::new(13, 2 * k + 1)).unwrap();
        a.push(tau_brute(&s1.column(0), &s1.column(2)));
        b.push(tau_brute(&s2.column(1), &s2.column(3)));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    };
    let z = (mean(&a) - mean(&b)) / ((var(&a) + var(&b)) / batches as f64).sqrt();
    // two-sided 1% critical value of Student's t with 38 degrees of freedom
    assert!(z.abs() < 2.712, "t statistic {z}");
}

#[test]
fn frailty_draws_reproduce_from_the_stream() {
    let g = gen(Family::Frank, 5.0, 2.0);
    let a: Vec<f64> = {
        let mut r = RngStream::new(14, 3).rng();
        (0..50).map(|_| sample_op_frailty(&g, &mut r)).collect()
    };
    let b: Vec<f64> = {
        let mut r = RngStream::new(14, 3).rng();
        (0..50).map(|_| sample_op_frailty(&g, &mut r)).collect()
    };
    assert_eq!(a, b);
}

#[test]
fn near_independent_root_samples_quickly() {
    // a Clayton root at theta = 1e-10 draws frailties near 1e10, which the
    // inner tilted stable step must handle without work growing in v
    let tree = HacTree::new(
        3,
        vec![(4, [1, 2], gen(Family::Clayton, 2.0, 1.0)), (5, [3, 4], gen(Family::Clayton, 1e-10, 1.0))],
    )
    .unwrap();
    let start = std::time::Instant::now();
    let x = hopac::sampling::sample_hopac(&tree, 2000, &RngStream::new(3, 0)).unwrap();
    assert!(start.elapsed().as_secs() < 10);
    assert!((tau_brute(&x.column(0), &x.column(1)) - 0.5).abs() < 0.03);
    assert!(tau_brute(&x.column(0), &x.column(2)).abs() < 0.04);
}
