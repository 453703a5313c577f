mod common;

use common::{four_leaf_clayton, gen};
use hopac::estimation::{fit, pseudo_observations, Estimator, EstimatorConfig};
use hopac::evaluation::{
    empirical_copula, lambda_u_empirical, sample_vs_estimate, sample_vs_estimate_tree, structure_match,
    true_vs_estimate, true_vs_estimate_tree, SampleMeasures,
};
use hopac::sampling::sample_hopac;
use hopac::simstudy::random_hopac;
use hopac::{Family, HacTree, RngStream, SampleMatrix};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn uniform_matrix(n: usize, d: usize, seed: u64) -> SampleMatrix {
    let mut rng = RngStream::new(seed, 0).rng();
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    SampleMatrix::from_rows(&rows).unwrap()
}

/// The same tree with leaf `i` renamed `perm[i - 1]`.
fn relabel(tree: &HacTree, perm: &[usize]) -> HacTree {
    let d = tree.d();
    let s = tree.structure();
    let name = |c: usize| if c <= d { perm[c - 1] } else { c };
    let forks = s
        .forks()
        .map(|f| {
            let [a, b] = s.children_of(f);
            (f, [name(a), name(b)], *tree.generator(f))
        })
        .collect();
    HacTree::new(d, forks).unwrap()
}

fn distinct_taus(tree: &HacTree) -> bool {
    let mut t: Vec<f64> = tree.fork_taus().into_values().collect();
    t.sort_by(f64::total_cmp);
    t.windows(2).all(|w| w[1] - w[0] > 1e-9)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn empirical_copula_counts_dominated_rows(n in 1usize..=50, d in 1usize..4, seed in any::<u64>(),
                                             p in prop::collection::vec(0.0f64..=1.0, 3)) {
        let u = uniform_matrix(n, d, seed);
        let point = &p[..d];
        let mut hits = 0;
        for i in 0..n {
            let mut inside = true;
            for j in 0..d {
                if u.get(i, j) > point[j] {
                    inside = false;
                }
            }
            if inside {
                hits += 1;
            }
        }
        prop_assert_eq!(empirical_copula(&u, point), hits as f64 / n as f64);
        // raising any coordinate can only add rows
        for j in 0..d {
            let mut up = point.to_vec();
            up[j] = (up[j] + 0.1).min(1.0);
            prop_assert!(empirical_copula(&u, &up) >= empirical_copula(&u, point));
        }
        prop_assert_eq!(empirical_copula(&u, &vec![1.0; d]), 1.0);
    }

    #[test]
    fn trivariate_ratio_is_one_exactly_when_structures_match(seed in any::<u64>(), d in 3usize..8, mode in 0u8..3) {
        let mut rng = RngStream::new(seed, 0).rng();
        let model = random_hopac(Family::Clayton, d, &mut rng).unwrap();
        let other = match mode {
            0 => model.clone(),
            1 => {
                let mut perm: Vec<usize> = (1..=d).collect();
                perm.shuffle(&mut rng);
                relabel(&model, &perm)
            }
            _ => random_hopac(Family::Clayton, d, &mut rng).unwrap(),
        };
        prop_assume!(distinct_taus(&model) && distinct_taus(&other));
        let m = structure_match(&model, &other).unwrap();
        prop_assert!((0.0..=1.0).contains(&m.trivariate_ratio));
        prop_assert_eq!(m.trivariate_ratio == 1.0, m.exact);
        prop_assert_eq!(m.exact, model.structure().clades() == other.structure().clades());
    }
}

#[test]
fn tail_estimate_examples() {
    let n = 10_000;
    let x: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let anti: Vec<f64> = x.iter().map(|v| 1.0 - v).collect();
    for k in [1, 50, 500, 4999] {
        assert_eq!(lambda_u_empirical(&x, &x, k).unwrap(), 1.0);
        assert_eq!(lambda_u_empirical(&x, &anti, k).unwrap(), 0.0);
    }
    // under independence the top-k overlap is hypergeometric with mean k^2 / n
    let mut within = 0;
    for s in 0..20 {
        let u = uniform_matrix(n, 2, 100 + s);
        let l = lambda_u_empirical(&u.column(0), &u.column(1), 500).unwrap();
        if (l - 0.05).abs() <= 0.02 {
            within += 1;
        }
    }
    // each seed misses with probability about 3%
    assert!(within >= 18, "{within}/20");
    assert!(lambda_u_empirical(&x, &x, n + 1).is_err());
}

#[test]
fn measures_ignore_row_order() {
    let model = four_leaf_clayton();
    let x = sample_hopac(&model, 400, &RngStream::new(8, 0)).unwrap();
    let u = pseudo_observations(&x).unwrap();
    let report = fit(&u, Family::Clayton, Estimator::TdMl, &EstimatorConfig::default()).unwrap();
    let a = sample_vs_estimate(&u, &report).unwrap();

    let mut order: Vec<usize> = (0..u.n()).collect();
    order.shuffle(&mut RngStream::new(9, 0).rng());
    let rows: Vec<Vec<f64>> = order.iter().map(|&i| u.row(i).to_vec()).collect();
    let shuffled = SampleMatrix::from_rows(&rows).unwrap();
    let b = sample_vs_estimate(&shuffled, &report).unwrap();
    assert!((a.cdf_distance - b.cdf_distance).abs() < 1e-12);
    assert_eq!(a.tau_distance, b.tau_distance);
    assert_eq!(a.lambda_u_distance, b.lambda_u_distance);

    let refit = fit(&shuffled, Family::Clayton, Estimator::TdMl, &EstimatorConfig::default()).unwrap();
    let t1 = true_vs_estimate(&model, &report).unwrap();
    let t2 = true_vs_estimate(&model, &refit).unwrap();
    assert!((t1.param_distance - t2.param_distance).abs() < 1e-6);
    assert!(t1.param_distance >= 0.0 && t1.tau_distance >= 0.0 && t1.lambda_u_distance >= 0.0);
}

#[test]
fn a_model_is_close_to_its_own_large_sample() {
    for (seed, model) in [(1, four_leaf_clayton()), (2, common::six_leaf_clayton())] {
        let x = sample_hopac(&model, 10_000, &RngStream::new(seed, 0)).unwrap();
        let u = pseudo_observations(&x).unwrap();
        let m = sample_vs_estimate_tree(&u, &model).unwrap();
        assert!(m.cdf_distance < 0.001, "{m:?}");
        assert!(m.tau_distance < 0.03, "{m:?}");
        assert!(m.lambda_u_distance < 0.08, "{m:?}");
    }
}

#[test]
fn exchangeable_tau_distance_is_gap_to_mean() {
    let x = sample_hopac(&common_tree(2.0), 300, &RngStream::new(4, 0)).unwrap();
    let u = pseudo_observations(&x).unwrap();
    // a fit with tau 0.75 lies above every sample tau of tau-0.5 data, so the
    // mean of the gaps is the gap to the mean
    let fitted = common_tree(6.0);
    let m = sample_vs_estimate_tree(&u, &fitted).unwrap();
    let taus = [
        common::tau_brute(&u.column(0), &u.column(1)),
        common::tau_brute(&u.column(0), &u.column(2)),
        common::tau_brute(&u.column(1), &u.column(2)),
    ];
    assert!(taus.iter().all(|&t| t < 0.75));
    let mean = taus.iter().sum::<f64>() / 3.0;
    assert!((m.tau_distance - (0.75 - mean)).abs() < 1e-12);
}

fn common_tree(theta: f64) -> HacTree {
    let g = gen(Family::Clayton, theta, 1.0);
    HacTree::new(3, vec![(4, [1, 2], g), (5, [3, 4], g)]).unwrap()
}

#[test]
fn hac_fit_misses_outer_power_data() {
    let model = four_leaf_clayton();
    let mut worse = [0; 3];
    let reps = 5;
    for s in 0..reps {
        let x = sample_hopac(&model, 1000, &RngStream::new(20 + s, 0)).unwrap();
        let u = pseudo_observations(&x).unwrap();
        let cfg = EstimatorConfig::default();
        let td = sample_vs_estimate(&u, &fit(&u, Family::Clayton, Estimator::TdMl, &cfg).unwrap()).unwrap();
        let hac = sample_vs_estimate(&u, &fit(&u, Family::Clayton, Estimator::Hac, &cfg).unwrap()).unwrap();
        let cmp = |a: &SampleMeasures| [a.cdf_distance, a.tau_distance, a.lambda_u_distance];
        for (k, (h, t)) in cmp(&hac).iter().zip(cmp(&td)).enumerate() {
            if *h > t {
                worse[k] += 1;
            }
        }
    }
    assert_eq!(worse, [reps; 3]);
}

#[test]
fn true_vs_estimate_averages_over_forks() {
    // fork taus (0.31, 0.7) against (0.31, 0.72)
    let c = Family::Clayton;
    let th = |tau: f64| 2.0 * tau / (1.0 - tau);
    let model = HacTree::new(3, vec![(4, [1, 2], gen(c, th(0.7), 1.0)), (5, [3, 4], gen(c, th(0.31), 1.0))]).unwrap();
    let fitted = HacTree::new(3, vec![(4, [1, 2], gen(c, th(0.72), 1.0)), (5, [3, 4], gen(c, th(0.31), 1.0))]).unwrap();
    let m = true_vs_estimate_tree(&model, &fitted).unwrap();
    assert!((m.tau_distance - 0.01).abs() < 1e-12);
    assert!((m.param_distance - (th(0.72) - th(0.7)) / 2.0).abs() < 1e-12);
    // Clayton at beta = 1 has no upper tail
    assert_eq!(m.lambda_u_distance, 0.0);

    // Gumbel coefficients follow theta * beta
    let g = Family::Gumbel;
    let a = HacTree::new(3, vec![(4, [1, 2], gen(g, 2.0, 1.5)), (5, [3, 4], gen(g, 1.5, 1.0))]).unwrap();
    let b = HacTree::new(3, vec![(4, [1, 2], gen(g, 1.5, 2.0)), (5, [3, 4], gen(g, 1.5, 1.0))]).unwrap();
    let m = true_vs_estimate_tree(&a, &b).unwrap();
    assert!(m.lambda_u_distance.abs() < 1e-12 && m.tau_distance.abs() < 1e-12);
    // both normalize to (3, 1)
    assert!(m.param_distance.abs() < 1e-12);
}
