//! Randomised invariants across the library.

use discrim::classify::forest::{train_forest, ForestConfig};
use discrim::classify::tree::{gini, grow_tree, TreeConfig};
use discrim::design::{Design, DesignSpace};
use discrim::likelihood::{death_transition_prob, si_transition_matrix};
use discrim::models::epi::{EpiModelId, EpiParams, EpiProcess, EpiState};
use discrim::models::gillespie::gillespie_simulate;
use discrim::optimize::{coordinate_exchange, multi_start_search, ExchangePolicy, Phase, SearchConfig};
use discrim::{Dataset, Result, RngStream};
use proptest::prelude::*;
use rand::Rng;

fn noisy_blobs(n: usize, k: usize, dim: usize, seed: u64) -> Dataset {
    let mut rng = RngStream::new(seed).rng();
    let mut ds = Dataset::new(k, dim);
    for i in 0..n {
        let label = i % k;
        let row: Vec<f64> = (0..dim).map(|d| label as f64 * (d as f64 + 1.0) * 0.3 + rng.random::<f64>()).collect();
        ds.push(label, &row).unwrap();
    }
    ds
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn transition_matrices_are_stochastic(b1 in 0.01f64..3.0, b2 in 0.0f64..0.2, dt in 0.01f64..10.0, n in 1u32..40) {
        let p = si_transition_matrix(b1, b2, n, dt).unwrap();
        for i in 0..=n as usize {
            let mut row = 0.0;
            for j in 0..=n as usize {
                let v = p.get(i, j);
                prop_assert!(v >= 0.0);
                prop_assert!(j <= i || v == 0.0, "susceptibles cannot increase");
                row += v;
            }
            prop_assert!((row - 1.0).abs() < 1e-10);
        }
        let death: f64 = (0..=n).map(|to| death_transition_prob(n, to, b1, dt)).sum();
        prop_assert!((death - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gillespie_conserves_population(b1 in 0.05f64..2.0, b2 in 0.0f64..0.1, gamma in 0.05f64..5.0, seed in any::<u64>()) {
        for model in EpiModelId::ALL {
            let theta = EpiParams { b1, b2: Some(b2), gamma: Some(gamma) };
            let process = EpiProcess::new(model, &theta).unwrap();
            let times: Vec<f64> = (1..=20).map(|i| i as f64 * 0.5).collect();
            let path = gillespie_simulate(&process, EpiState::initial(50), &times, &mut RngStream::new(seed).rng()).unwrap();
            let mut prev = EpiState::initial(50);
            for s in path {
                prop_assert_eq!(s.total(), 50);
                prop_assert!(s.s <= prev.s);
                prev = s;
            }
        }
    }

    #[test]
    fn tree_and_forest_probabilities_normalise(seed in any::<u64>(), k in 2usize..5) {
        let ds = noisy_blobs(120, k, 3, seed);
        let tree = grow_tree(&ds, &TreeConfig::default()).unwrap();
        let forest = train_forest(&ds, &ForestConfig::with_trees(8), RngStream::new(seed)).unwrap();
        let mut rng = RngStream::new(seed ^ 1).rng();
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 3.0).collect();
            let (label, p) = tree.predict(&x).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(label < k);
            let (label, p) = forest.predict(&x).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!(label < k);
        }
    }

    #[test]
    fn exchange_bookkeeping_is_strict_descent(target in 0usize..40, seed in any::<u64>(), noise in 0.0f64..0.3) {
        let space = DesignSpace::epi4(1).unwrap();
        let goal = space.groups[0].grid.values()[target];
        let obj = |d: &Design, s: RngStream| -> Result<f64> {
            Ok((d.blocks[0][0] - goal).abs() + noise * s.rng().random::<f64>())
        };
        let init = space.random_design(RngStream::new(seed));
        let run = coordinate_exchange(&obj, &space, &init, ExchangePolicy::ExcludeCurrentPoints, 6, 3, 0, RngStream::new(seed)).unwrap();
        // Accepted losses strictly decrease and the history lists exactly the accepted designs.
        let accepted: Vec<_> = run.log.iter().filter(|r| r.accepted && r.phase == Phase::Exchange).collect();
        prop_assert_eq!(accepted.len(), run.history.len());
        let mut prev = run.init_loss;
        for (r, v) in accepted.iter().zip(&run.history) {
            prop_assert!(r.loss < prev);
            prop_assert_eq!(r.loss, v.loss);
            prop_assert_eq!(&r.design, &v.design);
            prev = r.loss;
        }
        prop_assert_eq!(run.n_evaluations, run.log.len());
    }
}

#[test]
fn gini_hand_values() {
    assert_eq!(gini(&[5.0, 0.0], &[0.5, 0.5]).unwrap(), 0.0);
    assert!((gini(&[1.0, 1.0], &[0.5, 0.5]).unwrap() - 0.5).abs() < 1e-15);
    assert!((gini(&[1.0, 1.0, 1.0, 1.0], &[0.25; 4]).unwrap() - 0.75).abs() < 1e-15);
    // Priors reweight counts: 3:1 with priors 1:3 is balanced.
    assert!((gini(&[3.0, 1.0], &[0.25, 0.75]).unwrap() - 0.5).abs() < 1e-15);
    assert!((gini(&[2.0, 1.0], &[0.5, 0.5]).unwrap() - 4.0 / 9.0).abs() < 1e-15);
}

#[test]
fn oob_fraction_is_near_bootstrap_exclusion() {
    let ds = noisy_blobs(2000, 3, 2, 8);
    let forest = train_forest(&ds, &ForestConfig::with_trees(100), RngStream::new(4)).unwrap();
    let f = forest.oob_fractions();
    let mean = f.iter().sum::<f64>() / f.len() as f64;
    assert!((mean - (-1f64).exp()).abs() < 0.02, "{mean}");
}

#[test]
fn small_search_is_identical_across_thread_counts() {
    let space = DesignSpace::epi4(2).unwrap();
    let obj = |d: &Design, s: RngStream| -> Result<f64> {
        let x = &d.blocks[0];
        Ok((x[0] - 1.0).powi(2) + (x[1] - 6.5).powi(2) + 0.5 * s.rng().random::<f64>())
    };
    let cfg = SearchConfig { p: 3, q: 4, restarts: 4, policy: None };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| multi_start_search(&obj, &space, &cfg, RngStream::new(12)).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.design, b.design);
    assert_eq!(a.min_average_loss.to_bits(), b.min_average_loss.to_bits());
    for (x, y) in a.runs.iter().zip(&b.runs) {
        assert_eq!(serde_json::to_string(&x.log).unwrap(), serde_json::to_string(&y.log).unwrap());
    }
}
