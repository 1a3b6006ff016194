//! Invariants checked on random models against independent oracles.

mod common;

use common::*;
use num_traits::{One, Zero};
use proptest::prelude::*;
use stormlet::checkers::{check_property, CheckResult, Quantity};
use stormlet::explicit::{read_model, write_model};
use stormlet::model::{prob01_max, prob01_min, Model, ModelKind, SparseMatrix};
use stormlet::property::parse_property;
use stormlet::scalar::{rational_to_f64, Rational};
use stormlet::solvers::{MinMaxMethod, Solve, SolverEnvironment};
use stormlet::BitSet;

fn run<T: Solve>(m: &Model<T>, text: &str, env: &SolverEnvironment) -> CheckResult<T> {
    check_property(m, None, &parse_property(text).unwrap(), env).unwrap()
}

fn tight() -> SolverEnvironment {
    SolverEnvironment {
        precision: 1e-12,
        ..SolverEnvironment::default()
    }
}

fn all(n: usize) -> BitSet {
    let mut s = BitSet::with_capacity(n);
    s.insert_range(..);
    s
}

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 64,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn float_results_track_exact_ones(seed in any::<u64>(), n in 1usize..12) {
        let exact = random_dtmc(&mut rng(seed), n);
        let float = to_float(&exact);
        // The iterative stopping rule bounds successive differences, not
        // the error, so the float run uses a tighter precision.
        let env = SolverEnvironment { precision: 1e-10, ..SolverEnvironment::default() };
        for text in [r#"P=? [ "b" U "a" ]"#, r#"R{"r"}=? [ F "a" ]"#, r#"P=? [ F<=3 "a" ]"#, r#"P=? [ G "b" ]"#] {
            let e = run(&exact, text, &SolverEnvironment::default());
            let f = run(&float, text, &env);
            for (x, y) in e.values.iter().zip(&f.values) {
                match (x, y) {
                    (Quantity::Finite(x), Quantity::Finite(y)) => {
                        let x = rational_to_f64(x);
                        prop_assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0), "{}: {} vs {}", text, x, y);
                    }
                    _ => prop_assert_eq!(x.to_f64().is_infinite(), y.to_f64().is_infinite()),
                }
            }
        }
    }

    #[test]
    fn exact_until_matches_elimination(seed in any::<u64>(), n in 1usize..10) {
        let m = random_dtmc(&mut rng(seed), n);
        let got = run(&m, r#"P=? [ "b" U "a" ]"#, &SolverEnvironment::default());
        let want = until_prob(&rows_of(&m), &members(m.labeling().get("b").unwrap(), n), &members(m.labeling().get("a").unwrap(), n));
        for (g, w) in got.values.iter().zip(want) {
            prop_assert_eq!(g, &Quantity::Finite(w));
        }
    }

    #[test]
    fn exact_rewards_match_elimination(seed in any::<u64>(), n in 1usize..10) {
        let m = random_dtmc(&mut rng(seed), n);
        let got = run(&m, r#"R{"r"}=? [ F "a" ]"#, &SolverEnvironment::default());
        let rewards = m.reward_model("r").unwrap().state_rewards().unwrap().to_vec();
        let want = reach_reward(&rows_of(&m), &rewards, &members(m.labeling().get("a").unwrap(), n));
        for (g, w) in got.values.iter().zip(want) {
            match w {
                Some(w) => prop_assert_eq!(g, &Quantity::Finite(w)),
                None => prop_assert_eq!(g, &Quantity::Infinite),
            }
        }
    }

    #[test]
    fn bounded_until_grows_towards_unbounded(seed in any::<u64>(), n in 1usize..7) {
        let exact = random_dtmc(&mut rng(seed), n);
        let m = to_float(&exact);
        let limit = until_prob(&rows_of(&exact), &vec![true; n], &members(exact.labeling().get("a").unwrap(), n));
        let mut previous = vec![0.0; n];
        for k in [1, 2, 4, 8, 16, 32, 64, 128, 256] {
            let v = run(&m, &format!("P=? [ F<={} \"a\" ]", k), &SolverEnvironment::default());
            for s in 0..n {
                let x = v.values[s].to_f64();
                prop_assert!(x >= previous[s]);
                prop_assert!(x <= rational_to_f64(&limit[s]) + 1e-12);
                previous[s] = x;
            }
        }
        // The unbounded value is approached only geometrically; states
        // whose remaining mass decays slowly may still be short of it.
        for s in 0..n {
            prop_assert!(previous[s] <= rational_to_f64(&limit[s]) + 1e-9);
        }
    }

    #[test]
    fn cumulative_reward_matches_paths(seed in any::<u64>(), n in 1usize..5, k in 0u64..5) {
        let exact = random_dtmc(&mut rng(seed), n);
        let m = to_float(&exact);
        let v = run(&m, &format!("R{{\"r\"}}=? [ C<={} ]", k), &SolverEnvironment::default());
        let rewards: Vec<f64> = m.reward_model("r").unwrap().state_rewards().unwrap().to_vec();
        let rows = float_rows(&exact);
        for s in 0..n {
            let want = cumulative_paths(&rows, &rewards, s, k as usize);
            prop_assert!((v.values[s].to_f64() - want).abs() <= 1e-9);
        }
    }

    #[test]
    fn explicit_round_trip_is_lossless(seed in any::<u64>(), n in 1usize..10, mdp in any::<bool>()) {
        let mut r = rng(seed);
        let exact = if mdp { random_mdp(&mut r, n, 3) } else { random_dtmc(&mut r, n) };
        let bundle = write_model(&exact);
        let back = read_model::<Rational>(&bundle).unwrap();
        prop_assert_eq!(&back, &exact);
        let float = to_float(&exact);
        let back = read_model::<f64>(&write_model(&float)).unwrap();
        prop_assert_eq!(&back, &float);
    }

    #[test]
    fn mdp_graph_sets_match_enumeration(seed in any::<u64>(), n in 1usize..6) {
        let m = random_mdp(&mut rng(seed), n, 3);
        let target = m.labeling().get("a").unwrap().clone();
        let ex = enumerate_extremes(&m, &members(&target, n), "r");
        let (max0, max1) = prob01_max(&m, &all(n), &target);
        let (min0, min1) = prob01_min(&m, &all(n), &target);
        for s in 0..n {
            prop_assert_eq!(max0.contains(s), ex.pmax[s].is_zero());
            prop_assert_eq!(max1.contains(s), ex.pmax[s].is_one());
            prop_assert_eq!(min0.contains(s), ex.pmin[s].is_zero());
            prop_assert_eq!(min1.contains(s), ex.pmin[s].is_one());
        }
    }

    #[test]
    fn globally_dualizes_direction(seed in any::<u64>(), n in 1usize..6) {
        let m = random_mdp(&mut rng(seed), n, 3);
        let env = SolverEnvironment::default();
        let g_min = run(&m, r#"Pmin=? [ G !"a" ]"#, &env);
        let f_max = run(&m, r#"Pmax=? [ F "a" ]"#, &env);
        let g_max = run(&m, r#"Pmax=? [ G !"a" ]"#, &env);
        let f_min = run(&m, r#"Pmin=? [ F "a" ]"#, &env);
        for s in 0..n {
            let one = Quantity::Finite(Rational::one());
            let sum = |a: &Quantity<Rational>, b: &Quantity<Rational>| match (a, b) {
                (Quantity::Finite(x), Quantity::Finite(y)) => Quantity::Finite(x.clone() + y.clone()),
                _ => Quantity::Undefined,
            };
            prop_assert_eq!(sum(&g_min.values[s], &f_max.values[s]), one.clone());
            prop_assert_eq!(sum(&g_max.values[s], &f_min.values[s]), one);
        }
    }

    #[test]
    fn mdp_scheduler_is_locally_optimal(seed in any::<u64>(), n in 1usize..7, pi in any::<bool>()) {
        let exact = random_mdp(&mut rng(seed), n, 3);
        let m = to_float(&exact);
        let env = SolverEnvironment {
            minmax_method: if pi { MinMaxMethod::PolicyIteration } else { MinMaxMethod::ValueIteration },
            ..tight()
        };
        for (text, reward) in [(r#"Pmax=? [ F "a" ]"#, None), (r#"Pmin=? [ F "a" ]"#, None), (r#"R{"act"}min=? [ F "a" ]"#, Some("act"))] {
            let r = run(&m, text, &env);
            let x: Vec<f64> = r.values.iter().map(Quantity::to_f64).collect();
            let per_choice = reward.map(|name| m.reward_model(name).unwrap().choice_rewards(m.choice_offsets()));
            let Some(sched) = &r.metadata.scheduler else { continue };
            for (s, c) in sched.iter().enumerate() {
                let Some(local) = c else { continue };
                let choice = m.choice_offsets()[s] + local;
                let mut value: f64 = m.matrix().row(choice).map(|(t, p)| p * x[t]).sum();
                if let Some(rw) = &per_choice {
                    value += rw[choice];
                }
                prop_assert!((value - x[s]).abs() <= 1e-6 * x[s].abs().max(1.0), "{} state {}: {} vs {}", text, s, value, x[s]);
            }
        }
    }

    #[test]
    fn ctmc_unbounded_until_ignores_rate_scale(seed in any::<u64>(), n in 1usize..8, scale in 1u32..20) {
        let dtmc = to_float(&random_dtmc(&mut rng(seed), n));
        let rates: Vec<f64> = (0..n).map(|s| 1.0 + s as f64).collect();
        let make = |factor: f64| {
            let mut c = Model::new(
                ModelKind::Ctmc,
                dtmc.matrix().clone(),
                None,
                Some(rates.iter().map(|r| r * factor).collect()),
            )
            .unwrap();
            c.add_label("a", dtmc.labeling().get("a").unwrap().clone()).unwrap();
            c
        };
        let env = SolverEnvironment::default();
        let a = run(&make(1.0), r#"P=? [ F "a" ]"#, &env);
        let b = run(&make(scale as f64), r#"P=? [ F "a" ]"#, &env);
        let d = run(&dtmc, r#"P=? [ F "a" ]"#, &env);
        prop_assert_eq!(&a.values, &b.values);
        prop_assert_eq!(&a.values, &d.values);
    }

    #[test]
    fn ctmc_long_horizon_approaches_unbounded(seed in any::<u64>(), n in 1usize..6) {
        let exact = random_dtmc(&mut rng(seed), n);
        let dtmc = to_float(&exact);
        let mut c = Model::new(ModelKind::Ctmc, dtmc.matrix().clone(), None, Some(vec![2.0; n])).unwrap();
        c.add_label("a", dtmc.labeling().get("a").unwrap().clone()).unwrap();
        let env = SolverEnvironment::default();
        let long = run(&c, r#"P=? [ F<=1000 "a" ]"#, &env);
        let limit = until_prob(&rows_of(&exact), &vec![true; n], &members(exact.labeling().get("a").unwrap(), n));
        for s in 0..n {
            prop_assert!((long.values[s].to_f64() - rational_to_f64(&limit[s])).abs() <= 1e-4);
        }
    }

    #[test]
    fn probabilities_stay_in_unit_interval(seed in any::<u64>(), n in 1usize..15) {
        let m = to_float(&random_dtmc(&mut rng(seed), n));
        for text in [r#"P=? [ "b" U "a" ]"#, r#"P=? [ X "a" ]"#, r#"P=? [ G<=4 "b" ]"#, r#"P=? [ F "a" || F "b" ]"#] {
            for v in run(&m, text, &SolverEnvironment::default()).values {
                if let Quantity::Finite(x) = v {
                    prop_assert!((-1e-12..=1.0 + 1e-12).contains(&x), "{}: {}", text, x);
                }
            }
        }
    }

    #[test]
    fn single_choice_mdp_equals_chain(seed in any::<u64>(), n in 1usize..10) {
        let dtmc = random_dtmc(&mut rng(seed), n);
        let mut mdp = Model::new(ModelKind::Mdp, dtmc.matrix().clone(), Some((0..=n).collect()), None).unwrap();
        mdp.add_label("a", dtmc.labeling().get("a").unwrap().clone()).unwrap();
        mdp.add_reward_model(dtmc.reward_model("r").unwrap().clone()).unwrap();
        let env = SolverEnvironment::default();
        for (chain, decision) in [
            (r#"P=? [ F "a" ]"#, r#"Pmax=? [ F "a" ]"#),
            (r#"P=? [ F "a" ]"#, r#"Pmin=? [ F "a" ]"#),
            (r#"R=? [ F "a" ]"#, r#"Rmin=? [ F "a" ]"#),
            (r#"R=? [ F "a" ]"#, r#"Rmax=? [ F "a" ]"#),
        ] {
            prop_assert_eq!(run(&dtmc, chain, &env).values, run(&mdp, decision, &env).values);
        }
    }
}

#[test]
fn gauss_oracle_solves_a_known_system() {
    // x0 = 1/2 x1 + 1/2, x1 = 1/2 x0  =>  x0 = 2/3, x1 = 1/3.
    let a = vec![vec![q(0, 1), q(1, 2)], vec![q(1, 2), q(0, 1)]];
    let x = gauss(&a, &[q(1, 2), q(0, 1)]);
    assert_eq!(x, vec![q(2, 3), q(1, 3)]);
}

#[test]
fn scheduler_enumeration_counts() {
    assert_eq!(schedulers(&[0, 2, 3, 6]).len(), 6);
    assert_eq!(schedulers(&[0, 1]).len(), 1);
}

#[test]
fn sparse_helper_sanity() {
    let m = SparseMatrix::from_rows(vec![vec![(1, 1.0)], vec![(1, 1.0)]], 2).unwrap();
    assert_eq!(m.nnz(), 2);
}
