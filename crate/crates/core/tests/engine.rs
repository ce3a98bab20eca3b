use seqreject::engine::{pvalue_tensor, run_on_tensor, screen_all, screen_weights, successor};
use seqreject::simulation::{simulate_run, Design, Scenario};
use seqreject::{
    complete_linkage, correlation_distance, make_splits, run, AdjustmentKind, AdjustmentPolicy, AggregationConfig,
    HypothesisCollection, RunConfig, ScreeningConfig,
};

fn scenario(seed: u64, design: Design) -> Scenario {
    Scenario {
        n: 60,
        p: 20,
        design,
        s0: 3,
        beta_value: Default::default(),
        placement: Default::default(),
        snr: 2.0,
        runs: 1,
        seed,
        fix_design: false,
        redraw_beta: false,
    }
}

fn policy(kind: AdjustmentKind, shaffer: bool) -> AdjustmentPolicy {
    AdjustmentPolicy::new(kind, shaffer).unwrap()
}

#[test]
fn sequential_procedures_dominate_their_bonferroni_versions() {
    let aggregation = AggregationConfig::default();
    for seed in 0..12 {
        let design = if seed % 2 == 0 { Design::EquiCorr { rho: 0.5 } } else { Design::Blocks { block_size: 2, rho: 0.9 } };
        let data = simulate_run(&scenario(seed, design), 0).unwrap().dataset;
        let plan = make_splits(data.n(), 10, seed).unwrap();
        let screened = screen_all(&data, &plan, &ScreeningConfig::default(), false).unwrap();
        let flat = HypothesisCollection::singletons(data.p());
        let tree = HypothesisCollection::tree(complete_linkage(correlation_distance(data.x()).unwrap().view()).unwrap());
        for (collection, weaker, stronger) in [
            (&flat, policy(AdjustmentKind::SingleBonferroni, false), vec![policy(AdjustmentKind::SingleHolm, false)]),
            (
                &tree,
                policy(AdjustmentKind::HierBonferroni, false),
                vec![policy(AdjustmentKind::HierInheritance, false), policy(AdjustmentKind::HierInheritance, true)],
            ),
        ] {
            let tensor = pvalue_tensor(&data, &screened, collection, false).unwrap();
            let weights = screen_weights(collection, &screened);
            for alpha in [0.05, 0.2] {
                let base = run_on_tensor(collection, &weights, &tensor, weaker, &aggregation, alpha).unwrap();
                for s in &stronger {
                    let better = run_on_tensor(collection, &weights, &tensor, *s, &aggregation, alpha).unwrap();
                    assert!(base.rejected().is_subset(better.rejected()), "seed {seed}: {} lost a rejection", s.label());
                }
            }
        }
    }
}

#[test]
fn final_state_is_a_fixpoint_and_grows_by_levels() {
    let data = simulate_run(&scenario(77, Design::EquiCorr { rho: 0.3 }), 0).unwrap().dataset;
    let tree = HypothesisCollection::tree(complete_linkage(correlation_distance(data.x()).unwrap().view()).unwrap());
    let config = RunConfig { splits: 10, seed: 4, alpha: 0.1, ..RunConfig::default() };
    let out = run(&data, &tree, &config).unwrap();
    let weights = screen_weights(&tree, &out.screened);
    let rest = successor(out.state.rejected(), &out.tensor, &weights, config.policy, &config.aggregation, config.alpha, &tree)
        .unwrap();
    assert!(rest.is_empty());
    let h = tree.hierarchy().unwrap();
    let mut level_of = vec![None; tree.len()];
    for event in out.state.trace() {
        assert!(event.pvalue <= config.alpha);
        level_of[event.id] = Some(event.iteration);
        if let Some(parent) = h.parent(event.id).unwrap() {
            assert!(level_of[parent].is_some_and(|l| l < event.iteration), "child rejected before its parent");
        }
    }
    let iterations: Vec<usize> = out.state.trace().iter().map(|e| e.iteration).collect();
    assert!(iterations.windows(2).all(|w| w[0] <= w[1]));
    if let Some(&last) = iterations.last() {
        assert!((1..=last).all(|i| iterations.contains(&i)), "an iteration added nothing before the fixpoint");
    }
}

#[test]
fn identical_inputs_give_identical_traces() {
    let data = simulate_run(&scenario(5, Design::Blocks { block_size: 2, rho: 0.9 }), 0).unwrap().dataset;
    let flat = HypothesisCollection::singletons(data.p());
    let config = RunConfig { splits: 8, seed: 31, policy: policy(AdjustmentKind::SingleHolm, false), ..RunConfig::default() };
    let a = run(&data, &flat, &config).unwrap();
    let b = run(&data, &flat, &config).unwrap();
    assert_eq!(a.state, b.state);
    assert_eq!(a.tensor, b.tensor);
    assert_eq!(a.screened, b.screened);
}
