//! Synthetic regression scenarios and FWER / power bookkeeping.

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::AggregationConfig;
use crate::clustering::{complete_linkage, correlation_distance};
use crate::collection::HypothesisCollection;
use crate::dataset::Dataset;
use crate::engine::{pvalue_tensor, run_on_tensor, screen_all, screen_weights};
use crate::error::{Error, Result};
use crate::multiplicity::{AdjustmentKind, AdjustmentPolicy};
use crate::rng::{derive_seed, substream, Domain};
use crate::screening::ScreeningConfig;
use crate::splitting::make_splits;
use crate::tree::ClusterSet;

/// Largest cluster size credited by the second performance score.
pub const PERF2_MAX_SIZE: usize = 20;

fn default_block_size() -> usize {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Design {
    EquiCorr {
        rho: f64,
    },
    /// Independent blocks, equicorrelated within. Defaults to pairs; use
    /// `p / 10` for the large-block variant.
    Blocks {
        #[serde(default = "default_block_size")]
        block_size: usize,
        rho: f64,
    },
}

impl Design {
    pub fn large_blocks(p: usize, rho: f64) -> Self {
        Design::Blocks { block_size: (p / 10).max(1), rho }
    }

    fn block_size(&self) -> Option<usize> {
        match *self {
            Design::EquiCorr { .. } => None,
            Design::Blocks { block_size, .. } => Some(block_size),
        }
    }
}

/// Nonzero coefficient values: a constant or uniform draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaValue {
    Constant(f64),
    Uniform { lo: f64, hi: f64 },
}

impl Default for BetaValue {
    fn default() -> Self {
        BetaValue::Constant(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// Evenly spaced, at the first variable of a block for block designs.
    #[default]
    Spread,
    Random,
}

fn default_runs() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub n: usize,
    pub p: usize,
    pub design: Design,
    pub s0: usize,
    #[serde(default)]
    pub beta_value: BetaValue,
    #[serde(default)]
    pub placement: Placement,
    pub snr: f64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    /// Draw one design and reuse it in every run.
    #[serde(default)]
    pub fix_design: bool,
    /// Draw fresh coefficients (and placement) in every run.
    #[serde(default)]
    pub redraw_beta: bool,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let rho = match self.design {
            Design::EquiCorr { rho } => rho,
            Design::Blocks { block_size, rho } => {
                if block_size == 0 {
                    return Err(Error::InvalidInput("block size must be positive".into()));
                }
                rho
            }
        };
        check_rho(rho)?;
        if self.n < Dataset::MIN_SAMPLES {
            return Err(Error::InvalidInput(format!("n must be at least {}, got {}", Dataset::MIN_SAMPLES, self.n)));
        }
        if self.p == 0 {
            return Err(Error::InvalidInput("p must be positive".into()));
        }
        if self.s0 == 0 || self.s0 > self.p {
            return Err(Error::InvalidInput(format!("s0 must lie in 1..={}, got {}", self.p, self.s0)));
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return Err(Error::InvalidInput(format!("snr must be positive, got {}", self.snr)));
        }
        if self.runs == 0 {
            return Err(Error::InvalidInput("runs must be positive".into()));
        }
        if let BetaValue::Uniform { lo, hi } = self.beta_value {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidInput(format!("invalid uniform coefficient range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn generate_design(&self, seed: u64) -> Result<Array2<f64>> {
        match self.design {
            Design::EquiCorr { rho } => gen_equicorr(self.n, self.p, rho, seed),
            Design::Blocks { block_size, rho } => gen_blocks(self.n, self.p, block_size, rho, seed),
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if (0.0..1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("correlation must lie in [0, 1), got {rho}")))
    }
}

/// Gaussian rows with unit variances and all correlations `rho`.
pub fn gen_equicorr(n: usize, p: usize, rho: f64, seed: u64) -> Result<Array2<f64>> {
    gen_blocks(n, p, p.max(1), rho, seed)
}

/// Gaussian rows, correlation `rho` inside consecutive blocks of
/// `block_size` columns (the last one possibly shorter), zero across.
pub fn gen_blocks(n: usize, p: usize, block_size: usize, rho: f64, seed: u64) -> Result<Array2<f64>> {
    check_rho(rho)?;
    if block_size == 0 {
        return Err(Error::InvalidInput("block size must be positive".into()));
    }
    let mut rng = substream(seed, Domain::Design, 0);
    let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
    let mut x = Array2::zeros((n, p));
    for i in 0..n {
        for start in (0..p).step_by(block_size) {
            let z0: f64 = StandardNormal.sample(&mut rng);
            for j in start..(start + block_size).min(p) {
                let z: f64 = StandardNormal.sample(&mut rng);
                x[[i, j]] = a * z0 + b * z;
            }
        }
    }
    Ok(x)
}

/// Coefficient vector with `s0` nonzero entries and its sorted active set.
pub fn make_beta(
    p: usize,
    s0: usize,
    placement: Placement,
    value: BetaValue,
    block_size: Option<usize>,
    seed: u64,
) -> Result<(Array1<f64>, Vec<usize>)> {
    if s0 > p {
        return Err(Error::InvalidInput(format!("s0 = {s0} exceeds p = {p}")));
    }
    let mut rng = substream(seed, Domain::Coefficients, 0);
    let mut active: Vec<usize> = match placement {
        Placement::Spread => spread_positions(p, s0, block_size),
        Placement::Random => sample(&mut rng, p, s0).into_vec(),
    };
    active.sort_unstable();
    let mut beta = Array1::zeros(p);
    for &j in &active {
        beta[j] = match value {
            BetaValue::Constant(v) => v,
            BetaValue::Uniform { lo, hi } => rng.random_range(lo..hi),
        };
    }
    Ok((beta, active))
}

fn spread_positions(p: usize, s0: usize, block_size: Option<usize>) -> Vec<usize> {
    if let Some(bs) = block_size.filter(|&bs| bs > 1) {
        let blocks = p.div_ceil(bs);
        if s0 <= blocks {
            return (0..s0).map(|i| (i * blocks / s0) * bs).collect();
        }
    }
    (0..s0).map(|i| i * p / s0).collect()
}

/// `σ = ‖Xβ‖ / (√n · snr)`.
pub fn sigma_for_snr(x: ArrayView2<'_, f64>, beta: &Array1<f64>, snr: f64) -> Result<f64> {
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(Error::InvalidInput(format!("snr must be positive, got {snr}")));
    }
    let signal = x.dot(beta);
    let energy = signal.dot(&signal);
    if energy <= 0.0 {
        return Err(Error::InvalidInput("signal X·β is zero".into()));
    }
    Ok((energy / x.nrows() as f64).sqrt() / snr)
}

/// Rejected clusters that hit `s0` and contain no other rejected cluster.
pub fn mtd_set(rejected: &ClusterSet, collection: &HypothesisCollection, s0: &[usize]) -> Result<Vec<usize>> {
    let ids = rejected.to_vec();
    let sets: Vec<&[usize]> = ids.iter().map(|&c| collection.members(c)).collect::<Result<_>>()?;
    let strict_subset = |a: &[usize], b: &[usize]| a.len() < b.len() && a.iter().all(|j| b.binary_search(j).is_ok());
    Ok(ids
        .iter()
        .enumerate()
        .filter(|&(i, _)| sets[i].iter().any(|j| s0.contains(j)))
        .filter(|&(i, _)| !sets.iter().any(|d| strict_subset(d, sets[i])))
        .map(|(_, &c)| c)
        .collect())
}

/// Whether some rejected cluster contains no active variable.
pub fn has_false_rejection(rejected: &ClusterSet, collection: &HypothesisCollection, s0: &[usize]) -> Result<bool> {
    for c in rejected.iter() {
        if !collection.members(c)?.iter().any(|j| s0.contains(j)) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// The two performance scores from the sizes of the MTDs.
pub fn performance_scores(mtd_sizes: &[usize], s0_len: usize) -> Result<(f64, f64)> {
    if s0_len == 0 {
        return Err(Error::InvalidInput("performance needs a nonempty active set".into()));
    }
    let perf1 = mtd_sizes.iter().map(|&s| 1.0 / s as f64).sum::<f64>() / s0_len as f64;
    let perf2 = mtd_sizes
        .iter()
        .filter(|&&s| s <= PERF2_MAX_SIZE)
        .map(|&s| 0.5 * (1.0 / s as f64 + 1.0))
        .sum::<f64>()
        / s0_len as f64;
    Ok((perf1, perf2))
}

/// Methods and engine settings shared by every run of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub methods: Vec<AdjustmentPolicy>,
    pub alpha: f64,
    pub splits: usize,
    pub aggregation: AggregationConfig,
    pub intercept: bool,
    pub screening: ScreeningConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            methods: default_methods(),
            alpha: 0.05,
            splits: 50,
            aggregation: AggregationConfig::default(),
            intercept: false,
            screening: ScreeningConfig::default(),
        }
    }
}

/// Single Bonferroni, single Holm, hierarchical Bonferroni and the
/// inheritance procedure with Shaffer factors.
pub fn default_methods() -> Vec<AdjustmentPolicy> {
    vec![
        AdjustmentPolicy::plain(AdjustmentKind::SingleBonferroni),
        AdjustmentPolicy::plain(AdjustmentKind::SingleHolm),
        AdjustmentPolicy::plain(AdjustmentKind::HierBonferroni),
        AdjustmentPolicy { kind: AdjustmentKind::HierInheritance, shaffer: true },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodOutcome {
    pub method: String,
    pub rejections: usize,
    /// Ids of the rejected clusters, in the method's collection.
    pub rejected: Vec<usize>,
    pub false_rejection: bool,
    pub mtds: usize,
    pub stds: usize,
    pub perf1: f64,
    pub perf2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub run: usize,
    pub sigma: f64,
    pub active: Vec<usize>,
    pub outcomes: Vec<MethodOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub runs: usize,
    pub fwer_count: usize,
    pub fwer: f64,
    pub avg_mtd: f64,
    pub avg_std: f64,
    pub perf1: f64,
    pub perf2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerReport {
    pub schema: &'static str,
    pub scenario: Scenario,
    pub alpha: f64,
    #[serde(rename = "B")]
    pub splits: usize,
    pub methods: Vec<MethodSummary>,
    pub runs: Vec<RunRecord>,
}

impl PowerReport {
    pub fn summary(&self, method: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }
}

/// One simulated dataset together with its truth.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub dataset: Dataset,
    pub beta: Array1<f64>,
    pub active: Vec<usize>,
    pub sigma: f64,
}

/// Draws the data of run `run` of `scenario`.
pub fn simulate_run(scenario: &Scenario, run: usize) -> Result<SimulatedData> {
    scenario.validate()?;
    let seed = scenario.seed;
    let r = run as u64;
    let x = scenario.generate_design(derive_seed(seed, Domain::Design, if scenario.fix_design { 0 } else { r }))?;
    let beta_seed = derive_seed(seed, Domain::Coefficients, if scenario.redraw_beta { r } else { 0 });
    let (beta, active) =
        make_beta(scenario.p, scenario.s0, scenario.placement, scenario.beta_value, scenario.design.block_size(), beta_seed)?;
    let sigma = sigma_for_snr(x.view(), &beta, scenario.snr)?;
    let mut rng = substream(seed, Domain::Noise, r);
    let signal = x.dot(&beta);
    let y = signal.mapv(|s| {
        let e: f64 = StandardNormal.sample(&mut rng);
        s + sigma * e
    });
    Ok(SimulatedData { dataset: Dataset::new(x, y)?, beta, active, sigma })
}

/// Runs every method on one simulated dataset. Screening and the raw
/// p-values are shared by all methods.
pub fn evaluate_run(scenario: &Scenario, config: &StudyConfig, run: usize) -> Result<RunRecord> {
    let data = simulate_run(scenario, run)?;
    let dataset = &data.dataset;
    let split_seed = derive_seed(scenario.seed, Domain::Engine, run as u64);
    let plan = make_splits(dataset.n(), config.splits, split_seed)?;
    let screened = screen_all(dataset, &plan, &config.screening, config.intercept)?;

    let needs_tree = config.methods.iter().any(|m| m.kind.is_hierarchical());
    let needs_flat = config.methods.iter().any(|m| !m.kind.is_hierarchical());
    let flat = HypothesisCollection::singletons(dataset.p());
    let tree = if needs_tree {
        Some(HypothesisCollection::tree(complete_linkage(correlation_distance(dataset.x())?.view())?))
    } else {
        None
    };
    let mut prepared = Vec::new();
    if needs_flat {
        prepared.push((&flat, pvalue_tensor(dataset, &screened, &flat, config.intercept)?, screen_weights(&flat, &screened)));
    }
    if let Some(tree) = &tree {
        prepared.push((tree, pvalue_tensor(dataset, &screened, tree, config.intercept)?, screen_weights(tree, &screened)));
    }

    let outcomes = config
        .methods
        .iter()
        .map(|policy| {
            let (collection, tensor, weights) = prepared
                .iter()
                .find(|(c, _, _)| c.is_tree() == policy.kind.is_hierarchical())
                .expect("collection prepared for every method");
            let state = run_on_tensor(collection, weights, tensor, *policy, &config.aggregation, config.alpha)?;
            let rejected = state.rejected();
            let mtds = mtd_set(rejected, collection, &data.active)?;
            let sizes: Vec<usize> = mtds.iter().map(|&c| collection.members(c).map(<[usize]>::len)).collect::<Result<_>>()?;
            let (perf1, perf2) = performance_scores(&sizes, data.active.len())?;
            Ok(MethodOutcome {
                method: policy.label(),
                rejections: rejected.len(),
                rejected: rejected.to_vec(),
                false_rejection: has_false_rejection(rejected, collection, &data.active)?,
                mtds: sizes.len(),
                stds: sizes.iter().filter(|&&s| s == 1).count(),
                perf1,
                perf2,
            })
        })
        .collect::<Result<_>>()?;
    Ok(RunRecord { run, sigma: data.sigma, active: data.active, outcomes })
}

/// Runs the whole study, in parallel over runs, records in run order.
pub fn run_study(scenario: &Scenario, config: &StudyConfig) -> Result<PowerReport> {
    scenario.validate()?;
    if config.methods.is_empty() {
        return Err(Error::InvalidInput("no methods selected".into()));
    }
    crate::engine::RunConfig {
        alpha: config.alpha,
        splits: config.splits,
        aggregation: config.aggregation,
        ..Default::default()
    }
    .validate()?;
    let records: Vec<RunRecord> =
        (0..scenario.runs).into_par_iter().map(|r| evaluate_run(scenario, config, r)).collect::<Result<_>>()?;
    let runs = records.len() as f64;
    let methods = config
        .methods
        .iter()
        .enumerate()
        .map(|(k, policy)| {
            let outcomes: Vec<&MethodOutcome> = records.iter().map(|r| &r.outcomes[k]).collect();
            let mean = |f: &dyn Fn(&MethodOutcome) -> f64| outcomes.iter().map(|o| f(o)).sum::<f64>() / runs;
            let fwer_count = outcomes.iter().filter(|o| o.false_rejection).count();
            MethodSummary {
                method: policy.label(),
                runs: records.len(),
                fwer_count,
                fwer: fwer_count as f64 / runs,
                avg_mtd: mean(&|o| o.mtds as f64),
                avg_std: mean(&|o| o.stds as f64),
                perf1: mean(&|o| o.perf1),
                perf2: mean(&|o| o.perf2),
            }
        })
        .collect();
    Ok(PowerReport {
        schema: crate::engine::SCHEMA,
        scenario: scenario.clone(),
        alpha: config.alpha,
        splits: config.splits,
        methods,
        runs: records,
    })
}
