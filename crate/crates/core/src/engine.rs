//! The sequential rejection loop.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::aggregation::{adjusted_pvalue, aggregate, AggregationConfig};
use crate::collection::{HypothesisCollection, RejectionState};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::lowdim::TestingHalf;
use crate::multiplicity::{AdjustmentKind, AdjustmentPolicy, Adjuster, ScreenWeights};
use crate::screening::{screen, ScreenedSplit, ScreeningConfig};
use crate::splitting::{make_splits, SplitPlan};
use crate::tree::ClusterSet;

pub const SCHEMA: &str = "seqreject/1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    /// Number of sample splits `B`.
    pub splits: usize,
    pub seed: u64,
    pub policy: AdjustmentPolicy,
    pub aggregation: AggregationConfig,
    pub intercept: bool,
    pub screening: ScreeningConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            alpha: 0.05,
            splits: 50,
            seed: 0,
            policy: AdjustmentPolicy::plain(AdjustmentKind::HierInheritance),
            aggregation: AggregationConfig::default(),
            intercept: false,
            screening: ScreeningConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha must lie in [0, 1), got {}", self.alpha)));
        }
        if self.splits == 0 {
            return Err(Error::InvalidInput("number of splits must be positive".into()));
        }
        self.aggregation.validate()
    }
}

/// Raw p-values `p^{C,(b)}`, one row of `B` values per cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueTensor {
    n_splits: usize,
    values: Vec<f64>,
}

impl PValueTensor {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_splits = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_splits) {
            return Err(Error::Dimension("ragged p-value rows".into()));
        }
        if rows.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidInput("p-values must lie in [0, 1]".into()));
        }
        Ok(PValueTensor { n_splits, values: rows.concat() })
    }

    pub fn n_clusters(&self) -> usize {
        self.values.len().checked_div(self.n_splits).unwrap_or(0)
    }

    pub fn n_splits(&self) -> usize {
        self.n_splits
    }

    pub fn get(&self, c: usize, b: usize) -> f64 {
        self.values[c * self.n_splits + b]
    }

    pub fn row(&self, c: usize) -> &[f64] {
        &self.values[c * self.n_splits..(c + 1) * self.n_splits]
    }
}

/// Screens every split, in parallel, results in split order.
pub fn screen_all(
    dataset: &Dataset,
    plan: &SplitPlan,
    screening: &ScreeningConfig,
    intercept: bool,
) -> Result<Vec<ScreenedSplit>> {
    plan.splits
        .par_iter()
        .enumerate()
        .map(|(b, split)| screen(dataset, b, split, screening, intercept, plan.seed))
        .collect()
}

/// Partial F p-values of every cluster on every screened split.
pub fn pvalue_tensor(
    dataset: &Dataset,
    screened: &[ScreenedSplit],
    collection: &HypothesisCollection,
    intercept: bool,
) -> Result<PValueTensor> {
    if collection.n_variables() != dataset.p() {
        return Err(Error::Dimension(format!(
            "collection covers {} variables, dataset has {}",
            collection.n_variables(),
            dataset.p()
        )));
    }
    let columns: Vec<Vec<f64>> = screened
        .par_iter()
        .map(|split| split_pvalues(dataset, split, collection, intercept))
        .collect::<Result<_>>()?;
    let rows = (0..collection.len()).map(|c| columns.iter().map(|col| col[c]).collect()).collect();
    PValueTensor::from_rows(rows)
}

fn split_pvalues(
    dataset: &Dataset,
    split: &ScreenedSplit,
    collection: &HypothesisCollection,
    intercept: bool,
) -> Result<Vec<f64>> {
    if split.s_hat.is_empty() {
        return Ok(vec![1.0; collection.len()]);
    }
    let half = TestingHalf::new(dataset, split, intercept)?;
    let mut cache: HashMap<Vec<usize>, f64> = HashMap::new();
    (0..collection.len())
        .map(|c| {
            let tested = half.intersect(collection.members(c)?);
            if let Some(&p) = cache.get(&tested) {
                return Ok(p);
            }
            let p = half.test_screened(&tested)?.map_or(1.0, |r| r.p_value);
            cache.insert(tested, p);
            Ok(p)
        })
        .collect()
}

/// Draws the splits, screens them and fills the p-value tensor.
pub fn compute_pvalue_tensor(
    dataset: &Dataset,
    plan: &SplitPlan,
    collection: &HypothesisCollection,
    config: &RunConfig,
) -> Result<(Vec<ScreenedSplit>, PValueTensor)> {
    let screened = screen_all(dataset, plan, &config.screening, config.intercept)?;
    let tensor = pvalue_tensor(dataset, &screened, collection, config.intercept)?;
    Ok((screened, tensor))
}

pub fn screen_weights(collection: &HypothesisCollection, screened: &[ScreenedSplit]) -> Vec<ScreenWeights> {
    screened.iter().map(|s| ScreenWeights::new(collection, &s.s_hat)).collect()
}

/// Aggregated adjusted p-value of cluster `c` given the rejected set.
pub fn aggregated_pvalue(
    adjuster: &Adjuster<'_>,
    c: usize,
    tensor: &PValueTensor,
    weights: &[ScreenWeights],
    aggregation: &AggregationConfig,
) -> Result<f64> {
    let p_tilde = weights
        .iter()
        .enumerate()
        .map(|(b, w)| Ok(adjusted_pvalue(tensor.get(c, b), adjuster.multiplier(c, w)?)))
        .collect::<Result<Vec<f64>>>()?;
    aggregate(&p_tilde, aggregation)
}

/// Clusters outside `rejected` whose aggregated adjusted p-value is at most
/// `alpha`, with that p-value, in id order.
pub fn successor(
    rejected: &ClusterSet,
    tensor: &PValueTensor,
    weights: &[ScreenWeights],
    policy: AdjustmentPolicy,
    aggregation: &AggregationConfig,
    alpha: f64,
    collection: &HypothesisCollection,
) -> Result<Vec<(usize, f64)>> {
    if tensor.n_clusters() != collection.len() || tensor.n_splits() != weights.len() {
        return Err(Error::Dimension("p-value tensor does not match collection and splits".into()));
    }
    let adjuster = Adjuster::new(policy, collection, rejected)?;
    let hierarchy = collection.hierarchy();
    let mut out = Vec::new();
    for c in 0..collection.len() {
        if rejected.contains(c) {
            continue;
        }
        if let Some(h) = hierarchy {
            // Multipliers are infinite until the parent is rejected.
            if h.parent(c)?.is_some_and(|a| !rejected.contains(a)) {
                continue;
            }
        }
        let q = aggregated_pvalue(&adjuster, c, tensor, weights, aggregation)?;
        if q <= alpha {
            out.push((c, q));
        }
    }
    Ok(out)
}

/// Iterates `R_{i+1} = R_i ∪ N(R_i)` from the empty set to the fixpoint.
pub fn run_on_tensor(
    collection: &HypothesisCollection,
    weights: &[ScreenWeights],
    tensor: &PValueTensor,
    policy: AdjustmentPolicy,
    aggregation: &AggregationConfig,
    alpha: f64,
) -> Result<RejectionState> {
    policy.validate_for(collection)?;
    let mut state = RejectionState::new(collection.len());
    for iteration in 1..=collection.len() + 1 {
        let next = successor(state.rejected(), tensor, weights, policy, aggregation, alpha, collection)?;
        if next.is_empty() {
            return Ok(state);
        }
        if iteration > collection.len() {
            break;
        }
        for (c, q) in next {
            state.record(iteration, c, q)?;
        }
    }
    Err(Error::Internal("rejection loop did not reach a fixpoint".into()))
}

/// Everything produced by one analysis.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub screened: Vec<ScreenedSplit>,
    pub tensor: PValueTensor,
    pub state: RejectionState,
}

pub fn run(dataset: &Dataset, collection: &HypothesisCollection, config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    config.policy.validate_for(collection)?;
    let plan = make_splits(dataset.n(), config.splits, config.seed)?;
    let (screened, tensor) = compute_pvalue_tensor(dataset, &plan, collection, config)?;
    let weights = screen_weights(collection, &screened);
    let state = run_on_tensor(collection, &weights, &tensor, config.policy, &config.aggregation, config.alpha)?;
    Ok(RunOutput { screened, tensor, state })
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterReport {
    pub id: usize,
    pub members: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
    pub size: usize,
    pub iteration: usize,
    pub pvalue: f64,
}

/// Serializable result of [`run`].
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub method: String,
    pub shaffer: bool,
    pub alpha: f64,
    #[serde(rename = "B")]
    pub splits: usize,
    pub seed: u64,
    pub intercept: bool,
    pub aggregation: AggregationConfig,
    pub iterations: usize,
    pub clusters: Vec<ClusterReport>,
    pub screened_sizes: Vec<usize>,
}

impl RunReport {
    pub fn new(
        dataset: &Dataset,
        collection: &HypothesisCollection,
        config: &RunConfig,
        output: &RunOutput,
    ) -> Result<Self> {
        let clusters = output
            .state
            .trace()
            .iter()
            .map(|r| {
                let members = collection.members(r.id)?.to_vec();
                let names = dataset.names().map(|_| members.iter().map(|&j| dataset.column_name(j)).collect());
                Ok(ClusterReport { id: r.id, size: members.len(), members, names, iteration: r.iteration, pvalue: r.pvalue })
            })
            .collect::<Result<_>>()?;
        Ok(RunReport {
            schema: SCHEMA,
            method: config.policy.kind.name().to_string(),
            shaffer: config.policy.shaffer,
            alpha: config.alpha,
            splits: config.splits,
            seed: config.seed,
            intercept: config.intercept,
            aggregation: config.aggregation,
            iterations: output.state.iterations(),
            clusters,
            screened_sizes: output.screened.iter().map(|s| s.s_hat.len()).collect(),
        })
    }
}
