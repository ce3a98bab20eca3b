//! Hypothesis collections and the record of sequential rejections.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tree::{ClusterHierarchy, ClusterSet};

/// The clusters under test: either all singletons `{0}, …, {p-1}` or every
/// node of a cluster tree.
///
/// Singletons go through the same navigation surface with no ancestors and
/// no offspring, so adjustment policies can treat both kinds uniformly.
#[derive(Debug, Clone)]
pub enum HypothesisCollection {
    Singletons { members: Vec<Vec<usize>> },
    Tree(ClusterHierarchy),
}

impl HypothesisCollection {
    pub fn singletons(p: usize) -> Self {
        HypothesisCollection::Singletons { members: (0..p).map(|j| vec![j]).collect() }
    }

    pub fn tree(h: ClusterHierarchy) -> Self {
        HypothesisCollection::Tree(h)
    }

    pub fn len(&self) -> usize {
        match self {
            HypothesisCollection::Singletons { members } => members.len(),
            HypothesisCollection::Tree(h) => h.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_variables(&self) -> usize {
        match self {
            HypothesisCollection::Singletons { members } => members.len(),
            HypothesisCollection::Tree(h) => h.n_variables(),
        }
    }

    pub fn is_tree(&self) -> bool {
        matches!(self, HypothesisCollection::Tree(_))
    }

    pub fn hierarchy(&self) -> Option<&ClusterHierarchy> {
        match self {
            HypothesisCollection::Tree(h) => Some(h),
            HypothesisCollection::Singletons { .. } => None,
        }
    }

    pub fn members(&self, id: usize) -> Result<&[usize]> {
        match self {
            HypothesisCollection::Singletons { members } => {
                members.get(id).map(Vec::as_slice).ok_or(Error::UnknownNode(id))
            }
            HypothesisCollection::Tree(h) => h.members(id),
        }
    }

    pub fn ancestors(&self, id: usize) -> Result<Vec<usize>> {
        match self {
            HypothesisCollection::Singletons { .. } => self.members(id).map(|_| Vec::new()),
            HypothesisCollection::Tree(h) => h.ancestors(id),
        }
    }

    pub fn offspring(&self, id: usize) -> Result<Vec<usize>> {
        match self {
            HypothesisCollection::Singletons { .. } => self.members(id).map(|_| Vec::new()),
            HypothesisCollection::Tree(h) => h.offspring(id),
        }
    }

    pub fn empty_set(&self) -> ClusterSet {
        ClusterSet::empty(self.len())
    }
}

/// One rejection event.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    pub iteration: usize,
    pub id: usize,
    /// Aggregated adjusted p-value at the iteration of rejection.
    pub pvalue: f64,
}

/// Rejected set together with the order in which it grew.
///
/// Iterations in the trace never decrease and the rejected set equals the
/// ids in the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectionState {
    rejected: ClusterSet,
    trace: Vec<Rejection>,
}

impl RejectionState {
    pub fn new(universe: usize) -> Self {
        RejectionState { rejected: ClusterSet::empty(universe), trace: Vec::new() }
    }

    pub fn rejected(&self) -> &ClusterSet {
        &self.rejected
    }

    pub fn trace(&self) -> &[Rejection] {
        &self.trace
    }

    pub fn iterations(&self) -> usize {
        self.trace.last().map_or(0, |r| r.iteration)
    }

    pub fn record(&mut self, iteration: usize, id: usize, pvalue: f64) -> Result<()> {
        if self.trace.last().is_some_and(|last| last.iteration > iteration) {
            return Err(Error::Internal(format!("iteration {iteration} recorded after a later one")));
        }
        if id >= self.rejected.universe() || !self.rejected.insert(id) {
            return Err(Error::Internal(format!("cluster {id} rejected twice or unknown")));
        }
        self.trace.push(Rejection { iteration, id, pvalue });
        Ok(())
    }
}
