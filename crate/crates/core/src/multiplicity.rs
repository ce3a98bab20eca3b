//! Multiplicity adjustments `m_C(R)` for one sample split.
//!
//! Every adjustment takes the screened set of the split through its cluster
//! weights `w_C = |Ŝ ∩ C|` and returns a factor in `[1, ∞]`, with `∞`
//! meaning the cluster cannot currently be rejected.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::collection::HypothesisCollection;
use crate::error::{Error, Result};
use crate::tree::{ClusterHierarchy, ClusterSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AdjustmentKind {
    SingleBonferroni,
    SingleHolm,
    HierBonferroni,
    HierInheritance,
}

impl AdjustmentKind {
    pub const ALL: [AdjustmentKind; 4] = [
        AdjustmentKind::SingleBonferroni,
        AdjustmentKind::SingleHolm,
        AdjustmentKind::HierBonferroni,
        AdjustmentKind::HierInheritance,
    ];

    pub fn is_hierarchical(self) -> bool {
        matches!(self, AdjustmentKind::HierBonferroni | AdjustmentKind::HierInheritance)
    }

    /// Command-line name.
    pub fn name(self) -> &'static str {
        match self {
            AdjustmentKind::SingleBonferroni => "single-bonf",
            AdjustmentKind::SingleHolm => "single-holm",
            AdjustmentKind::HierBonferroni => "hier-bonf",
            AdjustmentKind::HierInheritance => "hier-inherit",
        }
    }
}

impl fmt::Display for AdjustmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AdjustmentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AdjustmentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown method {s:?}")))
    }
}

/// An adjustment rule, optionally multiplied by the Shaffer factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjustmentPolicy {
    pub kind: AdjustmentKind,
    pub shaffer: bool,
}

impl AdjustmentPolicy {
    /// Shaffer factors exist only for the inheritance procedure; for the
    /// hierarchical Bonferroni rule the factor is identically one and for the
    /// single-variable rules it is not defined here.
    pub fn new(kind: AdjustmentKind, shaffer: bool) -> Result<Self> {
        if shaffer && kind != AdjustmentKind::HierInheritance {
            return Err(Error::PolicyMismatch(format!("Shaffer improvement is only available with hier-inherit, not {kind}")));
        }
        Ok(AdjustmentPolicy { kind, shaffer })
    }

    pub fn plain(kind: AdjustmentKind) -> Self {
        AdjustmentPolicy { kind, shaffer: false }
    }

    /// Checks that the policy fits the collection it will run on.
    pub fn validate_for(&self, collection: &HypothesisCollection) -> Result<()> {
        match (self.kind.is_hierarchical(), collection) {
            (true, HypothesisCollection::Singletons { .. }) => {
                Err(Error::PolicyMismatch(format!("{} needs a cluster tree", self.kind)))
            }
            (false, HypothesisCollection::Tree(_)) => {
                Err(Error::PolicyMismatch(format!("{} needs the singleton collection", self.kind)))
            }
            (true, HypothesisCollection::Tree(h)) if self.shaffer && !h.is_binary() => {
                Err(Error::PolicyMismatch("Shaffer factors are implemented for binary trees only".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        if self.shaffer {
            format!("{}+shaffer", self.kind)
        } else {
            self.kind.to_string()
        }
    }
}

/// Screened mass of every cluster for one split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScreenWeights {
    /// `|Ŝ|`
    pub total: usize,
    /// `|Ŝ ∩ C|` indexed by cluster id.
    pub weights: Vec<usize>,
}

impl ScreenWeights {
    pub fn new(collection: &HypothesisCollection, s_hat: &[usize]) -> Self {
        let p = collection.n_variables();
        let mut screened = vec![false; p];
        for &j in s_hat {
            screened[j] = true;
        }
        let weights = match collection {
            HypothesisCollection::Singletons { .. } => screened.iter().map(|&s| s as usize).collect(),
            HypothesisCollection::Tree(h) => {
                let mut w = vec![0usize; h.len()];
                for &id in h.postorder() {
                    let node = &h.nodes()[id];
                    w[id] = if node.children.is_empty() {
                        screened[node.members[0]] as usize
                    } else {
                        node.children.iter().map(|&c| w[c]).sum()
                    };
                }
                w
            }
        };
        ScreenWeights { total: s_hat.len(), weights }
    }

    pub fn of(&self, id: usize) -> usize {
        self.weights[id]
    }
}

/// `m = |Ŝ|`, whatever has been rejected.
pub fn m_single_bonferroni(w: &ScreenWeights) -> f64 {
    if w.total == 0 {
        f64::INFINITY
    } else {
        w.total as f64
    }
}

/// `m = |{j ∈ Ŝ : {j} ∉ R}|`, floored at one. Ids are variable indices.
pub fn m_single_holm(rejected: &ClusterSet, w: &ScreenWeights) -> f64 {
    let open = w.weights.iter().enumerate().filter(|&(id, &wj)| wj > 0 && !rejected.contains(id)).count();
    open.max(1) as f64
}

fn ancestors_rejected(h: &ClusterHierarchy, c: usize, rejected: &ClusterSet) -> Result<bool> {
    Ok(h.ancestor_iter(c)?.all(|a| rejected.contains(a)))
}

/// Hierarchical Bonferroni: `∞` until all ancestors are rejected, then
/// `|Ŝ| / |Ŝ ∩ C|` (or 1 when `C` misses `Ŝ`).
pub fn m_hier_bonferroni(h: &ClusterHierarchy, c: usize, rejected: &ClusterSet, w: &ScreenWeights) -> Result<f64> {
    if !ancestors_rejected(h, c, rejected)? {
        return Ok(f64::INFINITY);
    }
    Ok(match w.of(c) {
        0 => 1.0,
        wc => w.total as f64 / wc as f64,
    })
}

/// Inherited share `n_D(R)`: screened mass of the non-extinct children of
/// `D` relative to the screened mass of `D`. One when `D` misses `Ŝ`.
pub fn inheritance_share(h: &ClusterHierarchy, d: usize, extinct: &ClusterSet, w: &ScreenWeights) -> Result<f64> {
    let wd = w.of(d);
    if wd == 0 {
        return Ok(1.0);
    }
    let live: usize = h.children(d)?.iter().filter(|&&e| !extinct.contains(e)).map(|&e| w.of(e)).sum();
    Ok(live as f64 / wd as f64)
}

/// Inheritance procedure: the hierarchical Bonferroni factor times the
/// inherited shares of all ancestors. `R` must be ancestor-closed.
pub fn m_inheritance(h: &ClusterHierarchy, c: usize, rejected: &ClusterSet, w: &ScreenWeights) -> Result<f64> {
    h.check_ancestor_closed(rejected)?;
    let extinct = h.extinct_branches(rejected);
    m_inheritance_with(h, c, rejected, &extinct, w)
}

fn m_inheritance_with(
    h: &ClusterHierarchy,
    c: usize,
    rejected: &ClusterSet,
    extinct: &ClusterSet,
    w: &ScreenWeights,
) -> Result<f64> {
    if !ancestors_rejected(h, c, rejected)? {
        return Ok(f64::INFINITY);
    }
    let wc = w.of(c);
    if wc == 0 {
        return Ok(1.0);
    }
    let mut m = w.total as f64 / wc as f64;
    for d in h.ancestor_iter(c)? {
        let share = inheritance_share(h, d, extinct, w)?;
        if share == 0.0 {
            // No screened mass left to inherit from.
            return Ok(f64::INFINITY);
        }
        m *= share;
    }
    Ok(m)
}

/// Shaffer factor for binary trees: `|Ŝ∩C| / (|Ŝ∩C| + |Ŝ∩si(C)|)` when `C`
/// is unrejected and its sibling is an unrejected leaf, otherwise 1.
pub fn shaffer_factor_binary(h: &ClusterHierarchy, c: usize, rejected: &ClusterSet, w: &ScreenWeights) -> Result<f64> {
    let Some(parent) = h.parent(c)? else {
        return Ok(1.0);
    };
    if h.children(parent)?.len() != 2 {
        return Err(Error::PolicyMismatch(format!("node {parent} is not binary")));
    }
    if rejected.contains(c) {
        return Ok(1.0);
    }
    let siblings = h.siblings(c)?;
    for &s in &siblings {
        if !h.is_leaf(s)? || rejected.contains(s) {
            return Ok(1.0);
        }
    }
    let wc = w.of(c);
    let wsi: usize = siblings.iter().map(|&s| w.of(s)).sum();
    if wc == 0 {
        return Ok(1.0);
    }
    Ok(wc as f64 / (wc + wsi) as f64)
}

/// Evaluates a policy for a fixed rejected set, caching what only depends
/// on that set.
pub struct Adjuster<'a> {
    policy: AdjustmentPolicy,
    collection: &'a HypothesisCollection,
    rejected: &'a ClusterSet,
    extinct: Option<ClusterSet>,
}

impl<'a> Adjuster<'a> {
    pub fn new(policy: AdjustmentPolicy, collection: &'a HypothesisCollection, rejected: &'a ClusterSet) -> Result<Self> {
        policy.validate_for(collection)?;
        if rejected.universe() != collection.len() {
            return Err(Error::Dimension(format!(
                "rejected set spans {} clusters, collection has {}",
                rejected.universe(),
                collection.len()
            )));
        }
        let extinct = match (policy.kind, collection) {
            (AdjustmentKind::HierInheritance, HypothesisCollection::Tree(h)) => {
                h.check_ancestor_closed(rejected)?;
                Some(h.extinct_branches(rejected))
            }
            _ => None,
        };
        Ok(Adjuster { policy, collection, rejected, extinct })
    }

    /// `m_C(R)` for one split, Shaffer factor included when enabled.
    pub fn multiplier(&self, c: usize, w: &ScreenWeights) -> Result<f64> {
        let base = match (self.policy.kind, self.collection) {
            (AdjustmentKind::SingleBonferroni, _) => m_single_bonferroni(w),
            (AdjustmentKind::SingleHolm, _) => m_single_holm(self.rejected, w),
            (AdjustmentKind::HierBonferroni, HypothesisCollection::Tree(h)) => m_hier_bonferroni(h, c, self.rejected, w)?,
            (AdjustmentKind::HierInheritance, HypothesisCollection::Tree(h)) => {
                m_inheritance_with(h, c, self.rejected, self.extinct.as_ref().expect("built in new"), w)?
            }
            _ => unreachable!("validated in Adjuster::new"),
        };
        if self.policy.shaffer && base.is_finite() {
            let h = self.collection.hierarchy().expect("validated in Adjuster::new");
            return Ok(base * shaffer_factor_binary(h, c, self.rejected, w)?);
        }
        Ok(base)
    }
}

/// One-off evaluation of `m_C(R)` under `policy`.
pub fn adjust(
    policy: AdjustmentPolicy,
    collection: &HypothesisCollection,
    c: usize,
    rejected: &ClusterSet,
    w: &ScreenWeights,
) -> Result<f64> {
    Adjuster::new(policy, collection, rejected)?.multiplier(c, w)
}
