//! Sequential rejection testing of variable groups in high-dimensional
//! linear regression.
//!
//! Observations are split repeatedly in halves. The Lasso screens variables
//! on one half, partial F-tests on the other half give p-values for every
//! cluster of a hierarchy, and the p-values are combined across splits with
//! multiplicity factors that shrink as rejections accumulate.
//!
//! ```
//! use ndarray::{Array1, Array2};
//! use seqreject::{run, AdjustmentKind, AdjustmentPolicy, Dataset, HypothesisCollection, RunConfig};
//!
//! let x = Array2::from_shape_fn((40, 3), |(i, j)| ((i * 7 + j * 13) % 11) as f64 + j as f64 * (i % 3) as f64);
//! let y = Array1::from_shape_fn(40, |i| 3.0 * x[[i, 0]] + ((i * 5) % 7) as f64 * 0.1);
//! let data = Dataset::new(x, y).unwrap();
//! let config = RunConfig {
//!     splits: 5,
//!     policy: AdjustmentPolicy::plain(AdjustmentKind::SingleBonferroni),
//!     ..RunConfig::default()
//! };
//! let out = run(&data, &HypothesisCollection::singletons(3), &config).unwrap();
//! assert!(out.state.rejected().contains(0));
//! ```

pub mod aggregation;
pub mod clustering;
pub mod collection;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod fdist;
pub mod lasso;
pub mod linalg;
pub mod lowdim;
pub mod multiplicity;
pub mod rng;
pub mod screening;
pub mod simulation;
pub mod splitting;
pub mod tree;

pub use aggregation::AggregationConfig;
pub use clustering::{complete_linkage, correlation_distance, Linkage};
pub use collection::{HypothesisCollection, Rejection, RejectionState};
pub use dataset::Dataset;
pub use engine::{run, PValueTensor, RunConfig, RunOutput, RunReport};
pub use error::{Error, Result};
pub use multiplicity::{AdjustmentKind, AdjustmentPolicy};
pub use screening::{ScreenedSplit, ScreeningConfig};
pub use simulation::{PowerReport, Scenario, StudyConfig};
pub use splitting::{make_splits, SplitPlan};
pub use tree::{ClusterHierarchy, ClusterSet};
