//! Multilevel clustering of grouped data with optimal transport.
//!
//! Groups of points are summarized by discrete measures, and those measures
//! are clustered in Wasserstein space. The crate provides the transport
//! solvers (entropic and exact), Wasserstein barycenters, weighted geometric
//! medians, K-means, the multilevel fitting algorithms, clustering metrics
//! and synthetic data generators.

pub mod barycenter;
pub mod error;
pub mod io;
pub mod kmeans;
pub mod lp;
pub mod measure;
pub mod median;
pub mod metrics;
pub mod multilevel;
pub mod runtime;
pub mod synth;
pub mod transport;

pub use error::{Error, Result};
pub use measure::{DiscreteMeasure, GroupedDataset, Order};
pub use multilevel::{fit, FitConfig, FittedModel, MultilevelState, Variant};
pub use runtime::Runtime;
pub use transport::OtMode;
