use serde::{Deserialize, Serialize};

use crate::barycenter::BarycenterParams;
use crate::error::{Error, Result};
use crate::measure::Order;
use crate::transport::{OtMode, SinkhornParams};

/// Which multilevel formulation to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Multilevel Wasserstein means.
    Mwm,
    /// Multilevel means with local atoms drawn from one shared set.
    Mwms,
    /// Multilevel means with per-group context vectors.
    Mwmc,
    /// Multilevel geometric median (order-1 costs).
    Mwgm,
    /// Three-stage K-means baseline.
    #[serde(rename = "tsk")]
    ThreeStage,
}

impl Variant {
    pub fn order(self) -> Order {
        match self {
            Variant::Mwgm => Order::One,
            _ => Order::Two,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Mwm => "mwm",
            Variant::Mwms => "mwms",
            Variant::Mwmc => "mwmc",
            Variant::Mwgm => "mwgm",
            Variant::ThreeStage => "tsk",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mwm" => Ok(Variant::Mwm),
            "mwms" => Ok(Variant::Mwms),
            "mwmc" => Ok(Variant::Mwmc),
            "mwgm" => Ok(Variant::Mwgm),
            "tsk" | "three-stage" => Ok(Variant::ThreeStage),
            other => Err(Error::InvalidParameter(format!("unknown variant {other:?}"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Weight of the global term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lambda {
    /// Balance the two terms once, right after initialization.
    Auto,
    Value(f64),
}

impl std::str::FromStr for Lambda {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Lambda::Auto);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("lambda must be 'auto' or a number, got {s:?}")))?;
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be nonnegative, got {v}")));
        }
        Ok(Lambda::Value(v))
    }
}

/// How each group's own transport cost enters the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalScale {
    /// `W(G_j, P_j)` against the normalized empirical measure.
    Mean,
    /// `n_j · W(G_j, P_j)`, i.e. the summed squared error over the group.
    Count,
}

/// Everything a fit needs except the data and the worker pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub variant: Variant,
    /// Atom budget `k` of every local measure.
    pub local_atoms: usize,
    /// Number of global clusters `M`.
    pub global_clusters: usize,
    /// Size `K` of the shared atom set (sharing variant only).
    pub shared_atoms: usize,
    pub lambda: Lambda,
    pub mode: OtMode,
    /// Cap `L` on the support of every global measure.
    pub support_cap: usize,
    /// Relative objective change that ends the outer loop.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub local_scale: LocalScale,
    /// Inner barycenter solves.
    pub inner: BarycenterParams,
}

impl FitConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            local_atoms: 5,
            global_clusters: 5,
            shared_atoms: 50,
            lambda: Lambda::Auto,
            mode: OtMode::entropic(10.0),
            support_cap: 10,
            tol: 1e-6,
            max_iter: 100,
            seed: 0,
            local_scale: LocalScale::Mean,
            inner: BarycenterParams {
                // Far-apart blocks with mismatched masses make Sinkhorn crawl;
                // every comparison uses the same capped solver, so descent holds.
                sinkhorn: SinkhornParams {
                    max_iter: 1000,
                    tol: 1e-6,
                    ..SinkhornParams::default()
                },
                weight_max_iter: 20,
                max_iter: 5,
                allow_unconverged: true,
                median_tol: 1e-7,
                median_max_iter: 200,
                ..BarycenterParams::default()
            },
        }
    }

    pub fn order(&self) -> Order {
        self.variant.order()
    }

    pub fn validate(&self) -> Result<()> {
        if self.local_atoms == 0 || self.global_clusters == 0 || self.support_cap == 0 {
            return Err(Error::InvalidParameter("k, M and L must all be at least 1".into()));
        }
        if self.variant == Variant::Mwms && self.shared_atoms == 0 {
            return Err(Error::InvalidParameter("K must be at least 1".into()));
        }
        if let OtMode::Entropic { tau, .. } = self.mode {
            if !(tau > 0.0) || !tau.is_finite() {
                return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
            }
        }
        if let Lambda::Value(v) = self.lambda {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("lambda must be nonnegative, got {v}")));
            }
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidParameter("tol must be nonnegative".into()));
        }
        Ok(())
    }
}
