//! Distributed training: partition workers, collectives, model merging,
//! and the end-to-end pipelines for all five methods.

mod harness;
mod merge;
mod pipeline;
pub mod wire;

use std::time::Duration;

pub use harness::{Exchange, ProtocolCounters, WorkerPool};
pub use merge::{compute_feature_weights, naive_average, owa_merge, project_models};
pub use pipeline::run_pipeline;

use crate::error::{Error, Result};
use crate::objective::ModelVector;
use crate::util::log_space;

/// The merge strategies: plain averaging, weighted averaging fit on a merge
/// set, the full two-round centroid-augmented feature-reweighted scheme,
/// and its two single-component ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Naive,
    Owa,
    Acowa,
    AcowaCentroidOnly,
    AcowaFwOnly,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::Owa => "owa",
            Method::Acowa => "acowa",
            Method::AcowaCentroidOnly => "acowa_centroid_only",
            Method::AcowaFwOnly => "acowa_fw_only",
        }
    }

    pub fn all() -> [Method; 5] {
        [
            Method::Naive,
            Method::Owa,
            Method::Acowa,
            Method::AcowaCentroidOnly,
            Method::AcowaFwOnly,
        ]
    }
}

/// How the merge set is formed: the main worker's own partition (n/p rows)
/// or a fresh sample of min(n/p, p*n/d) rows from the full data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergePolicy {
    PaperMin,
    MainPartition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub method: Method,
    pub p: usize,
    pub beta: f64,
    pub lambda_cv_grid: Vec<f64>,
    pub cv_folds: usize,
    pub merge_set_policy: MergePolicy,
    pub seed: u64,
}

impl MethodSpec {
    pub fn new(method: Method, p: usize, seed: u64) -> Self {
        MethodSpec {
            method,
            p,
            beta: 1.0,
            lambda_cv_grid: log_space(1e-4, 1e2, 10),
            cv_folds: 5,
            merge_set_policy: MergePolicy::MainPartition,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 1 {
            return Err(Error::InvalidConfig("p must be at least 1".into()));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "beta must be a nonnegative real, got {}",
                self.beta
            )));
        }
        if self.lambda_cv_grid.is_empty() {
            return Err(Error::InvalidConfig("empty lambda_cv grid".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::InvalidConfig(format!(
                "cv_folds must be at least 2, got {}",
                self.cv_folds
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Round {
    Round1,
    Round2,
}

/// The p partition models, one column each.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMatrix {
    pub columns: Vec<ModelVector>,
    pub source_round: Round,
}

impl ModelMatrix {
    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn dim(&self) -> usize {
        self.columns.first().map_or(0, ModelVector::dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::InvalidConfig("model matrix needs p >= 1".into()));
        }
        let d = self.dim();
        for col in &self.columns {
            if col.dim() != d {
                return Err(Error::DimMismatch {
                    expected: d,
                    found: col.dim(),
                });
            }
        }
        Ok(())
    }
}

/// Per-feature penalty scales derived from round-1 support.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWeights {
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub support_fraction: Vec<f64>,
}

/// Wall-clock per pipeline stage, measured on the orchestrating thread.
/// Stages a method does not execute stay zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunTimings {
    pub centroids: Duration,
    pub all_to_all: Duration,
    pub round1: Duration,
    pub gather1: Duration,
    pub alpha: Duration,
    pub round2: Duration,
    pub gather2: Duration,
    pub merge: Duration,
    pub total: Duration,
}

impl RunTimings {
    /// Stage rows for the benchmark table, in execution order. The final
    /// merge fit is reported as "Round 3".
    pub fn stage_rows(&self) -> [(&'static str, Duration); 9] {
        [
            ("Centroids", self.centroids),
            ("All-to-all", self.all_to_all),
            ("Round 1", self.round1),
            ("Model gather", self.gather1),
            ("Compute alpha", self.alpha),
            ("Round 2", self.round2),
            ("Model gather", self.gather2),
            ("Round 3", self.merge),
            ("Total", self.total),
        ]
    }
}

/// What the pipeline reports beyond the model itself.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub final_nnz: usize,
    /// nnz of each partition model entering the merge.
    pub partition_nnz: Vec<usize>,
    /// Ridge strength the merge chose; None for naive averaging.
    pub chosen_lambda_cv: Option<f64>,
    pub counters: ProtocolCounters,
    /// Partitions that held only one class (solved anyway, worth knowing).
    pub single_class_partitions: Vec<usize>,
    /// Rows in the merge set; 0 for naive averaging, which has none.
    pub merge_set_rows: usize,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub model: ModelVector,
    pub timings: RunTimings,
    pub diagnostics: Diagnostics,
}
