//! Serializable run records. A solver trace streams as JSON Lines: one
//! `meta` line, then `iter` and `probe` lines as they are produced, closed
//! by a single `summary` line. The schema is versioned by
//! [`TRACE_SCHEMA_VERSION`] carried on the meta and summary lines.

use serde::{Deserialize, Serialize};

use crate::oracle::OracleCounts;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Init,
    HillClimb,
    Sgd,
    Stop,
}

/// One outer iteration: the iterate it ended on, the phase that settled it,
/// and how much probing it took. `h_val` is the stochastic-gradient
/// reference value in force during the iteration (the previous accepted
/// surrogate value). `seed_state` is an opaque RNG position token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub i: u64,
    pub eps_i: f64,
    pub phase: Phase,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub f_val: f64,
    pub h_val: f64,
    pub accepted: bool,
    pub inner_k: Option<u64>,
    pub probes_used: u64,
    pub restarts_used: u64,
    pub seed_state: String,
}

/// One probe or inner SGD step. For hill-climb probes `k` is `None`; for
/// SGD inner steps `k` is the step index and the end-of-restart acceptance
/// check carries `k = None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub i: u64,
    pub phase: Phase,
    pub j: u64,
    pub k: Option<u64>,
    pub x: Vec<f64>,
    pub f: f64,
    pub h: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaRecord {
    pub schema_version: u32,
    pub problem: String,
    pub eps: f64,
    pub sigma: f64,
    pub preset: String,
    pub seed: u64,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    /// Problem parameters as written in the config (`name -> value` text).
    #[serde(default)]
    pub params: std::collections::BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub schema_version: u32,
    pub i_star: u64,
    pub eps_star: f64,
    pub x_star: Vec<f64>,
    pub y_star: Vec<f64>,
    pub f_star: f64,
    pub oracle_calls: OracleCounts,
}

/// A single JSONL trace line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceLine {
    Meta(MetaRecord),
    Iter(IterationRecord),
    Probe(ProbeRecord),
    Summary(SummaryRecord),
}
