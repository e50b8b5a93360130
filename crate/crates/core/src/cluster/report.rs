use serde::{Deserialize, Serialize};

use super::buffers::PoolEvent;
use crate::planner::StepType;
use crate::tensors::Label;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommKind {
    Scatter,
    Inter,
    Intra,
    Gather,
}

/// One contraction step. Times are device-seconds, summed over the
/// participating devices; `wall_seconds` is the modeled elapsed time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub subtask: usize,
    pub pass: u8,
    pub step: usize,
    pub step_type: StepType,
    pub on_stem: bool,
    pub comm: Vec<CommKind>,
    /// Per-device flops.
    pub flops: f64,
    pub bytes_inter: u64,
    pub bytes_intra: u64,
    /// Output bytes held by one device.
    pub out_bytes: u64,
    pub buffer: Option<u8>,
    pub t_calc: f64,
    pub t_inter: f64,
    pub t_intra: f64,
    pub wall_seconds: f64,
    pub joules: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecomputeSummary {
    pub start_step: usize,
    pub halving_label: Label,
    pub region_peak_bytes: u64,
    pub baseline_region_peak_bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub n_inter: u32,
    pub n_intra: u32,
    pub effective_n_inter: u32,
    pub devices: usize,
    pub subtasks: usize,
    pub alpha: f64,
    pub beta: f64,
    pub trace: Vec<TraceRow>,
    pub t_calc: f64,
    pub t_inter: f64,
    pub t_intra: f64,
    pub wall_seconds: f64,
    pub energy: f64,
    pub bytes_inter: u64,
    pub bytes_intra: u64,
    /// Compression rate of inter-node traffic in percent, when quantized.
    pub inter_cr: Option<f64>,
    pub fidelity: Option<f64>,
    pub peak_stem_bytes: u64,
    pub stem_buffers_created: usize,
    pub pool_events: Vec<PoolEvent>,
    pub recompute: Option<RecomputeSummary>,
}

impl RunReport {
    /// Totals are the in-order sums of the trace rows.
    pub(crate) fn from_trace(
        trace: Vec<TraceRow>,
        (n_inter, n_intra): (u32, u32),
        subtasks: usize,
        (alpha, beta): (f64, f64),
        inter_cr: Option<f64>,
        pool_events: Vec<PoolEvent>,
        stem_buffers_created: usize,
    ) -> Self {
        let mut r = RunReport {
            n_inter,
            n_intra,
            effective_n_inter: n_inter,
            devices: 1 << (n_inter + n_intra),
            subtasks,
            alpha,
            beta,
            t_calc: 0.0,
            t_inter: 0.0,
            t_intra: 0.0,
            wall_seconds: 0.0,
            energy: 0.0,
            bytes_inter: 0,
            bytes_intra: 0,
            inter_cr,
            fidelity: None,
            peak_stem_bytes: 0,
            stem_buffers_created,
            pool_events,
            recompute: None,
            trace: Vec::new(),
        };
        for row in &trace {
            r.t_calc += row.t_calc;
            r.t_inter += row.t_inter;
            r.t_intra += row.t_intra;
            r.wall_seconds += row.wall_seconds;
            r.bytes_inter += row.bytes_inter;
            r.bytes_intra += row.bytes_intra;
            if row.on_stem {
                r.peak_stem_bytes = r.peak_stem_bytes.max(row.out_bytes);
            }
        }
        r.energy = super::model_energy(r.t_inter + r.t_intra, r.t_calc, alpha, beta);
        r.trace = trace;
        r
    }

    pub fn t_comm(&self) -> f64 {
        self.t_inter + self.t_intra
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}
