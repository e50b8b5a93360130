use serde::{Deserialize, Serialize};

use super::{ClusterError, Result};

/// Machine description. Bandwidths are bytes per second with GB = 1e9 bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterSpec {
    pub nodes: usize,
    pub devices_per_node: usize,
    pub intra_bw: f64,
    pub inter_bw: f64,
    /// Bandwidth utilization in (0, 1].
    pub r: f64,
    /// Communication power, watts.
    pub alpha: f64,
    /// Computation power, watts.
    pub beta: f64,
    /// FLOP/s per device.
    pub compute_rate: f64,
    pub device_mem: u64,
    /// Capacity of each of the two stem buffers.
    pub buffer_capacity: u64,
}

impl Default for ClusterSpec {
    fn default() -> Self {
        ClusterSpec {
            nodes: 1,
            devices_per_node: 1,
            intra_bw: 300e9,
            inter_bw: 100e9,
            r: 0.5,
            alpha: 100.0,
            beta: 300.0,
            compute_rate: 312e12,
            device_mem: 79_000_000_000,
            buffer_capacity: 32 << 20,
        }
    }
}

impl ClusterSpec {
    pub fn new(nodes: usize, devices_per_node: usize) -> Self {
        ClusterSpec { nodes, devices_per_node, ..ClusterSpec::default() }
    }

    pub fn single_device() -> Self {
        ClusterSpec::new(1, 1)
    }

    pub fn devices(&self) -> usize {
        self.nodes * self.devices_per_node
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.intra_bw, self.inter_bw, self.alpha, self.beta, self.compute_rate];
        if self.nodes == 0 || self.devices_per_node == 0 || self.device_mem == 0 || self.buffer_capacity == 0 {
            return Err(ClusterError::InvalidSpec("counts and capacities must be positive".into()));
        }
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(ClusterError::InvalidSpec("bandwidths, powers and compute rate must be positive".into()));
        }
        if !(self.r > 0.0 && self.r <= 1.0) {
            return Err(ClusterError::InvalidSpec(format!("utilization {} outside (0, 1]", self.r)));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ClusterSpec = serde_json::from_str(text).map_err(|e| ClusterError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// All-to-all time among `n` participants: `(data / bw) * n / (n - 1) / r`.
pub fn model_all2all_time(data_bytes: f64, bandwidth: f64, n: usize, r: f64) -> Result<f64> {
    if n < 2 {
        return Err(ClusterError::TooFewParticipants(n));
    }
    if !(bandwidth > 0.0) || !(r > 0.0 && r <= 1.0) {
        return Err(ClusterError::InvalidSpec(format!("bandwidth {bandwidth} or utilization {r} out of range")));
    }
    Ok(data_bytes / bandwidth * (n as f64 / (n as f64 - 1.0)) / r)
}

/// Energy `alpha * t_comm + beta * t_calc`.
pub fn model_energy(t_comm: f64, t_calc: f64, alpha: f64, beta: f64) -> f64 {
    alpha * t_comm + beta * t_calc
}
