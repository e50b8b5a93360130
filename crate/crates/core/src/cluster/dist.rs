use serde::{Deserialize, Serialize};

use super::{ClusterError, Result};
use crate::quantizer::{dequantize, quantize, QuantScheme, QuantizedTensor};
use crate::tensors::{DenseTensor, Label, Mode, Precision};

/// Binary modes that index the shards: `inter` selects the node, `intra`
/// the device within the node. Empty means replicated.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub inter: Vec<Label>,
    pub intra: Vec<Label>,
}

impl Partition {
    pub fn new(inter: Vec<Label>, intra: Vec<Label>) -> Self {
        Partition { inter, intra }
    }

    pub fn replicated() -> Self {
        Partition::default()
    }

    pub fn is_replicated(&self) -> bool {
        self.inter.is_empty() && self.intra.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.inter.len() + self.intra.len()
    }

    pub fn n_shards(&self) -> usize {
        1 << self.rank()
    }

    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        self.inter.iter().chain(&self.intra)
    }

    pub fn contains(&self, label: &Label) -> bool {
        self.labels().any(|l| l == label)
    }

    /// Values of the partition modes held by `device`; inter modes are the
    /// high bits of the device id.
    pub fn values(&self, device: usize) -> Vec<(Label, usize)> {
        let rank = self.rank();
        self.labels().enumerate().map(|(k, l)| (l.clone(), (device >> (rank - 1 - k)) & 1)).collect()
    }
}

/// A tensor split into `2^(N_inter + N_intra)` shards, one per device.
#[derive(Clone, Debug, PartialEq)]
pub struct DistTensor {
    modes: Vec<Mode>,
    partition: Partition,
    shards: Vec<DenseTensor>,
}

/// Bytes moved by one redistribution.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Traffic {
    /// Off-node bytes sent, per source node.
    pub inter_per_node: Vec<u64>,
    /// Off-device bytes sent within a node, per source device.
    pub intra_per_device: Vec<u64>,
    /// Uncompressed float32 bytes of the off-node messages.
    pub inter_raw: u64,
}

impl Traffic {
    pub fn inter_total(&self) -> u64 {
        self.inter_per_node.iter().sum()
    }

    pub fn intra_total(&self) -> u64 {
        self.intra_per_device.iter().sum()
    }

    pub fn inter_max(&self) -> u64 {
        self.inter_per_node.iter().copied().max().unwrap_or(0)
    }

    pub fn intra_max(&self) -> u64 {
        self.intra_per_device.iter().copied().max().unwrap_or(0)
    }
}

impl DistTensor {
    /// Slices a replicated tensor locally; no communication.
    pub fn scatter(global: &DenseTensor, partition: Partition) -> Result<Self> {
        for l in partition.labels() {
            if global.dim_of(l) != Some(2) {
                return Err(ClusterError::InvalidPartition(format!("`{l}` is not a binary mode of the tensor")));
            }
        }
        let mut seen: Vec<&Label> = partition.labels().collect();
        seen.sort();
        seen.dedup();
        if seen.len() != partition.rank() {
            return Err(ClusterError::InvalidPartition("repeated partition mode".into()));
        }
        let shards = (0..partition.n_shards()).map(|d| global.fix(&partition.values(d))).collect::<std::result::Result<_, _>>()?;
        Ok(DistTensor { modes: global.modes().to_vec(), partition, shards })
    }

    /// Builds a distributed tensor from per-device shards.
    pub fn from_shards(modes: Vec<Mode>, partition: Partition, shards: Vec<DenseTensor>) -> Result<Self> {
        if shards.len() != partition.n_shards() {
            return Err(ClusterError::InvalidPartition(format!(
                "{} shards for {} devices",
                shards.len(),
                partition.n_shards()
            )));
        }
        Ok(DistTensor { modes, partition, shards })
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn labels(&self) -> Vec<Label> {
        self.modes.iter().map(|m| m.label.clone()).collect()
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn shards(&self) -> &[DenseTensor] {
        &self.shards
    }

    pub fn shard(&self, device: usize) -> &DenseTensor {
        &self.shards[device]
    }

    pub fn precision(&self) -> Precision {
        self.shards[0].precision()
    }

    pub fn global_len(&self) -> usize {
        self.modes.iter().map(|m| m.dim).product()
    }

    pub fn global_nbytes(&self) -> u64 {
        self.global_len() as u64 * self.precision().complex_bytes()
    }

    pub fn shard_nbytes(&self) -> u64 {
        self.shards[0].nbytes()
    }

    /// Reassembles the global tensor.
    pub fn gather(&self) -> Result<DenseTensor> {
        let blocks: Vec<(Vec<(Label, usize)>, &DenseTensor)> =
            self.shards.iter().enumerate().map(|(d, s)| (self.partition.values(d), s)).collect();
        Ok(DenseTensor::assemble(self.modes.clone(), self.precision(), &blocks)?)
    }

    /// Moves to `target`. Device `d` keeps its physical node `d >> n_intra`,
    /// where `n_intra` is that of the non-replicated side. Messages are routed
    /// in `(src, dst)` order; off-node messages pass through `quant` when set.
    pub fn redistribute(&self, target: Partition, quant: Option<&QuantScheme>) -> Result<(DistTensor, Traffic)> {
        if self.partition.is_replicated() {
            return Ok((DistTensor::scatter(&self.gather()?, target)?, Traffic::default()));
        }
        let grid = &self.partition;
        if !target.is_replicated() && (target.inter.len(), target.intra.len()) != (grid.inter.len(), grid.intra.len()) {
            return Err(ClusterError::InvalidPartition(format!(
                "cannot move from {}+{} to {}+{} partition modes",
                grid.inter.len(),
                grid.intra.len(),
                target.inter.len(),
                target.intra.len()
            )));
        }
        for l in target.labels() {
            if !self.modes.iter().any(|m| &m.label == l && m.dim == 2) {
                return Err(ClusterError::InvalidPartition(format!("`{l}` is not a binary mode of the tensor")));
            }
        }
        let n_dev = grid.n_shards();
        let node_of = |d: usize| d >> grid.intra.len();
        let n_nodes = 1usize << grid.inter.len();
        let dst_modes = |d: usize| -> Vec<Mode> {
            let fixed = if target.is_replicated() { Vec::new() } else { target.values(d) };
            self.modes.iter().filter(|m| !fixed.iter().any(|(l, _)| l == &m.label)).cloned().collect()
        };
        let mut traffic =
            Traffic { inter_per_node: vec![0; n_nodes], intra_per_device: vec![0; n_dev], inter_raw: 0 };
        let mut shards = Vec::with_capacity(n_dev);
        for dst in 0..(if target.is_replicated() { 1 } else { n_dev }) {
            let want = if target.is_replicated() { Vec::new() } else { target.values(dst) };
            let mut out = DenseTensor::zeros(dst_modes(dst), self.precision())?;
            for src in 0..n_dev {
                let have = grid.values(src);
                let consistent =
                    want.iter().all(|(l, v)| have.iter().all(|(hl, hv)| hl != l || hv == v));
                if !consistent {
                    continue;
                }
                let fix: Vec<(Label, usize)> = want.iter().filter(|(l, _)| !grid.contains(l)).cloned().collect();
                let mut block = self.shards[src].fix(&fix)?;
                let receivers: Vec<usize> = if target.is_replicated() { (0..n_dev).collect() } else { vec![dst] };
                for &r in &receivers {
                    if r == src {
                        continue;
                    }
                    if node_of(r) != node_of(src) {
                        traffic.inter_raw += 8 * block.len() as u64;
                        match quant {
                            Some(s) => {
                                let q: QuantizedTensor = quantize(&block, s)?;
                                traffic.inter_per_node[node_of(src)] += q.nbytes() as u64;
                                if r == dst {
                                    block = dequantize(&q)?;
                                }
                            }
                            None => traffic.inter_per_node[node_of(src)] += block.nbytes(),
                        }
                    } else {
                        traffic.intra_per_device[src] += block.nbytes();
                    }
                }
                let place: Vec<(Label, usize)> = have.into_iter().filter(|(l, _)| !target.contains(l)).collect();
                out.write_block(&place, &block)?;
            }
            shards.push(out);
        }
        Ok((DistTensor { modes: self.modes.clone(), partition: target, shards }, traffic))
    }
}
