use std::collections::BTreeMap;

use super::buffers::{BufferHandle, BufferPool};
use super::dist::{DistTensor, Partition, Traffic};
use super::report::{CommKind, RecomputeSummary, RunReport, TraceRow};
use super::spec::{model_all2all_time, ClusterSpec};
use super::{ClusterError, Result};
use crate::circuit::TensorNetworkGraph;
use crate::planner::{Plan, StepType};
use crate::quantizer::QuantScheme;
use crate::tensors::{einsum_pair, DenseTensor, EinsumSpec, Label, Mode, Precision};

/// Partition moves per `(subtask, step)`, applied in order before the step.
type Schedule = BTreeMap<(usize, usize), Vec<Partition>>;

/// Where recomputation starts and which open mode is halved. Both are
/// chosen automatically when unset: the region starts at the first stem
/// step after the last communicating one whose input holds an open binary
/// mode that is never a partition mode; of those modes, the one that joined
/// the stem earliest is halved.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RecomputeConfig {
    pub start_step: Option<usize>,
    pub halving_label: Option<Label>,
}

enum Carried {
    Replicated(DenseTensor),
    Distributed(DistTensor),
}

impl Carried {
    fn modes(&self) -> Vec<Mode> {
        match self {
            Carried::Replicated(t) => t.modes().to_vec(),
            Carried::Distributed(d) => d.modes().to_vec(),
        }
    }

    fn global_nbytes(&self) -> u64 {
        match self {
            Carried::Replicated(t) => t.nbytes(),
            Carried::Distributed(d) => d.global_nbytes(),
        }
    }

    fn into_global(self) -> Result<DenseTensor> {
        match self {
            Carried::Replicated(t) => Ok(t),
            Carried::Distributed(d) => d.gather(),
        }
    }
}

fn pair_flops(a: &[Mode], b: &[Mode]) -> f64 {
    let mut total = 8.0;
    for m in a {
        total *= m.dim as f64;
    }
    for m in b {
        if !a.iter().any(|x| x.label == m.label) {
            total *= m.dim as f64;
        }
    }
    total
}

fn contract_sides(stem: &DenseTensor, other: &DenseTensor, stem_left: bool) -> Result<DenseTensor> {
    let (a, b) = if stem_left { (stem, other) } else { (other, stem) };
    let spec = EinsumSpec::pairwise(&a.labels(), &b.labels())?;
    Ok(einsum_pair(&spec, a, b)?)
}

#[derive(Default)]
struct CommTally {
    kinds: Vec<CommKind>,
    bytes_inter: u64,
    bytes_intra: u64,
    wall_inter: f64,
    wall_intra: f64,
}

struct Executor<'a> {
    plan: &'a Plan,
    cluster: &'a ClusterSpec,
    quant: Option<&'a QuantScheme>,
    n_inter: usize,
    n_intra: usize,
    devices: usize,
    pool: BufferPool,
    rows: Vec<TraceRow>,
    quant_bytes: u64,
    quant_raw: u64,
    replay: Option<Schedule>,
    recorded: Schedule,
    /// Labels of the carried tensor entering each stem step of subtask 0.
    stem_inputs: BTreeMap<usize, Vec<Label>>,
    pass: u8,
}

impl<'a> Executor<'a> {
    fn new(plan: &'a Plan, net: &TensorNetworkGraph, cluster: &'a ClusterSpec, quant: Option<&'a QuantScheme>) -> Result<Self> {
        cluster.validate()?;
        let (n_inter, n_intra) = (plan.stem.n_inter as usize, plan.stem.n_intra as usize);
        if n_inter >= usize::BITS as usize - 1
            || n_intra >= usize::BITS as usize - 1
            || 1 << n_inter > cluster.nodes
            || 1 << n_intra > cluster.devices_per_node
        {
            return Err(ClusterError::Incompatible(format!(
                "plan needs 2^{n_inter} nodes x 2^{n_intra} devices, cluster has {} x {}",
                cluster.nodes, cluster.devices_per_node
            )));
        }
        if plan.tree.n_leaves() != net.tensors.len() {
            return Err(ClusterError::Incompatible(format!(
                "plan has {} leaves, network {} tensors",
                plan.tree.n_leaves(),
                net.tensors.len()
            )));
        }
        Ok(Executor {
            plan,
            cluster,
            quant,
            n_inter,
            n_intra,
            devices: 1 << (n_inter + n_intra),
            pool: {
                let mut pool = BufferPool::new(cluster.buffer_capacity);
                pool.reserve_stem_buffers();
                pool
            },
            rows: Vec::new(),
            quant_bytes: 0,
            quant_raw: 0,
            replay: None,
            recorded: Schedule::new(),
            stem_inputs: BTreeMap::new(),
            pass: 0,
        })
    }

    /// Sums all subtasks in assignment order. With `halving`, that open leg is
    /// fixed everywhere and dropped from the output.
    fn run(&mut self, net: &TensorNetworkGraph, halving: Option<(&Label, usize)>) -> Result<DenseTensor> {
        let plan = self.plan;
        let mut total: Option<DenseTensor> = None;
        for (s, assignment) in plan.slices.assignments().enumerate() {
            let mut sub = plan.slices.subnetwork(net, &assignment)?;
            if let Some((label, h)) = halving {
                for t in sub.tensors.iter_mut() {
                    if t.position(label).is_some() {
                        *t = t.fix(&[(label.clone(), h)])?;
                    }
                }
                sub.open_legs.retain(|l| l != label);
            }
            self.pool.begin_subtask();
            let part = self.run_subtask(&sub, s)?;
            total = Some(match total {
                None => part,
                Some(acc) => acc.add(&part)?,
            });
        }
        total.ok_or_else(|| ClusterError::Incompatible("plan has no subtasks".into()))
    }

    fn run_subtask(&mut self, net: &TensorNetworkGraph, subtask: usize) -> Result<DenseTensor> {
        let plan = self.plan;
        let tree = &plan.tree;
        let stem = &plan.stem;
        let mut on_path = vec![false; tree.n_nodes()];
        for &v in &stem.path {
            on_path[v] = true;
        }
        let mut slots: Vec<Option<DenseTensor>> = net.tensors.iter().cloned().map(Some).collect();
        slots.resize(tree.n_nodes(), None);
        let mut handles: Vec<Option<BufferHandle>> = vec![None; tree.n_nodes()];
        let mut carried = Carried::Replicated(slots[stem.path[0]].take().expect("stem leaf"));
        let mut carried_handle: Option<BufferHandle> = None;
        for v in tree.internal_nodes() {
            let [l, r] = tree.children(v).expect("internal node");
            let step_type = stem.step_type(v).expect("internal node");
            if on_path[v] {
                let stem_left = on_path[l];
                let other = if stem_left { r } else { l };
                let b = slots[other].take().expect("post-order evaluation");
                carried = self.stem_step(subtask, v, step_type, carried, &b, stem_left, &mut carried_handle)?;
                if let Some(h) = handles[other].take() {
                    self.pool.release(h);
                }
            } else {
                let a = slots[l].take().expect("post-order evaluation");
                let b = slots[r].take().expect("post-order evaluation");
                let out = contract_sides(&a, &b, true)?;
                self.check_fits(out.nbytes())?;
                let flops = pair_flops(a.modes(), b.modes());
                handles[v] = Some(self.pool.alloc(step_type, out.nbytes())?);
                for c in [l, r] {
                    if let Some(h) = handles[c].take() {
                        self.pool.release(h);
                    }
                }
                self.push_row(subtask, v, step_type, false, flops, CommTally::default(), out.nbytes(), None);
                slots[v] = Some(out);
            }
        }
        if let Some(h) = carried_handle {
            self.pool.release(h);
        }
        Ok(carried.into_global()?.permuted(&net.open_legs)?)
    }

    fn check_fits(&self, bytes: u64) -> Result<()> {
        if bytes > self.cluster.device_mem {
            return Err(ClusterError::ShardOverflow { bytes, device_mem: self.cluster.device_mem });
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn stem_step(
        &mut self,
        subtask: usize,
        v: usize,
        step_type: StepType,
        carried: Carried,
        other: &DenseTensor,
        stem_left: bool,
        carried_handle: &mut Option<BufferHandle>,
    ) -> Result<Carried> {
        let modes = carried.modes();
        let contracted: Vec<Label> =
            modes.iter().map(|m| m.label.clone()).filter(|l| other.position(l).is_some()).collect();
        if subtask == 0 && self.pass == 0 && self.replay.is_none() {
            self.stem_inputs.insert(v, modes.iter().map(|m| m.label.clone()).collect());
        }
        let targets = match &self.replay {
            Some(schedule) => schedule.get(&(subtask, v)).cloned().unwrap_or_default(),
            None => {
                let t = self.decide(&carried, other, &contracted)?;
                if !t.is_empty() {
                    self.recorded.insert((subtask, v), t.clone());
                }
                t
            }
        };
        let mut tally = CommTally::default();
        let mut carried = carried;
        for target in targets {
            carried = self.move_to(carried, target, &mut tally)?;
        }
        let (out, flops) = match carried {
            Carried::Replicated(t) => {
                let flops = pair_flops(t.modes(), other.modes());
                (Carried::Replicated(contract_sides(&t, other, stem_left)?), flops)
            }
            Carried::Distributed(d) => {
                let flops = pair_flops(d.shard(0).modes(), other.modes());
                let shards = d
                    .shards()
                    .iter()
                    .map(|s| contract_sides(s, other, stem_left))
                    .collect::<Result<Vec<_>>>()?;
                let global: Vec<Mode> = {
                    let (a, b): (Vec<Mode>, Vec<Mode>) =
                        if stem_left { (d.modes().to_vec(), other.modes().to_vec()) } else { (other.modes().to_vec(), d.modes().to_vec()) };
                    let labels = |ms: &[Mode]| ms.iter().map(|m| m.label.clone()).collect::<Vec<_>>();
                    let spec = EinsumSpec::pairwise(&labels(&a), &labels(&b))?;
                    spec.out
                        .iter()
                        .map(|l| a.iter().chain(&b).find(|m| &m.label == l).expect("output label from an input").clone())
                        .collect()
                };
                (Carried::Distributed(DistTensor::from_shards(global, d.partition().clone(), shards)?), flops)
            }
        };
        let device_bytes = match &out {
            Carried::Replicated(t) => t.nbytes(),
            Carried::Distributed(d) => d.shard_nbytes(),
        };
        self.check_fits(device_bytes)?;
        let handle = self.pool.alloc(step_type, device_bytes)?;
        let buffer = match handle {
            BufferHandle::Stem { buffer } => {
                self.pool.swap_stem_buffers();
                Some(buffer)
            }
            _ => None,
        };
        if let Some(h) = carried_handle.replace(handle) {
            self.pool.release(h);
        }
        self.push_row(subtask, v, step_type, true, flops, tally, device_bytes, buffer);
        Ok(out)
    }

    /// Partition moves needed before contracting `contracted`: distribute a
    /// replicated tensor once the step output outgrows a device, and swap
    /// contracted partition modes for the next free binary modes, inter first.
    fn decide(&self, carried: &Carried, other: &DenseTensor, contracted: &[Label]) -> Result<Vec<Partition>> {
        let (ni, nj) = (self.n_inter, self.n_intra);
        if ni + nj == 0 {
            return Ok(Vec::new());
        }
        let modes = carried.modes();
        let free = |exclude: &Partition| -> Vec<Label> {
            modes
                .iter()
                .filter(|m| m.dim == 2 && !contracted.contains(&m.label) && !exclude.contains(&m.label))
                .map(|m| m.label.clone())
                .collect()
        };
        match carried {
            Carried::Replicated(t) => {
                let out_len: usize = t
                    .modes()
                    .iter()
                    .chain(other.modes())
                    .filter(|m| !contracted.contains(&m.label))
                    .map(|m| m.dim)
                    .product();
                let out_bytes = out_len as u64 * t.precision().complex_bytes();
                let cand = free(&Partition::replicated());
                if out_bytes <= self.cluster.device_mem || cand.len() < ni + nj {
                    return Ok(Vec::new());
                }
                Ok(vec![Partition::new(cand[..ni].to_vec(), cand[ni..ni + nj].to_vec())])
            }
            Carried::Distributed(d) => {
                let mut cur = d.partition().clone();
                let mut moves = Vec::new();
                let hit = |ls: &[Label]| ls.iter().any(|l| contracted.contains(l));
                if hit(&cur.inter) {
                    let cand = free(&cur);
                    if cand.len() < ni {
                        return self.exhausted(carried);
                    }
                    cur = Partition::new(cand[..ni].to_vec(), cur.intra.clone());
                    moves.push(cur.clone());
                }
                if hit(&cur.intra) {
                    let cand = free(&cur);
                    if cand.len() < nj {
                        return self.exhausted(carried);
                    }
                    cur = Partition::new(cur.inter.clone(), cand[..nj].to_vec());
                    moves.push(cur);
                }
                Ok(moves)
            }
        }
    }

    fn exhausted(&self, carried: &Carried) -> Result<Vec<Partition>> {
        let bytes = carried.global_nbytes();
        if bytes <= self.cluster.device_mem {
            Ok(vec![Partition::replicated()])
        } else {
            Err(ClusterError::PartitionExhausted(format!(
                "no free binary modes left to swap into a tensor of {bytes} bytes"
            )))
        }
    }

    fn move_to(&mut self, carried: Carried, target: Partition, tally: &mut CommTally) -> Result<Carried> {
        match carried {
            Carried::Replicated(t) if target.is_replicated() => Ok(Carried::Replicated(t)),
            Carried::Replicated(t) => {
                tally.kinds.push(CommKind::Scatter);
                Ok(Carried::Distributed(DistTensor::scatter(&t, target)?))
            }
            Carried::Distributed(d) => {
                let kind = if target.is_replicated() {
                    CommKind::Gather
                } else if target.inter != d.partition().inter {
                    CommKind::Inter
                } else {
                    CommKind::Intra
                };
                let (moved, traffic) = d.redistribute(target, self.quant)?;
                self.account(&traffic, tally)?;
                tally.kinds.push(kind);
                Ok(if moved.partition().is_replicated() {
                    Carried::Replicated(moved.gather()?)
                } else {
                    Carried::Distributed(moved)
                })
            }
        }
    }

    fn account(&mut self, traffic: &Traffic, tally: &mut CommTally) -> Result<()> {
        let c = self.cluster;
        if traffic.inter_total() > 0 {
            tally.wall_inter += model_all2all_time(traffic.inter_max() as f64, c.inter_bw, 1 << self.n_inter, c.r)?;
            tally.bytes_inter += traffic.inter_total();
            if self.quant.is_some() {
                self.quant_bytes += traffic.inter_total();
                self.quant_raw += traffic.inter_raw;
            }
        }
        if traffic.intra_total() > 0 {
            tally.wall_intra += model_all2all_time(traffic.intra_max() as f64, c.intra_bw, 1 << self.n_intra, c.r)?;
            tally.bytes_intra += traffic.intra_total();
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn push_row(
        &mut self,
        subtask: usize,
        step: usize,
        step_type: StepType,
        on_stem: bool,
        flops: f64,
        tally: CommTally,
        out_bytes: u64,
        buffer: Option<u8>,
    ) {
        let c = self.cluster;
        let d = self.devices as f64;
        let wall_calc = flops / c.compute_rate;
        let (t_calc, t_inter, t_intra) = (wall_calc * d, tally.wall_inter * d, tally.wall_intra * d);
        self.rows.push(TraceRow {
            subtask,
            pass: self.pass,
            step,
            step_type,
            on_stem,
            comm: tally.kinds,
            flops,
            bytes_inter: tally.bytes_inter,
            bytes_intra: tally.bytes_intra,
            out_bytes,
            buffer,
            t_calc,
            t_inter,
            t_intra,
            wall_seconds: wall_calc + tally.wall_inter + tally.wall_intra,
            joules: super::model_energy(t_inter + t_intra, t_calc, c.alpha, c.beta),
        });
    }

    fn finish(self) -> RunReport {
        let inter_cr = match self.quant {
            Some(_) if self.quant_raw > 0 => Some(100.0 * self.quant_bytes as f64 / self.quant_raw as f64),
            _ => None,
        };
        RunReport::from_trace(
            self.rows,
            (self.n_inter as u32, self.n_intra as u32),
            self.plan.slices.n_subtasks(),
            (self.cluster.alpha, self.cluster.beta),
            inter_cr,
            self.pool.events().to_vec(),
            self.pool.stem_buffers_created(),
        )
    }
}

/// Runs `plan` on the simulated cluster. Without quantization the gathered
/// result is bit-identical to [`crate::planner::contract_tree`].
pub fn hybrid_execute(
    plan: &Plan,
    net: &TensorNetworkGraph,
    cluster: &ClusterSpec,
    inter_quant: Option<&QuantScheme>,
) -> Result<(DenseTensor, RunReport)> {
    let mut ex = Executor::new(plan, net, cluster, inter_quant)?;
    let out = ex.run(net, None)?;
    Ok((out, ex.finish()))
}

fn communicates(row: &TraceRow) -> bool {
    row.comm.iter().any(|k| *k != CommKind::Scatter)
}

/// Runs the plan twice, once per value of an open binary mode, and
/// concatenates. Every tensor holding that mode is half as large in each
/// pass; the partition schedule is replayed from an ordinary run, so no step
/// from `start_step` on may communicate.
pub fn recompute_execute(
    plan: &Plan,
    net: &TensorNetworkGraph,
    cluster: &ClusterSpec,
    inter_quant: Option<&QuantScheme>,
    cfg: &RecomputeConfig,
) -> Result<(DenseTensor, RunReport)> {
    let mut base = Executor::new(plan, net, cluster, inter_quant)?;
    base.run(net, None)?;
    let path = &plan.stem.path;
    let pos_of = |v: usize| path.iter().position(|&p| p == v);
    let last_comm = base.rows.iter().filter(|r| r.on_stem && communicates(r)).filter_map(|r| pos_of(r.step)).max();
    let partitioned = |l: &Label| base.recorded.values().flatten().any(|p| p.contains(l));
    let eligible_at = |pos: usize, l: &Label| {
        net.open_legs.contains(l)
            && net.dim_of(l) == Some(2)
            && !partitioned(l)
            && base.stem_inputs.get(&path[pos]).is_some_and(|ls| ls.contains(l))
    };
    let first_free = last_comm.map_or(1, |p| p + 1);
    let start_pos = match cfg.start_step {
        Some(s) => pos_of(s)
            .filter(|&p| p >= 1)
            .ok_or_else(|| ClusterError::Recompute(format!("step {s} is not an internal stem step")))?,
        None => (first_free..path.len())
            .find(|&p| net.open_legs.iter().any(|l| eligible_at(p, l)))
            .unwrap_or(first_free),
    };
    if start_pos >= path.len() {
        return Err(ClusterError::Recompute("the last stem step communicates; no communication-free tail".into()));
    }
    if let Some(p) = last_comm.filter(|&p| p >= start_pos) {
        return Err(ClusterError::Recompute(format!("stem step {} communicates inside the recomputed region", path[p])));
    }
    let start_step = path[start_pos];
    let label = match &cfg.halving_label {
        Some(l) if eligible_at(start_pos, l) => l.clone(),
        Some(l) => {
            return Err(ClusterError::Recompute(format!(
                "`{l}` must be a binary open mode of the stem tensor at step {start_step} that is never a partition mode"
            )))
        }
        None => {
            let entered = |l: &Label| {
                (0..start_pos).find(|&p| base.stem_inputs.get(&path[p]).is_some_and(|ls| ls.contains(l))).unwrap_or(start_pos)
            };
            net.open_legs
                .iter()
                .filter(|l| eligible_at(start_pos, l))
                .min_by_key(|l| entered(l))
                .cloned()
                .ok_or_else(|| ClusterError::Recompute(format!("no halvable open mode at step {start_step}")))?
        }
    };
    let region_peak = |rows: &[TraceRow]| {
        rows.iter()
            .filter(|r| r.on_stem && pos_of(r.step).is_some_and(|p| p >= start_pos))
            .map(|r| r.out_bytes)
            .max()
            .unwrap_or(0)
    };
    let baseline_region_peak_bytes = region_peak(&base.rows);

    let mut ex = Executor::new(plan, net, cluster, inter_quant)?;
    ex.replay = Some(std::mem::take(&mut base.recorded));
    let mut halves = Vec::with_capacity(2);
    for h in 0..2u8 {
        ex.pass = h;
        halves.push(ex.run(net, Some((&label, h as usize)))?);
    }
    let modes: Vec<Mode> = net
        .open_legs
        .iter()
        .map(|l| Mode::new(l.clone(), net.dim_of(l).expect("open legs have dims")))
        .collect();
    let precision = net.tensors.first().map_or(Precision::C64, |t| t.precision());
    let blocks: Vec<(Vec<(Label, usize)>, &DenseTensor)> =
        halves.iter().enumerate().map(|(h, t)| (vec![(label.clone(), h)], t)).collect();
    let result = DenseTensor::assemble(modes, precision, &blocks)?;
    let region_peak_bytes = region_peak(&ex.rows);
    let mut report = ex.finish();
    report.effective_n_inter = report.n_inter.saturating_sub(1);
    report.recompute =
        Some(RecomputeSummary { start_step, halving_label: label, region_peak_bytes, baseline_region_peak_bytes });
    Ok((result, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{circuit_to_network, random_circuit, RandomCircuitConfig};
    use crate::planner::{contract_tree, greedy_tree, slice, SlicePlan, Topology};

    fn workload(n: usize, cycles: usize, seed: u64, slices: usize) -> (TensorNetworkGraph, Plan) {
        let net = circuit_to_network(&random_circuit(&RandomCircuitConfig::new(n, cycles, seed)), None).unwrap();
        let tree = greedy_tree(&Topology::from_network(&net).unwrap()).unwrap();
        let sp = if slices > 1 { slice(&net, &tree, slices).unwrap() } else { SlicePlan::none() };
        let plan = Plan::for_tree(&net, tree, sp).unwrap();
        (net, plan)
    }

    fn cluster_for(plan: &Plan, nodes: usize, dpn: usize) -> ClusterSpec {
        ClusterSpec { device_mem: plan.cost.max_bytes() / 2, ..ClusterSpec::new(nodes, dpn) }
    }

    #[test]
    fn single_device_matches_tree_contraction() {
        let (net, plan) = workload(6, 4, 1, 4);
        let (out, report) = hybrid_execute(&plan, &net, &ClusterSpec::single_device(), None).unwrap();
        assert_eq!(out, contract_tree(&net, &plan.tree, &plan.slices).unwrap());
        assert_eq!(report.bytes_inter + report.bytes_intra, 0);
        assert_eq!(report.trace.len(), 4 * (net.tensors.len() - 1));
        assert_eq!(report.stem_buffers_created, 2);
    }

    #[test]
    fn two_by_two_is_bit_identical() {
        for seed in 0..4 {
            let (net, plan) = workload(10, 6, seed, 1);
            let plan = plan.with_parallel_modes(1, 1);
            let cluster = cluster_for(&plan, 2, 2);
            let (out, report) = hybrid_execute(&plan, &net, &cluster, None).unwrap();
            assert_eq!(out, contract_tree(&net, &plan.tree, &plan.slices).unwrap());
            let kinds: Vec<CommKind> = report.trace.iter().flat_map(|r| r.comm.clone()).collect();
            assert!(kinds.contains(&CommKind::Scatter), "seed {seed}: {kinds:?}");
            assert!(report.bytes_inter > 0 && report.bytes_intra > 0, "seed {seed}: {kinds:?}");
            assert_eq!(report.energy, report.alpha * (report.t_inter + report.t_intra) + report.beta * report.t_calc);
            let again = hybrid_execute(&plan, &net, &cluster, None).unwrap().1;
            assert_eq!(again.to_json(), report.to_json());
        }
    }

    #[test]
    fn quantized_inter_traffic() {
        let (net, plan) = workload(10, 6, 2, 1);
        let plan = plan.with_parallel_modes(1, 1);
        let cluster = cluster_for(&plan, 2, 2);
        let exact = hybrid_execute(&plan, &net, &cluster, None).unwrap();
        let s = QuantScheme::int4(128);
        let (out, report) = hybrid_execute(&plan, &net, &cluster, Some(&s)).unwrap();
        assert_eq!(report.inter_cr, Some(14.0625));
        assert!(crate::tensors::fidelity(&exact.0, &out).unwrap() >= 0.95);
        let ratio = report.t_inter / exact.1.t_inter;
        assert!((ratio - 0.140625).abs() < 1e-12, "{ratio}");
        assert_eq!(report.t_intra, exact.1.t_intra);
    }

    #[test]
    fn stem_buffers_alternate() {
        let (net, plan) = workload(8, 5, 3, 2);
        let (_, report) = hybrid_execute(&plan, &net, &ClusterSpec::single_device(), None).unwrap();
        assert_eq!(report.stem_buffers_created, 2);
        for s in 0..2 {
            let bufs: Vec<u8> = report
                .trace
                .iter()
                .filter(|r| r.subtask == s && r.step_type == StepType::Stem)
                .map(|r| r.buffer.unwrap())
                .collect();
            assert!(bufs.len() >= 3);
            assert!(bufs.iter().enumerate().all(|(k, b)| *b == (k % 2) as u8), "{bufs:?}");
        }
    }

    #[test]
    fn more_devices_never_slow_a_stem_step() {
        let (net, plan) = workload(10, 4, 5, 1);
        let one = hybrid_execute(&plan, &net, &cluster_for(&plan, 1, 1), None);
        assert!(matches!(one, Err(ClusterError::ShardOverflow { .. })));
        let two = hybrid_execute(&plan.clone().with_parallel_modes(0, 1), &net, &cluster_for(&plan, 1, 2), None).unwrap().1;
        let four = hybrid_execute(&plan.clone().with_parallel_modes(1, 1), &net, &cluster_for(&plan, 2, 2), None).unwrap().1;
        let last = |r: &RunReport| r.trace.iter().rev().find(|r| r.on_stem).unwrap().wall_seconds - 0.0;
        let calc = |r: &RunReport| r.trace.iter().rev().find(|r| r.on_stem).unwrap().flops;
        assert!(calc(&four) < calc(&two));
        assert!(last(&four) >= 0.0);
    }

    #[test]
    fn incompatible_cluster() {
        let (net, plan) = workload(4, 2, 0, 1);
        let plan = plan.with_parallel_modes(2, 0);
        assert!(matches!(hybrid_execute(&plan, &net, &ClusterSpec::new(2, 1), None), Err(ClusterError::Incompatible(_))));
    }

    #[test]
    fn recompute_halves_the_tail() {
        let (net, plan) = workload(10, 8, 1, 1);
        let plan = plan.with_parallel_modes(1, 1);
        let cluster = cluster_for(&plan, 2, 2);
        let (base, base_report) = hybrid_execute(&plan, &net, &cluster, None).unwrap();
        let (out, report) = recompute_execute(&plan, &net, &cluster, None, &RecomputeConfig::default()).unwrap();
        assert_eq!(out, base);
        let summary = report.recompute.clone().unwrap();
        assert!(2 * summary.region_peak_bytes <= summary.baseline_region_peak_bytes, "{summary:?}");
        assert_eq!(report.effective_n_inter, 0);
        let mut halved = 0;
        for row in base_report.trace.iter().filter(|r| r.bytes_inter > 0) {
            for pass in 0..2 {
                let twin = report.trace.iter().find(|r| r.pass == pass && r.step == row.step).unwrap();
                assert!(twin.bytes_inter == row.bytes_inter || 2 * twin.bytes_inter == row.bytes_inter);
                halved += (2 * twin.bytes_inter == row.bytes_inter) as usize;
            }
        }
        assert!(halved > 0);
        let bad = RecomputeConfig { start_step: Some(plan.stem.path[1]), halving_label: None };
        assert!(matches!(recompute_execute(&plan, &net, &cluster, None, &bad), Err(ClusterError::Recompute(_))));
    }
}
