use serde::{Deserialize, Serialize};

use super::{ClusterError, Result};
use crate::planner::StepType;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolOp {
    Create,
    Alloc,
    Release,
}

/// One allocator action. Offsets of stem and split allocations are relative
/// to their buffer; common offsets are relative to the arena.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolEvent {
    pub op: PoolOp,
    pub step_type: StepType,
    pub buffer: Option<u8>,
    pub offset: u64,
    pub bytes: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BufferHandle {
    Stem { buffer: u8 },
    Split { chunk: usize },
    Common { offset: u64, bytes: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Chunk {
    buffer: u8,
    offset: u64,
    bytes: u64,
    live: bool,
}

/// Static memory for one device: two fixed stem buffers used in ping-pong
/// order, split chunks carved from the top of those buffers and kept once
/// carved, and a bump arena for common tensors.
#[derive(Clone, Debug)]
pub struct BufferPool {
    capacity: u64,
    created: [bool; 2],
    output: u8,
    stem_used: [u64; 2],
    chunks: Vec<Chunk>,
    arena_live: u64,
    arena_peak: u64,
    arena_top: u64,
    events: Vec<PoolEvent>,
}

impl BufferPool {
    pub fn new(capacity: u64) -> Self {
        BufferPool {
            capacity,
            created: [false; 2],
            output: 0,
            stem_used: [0; 2],
            chunks: Vec::new(),
            arena_live: 0,
            arena_peak: 0,
            arena_top: 0,
            events: Vec::new(),
        }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn events(&self) -> &[PoolEvent] {
        &self.events
    }

    pub fn stem_buffers_created(&self) -> usize {
        self.created.iter().filter(|c| **c).count()
    }

    pub fn arena_peak(&self) -> u64 {
        self.arena_peak
    }

    /// Buffer that the next stem allocation writes to.
    pub fn output_buffer(&self) -> u8 {
        self.output
    }

    fn create(&mut self, buffer: u8) {
        if !self.created[buffer as usize] {
            self.created[buffer as usize] = true;
            self.events.push(PoolEvent { op: PoolOp::Create, step_type: StepType::Stem, buffer: Some(buffer), offset: 0, bytes: self.capacity });
        }
    }

    /// Creates both stem buffers up front.
    pub fn reserve_stem_buffers(&mut self) {
        self.create(0);
        self.create(1);
    }

    /// Lowest offset taken by a carved chunk in `buffer`.
    fn chunk_floor(&self, buffer: u8) -> u64 {
        self.chunks.iter().filter(|c| c.buffer == buffer).map(|c| c.offset).min().unwrap_or(self.capacity)
    }

    pub fn alloc(&mut self, step_type: StepType, bytes: u64) -> Result<BufferHandle> {
        match step_type {
            StepType::Stem => {
                let b = self.output;
                let room = self.chunk_floor(b);
                if bytes > room {
                    return Err(ClusterError::BufferOverflow { step_type, requested: bytes, available: room });
                }
                self.create(b);
                self.stem_used[b as usize] = bytes;
                self.events.push(PoolEvent { op: PoolOp::Alloc, step_type, buffer: Some(b), offset: 0, bytes });
                Ok(BufferHandle::Stem { buffer: b })
            }
            StepType::Split => {
                let reuse = self
                    .chunks
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| !c.live && c.bytes >= bytes)
                    .min_by_key(|(k, c)| (c.bytes, *k))
                    .map(|(k, _)| k);
                let k = match reuse {
                    Some(k) => k,
                    None => {
                        let (b, free) = (0..2u8)
                            .filter(|&b| self.created[b as usize])
                            .map(|b| (b, self.chunk_floor(b).saturating_sub(self.stem_used[b as usize])))
                            .max_by_key(|&(b, free)| (free, std::cmp::Reverse(b)))
                            .ok_or(ClusterError::BufferOverflow { step_type, requested: bytes, available: 0 })?;
                        if bytes > free {
                            let largest_free =
                                self.chunks.iter().filter(|c| !c.live).map(|c| c.bytes).max().unwrap_or(0).max(free);
                            return Err(ClusterError::BufferOverflow { step_type, requested: bytes, available: largest_free });
                        }
                        let offset = self.chunk_floor(b) - bytes;
                        self.chunks.push(Chunk { buffer: b, offset, bytes, live: false });
                        self.chunks.len() - 1
                    }
                };
                let c = &mut self.chunks[k];
                c.live = true;
                self.events.push(PoolEvent { op: PoolOp::Alloc, step_type, buffer: Some(c.buffer), offset: c.offset, bytes });
                Ok(BufferHandle::Split { chunk: k })
            }
            StepType::Common => {
                let offset = self.arena_top;
                self.arena_top += bytes;
                self.arena_live += bytes;
                self.arena_peak = self.arena_peak.max(self.arena_live);
                self.events.push(PoolEvent { op: PoolOp::Alloc, step_type, buffer: None, offset, bytes });
                Ok(BufferHandle::Common { offset, bytes })
            }
        }
    }

    /// Split chunks return to the chunk table; common bytes leave the arena.
    /// Stem buffers are never released.
    pub fn release(&mut self, handle: BufferHandle) {
        match handle {
            BufferHandle::Stem { .. } => {}
            BufferHandle::Split { chunk } => {
                let c = &mut self.chunks[chunk];
                c.live = false;
                self.events.push(PoolEvent {
                    op: PoolOp::Release,
                    step_type: StepType::Split,
                    buffer: Some(c.buffer),
                    offset: c.offset,
                    bytes: c.bytes,
                });
            }
            BufferHandle::Common { offset, bytes } => {
                self.arena_live -= bytes;
                if self.arena_live == 0 {
                    self.arena_top = 0;
                }
                self.events.push(PoolEvent { op: PoolOp::Release, step_type: StepType::Common, buffer: None, offset, bytes });
            }
        }
    }

    pub fn swap_stem_buffers(&mut self) {
        self.output ^= 1;
    }

    /// Starts a new subtask: the next stem output goes to buffer 0 again.
    /// Buffers and carved chunks are kept.
    pub fn begin_subtask(&mut self) {
        self.output = 0;
    }
}
