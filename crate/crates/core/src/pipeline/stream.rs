use crate::config::{ArchConfig, SpecPolicy, StreamMode};
use crate::isa::{Instruction, Program};

use crate::microstate::DynId;

/// The dynamic instruction stream the front end is expected to follow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stream {
    pub mode: StreamMode,
    pub program_len: usize,
    /// Forced-loop only: number of dynamic instructions that will commit.
    pub total: Option<usize>,
}

pub fn build_stream(prog: &Program, cfg: &ArchConfig) -> Stream {
    let total = match cfg.stream_mode {
        StreamMode::ForcedLoop => Some(prog.len() * cfg.iterations),
        StreamMode::Semantic => None,
    };
    Stream { mode: cfg.stream_mode, program_len: prog.len(), total }
}

impl Stream {
    /// Static index of stream element `d` (forced-loop).
    pub fn static_at(&self, d: DynId) -> usize {
        d % self.program_len
    }

    /// Static indices of the whole forced-loop stream.
    pub fn statics(&self) -> Option<Vec<usize>> {
        self.total.map(|t| (0..t).map(|d| self.static_at(d)).collect())
    }

    /// Static index that follows stream element `d`, or `None` at the end of
    /// the stream (forced-loop).
    pub fn successor(&self, d: DynId) -> Option<usize> {
        let total = self.total?;
        (d + 1 < total).then(|| self.static_at(d + 1))
    }

    /// `None` once `index` falls off the end of the program.
    pub fn in_program(&self, index: i64) -> Option<usize> {
        (0..self.program_len as i64).contains(&index).then_some(index as usize)
    }
}

/// Whether a branch is predicted taken.
pub fn predict_taken(inst: &Instruction, policy: SpecPolicy) -> bool {
    match policy {
        SpecPolicy::AlwaysTaken => true,
        SpecPolicy::BackwardTaken => inst.op3 <= 0,
    }
}
