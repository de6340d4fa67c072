use crate::config::ArchConfig;
use crate::isa::FuClass;

use super::DynId;

/// An operation occupying a pipelined functional unit. It is in execute stage
/// `Xk` at cycle `x_start + k - 1` and writes back at `done_at`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecOp {
    pub owner: DynId,
    pub class: FuClass,
    pub unit: usize,
    pub issued_at: u64,
    pub x_start: u64,
    pub done_at: u64,
}

impl ExecOp {
    /// 1-based execute stage at `now`, if executing.
    pub fn stage(&self, now: u64) -> Option<u64> {
        (self.x_start <= now && now < self.done_at).then(|| now - self.x_start + 1)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FuUnit {
    last_claim: Option<u64>,
    ops: Vec<ExecOp>,
}

/// All functional units, grouped by class. A unit accepts at most one new
/// operation per cycle and holds each for `latency` stage slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuPool {
    units: Vec<Vec<FuUnit>>,
    latency: [u32; 7],
}

impl FuPool {
    pub fn new(cfg: &ArchConfig) -> Self {
        FuPool {
            units: FuClass::ALL.iter().map(|&c| vec![FuUnit::default(); cfg.units(c)]).collect(),
            latency: cfg.fu_latency,
        }
    }

    pub fn latency(&self, class: FuClass) -> u32 {
        self.latency[class.index()]
    }

    pub fn unit_count(&self, class: FuClass) -> usize {
        self.units[class.index()].len()
    }

    /// Claims the first unit of `class` that has not accepted an operation in
    /// cycle `now`.
    pub fn try_claim(&mut self, class: FuClass, now: u64) -> Option<usize> {
        let units = &mut self.units[class.index()];
        let idx = units.iter().position(|u| u.last_claim != Some(now))?;
        units[idx].last_claim = Some(now);
        Some(idx)
    }

    /// Starts an operation on a previously claimed unit.
    pub fn start(&mut self, owner: DynId, class: FuClass, unit: usize, issued_at: u64, x_start: u64) -> ExecOp {
        let op = ExecOp {
            owner,
            class,
            unit,
            issued_at,
            x_start,
            done_at: x_start + self.latency(class) as u64,
        };
        self.units[class.index()][unit].ops.push(op.clone());
        op
    }

    /// Removes and returns every operation writing back at `now`, oldest
    /// first.
    pub fn take_completing(&mut self, now: u64) -> Vec<ExecOp> {
        let mut out = Vec::new();
        for unit in self.units.iter_mut().flatten() {
            let (done, rest): (Vec<_>, Vec<_>) = unit.ops.drain(..).partition(|op| op.done_at == now);
            unit.ops = rest;
            out.extend(done);
        }
        out.sort_by_key(|op| op.owner);
        out
    }

    /// Puts back an operation taken by [`FuPool::take_completing`] so it
    /// completes at `done_at` instead.
    pub fn postpone(&mut self, mut op: ExecOp, done_at: u64) {
        op.done_at = done_at;
        self.units[op.class.index()][op.unit].ops.push(op);
    }

    pub fn squash_younger(&mut self, owner: DynId) {
        for unit in self.units.iter_mut().flatten() {
            unit.ops.retain(|op| op.owner <= owner);
        }
    }

    pub fn ops(&self) -> impl Iterator<Item = &ExecOp> {
        self.units.iter().flatten().flat_map(|u| u.ops.iter())
    }

    /// Units of `class` holding an operation in flight, or claimed, at `now`.
    pub fn busy_units(&self, class: FuClass, now: u64) -> usize {
        self.units[class.index()]
            .iter()
            .filter(|u| u.last_claim == Some(now) || u.ops.iter().any(|op| op.issued_at <= now && now < op.done_at))
            .count()
    }
}
