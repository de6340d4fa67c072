//! Hardware structures tracked by the simulator: physical registers, Register
//! Map, Free Pool, Instruction Window, Reorder Buffer, load/store queues,
//! functional units and data memory.

pub mod fu;
pub mod lsq;
pub mod memory;
pub mod regs;
pub mod rob;
pub mod window;

use thiserror::Error;

use crate::config::{ArchConfig, InitialState};
use crate::isa::LogicalReg;

pub use fu::{ExecOp, FuPool};
pub use lsq::{load_may_access, LoadCheck, LsqEntry, MemQueue, QueueKind};
pub use memory::{DataMemory, MemError};
pub use regs::{FreePool, PhysReg, PhysRegEntry, PhysRegFile, RegisterMap, Registers};
pub use rob::{ReorderBuffer, RobSlot};
pub use window::{InstructionWindow, IwSlot, Selection, Source};

/// Position of an instruction in the dynamic stream.
pub type DynId = usize;

/// A structure had no room.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Error)]
pub enum Hazard {
    #[error("free pool empty")]
    FreePoolEmpty,
    #[error("instruction window full")]
    IwFull,
    #[error("reorder buffer full")]
    RobFull,
    #[error("load queue full")]
    LqFull,
    #[error("store queue full")]
    SqFull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("rollback target ROB#{0} is not a live entry")]
pub struct RollbackError(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineState {
    pub regs: Registers,
    pub iw: InstructionWindow,
    pub rob: ReorderBuffer,
    pub lq: MemQueue,
    pub sq: MemQueue,
    pub mem: DataMemory,
    pub fus: FuPool,
    #[cfg(test)]
    pub(crate) fault_skip_map_restore: bool,
}

impl MachineState {
    pub fn new(cfg: &ArchConfig) -> Self {
        MachineState {
            regs: Registers::new(cfg.logical_regs, cfg.phys_regs),
            iw: InstructionWindow::new(cfg.iw_slots),
            rob: ReorderBuffer::new(cfg.rob_slots),
            lq: MemQueue::new(QueueKind::Load, cfg.lq_slots),
            sq: MemQueue::new(QueueKind::Store, cfg.sq_slots),
            mem: DataMemory::new(cfg.memory_bytes),
            fus: FuPool::new(cfg),
            #[cfg(test)]
            fault_skip_map_restore: false,
        }
    }

    /// Loads initial register and memory contents.
    pub fn apply_initial(&mut self, init: &InitialState) -> Result<(), MemError> {
        for &(r, v) in &init.regs {
            let p = self.regs.map.get(LogicalReg(r as u8));
            self.regs.file.write(p, v);
        }
        for &(a, v) in &init.mem {
            self.mem.write(a as i64, v)?;
        }
        Ok(())
    }

    pub fn begin_cycle(&mut self) {
        self.rob.begin_cycle();
        self.lq.begin_cycle();
        self.sq.begin_cycle();
    }

    pub fn end_cycle(&mut self) {
        self.regs.free.end_cycle();
    }

    /// Undoes every instruction younger than ROB entry `to`, youngest first:
    /// restores the Register Map, returns destinations to the Free Pool and
    /// drops their IW slots, queue entries and in-flight operations.
    pub fn rob_rollback(&mut self, to: usize, now: u64) -> Result<Vec<RobSlot>, RollbackError> {
        let boundary = self.rob.get(to).ok_or(RollbackError(to))?.owner;
        let squashed = self.rob.squash_after(to).ok_or(RollbackError(to))?;
        for slot in &squashed {
            if let (Some(x), Some(new), Some(old)) = (slot.xi, slot.dest_phys, slot.old_phys) {
                #[cfg(test)]
                if self.fault_skip_map_restore {
                    continue;
                }
                self.regs.undo_rename(x, new, old);
            }
        }
        self.iw.remove_younger(boundary, now);
        self.lq.remove_younger(boundary);
        self.sq.remove_younger(boundary);
        self.fus.squash_younger(boundary);
        Ok(squashed)
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        self.regs.check()?;
        self.lq.check_order()?;
        self.sq.check_order()?;
        let owners: Vec<DynId> = self.rob.iter().map(|s| s.owner).collect();
        if owners.windows(2).any(|w| w[0] >= w[1]) {
            return Err("reorder buffer not in program order".into());
        }
        Ok(())
    }
}
