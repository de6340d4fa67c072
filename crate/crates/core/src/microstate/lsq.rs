use std::collections::BTreeSet;

use crate::isa::{Opcode, Word};

use super::regs::{PhysReg, PhysRegFile};
use super::{DynId, Hazard};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueueKind {
    Load,
    Store,
}

/// One load or store queue entry. Entries are only queued once their
/// effective address is known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LsqEntry {
    pub owner: DynId,
    pub pc: usize,
    pub opcode: Opcode,
    pub efad: i64,
    /// Load destination (`Pi`) or store value register (`Pl`).
    pub reg: PhysReg,
    /// Store: cycle the value arrived (`Cl`), `None` while pending.
    pub value_at: Option<u64>,
    pub queued_at: u64,
    /// Load: cycle the value went out on the result bus.
    pub forwarded_at: Option<u64>,
}

impl LsqEntry {
    /// The single evolving cycle column (`Ci` or `Cl`).
    pub fn display_cycle(&self) -> Option<u64> {
        match self.opcode {
            Opcode::Lw => Some(self.forwarded_at.unwrap_or(self.queued_at)),
            _ => self.value_at,
        }
    }
}

/// Program-ordered load or store queue. Capacity is claimed by a
/// reservation at dispatch; the entry itself is queued once its address is
/// computed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemQueue {
    kind: QueueKind,
    capacity: usize,
    reservations: BTreeSet<DynId>,
    entries: Vec<LsqEntry>,
    freed_this_cycle: usize,
}

impl MemQueue {
    pub fn new(kind: QueueKind, capacity: usize) -> Self {
        MemQueue { kind, capacity, reservations: BTreeSet::new(), entries: Vec::new(), freed_this_cycle: 0 }
    }

    pub fn kind(&self) -> QueueKind {
        self.kind
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Slots in use (reserved or queued).
    pub fn used(&self) -> usize {
        self.reservations.len()
    }

    pub fn begin_cycle(&mut self) {
        self.freed_this_cycle = 0;
    }

    fn full_hazard(&self) -> Hazard {
        match self.kind {
            QueueKind::Load => Hazard::LqFull,
            QueueKind::Store => Hazard::SqFull,
        }
    }

    pub fn can_reserve(&self) -> bool {
        self.reservations.len() + self.freed_this_cycle < self.capacity
    }

    pub fn reserve(&mut self, owner: DynId) -> Result<(), Hazard> {
        if self.reservations.contains(&owner) {
            return Ok(());
        }
        if !self.can_reserve() {
            return Err(self.full_hazard());
        }
        self.reservations.insert(owner);
        Ok(())
    }

    /// Queues an entry whose address is known, in program order. Returns its
    /// position.
    pub fn enqueue(&mut self, entry: LsqEntry) -> Result<usize, Hazard> {
        self.reserve(entry.owner)?;
        let pos = self.entries.partition_point(|e| e.owner < entry.owner);
        self.entries.insert(pos, entry);
        Ok(pos)
    }

    pub fn is_queued(&self, owner: DynId) -> bool {
        self.get(owner).is_some()
    }

    pub fn get(&self, owner: DynId) -> Option<&LsqEntry> {
        self.entries.iter().find(|e| e.owner == owner)
    }

    pub fn get_mut(&mut self, owner: DynId) -> Option<&mut LsqEntry> {
        self.entries.iter_mut().find(|e| e.owner == owner)
    }

    pub fn iter(&self) -> impl Iterator<Item = &LsqEntry> {
        self.entries.iter()
    }

    pub fn reservations(&self) -> impl Iterator<Item = DynId> + '_ {
        self.reservations.iter().copied()
    }

    /// Frees the slot of a retiring instruction.
    pub fn release(&mut self, owner: DynId) -> Option<LsqEntry> {
        if self.reservations.remove(&owner) {
            self.freed_this_cycle += 1;
        }
        let pos = self.entries.iter().position(|e| e.owner == owner)?;
        Some(self.entries.remove(pos))
    }

    pub fn remove_younger(&mut self, owner: DynId) -> usize {
        let before = self.reservations.len();
        self.reservations.retain(|&o| o <= owner);
        self.entries.retain(|e| e.owner <= owner);
        before - self.reservations.len()
    }

    /// Records the arrival of a store value.
    pub fn wakeup(&mut self, reg: PhysReg, cycle: u64) -> usize {
        let mut n = 0;
        for e in self.entries.iter_mut() {
            if e.reg == reg && e.value_at.is_none() && self.kind == QueueKind::Store {
                e.value_at = Some(cycle);
                n += 1;
            }
        }
        n
    }

    pub fn check_order(&self) -> Result<(), String> {
        if self.entries.windows(2).any(|w| w[0].owner >= w[1].owner) {
            return Err(format!("{:?} queue out of program order", self.kind));
        }
        if self.entries.iter().any(|e| !self.reservations.contains(&e.owner)) {
            return Err(format!("{:?} queue entry without reservation", self.kind));
        }
        if self.reservations.len() > self.capacity {
            return Err(format!("{:?} queue over capacity", self.kind));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadCheck {
    /// Read memory.
    Proceed,
    /// Take the value of an older store to the same address.
    Forward(Word),
    Wait,
}

/// Memory disambiguation for a queued load: wait while any older store has an
/// unknown address; otherwise forward from the youngest older store to the
/// same address if its value is ready, wait if it is not, or proceed.
pub fn load_may_access(sq: &MemQueue, load: &LsqEntry, regs: &PhysRegFile) -> LoadCheck {
    let unknown_older = sq.reservations().any(|o| o < load.owner && !sq.is_queued(o));
    if unknown_older {
        return LoadCheck::Wait;
    }
    let matching = sq.iter().filter(|s| s.owner < load.owner && s.efad == load.efad).last();
    match matching {
        Some(st) if regs.is_ready(st.reg) => LoadCheck::Forward(regs.value(st.reg)),
        Some(_) => LoadCheck::Wait,
        None => LoadCheck::Proceed,
    }
}
