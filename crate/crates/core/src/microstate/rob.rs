use crate::isa::LogicalReg;

use super::regs::PhysReg;
use super::{DynId, Hazard};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RobSlot {
    pub id: usize,
    pub owner: DynId,
    pub pc: usize,
    pub xi: Option<LogicalReg>,
    pub old_phys: Option<PhysReg>,
    pub dest_phys: Option<PhysReg>,
    /// `s`
    pub store: bool,
    /// `x`
    pub exception: bool,
    /// `c`
    pub completed: bool,
}

impl RobSlot {
    pub fn record(owner: DynId, pc: usize) -> Self {
        RobSlot {
            id: 0,
            owner,
            pc,
            xi: None,
            old_phys: None,
            dest_phys: None,
            store: false,
            exception: false,
            completed: false,
        }
    }
}

/// Circular reorder buffer. Entries retired in a cycle free their slots for
/// the next cycle only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReorderBuffer {
    slots: Vec<Option<RobSlot>>,
    head: usize,
    len: usize,
    freed_this_cycle: usize,
}

impl ReorderBuffer {
    pub fn new(size: usize) -> Self {
        ReorderBuffer { slots: vec![None; size], head: 0, len: 0, freed_this_cycle: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn head_id(&self) -> usize {
        self.head
    }

    pub fn begin_cycle(&mut self) {
        self.freed_this_cycle = 0;
    }

    fn tail(&self) -> usize {
        (self.head + self.len) % self.slots.len()
    }

    pub fn can_alloc(&self) -> bool {
        self.len + self.freed_this_cycle < self.slots.len()
    }

    pub fn alloc(&mut self, mut record: RobSlot) -> Result<usize, Hazard> {
        if !self.can_alloc() {
            return Err(Hazard::RobFull);
        }
        let id = self.tail();
        record.id = id;
        record.completed = false;
        record.exception = false;
        self.slots[id] = Some(record);
        self.len += 1;
        Ok(id)
    }

    pub fn get(&self, id: usize) -> Option<&RobSlot> {
        self.slots.get(id).and_then(Option::as_ref)
    }

    pub fn get_mut(&mut self, id: usize) -> Option<&mut RobSlot> {
        self.slots.get_mut(id).and_then(Option::as_mut)
    }

    /// Head to tail.
    pub fn iter(&self) -> impl Iterator<Item = &RobSlot> {
        let n = self.slots.len();
        (0..self.len).map(move |i| self.slots[(self.head + i) % n].as_ref().unwrap())
    }

    pub fn head(&self) -> Option<&RobSlot> {
        self.iter().next()
    }

    /// The longest run of completed entries starting at the head, truncated
    /// to `width`.
    pub fn commit_ready(&self, width: usize) -> Vec<usize> {
        self.iter().take_while(|s| s.completed).take(width).map(|s| s.id).collect()
    }

    pub fn pop_head(&mut self) -> Option<RobSlot> {
        if self.len == 0 {
            return None;
        }
        let slot = self.slots[self.head].take();
        self.head = (self.head + 1) % self.slots.len();
        self.len -= 1;
        self.freed_this_cycle += 1;
        slot
    }

    /// Removes every entry younger than `id`, youngest first. `id` itself
    /// stays.
    pub fn squash_after(&mut self, id: usize) -> Option<Vec<RobSlot>> {
        let n = self.slots.len();
        let pos = (id + n - self.head) % n;
        if self.slots.get(id)?.is_none() || pos >= self.len {
            return None;
        }
        let mut out = Vec::new();
        while self.len > pos + 1 {
            let tail = (self.head + self.len - 1) % n;
            out.push(self.slots[tail].take().unwrap());
            self.len -= 1;
        }
        Some(out)
    }
}
