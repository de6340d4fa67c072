use std::collections::VecDeque;
use std::fmt;

use crate::isa::{LogicalReg, Word};

use super::Hazard;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PhysReg(pub u16);

impl PhysReg {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for PhysReg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PhysRegEntry {
    pub value: Word,
    /// The value has been produced.
    pub ready: bool,
    pub allocated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhysRegFile {
    regs: Vec<PhysRegEntry>,
}

impl PhysRegFile {
    pub fn new(n: usize) -> Self {
        PhysRegFile { regs: vec![PhysRegEntry::default(); n] }
    }

    pub fn len(&self) -> usize {
        self.regs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regs.is_empty()
    }

    pub fn get(&self, p: PhysReg) -> &PhysRegEntry {
        &self.regs[p.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (PhysReg, &PhysRegEntry)> {
        self.regs.iter().enumerate().map(|(i, e)| (PhysReg(i as u16), e))
    }

    pub fn is_ready(&self, p: PhysReg) -> bool {
        self.regs[p.index()].ready
    }

    pub fn value(&self, p: PhysReg) -> Word {
        self.regs[p.index()].value
    }

    pub fn write(&mut self, p: PhysReg, value: Word) {
        let e = &mut self.regs[p.index()];
        e.value = value;
        e.ready = true;
    }

    pub fn allocate(&mut self, p: PhysReg) {
        let e = &mut self.regs[p.index()];
        e.allocated = true;
        e.ready = false;
    }

    pub fn release(&mut self, p: PhysReg) {
        let e = &mut self.regs[p.index()];
        e.allocated = false;
        e.ready = false;
    }

    pub fn allocated_count(&self) -> usize {
        self.regs.iter().filter(|e| e.allocated).count()
    }
}

/// Logical to physical mapping. Readiness and value of a logical register are
/// read through the physical register it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterMap {
    map: Vec<PhysReg>,
}

impl RegisterMap {
    pub fn identity(n: usize) -> Self {
        RegisterMap { map: (0..n).map(|i| PhysReg(i as u16)).collect() }
    }

    pub fn get(&self, x: LogicalReg) -> PhysReg {
        self.map[x.index()]
    }

    pub fn set(&mut self, x: LogicalReg, p: PhysReg) {
        self.map[x.index()] = p;
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (LogicalReg, PhysReg)> + '_ {
        self.map.iter().enumerate().map(|(i, &p)| (LogicalReg(i as u8), p))
    }
}

/// FIFO of unallocated physical registers. Registers released during a cycle
/// are parked and only become allocatable after [`FreePool::end_cycle`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreePool {
    queue: VecDeque<PhysReg>,
    pending: Vec<PhysReg>,
}

impl FreePool {
    pub fn new(regs: impl IntoIterator<Item = PhysReg>) -> Self {
        FreePool { queue: regs.into_iter().collect(), pending: Vec::new() }
    }

    /// Allocatable right now.
    pub fn available(&self) -> usize {
        self.queue.len()
    }

    /// All unallocated registers, including those parked this cycle.
    pub fn len(&self) -> usize {
        self.queue.len() + self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pop(&mut self) -> Option<PhysReg> {
        self.queue.pop_front()
    }

    /// Returns a register that becomes allocatable next cycle.
    pub fn release(&mut self, p: PhysReg) {
        self.pending.push(p);
    }

    /// Undoes a [`FreePool::pop`]. Restoring youngest-first recreates the
    /// original FIFO order.
    pub fn restore(&mut self, p: PhysReg) {
        self.queue.push_front(p);
    }

    pub fn end_cycle(&mut self) {
        self.queue.extend(self.pending.drain(..));
    }

    pub fn iter(&self) -> impl Iterator<Item = PhysReg> + '_ {
        self.queue.iter().chain(self.pending.iter()).copied()
    }
}

/// The renaming structures together: physical registers, Register Map and
/// Free Pool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Registers {
    pub file: PhysRegFile,
    pub map: RegisterMap,
    pub free: FreePool,
}

impl Registers {
    /// `x_i` starts mapped to `P_i` holding zero; the rest form the Free Pool.
    pub fn new(logical: usize, physical: usize) -> Self {
        assert!(physical > logical, "need more physical than logical registers");
        let mut file = PhysRegFile::new(physical);
        for i in 0..logical {
            let p = PhysReg(i as u16);
            file.allocate(p);
            file.write(p, 0);
        }
        Registers {
            file,
            map: RegisterMap::identity(logical),
            free: FreePool::new((logical..physical).map(|i| PhysReg(i as u16))),
        }
    }

    /// Renames destination `x`: takes the Free Pool head, maps `x` to it and
    /// returns `(new, old)` mappings.
    pub fn rename_alloc(&mut self, x: LogicalReg) -> Result<(PhysReg, PhysReg), Hazard> {
        let new = self.free.pop().ok_or(Hazard::FreePoolEmpty)?;
        self.file.allocate(new);
        let old = self.map.get(x);
        self.map.set(x, new);
        Ok((new, old))
    }

    /// Reverts one rename. Must be applied youngest-first.
    pub fn undo_rename(&mut self, x: LogicalReg, new: PhysReg, old: PhysReg) {
        debug_assert_eq!(self.map.get(x), new);
        self.map.set(x, old);
        self.file.release(new);
        self.free.restore(new);
    }

    /// Retires the previous mapping of a committed instruction.
    pub fn retire(&mut self, old: PhysReg) {
        self.file.release(old);
        self.free.release(old);
    }

    /// Architectural value of `x` (through the map).
    pub fn logical_value(&self, x: LogicalReg) -> Word {
        self.file.value(self.map.get(x))
    }

    pub fn check(&self) -> Result<(), String> {
        let n = self.file.len();
        if self.file.allocated_count() + self.free.len() != n {
            return Err(format!(
                "free pool conservation: {} allocated + {} free != {}",
                self.file.allocated_count(),
                self.free.len(),
                n
            ));
        }
        let mut seen = vec![false; n];
        for p in self.free.iter() {
            if seen[p.index()] {
                return Err(format!("{p} twice in the free pool"));
            }
            seen[p.index()] = true;
            if self.file.get(p).allocated {
                return Err(format!("{p} is both free and allocated"));
            }
        }
        let mut mapped = vec![false; n];
        for (x, p) in self.map.iter() {
            if !self.file.get(p).allocated {
                return Err(format!("{x} maps to unallocated {p}"));
            }
            if mapped[p.index()] {
                return Err(format!("register map not injective at {p}"));
            }
            mapped[p.index()] = true;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rename_takes_pool_head() {
        let mut r = Registers::new(8, 12);
        // x1 -> P1 initially, pool head is P8
        let (new, old) = r.rename_alloc(LogicalReg(1)).unwrap();
        assert_eq!((new, old), (PhysReg(8), PhysReg(1)));
        assert_eq!(r.map.get(LogicalReg(1)), PhysReg(8));
        assert!(r.file.get(new).allocated);
        assert!(!r.file.is_ready(new));
        r.check().unwrap();
    }

    #[test]
    fn empty_pool_is_a_hazard() {
        let mut r = Registers::new(2, 3);
        r.rename_alloc(LogicalReg(0)).unwrap();
        let before = r.clone();
        assert_eq!(r.rename_alloc(LogicalReg(1)), Err(Hazard::FreePoolEmpty));
        assert_eq!(r, before);
    }

    #[test]
    fn serial_renames_chain_old_mappings() {
        let mut r = Registers::new(8, 12);
        let (first, _) = r.rename_alloc(LogicalReg(1)).unwrap();
        let (second, old) = r.rename_alloc(LogicalReg(1)).unwrap();
        assert_eq!(old, first);
        assert_eq!(r.map.get(LogicalReg(1)), second);
    }

    #[test]
    fn undo_restores_exact_order() {
        let mut r = Registers::new(4, 8);
        let snap = r.clone();
        let a = r.rename_alloc(LogicalReg(1)).unwrap();
        let b = r.rename_alloc(LogicalReg(2)).unwrap();
        let c = r.rename_alloc(LogicalReg(1)).unwrap();
        r.undo_rename(LogicalReg(1), c.0, c.1);
        r.undo_rename(LogicalReg(2), b.0, b.1);
        r.undo_rename(LogicalReg(1), a.0, a.1);
        assert_eq!(r.map, snap.map);
        assert_eq!(r.free, snap.free);
    }

    #[test]
    fn released_registers_wait_a_cycle() {
        let mut r = Registers::new(1, 2);
        let (_, old) = r.rename_alloc(LogicalReg(0)).unwrap();
        r.retire(old);
        assert_eq!(r.free.available(), 0);
        assert_eq!(r.free.len(), 1);
        r.check().unwrap();
        r.free.end_cycle();
        assert_eq!(r.free.available(), 1);
    }
}
