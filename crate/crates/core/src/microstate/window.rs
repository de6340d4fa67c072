use crate::isa::{FuClass, Opcode};

use super::fu::FuPool;
use super::regs::PhysReg;
use super::{DynId, Hazard};

/// A source operand tracked in the IW. `ready_at` is the cycle the value
/// arrived in the window; `None` renders as `-` and blocks issue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Source {
    pub reg: PhysReg,
    pub ready_at: Option<u64>,
}

impl Source {
    fn ready_for(&self, now: u64, same_cycle: bool) -> bool {
        match self.ready_at {
            Some(c) if same_cycle => c <= now,
            Some(c) => c < now,
            None => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IwSlot {
    pub id: usize,
    pub owner: DynId,
    pub opcode: Opcode,
    pub dest: Option<PhysReg>,
    pub pj: Option<Source>,
    pub pk: Option<Source>,
    /// Store value register. Not required for issue.
    pub pl: Option<Source>,
    pub imm: Option<i32>,
    pub inserted_at: u64,
    pub issued_at: Option<u64>,
}

impl IwSlot {
    pub fn record(owner: DynId, opcode: Opcode, dest: Option<PhysReg>) -> Self {
        IwSlot {
            id: 0,
            owner,
            opcode,
            dest,
            pj: None,
            pk: None,
            pl: None,
            imm: None,
            inserted_at: 0,
            issued_at: None,
        }
    }

    fn sources_mut(&mut self) -> impl Iterator<Item = &mut Source> {
        [&mut self.pj, &mut self.pk, &mut self.pl].into_iter().flatten()
    }

    /// All issue operands present, and the slot was filled in an earlier
    /// cycle.
    pub fn is_eligible(&self, now: u64, same_cycle: bool) -> bool {
        self.issued_at.is_none()
            && self.inserted_at < now
            && [self.pj, self.pk].iter().flatten().all(|s| s.ready_for(now, same_cycle))
    }

    pub fn waits_on_operand(&self, now: u64, same_cycle: bool) -> bool {
        self.issued_at.is_none()
            && self.inserted_at < now
            && ![self.pj, self.pk].iter().flatten().all(|s| s.ready_for(now, same_cycle))
    }
}

/// Outcome of one select pass, all lists in program order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Selection {
    /// `(slot, unit)` pairs that won a functional unit.
    pub issued: Vec<(usize, usize)>,
    pub fu_busy: Vec<usize>,
    pub width_limited: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionWindow {
    slots: Vec<Option<IwSlot>>,
    freed_at: Vec<Option<u64>>,
}

impl InstructionWindow {
    pub fn new(size: usize) -> Self {
        InstructionWindow { slots: vec![None; size], freed_at: vec![None; size] }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn occupied(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn get(&self, id: usize) -> Option<&IwSlot> {
        self.slots.get(id).and_then(Option::as_ref)
    }

    pub fn iter(&self) -> impl Iterator<Item = &IwSlot> {
        self.slots.iter().flatten()
    }

    pub fn find_owner(&self, owner: DynId) -> Option<&IwSlot> {
        self.iter().find(|s| s.owner == owner)
    }

    fn free_slot(&self, now: u64) -> Option<usize> {
        (0..self.slots.len()).find(|&i| self.slots[i].is_none() && self.freed_at[i].is_none_or(|c| c < now))
    }

    pub fn can_insert(&self, now: u64) -> bool {
        self.free_slot(now).is_some()
    }

    /// Places `record` in the lowest-indexed free slot. A slot vacated in
    /// cycle `now` is not reusable until `now + 1`.
    pub fn insert(&mut self, mut record: IwSlot, now: u64) -> Result<usize, Hazard> {
        let id = self.free_slot(now).ok_or(Hazard::IwFull)?;
        record.id = id;
        record.inserted_at = now;
        self.slots[id] = Some(record);
        Ok(id)
    }

    /// Broadcasts that `reg` received its value at `cycle`. Returns the number
    /// of operand flags set.
    pub fn wakeup(&mut self, reg: PhysReg, cycle: u64) -> usize {
        let mut count = 0;
        for slot in self.slots.iter_mut().flatten() {
            for src in slot.sources_mut() {
                if src.reg == reg && src.ready_at.is_none() {
                    src.ready_at = Some(cycle);
                    count += 1;
                }
            }
        }
        count
    }

    /// Picks up to `width` eligible slots, oldest first, each matched to a
    /// free unit of its class. Winners are marked issued and their unit is
    /// claimed in `fus`.
    pub fn select(&mut self, fus: &mut FuPool, width: usize, now: u64, same_cycle: bool) -> Selection {
        let mut eligible: Vec<(DynId, usize)> = self
            .iter()
            .filter(|s| s.is_eligible(now, same_cycle))
            .map(|s| (s.owner, s.id))
            .collect();
        eligible.sort_unstable();
        let mut sel = Selection::default();
        for (_, id) in eligible {
            if sel.issued.len() == width {
                sel.width_limited.push(id);
                continue;
            }
            let class: FuClass = self.slots[id].as_ref().unwrap().opcode.fu_class();
            match fus.try_claim(class, now) {
                Some(unit) => {
                    self.slots[id].as_mut().unwrap().issued_at = Some(now);
                    sel.issued.push((id, unit));
                }
                None => sel.fu_busy.push(id),
            }
        }
        sel
    }

    /// Empties a slot (the instruction fired or was squashed).
    pub fn remove(&mut self, id: usize, now: u64) -> Option<IwSlot> {
        let slot = self.slots.get_mut(id)?.take();
        if slot.is_some() {
            self.freed_at[id] = Some(now);
        }
        slot
    }

    /// Removes every slot owned by an instruction younger than `owner`.
    pub fn remove_younger(&mut self, owner: DynId, now: u64) -> usize {
        let ids: Vec<usize> = self.iter().filter(|s| s.owner > owner).map(|s| s.id).collect();
        for &id in &ids {
            self.remove(id, now);
        }
        ids.len()
    }

    /// Oldest unissued entry, if any.
    pub fn oldest_waiting(&self) -> Option<&IwSlot> {
        self.iter().filter(|s| s.issued_at.is_none()).min_by_key(|s| s.owner)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ArchConfig;

    fn src(reg: u16, ready_at: Option<u64>) -> Option<Source> {
        Some(Source { reg: PhysReg(reg), ready_at })
    }

    fn add(owner: DynId, pj: Option<Source>, pk: Option<Source>) -> IwSlot {
        let mut r = IwSlot::record(owner, Opcode::Add, Some(PhysReg(20)));
        r.pj = pj;
        r.pk = pk;
        r
    }

    fn pool(alus: usize) -> FuPool {
        let mut cfg = ArchConfig::default();
        cfg.fu_count[0] = alus;
        FuPool::new(&cfg)
    }

    #[test]
    fn insert_uses_lowest_free_slot() {
        let mut iw = InstructionWindow::new(3);
        assert_eq!(iw.insert(add(0, src(1, Some(2)), src(2, Some(2))), 2), Ok(0));
        assert_eq!(iw.insert(add(1, src(1, Some(2)), src(9, None)), 2), Ok(1));
        assert_eq!(iw.get(0).unwrap().pj.unwrap().ready_at, Some(2));
        assert_eq!(iw.get(1).unwrap().pk.unwrap().ready_at, None);
        iw.remove(0, 3);
        // vacated this cycle: not reusable yet
        assert_eq!(iw.insert(add(2, None, None), 3), Ok(2));
        assert_eq!(iw.insert(add(3, None, None), 3), Err(Hazard::IwFull));
        assert_eq!(iw.insert(add(3, None, None), 4), Ok(0));
    }

    #[test]
    fn full_window() {
        let mut iw = InstructionWindow::new(1);
        iw.insert(add(0, None, None), 0).unwrap();
        assert_eq!(iw.insert(add(1, None, None), 0), Err(Hazard::IwFull));
    }

    #[test]
    fn wakeup_broadcast() {
        let mut iw = InstructionWindow::new(4);
        iw.insert(add(0, src(5, None), src(1, Some(0))), 0).unwrap();
        iw.insert(add(1, src(2, Some(0)), src(5, None)), 0).unwrap();
        assert_eq!(iw.wakeup(PhysReg(5), 7), 2);
        assert_eq!(iw.get(0).unwrap().pj.unwrap().ready_at, Some(7));
        assert_eq!(iw.get(1).unwrap().pk.unwrap().ready_at, Some(7));
        assert_eq!(iw.wakeup(PhysReg(6), 8), 0);
    }

    #[test]
    fn wakeup_sets_both_operands_of_one_slot() {
        let mut iw = InstructionWindow::new(4);
        iw.insert(add(0, src(5, None), src(5, None)), 0).unwrap();
        iw.insert(add(1, src(5, Some(0)), src(3, None)), 0).unwrap();
        // brute-force count of pending references to P5
        let expected = iw
            .iter()
            .flat_map(|s| [s.pj, s.pk, s.pl])
            .flatten()
            .filter(|s| s.reg == PhysReg(5) && s.ready_at.is_none())
            .count();
        assert_eq!(iw.wakeup(PhysReg(5), 7), expected);
        assert_eq!(expected, 2);
        assert!(iw.iter().flat_map(|s| [s.pj, s.pk]).flatten().all(|s| s.reg != PhysReg(5) || s.ready_at.is_some()));
    }

    #[test]
    fn one_alu_two_ready_adds() {
        let mut iw = InstructionWindow::new(4);
        let mut fus = pool(1);
        iw.insert(add(0, src(1, Some(0)), src(2, Some(0))), 0).unwrap();
        iw.insert(add(1, src(1, Some(0)), src(2, Some(0))), 0).unwrap();
        let sel = iw.select(&mut fus, 4, 1, true);
        assert_eq!(sel.issued.len(), 1);
        assert_eq!(sel.issued[0].0, 0);
        assert_eq!(sel.fu_busy, vec![1]);
    }

    #[test]
    fn load_and_addi_issue_together() {
        let mut iw = InstructionWindow::new(4);
        let mut fus = pool(1);
        let mut lw = IwSlot::record(0, Opcode::Lw, Some(PhysReg(8)));
        lw.pj = src(4, Some(2));
        let mut lw2 = IwSlot::record(1, Opcode::Lw, Some(PhysReg(9)));
        lw2.pj = src(5, Some(2));
        let mut addi = IwSlot::record(2, Opcode::Addi, Some(PhysReg(10)));
        addi.pj = src(1, Some(2));
        for r in [lw, lw2, addi] {
            iw.insert(r, 2).unwrap();
        }
        let sel = iw.select(&mut fus, 4, 3, true);
        let issued: Vec<usize> = sel.issued.iter().map(|p| p.0).collect();
        assert_eq!(issued, vec![0, 2]);
        assert_eq!(sel.fu_busy, vec![1]);
        assert_eq!(iw.get(0).unwrap().issued_at, Some(3));
    }

    #[test]
    fn width_limit_and_empty() {
        let mut iw = InstructionWindow::new(4);
        let mut fus = pool(4);
        assert_eq!(iw.select(&mut fus, 2, 0, true), Selection::default());
        for o in 0..3 {
            iw.insert(add(o, None, None), 0).unwrap();
        }
        let sel = iw.select(&mut fus, 2, 1, true);
        assert_eq!(sel.issued.len(), 2);
        assert_eq!(sel.width_limited, vec![2]);
    }

    #[test]
    fn not_eligible_in_insert_cycle_or_before_wakeup() {
        let mut iw = InstructionWindow::new(2);
        let mut fus = pool(2);
        iw.insert(add(0, src(1, Some(3)), None), 3).unwrap();
        assert!(iw.select(&mut fus, 2, 3, true).issued.is_empty());
        let mut iw = InstructionWindow::new(2);
        iw.insert(add(0, src(1, Some(4)), None), 2).unwrap();
        assert!(iw.get(0).unwrap().is_eligible(4, true));
        assert!(!iw.get(0).unwrap().is_eligible(4, false));
        assert!(iw.get(0).unwrap().is_eligible(5, false));
    }
}
