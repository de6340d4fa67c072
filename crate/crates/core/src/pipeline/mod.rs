//! The cycle engine. Each call to [`SimState::step`] evaluates commit,
//! write-back, issue/execute, dispatch, decode/rename and fetch, in that
//! order, against the state left by the previous cycle.

pub mod stall;
pub mod stream;

use std::collections::VecDeque;

use thiserror::Error;

use crate::config::{ArchConfig, InitialState, OperandStallPolicy, StreamMode};
use crate::isa::{Instruction, LogicalReg, Opcode, Program, Word};
use crate::oracle::ArchState;
use crate::microstate::{
    load_may_access, DynId, ExecOp, IwSlot, LoadCheck, LsqEntry, MachineState, MemError, PhysReg,
    RobSlot, Source,
};

pub use stall::{Stage, StallEvent, StallLog, StallReason};
pub use stream::{build_stream, predict_taken, Stream};

/// Cycle guard for semantic mode, where the stream length is unknown.
pub const SEMANTIC_CYCLE_LIMIT: u64 = 200_000;

/// One instruction of the dynamic stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DynInst {
    pub id: DynId,
    /// Static index of the instruction, shown as its PC.
    pub pc: usize,
    pub iteration: usize,
    pub inst: Instruction,
    /// Entry cycle per stage, indexed by [`Stage::index`].
    pub cycles: [Option<u64>; 7],
    pub dest: Option<PhysReg>,
    pub old_dest: Option<PhysReg>,
    pub pj: Option<PhysReg>,
    pub pk: Option<PhysReg>,
    pub pl: Option<PhysReg>,
    /// The IW record as it was when the instruction fired.
    pub fired: Option<IwSlot>,
    pub rob_id: Option<usize>,
    /// Where fetch went after this branch.
    pub predicted_next: Option<usize>,
    /// Fetched on the stream the run is expected to commit (forced-loop).
    pub on_path: bool,
    pub mispredicted: bool,
    pub taken: Option<bool>,
    pub result: Option<Word>,
    pub efad: Option<i64>,
    pub exception: Option<MemError>,
    /// Store address generation has finished.
    pub addr_done: bool,
}

impl DynInst {
    pub fn at(&self, stage: Stage) -> Option<u64> {
        self.cycles[stage.index()]
    }

    fn enter(&mut self, stage: Stage, cycle: u64) {
        self.cycles[stage.index()] = Some(cycle);
    }

    pub fn is_committed(&self) -> bool {
        self.at(Stage::C).is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("exception at cycle {cycle}: instruction {inst} (PC {pc}): {error}")]
    Exception { cycle: u64, inst: DynId, pc: usize, error: MemError },
    #[error("no completion within {0} cycles")]
    CycleBound(u64),
    #[error("initial memory image: {0}")]
    InitialMemory(MemError),
}

/// What happened in one cycle.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CycleReport {
    pub cycle: u64,
    pub entered: Vec<(Stage, DynId)>,
    pub stalls: Vec<StallEvent>,
    pub committed: Vec<DynId>,
    pub squashed: usize,
    pub finished: bool,
}

/// Final statistics of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stats {
    pub ctot: u64,
    pub committed: usize,
    /// Per stage, indexed by [`Stage::index`].
    pub stalls: [usize; 7],
}

impl Stats {
    /// `committed / ctot` in hundredths, rounded half up.
    pub fn ipc_hundredths(&self) -> u64 {
        ipc_hundredths(self.committed as u64, self.ctot)
    }

    pub fn ipc(&self) -> f64 {
        self.ipc_hundredths() as f64 / 100.0
    }

    pub fn ipc_text(&self) -> String {
        let h = self.ipc_hundredths();
        format!("{}.{:02}", h / 100, h % 100)
    }

    pub fn stalls_at(&self, stage: Stage) -> usize {
        self.stalls[stage.index()]
    }
}

/// `committed / cycles` in hundredths, rounded half up, in exact integer
/// arithmetic.
pub fn ipc_hundredths(committed: u64, cycles: u64) -> u64 {
    if cycles == 0 {
        return 0;
    }
    (200 * committed + cycles) / (2 * cycles)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimState {
    pub cfg: ArchConfig,
    pub prog: Program,
    pub machine: MachineState,
    pub stream: Stream,
    /// Dynamic instructions still in the history; squashed ones are dropped
    /// and their ids reused.
    pub insts: Vec<DynInst>,
    pub cycle: u64,
    pub f_latch: VecDeque<DynId>,
    pub d_latch: VecDeque<DynId>,
    pub fetch_next: Option<usize>,
    fetch_on_path: bool,
    fetch_iteration: usize,
    fetch_resume_at: u64,
    pub stalls: StallLog,
    pub committed: usize,
    pub last_commit: Option<u64>,
    pub halt: Option<SimError>,
    report: CycleReport,
}

impl SimState {
    pub fn new(cfg: ArchConfig, prog: Program, init: &InitialState) -> Result<SimState, SimError> {
        let mut machine = MachineState::new(&cfg);
        machine.apply_initial(init).map_err(SimError::InitialMemory)?;
        let stream = build_stream(&prog, &cfg);
        Ok(SimState {
            machine,
            stream,
            insts: Vec::new(),
            cycle: 0,
            f_latch: VecDeque::new(),
            d_latch: VecDeque::new(),
            fetch_next: Some(0),
            fetch_on_path: true,
            fetch_iteration: 0,
            fetch_resume_at: 0,
            stalls: StallLog::default(),
            committed: 0,
            last_commit: None,
            halt: None,
            report: CycleReport::default(),
            cfg,
            prog,
        })
    }

    pub fn finished(&self) -> bool {
        self.halt.is_some()
            || (self.fetch_next.is_none()
                && self.f_latch.is_empty()
                && self.d_latch.is_empty()
                && self.machine.rob.is_empty())
    }

    /// Upper bound on the cycles a run may take before it is declared stuck.
    pub fn cycle_bound(&self) -> u64 {
        match self.stream.total {
            Some(total) => {
                let per = self.cfg.max_latency() as u64 + self.cfg.rob_slots as u64 + 4;
                total as u64 * per + 16 + self.cfg.redirect_penalty as u64 * self.cfg.iterations as u64
            }
            None => SEMANTIC_CYCLE_LIMIT,
        }
    }

    pub fn step(&mut self) -> CycleReport {
        let now = self.cycle;
        if self.finished() {
            return CycleReport { cycle: now, finished: true, ..CycleReport::default() };
        }
        self.report = CycleReport { cycle: now, ..CycleReport::default() };
        self.machine.begin_cycle();
        self.commit(now);
        if self.halt.is_none() {
            self.writeback(now);
            self.issue_execute(now);
            self.dispatch(now);
            self.rename(now);
            self.fetch(now);
        }
        self.machine.end_cycle();
        self.cycle += 1;
        self.report.finished = self.finished();
        std::mem::take(&mut self.report)
    }

    /// Steps until the run finishes.
    pub fn run_to_completion(&mut self) -> Result<Stats, SimError> {
        let bound = self.cycle_bound();
        while !self.finished() {
            if self.cycle >= bound {
                return Err(SimError::CycleBound(bound));
            }
            self.step();
        }
        match &self.halt {
            Some(e) => Err(e.clone()),
            None => Ok(self.stats()),
        }
    }

    pub fn stats(&self) -> Stats {
        Stats {
            ctot: self.last_commit.map_or(0, |c| c + 1),
            committed: self.committed,
            stalls: self.stalls.counters(),
        }
    }

    pub fn arch_view(&self) -> ArchState {
        let regs = (0..self.cfg.logical_regs)
            .map(|x| self.machine.regs.logical_value(LogicalReg(x as u8)))
            .collect();
        ArchState { regs, mem: self.machine.mem.clone(), committed: self.committed }
    }

    fn log(&mut self, stage: Stage, inst: DynId, reason: StallReason, now: u64) {
        let d = &self.insts[inst];
        let text = stall_text(stage, reason, d);
        let event = StallEvent { cycle: now, stage, inst, pc: d.pc, reason, text };
        if self.stalls.record(event.clone()) {
            self.report.stalls.push(event);
        }
    }

    fn enter(&mut self, id: DynId, stage: Stage, now: u64) {
        self.insts[id].enter(stage, now);
        self.report.entered.push((stage, id));
    }

    // ---- commit ----

    fn commit(&mut self, now: u64) {
        let ready = self.machine.rob.commit_ready(self.cfg.commit_width);
        for _ in &ready {
            let slot = self.machine.rob.head().cloned().expect("ready entry");
            let d = &self.insts[slot.owner];
            if slot.exception {
                self.halt = Some(SimError::Exception {
                    cycle: now,
                    inst: slot.owner,
                    pc: d.pc,
                    error: d.exception.unwrap_or(MemError::Misaligned(d.efad.unwrap_or(0))),
                });
                self.flush_from_head(slot, now);
                return;
            }
            self.retire(slot, now);
        }
        self.log_commit_stalls(now, ready.len());
    }

    /// Discards the faulting head and everything younger so that the
    /// Register Map again describes the committed state.
    fn flush_from_head(&mut self, head: RobSlot, now: u64) {
        self.undo_latch_renames();
        self.d_latch.clear();
        self.f_latch.clear();
        let m = &mut self.machine;
        m.rob_rollback(head.id, now).expect("head is live");
        if let (Some(x), Some(new), Some(old)) = (head.xi, head.dest_phys, head.old_phys) {
            m.regs.undo_rename(x, new, old);
        }
        m.lq.release(head.owner);
        m.sq.release(head.owner);
        m.rob.pop_head();
        self.report.squashed += self.insts.len() - head.owner - 1;
        self.insts.truncate(head.owner + 1);
        self.fetch_next = None;
    }

    fn undo_latch_renames(&mut self) {
        for &y in self.d_latch.iter().rev() {
            let d = &self.insts[y];
            if let (Some(x), Some(new), Some(old)) = (d.inst.dest(), d.dest, d.old_dest) {
                self.machine.regs.undo_rename(x, new, old);
            }
        }
    }

    fn retire(&mut self, slot: RobSlot, now: u64) {
        let m = &mut self.machine;
        match self.insts[slot.owner].inst.opcode {
            Opcode::Sw => {
                let e = m.sq.release(slot.owner).expect("store queued");
                let v = m.regs.file.value(e.reg);
                m.mem.write(e.efad, v).expect("address checked at execute");
            }
            Opcode::Lw => {
                m.lq.release(slot.owner);
            }
            _ => {}
        }
        if let Some(old) = slot.old_phys {
            m.regs.retire(old);
        }
        m.rob.pop_head();
        self.committed += 1;
        self.last_commit = Some(now);
        self.enter(slot.owner, Stage::C, now);
        self.report.committed.push(slot.owner);
    }

    /// Completed entries that could not retire this cycle. Entries that were
    /// next in line when the width ran out are WIDTH_LIMIT; entries waiting
    /// behind an unfinished older one are COMMIT_BLOCKED, logged only when
    /// `commit_blocked_stalls` is set.
    fn log_commit_stalls(&mut self, now: u64, committed: usize) {
        let width = self.cfg.commit_width;
        let window: Vec<(DynId, bool)> =
            self.machine.rob.iter().take(width).map(|s| (s.owner, s.completed)).collect();
        let mut in_line = committed == width;
        for (owner, completed) in window {
            in_line &= completed;
            if in_line {
                self.log(Stage::C, owner, StallReason::WidthLimit, now);
            } else if completed && self.cfg.commit_blocked_stalls {
                self.log(Stage::C, owner, StallReason::CommitBlocked, now);
            }
        }
    }

    // ---- write-back ----

    fn writeback(&mut self, now: u64) {
        let ops = self.machine.fus.take_completing(now);
        let mut boundary: Option<DynId> = None;
        for op in ops {
            if boundary.is_some_and(|b| op.owner > b) {
                continue;
            }
            let id = op.owner;
            match self.insts[id].inst.opcode {
                Opcode::Lw => self.complete_load(op, now),
                Opcode::Sw => {
                    self.insts[id].addr_done = true;
                    let pl = self.insts[id].pl.expect("store value register");
                    if self.insts[id].exception.is_some() || self.machine.regs.file.is_ready(pl) {
                        self.complete(id, now);
                    }
                }
                Opcode::Beq | Opcode::Bne => {
                    self.complete(id, now);
                    if self.resolve_branch(id, now) {
                        boundary = Some(id);
                    }
                }
                _ => {
                    let dest = self.insts[id].dest.expect("destination");
                    let v = self.insts[id].result.expect("executed");
                    self.broadcast(dest, v, now);
                    self.complete(id, now);
                }
            }
        }
    }

    fn complete_load(&mut self, op: ExecOp, now: u64) {
        let id = op.owner;
        if self.insts[id].exception.is_some() {
            self.complete(id, now);
            return;
        }
        let m = &self.machine;
        let entry = m.lq.get(id).expect("load queued");
        let value = match load_may_access(&m.sq, entry, &m.regs.file) {
            LoadCheck::Wait => {
                self.machine.fus.postpone(op, now + 1);
                self.log(Stage::X, id, StallReason::OperandPending, now);
                return;
            }
            LoadCheck::Forward(v) => v,
            LoadCheck::Proceed => m.mem.read(entry.efad).expect("address checked at execute"),
        };
        self.machine.lq.get_mut(id).unwrap().forwarded_at = Some(now);
        self.insts[id].result = Some(value);
        let dest = self.insts[id].dest.expect("load destination");
        self.broadcast(dest, value, now);
        self.complete(id, now);
    }

    /// Publishes a result: register ready, waiting IW operands and store
    /// values woken, stores waiting only for this value completed.
    fn broadcast(&mut self, reg: PhysReg, value: Word, now: u64) {
        let m = &mut self.machine;
        m.regs.file.write(reg, value);
        m.iw.wakeup(reg, now);
        m.sq.wakeup(reg, now);
        let waiting: Vec<DynId> = m
            .sq
            .iter()
            .filter(|e| e.reg == reg)
            .map(|e| e.owner)
            .filter(|&o| self.insts[o].addr_done)
            .collect();
        for o in waiting {
            let rob = self.insts[o].rob_id.expect("dispatched");
            if !self.machine.rob.get(rob).is_some_and(|s| s.completed) {
                self.complete(o, now);
            }
        }
    }

    fn complete(&mut self, id: DynId, now: u64) {
        let exception = self.insts[id].exception.is_some();
        let rob = self.insts[id].rob_id.expect("dispatched");
        let slot = self.machine.rob.get_mut(rob).expect("live entry");
        slot.completed = true;
        slot.exception = exception;
        self.enter(id, Stage::W, now);
    }

    /// Returns true when younger instructions were squashed.
    fn resolve_branch(&mut self, id: DynId, now: u64) -> bool {
        let d = &self.insts[id];
        let actual = match self.stream.mode {
            StreamMode::ForcedLoop if d.on_path => self.stream.successor(id),
            StreamMode::ForcedLoop => d.predicted_next,
            StreamMode::Semantic => {
                let target = if d.taken.expect("executed") {
                    d.inst.branch_target(d.pc).expect("branch")
                } else {
                    d.pc as i64 + 1
                };
                self.stream.in_program(target)
            }
        };
        if actual == d.predicted_next {
            return false;
        }
        self.insts[id].mispredicted = true;
        self.squash_after(id, actual, now);
        true
    }

    /// Removes every instruction younger than `id` and redirects fetch to
    /// `target`, effective next cycle.
    fn squash_after(&mut self, id: DynId, target: Option<usize>, now: u64) {
        self.undo_latch_renames();
        self.d_latch.clear();
        self.f_latch.clear();
        let rob = self.insts[id].rob_id.expect("dispatched");
        self.machine.rob_rollback(rob, now).expect("branch is live");
        self.report.squashed += self.insts.len() - id - 1;
        self.insts.truncate(id + 1);
        let b = &self.insts[id];
        self.fetch_iteration = b.iteration + usize::from(target.is_some_and(|t| t <= b.pc));
        self.fetch_next = target;
        self.fetch_on_path = true;
        self.fetch_resume_at = now + 1 + self.cfg.redirect_penalty as u64;
    }

    // ---- issue / execute ----

    fn issue_execute(&mut self, now: u64) {
        let starting: Vec<DynId> =
            self.machine.fus.ops().filter(|op| op.x_start == now).map(|op| op.owner).collect();
        for id in starting {
            self.start_execution(id, now);
        }
        let same = self.cfg.wakeup_same_cycle;
        let m = &mut self.machine;
        let sel = m.iw.select(&mut m.fus, self.cfg.issue_width, now, same);
        let offset = u64::from(!self.cfg.issue_execute_same_cycle);
        for &(slot, unit) in &sel.issued {
            let record = self.machine.iw.remove(slot, now).expect("selected slot");
            let id = record.owner;
            let class = record.opcode.fu_class();
            self.insts[id].fired = Some(record);
            self.enter(id, Stage::I, now);
            self.machine.fus.start(id, class, unit, now, now + offset);
            if offset == 0 {
                self.start_execution(id, now);
            }
        }
        for &slot in &sel.fu_busy {
            let owner = self.machine.iw.get(slot).unwrap().owner;
            self.log(Stage::I, owner, StallReason::FuBusy, now);
        }
        for &slot in &sel.width_limited {
            let owner = self.machine.iw.get(slot).unwrap().owner;
            self.log(Stage::I, owner, StallReason::WidthLimit, now);
        }
        let waiting: Vec<DynId> = match self.cfg.operand_stalls {
            OperandStallPolicy::Oldest => self
                .machine
                .iw
                .oldest_waiting()
                .filter(|s| s.waits_on_operand(now, same))
                .map(|s| s.owner)
                .into_iter()
                .collect(),
            OperandStallPolicy::All => {
                let mut v: Vec<DynId> = self
                    .machine
                    .iw
                    .iter()
                    .filter(|s| s.waits_on_operand(now, same))
                    .map(|s| s.owner)
                    .collect();
                v.sort_unstable();
                v
            }
        };
        for owner in waiting {
            self.log(Stage::I, owner, StallReason::OperandPending, now);
        }
    }

    /// First execute slot: computes the result, branch outcome or effective
    /// address, and queues memory operations.
    fn start_execution(&mut self, id: DynId, now: u64) {
        self.enter(id, Stage::X, now);
        let file = &self.machine.regs.file;
        let d = &self.insts[id];
        let a = d.pj.map_or(0, |p| file.value(p));
        let b = d.pk.map_or(0, |p| file.value(p));
        let imm = d.inst.imm().unwrap_or(0);
        let opcode = d.inst.opcode;
        match opcode {
            Opcode::Add => self.insts[id].result = Some(a.wrapping_add(b)),
            Opcode::Addi => self.insts[id].result = Some(a.wrapping_add(imm)),
            Opcode::Mul => self.insts[id].result = Some(a.wrapping_mul(b)),
            Opcode::Beq => self.insts[id].taken = Some(a == b),
            Opcode::Bne => self.insts[id].taken = Some(a != b),
            Opcode::Lw | Opcode::Sw => {
                let efad = a as i64 + imm as i64;
                let exception = self.machine.mem.check(efad).err();
                let (reg, value_at) = if opcode == Opcode::Lw {
                    (d.dest.expect("load destination"), None)
                } else {
                    let pl = d.pl.expect("store value register");
                    let arrived = d.fired.as_ref().and_then(|s| s.pl).and_then(|s| s.ready_at);
                    let value_at = match arrived {
                        Some(c) => Some(c),
                        None if file.is_ready(pl) => Some(now),
                        None => None,
                    };
                    (pl, value_at)
                };
                let entry = LsqEntry {
                    owner: id,
                    pc: d.pc,
                    opcode,
                    efad,
                    reg,
                    value_at,
                    queued_at: now,
                    forwarded_at: None,
                };
                let queue = if opcode == Opcode::Lw { &mut self.machine.lq } else { &mut self.machine.sq };
                queue.enqueue(entry).expect("slot reserved at dispatch");
                let d = &mut self.insts[id];
                d.efad = Some(efad);
                d.exception = exception;
            }
        }
    }

    // ---- dispatch ----

    fn dispatch(&mut self, now: u64) {
        let width = self.cfg.dispatch_width;
        let mut n = 0;
        while n < width {
            let Some(&id) = self.d_latch.front() else { break };
            if let Some(hazard) = self.dispatch_hazard(id, now) {
                self.log(Stage::P, id, hazard, now);
                break;
            }
            self.d_latch.pop_front();
            self.dispatch_one(id, now);
            n += 1;
        }
        if n == width {
            if let Some(&id) = self.d_latch.front() {
                self.log(Stage::P, id, StallReason::WidthLimit, now);
            }
        }
    }

    fn dispatch_hazard(&self, id: DynId, now: u64) -> Option<StallReason> {
        let m = &self.machine;
        let op = self.insts[id].inst.opcode;
        if !m.iw.can_insert(now) {
            Some(StallReason::IwFull)
        } else if !m.rob.can_alloc() {
            Some(StallReason::RobFull)
        } else if op.is_load() && !m.lq.can_reserve() {
            Some(StallReason::LqFull)
        } else if op.is_store() && !m.sq.can_reserve() {
            Some(StallReason::SqFull)
        } else {
            None
        }
    }

    fn dispatch_one(&mut self, id: DynId, now: u64) {
        let d = &self.insts[id];
        let file = &self.machine.regs.file;
        let source = |p: PhysReg| Source { reg: p, ready_at: file.is_ready(p).then_some(now) };
        let mut record = IwSlot::record(id, d.inst.opcode, d.dest);
        record.pj = d.pj.map(source);
        record.pk = d.pk.map(source);
        record.pl = d.pl.map(source);
        record.imm = d.inst.imm();
        let mut rob = RobSlot::record(id, d.pc);
        rob.xi = d.inst.dest();
        rob.old_phys = d.old_dest;
        rob.dest_phys = d.dest;
        rob.store = d.inst.opcode.is_store();
        let op = d.inst.opcode;
        let m = &mut self.machine;
        m.iw.insert(record, now).expect("checked");
        let rob_id = m.rob.alloc(rob).expect("checked");
        if op.is_load() {
            m.lq.reserve(id).expect("checked");
        }
        if op.is_store() {
            m.sq.reserve(id).expect("checked");
        }
        self.insts[id].rob_id = Some(rob_id);
        self.enter(id, Stage::P, now);
    }

    // ---- decode / rename ----

    fn rename(&mut self, now: u64) {
        let width = self.cfg.decode_width;
        let mut n = 0;
        while n < width && self.d_latch.len() < width {
            let Some(&id) = self.f_latch.front() else { break };
            let inst = self.insts[id].inst;
            if inst.dest().is_some() && self.machine.regs.free.available() == 0 {
                self.log(Stage::D, id, StallReason::FreePoolEmpty, now);
                break;
            }
            let map = &self.machine.regs.map;
            let d = &mut self.insts[id];
            d.pj = inst.src_j().map(|x| map.get(x));
            d.pk = inst.src_k().map(|x| map.get(x));
            d.pl = inst.src_l().map(|x| map.get(x));
            if let Some(x) = inst.dest() {
                let (new, old) = self.machine.regs.rename_alloc(x).expect("checked");
                d.dest = Some(new);
                d.old_dest = Some(old);
            }
            self.f_latch.pop_front();
            self.d_latch.push_back(id);
            self.enter(id, Stage::D, now);
            n += 1;
        }
    }

    // ---- fetch ----

    fn fetch(&mut self, now: u64) {
        if now < self.fetch_resume_at {
            return;
        }
        let room = self.cfg.fetch_width.saturating_sub(self.f_latch.len());
        let mut fetched = 0;
        while fetched < room {
            let Some(pc) = self.fetch_next else { break };
            let id = self.insts.len();
            let inst = *self.prog.get(pc).expect("fetch target inside program");
            let iteration = match self.stream.mode {
                StreamMode::ForcedLoop if self.fetch_on_path => id / self.prog.len(),
                _ => self.fetch_iteration,
            };
            let on_path = self.fetch_on_path;
            let sequential = self.stream.in_program(pc as i64 + 1);
            let next = if inst.opcode.is_branch() {
                let taken = predict_taken(&inst, self.cfg.spec_policy);
                let target = if taken { inst.branch_target(pc).expect("branch") } else { pc as i64 + 1 };
                let predicted = self.stream.in_program(target);
                if self.stream.mode == StreamMode::ForcedLoop && on_path && predicted != self.stream.successor(id) {
                    self.fetch_on_path = false;
                }
                predicted
            } else if self.stream.mode == StreamMode::ForcedLoop && on_path {
                self.stream.successor(id)
            } else {
                sequential
            };
            if next.is_some_and(|t| t <= pc) {
                self.fetch_iteration = iteration + 1;
            }
            self.insts.push(DynInst {
                id,
                pc,
                iteration,
                inst,
                cycles: [None; 7],
                dest: None,
                old_dest: None,
                pj: None,
                pk: None,
                pl: None,
                fired: None,
                rob_id: None,
                predicted_next: inst.opcode.is_branch().then_some(next).flatten(),
                on_path,
                mispredicted: false,
                taken: None,
                result: None,
                efad: None,
                exception: None,
                addr_done: false,
            });
            self.f_latch.push_back(id);
            self.enter(id, Stage::F, now);
            self.fetch_next = next;
            fetched += 1;
            if inst.opcode.is_branch() {
                if fetched < room && next.is_some() {
                    self.log(Stage::F, id, StallReason::FetchBreak, now);
                }
                break;
            }
        }
    }

    // ---- checks ----

    /// Structural and timing invariants that must hold between cycles.
    pub fn check_invariants(&self) -> Result<(), String> {
        self.machine.check_invariants()?;
        let committed: Vec<DynId> = self.insts.iter().filter(|d| d.is_committed()).map(|d| d.id).collect();
        if committed.len() != self.committed || committed.iter().enumerate().any(|(i, &d)| i != d) {
            return Err("committed instructions are not a prefix of the stream".into());
        }
        for d in &self.insts {
            let set: Vec<(Stage, u64)> = Stage::ALL.iter().filter_map(|&s| d.at(s).map(|c| (s, c))).collect();
            for w in set.windows(2) {
                let ((s0, c0), (s1, c1)) = (w[0], w[1]);
                let ok = if s1 == Stage::C { c0 < c1 } else { c0 <= c1 };
                if !ok {
                    return Err(format!("instruction {}: {s0}={c0} but {s1}={c1}", d.id));
                }
            }
            let order_ok = Stage::ALL.iter().map(|&s| d.at(s).is_some()).collect::<Vec<_>>().windows(2).all(|w| w[0] || !w[1]);
            if !order_ok {
                return Err(format!("instruction {}: stage skipped", d.id));
            }
            if let (Some(i), Some(x)) = (d.at(Stage::I), d.at(Stage::X)) {
                let expect = u64::from(!self.cfg.issue_execute_same_cycle);
                if x - i != expect {
                    return Err(format!("instruction {}: X-I = {}", d.id, x - i));
                }
            }
        }
        if let Some(head) = self.machine.rob.head() {
            if head.owner != self.committed {
                return Err(format!("ROB head is {} but {} committed", head.owner, self.committed));
            }
        }
        Ok(())
    }

    /// Logical registers as seen through the Register Map.
    pub fn logical_regs(&self) -> Vec<(LogicalReg, PhysReg, bool, Word)> {
        let regs = &self.machine.regs;
        regs.map
            .iter()
            .map(|(x, p)| (x, p, regs.file.is_ready(p), regs.file.value(p)))
            .collect()
    }
}

fn stall_text(stage: Stage, reason: StallReason, d: &DynInst) -> String {
    let what = format!("{} (PC {})", d.inst, d.pc);
    match (stage, reason) {
        (_, StallReason::FreePoolEmpty) => format!("{what} cannot rename: no free physical register"),
        (_, StallReason::IwFull) => format!("{what} cannot dispatch: instruction window full"),
        (_, StallReason::RobFull) => format!("{what} cannot dispatch: reorder buffer full"),
        (_, StallReason::LqFull) => format!("{what} cannot dispatch: load queue full"),
        (_, StallReason::SqFull) => format!("{what} cannot dispatch: store queue full"),
        (_, StallReason::FuBusy) => {
            format!("{what} ready but no free {} unit", d.inst.opcode.fu_class().letter())
        }
        (Stage::X, StallReason::OperandPending) => format!("{what} waits for an older store"),
        (_, StallReason::OperandPending) => format!("{what} waits for a source operand"),
        (Stage::P, StallReason::WidthLimit) => format!("{what} cannot dispatch: dispatch width reached"),
        (Stage::C, StallReason::WidthLimit) => format!("{what} completed but commit width reached"),
        (_, StallReason::WidthLimit) => format!("{what} ready but issue width reached"),
        (_, StallReason::CommitBlocked) => format!("{what} completed but an older instruction has not"),
        (_, StallReason::FetchBreak) => format!("{what} ends the fetch group"),
    }
}

#[cfg(test)]
mod tests;
