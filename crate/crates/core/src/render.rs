//! Text output: the per-cycle screen, the machine-readable dump, the stall
//! log and the final statistics block.
//!
//! The screen and the dump are both produced from a [`Snapshot`], and a dump
//! block parses back into the same snapshot, so every screen can be rebuilt
//! from the dump.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::isa::{FuClass, Instruction, Opcode, Word};
use crate::microstate::{DynId, IwSlot, LsqEntry, Source};
use crate::pipeline::{SimState, Stage, StallEvent, StallReason, Stats};

/// A column that may not apply (`.`), be waiting for a value (`-`) or hold a
/// cycle number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flag {
    NotApplicable,
    Pending,
    At(u64),
}

impl Flag {
    fn of(src: Option<Source>) -> Flag {
        match src {
            None => Flag::NotApplicable,
            Some(Source { ready_at: None, .. }) => Flag::Pending,
            Some(Source { ready_at: Some(c), .. }) => Flag::At(c),
        }
    }

    fn text(self) -> String {
        match self {
            Flag::NotApplicable => ".".into(),
            Flag::Pending => "-".into(),
            Flag::At(c) => c.to_string(),
        }
    }

    fn parse(s: &str) -> Option<Flag> {
        match s {
            "." => Some(Flag::NotApplicable),
            "-" => Some(Flag::Pending),
            n => n.parse().ok().map(Flag::At),
        }
    }
}

/// How an instruction's IW number is shown.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IwMark {
    /// Not (yet) in the window.
    Absent,
    Waiting(usize),
    /// Issued in the cycle on screen.
    Issuing(usize),
    /// Issued earlier; the slot is free but the record stays visible.
    Fired,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhysRow {
    pub reg: u16,
    pub allocated: bool,
    pub ready: bool,
    pub value: Word,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicalRow {
    pub reg: u8,
    pub phys: u16,
    pub ready: bool,
    pub value: Word,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitRow {
    pub class: char,
    pub busy: usize,
    pub units: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstRow {
    pub id: DynId,
    pub pc: usize,
    pub iteration: usize,
    pub inst: Instruction,
    pub cycles: [Option<u64>; 7],
    pub iw: IwMark,
    pub pi: Option<u16>,
    pub pj: Option<u16>,
    pub pk: Option<u16>,
    pub issued: bool,
    pub cj: Flag,
    pub ck: Flag,
    pub rob: Option<usize>,
    pub xi: Option<u8>,
    pub opi: Option<u16>,
    pub s: bool,
    pub x: bool,
    pub c: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueueRow {
    pub owner: DynId,
    pub pc: usize,
    pub op: Opcode,
    pub efad: i64,
    pub reg: u16,
    pub cycle: Flag,
}

/// Everything shown on one screen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub cycle: u64,
    pub phys: Vec<PhysRow>,
    pub logical: Vec<LogicalRow>,
    pub stalls: [usize; 7],
    pub units: Vec<UnitRow>,
    /// (used, capacity) of IW, ROB, LQ and SQ.
    pub occupancy: [(usize, usize); 4],
    pub free_regs: usize,
    pub insts: Vec<InstRow>,
    pub lq: Vec<QueueRow>,
    pub sq: Vec<QueueRow>,
    pub events: Vec<StallEvent>,
}

fn iw_columns(slot: Option<&IwSlot>) -> (Flag, Flag) {
    slot.map_or((Flag::NotApplicable, Flag::NotApplicable), |s| (Flag::of(s.pj), Flag::of(s.pk)))
}

fn queue_row(e: &LsqEntry) -> QueueRow {
    QueueRow {
        owner: e.owner,
        pc: e.pc,
        op: e.opcode,
        efad: e.efad,
        reg: e.reg.0,
        cycle: e.display_cycle().map_or(Flag::Pending, Flag::At),
    }
}

impl Snapshot {
    /// State after the most recently simulated cycle.
    pub fn capture(st: &SimState) -> Snapshot {
        let now = st.cycle.saturating_sub(1);
        let m = &st.machine;
        let phys = m
            .regs
            .file
            .iter()
            .map(|(p, e)| PhysRow { reg: p.0, allocated: e.allocated, ready: e.ready, value: e.value })
            .collect();
        let logical = st
            .logical_regs()
            .into_iter()
            .map(|(x, p, ready, value)| LogicalRow { reg: x.0, phys: p.0, ready, value })
            .collect();
        let units = FuClass::ALL
            .iter()
            .map(|&c| UnitRow { class: c.letter(), busy: m.fus.busy_units(c, now), units: st.cfg.units(c) })
            .collect();
        let insts = st
            .insts
            .iter()
            .map(|d| {
                let live = m.iw.find_owner(d.id);
                let iw = match (live, &d.fired) {
                    (Some(s), _) => IwMark::Waiting(s.id),
                    (None, Some(f)) if d.at(Stage::I) == Some(now) => IwMark::Issuing(f.id),
                    (None, Some(_)) => IwMark::Fired,
                    (None, None) => IwMark::Absent,
                };
                let (cj, ck) = iw_columns(live.or(d.fired.as_ref()));
                let slot = d.rob_id.and_then(|r| m.rob.get(r)).filter(|s| s.owner == d.id);
                let in_rob = d.rob_id.is_some();
                InstRow {
                    id: d.id,
                    pc: d.pc,
                    iteration: d.iteration,
                    inst: d.inst,
                    cycles: d.cycles,
                    iw,
                    pi: d.dest.map(|p| p.0),
                    pj: d.pj.map(|p| p.0),
                    pk: d.pk.map(|p| p.0),
                    issued: d.fired.is_some(),
                    cj,
                    ck,
                    rob: d.rob_id,
                    xi: in_rob.then(|| d.inst.dest().map(|x| x.0)).flatten(),
                    opi: d.old_dest.filter(|_| in_rob).map(|p| p.0),
                    s: in_rob && d.inst.opcode.is_store(),
                    x: slot.map_or(d.exception.is_some() && d.is_committed(), |s| s.exception),
                    c: slot.map_or(d.is_committed(), |s| s.completed),
                }
            })
            .collect();
        Snapshot {
            cycle: now,
            phys,
            logical,
            stalls: st.stalls.counters(),
            units,
            occupancy: [
                (m.iw.occupied(), m.iw.capacity()),
                (m.rob.len(), m.rob.capacity()),
                (m.lq.used(), m.lq.capacity()),
                (m.sq.used(), m.sq.capacity()),
            ],
            free_regs: m.regs.free.len(),
            insts,
            lq: m.lq.iter().map(queue_row).collect(),
            sq: m.sq.iter().map(queue_row).collect(),
            events: st.stalls.in_cycle(now).cloned().collect(),
        }
    }
}

fn opt<T: ToString>(v: Option<T>, prefix: &str) -> String {
    v.map_or("-".into(), |v| format!("{prefix}{}", v.to_string()))
}

fn bit(b: bool) -> char {
    if b {
        '1'
    } else {
        '0'
    }
}

const OCCUPANCY_NAMES: [&str; 4] = ["IW", "ROB", "LQ", "SQ"];

/// The four-group screen for the last simulated cycle.
pub fn render_screen(st: &SimState) -> String {
    render_snapshot(&Snapshot::capture(st))
}

pub fn render_snapshot(s: &Snapshot) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "==================== cycle {} ====================", s.cycle);

    out.push_str("[1] physical registers   (* = allocated)\n");
    for chunk in s.phys.chunks(6) {
        let line: Vec<String> = chunk
            .iter()
            .map(|r| {
                let mark = if r.allocated { '*' } else { ' ' };
                format!("P{:<3}{mark} q={} v={:<6}", r.reg, bit(r.ready), r.value)
            })
            .collect();
        let _ = writeln!(out, "  {}", line.join("  ").trim_end());
    }

    out.push_str("[2] logical registers\n");
    for chunk in s.logical.chunks(4) {
        let line: Vec<String> = chunk
            .iter()
            .map(|r| format!("x{:<2}-> P{:<3} Q={} V={:<6}", r.reg, r.phys, bit(r.ready), r.value))
            .collect();
        let _ = writeln!(out, "  {}", line.join("  ").trim_end());
    }

    out.push_str("[3] resources\n");
    let stalls: Vec<String> = Stage::ALL.iter().map(|st| format!("{}:{}", st.letter(), s.stalls[st.index()])).collect();
    let _ = writeln!(out, "  stalls  {}", stalls.join(" "));
    let units: Vec<String> = s.units.iter().map(|u| format!("{}:{}/{}", u.class, u.busy, u.units)).collect();
    let _ = writeln!(out, "  units   {}", units.join(" "));
    let occ: Vec<String> = OCCUPANCY_NAMES
        .iter()
        .zip(s.occupancy)
        .map(|(n, (used, cap))| format!("{n}:{used}/{cap}"))
        .collect();
    let _ = writeln!(out, "  used    {} FP:{}", occ.join(" "), s.free_regs);

    out.push_str("[4] instructions\n");
    let _ = writeln!(
        out,
        "  {:>3} {:>2} {:<18}|{:>3}{:>3}{:>3}{:>3}{:>3}{:>3}{:>3} | {:>4} {:<4} {:>4} {:>4} {:>4} {} {:>3} {:>3} | {:>4} {:>2} {:>3} {:>4} s x c",
        "PC", "it", "instruction", "F", "D", "P", "I", "X", "W", "C", "IW#", "OPCD", "Pi", "Pj", "Pk", "I", "Cj", "Ck", "ROB#",
        "PC", "xi", "oPi"
    );
    for r in &s.insts {
        let cyc: String = r.cycles.iter().map(|c| format!("{:>3}", c.map_or(".".into(), |c| c.to_string()))).collect();
        let iw = match r.iw {
            IwMark::Absent => String::new(),
            IwMark::Waiting(n) => n.to_string(),
            IwMark::Issuing(n) => format!(">{n}"),
            IwMark::Fired => "-".into(),
        };
        let in_iw = r.iw != IwMark::Absent;
        let iw_cols = if in_iw {
            format!(
                "{:>4} {:<4} {:>4} {:>4} {:>4} {} {:>3} {:>3}",
                iw,
                r.inst.opcode.mnemonic(),
                opt(r.pi, "P"),
                opt(r.pj, "P"),
                opt(r.pk, "P"),
                bit(r.issued),
                r.cj.text(),
                r.ck.text()
            )
        } else {
            format!("{:>4} {:<4} {:>4} {:>4} {:>4} {} {:>3} {:>3}", "", "", "", "", "", ' ', "", "")
        };
        let rob_cols = match r.rob {
            Some(n) => format!(
                "{:>4} {:>2} {:>3} {:>4} {} {} {}",
                n,
                r.pc,
                opt(r.xi, "x"),
                opt(r.opi, "P"),
                bit(r.s),
                bit(r.x),
                bit(r.c)
            ),
            None => String::new(),
        };
        let line = format!(
            "  {:>3} {:>2} {:<18}|{} | {} | {}",
            r.pc,
            r.iteration,
            r.inst.to_string(),
            cyc,
            iw_cols,
            rob_cols
        );
        let _ = writeln!(out, "{}", line.trim_end());
    }
    for (name, reg, rows) in [("LQ", "Pi Ci", &s.lq), ("SQ", "Pl Cl", &s.sq)] {
        let _ = writeln!(out, "  {name}: PC OP EFAD {reg}");
        for q in rows.iter() {
            let _ = writeln!(out, "      {:>2} {:<2} {:>4} P{} {}", q.pc, q.op.mnemonic(), q.efad, q.reg, q.cycle.text());
        }
    }

    if s.events.is_empty() {
        out.push_str("stalls this cycle: none\n");
    } else {
        out.push_str("stalls this cycle:\n");
        for e in &s.events {
            let _ = writeln!(out, "  [{}] {}: {}", e.stage, e.reason, e.text);
        }
    }
    out
}

// ---- dump ----

/// One dump block. Lines are `key=value` fields separated by spaces; a
/// `text=` field runs to the end of its line.
pub fn dump_snapshot(s: &Snapshot) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "cycle={}", s.cycle);
    for r in &s.phys {
        let _ = writeln!(out, "preg p={} alloc={} q={} v={}", r.reg, bit(r.allocated), bit(r.ready), r.value);
    }
    for r in &s.logical {
        let _ = writeln!(out, "lreg x={} p={} q={} v={}", r.reg, r.phys, bit(r.ready), r.value);
    }
    let stalls: Vec<String> = Stage::ALL.iter().map(|st| format!("{}={}", st.letter(), s.stalls[st.index()])).collect();
    let _ = writeln!(out, "stalls {}", stalls.join(" "));
    for u in &s.units {
        let _ = writeln!(out, "unit class={} busy={} units={}", u.class, u.busy, u.units);
    }
    let occ: Vec<String> = OCCUPANCY_NAMES
        .iter()
        .zip(s.occupancy)
        .map(|(n, (u, c))| format!("{}={u}/{c}", n.to_lowercase()))
        .collect();
    let _ = writeln!(out, "used {} fp={}", occ.join(" "), s.free_regs);
    for r in &s.insts {
        let cyc: Vec<String> = Stage::ALL
            .iter()
            .map(|st| format!("{}={}", st.letter(), r.cycles[st.index()].map_or("-".into(), |c| c.to_string())))
            .collect();
        let iw = match r.iw {
            IwMark::Absent => ".".into(),
            IwMark::Waiting(n) => n.to_string(),
            IwMark::Issuing(n) => format!(">{n}"),
            IwMark::Fired => "-".into(),
        };
        let o = |v: Option<u16>| v.map_or("-".into(), |v| v.to_string());
        let _ = writeln!(
            out,
            "inst id={} pc={} it={} op={} a={} b={} c={} {} iw={} pi={} pj={} pk={} issued={} cj={} ck={} rob={} xi={} opi={} s={} x={} done={}",
            r.id,
            r.pc,
            r.iteration,
            r.inst.opcode.code(),
            r.inst.op1,
            r.inst.op2,
            r.inst.op3,
            cyc.join(" "),
            iw,
            o(r.pi),
            o(r.pj),
            o(r.pk),
            bit(r.issued),
            r.cj.text(),
            r.ck.text(),
            r.rob.map_or("-".into(), |n| n.to_string()),
            r.xi.map_or("-".into(), |x| x.to_string()),
            o(r.opi),
            bit(r.s),
            bit(r.x),
            bit(r.c)
        );
    }
    for (name, rows) in [("lq", &s.lq), ("sq", &s.sq)] {
        for q in rows.iter() {
            let _ = writeln!(
                out,
                "{name} id={} pc={} op={} efad={} reg={} cyc={}",
                q.owner,
                q.pc,
                q.op.code(),
                q.efad,
                q.reg,
                q.cycle.text()
            );
        }
    }
    for e in &s.events {
        let _ = writeln!(out, "{}", stall_line(e).replacen("cycle=", "stall cycle=", 1));
    }
    out.push_str("end\n");
    out
}

pub fn dump_cycle(st: &SimState) -> String {
    dump_snapshot(&Snapshot::capture(st))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("dump line {line}: {message}")]
pub struct DumpError {
    pub line: usize,
    pub message: String,
}

struct Fields<'a> {
    pairs: Vec<(&'a str, &'a str)>,
    text: Option<&'a str>,
}

impl<'a> Fields<'a> {
    fn split(rest: &'a str) -> Fields<'a> {
        let (head, text) = match rest.find(" :: ") {
            Some(i) => (&rest[..i], Some(&rest[i + 4..])),
            None => (rest, None),
        };
        let pairs = head.split_whitespace().filter_map(|t| t.split_once('=')).collect();
        Fields { pairs, text }
    }

    fn raw(&self, key: &str) -> Result<&'a str, String> {
        self.pairs.iter().find(|(k, _)| *k == key).map(|(_, v)| *v).ok_or_else(|| format!("missing {key}"))
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<T, String> {
        let v = self.raw(key)?;
        v.parse().map_err(|_| format!("bad {key}={v}"))
    }

    fn bit(&self, key: &str) -> Result<bool, String> {
        Ok(self.num::<u8>(key)? == 1)
    }

    fn opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, String> {
        match self.raw(key)? {
            "-" => Ok(None),
            _ => self.num(key).map(Some),
        }
    }

    fn flag(&self, key: &str) -> Result<Flag, String> {
        let v = self.raw(key)?;
        Flag::parse(v).ok_or_else(|| format!("bad {key}={v}"))
    }
}

fn parse_used(v: &str) -> Result<(usize, usize), String> {
    let (a, b) = v.split_once('/').ok_or_else(|| format!("bad occupancy {v}"))?;
    Ok((a.parse().map_err(|_| format!("bad occupancy {v}"))?, b.parse().map_err(|_| format!("bad occupancy {v}"))?))
}

fn parse_line(s: &mut Snapshot, line: &str) -> Result<(), String> {
    let (kind, rest) = line.split_once(' ').unwrap_or((line, ""));
    let f = Fields::split(rest);
    match kind {
        "preg" => s.phys.push(PhysRow { reg: f.num("p")?, allocated: f.bit("alloc")?, ready: f.bit("q")?, value: f.num("v")? }),
        "lreg" => s.logical.push(LogicalRow { reg: f.num("x")?, phys: f.num("p")?, ready: f.bit("q")?, value: f.num("v")? }),
        "stalls" => {
            for st in Stage::ALL {
                s.stalls[st.index()] = f.num(&st.letter().to_string())?;
            }
        }
        "unit" => {
            let class = f.raw("class")?.chars().next().ok_or("empty class")?;
            s.units.push(UnitRow { class, busy: f.num("busy")?, units: f.num("units")? });
        }
        "used" => {
            for (i, n) in OCCUPANCY_NAMES.iter().enumerate() {
                s.occupancy[i] = parse_used(f.raw(&n.to_lowercase())?)?;
            }
            s.free_regs = f.num("fp")?;
        }
        "inst" => {
            let opcode = Opcode::from_code(f.num("op")?).ok_or("bad opcode")?;
            let inst = Instruction::new(opcode, f.num("a")?, f.num("b")?, f.num("c")?);
            let mut cycles = [None; 7];
            for st in Stage::ALL {
                cycles[st.index()] = f.opt(&st.letter().to_string())?;
            }
            let iw = match f.raw("iw")? {
                "." => IwMark::Absent,
                "-" => IwMark::Fired,
                v => match v.strip_prefix('>') {
                    Some(n) => IwMark::Issuing(n.parse().map_err(|_| format!("bad iw={v}"))?),
                    None => IwMark::Waiting(v.parse().map_err(|_| format!("bad iw={v}"))?),
                },
            };
            s.insts.push(InstRow {
                id: f.num("id")?,
                pc: f.num("pc")?,
                iteration: f.num("it")?,
                inst,
                cycles,
                iw,
                pi: f.opt("pi")?,
                pj: f.opt("pj")?,
                pk: f.opt("pk")?,
                issued: f.bit("issued")?,
                cj: f.flag("cj")?,
                ck: f.flag("ck")?,
                rob: f.opt("rob")?,
                xi: f.opt("xi")?,
                opi: f.opt("opi")?,
                s: f.bit("s")?,
                x: f.bit("x")?,
                c: f.bit("done")?,
            });
        }
        "lq" | "sq" => {
            let row = QueueRow {
                owner: f.num("id")?,
                pc: f.num("pc")?,
                op: Opcode::from_code(f.num("op")?).ok_or("bad opcode")?,
                efad: f.num("efad")?,
                reg: f.num("reg")?,
                cycle: f.flag("cyc")?,
            };
            if kind == "lq" { s.lq.push(row) } else { s.sq.push(row) }
        }
        "stall" => {
            let letter = f.raw("stage")?.chars().next().ok_or("empty stage")?;
            s.events.push(StallEvent {
                cycle: f.num("cycle")?,
                stage: Stage::from_letter(letter).ok_or("bad stage")?,
                inst: f.num("inst")?,
                pc: f.num("pc")?,
                reason: StallReason::from_code(f.raw("reason")?).ok_or("bad reason")?,
                text: f.text.unwrap_or("").to_string(),
            });
        }
        other => return Err(format!("unknown record {other}")),
    }
    Ok(())
}

/// Parses a whole dump back into its per-cycle snapshots.
pub fn parse_dump(text: &str) -> Result<Vec<Snapshot>, DumpError> {
    let mut out = Vec::new();
    let mut cur: Option<Snapshot> = None;
    for (i, line) in text.lines().enumerate() {
        let err = |message: String| DumpError { line: i + 1, message };
        if let Some(c) = line.strip_prefix("cycle=") {
            let cycle = c.parse().map_err(|_| err(format!("bad cycle {c}")))?;
            cur = Some(Snapshot {
                cycle,
                phys: Vec::new(),
                logical: Vec::new(),
                stalls: [0; 7],
                units: Vec::new(),
                occupancy: [(0, 0); 4],
                free_regs: 0,
                insts: Vec::new(),
                lq: Vec::new(),
                sq: Vec::new(),
                events: Vec::new(),
            });
        } else if line == "end" {
            out.push(cur.take().ok_or_else(|| err("end without cycle".into()))?);
        } else {
            let s = cur.as_mut().ok_or_else(|| err("record outside a cycle block".into()))?;
            parse_line(s, line).map_err(err)?;
        }
    }
    if cur.is_some() {
        return Err(DumpError { line: text.lines().count(), message: "unterminated cycle block".into() });
    }
    Ok(out)
}

// ---- stall log ----

/// `cycle=<n> stage=<L> reason=<CODE> inst=<dynId> pc=<p> :: <text>`
pub fn stall_line(e: &StallEvent) -> String {
    format!("cycle={} stage={} reason={} inst={} pc={} :: {}", e.cycle, e.stage, e.reason, e.inst, e.pc, e.text)
}

pub fn stall_log_text(events: &[StallEvent]) -> String {
    events.iter().map(|e| stall_line(e) + "\n").collect()
}

/// Writes one line per event; an empty log still creates the file.
pub fn write_stall_log(events: &[StallEvent], path: &Path) -> io::Result<()> {
    std::fs::write(path, stall_log_text(events))
}

/// Per-stage line counts of a stall log.
pub fn count_log_stages(text: &str) -> [usize; 7] {
    let mut counts = [0; 7];
    for line in text.lines() {
        let stage = line
            .split_whitespace()
            .find_map(|t| t.strip_prefix("stage="))
            .and_then(|l| l.chars().next())
            .and_then(Stage::from_letter);
        if let Some(s) = stage {
            counts[s.index()] += 1;
        }
    }
    counts
}

// ---- statistics ----

pub fn stats_text(s: &Stats) -> String {
    let at = |st: Stage| s.stalls_at(st);
    format!(
        "CTOT {} cycles, {} committed, IPC {}\nstalls: {} (D), {} (P), {} (I), {} (C)\nother stalls: {} (F), {} (X), {} (W)\n",
        s.ctot,
        s.committed,
        s.ipc_text(),
        at(Stage::D),
        at(Stage::P),
        at(Stage::I),
        at(Stage::C),
        at(Stage::F),
        at(Stage::X),
        at(Stage::W)
    )
}

/// Final statistics and their text block.
pub fn stats_summary(st: &SimState) -> (Stats, String) {
    let s = st.stats();
    let text = stats_text(&s);
    (s, text)
}
