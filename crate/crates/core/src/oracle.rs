//! In-order, one-instruction-at-a-time reference executor.

use std::fmt;

use thiserror::Error;

use crate::config::{ArchConfig, InitialState, StreamMode};
use crate::isa::{Opcode, Program, Word};
use crate::microstate::{DataMemory, MemError};

/// Step guard for semantic mode.
pub const ORACLE_STEP_LIMIT: usize = 100_000;

/// Architectural registers and memory after a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchState {
    pub regs: Vec<Word>,
    pub mem: DataMemory,
    pub committed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("instruction {index} (PC {pc}): {error}")]
    Memory { index: usize, pc: usize, error: MemError },
    #[error("program did not terminate within {0} instructions")]
    StepLimit(usize),
}

/// Runs the dynamic stream sequentially: the program repeated
/// `cfg.iterations` times in forced-loop mode, or following computed branch
/// outcomes until the PC leaves the program in semantic mode.
pub fn execute_inorder(prog: &Program, cfg: &ArchConfig, init: &InitialState) -> Result<ArchState, OracleError> {
    let mut regs = vec![0 as Word; cfg.logical_regs];
    for &(r, v) in &init.regs {
        regs[r] = v;
    }
    let mut mem = DataMemory::new(cfg.memory_bytes);
    for &(a, v) in &init.mem {
        mem.write(a as i64, v).map_err(|error| OracleError::Memory { index: 0, pc: 0, error })?;
    }
    let mut pc = 0usize;
    let mut count = 0usize;
    let total = match cfg.stream_mode {
        StreamMode::ForcedLoop => Some(prog.len() * cfg.iterations),
        StreamMode::Semantic => None,
    };
    loop {
        match total {
            Some(t) if count == t => break,
            None if pc == prog.len() => break,
            None if count == ORACLE_STEP_LIMIT => return Err(OracleError::StepLimit(count)),
            _ => {}
        }
        if total.is_some() {
            pc = count % prog.len();
        }
        let inst = prog.get(pc).expect("pc inside program");
        let r = |x: Option<crate::isa::LogicalReg>| x.map_or(0, |x| regs[x.index()]);
        let (a, b) = (r(inst.src_j()), r(inst.src_k()));
        let imm = inst.imm().unwrap_or(0);
        let fail = |error| OracleError::Memory { index: count, pc, error };
        let mut next = pc + 1;
        match inst.opcode {
            Opcode::Add => regs[inst.op1 as usize] = a.wrapping_add(b),
            Opcode::Addi => regs[inst.op1 as usize] = a.wrapping_add(imm),
            Opcode::Mul => regs[inst.op1 as usize] = a.wrapping_mul(b),
            Opcode::Lw => regs[inst.op1 as usize] = mem.read(a as i64 + imm as i64).map_err(fail)?,
            Opcode::Sw => mem.write(a as i64 + imm as i64, r(inst.src_l())).map_err(fail)?,
            Opcode::Beq | Opcode::Bne => {
                let taken = (a == b) == (inst.opcode == Opcode::Beq);
                if taken {
                    next = inst.branch_target(pc).expect("branch") as usize;
                }
            }
        }
        count += 1;
        pc = next;
    }
    Ok(ArchState { regs, mem, committed: count })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mismatch {
    Register { index: usize, expected: Word, actual: Word },
    Memory { addr: u32, expected: Word, actual: Word },
    Committed { expected: usize, actual: usize },
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mismatch::Register { index, expected, actual } => {
                write!(f, "x{index}: expected {expected}, simulator has {actual}")
            }
            Mismatch::Memory { addr, expected, actual } => {
                write!(f, "Mem[{addr}]: expected {expected}, simulator has {actual}")
            }
            Mismatch::Committed { expected, actual } => {
                write!(f, "committed: expected {expected}, simulator has {actual}")
            }
        }
    }
}

/// Differences between the reference state `expected` and the simulator's
/// final view `actual`. Empty when they agree.
pub fn compare_states(expected: &ArchState, actual: &ArchState) -> Vec<Mismatch> {
    let mut out = Vec::new();
    for (index, (&e, &a)) in expected.regs.iter().zip(&actual.regs).enumerate() {
        if e != a {
            out.push(Mismatch::Register { index, expected: e, actual: a });
        }
    }
    for (i, (&e, &a)) in expected.mem.words().iter().zip(actual.mem.words()).enumerate() {
        if e != a {
            out.push(Mismatch::Memory { addr: i as u32 * 4, expected: e, actual: a });
        }
    }
    if expected.committed != actual.committed {
        out.push(Mismatch::Committed { expected: expected.committed, actual: actual.committed });
    }
    out
}

/// Human-readable comparison report.
pub fn report(mismatches: &[Mismatch]) -> String {
    if mismatches.is_empty() {
        return "verify: simulator matches in-order execution\n".to_string();
    }
    let mut s = format!("verify: {} mismatch(es)\n", mismatches.len());
    for m in mismatches {
        s.push_str(&format!("  {m}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::load_program;

    fn run(text: &str, iterations: usize) -> ArchState {
        let mut cfg = ArchConfig::default();
        cfg.iterations = iterations;
        execute_inorder(&load_program(text, 8).unwrap(), &cfg, &InitialState::default()).unwrap()
    }

    #[test]
    fn addi_from_zero() {
        assert_eq!(run("2 1 0 5\n", 1).regs[1], 5);
    }

    #[test]
    fn square() {
        assert_eq!(run("2 1 0 5\n7 2 1 1\n", 1).regs[2], 25);
    }

    #[test]
    fn forced_loop_repeats() {
        let s = run("2 1 1 3\n6 1 0 -1\n", 3);
        assert_eq!(s.regs[1], 9);
        assert_eq!(s.committed, 6);
    }

    #[test]
    fn store_then_load() {
        let s = run("2 1 0 42\n4 1 0 128\n3 2 0 128\n", 1);
        assert_eq!(s.regs[2], 42);
        assert_eq!(s.mem.read(128), Ok(42));
    }

    #[test]
    fn semantic_loop_counts_down() {
        let mut cfg = ArchConfig::default();
        cfg.stream_mode = StreamMode::Semantic;
        let prog = load_program("2 1 0 4\n2 2 2 1\n2 1 1 -1\n6 1 0 -2\n", 8).unwrap();
        let s = execute_inorder(&prog, &cfg, &InitialState::default()).unwrap();
        assert_eq!((s.regs[1], s.regs[2], s.committed), (0, 4, 1 + 3 * 4));
    }

    #[test]
    fn semantic_infinite_loop_is_bounded() {
        let mut cfg = ArchConfig::default();
        cfg.stream_mode = StreamMode::Semantic;
        let prog = load_program("5 0 0 0\n", 8).unwrap();
        assert_eq!(execute_inorder(&prog, &cfg, &InitialState::default()), Err(OracleError::StepLimit(ORACLE_STEP_LIMIT)));
    }

    #[test]
    fn misaligned_load_fails() {
        let prog = load_program("3 1 0 130\n", 8).unwrap();
        let err = execute_inorder(&prog, &ArchConfig::default(), &InitialState::default()).unwrap_err();
        assert_eq!(err, OracleError::Memory { index: 0, pc: 0, error: MemError::Misaligned(130) });
    }

    #[test]
    fn compare_identical_and_different() {
        let a = run("2 1 0 5\n4 1 0 64\n", 1);
        assert!(compare_states(&a, &a).is_empty());
        let mut b = a.clone();
        b.regs[1] = 6;
        b.mem.write(64, 0).unwrap();
        let m = compare_states(&a, &b);
        assert_eq!(
            m,
            vec![
                Mismatch::Register { index: 1, expected: 5, actual: 6 },
                Mismatch::Memory { addr: 64, expected: 5, actual: 0 }
            ]
        );
    }

    #[test]
    fn memory_only_program_has_equal_registers() {
        let a = run("4 0 0 8\n", 1);
        let b = run("4 0 0 8\n", 1);
        assert!(compare_states(&a, &b).iter().all(|m| !matches!(m, Mismatch::Register { .. })));
    }
}
