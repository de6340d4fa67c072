//! The three shipped examples. Example 3 runs example 2's program on a
//! machine whose dispatch and issue stages are two wide.

use crate::config::{ArchConfig, SpecPolicy};
use crate::isa::{load_program, Program};

pub const EX1_SOURCE: &str = include_str!("../programs/ex1.prog");
pub const EX2_SOURCE: &str = include_str!("../programs/ex2.prog");

#[derive(Debug, Clone)]
pub struct BundledExample {
    pub number: u8,
    pub name: &'static str,
    pub source: &'static str,
    pub config: ArchConfig,
}

impl BundledExample {
    pub fn program(&self) -> Program {
        load_program(self.source, self.config.logical_regs).expect("bundled program is valid")
    }
}

/// Configuration of example 2: larger window, ROB and register file than
/// the defaults, and backward-taken prediction for its forward exit branch.
pub fn ex2_config() -> ArchConfig {
    let mut cfg = ArchConfig::default();
    cfg.iw_slots = 12;
    cfg.phys_regs = 12;
    cfg.rob_slots = 12;
    cfg.spec_policy = SpecPolicy::BackwardTaken;
    cfg
}

/// Example 2 narrowed to two-wide dispatch and issue.
pub fn ex3_config() -> ArchConfig {
    let mut cfg = ex2_config();
    cfg.dispatch_width = 2;
    cfg.issue_width = 2;
    cfg
}

/// Example `k` (1..=3).
pub fn bundled_example(k: u8) -> Option<BundledExample> {
    let (name, source, config) = match k {
        1 => ("ex1", EX1_SOURCE, ArchConfig::default()),
        2 => ("ex2", EX2_SOURCE, ex2_config()),
        3 => ("ex3", EX2_SOURCE, ex3_config()),
        _ => return None,
    };
    Some(BundledExample { number: k, name, source, config })
}
