//! Cycle-accurate model of an out-of-order superscalar core driven by a
//! seven-instruction educational ISA.

pub mod bundled;
pub mod config;
pub mod isa;
pub mod microstate;
pub mod oracle;
pub mod pipeline;
pub mod render;

pub use bundled::{bundled_example, BundledExample};
pub use config::{ArchConfig, ConfigError, InitialState, Invocation, OperandStallPolicy, ProgramSource, SpecPolicy, StreamMode};
pub use isa::{load_program, DecodeError, FuClass, Instruction, Opcode, Program, Word};
pub use oracle::{compare_states, execute_inorder, ArchState, Mismatch};
pub use pipeline::{SimError, SimState, Stage, StallEvent, StallReason, Stats};
