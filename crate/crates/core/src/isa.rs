//! The seven-instruction machine code accepted by the simulator.
//!
//! Programs are written directly as numeric machine code: one instruction per
//! line, four whitespace-separated signed decimal integers
//! `opcode op1 op2 op3`. A `#` starts a comment and blank lines are ignored.
//!
//! | mnemonic | opcode | fields            | semantics               | unit |
//! |----------|--------|-------------------|-------------------------|------|
//! | ADD      | 1      | `xi xj xk`        | `xi <- xj + xk`         | A    |
//! | ADDI     | 2      | `xi xj I`         | `xi <- xj + I`          | A    |
//! | LW       | 3      | `xi xj I`         | `xi <- Mem[xj + I]`     | L    |
//! | SW       | 4      | `xi xj I`         | `Mem[xj + I] <- xi`     | S    |
//! | BEQ      | 5      | `xi xj I`         | `if xi == xj: pc += I`  | B    |
//! | BNE      | 6      | `xi xj I`         | `if xi != xj: pc += I`  | B    |
//! | MUL      | 7      | `xi xj xk`        | `xi <- xj * xk`         | M    |
//!
//! Branch displacements count instructions relative to the branch itself,
//! positive forward and negative backward.

use std::fmt;

use thiserror::Error;

/// Machine word. All arithmetic wraps.
pub type Word = i32;

/// Default number of architectural registers (`x0`..`x7`).
pub const DEFAULT_LOGICAL_REGS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Opcode {
    Add = 1,
    Addi = 2,
    Lw = 3,
    Sw = 4,
    Beq = 5,
    Bne = 6,
    Mul = 7,
}

impl Opcode {
    pub const ALL: [Opcode; 7] = [
        Opcode::Add,
        Opcode::Addi,
        Opcode::Lw,
        Opcode::Sw,
        Opcode::Beq,
        Opcode::Bne,
        Opcode::Mul,
    ];

    pub fn from_code(code: i64) -> Option<Opcode> {
        Self::ALL.into_iter().find(|op| op.code() as i64 == code)
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            Opcode::Add => "ADD",
            Opcode::Addi => "ADDI",
            Opcode::Lw => "LW",
            Opcode::Sw => "SW",
            Opcode::Beq => "BEQ",
            Opcode::Bne => "BNE",
            Opcode::Mul => "MUL",
        }
    }

    pub fn fu_class(self) -> FuClass {
        match self {
            Opcode::Add | Opcode::Addi => FuClass::A,
            Opcode::Mul => FuClass::M,
            Opcode::Lw => FuClass::L,
            Opcode::Sw => FuClass::S,
            Opcode::Beq | Opcode::Bne => FuClass::B,
        }
    }

    pub fn is_branch(self) -> bool {
        matches!(self, Opcode::Beq | Opcode::Bne)
    }

    pub fn is_load(self) -> bool {
        self == Opcode::Lw
    }

    pub fn is_store(self) -> bool {
        self == Opcode::Sw
    }

    /// True if the instruction produces a register result and therefore
    /// needs a rename destination.
    pub fn writes_register(self) -> bool {
        matches!(self, Opcode::Add | Opcode::Addi | Opcode::Lw | Opcode::Mul)
    }

    fn third_is_register(self) -> bool {
        matches!(self, Opcode::Add | Opcode::Mul)
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

/// Functional-unit classes. `F` and `X` (floating point) exist for
/// accounting only; no instruction of the ISA executes on them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FuClass {
    A,
    M,
    L,
    S,
    B,
    F,
    X,
}

impl FuClass {
    pub const ALL: [FuClass; 7] = [
        FuClass::A,
        FuClass::M,
        FuClass::L,
        FuClass::S,
        FuClass::B,
        FuClass::F,
        FuClass::X,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        match self {
            FuClass::A => 'A',
            FuClass::M => 'M',
            FuClass::L => 'L',
            FuClass::S => 'S',
            FuClass::B => 'B',
            FuClass::F => 'F',
            FuClass::X => 'X',
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            FuClass::A => "ALU",
            FuClass::M => "integer multiplier",
            FuClass::L => "load unit",
            FuClass::S => "store unit",
            FuClass::B => "branch unit",
            FuClass::F => "floating-point add/sub",
            FuClass::X => "floating-point mul/div",
        }
    }
}

/// Index of an architectural register `x0`..`x{n-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LogicalReg(pub u8);

impl LogicalReg {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for LogicalReg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

/// A decoded static instruction. The three operand fields are kept exactly as
/// encoded; the accessors apply the per-opcode interpretation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Instruction {
    pub opcode: Opcode,
    pub op1: i32,
    pub op2: i32,
    pub op3: i32,
}

impl Instruction {
    pub fn new(opcode: Opcode, op1: i32, op2: i32, op3: i32) -> Self {
        Instruction { opcode, op1, op2, op3 }
    }

    pub fn encode(&self) -> [i32; 4] {
        [self.opcode.code() as i32, self.op1, self.op2, self.op3]
    }

    fn reg(field: i32) -> LogicalReg {
        LogicalReg(field as u8)
    }

    /// Destination register, for instructions that write one.
    pub fn dest(&self) -> Option<LogicalReg> {
        self.opcode.writes_register().then(|| Self::reg(self.op1))
    }

    /// First source: `xj` for arithmetic, the base register for memory
    /// operations, the first compared register for branches.
    pub fn src_j(&self) -> Option<LogicalReg> {
        match self.opcode {
            Opcode::Beq | Opcode::Bne => Some(Self::reg(self.op1)),
            _ => Some(Self::reg(self.op2)),
        }
    }

    /// Second source: `xk` for ADD/MUL, the second compared register for
    /// branches.
    pub fn src_k(&self) -> Option<LogicalReg> {
        match self.opcode {
            Opcode::Add | Opcode::Mul => Some(Self::reg(self.op3)),
            Opcode::Beq | Opcode::Bne => Some(Self::reg(self.op2)),
            _ => None,
        }
    }

    /// Store value register. It is not needed to issue the store, only to
    /// complete it.
    pub fn src_l(&self) -> Option<LogicalReg> {
        self.opcode.is_store().then(|| Self::reg(self.op1))
    }

    pub fn imm(&self) -> Option<i32> {
        (!self.opcode.third_is_register()).then_some(self.op3)
    }

    /// Static index of the taken-branch target.
    pub fn branch_target(&self, index: usize) -> Option<i64> {
        self.opcode
            .is_branch()
            .then(|| index as i64 + self.op3 as i64)
    }

    fn registers(&self) -> impl Iterator<Item = i32> {
        let third = self.opcode.third_is_register().then_some(self.op3);
        [Some(self.op1), Some(self.op2), third].into_iter().flatten()
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = self.opcode.mnemonic();
        match self.opcode {
            Opcode::Add | Opcode::Mul => {
                write!(f, "{op} x{}, x{}, x{}", self.op1, self.op2, self.op3)
            }
            Opcode::Addi | Opcode::Beq | Opcode::Bne => {
                write!(f, "{op} x{}, x{}, {}", self.op1, self.op2, self.op3)
            }
            Opcode::Lw | Opcode::Sw => {
                write!(f, "{op} x{}, {}(x{})", self.op1, self.op3, self.op2)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeErrorKind {
    #[error("expected 4 integer fields, found {0}")]
    TokenCount(usize),
    #[error("field {0:?} is not a decimal integer")]
    NotAnInteger(String),
    #[error("unknown opcode {0}")]
    UnknownOpcode(i64),
    #[error("register index {index} out of range (0..{limit})")]
    RegisterOutOfRange { index: i32, limit: usize },
    #[error("empty program")]
    EmptyProgram,
    #[error("branch target {target} outside the program (0..={len})")]
    BranchTarget { target: i64, len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct DecodeError {
    pub line: usize,
    pub kind: DecodeErrorKind,
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    }
}

fn parse_fields(line: &str) -> Result<[i64; 4], DecodeErrorKind> {
    let tokens: Vec<&str> = strip_comment(line).split_whitespace().collect();
    if tokens.len() != 4 {
        return Err(DecodeErrorKind::TokenCount(tokens.len()));
    }
    let mut fields = [0i64; 4];
    for (slot, tok) in fields.iter_mut().zip(&tokens) {
        *slot = tok
            .parse::<i32>()
            .map_err(|_| DecodeErrorKind::NotAnInteger(tok.to_string()))? as i64;
    }
    Ok(fields)
}

fn decode_fields(fields: [i64; 4], num_regs: usize) -> Result<Instruction, DecodeErrorKind> {
    let opcode = Opcode::from_code(fields[0]).ok_or(DecodeErrorKind::UnknownOpcode(fields[0]))?;
    let inst = Instruction::new(opcode, fields[1] as i32, fields[2] as i32, fields[3] as i32);
    if let Some(bad) = inst.registers().find(|&r| r < 0 || r as usize >= num_regs) {
        return Err(DecodeErrorKind::RegisterOutOfRange { index: bad, limit: num_regs });
    }
    Ok(inst)
}

/// Decodes a single line of machine code. Errors carry line number 1.
pub fn decode_line(line: &str, num_regs: usize) -> Result<Instruction, DecodeError> {
    parse_fields(line)
        .and_then(|f| decode_fields(f, num_regs))
        .map_err(|kind| DecodeError { line: 1, kind })
}

fn is_blank(line: &str) -> bool {
    strip_comment(line).trim().is_empty()
}

/// Tokenizes a program file without interpreting opcodes or registers.
/// Returns `(line number, fields)` for every non-blank line.
pub fn parse_words(text: &str) -> Result<Vec<(usize, [i64; 4])>, DecodeError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !is_blank(l))
        .map(|(i, l)| {
            parse_fields(l)
                .map(|f| (i + 1, f))
                .map_err(|kind| DecodeError { line: i + 1, kind })
        })
        .collect()
}

/// An ordered, validated list of instructions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    instructions: Vec<Instruction>,
    lines: Vec<usize>,
}

impl Program {
    /// Builds a program from already-decoded instructions, validating
    /// branch targets.
    pub fn new(instructions: Vec<Instruction>) -> Result<Program, DecodeError> {
        let lines = (1..=instructions.len()).collect();
        Self::with_lines(instructions, lines)
    }

    fn with_lines(instructions: Vec<Instruction>, lines: Vec<usize>) -> Result<Program, DecodeError> {
        if instructions.is_empty() {
            return Err(DecodeError { line: 0, kind: DecodeErrorKind::EmptyProgram });
        }
        let len = instructions.len();
        for (idx, inst) in instructions.iter().enumerate() {
            if let Some(target) = inst.branch_target(idx) {
                if target < 0 || target > len as i64 {
                    return Err(DecodeError {
                        line: lines[idx],
                        kind: DecodeErrorKind::BranchTarget { target, len },
                    });
                }
            }
        }
        Ok(Program { instructions, lines })
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Instruction> {
        self.instructions.get(index)
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    /// Source line of each instruction, for diagnostics.
    pub fn source_line(&self, index: usize) -> Option<usize> {
        self.lines.get(index).copied()
    }

    /// Highest register index mentioned by any instruction.
    pub fn max_register(&self) -> usize {
        self.instructions
            .iter()
            .flat_map(|i| i.registers())
            .max()
            .unwrap_or(0) as usize
    }

    /// Machine-code listing with mnemonics, one instruction per line.
    pub fn listing(&self) -> String {
        let mut out = String::new();
        for (idx, inst) in self.instructions.iter().enumerate() {
            let [a, b, c, d] = inst.encode();
            out.push_str(&format!("{idx:3}: {a:2} {b:3} {c:3} {d:5}    {inst}\n"));
        }
        out
    }
}

/// Decodes a whole program text.
pub fn load_program(text: &str, num_regs: usize) -> Result<Program, DecodeError> {
    let words = parse_words(text)?;
    let mut instructions = Vec::with_capacity(words.len());
    let mut lines = Vec::with_capacity(words.len());
    for (line, fields) in words {
        let inst = decode_fields(fields, num_regs).map_err(|kind| DecodeError { line, kind })?;
        instructions.push(inst);
        lines.push(line);
    }
    Program::with_lines(instructions, lines)
}

/// Opcode reference printed by `--help`.
pub fn encoding_table() -> String {
    let mut out = String::from("  mnemonic  opcode  fields      operation               unit\n");
    for op in Opcode::ALL {
        let (fields, operation) = match op {
            Opcode::Add => ("xi xj xk", "xi <- xj + xk"),
            Opcode::Addi => ("xi xj I", "xi <- xj + I"),
            Opcode::Lw => ("xi xj I", "xi <- Mem[xj + I]"),
            Opcode::Sw => ("xi xj I", "Mem[xj + I] <- xi"),
            Opcode::Beq => ("xi xj I", "if xi == xj: pc <- pc + I"),
            Opcode::Bne => ("xi xj I", "if xi != xj: pc <- pc + I"),
            Opcode::Mul => ("xi xj xk", "xi <- xj * xk"),
        };
        out.push_str(&format!(
            "  {:<8}  {:>6}  {:<10}  {:<24}{}\n",
            op.mnemonic(),
            op.code(),
            fields,
            operation,
            op.fu_class().letter()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const REGS: usize = DEFAULT_LOGICAL_REGS;

    #[test]
    fn decodes_add() {
        let i = decode_line("1 3 4 0", REGS).unwrap();
        assert_eq!(i.opcode, Opcode::Add);
        assert_eq!(i.dest(), Some(LogicalReg(3)));
        assert_eq!(i.src_j(), Some(LogicalReg(4)));
        assert_eq!(i.src_k(), Some(LogicalReg(0)));
        assert_eq!(i.imm(), None);
    }

    #[test]
    fn decodes_mul() {
        let i = decode_line("7 7 7 3", REGS).unwrap();
        assert_eq!(i.opcode, Opcode::Mul);
        assert_eq!(i.dest(), Some(LogicalReg(7)));
        assert_eq!(i.src_j(), Some(LogicalReg(7)));
        assert_eq!(i.src_k(), Some(LogicalReg(3)));
    }

    #[test]
    fn decodes_backward_bne() {
        let i = decode_line("6 1 1 -1", REGS).unwrap();
        assert_eq!(i.opcode, Opcode::Bne);
        assert_eq!(i.dest(), None);
        assert_eq!(i.src_j(), Some(LogicalReg(1)));
        assert_eq!(i.src_k(), Some(LogicalReg(1)));
        assert_eq!(i.imm(), Some(-1));
        assert_eq!(i.branch_target(3), Some(2));
    }

    #[test]
    fn store_fields() {
        let i = decode_line("4 7 6 256", REGS).unwrap();
        assert_eq!(i.dest(), None);
        assert_eq!(i.src_l(), Some(LogicalReg(7)));
        assert_eq!(i.src_j(), Some(LogicalReg(6)));
        assert_eq!(i.imm(), Some(256));
        assert_eq!(i.to_string(), "SW x7, 256(x6)");
    }

    #[test]
    fn unknown_opcode() {
        let err = decode_line("9 1 2 3", REGS).unwrap_err();
        assert_eq!(err.kind, DecodeErrorKind::UnknownOpcode(9));
        assert_eq!(err.line, 1);
    }

    #[test]
    fn wrong_token_count_and_garbage() {
        assert_eq!(decode_line("1 2 3", REGS).unwrap_err().kind, DecodeErrorKind::TokenCount(3));
        assert_eq!(
            decode_line("1 2 3 4 5", REGS).unwrap_err().kind,
            DecodeErrorKind::TokenCount(5)
        );
        assert!(matches!(
            decode_line("1 2 x 4", REGS).unwrap_err().kind,
            DecodeErrorKind::NotAnInteger(_)
        ));
    }

    #[test]
    fn register_range() {
        let err = decode_line("1 7 5 128", REGS).unwrap_err();
        assert_eq!(err.kind, DecodeErrorKind::RegisterOutOfRange { index: 128, limit: 8 });
        // immediates are not registers
        assert!(decode_line("2 7 6 256", REGS).is_ok());
        assert!(decode_line("2 8 0 1", REGS).is_err());
        assert!(decode_line("2 -1 0 1", REGS).is_err());
    }

    #[test]
    fn mnemonics() {
        assert_eq!(Opcode::from_code(1).unwrap().mnemonic(), "ADD");
        assert_eq!(Opcode::from_code(4).unwrap().mnemonic(), "SW");
        assert_eq!(Opcode::from_code(7).unwrap().mnemonic(), "MUL");
        assert_eq!(Opcode::from_code(0), None);
        assert_eq!(Opcode::from_code(8), None);
    }

    #[test]
    fn opcode_table_is_a_bijection() {
        let codes: Vec<u8> = Opcode::ALL.iter().map(|o| o.code()).collect();
        assert_eq!(codes, vec![1, 2, 3, 4, 5, 6, 7]);
        let mut names: Vec<&str> = Opcode::ALL.iter().map(|o| o.mnemonic()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 7);
        for op in Opcode::ALL {
            assert_eq!(Opcode::from_code(op.code() as i64), Some(op));
        }
    }

    #[test]
    fn fu_classes() {
        use FuClass::*;
        let expect = [(Opcode::Add, A), (Opcode::Addi, A), (Opcode::Mul, M), (Opcode::Lw, L),
            (Opcode::Sw, S), (Opcode::Beq, B), (Opcode::Bne, B)];
        for (op, class) in expect {
            assert_eq!(op.fu_class(), class);
        }
    }

    #[test]
    fn program_skips_comments_and_blanks() {
        let p = load_program("# header\n\n2 1 0 5   # x1 = 5\n   \n", REGS).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.get(0).unwrap().opcode, Opcode::Addi);
        assert_eq!(p.source_line(0), Some(3));
    }

    #[test]
    fn empty_program() {
        assert_eq!(load_program("", REGS).unwrap_err().kind, DecodeErrorKind::EmptyProgram);
        assert_eq!(load_program("# nothing\n", REGS).unwrap_err().kind, DecodeErrorKind::EmptyProgram);
    }

    #[test]
    fn error_reports_line_number() {
        let err = load_program("2 1 0 5\n\n9 0 0 0\n", REGS).unwrap_err();
        assert_eq!(err.line, 3);
        assert_eq!(err.to_string(), "line 3: unknown opcode 9");
    }

    #[test]
    fn branch_targets_validated() {
        // target == len is the exit and is allowed
        assert!(load_program("2 1 0 1\n6 1 0 1\n", REGS).is_ok());
        let err = load_program("2 1 0 1\n6 1 0 2\n", REGS).unwrap_err();
        assert_eq!(err.kind, DecodeErrorKind::BranchTarget { target: 3, len: 2 });
        assert_eq!(err.line, 2);
        assert!(load_program("6 1 0 -1\n", REGS).is_err());
    }

    fn arb_instruction(regs: i32) -> impl Strategy<Value = Instruction> {
        (1i64..=7, 0..regs, 0..regs, -300i32..300).prop_map(move |(code, a, b, c)| {
            let op = Opcode::from_code(code).unwrap();
            let third = if op.third_is_register() { c.rem_euclid(regs) } else { c };
            Instruction::new(op, a, b, third)
        })
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(inst in arb_instruction(REGS as i32)) {
            let [a, b, c, d] = inst.encode();
            let line = format!("{a} {b} {c} {d}");
            prop_assert_eq!(decode_line(&line, REGS).unwrap(), inst);
        }
    }
}
