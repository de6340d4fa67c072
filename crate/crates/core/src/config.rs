//! Architectural parameters, command-line parsing and the exercise preamble.

use std::path::PathBuf;

use thiserror::Error;

use crate::isa::{FuClass, Program, Word, DEFAULT_LOGICAL_REGS};

/// How the dynamic instruction stream is determined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamMode {
    /// The static program repeated `iterations` times; branch outcomes are
    /// synthesized from that assumption.
    ForcedLoop,
    /// Branch outcomes are computed from register values.
    Semantic,
}

/// Static direction assumed by fetch for every branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecPolicy {
    AlwaysTaken,
    /// Backward taken, forward not taken.
    BackwardTaken,
}

/// How many OPERAND_PENDING issue stalls are logged per cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperandStallPolicy {
    /// Only for the oldest unissued IW entry.
    Oldest,
    /// For every unissued entry waiting on an operand.
    All,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchConfig {
    pub fetch_width: usize,
    pub decode_width: usize,
    pub dispatch_width: usize,
    pub issue_width: usize,
    pub commit_width: usize,
    pub iw_slots: usize,
    pub rob_slots: usize,
    pub lq_slots: usize,
    pub sq_slots: usize,
    pub logical_regs: usize,
    pub phys_regs: usize,
    /// Units per class, indexed by [`FuClass::index`].
    pub fu_count: [usize; 7],
    /// Pipeline depth per class in cycles.
    pub fu_latency: [u32; 7],
    pub issue_execute_same_cycle: bool,
    pub wakeup_same_cycle: bool,
    pub iterations: usize,
    pub stream_mode: StreamMode,
    pub spec_policy: SpecPolicy,
    /// Extra fetch bubble cycles after a misprediction redirect.
    pub redirect_penalty: u32,
    pub operand_stalls: OperandStallPolicy,
    pub commit_blocked_stalls: bool,
    pub memory_bytes: usize,
    pub dump_path: Option<PathBuf>,
    pub batch: bool,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            fetch_width: 4,
            decode_width: 4,
            dispatch_width: 4,
            issue_width: 4,
            commit_width: 4,
            iw_slots: 8,
            rob_slots: 12,
            lq_slots: 4,
            sq_slots: 4,
            logical_regs: DEFAULT_LOGICAL_REGS,
            phys_regs: 18,
            fu_count: [1; 7],
            //           A  M  L  S  B  F  X
            fu_latency: [1, 4, 2, 1, 1, 3, 5],
            issue_execute_same_cycle: true,
            wakeup_same_cycle: true,
            iterations: 3,
            stream_mode: StreamMode::ForcedLoop,
            spec_policy: SpecPolicy::AlwaysTaken,
            redirect_penalty: 0,
            operand_stalls: OperandStallPolicy::Oldest,
            commit_blocked_stalls: false,
            memory_bytes: 4096,
            dump_path: None,
            batch: false,
        }
    }
}

impl ArchConfig {
    pub fn units(&self, class: FuClass) -> usize {
        self.fu_count[class.index()]
    }

    pub fn latency(&self, class: FuClass) -> u32 {
        self.fu_latency[class.index()]
    }

    pub fn set_units(&mut self, class: FuClass, n: usize) {
        self.fu_count[class.index()] = n;
    }

    pub fn set_latency(&mut self, class: FuClass, n: u32) {
        self.fu_latency[class.index()] = n;
    }

    /// Sets fetch, decode, dispatch, issue and commit width at once.
    pub fn set_all_widths(&mut self, n: usize) {
        self.fetch_width = n;
        self.decode_width = n;
        self.dispatch_width = n;
        self.issue_width = n;
        self.commit_width = n;
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("-fw", self.fetch_width),
            ("-dw", self.decode_width),
            ("-pw", self.dispatch_width),
            ("-iw", self.issue_width),
            ("-cw", self.commit_width),
            ("-iws", self.iw_slots),
            ("-rob", self.rob_slots),
            ("-lq", self.lq_slots),
            ("-sq", self.sq_slots),
            ("-lr", self.logical_regs),
            ("-it", self.iterations),
        ];
        for (flag, v) in positive {
            if v == 0 {
                return Err(ConfigError::Invalid { flag, reason: "must be at least 1".into() });
            }
        }
        if self.logical_regs > 256 {
            return Err(ConfigError::Invalid { flag: "-lr", reason: "at most 256 logical registers".into() });
        }
        if self.phys_regs <= self.logical_regs {
            return Err(ConfigError::Invalid {
                flag: "-pr",
                reason: format!(
                    "physical registers must exceed logical registers ({} <= {})",
                    self.phys_regs, self.logical_regs
                ),
            });
        }
        for class in [FuClass::A, FuClass::M, FuClass::L, FuClass::S, FuClass::B] {
            if self.units(class) == 0 {
                return Err(ConfigError::Invalid {
                    flag: unit_flag(class),
                    reason: format!("at least one {} is required", class.description()),
                });
            }
        }
        if let Some(class) = FuClass::ALL.into_iter().find(|&c| self.latency(c) == 0) {
            return Err(ConfigError::Invalid {
                flag: latency_flag(class),
                reason: "latency must be at least 1".into(),
            });
        }
        if self.memory_bytes < 4 || !self.memory_bytes.is_multiple_of(4) {
            return Err(ConfigError::Invalid { flag: "-membytes", reason: "must be a positive multiple of 4".into() });
        }
        Ok(())
    }

    pub fn max_latency(&self) -> u32 {
        self.fu_latency.iter().copied().max().unwrap_or(1)
    }
}

fn unit_flag(class: FuClass) -> &'static str {
    match class {
        FuClass::A => "-afu",
        FuClass::M => "-mfu",
        FuClass::L => "-lfu",
        FuClass::S => "-sfu",
        FuClass::B => "-bfu",
        FuClass::F => "-ffu",
        FuClass::X => "-xfu",
    }
}

fn latency_flag(class: FuClass) -> &'static str {
    match class {
        FuClass::A => "-alat",
        FuClass::M => "-mlat",
        FuClass::L => "-llat",
        FuClass::S => "-slat",
        FuClass::B => "-blat",
        FuClass::F => "-flat",
        FuClass::X => "-xlat",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("unknown flag {0}")]
    UnknownFlag(String),
    #[error("flag {0} expects a value")]
    MissingValue(String),
    #[error("flag {flag}: invalid value {value:?}")]
    BadValue { flag: String, value: String },
    #[error("flag {flag}: {reason}")]
    Invalid { flag: &'static str, reason: String },
    #[error("no program given (pass a program file or -ex K)")]
    MissingProgram,
    #[error("unexpected argument {0:?}")]
    ExtraArgument(String),
    #[error("{file}:{line}: {reason}")]
    Image { file: String, line: usize, reason: String },
}

/// Where the program comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProgramSource {
    File(PathBuf),
    Example(u8),
}

/// A fully parsed command line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invocation {
    pub config: ArchConfig,
    /// `None` only when `help` is set.
    pub program: Option<ProgramSource>,
    pub verify: bool,
    pub help: bool,
    pub mem_file: Option<PathBuf>,
    pub reg_file: Option<PathBuf>,
    pub stall_log: PathBuf,
}

fn number<T: std::str::FromStr>(flag: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue { flag: flag.into(), value: value.into() })
}

fn boolean(flag: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(ConfigError::BadValue { flag: flag.into(), value: value.into() }),
    }
}

/// Parses command-line arguments (without the program name), starting from
/// `base`. Unspecified parameters keep their value in `base`.
pub fn parse_args_with<S: AsRef<str>>(args: &[S], base: ArchConfig) -> Result<Invocation, ConfigError> {
    let mut inv = Invocation {
        config: base,
        program: None,
        verify: false,
        help: false,
        mem_file: None,
        reg_file: None,
        stall_log: PathBuf::from("stall.log"),
    };
    let mut it = args.iter().map(|s| s.as_ref());
    while let Some(arg) = it.next() {
        let mut value = |flag: &str| -> Result<String, ConfigError> {
            it.next().map(str::to_owned).ok_or_else(|| ConfigError::MissingValue(flag.into()))
        };
        let cfg = &mut inv.config;
        match arg {
            "-h" | "-help" | "--help" => inv.help = true,
            "--verify" | "-verify" => {
                inv.verify = true;
                cfg.batch = true;
            }
            "-batch" => cfg.batch = true,
            "-fw" => cfg.fetch_width = number(arg, &value(arg)?)?,
            "-dw" => cfg.decode_width = number(arg, &value(arg)?)?,
            "-pw" => cfg.dispatch_width = number(arg, &value(arg)?)?,
            "-iw" => cfg.issue_width = number(arg, &value(arg)?)?,
            "-cw" => cfg.commit_width = number(arg, &value(arg)?)?,
            "-w" => cfg.set_all_widths(number(arg, &value(arg)?)?),
            "-iws" => cfg.iw_slots = number(arg, &value(arg)?)?,
            "-rob" => cfg.rob_slots = number(arg, &value(arg)?)?,
            "-lq" => cfg.lq_slots = number(arg, &value(arg)?)?,
            "-sq" => cfg.sq_slots = number(arg, &value(arg)?)?,
            "-pr" => cfg.phys_regs = number(arg, &value(arg)?)?,
            "-lr" => cfg.logical_regs = number(arg, &value(arg)?)?,
            "-afu" => cfg.set_units(FuClass::A, number(arg, &value(arg)?)?),
            "-mfu" => cfg.set_units(FuClass::M, number(arg, &value(arg)?)?),
            "-lfu" => cfg.set_units(FuClass::L, number(arg, &value(arg)?)?),
            "-sfu" => cfg.set_units(FuClass::S, number(arg, &value(arg)?)?),
            "-bfu" => cfg.set_units(FuClass::B, number(arg, &value(arg)?)?),
            "-alat" => cfg.set_latency(FuClass::A, number(arg, &value(arg)?)?),
            "-mlat" => cfg.set_latency(FuClass::M, number(arg, &value(arg)?)?),
            "-llat" => cfg.set_latency(FuClass::L, number(arg, &value(arg)?)?),
            "-slat" => cfg.set_latency(FuClass::S, number(arg, &value(arg)?)?),
            "-blat" => cfg.set_latency(FuClass::B, number(arg, &value(arg)?)?),
            "-it" => cfg.iterations = number(arg, &value(arg)?)?,
            "-ixsame" => cfg.issue_execute_same_cycle = boolean(arg, &value(arg)?)?,
            "-wb0" => cfg.wakeup_same_cycle = boolean(arg, &value(arg)?)?,
            "-redirect" => cfg.redirect_penalty = number(arg, &value(arg)?)?,
            "-membytes" => cfg.memory_bytes = number(arg, &value(arg)?)?,
            "-mode" => {
                let v = value(arg)?;
                cfg.stream_mode = match v.as_str() {
                    "forced" => StreamMode::ForcedLoop,
                    "semantic" => StreamMode::Semantic,
                    _ => return Err(ConfigError::BadValue { flag: arg.into(), value: v }),
                }
            }
            "-spec" => {
                let v = value(arg)?;
                cfg.spec_policy = match v.as_str() {
                    "taken" => SpecPolicy::AlwaysTaken,
                    "btfn" => SpecPolicy::BackwardTaken,
                    _ => return Err(ConfigError::BadValue { flag: arg.into(), value: v }),
                }
            }
            "-opstall" => {
                let v = value(arg)?;
                cfg.operand_stalls = match v.as_str() {
                    "oldest" => OperandStallPolicy::Oldest,
                    "all" => OperandStallPolicy::All,
                    _ => return Err(ConfigError::BadValue { flag: arg.into(), value: v }),
                }
            }
            "-cblock" => cfg.commit_blocked_stalls = boolean(arg, &value(arg)?)?,
            "-dump" => cfg.dump_path = Some(PathBuf::from(value(arg)?)),
            "-mem" => inv.mem_file = Some(PathBuf::from(value(arg)?)),
            "-reg" => inv.reg_file = Some(PathBuf::from(value(arg)?)),
            "-stalllog" => inv.stall_log = PathBuf::from(value(arg)?),
            "-ex" => {
                let v = value(arg)?;
                let k: u8 = number(arg, &v)?;
                if !(1..=3).contains(&k) {
                    return Err(ConfigError::BadValue { flag: arg.into(), value: v });
                }
                set_program(&mut inv.program, ProgramSource::Example(k), arg)?;
            }
            flag if flag.starts_with('-') && flag.len() > 1 && flag.parse::<i64>().is_err() => {
                return Err(ConfigError::UnknownFlag(flag.into()));
            }
            path => set_program(&mut inv.program, ProgramSource::File(PathBuf::from(path)), path)?,
        }
    }
    if inv.help {
        return Ok(inv);
    }
    if inv.program.is_none() {
        return Err(ConfigError::MissingProgram);
    }
    inv.config.validate()?;
    Ok(inv)
}

fn set_program(slot: &mut Option<ProgramSource>, src: ProgramSource, arg: &str) -> Result<(), ConfigError> {
    if slot.is_some() {
        return Err(ConfigError::ExtraArgument(arg.into()));
    }
    *slot = Some(src);
    Ok(())
}

/// Parses arguments over the shipped defaults.
pub fn parse_args<S: AsRef<str>>(args: &[S]) -> Result<Invocation, ConfigError> {
    parse_args_with(args, ArchConfig::default())
}

fn parse_pairs(text: &str, file: &str) -> Result<Vec<(i64, i64)>, ConfigError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |reason: &str| ConfigError::Image { file: file.into(), line: i + 1, reason: reason.into() };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(err("expected two integers"));
        }
        let a = toks[0].parse().map_err(|_| err("not an integer"))?;
        let b = toks[1].parse().map_err(|_| err("not an integer"))?;
        out.push((a, b));
    }
    Ok(out)
}

/// Initial register and memory contents.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InitialState {
    pub regs: Vec<(usize, Word)>,
    /// `(byte address, word)` pairs.
    pub mem: Vec<(u32, Word)>,
}

impl InitialState {
    /// Parses "regindex value" lines.
    pub fn parse_regs(&mut self, text: &str, file: &str, cfg: &ArchConfig) -> Result<(), ConfigError> {
        for (i, (r, v)) in parse_pairs(text, file)?.into_iter().enumerate() {
            if r < 0 || r as usize >= cfg.logical_regs {
                return Err(ConfigError::Image { file: file.into(), line: i + 1, reason: format!("register {r} out of range") });
            }
            self.regs.push((r as usize, v as Word));
        }
        Ok(())
    }

    /// Parses "address value" lines; addresses are byte addresses of words.
    pub fn parse_mem(&mut self, text: &str, file: &str, cfg: &ArchConfig) -> Result<(), ConfigError> {
        for (i, (a, v)) in parse_pairs(text, file)?.into_iter().enumerate() {
            if a < 0 || a % 4 != 0 || a as usize + 4 > cfg.memory_bytes {
                return Err(ConfigError::Image { file: file.into(), line: i + 1, reason: format!("bad word address {a}") });
            }
            self.mem.push((a as u32, v as Word));
        }
        Ok(())
    }
}

/// Human-readable statement of the exercise: every architectural parameter
/// followed by the program listing.
pub fn exercise_text(cfg: &ArchConfig, prog: &Program) -> String {
    let mut t = String::new();
    t.push_str("EXERCISE\n");
    t.push_str("Consider a superscalar processor with register renaming, an instruction window,\n");
    t.push_str("a reorder buffer and load/store queues, under the following hypotheses:\n");
    t.push_str(&format!("  - fetch width: {} instructions per cycle\n", cfg.fetch_width));
    t.push_str(&format!("  - decode/rename width: {} instructions per cycle\n", cfg.decode_width));
    t.push_str(&format!("  - dispatch width: {} instructions per cycle\n", cfg.dispatch_width));
    t.push_str(&format!("  - issue width: {} instructions per cycle\n", cfg.issue_width));
    t.push_str(&format!("  - commit width: {} instructions per cycle\n", cfg.commit_width));
    t.push_str(&format!("  - {} IW-SLOTS\n", cfg.iw_slots));
    t.push_str(&format!("  - {} ROB-SLOTS\n", cfg.rob_slots));
    t.push_str(&format!("  - {} LQ-SLOTS\n", cfg.lq_slots));
    t.push_str(&format!("  - {} SQ-SLOTS\n", cfg.sq_slots));
    t.push_str(&format!("  - {} Physical Registers\n", cfg.phys_regs));
    t.push_str(&format!("  - {} Logical Registers\n", cfg.logical_regs));
    t.push_str("  - functional units (pipelined):\n");
    for class in FuClass::ALL {
        t.push_str(&format!(
            "      {}: {} x {}, latency {}\n",
            class.letter(),
            cfg.units(class),
            class.description(),
            cfg.latency(class)
        ));
    }
    t.push_str(&format!(
        "  - issue and execute {}\n",
        if cfg.issue_execute_same_cycle { "happen in the same cycle" } else { "happen in different cycles" }
    ));
    t.push_str(&format!(
        "  - a result written back is usable for issue {}\n",
        if cfg.wakeup_same_cycle { "in the same cycle" } else { "from the next cycle" }
    ));
    match cfg.stream_mode {
        StreamMode::ForcedLoop => t.push_str(&format!(
            "  - the program executes {} iterations of a loop\n",
            cfg.iterations
        )),
        StreamMode::Semantic => t.push_str(&format!(
            "  - branch outcomes follow register values (iterations setting {} unused)\n",
            cfg.iterations
        )),
    }
    t.push_str(match cfg.spec_policy {
        SpecPolicy::AlwaysTaken => "  - branches are speculatively assumed taken\n",
        SpecPolicy::BackwardTaken => "  - backward branches are assumed taken, forward ones not taken\n",
    });
    t.push_str(&format!("  - misprediction redirect penalty: {} extra cycles\n", cfg.redirect_penalty));
    t.push_str(&format!("  - data memory: {} bytes, 4-byte words\n", cfg.memory_bytes));
    t.push_str(match cfg.operand_stalls {
        OperandStallPolicy::Oldest => "  - operand waits are counted for the oldest waiting IW entry only\n",
        OperandStallPolicy::All => "  - operand waits are counted for every waiting IW entry\n",
    });
    if cfg.commit_blocked_stalls {
        t.push_str("  - completed instructions waiting behind an unfinished one count as commit stalls\n");
    }
    t.push_str("Show the evolution of the machine cycle by cycle.\n\nPROGRAM\n");
    t.push_str(&prog.listing());
    t
}
