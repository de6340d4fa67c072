use std::fmt;

use crate::microstate::{DynId, Hazard};

/// Pipeline stages, in screen order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    F,
    D,
    P,
    I,
    X,
    W,
    C,
}

impl Stage {
    pub const ALL: [Stage; 7] = [Stage::F, Stage::D, Stage::P, Stage::I, Stage::X, Stage::W, Stage::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        ['F', 'D', 'P', 'I', 'X', 'W', 'C'][self.index()]
    }

    pub fn from_letter(c: char) -> Option<Stage> {
        Stage::ALL.into_iter().find(|s| s.letter() == c)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StallReason {
    FreePoolEmpty,
    IwFull,
    RobFull,
    FuBusy,
    OperandPending,
    LqFull,
    SqFull,
    CommitBlocked,
    WidthLimit,
    FetchBreak,
}

impl StallReason {
    pub const ALL: [StallReason; 10] = [
        StallReason::FreePoolEmpty,
        StallReason::IwFull,
        StallReason::RobFull,
        StallReason::FuBusy,
        StallReason::OperandPending,
        StallReason::LqFull,
        StallReason::SqFull,
        StallReason::CommitBlocked,
        StallReason::WidthLimit,
        StallReason::FetchBreak,
    ];

    pub fn code(self) -> &'static str {
        match self {
            StallReason::FreePoolEmpty => "FREE_POOL_EMPTY",
            StallReason::IwFull => "IW_FULL",
            StallReason::RobFull => "ROB_FULL",
            StallReason::FuBusy => "FU_BUSY",
            StallReason::OperandPending => "OPERAND_PENDING",
            StallReason::LqFull => "LQ_FULL",
            StallReason::SqFull => "SQ_FULL",
            StallReason::CommitBlocked => "COMMIT_BLOCKED",
            StallReason::WidthLimit => "WIDTH_LIMIT",
            StallReason::FetchBreak => "FETCH_BREAK",
        }
    }

    pub fn from_code(code: &str) -> Option<StallReason> {
        StallReason::ALL.into_iter().find(|r| r.code() == code)
    }
}

impl From<Hazard> for StallReason {
    fn from(h: Hazard) -> Self {
        match h {
            Hazard::FreePoolEmpty => StallReason::FreePoolEmpty,
            Hazard::IwFull => StallReason::IwFull,
            Hazard::RobFull => StallReason::RobFull,
            Hazard::LqFull => StallReason::LqFull,
            Hazard::SqFull => StallReason::SqFull,
        }
    }
}

impl fmt::Display for StallReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StallEvent {
    pub cycle: u64,
    pub stage: Stage,
    pub inst: DynId,
    pub pc: usize,
    pub reason: StallReason,
    pub text: String,
}

/// Every stall of a run plus per-stage counters kept in step with it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StallLog {
    events: Vec<StallEvent>,
    counters: [usize; 7],
}

impl StallLog {
    /// Records an event unless the same (cycle, instruction, stage, reason)
    /// was already logged.
    pub fn record(&mut self, event: StallEvent) -> bool {
        let dup = self.events.iter().rev().take_while(|e| e.cycle == event.cycle).any(|e| {
            e.inst == event.inst && e.stage == event.stage && e.reason == event.reason
        });
        if dup {
            return false;
        }
        self.counters[event.stage.index()] += 1;
        self.events.push(event);
        true
    }

    pub fn events(&self) -> &[StallEvent] {
        &self.events
    }

    pub fn in_cycle(&self, cycle: u64) -> impl Iterator<Item = &StallEvent> {
        self.events.iter().filter(move |e| e.cycle == cycle)
    }

    pub fn count(&self, stage: Stage) -> usize {
        self.counters[stage.index()]
    }

    pub fn counters(&self) -> [usize; 7] {
        self.counters
    }

    pub fn count_reason(&self, reason: StallReason) -> usize {
        self.events.iter().filter(|e| e.reason == reason).count()
    }
}
