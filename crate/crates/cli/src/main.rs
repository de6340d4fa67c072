use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, Write};
use std::process::ExitCode;

use superscalar_core::config::{exercise_text, parse_args_with, ArchConfig, InitialState, Invocation, ProgramSource};
use superscalar_core::isa::{encoding_table, load_program, Program};
use superscalar_core::oracle::{compare_states, execute_inorder, report};
use superscalar_core::pipeline::{SimError, SimState};
use superscalar_core::render::{dump_cycle, render_screen, stats_summary, write_stall_log};
use superscalar_core::bundled_example;

const USAGE: &str = "\
usage: freess [flags] PROGRAM
       freess [flags] -ex K            run bundled example K (1, 2 or 3)

modes:
  (default)        interactive: one cycle per line read from stdin; end of
                   input finishes the run in batch mode
  -batch           run to completion without stopping
  --verify         batch run, then compare with in-order execution

widths:     -fw -dw -pw -iw -cw N, or -w N for all of them
sizes:      -iws -rob -lq -sq N
registers:  -pr N (physical)  -lr N (logical)
units:      -afu -mfu -lfu -sfu -bfu N
latencies:  -alat -mlat -llat -slat -blat N
run:        -it N  -mode forced|semantic  -spec taken|btfn  -redirect N
timing:     -ixsame 0|1  -wb0 0|1
accounting: -opstall oldest|all  -cblock 0|1
memory:     -membytes N
files:      -mem FILE  -reg FILE  -dump FILE  -stalllog FILE (default stall.log)

program format: one instruction per line, four decimal integers
  opcode op1 op2 op3; '#' starts a comment
";

mod exit {
    pub const USAGE: u8 = 1;
    pub const LOAD: u8 = 2;
    pub const HALT: u8 = 3;
    pub const MISMATCH: u8 = 4;
}

fn help_text() -> String {
    format!("{USAGE}\nencoding:\n{}", encoding_table())
}

/// Flags are applied on top of the selected example's configuration.
fn base_config(args: &[String]) -> ArchConfig {
    args.iter()
        .position(|a| a == "-ex")
        .and_then(|i| args.get(i + 1))
        .and_then(|k| k.parse().ok())
        .and_then(bundled_example)
        .map_or_else(ArchConfig::default, |ex| ex.config)
}

fn load(inv: &Invocation) -> Result<(Program, InitialState), String> {
    let cfg = &inv.config;
    let text = match inv.program.as_ref().expect("checked by parser") {
        ProgramSource::Example(k) => bundled_example(*k).expect("checked by parser").source.to_string(),
        ProgramSource::File(p) => fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?,
    };
    let prog = load_program(&text, cfg.logical_regs).map_err(|e| format!("program: {e}"))?;
    let mut init = InitialState::default();
    if let Some(p) = &inv.reg_file {
        let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
        init.parse_regs(&text, &p.display().to_string(), cfg).map_err(|e| e.to_string())?;
    }
    if let Some(p) = &inv.mem_file {
        let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
        init.parse_mem(&text, &p.display().to_string(), cfg).map_err(|e| e.to_string())?;
    }
    Ok((prog, init))
}

/// Steps the machine to the end. Screens are printed, and one input line is
/// awaited, after every cycle until input runs out or the mode is batch.
fn drive(st: &mut SimState, out: &mut impl Write, dump: &mut Option<String>) -> io::Result<Result<(), SimError>> {
    let bound = st.cycle_bound();
    let mut interactive = !st.cfg.batch;
    let stdin = io::stdin();
    let mut input = stdin.lock();
    while !st.finished() {
        if st.cycle >= bound {
            return Ok(Err(SimError::CycleBound(bound)));
        }
        st.step();
        if let Some(d) = dump.as_mut() {
            d.push_str(&dump_cycle(st));
        }
        if interactive {
            write!(out, "{}", render_screen(st))?;
            if !st.finished() {
                writeln!(out, "-- press Enter for the next cycle --")?;
                out.flush()?;
                let mut line = String::new();
                if input.read_line(&mut line)? == 0 {
                    interactive = false;
                }
            }
        }
    }
    Ok(match &st.halt {
        Some(e) => Err(e.clone()),
        None => Ok(()),
    })
}

fn run(args: &[String]) -> io::Result<u8> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let inv = match parse_args_with(args, base_config(args)) {
        Ok(inv) => inv,
        Err(e) => {
            eprintln!("freess: {e}\n");
            eprint!("{}", help_text());
            return Ok(exit::USAGE);
        }
    };
    if inv.help {
        write!(out, "{}", help_text())?;
        return Ok(0);
    }
    let (prog, init) = match load(&inv) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("freess: {e}");
            return Ok(exit::LOAD);
        }
    };
    let cfg = inv.config.clone();
    writeln!(out, "{}", exercise_text(&cfg, &prog))?;
    let mut st = match SimState::new(cfg.clone(), prog.clone(), &init) {
        Ok(st) => st,
        Err(e) => {
            eprintln!("freess: {e}");
            return Ok(exit::LOAD);
        }
    };
    let mut dump = cfg.dump_path.as_ref().map(|_| String::new());
    let outcome = drive(&mut st, &mut out, &mut dump)?;

    if let Err(e) = write_stall_log(st.stalls.events(), &inv.stall_log) {
        eprintln!("freess: cannot write {}: {e}", inv.stall_log.display());
    }
    if let (Some(path), Some(text)) = (&cfg.dump_path, &dump) {
        if let Err(e) = fs::write(path, text) {
            eprintln!("freess: cannot write {}: {e}", path.display());
        }
    }
    if !cfg.batch || outcome.is_err() {
        write!(out, "{}", render_screen(&st))?;
    }
    let (_, stats) = stats_summary(&st);
    write!(out, "{stats}")?;
    if let Err(e) = outcome {
        eprintln!("freess: {e}");
        return Ok(exit::HALT);
    }
    if inv.verify {
        return verify(&mut out, &prog, &cfg, &init, &st);
    }
    Ok(0)
}

fn verify(out: &mut impl Write, prog: &Program, cfg: &ArchConfig, init: &InitialState, st: &SimState) -> io::Result<u8> {
    let expected = match execute_inorder(prog, cfg, init) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("freess: in-order execution failed: {e}");
            return Ok(exit::HALT);
        }
    };
    let mismatches = compare_states(&expected, &st.arch_view());
    let mut text = report(&mismatches);
    if mismatches.is_empty() {
        let _ = writeln!(text, "  {} instructions, {} registers, {} bytes of memory compared", expected.committed, expected.regs.len(), cfg.memory_bytes);
    }
    write!(out, "{text}")?;
    Ok(if mismatches.is_empty() { 0 } else { exit::MISMATCH })
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(&args) {
        Ok(code) => ExitCode::from(code),
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("freess: {e}");
            ExitCode::from(exit::HALT)
        }
    }
}
