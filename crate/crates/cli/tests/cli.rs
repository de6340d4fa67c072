use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn freess(dir: &Path, args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_freess"))
        .args(args)
        .current_dir(dir)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn help_lists_encoding() {
    let dir = tempfile::tempdir().unwrap();
    let o = freess(dir.path(), &["--help"], "");
    assert_eq!(code(&o), 0);
    let out = text(&o.stdout);
    assert!(out.contains("usage: freess"));
    assert!(out.contains("MUL") && out.contains("xi <- xj * xk"));
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["-bogus", "p.prog"][..], &["-pr", "4", "-lr", "8", "-ex", "1"], &["-pw", "x", "-ex", "1"], &[]] {
        let o = freess(dir.path(), args, "");
        assert_eq!(code(&o), 1, "{args:?}");
        assert!(text(&o.stderr).contains("usage:"));
    }
    let o = freess(dir.path(), &["-pr", "4", "-lr", "8", "-ex", "1"], "");
    assert!(text(&o.stderr).contains("-pr"));
}

#[test]
fn load_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&freess(dir.path(), &["-batch", "missing.prog"], "")), 2);
    std::fs::write(dir.path().join("bad.prog"), "2 1 0 5\n9 1 1 1\n").unwrap();
    let o = freess(dir.path(), &["-batch", "bad.prog"], "");
    assert_eq!(code(&o), 2);
    assert!(text(&o.stderr).contains("line 2"));
}

#[test]
fn exception_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("mis.prog"), "3 1 0 130\n").unwrap();
    let o = freess(dir.path(), &["-batch", "-it", "1", "mis.prog"], "");
    assert_eq!(code(&o), 3);
    assert!(text(&o.stderr).contains("exception"));
}

#[test]
fn verify_examples() {
    let dir = tempfile::tempdir().unwrap();
    for k in ["1", "2", "3"] {
        let o = freess(dir.path(), &["--verify", "-ex", k], "");
        assert_eq!(code(&o), 0);
        assert!(text(&o.stdout).contains("verify: simulator matches in-order execution"));
    }
    std::fs::write(dir.path().join("count.prog"), "2 2 2 1\n2 1 1 -1\n6 1 0 -2\n").unwrap();
    std::fs::write(dir.path().join("regs.txt"), "1 4\n").unwrap();
    let o = freess(dir.path(), &["--verify", "-mode", "semantic", "-reg", "regs.txt", "count.prog"], "");
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    assert!(text(&o.stdout).contains("12 committed"));
}

#[test]
fn interactive_reads_one_line_per_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let o = freess(dir.path(), &["-ex", "1"], "\n\n\n");
    assert_eq!(code(&o), 0);
    let out = text(&o.stdout);
    assert!(out.starts_with("EXERCISE"));
    // three lines answer the prompts after cycles 0, 1 and 2; the prompt
    // after cycle 3 meets end of input and the run finishes unattended
    assert_eq!(out.matches("-- press Enter").count(), 4);
    for c in 0..4 {
        assert!(out.contains(&format!("= cycle {c} =")));
    }
    assert!(!out.contains("= cycle 4 ="));
    assert!(out.contains("21 committed"));
}

#[test]
fn batch_writes_stall_log_matching_counters() {
    let dir = tempfile::tempdir().unwrap();
    let o = freess(dir.path(), &["-batch", "-ex", "1"], "");
    assert_eq!(code(&o), 0);
    let out = text(&o.stdout);
    assert!(!out.contains("press Enter"));
    let log = std::fs::read_to_string(dir.path().join("stall.log")).unwrap();
    let count = |l: char| log.lines().filter(|x| x.contains(&format!(" stage={l} "))).count();
    let expect = format!("stalls: {} (D), {} (P), {} (I), {} (C)", count('D'), count('P'), count('I'), count('C'));
    assert!(out.contains(&expect), "{expect}\n{out}");
}

#[test]
fn stall_fix_flags_remove_dispatch_stalls() {
    let dir = tempfile::tempdir().unwrap();
    let narrow = text(&freess(dir.path(), &["-batch", "-ex", "3"], "").stdout);
    assert!(!narrow.contains(" 0 (P)"));
    let fixed = text(&freess(dir.path(), &["-batch", "-ex", "3", "-pw", "3", "-iw", "3", "-afu", "2"], "").stdout);
    assert!(fixed.contains(" 0 (P)"));
}

#[test]
fn dump_and_log_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut seen = Vec::new();
    for run in ["a", "b"] {
        let dump = format!("{run}.dump");
        let log = format!("{run}.log");
        let o = freess(dir.path(), &["-batch", "-ex", "2", "-dump", &dump, "-stalllog", &log], "");
        assert_eq!(code(&o), 0);
        seen.push((std::fs::read(dir.path().join(&dump)).unwrap(), std::fs::read(dir.path().join(&log)).unwrap()));
    }
    assert_eq!(seen[0], seen[1]);
    assert!(!seen[0].0.is_empty());
}
