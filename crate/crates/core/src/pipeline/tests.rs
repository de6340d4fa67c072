use super::*;
use crate::bundled::bundled_example;
use crate::isa::{load_program, FuClass};
use crate::oracle::{compare_states, execute_inorder};

fn sim(text: &str, cfg: ArchConfig) -> SimState {
    SimState::new(cfg, load_program(text, 8).unwrap(), &InitialState::default()).unwrap()
}

fn example(k: u8) -> SimState {
    let ex = bundled_example(k).unwrap();
    SimState::new(ex.config.clone(), ex.program(), &InitialState::default()).unwrap()
}

fn one_pass() -> ArchConfig {
    let mut cfg = ArchConfig::default();
    cfg.iterations = 1;
    cfg
}

fn run_checked(st: &mut SimState) -> Stats {
    let bound = st.cycle_bound();
    while !st.finished() {
        assert!(st.cycle < bound, "cycle bound hit");
        st.step();
        st.check_invariants().unwrap_or_else(|e| panic!("cycle {}: {e}", st.cycle - 1));
    }
    st.stats()
}

fn cycles(st: &SimState, id: DynId) -> Vec<Option<u64>> {
    st.insts[id].cycles.to_vec()
}

#[test]
fn single_alu_timeline() {
    let mut st = sim("2 1 0 5\n", one_pass());
    run_checked(&mut st);
    let c: Vec<Option<u64>> = [0, 1, 2, 3, 3, 4, 5].into_iter().map(Some).collect();
    assert_eq!(cycles(&st, 0), c);
    assert_eq!(st.stats().ctot, 6);
}

#[test]
fn separate_execute_cycle() {
    let mut cfg = one_pass();
    cfg.issue_execute_same_cycle = false;
    let mut st = sim("2 1 0 5\n", cfg);
    run_checked(&mut st);
    assert_eq!(st.insts[0].at(Stage::X), Some(4));
    assert_eq!(st.insts[0].at(Stage::W), Some(5));
}

#[test]
fn example_one_opening_cycles() {
    let mut st = example(1);
    st.step();
    assert_eq!(st.f_latch.len(), 4);
    st.step();
    // the second group stops after the branch
    assert_eq!(st.insts.len(), 7);
    assert!(st.stalls.in_cycle(1).any(|e| e.stage == Stage::F && e.reason == StallReason::FetchBreak && e.pc == 6));
    run_checked(&mut st);
    // first load issues at 3; the counter update completes out of order at 4
    assert_eq!(st.insts[0].at(Stage::I), Some(3));
    assert_eq!(st.insts[3].at(Stage::W), Some(4));
    assert!(st.insts[3].at(Stage::W) < st.insts[2].at(Stage::W));
    assert_eq!(st.committed, 21);
    let pcs: Vec<usize> = st.insts.iter().map(|d| d.pc).collect();
    assert_eq!(pcs, (0..21).map(|d| d % 7).collect::<Vec<_>>());
}

#[test]
fn example_one_matches_in_order_execution() {
    let mut st = example(1);
    run_checked(&mut st);
    let expected = execute_inorder(&st.prog, &st.cfg, &InitialState::default()).unwrap();
    assert!(compare_states(&expected, &st.arch_view()).is_empty());
}

#[test]
fn multiplier_occupies_four_execute_slots() {
    let mut st = sim("2 1 0 3\n7 2 1 1\n", one_pass());
    run_checked(&mut st);
    let mul = &st.insts[1];
    assert_eq!(mul.at(Stage::W).unwrap() - mul.at(Stage::X).unwrap(), 4);
    assert_eq!(st.arch_view().regs[2], 9);
}

#[test]
fn busy_unit_logs_issue_stall() {
    let mut st = sim("2 1 0 1\n2 2 0 2\n", one_pass());
    run_checked(&mut st);
    assert_eq!(st.insts[0].at(Stage::I), Some(3));
    assert_eq!(st.insts[1].at(Stage::I), Some(4));
    let e = st.stalls.events().iter().find(|e| e.stage == Stage::I).unwrap();
    assert_eq!((e.cycle, e.inst, e.reason), (3, 1, StallReason::FuBusy));

    let mut cfg = one_pass();
    cfg.set_units(FuClass::A, 2);
    let mut st = sim("2 1 0 1\n2 2 0 2\n", cfg);
    run_checked(&mut st);
    assert_eq!(st.stalls.count(Stage::I), 0);
}

#[test]
fn commit_width_stall() {
    let mut cfg = one_pass();
    cfg.set_all_widths(8);
    cfg.commit_width = 4;
    cfg.set_units(FuClass::A, 5);
    let mut st = sim("2 1 0 1\n2 2 0 1\n2 3 0 1\n2 4 0 1\n2 5 0 1\n", cfg);
    run_checked(&mut st);
    let c: Vec<u64> = st.insts.iter().map(|d| d.at(Stage::C).unwrap()).collect();
    assert_eq!(c, vec![5, 5, 5, 5, 6]);
    let cs: Vec<_> = st.stalls.events().iter().filter(|e| e.stage == Stage::C).collect();
    assert_eq!(cs.len(), 1);
    assert_eq!((cs[0].cycle, cs[0].inst, cs[0].reason), (5, 4, StallReason::WidthLimit));
}

#[test]
fn incomplete_head_blocks_commit() {
    let mut st = sim("3 1 0 0\n2 2 0 1\n", one_pass());
    run_checked(&mut st);
    assert!(st.insts[1].at(Stage::W) < st.insts[0].at(Stage::W));
    assert_eq!(st.insts[0].at(Stage::C), st.insts[1].at(Stage::C));
    assert_eq!(st.stalls.count(Stage::C), 0);

    let mut cfg = one_pass();
    cfg.commit_blocked_stalls = true;
    let mut st = sim("3 1 0 0\n2 2 0 1\n", cfg);
    run_checked(&mut st);
    assert!(st.stalls.count_reason(StallReason::CommitBlocked) > 0);
}

#[test]
fn rob_full_stalls_dispatch() {
    let mut cfg = one_pass();
    cfg.rob_slots = 2;
    let mut st = sim("7 1 1 1\n2 2 0 1\n2 3 0 1\n", cfg);
    run_checked(&mut st);
    assert!(st.stalls.events().iter().any(|e| e.stage == Stage::P && e.reason == StallReason::RobFull && e.inst == 2));
    assert_eq!(st.committed, 3);
}

#[test]
fn free_pool_exhaustion_stalls_rename() {
    let mut cfg = one_pass();
    cfg.phys_regs = 9;
    let mut st = sim("2 1 0 1\n2 2 0 1\n2 3 0 1\n", cfg);
    run_checked(&mut st);
    let d: Vec<_> = st.stalls.events().iter().filter(|e| e.stage == Stage::D).collect();
    assert!(!d.is_empty());
    assert!(d.iter().all(|e| e.reason == StallReason::FreePoolEmpty && (e.inst == 1 || e.inst == 2)));
    assert_eq!(st.arch_view().regs[1..4], [1, 1, 1]);
}

#[test]
fn narrow_fetch() {
    let mut cfg = one_pass();
    cfg.fetch_width = 1;
    let mut st = sim("2 1 0 1\n2 2 0 1\n2 3 0 1\n", cfg);
    run_checked(&mut st);
    let f: Vec<_> = st.insts.iter().map(|d| d.at(Stage::F).unwrap()).collect();
    assert_eq!(f, vec![0, 1, 2]);
}

#[test]
fn dispatch_width_stall() {
    let mut cfg = one_pass();
    cfg.dispatch_width = 2;
    let mut st = sim("2 1 0 1\n2 2 0 1\n2 3 0 1\n", cfg);
    run_checked(&mut st);
    let e = st.stalls.events().iter().find(|e| e.stage == Stage::P).unwrap();
    assert_eq!((e.cycle, e.inst, e.reason), (2, 2, StallReason::WidthLimit));
    assert_eq!(st.insts[2].at(Stage::P), Some(3));
}

#[test]
fn last_iteration_misprediction_is_squashed() {
    let mut st = example(1);
    run_checked(&mut st);
    assert!(st.insts.iter().all(|d| d.is_committed()));
    assert!(st.insts[20].mispredicted);
    assert!(st.insts[..20].iter().all(|d| !d.mispredicted));
}

#[test]
fn backward_taken_policy_avoids_exit_misprediction() {
    let mut st = example(2);
    run_checked(&mut st);
    assert_eq!(st.committed, 15);
    let mispredicted: Vec<usize> = st.insts.iter().filter(|d| d.mispredicted).map(|d| d.id).collect();
    assert_eq!(mispredicted, vec![14]);
}

#[test]
fn redirect_penalty_delays_fetch() {
    let mut cfg = ArchConfig::default();
    cfg.iterations = 2;
    // the forward branch is predicted taken but never is
    let text = "2 1 1 1\n5 1 0 2\n2 2 0 1\n6 1 0 -3\n";
    let mut base = sim(text, cfg.clone());
    let a = run_checked(&mut base);
    cfg.redirect_penalty = 3;
    let mut slow = sim(text, cfg);
    let b = run_checked(&mut slow);
    assert_eq!(a.committed, b.committed);
    assert!(b.ctot > a.ctot);
}

#[test]
fn semantic_mode_follows_register_values() {
    let mut cfg = ArchConfig::default();
    cfg.stream_mode = StreamMode::Semantic;
    let prog = load_program("2 1 0 4\n2 2 2 3\n2 1 1 -1\n6 1 0 -2\n", 8).unwrap();
    let mut st = SimState::new(cfg.clone(), prog.clone(), &InitialState::default()).unwrap();
    run_checked(&mut st);
    let expected = execute_inorder(&prog, &cfg, &InitialState::default()).unwrap();
    assert!(compare_states(&expected, &st.arch_view()).is_empty());
    assert_eq!(st.committed, 13);
    assert_eq!(st.arch_view().regs[2], 12);
}

#[test]
fn store_then_load_same_address() {
    let prog = "2 1 0 42\n4 1 0 128\n3 2 0 128\n1 3 2 2\n";
    let mut st = sim(prog, one_pass());
    run_checked(&mut st);
    assert_eq!(st.arch_view().regs[3], 84);
    assert_eq!(st.machine.mem.read(128), Ok(42));
}

#[test]
fn memory_exception_halts_at_commit() {
    let mut st = sim("2 1 0 1\n3 2 0 130\n2 3 0 1\n", one_pass());
    let err = st.run_to_completion().unwrap_err();
    assert!(matches!(err, SimError::Exception { inst: 1, pc: 1, error: MemError::Misaligned(130), .. }));
    assert_eq!(st.committed, 1);
    assert_eq!(st.arch_view().regs[1..4], [1, 0, 0]);
    st.check_invariants().unwrap();
    assert!(st.finished());
}

#[test]
fn stuck_run_hits_the_cycle_bound() {
    let mut cfg = ArchConfig::default();
    cfg.stream_mode = StreamMode::Semantic;
    let mut st = sim("5 0 0 0\n", cfg);
    assert_eq!(st.run_to_completion(), Err(SimError::CycleBound(SEMANTIC_CYCLE_LIMIT)));
}

#[test]
fn runs_are_deterministic() {
    for k in 1..=3 {
        let (mut a, mut b) = (example(k), example(k));
        assert_eq!(a.run_to_completion(), b.run_to_completion());
        assert_eq!(a.stalls, b.stalls);
        assert_eq!(a.insts, b.insts);
    }
}

#[test]
fn invariants_hold_on_examples() {
    for k in 1..=3 {
        let mut st = example(k);
        run_checked(&mut st);
    }
}

#[test]
fn counters_follow_the_log() {
    let mut st = example(1);
    run_checked(&mut st);
    for s in Stage::ALL {
        assert_eq!(st.stalls.count(s), st.stalls.events().iter().filter(|e| e.stage == s).count());
    }
}

#[test]
fn skipped_map_restore_is_detected() {
    let mut st = example(1);
    st.machine.fault_skip_map_restore = true;
    while !st.finished() && st.cycle < st.cycle_bound() {
        st.step();
    }
    let expected = execute_inorder(&st.prog, &st.cfg, &InitialState::default()).unwrap();
    assert!(!compare_states(&expected, &st.arch_view()).is_empty());
}

#[test]
fn cycle_report_lists_events() {
    let mut st = example(1);
    let r0 = st.step();
    assert_eq!(r0.cycle, 0);
    assert_eq!(r0.entered.len(), 4);
    assert!(r0.entered.iter().all(|(s, _)| *s == Stage::F));
    while !st.finished() {
        let r = st.step();
        assert!(r.committed.iter().all(|&d| st.insts[d].at(Stage::C) == Some(r.cycle)));
    }
    assert!(st.step().finished);
}
