mod common;

use crystwin_core::bisim::{
    check_r_t, label_delta, lockstep_run, mem_diff, mem_diff_holds, same_g, same_l,
    CorrespondencePair, LockstepOptions, RtClause, Verdict,
};
use crystwin_core::bridge::{dec, gtx};
use crystwin_core::comp::Transaction;
use crystwin_core::mono::{self, mono_exec_tx_global, mono_exec_tx_local};
use crystwin_core::store::{AddrVal, ByteStore, Frame, FrameScope, Value};
use crystwin_core::syntax::BlockSchedule;
use crystwin_core::system::{install_block, quiet, run_block, step_g, step_l, LocalOrder};
use crystwin_core::Fault;

#[test]
fn transfer_step_mem_diff() {
    let (c, s, env) = common::example();
    let comp0 = install_block(&common::deployed(&c, &s), &s.blocks[0]).unwrap();
    let m0 = dec(&comp0).unwrap();
    let (m1, rec) = mono_exec_tx_local(&m0, 1, &env).unwrap();
    let d = mem_diff(&m0, &m1).unwrap();
    assert!(d.local(2).contains(&common::deposit(1, 3)));
    for j in 1..=2 {
        assert!(d.global(j).contains(&common::update_total(3)));
    }
    assert!(same_l(1, &m0, &m1));
    let (comp1, crec) = step_l(&comp0, 1, &env).unwrap();
    assert_eq!(crec.label, rec.label);
    assert!(mem_diff_holds(&m0, &m1, &label_delta(&crec.label)));
    assert_eq!(dec(&comp1).unwrap(), m1);

    let mut perturbed = m1.clone();
    perturbed.engine_mut(2).slots[0]
        .write("balance", Value::int(99))
        .unwrap();
    assert!(!same_l(1, &m0, &perturbed));
}

#[test]
fn skip_step_has_empty_mem_diff() {
    let c =
        crystwin_core::syntax::parse_contract("contract K { function nop() @address { skip } }")
            .unwrap();
    let env = crystwin_core::comp::Env::new(&c, 2, 1);
    let mut m = mono::deploy(&c, 2, 1).unwrap();
    m.engine_mut(1)
        .prog
        .push(Transaction::local("nop", vec![], AddrVal::new(1, 1)));
    let (m1, _) = mono_exec_tx_local(&m, 1, &env).unwrap();
    let d = mem_diff(&m, &m1).unwrap();
    assert!(d.engines.iter().all(|e| e.is_empty()));
}

#[test]
fn global_step_keeps_engine_storage() {
    let (c, s, env) = common::example();
    let c2 = run_block(
        &common::deployed(&c, &s),
        &s.blocks[0],
        &env,
        LocalOrder::RoundRobin,
        &mut quiet,
    )
    .unwrap();
    let installed = install_block(&c2, &[]).unwrap();
    let m = dec(&installed).unwrap();
    let (m1, _) = mono_exec_tx_global(&m, &env).unwrap();
    assert!(same_g(&m, &m1));
    let (comp1, _) = step_g(&installed, &env).unwrap();
    assert!(check_r_t(&CorrespondencePair::reached(m1, comp1)).is_ok());
}

#[test]
fn correspondence_clauses() {
    let (c, s, env) = common::example();
    let c2 = run_block(
        &common::deployed(&c, &s),
        &s.blocks[0],
        &env,
        LocalOrder::RoundRobin,
        &mut quiet,
    )
    .unwrap();
    let m2 = dec(&c2).unwrap();
    assert!(check_r_t(&CorrespondencePair::reached(m2.clone(), c2.clone())).is_ok());

    let mut fewer = c2.clone();
    fewer.mempools.engines[0].clear();
    let v = check_r_t(&CorrespondencePair::reached(m2.clone(), fewer)).unwrap_err();
    assert_eq!(v.clause, RtClause::Encoding);

    let mut mid = c2.clone();
    mid.global
        .state
        .mem
        .addtop(Frame::new(ByteStore::new(), FrameScope::Global, None));
    let v = check_r_t(&CorrespondencePair::reached(m2.clone(), mid)).unwrap_err();
    assert_eq!(v.clause, RtClause::Boundary);

    let mut unreached = CorrespondencePair::reached(m2, c2);
    unreached.comp_reachable = false;
    assert_eq!(
        check_r_t(&unreached).unwrap_err().clause,
        RtClause::CompReachableWf
    );
}

#[test]
fn empty_schedule_passes_at_deployment() {
    let c = common::bank();
    let v = lockstep_run(&c, &BlockSchedule::default(), &LockstepOptions::new(2, 2)).unwrap();
    assert_eq!(
        v,
        Verdict::Pass {
            steps: 0,
            blocks: 0
        }
    );
}

#[test]
fn broken_broadcast_is_caught_and_minimized() {
    let (c, s, _) = common::example();
    let mut opts = LockstepOptions::new(2, 2);
    opts.fault = Some(Fault::SkipGlobalBroadcast);
    let Verdict::Diverged(d) = lockstep_run(&c, &s, &opts).unwrap() else {
        panic!("fault went unnoticed");
    };
    assert_eq!(d.min_prefix, Some(1));
    assert!(!d.reason.is_empty());
}

#[test]
fn global_relays_reach_every_engine_in_lockstep() {
    let (c, s, env) = common::example();
    let comp0 = install_block(&common::deployed(&c, &s), &s.blocks[0]).unwrap();
    let m0 = dec(&comp0).unwrap();
    let (m1, _) = mono_exec_tx_local(&m0, 1, &env).unwrap();
    assert_eq!(gtx(&m1.engine(1).mempool), gtx(&m1.engine(2).mempool));
}
