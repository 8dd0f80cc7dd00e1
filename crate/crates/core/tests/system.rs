mod common;

use crystwin_core::comp::{exec_tx_local, Env, RelayLabel, RelayTx, Transaction, TxSet};
use crystwin_core::store::{AddrVal, Value};
use crystwin_core::syntax::parse_contract;
use crystwin_core::system::{
    self, assemble_block, install_block, quiet, receive, run_block, run_global_phase,
    run_local_phase, step_g, step_l, LocalOrder, Mempools, StepKind, SystemError,
};
use proptest::prelude::*;

fn balance(cfg: &system::SystemConfig, e: usize, j: usize) -> Value {
    cfg.engine(e).state.slot(j).read("balance").unwrap().clone()
}

fn omega2() -> Mempools {
    Mempools {
        engines: vec![
            TxSet::from([common::deposit(2, 2)]),
            TxSet::from([common::deposit(1, 3)]),
        ],
        global: TxSet::from([common::update_total(3), common::update_total(2)]),
    }
}

#[test]
fn receiving_the_first_block_labels() {
    let mut l1 = RelayLabel::empty(2);
    l1.engines[1].insert(common::deposit(1, 3));
    l1.global.insert(common::update_total(3));
    let mut l2 = RelayLabel::empty(2);
    l2.engines[0].insert(common::deposit(2, 2));
    l2.global.insert(common::update_total(2));
    let om = receive(&receive(&Mempools::new(2), &l1), &l2);
    assert_eq!(om, omega2());
    assert_eq!(receive(&om, &RelayLabel::empty(2)), om);
}

fn arb_relay() -> impl Strategy<Value = RelayTx> {
    let args = proptest::collection::vec((0i64..4).prop_map(Value::int), 0..2);
    prop_oneof![
        (1usize..=2, "[a-c]", args.clone()).prop_map(|(slot, func, args)| RelayTx::Address {
            slot,
            func,
            args
        }),
        ("[a-c]", args.clone()).prop_map(|(func, args)| RelayTx::Engine { func, args }),
        ("[a-c]", args).prop_map(|(func, args)| RelayTx::Global { func, args }),
    ]
}

fn arb_set() -> impl Strategy<Value = TxSet> {
    proptest::collection::btree_set(arb_relay(), 0..4)
}

fn arb_label(n: usize) -> impl Strategy<Value = RelayLabel> {
    (proptest::collection::vec(arb_set(), n), arb_set())
        .prop_map(|(engines, global)| RelayLabel { engines, global })
}

proptest! {
    #[test]
    fn reception_is_associative(
        engines in proptest::collection::vec(arb_set(), 3),
        global in arb_set(),
        l1 in arb_label(3),
        l2 in arb_label(3),
    ) {
        let om = Mempools { engines, global };
        let stepwise = receive(&receive(&om, &l1), &l2);
        prop_assert_eq!(&stepwise, &receive(&om, &l1.clone().union(&l2)));
        prop_assert!(stepwise.includes(&om));
    }
}

#[test]
fn block_two_global_phase() {
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
    let mut cur = installed.clone();
    let mut totals = vec![];
    while !cur.global.prog.is_empty() {
        let (next, rec) = step_g(&cur, &env).unwrap();
        assert_eq!(rec.kind, StepKind::Global);
        assert!(next.is_wf());
        totals.push(next.global.state.g.read("total").unwrap().clone());
        cur = next;
    }
    assert_eq!(totals, [Value::int(2), Value::int(5)]);
    let via_phase = run_global_phase(&installed, &env, &mut quiet).unwrap();
    assert_eq!(via_phase, cur);
    let done = run_local_phase(&cur, &env, LocalOrder::RoundRobin, &mut quiet).unwrap();
    assert_eq!(
        (balance(&done, 2, 1), balance(&done, 1, 2)),
        (Value::int(8), Value::int(3))
    );
}

#[test]
fn first_block_local_steps() {
    let (c, s, env) = common::example();
    let c0 = install_block(&common::deployed(&c, &s), &s.blocks[0]).unwrap();
    let (c1, _) = step_l(&c0, 1, &env).unwrap();
    assert_eq!(balance(&c1, 1, 1), Value::int(7));
    assert_eq!(c1.mempools.engine(2), &TxSet::from([common::deposit(1, 3)]));
    assert_eq!(c1.mempools.global, TxSet::from([common::update_total(3)]));
    let (c2, _) = step_l(&c1, 2, &env).unwrap();
    assert_eq!(balance(&c2, 2, 2), Value::int(6));
    assert_eq!(c2.mempools, omega2());
}

#[test]
fn local_step_waits_for_the_global_program() {
    let (c, s, env) = common::example();
    let mut cfg = common::deployed(&c, &s);
    cfg.mempools = omega2();
    let installed = install_block(&cfg, &s.blocks[0]).unwrap();
    assert!(matches!(
        step_l(&installed, 1, &env),
        Err(SystemError::Precondition(_))
    ));
    let mut stale = installed.clone();
    stale
        .engine_mut(1)
        .state
        .gview
        .write("total", Value::int(9))
        .unwrap();
    assert_eq!(
        step_g(&stale, &env).unwrap_err(),
        SystemError::NotWellFormed
    );
}

#[test]
fn global_skip_only_consumes_the_program() {
    let c =
        parse_contract("contract K { int @global t; function idle() @global { skip } }").unwrap();
    let env = Env::new(&c, 2, 1);
    let mut cfg = system::deploy(&c, 2, 1).unwrap();
    cfg.global.prog = vec![Transaction::global("idle", vec![])];
    let (next, _) = step_g(&cfg, &env).unwrap();
    let mut expect = cfg.clone();
    expect.global.prog.clear();
    assert_eq!(next, expect);
}

#[test]
fn global_increments_sum_up() {
    let c = common::bank();
    let env = Env::new(&c, 3, 1);
    let mut cfg = system::deploy(&c, 3, 1).unwrap();
    let incs = [4, 0, 11, 7, 1, 3];
    cfg.global.prog = incs
        .iter()
        .map(|v| Transaction::global("updateTotal", vec![Value::int(*v)]))
        .collect();
    let done = run_global_phase(&cfg, &env, &mut quiet).unwrap();
    assert_eq!(
        done.global.state.g.read("total").unwrap(),
        &Value::int(incs.iter().sum::<i64>())
    );
    assert!(done.is_wf());
}

#[test]
fn empty_phases_and_blocks_are_identities() {
    let (c, s, env) = common::example();
    let cfg = common::deployed(&c, &s);
    assert_eq!(run_global_phase(&cfg, &env, &mut quiet).unwrap(), cfg);
    for order in [LocalOrder::RoundRobin, LocalOrder::Parallel] {
        assert_eq!(run_local_phase(&cfg, &env, order, &mut quiet).unwrap(), cfg);
    }
    assert_eq!(
        run_block(&cfg, &[], &env, LocalOrder::RoundRobin, &mut quiet).unwrap(),
        cfg
    );
}

#[test]
fn single_transaction_block_matches_component_execution() {
    let (c, s, env) = common::example();
    let cfg = common::deployed(&c, &s);
    let tx = Transaction::local("deposit", vec![Value::int(4)], AddrVal::new(2, 2));
    let after = run_block(
        &cfg,
        std::slice::from_ref(&tx),
        &env,
        LocalOrder::RoundRobin,
        &mut quiet,
    )
    .unwrap();
    let direct = exec_tx_local(&cfg.engine(2).state, &tx, &env, 2).unwrap();
    assert_eq!(after.engine(2).state, direct.state);
    assert_eq!(after.engine(1), cfg.engine(1));
}

#[test]
fn assembling_omega2() {
    let (prog_g, progs, rest) = assemble_block(&omega2(), &[]);
    assert_eq!(
        prog_g,
        [
            Transaction::global("updateTotal", vec![Value::int(2)]),
            Transaction::global("updateTotal", vec![Value::int(3)]),
        ]
    );
    assert_eq!(
        progs[0],
        [Transaction::local(
            "deposit",
            vec![Value::int(2)],
            AddrVal::new(1, 2)
        )]
    );
    assert_eq!(
        progs[1],
        [Transaction::local(
            "deposit",
            vec![Value::int(3)],
            AddrVal::new(2, 1)
        )]
    );
    assert_eq!(rest, Mempools::new(2));

    let (prog_g, progs, rest) = assemble_block(&Mempools::new(2), &[]);
    assert!(prog_g.is_empty() && progs.iter().all(Vec::is_empty) && rest.is_empty());
}

#[test]
fn bad_senders_are_rejected() {
    let (c, s, _) = common::example();
    let cfg = common::deployed(&c, &s);
    let tx = Transaction::local("deposit", vec![Value::int(1)], AddrVal::new(3, 1));
    assert!(matches!(
        install_block(&cfg, &[tx]),
        Err(SystemError::BadSender(_))
    ));
}

#[test]
fn dumps_are_stable() {
    let (c, s, _) = common::example();
    let cfg = common::deployed(&c, &s);
    assert_eq!(cfg.dump(), cfg.clone().dump());
    assert_eq!(cfg.hash().len(), 16);
    assert!(cfg.dump().contains("balance:int=10"));
}
