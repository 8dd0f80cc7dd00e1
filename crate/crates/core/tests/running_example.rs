use crystwin_core::bisim::{check_r_t, lockstep_run, CorrespondencePair, LockstepOptions, Verdict};
use crystwin_core::bridge::{dec, enc};
use crystwin_core::comp::{Env, RelayTx, TxSet};
use crystwin_core::mono;
use crystwin_core::store::Value;
use crystwin_core::syntax::{parse_contract, parse_schedule, BlockSchedule, Contract};
use crystwin_core::system::{self, quiet, LocalOrder, RunOptions, SystemConfig};

const BANK: &str = include_str!("../data/bank.crys");
const SCHED: &str = include_str!("../data/example.sched");

fn setup() -> (Contract, BlockSchedule, Env) {
    let c = parse_contract(BANK).unwrap();
    let s = parse_schedule(SCHED, &c).unwrap();
    let env = Env::new(&c, 2, 2);
    (c, s, env)
}

fn deployed(c: &Contract, s: &BlockSchedule) -> SystemConfig {
    let mut cfg = system::deploy(c, 2, 2).unwrap();
    system::apply_inits(&mut cfg, &s.inits).unwrap();
    cfg
}

fn balance(cfg: &SystemConfig, e: usize, j: usize) -> Value {
    cfg.engine(e).state.slot(j).read("balance").unwrap().clone()
}

fn addr_tx(slot: usize, func: &str, v: i64) -> RelayTx {
    RelayTx::Address {
        slot,
        func: func.into(),
        args: vec![Value::int(v)],
    }
}

fn global_tx(v: i64) -> RelayTx {
    RelayTx::Global {
        func: "updateTotal".into(),
        args: vec![Value::int(v)],
    }
}

#[test]
fn first_block_leaves_relays_pending() {
    let (c, s, env) = setup();
    let c0 = deployed(&c, &s);
    let c2 =
        system::run_block(&c0, &s.blocks[0], &env, LocalOrder::RoundRobin, &mut quiet).unwrap();
    assert_eq!(balance(&c2, 1, 1), Value::int(7));
    assert_eq!(balance(&c2, 2, 2), Value::int(6));
    assert_eq!(balance(&c2, 2, 1), Value::int(5));
    let pools = &c2.mempools;
    assert_eq!(pools.engine(1), &TxSet::from([addr_tx(2, "deposit", 2)]));
    assert_eq!(pools.engine(2), &TxSet::from([addr_tx(1, "deposit", 3)]));
    assert_eq!(pools.global, TxSet::from([global_tx(3), global_tx(2)]));
}

#[test]
fn both_semantics_reach_the_final_state() {
    let (c, s, env) = setup();
    let out = system::run_schedule(
        &deployed(&c, &s),
        &s.blocks,
        &env,
        RunOptions::default(),
        &mut quiet,
    )
    .unwrap();
    let f = &out.config;
    let expect = [((1, 1), 7), ((2, 1), 8), ((2, 2), 6), ((1, 2), 3)];
    for ((e, j), v) in expect {
        assert_eq!(balance(f, e, j), Value::int(v));
    }
    assert_eq!(f.global.state.g.read("total").unwrap(), &Value::int(5));
    assert_eq!(out.blocks, 2);
    assert_eq!(out.steps, 6);

    let mut m = mono::deploy(&c, 2, 2).unwrap();
    mono::apply_inits(&mut m, &s.inits).unwrap();
    let mo = mono::run_schedule(&m, &s.blocks, &env, None, &mut |_, _| {}).unwrap();
    for ((e, j), v) in expect {
        assert_eq!(
            mo.config.engine(e).slot(j).read("balance").unwrap(),
            &Value::int(v)
        );
    }
    assert_eq!(mo.config.g.read("total").unwrap(), &Value::int(5));
    assert_eq!(enc(&mo.config).unwrap(), out.config);
}

#[test]
fn lockstep_passes_with_six_steps() {
    let (c, s, _) = setup();
    let v = lockstep_run(&c, &s, &LockstepOptions::new(2, 2)).unwrap();
    assert_eq!(
        v,
        Verdict::Pass {
            steps: 6,
            blocks: 2
        }
    );
}

#[test]
fn swapping_the_transfers_gives_the_same_configuration() {
    let (c, s, env) = setup();
    let c0 = system::install_block(&deployed(&c, &s), &s.blocks[0]).unwrap();
    let (a, _) = system::step_l(&c0, 1, &env).unwrap();
    let (c2, _) = system::step_l(&a, 2, &env).unwrap();
    let (b, _) = system::step_l(&c0, 2, &env).unwrap();
    let (c2_swapped, _) = system::step_l(&b, 1, &env).unwrap();
    assert_eq!(c2, c2_swapped);
}

#[test]
fn decoded_block_two_start() {
    let (c, s, env) = setup();
    let c2 = system::run_block(
        &deployed(&c, &s),
        &s.blocks[0],
        &env,
        LocalOrder::RoundRobin,
        &mut quiet,
    )
    .unwrap();
    let installed = system::install_block(&c2, &[]).unwrap();
    let m = dec(&installed).unwrap();
    for e in &m.engines {
        assert_eq!(e.prog.len(), 3);
        assert!(e.prog[0].is_global() && e.prog[1].is_global());
    }
    assert_eq!(enc(&m).unwrap(), installed);
    let m2 = dec(&c2).unwrap();
    for e in &m2.engines {
        assert!(e.mempool.contains(&global_tx(3)) && e.mempool.contains(&global_tx(2)));
    }
    assert!(check_r_t(&CorrespondencePair::reached(m2, c2)).is_ok());
}
