#![allow(dead_code)]

use crystwin_core::comp::{Env, RelayTx};
use crystwin_core::store::Value;
use crystwin_core::syntax::{parse_contract, parse_schedule, BlockSchedule, Contract};
use crystwin_core::system::{self, SystemConfig};

pub const BANK: &str = include_str!("../../data/bank.crys");
pub const SCHED: &str = include_str!("../../data/example.sched");

pub fn bank() -> Contract {
    parse_contract(BANK).unwrap()
}

pub fn example() -> (Contract, BlockSchedule, Env) {
    let c = bank();
    let s = parse_schedule(SCHED, &c).unwrap();
    let env = Env::new(&c, 2, 2);
    (c, s, env)
}

pub fn deployed(c: &Contract, s: &BlockSchedule) -> SystemConfig {
    let mut cfg = system::deploy(c, 2, 2).unwrap();
    system::apply_inits(&mut cfg, &s.inits).unwrap();
    cfg
}

pub fn deposit(slot: usize, v: i64) -> RelayTx {
    RelayTx::Address {
        slot,
        func: "deposit".into(),
        args: vec![Value::int(v)],
    }
}

pub fn update_total(v: i64) -> RelayTx {
    RelayTx::Global {
        func: "updateTotal".into(),
        args: vec![Value::int(v)],
    }
}
