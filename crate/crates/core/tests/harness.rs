mod common;

use crystwin_core::harness::props::{self, detecting_suite};
use crystwin_core::harness::{case_seed, Case, PropConfig};
use crystwin_core::system::{install_block, step_l};
use crystwin_core::Fault;

#[test]
fn first_transfer_touches_only_engine_one() {
    let (c, s, env) = common::example();
    let c0 = install_block(&common::deployed(&c, &s), &s.blocks[0]).unwrap();
    let (c1, _) = step_l(&c0, 1, &env).unwrap();
    assert_ne!(c0.engine(1), c1.engine(1));
    assert_eq!(c0.engine(2), c1.engine(2));
    assert_eq!(c0.global, c1.global);
}

#[test]
fn generated_contracts_deploy_under_both_semantics() {
    for idx in 0..200 {
        let case = Case::generate(case_seed(99, idx), 8, 4);
        case.deploy_comp().unwrap();
        case.deploy_mono().unwrap();
    }
}

#[test]
fn every_suite_passes_on_a_small_sample() {
    let cfg = PropConfig::default().with_cases(60);
    for (name, suite) in props::ALL {
        let r = suite(&cfg);
        assert!(r.passed(), "{name}\n{r}");
        assert_eq!(r.cases, 60);
    }
}

#[test]
fn lockstep_on_a_thousand_generated_pairs() {
    let r = props::prop_lockstep(&PropConfig::default().with_cases(1000));
    assert!(r.passed(), "{r}");
}

#[test]
fn each_fault_is_caught_by_its_suite() {
    let cfg = PropConfig::default().with_cases(200);
    for fault in Fault::ALL {
        let r = detecting_suite(fault)(&cfg.with_fault(Some(fault)));
        assert!(!r.passed(), "{fault} went unnoticed");
        let f = &r.failures[0];
        assert!(f.input.contains("contract"));
        assert!(r.to_string().contains(&format!("seed: {}", f.seed)));
    }
}

#[test]
fn reports_are_deterministic() {
    let cfg = PropConfig::default()
        .with_cases(40)
        .with_fault(Some(Fault::MisroutedWriteback));
    let a = props::prop_locality(&cfg).to_string();
    let b = props::prop_locality(&cfg).to_string();
    assert_eq!(a, b);
    let empty = props::prop_diamond(&PropConfig::default().with_cases(0));
    assert!(empty.passed());
    assert_eq!(empty.checks, 0);
}

#[test]
fn failures_replay_from_their_seed() {
    let cfg = PropConfig::default()
        .with_cases(50)
        .with_fault(Some(Fault::SkipMuSync));
    let r = props::prop_global_isolation(&cfg);
    let f = &r.failures[0];
    let again = Case::generate(f.seed, cfg.max_n, cfg.max_k);
    assert_eq!(again.seed, f.seed);
    assert_eq!(
        again.contract.name,
        Case::generate(case_seed(cfg.seed, f.case as u64), 4, 3)
            .contract
            .name
    );
}
