//! Acceptance criteria. Each criterion prints one PASS/FAIL line to stderr
//! (uncaptured), and the test fails if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::io::Write;
use std::time::{Duration, Instant};

use crystwin_core::bisim::{lockstep_run, LockstepOptions, Verdict};
use crystwin_core::comp::TxSet;
use crystwin_core::harness::props::{
    prop_boundary_and_wf, prop_diamond, prop_global_isolation, prop_locality, prop_lockstep,
    prop_mempool_laws, prop_parallel_agreement, prop_roundtrip_comp, prop_roundtrip_mono, Suite,
};
use crystwin_core::harness::{case_seed, Case, PropConfig, PropertyReport};
use crystwin_core::mono;
use crystwin_core::store::Value;
use crystwin_core::system::{
    self, install_block, quiet, run_block, step_l, LocalOrder, Mempools, RunOptions, SystemConfig,
};
use crystwin_core::Fault;

const SEED: u64 = 0xC0FFEE;
const RUNNING_EXAMPLE_BUDGET: Duration = Duration::from_secs(1);
const LOCKSTEP_BUDGET: Duration = Duration::from_secs(60);
const LOCKSTEP_PAIRS: usize = 500;
const ROUNDTRIP_CONFIGS: usize = 500;
const DIAMOND_PAIRS: usize = 500;
const INVARIANT_CASES: usize = 500;
const PARALLEL_BLOCKS: usize = 200;
const MAX_N: usize = 4;
const MAX_K: usize = 3;

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

fn cfg(cases: usize) -> PropConfig {
    PropConfig {
        seed: SEED,
        cases,
        max_n: MAX_N,
        max_k: MAX_K,
        fault: None,
    }
}

fn clean(r: &PropertyReport) -> Result<(), String> {
    match r.failures.first() {
        None => Ok(()),
        Some(f) => Err(format!(
            "{}: {} failure(s), first: {}",
            r.name,
            r.failures.len(),
            f.message
        )),
    }
}

fn at_least(what: &str, got: usize, want: usize) -> Result<(), String> {
    if got >= want {
        Ok(())
    } else {
        Err(format!("only {got} {what}, need {want}"))
    }
}

fn running_example() -> Outcome {
    let start = Instant::now();
    let (c, s, env) = common::example();
    let comp = system::run_schedule(
        &common::deployed(&c, &s),
        &s.blocks,
        &env,
        RunOptions::default(),
        &mut quiet,
    )
    .map_err(|e| e.to_string())?;
    let mut m = mono::deploy(&c, 2, 2).map_err(|e| e.to_string())?;
    mono::apply_inits(&mut m, &s.inits).map_err(|e| e.to_string())?;
    let mono =
        mono::run_schedule(&m, &s.blocks, &env, None, &mut |_, _| {}).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let expect = [
        ("a", 1, 1, 7),
        ("b", 2, 1, 8),
        ("c", 2, 2, 6),
        ("d", 1, 2, 3),
    ];
    for (name, e, j, v) in expect {
        let cv = comp
            .config
            .engine(e)
            .state
            .slot(j)
            .read("balance")
            .map_err(|e| e.to_string())?;
        let mv = mono
            .config
            .engine(e)
            .slot(j)
            .read("balance")
            .map_err(|e| e.to_string())?;
        if cv != &Value::int(v) || mv != &Value::int(v) {
            return Err(format!(
                "balance {name}: comp {cv}, mono {mv}, expected {v}"
            ));
        }
    }
    let ct = comp
        .config
        .global
        .state
        .g
        .read("total")
        .map_err(|e| e.to_string())?;
    let mt = mono.config.g.read("total").map_err(|e| e.to_string())?;
    if ct != &Value::int(5) || mt != &Value::int(5) {
        return Err(format!("total: comp {ct}, mono {mt}, expected 5"));
    }
    if comp.blocks != 2 || mono.blocks != 2 {
        return Err(format!(
            "ran {} / {} blocks, expected 2",
            comp.blocks, mono.blocks
        ));
    }
    if elapsed >= RUNNING_EXAMPLE_BUDGET {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!(
        "a=7 b=8 c=6 d=3 total=5 under both semantics in {elapsed:.2?}"
    ))
}

fn mempool_snapshot() -> Outcome {
    let (c, s, env) = common::example();
    let c2 = run_block(
        &common::deployed(&c, &s),
        &s.blocks[0],
        &env,
        LocalOrder::RoundRobin,
        &mut quiet,
    )
    .map_err(|e| e.to_string())?;
    let expect = Mempools {
        engines: vec![
            TxSet::from([common::deposit(2, 2)]),
            TxSet::from([common::deposit(1, 3)]),
        ],
        global: TxSet::from([common::update_total(3), common::update_total(2)]),
    };
    if c2.mempools == expect {
        Ok("Ω after block 1 matches exactly".into())
    } else {
        Err(format!("got {:?}", c2.mempools))
    }
}

fn bisimulation() -> Outcome {
    let start = Instant::now();
    let (c, s, _) = common::example();
    match lockstep_run(&c, &s, &LockstepOptions::new(2, 2)).map_err(|e| e.to_string())? {
        Verdict::Pass {
            steps: 6,
            blocks: 2,
        } => {}
        other => return Err(format!("running example: {other}")),
    }
    let shapes: BTreeSet<(usize, usize)> = (0..LOCKSTEP_PAIRS)
        .map(|i| {
            let case = Case::generate(case_seed(SEED, i as u64), MAX_N, MAX_K);
            (case.n(), case.k())
        })
        .collect();
    if shapes.len() != MAX_N * MAX_K {
        return Err(format!("generated shapes cover only {shapes:?}"));
    }
    let r = prop_lockstep(&cfg(LOCKSTEP_PAIRS));
    clean(&r)?;
    let elapsed = start.elapsed();
    if elapsed >= LOCKSTEP_BUDGET {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!(
        "running example + {} generated pairs, {} steps, 0 divergences, {elapsed:.2?}",
        r.cases, r.checks
    ))
}

fn round_trips() -> Outcome {
    let a = prop_roundtrip_comp(&cfg(INVARIANT_CASES));
    let b = prop_roundtrip_mono(&cfg(INVARIANT_CASES));
    clean(&a)?;
    clean(&b)?;
    at_least("compositional configurations", a.checks, ROUNDTRIP_CONFIGS)?;
    at_least("monolithic configurations", b.checks, ROUNDTRIP_CONFIGS)?;
    Ok(format!(
        "enc∘dec on {} configs, dec∘enc on {} configs",
        a.checks, b.checks
    ))
}

fn diamond() -> Outcome {
    let (c, s, env) = common::example();
    let c0 = install_block(&common::deployed(&c, &s), &s.blocks[0]).map_err(|e| e.to_string())?;
    let step = |cfg: &SystemConfig, i| step_l(cfg, i, &env).map(|r| r.0).map_err(|e| e.to_string());
    let c2 = step(&step(&c0, 1)?, 2)?;
    let swapped = step(&step(&c0, 2)?, 1)?;
    let reference = run_block(
        &common::deployed(&c, &s),
        &s.blocks[0],
        &env,
        LocalOrder::RoundRobin,
        &mut quiet,
    )
    .map_err(|e| e.to_string())?;
    if c2 != swapped || c2 != reference {
        return Err("running-example swap does not reproduce C₂".into());
    }
    let r = prop_diamond(&cfg(INVARIANT_CASES));
    clean(&r)?;
    at_least("independent pairs", r.checks, DIAMOND_PAIRS)?;
    Ok(format!(
        "{} independent pairs commute; tx₁/tx₂ swap reproduces C₂",
        r.checks
    ))
}

fn invariants() -> Outcome {
    let suites: [(Suite, Fault); 4] = [
        (prop_locality, Fault::MisroutedWriteback),
        (prop_global_isolation, Fault::SkipMuSync),
        (prop_mempool_laws, Fault::ReceiveOverwrites),
        (prop_boundary_and_wf, Fault::SkipGlobalBroadcast),
    ];
    let mut parts = Vec::new();
    for (suite, fault) in suites {
        let ok = suite(&cfg(INVARIANT_CASES));
        clean(&ok)?;
        at_least(&format!("{} cases", ok.name), ok.cases, INVARIANT_CASES)?;
        let broken = suite(&cfg(INVARIANT_CASES).with_fault(Some(fault)));
        if broken.passed() {
            return Err(format!("{} did not detect {fault}", ok.name));
        }
        parts.push(format!(
            "{} ({} caught {}/{})",
            ok.name,
            fault,
            broken.failures.len(),
            broken.cases
        ));
    }
    Ok(parts.join(", "))
}

fn parallel() -> Outcome {
    let r = prop_parallel_agreement(&cfg(INVARIANT_CASES));
    clean(&r)?;
    at_least("blocks", r.checks, PARALLEL_BLOCKS)?;
    Ok(format!("parallel = round-robin on {} blocks", r.checks))
}

#[test]
fn acceptance() {
    let criteria: [(&str, Criterion); 7] = [
        ("1 running example", running_example),
        ("2 mempool snapshot", mempool_snapshot),
        ("3 bisimulation differential", bisimulation),
        ("4 round trips", round_trips),
        ("5 diamond", diamond),
        ("6 structural invariants", invariants),
        ("7 parallel/sequential agreement", parallel),
    ];
    let mut failed = Vec::new();
    let mut err = std::io::stderr();
    for (name, check) in criteria {
        let line = match check() {
            Ok(detail) => format!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failed.push(name);
                format!("FAIL criterion {name}: {why}")
            }
        };
        let _ = writeln!(err, "{line}");
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
