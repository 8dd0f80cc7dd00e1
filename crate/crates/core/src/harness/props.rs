//! The property suites. Each returns a [`PropertyReport`]; run under an
//! injected fault, the suite designated for that fault must report failures.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bisim::{lockstep_run, LockstepOptions, Verdict};
use crate::bridge::{dec, enc, wf_o};
use crate::comp::{step_local, RelayLabel, RelayTx, TxSet};
use crate::faults::Fault;
use crate::store::{ByteStore, Frame, FrameScope, Value};
use crate::syntax::{Expr, RelayTarget, Scope, Stmt, TypeTag};
use crate::system::{
    install_block, receive_with, run_global_phase, run_local_phase, step_l, LocalOrder, Mempools,
    StepKind, SystemConfig,
};

use super::{
    run_property, walk_comp, walk_mono, Case, CaseResult, CompEvent, PropConfig, PropertyReport,
};

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Componentwise union computed directly on the sets.
fn union_oracle(om: &Mempools, lab: &RelayLabel) -> Mempools {
    Mempools {
        engines: om
            .engines
            .iter()
            .zip(&lab.engines)
            .map(|(a, b)| a.union(b).cloned().collect())
            .collect(),
        global: om.global.union(&lab.global).cloned().collect(),
    }
}

/// A local step changes its own engine component and grows the mempools by
/// the step's label. Nothing else moves.
pub fn prop_locality(cfg: &PropConfig) -> PropertyReport {
    run_property("locality", cfg, |case, fault| {
        let env = case.env(fault);
        let mut checks = 0;
        walk_comp(case, &env, &mut |ev| {
            let CompEvent::Step { pre, rec, post } = ev else {
                return Ok(());
            };
            let StepKind::Local(i) = rec.kind else {
                return Ok(());
            };
            checks += 1;
            for e in (1..=pre.n()).filter(|&e| e != i) {
                ensure(pre.engine(e) == post.engine(e), || {
                    format!("step of engine {i} ({}) changed engine {e}", rec.tx)
                })?;
            }
            ensure(pre.global == post.global, || {
                format!(
                    "step of engine {i} ({}) changed the global component",
                    rec.tx
                )
            })?;
            ensure(post.engine(i).prog[..] == pre.engine(i).prog[1..], || {
                format!("engine {i} program did not advance by one")
            })?;
            ensure(
                post.mempools == union_oracle(&pre.mempools, &rec.label),
                || format!("mempools after {} are not the union with its label", rec.tx),
            )
        })?;
        Ok(checks)
    })
}

/// A global step changes only the global component and every engine's view
/// of global storage, which must equal the new global store.
pub fn prop_global_isolation(cfg: &PropConfig) -> PropertyReport {
    run_property("global-isolation", cfg, |case, fault| {
        let env = case.env(fault);
        let mut checks = 0;
        walk_comp(case, &env, &mut |ev| {
            let CompEvent::Step { pre, rec, post } = ev else {
                return Ok(());
            };
            if rec.kind != StepKind::Global {
                return Ok(());
            }
            checks += 1;
            for (idx, (a, b)) in pre.engines.iter().zip(&post.engines).enumerate() {
                let i = idx + 1;
                ensure(
                    a.prog == b.prog
                        && a.state.slots == b.state.slots
                        && a.state.engine == b.state.engine
                        && a.state.mem == b.state.mem,
                    || format!("global step {} changed local state of engine {i}", rec.tx),
                )?;
                ensure(b.state.gview == post.global.state.g, || {
                    format!(
                        "engine {i} view of global storage is stale after {}",
                        rec.tx
                    )
                })?;
            }
            Ok(())
        })?;
        Ok(checks)
    })
}

fn random_relay(rng: &mut ChaCha8Rng, case: &Case) -> RelayTx {
    let func = format!("f{}", rng.gen_range(0..6));
    let args = (0..rng.gen_range(0..3))
        .map(|_| Value::int(rng.gen_range(0..4)))
        .collect();
    match rng.gen_range(0..3) {
        0 => RelayTx::Address {
            slot: rng.gen_range(1..=case.k()),
            func,
            args,
        },
        1 => RelayTx::Engine { func, args },
        _ => RelayTx::Global { func, args },
    }
}

fn random_set(rng: &mut ChaCha8Rng, case: &Case) -> TxSet {
    (0..rng.gen_range(0..4))
        .map(|_| random_relay(rng, case))
        .collect()
}

fn random_label(rng: &mut ChaCha8Rng, case: &Case) -> RelayLabel {
    let mut lab = RelayLabel::empty(case.n());
    for i in 0..case.n() {
        lab.engines[i] = random_set(rng, case);
    }
    lab.global = random_set(rng, case);
    lab
}

/// Mempools never shrink between steps (block assembly drains them and is
/// excluded), and reception is associative: receiving two labels in turn
/// equals receiving their union.
pub fn prop_mempool_laws(cfg: &PropConfig) -> PropertyReport {
    run_property("mempool-laws", cfg, |case, fault| {
        let env = case.env(fault);
        let mut checks = 0;
        let mut seen: Vec<(Mempools, RelayLabel)> = Vec::new();
        walk_comp(case, &env, &mut |ev| {
            let CompEvent::Step { pre, rec, post } = ev else {
                return Ok(());
            };
            checks += 1;
            seen.push((pre.mempools.clone(), rec.label.clone()));
            ensure(post.mempools.includes(&pre.mempools), || {
                format!("mempools shrank across {}", rec.tx)
            })
        })?;
        let mut rng = ChaCha8Rng::seed_from_u64(case.seed ^ 0xA550C);
        let mut triples: Vec<(Mempools, RelayLabel, RelayLabel)> = seen
            .windows(2)
            .map(|w| (w[0].0.clone(), w[0].1.clone(), w[1].1.clone()))
            .collect();
        let mut om = Mempools::new(case.n());
        om.engines = (0..case.n()).map(|_| random_set(&mut rng, case)).collect();
        om.global = random_set(&mut rng, case);
        triples.push((
            om,
            random_label(&mut rng, case),
            random_label(&mut rng, case),
        ));
        triples.push((
            Mempools::new(case.n()),
            RelayLabel::empty(case.n()),
            RelayLabel::empty(case.n()),
        ));
        for (om, w1, w2) in triples {
            checks += 1;
            let stepwise = receive_with(&env, &receive_with(&env, &om, &w1), &w2);
            let joint = receive_with(&env, &om, &w1.clone().union(&w2));
            ensure(stepwise == joint, || {
                "reception is not associative".to_string()
            })?;
            ensure(joint == union_oracle(&union_oracle(&om, &w1), &w2), || {
                "reception differs from set union".to_string()
            })?;
        }
        Ok(checks)
    })
}

/// Along every run of both semantics: stacks are empty between
/// transactions, configurations are well formed, replicated global
/// transactions agree across engines and global execution leaves the local
/// stacks in agreement.
pub fn prop_boundary_and_wf(cfg: &PropConfig) -> PropertyReport {
    run_property("boundary-and-wf", cfg, |case, fault| {
        let env = case.env(fault);
        let mut checks = 0;
        walk_comp(case, &env, &mut |ev| {
            let post = match ev {
                CompEvent::Install { post, .. } | CompEvent::Step { post, .. } => post,
            };
            checks += 1;
            ensure(post.at_boundary(), || {
                "compositional stack not empty at boundary".into()
            })?;
            ensure(post.is_wf(), || {
                "compositional configuration not well formed".into()
            })
        })?;
        walk_mono(case, &env, &mut |rec, post| {
            checks += 1;
            ensure(post.at_boundary(), || {
                format!("monolithic stack not empty after {}", rec.tx)
            })?;
            ensure(wf_o(post), || {
                format!("monolithic configuration not well formed after {}", rec.tx)
            })?;
            ensure(post.gtx_agree(), || {
                format!("global mempool entries disagree after {}", rec.tx)
            })?;
            ensure(post.stacks_agree(), || {
                format!("local stacks disagree after {}", rec.tx)
            })
        })?;
        Ok(checks)
    })
}

fn diamond_at(c: &SystemConfig, env: &crate::comp::Env) -> CaseResult {
    if !c.global.prog.is_empty() {
        return Ok(0);
    }
    let pending: Vec<usize> = (1..=c.n())
        .filter(|&i| !c.engine(i).prog.is_empty())
        .collect();
    let mut pairs = 0;
    for (x, &i) in pending.iter().enumerate() {
        for &j in &pending[x + 1..] {
            let err = |e| format!("{e}");
            let (a, _) = step_l(c, i, env).map_err(err)?;
            let (ij, _) = step_l(&a, j, env).map_err(err)?;
            let (b, _) = step_l(c, j, env).map_err(err)?;
            let (ji, _) = step_l(&b, i, env).map_err(err)?;
            ensure(ij == ji, || {
                format!(
                    "{} on engine {i} and {} on engine {j} do not commute",
                    c.engine(i).prog[0],
                    c.engine(j).prog[0]
                )
            })?;
            pairs += 1;
        }
    }
    Ok(pairs)
}

/// Local steps of distinct engines commute. Counts checked pairs.
pub fn prop_diamond(cfg: &PropConfig) -> PropertyReport {
    run_property("diamond", cfg, |case, fault| {
        let env = case.env(fault);
        let mut checks = 0;
        walk_comp(case, &env, &mut |ev| {
            if let CompEvent::Step { pre, .. } = ev {
                checks += diamond_at(pre, &env)?;
            }
            Ok(())
        })?;
        Ok(checks)
    })
}

/// Every local order reaches the round-robin result block by block.
/// Counts compared blocks.
pub fn prop_parallel_agreement(cfg: &PropConfig) -> PropertyReport {
    run_property("parallel-agreement", cfg, |case, fault| {
        let env = case.env(fault);
        let err = |e| format!("{e}");
        let blocks = &case.schedule.blocks;
        let limit = blocks.len() + crate::system::DRAIN_BLOCKS;
        let mut cur = case.deploy_comp().map_err(err)?;
        let empty = Vec::new();
        let mut run = 0;
        while run < limit && (run < blocks.len() || !cur.mempools.is_empty()) {
            let block = blocks.get(run).unwrap_or(&empty);
            let after_g = run_global_phase(
                &install_block(&cur, block).map_err(err)?,
                &env,
                &mut |_, _| {},
            )
            .map_err(err)?;
            let rr = run_local_phase(&after_g, &env, LocalOrder::RoundRobin, &mut |_, _| {})
                .map_err(err)?;
            for order in [
                LocalOrder::Parallel,
                LocalOrder::Reverse,
                LocalOrder::LowestFirst,
            ] {
                let other = run_local_phase(&after_g, &env, order, &mut |_, _| {}).map_err(err)?;
                ensure(other == rr, || {
                    format!("block {}: {order:?} differs from round-robin", run + 1)
                })?;
            }
            cur = rr;
            run += 1;
        }
        Ok(run)
    })
}

/// `enc(dec(C)) = C` on compositional boundaries. Counts configurations.
pub fn prop_roundtrip_comp(cfg: &PropConfig) -> PropertyReport {
    run_property("roundtrip-enc-dec", cfg, |case, fault| {
        let env = case.env(fault);
        let mut checks = 0;
        walk_comp(case, &env, &mut |ev| {
            let post = match ev {
                CompEvent::Install { post, .. } | CompEvent::Step { post, .. } => post,
            };
            checks += 1;
            let m = dec(post).map_err(|e| format!("dec: {e}"))?;
            let back = enc(&m).map_err(|e| format!("enc: {e}"))?;
            ensure(&back == post, || "enc(dec(C)) differs from C".into())
        })?;
        Ok(checks)
    })
}

/// `dec(enc(C°)) = C°` on monolithic boundaries. Counts configurations.
pub fn prop_roundtrip_mono(cfg: &PropConfig) -> PropertyReport {
    run_property("roundtrip-dec-enc", cfg, |case, fault| {
        let env = case.env(fault);
        let mut checks = 0;
        walk_mono(case, &env, &mut |_, post| {
            checks += 1;
            let c = enc(post).map_err(|e| format!("enc: {e}"))?;
            let back = dec(&c).map_err(|e| format!("dec: {e}"))?;
            ensure(&back == post, || "dec(enc(C)) differs from C".into())
        })?;
        Ok(checks)
    })
}

/// Lockstep execution of both semantics. Counts steps.
pub fn prop_lockstep(cfg: &PropConfig) -> PropertyReport {
    run_property("lockstep", cfg, |case, fault| {
        let mut opts = LockstepOptions::new(case.n(), case.k());
        opts.fault = fault;
        opts.minimize = false;
        match lockstep_run(&case.contract, &case.schedule, &opts).map_err(|e| format!("{e}"))? {
            Verdict::Pass { steps, .. } => Ok(steps),
            Verdict::Diverged(d) => Err(format!(
                "diverged at step {} of block {}: {}",
                d.step, d.block, d.reason
            )),
        }
    })
}

fn literal_args(rng: &mut ChaCha8Rng, case: &Case, params: &[crate::syntax::Param]) -> Vec<Expr> {
    params
        .iter()
        .map(|p| match p.ty {
            TypeTag::Int => Expr::int(rng.gen_range(0..5)),
            TypeTag::Address => {
                Expr::AddrLit(rng.gen_range(1..=case.n()), rng.gen_range(1..=case.k()))
            }
        })
        .collect()
}

/// The label of `s1; s2` is the union of the labels of its parts, each
/// part run on the state its predecessor left.
pub fn prop_seq_label(cfg: &PropConfig) -> PropertyReport {
    run_property("seq-label", cfg, |case, fault| {
        let env = case.env(fault);
        let mut rng = ChaCha8Rng::seed_from_u64(case.seed ^ 0x5E9);
        let c = case.deploy_comp().map_err(|e| format!("{e}"))?;
        let mut st = c.engine(1).state.clone();
        st.mem
            .addtop(Frame::new(ByteStore::new(), FrameScope::Address(1), None));
        let relays: Vec<Stmt> = (0..rng.gen_range(2..5))
            .filter_map(|_| {
                let f = case.contract.funcs.choose(&mut rng)?;
                let target = match f.scope {
                    Scope::Address => RelayTarget::At(Expr::AddrLit(
                        rng.gen_range(1..=case.n()),
                        rng.gen_range(1..=case.k()),
                    )),
                    Scope::Engine => RelayTarget::Engines,
                    Scope::Global => RelayTarget::Global,
                };
                Some(Stmt::Relay {
                    target,
                    func: f.name.clone(),
                    args: literal_args(&mut rng, case, &f.params),
                })
            })
            .collect();
        let whole = Stmt::block(relays.clone());
        let (_, label) = step_local(&st, &whole, &env, 1).map_err(|e| format!("{e}"))?;
        let mut expect = RelayLabel::empty(case.n());
        let mut cur = st;
        for s in &relays {
            let (next, part) = step_local(&cur, s, &env, 1).map_err(|e| format!("{e}"))?;
            expect.engines = expect
                .engines
                .iter()
                .zip(&part.engines)
                .map(|(a, b)| a.union(b).cloned().collect())
                .collect();
            expect.global = expect.global.union(&part.global).cloned().collect();
            cur = next;
        }
        ensure(label == expect, || {
            format!(
                "label of a {}-statement sequence is not the union of its parts",
                relays.len()
            )
        })?;
        Ok(relays.len())
    })
}

/// Suite designated to catch each injected fault.
pub fn detecting_suite(fault: Fault) -> Suite {
    match fault {
        Fault::SkipMuSync => prop_global_isolation,
        Fault::SkipGlobalBroadcast => prop_boundary_and_wf,
        Fault::SeqWithoutUnion => prop_seq_label,
        Fault::ReceiveOverwrites => prop_mempool_laws,
        Fault::MisroutedWriteback => prop_locality,
    }
}

pub type Suite = fn(&PropConfig) -> PropertyReport;

/// All suites in reporting order.
pub const ALL: [(&str, Suite); 10] = [
    ("locality", prop_locality),
    ("global-isolation", prop_global_isolation),
    ("mempool-laws", prop_mempool_laws),
    ("boundary-and-wf", prop_boundary_and_wf),
    ("diamond", prop_diamond),
    ("parallel-agreement", prop_parallel_agreement),
    ("roundtrip-enc-dec", prop_roundtrip_comp),
    ("roundtrip-dec-enc", prop_roundtrip_mono),
    ("lockstep", prop_lockstep),
    ("seq-label", prop_seq_label),
];
