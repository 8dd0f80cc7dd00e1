//! Random contracts and schedules that respect the scope rules, so every
//! generated program deploys and runs under both semantics.
//!
//! Names are globally unique (state variables, then `p{f}_{i}` parameters and
//! `t{f}_{i}` temporaries per function) because a callee's frame starts as a
//! copy of its caller's. A function only calls functions with a smaller
//! index, and every loop counts a dedicated temporary up to a small bound.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::comp::Transaction;
use crate::store::{AddrVal, Value};
use crate::syntax::{
    BinOp, BlockSchedule, Contract, Expr, FuncDecl, InitTarget, Param, RelayTarget, Scope,
    StateInit, StateVarDecl, Stmt, TypeTag,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenParams {
    pub seed: u64,
    /// Engines, 1..=8.
    pub n: usize,
    /// Address slots per engine, 1..=4.
    pub k: usize,
    pub max_funcs: usize,
    pub max_stmt_depth: usize,
    pub max_blocks: usize,
    pub max_tx_per_block: usize,
}

impl GenParams {
    pub fn new(seed: u64, n: usize, k: usize) -> Self {
        assert!((1..=8).contains(&n) && (1..=4).contains(&k));
        Self {
            seed,
            n,
            k,
            max_funcs: 6,
            max_stmt_depth: 2,
            max_blocks: 3,
            max_tx_per_block: 5,
        }
    }

    /// Derives engine and slot counts from the seed, within the given bounds.
    pub fn sampled(seed: u64, max_n: usize, max_k: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x05ee_d0f5_ca1e);
        let n = rng.gen_range(1..=max_n);
        let k = rng.gen_range(1..=max_k);
        Self::new(seed, n, k)
    }
}

/// Stream of independent per-case seeds derived from a base seed.
pub fn case_seed(base: u64, case: u64) -> u64 {
    let mut z = base.wrapping_add(case.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone)]
struct Sig {
    name: String,
    scope: Scope,
    params: Vec<Param>,
    ret: Option<TypeTag>,
}

struct Ctx<'a> {
    rng: &'a mut ChaCha8Rng,
    p: &'a GenParams,
    sigs: &'a [Sig],
    /// Index of the function whose body is being generated.
    me: usize,
    scope: Scope,
    ints: Vec<String>,
    /// Address-scope state variables, unreadable inside an engine callee.
    addr_state: Vec<String>,
    addrs: Vec<String>,
    writable: Vec<String>,
}

impl Ctx<'_> {
    fn literal(&mut self) -> Expr {
        Expr::int(self.rng.gen_range(0..20))
    }

    fn addr_lit(&mut self) -> Expr {
        Expr::AddrLit(
            self.rng.gen_range(1..=self.p.n),
            self.rng.gen_range(1..=self.p.k),
        )
    }

    /// Functions this body may call: lower index, reachable scope, and the
    /// requested return shape.
    fn callees(&self, want_value: bool) -> Vec<usize> {
        (0..self.me)
            .filter(|&g| {
                let s = &self.sigs[g];
                let scope_ok = matches!(
                    (self.scope, s.scope),
                    (Scope::Address, Scope::Address | Scope::Engine)
                        | (Scope::Engine, Scope::Engine)
                        | (Scope::Global, Scope::Global)
                );
                scope_ok && s.ret.is_some() == want_value
            })
            .collect()
    }

    /// Call arguments are evaluated in the callee's frame, so an engine
    /// callee cannot see the caller's address state.
    fn args_for(&mut self, g: usize, depth: usize, allow_calls: bool) -> Vec<Expr> {
        let params = self.sigs[g].params.clone();
        let narrowed = self.scope == Scope::Address && self.sigs[g].scope == Scope::Engine;
        let saved = self.ints.clone();
        if narrowed {
            self.ints.retain(|v| !self.addr_state.contains(v));
        }
        let args = params
            .iter()
            .map(|p| match p.ty {
                TypeTag::Int => self.int_expr(depth, allow_calls && !narrowed),
                TypeTag::Address => self.addr_expr(),
            })
            .collect();
        self.ints = saved;
        args
    }

    fn addr_expr(&mut self) -> Expr {
        if !self.addrs.is_empty() && self.rng.gen_bool(0.6) {
            Expr::ident(self.addrs.choose(self.rng).unwrap().clone())
        } else {
            self.addr_lit()
        }
    }

    fn int_expr(&mut self, depth: usize, allow_calls: bool) -> Expr {
        let roll = self.rng.gen_range(0..10);
        if depth == 0 || roll < 4 {
            if self.ints.is_empty() || self.rng.gen_bool(0.3) {
                return self.literal();
            }
            return Expr::ident(self.ints.choose(self.rng).unwrap().clone());
        }
        if allow_calls && roll == 9 {
            let callees = self.callees(true);
            if let Some(&g) = callees.choose(self.rng) {
                let args = self.args_for(g, depth - 1, allow_calls);
                return Expr::Call(self.sigs[g].name.clone(), args);
            }
        }
        let op = if self.rng.gen_bool(0.5) {
            BinOp::Add
        } else {
            BinOp::Sub
        };
        let l = self.int_expr(depth - 1, allow_calls);
        let r = self.int_expr(depth - 1, allow_calls);
        Expr::bin(op, l, r)
    }

    fn cond(&mut self) -> Expr {
        if !self.addrs.is_empty() && self.rng.gen_bool(0.15) {
            let l = self.addr_expr();
            let r = self.addr_expr();
            return Expr::bin(BinOp::Eq, l, r);
        }
        let op = *[BinOp::Le, BinOp::Lt, BinOp::Eq, BinOp::Ge, BinOp::Gt]
            .choose(self.rng)
            .unwrap();
        let l = self.int_expr(1, true);
        let r = self.int_expr(1, true);
        Expr::bin(op, l, r)
    }

    fn relay(&mut self) -> Option<Stmt> {
        let mut options = Vec::new();
        for (g, s) in self.sigs.iter().enumerate().take(self.me) {
            let ok = match (self.scope, s.scope) {
                (_, Scope::Address) | (_, Scope::Engine) => true,
                (Scope::Global, Scope::Global) => false,
                (_, Scope::Global) => true,
            };
            if ok {
                options.push(g);
            }
        }
        let &g = options.choose(self.rng)?;
        let args = self.args_for(g, 1, false);
        let target = match self.sigs[g].scope {
            Scope::Address => RelayTarget::At(self.addr_expr()),
            Scope::Engine => RelayTarget::Engines,
            Scope::Global => RelayTarget::Global,
        };
        Some(Stmt::Relay {
            target,
            func: self.sigs[g].name.clone(),
            args,
        })
    }

    fn assign(&mut self) -> Option<Stmt> {
        let target = self.writable.choose(self.rng)?.clone();
        let e = self.int_expr(2, true);
        Some(Stmt::Assign(target, e))
    }

    fn call_stmt(&mut self) -> Option<Stmt> {
        let callees = self.callees(false);
        let &g = callees.choose(self.rng)?;
        let args = self.args_for(g, 1, true);
        Some(Stmt::Call(self.sigs[g].name.clone(), args))
    }

    fn stmt(&mut self, depth: usize, counters: &mut Vec<String>) -> Stmt {
        for _ in 0..4 {
            let pick = self.rng.gen_range(0..12);
            let s = match pick {
                0..=3 => self.assign(),
                4..=5 => self.relay(),
                6 => self.call_stmt(),
                7..=8 if depth > 0 => {
                    let c = self.cond();
                    let t = self.stmts(depth - 1, counters);
                    let e = if self.rng.gen_bool(0.5) {
                        self.stmts(depth - 1, counters)
                    } else {
                        Stmt::Skip
                    };
                    Some(Stmt::If(c, Box::new(t), Box::new(e)))
                }
                9 if depth > 0 => {
                    let ctr = format!("t{}_{}", self.me, 100 + counters.len());
                    counters.push(ctr.clone());
                    let bound = Expr::int(self.rng.gen_range(1..4));
                    let body = Stmt::block([
                        self.stmts(depth - 1, counters),
                        Stmt::Assign(
                            ctr.clone(),
                            Expr::bin(BinOp::Add, Expr::ident(&ctr), Expr::int(1)),
                        ),
                    ]);
                    Some(Stmt::block([
                        Stmt::Assign(ctr.clone(), Expr::int(0)),
                        Stmt::While(
                            Expr::bin(BinOp::Lt, Expr::ident(&ctr), bound),
                            Box::new(body),
                        ),
                    ]))
                }
                10 => Some(Stmt::Skip),
                _ => None,
            };
            if let Some(s) = s {
                return s;
            }
        }
        Stmt::Skip
    }

    fn stmts(&mut self, depth: usize, counters: &mut Vec<String>) -> Stmt {
        let count = self.rng.gen_range(1..=3);
        Stmt::block(
            (0..count)
                .map(|_| self.stmt(depth, counters))
                .collect::<Vec<_>>(),
        )
    }
}

fn scopes_for(vars: &BTreeMap<Scope, Vec<String>>, scope: Scope) -> (Vec<String>, Vec<String>) {
    let get = |s: Scope| vars.get(&s).cloned().unwrap_or_default();
    match scope {
        Scope::Address => {
            let mut read = get(Scope::Address);
            read.extend(get(Scope::Engine));
            let write = read.clone();
            read.extend(get(Scope::Global));
            (read, write)
        }
        Scope::Engine => {
            let write = get(Scope::Engine);
            let mut read = write.clone();
            read.extend(get(Scope::Global));
            (read, write)
        }
        Scope::Global => (get(Scope::Global), get(Scope::Global)),
    }
}

pub fn gen_contract(p: &GenParams) -> Contract {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut vars: BTreeMap<Scope, Vec<String>> = BTreeMap::new();
    let mut state_vars = Vec::new();
    for (scope, prefix) in [
        (Scope::Address, "a"),
        (Scope::Engine, "e"),
        (Scope::Global, "g"),
    ] {
        for idx in 0..rng.gen_range(0..=2) {
            let name = format!("{prefix}{idx}");
            vars.entry(scope).or_default().push(name.clone());
            state_vars.push(StateVarDecl {
                ty: TypeTag::Int,
                scope,
                name,
            });
        }
    }

    let nfuncs = rng.gen_range(1..=p.max_funcs.max(1));
    let mut sigs = Vec::with_capacity(nfuncs);
    for f in 0..nfuncs {
        let scope = match rng.gen_range(0..10) {
            0..=4 => Scope::Address,
            5..=6 => Scope::Engine,
            _ => Scope::Global,
        };
        let params = (0..rng.gen_range(0..=2))
            .map(|i| Param {
                ty: if rng.gen_bool(0.3) {
                    TypeTag::Address
                } else {
                    TypeTag::Int
                },
                name: format!("p{f}_{i}"),
            })
            .collect();
        let ret = rng.gen_bool(0.3).then_some(TypeTag::Int);
        sigs.push(Sig {
            name: format!("f{f}"),
            scope,
            params,
            ret,
        });
    }

    let mut funcs = Vec::with_capacity(nfuncs);
    for (f, sig) in sigs.iter().enumerate() {
        let (mut ints, mut writable) = scopes_for(&vars, sig.scope);
        let addrs: Vec<String> = sig
            .params
            .iter()
            .filter(|q| q.ty == TypeTag::Address)
            .map(|q| q.name.clone())
            .collect();
        ints.extend(
            sig.params
                .iter()
                .filter(|q| q.ty == TypeTag::Int)
                .map(|q| q.name.clone()),
        );
        let temps: Vec<String> = (0..rng.gen_range(0..=2))
            .map(|i| format!("t{f}_{i}"))
            .collect();
        ints.extend(temps.iter().cloned());
        writable.extend(temps.iter().cloned());
        let mut ctx = Ctx {
            rng: &mut rng,
            p,
            sigs: &sigs,
            me: f,
            scope: sig.scope,
            ints,
            addr_state: vars.get(&Scope::Address).cloned().unwrap_or_default(),
            addrs,
            writable,
        };
        let mut counters = Vec::new();
        let mut body = ctx.stmts(p.max_stmt_depth, &mut counters);
        if sig.ret.is_some() {
            let e = ctx.int_expr(1, true);
            body = Stmt::seq(body, Stmt::Return(Some(e)));
        }
        let decls = temps
            .iter()
            .chain(&counters)
            .map(|t| Stmt::TempVarDecl(TypeTag::Int, t.clone()));
        let body = Stmt::block(decls.chain(std::iter::once(body)).collect::<Vec<_>>());
        funcs.push(FuncDecl {
            name: sig.name.clone(),
            params: sig.params.clone(),
            scope: sig.scope,
            ret: sig.ret,
            body,
        });
    }
    Contract {
        name: format!("Gen{}", p.seed % 10_000),
        state_vars,
        funcs,
    }
}

/// Binding name for address `(r, j)` in generated schedules.
pub fn address_name(a: AddrVal) -> String {
    format!("u{}_{}", a.engine, a.slot)
}

/// Random initial values and blocks of user transactions for `c`.
pub fn gen_schedule(c: &Contract, p: &GenParams) -> BlockSchedule {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed.wrapping_add(0xB10C));
    let mut sched = BlockSchedule::default();
    for r in 1..=p.n {
        for j in 1..=p.k {
            let a = AddrVal::new(r, j);
            sched.bindings.insert(address_name(a), a);
        }
    }
    for v in &c.state_vars {
        let targets: Vec<InitTarget> = match v.scope {
            Scope::Address => (1..=p.n)
                .flat_map(|r| (1..=p.k).map(move |j| InitTarget::Address(AddrVal::new(r, j))))
                .collect(),
            Scope::Engine => (1..=p.n).map(InitTarget::Engine).collect(),
            Scope::Global => vec![InitTarget::Global],
        };
        for target in targets {
            if rng.gen_bool(0.5) {
                sched.inits.push(StateInit {
                    target,
                    var: v.name.clone(),
                    value: Value::int(rng.gen_range(-5..30)),
                });
            }
        }
    }
    let user: Vec<&FuncDecl> = c
        .funcs
        .iter()
        .filter(|f| f.scope != Scope::Global)
        .collect();
    let blocks = rng.gen_range(1..=p.max_blocks.max(1));
    for _ in 0..blocks {
        let mut block = Vec::new();
        if !user.is_empty() {
            for _ in 0..rng.gen_range(0..=p.max_tx_per_block) {
                let f = user.choose(&mut rng).unwrap();
                let sender = AddrVal::new(rng.gen_range(1..=p.n), rng.gen_range(1..=p.k));
                let args = f
                    .params
                    .iter()
                    .map(|q| match q.ty {
                        TypeTag::Int => Value::int(rng.gen_range(-3..12)),
                        TypeTag::Address => {
                            Value::addr(rng.gen_range(1..=p.n), rng.gen_range(1..=p.k))
                        }
                    })
                    .collect();
                block.push(Transaction::local(f.name.clone(), args, sender));
            }
        }
        sched.blocks.push(block);
    }
    sched
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_contract, pretty_print};

    #[test]
    fn deterministic() {
        let p = GenParams::new(42, 3, 2);
        assert_eq!(gen_contract(&p), gen_contract(&p));
        let c = gen_contract(&p);
        assert_eq!(gen_schedule(&c, &p), gen_schedule(&c, &p));
    }

    #[test]
    fn generated_contracts_round_trip() {
        for seed in 0..100 {
            let c = gen_contract(&GenParams::sampled(seed, 4, 3));
            let text = pretty_print(&c);
            assert_eq!(parse_contract(&text).unwrap(), c, "{text}");
        }
    }
}
