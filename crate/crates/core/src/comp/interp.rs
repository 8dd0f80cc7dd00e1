//! Rule bodies shared by the engine and global components.
//!
//! The two components differ only in how state variables are resolved, which
//! call and relay forms are permitted, and which stack they use; those
//! differences live behind [`Component`]. Everything else (temporaries,
//! sequencing, calls, returns, relays) is written once.

use num_bigint::BigInt;

use super::relay::{RelayLabel, RelayTx};
use super::state::{EngineState, GlobalState};
use super::{Env, ExecError};
use crate::faults::Fault;
use crate::store::{ByteStore, Frame, FrameScope, MemStack, StoreError, Value};
use crate::syntax::{BinOp, Expr, FuncDecl, RelayTarget, Scope, Stmt};

pub(crate) trait Component: Clone + PartialEq {
    fn mem(&self) -> &MemStack;
    fn mem_mut(&mut self) -> &mut MemStack;
    fn is_global(&self) -> bool;
    /// State-variable read for a top frame with scope `scope`.
    fn read_state(&self, scope: FrameScope, id: &str) -> Result<Value, ExecError>;
    /// State-variable write for a top frame with scope `scope`.
    fn write_state(&mut self, scope: FrameScope, id: &str, v: Value) -> Result<(), ExecError>;
    /// Scope of the frame pushed when a `callee`-scope function is called
    /// from a `caller` frame, or `None` when no call rule applies.
    fn callee_frame(&self, caller: FrameScope, callee: Scope) -> Option<FrameScope>;
}

#[derive(Clone, PartialEq)]
pub(crate) struct EngineComp {
    st: EngineState,
    k: usize,
}

impl EngineComp {
    pub(crate) fn new(st: EngineState, k: usize) -> Self {
        Self { st, k }
    }

    pub(crate) fn into_state(self) -> EngineState {
        self.st
    }

    fn slot_store(&self, j: usize) -> Result<&ByteStore, ExecError> {
        if j == 0 || j > self.k {
            return Err(ExecError::Precondition(format!("slot {j} out of range")));
        }
        Ok(self.st.slot(j))
    }
}

impl Component for EngineComp {
    fn mem(&self) -> &MemStack {
        &self.st.mem
    }

    fn mem_mut(&mut self) -> &mut MemStack {
        &mut self.st.mem
    }

    fn is_global(&self) -> bool {
        false
    }

    fn read_state(&self, scope: FrameScope, id: &str) -> Result<Value, ExecError> {
        if let FrameScope::Address(j) = scope {
            if let Ok(v) = self.slot_store(j)?.read(id) {
                return Ok(v.clone());
            }
        }
        if scope.is_global() {
            return Err(ExecError::ScopeViolation(
                "engine component running a global frame".into(),
            ));
        }
        if let Ok(v) = self.st.engine.read(id) {
            return Ok(v.clone());
        }
        if let Ok(v) = self.st.gview.read(id) {
            return Ok(v.clone());
        }
        if self.st.slots.iter().any(|s| s.contains(id)) {
            return Err(ExecError::ScopeViolation(format!(
                "address variable `{id}` read from an engine-scope frame"
            )));
        }
        Err(StoreError::Undefined(id.to_string()).into())
    }

    fn write_state(&mut self, scope: FrameScope, id: &str, v: Value) -> Result<(), ExecError> {
        if let FrameScope::Address(j) = scope {
            if self.slot_store(j)?.contains(id) {
                return Ok(self.st.slot_mut(j).write(id, v)?);
            }
        }
        if scope.is_global() {
            return Err(ExecError::ScopeViolation(
                "engine component running a global frame".into(),
            ));
        }
        if self.st.engine.contains(id) {
            return Ok(self.st.engine.write(id, v)?);
        }
        if self.st.gview.contains(id) {
            return Err(ExecError::ScopeViolation(format!(
                "global variable `{id}` assigned from a local frame"
            )));
        }
        if self.st.slots.iter().any(|s| s.contains(id)) {
            return Err(ExecError::ScopeViolation(format!(
                "address variable `{id}` assigned from an engine-scope frame"
            )));
        }
        Err(StoreError::Undefined(id.to_string()).into())
    }

    fn callee_frame(&self, caller: FrameScope, callee: Scope) -> Option<FrameScope> {
        match (caller, callee) {
            (FrameScope::Address(j), Scope::Address) => Some(FrameScope::Address(j)),
            (FrameScope::Address(_), Scope::Engine) => Some(FrameScope::Engine),
            (FrameScope::Engine, Scope::Engine) => Some(FrameScope::Engine),
            _ => None,
        }
    }
}

#[derive(Clone, PartialEq)]
pub(crate) struct GlobalComp {
    st: GlobalState,
}

impl GlobalComp {
    pub(crate) fn new(st: GlobalState) -> Self {
        Self { st }
    }

    pub(crate) fn into_state(self) -> GlobalState {
        self.st
    }
}

impl Component for GlobalComp {
    fn mem(&self) -> &MemStack {
        &self.st.mem
    }

    fn mem_mut(&mut self) -> &mut MemStack {
        &mut self.st.mem
    }

    fn is_global(&self) -> bool {
        true
    }

    fn read_state(&self, _scope: FrameScope, id: &str) -> Result<Value, ExecError> {
        Ok(self.st.g.read(id)?.clone())
    }

    fn write_state(&mut self, _scope: FrameScope, id: &str, v: Value) -> Result<(), ExecError> {
        Ok(self.st.g.write(id, v)?)
    }

    fn callee_frame(&self, caller: FrameScope, callee: Scope) -> Option<FrameScope> {
        match (caller, callee) {
            (FrameScope::Global, Scope::Global) => Some(FrameScope::Global),
            _ => None,
        }
    }
}

/// Whether control continues after a statement or a `return` was executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Flow {
    Normal,
    Returned,
}

pub(crate) struct Interp<'e> {
    env: &'e Env,
    fuel: u64,
}

fn contains_call(e: &Expr) -> bool {
    match e {
        Expr::Call(..) => true,
        Expr::BinOp(_, l, r) => contains_call(l) || contains_call(r),
        _ => false,
    }
}

fn truthy(v: &Value) -> Result<bool, ExecError> {
    match v {
        Value::Int(i) => Ok(*i != BigInt::from(0)),
        Value::Addr(_) => Err(ExecError::Type("condition is an address".into())),
    }
}

fn apply(op: BinOp, l: Value, r: Value) -> Result<Value, ExecError> {
    let flag = |b: bool| Value::int(i32::from(b));
    if op == BinOp::Eq {
        if l.type_tag() != r.type_tag() {
            return Err(ExecError::Type(format!(
                "cannot compare {} with {}",
                l.type_tag(),
                r.type_tag()
            )));
        }
        return Ok(flag(l == r));
    }
    let (Value::Int(a), Value::Int(b)) = (&l, &r) else {
        return Err(ExecError::Type(format!(
            "operator `{}` needs integers",
            op.symbol()
        )));
    };
    Ok(match op {
        BinOp::Add => Value::Int(a + b),
        BinOp::Sub => Value::Int(a - b),
        BinOp::Le => flag(a <= b),
        BinOp::Lt => flag(a < b),
        BinOp::Ge => flag(a >= b),
        BinOp::Gt => flag(a > b),
        BinOp::Eq => unreachable!(),
    })
}

impl<'e> Interp<'e> {
    pub(crate) fn new(env: &'e Env) -> Self {
        Self {
            env,
            fuel: env.fuel,
        }
    }

    fn burn(&mut self) -> Result<(), ExecError> {
        if self.fuel == 0 {
            return Err(ExecError::FuelExhausted);
        }
        self.fuel -= 1;
        Ok(())
    }

    fn empty_label(&self) -> RelayLabel {
        RelayLabel::empty(self.env.n)
    }

    /// Scope of the top frame, checked against the component kind.
    fn top_scope<C: Component>(&self, c: &C) -> Result<FrameScope, ExecError> {
        let scope = c
            .mem()
            .top_scope()
            .ok_or(ExecError::Store(StoreError::EmptyStack))?;
        if scope.is_global() != c.is_global() {
            return Err(ExecError::ScopeViolation(format!(
                "frame scope {scope} does not belong to this component"
            )));
        }
        Ok(scope)
    }

    pub(crate) fn eval<C: Component>(
        &mut self,
        c: &mut C,
        e: &Expr,
    ) -> Result<(Value, RelayLabel), ExecError> {
        let scope = self.top_scope(c)?;
        match e {
            Expr::IntLit(v) => Ok((Value::Int(v.clone()), self.empty_label())),
            Expr::AddrLit(r, j) => Ok((Value::addr(*r, *j), self.empty_label())),
            Expr::Ident(id) => {
                let top = c.mem().top()?;
                let v = match top.store.read(id) {
                    Ok(v) => v.clone(),
                    Err(_) => c.read_state(scope, id)?,
                };
                Ok((v, self.empty_label()))
            }
            Expr::BinOp(op, l, r) => {
                let (lv, mut label) = self.eval(c, l)?;
                let (rv, rlabel) = self.eval(c, r)?;
                label.union_with(&rlabel);
                Ok((apply(*op, lv, rv)?, label))
            }
            Expr::Call(f, args) => {
                let (v, label) = self.call(c, f, args, true)?;
                Ok((v.expect("value-returning call yields a value"), label))
            }
        }
    }

    /// Internal call: pushes a copy of the caller's top frame re-scoped for
    /// the callee, binds parameters left to right, declares the return slot,
    /// runs the body and pops.
    fn call<C: Component>(
        &mut self,
        c: &mut C,
        fname: &str,
        args: &[Expr],
        want_value: bool,
    ) -> Result<(Option<Value>, RelayLabel), ExecError> {
        self.burn()?;
        let env = self.env;
        let f = env.table.lookup(fname)?;
        let caller = self.top_scope(c)?;
        let callee = c.callee_frame(caller, f.scope).ok_or_else(|| {
            ExecError::ScopeViolation(format!(
                "cannot call {} function `{fname}` from a {caller} frame",
                f.scope
            ))
        })?;
        match (want_value, f.ret) {
            (true, None) => {
                return Err(ExecError::NoRule(format!(
                    "`{fname}` returns no value but is used in an expression"
                )))
            }
            (false, Some(_)) => {
                return Err(ExecError::NoRule(format!(
                    "`{fname}` returns a value but is called as a statement"
                )))
            }
            _ => {}
        }
        if f.params.len() != args.len() {
            return Err(ExecError::Arity {
                func: fname.to_string(),
                expected: f.params.len(),
                found: args.len(),
            });
        }
        let depth = c.mem().depth() + 1;
        let rt = f.ret.map(|_| format!("ret${depth}"));
        let copy = c.mem().top()?.store.clone();
        c.mem_mut().addtop(Frame::new(copy, callee, rt.clone()));

        let mut label = self.empty_label();
        for (p, arg) in f.params.iter().zip(args) {
            let (v, l) = self.eval(c, arg)?;
            label.union_with(&l);
            bind(c.mem_mut().top_mut()?, &p.name, p.ty, v)?;
        }
        if let (Some(rt), Some(ty)) = (&rt, f.ret) {
            c.mem_mut().top_mut()?.store.declare(rt, ty)?;
        }
        let (_, body_label) = self.exec(c, &f.body)?;
        label = self.seq_label(label, body_label);
        let value = match &rt {
            Some(rt) => Some(c.mem().top()?.store.read(rt)?.clone()),
            None => None,
        };
        c.mem_mut().removetop()?;
        Ok((value, label))
    }

    /// Runs a whole T-function from an empty stack.
    pub(crate) fn run_transaction<C: Component>(
        &mut self,
        c: &mut C,
        f: &FuncDecl,
        args: &[Value],
        scope: FrameScope,
    ) -> Result<(RelayLabel, Option<Value>), ExecError> {
        if f.params.len() != args.len() {
            return Err(ExecError::Arity {
                func: f.name.clone(),
                expected: f.params.len(),
                found: args.len(),
            });
        }
        let rt = f.ret.map(|_| "ret$1".to_string());
        c.mem_mut()
            .addtop(Frame::new(ByteStore::new(), scope, rt.clone()));
        for (p, v) in f.params.iter().zip(args) {
            bind(c.mem_mut().top_mut()?, &p.name, p.ty, v.clone())?;
        }
        if let (Some(rt), Some(ty)) = (&rt, f.ret) {
            c.mem_mut().top_mut()?.store.declare(rt, ty)?;
        }
        let (_, label) = self.exec(c, &f.body)?;
        let value = match &rt {
            Some(rt) => Some(c.mem().top()?.store.read(rt)?.clone()),
            None => None,
        };
        c.mem_mut().removetop()?;
        Ok((label, value))
    }

    pub(crate) fn exec_stmt<C: Component>(
        &mut self,
        c: &mut C,
        s: &Stmt,
    ) -> Result<RelayLabel, ExecError> {
        self.exec(c, s).map(|(_, label)| label)
    }

    fn seq_label(&self, first: RelayLabel, second: RelayLabel) -> RelayLabel {
        if self.env.has_fault(Fault::SeqWithoutUnion) {
            second
        } else {
            first.union(&second)
        }
    }

    fn exec<C: Component>(&mut self, c: &mut C, s: &Stmt) -> Result<(Flow, RelayLabel), ExecError> {
        self.burn()?;
        let scope = self.top_scope(c)?;
        match s {
            Stmt::Empty | Stmt::Skip => Ok((Flow::Normal, self.empty_label())),
            Stmt::TempVarDecl(t, id) => {
                c.mem_mut().top_mut()?.store.declare(id, *t)?;
                Ok((Flow::Normal, self.empty_label()))
            }
            Stmt::Assign(id, e) => {
                let (v, label) = self.eval(c, e)?;
                let top = c.mem_mut().top_mut()?;
                if top.store.contains(id) {
                    top.store.write(id, v)?;
                } else {
                    c.write_state(scope, id, v)?;
                }
                Ok((Flow::Normal, label))
            }
            Stmt::Call(f, args) => {
                let (_, label) = self.call(c, f, args, false)?;
                Ok((Flow::Normal, label))
            }
            Stmt::Relay { target, func, args } => {
                let label = self.relay(c, target, func, args)?;
                Ok((Flow::Normal, label))
            }
            Stmt::Return(e) => {
                let rt = c.mem().top()?.rt().map(str::to_string);
                let label = match (e, rt) {
                    (None, _) => self.empty_label(),
                    (Some(_), None) => {
                        return Err(ExecError::NoRule(
                            "return with a value in a function without a return type".into(),
                        ))
                    }
                    (Some(e), Some(rt)) => {
                        let (v, label) = self.eval(c, e)?;
                        c.mem_mut().top_mut()?.store.write(&rt, v)?;
                        label
                    }
                };
                Ok((Flow::Returned, label))
            }
            Stmt::Seq(a, b) => {
                let (flow, first) = self.exec(c, a)?;
                if flow == Flow::Returned {
                    return Ok((flow, first));
                }
                let (flow, second) = self.exec(c, b)?;
                Ok((flow, self.seq_label(first, second)))
            }
            Stmt::If(cond, then_b, else_b) => {
                let (v, label) = self.eval(c, cond)?;
                let branch = if truthy(&v)? { then_b } else { else_b };
                let (flow, inner) = self.exec(c, branch)?;
                Ok((flow, self.seq_label(label, inner)))
            }
            Stmt::While(cond, body) => {
                let mut label = self.empty_label();
                loop {
                    self.burn()?;
                    let (v, l) = self.eval(c, cond)?;
                    label = self.seq_label(label, l);
                    if !truthy(&v)? {
                        return Ok((Flow::Normal, label));
                    }
                    let (flow, l) = self.exec(c, body)?;
                    label = self.seq_label(label, l);
                    if flow == Flow::Returned {
                        return Ok((flow, label));
                    }
                }
            }
        }
    }

    /// Evaluates a relay operand; it must emit nothing and leave the
    /// component unchanged.
    fn eval_silent<C: Component>(&mut self, c: &mut C, e: &Expr) -> Result<Value, ExecError> {
        let snapshot = contains_call(e).then(|| c.clone());
        let (v, label) = self.eval(c, e)?;
        if !label.is_tau() || snapshot.is_some_and(|s| s != *c) {
            return Err(ExecError::RelayArgNotSilent);
        }
        Ok(v)
    }

    fn relay<C: Component>(
        &mut self,
        c: &mut C,
        target: &RelayTarget,
        func: &str,
        args: &[Expr],
    ) -> Result<RelayLabel, ExecError> {
        let env = self.env;
        let f = env.table.lookup(func)?;
        let required = match target {
            RelayTarget::At(_) => Scope::Address,
            RelayTarget::Engines => Scope::Engine,
            RelayTarget::Global => {
                if c.is_global() {
                    return Err(ExecError::ScopeViolation(
                        "relay @ global from the global component".into(),
                    ));
                }
                Scope::Global
            }
        };
        if f.scope != required {
            return Err(ExecError::ScopeViolation(format!(
                "relay target `{func}` has scope {}, expected {required}",
                f.scope
            )));
        }
        if f.params.len() != args.len() {
            return Err(ExecError::Arity {
                func: func.to_string(),
                expected: f.params.len(),
                found: args.len(),
            });
        }
        let dest = match target {
            RelayTarget::At(e) => match self.eval_silent(c, e)? {
                Value::Addr(a)
                    if (1..=env.n).contains(&a.engine) && (1..=env.k).contains(&a.slot) =>
                {
                    Some(a)
                }
                other => return Err(ExecError::BadRelayTarget(other)),
            },
            _ => None,
        };
        let mut values = Vec::with_capacity(args.len());
        for a in args {
            values.push(self.eval_silent(c, a)?);
        }
        let mut label = self.empty_label();
        let func = func.to_string();
        match target {
            RelayTarget::At(_) => {
                let a = dest.expect("address target evaluated");
                label.engines[a.engine - 1].insert(RelayTx::Address {
                    slot: a.slot,
                    func,
                    args: values,
                });
            }
            RelayTarget::Engines => {
                for set in &mut label.engines {
                    set.insert(RelayTx::Engine {
                        func: func.clone(),
                        args: values.clone(),
                    });
                }
            }
            RelayTarget::Global => {
                label.global.insert(RelayTx::Global { func, args: values });
            }
        }
        Ok(label)
    }
}

fn bind(
    frame: &mut Frame,
    name: &str,
    ty: crate::syntax::TypeTag,
    v: Value,
) -> Result<(), ExecError> {
    if v.type_tag() != ty {
        return Err(ExecError::Type(format!(
            "parameter `{name}` declared {ty}, got {}",
            v.type_tag()
        )));
    }
    frame.store.declare(name, ty)?;
    frame.store.write(name, v)?;
    Ok(())
}
