//! Word-cell stores with name/type spaces, call frames and memory stacks.
//!
//! Every store is a bump-allocated array of cells. An identifier is bound to
//! the cell address handed out when it was declared, together with its type.
//! Cells are never reclaimed, so two stores built by the same sequence of
//! declarations and writes compare equal.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use thiserror::Error;

use crate::syntax::TypeTag;

/// Address of a user slot: the `slot`-th address managed by engine `engine`.
/// Both indices are 1-based; `(0, 0)` is the uninitialized sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AddrVal {
    pub engine: usize,
    pub slot: usize,
}

impl AddrVal {
    pub const NULL: AddrVal = AddrVal { engine: 0, slot: 0 };

    pub fn new(engine: usize, slot: usize) -> Self {
        Self { engine, slot }
    }
}

impl fmt::Display for AddrVal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.engine, self.slot)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(BigInt),
    Addr(AddrVal),
}

impl Value {
    pub fn int(v: impl Into<BigInt>) -> Self {
        Value::Int(v.into())
    }

    pub fn addr(engine: usize, slot: usize) -> Self {
        Value::Addr(AddrVal::new(engine, slot))
    }

    pub fn type_tag(&self) -> TypeTag {
        match self {
            Value::Int(_) => TypeTag::Int,
            Value::Addr(_) => TypeTag::Address,
        }
    }

    pub fn as_int(&self) -> Option<&BigInt> {
        match self {
            Value::Int(v) => Some(v),
            Value::Addr(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Addr(a) => write!(f, "{a}"),
        }
    }
}

pub fn size_of(t: TypeTag) -> usize {
    match t {
        TypeTag::Int | TypeTag::Address => 1,
    }
}

pub fn init_value(t: TypeTag) -> Value {
    match t {
        TypeTag::Int => Value::int(0),
        TypeTag::Address => Value::Addr(AddrVal::NULL),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("identifier `{0}` is already declared")]
    AlreadyDeclared(String),
    #[error("identifier `{0}` is undefined")]
    Undefined(String),
    #[error("type mismatch on `{id}`: declared {declared}, got {found}")]
    TypeMismatch {
        id: String,
        declared: TypeTag,
        found: TypeTag,
    },
    #[error("memory stack is empty")]
    EmptyStack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Binding {
    pub addr: usize,
    pub ty: TypeTag,
}

/// A storage mapping together with its name space and type space.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ByteStore {
    cells: Vec<Value>,
    names: BTreeMap<String, Binding>,
}

impl ByteStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next_free(&self) -> usize {
        self.cells.len()
    }

    /// Reserves a fresh region for a value of type `t` and returns its start.
    pub fn allocate_new(&mut self, t: TypeTag) -> usize {
        let addr = self.cells.len();
        for _ in 0..size_of(t) {
            self.cells.push(init_value(t));
        }
        addr
    }

    pub fn name_of(&self, id: &str) -> Option<usize> {
        self.names.get(id).map(|b| b.addr)
    }

    pub fn type_of(&self, id: &str) -> Option<TypeTag> {
        self.names.get(id).map(|b| b.ty)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.names.contains_key(id)
    }

    pub fn declare(&mut self, id: &str, t: TypeTag) -> Result<(), StoreError> {
        if self.names.contains_key(id) {
            return Err(StoreError::AlreadyDeclared(id.to_string()));
        }
        let addr = self.allocate_new(t);
        self.cells[addr] = init_value(t);
        self.names.insert(id.to_string(), Binding { addr, ty: t });
        Ok(())
    }

    pub fn read(&self, id: &str) -> Result<&Value, StoreError> {
        let b = self
            .names
            .get(id)
            .ok_or_else(|| StoreError::Undefined(id.to_string()))?;
        Ok(&self.cells[b.addr])
    }

    pub fn write(&mut self, id: &str, v: Value) -> Result<(), StoreError> {
        let b = *self
            .names
            .get(id)
            .ok_or_else(|| StoreError::Undefined(id.to_string()))?;
        if v.type_tag() != b.ty {
            return Err(StoreError::TypeMismatch {
                id: id.to_string(),
                declared: b.ty,
                found: v.type_tag(),
            });
        }
        self.cells[b.addr] = v;
        Ok(())
    }

    /// Declared identifiers with their current values, in name order.
    pub fn bindings(&self) -> impl Iterator<Item = (&str, TypeTag, &Value)> {
        self.names
            .iter()
            .map(|(k, b)| (k.as_str(), b.ty, &self.cells[b.addr]))
    }

    /// Allocated `[start, end)` intervals, one per declared identifier.
    pub fn regions(&self) -> Vec<(usize, usize)> {
        self.names
            .values()
            .map(|b| (b.addr, b.addr + size_of(b.ty)))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Scope attribute of a stack frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FrameScope {
    /// Executing on behalf of address slot `j` of the engine.
    Address(usize),
    Engine,
    Global,
}

impl FrameScope {
    pub fn is_global(self) -> bool {
        self == FrameScope::Global
    }
}

impl fmt::Display for FrameScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameScope::Address(j) => write!(f, "address({j})"),
            FrameScope::Engine => f.write_str("engine"),
            FrameScope::Global => f.write_str("global"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    pub store: ByteStore,
    scope: FrameScope,
    rt: Option<String>,
}

impl Frame {
    pub fn new(store: ByteStore, scope: FrameScope, rt: Option<String>) -> Self {
        Self { store, scope, rt }
    }

    pub fn scope(&self) -> FrameScope {
        self.scope
    }

    pub fn rt(&self) -> Option<&str> {
        self.rt.as_deref()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct MemStack {
    frames: Vec<Frame>,
}

impl MemStack {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn addtop(&mut self, f: Frame) {
        self.frames.push(f);
    }

    pub fn removetop(&mut self) -> Result<Frame, StoreError> {
        self.frames.pop().ok_or(StoreError::EmptyStack)
    }

    pub fn top(&self) -> Result<&Frame, StoreError> {
        self.frames.last().ok_or(StoreError::EmptyStack)
    }

    pub fn top_mut(&mut self) -> Result<&mut Frame, StoreError> {
        self.frames.last_mut().ok_or(StoreError::EmptyStack)
    }

    /// Scope of the top frame, `None` when the stack is empty.
    pub fn top_scope(&self) -> Option<FrameScope> {
        self.frames.last().map(Frame::scope)
    }

    pub fn depth(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disjoint(regions: &[(usize, usize)]) -> bool {
        for (a, x) in regions.iter().enumerate() {
            for y in &regions[a + 1..] {
                if x.0 < y.1 && y.0 < x.1 {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn sizes_are_one_cell() {
        assert_eq!(size_of(TypeTag::Int), 1);
        assert_eq!(size_of(TypeTag::Address), 1);
        assert_eq!(size_of(TypeTag::Int), size_of(TypeTag::Int));
    }

    #[test]
    fn bump_allocation() {
        let mut s = ByteStore::new();
        assert_eq!(s.allocate_new(TypeTag::Int), 0);
        assert_eq!(s.allocate_new(TypeTag::Address), 1);

        let mut s = ByteStore::new();
        let addrs: Vec<usize> = (0..10).map(|_| s.allocate_new(TypeTag::Int)).collect();
        assert_eq!(addrs, (0..10).collect::<Vec<_>>());
        let regions: Vec<_> = addrs.iter().map(|a| (*a, a + 1)).collect();
        assert!(disjoint(&regions));
        assert!(s.next_free() >= 10);
    }

    #[test]
    fn init_values() {
        assert_eq!(init_value(TypeTag::Int), Value::int(0));
        assert_eq!(init_value(TypeTag::Address), Value::addr(0, 0));
        for t in [TypeTag::Int, TypeTag::Address] {
            let mut s = ByteStore::new();
            s.declare("x", t).unwrap();
            assert_eq!(s.read("x").unwrap(), &init_value(t));
        }
    }

    #[test]
    fn declare_read_write() {
        let mut s = ByteStore::new();
        s.declare("balance", TypeTag::Int).unwrap();
        assert_eq!(s.read("balance").unwrap(), &Value::int(0));
        assert_eq!(
            s.declare("balance", TypeTag::Int),
            Err(StoreError::AlreadyDeclared("balance".into()))
        );
        s.write("balance", Value::int(7)).unwrap();
        let snapshot = s.clone();
        assert_eq!(s.read("balance").unwrap(), &Value::int(7));
        assert_eq!(s, snapshot, "read is side-effect free");
        assert_eq!(s.read("nope"), Err(StoreError::Undefined("nope".into())));
        assert_eq!(
            s.write("nope", Value::int(1)),
            Err(StoreError::Undefined("nope".into()))
        );
        assert!(matches!(
            s.write("balance", Value::addr(1, 1)),
            Err(StoreError::TypeMismatch { .. })
        ));
    }

    #[test]
    fn many_declarations_get_distinct_addresses() {
        let mut s = ByteStore::new();
        let ids: Vec<String> = (0..12).map(|i| format!("v{i}")).collect();
        for (i, id) in ids.iter().enumerate() {
            let t = if i % 3 == 0 {
                TypeTag::Address
            } else {
                TypeTag::Int
            };
            s.declare(id, t).unwrap();
        }
        for a in 0..ids.len() {
            for b in a + 1..ids.len() {
                assert_ne!(s.name_of(&ids[a]), s.name_of(&ids[b]));
            }
        }
        assert!(disjoint(&s.regions()));
        for id in &ids {
            assert!(s.read(id).is_ok());
        }
    }

    #[test]
    fn stack_laws() {
        let mut m = MemStack::new();
        assert_eq!(m.top(), Err(StoreError::EmptyStack));
        assert_eq!(m.clone().removetop(), Err(StoreError::EmptyStack));
        let before = m.clone();
        let f = Frame::new(
            ByteStore::new(),
            FrameScope::Address(2),
            Some("ret$1".into()),
        );
        m.addtop(f.clone());
        assert_eq!(m.top().unwrap(), &f);
        assert_eq!(m.top().unwrap().scope(), FrameScope::Address(2));
        assert_eq!(m.top().unwrap().rt(), Some("ret$1"));
        assert_eq!(m.removetop().unwrap(), f);
        assert_eq!(m, before);
    }

    #[test]
    fn top_frame_writes_do_not_reach_lower_frames() {
        let mut m = MemStack::new();
        let mut lower = ByteStore::new();
        lower.declare("x", TypeTag::Int).unwrap();
        lower.write("x", Value::int(4)).unwrap();
        m.addtop(Frame::new(lower.clone(), FrameScope::Engine, None));
        m.addtop(Frame::new(lower, FrameScope::Engine, None));
        m.top_mut()
            .unwrap()
            .store
            .write("x", Value::int(99))
            .unwrap();
        assert_eq!(m.frames()[0].store.read("x").unwrap(), &Value::int(4));
    }

    proptest::proptest! {
        #[test]
        fn writes_leave_other_variables_alone(count in 2usize..10, a in 0usize..10, b in 0usize..10, v in -50i64..50) {
            let (a, b) = (a % count, b % count);
            proptest::prop_assume!(a != b);
            let mut s = ByteStore::new();
            for i in 0..count {
                s.declare(&format!("v{i}"), TypeTag::Int).unwrap();
                s.write(&format!("v{i}"), Value::int(i as i64)).unwrap();
            }
            s.write(&format!("v{a}"), Value::int(v)).unwrap();
            proptest::prop_assert_eq!(s.read(&format!("v{b}")).unwrap(), &Value::int(b as i64));
        }
    }
}
