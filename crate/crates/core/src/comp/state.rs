use crate::store::{ByteStore, MemStack};

/// State of one engine: per-slot address stores, the engine store, the
/// memory stack and the engine's view of global storage.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EngineState {
    pub slots: Vec<ByteStore>,
    pub engine: ByteStore,
    pub mem: MemStack,
    pub gview: ByteStore,
}

impl EngineState {
    pub fn new(k: usize) -> Self {
        Self {
            slots: vec![ByteStore::new(); k],
            engine: ByteStore::new(),
            mem: MemStack::new(),
            gview: ByteStore::new(),
        }
    }

    /// Address store for slot `j` (1-based).
    pub fn slot(&self, j: usize) -> &ByteStore {
        &self.slots[j - 1]
    }

    pub fn slot_mut(&mut self, j: usize) -> &mut ByteStore {
        &mut self.slots[j - 1]
    }

    pub fn k(&self) -> usize {
        self.slots.len()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct GlobalState {
    pub g: ByteStore,
    pub mem: MemStack,
}

impl GlobalState {
    pub fn new() -> Self {
        Self::default()
    }
}
