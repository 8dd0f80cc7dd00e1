//! Deliberate semantic bugs used to check that the property suites and the
//! correspondence checker actually detect violations.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fault {
    /// `step_g` leaves the engines' views of global storage stale.
    SkipMuSync,
    /// The monolithic semantics delivers a relayed global transaction to the
    /// relaying engine's mempool only, instead of broadcasting it.
    SkipGlobalBroadcast,
    /// Sequential composition keeps only the label of its second part.
    SeqWithoutUnion,
    /// Mempool reception replaces each non-empty component instead of
    /// taking the union.
    ReceiveOverwrites,
    /// `step_l` writes the updated engine state into the next engine's slot.
    MisroutedWriteback,
}

impl Fault {
    pub const ALL: [Fault; 5] = [
        Fault::SkipMuSync,
        Fault::SkipGlobalBroadcast,
        Fault::SeqWithoutUnion,
        Fault::ReceiveOverwrites,
        Fault::MisroutedWriteback,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Fault::SkipMuSync => "skip-mu-sync",
            Fault::SkipGlobalBroadcast => "skip-global-broadcast",
            Fault::SeqWithoutUnion => "seq-without-union",
            Fault::ReceiveOverwrites => "receive-overwrites",
            Fault::MisroutedWriteback => "misrouted-writeback",
        }
    }
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Fault::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown fault `{s}`"))
    }
}
