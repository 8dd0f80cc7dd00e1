//! Tree-structured text rendering of configurations and the stable hash used
//! in traces.
//!
//! Each line is `key: value` or `key:` followed by deeper-indented children.
//! Store contents render as `name:type=value` pairs in name order, sets in
//! their canonical order, programs as `;`-separated transactions.

use std::fmt::Write;

use sha2::{Digest, Sha256};

use crate::comp::{Transaction, TxSet};
use crate::store::{ByteStore, MemStack};

pub fn store(s: &ByteStore) -> String {
    if s.is_empty() {
        return "{}".into();
    }
    let parts: Vec<String> = s
        .bindings()
        .map(|(name, ty, v)| format!("{name}:{ty}={v}"))
        .collect();
    format!("{{{}}}", parts.join(", "))
}

pub fn txset(s: &TxSet) -> String {
    let parts: Vec<String> = s.iter().map(ToString::to_string).collect();
    format!("{{{}}}", parts.join(", "))
}

pub fn program(p: &[Transaction]) -> String {
    if p.is_empty() {
        return "·".into();
    }
    p.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Appends a stack as `key:` followed by one line per frame, bottom first.
pub fn stack(out: &mut String, indent: usize, key: &str, m: &MemStack) {
    let pad = " ".repeat(indent);
    if m.is_empty() {
        let _ = writeln!(out, "{pad}{key}: []");
        return;
    }
    let _ = writeln!(out, "{pad}{key}:");
    for (d, f) in m.frames().iter().enumerate() {
        let _ = writeln!(
            out,
            "{pad}  [{}] scope={} rt={} {}",
            d + 1,
            f.scope(),
            f.rt().unwrap_or("-"),
            store(&f.store)
        );
    }
}

/// First 16 hex digits of the SHA-256 of `text`.
pub fn hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(&digest[..8])
}
