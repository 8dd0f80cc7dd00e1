//! Crystality under two semantics.
//!
//! The compositional semantics runs each engine and the global component as
//! separate transition systems joined by mempools. The monolithic semantics
//! keeps one configuration with a shared global store and replicated global
//! execution. [`bridge`] translates between the two and [`bisim`] runs them
//! side by side, checking that every transaction boundary stays related.

pub mod bisim;
pub mod bridge;
pub mod comp;
pub mod dump;
pub mod faults;
pub mod harness;
pub mod mono;
pub mod store;
pub mod syntax;
pub mod system;

pub use faults::Fault;
