//! Block schedule files.
//!
//! ```text
//! // comments run to end of line
//! binding:
//!   a = (1, 1)
//!   b = (2, 1)
//! init:
//!   a.balance = 10
//!   engine[2].counter = 4
//!   global.total = 0
//! block: a.transfer(b, 3); b.deposit(1)
//! block:
//! ```
//!
//! Sections may repeat. A block collects every `;`-separated call up to the
//! next header, so calls may span several lines.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use thiserror::Error;

use super::{Contract, Scope};
use crate::comp::Transaction;
use crate::store::{AddrVal, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: unknown function `{func}`")]
    UnknownFunction { line: usize, func: String },
    #[error("line {line}: sender `{name}` is not bound")]
    UnboundSender { line: usize, name: String },
    #[error("line {line}: `{func}` is a global function and cannot be sent by a user")]
    GlobalUserTx { line: usize, func: String },
}

/// Where an initial value is written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitTarget {
    Address(AddrVal),
    Engine(usize),
    Global,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateInit {
    pub target: InitTarget,
    pub var: String,
    pub value: Value,
}

/// Named addresses, initial state and the ordered user blocks.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BlockSchedule {
    pub bindings: BTreeMap<String, AddrVal>,
    pub inits: Vec<StateInit>,
    pub blocks: Vec<Vec<Transaction>>,
}

impl BlockSchedule {
    /// Name bound to `a`, if any.
    pub fn name_of(&self, a: AddrVal) -> Option<&str> {
        self.bindings
            .iter()
            .find(|(_, v)| **v == a)
            .map(|(k, _)| k.as_str())
    }

    pub fn tx_count(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }
}

fn render_value(v: &Value, sched: &BlockSchedule) -> String {
    match v {
        Value::Addr(a) => sched
            .name_of(*a)
            .map_or_else(|| format!("({}, {})", a.engine, a.slot), str::to_string),
        Value::Int(i) => i.to_string(),
    }
}

/// Schedule file text that parses back to `sched`. Every sender must be
/// bound.
pub fn render_schedule(sched: &BlockSchedule) -> String {
    let mut out = String::new();
    if !sched.bindings.is_empty() {
        out.push_str("binding:\n");
        for (name, a) in &sched.bindings {
            out.push_str(&format!("  {name} = ({}, {})\n", a.engine, a.slot));
        }
    }
    if !sched.inits.is_empty() {
        out.push_str("init:\n");
        for init in &sched.inits {
            let owner = match init.target {
                InitTarget::Global => "global".to_string(),
                InitTarget::Engine(i) => format!("engine[{i}]"),
                InitTarget::Address(a) => sched
                    .name_of(a)
                    .map_or_else(|| format!("({}, {})", a.engine, a.slot), str::to_string),
            };
            out.push_str(&format!(
                "  {owner}.{} = {}\n",
                init.var,
                render_value(&init.value, sched)
            ));
        }
    }
    for block in &sched.blocks {
        let calls: Vec<String> = block
            .iter()
            .map(|tx| {
                let sender = tx
                    .sender
                    .and_then(|a| sched.name_of(a))
                    .unwrap_or("?")
                    .to_string();
                let args: Vec<String> = tx.args.iter().map(|v| render_value(v, sched)).collect();
                format!("{sender}.{}({})", tx.func, args.join(", "))
            })
            .collect();
        out.push_str(&format!("block: {}\n", calls.join("; ")));
    }
    out
}

#[derive(PartialEq)]
enum Section {
    None,
    Binding,
    Init,
    Block,
}

pub fn parse_schedule(src: &str, contract: &Contract) -> Result<BlockSchedule, ScheduleError> {
    let mut sched = BlockSchedule::default();
    let mut section = Section::None;
    // pending call text of the current block, with the line each piece began on
    let mut pending: Vec<(usize, String)> = Vec::new();

    let flush = |pending: &mut Vec<(usize, String)>,
                 sched: &mut BlockSchedule|
     -> Result<(), ScheduleError> {
        let mut txs = Vec::new();
        for (line, text) in pending.drain(..) {
            for call in text.split(';') {
                let call = call.trim();
                if !call.is_empty() {
                    txs.push(parse_call(call, line, sched, contract)?);
                }
            }
        }
        sched.blocks.push(txs);
        Ok(())
    };

    for (idx, raw) in src.lines().enumerate() {
        let line = idx + 1;
        let text = raw.split("//").next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let header = [
            ("binding:", Section::Binding),
            ("init:", Section::Init),
            ("block:", Section::Block),
        ]
        .into_iter()
        .find(|(h, _)| text.starts_with(h));
        let body = if let Some((h, next)) = header {
            if section == Section::Block {
                flush(&mut pending, &mut sched)?;
            }
            section = next;
            text[h.len()..].trim()
        } else {
            text
        };
        if body.is_empty() {
            continue;
        }
        match section {
            Section::None => {
                return Err(ScheduleError::Malformed {
                    line,
                    msg: format!("`{body}` appears before any section header"),
                })
            }
            Section::Binding => {
                let (name, addr) = split_eq(body, line)?;
                if !is_name(name) {
                    return Err(malformed(line, format!("bad binding name `{name}`")));
                }
                let addr = parse_pair(addr)
                    .ok_or_else(|| malformed(line, format!("bad address `{addr}`")))?;
                sched.bindings.insert(name.to_string(), addr);
            }
            Section::Init => sched.inits.push(parse_init(body, line, &sched)?),
            Section::Block => pending.push((line, body.to_string())),
        }
    }
    if section == Section::Block {
        flush(&mut pending, &mut sched)?;
    }
    Ok(sched)
}

fn malformed(line: usize, msg: String) -> ScheduleError {
    ScheduleError::Malformed { line, msg }
}

fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn split_eq(s: &str, line: usize) -> Result<(&str, &str), ScheduleError> {
    s.split_once('=')
        .map(|(a, b)| (a.trim(), b.trim()))
        .ok_or_else(|| malformed(line, format!("expected `=` in `{s}`")))
}

fn parse_pair(s: &str) -> Option<AddrVal> {
    let inner = s.trim().strip_prefix('(')?.strip_suffix(')')?;
    let (r, j) = inner.split_once(',')?;
    Some(AddrVal::new(r.trim().parse().ok()?, j.trim().parse().ok()?))
}

fn parse_value(s: &str, line: usize, sched: &BlockSchedule) -> Result<Value, ScheduleError> {
    let s = s.trim();
    if let Ok(v) = s.parse::<BigInt>() {
        return Ok(Value::Int(v));
    }
    if let Some(a) = parse_pair(s) {
        return Ok(Value::Addr(a));
    }
    if let Some(a) = sched.bindings.get(s) {
        return Ok(Value::Addr(*a));
    }
    Err(malformed(line, format!("bad value `{s}`")))
}

fn parse_init(body: &str, line: usize, sched: &BlockSchedule) -> Result<StateInit, ScheduleError> {
    let (lhs, rhs) = split_eq(body, line)?;
    let (owner, var) = lhs
        .rsplit_once('.')
        .ok_or_else(|| malformed(line, format!("expected `owner.var` in `{lhs}`")))?;
    let owner = owner.trim();
    let target = if owner == "global" {
        InitTarget::Global
    } else if let Some(i) = owner
        .strip_prefix("engine[")
        .and_then(|rest| rest.strip_suffix(']'))
    {
        InitTarget::Engine(
            i.trim()
                .parse()
                .map_err(|_| malformed(line, format!("bad engine index `{i}`")))?,
        )
    } else {
        let a = sched
            .bindings
            .get(owner)
            .copied()
            .or_else(|| parse_pair(owner))
            .ok_or_else(|| ScheduleError::UnboundSender {
                line,
                name: owner.to_string(),
            })?;
        InitTarget::Address(a)
    };
    Ok(StateInit {
        target,
        var: var.trim().to_string(),
        value: parse_value(rhs, line, sched)?,
    })
}

/// Splits `a, (1, 2), -3` at top-level commas.
fn split_args(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

fn parse_call(
    call: &str,
    line: usize,
    sched: &BlockSchedule,
    contract: &Contract,
) -> Result<Transaction, ScheduleError> {
    let bad = || malformed(line, format!("expected `sender.func(args)`, got `{call}`"));
    let (sender, rest) = call.split_once('.').ok_or_else(bad)?;
    let sender = sender.trim();
    let open = rest.find('(').ok_or_else(bad)?;
    let func = rest[..open].trim();
    let args = rest[open + 1..]
        .trim_end()
        .strip_suffix(')')
        .ok_or_else(bad)?;
    if !is_name(sender) || !is_name(func) {
        return Err(bad());
    }
    let decl = contract
        .func(func)
        .ok_or_else(|| ScheduleError::UnknownFunction {
            line,
            func: func.to_string(),
        })?;
    if decl.scope == Scope::Global {
        return Err(ScheduleError::GlobalUserTx {
            line,
            func: func.to_string(),
        });
    }
    let addr = *sched
        .bindings
        .get(sender)
        .ok_or_else(|| ScheduleError::UnboundSender {
            line,
            name: sender.to_string(),
        })?;
    let values = if args.trim().is_empty() {
        Vec::new()
    } else {
        split_args(args)
            .into_iter()
            .map(|a| parse_value(a, line, sched))
            .collect::<Result<_, _>>()?
    };
    Ok(Transaction::local(func, values, addr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_contract;

    const BANK: &str = "contract Bank {
        int @address balance;
        int @global total;
        function transfer(address to, int amount) @address {
            if (amount <= balance) then {
                balance := balance - amount;
                relay @ to deposit(amount);
                relay @ global updateTotal(amount);
            } else { skip }
        }
        function deposit(int amount) @address { balance := balance + amount; }
        function updateTotal(int amount) @global { total := total + amount; }
    }";

    fn bank() -> Contract {
        parse_contract(BANK).unwrap()
    }

    #[test]
    fn running_example_block() {
        let src = "binding:\n a = (1,1)\n d = (1,2)\n b = (2,1)\n c = (2,2)\n\
                   block: a.transfer(b,3); c.transfer(d,2)\n";
        let s = parse_schedule(src, &bank()).unwrap();
        assert_eq!(s.blocks.len(), 1);
        let txs = &s.blocks[0];
        assert_eq!(txs.len(), 2);
        assert_eq!(txs[0].sender, Some(AddrVal::new(1, 1)));
        assert_eq!(txs[0].args, vec![Value::addr(2, 1), Value::int(3)]);
        assert_eq!(txs[1].sender, Some(AddrVal::new(2, 2)));
        assert_eq!(txs[1].func, "transfer");
    }

    #[test]
    fn empty_file_has_no_blocks() {
        assert_eq!(parse_schedule("", &bank()).unwrap().blocks.len(), 0);
        assert_eq!(
            parse_schedule("// nothing\n", &bank()).unwrap(),
            BlockSchedule::default()
        );
    }

    #[test]
    fn unknown_function() {
        let src = "binding:\n a = (1,1)\n b = (2,1)\nblock: a.transferr(b,3)";
        assert!(matches!(
            parse_schedule(src, &bank()),
            Err(ScheduleError::UnknownFunction { line: 4, .. })
        ));
    }

    #[test]
    fn sender_errors() {
        assert!(matches!(
            parse_schedule("block: z.deposit(1)", &bank()),
            Err(ScheduleError::UnboundSender { .. })
        ));
        assert!(matches!(
            parse_schedule("binding:\n a = (1,1)\nblock: a deposit(1)", &bank()),
            Err(ScheduleError::Malformed { .. })
        ));
        assert!(matches!(
            parse_schedule("binding:\n a = (1,1)\nblock: a.updateTotal(1)", &bank()),
            Err(ScheduleError::GlobalUserTx { .. })
        ));
    }

    #[test]
    fn inits_and_multiline_blocks() {
        let src =
            "binding:\n a = (1,1)\ninit:\n a.balance = 10\n engine[2].x = -4\n global.total = 0\n\
                   block:\n a.deposit(1);\n a.deposit(2)\nblock:\n";
        let s = parse_schedule(src, &bank()).unwrap();
        assert_eq!(s.inits.len(), 3);
        assert_eq!(s.inits[1].target, InitTarget::Engine(2));
        assert_eq!(s.inits[1].value, Value::int(-4));
        assert_eq!(s.blocks.len(), 2);
        assert_eq!(s.blocks[0].len(), 2);
        assert!(s.blocks[1].is_empty());
    }

    #[test]
    fn render_round_trip() {
        let src = "binding:\n a = (1,1)\n b = (2,1)\ninit:\n a.balance = 10\n global.total = 0\n\
                   block: a.transfer(b, 3); b.transfer((1, 1), -2)\nblock:\n";
        let s = parse_schedule(src, &bank()).unwrap();
        assert_eq!(parse_schedule(&render_schedule(&s), &bank()).unwrap(), s);
    }

    #[test]
    fn arity_is_not_checked_here() {
        let src = "binding:\n a = (1,1)\nblock: a.deposit(1, 2, (3, 4))";
        let s = parse_schedule(src, &bank()).unwrap();
        assert_eq!(s.blocks[0][0].args.len(), 3);
    }
}
