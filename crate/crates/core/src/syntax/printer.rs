//! Canonical source rendering. Output reparses to a structurally equal AST.

use std::fmt::Write;

use super::ast::*;

pub fn pretty_print(c: &Contract) -> String {
    let mut out = String::new();
    if c.state_vars.is_empty() && c.funcs.is_empty() {
        let _ = writeln!(out, "contract {} {{ }}", c.name);
        return out;
    }
    let _ = writeln!(out, "contract {} {{", c.name);
    for v in &c.state_vars {
        let _ = writeln!(out, "  {} {} {};", v.ty, v.scope, v.name);
    }
    for f in &c.funcs {
        let params: Vec<String> = f
            .params
            .iter()
            .map(|p| format!("{} {}", p.ty, p.name))
            .collect();
        let ret = f.ret.map(|t| format!(" returns {t}")).unwrap_or_default();
        let _ = write!(
            out,
            "  function {}({}) {}{} ",
            f.name,
            params.join(", "),
            f.scope,
            ret
        );
        write_block(&mut out, &f.body, 1);
        out.push('\n');
    }
    out.push_str("}\n");
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_block(out: &mut String, body: &Stmt, depth: usize) {
    let stmts = body.to_list();
    if stmts.is_empty() {
        out.push_str("{ }");
        return;
    }
    out.push_str("{\n");
    for s in stmts {
        indent(out, depth + 1);
        write_stmt(out, s, depth + 1);
        out.push('\n');
    }
    indent(out, depth);
    out.push('}');
}

fn write_stmt(out: &mut String, s: &Stmt, depth: usize) {
    match s {
        Stmt::Empty => {}
        Stmt::TempVarDecl(t, id) => {
            let _ = write!(out, "{t} {id};");
        }
        Stmt::Skip => out.push_str("skip"),
        Stmt::Assign(id, e) => {
            let _ = write!(out, "{id} := {};", expr_to_string(e));
        }
        Stmt::Relay { target, func, args } => {
            let target = match target {
                RelayTarget::At(e) => expr_to_string(e),
                RelayTarget::Engines => "engines".to_string(),
                RelayTarget::Global => "global".to_string(),
            };
            let _ = write!(out, "relay @ {target} {func}({});", args_to_string(args));
        }
        Stmt::Return(None) => out.push_str("return;"),
        Stmt::Return(Some(e)) => {
            let _ = write!(out, "return {};", expr_to_string(e));
        }
        Stmt::Call(f, args) => {
            let _ = write!(out, "{f}({});", args_to_string(args));
        }
        Stmt::Seq(..) => {
            // A nested sequence only appears when built by hand; print its parts inline.
            let parts = s.to_list();
            for (idx, part) in parts.iter().enumerate() {
                if idx > 0 {
                    out.push('\n');
                    indent(out, depth);
                }
                write_stmt(out, part, depth);
            }
        }
        Stmt::If(c, t, e) => {
            let _ = write!(out, "if ({}) then ", expr_to_string(c));
            write_block(out, t, depth);
            out.push_str(" else ");
            write_block(out, e, depth);
        }
        Stmt::While(c, body) => {
            let _ = write!(out, "while ({}) ", expr_to_string(c));
            write_block(out, body, depth);
        }
    }
}

fn args_to_string(args: &[Expr]) -> String {
    args.iter()
        .map(expr_to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

// 0 = comparison, 1 = additive, 2 = atom
fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::BinOp(op, ..) if op.is_comparison() => 0,
        Expr::BinOp(..) => 1,
        _ => 2,
    }
}

fn wrap(e: &Expr, min: u8) -> String {
    let s = expr_to_string(e);
    if precedence(e) < min {
        format!("({s})")
    } else {
        s
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    match e {
        Expr::Ident(id) => id.clone(),
        Expr::Call(f, args) => format!("{f}({})", args_to_string(args)),
        Expr::IntLit(v) => v.to_string(),
        Expr::AddrLit(r, j) => format!("addr({r}, {j})"),
        Expr::BinOp(op, l, r) => {
            let (lmin, rmin) = if op.is_comparison() { (1, 1) } else { (1, 2) };
            format!("{} {} {}", wrap(l, lmin), op.symbol(), wrap(r, rmin))
        }
    }
}
