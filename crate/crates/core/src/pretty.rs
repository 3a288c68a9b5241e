//! Single-line pretty printer. `parse_expr(pretty(e))` is structurally `e`;
//! parentheses are emitted only where the grammar demands them (application
//! operands).

use std::fmt::{self, Write};

use crate::syntax::{privset_to_string, Expr, ExprKind};

#[derive(Clone, Copy, PartialEq)]
enum Pos {
    /// Rightmost-extending position: if branches, binder bodies, braced
    /// bodies, top level. Keywords delimit, so no parentheses are needed.
    Open,
    /// Function position of an application.
    AppFun,
    /// Argument position of an application.
    AppArg,
}

fn needs_parens(e: &Expr, pos: Pos) -> bool {
    match pos {
        Pos::Open => false,
        Pos::AppFun => matches!(
            e.kind,
            ExprKind::If(..) | ExprKind::Lam { .. } | ExprKind::LetRec { .. }
        ),
        Pos::AppArg => matches!(
            e.kind,
            ExprKind::If(..) | ExprKind::Lam { .. } | ExprKind::LetRec { .. } | ExprKind::App(..)
        ),
    }
}

fn write_expr(out: &mut String, e: &Expr, pos: Pos) {
    if needs_parens(e, pos) {
        out.push('(');
        write_expr(out, e, Pos::Open);
        out.push(')');
        return;
    }
    match &e.kind {
        ExprKind::True => out.push_str("true"),
        ExprKind::False => out.push_str("false"),
        ExprKind::Const(name) | ExprKind::Var(name) => out.push_str(name),
        ExprKind::If(c, t, f) => {
            out.push_str("if ");
            write_expr(out, c, Pos::Open);
            out.push_str(" then ");
            write_expr(out, t, Pos::Open);
            out.push_str(" else ");
            write_expr(out, f, Pos::Open);
        }
        ExprKind::Lam {
            param,
            param_ann,
            body,
        } => {
            let _ = write!(out, "fn {param}: {param_ann} => ");
            write_expr(out, body, Pos::Open);
        }
        ExprKind::App(f, a) => {
            write_expr(out, f, Pos::AppFun);
            out.push(' ');
            write_expr(out, a, Pos::AppArg);
        }
        ExprKind::LetRec {
            name,
            param,
            param_ann,
            ret_ann,
            latent,
            body,
            rest,
        } => {
            let _ = write!(
                out,
                "letrec {name} ({param}: {param_ann}) : {ret_ann} ! {} = ",
                privset_to_string(latent)
            );
            write_expr(out, body, Pos::Open);
            out.push_str(" in ");
            write_expr(out, rest, Pos::Open);
        }
        ExprKind::Signs(n, body) => {
            let _ = write!(out, "sign {n} {{ ");
            write_expr(out, body, Pos::Open);
            out.push_str(" }");
        }
        ExprKind::DoPriv(p, body) => {
            let _ = write!(out, "dopriv {p} {{ ");
            write_expr(out, body, Pos::Open);
            out.push_str(" }");
        }
        ExprKind::Check(p, body) => {
            let _ = write!(out, "check {p} {{ ");
            write_expr(out, body, Pos::Open);
            out.push_str(" }");
        }
        ExprKind::Test(p, t, f) => {
            let _ = write!(out, "test {p} {{ ");
            write_expr(out, t, Pos::Open);
            out.push_str(" } else { ");
            write_expr(out, f, Pos::Open);
            out.push_str(" }");
        }
    }
}

pub fn pretty(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, Pos::Open);
    out
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty(self))
    }
}
