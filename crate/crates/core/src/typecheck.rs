//! The base type system. Security constructs are transparent: `sign`,
//! `dopriv` and `check` preserve the type of their body, and `test` requires
//! both branches to agree.

use thiserror::Error;

use crate::builtins;
use crate::syntax::{Expr, ExprKind, Span, Type, TypeCtx};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TypeError {
    #[error("{span}: type mismatch: expected {expected}, found {found}")]
    Mismatch {
        span: Span,
        expected: Type,
        found: Type,
    },
    #[error("{span}: unbound variable `{name}`")]
    Unbound { span: Span, name: String },
    #[error("{span}: guard must be bool, found {found}")]
    NonBoolGuard { span: Span, found: Type },
    #[error("{span}: applied expression is not a function, it has type {found}")]
    NotAFunction { span: Span, found: Type },
}

/// Infers the unique base type of `e` in `ctx`. Binder annotations
/// contribute through their erasures only.
pub fn typecheck(ctx: &TypeCtx, e: &Expr) -> Result<Type, TypeError> {
    let mut ctx = ctx.clone();
    infer(&mut ctx, e)
}

fn infer(ctx: &mut TypeCtx, e: &Expr) -> Result<Type, TypeError> {
    match &e.kind {
        ExprKind::True | ExprKind::False => Ok(Type::Bool),
        ExprKind::Const(name) => match builtins::lookup(name) {
            Some(b) => Ok(b.base_type()),
            None => Err(TypeError::Unbound {
                span: e.span,
                name: name.clone(),
            }),
        },
        ExprKind::Var(name) => match ctx.lookup(name) {
            Some(t) => Ok(t.clone()),
            None => Err(TypeError::Unbound {
                span: e.span,
                name: name.clone(),
            }),
        },
        ExprKind::If(cond, then, els) => {
            let tc = infer(ctx, cond)?;
            if !tc.is_bool() {
                return Err(TypeError::NonBoolGuard {
                    span: cond.span,
                    found: tc,
                });
            }
            let tt = infer(ctx, then)?;
            let te = infer(ctx, els)?;
            if tt != te {
                return Err(TypeError::Mismatch {
                    span: els.span,
                    expected: tt,
                    found: te,
                });
            }
            Ok(tt)
        }
        ExprKind::Lam {
            param,
            param_ann,
            body,
        } => {
            let t1 = param_ann.erase();
            ctx.push(param.clone(), t1.clone());
            let t2 = infer(ctx, body);
            ctx.pop();
            Ok(Type::arrow(t1, t2?))
        }
        ExprKind::App(fun, arg) => {
            let tf = infer(ctx, fun)?;
            let (t1, t2) = match tf {
                Type::Arrow(a, b) => (*a, *b),
                other => {
                    return Err(TypeError::NotAFunction {
                        span: fun.span,
                        found: other,
                    })
                }
            };
            let ta = infer(ctx, arg)?;
            if ta != t1 {
                return Err(TypeError::Mismatch {
                    span: arg.span,
                    expected: t1,
                    found: ta,
                });
            }
            Ok(t2)
        }
        ExprKind::LetRec {
            name,
            param,
            param_ann,
            ret_ann,
            body,
            rest,
            ..
        } => {
            let t1 = param_ann.erase();
            let t2 = ret_ann.erase();
            let fun_ty = Type::arrow(t1.clone(), t2.clone());
            ctx.push(name.clone(), fun_ty);
            ctx.push(param.clone(), t1);
            let tb = infer(ctx, body);
            ctx.pop();
            let tb = tb?;
            if tb != t2 {
                ctx.pop();
                return Err(TypeError::Mismatch {
                    span: body.span,
                    expected: t2,
                    found: tb,
                });
            }
            let tr = infer(ctx, rest);
            ctx.pop();
            tr
        }
        ExprKind::Signs(_, body) | ExprKind::DoPriv(_, body) | ExprKind::Check(_, body) => {
            infer(ctx, body)
        }
        ExprKind::Test(_, then, els) => {
            let tt = infer(ctx, then)?;
            let te = infer(ctx, els)?;
            if tt != te {
                return Err(TypeError::Mismatch {
                    span: els.span,
                    expected: tt,
                    found: te,
                });
            }
            Ok(tt)
        }
    }
}
