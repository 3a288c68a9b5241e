//! Source-to-source transformations: check hoisting, privileged-check
//! elimination, check/signs commutation, signs collapse, the test/grant
//! rewrite, tail-frame dropping, and full security erasure. Every rule's
//! side conditions are machine-checked here; the differential harness
//! validates the claimed equalities.

use std::fmt;

use thiserror::Error;

use crate::acl::Acl;
use crate::pretty::pretty;
use crate::syntax::{free_vars, is_p_pure, is_value, map_children, Expr, ExprKind, Span};

/// How widely a rule's equality is claimed to hold: over every privilege
/// set, or only over privilege sets within the current principal's grants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqualityMode {
    Unconditional,
    RestrictedToAcl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleName {
    IfHoist,
    AppArgHoist,
    TestElseHoist,
    TestBothHoist,
    LetrecHoist,
    CheckCheckCollapse,
    SignsCollapse,
    CommuteCheckSigns,
    ElimPrivilegedCheck,
    TestGrant,
    DropTailFrame,
}

impl RuleName {
    pub fn as_str(&self) -> &'static str {
        match self {
            RuleName::IfHoist => "if-hoist",
            RuleName::AppArgHoist => "app-arg-hoist",
            RuleName::TestElseHoist => "test-else-hoist",
            RuleName::TestBothHoist => "test-both-hoist",
            RuleName::LetrecHoist => "letrec-hoist",
            RuleName::CheckCheckCollapse => "check-check-collapse",
            RuleName::SignsCollapse => "signs-collapse",
            RuleName::CommuteCheckSigns => "commute-check-signs",
            RuleName::ElimPrivilegedCheck => "elim-privileged-check",
            RuleName::TestGrant => "test-grant",
            RuleName::DropTailFrame => "drop-tail-frame",
        }
    }

    pub fn equality_mode(&self) -> EqualityMode {
        match self {
            RuleName::TestGrant => EqualityMode::RestrictedToAcl,
            _ => EqualityMode::Unconditional,
        }
    }
}

impl fmt::Display for RuleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One applied rewrite; `before` and `after` are whole-program pretty forms
/// so a trace can be replayed and checked link by link.
#[derive(Debug, Clone)]
pub struct RewriteStep {
    pub rule: RuleName,
    pub span: Span,
    pub before: String,
    pub after: String,
}

#[derive(Debug, Clone, Default)]
pub struct RewriteTrace(pub Vec<RewriteStep>);

impl RewriteTrace {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn rules(&self) -> Vec<RuleName> {
        self.0.iter().map(|s| s.rule).collect()
    }

    /// True iff the steps chain from `original` to `result` without gaps.
    pub fn replays(&self, original: &Expr, result: &Expr) -> bool {
        let mut cur = pretty(original);
        for step in &self.0 {
            if step.before != cur {
                return false;
            }
            cur = step.after.clone();
        }
        cur == pretty(result)
    }
}

impl fmt::Display for RewriteTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for step in &self.0 {
            writeln!(f, "RULE {} @{}", step.rule, step.span)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// For commutation: move the check outward (`sign n { check p e }` to
    /// `check p { sign n e }`). For test/grant: insert the `dopriv`.
    Forward,
    Reverse,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HoistOptions {
    /// When false (the default), the application-argument hoist fires only
    /// for syntactic-value functions, which keeps traces easy to audit. The
    /// general form is available behind this flag.
    pub unrestricted_app_arg: bool,
}

const MAX_REWRITE_STEPS: usize = 100_000;

fn check(p: &crate::syntax::Privilege, body: Expr, span: Span) -> Expr {
    Expr::with_span(ExprKind::Check(p.clone(), Box::new(body)), span)
}

fn spanned(mut e: Expr, span: Span) -> Expr {
    e.span = span;
    e
}

/// One hoisting step at the root of `e`, if any applies. Rules are tried in
/// a fixed order: if-branch, application argument, test-else, test-both,
/// letrec body, check-check collapse.
fn hoist_redex(e: &Expr, opts: &HoistOptions) -> Option<(RuleName, Expr)> {
    let span = e.span;
    match &e.kind {
        ExprKind::If(c, t, f) => match (&t.kind, &f.kind) {
            (ExprKind::Check(p1, a), ExprKind::Check(p2, b)) if p1 == p2 => Some((
                RuleName::IfHoist,
                check(
                    p1,
                    spanned(Expr::if_((**c).clone(), (**a).clone(), (**b).clone()), span),
                    span,
                ),
            )),
            _ => None,
        },
        ExprKind::App(f, a) => match &a.kind {
            ExprKind::Check(p, inner) if opts.unrestricted_app_arg || is_value(f) => Some((
                RuleName::AppArgHoist,
                check(
                    p,
                    spanned(Expr::app((**f).clone(), (**inner).clone()), span),
                    span,
                ),
            )),
            _ => None,
        },
        ExprKind::Test(p, t, f) => {
            if let ExprKind::Check(p2, b) = &f.kind {
                if p2 == p {
                    return Some((
                        RuleName::TestElseHoist,
                        check(
                            p,
                            spanned(Expr::test(p.clone(), (**t).clone(), (**b).clone()), span),
                            span,
                        ),
                    ));
                }
            }
            match (&t.kind, &f.kind) {
                (ExprKind::Check(pa, a), ExprKind::Check(pb, b)) if pa == pb => Some((
                    RuleName::TestBothHoist,
                    check(
                        pa,
                        spanned(Expr::test(p.clone(), (**a).clone(), (**b).clone()), span),
                        span,
                    ),
                )),
                _ => None,
            }
        }
        ExprKind::LetRec {
            name,
            param,
            param_ann,
            ret_ann,
            latent,
            body,
            rest,
        } => match &rest.kind {
            ExprKind::Check(p, r) => Some((
                RuleName::LetrecHoist,
                check(
                    p,
                    spanned(
                        Expr::letrec(
                            name.clone(),
                            param.clone(),
                            param_ann.clone(),
                            ret_ann.clone(),
                            latent.clone(),
                            (**body).clone(),
                            (**r).clone(),
                        ),
                        span,
                    ),
                    span,
                ),
            )),
            _ => None,
        },
        ExprKind::Check(p, inner) => match &inner.kind {
            ExprKind::Check(p2, b) if p2 == p => {
                Some((RuleName::CheckCheckCollapse, check(p, (**b).clone(), span)))
            }
            _ => None,
        },
        _ => None,
    }
}

fn commute_redex(e: &Expr, acl: &Acl, dir: Direction) -> Option<(RuleName, Expr)> {
    let span = e.span;
    match dir {
        Direction::Forward => match &e.kind {
            ExprKind::Signs(n, body) => match &body.kind {
                ExprKind::Check(p, inner) if acl.authorizes(n, p) => {
                    let signed = Expr::with_span(
                        ExprKind::Signs(n.clone(), inner.clone()),
                        body.span.join(span),
                    );
                    Some((RuleName::CommuteCheckSigns, check(p, signed, span)))
                }
                _ => None,
            },
            _ => None,
        },
        Direction::Reverse => match &e.kind {
            ExprKind::Check(p, body) => match &body.kind {
                ExprKind::Signs(n, inner) if acl.authorizes(n, p) => Some((
                    RuleName::CommuteCheckSigns,
                    Expr::with_span(
                        ExprKind::Signs(
                            n.clone(),
                            Box::new(check(p, (**inner).clone(), body.span.join(span))),
                        ),
                        span,
                    ),
                )),
                _ => None,
            },
            _ => None,
        },
    }
}

fn signs_collapse_redex(e: &Expr) -> Option<(RuleName, Expr)> {
    match &e.kind {
        ExprKind::Signs(n, body) => match &body.kind {
            ExprKind::Signs(n2, inner) if n2 == n => Some((
                RuleName::SignsCollapse,
                Expr::with_span(ExprKind::Signs(n.clone(), inner.clone()), e.span),
            )),
            _ => None,
        },
        _ => None,
    }
}

fn elim_redex(e: &Expr, acl: &Acl) -> Option<(RuleName, Expr)> {
    match &e.kind {
        ExprKind::Signs(n, outer) => match &outer.kind {
            ExprKind::DoPriv(p, mid) => match &mid.kind {
                ExprKind::Check(p2, body)
                    if p2 == p
                        && acl.authorizes(n, p)
                        && is_p_pure(body, p)
                        && free_vars(body).is_empty() =>
                {
                    Some((
                        RuleName::ElimPrivilegedCheck,
                        Expr::with_span(ExprKind::Signs(n.clone(), body.clone()), e.span),
                    ))
                }
                _ => None,
            },
            _ => None,
        },
        _ => None,
    }
}

/// Applies `rule_at` at the first matching position in pre-order
/// (outermost-first, leftmost among siblings) and rebuilds the tree.
fn rewrite_first(
    e: &Expr,
    rule_at: &impl Fn(&Expr) -> Option<(RuleName, Expr)>,
) -> Option<(Expr, RuleName, Span)> {
    if let Some((rule, replacement)) = rule_at(e) {
        return Some((replacement, rule, e.span));
    }
    // recurse into children left to right, rebuilding around the first hit
    let children: Vec<&Expr> = match &e.kind {
        ExprKind::True | ExprKind::False | ExprKind::Const(_) | ExprKind::Var(_) => vec![],
        ExprKind::If(a, b, c) => vec![a, b, c],
        ExprKind::Lam { body, .. } => vec![body],
        ExprKind::App(a, b) => vec![a, b],
        ExprKind::LetRec { body, rest, .. } => vec![body, rest],
        ExprKind::Signs(_, b) | ExprKind::DoPriv(_, b) | ExprKind::Check(_, b) => vec![b],
        ExprKind::Test(_, a, b) => vec![a, b],
    };
    for (idx, child) in children.iter().enumerate() {
        if let Some((new_child, rule, span)) = rewrite_first(child, rule_at) {
            let pos = std::cell::Cell::new(0usize);
            let rebuilt = map_children(e, &|c: &Expr| {
                let here = pos.get();
                pos.set(here + 1);
                if here == idx {
                    new_child.clone()
                } else {
                    c.clone()
                }
            });
            return Some((rebuilt, rule, span));
        }
    }
    None
}

fn fixpoint(
    e: &Expr,
    rule_at: &impl Fn(&Expr) -> Option<(RuleName, Expr)>,
) -> (Expr, RewriteTrace) {
    let mut cur = e.clone();
    let mut steps = Vec::new();
    while let Some((next, rule, span)) = rewrite_first(&cur, rule_at) {
        assert!(
            steps.len() < MAX_REWRITE_STEPS,
            "rewrite fixpoint bound exceeded"
        );
        steps.push(RewriteStep {
            rule,
            span,
            before: pretty(&cur),
            after: pretty(&next),
        });
        cur = next;
    }
    (cur, RewriteTrace(steps))
}

/// Moves checks outward to a fixed point using the six hoisting equalities,
/// outermost-first. Identity (with an empty trace) when nothing matches.
pub fn hoist_checks(e: &Expr) -> (Expr, RewriteTrace) {
    hoist_checks_with(e, HoistOptions::default())
}

pub fn hoist_checks_with(e: &Expr, opts: HoistOptions) -> (Expr, RewriteTrace) {
    fixpoint(e, &|node| hoist_redex(node, &opts))
}

/// `sign n { dopriv p { check p { body } } }` becomes `sign n { body }`
/// when `p` is authorized for `n` and `body` is p-pure and closed. Applies
/// at the root only.
pub fn elim_privileged_check(e: &Expr, acl: &Acl) -> Option<Expr> {
    elim_redex(e, acl).map(|(_, e2)| e2)
}

/// Swaps a check with an enclosing (Forward) or enclosed (Reverse) signs,
/// allowed only when the privilege is authorized for the signer. Applies at
/// the root only.
pub fn commute_check_signs(e: &Expr, acl: &Acl, dir: Direction) -> Option<Expr> {
    commute_redex(e, acl, dir).map(|(_, e2)| e2)
}

/// Collapses immediately nested same-principal signs everywhere in the tree.
pub fn collapse_signs(e: &Expr) -> Expr {
    let mut cur = map_children(e, &collapse_signs);
    while let Some((_, next)) = signs_collapse_redex(&cur) {
        cur = next;
    }
    cur
}

/// The test/grant rewrite: `test p { e1 } else { e2 }` and
/// `test p { dopriv p { e1 } } else { e2 }` are interchangeable for
/// privilege sets within the current principal's grants. Applies at the
/// root only.
pub fn test_grant(e: &Expr, dir: Direction) -> Option<Expr> {
    match (&e.kind, dir) {
        (ExprKind::Test(p, t, f), Direction::Forward) => Some(Expr::with_span(
            ExprKind::Test(
                p.clone(),
                Box::new(Expr::dopriv(p.clone(), (**t).clone())),
                f.clone(),
            ),
            e.span,
        )),
        (ExprKind::Test(p, t, f), Direction::Reverse) => match &t.kind {
            ExprKind::DoPriv(p2, inner) if p2 == p => Some(Expr::with_span(
                ExprKind::Test(p.clone(), inner.clone(), f.clone()),
                e.span,
            )),
            _ => None,
        },
        _ => None,
    }
}

/// Drops the calling frame around a signed-body call:
/// `sign n2 { (fn x => sign n1 { e1 }) v }` becomes the bare application,
/// provided the callee's grants are within the dropped signer's and the
/// argument is a syntactic value. A lambda argument must itself have a
/// signed body: an unsigned one closes over the current principal, which
/// the two sides disagree about.
pub fn drop_tail_frame(e: &Expr, acl: &Acl) -> Option<Expr> {
    let ExprKind::Signs(n2, inner) = &e.kind else {
        return None;
    };
    let ExprKind::App(fun, arg) = &inner.kind else {
        return None;
    };
    let ExprKind::Lam { body, .. } = &fun.kind else {
        return None;
    };
    let ExprKind::Signs(n1, _) = &body.kind else {
        return None;
    };
    if !acl.grants(n1).is_subset(acl.grants(n2)) {
        return None;
    }
    if !is_value(arg) {
        return None;
    }
    if let ExprKind::Lam { body: arg_body, .. } = &arg.kind {
        if !matches!(arg_body.kind, ExprKind::Signs(..)) {
            return None;
        }
    }
    Some((**inner).clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("{span}: cannot erase a test expression")]
pub struct EraseError {
    pub span: Span,
}

/// Structurally erases all `dopriv` and `check` nodes; signs are kept and
/// everything else is homomorphic. Undefined on expressions containing
/// `test`.
pub fn erase_security(e: &Expr) -> Result<Expr, EraseError> {
    match &e.kind {
        ExprKind::DoPriv(_, body) | ExprKind::Check(_, body) => erase_security(body),
        ExprKind::Test(..) => Err(EraseError { span: e.span }),
        ExprKind::True | ExprKind::False | ExprKind::Const(_) | ExprKind::Var(_) => Ok(e.clone()),
        ExprKind::If(a, b, c) => Ok(Expr::with_span(
            ExprKind::If(
                Box::new(erase_security(a)?),
                Box::new(erase_security(b)?),
                Box::new(erase_security(c)?),
            ),
            e.span,
        )),
        ExprKind::Lam {
            param,
            param_ann,
            body,
        } => Ok(Expr::with_span(
            ExprKind::Lam {
                param: param.clone(),
                param_ann: param_ann.clone(),
                body: Box::new(erase_security(body)?),
            },
            e.span,
        )),
        ExprKind::App(a, b) => Ok(Expr::with_span(
            ExprKind::App(Box::new(erase_security(a)?), Box::new(erase_security(b)?)),
            e.span,
        )),
        ExprKind::LetRec {
            name,
            param,
            param_ann,
            ret_ann,
            latent,
            body,
            rest,
        } => Ok(Expr::with_span(
            ExprKind::LetRec {
                name: name.clone(),
                param: param.clone(),
                param_ann: param_ann.clone(),
                ret_ann: ret_ann.clone(),
                latent: latent.clone(),
                body: Box::new(erase_security(body)?),
                rest: Box::new(erase_security(rest)?),
            },
            e.span,
        )),
        ExprKind::Signs(n, body) => Ok(Expr::with_span(
            ExprKind::Signs(n.clone(), Box::new(erase_security(body)?)),
            e.span,
        )),
    }
}

/// The optimization pipeline: hoisting, outward commutation, signs
/// collapse, and privileged-check elimination, applied leftmost-outermost
/// to a fixed point.
pub fn optimize(e: &Expr, acl: &Acl) -> (Expr, RewriteTrace) {
    let opts = HoistOptions::default();
    fixpoint(e, &|node| {
        hoist_redex(node, &opts)
            .or_else(|| commute_redex(node, acl, Direction::Forward))
            .or_else(|| signs_collapse_redex(node))
            .or_else(|| elim_redex(node, acl))
    })
}
