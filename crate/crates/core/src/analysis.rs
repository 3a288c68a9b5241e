//! The static safety analysis. For an expression signed by a principal it
//! computes an annotated type together with the set of privileges that must
//! already be enabled for execution to be free of security errors; running
//! under any superset of that set cannot produce one.
//!
//! The analysis checks programmer-supplied binder annotations in a single
//! bottom-up pass; there is no inference and no constraint solving.

use std::fmt;

use thiserror::Error;

use crate::acl::Acl;
use crate::builtins;
use crate::syntax::{privset_to_string, AnnCtx, AnnType, Expr, ExprKind, Principal, PrivSet, Span};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalysisResult {
    /// The annotated type θ.
    pub ann_type: AnnType,
    /// The required privilege set Π.
    pub required: PrivSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalysisErrorKind {
    /// An argument's annotated type is not a subtype of the parameter's.
    SubtypeFailure,
    /// A signed body requires privileges its signer is not authorized for.
    SignsSideCondition,
    /// Annotations disagree where the rules demand equal annotated types,
    /// or a declared latent set is too small for the body.
    LatentMismatch,
    /// The expression does not even typecheck at base types.
    BaseTypeError,
}

impl fmt::Display for AnalysisErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AnalysisErrorKind::SubtypeFailure => "subtype-failure",
            AnalysisErrorKind::SignsSideCondition => "signs-side-condition",
            AnalysisErrorKind::LatentMismatch => "latent-mismatch",
            AnalysisErrorKind::BaseTypeError => "base-type-error",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {kind}: {detail}")]
pub struct AnalysisError {
    pub kind: AnalysisErrorKind,
    pub span: Span,
    pub detail: String,
}

impl AnalysisError {
    fn new(kind: AnalysisErrorKind, span: Span, detail: impl Into<String>) -> Self {
        AnalysisError {
            kind,
            span,
            detail: detail.into(),
        }
    }

    /// The single-line machine-readable report form.
    pub fn report_line(&self) -> String {
        format!("ERROR {} {} {}", self.kind, self.span, self.detail)
    }
}

impl AnalysisResult {
    /// The single-line machine-readable report form.
    pub fn report_line(&self) -> String {
        format!(
            "RESULT θ={} pi={}",
            self.ann_type,
            privset_to_string(&self.required)
        )
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AnalysisOptions {
    /// Require a recursive function's body to match its declaration exactly
    /// instead of up to subtyping and latent-set inclusion.
    pub strict_letrec: bool,
}

/// Subtyping: contravariant in the parameter, covariant in the result, and
/// latent sets may only widen.
pub fn subtype(a: &AnnType, b: &AnnType) -> bool {
    match (a, b) {
        (AnnType::Bool, AnnType::Bool) => true,
        (
            AnnType::Arrow {
                param: p1,
                latent: l1,
                result: r1,
            },
            AnnType::Arrow {
                param: p2,
                latent: l2,
                result: r2,
            },
        ) => subtype(p2, p1) && subtype(r1, r2) && l1.is_subset(l2),
        _ => false,
    }
}

/// `safe_for` on a closed expression's analysis result: evaluation under any
/// `privs ⊇ Π` cannot yield a security error.
pub fn safe_for(result: &AnalysisResult, privs: &PrivSet) -> bool {
    result.required.is_subset(privs)
}

pub fn analyze(
    ctx: &AnnCtx,
    n: &Principal,
    e: &Expr,
    acl: &Acl,
) -> Result<AnalysisResult, AnalysisError> {
    analyze_with(ctx, n, e, acl, AnalysisOptions::default())
}

pub fn analyze_with(
    ctx: &AnnCtx,
    n: &Principal,
    e: &Expr,
    acl: &Acl,
    opts: AnalysisOptions,
) -> Result<AnalysisResult, AnalysisError> {
    let mut ctx = ctx.clone();
    let (ann_type, required) = go(&mut ctx, n, e, acl, &opts)?;
    Ok(AnalysisResult { ann_type, required })
}

type Judgement = (AnnType, PrivSet);

fn branch_mismatch(span: Span, what: &str, a: &AnnType, b: &AnnType) -> AnalysisError {
    let kind = if a.erase() == b.erase() {
        AnalysisErrorKind::LatentMismatch
    } else {
        AnalysisErrorKind::BaseTypeError
    };
    AnalysisError::new(kind, span, format!("{what}: {a} vs {b}"))
}

fn go(
    ctx: &mut AnnCtx,
    n: &Principal,
    e: &Expr,
    acl: &Acl,
    opts: &AnalysisOptions,
) -> Result<Judgement, AnalysisError> {
    match &e.kind {
        ExprKind::True | ExprKind::False => Ok((AnnType::Bool, PrivSet::new())),
        ExprKind::Const(name) => match builtins::lookup(name) {
            Some(b) => Ok((b.ann.clone(), PrivSet::new())),
            None => Err(AnalysisError::new(
                AnalysisErrorKind::BaseTypeError,
                e.span,
                format!("unknown constant `{name}`"),
            )),
        },
        ExprKind::Var(name) => match ctx.lookup(name) {
            Some(t) => Ok((t.clone(), PrivSet::new())),
            None => Err(AnalysisError::new(
                AnalysisErrorKind::BaseTypeError,
                e.span,
                format!("unbound variable `{name}`"),
            )),
        },
        ExprKind::If(cond, then, els) => {
            let (tc, pi1) = go(ctx, n, cond, acl, opts)?;
            if tc != AnnType::Bool {
                return Err(AnalysisError::new(
                    AnalysisErrorKind::BaseTypeError,
                    cond.span,
                    format!("guard must be bool, found {tc}"),
                ));
            }
            let (tt, pi2) = go(ctx, n, then, acl, opts)?;
            let (te, pi3) = go(ctx, n, els, acl, opts)?;
            if tt != te {
                return Err(branch_mismatch(els.span, "branch types differ", &tt, &te));
            }
            Ok((tt, union3(pi1, pi2, pi3)))
        }
        ExprKind::Lam {
            param,
            param_ann,
            body,
        } => {
            ctx.push(param.clone(), param_ann.clone());
            let res = go(ctx, n, body, acl, opts);
            ctx.pop();
            let (tb, pib) = res?;
            Ok((AnnType::arrow(param_ann.clone(), pib, tb), PrivSet::new()))
        }
        ExprKind::App(fun, arg) => {
            let (tf, pi1) = go(ctx, n, fun, acl, opts)?;
            let (param, latent, result) = match tf {
                AnnType::Arrow {
                    param,
                    latent,
                    result,
                } => (*param, latent, *result),
                other => {
                    return Err(AnalysisError::new(
                        AnalysisErrorKind::BaseTypeError,
                        fun.span,
                        format!("applied expression is not a function, it has type {other}"),
                    ))
                }
            };
            let (ta, pi2) = go(ctx, n, arg, acl, opts)?;
            if !subtype(&ta, &param) {
                let kind = if ta.erase() == param.erase() {
                    AnalysisErrorKind::SubtypeFailure
                } else {
                    AnalysisErrorKind::BaseTypeError
                };
                return Err(AnalysisError::new(
                    kind,
                    arg.span,
                    format!("argument type {ta} is not a subtype of parameter type {param}"),
                ));
            }
            Ok((result, union3(latent, pi1, pi2)))
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
            let fn_ann = AnnType::arrow(param_ann.clone(), latent.clone(), ret_ann.clone());
            ctx.push(name.clone(), fn_ann.clone());
            ctx.push(param.clone(), param_ann.clone());
            let body_res = go(ctx, n, body, acl, opts);
            ctx.pop();
            let (tb, pib) = match body_res {
                Ok(j) => j,
                Err(err) => {
                    ctx.pop();
                    return Err(err);
                }
            };
            let declared_ok = if opts.strict_letrec {
                tb == *ret_ann
            } else {
                subtype(&tb, ret_ann)
            };
            if !declared_ok {
                ctx.pop();
                let kind = if tb.erase() == ret_ann.erase() {
                    AnalysisErrorKind::SubtypeFailure
                } else {
                    AnalysisErrorKind::BaseTypeError
                };
                return Err(AnalysisError::new(
                    kind,
                    body.span,
                    format!("body type {tb} does not match declared result type {ret_ann}"),
                ));
            }
            let latent_ok = if opts.strict_letrec {
                pib == *latent
            } else {
                pib.is_subset(latent)
            };
            if !latent_ok {
                ctx.pop();
                return Err(AnalysisError::new(
                    AnalysisErrorKind::LatentMismatch,
                    body.span,
                    format!(
                        "body requires {} but the declaration grants {}",
                        privset_to_string(&pib),
                        privset_to_string(latent)
                    ),
                ));
            }
            let rest_res = go(ctx, n, rest, acl, opts);
            ctx.pop();
            let (tr, pir) = rest_res?;
            // The declared latent set is part of the letrec's own demand.
            Ok((tr, latent.iter().cloned().chain(pir).collect()))
        }
        ExprKind::Signs(owner, body) => {
            let (tb, pib) = go(ctx, owner, body, acl, opts)?;
            if !pib.is_subset(acl.grants(owner)) {
                let missing: PrivSet = pib.difference(acl.grants(owner)).cloned().collect();
                return Err(AnalysisError::new(
                    AnalysisErrorKind::SignsSideCondition,
                    e.span,
                    format!(
                        "body requires {} but signer {owner} is only authorized for {}",
                        privset_to_string(&missing),
                        privset_to_string(acl.grants(owner))
                    ),
                ));
            }
            Ok((tb, pib))
        }
        ExprKind::DoPriv(p, body) => {
            let (tb, mut pib) = go(ctx, n, body, acl, opts)?;
            if acl.authorizes(n, p) {
                pib.remove(p);
            }
            Ok((tb, pib))
        }
        ExprKind::Check(p, body) => {
            let (tb, mut pib) = go(ctx, n, body, acl, opts)?;
            pib.insert(p.clone());
            Ok((tb, pib))
        }
        ExprKind::Test(_, then, els) => {
            let (tt, pi1) = go(ctx, n, then, acl, opts)?;
            let (te, pi2) = go(ctx, n, els, acl, opts)?;
            if tt != te {
                return Err(branch_mismatch(els.span, "branch types differ", &tt, &te));
            }
            Ok((tt, pi1.into_iter().chain(pi2).collect()))
        }
    }
}

fn union3(a: PrivSet, b: PrivSet, c: PrivSet) -> PrivSet {
    a.into_iter().chain(b).chain(c).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acl::parse_acl;
    use crate::parser::{parse_anntype, parse_expr};

    fn n(name: &str) -> Principal {
        Principal::new(name)
    }

    fn analyze_src(src: &str, who: &str, acl: &Acl) -> Result<AnalysisResult, AnalysisError> {
        analyze(&AnnCtx::empty(), &n(who), &parse_expr(src).unwrap(), acl)
    }

    fn ann(src: &str) -> AnnType {
        parse_anntype(src).unwrap()
    }

    #[test]
    fn subtype_examples() {
        assert!(subtype(&AnnType::Bool, &AnnType::Bool));
        assert!(subtype(&ann("bool-{}->bool"), &ann("bool-{p}->bool")));
        assert!(!subtype(&ann("bool-{p}->bool"), &ann("bool-{}->bool")));
        // contravariance in the parameter
        assert!(subtype(
            &ann("(bool-{p}->bool)-{}->bool"),
            &ann("(bool-{}->bool)-{}->bool")
        ));
    }

    #[test]
    fn check_adds_its_privilege() {
        let acl = parse_acl("n: p").unwrap();
        let r = analyze_src("check p { x }", "n", &acl);
        // unbound x: base type error
        assert_eq!(r.unwrap_err().kind, AnalysisErrorKind::BaseTypeError);
        let r = analyze_src("check p { true }", "n", &acl).unwrap();
        assert_eq!(r.report_line(), "RESULT θ=bool pi={p}");
    }

    #[test]
    fn cp_example() {
        let acl = parse_acl("n: p").unwrap();
        let r = analyze_src("fn x: bool => sign n { check p { x } }", "anyone", &acl).unwrap();
        assert_eq!(r.ann_type, ann("bool-{p}->bool"));
        assert!(r.required.is_empty());
    }

    #[test]
    fn cp_demands_authorization() {
        let acl = Acl::new();
        let err =
            analyze_src("fn x: bool => sign n { check p { x } }", "anyone", &acl).unwrap_err();
        assert_eq!(err.kind, AnalysisErrorKind::SignsSideCondition);
    }

    #[test]
    fn lp_example() {
        let acl = parse_acl("n: p").unwrap();
        let r = analyze_src(
            "fn f: bool-{p}->bool => sign n { fn x: bool => sign n { dopriv p { f x } } }",
            "anyone",
            &acl,
        )
        .unwrap();
        assert_eq!(r.ann_type, ann("(bool-{p}->bool)-{}->(bool-{}->bool)"));
        assert!(r.required.is_empty());
    }

    #[test]
    fn dopriv_of_unneeded_privilege_is_harmless() {
        let acl = parse_acl("n: p").unwrap();
        let r = analyze_src("dopriv p { true }", "n", &acl).unwrap();
        assert!(r.required.is_empty());
    }

    #[test]
    fn dopriv_discharges_only_authorized_privileges() {
        let acl = Acl::new();
        let r = analyze_src("dopriv p { check p { true } }", "n", &acl).unwrap();
        assert_eq!(
            r.required,
            [crate::syntax::Privilege::new("p")].into_iter().collect()
        );
    }

    #[test]
    fn application_unions_latent_and_operand_sets() {
        let acl = parse_acl("n: p w").unwrap();
        let r = analyze_src(
            "(fn x: bool => check p { x }) (check w { true })",
            "n",
            &acl,
        )
        .unwrap();
        assert_eq!(r.ann_type, AnnType::Bool);
        assert_eq!(privset_to_string(&r.required), "{p,w}");
    }

    #[test]
    fn application_subtype_failure() {
        let acl = Acl::new();
        // parameter expects a function with latent {}, argument has latent {p}
        let err = analyze_src(
            "(fn f: bool-{}->bool => true) (fn x: bool => check p { x })",
            "n",
            &acl,
        )
        .unwrap_err();
        assert_eq!(err.kind, AnalysisErrorKind::SubtypeFailure);
    }

    #[test]
    fn branch_annotation_mismatch() {
        let acl = Acl::new();
        let err = analyze_src(
            "if true then (fn x: bool => x) else (fn x: bool => check p { x })",
            "n",
            &acl,
        )
        .unwrap_err();
        assert_eq!(err.kind, AnalysisErrorKind::LatentMismatch);
    }

    #[test]
    fn letrec_relaxed_accepts_smaller_body_demand() {
        let acl = parse_acl("n: p").unwrap();
        let src = "letrec f (x: bool) : bool ! {p} = sign n { x } in f true";
        let r = analyze_src(src, "n", &acl).unwrap();
        // the declared latent set feeds the overall demand
        assert_eq!(privset_to_string(&r.required), "{p}");
        // strict mode insists the body demand equal the declaration
        let err = analyze_with(
            &AnnCtx::empty(),
            &n("n"),
            &parse_expr(src).unwrap(),
            &acl,
            AnalysisOptions {
                strict_letrec: true,
            },
        )
        .unwrap_err();
        assert_eq!(err.kind, AnalysisErrorKind::LatentMismatch);
    }

    #[test]
    fn letrec_body_exceeding_declaration_is_rejected() {
        let acl = Acl::new();
        let err = analyze_src(
            "letrec f (x: bool) : bool ! {} = check p { x } in f true",
            "n",
            &acl,
        )
        .unwrap_err();
        assert_eq!(err.kind, AnalysisErrorKind::LatentMismatch);
    }

    #[test]
    fn password_corpus_analysis() {
        let acl = parse_acl(crate::corpus::PASS_ACL).unwrap();
        // the full inlined program is safe with an empty requirement
        let r = analyze_src(crate::corpus::USE_SEC, "n0", &acl).unwrap();
        assert_eq!(r.ann_type, AnnType::Bool);
        assert!(r.required.is_empty());
        // the failing variants have no judgement at all
        for src in [crate::corpus::BAD1_SEC, crate::corpus::BAD2_SEC] {
            let err = analyze_src(src, "n0", &acl).unwrap_err();
            assert_eq!(err.kind, AnalysisErrorKind::SignsSideCondition);
        }
    }

    #[test]
    fn safe_for_is_superset_check() {
        let p = |s: &str| crate::syntax::Privilege::new(s);
        let r = AnalysisResult {
            ann_type: AnnType::Bool,
            required: PrivSet::new(),
        };
        assert!(safe_for(&r, &PrivSet::new()));
        let r = AnalysisResult {
            ann_type: AnnType::Bool,
            required: [p("p")].into_iter().collect(),
        };
        assert!(safe_for(&r, &[p("p"), p("w")].into_iter().collect()));
        assert!(!safe_for(&r, &PrivSet::new()));
    }
}
