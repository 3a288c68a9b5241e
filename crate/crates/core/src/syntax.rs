//! Abstract syntax: principals, privileges, types, annotated types, and
//! expressions, together with the syntactic predicates the rest of the
//! toolkit is built on.

use std::collections::BTreeSet;
use std::fmt;

/// A finite set of privileges.
pub type PrivSet = BTreeSet<Privilege>;

/// True iff `s` matches the identifier rule `[A-Za-z_][A-Za-z0-9_]*`.
pub fn is_valid_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A code signer. Each stack frame and each signed expression is owned by one.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Principal(String);

impl Principal {
    /// Panics if `name` is not a valid identifier.
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        assert!(is_valid_ident(&name), "invalid principal name: {name:?}");
        Principal(name)
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Principal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A named permission that must be enabled and authorized before a guarded
/// operation runs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Privilege(String);

impl Privilege {
    /// Panics if `name` is not a valid identifier.
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        assert!(is_valid_ident(&name), "invalid privilege name: {name:?}");
        Privilege(name)
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Privilege {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Formats a privilege set as `{p,q}`.
pub fn privset_to_string(ps: &PrivSet) -> String {
    let mut out = String::from("{");
    for (i, p) in ps.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(p.name());
    }
    out.push('}');
    out
}

/// Source location of a syntax node, 1-based. `DUMMY` marks synthesized nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl Span {
    pub const DUMMY: Span = Span {
        line: 0,
        col: 0,
        end_line: 0,
        end_col: 0,
    };

    pub fn new(line: u32, col: u32, end_line: u32, end_col: u32) -> Self {
        Span {
            line,
            col,
            end_line,
            end_col,
        }
    }

    pub fn is_dummy(&self) -> bool {
        *self == Span::DUMMY
    }

    /// Smallest span covering both.
    pub fn join(self, other: Span) -> Span {
        if self.is_dummy() {
            return other;
        }
        if other.is_dummy() {
            return self;
        }
        let (line, col) = if (self.line, self.col) <= (other.line, other.col) {
            (self.line, self.col)
        } else {
            (other.line, other.col)
        };
        let (end_line, end_col) =
            if (self.end_line, self.end_col) >= (other.end_line, other.end_col) {
                (self.end_line, self.end_col)
            } else {
                (other.end_line, other.end_col)
            };
        Span {
            line,
            col,
            end_line,
            end_col,
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_dummy() {
            write!(f, "?")
        } else {
            write!(f, "{}:{}", self.line, self.col)
        }
    }
}

/// Base types: `bool` and function types.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Type {
    Bool,
    Arrow(Box<Type>, Box<Type>),
}

impl Type {
    pub fn arrow(param: Type, result: Type) -> Type {
        Type::Arrow(Box::new(param), Box::new(result))
    }

    pub fn is_bool(&self) -> bool {
        matches!(self, Type::Bool)
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Bool => f.write_str("bool"),
            Type::Arrow(a, b) => {
                // Arrows associate to the right; parenthesize arrow parameters.
                match **a {
                    Type::Arrow(..) => write!(f, "({a}) -> {b}"),
                    Type::Bool => write!(f, "{a} -> {b}"),
                }
            }
        }
    }
}

/// Annotated types: arrows carry the latent privilege set their application
/// may require.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnnType {
    Bool,
    Arrow {
        param: Box<AnnType>,
        latent: PrivSet,
        result: Box<AnnType>,
    },
}

impl AnnType {
    pub fn arrow(param: AnnType, latent: PrivSet, result: AnnType) -> AnnType {
        AnnType::Arrow {
            param: Box::new(param),
            latent,
            result: Box::new(result),
        }
    }

    /// Erases annotations, yielding the base type.
    pub fn erase(&self) -> Type {
        match self {
            AnnType::Bool => Type::Bool,
            AnnType::Arrow { param, result, .. } => Type::arrow(param.erase(), result.erase()),
        }
    }
}

impl fmt::Display for AnnType {
    /// Compact surface form, e.g. `(bool-{p}->bool)-{}->bool`. Parses back.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnnType::Bool => f.write_str("bool"),
            AnnType::Arrow {
                param,
                latent,
                result,
            } => {
                match **param {
                    AnnType::Arrow { .. } => write!(f, "({param})")?,
                    AnnType::Bool => write!(f, "{param}")?,
                }
                write!(f, "-{}->{result}", privset_to_string(latent))
            }
        }
    }
}

/// An expression of the calculus. Equality ignores spans.
#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Eq for Expr {}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    True,
    False,
    /// A builtin constant from the initial context.
    Const(String),
    Var(String),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Lam {
        param: String,
        param_ann: AnnType,
        body: Box<Expr>,
    },
    App(Box<Expr>, Box<Expr>),
    LetRec {
        name: String,
        param: String,
        param_ann: AnnType,
        ret_ann: AnnType,
        /// Declared latent privilege set of the recursive function.
        latent: PrivSet,
        body: Box<Expr>,
        rest: Box<Expr>,
    },
    Signs(Principal, Box<Expr>),
    DoPriv(Privilege, Box<Expr>),
    Check(Privilege, Box<Expr>),
    Test(Privilege, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn new(kind: ExprKind) -> Expr {
        Expr {
            kind,
            span: Span::DUMMY,
        }
    }

    pub fn with_span(kind: ExprKind, span: Span) -> Expr {
        Expr { kind, span }
    }

    pub fn lit(b: bool) -> Expr {
        Expr::new(if b { ExprKind::True } else { ExprKind::False })
    }

    pub fn constant(name: impl Into<String>) -> Expr {
        Expr::new(ExprKind::Const(name.into()))
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::new(ExprKind::Var(name.into()))
    }

    pub fn if_(cond: Expr, then: Expr, els: Expr) -> Expr {
        Expr::new(ExprKind::If(Box::new(cond), Box::new(then), Box::new(els)))
    }

    pub fn lam(param: impl Into<String>, param_ann: AnnType, body: Expr) -> Expr {
        Expr::new(ExprKind::Lam {
            param: param.into(),
            param_ann,
            body: Box::new(body),
        })
    }

    pub fn app(fun: Expr, arg: Expr) -> Expr {
        Expr::new(ExprKind::App(Box::new(fun), Box::new(arg)))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn letrec(
        name: impl Into<String>,
        param: impl Into<String>,
        param_ann: AnnType,
        ret_ann: AnnType,
        latent: PrivSet,
        body: Expr,
        rest: Expr,
    ) -> Expr {
        Expr::new(ExprKind::LetRec {
            name: name.into(),
            param: param.into(),
            param_ann,
            ret_ann,
            latent,
            body: Box::new(body),
            rest: Box::new(rest),
        })
    }

    pub fn signs(owner: Principal, body: Expr) -> Expr {
        Expr::new(ExprKind::Signs(owner, Box::new(body)))
    }

    pub fn dopriv(p: Privilege, body: Expr) -> Expr {
        Expr::new(ExprKind::DoPriv(p, Box::new(body)))
    }

    pub fn check(p: Privilege, body: Expr) -> Expr {
        Expr::new(ExprKind::Check(p, Box::new(body)))
    }

    pub fn test(p: Privilege, then: Expr, els: Expr) -> Expr {
        Expr::new(ExprKind::Test(p, Box::new(then), Box::new(els)))
    }

    /// The declared annotated arrow type of a `letrec` binder.
    pub fn letrec_fn_ann(&self) -> Option<AnnType> {
        match &self.kind {
            ExprKind::LetRec {
                param_ann,
                ret_ann,
                latent,
                ..
            } => Some(AnnType::arrow(
                param_ann.clone(),
                latent.clone(),
                ret_ann.clone(),
            )),
            _ => None,
        }
    }

    /// Walks the tree, calling `f` on every node (pre-order).
    pub fn walk(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match &self.kind {
            ExprKind::True | ExprKind::False | ExprKind::Const(_) | ExprKind::Var(_) => {}
            ExprKind::If(a, b, c) => {
                a.walk(f);
                b.walk(f);
                c.walk(f);
            }
            ExprKind::Lam { body, .. } => body.walk(f),
            ExprKind::App(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            ExprKind::LetRec { body, rest, .. } => {
                body.walk(f);
                rest.walk(f);
            }
            ExprKind::Signs(_, b) | ExprKind::DoPriv(_, b) | ExprKind::Check(_, b) => b.walk(f),
            ExprKind::Test(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
        }
    }
}

/// Rebuilds `e` with `f` applied to each immediate child, preserving the
/// node's own span. Children are visited in the same order as `walk`.
pub fn map_children(e: &Expr, f: &impl Fn(&Expr) -> Expr) -> Expr {
    let kind = match &e.kind {
        ExprKind::True | ExprKind::False | ExprKind::Const(_) | ExprKind::Var(_) => e.kind.clone(),
        ExprKind::If(a, b, c) => ExprKind::If(Box::new(f(a)), Box::new(f(b)), Box::new(f(c))),
        ExprKind::Lam {
            param,
            param_ann,
            body,
        } => ExprKind::Lam {
            param: param.clone(),
            param_ann: param_ann.clone(),
            body: Box::new(f(body)),
        },
        ExprKind::App(a, b) => ExprKind::App(Box::new(f(a)), Box::new(f(b))),
        ExprKind::LetRec {
            name,
            param,
            param_ann,
            ret_ann,
            latent,
            body,
            rest,
        } => ExprKind::LetRec {
            name: name.clone(),
            param: param.clone(),
            param_ann: param_ann.clone(),
            ret_ann: ret_ann.clone(),
            latent: latent.clone(),
            body: Box::new(f(body)),
            rest: Box::new(f(rest)),
        },
        ExprKind::Signs(n, b) => ExprKind::Signs(n.clone(), Box::new(f(b))),
        ExprKind::DoPriv(p, b) => ExprKind::DoPriv(p.clone(), Box::new(f(b))),
        ExprKind::Check(p, b) => ExprKind::Check(p.clone(), Box::new(f(b))),
        ExprKind::Test(p, a, b) => ExprKind::Test(p.clone(), Box::new(f(a)), Box::new(f(b))),
    };
    Expr::with_span(kind, e.span)
}

/// True iff the body of every abstraction (and of every recursive function)
/// is syntactically a signed expression.
pub fn is_standard(e: &Expr) -> bool {
    let mut ok = true;
    e.walk(&mut |node| match &node.kind {
        ExprKind::Lam { body, .. } | ExprKind::LetRec { body, .. }
            if !matches!(body.kind, ExprKind::Signs(..)) =>
        {
            ok = false;
        }
        _ => {}
    });
    ok
}

/// True iff `e` contains no `check p` and no `test p` node for this
/// particular `p`. Checks and tests of other privileges are allowed.
pub fn is_p_pure(e: &Expr, p: &Privilege) -> bool {
    let mut pure = true;
    e.walk(&mut |node| match &node.kind {
        ExprKind::Check(q, _) | ExprKind::Test(q, _, _) if q == p => pure = false,
        _ => {}
    });
    pure
}

/// True iff `e` contains no `test` node at all.
pub fn is_test_free(e: &Expr) -> bool {
    let mut free = true;
    e.walk(&mut |node| {
        if matches!(node.kind, ExprKind::Test(..)) {
            free = false;
        }
    });
    free
}

/// Syntactic values: boolean literals, constants, variables, abstractions.
pub fn is_value(e: &Expr) -> bool {
    matches!(
        e.kind,
        ExprKind::True
            | ExprKind::False
            | ExprKind::Const(_)
            | ExprKind::Var(_)
            | ExprKind::Lam { .. }
    )
}

/// Free variables of `e`, respecting binders. Builtin constants are not
/// variables and never appear here.
pub fn free_vars(e: &Expr) -> BTreeSet<String> {
    fn go(e: &Expr, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match &e.kind {
            ExprKind::True | ExprKind::False | ExprKind::Const(_) => {}
            ExprKind::Var(x) => {
                if !bound.iter().any(|b| b == x) {
                    out.insert(x.clone());
                }
            }
            ExprKind::If(a, b, c) => {
                go(a, bound, out);
                go(b, bound, out);
                go(c, bound, out);
            }
            ExprKind::Lam { param, body, .. } => {
                bound.push(param.clone());
                go(body, bound, out);
                bound.pop();
            }
            ExprKind::App(a, b) => {
                go(a, bound, out);
                go(b, bound, out);
            }
            ExprKind::LetRec {
                name,
                param,
                body,
                rest,
                ..
            } => {
                bound.push(name.clone());
                bound.push(param.clone());
                go(body, bound, out);
                bound.pop();
                go(rest, bound, out);
                bound.pop();
            }
            ExprKind::Signs(_, b) | ExprKind::DoPriv(_, b) | ExprKind::Check(_, b) => {
                go(b, bound, out)
            }
            ExprKind::Test(_, a, b) => {
                go(a, bound, out);
                go(b, bound, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    go(e, &mut Vec::new(), &mut out);
    out
}

/// Principals and privileges mentioned by an expression, including those in
/// binder annotations.
pub fn mentioned_names(e: &Expr) -> (BTreeSet<Principal>, BTreeSet<Privilege>) {
    fn ann_privs(a: &AnnType, privs: &mut BTreeSet<Privilege>) {
        if let AnnType::Arrow {
            param,
            latent,
            result,
        } = a
        {
            privs.extend(latent.iter().cloned());
            ann_privs(param, privs);
            ann_privs(result, privs);
        }
    }
    let mut principals = BTreeSet::new();
    let mut privs = BTreeSet::new();
    e.walk(&mut |node| match &node.kind {
        ExprKind::Signs(n, _) => {
            principals.insert(n.clone());
        }
        ExprKind::DoPriv(p, _) | ExprKind::Check(p, _) | ExprKind::Test(p, _, _) => {
            privs.insert(p.clone());
        }
        ExprKind::Lam { param_ann, .. } => ann_privs(param_ann, &mut privs),
        ExprKind::LetRec {
            param_ann,
            ret_ann,
            latent,
            ..
        } => {
            privs.extend(latent.iter().cloned());
            ann_privs(param_ann, &mut privs);
            ann_privs(ret_ann, &mut privs);
        }
        _ => {}
    });
    (principals, privs)
}

/// An ordered typing context; later bindings shadow earlier ones.
#[derive(Debug, Clone)]
pub struct Ctx<T> {
    bindings: Vec<(String, T)>,
}

impl<T> Default for Ctx<T> {
    fn default() -> Self {
        Ctx {
            bindings: Vec::new(),
        }
    }
}

impl<T> Ctx<T> {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn lookup(&self, name: &str) -> Option<&T> {
        self.bindings
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn push(&mut self, name: impl Into<String>, value: T) {
        self.bindings.push((name.into(), value));
    }

    pub fn pop(&mut self) {
        self.bindings.pop();
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }
}

/// Context for base typechecking.
pub type TypeCtx = Ctx<Type>;
/// Context for the annotated analysis.
pub type AnnCtx = Ctx<AnnType>;

#[cfg(test)]
mod tests {
    use super::*;

    fn p(name: &str) -> Privilege {
        Privilege::new(name)
    }

    fn n(name: &str) -> Principal {
        Principal::new(name)
    }

    #[test]
    fn ident_rule() {
        assert!(is_valid_ident("user"));
        assert!(is_valid_ident("_x1"));
        assert!(!is_valid_ident(""));
        assert!(!is_valid_ident("1x"));
        assert!(!is_valid_ident("a-b"));
    }

    #[test]
    fn standard_signed_lambda_body() {
        let e = Expr::lam("x", AnnType::Bool, Expr::signs(n("n"), Expr::var("x")));
        assert!(is_standard(&e));
    }

    #[test]
    fn standard_rejects_unsigned_body() {
        let e = Expr::lam("x", AnnType::Bool, Expr::var("x"));
        assert!(!is_standard(&e));
    }

    #[test]
    fn standard_vacuous_without_abstractions() {
        assert!(is_standard(&Expr::lit(true)));
    }

    #[test]
    fn p_purity_ignores_other_privileges() {
        let e = Expr::check(p("q"), Expr::lit(true));
        assert!(is_p_pure(&e, &p("p")));
    }

    #[test]
    fn p_purity_rejects_test_of_p() {
        let e = Expr::test(p("p"), Expr::lit(true), Expr::lit(true));
        assert!(!is_p_pure(&e, &p("p")));
    }

    #[test]
    fn p_purity_allows_dopriv_of_p() {
        let e = Expr::dopriv(p("p"), Expr::lit(true));
        assert!(is_p_pure(&e, &p("p")));
    }

    #[test]
    fn free_vars_identity_closed() {
        let e = Expr::lam("x", AnnType::Bool, Expr::var("x"));
        assert!(free_vars(&e).is_empty());
    }

    #[test]
    fn free_vars_application() {
        let e = Expr::app(Expr::var("f"), Expr::var("x"));
        let fv = free_vars(&e);
        assert_eq!(fv.into_iter().collect::<Vec<_>>(), vec!["f", "x"]);
    }

    #[test]
    fn free_vars_letrec_binds_self() {
        // letrec f (x:bool):bool!{} = sign n { f x } in f
        let e = Expr::letrec(
            "f",
            "x",
            AnnType::Bool,
            AnnType::Bool,
            PrivSet::new(),
            Expr::signs(n("n"), Expr::app(Expr::var("f"), Expr::var("x"))),
            Expr::var("f"),
        );
        assert!(free_vars(&e).is_empty());
    }

    #[test]
    fn expr_equality_ignores_spans() {
        let a = Expr::with_span(ExprKind::True, Span::new(1, 1, 1, 5));
        let b = Expr::lit(true);
        assert_eq!(a, b);
    }

    #[test]
    fn ann_type_display_parenthesizes_arrow_params() {
        let inner = AnnType::arrow(AnnType::Bool, [p("p")].into_iter().collect(), AnnType::Bool);
        let t = AnnType::arrow(inner, PrivSet::new(), AnnType::Bool);
        assert_eq!(t.to_string(), "(bool-{p}->bool)-{}->bool");
    }

    #[test]
    fn erase_drops_annotations() {
        let t = AnnType::arrow(AnnType::Bool, [p("p")].into_iter().collect(), AnnType::Bool);
        assert_eq!(t.erase(), Type::arrow(Type::Bool, Type::Bool));
    }
}
