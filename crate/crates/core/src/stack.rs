//! The lazy stack-inspection interpreter. Each frame records the principal
//! that signed the running code and the privileges explicitly enabled in
//! that frame; `check` walks the stack on demand.

use std::fmt;
use std::rc::Rc;

use crate::acl::Acl;
use crate::builtins::{BuiltinFun, BuiltinMeaning};
use crate::eager::Outcome;
use crate::env::Env;
use crate::syntax::{Expr, ExprKind, Principal, PrivSet, Privilege};

/// One activation frame: the signing principal and its enabled privileges.
/// Enabling is not filtered through the ACL; `dopriv` asserts a privilege
/// whether or not it is authorized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub owner: Principal,
    pub enabled: PrivSet,
}

impl Frame {
    pub fn new(owner: Principal, enabled: PrivSet) -> Self {
        Frame { owner, enabled }
    }

    pub fn bare(owner: Principal) -> Self {
        Frame {
            owner,
            enabled: PrivSet::new(),
        }
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "<{},{}>",
            self.owner,
            crate::syntax::privset_to_string(&self.enabled)
        )
    }
}

/// A nonempty, persistent stack of frames; the head is the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stack {
    top: Frame,
    below: Option<Rc<Stack>>,
}

impl Stack {
    /// The singleton stack `<n,{}>::nil`.
    pub fn initial(owner: Principal) -> Stack {
        Stack {
            top: Frame::bare(owner),
            below: None,
        }
    }

    pub fn singleton(frame: Frame) -> Stack {
        Stack {
            top: frame,
            below: None,
        }
    }

    /// Builds a stack from frames listed top-first. Panics on empty input.
    pub fn from_frames(frames: impl IntoIterator<Item = Frame>) -> Stack {
        let mut iter = frames.into_iter().collect::<Vec<_>>().into_iter().rev();
        let first = iter.next().expect("a stack needs at least one frame");
        let mut stack = Stack::singleton(first);
        for frame in iter {
            stack = stack.push(frame);
        }
        stack
    }

    pub fn push(&self, frame: Frame) -> Stack {
        Stack {
            top: frame,
            below: Some(Rc::new(self.clone())),
        }
    }

    pub fn top(&self) -> &Frame {
        &self.top
    }

    pub fn below(&self) -> Option<&Stack> {
        self.below.as_deref()
    }

    /// Replaces the top frame by one with `p` also enabled.
    pub fn enable_on_top(&self, p: &Privilege) -> Stack {
        let mut enabled = self.top.enabled.clone();
        enabled.insert(p.clone());
        Stack {
            top: Frame::new(self.top.owner.clone(), enabled),
            below: self.below.clone(),
        }
    }

    /// Frames from top to bottom.
    pub fn frames(&self) -> impl Iterator<Item = &Frame> {
        std::iter::successors(Some(self), |s| s.below()).map(|s| s.top())
    }

    pub fn len(&self) -> usize {
        self.frames().count()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl fmt::Display for Stack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for frame in self.frames() {
            write!(f, "{frame}::")?;
        }
        f.write_str("nil")
    }
}

/// The stack-inspection predicate. A privilege clears the check when some
/// frame enables it, that frame's owner is authorized for it, and so is the
/// owner of every frame from the top down to that frame.
pub fn check_pred(p: &Privilege, s: Option<&Stack>, acl: &Acl) -> bool {
    match s {
        None => false,
        Some(stack) => {
            acl.authorizes(&stack.top.owner, p)
                && (stack.top.enabled.contains(p) || check_pred(p, stack.below(), acl))
        }
    }
}

/// The set of privileges the check predicate grants for `s`. Only
/// privileges authorized for the top frame's owner can qualify, so the ACL
/// row of that owner is the search space.
pub fn privs(s: &Stack, acl: &Acl) -> PrivSet {
    acl.grants(&s.top.owner)
        .iter()
        .filter(|p| check_pred(p, Some(s), acl))
        .cloned()
        .collect()
}

#[derive(Debug, Clone)]
pub enum StackValue {
    Bool(bool),
    Closure(Rc<StackClosure>),
    Builtin {
        fun: &'static BuiltinFun,
        args: Vec<bool>,
    },
}

impl StackValue {
    pub fn as_bool(&self) -> Option<bool> {
        match self {
            StackValue::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

impl PartialEq for StackValue {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (StackValue::Bool(a), StackValue::Bool(b)) => a == b,
            (StackValue::Closure(a), StackValue::Closure(b)) => Rc::ptr_eq(a, b),
            (
                StackValue::Builtin { fun: f1, args: a1 },
                StackValue::Builtin { fun: f2, args: a2 },
            ) => std::ptr::eq(*f1, *f2) && a1 == a2,
            _ => false,
        }
    }
}

/// Unlike its eager counterpart, a stack closure records no owner: the
/// principal on whose behalf the body runs is recovered from the signed
/// body, which is why consistency of the two semantics needs standard
/// expressions.
#[derive(Debug)]
pub struct StackClosure {
    pub env: StackEnv,
    pub param: String,
    pub body: Expr,
    pub self_name: Option<String>,
}

pub type StackEnv = Env<StackValue>;

macro_rules! try_val {
    ($e:expr) => {
        match $e {
            Outcome::Val(v) => v,
            Outcome::SecurityError => return Outcome::SecurityError,
            Outcome::FuelOut => return Outcome::FuelOut,
        }
    };
}

/// Evaluates `e` on stack `s`. Fuel accounting matches the eager
/// interpreter: one unit per application.
pub fn eval_stack(
    e: &Expr,
    s: &Stack,
    env: &StackEnv,
    acl: &Acl,
    fuel: u64,
) -> Outcome<StackValue> {
    let mut fuel = fuel;
    eval(e, s, env, acl, &mut fuel)
}

fn eval(e: &Expr, s: &Stack, env: &StackEnv, acl: &Acl, fuel: &mut u64) -> Outcome<StackValue> {
    match &e.kind {
        ExprKind::True => Outcome::Val(StackValue::Bool(true)),
        ExprKind::False => Outcome::Val(StackValue::Bool(false)),
        ExprKind::Const(name) => Outcome::Val(builtin_value(name)),
        ExprKind::Var(name) => match env.lookup(name) {
            Some(v) => Outcome::Val(v.clone()),
            None => panic!("evaluator invariant broken: unbound variable `{name}`"),
        },
        ExprKind::If(cond, then, els) => {
            let c = try_val!(eval(cond, s, env, acl, fuel));
            match c.as_bool() {
                Some(true) => eval(then, s, env, acl, fuel),
                Some(false) => eval(els, s, env, acl, fuel),
                None => panic!("evaluator invariant broken: non-bool guard"),
            }
        }
        ExprKind::Lam { param, body, .. } => {
            Outcome::Val(StackValue::Closure(Rc::new(StackClosure {
                env: env.clone(),
                param: param.clone(),
                body: (**body).clone(),
                self_name: None,
            })))
        }
        ExprKind::App(fun, arg) => {
            let f = try_val!(eval(fun, s, env, acl, fuel));
            let a = try_val!(eval(arg, s, env, acl, fuel));
            apply(&f, a, s, acl, fuel)
        }
        ExprKind::LetRec {
            name,
            param,
            body,
            rest,
            ..
        } => {
            let closure = StackValue::Closure(Rc::new(StackClosure {
                env: env.clone(),
                param: param.clone(),
                body: (**body).clone(),
                self_name: Some(name.clone()),
            }));
            let env = env.extended(name.clone(), closure);
            eval(rest, s, &env, acl, fuel)
        }
        ExprKind::Signs(owner, body) => {
            let pushed = s.push(Frame::bare(owner.clone()));
            eval(body, &pushed, env, acl, fuel)
        }
        ExprKind::DoPriv(p, body) => {
            let enabled = s.enable_on_top(p);
            eval(body, &enabled, env, acl, fuel)
        }
        ExprKind::Check(p, body) => {
            if check_pred(p, Some(s), acl) {
                eval(body, s, env, acl, fuel)
            } else {
                Outcome::SecurityError
            }
        }
        ExprKind::Test(p, then, els) => {
            if check_pred(p, Some(s), acl) {
                eval(then, s, env, acl, fuel)
            } else {
                eval(els, s, env, acl, fuel)
            }
        }
    }
}

/// Invokes a function value with the caller's current stack.
fn apply(
    f: &StackValue,
    arg: StackValue,
    caller_stack: &Stack,
    acl: &Acl,
    fuel: &mut u64,
) -> Outcome<StackValue> {
    if *fuel == 0 {
        return Outcome::FuelOut;
    }
    *fuel -= 1;
    match f {
        StackValue::Closure(c) => {
            let mut env = c.env.clone();
            if let Some(self_name) = &c.self_name {
                env = env.extended(self_name.clone(), StackValue::Closure(c.clone()));
            }
            let env = env.extended(c.param.clone(), arg);
            eval(&c.body, caller_stack, &env, acl, fuel)
        }
        StackValue::Builtin { fun, args } => {
            let b = arg
                .as_bool()
                .unwrap_or_else(|| panic!("builtin {} applied to non-bool", fun.name));
            let mut args = args.clone();
            args.push(b);
            if args.len() == fun.arity {
                Outcome::Val(StackValue::Bool((fun.apply)(&args)))
            } else {
                Outcome::Val(StackValue::Builtin { fun, args })
            }
        }
        StackValue::Bool(_) => panic!("evaluator invariant broken: applied a boolean"),
    }
}

fn builtin_value(name: &str) -> StackValue {
    let b = crate::builtins::lookup(name)
        .unwrap_or_else(|| panic!("evaluator invariant broken: unknown constant `{name}`"));
    match &b.meaning {
        BuiltinMeaning::Bool(v) => StackValue::Bool(*v),
        BuiltinMeaning::Fun(f) => StackValue::Builtin {
            fun: f,
            args: Vec::new(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acl::parse_acl;
    use crate::parser::parse_expr;

    fn n(name: &str) -> Principal {
        Principal::new(name)
    }

    fn p(name: &str) -> Privilege {
        Privilege::new(name)
    }

    fn ps(names: &[&str]) -> PrivSet {
        names.iter().map(|s| p(s)).collect()
    }

    fn run(src: &str, stack: &Stack, acl: &Acl) -> Outcome<StackValue> {
        let e = parse_expr(src).unwrap();
        eval_stack(&e, stack, &StackEnv::empty(), acl, 1000)
    }

    #[test]
    fn check_fails_on_nil() {
        let acl = parse_acl("root: p w").unwrap();
        assert!(!check_pred(&p("w"), None, &acl));
    }

    #[test]
    fn enabling_frame_must_be_reachable_through_authorized_owners() {
        let acl = parse_acl("user: p\nroot: p w").unwrap();
        // the frame enabling w belongs to user, who is not authorized for it
        let s = Stack::from_frames([Frame::bare(n("root")), Frame::new(n("user"), ps(&["w"]))]);
        assert!(!check_pred(&p("w"), Some(&s), &acl));
    }

    #[test]
    fn authorized_walk_reaches_enabling_frame() {
        let acl = parse_acl("root: p w").unwrap();
        let s = Stack::from_frames([Frame::new(n("root"), ps(&["w"])), Frame::bare(n("root"))]);
        assert!(check_pred(&p("w"), Some(&s), &acl));
    }

    #[test]
    fn top_enabled_privilege_needs_no_deeper_authorization() {
        // The walk stops at the first enabling, authorized frame; frames
        // below it are not consulted.
        let acl = parse_acl("user: p\nroot: p w").unwrap();
        let s = Stack::from_frames([
            Frame::new(n("root"), ps(&["w"])),
            Frame::new(n("user"), ps(&["p"])),
        ]);
        assert!(check_pred(&p("w"), Some(&s), &acl));
        assert_eq!(privs(&s, &acl), ps(&["p", "w"]));
    }

    #[test]
    fn privs_of_bare_frame_is_empty() {
        let acl = parse_acl("root: p w").unwrap();
        let s = Stack::initial(n("root"));
        assert!(privs(&s, &acl).is_empty());
    }

    #[test]
    fn dopriv_enables_even_unauthorized_privileges() {
        let acl = parse_acl("user: p").unwrap();
        let s = Stack::initial(n("user"));
        let o = run("dopriv w { true }", &s, &acl);
        assert_eq!(o, Outcome::Val(StackValue::Bool(true)));
    }

    #[test]
    fn frame_push_law() {
        let acl = parse_acl("user: p\nroot: p w").unwrap();
        let s = Stack::initial(n("n0"));
        let signed = run("sign root { test w { true } else { false } }", &s, &acl);
        let pushed = run(
            "test w { true } else { false }",
            &s.push(Frame::bare(n("root"))),
            &acl,
        );
        assert_eq!(signed, pushed);
    }

    #[test]
    fn enabled_set_law() {
        let acl = parse_acl("root: p w").unwrap();
        let s = Stack::initial(n("root"));
        let lhs = run("dopriv w { check w { true } }", &s, &acl);
        let rhs = run("check w { true }", &s.enable_on_top(&p("w")), &acl);
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn stack_display_is_top_first() {
        let s = Stack::from_frames([Frame::new(n("root"), ps(&["w"])), Frame::bare(n("user"))]);
        assert_eq!(s.to_string(), "<root,{w}>::<user,{}>::nil");
    }
}
