//! The eager interpreter: evaluation is parameterized by the current
//! principal and the set of privileges already known to be enabled and
//! authorized, instead of by a stack.
//!
//! Divergence has no finite observation, so evaluation is fuel-bounded:
//! every application costs one unit of fuel, and running out is reported as
//! the distinct outcome `FuelOut`. A security error is the outcome of a
//! failed `check` and nothing else.

use std::rc::Rc;

use crate::acl::Acl;
use crate::builtins::{self, BuiltinFun, BuiltinMeaning};
use crate::env::Env;
use crate::syntax::{Expr, ExprKind, Principal, PrivSet, Privilege};

/// Evaluation result: a proper value, the security error, or fuel
/// exhaustion (the observable stand-in for divergence).
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome<V> {
    Val(V),
    SecurityError,
    FuelOut,
}

impl<V> Outcome<V> {
    pub fn is_security_error(&self) -> bool {
        matches!(self, Outcome::SecurityError)
    }

    pub fn is_fuel_out(&self) -> bool {
        matches!(self, Outcome::FuelOut)
    }
}

#[derive(Debug, Clone)]
pub enum EagerValue {
    Bool(bool),
    Closure(Rc<EagerClosure>),
    /// Partially applied builtin function; arguments are booleans by typing.
    Builtin {
        fun: &'static BuiltinFun,
        args: Vec<bool>,
    },
}

impl EagerValue {
    pub fn as_bool(&self) -> Option<bool> {
        match self {
            EagerValue::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

impl PartialEq for EagerValue {
    /// Booleans compare by value; function values only by identity (their
    /// extensional equality is what the differential harness probes).
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (EagerValue::Bool(a), EagerValue::Bool(b)) => a == b,
            (EagerValue::Closure(a), EagerValue::Closure(b)) => Rc::ptr_eq(a, b),
            (
                EagerValue::Builtin { fun: f1, args: a1 },
                EagerValue::Builtin { fun: f2, args: a2 },
            ) => std::ptr::eq(*f1, *f2) && a1 == a2,
            _ => false,
        }
    }
}

/// A closure captures the principal in force at the abstraction and the
/// defining environment, but not the privilege set: privileges are dynamic
/// and flow in from the call site.
#[derive(Debug)]
pub struct EagerClosure {
    pub owner: Principal,
    pub env: EagerEnv,
    pub param: String,
    pub body: Expr,
    /// For recursive closures, the function's own name.
    pub self_name: Option<String>,
}

pub type EagerEnv = Env<EagerValue>;

/// `P ⊔_n {p}`: adds `p` only when the ACL authorizes it for `n`.
pub fn join_priv(privs: &PrivSet, n: &Principal, p: &Privilege, acl: &Acl) -> PrivSet {
    let mut out = privs.clone();
    if acl.authorizes(n, p) {
        out.insert(p.clone());
    }
    out
}

macro_rules! try_val {
    ($e:expr) => {
        match $e {
            Outcome::Val(v) => v,
            Outcome::SecurityError => return Outcome::SecurityError,
            Outcome::FuelOut => return Outcome::FuelOut,
        }
    };
}

/// Evaluates `e` under principal `n` with privilege set `privs`. `privs` is
/// deliberately not restricted to a subset of the principal's grants.
pub fn eval_eager(
    e: &Expr,
    n: &Principal,
    privs: &PrivSet,
    env: &EagerEnv,
    acl: &Acl,
    fuel: u64,
) -> Outcome<EagerValue> {
    let mut fuel = fuel;
    eval(e, n, privs, env, acl, &mut fuel)
}

fn eval(
    e: &Expr,
    n: &Principal,
    privs: &PrivSet,
    env: &EagerEnv,
    acl: &Acl,
    fuel: &mut u64,
) -> Outcome<EagerValue> {
    match &e.kind {
        ExprKind::True => Outcome::Val(EagerValue::Bool(true)),
        ExprKind::False => Outcome::Val(EagerValue::Bool(false)),
        ExprKind::Const(name) => Outcome::Val(builtin_value(name)),
        ExprKind::Var(name) => match env.lookup(name) {
            Some(v) => Outcome::Val(v.clone()),
            None => panic!("evaluator invariant broken: unbound variable `{name}`"),
        },
        ExprKind::If(cond, then, els) => {
            let c = try_val!(eval(cond, n, privs, env, acl, fuel));
            match c.as_bool() {
                Some(true) => eval(then, n, privs, env, acl, fuel),
                Some(false) => eval(els, n, privs, env, acl, fuel),
                None => panic!("evaluator invariant broken: non-bool guard"),
            }
        }
        ExprKind::Lam { param, body, .. } => {
            Outcome::Val(EagerValue::Closure(Rc::new(EagerClosure {
                owner: n.clone(),
                env: env.clone(),
                param: param.clone(),
                body: (**body).clone(),
                self_name: None,
            })))
        }
        ExprKind::App(fun, arg) => {
            let f = try_val!(eval(fun, n, privs, env, acl, fuel));
            let a = try_val!(eval(arg, n, privs, env, acl, fuel));
            apply(&f, a, privs, acl, fuel)
        }
        ExprKind::LetRec {
            name,
            param,
            body,
            rest,
            ..
        } => {
            let closure = EagerValue::Closure(Rc::new(EagerClosure {
                owner: n.clone(),
                env: env.clone(),
                param: param.clone(),
                body: (**body).clone(),
                self_name: Some(name.clone()),
            }));
            let env = env.extended(name.clone(), closure);
            eval(rest, n, privs, &env, acl, fuel)
        }
        ExprKind::Signs(owner, body) => {
            let restricted: PrivSet = privs.intersection(acl.grants(owner)).cloned().collect();
            eval(body, owner, &restricted, env, acl, fuel)
        }
        ExprKind::DoPriv(p, body) => {
            let joined = join_priv(privs, n, p, acl);
            eval(body, n, &joined, env, acl, fuel)
        }
        ExprKind::Check(p, body) => {
            if privs.contains(p) {
                eval(body, n, privs, env, acl, fuel)
            } else {
                Outcome::SecurityError
            }
        }
        ExprKind::Test(p, then, els) => {
            if privs.contains(p) {
                eval(then, n, privs, env, acl, fuel)
            } else {
                eval(els, n, privs, env, acl, fuel)
            }
        }
    }
}

/// Invokes a function value with the caller's privilege set. Each
/// invocation costs one unit of fuel.
fn apply(
    f: &EagerValue,
    arg: EagerValue,
    caller_privs: &PrivSet,
    acl: &Acl,
    fuel: &mut u64,
) -> Outcome<EagerValue> {
    if *fuel == 0 {
        return Outcome::FuelOut;
    }
    *fuel -= 1;
    match f {
        EagerValue::Closure(c) => {
            let mut env = c.env.clone();
            if let Some(self_name) = &c.self_name {
                env = env.extended(self_name.clone(), EagerValue::Closure(c.clone()));
            }
            let env = env.extended(c.param.clone(), arg);
            eval(&c.body, &c.owner, caller_privs, &env, acl, fuel)
        }
        EagerValue::Builtin { fun, args } => {
            let b = arg
                .as_bool()
                .unwrap_or_else(|| panic!("builtin {} applied to non-bool", fun.name));
            let mut args = args.clone();
            args.push(b);
            if args.len() == fun.arity {
                Outcome::Val(EagerValue::Bool((fun.apply)(&args)))
            } else {
                Outcome::Val(EagerValue::Builtin { fun, args })
            }
        }
        EagerValue::Bool(_) => panic!("evaluator invariant broken: applied a boolean"),
    }
}

pub(crate) fn builtin_value(name: &str) -> EagerValue {
    let b = builtins::lookup(name)
        .unwrap_or_else(|| panic!("evaluator invariant broken: unknown constant `{name}`"));
    match &b.meaning {
        BuiltinMeaning::Bool(v) => EagerValue::Bool(*v),
        BuiltinMeaning::Fun(f) => EagerValue::Builtin {
            fun: f,
            args: Vec::new(),
        },
    }
}
