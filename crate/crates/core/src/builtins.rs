//! Builtin constants of the initial context.
//!
//! The calculus itself has `bool` as its only primitive type, so the strings
//! and system calls of the password scenario are encoded here: string-like
//! tokens (`mypass`, `etcPassword`, `myName`) are opaque constants of type
//! `bool` that denote `true`, and the guarded system call `hwWrite` is a
//! curried constant of type `bool-{}->bool-{}->bool` whose application
//! always succeeds. All builtin meanings are pure: independent of the
//! current principal, privilege set, and stack, and they never raise a
//! security error, so their annotated types carry empty latent sets.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use crate::syntax::{AnnType, PrivSet, Type};

/// A builtin function over booleans, curried in the object language.
pub struct BuiltinFun {
    pub name: &'static str,
    pub arity: usize,
    pub apply: fn(&[bool]) -> bool,
}

impl std::fmt::Debug for BuiltinFun {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BuiltinFun({})", self.name)
    }
}

#[derive(Debug)]
pub enum BuiltinMeaning {
    Bool(bool),
    Fun(&'static BuiltinFun),
}

#[derive(Debug)]
pub struct Builtin {
    pub name: &'static str,
    pub ann: AnnType,
    pub meaning: BuiltinMeaning,
}

impl Builtin {
    pub fn base_type(&self) -> Type {
        self.ann.erase()
    }
}

static HW_WRITE: BuiltinFun = BuiltinFun {
    name: "hwWrite",
    arity: 2,
    apply: |_args| true,
};

fn curried_bool_fun(arity: usize) -> AnnType {
    let mut t = AnnType::Bool;
    for _ in 0..arity {
        t = AnnType::arrow(AnnType::Bool, PrivSet::new(), t);
    }
    t
}

fn table() -> &'static BTreeMap<&'static str, Builtin> {
    static TABLE: OnceLock<BTreeMap<&'static str, Builtin>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut m = BTreeMap::new();
        m.insert(
            "hwWrite",
            Builtin {
                name: "hwWrite",
                ann: curried_bool_fun(2),
                meaning: BuiltinMeaning::Fun(&HW_WRITE),
            },
        );
        for name in ["mypass", "etcPassword", "myName"] {
            m.insert(
                name,
                Builtin {
                    name,
                    ann: AnnType::Bool,
                    meaning: BuiltinMeaning::Bool(true),
                },
            );
        }
        m
    })
}

/// Looks up a builtin constant by name.
pub fn lookup(name: &str) -> Option<&'static Builtin> {
    table().get(name)
}

pub fn is_builtin(name: &str) -> bool {
    lookup(name).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hw_write_is_binary() {
        let b = lookup("hwWrite").unwrap();
        assert_eq!(
            b.base_type(),
            Type::arrow(Type::Bool, Type::arrow(Type::Bool, Type::Bool))
        );
        match &b.meaning {
            BuiltinMeaning::Fun(f) => assert_eq!(f.arity, 2),
            _ => panic!("expected function meaning"),
        }
    }

    #[test]
    fn string_tokens_are_bool_constants() {
        for name in ["mypass", "etcPassword", "myName"] {
            let b = lookup(name).unwrap();
            assert_eq!(b.ann, AnnType::Bool);
        }
        assert!(lookup("unknown").is_none());
    }
}
