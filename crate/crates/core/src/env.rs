//! Persistent runtime environments shared by both interpreters. Extension
//! is O(1) and never mutates the parent, so closures can capture their
//! environment by a cheap clone.

use std::rc::Rc;

#[derive(Debug)]
pub struct Env<V>(Option<Rc<Node<V>>>);

#[derive(Debug)]
struct Node<V> {
    name: String,
    value: V,
    rest: Env<V>,
}

impl<V> Clone for Env<V> {
    fn clone(&self) -> Self {
        Env(self.0.clone())
    }
}

impl<V> Default for Env<V> {
    fn default() -> Self {
        Env(None)
    }
}

impl<V> Env<V> {
    pub fn empty() -> Self {
        Env(None)
    }

    pub fn extended(&self, name: impl Into<String>, value: V) -> Env<V> {
        Env(Some(Rc::new(Node {
            name: name.into(),
            value,
            rest: self.clone(),
        })))
    }

    /// Innermost binding of `name`, honoring shadowing.
    pub fn lookup(&self, name: &str) -> Option<&V> {
        let mut cur = self;
        while let Some(node) = &cur.0 {
            if node.name == name {
                return Some(&node.value);
            }
            cur = &node.rest;
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn later_bindings_shadow() {
        let env = Env::empty().extended("x", 1).extended("x", 2);
        assert_eq!(env.lookup("x"), Some(&2));
        assert_eq!(env.lookup("y"), None);
    }
}
