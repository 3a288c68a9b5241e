//! The access control list: a total map from principals to the privilege
//! sets they are authorized for. Unmapped principals get the empty set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

use crate::syntax::{is_valid_ident, mentioned_names, Expr, Principal, PrivSet, Privilege};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Acl {
    grants: BTreeMap<Principal, PrivSet>,
}

fn empty_privset() -> &'static PrivSet {
    static EMPTY: OnceLock<PrivSet> = OnceLock::new();
    EMPTY.get_or_init(PrivSet::new)
}

impl Acl {
    pub fn new() -> Self {
        Acl::default()
    }

    pub fn from_grants(grants: impl IntoIterator<Item = (Principal, PrivSet)>) -> Self {
        let mut acl = Acl::new();
        for (n, ps) in grants {
            acl.grant_all(n, ps);
        }
        acl
    }

    /// Adds `p` to the grants of `n`.
    pub fn grant(&mut self, n: Principal, p: Privilege) {
        self.grants.entry(n).or_default().insert(p);
    }

    pub fn grant_all(&mut self, n: Principal, ps: impl IntoIterator<Item = Privilege>) {
        self.grants.entry(n).or_default().extend(ps);
    }

    /// The privilege set of `n`; the empty set for unmapped principals.
    pub fn grants(&self, n: &Principal) -> &PrivSet {
        self.grants.get(n).unwrap_or_else(|| empty_privset())
    }

    pub fn authorizes(&self, n: &Principal, p: &Privilege) -> bool {
        self.grants(n).contains(p)
    }

    /// Principals with an explicit entry.
    pub fn principals(&self) -> impl Iterator<Item = &Principal> {
        self.grants.keys()
    }

    /// All privileges granted to anyone.
    pub fn privileges(&self) -> BTreeSet<Privilege> {
        self.grants
            .values()
            .flat_map(|ps| ps.iter().cloned())
            .collect()
    }
}

impl fmt::Display for Acl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, ps) in &self.grants {
            write!(f, "{n} :")?;
            for p in ps {
                write!(f, " {p}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {msg}")]
pub struct AclParseError {
    pub line: u32,
    pub msg: String,
}

/// Parses an ACL file: one `principal : priv priv ...` line per grant,
/// `#` comments, blank lines ignored. Duplicate principal lines merge by
/// union.
pub fn parse_acl(source: &str) -> Result<Acl, AclParseError> {
    let mut acl = Acl::new();
    for (idx, raw) in source.lines().enumerate() {
        let lineno = idx as u32 + 1;
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        if line.trim().is_empty() {
            continue;
        }
        let (name, rest) = line.split_once(':').ok_or_else(|| AclParseError {
            line: lineno,
            msg: "expected `principal : priv priv ...`".to_string(),
        })?;
        let name = name.trim();
        if !is_valid_ident(name) {
            return Err(AclParseError {
                line: lineno,
                msg: format!("invalid principal name {name:?}"),
            });
        }
        let mut privs = PrivSet::new();
        for word in rest.split_whitespace() {
            if !is_valid_ident(word) {
                return Err(AclParseError {
                    line: lineno,
                    msg: format!("invalid privilege name {word:?}"),
                });
            }
            privs.insert(Privilege::new(word));
        }
        acl.grant_all(Principal::new(name), privs);
    }
    Ok(acl)
}

/// The finite principal and privilege universes of a run: everything
/// mentioned by the programs under consideration plus everything in the ACL.
#[derive(Debug, Clone, Default)]
pub struct Universe {
    pub principals: BTreeSet<Principal>,
    pub privileges: BTreeSet<Privilege>,
}

impl Universe {
    pub fn new() -> Self {
        Universe::default()
    }

    pub fn add_expr(&mut self, e: &Expr) -> &mut Self {
        let (ns, ps) = mentioned_names(e);
        self.principals.extend(ns);
        self.privileges.extend(ps);
        self
    }

    pub fn add_acl(&mut self, acl: &Acl) -> &mut Self {
        self.principals.extend(acl.principals().cloned());
        self.privileges.extend(acl.privileges());
        self
    }

    pub fn add_principal(&mut self, n: Principal) -> &mut Self {
        self.principals.insert(n);
        self
    }

    pub fn add_privileges(&mut self, ps: impl IntoIterator<Item = Privilege>) -> &mut Self {
        self.privileges.extend(ps);
        self
    }

    /// Ensures both universes are nonempty so sweeps have something to range
    /// over.
    pub fn or_default(mut self) -> Self {
        if self.principals.is_empty() {
            self.principals.insert(Principal::new("n0"));
        }
        self
    }

    /// All subsets of the privilege universe. Panics if the universe has more
    /// than 10 privileges; sweeps are meant for desk-scale universes.
    pub fn privilege_subsets(&self) -> Vec<PrivSet> {
        let privs: Vec<&Privilege> = self.privileges.iter().collect();
        assert!(
            privs.len() <= 10,
            "privilege universe too large for exhaustive sweep"
        );
        let mut out = Vec::with_capacity(1 << privs.len());
        for mask in 0u32..(1 << privs.len()) {
            let mut set = PrivSet::new();
            for (i, p) in privs.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    set.insert((*p).clone());
                }
            }
            out.push(set);
        }
        out
    }

    /// All supersets of `base` within the privilege universe.
    pub fn supersets_of(&self, base: &PrivSet) -> Vec<PrivSet> {
        let extra: Vec<&Privilege> = self
            .privileges
            .iter()
            .filter(|p| !base.contains(*p))
            .collect();
        assert!(
            extra.len() <= 10,
            "privilege universe too large for exhaustive sweep"
        );
        let mut out = Vec::with_capacity(1 << extra.len());
        for mask in 0u32..(1 << extra.len()) {
            let mut set = base.clone();
            for (i, p) in extra.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    set.insert((*p).clone());
                }
            }
            out.push(set);
        }
        out
    }
}

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
    fn password_example_grants() {
        let acl = parse_acl("user: p\nroot: p w").unwrap();
        assert_eq!(acl.grants(&n("user")), &[p("p")].into_iter().collect());
        assert_eq!(
            acl.grants(&n("root")),
            &[p("p"), p("w")].into_iter().collect()
        );
    }

    #[test]
    fn empty_source_means_empty_lookups() {
        let acl = parse_acl("").unwrap();
        assert!(acl.grants(&n("anyone")).is_empty());
    }

    #[test]
    fn duplicate_lines_merge_by_union() {
        let acl = parse_acl("a: x\na: y").unwrap();
        assert_eq!(acl.grants(&n("a")), &[p("x"), p("y")].into_iter().collect());
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let acl = parse_acl("# header\n\nuser : p # trailing\n").unwrap();
        assert_eq!(acl.grants(&n("user")), &[p("p")].into_iter().collect());
    }

    #[test]
    fn malformed_line_reports_position() {
        let err = parse_acl("user p w").unwrap_err();
        assert_eq!(err.line, 1);
    }

    #[test]
    fn privilege_subsets_count() {
        let mut u = Universe::new();
        u.add_privileges([p("a"), p("b"), p("c")]);
        assert_eq!(u.privilege_subsets().len(), 8);
        assert_eq!(u.supersets_of(&[p("a")].into_iter().collect()).len(), 4);
    }
}
