//! Deterministic random generation of closed well-typed terms, ACLs, and
//! stacks for the differential harness. Generation is a function of the
//! seed: the same config yields the same term on every run.
//!
//! Binder annotations are synthesized with randomly chosen latent sets, so
//! generated terms always typecheck at base types but may or may not pass
//! the safety analysis; the safety suite quantifies only over analysis
//! successes.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::acl::Acl;
use crate::stack::{Frame, Stack};
use crate::syntax::{AnnType, Expr, Principal, PrivSet, Privilege, Type};

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_depth: u32,
    pub n_principals: u32,
    pub n_privileges: u32,
    /// Wrap every abstraction body in a signs node.
    pub standard_only: bool,
    /// Never emit a test node.
    pub test_free_only: bool,
    pub seed: u64,
    pub fuel: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_depth: 6,
            n_principals: 3,
            n_privileges: 4,
            standard_only: false,
            test_free_only: false,
            seed: 0x5ec_ca1c,
            fuel: 10_000,
        }
    }
}

impl GenConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn standard(mut self) -> Self {
        self.standard_only = true;
        self
    }

    pub fn test_free(mut self) -> Self {
        self.test_free_only = true;
        self
    }

    /// The principal universe `n0 .. n{k-1}`.
    pub fn principals(&self) -> Vec<Principal> {
        (0..self.n_principals)
            .map(|i| Principal::new(format!("n{i}")))
            .collect()
    }

    /// The privilege universe `p0 .. p{k-1}`. Kept small enough that a full
    /// powerset sweep is cheap.
    pub fn privileges(&self) -> Vec<Privilege> {
        assert!(
            self.n_privileges <= 10,
            "privilege universe too large for sweeps"
        );
        (0..self.n_privileges)
            .map(|i| Privilege::new(format!("p{i}")))
            .collect()
    }
}

/// Mixes a case index into a master seed.
pub fn mix_seed(seed: u64, case: u64) -> u64 {
    let mut x = seed ^ case.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub struct TermGen {
    rng: ChaCha8Rng,
    principals: Vec<Principal>,
    privileges: Vec<Privilege>,
    standard_only: bool,
    test_free_only: bool,
    max_depth: u32,
    scope: Vec<(String, Type)>,
    fresh: u32,
}

// production tags for the weighted choice
const P_LIT: u8 = 0;
const P_VAR: u8 = 1;
const P_IF: u8 = 2;
const P_APP: u8 = 3;
const P_LAM: u8 = 4;
const P_LETREC: u8 = 5;
const P_SIGNS: u8 = 6;
const P_DOPRIV: u8 = 7;
const P_CHECK: u8 = 8;
const P_TEST: u8 = 9;

impl TermGen {
    pub fn new(cfg: &GenConfig) -> Self {
        assert!(
            cfg.n_principals >= 1 && cfg.n_privileges >= 1,
            "universes must be nonempty"
        );
        TermGen {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            principals: cfg.principals(),
            privileges: cfg.privileges(),
            standard_only: cfg.standard_only,
            test_free_only: cfg.test_free_only,
            max_depth: cfg.max_depth,
            scope: Vec::new(),
            fresh: 0,
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn principal(&mut self) -> Principal {
        self.principals[self.rng.gen_range(0..self.principals.len())].clone()
    }

    pub fn privilege(&mut self) -> Privilege {
        self.privileges[self.rng.gen_range(0..self.privileges.len())].clone()
    }

    /// A privilege other than `avoid`, when the universe allows one.
    pub fn privilege_avoiding(&mut self, avoid: &Privilege) -> Option<Privilege> {
        let others: Vec<_> = self
            .privileges
            .iter()
            .filter(|p| *p != avoid)
            .cloned()
            .collect();
        if others.is_empty() {
            None
        } else {
            Some(others[self.rng.gen_range(0..others.len())].clone())
        }
    }

    /// Uniform subset of the privilege universe.
    pub fn privilege_subset(&mut self) -> PrivSet {
        let mut out = PrivSet::new();
        for p in self.privileges.clone() {
            if self.rng.gen_bool(0.5) {
                out.insert(p);
            }
        }
        out
    }

    /// Small latent set for synthesized annotations, biased toward empty.
    fn latent_set(&mut self) -> PrivSet {
        if self.rng.gen_bool(0.55) {
            return PrivSet::new();
        }
        let size = self
            .rng
            .gen_range(1..=2usize.min(self.privileges.len().max(1)));
        let mut out = PrivSet::new();
        while out.len() < size {
            out.insert(self.privilege());
        }
        out
    }

    /// Random grants: every (principal, privilege) pair enters with
    /// probability one half.
    pub fn acl(&mut self) -> Acl {
        let mut acl = Acl::new();
        for n in self.principals.clone() {
            for p in self.privileges.clone() {
                if self.rng.gen_bool(0.5) {
                    acl.grant(n.clone(), p);
                }
            }
        }
        acl
    }

    /// A stack of up to `max_len` frames with arbitrary enabled sets,
    /// including privileges the owner is not authorized for.
    pub fn stack(&mut self, max_len: usize) -> Stack {
        let len = self.rng.gen_range(1..=max_len.max(1));
        let frames: Vec<Frame> = (0..len)
            .map(|_| {
                let owner = self.principal();
                let enabled = self.privilege_subset();
                Frame::new(owner, enabled)
            })
            .collect();
        Stack::from_frames(frames)
    }

    /// A fresh identifier, also used by the rule-instantiation suites when
    /// they build binders by hand.
    pub fn fresh_name(&mut self) -> String {
        let name = format!("x{}", self.fresh);
        self.fresh += 1;
        name
    }

    /// A literal lambda of type `t1 -> t2` with an all-empty-latent
    /// annotation; with `standard`, its body is signs-wrapped.
    pub fn value_fun(&mut self, t1: &Type, t2: &Type, depth: u32, standard: bool) -> Expr {
        let param = self.fresh_name();
        self.scope.push((param.clone(), t1.clone()));
        let body_core = self.expr(t2, depth);
        self.scope.pop();
        let body = if standard {
            Expr::signs(self.principal(), body_core)
        } else {
            body_core
        };
        Expr::lam(param, plain_ann(t1), body)
    }

    fn fresh_var(&mut self) -> String {
        self.fresh_name()
    }

    fn decorate(&mut self, t: &Type) -> AnnType {
        match t {
            Type::Bool => AnnType::Bool,
            Type::Arrow(a, b) => {
                let param = self.decorate(a);
                let latent = self.latent_set();
                let result = self.decorate(b);
                AnnType::arrow(param, latent, result)
            }
        }
    }

    fn vars_of(&self, t: &Type) -> Vec<String> {
        self.scope
            .iter()
            .filter(|(_, ty)| ty == t)
            .map(|(n, _)| n.clone())
            .collect()
    }

    /// A closed expression of `target` type at the configured depth.
    pub fn closed_expr(&mut self, target: &Type) -> Expr {
        debug_assert!(self.scope.is_empty());
        let depth = self.max_depth;
        self.expr(target, depth)
    }

    /// An expression of `target` type in an ambient scope, used by the rule
    /// instantiation suites.
    pub fn open_expr(&mut self, scope: &[(String, Type)], target: &Type, depth: u32) -> Expr {
        let saved = self.scope.len();
        self.scope.extend(scope.iter().cloned());
        let e = self.expr(target, depth);
        self.scope.truncate(saved);
        e
    }

    /// An abstraction body: signs-wrapped when generating standard terms.
    fn binder_body(&mut self, target: &Type, depth: u32) -> Expr {
        if self.standard_only {
            let owner = self.principal();
            Expr::signs(owner, self.expr(target, depth))
        } else {
            self.expr(target, depth)
        }
    }

    fn leaf(&mut self, target: &Type) -> Expr {
        match target {
            Type::Bool => {
                let vars = self.vars_of(target);
                if !vars.is_empty() && self.rng.gen_bool(0.5) {
                    Expr::var(vars[self.rng.gen_range(0..vars.len())].clone())
                } else {
                    Expr::lit(self.rng.gen_bool(0.5))
                }
            }
            Type::Arrow(t1, t2) => {
                let vars = self.vars_of(target);
                if !vars.is_empty() && self.rng.gen_bool(0.4) {
                    return Expr::var(vars[self.rng.gen_range(0..vars.len())].clone());
                }
                let param = self.fresh_var();
                let ann = self.decorate(t1);
                self.scope.push((param.clone(), (**t1).clone()));
                let body = self.binder_body(&(**t2).clone(), 0);
                self.scope.pop();
                Expr::lam(param, ann, body)
            }
        }
    }

    fn expr(&mut self, target: &Type, depth: u32) -> Expr {
        if depth == 0 {
            return self.leaf(target);
        }
        let have_var = !self.vars_of(target).is_empty();
        let mut choices: Vec<(u32, u8)> = match target {
            Type::Bool => vec![
                (12, P_LIT),
                (10, P_VAR),
                (13, P_IF),
                (14, P_APP),
                (6, P_LETREC),
                (13, P_SIGNS),
                (9, P_DOPRIV),
                (12, P_CHECK),
                (11, P_TEST),
            ],
            Type::Arrow(..) => vec![
                (40, P_LAM),
                (8, P_VAR),
                (10, P_IF),
                (6, P_APP),
                (4, P_LETREC),
                (10, P_SIGNS),
                (6, P_DOPRIV),
                (8, P_CHECK),
                (8, P_TEST),
            ],
        };
        choices.retain(|(_, tag)| match *tag {
            P_VAR => have_var,
            P_TEST => !self.test_free_only,
            _ => true,
        });
        let total: u32 = choices.iter().map(|(w, _)| w).sum();
        let mut roll = self.rng.gen_range(0..total);
        let mut tag = choices[0].1;
        for (w, t) in &choices {
            if roll < *w {
                tag = *t;
                break;
            }
            roll -= w;
        }
        match tag {
            P_LIT => Expr::lit(self.rng.gen_bool(0.5)),
            P_VAR => {
                let vars = self.vars_of(target);
                Expr::var(vars[self.rng.gen_range(0..vars.len())].clone())
            }
            P_IF => {
                let c = self.expr(&Type::Bool, depth - 1);
                let t = self.expr(target, depth - 1);
                let f = self.expr(target, depth - 1);
                Expr::if_(c, t, f)
            }
            P_APP => {
                let arg_ty = if self.rng.gen_bool(0.75) {
                    Type::Bool
                } else {
                    Type::arrow(Type::Bool, Type::Bool)
                };
                let fun_ty = Type::arrow(arg_ty.clone(), target.clone());
                let f = self.expr(&fun_ty, depth - 1);
                let a = self.expr(&arg_ty, depth - 1);
                Expr::app(f, a)
            }
            P_LAM => {
                let Type::Arrow(t1, t2) = target else {
                    unreachable!()
                };
                let param = self.fresh_var();
                let ann = self.decorate(t1);
                self.scope.push((param.clone(), (**t1).clone()));
                let body = self.binder_body(&(**t2).clone(), depth - 1);
                self.scope.pop();
                Expr::lam(param, ann, body)
            }
            P_LETREC => {
                let t1 = if self.rng.gen_bool(0.8) {
                    Type::Bool
                } else {
                    Type::arrow(Type::Bool, Type::Bool)
                };
                let t2 = if self.rng.gen_bool(0.85) {
                    Type::Bool
                } else {
                    Type::arrow(Type::Bool, Type::Bool)
                };
                let fname = self.fresh_var();
                let param = self.fresh_var();
                let param_ann = self.decorate(&t1);
                let ret_ann = self.decorate(&t2);
                let latent = self.latent_set();
                let fun_ty = Type::arrow(t1.clone(), t2.clone());
                self.scope.push((fname.clone(), fun_ty));
                self.scope.push((param.clone(), t1));
                let body = self.binder_body(&t2, depth - 1);
                self.scope.pop();
                let rest = self.expr(target, depth - 1);
                self.scope.pop();
                Expr::letrec(fname, param, param_ann, ret_ann, latent, body, rest)
            }
            P_SIGNS => {
                let owner = self.principal();
                Expr::signs(owner, self.expr(target, depth - 1))
            }
            P_DOPRIV => {
                let p = self.privilege();
                Expr::dopriv(p, self.expr(target, depth - 1))
            }
            P_CHECK => {
                let p = self.privilege();
                Expr::check(p, self.expr(target, depth - 1))
            }
            P_TEST => {
                let p = self.privilege();
                let t = self.expr(target, depth - 1);
                let f = self.expr(target, depth - 1);
                Expr::test(p, t, f)
            }
            _ => unreachable!(),
        }
    }
}

/// A closed, base-typechecking expression of the target type, deterministic
/// in the config's seed.
pub fn gen_expr(cfg: &GenConfig, target: &Type) -> Expr {
    TermGen::new(cfg).closed_expr(target)
}

/// The annotation with empty latent sets whose erasure is `t`.
pub fn plain_ann(t: &Type) -> AnnType {
    match t {
        Type::Bool => AnnType::Bool,
        Type::Arrow(a, b) => AnnType::arrow(plain_ann(a), PrivSet::new(), plain_ann(b)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{is_standard, is_test_free, TypeCtx};
    use crate::typecheck::typecheck;

    #[test]
    fn depth_zero_yields_literals() {
        for seed in 0..20 {
            let cfg = GenConfig {
                max_depth: 0,
                ..GenConfig::default()
            }
            .with_seed(seed);
            let e = gen_expr(&cfg, &Type::Bool);
            assert!(matches!(
                e.kind,
                crate::syntax::ExprKind::True | crate::syntax::ExprKind::False
            ));
        }
    }

    #[test]
    fn generated_terms_typecheck() {
        for seed in 0..300 {
            let cfg = GenConfig::default().with_seed(seed);
            let e = gen_expr(&cfg, &Type::Bool);
            let t =
                typecheck(&TypeCtx::empty(), &e).unwrap_or_else(|err| panic!("seed {seed}: {err}"));
            assert_eq!(t, Type::Bool);
        }
    }

    #[test]
    fn arrow_targets_typecheck_too() {
        let target = Type::arrow(Type::Bool, Type::Bool);
        for seed in 0..100 {
            let cfg = GenConfig::default().with_seed(seed);
            let e = gen_expr(&cfg, &target);
            assert_eq!(typecheck(&TypeCtx::empty(), &e).unwrap(), target);
        }
    }

    #[test]
    fn standard_flag_holds_for_all_seeds() {
        for seed in 0..200 {
            let cfg = GenConfig::default().standard().with_seed(seed);
            assert!(is_standard(&gen_expr(&cfg, &Type::Bool)), "seed {seed}");
        }
    }

    #[test]
    fn test_free_flag_holds_for_all_seeds() {
        for seed in 0..200 {
            let cfg = GenConfig::default().test_free().with_seed(seed);
            assert!(is_test_free(&gen_expr(&cfg, &Type::Bool)), "seed {seed}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GenConfig::default().with_seed(7);
        assert_eq!(gen_expr(&cfg, &Type::Bool), gen_expr(&cfg, &Type::Bool));
    }

    #[test]
    fn mix_seed_separates_cases() {
        assert_ne!(mix_seed(1, 0), mix_seed(1, 1));
        assert_eq!(mix_seed(1, 5), mix_seed(1, 5));
    }
}
