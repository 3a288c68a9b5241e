//! Differential oracles: consistency of the two interpreters, extensional
//! equality of rewrite-rule sides over exhaustive (principal, privilege-set)
//! sweeps, the safety guarantee of the analysis, and erasure preservation.
//!
//! Fuel exhaustion on either side of a comparison makes the case
//! inconclusive, never a failure: divergence has no finite observation, so
//! two slow-but-equal computations and two divergent ones look alike.

use std::fmt;

use rand::Rng;
use serde::Serialize;

use crate::acl::{Acl, Universe};
use crate::analysis::{analyze, safe_for};
use crate::eager::{eval_eager, EagerEnv, EagerValue, Outcome};
use crate::gen::{mix_seed, plain_ann, GenConfig, TermGen};
use crate::pretty::pretty;
use crate::rewrite::{EqualityMode, RuleName};
use crate::stack::{eval_stack, privs, Stack, StackEnv, StackValue};
use crate::syntax::{
    is_p_pure, is_standard, map_children, privset_to_string, Expr, Principal, PrivSet, Type,
    TypeCtx,
};
use crate::typecheck::typecheck;

/// Runs `f` on a worker thread with a large stack. Fuel-bounded evaluation
/// can nest thousands of interpreter frames before fuel runs out, which
/// overflows default thread stacks.
pub fn with_big_stack<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    std::thread::scope(|scope| {
        std::thread::Builder::new()
            .stack_size(256 * 1024 * 1024)
            .spawn_scoped(scope, f)
            .expect("failed to spawn evaluation worker")
            .join()
            .expect("evaluation worker panicked")
    })
}

/// What a bool-typed evaluation looks like from the outside.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Obs {
    Bool(bool),
    Fun,
    Star,
    FuelOut,
}

impl fmt::Display for Obs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Obs::Bool(b) => write!(f, "{b}"),
            Obs::Fun => f.write_str("<fn>"),
            Obs::Star => f.write_str("security-error"),
            Obs::FuelOut => f.write_str("fuel-out"),
        }
    }
}

pub fn obs_eager(o: &Outcome<EagerValue>) -> Obs {
    match o {
        Outcome::Val(v) => v.as_bool().map(Obs::Bool).unwrap_or(Obs::Fun),
        Outcome::SecurityError => Obs::Star,
        Outcome::FuelOut => Obs::FuelOut,
    }
}

pub fn obs_stack(o: &Outcome<StackValue>) -> Obs {
    match o {
        Outcome::Val(v) => v.as_bool().map(Obs::Bool).unwrap_or(Obs::Fun),
        Outcome::SecurityError => Obs::Star,
        Outcome::FuelOut => Obs::FuelOut,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Agree,
    Inconclusive,
    Mismatch,
}

fn compare(a: Obs, b: Obs) -> Verdict {
    if a == Obs::FuelOut || b == Obs::FuelOut {
        Verdict::Inconclusive
    } else if a == b {
        Verdict::Agree
    } else {
        Verdict::Mismatch
    }
}

/// A reproducible counterexample. `privs_or_stack` holds the privilege set
/// for eager-vs-eager comparisons and the stack for eager-vs-stack ones;
/// `stack_or_rhs` holds the other side's outcome.
#[derive(Debug, Clone, Serialize)]
pub struct Mismatch {
    pub program: String,
    pub acl: String,
    pub principal: String,
    pub privs_or_stack: String,
    pub eager: String,
    pub stack_or_rhs: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhs_program: Option<String>,
}

impl Mismatch {
    pub fn to_jsonl(&self) -> String {
        serde_json::to_string(self).expect("mismatch record serializes")
    }
}

#[derive(Debug, Clone, Default)]
pub struct EquivReport {
    pub cases_run: u64,
    pub agreements: u64,
    pub inconclusive: u64,
    pub mismatches: Vec<Mismatch>,
}

impl EquivReport {
    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty()
    }

    pub fn inconclusive_rate(&self) -> f64 {
        if self.cases_run == 0 {
            0.0
        } else {
            self.inconclusive as f64 / self.cases_run as f64
        }
    }

    /// Order-independent combination of two reports.
    pub fn merge(&mut self, other: EquivReport) {
        self.cases_run += other.cases_run;
        self.agreements += other.agreements;
        self.inconclusive += other.inconclusive;
        self.mismatches.extend(other.mismatches);
    }
}

impl fmt::Display for EquivReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "cases={} agreements={} inconclusive={} mismatches={}",
            self.cases_run,
            self.agreements,
            self.inconclusive,
            self.mismatches.len()
        )
    }
}

// ---------------------------------------------------------------------------
// shrinking

fn count_nodes(e: &Expr) -> usize {
    let mut n = 0;
    e.walk(&mut |_| n += 1);
    n
}

/// Replaces the node at pre-order index `idx` by `replacement`.
fn replace_at(e: &Expr, idx: usize, replacement: &Expr) -> Expr {
    fn go(e: &Expr, counter: &std::cell::Cell<usize>, idx: usize, replacement: &Expr) -> Expr {
        let here = counter.get();
        counter.set(here + 1);
        if here == idx {
            // the subtree is skipped, but its node count no longer matters:
            // indices are recomputed per replacement attempt
            return replacement.clone();
        }
        map_children(e, &|c| go(c, counter, idx, replacement))
    }
    go(e, &std::cell::Cell::new(0), idx, replacement)
}

/// One-pass shrinking by subterm replacement with type-correct literals.
/// `still_fails` must also enforce any validity constraints (typing,
/// standardness) the witness is required to keep.
pub fn shrink_expr(e: &Expr, still_fails: &dyn Fn(&Expr) -> bool) -> Expr {
    let mut cur = e.clone();
    let mut idx = 0;
    // one pass over pre-order positions; a successful replacement leaves a
    // literal at the position, so advancing is correct either way
    while idx < count_nodes(&cur) {
        for lit in [Expr::lit(true), Expr::lit(false)] {
            let candidate = replace_at(&cur, idx, &lit);
            if candidate != cur && still_fails(&candidate) {
                cur = candidate;
                break;
            }
        }
        idx += 1;
    }
    cur
}

/// Validity guard used by the shrinkers: closed, bool-typed, and standard
/// when the original was.
fn valid_witness(e: &Expr, must_be_standard: bool) -> bool {
    if must_be_standard && !is_standard(e) {
        return false;
    }
    matches!(typecheck(&TypeCtx::empty(), e), Ok(Type::Bool))
}

// ---------------------------------------------------------------------------
// consistency of the two interpreters

fn consistency_obs(e: &Expr, stack: &Stack, acl: &Acl, fuel: u64) -> (Obs, Obs, PrivSet) {
    let enabled = privs(stack, acl);
    let o_eager = eval_eager(
        e,
        &stack.top().owner,
        &enabled,
        &EagerEnv::empty(),
        acl,
        fuel,
    );
    let o_stack = eval_stack(e, stack, &StackEnv::empty(), acl, fuel);
    (obs_eager(&o_eager), obs_stack(&o_stack), enabled)
}

fn run_consistency_case(
    e: &Expr,
    stack: &Stack,
    acl: &Acl,
    fuel: u64,
    seed: u64,
    report: &mut EquivReport,
) {
    let (oe, os, _) = consistency_obs(e, stack, acl, fuel);
    report.cases_run += 1;
    match compare(oe, os) {
        Verdict::Agree => report.agreements += 1,
        Verdict::Inconclusive => report.inconclusive += 1,
        Verdict::Mismatch => {
            let shrunk = shrink_expr(e, &|cand| {
                if !valid_witness(cand, true) {
                    return false;
                }
                let (a, b, _) = consistency_obs(cand, stack, acl, fuel);
                compare(a, b) == Verdict::Mismatch
            });
            let (oe2, os2, enabled) = consistency_obs(&shrunk, stack, acl, fuel);
            report.mismatches.push(Mismatch {
                program: pretty(&shrunk),
                acl: acl.to_string(),
                principal: stack.top().owner.to_string(),
                privs_or_stack: format!("{stack} privs={}", privset_to_string(&enabled)),
                eager: oe2.to_string(),
                stack_or_rhs: os2.to_string(),
                seed,
                rhs_program: None,
            });
        }
    }
}

fn consistency_stack(g: &mut TermGen, case: u64) -> Stack {
    // every eighth case starts from the designated initial stack
    if case.is_multiple_of(8) {
        Stack::initial(Principal::new("n0"))
    } else {
        g.stack(4)
    }
}

/// Compares the stack interpreter against the eager interpreter primed with
/// the stack's granted privileges, over generated standard expressions and
/// sampled stacks, against a fixed ACL.
pub fn diff_consistency(cfg: &GenConfig, acl: &Acl, cases: u64) -> EquivReport {
    assert!(
        cfg.standard_only,
        "consistency holds for standard expressions only"
    );
    with_big_stack(|| {
        let mut report = EquivReport::default();
        for i in 0..cases {
            let seed = mix_seed(cfg.seed, i);
            let mut g = TermGen::new(&cfg.clone().with_seed(seed));
            let e = g.closed_expr(&Type::Bool);
            let stack = consistency_stack(&mut g, i);
            run_consistency_case(&e, &stack, acl, cfg.fuel, seed, &mut report);
        }
        report
    })
}

/// As `diff_consistency`, but samples a fresh ACL per case.
pub fn diff_consistency_random_acl(cfg: &GenConfig, cases: u64) -> EquivReport {
    assert!(
        cfg.standard_only,
        "consistency holds for standard expressions only"
    );
    with_big_stack(|| {
        let mut report = EquivReport::default();
        for i in 0..cases {
            let seed = mix_seed(cfg.seed, i);
            let mut g = TermGen::new(&cfg.clone().with_seed(seed));
            let acl = g.acl();
            let e = g.closed_expr(&Type::Bool);
            let stack = consistency_stack(&mut g, i);
            run_consistency_case(&e, &stack, &acl, cfg.fuel, seed, &mut report);
        }
        report
    })
}

// ---------------------------------------------------------------------------
// extensional equality of two closed bool expressions

/// Sweeps every principal in the universe of `e1`, `e2` and the ACL, and
/// every privilege subset (restricted mode: only subsets of the principal's
/// grants), comparing eager outcomes.
pub fn verify_equiv(e1: &Expr, e2: &Expr, acl: &Acl, mode: EqualityMode, fuel: u64) -> EquivReport {
    verify_equiv_seeded(e1, e2, acl, mode, fuel, 0)
}

pub fn verify_equiv_seeded(
    e1: &Expr,
    e2: &Expr,
    acl: &Acl,
    mode: EqualityMode,
    fuel: u64,
    seed: u64,
) -> EquivReport {
    let mut uni = Universe::new();
    uni.add_expr(e1);
    uni.add_expr(e2);
    uni.add_acl(acl);
    let uni = uni.or_default();
    let subsets = uni.privilege_subsets();
    let mut report = EquivReport::default();
    for n in &uni.principals {
        for ps in &subsets {
            if mode == EqualityMode::RestrictedToAcl && !ps.is_subset(acl.grants(n)) {
                continue;
            }
            report.cases_run += 1;
            let o1 = obs_eager(&eval_eager(e1, n, ps, &EagerEnv::empty(), acl, fuel));
            let o2 = obs_eager(&eval_eager(e2, n, ps, &EagerEnv::empty(), acl, fuel));
            match compare(o1, o2) {
                Verdict::Agree => report.agreements += 1,
                Verdict::Inconclusive => report.inconclusive += 1,
                Verdict::Mismatch => report.mismatches.push(Mismatch {
                    program: pretty(e1),
                    acl: acl.to_string(),
                    principal: n.to_string(),
                    privs_or_stack: privset_to_string(ps),
                    eager: o1.to_string(),
                    stack_or_rhs: o2.to_string(),
                    seed,
                    rhs_program: Some(pretty(e2)),
                }),
            }
        }
    }
    report
}

/// Shrinks both sides of an inequivalent pair, keeping "the sweep still
/// finds a mismatch" invariant. Sides are shrunk independently; the result
/// is a smaller inequivalence witness, not necessarily a rule instance.
pub fn shrink_pair(e1: &Expr, e2: &Expr, acl: &Acl, mode: EqualityMode, fuel: u64) -> (Expr, Expr) {
    let mismatches = |a: &Expr, b: &Expr| !verify_equiv(a, b, acl, mode, fuel).is_clean();
    let s1 = shrink_expr(e1, &|cand| {
        valid_witness(cand, false) && mismatches(cand, e2)
    });
    let s2 = shrink_expr(e2, &|cand| {
        valid_witness(cand, false) && mismatches(&s1, cand)
    });
    (s1, s2)
}

// ---------------------------------------------------------------------------
// safety of the analysis

#[derive(Debug, Clone, Default)]
pub struct SafetyReport {
    /// Generated candidate programs.
    pub attempts: u64,
    /// Programs the analysis accepted.
    pub successes: u64,
    /// Evaluations performed across all privilege supersets.
    pub sweeps: u64,
    pub fuel_outs: u64,
    /// Evaluations that produced a security error despite the guarantee.
    pub violations: Vec<Mismatch>,
}

impl fmt::Display for SafetyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "attempts={} analysis-successes={} sweeps={} fuel-outs={} violations={}",
            self.attempts,
            self.successes,
            self.sweeps,
            self.fuel_outs,
            self.violations.len()
        )
    }
}

/// Generates programs, and for every analysis success `(θ, Π)` evaluates
/// under every privilege superset of Π in the universe: none may raise a
/// security error. Stops after `target_successes` accepted programs or
/// `max_attempts` candidates, whichever comes first.
pub fn fuzz_safety(cfg: &GenConfig, target_successes: u64, max_attempts: u64) -> SafetyReport {
    fuzz_safety_with_acl(cfg, target_successes, max_attempts, None)
}

/// As `fuzz_safety`; with `fixed_acl` the same ACL is used for every case
/// instead of sampling one per case.
pub fn fuzz_safety_with_acl(
    cfg: &GenConfig,
    target_successes: u64,
    max_attempts: u64,
    fixed_acl: Option<&Acl>,
) -> SafetyReport {
    with_big_stack(|| {
        let mut report = SafetyReport::default();
        let mut uni = Universe::new();
        uni.add_privileges(cfg.privileges());
        if let Some(acl) = fixed_acl {
            uni.add_acl(acl);
        }
        for i in 0..max_attempts {
            if report.successes >= target_successes {
                break;
            }
            report.attempts += 1;
            let seed = mix_seed(cfg.seed, i);
            let mut g = TermGen::new(&cfg.clone().with_seed(seed));
            let acl = match fixed_acl {
                Some(acl) => acl.clone(),
                None => g.acl(),
            };
            let entry = g.principal();
            let e = g.closed_expr(&Type::Bool);
            let Ok(result) = analyze(&Default::default(), &entry, &e, &acl) else {
                continue;
            };
            report.successes += 1;
            for ps in uni.supersets_of(&result.required) {
                debug_assert!(safe_for(&result, &ps));
                report.sweeps += 1;
                let o = eval_eager(&e, &entry, &ps, &EagerEnv::empty(), &acl, cfg.fuel);
                match o {
                    Outcome::SecurityError => report.violations.push(Mismatch {
                        program: pretty(&e),
                        acl: acl.to_string(),
                        principal: entry.to_string(),
                        privs_or_stack: privset_to_string(&ps),
                        eager: Obs::Star.to_string(),
                        stack_or_rhs: format!(
                            "analysis pi={}",
                            privset_to_string(&result.required)
                        ),
                        seed,
                        rhs_program: None,
                    }),
                    Outcome::FuelOut => report.fuel_outs += 1,
                    Outcome::Val(_) => {}
                }
            }
        }
        report
    })
}

// ---------------------------------------------------------------------------
// erasure preservation

/// Generates test-free programs; for every analysis success compares the
/// program against its security erasure on every privilege superset of Π.
/// `cases_run` counts swept (program, privilege-set) pairs.
pub fn fuzz_erasure(
    cfg: &GenConfig,
    target_successes: u64,
    max_attempts: u64,
) -> (u64, EquivReport) {
    fuzz_erasure_with_acl(cfg, target_successes, max_attempts, None)
}

/// As `fuzz_erasure`; with `fixed_acl` the same ACL is used for every case.
pub fn fuzz_erasure_with_acl(
    cfg: &GenConfig,
    target_successes: u64,
    max_attempts: u64,
    fixed_acl: Option<&Acl>,
) -> (u64, EquivReport) {
    assert!(
        cfg.test_free_only,
        "erasure is undefined on test expressions"
    );
    with_big_stack(|| {
        let mut successes = 0u64;
        let mut report = EquivReport::default();
        let mut uni = Universe::new();
        uni.add_privileges(cfg.privileges());
        if let Some(acl) = fixed_acl {
            uni.add_acl(acl);
        }
        for i in 0..max_attempts {
            if successes >= target_successes {
                break;
            }
            let seed = mix_seed(cfg.seed, i);
            let mut g = TermGen::new(&cfg.clone().with_seed(seed));
            let acl = match fixed_acl {
                Some(acl) => acl.clone(),
                None => g.acl(),
            };
            let entry = g.principal();
            let e = g.closed_expr(&Type::Bool);
            let Ok(result) = analyze(&Default::default(), &entry, &e, &acl) else {
                continue;
            };
            successes += 1;
            let erased =
                crate::rewrite::erase_security(&e).expect("test-free expressions always erase");
            for ps in uni.supersets_of(&result.required) {
                report.cases_run += 1;
                let o1 = obs_eager(&eval_eager(
                    &e,
                    &entry,
                    &ps,
                    &EagerEnv::empty(),
                    &acl,
                    cfg.fuel,
                ));
                let o2 = obs_eager(&eval_eager(
                    &erased,
                    &entry,
                    &ps,
                    &EagerEnv::empty(),
                    &acl,
                    cfg.fuel,
                ));
                match compare(o1, o2) {
                    Verdict::Agree => report.agreements += 1,
                    Verdict::Inconclusive => report.inconclusive += 1,
                    Verdict::Mismatch => report.mismatches.push(Mismatch {
                        program: pretty(&e),
                        acl: acl.to_string(),
                        principal: entry.to_string(),
                        privs_or_stack: privset_to_string(&ps),
                        eager: o1.to_string(),
                        stack_or_rhs: o2.to_string(),
                        seed,
                        rhs_program: Some(pretty(&erased)),
                    }),
                }
            }
        }
        (successes, report)
    })
}

// ---------------------------------------------------------------------------
// rewrite-rule instantiation

/// Builds one random closed instantiation of a rule's two sides, together
/// with an ACL satisfying the rule's side conditions.
pub fn instantiate_rule(rule: RuleName, g: &mut TermGen, depth: u32) -> (Expr, Expr, Acl) {
    let acl = g.acl();
    match rule {
        RuleName::IfHoist => {
            let p = g.privilege();
            let c = g.open_expr(&[], &Type::Bool, depth);
            let a = g.open_expr(&[], &Type::Bool, depth);
            let b = g.open_expr(&[], &Type::Bool, depth);
            let lhs = Expr::if_(
                c.clone(),
                Expr::check(p.clone(), a.clone()),
                Expr::check(p.clone(), b.clone()),
            );
            let rhs = Expr::check(p, Expr::if_(c, a, b));
            (lhs, rhs, acl)
        }
        RuleName::AppArgHoist => {
            let p = g.privilege();
            let fun = g.value_fun(&Type::Bool, &Type::Bool, depth, false);
            let arg = g.open_expr(&[], &Type::Bool, depth);
            let lhs = Expr::app(fun.clone(), Expr::check(p.clone(), arg.clone()));
            let rhs = Expr::check(p, Expr::app(fun, arg));
            (lhs, rhs, acl)
        }
        RuleName::TestElseHoist => {
            let p = g.privilege();
            let a = g.open_expr(&[], &Type::Bool, depth);
            let b = g.open_expr(&[], &Type::Bool, depth);
            let lhs = Expr::test(p.clone(), a.clone(), Expr::check(p.clone(), b.clone()));
            let rhs = Expr::check(p.clone(), Expr::test(p, a, b));
            (lhs, rhs, acl)
        }
        RuleName::TestBothHoist => {
            let p = g.privilege();
            let q = g.privilege();
            let a = g.open_expr(&[], &Type::Bool, depth);
            let b = g.open_expr(&[], &Type::Bool, depth);
            let lhs = Expr::test(
                q.clone(),
                Expr::check(p.clone(), a.clone()),
                Expr::check(p.clone(), b.clone()),
            );
            let rhs = Expr::check(p, Expr::test(q, a, b));
            (lhs, rhs, acl)
        }
        RuleName::LetrecHoist => {
            let p = g.privilege();
            let fname = g.fresh_name();
            let param = g.fresh_name();
            let fun_ty = Type::arrow(Type::Bool, Type::Bool);
            let body = g.open_expr(
                &[(fname.clone(), fun_ty.clone()), (param.clone(), Type::Bool)],
                &Type::Bool,
                depth,
            );
            let rest = g.open_expr(&[(fname.clone(), fun_ty)], &Type::Bool, depth);
            let latent = g.privilege_subset();
            let mk = |rest: Expr| {
                Expr::letrec(
                    fname.clone(),
                    param.clone(),
                    crate::syntax::AnnType::Bool,
                    crate::syntax::AnnType::Bool,
                    latent.clone(),
                    body.clone(),
                    rest,
                )
            };
            let lhs = mk(Expr::check(p.clone(), rest.clone()));
            let rhs = Expr::check(p, mk(rest));
            (lhs, rhs, acl)
        }
        RuleName::CheckCheckCollapse => {
            let p = g.privilege();
            let e = g.open_expr(&[], &Type::Bool, depth);
            let lhs = Expr::check(p.clone(), Expr::check(p.clone(), e.clone()));
            let rhs = Expr::check(p, e);
            (lhs, rhs, acl)
        }
        RuleName::SignsCollapse => {
            let n = g.principal();
            let e = g.open_expr(&[], &Type::Bool, depth);
            let lhs = Expr::signs(n.clone(), Expr::signs(n.clone(), e.clone()));
            let rhs = Expr::signs(n, e);
            (lhs, rhs, acl)
        }
        RuleName::CommuteCheckSigns => {
            let n = g.principal();
            let p = g.privilege();
            let mut acl = acl;
            acl.grant(n.clone(), p.clone());
            let e = g.open_expr(&[], &Type::Bool, depth);
            let lhs = Expr::signs(n.clone(), Expr::check(p.clone(), e.clone()));
            let rhs = Expr::check(p, Expr::signs(n, e));
            (lhs, rhs, acl)
        }
        RuleName::ElimPrivilegedCheck => {
            let n = g.principal();
            let p = g.privilege();
            let mut acl = acl;
            acl.grant(n.clone(), p.clone());
            let mut body = g.open_expr(&[], &Type::Bool, depth);
            for _ in 0..64 {
                if is_p_pure(&body, &p) {
                    break;
                }
                body = g.open_expr(&[], &Type::Bool, depth);
            }
            assert!(is_p_pure(&body, &p), "could not draw a p-pure body");
            let lhs = Expr::signs(
                n.clone(),
                Expr::dopriv(p.clone(), Expr::check(p.clone(), body.clone())),
            );
            let rhs = Expr::signs(n, body);
            (lhs, rhs, acl)
        }
        RuleName::TestGrant => {
            let p = g.privilege();
            let a = g.open_expr(&[], &Type::Bool, depth);
            let b = g.open_expr(&[], &Type::Bool, depth);
            let lhs = Expr::test(p.clone(), a.clone(), b.clone());
            let rhs = Expr::test(p.clone(), Expr::dopriv(p, a), b);
            (lhs, rhs, acl)
        }
        RuleName::DropTailFrame => {
            let n1 = g.principal();
            let n2 = g.principal();
            let mut acl = acl;
            // the dropped signer must cover the callee's grants
            for p in acl.grants(&n1).clone() {
                acl.grant(n2.clone(), p);
            }
            let arg_is_fun = g.rng().gen_bool(0.3);
            let (arg_ty, arg) = if arg_is_fun {
                let t = Type::arrow(Type::Bool, Type::Bool);
                (t, g.value_fun(&Type::Bool, &Type::Bool, depth, true))
            } else {
                (Type::Bool, Expr::lit(g.rng().gen_bool(0.5)))
            };
            let param = g.fresh_name();
            let body = g.open_expr(&[(param.clone(), arg_ty.clone())], &Type::Bool, depth);
            let lam = Expr::lam(param, plain_ann(&arg_ty), Expr::signs(n1, body));
            let app = Expr::app(lam, arg);
            let lhs = Expr::signs(n2, app.clone());
            (lhs, app, acl)
        }
    }
}

/// Verifies a rule over `instances` random instantiations, sweeping each in
/// the rule's equality mode. Mismatches are shrunk before recording.
pub fn verify_rule(rule: RuleName, cfg: &GenConfig, instances: u64) -> EquivReport {
    verify_rule_in_mode(rule, cfg, instances, rule.equality_mode())
}

/// As `verify_rule` with an explicit equality mode, used to probe how a
/// rule behaves outside its claimed mode.
pub fn verify_rule_in_mode(
    rule: RuleName,
    cfg: &GenConfig,
    instances: u64,
    mode: EqualityMode,
) -> EquivReport {
    with_big_stack(|| {
        let salt = rule
            .as_str()
            .bytes()
            .fold(0u64, |acc, b| acc.wrapping_mul(131).wrapping_add(b as u64));
        let mut total = EquivReport::default();
        for i in 0..instances {
            let seed = mix_seed(cfg.seed ^ salt, i);
            let mut g = TermGen::new(&cfg.clone().with_seed(seed));
            let (lhs, rhs, acl) = instantiate_rule(rule, &mut g, cfg.max_depth.min(3));
            let mut r = verify_equiv_seeded(&lhs, &rhs, &acl, mode, cfg.fuel, seed);
            if !r.is_clean() {
                let (s1, s2) = shrink_pair(&lhs, &rhs, &acl, mode, cfg.fuel);
                let shrunk = verify_equiv_seeded(&s1, &s2, &acl, mode, cfg.fuel, seed);
                if !shrunk.is_clean() {
                    r.mismatches = shrunk.mismatches;
                }
            }
            total.merge(r);
        }
        total
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acl::parse_acl;
    use crate::parser::parse_expr;
    use crate::stack::Frame;

    #[test]
    fn verify_equiv_flags_unguarded_check() {
        let e1 = parse_expr("check p { true }").unwrap();
        let e2 = parse_expr("true").unwrap();
        let acl = parse_acl("n0: p").unwrap();
        let r = verify_equiv(&e1, &e2, &acl, EqualityMode::Unconditional, 100);
        // at P = {} the two sides are star vs true
        assert!(!r.is_clean());
        let m = &r.mismatches[0];
        assert_eq!(m.eager, "security-error");
    }

    #[test]
    fn unsigned_bodies_can_separate_the_semantics() {
        // An unsigned abstraction body leaves the principal implicit: the
        // eager interpreter runs it under the closure's owner, the stack
        // interpreter under the caller's top frame. A dopriv inside then
        // consults different authorizations. This is exactly why the
        // consistency theorem is restricted to standard expressions.
        let e = parse_expr(
            "(sign m { fn x: bool => dopriv p { test p { true } else { false } } }) true",
        )
        .unwrap();
        assert!(!is_standard(&e));
        let acl = parse_acl("m: p").unwrap();
        let stack = Stack::singleton(Frame::bare(Principal::new("n")));
        let enabled = privs(&stack, &acl);
        let eager = obs_eager(&eval_eager(
            &e,
            &stack.top().owner,
            &enabled,
            &EagerEnv::empty(),
            &acl,
            100,
        ));
        let lazy = obs_stack(&eval_stack(&e, &stack, &StackEnv::empty(), &acl, 100));
        assert_eq!(eager, Obs::Bool(true));
        assert_eq!(lazy, Obs::Bool(false));
    }

    #[test]
    fn consistency_over_a_small_batch_is_clean() {
        let cfg = GenConfig {
            max_depth: 4,
            fuel: 400,
            ..GenConfig::default()
        }
        .standard()
        .with_seed(17);
        let acl = parse_acl("n0: p0\nn1: p0 p1\nn2:").unwrap();
        let r = diff_consistency(&cfg, &acl, 150);
        assert_eq!(r.cases_run, 150);
        assert!(r.is_clean(), "{}", r.mismatches[0].to_jsonl());
    }

    #[test]
    fn reports_merge_additively() {
        let mut a = EquivReport {
            cases_run: 2,
            agreements: 1,
            inconclusive: 1,
            mismatches: vec![],
        };
        let b = EquivReport {
            cases_run: 3,
            agreements: 3,
            inconclusive: 0,
            mismatches: vec![],
        };
        a.merge(b);
        assert_eq!((a.cases_run, a.agreements, a.inconclusive), (5, 4, 1));
    }
}
