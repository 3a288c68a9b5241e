//! Cross-module properties: printer/parser round trips, typing laws, the
//! executable forms of the purity and monotonicity lemmas, metamorphic
//! checks on both interpreters, and rewrite/analysis interplay.

use proptest::prelude::*;

use seccalc::acl::{parse_acl, Acl, Universe};
use seccalc::analysis::{analyze, analyze_with, subtype, AnalysisOptions};
use seccalc::eager::{eval_eager, EagerEnv, Outcome};
use seccalc::gen::{mix_seed, plain_ann, GenConfig, TermGen};
use seccalc::harness::{obs_eager, obs_stack, shrink_expr, verify_equiv, with_big_stack, Obs};
use seccalc::parser::{parse_anntype, parse_expr};
use seccalc::pretty::pretty;
use seccalc::rewrite::{hoist_checks, optimize, EqualityMode, RuleName};
use seccalc::stack::{check_pred, eval_stack, privs, Frame, StackEnv};
use seccalc::syntax::{
    is_p_pure, is_standard, AnnCtx, AnnType, Expr, ExprKind, Principal, PrivSet, Privilege, Type,
    TypeCtx,
};
use seccalc::typecheck::typecheck;

const FUEL: u64 = 600;

fn cfg(seed: u64) -> GenConfig {
    GenConfig {
        max_depth: 5,
        fuel: FUEL,
        ..GenConfig::default()
    }
    .with_seed(seed)
}

// ---------------------------------------------------------------------------
// printer / parser

#[test]
fn pretty_parse_round_trip() {
    for seed in 0..400u64 {
        let c = if seed % 2 == 0 {
            cfg(seed)
        } else {
            cfg(seed).standard()
        };
        let target = if seed % 5 == 0 {
            Type::arrow(Type::Bool, Type::Bool)
        } else {
            Type::Bool
        };
        let e = seccalc::gen_expr(&c, &target);
        let printed = pretty(&e);
        let reparsed =
            parse_expr(&printed).unwrap_or_else(|err| panic!("seed {seed}: {err}\n{printed}"));
        assert_eq!(reparsed, e, "seed {seed}: {printed}");
    }
}

proptest! {
    #[test]
    fn anntype_display_round_trips(t in arb_anntype()) {
        let printed = t.to_string();
        prop_assert_eq!(parse_anntype(&printed).unwrap(), t);
    }

    #[test]
    fn subtype_implies_equal_erasure(a in arb_anntype(), b in arb_anntype()) {
        if subtype(&a, &b) {
            prop_assert_eq!(a.erase(), b.erase());
        }
    }

    #[test]
    fn polarity_widening_is_a_subtype(a in arb_anntype(), p in arb_privilege()) {
        let b = widen(&a, &p);
        prop_assert!(subtype(&a, &b));
        prop_assert_eq!(a.erase(), b.erase());
    }

    #[test]
    fn acl_display_round_trips(grants in arb_grants()) {
        let mut acl = Acl::new();
        for (n, ps) in &grants {
            acl.grant_all(Principal::new(n.clone()), ps.iter().map(|p| Privilege::new(p.clone())));
        }
        let reparsed = parse_acl(&acl.to_string()).unwrap();
        prop_assert_eq!(reparsed, acl);
    }
}

fn arb_privilege() -> impl Strategy<Value = Privilege> {
    prop_oneof![Just("p"), Just("q"), Just("r")].prop_map(Privilege::new)
}

fn arb_privset() -> impl Strategy<Value = PrivSet> {
    proptest::collection::btree_set(arb_privilege(), 0..3)
}

fn arb_anntype() -> impl Strategy<Value = AnnType> {
    let leaf = Just(AnnType::Bool);
    leaf.prop_recursive(3, 12, 2, |inner| {
        (inner.clone(), arb_privset(), inner).prop_map(|(a, l, b)| AnnType::arrow(a, l, b))
    })
}

fn arb_grants() -> impl Strategy<Value = Vec<(String, Vec<String>)>> {
    proptest::collection::vec(
        (
            "[a-z][a-z0-9]{0,4}",
            proptest::collection::vec("[a-z][a-z0-9]{0,3}", 0..4),
        ),
        0..4,
    )
}

/// Adds `p` to latent sets in positive positions and removes it in negative
/// ones, producing a supertype.
fn widen(t: &AnnType, p: &Privilege) -> AnnType {
    match t {
        AnnType::Bool => AnnType::Bool,
        AnnType::Arrow {
            param,
            latent,
            result,
        } => {
            let mut latent = latent.clone();
            latent.insert(p.clone());
            AnnType::arrow(narrow(param, p), latent, widen(result, p))
        }
    }
}

fn narrow(t: &AnnType, p: &Privilege) -> AnnType {
    match t {
        AnnType::Bool => AnnType::Bool,
        AnnType::Arrow {
            param,
            latent,
            result,
        } => {
            let mut latent = latent.clone();
            latent.remove(p);
            AnnType::arrow(widen(param, p), latent, narrow(result, p))
        }
    }
}

// ---------------------------------------------------------------------------
// typing laws

#[test]
fn security_constructs_are_typing_transparent() {
    let n = Principal::new("n");
    let p = Privilege::new("p");
    for seed in 0..100u64 {
        let e = seccalc::gen_expr(&cfg(seed), &Type::Bool);
        let base = typecheck(&TypeCtx::empty(), &e).unwrap();
        for wrapped in [
            Expr::signs(n.clone(), e.clone()),
            Expr::dopriv(p.clone(), e.clone()),
            Expr::check(p.clone(), e.clone()),
        ] {
            assert_eq!(typecheck(&TypeCtx::empty(), &wrapped).unwrap(), base);
        }
    }
}

// ---------------------------------------------------------------------------
// eager interpreter lemmas

/// Compares two eager outcomes, treating fuel exhaustion on either side as
/// inconclusive.
fn agree(a: &Outcome<seccalc::EagerValue>, b: &Outcome<seccalc::EagerValue>) -> bool {
    let (a, b) = (obs_eager(a), obs_eager(b));
    a == Obs::FuelOut || b == Obs::FuelOut || a == b
}

#[test]
fn purity_lemma() {
    with_big_stack(|| {
        let mut checked = 0;
        for seed in 0..400u64 {
            let c = cfg(seed);
            let mut g = TermGen::new(&c);
            let acl = g.acl();
            let n = g.principal();
            let privs = g.privilege_subset();
            let e = g.closed_expr(&Type::Bool);
            for p in c.privileges() {
                if !is_p_pure(&e, &p) {
                    continue;
                }
                let mut without = privs.clone();
                without.remove(&p);
                let full = eval_eager(&e, &n, &privs, &EagerEnv::empty(), &acl, FUEL);
                let less = eval_eager(&e, &n, &without, &EagerEnv::empty(), &acl, FUEL);
                assert!(
                    agree(&full, &less),
                    "seed {seed}, privilege {p}: {}",
                    pretty(&e)
                );
                checked += 1;
            }
        }
        assert!(checked > 500, "too few p-pure samples: {checked}");
    });
}

#[test]
fn fuel_monotonicity() {
    with_big_stack(|| {
        for seed in 0..200u64 {
            let c = cfg(seed);
            let mut g = TermGen::new(&c);
            let acl = g.acl();
            let n = g.principal();
            let privs = g.privilege_subset();
            let e = g.closed_expr(&Type::Bool);
            let low = eval_eager(&e, &n, &privs, &EagerEnv::empty(), &acl, 40);
            if low.is_fuel_out() {
                continue;
            }
            for fuel in [41u64, 60, 600] {
                let more = eval_eager(&e, &n, &privs, &EagerEnv::empty(), &acl, fuel);
                assert_eq!(obs_eager(&low), obs_eager(&more), "seed {seed}");
            }
        }
    });
}

#[test]
fn signs_intersection_metamorphic() {
    with_big_stack(|| {
        for seed in 0..300u64 {
            let c = cfg(seed);
            let mut g = TermGen::new(&c);
            let acl = g.acl();
            let outer = g.principal();
            let inner = g.principal();
            let privs = g.privilege_subset();
            let e = g.closed_expr(&Type::Bool);
            let signed = Expr::signs(inner.clone(), e.clone());
            let lhs = eval_eager(&signed, &outer, &privs, &EagerEnv::empty(), &acl, FUEL);
            let restricted: PrivSet = privs.intersection(acl.grants(&inner)).cloned().collect();
            let rhs = eval_eager(&e, &inner, &restricted, &EagerEnv::empty(), &acl, FUEL);
            assert_eq!(obs_eager(&lhs), obs_eager(&rhs), "seed {seed}");
        }
    });
}

#[test]
fn security_errors_are_strict() {
    let acl = Acl::new();
    let n = Principal::new("n");
    let fail = "check p { true }"; // no grants, always a security error
    for src in [
        format!("if {fail} then true else false"),
        format!("(fn x: bool => true) {fail}"),
        format!("sign m {{ {fail} }}"),
        format!("dopriv q {{ {fail} }}"),
        format!("letrec f (x: bool) : bool ! {{}} = sign n {{ x }} in {fail}"),
    ] {
        let e = parse_expr(&src).unwrap();
        typecheck(&TypeCtx::empty(), &e).unwrap();
        let o = eval_eager(&e, &n, &PrivSet::new(), &EagerEnv::empty(), &acl, FUEL);
        assert!(o.is_security_error(), "{src}");
    }
}

#[test]
fn application_of_lambda_equals_body_in_extended_env() {
    with_big_stack(|| {
        for seed in 0..300u64 {
            let c = cfg(seed);
            let mut g = TermGen::new(&c);
            let acl = g.acl();
            let n = g.principal();
            let privs = g.privilege_subset();
            let param = g.fresh_name();
            let body = g.open_expr(&[(param.clone(), Type::Bool)], &Type::Bool, 3);
            let arg = g.open_expr(&[], &Type::Bool, 3);
            let Outcome::Val(v) = eval_eager(&arg, &n, &privs, &EagerEnv::empty(), &acl, FUEL)
            else {
                continue;
            };
            let app = Expr::app(
                Expr::lam(param.clone(), AnnType::Bool, body.clone()),
                arg.clone(),
            );
            let lhs = eval_eager(&app, &n, &privs, &EagerEnv::empty(), &acl, FUEL);
            let env = EagerEnv::empty().extended(param, v);
            let rhs = eval_eager(&body, &n, &privs, &env, &acl, FUEL);
            assert!(agree(&lhs, &rhs), "seed {seed}");
        }
    });
}

// ---------------------------------------------------------------------------
// stack interpreter laws

#[test]
fn privs_of_pushed_bare_frame() {
    for seed in 0..300u64 {
        let c = cfg(seed);
        let mut g = TermGen::new(&c);
        let acl = g.acl();
        let n = g.principal();
        let s = g.stack(4);
        let pushed = s.push(Frame::bare(n.clone()));
        let direct = privs(&pushed, &acl);
        let expected: PrivSet = privs(&s, &acl)
            .intersection(acl.grants(&n))
            .cloned()
            .collect();
        assert_eq!(direct, expected, "seed {seed}");
    }
}

#[test]
fn check_pred_agrees_with_privs_membership() {
    for seed in 0..300u64 {
        let c = cfg(seed);
        let mut g = TermGen::new(&c);
        let acl = g.acl();
        let s = g.stack(4);
        let granted = privs(&s, &acl);
        for p in c.privileges() {
            assert_eq!(
                granted.contains(&p),
                check_pred(&p, Some(&s), &acl),
                "seed {seed}"
            );
        }
    }
}

#[test]
fn frame_laws_metamorphic() {
    with_big_stack(|| {
        for seed in 0..200u64 {
            let c = cfg(seed).standard();
            let mut g = TermGen::new(&c);
            let acl = g.acl();
            let s = g.stack(3);
            let n = g.principal();
            let p = g.privilege();
            let e = g.closed_expr(&Type::Bool);
            // pushing a frame is exactly what signs does
            let signed = Expr::signs(n.clone(), e.clone());
            let lhs = eval_stack(&signed, &s, &StackEnv::empty(), &acl, FUEL);
            let rhs = eval_stack(
                &e,
                &s.push(Frame::bare(n.clone())),
                &StackEnv::empty(),
                &acl,
                FUEL,
            );
            assert_eq!(obs_stack(&lhs), obs_stack(&rhs), "seed {seed}");
            // enabling on top is exactly what dopriv does
            let enabled = Expr::dopriv(p.clone(), e.clone());
            let lhs = eval_stack(&enabled, &s, &StackEnv::empty(), &acl, FUEL);
            let rhs = eval_stack(&e, &s.enable_on_top(&p), &StackEnv::empty(), &acl, FUEL);
            assert_eq!(obs_stack(&lhs), obs_stack(&rhs), "seed {seed}");
        }
    });
}

// ---------------------------------------------------------------------------
// analysis properties

#[test]
fn erasure_coherence_of_analysis_types() {
    for seed in 0..400u64 {
        let c = cfg(seed);
        let mut g = TermGen::new(&c);
        let acl = g.acl();
        let n = g.principal();
        let e = g.closed_expr(&Type::Bool);
        let base = typecheck(&TypeCtx::empty(), &e).unwrap();
        if let Ok(r) = analyze(&AnnCtx::empty(), &n, &e, &acl) {
            assert_eq!(r.ann_type.erase(), base, "seed {seed}");
            let privs_universe: PrivSet = c.privileges().into_iter().collect();
            assert!(r.required.is_subset(&privs_universe), "seed {seed}");
        }
    }
}

#[test]
fn letrec_declaration_widening_stays_analyzable() {
    let acl = parse_acl("n: p q").unwrap();
    let n = Principal::new("n");
    for (src, extra) in [
        (
            "letrec f (x: bool) : bool ! {} = sign n { x } in f true",
            "p",
        ),
        (
            "letrec f (x: bool) : bool ! {p} = sign n { check p { x } } in f false",
            "q",
        ),
    ] {
        let e = parse_expr(src).unwrap();
        let before = analyze(&AnnCtx::empty(), &n, &e, &acl).unwrap();
        let widened = widen_letrec_latent(&e, &Privilege::new(extra));
        let after = analyze(&AnnCtx::empty(), &n, &widened, &acl).unwrap();
        assert!(before.required.is_subset(&after.required));
    }
}

fn widen_letrec_latent(e: &Expr, p: &Privilege) -> Expr {
    match &e.kind {
        ExprKind::LetRec {
            name,
            param,
            param_ann,
            ret_ann,
            latent,
            body,
            rest,
        } => {
            let mut latent = latent.clone();
            latent.insert(p.clone());
            Expr::letrec(
                name.clone(),
                param.clone(),
                param_ann.clone(),
                ret_ann.clone(),
                latent,
                (**body).clone(),
                (**rest).clone(),
            )
        }
        _ => e.clone(),
    }
}

#[test]
fn strict_letrec_is_at_least_as_demanding() {
    for seed in 0..300u64 {
        let c = cfg(seed);
        let mut g = TermGen::new(&c);
        let acl = g.acl();
        let n = g.principal();
        let e = g.closed_expr(&Type::Bool);
        let strict = analyze_with(
            &AnnCtx::empty(),
            &n,
            &e,
            &acl,
            AnalysisOptions {
                strict_letrec: true,
            },
        );
        if let Ok(strict) = strict {
            let relaxed = analyze(&AnnCtx::empty(), &n, &e, &acl).unwrap();
            assert_eq!(strict, relaxed, "seed {seed}");
        }
    }
}

// ---------------------------------------------------------------------------
// rewrite properties

#[test]
fn hoisting_preserves_standardness_and_type() {
    for seed in 0..300u64 {
        let c = cfg(seed).standard();
        let e = seccalc::gen_expr(&c, &Type::Bool);
        assert!(is_standard(&e));
        let (hoisted, _) = hoist_checks(&e);
        assert!(is_standard(&hoisted), "seed {seed}");
        assert_eq!(
            typecheck(&TypeCtx::empty(), &hoisted).unwrap(),
            Type::Bool,
            "seed {seed}"
        );
    }
}

#[test]
fn optimize_preserves_base_type_and_analyzability() {
    for seed in 0..400u64 {
        let c = cfg(seed);
        let mut g = TermGen::new(&c);
        let acl = g.acl();
        let n = g.principal();
        let e = g.closed_expr(&Type::Bool);
        let (opt, trace) = optimize(&e, &acl);
        assert_eq!(
            typecheck(&TypeCtx::empty(), &opt).unwrap(),
            Type::Bool,
            "seed {seed}"
        );
        if let Ok(before) = analyze(&AnnCtx::empty(), &n, &e, &acl) {
            let after = analyze(&AnnCtx::empty(), &n, &opt, &acl)
                .unwrap_or_else(|err| panic!("seed {seed}: optimize broke analysis: {err}"));
            // elimination can only drop a requirement that a latent
            // annotation spuriously re-introduces; outside that corner the
            // requirement never grows
            if !trace.rules().contains(&RuleName::ElimPrivilegedCheck) {
                assert!(
                    after.required.is_subset(&before.required),
                    "seed {seed}: {:?} -> {:?}",
                    before.required,
                    after.required
                );
            }
        }
    }
}

#[test]
fn elim_can_grow_the_static_requirement_through_latent_annotations() {
    // The requirement set is an overapproximation: the body below is p-pure
    // (its meaning cannot depend on p) yet its annotation-exposed latent set
    // mentions p, so eliminating the enclosing dopriv/check pair raises the
    // reported requirement from {} to {p}. The meanings stay equal.
    let acl = parse_acl("n: p").unwrap();
    let n = Principal::new("n");
    let body = "(fn g: bool-{p}->bool => g true) (fn y: bool => y)";
    let e = parse_expr(&format!("sign n {{ dopriv p {{ check p {{ {body} }} }} }}")).unwrap();
    let before = analyze(&AnnCtx::empty(), &n, &e, &acl).unwrap();
    assert!(before.required.is_empty());
    let (opt, trace) = optimize(&e, &acl);
    assert!(trace.rules().contains(&RuleName::ElimPrivilegedCheck));
    let after = analyze(&AnnCtx::empty(), &n, &opt, &acl).unwrap();
    assert_eq!(
        after.required,
        [Privilege::new("p")].into_iter().collect::<PrivSet>()
    );
    assert!(verify_equiv(&e, &opt, &acl, EqualityMode::Unconditional, FUEL).is_clean());
}

#[test]
fn app_arg_hoist_holds_for_general_functions_too() {
    // the unrestricted form of the application-argument hoist: the function
    // position is an arbitrary expression, not just a syntactic value
    with_big_stack(|| {
        for seed in 0..200u64 {
            let c = cfg(seed);
            let mut g = TermGen::new(&c);
            let acl = g.acl();
            let p = g.privilege();
            let fun = g.open_expr(&[], &Type::arrow(Type::Bool, Type::Bool), 3);
            let arg = g.open_expr(&[], &Type::Bool, 3);
            let lhs = Expr::app(fun.clone(), Expr::check(p.clone(), arg.clone()));
            let rhs = Expr::check(p.clone(), Expr::app(fun, arg));
            let report = verify_equiv(&lhs, &rhs, &acl, EqualityMode::Unconditional, FUEL);
            assert!(
                report.is_clean(),
                "seed {seed}: {}",
                report.mismatches[0].to_jsonl()
            );
            // the fixpoint form stays equivalent as well, and the outermost
            // check really did move out despite the non-value function
            let (hoisted, trace) = seccalc::rewrite::hoist_checks_with(
                &lhs,
                seccalc::rewrite::HoistOptions {
                    unrestricted_app_arg: true,
                },
            );
            assert!(
                trace.rules().contains(&RuleName::AppArgHoist),
                "seed {seed}"
            );
            let report = verify_equiv(&lhs, &hoisted, &acl, EqualityMode::Unconditional, FUEL);
            assert!(
                report.is_clean(),
                "seed {seed}: {}",
                report.mismatches[0].to_jsonl()
            );
        }
    });
}

#[test]
fn optimize_verifies_on_generated_inputs() {
    with_big_stack(|| {
        for seed in 0..150u64 {
            let c = cfg(seed);
            let mut g = TermGen::new(&c);
            let acl = g.acl();
            let e = g.closed_expr(&Type::Bool);
            let (opt, trace) = optimize(&e, &acl);
            assert!(trace.replays(&e, &opt), "seed {seed}");
            let report = verify_equiv(&e, &opt, &acl, EqualityMode::Unconditional, FUEL);
            assert!(
                report.is_clean(),
                "seed {seed}: optimize changed behavior: {}",
                report.mismatches[0].to_jsonl()
            );
        }
    });
}

// ---------------------------------------------------------------------------
// harness self-checks

#[test]
fn shrinking_keeps_the_witness_failing() {
    // the commutation negative control provides a real mismatch to shrink
    let acl = parse_acl("").unwrap();
    let lhs = parse_expr("sign n { check p { if true then true else false } }").unwrap();
    let rhs = parse_expr("check p { sign n { if true then true else false } }").unwrap();
    let mismatches = |a: &Expr, b: &Expr| {
        !verify_equiv(a, b, &acl, EqualityMode::Unconditional, FUEL).is_clean()
    };
    assert!(mismatches(&lhs, &rhs));
    let shrunk = shrink_expr(&lhs, &|cand| {
        matches!(typecheck(&TypeCtx::empty(), cand), Ok(Type::Bool)) && mismatches(cand, &rhs)
    });
    assert!(mismatches(&shrunk, &rhs));
    let mut nodes = 0;
    shrunk.walk(&mut |_| nodes += 1);
    let mut before = 0;
    lhs.walk(&mut |_| before += 1);
    assert!(nodes <= before);
}

#[test]
fn mismatch_records_serialize_one_per_line() {
    let acl = parse_acl("n0: p").unwrap();
    let e1 = parse_expr("check p { true }").unwrap();
    let e2 = parse_expr("true").unwrap();
    let r = verify_equiv(&e1, &e2, &acl, EqualityMode::Unconditional, FUEL);
    assert!(!r.is_clean());
    for m in &r.mismatches {
        let line = m.to_jsonl();
        assert!(!line.contains('\n'));
        let parsed: serde_json::Value = serde_json::from_str(&line).unwrap();
        for field in [
            "program",
            "acl",
            "principal",
            "privs_or_stack",
            "eager",
            "stack_or_rhs",
            "seed",
        ] {
            assert!(parsed.get(field).is_some(), "missing {field}");
        }
    }
}

#[test]
fn consistency_is_exercised_by_the_corpus() {
    // the corpus programs are standard, so both interpreters must agree on
    // them from arbitrary sampled stacks as well
    with_big_stack(|| {
        let acl = parse_acl(seccalc::corpus::PASS_ACL).unwrap();
        for src in [
            seccalc::corpus::USE_SEC,
            seccalc::corpus::USE_CALLS_SEC,
            seccalc::corpus::BAD1_SEC,
            seccalc::corpus::BAD2_SEC,
        ] {
            let e = parse_expr(src).unwrap();
            assert!(is_standard(&e));
            for seed in 0..40u64 {
                let mut g = TermGen::new(&cfg(mix_seed(7, seed)));
                let s = g.stack(4);
                let enabled = privs(&s, &acl);
                let lhs = obs_eager(&eval_eager(
                    &e,
                    &s.top().owner,
                    &enabled,
                    &EagerEnv::empty(),
                    &acl,
                    FUEL,
                ));
                let rhs = obs_stack(&eval_stack(&e, &s, &StackEnv::empty(), &acl, FUEL));
                assert_eq!(lhs, rhs, "seed {seed}: {src}");
            }
        }
    });
}

#[test]
fn universe_covers_program_and_acl_mentions() {
    let e = parse_expr("sign alice { check io { test net { true } else { false } } }").unwrap();
    let acl = parse_acl("bob: fs").unwrap();
    let mut uni = Universe::new();
    uni.add_expr(&e);
    uni.add_acl(&acl);
    assert!(uni.principals.contains(&Principal::new("alice")));
    assert!(uni.principals.contains(&Principal::new("bob")));
    for p in ["io", "net", "fs"] {
        assert!(uni.privileges.contains(&Privilege::new(p)));
    }
    let ann = plain_ann(&Type::arrow(Type::Bool, Type::Bool));
    assert_eq!(ann.erase(), Type::arrow(Type::Bool, Type::Bool));
}
