//! A toolkit for a simply typed calculus with stack-inspection access
//! control in the style of the Java and .NET runtimes.
//!
//! Programs carry `sign` (code signing), `dopriv` (privilege enabling),
//! `check` (guarding) and `test` (non-failing probe) constructs over a
//! simply typed lambda calculus with recursion. The toolkit provides:
//!
//! * parsing, pretty printing, and base typechecking ([`parser`],
//!   [`pretty`], [`typecheck`]);
//! * two interpreters: the eager one threads the current principal and
//!   the already-granted privilege set, the lazy one inspects a stack of
//!   frames on demand ([`eager`], [`stack`]);
//! * a type-and-effect analysis certifying the absence of security errors
//!   ([`analysis`]);
//! * semantics-preserving rewrites that hoist and eliminate privilege
//!   checks, plus full security erasure for statically safe programs
//!   ([`rewrite`]);
//! * a differential harness that mechanically validates interpreter
//!   consistency, rule equalities, safety, and erasure over generated
//!   programs and exhaustive principal/privilege sweeps ([`gen`],
//!   [`harness`]).

pub mod acl;
pub mod analysis;
pub mod builtins;
pub mod corpus;
pub mod eager;
pub mod env;
pub mod gen;
pub mod harness;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod rewrite;
pub mod stack;
pub mod syntax;
pub mod typecheck;

pub use acl::{parse_acl, Acl, Universe};
pub use analysis::{analyze, analyze_with, safe_for, subtype, AnalysisError, AnalysisResult};
pub use eager::{eval_eager, join_priv, EagerEnv, EagerValue, Outcome};
pub use gen::{gen_expr, GenConfig, TermGen};
pub use harness::{
    diff_consistency, diff_consistency_random_acl, fuzz_erasure, fuzz_safety, verify_equiv,
    verify_rule, EquivReport, Mismatch,
};
pub use parser::{parse_anntype, parse_expr, ParseError};
pub use pretty::pretty;
pub use rewrite::{
    collapse_signs, commute_check_signs, drop_tail_frame, elim_privileged_check, erase_security,
    hoist_checks, optimize, test_grant, Direction, EqualityMode, RewriteTrace, RuleName,
};
pub use stack::{check_pred, eval_stack, privs, Frame, Stack, StackEnv, StackValue};
pub use syntax::{
    free_vars, is_p_pure, is_standard, is_test_free, is_value, AnnType, Expr, ExprKind, Principal,
    PrivSet, Privilege, Span, Type, TypeCtx,
};
pub use typecheck::{typecheck, TypeError};
