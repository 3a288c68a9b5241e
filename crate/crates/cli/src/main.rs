//! Command line front end: typecheck, analyze, run, optimize, erase,
//! differential equivalence, and randomized fuzzing over one binary.
//!
//! Exit codes: 0 success, 1 base type error, 2 analysis failure (or a
//! refused erase), 3 runtime security error, 4 equivalence mismatch found,
//! 5 parse error, 6 fuel exhausted during `run`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use serde_json::json;

use seccalc::acl::{parse_acl, Acl};
use seccalc::analysis::analyze;
use seccalc::eager::{eval_eager, EagerEnv, EagerValue, Outcome};
use seccalc::gen::GenConfig;
use seccalc::harness::{
    diff_consistency, diff_consistency_random_acl, fuzz_erasure_with_acl, fuzz_safety_with_acl,
    verify_equiv, verify_rule, with_big_stack, EquivReport,
};
use seccalc::parser::parse_expr;
use seccalc::pretty::pretty;
use seccalc::rewrite::{erase_security, optimize, EqualityMode, RuleName};
use seccalc::stack::{eval_stack, Frame, Stack, StackEnv, StackValue};
use seccalc::syntax::{is_test_free, is_valid_ident, Expr, Principal, PrivSet, Privilege, Type};
use seccalc::typecheck::typecheck;
use seccalc::TypeCtx;

const EXIT_OK: u8 = 0;
const EXIT_TYPE_ERROR: u8 = 1;
const EXIT_UNSAFE: u8 = 2;
const EXIT_SECURITY_ERROR: u8 = 3;
const EXIT_MISMATCH: u8 = 4;
const EXIT_PARSE_ERROR: u8 = 5;
const EXIT_FUEL_OUT: u8 = 6;

#[derive(Parser)]
#[command(
    name = "seccalc",
    version,
    about = "Stack-inspection security calculus toolkit"
)]
struct Cli {
    /// Output format for results
    #[arg(long, global = true, value_enum, default_value_t = OutputMode::Human)]
    output: OutputMode,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum OutputMode {
    Human,
    Jsonl,
}

#[derive(Clone, Copy, ValueEnum)]
enum Semantics {
    Eager,
    Stack,
}

#[derive(Clone, Copy, ValueEnum)]
enum FuzzMode {
    Consistency,
    Safety,
    Erasure,
    Rules,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a program and print its base type
    Typecheck {
        file: PathBuf,
        #[arg(long)]
        acl: Option<PathBuf>,
    },
    /// Run the static safety analysis and report (type, required privileges)
    Analyze {
        file: PathBuf,
        #[arg(long)]
        acl: PathBuf,
        /// Principal the program is analyzed on behalf of
        #[arg(long, default_value = "n0")]
        principal: String,
    },
    /// Evaluate a program from an initial configuration
    Run {
        file: PathBuf,
        #[arg(long)]
        acl: PathBuf,
        #[arg(long, value_enum, default_value_t = Semantics::Eager)]
        semantics: Semantics,
        /// Entry principal (owner of the initial frame)
        #[arg(long, default_value = "n0")]
        principal: String,
        /// Initially enabled privileges, comma separated
        #[arg(long, value_delimiter = ',')]
        privs: Vec<String>,
        #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
        fuel: u64,
    },
    /// Hoist and eliminate privilege checks
    Optimize {
        file: PathBuf,
        #[arg(long)]
        acl: PathBuf,
        /// Print one RULE line per applied rewrite before the program
        #[arg(long)]
        trace: bool,
    },
    /// Strip dopriv/check from a statically safe, test-free program
    Erase {
        file: PathBuf,
        #[arg(long)]
        acl: PathBuf,
        #[arg(long, default_value = "n0")]
        principal: String,
    },
    /// Sweep two closed bool programs over every (principal, privilege set)
    Equiv {
        file1: PathBuf,
        file2: PathBuf,
        #[arg(long)]
        acl: PathBuf,
        /// Quantify only over privilege sets within the principal's grants
        #[arg(long)]
        restricted: bool,
        #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
        fuel: u64,
    },
    /// Random differential testing of the semantics, analysis, and rewrites
    #[command(group(ArgGroup::new("acl_source").required(true).args(["acl", "random_acl"])))]
    Fuzz {
        #[arg(long)]
        acl: Option<PathBuf>,
        /// Sample a fresh ACL per case instead of fixing one
        #[arg(long)]
        random_acl: bool,
        /// Cases (consistency), target analysis successes (safety, erasure),
        /// or instantiations per rule (rules)
        #[arg(long, default_value_t = 1_000)]
        cases: u64,
        #[arg(long, default_value_t = 6)]
        depth: u32,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = FuzzMode::Consistency)]
        mode: FuzzMode,
        #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
        fuel: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.output;
    let code = match cli.cmd {
        Cmd::Typecheck { file, acl } => cmd_typecheck(&file, acl.as_deref(), out),
        Cmd::Analyze {
            file,
            acl,
            principal,
        } => cmd_analyze(&file, &acl, &principal, out),
        Cmd::Run {
            file,
            acl,
            semantics,
            principal,
            privs,
            fuel,
        } => cmd_run(&file, &acl, semantics, &principal, &privs, fuel, out),
        Cmd::Optimize { file, acl, trace } => cmd_optimize(&file, &acl, trace, out),
        Cmd::Erase {
            file,
            acl,
            principal,
        } => cmd_erase(&file, &acl, &principal, out),
        Cmd::Equiv {
            file1,
            file2,
            acl,
            restricted,
            fuel,
        } => cmd_equiv(&file1, &file2, &acl, restricted, fuel, out),
        Cmd::Fuzz {
            acl,
            random_acl: _,
            cases,
            depth,
            seed,
            mode,
            fuel,
        } => cmd_fuzz(acl.as_deref(), cases, depth, seed, mode, fuel, out),
    };
    ExitCode::from(code)
}

fn fail(code: u8, msg: impl std::fmt::Display) -> u8 {
    eprintln!("error: {msg}");
    code
}

fn load_expr(path: &Path) -> Result<Expr, u8> {
    let source = std::fs::read_to_string(path)
        .map_err(|e| fail(EXIT_PARSE_ERROR, format!("{}: {e}", path.display())))?;
    parse_expr(&source).map_err(|e| fail(EXIT_PARSE_ERROR, format!("{}: {e}", path.display())))
}

fn load_acl(path: &Path) -> Result<Acl, u8> {
    let source = std::fs::read_to_string(path)
        .map_err(|e| fail(EXIT_PARSE_ERROR, format!("{}: {e}", path.display())))?;
    parse_acl(&source).map_err(|e| fail(EXIT_PARSE_ERROR, format!("{}: {e}", path.display())))
}

fn checked(e: &Expr) -> Result<Type, u8> {
    typecheck(&TypeCtx::empty(), e).map_err(|err| fail(EXIT_TYPE_ERROR, err))
}

fn cmd_typecheck(file: &Path, acl: Option<&Path>, out: OutputMode) -> u8 {
    let e = match load_expr(file) {
        Ok(e) => e,
        Err(c) => return c,
    };
    if let Some(path) = acl {
        if let Err(c) = load_acl(path) {
            return c;
        }
    }
    match checked(&e) {
        Ok(t) => {
            match out {
                OutputMode::Human => println!("{t}"),
                OutputMode::Jsonl => println!("{}", json!({ "type": t.to_string() })),
            }
            EXIT_OK
        }
        Err(c) => c,
    }
}

fn cmd_analyze(file: &Path, acl: &Path, principal: &str, out: OutputMode) -> u8 {
    let e = match load_expr(file) {
        Ok(e) => e,
        Err(c) => return c,
    };
    let acl = match load_acl(acl) {
        Ok(a) => a,
        Err(c) => return c,
    };
    if let Err(c) = checked(&e) {
        return c;
    }
    let principal = match parse_principal(principal) {
        Ok(n) => n,
        Err(c) => return c,
    };
    match analyze(&Default::default(), &principal, &e, &acl) {
        Ok(result) => {
            match out {
                OutputMode::Human => println!("{}", result.report_line()),
                OutputMode::Jsonl => println!(
                    "{}",
                    json!({
                        "theta": result.ann_type.to_string(),
                        "pi": result.required.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
                    })
                ),
            }
            EXIT_OK
        }
        Err(err) => {
            match out {
                OutputMode::Human => println!("{}", err.report_line()),
                OutputMode::Jsonl => println!(
                    "{}",
                    json!({
                        "error": err.kind.to_string(),
                        "span": err.span.to_string(),
                        "detail": err.detail,
                    })
                ),
            }
            EXIT_UNSAFE
        }
    }
}

fn parse_principal(name: &str) -> Result<Principal, u8> {
    if is_valid_ident(name) {
        Ok(Principal::new(name))
    } else {
        Err(fail(
            EXIT_PARSE_ERROR,
            format!("invalid principal name {name:?}"),
        ))
    }
}

fn parse_privs(names: &[String]) -> Result<PrivSet, u8> {
    let mut out = PrivSet::new();
    for name in names.iter().filter(|s| !s.is_empty()) {
        if !is_valid_ident(name) {
            return Err(fail(
                EXIT_PARSE_ERROR,
                format!("invalid privilege name {name:?}"),
            ));
        }
        out.insert(Privilege::new(name.clone()));
    }
    Ok(out)
}

fn show_eager(v: &EagerValue) -> String {
    match v {
        EagerValue::Bool(b) => b.to_string(),
        _ => "<fn>".to_string(),
    }
}

fn show_stack_value(v: &StackValue) -> String {
    match v {
        StackValue::Bool(b) => b.to_string(),
        _ => "<fn>".to_string(),
    }
}

enum RunOutcome {
    Value(String),
    SecurityError,
    FuelOut,
}

fn report_outcome(outcome: RunOutcome, out: OutputMode) -> u8 {
    match outcome {
        RunOutcome::Value(value) => {
            match out {
                OutputMode::Human => println!("{value}"),
                OutputMode::Jsonl => {
                    println!("{}", json!({ "outcome": "value", "value": value }))
                }
            }
            EXIT_OK
        }
        RunOutcome::SecurityError => {
            match out {
                OutputMode::Human => println!("security error"),
                OutputMode::Jsonl => println!("{}", json!({ "outcome": "security-error" })),
            }
            EXIT_SECURITY_ERROR
        }
        RunOutcome::FuelOut => {
            match out {
                OutputMode::Human => println!("fuel exhausted"),
                OutputMode::Jsonl => println!("{}", json!({ "outcome": "fuel-out" })),
            }
            EXIT_FUEL_OUT
        }
    }
}

fn cmd_run(
    file: &Path,
    acl: &Path,
    semantics: Semantics,
    principal: &str,
    privs: &[String],
    fuel: u64,
    out: OutputMode,
) -> u8 {
    let e = match load_expr(file) {
        Ok(e) => e,
        Err(c) => return c,
    };
    let acl = match load_acl(acl) {
        Ok(a) => a,
        Err(c) => return c,
    };
    if let Err(c) = checked(&e) {
        return c;
    }
    let entry = match parse_principal(principal) {
        Ok(n) => n,
        Err(c) => return c,
    };
    let enabled = match parse_privs(privs) {
        Ok(ps) => ps,
        Err(c) => return c,
    };
    let outcome = with_big_stack(|| match semantics {
        Semantics::Eager => {
            match eval_eager(&e, &entry, &enabled, &EagerEnv::empty(), &acl, fuel) {
                Outcome::Val(v) => RunOutcome::Value(show_eager(&v)),
                Outcome::SecurityError => RunOutcome::SecurityError,
                Outcome::FuelOut => RunOutcome::FuelOut,
            }
        }
        Semantics::Stack => {
            let stack = Stack::singleton(Frame::new(entry.clone(), enabled.clone()));
            match eval_stack(&e, &stack, &StackEnv::empty(), &acl, fuel) {
                Outcome::Val(v) => RunOutcome::Value(show_stack_value(&v)),
                Outcome::SecurityError => RunOutcome::SecurityError,
                Outcome::FuelOut => RunOutcome::FuelOut,
            }
        }
    });
    report_outcome(outcome, out)
}

fn cmd_optimize(file: &Path, acl: &Path, trace: bool, out: OutputMode) -> u8 {
    let e = match load_expr(file) {
        Ok(e) => e,
        Err(c) => return c,
    };
    let acl = match load_acl(acl) {
        Ok(a) => a,
        Err(c) => return c,
    };
    if let Err(c) = checked(&e) {
        return c;
    }
    let (optimized, steps) = optimize(&e, &acl);
    match out {
        OutputMode::Human => {
            if trace {
                print!("{steps}");
            }
            println!("{}", pretty(&optimized));
        }
        OutputMode::Jsonl => {
            let trace_records: Vec<_> = steps
                .0
                .iter()
                .map(|s| json!({ "rule": s.rule.as_str(), "span": s.span.to_string() }))
                .collect();
            println!(
                "{}",
                json!({ "program": pretty(&optimized), "trace": trace_records })
            );
        }
    }
    EXIT_OK
}

fn cmd_erase(file: &Path, acl: &Path, principal: &str, out: OutputMode) -> u8 {
    let e = match load_expr(file) {
        Ok(e) => e,
        Err(c) => return c,
    };
    let acl = match load_acl(acl) {
        Ok(a) => a,
        Err(c) => return c,
    };
    if let Err(c) = checked(&e) {
        return c;
    }
    if !is_test_free(&e) {
        return fail(
            EXIT_UNSAFE,
            "refusing to erase: the program contains a test expression",
        );
    }
    let principal = match parse_principal(principal) {
        Ok(n) => n,
        Err(c) => return c,
    };
    let result = match analyze(&Default::default(), &principal, &e, &acl) {
        Ok(r) => r,
        Err(err) => {
            return fail(
                EXIT_UNSAFE,
                format!(
                    "refusing to erase an unanalyzable program: {}",
                    err.report_line()
                ),
            )
        }
    };
    let erased = erase_security(&e).expect("test-free programs always erase");
    match out {
        OutputMode::Human => println!("{}", pretty(&erased)),
        OutputMode::Jsonl => println!(
            "{}",
            json!({
                "program": pretty(&erased),
                "pi": result.required.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
            })
        ),
    }
    EXIT_OK
}

fn print_report(label: &str, report: &EquivReport, out: OutputMode) {
    match out {
        OutputMode::Human => {
            println!("{label}: {report}");
            for m in &report.mismatches {
                println!("mismatch: {}", m.to_jsonl());
            }
        }
        OutputMode::Jsonl => {
            println!(
                "{}",
                json!({
                    "suite": label,
                    "cases": report.cases_run,
                    "agreements": report.agreements,
                    "inconclusive": report.inconclusive,
                    "mismatches": report.mismatches.len(),
                })
            );
            for m in &report.mismatches {
                println!("{}", m.to_jsonl());
            }
        }
    }
}

fn cmd_equiv(
    file1: &Path,
    file2: &Path,
    acl: &Path,
    restricted: bool,
    fuel: u64,
    out: OutputMode,
) -> u8 {
    let e1 = match load_expr(file1) {
        Ok(e) => e,
        Err(c) => return c,
    };
    let e2 = match load_expr(file2) {
        Ok(e) => e,
        Err(c) => return c,
    };
    let acl = match load_acl(acl) {
        Ok(a) => a,
        Err(c) => return c,
    };
    for e in [&e1, &e2] {
        match checked(e) {
            Ok(Type::Bool) => {}
            Ok(other) => {
                return fail(
                    EXIT_TYPE_ERROR,
                    format!("equivalence needs closed bool programs, found {other}"),
                )
            }
            Err(c) => return c,
        }
    }
    let mode = if restricted {
        EqualityMode::RestrictedToAcl
    } else {
        EqualityMode::Unconditional
    };
    let report = with_big_stack(|| verify_equiv(&e1, &e2, &acl, mode, fuel));
    print_report("equiv", &report, out);
    if report.is_clean() {
        EXIT_OK
    } else {
        EXIT_MISMATCH
    }
}

fn cmd_fuzz(
    acl: Option<&Path>,
    cases: u64,
    depth: u32,
    seed: u64,
    mode: FuzzMode,
    fuel: u64,
    out: OutputMode,
) -> u8 {
    let fixed_acl = match acl {
        Some(path) => match load_acl(path) {
            Ok(a) => Some(a),
            Err(c) => return c,
        },
        None => None,
    };
    let base = GenConfig {
        max_depth: depth,
        fuel,
        seed,
        ..GenConfig::default()
    };
    let mut dirty = false;
    match mode {
        FuzzMode::Consistency => {
            let cfg = base.standard();
            let report = match &fixed_acl {
                Some(acl) => diff_consistency(&cfg, acl, cases),
                None => diff_consistency_random_acl(&cfg, cases),
            };
            print_report("consistency", &report, out);
            dirty = !report.is_clean();
        }
        FuzzMode::Safety => {
            let report =
                fuzz_safety_with_acl(&base, cases, cases.saturating_mul(25), fixed_acl.as_ref());
            match out {
                OutputMode::Human => println!("safety: {report}"),
                OutputMode::Jsonl => println!(
                    "{}",
                    json!({
                        "suite": "safety",
                        "attempts": report.attempts,
                        "successes": report.successes,
                        "sweeps": report.sweeps,
                        "violations": report.violations.len(),
                    })
                ),
            }
            for v in &report.violations {
                println!("{}", v.to_jsonl());
            }
            dirty = !report.violations.is_empty();
        }
        FuzzMode::Erasure => {
            let cfg = base.test_free();
            let (successes, report) =
                fuzz_erasure_with_acl(&cfg, cases, cases.saturating_mul(25), fixed_acl.as_ref());
            match out {
                OutputMode::Human => println!("erasure: successes={successes} {report}"),
                OutputMode::Jsonl => println!(
                    "{}",
                    json!({
                        "suite": "erasure",
                        "successes": successes,
                        "cases": report.cases_run,
                        "inconclusive": report.inconclusive,
                        "mismatches": report.mismatches.len(),
                    })
                ),
            }
            for m in &report.mismatches {
                println!("{}", m.to_jsonl());
            }
            dirty = !report.is_clean();
        }
        FuzzMode::Rules => {
            for rule in [
                RuleName::IfHoist,
                RuleName::AppArgHoist,
                RuleName::TestElseHoist,
                RuleName::TestBothHoist,
                RuleName::LetrecHoist,
                RuleName::CheckCheckCollapse,
                RuleName::SignsCollapse,
                RuleName::CommuteCheckSigns,
                RuleName::ElimPrivilegedCheck,
                RuleName::TestGrant,
                RuleName::DropTailFrame,
            ] {
                let report = verify_rule(rule, &base, cases);
                print_report(rule.as_str(), &report, out);
                dirty |= !report.is_clean();
            }
        }
    }
    if dirty {
        EXIT_MISMATCH
    } else {
        EXIT_OK
    }
}
