//! The password and latent-privilege program corpus, embedded so tests and
//! demos do not depend on working-directory layout. The same files ship in
//! `corpus/` for use with the command line tool.

/// `user : p`, `root : p w`.
pub const PASS_ACL: &str = include_str!("../corpus/pass.acl");
/// The inlined, succeeding password change.
pub const USE_SEC: &str = include_str!("../corpus/use.sec");
/// The password change with the library calls kept as applications.
pub const USE_CALLS_SEC: &str = include_str!("../corpus/use_calls.sec");
/// Direct call to the guarded writer; raises a security error.
pub const BAD1_SEC: &str = include_str!("../corpus/bad1.sec");
/// Unauthorized enable before the call; still raises a security error.
pub const BAD2_SEC: &str = include_str!("../corpus/bad2.sec");
/// The body of `passwd(mypass)` with `writepass` inlined.
pub const PASSWD_CALL_SEC: &str = include_str!("../corpus/passwd_call.sec");
/// `n : p`.
pub const LP_CP_ACL: &str = include_str!("../corpus/lp_cp.acl");
/// The checking function `cp`.
pub const CP_SEC: &str = include_str!("../corpus/cp.sec");
/// The enabling combinator `lp`.
pub const LP_SEC: &str = include_str!("../corpus/lp.sec");
/// `(lp cp) true`.
pub const LP_CP_SEC: &str = include_str!("../corpus/lp_cp.sec");
