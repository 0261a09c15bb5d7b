//! Minimal exact-arithmetic expression engine.
//!
//! Parses arithmetic/symbolic expressions over rationals and variables,
//! canonicalizes them (constant folding, commutative flattening and
//! sorting, like-term collection, expansion of small integer powers of
//! sums), and decides equivalence. Mismatches are classified as numeric
//! slips (same structure, different literal values) versus symbolic errors
//! (different structure), which is what the symbolic and answer dimensions
//! consume.
//!
//! All internal arithmetic is exact rational; floats appear only at the
//! relaxed numeric-comparison boundary.

mod canon;
mod parse;

pub use canon::canonicalize;
pub use parse::parse_expr;

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Expression tree. `Add`/`Mul` are n-ary so canonical forms can flatten
/// and sort commutative operands; the parser emits two-element vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    /// Exact rational literal (integers included).
    Num(BigRational),
    Var(String),
    Neg(Box<Expr>),
    Add(Vec<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Vec<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Exponent is an integer literal; the parser enforces [-8, 8].
    Pow(Box<Expr>, i32),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExprError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("undefined value: {0}")]
    Undefined(String),
    #[error("unbound variable: {0}")]
    UnboundVar(String),
}

/// Outcome of comparing a predicted expression against a reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MismatchClass {
    Equivalent,
    NumericSlip,
    SymbolicError,
    Incomparable,
}

/// Equivalence verdict with provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Equivalence {
    pub equivalent: bool,
    /// True when the verdict came from the random-substitution fallback
    /// rather than canonical-form or numeric comparison.
    pub probabilistic: bool,
    pub note: Option<String>,
}

impl Expr {
    pub fn int(v: i64) -> Expr {
        Expr::Num(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn as_number(&self) -> Option<&BigRational> {
        match self {
            Expr::Num(r) => Some(r),
            _ => None,
        }
    }

    /// Variables appearing anywhere in the tree, sorted and deduplicated.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => out.push(v.clone()),
            Expr::Neg(e) | Expr::Pow(e, _) => e.collect_vars(out),
            Expr::Add(xs) | Expr::Mul(xs) => {
                for x in xs {
                    x.collect_vars(out);
                }
            }
            Expr::Sub(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(r) => {
                if r.is_integer() {
                    write!(f, "{}", r.numer())
                } else {
                    write!(f, "{}/{}", r.numer(), r.denom())
                }
            }
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Add(xs) => write_joined(f, xs, " + "),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(xs) => write_joined(f, xs, "*"),
            Expr::Div(a, b) => write!(f, "({a})/({b})"),
            Expr::Pow(b, e) => write!(f, "({b})^{e}"),
        }
    }
}

fn write_joined(f: &mut fmt::Formatter<'_>, xs: &[Expr], sep: &str) -> fmt::Result {
    write!(f, "(")?;
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            write!(f, "{sep}")?;
        }
        write!(f, "{x}")?;
    }
    write!(f, ")")
}

/// Exact evaluation under a variable assignment.
pub fn eval(e: &Expr, env: &BTreeMap<String, BigRational>) -> Result<BigRational, ExprError> {
    match e {
        Expr::Num(r) => Ok(r.clone()),
        Expr::Var(v) => env
            .get(v)
            .cloned()
            .ok_or_else(|| ExprError::UnboundVar(v.clone())),
        Expr::Neg(x) => Ok(-eval(x, env)?),
        Expr::Add(xs) => {
            let mut acc = BigRational::zero();
            for x in xs {
                acc += eval(x, env)?;
            }
            Ok(acc)
        }
        Expr::Sub(a, b) => Ok(eval(a, env)? - eval(b, env)?),
        Expr::Mul(xs) => {
            let mut acc = BigRational::one();
            for x in xs {
                acc *= eval(x, env)?;
            }
            Ok(acc)
        }
        Expr::Div(a, b) => {
            let d = eval(b, env)?;
            if d.is_zero() {
                return Err(ExprError::Undefined("division by zero".into()));
            }
            Ok(eval(a, env)? / d)
        }
        Expr::Pow(b, k) => {
            let base = eval(b, env)?;
            rational_pow(&base, *k)
        }
    }
}

pub(crate) fn rational_pow(base: &BigRational, k: i32) -> Result<BigRational, ExprError> {
    if k == 0 {
        return Ok(BigRational::one());
    }
    if base.is_zero() && k < 0 {
        return Err(ExprError::Undefined("zero raised to a negative power".into()));
    }
    let mut acc = BigRational::one();
    for _ in 0..k.unsigned_abs() {
        acc *= base;
    }
    if k < 0 {
        acc = acc.recip();
    }
    Ok(acc)
}

/// Fixed total order on canonical trees: literals by value, then variables
/// lexicographically, then composites by structure.
pub(crate) fn cmp_expr(a: &Expr, b: &Expr) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    fn rank(e: &Expr) -> u8 {
        match e {
            Expr::Num(_) => 0,
            Expr::Var(_) => 1,
            Expr::Add(_) => 2,
            Expr::Mul(_) => 3,
            Expr::Div(_, _) => 4,
            Expr::Pow(_, _) => 5,
            Expr::Neg(_) => 6,
            Expr::Sub(_, _) => 7,
        }
    }
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => x.cmp(y),
        (Expr::Var(x), Expr::Var(y)) => x.cmp(y),
        (Expr::Add(xs), Expr::Add(ys)) | (Expr::Mul(xs), Expr::Mul(ys)) => {
            for (x, y) in xs.iter().zip(ys.iter()) {
                let c = cmp_expr(x, y);
                if c != Ordering::Equal {
                    return c;
                }
            }
            xs.len().cmp(&ys.len())
        }
        (Expr::Div(ax, ay), Expr::Div(bx, by)) => {
            cmp_expr(ax, bx).then_with(|| cmp_expr(ay, by))
        }
        (Expr::Pow(ab, ae), Expr::Pow(bb, be)) => cmp_expr(ab, bb).then_with(|| ae.cmp(be)),
        (Expr::Neg(x), Expr::Neg(y)) => cmp_expr(x, y),
        (Expr::Sub(ax, ay), Expr::Sub(bx, by)) => {
            cmp_expr(ax, bx).then_with(|| cmp_expr(ay, by))
        }
        _ => rank(a).cmp(&rank(b)),
    }
}

const SUBSTITUTION_SEED: u64 = 0x636f_7463_6865_636b;
const SUBSTITUTION_DRAWS: usize = 20;
const SUBSTITUTION_MAX_ATTEMPTS: usize = 400;

/// Decide equivalence of two expressions.
///
/// Canonical equality and the relaxed numeric comparison are exact-path
/// verdicts; when canonical forms differ, agreement of 20 seeded random
/// rational substitutions (within 1e-9 relative) yields a probabilistic
/// `true`.
pub fn equivalence(a: &Expr, b: &Expr) -> Equivalence {
    let ca = canonicalize(a);
    let cb = canonicalize(b);
    let (ca, cb) = match (ca, cb) {
        (Ok(x), Ok(y)) => (x, y),
        _ => {
            return Equivalence {
                equivalent: false,
                probabilistic: false,
                note: Some("undefined operand".into()),
            }
        }
    };
    if ca == cb {
        return Equivalence {
            equivalent: true,
            probabilistic: false,
            note: None,
        };
    }
    if let (Expr::Num(x), Expr::Num(y)) = (&ca, &cb) {
        let xv = x.to_f64().unwrap_or(f64::NAN);
        let yv = y.to_f64().unwrap_or(f64::NAN);
        let tol = 1e-6 * yv.abs().max(1.0);
        return Equivalence {
            equivalent: (xv - yv).abs() <= tol,
            probabilistic: false,
            note: None,
        };
    }
    substitution_agreement(a, b)
}

/// Convenience wrapper over [`equivalence`].
pub fn equivalent(a: &Expr, b: &Expr) -> bool {
    equivalence(a, b).equivalent
}

fn substitution_agreement(a: &Expr, b: &Expr) -> Equivalence {
    let mut vars = a.variables();
    vars.extend(b.variables());
    vars.sort();
    vars.dedup();

    let mut rng = ChaCha8Rng::seed_from_u64(SUBSTITUTION_SEED);
    let mut agreed = 0;
    let mut attempts = 0;
    while agreed < SUBSTITUTION_DRAWS && attempts < SUBSTITUTION_MAX_ATTEMPTS {
        attempts += 1;
        let env: BTreeMap<String, BigRational> = vars
            .iter()
            .map(|v| {
                let numer = rng.gen_range(-12i64..=12);
                let denom = rng.gen_range(1i64..=7);
                (
                    v.clone(),
                    BigRational::new(BigInt::from(numer), BigInt::from(denom)),
                )
            })
            .collect();
        let (va, vb) = match (eval(a, &env), eval(b, &env)) {
            (Ok(x), Ok(y)) => (x, y),
            // draw hit a singular point of either expression: redraw
            _ => continue,
        };
        let xa = va.to_f64().unwrap_or(f64::NAN);
        let xb = vb.to_f64().unwrap_or(f64::NAN);
        if (xa - xb).abs() > 1e-9 * xb.abs().max(1.0) {
            return Equivalence {
                equivalent: false,
                probabilistic: false,
                note: None,
            };
        }
        agreed += 1;
    }
    if agreed == SUBSTITUTION_DRAWS {
        Equivalence {
            equivalent: true,
            probabilistic: true,
            note: Some("verified by random substitution".into()),
        }
    } else {
        Equivalence {
            equivalent: false,
            probabilistic: false,
            note: Some("insufficient defined substitution draws".into()),
        }
    }
}

/// Classify a predicted expression against a reference one.
pub fn classify_mismatch(pred: &Expr, reference: &Expr) -> MismatchClass {
    let cp = canonicalize(pred);
    let cr = canonicalize(reference);
    let (cp, cr) = match (cp, cr) {
        (Ok(x), Ok(y)) => (x, y),
        _ => return MismatchClass::Incomparable,
    };
    if equivalence(pred, reference).equivalent {
        return MismatchClass::Equivalent;
    }
    if isomorphic_up_to_literals(&cp, &cr) {
        return MismatchClass::NumericSlip;
    }
    MismatchClass::SymbolicError
}

/// Classify two raw texts; parse failure on either side is the
/// `Incomparable` sink.
pub fn classify_texts(pred: &str, reference: &str) -> MismatchClass {
    match (parse_expr(pred), parse_expr(reference)) {
        (Ok(p), Ok(r)) => classify_mismatch(&p, &r),
        _ => MismatchClass::Incomparable,
    }
}

/// Same shape, same operators, same variable leaves; literal values free.
fn isomorphic_up_to_literals(a: &Expr, b: &Expr) -> bool {
    match (a, b) {
        (Expr::Num(_), Expr::Num(_)) => true,
        (Expr::Var(x), Expr::Var(y)) => x == y,
        (Expr::Neg(x), Expr::Neg(y)) => isomorphic_up_to_literals(x, y),
        (Expr::Add(xs), Expr::Add(ys)) | (Expr::Mul(xs), Expr::Mul(ys)) => {
            xs.len() == ys.len()
                && xs
                    .iter()
                    .zip(ys.iter())
                    .all(|(x, y)| isomorphic_up_to_literals(x, y))
        }
        (Expr::Sub(ax, ay), Expr::Sub(bx, by)) | (Expr::Div(ax, ay), Expr::Div(bx, by)) => {
            isomorphic_up_to_literals(ax, bx) && isomorphic_up_to_literals(ay, by)
        }
        (Expr::Pow(ab, ae), Expr::Pow(bb, be)) => ae == be && isomorphic_up_to_literals(ab, bb),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        parse_expr(s).unwrap_or_else(|e| panic!("parse {s:?}: {e}"))
    }

    #[test]
    fn constant_expressions_compare() {
        assert!(equivalent(&p("14"), &p("2*7")));
        assert!(equivalent(&p("0.5"), &p("1/2")));
        assert!(!equivalent(&p("14"), &p("15")));
    }

    #[test]
    fn relaxed_numeric_tolerance() {
        // 3.3e-7 relative: inside the 1e-6 band
        assert!(equivalent(&p("0.333333"), &p("1/3")));
        // 1e-4 relative: outside
        assert!(!equivalent(&p("0.3333"), &p("1/3")));
    }

    #[test]
    fn binomial_square_is_exact_equivalence() {
        let e = equivalence(&p("(a+b)^2"), &p("a^2+2*a*b+b^2"));
        assert!(e.equivalent);
        assert!(!e.probabilistic, "should match canonically, not by sampling");
    }

    #[test]
    fn area_is_not_perimeter() {
        assert!(!equivalent(&p("l*w"), &p("2*(l+w)")));
        assert_eq!(classify_texts("l*w", "2*(l+w)"), MismatchClass::SymbolicError);
    }

    #[test]
    fn literal_slip_is_numeric() {
        assert_eq!(
            classify_texts("2*(3+5)", "2*(3+4)"),
            MismatchClass::NumericSlip
        );
    }

    #[test]
    fn parse_failure_is_incomparable() {
        assert_eq!(classify_texts("hello there", "14"), MismatchClass::Incomparable);
    }

    #[test]
    fn self_classification_is_equivalent() {
        for s in ["x", "2*(3+4)", "a^2+2*a*b+b^2", "1/2", "x/y"] {
            assert_eq!(
                classify_texts(s, s),
                MismatchClass::Equivalent,
                "case {s}"
            );
        }
    }

    #[test]
    fn undefined_operands_are_never_equivalent() {
        let e = equivalence(&p("1/0"), &p("1/0"));
        assert!(!e.equivalent);
        assert!(e.note.is_some());
    }

    #[test]
    fn probabilistic_fallback_fires_on_rational_identities() {
        // (x+1)/(x+1) does not cancel canonically; substitution agrees.
        let e = equivalence(&p("(x+1)/(x+1)"), &p("1"));
        assert!(e.equivalent);
        assert!(e.probabilistic);
    }

    #[test]
    fn equivalence_is_reflexive_and_symmetric() {
        let cases = ["x+y", "2x+1", "x^2", "3/4*x"];
        for s in cases {
            assert!(equivalent(&p(s), &p(s)), "reflexive {s}");
        }
        for a in cases {
            for b in cases {
                assert_eq!(
                    equivalent(&p(a), &p(b)),
                    equivalent(&p(b), &p(a)),
                    "symmetric {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn exponent_mismatch_is_symbolic() {
        assert_eq!(classify_texts("x^2", "x^3"), MismatchClass::SymbolicError);
    }
}
