//! Canonicalization to a sorted sum-of-products normal form.
//!
//! Rules applied bottom-up: exact constant folding, elimination of `Neg`
//! and `Sub`, flattening and sorting of commutative operands under a fixed
//! total order, like-term collection over `+` with rational coefficients,
//! distribution of products over sums, and expansion of integer powers of
//! sums up to exponent 4. Larger exponents of sums and division by
//! non-constant expressions stay as opaque factors, where the
//! probabilistic substitution test takes over for equivalence.
//!
//! Division by an exact (possibly symbolic) zero surfaces as
//! [`ExprError::Undefined`].

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{cmp_expr, rational_pow, Expr, ExprError};

/// Expansion cap for integer powers of sums.
const EXPAND_MAX_EXPONENT: i32 = 4;

#[derive(Debug, Clone)]
struct Term {
    coef: BigRational,
    /// (base, exponent), sorted by base; exponents never zero, bases are
    /// canonical `Var`/`Add`/`Div`-free-of-constant trees.
    factors: Vec<(Expr, i32)>,
}

#[derive(Debug, Clone)]
struct Poly {
    terms: Vec<Term>,
}

impl Term {
    fn constant(c: BigRational) -> Term {
        Term {
            coef: c,
            factors: Vec::new(),
        }
    }

    fn mul(&self, other: &Term) -> Term {
        let mut factors = self.factors.clone();
        for (base, exp) in &other.factors {
            match factors.iter_mut().find(|(b, _)| b == base) {
                Some((_, e)) => *e += exp,
                None => factors.push((base.clone(), *exp)),
            }
        }
        factors.retain(|(_, e)| *e != 0);
        factors.sort_by(|a, b| cmp_expr(&a.0, &b.0));
        Term {
            coef: &self.coef * &other.coef,
            factors,
        }
    }

    fn powi(&self, k: i32) -> Result<Term, ExprError> {
        let coef = rational_pow(&self.coef, k)?;
        let factors = self
            .factors
            .iter()
            .map(|(b, e)| (b.clone(), e * k))
            .filter(|(_, e)| *e != 0)
            .collect();
        Ok(Term { coef, factors })
    }

    fn recip(&self) -> Result<Term, ExprError> {
        self.powi(-1)
    }
}

fn cmp_factors(a: &[(Expr, i32)], b: &[(Expr, i32)]) -> std::cmp::Ordering {
    for ((ba, ea), (bb, eb)) in a.iter().zip(b.iter()) {
        let c = cmp_expr(ba, bb).then_with(|| ea.cmp(eb));
        if c != std::cmp::Ordering::Equal {
            return c;
        }
    }
    a.len().cmp(&b.len())
}

/// A `(sum)^k` factor with a small positive exponent must be multiplied
/// out, or re-canonicalization would expand it and break idempotence.
fn is_expandable_factor(base: &Expr, exp: i32) -> bool {
    matches!(base, Expr::Add(_)) && (1..=EXPAND_MAX_EXPONENT).contains(&exp)
}

impl Poly {
    fn zero() -> Poly {
        Poly { terms: Vec::new() }
    }

    fn constant(c: BigRational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: vec![Term::constant(c)],
        }
    }

    fn one() -> Poly {
        Poly::constant(BigRational::one())
    }

    fn from_terms(terms: Vec<Term>) -> Poly {
        let mut work = terms;
        // exponent merging can leave (sum)^k factors with k in 1..=4;
        // multiply those out until the form is stable
        for _ in 0..64 {
            let mut merged = merge_terms(work);
            let Some(ti) = merged.iter().position(|t| {
                t.factors.iter().any(|(b, e)| is_expandable_factor(b, *e))
            }) else {
                return Poly { terms: merged };
            };
            let term = merged.swap_remove(ti);
            let fi = term
                .factors
                .iter()
                .position(|(b, e)| is_expandable_factor(b, *e))
                .expect("checked above");
            let (base, exp) = term.factors[fi].clone();
            let mut rest = term.factors;
            rest.remove(fi);
            let head = Term {
                coef: term.coef,
                factors: rest,
            };
            match to_poly(&base) {
                Ok(base_poly) => {
                    let mut expanded = vec![head];
                    for _ in 0..exp {
                        let mut next = Vec::with_capacity(expanded.len() * base_poly.terms.len());
                        for a in &expanded {
                            for b in &base_poly.terms {
                                next.push(a.mul(b));
                            }
                        }
                        expanded = next;
                    }
                    merged.extend(expanded);
                }
                // a canonical sum always re-polys cleanly; keep the factor
                // as-is if it somehow does not
                Err(_) => merged.push(Term {
                    coef: head.coef,
                    factors: {
                        let mut f = head.factors;
                        f.push((base, exp));
                        f.sort_by(|a, b| cmp_expr(&a.0, &b.0));
                        f
                    },
                }),
            }
            work = merged;
        }
        Poly {
            terms: merge_terms(work),
        }
    }

    fn add(&self, other: &Poly) -> Poly {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Poly::from_terms(terms)
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                terms.push(a.mul(b));
            }
        }
        Poly::from_terms(terms)
    }

    fn scale(&self, c: &BigRational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly::from_terms(
            self.terms
                .iter()
                .map(|t| Term {
                    coef: &t.coef * c,
                    factors: t.factors.clone(),
                })
                .collect(),
        )
    }

    fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 if self.terms[0].factors.is_empty() => Some(self.terms[0].coef.clone()),
            _ => None,
        }
    }

    fn single_term(&self) -> Option<&Term> {
        if self.terms.len() == 1 {
            Some(&self.terms[0])
        } else {
            None
        }
    }

    fn powi(&self, k: i32) -> Result<Poly, ExprError> {
        if k == 0 {
            return Ok(Poly::one());
        }
        if let Some(c) = self.as_constant() {
            return Ok(Poly::constant(rational_pow(&c, k)?));
        }
        if let Some(t) = self.single_term() {
            return Ok(Poly {
                terms: vec![t.powi(k)?],
            });
        }
        if (2..=EXPAND_MAX_EXPONENT).contains(&k) {
            let mut acc = self.clone();
            for _ in 1..k {
                acc = acc.mul(self);
            }
            return Ok(acc);
        }
        if k == 1 {
            return Ok(self.clone());
        }
        // exponent beyond the expansion cap, or negative power of a sum:
        // keep the whole sum as one opaque factor
        Ok(Poly {
            terms: vec![Term {
                coef: BigRational::one(),
                factors: vec![(rebuild(self), k)],
            }],
        })
    }

}

fn merge_terms(mut terms: Vec<Term>) -> Vec<Term> {
    terms.sort_by(|a, b| cmp_factors(&a.factors, &b.factors));
    let mut merged: Vec<Term> = Vec::with_capacity(terms.len());
    for t in terms {
        match merged.last_mut() {
            Some(last) if cmp_factors(&last.factors, &t.factors).is_eq() => {
                last.coef += &t.coef;
            }
            _ => merged.push(t),
        }
    }
    merged.retain(|t| !t.coef.is_zero());
    merged
}

/// Poly of `1/b`, preserving syntactic power structure so that rebuilt
/// denominators like `(x+z)^2` round-trip instead of being expanded on
/// the way back in.
fn invert_denominator(b: &Expr) -> Result<Poly, ExprError> {
    let direct = to_poly(b)?;
    if let Some(c) = direct.as_constant() {
        if c.is_zero() {
            return Err(ExprError::Undefined("division by zero".into()));
        }
        return Ok(Poly::constant(c.recip()));
    }
    match b {
        Expr::Mul(items) => {
            let mut acc = Poly::one();
            for item in items {
                acc = acc.mul(&invert_denominator(item)?);
            }
            Ok(acc)
        }
        Expr::Pow(inner, k) => to_poly(inner)?.powi(-k),
        _ => {
            if let Some(t) = direct.single_term() {
                return Ok(Poly {
                    terms: vec![t.recip()?],
                });
            }
            Ok(Poly {
                terms: vec![Term {
                    coef: BigRational::one(),
                    factors: vec![(rebuild(&direct), -1)],
                }],
            })
        }
    }
}

fn to_poly(e: &Expr) -> Result<Poly, ExprError> {
    match e {
        Expr::Num(r) => Ok(Poly::constant(r.clone())),
        Expr::Var(v) => Ok(Poly {
            terms: vec![Term {
                coef: BigRational::one(),
                factors: vec![(Expr::Var(v.clone()), 1)],
            }],
        }),
        Expr::Neg(x) => Ok(to_poly(x)?.scale(&-BigRational::one())),
        Expr::Add(xs) => {
            let mut acc = Poly::zero();
            for x in xs {
                acc = acc.add(&to_poly(x)?);
            }
            Ok(acc)
        }
        Expr::Sub(a, b) => Ok(to_poly(a)?.add(&to_poly(b)?.scale(&-BigRational::one()))),
        Expr::Mul(xs) => {
            let mut acc = Poly::one();
            for x in xs {
                acc = acc.mul(&to_poly(x)?);
            }
            Ok(acc)
        }
        Expr::Div(a, b) => Ok(to_poly(a)?.mul(&invert_denominator(b)?)),
        Expr::Pow(b, k) => to_poly(b)?.powi(*k),
    }
}

fn factor_expr(base: &Expr, exp: i32) -> Expr {
    debug_assert!(exp > 0);
    if exp == 1 {
        base.clone()
    } else {
        Expr::Pow(Box::new(base.clone()), exp)
    }
}

fn product_expr(items: Vec<Expr>) -> Expr {
    match items.len() {
        0 => Expr::Num(BigRational::one()),
        1 => items.into_iter().next().expect("len checked"),
        _ => Expr::Mul(items),
    }
}

fn term_expr(t: &Term) -> Expr {
    let pos: Vec<&(Expr, i32)> = t.factors.iter().filter(|(_, e)| *e > 0).collect();
    let neg: Vec<&(Expr, i32)> = t.factors.iter().filter(|(_, e)| *e < 0).collect();

    let mut num_items = Vec::new();
    if !t.coef.is_one() || pos.is_empty() {
        num_items.push(Expr::Num(t.coef.clone()));
    }
    for (base, exp) in &pos {
        num_items.push(factor_expr(base, *exp));
    }
    let numerator = product_expr(num_items);

    if neg.is_empty() {
        return numerator;
    }
    let den_items: Vec<Expr> = neg
        .iter()
        .map(|(base, exp)| factor_expr(base, -exp))
        .collect();
    Expr::Div(Box::new(numerator), Box::new(product_expr(den_items)))
}

fn rebuild(p: &Poly) -> Expr {
    match p.terms.len() {
        0 => Expr::Num(BigRational::zero()),
        1 => term_expr(&p.terms[0]),
        _ => Expr::Add(p.terms.iter().map(term_expr).collect()),
    }
}

/// Canonicalize an expression; returns the undefined marker for division
/// by an exact zero.
pub fn canonicalize(e: &Expr) -> Result<Expr, ExprError> {
    Ok(rebuild(&to_poly(e)?))
}
