//! Truncated graded-commutative polynomial rings over the rationals, presented
//! by monomial rewrite rules.
//!
//! Every Chow ring in the crate is a [`RingModel`]: a list of graded
//! generators, a top degree, and an ordered list of rules `monomial -> poly`.
//! Elements are [`GradedPoly`] values that always carry the model they live in.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::sync::{Arc, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Exact rational coefficient.
pub type Coeff = BigRational;

/// Sparse term map. Monomials are kept in their trimmed canonical form.
pub type Terms = BTreeMap<Monomial, Coeff>;

/// Default number of rewrite rounds before a rule set is declared non-terminating.
pub const DEFAULT_MAX_REWRITE: usize = 10_000;

/// Environment variable overriding [`DEFAULT_MAX_REWRITE`].
pub const MAX_REWRITE_ENV: &str = "NODAL_ENUM_MAX_REWRITE";

static NEXT_RING_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RingError {
    #[error("operands live in different ring models ({0} vs {1})")]
    ModelMismatch(String, String),
    #[error("unknown generator `{0}`")]
    UnknownVar(String),
    #[error("duplicate generator `{0}`")]
    DuplicateVar(String),
    #[error("generator `{0}` must have degree >= 1")]
    ZeroDegree(String),
    #[error("rule `{lhs}` is not homogeneous: rhs term `{term}` has a different degree")]
    InhomogeneousRule { lhs: String, term: String },
    #[error("rule `{lhs}` does not dominate its rhs term `{term}` in the monomial order")]
    NonDecreasingRule { lhs: String, term: String },
    #[error("rewriting did not reach a normal form after {0} rounds")]
    NonTerminating(usize),
    #[error("ring `{0}` has no point class")]
    NoPointClass(String),
    #[error("top-degree monomial `{0}` is not reduced to the point class")]
    IncompleteRelations(String),
    #[error("polynomial uses generators outside ring `{0}`")]
    NotInSubring(String),
    #[error("expression is not a monomial")]
    NotMonomial,
}

pub type Result<T> = std::result::Result<T, RingError>;

/// Integer as an exact coefficient.
pub fn rat(n: i64) -> Coeff {
    BigRational::from_integer(BigInt::from(n))
}

fn max_rewrite_from_env() -> usize {
    static CAP: OnceLock<usize> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var(MAX_REWRITE_ENV)
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .filter(|&n: &usize| n > 0)
            .unwrap_or(DEFAULT_MAX_REWRITE)
    })
}

/// A generator with its cohomological degree.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GradedVar {
    pub name: String,
    pub degree: u32,
}

/// Exponent vector indexed by generator position. Trailing zeros are trimmed,
/// so a monomial of a ring is also a valid monomial of every extension of it.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial(Vec<u16>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn from_exponents(mut exps: Vec<u16>) -> Self {
        while exps.last() == Some(&0) {
            exps.pop();
        }
        Monomial(exps)
    }

    /// `var^exp` for a single generator index.
    pub fn var(index: usize, exp: u16) -> Self {
        let mut v = vec![0; index + 1];
        v[index] = exp;
        Monomial::from_exponents(v)
    }

    pub fn from_pairs(pairs: &[(usize, u16)]) -> Self {
        let len = pairs.iter().map(|&(i, _)| i + 1).max().unwrap_or(0);
        let mut v = vec![0; len];
        for &(i, e) in pairs {
            v[i] += e;
        }
        Monomial::from_exponents(v)
    }

    pub fn exponents(&self) -> &[u16] {
        &self.0
    }

    pub fn exp(&self, index: usize) -> u16 {
        self.0.get(index).copied().unwrap_or(0)
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    /// Highest generator index used, if any.
    pub fn top_index(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (long, short) = if self.0.len() >= other.0.len() {
            (&self.0, &other.0)
        } else {
            (&other.0, &self.0)
        };
        let mut v = long.clone();
        for (a, b) in v.iter_mut().zip(short) {
            *a += *b;
        }
        Monomial(v)
    }

    pub fn divides(&self, other: &Monomial) -> bool {
        self.0.len() <= other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// `other / self`; caller guarantees divisibility.
    pub fn quotient_of(&self, other: &Monomial) -> Monomial {
        let mut v = other.0.clone();
        for (a, b) in v.iter_mut().zip(&self.0) {
            *a -= *b;
        }
        Monomial::from_exponents(v)
    }

    /// Returns the monomial with generator `index` removed, and its exponent.
    pub fn split_off(&self, index: usize) -> (Monomial, u16) {
        let e = self.exp(index);
        if e == 0 {
            return (self.clone(), 0);
        }
        let mut v = self.0.clone();
        v[index] = 0;
        (Monomial::from_exponents(v), e)
    }

    /// Splits into the part supported on `index >= start` and the rest.
    pub fn split_at(&self, start: usize) -> (Monomial, Monomial) {
        if self.0.len() <= start {
            return (self.clone(), Monomial::one());
        }
        let low = Monomial::from_exponents(self.0[..start].to_vec());
        let mut high = vec![0; self.0.len()];
        high[start..].copy_from_slice(&self.0[start..]);
        (low, Monomial::from_exponents(high))
    }

    fn support_mask(&self) -> u128 {
        let mut mask = 0u128;
        for (i, &e) in self.0.iter().enumerate() {
            if e > 0 {
                mask |= 1u128 << (i % 128);
            }
        }
        mask
    }
}

/// A rewrite rule `lhs -> rhs`, with `rhs` homogeneous of the degree of `lhs`.
#[derive(Clone, Debug)]
pub struct RewriteRule {
    pub lhs: Monomial,
    pub rhs: Terms,
    mask: u128,
}

impl RewriteRule {
    pub fn new(lhs: Monomial, rhs: Terms) -> Self {
        let mask = lhs.support_mask();
        RewriteRule { lhs, rhs, mask }
    }
}

/// A truncated graded ring presented by generators and rewrite rules.
#[derive(Debug)]
pub struct RingModel {
    id: u64,
    lineage: Vec<u64>,
    name: String,
    vars: Vec<GradedVar>,
    dim: u32,
    rules: Vec<RewriteRule>,
    point_class: Option<Monomial>,
    max_rewrite: usize,
    ancestor_bounds: Vec<(usize, u32)>,
}

/// Incremental constructor for [`RingModel`].
#[derive(Clone, Debug)]
pub struct RingBuilder {
    lineage: Vec<u64>,
    name: String,
    vars: Vec<GradedVar>,
    dim: u32,
    rules: Vec<RewriteRule>,
    point_class: Option<Monomial>,
    max_rewrite: usize,
    ancestor_bounds: Vec<(usize, u32)>,
}

impl RingBuilder {
    pub fn new(name: impl Into<String>, dim: u32) -> Self {
        RingBuilder {
            lineage: Vec::new(),
            name: name.into(),
            vars: Vec::new(),
            dim,
            rules: Vec::new(),
            point_class: None,
            max_rewrite: max_rewrite_from_env(),
            ancestor_bounds: Vec::new(),
        }
    }

    pub fn var(&mut self, name: impl Into<String>, degree: u32) -> Result<usize> {
        let name = name.into();
        if degree == 0 {
            return Err(RingError::ZeroDegree(name));
        }
        if self.vars.iter().any(|v| v.name == name) {
            return Err(RingError::DuplicateVar(name));
        }
        self.vars.push(GradedVar { name, degree });
        Ok(self.vars.len() - 1)
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| RingError::UnknownVar(name.to_string()))
    }

    pub fn vars(&self) -> &[GradedVar] {
        &self.vars
    }

    pub fn set_dim(&mut self, dim: u32) -> &mut Self {
        self.dim = dim;
        self
    }

    pub fn set_max_rewrite(&mut self, cap: usize) -> &mut Self {
        self.max_rewrite = cap.max(1);
        self
    }

    pub fn set_point_class(&mut self, m: Monomial) -> &mut Self {
        self.point_class = Some(m);
        self
    }

    fn degree(&self, m: &Monomial) -> u32 {
        weighted_degree(&self.vars, m)
    }

    /// Appends a rule after checking homogeneity and that `lhs` strictly
    /// dominates every rhs monomial in the monomial order.
    pub fn rule(&mut self, lhs: Monomial, rhs: Terms) -> Result<&mut Self> {
        let d = self.degree(&lhs);
        for m in rhs.keys() {
            if self.degree(m) != d {
                return Err(RingError::InhomogeneousRule {
                    lhs: render_monomial(&self.vars, &lhs),
                    term: render_monomial(&self.vars, m),
                });
            }
            if monomial_cmp(&self.vars, &lhs, m) != Ordering::Greater {
                return Err(RingError::NonDecreasingRule {
                    lhs: render_monomial(&self.vars, &lhs),
                    term: render_monomial(&self.vars, m),
                });
            }
        }
        let rhs = rhs.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        self.rules.push(RewriteRule::new(lhs, rhs));
        Ok(self)
    }

    pub fn build(self) -> Arc<RingModel> {
        let id = NEXT_RING_ID.fetch_add(1, AtomicOrdering::Relaxed);
        let mut lineage = self.lineage;
        lineage.push(id);
        Arc::new(RingModel {
            id,
            lineage,
            name: self.name,
            vars: self.vars,
            dim: self.dim,
            rules: self.rules,
            point_class: self.point_class,
            max_rewrite: self.max_rewrite,
            ancestor_bounds: self.ancestor_bounds,
        })
    }
}

pub(crate) fn weighted_degree(vars: &[GradedVar], m: &Monomial) -> u32 {
    m.0.iter()
        .zip(vars)
        .map(|(&e, v)| e as u32 * v.degree)
        .sum()
}

/// Graded order: weighted degree first, then lexicographic with later-declared
/// generators most significant.
pub(crate) fn monomial_cmp(vars: &[GradedVar], a: &Monomial, b: &Monomial) -> Ordering {
    weighted_degree(vars, a)
        .cmp(&weighted_degree(vars, b))
        .then_with(|| {
            let n = a.0.len().max(b.0.len());
            for i in (0..n).rev() {
                match a.exp(i).cmp(&b.exp(i)) {
                    Ordering::Equal => continue,
                    o => return o,
                }
            }
            Ordering::Equal
        })
}

fn render_monomial(vars: &[GradedVar], m: &Monomial) -> String {
    if m.is_one() {
        return "1".to_string();
    }
    let mut parts = Vec::new();
    for (i, &e) in m.0.iter().enumerate() {
        let name = vars.get(i).map(|v| v.name.as_str()).unwrap_or("?");
        match e {
            0 => {}
            1 => parts.push(name.to_string()),
            _ => parts.push(format!("{name}^{e}")),
        }
    }
    parts.join("*")
}

fn add_term(terms: &mut Terms, m: Monomial, c: Coeff) {
    if c.is_zero() {
        return;
    }
    match terms.entry(m) {
        std::collections::btree_map::Entry::Vacant(v) => {
            v.insert(c);
        }
        std::collections::btree_map::Entry::Occupied(mut o) => {
            *o.get_mut() += c;
            if o.get().is_zero() {
                o.remove();
            }
        }
    }
}

impl RingModel {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn vars(&self) -> &[GradedVar] {
        &self.vars
    }

    pub fn rules(&self) -> &[RewriteRule] {
        &self.rules
    }

    pub fn point_class(&self) -> Option<&Monomial> {
        self.point_class.as_ref()
    }

    pub fn max_rewrite(&self) -> usize {
        self.max_rewrite
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| RingError::UnknownVar(name.to_string()))
    }

    pub fn degree_of(&self, m: &Monomial) -> u32 {
        weighted_degree(&self.vars, m)
    }

    pub fn cmp_monomials(&self, a: &Monomial, b: &Monomial) -> Ordering {
        monomial_cmp(&self.vars, a, b)
    }

    pub fn render_monomial(&self, m: &Monomial) -> String {
        render_monomial(&self.vars, m)
    }

    /// True when `self` was built by extending `other` (or is `other`).
    pub fn extends(&self, other: &RingModel) -> bool {
        self.lineage.contains(&other.id)
    }

    /// A builder pre-filled with this ring's generators, rules and cap, so the
    /// new ring embeds this one as a prefix.
    pub fn extend(&self, name: impl Into<String>) -> RingBuilder {
        RingBuilder {
            lineage: self.lineage.clone(),
            name: name.into(),
            vars: self.vars.clone(),
            dim: self.dim,
            rules: self.rules.clone(),
            point_class: None,
            max_rewrite: self.max_rewrite,
            ancestor_bounds: self.ancestor_bounds_extended(),
        }
    }

    fn ancestor_bounds_extended(&self) -> Vec<(usize, u32)> {
        let mut b = self.ancestor_bounds.clone();
        b.push((self.vars.len(), self.dim));
        b
    }

    /// Zero by degree: above the ring dimension, or above an ancestor's
    /// dimension in that ancestor's generators.
    fn vanishes_by_degree(&self, m: &Monomial) -> bool {
        if self.degree_of(m) > self.dim {
            return true;
        }
        self.ancestor_bounds
            .iter()
            .any(|&(n, d)| weighted_degree(&self.vars[..n], m) > d)
    }

    fn find_rule(&self, m: &Monomial, reversed: bool) -> Option<&RewriteRule> {
        let mask = m.support_mask();
        let hit = |r: &&RewriteRule| r.mask & !mask == 0 && r.lhs.divides(m);
        if reversed {
            self.rules.iter().rev().find(hit)
        } else {
            self.rules.iter().find(hit)
        }
    }

    /// Rewrites to the fixpoint of rule application plus truncation above `dim`.
    pub fn normalize_terms(&self, input: Terms) -> Result<Terms> {
        self.reduce(input, false)
    }

    /// Normal form with rule priority reversed; equals [`Self::normalize_terms`]
    /// whenever the rule set is confluent.
    pub fn normalize_terms_reversed(&self, input: Terms) -> Result<Terms> {
        self.reduce(input, true)
    }

    fn reduce(&self, input: Terms, reversed: bool) -> Result<Terms> {
        let mut out = Terms::new();
        let mut pending = input;
        let mut rounds = 0usize;
        while !pending.is_empty() {
            if rounds > self.max_rewrite {
                return Err(RingError::NonTerminating(self.max_rewrite));
            }
            rounds += 1;
            let mut next = Terms::new();
            for (m, c) in pending {
                if self.vanishes_by_degree(&m) {
                    continue;
                }
                match self.find_rule(&m, reversed) {
                    None => add_term(&mut out, m, c),
                    Some(rule) => {
                        let rest = rule.lhs.quotient_of(&m);
                        for (rm, rc) in &rule.rhs {
                            add_term(&mut next, rest.mul(rm), &c * rc);
                        }
                    }
                }
            }
            pending = next;
        }
        Ok(out)
    }

    fn check_terms(&self, terms: &Terms) -> Result<()> {
        if let Some(m) = terms.keys().find(|m| m.0.len() > self.vars.len()) {
            let _ = m;
            return Err(RingError::NotInSubring(self.name.clone()));
        }
        Ok(())
    }
}

/// Element of a [`RingModel`]. Always stored in normal form.
#[derive(Clone)]
pub struct GradedPoly {
    ring: Arc<RingModel>,
    terms: Terms,
}

impl PartialEq for GradedPoly {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.ring, &other.ring) && self.terms == other.terms
    }
}

impl Eq for GradedPoly {}

impl fmt::Debug for GradedPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GradedPoly[{}]({})", self.ring.name, self)
    }
}

/// Ring-level constructors.
#[allow(clippy::wrong_self_convention)]
pub trait RingExt {
    fn zero(&self) -> GradedPoly;
    fn one(&self) -> GradedPoly;
    fn constant(&self, c: Coeff) -> GradedPoly;
    fn int(&self, n: i64) -> GradedPoly;
    fn gen(&self, name: &str) -> Result<GradedPoly>;
    fn gen_at(&self, index: usize) -> GradedPoly;
    fn monomial(&self, m: Monomial, c: Coeff) -> Result<GradedPoly>;
    fn from_terms(&self, terms: Terms) -> Result<GradedPoly>;
    fn embed(&self, p: &GradedPoly) -> Result<GradedPoly>;
    fn restrict(&self, p: &GradedPoly) -> Result<GradedPoly>;
}

impl RingExt for Arc<RingModel> {
    fn zero(&self) -> GradedPoly {
        GradedPoly {
            ring: self.clone(),
            terms: Terms::new(),
        }
    }

    fn one(&self) -> GradedPoly {
        self.constant(Coeff::one())
    }

    fn constant(&self, c: Coeff) -> GradedPoly {
        let mut terms = Terms::new();
        add_term(&mut terms, Monomial::one(), c);
        GradedPoly {
            ring: self.clone(),
            terms,
        }
    }

    fn int(&self, n: i64) -> GradedPoly {
        self.constant(rat(n))
    }

    fn gen(&self, name: &str) -> Result<GradedPoly> {
        let i = self.index_of(name)?;
        Ok(self.gen_at(i))
    }

    /// The generator at `index`, normalized (it may itself be rewritten).
    fn gen_at(&self, index: usize) -> GradedPoly {
        assert!(index < self.vars.len(), "generator index out of range");
        self.monomial(Monomial::var(index, 1), Coeff::one())
            .expect("single generator is always in range")
    }

    fn monomial(&self, m: Monomial, c: Coeff) -> Result<GradedPoly> {
        let mut terms = Terms::new();
        add_term(&mut terms, m, c);
        self.from_terms(terms)
    }

    fn from_terms(&self, terms: Terms) -> Result<GradedPoly> {
        self.check_terms(&terms)?;
        Ok(GradedPoly {
            ring: self.clone(),
            terms: self.normalize_terms(terms)?,
        })
    }

    /// Pulls a class from a ring this one extends.
    fn embed(&self, p: &GradedPoly) -> Result<GradedPoly> {
        if Arc::ptr_eq(self, &p.ring) {
            return Ok(p.clone());
        }
        if !self.extends(&p.ring) {
            return Err(RingError::ModelMismatch(
                self.name.clone(),
                p.ring.name.clone(),
            ));
        }
        self.from_terms(p.terms.clone())
    }

    /// Reads a class of an extension as a class of this ring; fails if it
    /// involves generators this ring does not have.
    fn restrict(&self, p: &GradedPoly) -> Result<GradedPoly> {
        if !p.ring.extends(self) {
            return Err(RingError::ModelMismatch(
                self.name.clone(),
                p.ring.name.clone(),
            ));
        }
        self.from_terms(p.terms.clone())
    }
}

impl GradedPoly {
    pub fn ring(&self) -> &Arc<RingModel> {
        &self.ring
    }

    pub fn terms(&self) -> &Terms {
        &self.terms
    }

    pub fn into_terms(self) -> Terms {
        self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn same_model(&self, other: &GradedPoly) -> bool {
        Arc::ptr_eq(&self.ring, &other.ring)
    }

    fn check_same(&self, other: &GradedPoly) -> Result<()> {
        if self.same_model(other) {
            Ok(())
        } else {
            Err(RingError::ModelMismatch(
                self.ring.name.clone(),
                other.ring.name.clone(),
            ))
        }
    }

    /// Coefficient of a monomial in the normal form.
    pub fn coeff(&self, m: &Monomial) -> Coeff {
        self.terms.get(m).cloned().unwrap_or_else(Coeff::zero)
    }

    pub fn constant_term(&self) -> Coeff {
        self.coeff(&Monomial::one())
    }

    pub fn checked_add(&self, other: &GradedPoly) -> Result<GradedPoly> {
        self.check_same(other)?;
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            add_term(&mut terms, m.clone(), c.clone());
        }
        Ok(GradedPoly {
            ring: self.ring.clone(),
            terms,
        })
    }

    pub fn checked_sub(&self, other: &GradedPoly) -> Result<GradedPoly> {
        self.check_same(other)?;
        self.checked_add(&other.neg())
    }

    pub fn checked_mul(&self, other: &GradedPoly) -> Result<GradedPoly> {
        self.check_same(other)?;
        let dim = self.ring.dim;
        let mut terms = Terms::new();
        let other_deg: Vec<_> = other
            .terms
            .iter()
            .map(|(m, c)| (m, c, self.ring.degree_of(m)))
            .collect();
        for (a, ca) in &self.terms {
            let da = self.ring.degree_of(a);
            for (b, cb, db) in &other_deg {
                if da + db > dim {
                    continue;
                }
                add_term(&mut terms, a.mul(b), ca * *cb);
            }
        }
        Ok(GradedPoly {
            ring: self.ring.clone(),
            terms: self.ring.normalize_terms(terms)?,
        })
    }

    pub fn neg(&self) -> GradedPoly {
        GradedPoly {
            ring: self.ring.clone(),
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn scale(&self, c: &Coeff) -> GradedPoly {
        if c.is_zero() {
            return self.ring.zero();
        }
        GradedPoly {
            ring: self.ring.clone(),
            terms: self.terms.iter().map(|(m, x)| (m.clone(), x * c)).collect(),
        }
    }

    pub fn pow(&self, k: u32) -> GradedPoly {
        let mut acc = self.ring.one();
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Homogeneous component of the given degree.
    pub fn part(&self, degree: u32) -> GradedPoly {
        GradedPoly {
            ring: self.ring.clone(),
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| self.ring.degree_of(m) == degree)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    /// Highest degree with a nonzero component, or `None` for zero.
    pub fn max_degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| self.ring.degree_of(m)).max()
    }

    pub fn is_homogeneous(&self, degree: u32) -> bool {
        self.terms.keys().all(|m| self.ring.degree_of(m) == degree)
    }

    /// Idempotent re-normalization (values are already normal).
    pub fn normalize(&self) -> Result<GradedPoly> {
        self.ring.from_terms(self.terms.clone())
    }

    /// Degree of the class against the ring's point class.
    pub fn integrate(&self) -> Result<Coeff> {
        let point = self
            .ring
            .point_class
            .as_ref()
            .ok_or_else(|| RingError::NoPointClass(self.ring.name.clone()))?;
        let mut total = Coeff::zero();
        for (m, c) in &self.terms {
            if self.ring.degree_of(m) < self.ring.dim {
                continue;
            }
            if m == point {
                total += c;
            } else {
                return Err(RingError::IncompleteRelations(self.ring.render_monomial(m)));
            }
        }
        Ok(total)
    }

    /// Applies a generator substitution `index -> target index` into `target`.
    /// Generators mapped to `None` must not occur.
    pub fn rename(&self, target: &Arc<RingModel>, map: &[Option<usize>]) -> Result<GradedPoly> {
        let mut terms = Terms::new();
        for (m, c) in &self.terms {
            let mut v = vec![0u16; target.vars.len()];
            for (i, &e) in m.exponents().iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let j = map
                    .get(i)
                    .copied()
                    .flatten()
                    .ok_or_else(|| RingError::NotInSubring(target.name.clone()))?;
                v[j] += e;
            }
            add_term(&mut terms, Monomial::from_exponents(v), c.clone());
        }
        target.from_terms(terms)
    }

    /// Substitutes a polynomial of `target` for each generator.
    pub fn substitute(&self, target: &Arc<RingModel>, images: &[GradedPoly]) -> Result<GradedPoly> {
        let mut acc = target.zero();
        for (m, c) in &self.terms {
            let mut t = target.constant(c.clone());
            for (i, &e) in m.exponents().iter().enumerate() {
                if e > 0 {
                    let img = images
                        .get(i)
                        .ok_or_else(|| RingError::NotInSubring(target.name.clone()))?;
                    t = t.checked_mul(&img.pow(e as u32))?;
                }
            }
            acc = acc.checked_add(&t)?;
        }
        Ok(acc)
    }

    /// Terms sorted in decreasing monomial order.
    pub fn sorted_terms(&self) -> Vec<(&Monomial, &Coeff)> {
        let mut v: Vec<_> = self.terms.iter().collect();
        v.sort_by(|a, b| self.ring.cmp_monomials(b.0, a.0));
        v
    }
}

fn fmt_coeff(c: &Coeff) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

impl fmt::Display for GradedPoly {
    /// Canonical text form: `c1*m1 + c2*m2 - ...` in decreasing monomial order.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.sorted_terms().into_iter().enumerate() {
            let (sign, abs) = if c.is_negative() {
                ("-", -c.clone())
            } else {
                ("+", c.clone())
            };
            if k == 0 {
                if sign == "-" {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            if m.is_one() {
                write!(f, "{}", fmt_coeff(&abs))?;
            } else if abs.is_one() {
                write!(f, "{}", self.ring.render_monomial(m))?;
            } else {
                write!(f, "{}*{}", fmt_coeff(&abs), self.ring.render_monomial(m))?;
            }
        }
        Ok(())
    }
}

macro_rules! forward_op {
    ($tr:ident, $method:ident, $checked:ident) => {
        impl std::ops::$tr<&GradedPoly> for &GradedPoly {
            type Output = GradedPoly;
            /// Panics on model mismatch; use the `checked_*` form to get an error.
            fn $method(self, rhs: &GradedPoly) -> GradedPoly {
                self.$checked(rhs)
                    .expect(concat!(stringify!($method), " on graded polys"))
            }
        }
        impl std::ops::$tr<GradedPoly> for GradedPoly {
            type Output = GradedPoly;
            fn $method(self, rhs: GradedPoly) -> GradedPoly {
                (&self).$method(&rhs)
            }
        }
        impl std::ops::$tr<&GradedPoly> for GradedPoly {
            type Output = GradedPoly;
            fn $method(self, rhs: &GradedPoly) -> GradedPoly {
                (&self).$method(rhs)
            }
        }
    };
}

forward_op!(Add, add, checked_add);
forward_op!(Sub, sub, checked_sub);
forward_op!(Mul, mul, checked_mul);

impl std::ops::Neg for &GradedPoly {
    type Output = GradedPoly;
    fn neg(self) -> GradedPoly {
        GradedPoly::neg(self)
    }
}

impl std::ops::Neg for GradedPoly {
    type Output = GradedPoly;
    fn neg(self) -> GradedPoly {
        GradedPoly::neg(&self)
    }
}

/// Builds a [`Terms`] map from `(monomial, integer)` pairs.
pub fn terms_from(pairs: impl IntoIterator<Item = (Monomial, Coeff)>) -> Terms {
    let mut t = Terms::new();
    for (m, c) in pairs {
        add_term(&mut t, m, c);
    }
    t
}
