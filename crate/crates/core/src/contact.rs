//! Singularity types, contact-sheaf classes on the blowup tower, degrees of
//! the loci `Σ(T)` and their assembly into node counts.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::binomial;
use num_traits::ToPrimitive;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::ring::{rat, Coeff, GradedPoly, RingError, RingExt};
use crate::sheaf::{jets, FormalSheaf, SheafError};
use crate::spaces::{SpaceError, SpaceModel, Tower};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContactError {
    #[error("cannot parse singularity type `{input}`: {reason}")]
    Parse { input: String, reason: String },
    #[error("unsupported singularity type {0}; computable types are (2^[k]) for k<=6, (3), (3,2), (3,2,2), (3(2))")]
    Unsupported(String),
    #[error("node count for n={0} is not supported (1..=6)")]
    UnsupportedN(u32),
    #[error("class of {ty} has degree {got}, but the tower level has dimension {expected}")]
    DegreeMismatch { ty: String, expected: u32, got: u32 },
    #[error("listing of {ty} needs {needed} points, not {n}")]
    ListingLength { ty: String, needed: u32, n: u32 },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Sheaf(#[from] SheafError),
    #[error(transparent)]
    Ring(#[from] RingError),
}

pub type Result<T> = std::result::Result<T, ContactError>;

/// One entry of a singularity type.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TypeEntry {
    pub multiplicity: u32,
    /// Number of consecutive copies, rendered as `m^[k]` when above 1.
    pub repeat: u32,
    /// Type imposed at an infinitely near point on the exceptional divisor.
    pub nested: Option<SingularityType>,
}

/// A possibly nested multiplicity sequence such as `(3,2)` or `(3(2))`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SingularityType {
    pub entries: Vec<TypeEntry>,
}

/// One point of the tower schedule: its multiplicity and whether it lies on
/// the exceptional divisor of the previous point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SchedulePoint {
    pub multiplicity: u32,
    pub infinitely_near: bool,
}

impl SingularityType {
    /// Flat type from a multiplicity list.
    pub fn flat(mults: &[u32]) -> Self {
        SingularityType {
            entries: mults
                .iter()
                .map(|&m| TypeEntry {
                    multiplicity: m,
                    repeat: 1,
                    nested: None,
                })
                .collect(),
        }
    }

    /// `(m^[k])`.
    pub fn repeated(m: u32, k: u32) -> Self {
        SingularityType {
            entries: vec![TypeEntry {
                multiplicity: m,
                repeat: k,
                nested: None,
            }],
        }
    }

    /// `(m(inner))`.
    pub fn nested(m: u32, inner: SingularityType) -> Self {
        SingularityType {
            entries: vec![TypeEntry {
                multiplicity: m,
                repeat: 1,
                nested: Some(inner),
            }],
        }
    }

    pub fn is_flat(&self) -> bool {
        self.entries.iter().all(|e| e.nested.is_none())
    }

    /// Multiplicities of all points, nested ones included, in tower order.
    pub fn multiplicities(&self) -> Vec<u32> {
        self.schedule().iter().map(|p| p.multiplicity).collect()
    }

    /// Tower order of the points.
    pub fn schedule(&self) -> Vec<SchedulePoint> {
        let mut out = Vec::new();
        self.push_schedule(false, &mut out);
        out
    }

    fn push_schedule(&self, first_near: bool, out: &mut Vec<SchedulePoint>) {
        for (i, e) in self.entries.iter().enumerate() {
            for r in 0..e.repeat {
                out.push(SchedulePoint {
                    multiplicity: e.multiplicity,
                    infinitely_near: first_near && i == 0 && r == 0,
                });
            }
            if let Some(inner) = &e.nested {
                inner.push_schedule(true, out);
            }
        }
    }

    /// Whether the degree of `Σ(T)` can be computed by the tower engine.
    pub fn is_certified(&self) -> bool {
        let s = self.schedule();
        let m: Vec<u32> = s.iter().map(|p| p.multiplicity).collect();
        let near: Vec<bool> = s.iter().map(|p| p.infinitely_near).collect();
        let none_near = near.iter().all(|b| !b);
        match m.as_slice() {
            [] => false,
            ms if ms.iter().all(|&x| x == 2) => ms.len() <= 6 && none_near,
            [3] | [3, 2, 2] => none_near,
            [3, 2] => none_near || near == [false, true],
            _ => false,
        }
    }
}

impl fmt::Display for SingularityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", e.multiplicity)?;
            if e.repeat != 1 {
                write!(f, "^[{}]", e.repeat)?;
            }
            if let Some(inner) = &e.nested {
                write!(f, "{inner}")?;
            }
        }
        write!(f, ")")
    }
}

struct Parser<'a> {
    src: &'a str,
    chars: Vec<char>,
    pos: usize,
}

impl Parser<'_> {
    fn err<T>(&self, reason: impl Into<String>) -> Result<T> {
        Err(ContactError::Parse {
            input: self.src.to_string(),
            reason: reason.into(),
        })
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{c}` at position {}", self.pos))
        }
    }

    fn int(&mut self) -> Result<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err(format!("expected an integer at position {start}"));
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        s.parse().or_else(|_| self.err("integer too large"))
    }

    fn ty(&mut self) -> Result<SingularityType> {
        self.expect('(')?;
        let mut entries = vec![self.entry()?];
        while self.peek() == Some(',') {
            self.pos += 1;
            entries.push(self.entry()?);
        }
        self.expect(')')?;
        Ok(SingularityType { entries })
    }

    fn entry(&mut self) -> Result<TypeEntry> {
        let m = self.int()?;
        if m < 2 {
            return self.err("multiplicities must be at least 2");
        }
        let mut e = TypeEntry {
            multiplicity: m,
            repeat: 1,
            nested: None,
        };
        match self.peek() {
            Some('^') => {
                self.pos += 1;
                self.expect('[')?;
                e.repeat = self.int()?;
                if e.repeat == 0 {
                    return self.err("repetition count must be positive");
                }
                self.expect(']')?;
            }
            Some('(') => e.nested = Some(self.ty()?),
            _ => {}
        }
        Ok(e)
    }
}

impl FromStr for SingularityType {
    type Err = ContactError;

    fn from_str(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut p = Parser {
            src: s,
            chars,
            pos: 0,
        };
        let t = p.ty()?;
        if p.pos != p.chars.len() {
            return p.err("trailing input");
        }
        Ok(t)
    }
}

/// Expected codimension `Σ binom(fiber_dim + m − 1, fiber_dim)`.
pub fn rho(t: &SingularityType, fiber_dim: u32) -> u64 {
    t.multiplicities()
        .iter()
        .map(|&m| {
            binomial(BigInt::from(fiber_dim + m - 1), BigInt::from(fiber_dim))
                .to_u64()
                .expect("small binomial")
        })
        .sum()
}

/// A family of surfaces (level 1 of a tower) with the line bundle whose
/// sections cut the curves.
#[derive(Clone, Debug)]
pub struct Family {
    pub space: Arc<SpaceModel>,
    pub lambda: GradedPoly,
}

impl Family {
    /// Uses the class stored under `lambda` on the space.
    pub fn from_space(space: &Arc<SpaceModel>) -> Result<Self> {
        let lambda = space.class("lambda")?.clone();
        Ok(Family {
            space: space.clone(),
            lambda,
        })
    }

    pub fn with_lambda(space: &Arc<SpaceModel>, lambda: GradedPoly) -> Result<Self> {
        let lambda = space.ring().embed(&lambda)?;
        Ok(Family {
            space: space.clone(),
            lambda,
        })
    }
}

/// Degree of `Σ(T)` using a prebuilt tower over the family.
pub fn sigma_degree_in(t: &SingularityType, family: &Family, tower: &Tower) -> Result<Coeff> {
    if !t.is_certified() {
        return Err(ContactError::Unsupported(t.to_string()));
    }
    let sched = t.schedule();
    let r = sched.len() as u32;
    if r > tower.depth() {
        return Err(SpaceError::TowerTooDeep(r).into());
    }
    let top = tower.level(r);
    let mut factors: Vec<GradedPoly> = Vec::with_capacity(sched.len());
    let mut lambda = family.lambda.clone();
    let mut degree = 0u32;
    for (i, pt) in sched.iter().enumerate() {
        let level = tower.level(i as u32 + 1);
        if i > 0 {
            let prev = sched[i - 1].multiplicity as i64;
            let e = level.exceptional().expect("blowup level");
            lambda = level.pullback_second(&lambda)? - e.scale(&rat(prev));
        }
        let omega = level.cotangent().expect("tower levels carry a cotangent");
        let contact = jets(pt.multiplicity - 1, omega, &FormalSheaf::line(&lambda)?)?;
        let mut cls = contact.top();
        degree += contact.rank() as u32;
        if pt.infinitely_near {
            cls = cls * level.exceptional().expect("blowup level");
            degree += 1;
        }
        factors.push(cls);
    }
    if degree != top.dim() {
        return Err(ContactError::DegreeMismatch {
            ty: t.to_string(),
            expected: top.dim(),
            got: degree,
        });
    }
    let mut acc = factors.pop().expect("nonempty schedule");
    for i in (1..r).rev() {
        let level = tower.level(i + 1);
        acc = level.pushforward(&acc)?;
        acc = factors.pop().expect("factor per level") * acc;
    }
    Ok(family.space.integrate(&acc)?)
}

/// Degree of `Σ(T)` for the given family.
pub fn sigma_degree(t: &SingularityType, family: &Family) -> Result<Coeff> {
    if !t.is_certified() {
        return Err(ContactError::Unsupported(t.to_string()));
    }
    let tower = Tower::new(&family.space, t.schedule().len() as u32)?;
    sigma_degree_in(t, family, &tower)
}

/// Correction terms `(coefficient, type)` subtracted from `Σ(2^[n])`.
pub fn correction_terms(n: u32) -> Result<Vec<(i64, SingularityType)>> {
    let flat = |m: &[u32]| -> Result<(i64, SingularityType)> {
        let t = SingularityType::flat(m);
        Ok((weak_listing_count(&t, n)? as i64, t))
    };
    Ok(match n {
        1..=3 => vec![],
        4 => vec![flat(&[3])?],
        5 => vec![flat(&[3, 2])?],
        6 => vec![
            (
                NESTED_TRIPLE_COEFF,
                SingularityType::nested(3, SingularityType::flat(&[2])),
            ),
            flat(&[3, 2, 2])?,
        ],
        _ => return Err(ContactError::UnsupportedN(n)),
    })
}

/// Weight of `Σ((3(2)))` in the six-node count.
pub const NESTED_TRIPLE_COEFF: i64 = 30;

fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::from(1), |a, k| a * k)
}

/// Node count assembly: `(Σ(2^[n]) − Σ_T w_T Σ(T)) / n!`, with all σ-degrees.
pub fn node_count_detailed(n: u32, family: &Family) -> Result<(Coeff, BTreeMap<String, Coeff>)> {
    if !(1..=6).contains(&n) {
        return Err(ContactError::UnsupportedN(n));
    }
    let tower = Tower::new(&family.space, n)?;
    let main = SingularityType::repeated(2, n);
    let mut sigmas = BTreeMap::new();
    let mut total = sigma_degree_in(&main, family, &tower)?;
    sigmas.insert(main.to_string(), total.clone());
    for (w, t) in correction_terms(n)? {
        let s = sigma_degree_in(&t, family, &tower)?;
        total -= rat(w) * &s;
        sigmas.insert(t.to_string(), s);
    }
    Ok((total / Coeff::from_integer(factorial(n)), sigmas))
}

/// Number of `n`-nodal curves in an `n`-dimensional system (exact rational).
pub fn node_count(n: u32, family: &Family) -> Result<Coeff> {
    Ok(node_count_detailed(n, family)?.0)
}

/// Orderings of the points of a strict flat type `T` realizing the weak type
/// `(2^[n])`, grouped by the position of the triple point (0-based), before
/// dividing by the symmetry of equal multiplicities. A triple point must
/// precede its three branch points.
pub fn weak_listing_subtotals(t: &SingularityType, n: u32) -> Result<BTreeMap<u32, u64>> {
    if !t.is_flat() {
        return Err(ContactError::Unsupported(format!(
            "{t} (listing of nested types)"
        )));
    }
    let mults = t.multiplicities();
    if mults.iter().any(|&m| m > 3) {
        return Err(ContactError::Unsupported(t.to_string()));
    }
    // item labels: node points 0, triple point k+1 and its branches -(k+1)
    let mut items: Vec<i32> = Vec::new();
    for (k, &m) in mults.iter().enumerate() {
        if m == 2 {
            items.push(0);
        } else {
            let id = k as i32 + 1;
            items.push(id);
            items.extend([-id, -id, -id]);
        }
    }
    if items.len() as u32 != n {
        return Err(ContactError::ListingLength {
            ty: t.to_string(),
            needed: items.len() as u32,
            n,
        });
    }
    let mut out = BTreeMap::new();
    let mut idx: Vec<usize> = (0..items.len()).collect();
    permute(&mut idx, 0, &mut |perm| {
        let seq: Vec<i32> = perm.iter().map(|&i| items[i]).collect();
        let valid = seq
            .iter()
            .enumerate()
            .all(|(pos, &it)| it >= 0 || seq[..pos].contains(&-it));
        if valid {
            let key = seq.iter().position(|&it| it > 0).unwrap_or(0) as u32;
            *out.entry(key).or_insert(0u64) += 1;
        }
    });
    Ok(out)
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

/// Coefficient of `Σ(T)` in the `n`-node count.
pub fn weak_listing_count(t: &SingularityType, n: u32) -> Result<u64> {
    let raw: u64 = weak_listing_subtotals(t, n)?.values().sum();
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    for m in t.multiplicities() {
        *counts.entry(m).or_insert(0) += 1;
    }
    let sym: u64 = counts.values().map(|&c| (1..=c).product::<u64>()).product();
    Ok(raw / sym)
}

/// Exact rational rendered as a JSON integer when possible, else `"p/q"`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Exact(pub Coeff);

impl Exact {
    pub fn as_i64(&self) -> Option<i64> {
        if self.0.is_integer() {
            self.0.numer().to_i64()
        } else {
            None
        }
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.as_i64() {
            Some(v) => s.serialize_i64(v),
            None => s.serialize_str(&self.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    Derived,
    Fano,
}

/// Result of one count with its inputs and, when known, the expected value.
#[derive(Clone, Debug, Serialize)]
pub struct CountReport {
    pub label: String,
    pub n: u32,
    pub invariants: BTreeMap<String, i64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub sigma_degrees: BTreeMap<String, Exact>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub breakdown: BTreeMap<String, Exact>,
    pub count: Exact,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<i64>,
    pub method: Method,
}

impl CountReport {
    pub fn new(label: impl Into<String>, n: u32, count: Coeff, method: Method) -> Self {
        CountReport {
            label: label.into(),
            n,
            invariants: BTreeMap::new(),
            sigma_degrees: BTreeMap::new(),
            breakdown: BTreeMap::new(),
            count: Exact(count),
            expected: None,
            method,
        }
    }

    pub fn with_expected(mut self, expected: i64) -> Self {
        self.expected = Some(expected);
        self
    }

    pub fn is_integral(&self) -> bool {
        self.count.0.is_integer()
    }

    /// `None` without an expected value, else exact equality.
    pub fn passed(&self) -> Option<bool> {
        self.expected
            .map(|e| self.count.0 == Coeff::from_integer(BigInt::from(e)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{base_surface_model, SurfaceInvariants};

    #[test]
    fn parse_round_trip() {
        for s in ["(2,2,2)", "(2^[6])", "(3(2))", "(3,2,2)", "(3,2(2^[2]),4)"] {
            let t: SingularityType = s.parse().unwrap();
            assert_eq!(t.to_string(), s);
        }
        let t: SingularityType = " ( 3 , 2 ) ".parse().unwrap();
        assert_eq!(t, SingularityType::flat(&[3, 2]));
        for bad in ["", "(1)", "(2", "(2,)", "2", "(2^[0])", "(2)x"] {
            assert!(bad.parse::<SingularityType>().is_err(), "{bad}");
        }
    }

    #[test]
    fn schedules() {
        let t: SingularityType = "(3(2))".parse().unwrap();
        assert_eq!(
            t.schedule(),
            vec![
                SchedulePoint {
                    multiplicity: 3,
                    infinitely_near: false
                },
                SchedulePoint {
                    multiplicity: 2,
                    infinitely_near: true
                },
            ]
        );
        assert!(t.is_certified());
        assert!(SingularityType::repeated(2, 6).is_certified());
        assert!(!SingularityType::repeated(2, 7).is_certified());
        assert!(!SingularityType::flat(&[4]).is_certified());
        assert!(!SingularityType::flat(&[2, 3]).is_certified());
    }

    #[test]
    fn rho_values() {
        assert_eq!(rho(&SingularityType::flat(&[2, 2]), 2), 6);
        assert_eq!(rho(&SingularityType::flat(&[3]), 2), 6);
        assert_eq!(rho(&SingularityType::repeated(2, 6), 2), 18);
        assert_eq!(rho(&"(3(2))".parse().unwrap(), 2), 9);
    }

    #[test]
    fn listing_counts() {
        assert_eq!(
            weak_listing_count(&SingularityType::flat(&[3]), 4).unwrap(),
            6
        );
        assert_eq!(
            weak_listing_count(&SingularityType::flat(&[3, 2]), 5).unwrap(),
            30
        );
        assert_eq!(
            weak_listing_count(&SingularityType::flat(&[3, 2, 2]), 6).unwrap(),
            90
        );
        let sub = weak_listing_subtotals(&SingularityType::flat(&[3, 2, 2]), 6).unwrap();
        assert_eq!(sub.values().copied().collect::<Vec<_>>(), vec![120, 48, 12]);
        assert!(weak_listing_count(&"(3(2))".parse().unwrap(), 4).is_err());
        assert!(weak_listing_count(&SingularityType::flat(&[4]), 6).is_err());
        assert!(weak_listing_count(&SingularityType::flat(&[3]), 5).is_err());
    }

    #[test]
    fn discriminant_degree_on_plane() {
        for m in 2..6i64 {
            let s = base_surface_model(SurfaceInvariants::new(m * m, -3 * m, 9, 3), 1).unwrap();
            let f = Family::from_space(&s).unwrap();
            let v = sigma_degree(&SingularityType::flat(&[2]), &f).unwrap();
            assert_eq!(v, rat(3 * (m - 1) * (m - 1)));
        }
    }

    #[test]
    fn unsupported_type_errors() {
        let s = base_surface_model(SurfaceInvariants::new(4, 0, 0, 24), 4).unwrap();
        let f = Family::from_space(&s).unwrap();
        assert!(matches!(
            sigma_degree(&SingularityType::flat(&[4]), &f),
            Err(ContactError::Unsupported(_))
        ));
        assert!(matches!(
            sigma_degree(&SingularityType::flat(&[2]), &f),
            Err(ContactError::DegreeMismatch { .. })
        ));
    }

    #[test]
    fn report_json() {
        let r = CountReport::new("x", 4, rat(666), Method::Derived).with_expected(666);
        assert_eq!(r.passed(), Some(true));
        let j = serde_json::to_string(&r).unwrap();
        assert!(j.contains("\"count\":666"));
        let half = CountReport::new("y", 1, Coeff::new(1.into(), 2.into()), Method::ClosedForm);
        assert!(serde_json::to_string(&half).unwrap().contains("\"1/2\""));
        assert!(!half.is_integral());
    }
}
