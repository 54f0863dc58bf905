//! Closed-form node counts for linear systems on surfaces, surface presets
//! and the registry of irreducible-rational-curve corrections.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::binomial;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contact::{CountReport, Exact, Method};
use crate::ring::{rat, Coeff};
use crate::spaces::SurfaceInvariants;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SurfaceError {
    #[error("closed form exists only for n in 1..=6, got {0}")]
    UnsupportedN(u32),
    #[error("formula text error at byte {pos}: {reason}")]
    Formula { pos: usize, reason: String },
    #[error("unknown worked correction `{0}`")]
    UnknownCorrection(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

pub type Result<T> = std::result::Result<T, SurfaceError>;

/// Closed forms for `n = 1..=6` in the variables `d, k_1, k_2, c_2`; the
/// second and third refer to the earlier ones as `tg_1`, `tg_2`.
const CLOSED_FORMS: [&str; 6] = [
    r"
    3 d+2 k_1+c_2
",
    r"
    (tg_1 (-7+3 d+2 k_1+c_2)-6 k_2-25 k_1- 21 d)/2
",
    r"
    (2tg_2 (-14+3 d+2 k_1+c_2)+tg_1 (- 6 k_2-25 k_1-21 d+40)+ (-6 k_2-25 k_1-21
    d) c_2-63 d^2+(-18 k_2-117 k_1+672) d-50 k_1^2+ (-12 k_2+950) k_1+292 k_2)/6
",
    r"
    (81d^4+(216k_1 + 108c_2 - 2268)d^3+ (54c_2^2 + (216k_1 - 1890)c_2 - 324k_2 +
    21852 - 5130k_1 + 216k_1^2)d^2 + (12c_2^3 + ( - 504 + 72k_1)c_2^2 + ( -
    216k_2 + 8940 + 144k_1^2 - 2916k_1)c_2 - 3816k_1^2 + 39780k_1 + 96k_1^3 +
    6024k_2 - 72360 - 432k_1k_2)d + c_2^4 + ( - 42 + 8k_1)c_2^3 + ( - 402k_1 -
    36k_2 + 24k_1^2 + 699)c_2^2 + ( - 3888 - 144k_1k_2 + 1756k_2 + 9046k_1 -
    1104k_1^2 + 32k_1^3)c_2 - 144k_1^2k_2 + 16k_1^4 + 108k_2^2 + 4412k_1k_2 -
    936k_1^3 + 17171k_1^2 - 28842k_2 - 95670k_1)/24
",
    r"
    81/40 d^5+(27/8 c_2+27/4 k_1-189/2) d^4+(9/4 c_2^2+(-441/4+9 k_1)c_2+ 9
    k_1^2- 27/2 k_2-1107/4 k_1+3393/2) d^3+(3/4 c_2^3+(- 189/4+9/2 k_1) c_2^2+
    (9 k_1^2-981/4 k_1+2469/2-27/2 k_2) c_2-27 k_1 k_2+6 k_1^3- 603/2 k_1^2-
    13875+471k_2+8463/2 k_1) d^2+(1/8 c_2^4+(-35/4+ k_1) c_2^3+(3 k_1^2- 285/4
    k_1+2207/8-9/2 k_2) c_2^2+(4 k_1^3-4789-18 k_1 k_2-180 k_1^2+ 565/2
    k_2+8589/4 k_1) c_2-145 k_1^3-22445/4 k_2+27403/8 k_1^2+2 k_1 ^4+27/2
    k_2^2+1355/2 k_1 k_2-111959/4 k_1+217728/5-18 k_1^2 k_2) d+ 1/120
    c_2^5+(1/12 k_1-7/12) c_2^4+(141/8+1/3 k_1^2-1/2 k_2-27/4 k_1) c_2^3+(251/6
    k_2-53/2 k_1^2-3 k_1 k_2+2/3 k_1^3-485/2+1547/6 k_1) c_2^2 +(-17881/12
    k_2+3516/5+1229/6 k_1 k_2-68137/12 k_1-131/3 k_1^3+9/2 k_2^2+21551/24
    k_1^2+2/3 k_1^4-6 k_1^2 k_2) c_2+727/3 k_1^2 k_2- 188k_2^2-8827/2 k_1
    k_2+321882/5 k_1+9 k_2^2 k_1+22695 k_2+ 10867/12 k_1^3- 26189/2 k_1^2-4
    k_1^3 k_2+4/15 k_1^5-26 k_1^4
",
    r"
    ( 81/80 ) d^6+( 81/40 c_2-567/8+81/20 k_1 ) d^5+( 27/16 c_2^2+(27/4
    k_1-1701/16) c_2-81/8 k_2+8109/4+27/4 k_1^2-4077/16 k_1 ) d^4+ ( 3/4
    c_2^3+(9/2 k_1-63) c_2^2+(8523/4-27/2 k_2+9 k_1^2-1233/4 k_1) c_2+ 1131/2
    k_2+6 k_1^3- 29601-27 k_1 k_2-729/2 k_1^2+25671/4 k_1 ) d^3+ ( 3/16
    c_2^4+(3/2 k_1-147/8) c_2^3+(12909/16-27/4 k_2+9/2 k_1^2-1107/8 k_1)
    c_2^2+(2073/4 k_2- 76959/4-27 k_1 k_2+41493/8 k_1+6 k_1^3-333 k_1^2) c_2+ 3
    k_1^4+81/4 k_2^2-27 k_1^2 k_2- 96699/8 k_2-519/2 k_1^3+1102009/5+ 119961/16
    k_1^2-639927/8 k_1+4821/4 k_1 k_2 ) d^2+ ( 1/40 c_2^5+(1/4 k_1-21/8)
    c_2^4+(-3/2 k_2+3071/24-109/4 k_1+k_1^2) c_2^3 +(-201/2 k_1^2+157 k_2+2
    k_1^3-29213/8-9 k_1 k_2+5421/4 k_1) c_2^2+ (-26787/4 k_2+648997/10- 74149/2
    k_1-159 k_1^3+1481/2 k_1 k_2+27/2 k_2^2+ 32959/8 k_1^2+2 k_1^4-18 k_1^2 k_2)
    c_2+853 k_1^2 k_2-18481 k_1 k_2- 1317/2 k_2^2+27 k_2^2 k_1+1401361/12
    k_2+28988249/60 k_1+46109/12 k_1^3- 12 k_1^3 k_2+4/5 k_1^5-668388-554465/8
    k_1^2-92 k_1^4 ) d+1/720 c_2^6+(-7/48+ 1/60 k_1) c_2^5+(-1/8 k_2+1/12
    k_1^2-95/48 k_1+331/48) c_2^4 +(-k_1 k_2-10 k_1^2+8147/72 k_1-8095/48+565/36
    k_2+2/9 k_1^3) c_2^3+ (- 145/6 k_1^3+15347/10+1355/12 k_1 k_2-3 k_1^2
    k_2+1/3 k_1^4+9/4 k_2^2- 190339/48 k_1+26519/48 k_1^2-10891/12 k_2)
    c_2^2+(-4 k_1^3 k_2-85/3 k_1^4+ 4291/4 k_1^3+9 k_2^2 k_1+10998-815/4
    k_2^2-807341/48 k_1^2+790/3 k_1^2 k_2+ 4/15 k_1^5- 62339/12 k_1
    k_2+691883/24 k_2+10672201/120 k_1) c_2- 311237/16 k_1^3-9/2 k_2^3+4/45
    k_1^6+7001519/72 k_1 k_2-2 k_1^4 k_2- 1855/4 k_2^2 k_1+9 k_1^2 k_2^2+1805/9
    k_1^3 k_2- 1080646 k_1+ 86753363/360 k_1^2+200477/36 k_2^2+26297/36 k_1^4-13
    k_1^5- 55951/8 k_1^2 k_2- 2567321/6 k_2
",
];

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigInt),
    Ident(&'static str),
    Op(char),
}

const IDENTS: [&str; 6] = ["tg_1", "tg_2", "k_1", "k_2", "c_2", "d"];

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n: BigInt = src[start..i].parse().expect("digits");
            out.push((start, Tok::Num(n)));
        } else if "+-*/^()".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else if let Some(id) = IDENTS.iter().find(|id| src[i..].starts_with(**id)) {
            out.push((i, Tok::Ident(id)));
            i += id.len();
        } else {
            return Err(SurfaceError::Formula {
                pos: i,
                reason: format!("unexpected `{c}`"),
            });
        }
    }
    Ok(out)
}

/// Recursive-descent evaluator: `+ -` < `* /` and juxtaposition < unary minus < `^`.
struct Eval<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    env: &'a BTreeMap<&'static str, Coeff>,
}

impl Eval<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn fail<T>(&self, reason: &str) -> Result<T> {
        let pos = self
            .toks
            .get(self.pos)
            .map(|(p, _)| *p)
            .unwrap_or(usize::MAX);
        Err(SurfaceError::Formula {
            pos,
            reason: reason.to_string(),
        })
    }

    fn sum(&mut self) -> Result<Coeff> {
        let mut acc = self.product()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.product()?;
            if c == '+' {
                acc += rhs;
            } else {
                acc -= rhs;
            }
        }
        Ok(acc)
    }

    fn product(&mut self) -> Result<Coeff> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Op('*')) => {
                    self.pos += 1;
                    acc *= self.unary()?;
                }
                Some(Tok::Op('/')) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    if rhs.is_zero() {
                        return self.fail("division by zero");
                    }
                    acc /= rhs;
                }
                Some(Tok::Num(_)) | Some(Tok::Ident(_)) | Some(Tok::Op('(')) => {
                    acc *= self.power()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Coeff> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(-self.unary()?);
        }
        self.power()
    }

    fn power(&mut self) -> Result<Coeff> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let Some(Tok::Num(e)) = self.peek().cloned() else {
                return self.fail("exponent must be an integer literal");
            };
            self.pos += 1;
            let e: u32 = e.try_into().map_err(|_| SurfaceError::Formula {
                pos: 0,
                reason: "exponent too large".into(),
            })?;
            return Ok((0..e).fold(Coeff::one(), |a, _| a * &base));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Coeff> {
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(Coeff::from_integer(n))
            }
            Some(Tok::Ident(id)) => {
                self.pos += 1;
                match self.env.get(id) {
                    Some(v) => Ok(v.clone()),
                    None => self.fail("variable not bound"),
                }
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let v = self.sum()?;
                if self.peek() != Some(&Tok::Op(')')) {
                    return self.fail("expected `)`");
                }
                self.pos += 1;
                Ok(v)
            }
            _ => self.fail("expected a number, variable or `(`"),
        }
    }
}

/// Evaluates formula text with the given variable bindings.
pub fn eval_formula(src: &str, env: &BTreeMap<&'static str, Coeff>) -> Result<Coeff> {
    let mut ev = Eval {
        toks: lex(src)?,
        pos: 0,
        env,
    };
    let v = ev.sum()?;
    if ev.pos != ev.toks.len() {
        return ev.fail("trailing input");
    }
    Ok(v)
}

/// Formula text for `n`.
pub fn closed_form_text(n: u32) -> Result<&'static str> {
    match n {
        1..=6 => Ok(CLOSED_FORMS[n as usize - 1]),
        _ => Err(SurfaceError::UnsupportedN(n)),
    }
}

fn base_env(inv: &SurfaceInvariants) -> BTreeMap<&'static str, Coeff> {
    BTreeMap::from([
        ("d", rat(inv.d)),
        ("k_1", rat(inv.k1)),
        ("k_2", rat(inv.k2)),
        ("c_2", rat(inv.c2)),
    ])
}

/// Closed-form number of `n`-nodal curves in an `n`-dimensional system.
pub fn tg_closed(n: u32, inv: &SurfaceInvariants) -> Result<Coeff> {
    let text = closed_form_text(n)?;
    let mut env = base_env(inv);
    if n == 2 || n == 3 {
        env.insert("tg_1", tg_closed(1, inv)?);
    }
    if n == 3 {
        env.insert("tg_2", tg_closed(2, inv)?);
    }
    eval_formula(text, &env)
}

/// Named surface presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "preset")]
pub enum Preset {
    /// Plane curves of degree `m`.
    P2 { m: i64 },
    /// Curves of bidegree `(m1, m2)` on a quadric.
    P1xP1 { m1: i64, m2: i64 },
    /// K3 surface with a genus-`g` curve system.
    K3 { g: i64 },
    /// Degree-9 surface in `P^4` with sectional genus `pa` and Euler characteristic `chi`.
    Deg9 { pa: i64, chi: i64 },
    /// Del Pezzo surface of degree 4 in its anticanonical embedding.
    DelPezzo5,
    /// Abelian surface with a `(1,5)` polarization in `P^4`.
    Abelian,
}

impl Preset {
    pub fn invariants(&self) -> SurfaceInvariants {
        match *self {
            Preset::P2 { m } => preset_p2(m),
            Preset::P1xP1 { m1, m2 } => preset_p1xp1(m1, m2),
            Preset::K3 { g } => preset_k3(g),
            Preset::Deg9 { pa, chi } => preset_deg9(pa, chi),
            Preset::DelPezzo5 => preset_delpezzo5(),
            Preset::Abelian => preset_abelian_p4(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::P2 { .. } => "p2",
            Preset::P1xP1 { .. } => "p1xp1",
            Preset::K3 { .. } => "k3",
            Preset::Deg9 { .. } => "deg9",
            Preset::DelPezzo5 => "delpezzo5",
            Preset::Abelian => "abelian",
        }
    }

    /// Preset parameters by name.
    pub fn params(&self) -> BTreeMap<String, i64> {
        let p: Vec<(&str, i64)> = match *self {
            Preset::P2 { m } => vec![("m", m)],
            Preset::P1xP1 { m1, m2 } => vec![("m1", m1), ("m2", m2)],
            Preset::K3 { g } => vec![("g", g)],
            Preset::Deg9 { pa, chi } => vec![("pa", pa), ("chi", chi)],
            Preset::DelPezzo5 | Preset::Abelian => vec![],
        };
        p.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn label(&self) -> String {
        let params: Vec<String> = self.params().values().map(|v| v.to_string()).collect();
        if params.is_empty() {
            self.name().to_string()
        } else {
            format!("{}({})", self.name(), params.join(","))
        }
    }
}

pub fn preset_p2(m: i64) -> SurfaceInvariants {
    SurfaceInvariants::new(m * m, -3 * m, 9, 3)
}

pub fn preset_p1xp1(m1: i64, m2: i64) -> SurfaceInvariants {
    SurfaceInvariants::new(2 * m1 * m2, -2 * (m1 + m2), 8, 4)
}

pub fn preset_k3(g: i64) -> SurfaceInvariants {
    SurfaceInvariants::new(2 * g - 2, 0, 0, 24)
}

pub fn preset_deg9(pa: i64, chi: i64) -> SurfaceInvariants {
    let k2 = 6 * chi - 5 * pa + 23;
    SurfaceInvariants::new(9, 2 * pa - 11, k2, 12 * chi - k2)
}

pub fn preset_delpezzo5() -> SurfaceInvariants {
    SurfaceInvariants::new(4, -4, 4, 8)
}

pub fn preset_abelian_p4() -> SurfaceInvariants {
    SurfaceInvariants::new(10, 0, 0, 0)
}

fn choose(n: u64, k: u64) -> Coeff {
    Coeff::from_integer(binomial(BigInt::from(n), BigInt::from(k)))
}

/// Names of the worked corrections, in registry order.
pub const WORKED_CORRECTIONS: [&str; 4] = ["p2-quintic-14pts", "d33", "d25", "d34"];

/// Irreducible rational curve counts obtained by subtracting reducible
/// configurations from a closed-form count.
pub fn worked_correction(name: &str) -> Result<CountReport> {
    let p11 = |a, b| preset_p1xp1(a, b);
    let (n, head_label, head, terms, expected): (u32, &str, Coeff, Vec<(&str, Coeff)>, i64) =
        match name {
            "p2-quintic-14pts" => (
                6,
                "tg6(p2,5)",
                tg_closed(6, &preset_p2(5))?,
                vec![
                    (
                        "line+binodal quartic",
                        choose(14, 2) * tg_closed(2, &preset_p2(4))?,
                    ),
                    ("conic+cubic", choose(14, 5)),
                ],
                87304,
            ),
            "d33" => (
                4,
                "tg4(p1xp1,3,3)",
                tg_closed(4, &p11(3, 3))?,
                vec![
                    ("nodal (3,2)+(0,1)", rat(11) * tg_closed(1, &p11(3, 2))?),
                    ("nodal (2,3)+(1,0)", rat(11) * tg_closed(1, &p11(2, 3))?),
                    ("(2,2)+(1,1)", choose(11, 8)),
                ],
                3510,
            ),
            "d25" => (
                4,
                "tg4(p1xp1,2,5)",
                tg_closed(4, &p11(2, 5))?,
                vec![
                    ("binodal (2,4)+(0,1)", rat(13) * tg_closed(2, &p11(2, 4))?),
                    ("(2,3)+(0,2)", choose(13, 11)),
                ],
                3684,
            ),
            "d34" => (
                6,
                "tg6(p1xp1,3,4)",
                tg_closed(6, &p11(3, 4))?,
                vec![
                    ("trinodal (3,3)+(0,1)", rat(13) * tg_closed(3, &p11(3, 3))?),
                    (
                        "nodal (2,3)+(1,1)",
                        tg_closed(1, &p11(2, 3))? * choose(13, 3),
                    ),
                    ("(2,2)+(1,2)", choose(13, 8)),
                    ("(3,2)+(0,2)", choose(13, 2)),
                ],
                90508,
            ),
            other => return Err(SurfaceError::UnknownCorrection(other.to_string())),
        };
    let mut count = head.clone();
    let mut breakdown = BTreeMap::new();
    breakdown.insert(head_label.to_string(), Exact(head));
    for (label, v) in terms {
        count -= &v;
        breakdown.insert(label.to_string(), Exact(v));
    }
    let mut r = CountReport::new(name, n, count, Method::ClosedForm).with_expected(expected);
    r.breakdown = breakdown;
    Ok(r)
}
