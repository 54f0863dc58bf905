//! Formal sheaves: a virtual rank together with a total Chern class.

use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::binomial;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::ring::{rat, Coeff, GradedPoly, RingError, RingExt, RingModel};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SheafError {
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error("total Chern class must have constant term 1")]
    NotUnit,
    #[error("twist by a negative-rank sheaf (rank {0}) is unsupported")]
    NegativeRank(i64),
    #[error("expected rank {expected}, got {got}")]
    WrongRank { expected: i64, got: i64 },
    #[error("twisting class must be homogeneous of degree 1")]
    NotDegreeOne,
    #[error("Chern class has nonzero parts above the rank {0}")]
    ExcessChern(i64),
}

pub type Result<T> = std::result::Result<T, SheafError>;

/// A (virtual) sheaf recorded by rank and total Chern class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormalSheaf {
    rank: i64,
    chern: GradedPoly,
}

impl FormalSheaf {
    pub fn new(rank: i64, chern: GradedPoly) -> Result<Self> {
        if chern.constant_term() != Coeff::one() {
            return Err(SheafError::NotUnit);
        }
        Ok(FormalSheaf { rank, chern })
    }

    pub fn trivial(ring: &Arc<RingModel>, rank: i64) -> Self {
        FormalSheaf {
            rank,
            chern: ring.one(),
        }
    }

    /// Line bundle with first Chern class `l`.
    pub fn line(l: &GradedPoly) -> Result<Self> {
        if !l.is_homogeneous(1) {
            return Err(SheafError::NotDegreeOne);
        }
        FormalSheaf::new(1, &l.ring().one() + l)
    }

    pub fn rank(&self) -> i64 {
        self.rank
    }

    pub fn chern(&self) -> &GradedPoly {
        &self.chern
    }

    pub fn ring(&self) -> &Arc<RingModel> {
        self.chern.ring()
    }

    /// The i-th Chern class.
    pub fn c(&self, i: u32) -> GradedPoly {
        self.chern.part(i)
    }

    /// The Chern class in degree equal to the rank (zero for negative rank).
    pub fn top(&self) -> GradedPoly {
        if self.rank < 0 {
            return self.ring().zero();
        }
        self.c(self.rank as u32)
    }

    /// Reinterprets the sheaf in an extension ring.
    pub fn embed(&self, ring: &Arc<RingModel>) -> Result<Self> {
        Ok(FormalSheaf {
            rank: self.rank,
            chern: ring.embed(&self.chern)?,
        })
    }

    /// Pulls back along a generator renaming into `target`.
    pub fn rename(&self, target: &Arc<RingModel>, map: &[Option<usize>]) -> Result<Self> {
        Ok(FormalSheaf {
            rank: self.rank,
            chern: self.chern.rename(target, map)?,
        })
    }
}

/// `A ⊕ B`.
pub fn whitney_sum(a: &FormalSheaf, b: &FormalSheaf) -> Result<FormalSheaf> {
    Ok(FormalSheaf {
        rank: a.rank + b.rank,
        chern: a.chern.checked_mul(&b.chern)?,
    })
}

/// Inverse of a unit total Chern class, truncated at the ring dimension.
pub fn inverse_series(c: &GradedPoly) -> Result<GradedPoly> {
    let ring = c.ring();
    if c.constant_term() != Coeff::one() {
        return Err(SheafError::NotUnit);
    }
    let x = c - &ring.one();
    let neg_x = -&x;
    let mut acc = ring.one();
    let mut power = ring.one();
    for _ in 0..ring.dim() {
        power = &power * &neg_x;
        if power.is_zero() {
            break;
        }
        acc = &acc + &power;
    }
    Ok(acc)
}

/// `A − B` in the Grothendieck group.
pub fn difference(a: &FormalSheaf, b: &FormalSheaf) -> Result<FormalSheaf> {
    if !a.chern.same_model(&b.chern) {
        a.chern.checked_add(&b.chern)?;
    }
    Ok(FormalSheaf {
        rank: a.rank - b.rank,
        chern: a.chern.checked_mul(&inverse_series(&b.chern)?)?,
    })
}

/// `A ⊗ L` with `c1(L) = l`.
pub fn tensor_line(a: &FormalSheaf, l: &GradedPoly) -> Result<FormalSheaf> {
    if a.rank < 0 {
        return Err(SheafError::NegativeRank(a.rank));
    }
    if !l.is_homogeneous(1) {
        return Err(SheafError::NotDegreeOne);
    }
    if !a.chern.same_model(l) {
        a.chern.checked_add(l)?;
    }
    let r = a.rank as u32;
    if a.chern.max_degree().unwrap_or(0) > r {
        return Err(SheafError::ExcessChern(a.rank));
    }
    let ring = a.ring();
    let parts: Vec<GradedPoly> = (0..=r).map(|j| a.c(j)).collect();
    let lpow: Vec<GradedPoly> = (0..=r).map(|k| l.pow(k)).collect();
    let mut chern = ring.zero();
    for i in 0..=r {
        for j in 0..=i {
            let b = binomial(BigInt::from(r - j), BigInt::from(i - j));
            if b.is_zero() || parts[j as usize].is_zero() {
                continue;
            }
            let term =
                (&parts[j as usize] * &lpow[(i - j) as usize]).scale(&Coeff::from_integer(b));
            chern = &chern + &term;
        }
    }
    Ok(FormalSheaf {
        rank: a.rank,
        chern,
    })
}

/// `A^∨`.
pub fn dual(a: &FormalSheaf) -> FormalSheaf {
    let ring = a.ring();
    let mut chern = ring.zero();
    for i in 0..=a.chern.max_degree().unwrap_or(0) {
        let p = a.c(i);
        chern = if i % 2 == 0 { &chern + &p } else { &chern - &p };
    }
    FormalSheaf {
        rank: a.rank,
        chern,
    }
}

/// `Sym^k A` for rank-2 `A`, from the root pairing `{i·a + (k−i)·b}`.
pub fn sym_rank2(a: &FormalSheaf, k: u32) -> Result<FormalSheaf> {
    if a.rank != 2 {
        return Err(SheafError::WrongRank {
            expected: 2,
            got: a.rank,
        });
    }
    let ring = a.ring();
    let c1 = a.c(1);
    let c2 = a.c(2);
    let c1sq = &c1 * &c1;
    let ki = k as i64;
    let mut chern = ring.one();
    // roots i·a+(k−i)·b and (k−i)·a+i·b multiply to i(k−i)c1² + (k−2i)²c2
    for i in 0..(k.div_ceil(2)) {
        let i = i as i64;
        if 2 * i == ki {
            break;
        }
        let factor = ring.one()
            + c1.scale(&rat(ki))
            + c1sq.scale(&rat(i * (ki - i)))
            + c2.scale(&rat((ki - 2 * i) * (ki - 2 * i)));
        chern = &chern * &factor;
    }
    if k.is_multiple_of(2) && k > 0 {
        let middle = ring.one() + c1.scale(&rat(ki / 2));
        chern = &chern * &middle;
    }
    Ok(FormalSheaf {
        rank: ki + 1,
        chern,
    })
}

/// Principal parts `⊕_{i≤order} L ⊗ Sym^i Ω` of a rank-2 cotangent sheaf.
pub fn jets(order: u32, omega: &FormalSheaf, line: &FormalSheaf) -> Result<FormalSheaf> {
    if line.rank != 1 {
        return Err(SheafError::WrongRank {
            expected: 1,
            got: line.rank,
        });
    }
    let l = line.c(1);
    let mut acc = FormalSheaf::trivial(line.ring(), 0);
    for i in 0..=order {
        let piece = tensor_line(&sym_rank2(omega, i)?, &l)?;
        acc = whitney_sum(&acc, &piece)?;
    }
    Ok(acc)
}
