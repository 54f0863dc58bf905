//! Fibered space models: linear-system surface families, projective bundles,
//! Grassmannians, flag bundles and the diagonal-blowup tower, each with a
//! pushforward to the level below.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ring::{
    rat, Coeff, GradedPoly, Monomial, RingBuilder, RingError, RingExt, RingModel, Terms,
};
use crate::sheaf::{
    difference, dual, inverse_series, tensor_line, whitney_sum, FormalSheaf, SheafError,
};

/// Deepest blowup level the tower will build.
pub const MAX_TOWER_DEPTH: u32 = 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpaceError {
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Sheaf(#[from] SheafError),
    #[error("system dimension {0} out of range 1..=6")]
    SystemDim(u32),
    #[error("level `{0}` is not a family of surfaces with a rank-2 relative cotangent")]
    NotSurfaceFamily(String),
    #[error("tower depth {0} exceeds the supported maximum {MAX_TOWER_DEPTH}")]
    TowerTooDeep(u32),
    #[error("bundle rank must be at least 1")]
    RankTooSmall,
    #[error("`{0}` is a root level and has no pushforward")]
    RootLevel(String),
    #[error("unknown named object `{0}`")]
    UnknownName(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, SpaceError>;

/// The four intersection numbers of a polarized surface `(S, L)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SurfaceInvariants {
    /// `L²`
    pub d: i64,
    /// `K·L`
    pub k1: i64,
    /// `K²`
    pub k2: i64,
    /// Topological Euler number.
    pub c2: i64,
}

impl SurfaceInvariants {
    pub fn new(d: i64, k1: i64, k2: i64, c2: i64) -> Self {
        SurfaceInvariants { d, k1, k2, c2 }
    }
}

/// Where a generator comes from.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Provenance {
    /// Generator of the root parameter space.
    Base(String),
    /// Fiber class of the `level`-th point of the tower.
    Fiber { name: String, level: u32 },
    /// Exceptional class `e[j,k]`.
    Exceptional { j: u32, k: u32 },
}

impl Provenance {
    pub fn name(&self) -> String {
        match self {
            Provenance::Base(n) => n.clone(),
            Provenance::Fiber { name, level } if *level <= 1 => name.clone(),
            Provenance::Fiber { name, level } => format!("{name}_{level}"),
            Provenance::Exceptional { j, k } => format!("e[{j},{k}]"),
        }
    }

    /// Second-factor copy one level up.
    fn lifted(&self) -> Provenance {
        match self {
            Provenance::Base(n) => Provenance::Base(n.clone()),
            Provenance::Fiber { name, level } => Provenance::Fiber {
                name: name.clone(),
                level: level + 1,
            },
            Provenance::Exceptional { j, k } => Provenance::Exceptional { j: j + 1, k: *k },
        }
    }
}

/// How a level maps to its parent.
#[derive(Clone, Debug)]
pub enum LevelKind {
    Root,
    /// `S × base`; pushforward reads the coefficient of the surface point class.
    SurfaceFamily {
        point: usize,
    },
    /// `P(E)` of lines in a rank-`rank` bundle with hyperplane class `var`.
    ProjectiveBundle {
        var: usize,
        rank: u32,
    },
    /// Blowup of the diagonal in the fiber square of the parent's family.
    Blowup {
        exceptional: usize,
        copy_start: usize,
        up: Vec<Option<usize>>,
        down: Vec<Option<usize>>,
    },
}

/// One level of a fibered space.
pub struct SpaceModel {
    ring: Arc<RingModel>,
    parent: Option<Arc<SpaceModel>>,
    level: u32,
    rel_dim: u32,
    kind: LevelKind,
    cotangent: Option<FormalSheaf>,
    provenance: Vec<Provenance>,
    new_start: usize,
    new_rule_start: usize,
    sheaves: BTreeMap<String, FormalSheaf>,
    classes: BTreeMap<String, GradedPoly>,
    push_cache: Mutex<HashMap<Monomial, GradedPoly>>,
}

impl std::fmt::Debug for SpaceModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpaceModel")
            .field("ring", &self.ring.name())
            .field("level", &self.level)
            .field("rel_dim", &self.rel_dim)
            .field("kind", &self.kind)
            .finish()
    }
}

impl SpaceModel {
    fn new(
        ring: Arc<RingModel>,
        parent: Option<Arc<SpaceModel>>,
        level: u32,
        rel_dim: u32,
        kind: LevelKind,
        provenance: Vec<Provenance>,
    ) -> Self {
        let (new_start, new_rule_start) = match &parent {
            Some(p) => (p.ring.vars().len(), p.ring.rules().len()),
            None => (0, 0),
        };
        SpaceModel {
            ring,
            parent,
            level,
            rel_dim,
            kind,
            cotangent: None,
            provenance,
            new_start,
            new_rule_start,
            sheaves: BTreeMap::new(),
            classes: BTreeMap::new(),
            push_cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn ring(&self) -> &Arc<RingModel> {
        &self.ring
    }

    pub fn parent(&self) -> Option<&Arc<SpaceModel>> {
        self.parent.as_ref()
    }

    /// Number of tower points above the root (root = 0, first family = 1).
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn rel_dim(&self) -> u32 {
        self.rel_dim
    }

    pub fn dim(&self) -> u32 {
        self.ring.dim()
    }

    pub fn kind(&self) -> &LevelKind {
        &self.kind
    }

    pub fn cotangent(&self) -> Option<&FormalSheaf> {
        self.cotangent.as_ref()
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    /// Index of the first generator introduced at this level.
    pub fn new_start(&self) -> usize {
        self.new_start
    }

    pub fn sheaf(&self, name: &str) -> Result<&FormalSheaf> {
        self.sheaves
            .get(name)
            .ok_or_else(|| SpaceError::UnknownName(name.to_string()))
    }

    pub fn class(&self, name: &str) -> Result<&GradedPoly> {
        self.classes
            .get(name)
            .ok_or_else(|| SpaceError::UnknownName(name.to_string()))
    }

    pub fn gen(&self, name: &str) -> Result<GradedPoly> {
        Ok(self.ring.gen(name)?)
    }

    /// Exceptional class introduced at this level, for blowup levels.
    pub fn exceptional(&self) -> Option<GradedPoly> {
        match &self.kind {
            LevelKind::Blowup { exceptional, .. } => Some(self.ring.gen_at(*exceptional)),
            _ => None,
        }
    }

    /// Pulls a class back from the parent level.
    pub fn pullback(&self, cls: &GradedPoly) -> Result<GradedPoly> {
        Ok(self.ring.embed(cls)?)
    }

    /// Second-factor pullback of a class on the parent family (blowup levels).
    pub fn pullback_second(&self, cls: &GradedPoly) -> Result<GradedPoly> {
        match &self.kind {
            LevelKind::Blowup { up, .. } => Ok(cls.rename(&self.ring, up)?),
            _ => Err(SpaceError::Internal(
                "second-factor pullback on a non-blowup level".into(),
            )),
        }
    }

    /// Pushforward to the parent level.
    pub fn pushforward(&self, cls: &GradedPoly) -> Result<GradedPoly> {
        let cls = self.ring.embed(cls)?;
        let parent = self
            .parent
            .as_ref()
            .ok_or_else(|| SpaceError::RootLevel(self.ring.name().to_string()))?;
        let pring = &parent.ring;
        match &self.kind {
            LevelKind::Root => Err(SpaceError::RootLevel(self.ring.name().to_string())),
            LevelKind::SurfaceFamily { point } => {
                let mut out = Terms::new();
                for (m, c) in cls.terms() {
                    let (rest, e) = m.split_off(*point);
                    match e {
                        0 => {}
                        1 => {
                            if rest.top_index().is_some_and(|i| i >= self.new_start) {
                                return Err(SpaceError::Internal(format!(
                                    "unreduced surface monomial {}",
                                    self.ring.render_monomial(m)
                                )));
                            }
                            add(&mut out, rest, c.clone());
                        }
                        _ => {
                            return Err(SpaceError::Internal(format!(
                                "unreduced surface monomial {}",
                                self.ring.render_monomial(m)
                            )))
                        }
                    }
                }
                Ok(pring.from_terms(out)?)
            }
            LevelKind::ProjectiveBundle { var, rank } => {
                let mut out = Terms::new();
                for (m, c) in cls.terms() {
                    let (rest, e) = m.split_off(*var);
                    if e as u32 + 1 == *rank {
                        add(&mut out, rest, c.clone());
                    } else if e as u32 >= *rank {
                        return Err(SpaceError::Internal(format!(
                            "unreduced bundle monomial {}",
                            self.ring.render_monomial(m)
                        )));
                    }
                }
                Ok(pring.from_terms(out)?)
            }
            LevelKind::Blowup {
                exceptional,
                copy_start,
                down,
                ..
            } => {
                let family = parent;
                let mut diagonal = Terms::new();
                let mut groups: BTreeMap<Monomial, Terms> = BTreeMap::new();
                for (m, c) in cls.terms() {
                    let (rest, e) = m.split_off(*exceptional);
                    let (low, rel) = rest.split_at(*copy_start);
                    match e {
                        0 => {
                            if !rel.is_one() {
                                add(groups.entry(rel).or_default(), low, c.clone());
                            }
                        }
                        1 => {}
                        2 => {
                            let r = rename_monomial(&rel, down)?;
                            add(&mut diagonal, low.mul(&r), -c.clone());
                        }
                        _ => {
                            return Err(SpaceError::Internal(format!(
                                "residual exceptional power in {}",
                                self.ring.render_monomial(m)
                            )))
                        }
                    }
                }
                let mut acc = pring.from_terms(diagonal)?;
                for (rel, low) in groups {
                    let r = rename_monomial(&rel, down)?;
                    let pushed = family.push_monomial(&r)?;
                    if pushed.is_zero() {
                        continue;
                    }
                    let low = pring.from_terms(low)?;
                    acc = acc.checked_add(&low.checked_mul(&pring.embed(&pushed)?)?)?;
                }
                Ok(acc)
            }
        }
    }

    /// Memoized pushforward of a single monomial with coefficient 1.
    fn push_monomial(&self, m: &Monomial) -> Result<GradedPoly> {
        if let Some(hit) = self.push_cache.lock().expect("push cache").get(m) {
            return Ok(hit.clone());
        }
        let cls = self.ring.monomial(m.clone(), Coeff::one())?;
        let pushed = self.pushforward(&cls)?;
        self.push_cache
            .lock()
            .expect("push cache")
            .insert(m.clone(), pushed.clone());
        Ok(pushed)
    }

    /// Pushes down to the root and integrates there.
    pub fn integrate(&self, cls: &GradedPoly) -> Result<Coeff> {
        let mut cur = self.ring.embed(cls)?;
        let mut level: &SpaceModel = self;
        while let Some(p) = &level.parent {
            cur = level.pushforward(&cur)?;
            level = p;
        }
        Ok(cur.integrate()?)
    }
}

fn add(terms: &mut Terms, m: Monomial, c: Coeff) {
    if c.is_zero() {
        return;
    }
    let slot = terms.entry(m).or_insert_with(Coeff::zero);
    *slot += c;
    if slot.is_zero() {
        terms.retain(|_, v| !v.is_zero());
    }
}

fn rename_monomial(m: &Monomial, map: &[Option<usize>]) -> Result<Monomial> {
    let mut pairs = Vec::new();
    for (i, &e) in m.exponents().iter().enumerate() {
        if e == 0 {
            continue;
        }
        let j =
            map.get(i).copied().flatten().ok_or_else(|| {
                SpaceError::Internal("generator has no image under renaming".into())
            })?;
        pairs.push((j, e));
    }
    Ok(Monomial::from_pairs(&pairs))
}

fn rename_terms(t: &Terms, map: &[Option<usize>]) -> Result<Terms> {
    let mut out = Terms::new();
    for (m, c) in t {
        add(&mut out, rename_monomial(m, map)?, c.clone());
    }
    Ok(out)
}

/// `P^n` with hyperplane class `t`.
pub fn projective_space(n: u32, var: &str) -> Result<Arc<SpaceModel>> {
    let mut b = RingBuilder::new(format!("P^{n}"), n);
    let t = b.var(var, 1)?;
    b.rule(Monomial::var(t, n as u16 + 1), Terms::new())?;
    b.set_point_class(Monomial::var(t, n as u16));
    let ring = b.build();
    Ok(Arc::new(SpaceModel::new(
        ring,
        None,
        0,
        n,
        LevelKind::Root,
        vec![Provenance::Base(var.to_string())],
    )))
}

/// The universal curve of an `n`-dimensional linear system on a surface:
/// `S × P^n` over `P^n`, with family line bundle `h + t` stored as `lambda`.
pub fn base_surface_model(inv: SurfaceInvariants, system_dim: u32) -> Result<Arc<SpaceModel>> {
    if !(1..=6).contains(&system_dim) {
        return Err(SpaceError::SystemDim(system_dim));
    }
    let root = projective_space(system_dim, "t")?;
    let mut b = root.ring.extend(format!("S x P^{system_dim}"));
    b.set_dim(system_dim + 2);
    let t = 0;
    let u = b.var("u", 2)?;
    let k = b.var("kY", 1)?;
    let h = b.var("h", 1)?;
    let c = b.var("cY2", 2)?;
    let pt = Monomial::var(u, 1);
    let one = |n: i64| -> Terms {
        [(pt.clone(), rat(n))]
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .collect()
    };
    b.rule(Monomial::var(h, 2), one(inv.d))?;
    b.rule(Monomial::from_pairs(&[(k, 1), (h, 1)]), one(inv.k1))?;
    b.rule(Monomial::var(k, 2), one(inv.k2))?;
    b.rule(Monomial::var(c, 1), one(inv.c2))?;
    b.rule(Monomial::var(u, 2), Terms::new())?;
    b.rule(Monomial::from_pairs(&[(u, 1), (k, 1)]), Terms::new())?;
    b.rule(Monomial::from_pairs(&[(u, 1), (h, 1)]), Terms::new())?;
    b.set_point_class(Monomial::from_pairs(&[(u, 1), (t, system_dim as u16)]));
    let ring = b.build();
    let mut prov = root.provenance.clone();
    for name in ["u", "kY", "h", "cY2"] {
        prov.push(Provenance::Fiber {
            name: name.into(),
            level: 1,
        });
    }
    let mut space = SpaceModel::new(
        ring.clone(),
        Some(root),
        1,
        2,
        LevelKind::SurfaceFamily { point: u },
        prov,
    );
    let omega = FormalSheaf::new(2, ring.one() + ring.gen_at(k) + ring.gen_at(c))?;
    space.cotangent = Some(omega.clone());
    space.sheaves.insert("omega".into(), omega);
    space
        .classes
        .insert("lambda".into(), ring.gen_at(h) + ring.gen_at(t));
    Ok(Arc::new(space))
}

/// Relative cotangent of `P(E)` (lines in `E`) from the Euler sequence.
pub fn euler_cotangent(bundle: &FormalSheaf, y: &GradedPoly) -> Result<FormalSheaf> {
    let ring = y.ring();
    let e = bundle.embed(ring)?;
    Ok(difference(
        &tensor_line(&dual(&e), &-y)?,
        &FormalSheaf::trivial(ring, 1),
    )?)
}

/// `P(E)` of lines in `E` with hyperplane class `var`: `var^r = −Σ c_i(E) var^{r−i}`.
pub fn projective_bundle(
    base: &Arc<SpaceModel>,
    bundle: &FormalSheaf,
    var: &str,
) -> Result<Arc<SpaceModel>> {
    if bundle.rank() < 1 {
        return Err(SpaceError::RankTooSmall);
    }
    let r = bundle.rank() as u32;
    let bundle = bundle.embed(&base.ring)?;
    let mut b = base.ring.extend(format!("P({})", base.ring.name()));
    b.set_dim(base.ring.dim() + r - 1);
    let y = b.var(var, 1)?;
    let mut rhs = Terms::new();
    for i in 1..=r {
        for (m, c) in bundle.c(i).terms() {
            add(
                &mut rhs,
                m.mul(&Monomial::var(y, (r - i) as u16)),
                -c.clone(),
            );
        }
    }
    b.rule(Monomial::var(y, r as u16), rhs)?;
    if let Some(p) = base.ring.point_class() {
        b.set_point_class(p.mul(&Monomial::var(y, (r - 1) as u16)));
    }
    let ring = b.build();
    let mut prov = base.provenance.clone();
    prov.push(Provenance::Fiber {
        name: var.to_string(),
        level: 1,
    });
    let mut space = SpaceModel::new(
        ring.clone(),
        Some(base.clone()),
        if base.level == 0 { 1 } else { base.level },
        r - 1,
        LevelKind::ProjectiveBundle { var: y, rank: r },
        prov,
    );
    let omega = euler_cotangent(&bundle, &ring.gen_at(y))?;
    space.cotangent = Some(omega.clone());
    space.sheaves.insert("omega".into(), omega);
    for (k, v) in &base.sheaves {
        if k != "omega" {
            space.sheaves.insert(k.clone(), v.embed(&ring)?);
        }
    }
    Ok(Arc::new(space))
}

/// Segre classes `s(E) = 1/c(E)`.
pub fn segre(bundle: &FormalSheaf) -> Result<GradedPoly> {
    Ok(inverse_series(bundle.chern())?)
}

/// Row-reduces `rows` (each a map monomial → coeff) with columns in decreasing
/// monomial order; returns the reduced rows, each normalized to leading coeff 1.
fn rref(ring: &RingModel, rows: Vec<Terms>) -> Vec<(Monomial, Terms)> {
    let mut cols: Vec<Monomial> = rows.iter().flat_map(|r| r.keys().cloned()).collect();
    cols.sort_by(|a, b| ring.cmp_monomials(b, a));
    cols.dedup();
    let mut basis: Vec<(Monomial, Terms)> = Vec::new();
    for mut row in rows {
        for (piv, prow) in &basis {
            if let Some(f) = row.get(piv).cloned() {
                for (m, c) in prow {
                    add(&mut row, m.clone(), -(&f * c));
                }
            }
        }
        let lead = cols.iter().find(|m| row.contains_key(*m)).cloned();
        let Some(lead) = lead else { continue };
        let inv = Coeff::one() / row[&lead].clone();
        for c in row.values_mut() {
            *c *= &inv;
        }
        for (_, prow) in basis.iter_mut() {
            if let Some(f) = prow.get(&lead).cloned() {
                for (m, c) in &row {
                    add(prow, m.clone(), -(&f * c));
                }
            }
        }
        basis.push((lead, row));
    }
    basis.sort_by(|a, b| ring.cmp_monomials(&b.0, &a.0));
    basis
}

fn monomials_of_degree(vars: &[u32], deg: u32) -> Vec<Vec<u16>> {
    fn rec(vars: &[u32], i: usize, left: u32, cur: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
        if i == vars.len() {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let mut e = 0u16;
        while e as u32 * vars[i] <= left {
            cur.push(e);
            rec(vars, i + 1, left - e as u32 * vars[i], cur, out);
            cur.pop();
            e += 1;
        }
    }
    let mut out = Vec::new();
    rec(vars, 0, deg, &mut Vec::new(), &mut out);
    out
}

/// Grassmannian of rank-`q` quotients of a rank-`n` trivial bundle. Generators
/// are `c_i(Q)`, relations are the vanishing Segre classes `s_j(Q)`, `j > n−q`,
/// completed degree by degree into a rewrite system.
pub fn grassmannian_quotients(n: u32, q: u32) -> Result<Arc<SpaceModel>> {
    if q == 0 || q >= n {
        return Err(SpaceError::RankTooSmall);
    }
    let dim = q * (n - q);
    let mut fb = RingBuilder::new("free", dim);
    for i in (1..=q).rev() {
        fb.var(format!("x{i}"), i)?;
    }
    let free = fb.clone().build();
    let idx = |i: u32| (q - i) as usize;
    let mut cq = free.one();
    for i in 1..=q {
        cq = cq + free.gen_at(idx(i));
    }
    let s = inverse_series(&cq)?;
    let degrees: Vec<u32> = (0..q).map(|k| q - k).collect();
    let mut b = fb;
    let mut lhs_seen: Vec<Monomial> = Vec::new();
    for d in 1..=dim {
        let mut rows = Vec::new();
        for j in (n - q + 1)..=d {
            let sj = s.part(j);
            for ex in monomials_of_degree(&degrees, d - j) {
                let m = Monomial::from_exponents(ex);
                let row: Terms = sj
                    .terms()
                    .iter()
                    .map(|(k, c)| (k.mul(&m), c.clone()))
                    .collect();
                rows.push(row);
            }
        }
        for (lead, row) in rref(&free, rows) {
            if lhs_seen.iter().any(|l| l.divides(&lead)) {
                continue;
            }
            let rhs: Terms = row
                .into_iter()
                .filter(|(m, _)| *m != lead)
                .map(|(m, c)| (m, -c))
                .collect();
            b.rule(lead.clone(), rhs)?;
            lhs_seen.push(lead);
        }
    }
    let point = Monomial::var(idx(q), (n - q) as u16);
    b.set_point_class(point.clone());
    let ring = b.build();
    let reduced = ring.monomial(point.clone(), Coeff::one())?;
    if reduced.len() != 1 || reduced.coeff(&point) != Coeff::one() {
        return Err(SpaceError::Internal(
            "Schubert point class is not a standard monomial".into(),
        ));
    }
    let prov = (1..=q)
        .rev()
        .map(|i| Provenance::Base(format!("x{i}")))
        .collect();
    let mut space = SpaceModel::new(ring.clone(), None, 0, dim, LevelKind::Root, prov);
    let mut cq = ring.one();
    for i in 1..=q {
        cq = cq + ring.gen_at(idx(i));
    }
    let qs = FormalSheaf::new(q as i64, cq)?;
    let ss = FormalSheaf::new((n - q) as i64, inverse_series(qs.chern())?)?;
    space.sheaves.insert("Q2".into(), qs);
    space.sheaves.insert("S2".into(), ss);
    Ok(Arc::new(space))
}

/// Planes in `P^4`: rank-3 quotients `Q2` of `O^5`, with subbundle `S2`.
pub fn grassmannian_planes_p4() -> Result<Arc<SpaceModel>> {
    grassmannian_quotients(5, 3)
}

/// The universal plane `P(Q2)` over a space carrying `Q2`, hyperplane class `var`.
pub fn universal_plane(base: &Arc<SpaceModel>, var: &str) -> Result<Arc<SpaceModel>> {
    let q2 = base.sheaf("Q2")?.clone();
    projective_bundle(base, &dual(&q2), var)
}

/// Lines inside the planes of `base`: a `P²`-bundle of kernel lines `M ⊂ Q2`,
/// exposing `M` and `Q1 = Q2/M`.
pub fn incidence_flag(base: &Arc<SpaceModel>, var: &str) -> Result<Arc<SpaceModel>> {
    let q2 = base.sheaf("Q2")?.clone();
    let flag = projective_bundle(base, &q2, var)?;
    let ring = flag.ring.clone();
    let y = ring.gen(var)?;
    let m = FormalSheaf::line(&-&y)?;
    let q2 = q2.embed(&ring)?;
    let q1 = difference(&q2, &m)?;
    let mut flag = Arc::try_unwrap(flag).map_err(|_| SpaceError::Internal("shared flag".into()))?;
    flag.sheaves.insert("M".into(), m);
    flag.sheaves.insert("Q1".into(), q1);
    flag.sheaves.insert("Q2".into(), q2);
    Ok(Arc::new(flag))
}

/// Planes in `P^4` through a fixed line: `P²` with `c(M) = c(Q2) = 1 + x`,
/// and the universal plane over it. The residual line bundle `4y + x` is
/// stored as `lambda`.
pub fn planes_through_line_model() -> Result<Arc<SpaceModel>> {
    let base = projective_space(2, "x")?;
    let ring = base.ring.clone();
    let x = ring.gen("x")?;
    let m = FormalSheaf::line(&x)?;
    let q2 = FormalSheaf::new(3, ring.one() + &x)?;
    let mut base = Arc::try_unwrap(base).map_err(|_| SpaceError::Internal("shared base".into()))?;
    base.sheaves.insert("M".into(), m);
    base.sheaves.insert("Q2".into(), q2);
    let base = Arc::new(base);
    let plane = universal_plane(&base, "y")?;
    let pr = plane.ring.clone();
    let lambda = pr.gen("y")?.scale(&rat(4)) + pr.embed(&x)?;
    let mut plane =
        Arc::try_unwrap(plane).map_err(|_| SpaceError::Internal("shared plane".into()))?;
    plane.classes.insert("lambda".into(), lambda);
    Ok(Arc::new(plane))
}

/// Relative cotangent after blowing up the diagonal: `ω ⊗ O(e) ⊕ O(−e) − O`.
fn blown_cotangent(omega: &FormalSheaf, e: &GradedPoly) -> Result<FormalSheaf> {
    let twisted = whitney_sum(&tensor_line(omega, e)?, &FormalSheaf::line(&-e)?)?;
    Ok(difference(&twisted, &FormalSheaf::trivial(e.ring(), 1))?)
}

/// Next tower level: the blowup of the diagonal in the fiber square of
/// `family` over its parent, fibered over `family` by the first projection.
pub fn blowup_level(family: &Arc<SpaceModel>) -> Result<Arc<SpaceModel>> {
    let not_family = || SpaceError::NotSurfaceFamily(family.ring.name().to_string());
    let omega = family.cotangent.as_ref().ok_or_else(not_family)?;
    if omega.rank() != 2 || family.rel_dim != 2 || family.parent.is_none() {
        return Err(not_family());
    }
    let level = family.level + 1;
    if level > MAX_TOWER_DEPTH {
        return Err(SpaceError::TowerTooDeep(level));
    }
    let fr = &family.ring;
    let parent_len = fr.vars().len();
    let new_start = family.new_start;
    let copy_start = parent_len;
    let mut b = fr.extend(format!("X{level}"));
    b.set_dim(fr.dim() + 2);
    let mut prov = family.provenance.clone();
    for i in new_start..parent_len {
        let p = family.provenance[i].lifted();
        b.var(p.name(), fr.vars()[i].degree)?;
        prov.push(p);
    }
    let ex = Provenance::Exceptional { j: 1, k: level };
    let e = b.var(ex.name(), 1)?;
    prov.push(ex);
    let up: Vec<Option<usize>> = (0..parent_len)
        .map(|i| {
            Some(if i < new_start {
                i
            } else {
                copy_start + i - new_start
            })
        })
        .collect();
    for rule in &fr.rules()[family.new_rule_start..] {
        b.rule(
            rename_monomial(&rule.lhs, &up)?,
            rename_terms(&rule.rhs, &up)?,
        )?;
    }
    let trial = b.clone().build();
    let c3 = blown_cotangent(&omega.rename(&trial, &up)?, &trial.gen_at(e))?.c(3);
    let lead = Monomial::var(e, 3);
    let a = c3.coeff(&lead);
    if a.is_zero() {
        return Err(SpaceError::Internal(
            "exceptional relation has no cubic term".into(),
        ));
    }
    let rhs: Terms = c3
        .terms()
        .iter()
        .filter(|(m, _)| **m != lead)
        .map(|(m, c)| (m.clone(), -(c / &a)))
        .collect();
    b.rule(lead, rhs)?;
    let ring = b.build();
    let omega_new = blown_cotangent(&omega.rename(&ring, &up)?, &ring.gen_at(e))?;
    if !omega_new.c(3).is_zero() {
        return Err(SpaceError::Internal(
            "blown-up cotangent has c3 != 0".into(),
        ));
    }
    let down: Vec<Option<usize>> = (0..ring.vars().len())
        .map(|i| {
            if i < copy_start {
                Some(i)
            } else if i < e {
                Some(new_start + i - copy_start)
            } else {
                None
            }
        })
        .collect();
    let mut space = SpaceModel::new(
        ring,
        Some(family.clone()),
        level,
        2,
        LevelKind::Blowup {
            exceptional: e,
            copy_start,
            up,
            down,
        },
        prov,
    );
    space.cotangent = Some(omega_new.clone());
    space.sheaves.insert("omega".into(), omega_new);
    Ok(Arc::new(space))
}

/// A family level together with the tower of blowups above it.
#[derive(Debug, Clone)]
pub struct Tower {
    levels: Vec<Arc<SpaceModel>>,
}

impl Tower {
    /// Builds levels `1..=depth` starting from `family` (level 1).
    pub fn new(family: &Arc<SpaceModel>, depth: u32) -> Result<Self> {
        if depth > MAX_TOWER_DEPTH {
            return Err(SpaceError::TowerTooDeep(depth));
        }
        let mut levels = vec![family.clone()];
        while (levels.len() as u32) < depth {
            let next = blowup_level(levels.last().expect("nonempty"))?;
            levels.push(next);
        }
        Ok(Tower { levels })
    }

    pub fn depth(&self) -> u32 {
        self.levels.len() as u32
    }

    /// Level `i`, 1-based.
    pub fn level(&self, i: u32) -> &Arc<SpaceModel> {
        &self.levels[i as usize - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p2_inv(m: i64) -> SurfaceInvariants {
        SurfaceInvariants::new(m * m, -3 * m, 9, 3)
    }

    #[test]
    fn surface_point_class_integrates_to_one() {
        let s = base_surface_model(p2_inv(4), 3).unwrap();
        let r = s.ring();
        let u = r.gen("u").unwrap();
        let t = r.gen("t").unwrap();
        assert_eq!(s.integrate(&(&u * &t.pow(3))).unwrap(), rat(1));
        assert_eq!(s.integrate(&(&u * &t.pow(2))).unwrap(), rat(0));
        assert_eq!((&u * &t.pow(3)).integrate().unwrap(), rat(1));
        let h = r.gen("h").unwrap();
        let k = r.gen("kY").unwrap();
        assert_eq!((&h * &h).to_string(), "16*u");
        assert_eq!((&h * &k).to_string(), "-12*u");
        assert_eq!((&k * &k).to_string(), "9*u");
        assert_eq!(r.gen("cY2").unwrap().to_string(), "3*u");
        assert!(base_surface_model(p2_inv(4), 7).is_err());
        assert!(base_surface_model(p2_inv(4), 0).is_err());
    }

    #[test]
    fn first_nodal_class_degree() {
        // c3 of L ⊕ L⊗Ω on the family integrates to 3d + 2k1 + c2
        let inv = SurfaceInvariants::new(8, -8, 8, 4);
        let s = base_surface_model(inv, 1).unwrap();
        let lam = FormalSheaf::line(s.class("lambda").unwrap()).unwrap();
        let j = crate::sheaf::jets(1, s.cotangent().unwrap(), &lam).unwrap();
        assert_eq!(s.integrate(&j.top()).unwrap(), rat(3 * 8 - 16 + 4));
    }

    #[test]
    fn p2_bundle_over_point() {
        let pt = projective_space(0, "t").unwrap();
        let p2 = projective_bundle(&pt, &FormalSheaf::trivial(pt.ring(), 3), "y").unwrap();
        let y = p2.gen("y").unwrap();
        assert!(y.pow(3).is_zero());
        assert_eq!(p2.pushforward(&y.pow(2)).unwrap(), pt.ring().one());
        let w = p2.cotangent().unwrap();
        assert_eq!(w.c(1), y.scale(&rat(-3)));
        assert_eq!(w.c(2), y.pow(2).scale(&rat(3)));
    }

    #[test]
    fn bundle_relation_sign() {
        let base = projective_space(2, "x").unwrap();
        let x = base.gen("x").unwrap();
        let q = FormalSheaf::new(3, base.ring().one() + &x).unwrap();
        let p = projective_bundle(&base, &q, "y").unwrap();
        assert_eq!(p.gen("y").unwrap().pow(3).to_string(), "-x*y^2");
    }

    #[test]
    fn grassmannian_anchors() {
        let g = grassmannian_planes_p4().unwrap();
        let q = g.sheaf("Q2").unwrap();
        let s = g.sheaf("S2").unwrap();
        assert_eq!(whitney_sum(q, s).unwrap().chern(), &g.ring().one());
        assert_eq!(s.c(3), g.ring().zero());
        let x1 = g.gen("x1").unwrap();
        assert_eq!(x1.pow(6).integrate().unwrap(), rat(5));
        assert_eq!(g.gen("x3").unwrap().pow(2).integrate().unwrap(), rat(1));
    }

    #[test]
    fn flag_bookkeeping() {
        let g = grassmannian_planes_p4().unwrap();
        let f = incidence_flag(&g, "z").unwrap();
        assert_eq!(f.dim(), 8);
        let m = f.sheaf("M").unwrap();
        let q1 = f.sheaf("Q1").unwrap();
        let q2 = f.sheaf("Q2").unwrap();
        assert_eq!(m.rank() + q1.rank(), q2.rank());
        assert_eq!(m.c(1) + q1.c(1), q2.c(1));
        assert!(q1.c(3).is_zero());
    }

    #[test]
    fn planes_through_line() {
        let p = planes_through_line_model().unwrap();
        let x = p.gen("x").unwrap();
        let y = p.gen("y").unwrap();
        assert!(x.pow(3).is_zero());
        assert_eq!(p.integrate(&(&x.pow(2) * &y.pow(2))).unwrap(), rat(1));
        assert_eq!(p.class("lambda").unwrap(), &(y.scale(&rat(4)) + x));
    }

    #[test]
    fn blowup_exceptional_relation() {
        let s = base_surface_model(p2_inv(3), 2).unwrap();
        let x2 = blowup_level(&s).unwrap();
        let e = x2.exceptional().unwrap();
        let cube = e.pow(3);
        assert!(cube
            .terms()
            .keys()
            .all(|m| m.exp(x2.ring().index_of("e[1,2]").unwrap()) < 3));
        assert_eq!(x2.rel_dim(), 2);
        assert_eq!(x2.pushforward(&e).unwrap(), s.ring().zero());
        assert_eq!(x2.pushforward(&e.pow(2)).unwrap(), s.ring().int(-1));
        let x3 = blowup_level(&x2).unwrap();
        assert!(x3.ring().index_of("e[2,2]").is_ok());
        assert!(x3.ring().index_of("e[1,3]").is_ok());
        assert!(x3.ring().index_of("h_3").is_ok());
    }

    #[test]
    fn second_factor_pushes_by_base_change() {
        let s = base_surface_model(p2_inv(2), 2).unwrap();
        let x2 = blowup_level(&s).unwrap();
        let h2 = x2.gen("h_2").unwrap();
        // f_*(p2^* h²) = f^* π_*(h²) = d
        assert_eq!(x2.pushforward(&(&h2 * &h2)).unwrap(), s.ring().int(4));
        assert!(x2.pushforward(&h2).unwrap().is_zero());
    }
}
