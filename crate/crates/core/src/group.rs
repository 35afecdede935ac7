//! The Heisenberg group `H_d(Z_p)` truncated at level `n`.
//!
//! Elements are triples `(x, y, z)` with `x, y ∈ (Z/p^n)^d`, `z ∈ Z/p^n` and
//! the law `(x, y, z)⋆(x', y', z') = (x + x', y + y', z + z' + x·y')`.
//!
//! Quotient points are indexed in mixed radix:
//! `index = flat(x) + p^{nd}·flat(y) + p^{2nd}·z` with
//! `flat(v) = Σ_i v_i·p^{n·i}`. [`LevelFunction`] stores its samples in this
//! order.

use num_bigint::BigUint;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::padic::{Prime, Residue};

/// Largest supported `d`; fixed-size coordinate arrays keep elements `Copy`.
pub const MAX_D: usize = 4;

/// Parameters `(p, d, n)` of a finite quotient `H_d(Z/p^n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Heisenberg {
    p: Prime,
    d: usize,
    n: u32,
    modulus: u64,
    inv2: u64,
}

impl Heisenberg {
    pub fn new(p: u64, d: usize, n: u32) -> Result<Self> {
        Self::with_prime(Prime::new(p)?, d, n)
    }

    pub fn with_prime(p: Prime, d: usize, n: u32) -> Result<Self> {
        if d == 0 || d > MAX_D {
            return Err(Error::UnsupportedDimension(d));
        }
        let modulus = p.pow(n)?;
        // 2·inv2 ≡ 1 mod p^n
        let inv2 = if modulus == 1 { 0 } else { (modulus + 1) / 2 };
        Ok(Heisenberg { p, d, n, modulus, inv2 })
    }

    /// Same `(p, d)` at another level.
    pub fn at_level(&self, n: u32) -> Result<Self> {
        Self::with_prime(self.p, self.d, n)
    }

    #[inline]
    pub fn prime(&self) -> Prime {
        self.p
    }
    #[inline]
    pub fn p(&self) -> u64 {
        self.p.get()
    }
    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }
    #[inline]
    pub fn level(&self) -> u32 {
        self.n
    }
    /// `p^n`.
    #[inline]
    pub fn modulus(&self) -> u64 {
        self.modulus
    }
    /// Topological dimension `2d + 1`.
    pub fn dim(&self) -> usize {
        2 * self.d + 1
    }

    /// `|H_d(Z/p^n)| = p^{n(2d+1)}`, exactly.
    pub fn order(&self) -> BigUint {
        BigUint::from(self.p()).pow(self.n * self.dim() as u32)
    }

    /// Number of quotient points, when it fits in memory-addressable range.
    pub fn num_points(&self) -> Result<usize> {
        let e = self.n * self.dim() as u32;
        let v = self.p.pow(e)?;
        usize::try_from(v).map_err(|_| Error::Overflow { p: self.p(), exponent: e })
    }

    #[inline]
    fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.modulus {
            s - self.modulus
        } else {
            s
        }
    }
    #[inline]
    fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.modulus - a
        }
    }
    #[inline]
    fn mul(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.modulus as u128) as u64
    }
    #[inline]
    fn dot(&self, a: &[u64; MAX_D], b: &[u64; MAX_D]) -> u64 {
        let mut acc: u128 = 0;
        for i in 0..self.d {
            acc += a[i] as u128 * b[i] as u128;
        }
        (acc % self.modulus as u128) as u64
    }
    /// Reduce an arbitrary integer into `[0, p^n)`.
    #[inline]
    pub fn reduce_int(&self, v: i64) -> u64 {
        (v as i128).rem_euclid(self.modulus as i128) as u64
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement { level: self.n, x: [0; MAX_D], y: [0; MAX_D], z: 0 }
    }

    /// Builds an element from integer coordinates (reduced mod `p^n`).
    pub fn element(&self, x: &[i64], y: &[i64], z: i64) -> Result<GroupElement> {
        if x.len() != self.d || y.len() != self.d {
            return Err(Error::Format(format!(
                "group element needs {} x- and y-coordinates, got {} and {}",
                self.d,
                x.len(),
                y.len()
            )));
        }
        let mut g = self.identity();
        for i in 0..self.d {
            g.x[i] = self.reduce_int(x[i]);
            g.y[i] = self.reduce_int(y[i]);
        }
        g.z = self.reduce_int(z);
        Ok(g)
    }

    fn check(&self, g: &GroupElement) -> Result<()> {
        if g.level != self.n {
            return Err(Error::LevelMismatch { left: self.n, right: g.level });
        }
        Ok(())
    }

    /// `g ⋆ g'`.
    pub fn multiply(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
        self.check(g)?;
        self.check(h)?;
        Ok(self.mul_unchecked(g, h))
    }

    #[inline]
    pub(crate) fn mul_unchecked(&self, g: &GroupElement, h: &GroupElement) -> GroupElement {
        let mut out = *g;
        for i in 0..self.d {
            out.x[i] = self.add(g.x[i], h.x[i]);
            out.y[i] = self.add(g.y[i], h.y[i]);
        }
        out.z = self.add(self.add(g.z, h.z), self.dot(&g.x, &h.y));
        out
    }

    /// `(−x, −y, −z + x·y)`.
    pub fn inverse(&self, g: &GroupElement) -> GroupElement {
        let mut out = *g;
        for i in 0..self.d {
            out.x[i] = self.neg(g.x[i]);
            out.y[i] = self.neg(g.y[i]);
        }
        out.z = self.add(self.neg(g.z), self.dot(&g.x, &g.y));
        out
    }

    pub fn lie_vector(&self, a: &[i64], b: &[i64], c: i64) -> Result<LieVector> {
        let g = self.element(a, b, c)?;
        Ok(LieVector { level: self.n, a: g.x, b: g.y, c: g.z })
    }

    /// `U + V + ½[U, V]` with `[U, V] = (0, 0, a_U·b_V − a_V·b_U)`.
    pub fn bch_star(&self, u: &LieVector, v: &LieVector) -> LieVector {
        let mut out = *u;
        for i in 0..self.d {
            out.a[i] = self.add(u.a[i], v.a[i]);
            out.b[i] = self.add(u.b[i], v.b[i]);
        }
        let bracket = self.add(self.dot(&u.a, &v.b), self.neg(self.dot(&v.a, &u.b)));
        out.c = self.add(self.add(u.c, v.c), self.mul(self.inv2, bracket));
        out
    }

    /// `exp(a, b, c) = (a, b, c + a·b/2)`.
    pub fn exp_map(&self, v: &LieVector) -> GroupElement {
        GroupElement {
            level: self.n,
            x: v.a,
            y: v.b,
            z: self.add(v.c, self.mul(self.inv2, self.dot(&v.a, &v.b))),
        }
    }

    /// `exp(t·V) = (t·a, t·b, t·c + t²·a·b/2)`.
    pub fn one_parameter(&self, v: &LieVector, t: u64) -> GroupElement {
        let t = t % self.modulus;
        let mut tv = *v;
        for i in 0..self.d {
            tv.a[i] = self.mul(t, v.a[i]);
            tv.b[i] = self.mul(t, v.b[i]);
        }
        tv.c = self.mul(t, v.c);
        self.exp_map(&tv)
    }

    /// One-parameter subgroup at a residue parameter (checks the level).
    pub fn one_parameter_at(&self, v: &LieVector, t: &Residue) -> Result<GroupElement> {
        if t.level() < self.n {
            return Err(Error::InsufficientPrecision { needed: self.n, available: t.level() });
        }
        Ok(self.one_parameter(v, t.value()))
    }

    /// Norm `max(‖x‖, ‖y‖, |z|) = p^{-j}` of any lift of `g`.
    pub fn group_norm(&self, g: &GroupElement) -> GroupNorm {
        let mut j = self.n;
        for c in g.x[..self.d].iter().chain(&g.y[..self.d]).chain(std::iter::once(&g.z)) {
            if *c != 0 {
                j = j.min(self.p.valuation_u64(*c));
            }
        }
        GroupNorm { exponent: j, at_most: j == self.n }
    }

    /// Mixed-radix index of `g`.
    #[inline]
    pub fn index_of(&self, g: &GroupElement) -> usize {
        let q = self.modulus as usize;
        let mut idx = g.z as usize;
        for i in (0..self.d).rev() {
            idx = idx * q + g.y[i] as usize;
        }
        for i in (0..self.d).rev() {
            idx = idx * q + g.x[i] as usize;
        }
        idx
    }

    /// Inverse of [`Heisenberg::index_of`].
    #[inline]
    pub fn element_at(&self, mut idx: usize) -> GroupElement {
        let q = self.modulus as usize;
        let mut g = self.identity();
        for i in 0..self.d {
            g.x[i] = (idx % q) as u64;
            idx /= q;
        }
        for i in 0..self.d {
            g.y[i] = (idx % q) as u64;
            idx /= q;
        }
        g.z = (idx % q) as u64;
        g
    }

    /// All quotient points in index order.
    pub fn enumerate_quotient(&self) -> Result<impl Iterator<Item = GroupElement> + '_> {
        let n = self.num_points()?;
        Ok((0..n).map(move |i| self.element_at(i)))
    }

    /// Image of `g` (at a level ≥ ours) in this quotient.
    pub fn project(&self, g: &GroupElement) -> GroupElement {
        let mut out = *g;
        out.level = self.n;
        for i in 0..self.d {
            out.x[i] %= self.modulus;
            out.y[i] %= self.modulus;
        }
        out.z %= self.modulus;
        out
    }
}

/// A point of `H_d(Z/p^n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroupElement {
    pub(crate) level: u32,
    pub(crate) x: [u64; MAX_D],
    pub(crate) y: [u64; MAX_D],
    pub(crate) z: u64,
}

impl GroupElement {
    pub fn level(&self) -> u32 {
        self.level
    }
    pub fn x(&self, d: usize) -> &[u64] {
        &self.x[..d]
    }
    pub fn y(&self, d: usize) -> &[u64] {
        &self.y[..d]
    }
    pub fn z(&self) -> u64 {
        self.z
    }
}

/// An element `(a, b, c)` of the Lie algebra `𝔥_d(Z/p^n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LieVector {
    pub(crate) level: u32,
    pub(crate) a: [u64; MAX_D],
    pub(crate) b: [u64; MAX_D],
    pub(crate) c: u64,
}

impl LieVector {
    pub fn a(&self, d: usize) -> &[u64] {
        &self.a[..d]
    }
    pub fn b(&self, d: usize) -> &[u64] {
        &self.b[..d]
    }
    pub fn c(&self) -> u64 {
        self.c
    }
    pub fn is_zero(&self) -> bool {
        self.c == 0 && self.a.iter().chain(&self.b).all(|v| *v == 0)
    }
}

/// `p^{-exponent}`, flagged when the true norm is only bounded above
/// (all residues vanish at this level).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupNorm {
    pub exponent: u32,
    pub at_most: bool,
}

impl GroupNorm {
    pub fn value(&self, p: u64) -> f64 {
        (p as f64).powi(-(self.exponent as i32))
    }
}

/// A function on `H_d(Z/p^n)`, equivalently a level-`n` locally constant
/// function on `H_d(Z_p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelFunction {
    ctx: Heisenberg,
    data: Vec<Complex64>,
}

impl LevelFunction {
    pub fn new(ctx: Heisenberg, data: Vec<Complex64>) -> Result<Self> {
        let n = ctx.num_points()?;
        if data.len() != n {
            return Err(Error::Format(format!(
                "level-{} function on H_{}(Z/{}^{}) needs {} samples, got {}",
                ctx.level(),
                ctx.d(),
                ctx.p(),
                ctx.level(),
                n,
                data.len()
            )));
        }
        Ok(LevelFunction { ctx, data })
    }

    pub fn zeros(ctx: Heisenberg) -> Result<Self> {
        Ok(LevelFunction { ctx, data: vec![Complex64::new(0.0, 0.0); ctx.num_points()?] })
    }

    pub fn from_fn(ctx: Heisenberg, mut f: impl FnMut(&GroupElement) -> Complex64) -> Result<Self> {
        let data = ctx.enumerate_quotient()?.map(|g| f(&g)).collect();
        Ok(LevelFunction { ctx, data })
    }

    pub fn ctx(&self) -> &Heisenberg {
        &self.ctx
    }
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    #[inline]
    pub fn at(&self, g: &GroupElement) -> Complex64 {
        self.data[self.ctx.index_of(g)]
    }

    /// Mean over the quotient, i.e. the integral against normalized Haar
    /// measure.
    pub fn haar_average(&self) -> Complex64 {
        self.data.iter().sum::<Complex64>() / self.data.len() as f64
    }

    /// `⟨f, g⟩ = ∫ f·ḡ`.
    pub fn inner(&self, other: &LevelFunction) -> Result<Complex64> {
        self.same_space(other)?;
        let s: Complex64 = self.data.iter().zip(&other.data).map(|(a, b)| a * b.conj()).sum();
        Ok(s / self.data.len() as f64)
    }

    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.data.len() as f64).sqrt()
    }

    pub fn max_abs_diff(&self, other: &LevelFunction) -> Result<f64> {
        self.same_space(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    fn same_space(&self, other: &LevelFunction) -> Result<()> {
        if self.ctx != other.ctx {
            return Err(Error::LevelMismatch { left: self.ctx.level(), right: other.ctx.level() });
        }
        Ok(())
    }

    /// `g ↦ f(a⁻¹ ⋆ g)`.
    pub fn left_translate(&self, a: &GroupElement) -> Result<LevelFunction> {
        self.ctx.check(a)?;
        let ai = self.ctx.inverse(a);
        let data = (0..self.data.len())
            .map(|i| {
                let g = self.ctx.element_at(i);
                self.at(&self.ctx.mul_unchecked(&ai, &g))
            })
            .collect();
        Ok(LevelFunction { ctx: self.ctx, data })
    }

    /// `g ↦ f(g ⋆ a)`.
    pub fn right_translate(&self, a: &GroupElement) -> Result<LevelFunction> {
        self.ctx.check(a)?;
        let data = (0..self.data.len())
            .map(|i| {
                let g = self.ctx.element_at(i);
                self.at(&self.ctx.mul_unchecked(&g, a))
            })
            .collect();
        Ok(LevelFunction { ctx: self.ctx, data })
    }

    /// The same function viewed at a finer level.
    pub fn lift(&self, level: u32) -> Result<LevelFunction> {
        if level < self.ctx.level() {
            return Err(Error::InsufficientPrecision { needed: self.ctx.level(), available: level });
        }
        let fine = self.ctx.at_level(level)?;
        LevelFunction::from_fn(fine, |g| self.at(&self.ctx.project(g)))
    }

    /// Samples at the canonical representatives of a coarser level (exact
    /// when the function is locally constant at that level).
    pub fn restrict(&self, level: u32) -> Result<LevelFunction> {
        if level > self.ctx.level() {
            return Err(Error::InsufficientPrecision { needed: level, available: self.ctx.level() });
        }
        let coarse = self.ctx.at_level(level)?;
        LevelFunction::from_fn(coarse, |g| {
            let mut h = *g;
            h.level = self.ctx.level();
            self.at(&h)
        })
    }

    pub fn scale(&mut self, c: Complex64) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    pub fn axpy(&mut self, c: Complex64, other: &LevelFunction) -> Result<()> {
        self.same_space(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
        Ok(())
    }
}
