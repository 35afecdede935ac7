//! Exact p-adic arithmetic at finite precision.
//!
//! Three kinds of values live here:
//!
//! * [`Residue`]: a p-adic integer known modulo `p^level`.
//! * [`DualScalar`]: a class of the Prüfer group `Q_p/Z_p`, stored in the
//!   canonical finite-digit form `a / p^K` with `p ∤ a` (or the trivial class).
//! * [`RationalPhase`]: an exact rational in `[0, 1)` with p-power denominator,
//!   the value of a fractional part `{·}_p`.
//!
//! Phases stay exact until [`RationalPhase::character`] performs the single
//! floating-point exponential.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Largest exponent bit-width accepted for `p^k` (so sums of two residues and
/// products in `u128` never overflow).
const MAX_MODULUS_BITS: u32 = 62;

/// An odd prime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Prime(u64);

impl Prime {
    /// Rejects 2 (exp and BCH divide by 2) and composites.
    pub fn new(p: u64) -> Result<Self> {
        if p < 3 || p % 2 == 0 {
            return Err(Error::InvalidPrime(p));
        }
        let mut k = 3u64;
        while k * k <= p {
            if p % k == 0 {
                return Err(Error::InvalidPrime(p));
            }
            k += 2;
        }
        Ok(Prime(p))
    }

    #[inline]
    pub fn get(self) -> u64 {
        self.0
    }

    /// `p^k`, or an overflow error beyond 62 bits.
    pub fn pow(self, k: u32) -> Result<u64> {
        let mut acc: u64 = 1;
        for _ in 0..k {
            acc = acc
                .checked_mul(self.0)
                .filter(|v| *v < (1u64 << MAX_MODULUS_BITS))
                .ok_or(Error::Overflow { p: self.0, exponent: k })?;
        }
        Ok(acc)
    }

    /// `p^k` for exponents already validated by a surrounding context.
    #[inline]
    pub(crate) fn pow_unchecked(self, k: u32) -> u64 {
        self.0.pow(k)
    }

    /// Number of factors of `p` in a nonzero integer.
    pub(crate) fn valuation_u64(self, mut v: u64) -> u32 {
        debug_assert!(v != 0);
        let mut k = 0;
        while v % self.0 == 0 {
            v /= self.0;
            k += 1;
        }
        k
    }
}

impl fmt::Display for Prime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// p-adic valuation of a rational number. `Infinity` is the valuation of 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Valuation {
    Finite(i64),
    Infinity,
}

/// `ϑ(r)`: the exponent `l` with `r = p^l · (unit)`.
pub fn valuation(p: Prime, r: &BigRational) -> Valuation {
    if r.is_zero() {
        return Valuation::Infinity;
    }
    let pb = BigInt::from(p.get());
    let count = |mut v: BigInt| {
        let mut k = 0i64;
        loop {
            let (q, rem) = v.div_rem(&pb);
            if !rem.is_zero() {
                return k;
            }
            v = q;
            k += 1;
        }
    };
    Valuation::Finite(count(r.numer().abs()) - count(r.denom().abs()))
}

/// Splits a positive integer into `p^k` and the cofactor; returns `k` when the
/// cofactor is 1.
fn p_power_exponent(p: Prime, v: &BigInt) -> Option<u32> {
    let pb = BigInt::from(p.get());
    let mut v = v.clone();
    let mut k = 0u32;
    while !v.is_one() {
        let (q, rem) = v.div_rem(&pb);
        if !rem.is_zero() {
            return None;
        }
        v = q;
        k += 1;
    }
    Some(k)
}

/// A p-adic integer truncated to `level` digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Residue {
    p: Prime,
    level: u32,
    value: u64,
}

impl Residue {
    pub fn new(p: Prime, level: u32, value: i64) -> Result<Self> {
        let m = p.pow(level)?;
        Ok(Residue { p, level, value: (value as i128).rem_euclid(m as i128) as u64 })
    }

    pub fn from_u64(p: Prime, level: u32, value: u64) -> Result<Self> {
        let m = p.pow(level)?;
        Ok(Residue { p, level, value: value % m })
    }

    pub fn prime(&self) -> Prime {
        self.p
    }
    pub fn level(&self) -> u32 {
        self.level
    }
    pub fn value(&self) -> u64 {
        self.value
    }

    /// Valuation of the residue; `None` when it vanishes at this level (the
    /// true valuation is then only known to be `≥ level`).
    pub fn valuation(&self) -> Option<u32> {
        (self.value != 0).then(|| self.p.valuation_u64(self.value))
    }

    /// Reduce to a coarser level.
    pub fn truncate(&self, level: u32) -> Result<Self> {
        if level > self.level {
            return Err(Error::InsufficientPrecision { needed: level, available: self.level });
        }
        Residue::from_u64(self.p, level, self.value)
    }
}

/// A class in `Q_p / Z_p`, canonically `numer / p^denom_exp` with `p ∤ numer`.
///
/// The trivial class is `(0, 0)`; it reports norm 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DualScalar {
    p: Prime,
    denom_exp: u32,
    numer: u64,
}

impl DualScalar {
    pub fn trivial(p: Prime) -> Self {
        DualScalar { p, denom_exp: 0, numer: 0 }
    }

    /// The class of `numer / p^denom_exp`, canonicalized.
    pub fn new(p: Prime, numer: i64, denom_exp: u32) -> Result<Self> {
        let m = p.pow(denom_exp)?;
        let a = (numer as i128).rem_euclid(m as i128) as u64;
        Ok(Self::canonical(p, a, denom_exp))
    }

    /// `numer` must already be reduced below `p^denom_exp`.
    pub(crate) fn canonical(p: Prime, mut numer: u64, mut denom_exp: u32) -> Self {
        if numer == 0 {
            return Self::trivial(p);
        }
        while denom_exp > 0 && numer % p.get() == 0 {
            numer /= p.get();
            denom_exp -= 1;
        }
        DualScalar { p, denom_exp, numer }
    }

    /// The class of an exact rational with p-power denominator.
    pub fn from_rational(p: Prime, r: &BigRational) -> Result<Self> {
        let phase = fractional_part(p, r)?;
        Ok(phase.as_dual())
    }

    pub fn prime(&self) -> Prime {
        self.p
    }
    pub fn denom_exp(&self) -> u32 {
        self.denom_exp
    }
    pub fn numer(&self) -> u64 {
        self.numer
    }
    pub fn is_trivial(&self) -> bool {
        self.denom_exp == 0
    }

    /// `log_p` of the norm: `K` for `a/p^K`, 0 for the trivial class.
    pub fn norm_exp(&self) -> u32 {
        self.denom_exp
    }

    /// The norm `p^K` as a float (1 for the trivial class).
    pub fn norm_f64(&self) -> f64 {
        (self.p.get() as f64).powi(self.denom_exp as i32)
    }

    /// Numerator over the common denominator `p^level` (`level ≥ K`).
    #[inline]
    pub(crate) fn numer_at(&self, level: u32) -> u64 {
        debug_assert!(level >= self.denom_exp);
        self.numer * self.p.pow_unchecked(level - self.denom_exp)
    }

    /// Digits `c_1, …, c_K` of the representative `Σ c_k p^{-k}`.
    pub fn digits(&self) -> Vec<u64> {
        let mut out = vec![0; self.denom_exp as usize];
        let mut a = self.numer;
        for k in (0..self.denom_exp as usize).rev() {
            out[k] = a % self.p.get();
            a /= self.p.get();
        }
        out
    }

    fn check_prime(&self, other: Prime) -> Result<()> {
        if self.p != other {
            return Err(Error::PrimeMismatch(self.p.get(), other.get()));
        }
        Ok(())
    }

    pub fn add(&self, other: &DualScalar) -> Result<DualScalar> {
        self.check_prime(other.p)?;
        let k = self.denom_exp.max(other.denom_exp);
        let m = self.p.pow_unchecked(k);
        let a = (self.numer_at(k) as u128 + other.numer_at(k) as u128) % m as u128;
        Ok(Self::canonical(self.p, a as u64, k))
    }

    pub fn neg(&self) -> DualScalar {
        if self.is_trivial() {
            return *self;
        }
        let m = self.p.pow_unchecked(self.denom_exp);
        DualScalar { p: self.p, denom_exp: self.denom_exp, numer: m - self.numer }
    }

    pub fn sub(&self, other: &DualScalar) -> Result<DualScalar> {
        self.add(&other.neg())
    }

    /// The class `λ·h`; well defined once `h` is known modulo `p^K`.
    pub fn scale(&self, h: &Residue) -> Result<DualScalar> {
        self.check_prime(h.p)?;
        if h.level < self.denom_exp {
            return Err(Error::InsufficientPrecision {
                needed: self.denom_exp,
                available: h.level,
            });
        }
        Ok(self.scale_int(h.value as i128))
    }

    /// Multiplication by an ordinary integer (an element of `Z ⊂ Z_p`).
    pub fn scale_int(&self, h: i128) -> DualScalar {
        if self.is_trivial() {
            return *self;
        }
        let m = self.p.pow_unchecked(self.denom_exp) as i128;
        let hm = h.rem_euclid(m);
        let a = (self.numer as i128 * hm).rem_euclid(m) as u64;
        Self::canonical(self.p, a, self.denom_exp)
    }

    /// Canonical representative modulo `p^{-m} Z_p`: zeroes the digits
    /// `c_1, …, c_m`.
    pub fn reduce(&self, m: u32) -> DualScalar {
        if self.denom_exp <= m {
            return Self::trivial(self.p);
        }
        let keep = self.p.pow_unchecked(self.denom_exp - m);
        Self::canonical(self.p, self.numer % keep, self.denom_exp)
    }

    /// The representative in `[0, 1)` as an exact phase.
    pub fn phase(&self) -> RationalPhase {
        RationalPhase { p: self.p, numer: self.numer, denom_exp: self.denom_exp }
    }

    pub fn to_f64(&self) -> f64 {
        self.numer as f64 / self.norm_f64()
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(
            BigInt::from(self.numer),
            BigInt::from(self.p.get()).pow(self.denom_exp),
        )
    }

    /// Parses `"a/p^K"`, `"a/b"` (b a power of p) or `"0"`.
    pub fn parse(p: Prime, s: &str) -> Result<DualScalar> {
        let s = s.trim();
        let bad = || Error::Format(format!("cannot parse dual scalar {s:?}"));
        let Some((num, den)) = s.split_once('/') else {
            let v = i64::from_str(s).map_err(|_| bad())?;
            return DualScalar::new(p, v, 0);
        };
        let num = i64::from_str(num.trim()).map_err(|_| bad())?;
        let den = den.trim();
        if let Some((base, exp)) = den.split_once('^') {
            let base = u64::from_str(base.trim()).map_err(|_| bad())?;
            let exp = u32::from_str(exp.trim()).map_err(|_| bad())?;
            if base != p.get() {
                return Err(Error::NotPPower(s.to_string()));
            }
            DualScalar::new(p, num, exp)
        } else {
            let den = i64::from_str(den).map_err(|_| bad())?;
            if den <= 0 {
                return Err(bad());
            }
            let r = BigRational::new(BigInt::from(num), BigInt::from(den));
            DualScalar::from_rational(p, &r)
        }
    }
}

impl PartialOrd for DualScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Ordered by denominator exponent, then numerator.
impl Ord for DualScalar {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.p, self.denom_exp, self.numer).cmp(&(other.p, other.denom_exp, other.numer))
    }
}

impl fmt::Display for DualScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_trivial() {
            write!(f, "0")
        } else {
            write!(f, "{}/{}^{}", self.numer, self.p, self.denom_exp)
        }
    }
}

/// `|λ|_p` for a dual class: `p^K`, with the trivial class reported as 1.
pub fn dual_norm(x: &DualScalar) -> BigRational {
    BigRational::from_integer(BigInt::from(x.p.get()).pow(x.denom_exp))
}

/// Least-significant-first helper for [`dual_reduce`]-style callers.
pub fn dual_reduce(x: &DualScalar, m: u32) -> DualScalar {
    x.reduce(m)
}

/// An exact rational in `[0, 1)` whose denominator is `p^denom_exp`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RationalPhase {
    p: Prime,
    numer: u64,
    denom_exp: u32,
}

impl RationalPhase {
    pub fn zero(p: Prime) -> Self {
        RationalPhase { p, numer: 0, denom_exp: 0 }
    }
    pub fn numer(&self) -> u64 {
        self.numer
    }
    pub fn denom(&self) -> u64 {
        self.p.pow_unchecked(self.denom_exp)
    }
    pub fn denom_exp(&self) -> u32 {
        self.denom_exp
    }
    pub fn to_f64(&self) -> f64 {
        self.numer as f64 / self.denom() as f64
    }
    pub fn to_rational(&self) -> BigRational {
        BigRational::new(BigInt::from(self.numer), BigInt::from(self.denom()))
    }
    pub fn as_dual(&self) -> DualScalar {
        DualScalar::canonical(self.p, self.numer, self.denom_exp)
    }

    /// `e^{2πi·phase}`.
    pub fn character(&self) -> Complex64 {
        unit_phase(self.numer, self.denom())
    }
}

/// `e^{2πi·numer/denom}` with the angle folded into `[-π, π]` before the
/// single floating-point exponential.
#[inline]
pub(crate) fn unit_phase(numer: u64, denom: u64) -> Complex64 {
    if numer == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let numer = numer % denom;
    // fold to (-denom/2, denom/2] so the angle stays small
    let signed = if 2 * numer > denom { numer as f64 - denom as f64 } else { numer as f64 };
    let angle = std::f64::consts::TAU * signed / denom as f64;
    let (s, c) = angle.sin_cos();
    Complex64::new(c, s)
}

/// Cached `e^{2πi k/denom}` for all `k`, falling back to direct evaluation
/// for very large denominators.
#[derive(Debug, Clone)]
pub struct PhaseTable {
    denom: u64,
    table: Option<Vec<Complex64>>,
}

impl PhaseTable {
    const MAX_CACHED: u64 = 1 << 16;

    pub fn new(denom: u64) -> Self {
        let table = (denom <= Self::MAX_CACHED)
            .then(|| (0..denom).map(|k| unit_phase(k, denom)).collect());
        PhaseTable { denom, table }
    }

    pub fn denom(&self) -> u64 {
        self.denom
    }

    /// `e^{2πi·numer/denom}`; `numer` must already be reduced.
    #[inline]
    pub fn get(&self, numer: u64) -> Complex64 {
        match &self.table {
            Some(t) => t[numer as usize],
            None => unit_phase(numer, self.denom),
        }
    }
}

/// `{r}_p`: the negative-power digit tail of a rational with p-power
/// denominator.
pub fn fractional_part(p: Prime, r: &BigRational) -> Result<RationalPhase> {
    let denom = r.denom().abs();
    let k = p_power_exponent(p, &denom).ok_or_else(|| Error::NotPPower(r.to_string()))?;
    if k == 0 {
        return Ok(RationalPhase::zero(p));
    }
    let m = BigInt::from(p.pow(k)?);
    let mut a = r.numer().mod_floor(&m);
    if r.denom().is_negative() {
        a = (-a).mod_floor(&m);
    }
    let a = a.to_u64().expect("reduced below a 62-bit modulus");
    Ok(RationalPhase { p, numer: a, denom_exp: k })
}

/// `{ξ·u}_p` for a vector of dual classes against a vector of residues.
pub fn dual_pair(xi: &[DualScalar], u: &[Residue]) -> Result<RationalPhase> {
    if xi.len() != u.len() {
        return Err(Error::Format(format!(
            "dual pairing of vectors with lengths {} and {}",
            xi.len(),
            u.len()
        )));
    }
    let Some(first) = xi.first() else {
        return Err(Error::Format("dual pairing of empty vectors".into()));
    };
    let mut acc = DualScalar::trivial(first.p);
    for (x, r) in xi.iter().zip(u) {
        acc = acc.add(&x.scale(r)?)?;
    }
    Ok(acc.phase())
}

/// `χ_p(ξ·u) = e^{2πi{ξ·u}_p}`.
pub fn character_value(xi: &[DualScalar], u: &[Residue]) -> Result<Complex64> {
    Ok(dual_pair(xi, u)?.character())
}
