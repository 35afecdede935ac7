//! The unitary dual of `H_d(Z_p)`: labels `(ξ, η, λ)`, their explicit
//! realizations on `L²((Z/p^m)^d)` with `|λ| = p^m`, matrix coefficients and
//! characters.
//!
//! In the basis `{φ_h : h ∈ (Z/p^m)^d}` (flat order `Σ h_i p^{m·i}`), the
//! matrix of `π(g)` has entries
//!
//! `M_{h'h}(g) = e(ξ·x + η·y + λ(z + h'·y)) · [x ≡ h − h' mod p^m]`
//!
//! so each column has exactly one nonzero entry. Columns are the images
//! `π(g)φ_h`, making `M(g)M(g') = M(g⋆g')`.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::DMatrix;
use num_bigint::BigUint;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::group::{GroupElement, Heisenberg, MAX_D};
use crate::padic::{DualScalar, PhaseTable, Prime};

/// A class `(ξ, η, λ)` of the unitary dual.
///
/// `(ξ, η)` is only defined modulo `p^{-m} Z_p^{2d}`; the stored components
/// are the canonical representatives (digits `c_1..c_m` vanish).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RepLabel {
    xi: Vec<DualScalar>,
    eta: Vec<DualScalar>,
    lambda: DualScalar,
}

impl RepLabel {
    pub fn new(xi: Vec<DualScalar>, eta: Vec<DualScalar>, lambda: DualScalar) -> Result<Self> {
        if xi.is_empty() || xi.len() != eta.len() || xi.len() > MAX_D {
            return Err(Error::InvalidLabel(format!(
                "xi and eta must have the same length in 1..={MAX_D} (got {} and {})",
                xi.len(),
                eta.len()
            )));
        }
        let p = lambda.prime();
        let m = lambda.denom_exp();
        for (name, v) in [("xi", &xi), ("eta", &eta)] {
            for c in v.iter() {
                if c.prime() != p {
                    return Err(Error::PrimeMismatch(p.get(), c.prime().get()));
                }
                if c.reduce(m) != *c {
                    return Err(Error::InvalidLabel(format!(
                        "{name} component {c} is not reduced modulo p^-{m} (lambda = {lambda})"
                    )));
                }
            }
        }
        Ok(RepLabel { xi, eta, lambda })
    }

    /// Accepts arbitrary `(ξ, η)` and reduces them modulo `p^{-m}`.
    pub fn new_reducing(xi: Vec<DualScalar>, eta: Vec<DualScalar>, lambda: DualScalar) -> Result<Self> {
        let m = lambda.denom_exp();
        let xi = xi.iter().map(|c| c.reduce(m)).collect();
        let eta = eta.iter().map(|c| c.reduce(m)).collect();
        Self::new(xi, eta, lambda)
    }

    pub fn trivial(p: Prime, d: usize) -> Self {
        let z = DualScalar::trivial(p);
        RepLabel { xi: vec![z; d], eta: vec![z; d], lambda: z }
    }

    pub fn xi(&self) -> &[DualScalar] {
        &self.xi
    }
    pub fn eta(&self) -> &[DualScalar] {
        &self.eta
    }
    pub fn lambda(&self) -> DualScalar {
        self.lambda
    }
    pub fn prime(&self) -> Prime {
        self.lambda.prime()
    }
    pub fn d(&self) -> usize {
        self.xi.len()
    }
    /// `m` with `|λ| = p^m`.
    pub fn m(&self) -> u32 {
        self.lambda.denom_exp()
    }
    pub fn is_trivial(&self) -> bool {
        self.lambda.is_trivial() && self.xi.iter().chain(&self.eta).all(|c| c.is_trivial())
    }
    /// `d_π = |λ|^d`.
    pub fn dim(&self) -> usize {
        (self.prime().get() as usize).pow(self.m() * self.d() as u32)
    }
    /// `log_p ‖(ξ, η, λ)‖`, the smallest level at which the coefficients are
    /// defined.
    pub fn norm_exp(&self) -> u32 {
        self.xi.iter().chain(&self.eta).map(|c| c.denom_exp()).fold(self.m(), u32::max)
    }
    pub fn norm(&self) -> f64 {
        (self.prime().get() as f64).powi(self.norm_exp() as i32)
    }

    fn check_ctx(&self, ctx: &Heisenberg) -> Result<()> {
        if ctx.prime() != self.prime() {
            return Err(Error::PrimeMismatch(ctx.p(), self.prime().get()));
        }
        if ctx.d() != self.d() {
            return Err(Error::InvalidLabel(format!(
                "label has d = {}, group has d = {}",
                self.d(),
                ctx.d()
            )));
        }
        if ctx.level() < self.norm_exp() {
            return Err(Error::InsufficientPrecision { needed: self.norm_exp(), available: ctx.level() });
        }
        Ok(())
    }
}

impl PartialOrd for RepLabel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Enumeration order: `λ` first, then `ξ`, then `η` (lexicographic).
impl Ord for RepLabel {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.lambda, &self.xi, &self.eta).cmp(&(other.lambda, &other.xi, &other.eta))
    }
}

impl fmt::Display for RepLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[DualScalar]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "([{}],[{}],{})", join(&self.xi), join(&self.eta), self.lambda)
    }
}

/// A label's data pre-scaled to a common denominator `p^n`, for fast
/// coefficient evaluation at level `n`.
#[derive(Debug, Clone)]
pub(crate) struct LabelAtLevel {
    pub d: usize,
    pub modulus: u64,
    pub pm: u64,
    pub dim: usize,
    pub xi: [u64; MAX_D],
    pub eta: [u64; MAX_D],
    pub lam: u64,
}

impl LabelAtLevel {
    pub fn new(label: &RepLabel, ctx: &Heisenberg) -> Result<Self> {
        label.check_ctx(ctx)?;
        let n = ctx.level();
        let mut xi = [0; MAX_D];
        let mut eta = [0; MAX_D];
        for i in 0..label.d() {
            xi[i] = label.xi[i].numer_at(n);
            eta[i] = label.eta[i].numer_at(n);
        }
        Ok(LabelAtLevel {
            d: label.d(),
            modulus: ctx.modulus(),
            pm: ctx.prime().pow_unchecked(label.m()),
            dim: label.dim(),
            xi,
            eta,
            lam: label.lambda.numer_at(n),
        })
    }

    /// Row index `h' = h − x mod p^m` of the nonzero entry in column `h`.
    #[inline]
    pub fn row_of(&self, col: usize, g: &GroupElement) -> usize {
        let pm = self.pm as usize;
        let mut c = col;
        let mut row = 0;
        let mut scale = 1;
        for i in 0..self.d {
            let h = c % pm;
            c /= pm;
            let x = (g.x[i] % self.pm) as usize;
            row += ((h + pm - x) % pm) * scale;
            scale *= pm;
        }
        row
    }

    /// Phase numerator (over `p^n`) of `ξ·x + η·y + λ(z + h'·y)`.
    #[inline]
    pub fn phase(&self, row: usize, g: &GroupElement) -> u64 {
        let q = self.modulus as u128;
        let pm = self.pm as usize;
        let mut acc: u128 = self.lam as u128 * g.z as u128;
        let mut r = row;
        for i in 0..self.d {
            let hp = (r % pm) as u128;
            r /= pm;
            acc += self.xi[i] as u128 * g.x[i] as u128;
            acc += (self.eta[i] as u128 + self.lam as u128 * hp) % q * g.y[i] as u128;
        }
        (acc % q) as u64
    }
}

/// A monomial matrix: column `c` has the single entry `values[c]` at row
/// `rows[c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialMatrix {
    pub rows: Vec<usize>,
    pub values: Vec<Complex64>,
}

impl MonomialMatrix {
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (c, (&r, &v)) in self.rows.iter().zip(&self.values).enumerate() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn trace(&self) -> Complex64 {
        self.rows.iter().zip(&self.values).enumerate().filter(|(c, (r, _))| *c == **r).map(|(_, (_, v))| *v).sum()
    }
}

/// Evaluates many coefficients of one label at one level.
#[derive(Debug, Clone)]
pub struct RepEvaluator {
    pub(crate) at: LabelAtLevel,
    phases: PhaseTable,
}

impl RepEvaluator {
    pub fn new(label: &RepLabel, ctx: &Heisenberg) -> Result<Self> {
        Ok(RepEvaluator { at: LabelAtLevel::new(label, ctx)?, phases: PhaseTable::new(ctx.modulus()) })
    }

    pub fn dim(&self) -> usize {
        self.at.dim
    }

    /// The row `h'` and value of the nonzero entry in column `h`.
    #[inline]
    pub fn column_entry(&self, col: usize, g: &GroupElement) -> (usize, Complex64) {
        let row = self.at.row_of(col, g);
        (row, self.phases.get(self.at.phase(row, g)))
    }

    /// `M_{h'h}(g)`.
    #[inline]
    pub fn coefficient(&self, row: usize, col: usize, g: &GroupElement) -> Complex64 {
        let (r, v) = self.column_entry(col, g);
        if r == row {
            v
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    pub fn monomial(&self, g: &GroupElement) -> MonomialMatrix {
        let (rows, values) = (0..self.at.dim).map(|c| self.column_entry(c, g)).unzip();
        MonomialMatrix { rows, values }
    }

    pub fn trace(&self, g: &GroupElement) -> Complex64 {
        (0..self.at.dim).map(|c| self.coefficient(c, c, g)).sum()
    }
}

/// `π_{(ξ,η,λ)}(g)` as a dense matrix. The group level must be at least the
/// label's norm exponent.
pub fn rep_matrix(ctx: &Heisenberg, label: &RepLabel, g: &GroupElement) -> Result<DMatrix<Complex64>> {
    check_element(ctx, g)?;
    Ok(RepEvaluator::new(label, ctx)?.monomial(g).to_dense())
}

pub fn rep_monomial(ctx: &Heisenberg, label: &RepLabel, g: &GroupElement) -> Result<MonomialMatrix> {
    check_element(ctx, g)?;
    Ok(RepEvaluator::new(label, ctx)?.monomial(g))
}

/// `χ_π(g) = Tr π(g)`.
pub fn character_value(ctx: &Heisenberg, label: &RepLabel, g: &GroupElement) -> Result<Complex64> {
    check_element(ctx, g)?;
    Ok(RepEvaluator::new(label, ctx)?.trace(g))
}

fn check_element(ctx: &Heisenberg, g: &GroupElement) -> Result<()> {
    if g.level() != ctx.level() {
        return Err(Error::LevelMismatch { left: ctx.level(), right: g.level() });
    }
    Ok(())
}

/// Admissible values of one `ξ_i` or `η_i` when `|λ| = p^m` and the label
/// norm is at most `p^n`: the trivial class, then `a/p^K` for
/// `K = m+1..=n` and `p ∤ a < p^{K−m}`.
fn component_classes(p: Prime, m: u32, n: u32) -> Vec<DualScalar> {
    let mut out = vec![DualScalar::trivial(p)];
    for k in m + 1..=n {
        let top = p.pow_unchecked(k - m);
        out.extend((1..top).filter(|a| a % p.get() != 0).map(|a| DualScalar::canonical(p, a, k)));
    }
    out
}

/// All `d`-tuples over `classes`, first coordinate varying slowest.
fn tuples(classes: &[DualScalar], d: usize) -> Vec<Vec<DualScalar>> {
    let mut out: Vec<Vec<DualScalar>> = vec![Vec::new()];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                classes.iter().map(move |c| {
                    let mut v = prefix.clone();
                    v.push(*c);
                    v
                })
            })
            .collect();
    }
    out
}

/// Central characters `λ` with `|λ| = p^m`, by numerator.
pub fn central_classes(p: Prime, m: u32) -> Vec<DualScalar> {
    if m == 0 {
        return vec![DualScalar::trivial(p)];
    }
    (1..p.pow_unchecked(m)).filter(|a| a % p.get() != 0).map(|a| DualScalar::canonical(p, a, m)).collect()
}

/// Lazily enumerates the dual ball `B(n) = {‖(ξ, η, λ)‖ ≤ p^n}` with
/// `n = ctx.level()`: `λ` by norm then numerator, then `ξ`, then `η`.
pub fn dual_ball(ctx: &Heisenberg) -> impl Iterator<Item = RepLabel> + '_ {
    let p = ctx.prime();
    let n = ctx.level();
    let d = ctx.d();
    (0..=n).flat_map(move |m| {
        let comps = tuples(&component_classes(p, m, n), d);
        central_classes(p, m).into_iter().flat_map(move |lambda| {
            let comps = comps.clone();
            let outer = comps.clone();
            outer.into_iter().flat_map(move |xi| {
                comps.clone().into_iter().map(move |eta| RepLabel { xi: xi.clone(), eta, lambda })
            })
        })
    })
}

pub fn enumerate_dual(ctx: &Heisenberg) -> Vec<RepLabel> {
    dual_ball(ctx).collect()
}

/// `(Σ_{B(n)} d_π², p^{n(2d+1)})`, both exact.
pub fn verify_peter_weyl(ctx: &Heisenberg) -> (BigUint, BigUint) {
    let p = BigUint::from(ctx.p());
    let d = ctx.d() as u32;
    let lhs = dual_ball(ctx).map(|l| p.pow(2 * l.m() * d)).sum();
    (lhs, ctx.order())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ds(p: u64, a: i64, k: u32) -> DualScalar {
        DualScalar::new(Prime::new(p).unwrap(), a, k).unwrap()
    }

    #[test]
    fn census_small() {
        let g = Heisenberg::new(3, 1, 1).unwrap();
        let labels = enumerate_dual(&g);
        assert_eq!(labels.len(), 11);
        assert_eq!(labels.iter().filter(|l| l.lambda().is_trivial()).count(), 9);
        assert!(labels[..9].iter().all(|l| l.dim() == 1));
        assert!(labels[9..].iter().all(|l| l.dim() == 3 && l.xi()[0].is_trivial() && l.eta()[0].is_trivial()));
        assert!(labels[0].is_trivial());
        let mut sorted = labels.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted, labels);

        let g0 = Heisenberg::new(3, 1, 0).unwrap();
        assert_eq!(enumerate_dual(&g0), vec![RepLabel::trivial(Prime::new(3).unwrap(), 1)]);
    }

    #[test]
    fn peter_weyl_counts() {
        for (p, d, n, want) in [(3, 1, 1, 27u64), (3, 1, 2, 729), (5, 1, 1, 125), (3, 2, 1, 243)] {
            let g = Heisenberg::new(p, d, n).unwrap();
            let (a, b) = verify_peter_weyl(&g);
            assert_eq!(a, BigUint::from(want));
            assert_eq!(b, BigUint::from(want));
        }
    }

    #[test]
    fn label_validation() {
        let p = Prime::new(3).unwrap();
        // 1/3 is absorbed once |λ| = 3
        assert!(RepLabel::new(vec![ds(3, 1, 1)], vec![ds(3, 0, 0)], ds(3, 1, 1)).is_err());
        assert!(RepLabel::new(vec![ds(3, 1, 2)], vec![ds(3, 0, 0)], ds(3, 1, 1)).is_ok());
        let l = RepLabel::new_reducing(vec![ds(3, 4, 2)], vec![ds(3, 1, 1)], ds(3, 1, 1)).unwrap();
        assert_eq!(l.xi()[0], ds(3, 1, 2));
        assert!(l.eta()[0].is_trivial());
        assert_eq!(l.norm_exp(), 2);
        assert!(RepLabel::new(vec![], vec![], DualScalar::trivial(p)).is_err());
    }

    #[test]
    fn central_element_acts_by_scalar() {
        let g = Heisenberg::new(3, 1, 1).unwrap();
        let l = RepLabel::new(vec![ds(3, 0, 0)], vec![ds(3, 0, 0)], ds(3, 1, 1)).unwrap();
        let m = rep_matrix(&g, &l, &g.element(&[0], &[0], 1).unwrap()).unwrap();
        let w = Complex64::from_polar(1.0, std::f64::consts::TAU / 3.0);
        let want = DMatrix::identity(3, 3) * w;
        assert!((m - want).norm() < 1e-15);
        let id = rep_matrix(&g, &l, &g.identity()).unwrap();
        assert_eq!(id, DMatrix::identity(3, 3));
    }

    #[test]
    fn characters() {
        let g = Heisenberg::new(3, 1, 1).unwrap();
        let l = RepLabel::new(vec![ds(3, 0, 0)], vec![ds(3, 0, 0)], ds(3, 1, 1)).unwrap();
        assert_eq!(character_value(&g, &l, &g.identity()).unwrap(), Complex64::new(3.0, 0.0));
        assert!(character_value(&g, &l, &g.element(&[1], &[0], 0).unwrap()).unwrap().norm() < 1e-15);
        let mean_sq: f64 = g
            .enumerate_quotient()
            .unwrap()
            .map(|e| character_value(&g, &l, &e).unwrap().norm_sqr())
            .sum::<f64>()
            / 27.0;
        assert!((mean_sq - 1.0).abs() < 1e-12);
    }

    #[test]
    fn character_matches_closed_form() {
        let g = Heisenberg::new(3, 1, 2).unwrap();
        for l in enumerate_dual(&g) {
            let ev = RepEvaluator::new(&l, &g).unwrap();
            let pm = g.prime().pow_unchecked(l.m());
            for e in g.enumerate_quotient().unwrap() {
                let tr = ev.trace(&e);
                let want = if e.x(1)[0] % pm == 0 && e.y(1)[0] % pm == 0 {
                    let ph = l.xi()[0].scale_int(e.x(1)[0] as i128)
                        .add(&l.eta()[0].scale_int(e.y(1)[0] as i128)).unwrap()
                        .add(&l.lambda().scale_int(e.z() as i128)).unwrap();
                    ph.phase().character() * l.dim() as f64
                } else {
                    Complex64::new(0.0, 0.0)
                };
                assert!((tr - want).norm() < 1e-12, "{l} at {e:?}");
            }
        }
    }

    #[test]
    fn homomorphism_and_unitarity_random() {
        let g = Heisenberg::new(3, 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = g.num_points().unwrap();
        let labels: Vec<_> = enumerate_dual(&g).into_iter().filter(|l| l.m() >= 1).take(40).collect();
        for l in &labels {
            for _ in 0..3 {
                let a = g.element_at(rng.gen_range(0..n));
                let b = g.element_at(rng.gen_range(0..n));
                let ma = rep_matrix(&g, l, &a).unwrap();
                let mb = rep_matrix(&g, l, &b).unwrap();
                let mab = rep_matrix(&g, l, &g.multiply(&a, &b).unwrap()).unwrap();
                assert!((&ma * &mb - mab).norm() < 1e-12);
                let u = &ma * ma.adjoint();
                assert!((u - DMatrix::identity(l.dim(), l.dim())).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn precision_is_checked() {
        let g = Heisenberg::new(3, 1, 1).unwrap();
        let l = RepLabel::new(vec![ds(3, 1, 2)], vec![ds(3, 0, 0)], ds(3, 0, 0)).unwrap();
        assert!(matches!(
            rep_matrix(&g, &l, &g.identity()),
            Err(Error::InsufficientPrecision { needed: 2, available: 1 })
        ));
    }
}
