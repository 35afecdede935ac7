//! Spectra of invariant VT operators.
//!
//! For `|λ| = p^m > 1` and `h' ∈ (Z/p^m)^d` the row space
//! `V^{h'} = span_h M_{h'h}` is invariant, and its functions are
//! `e^{2πi{ξ·x + η·y + λ(z + h'·y)}} φ(x mod p^m)`. The characters
//!
//! `e_τ(g) = e^{2πi{λ(z + h'·y) + (ξ+τ)·x + η·y}}`, `τ ∈ (p^{−m}Z/Z)^d`,
//!
//! form an orthonormal basis of it. A direction `(a, 0, c)` acts on `e_τ` by the
//! scalar `s(a·(ξ+τ) + cλ)`, while a direction `(0, b, c)` acts as
//! multiplication by `x ↦ s(b·(η + λ(x + h')) + cλ)`. That potential is
//! constant, making the block diagonal, only when the genericity predicate
//! holds.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::dual::{central_classes, dual_ball, RepLabel};
use crate::error::{Error, Result};
use crate::group::{GroupElement, Heisenberg, LevelFunction, MAX_D};
use crate::linalg::{hermitian_eigenvalues, match_sorted, singular_values};
use crate::operators::{scalar_symbol, vt_constants, CompiledOperator, Direction, OperatorSpec, OperatorTerm};
use crate::padic::{DualScalar, PhaseTable, Prime};

pub const VERSION: &str = concat!("heisenvt ", env!("CARGO_PKG_VERSION"));
/// Relative tolerance for eigenvalue multiset matching.
pub const MATCH_TOL: f64 = 1e-9;
/// Default size limit for the dense delta-basis oracle.
pub const DENSE_BUDGET: usize = 5000;

/// How each term of a spec acts on the `e_τ` basis.
#[derive(Debug, Clone, PartialEq)]
pub enum TermShape {
    /// `(a, 0, c)`: scalar `s(a·(ξ+τ) + cλ)`.
    XType { a: Vec<i64>, c: i64, alpha: f64 },
    /// `(0, b, c)` with `b ≠ 0`: potential `s(b·(η + λ(x+h')) + cλ)`.
    YType { b: Vec<i64>, c: i64, alpha: f64 },
    /// The full VT operator: `‖π‖^α − c_sub(α, 2d+1)` on nontrivial labels.
    FullVt { alpha: f64 },
    /// Both `a` and `b` nonzero: no closed form.
    Mixed,
}

pub fn term_shapes(spec: &OperatorSpec) -> Vec<TermShape> {
    spec.terms
        .iter()
        .map(|t| match t {
            OperatorTerm::FullVt { alpha } => TermShape::FullVt { alpha: *alpha },
            OperatorTerm::Directional { direction: Direction { a, b, c }, alpha } => {
                let a_zero = a.iter().all(|v| *v == 0);
                let b_zero = b.iter().all(|v| *v == 0);
                match (a_zero, b_zero) {
                    (_, true) => TermShape::XType { a: a.clone(), c: *c, alpha: *alpha },
                    (true, false) => TermShape::YType { b: b.clone(), c: *c, alpha: *alpha },
                    (false, false) => TermShape::Mixed,
                }
            }
        })
        .collect()
}

fn dot_dual(coef: &[i64], v: &[DualScalar], p: Prime) -> DualScalar {
    coef.iter()
        .zip(v)
        .fold(DualScalar::trivial(p), |acc, (c, x)| acc.add(&x.scale_int(*c as i128)).expect("same prime"))
}

/// `λ(x + h') + η`, componentwise.
fn shifted_eta(label: &RepLabel, x: &[u64], h_prime: &[u64]) -> Vec<DualScalar> {
    (0..label.d())
        .map(|i| {
            label.lambda().scale_int(x[i] as i128 + h_prime[i] as i128).add(&label.eta()[i]).expect("same prime")
        })
        .collect()
}

/// The frequencies `τ ∈ (p^{−m}Z/Z)^d` in flat numerator order
/// (`τ_1` fastest).
pub fn tau_classes(p: Prime, m: u32, d: usize) -> Vec<Vec<DualScalar>> {
    let pm = p.pow_unchecked(m);
    let count = (pm as usize).pow(d as u32);
    (0..count)
        .map(|mut idx| {
            (0..d)
                .map(|_| {
                    let t = (idx % pm as usize) as u64;
                    idx /= pm as usize;
                    DualScalar::canonical(p, t, m)
                })
                .collect()
        })
        .collect()
}

/// All `h' ∈ (Z/p^m)^d` in flat order.
pub fn h_primes(p: Prime, m: u32, d: usize) -> Vec<Vec<u64>> {
    let pm = p.pow_unchecked(m) as usize;
    (0..pm.pow(d as u32))
        .map(|mut idx| {
            (0..d)
                .map(|_| {
                    let h = (idx % pm) as u64;
                    idx /= pm;
                    h
                })
                .collect()
        })
        .collect()
}

fn check_block_args(label: &RepLabel, h_prime: &[u64], tau: Option<&[DualScalar]>) -> Result<()> {
    let pm = label.prime().pow_unchecked(label.m());
    if h_prime.len() != label.d() || h_prime.iter().any(|h| *h >= pm) {
        return Err(Error::OutOfRange(format!("h' must have {} entries below {pm}", label.d())));
    }
    if let Some(tau) = tau {
        if tau.len() != label.d() || tau.iter().any(|t| t.denom_exp() > label.m() || t.prime() != label.prime()) {
            return Err(Error::OutOfRange(format!("tau must have {} entries with norm at most |lambda|", label.d())));
        }
    }
    Ok(())
}

/// The printed closed form: `Σ_terms` of the piecewise scalar symbol at the
/// term's argument, with the `Y`-potentials evaluated at `x = 0`.
pub fn closed_form_eigenvalue(spec: &OperatorSpec, label: &RepLabel, h_prime: &[u64], tau: &[DualScalar]) -> Result<f64> {
    check_block_args(label, h_prime, Some(tau))?;
    let p = label.prime();
    let d = label.d();
    let xi_tau: Vec<DualScalar> = label.xi().iter().zip(tau).map(|(a, b)| a.add(b).expect("same prime")).collect();
    let eta_h = shifted_eta(label, &vec![0; d], h_prime);
    let lam = label.lambda();
    let mut total = 0.0;
    for shape in term_shapes(spec) {
        total += match shape {
            TermShape::XType { a, c, alpha } => {
                scalar_symbol(&dot_dual(&a, &xi_tau, p).add(&lam.scale_int(c as i128))?, alpha)
            }
            TermShape::YType { b, c, alpha } => {
                scalar_symbol(&dot_dual(&b, &eta_h, p).add(&lam.scale_int(c as i128))?, alpha)
            }
            TermShape::FullVt { alpha } => {
                if label.is_trivial() {
                    0.0
                } else {
                    label.norm().powf(alpha) - vt_constants(p.get(), alpha, 2 * d + 1).1
                }
            }
            TermShape::Mixed => {
                return Err(Error::InvalidSpec(
                    "closed form needs every direction inside span{X, Z} or span{Y, Z}".into(),
                ))
            }
        };
    }
    Ok(total)
}

/// True when every `Y`-potential `x ↦ s(b·(η + λ(x+h')) + cλ)` is constant on
/// `(Z/p^m)^d`, i.e. the block is diagonal in the `e_τ` basis.
pub fn genericity_predicate(spec: &OperatorSpec, label: &RepLabel, h_prime: &[u64]) -> bool {
    let p = label.prime();
    let shapes = term_shapes(spec);
    if shapes.iter().any(|s| *s == TermShape::Mixed) {
        return false;
    }
    let xs = h_primes(p, label.m(), label.d());
    shapes.iter().all(|s| match s {
        TermShape::YType { b, c, .. } => {
            let norm_at = |x: &[u64]| {
                dot_dual(b, &shifted_eta(label, x, h_prime), p)
                    .add(&label.lambda().scale_int(*c as i128))
                    .expect("same prime")
                    .norm_exp()
            };
            let first = norm_at(&xs[0]);
            xs.iter().all(|x| norm_at(x) == first)
        }
        _ => true,
    })
}

/// `e_τ` pre-scaled to a common denominator for repeated evaluation.
#[derive(Debug, Clone)]
struct EigenEvaluator {
    d: usize,
    modulus: u64,
    x: [u64; MAX_D],
    y: [u64; MAX_D],
    z: u64,
    phases: PhaseTable,
}

impl EigenEvaluator {
    fn new(ctx: &Heisenberg, label: &RepLabel, h_prime: &[u64], tau: &[DualScalar]) -> Result<Self> {
        if ctx.level() < label.norm_exp() {
            return Err(Error::InsufficientPrecision { needed: label.norm_exp(), available: ctx.level() });
        }
        let n = ctx.level();
        let mut x = [0; MAX_D];
        let mut y = [0; MAX_D];
        let eta_h = shifted_eta(label, &vec![0; label.d()], h_prime);
        for i in 0..label.d() {
            x[i] = label.xi()[i].add(&tau[i])?.numer_at(n);
            y[i] = eta_h[i].numer_at(n);
        }
        Ok(EigenEvaluator {
            d: label.d(),
            modulus: ctx.modulus(),
            x,
            y,
            z: label.lambda().numer_at(n),
            phases: PhaseTable::new(ctx.modulus()),
        })
    }

    #[inline]
    fn eval(&self, g: &GroupElement) -> Complex64 {
        let mut acc = self.z as u128 * g.z as u128;
        for i in 0..self.d {
            acc += self.x[i] as u128 * g.x[i] as u128 + self.y[i] as u128 * g.y[i] as u128;
        }
        self.phases.get((acc % self.modulus as u128) as u64)
    }
}

/// `e^{2πi{λ(z + h'·y) + (ξ+τ)·x + η·y}}` at `g`.
pub fn eigenfunction_value(
    ctx: &Heisenberg,
    label: &RepLabel,
    h_prime: &[u64],
    tau: &[DualScalar],
    g: &GroupElement,
) -> Result<Complex64> {
    check_block_args(label, h_prime, Some(tau))?;
    if g.level() != ctx.level() {
        return Err(Error::LevelMismatch { left: ctx.level(), right: g.level() });
    }
    Ok(EigenEvaluator::new(ctx, label, h_prime, tau)?.eval(g))
}

/// `e_τ` as a level function.
pub fn eigenfunction(ctx: &Heisenberg, label: &RepLabel, h_prime: &[u64], tau: &[DualScalar]) -> Result<LevelFunction> {
    check_block_args(label, h_prime, Some(tau))?;
    let ev = EigenEvaluator::new(ctx, label, h_prime, tau)?;
    LevelFunction::from_fn(*ctx, |g| ev.eval(g))
}

/// The restriction of an operator to `V^{h'}` in the `e_τ` basis:
/// `matrix[(τ', τ)] = ⟨T e_τ, e_τ'⟩`.
#[derive(Debug, Clone)]
pub struct SubrepBlock {
    pub label: RepLabel,
    pub h_prime: Vec<u64>,
    pub taus: Vec<Vec<DualScalar>>,
    pub matrix: DMatrix<Complex64>,
}

/// Applies `op` (compiled at level `≥ ‖label‖`) to each `e_τ` and projects
/// back with Haar inner products. Left invariance makes `T e_τ` carry the same
/// central factor `e(λz)`, so averaging over the `(x, y)` plane at `z = 0` is
/// exact.
pub fn restrict_with(op: &CompiledOperator, label: &RepLabel, h_prime: &[u64]) -> Result<SubrepBlock> {
    if label.lambda().is_trivial() {
        return Err(Error::InvalidLabel(format!("{label}: block restriction needs a nontrivial lambda")));
    }
    check_block_args(label, h_prime, None)?;
    let ctx = *op.ctx();
    let taus = tau_classes(label.prime(), label.m(), label.d());
    let evs = taus.iter().map(|t| EigenEvaluator::new(&ctx, label, h_prime, t)).collect::<Result<Vec<_>>>()?;
    let q = ctx.modulus() as usize;
    let plane = q.pow(2 * ctx.d() as u32);
    let k = taus.len();
    let mut mat = DMatrix::<Complex64>::zeros(k, k);
    for idx in 0..plane {
        // plane points have z = 0, i.e. index < p^{2nd}
        let g = ctx.element_at(idx);
        let conj: Vec<Complex64> = evs.iter().map(|e| e.eval(&g).conj()).collect();
        for (c, ev) in evs.iter().enumerate() {
            let t = op.apply_at(&g, |h| ev.eval(h));
            for r in 0..k {
                mat[(r, c)] += t * conj[r];
            }
        }
    }
    mat /= Complex64::new(plane as f64, 0.0);
    Ok(SubrepBlock { label: label.clone(), h_prime: h_prime.to_vec(), taus, matrix: mat })
}

/// [`restrict_with`] at the label's own level.
pub fn restrict_to_block(spec: &OperatorSpec, ctx: &Heisenberg, label: &RepLabel, h_prime: &[u64]) -> Result<SubrepBlock> {
    let level = ctx.at_level(label.norm_exp())?;
    restrict_with(&CompiledOperator::new(spec, &level)?, label, h_prime)
}

/// `(‖(I − P)TP‖_F, max |imag| of ⟨T e_τ, e_τ'⟩ − conj)` over the full
/// quotient at `op`'s level, with `P` the orthogonal projection onto `V^{h'}`.
pub fn block_invariance_residual(op: &CompiledOperator, label: &RepLabel, h_prime: &[u64]) -> Result<f64> {
    check_block_args(label, h_prime, None)?;
    let ctx = *op.ctx();
    let taus = tau_classes(label.prime(), label.m(), label.d());
    let basis = taus.iter().map(|t| eigenfunction(&ctx, label, h_prime, t)).collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    for b in &basis {
        let mut r = op.apply(b)?;
        for e in &basis {
            let c = r.inner(e)?;
            r.axpy(-c, e)?;
        }
        total += r.l2_norm().powi(2);
    }
    Ok(total.sqrt())
}

/// Eigenvalues of one block (or one character), with provenance.
#[derive(Debug, Clone, Serialize)]
pub struct BlockSpectrum {
    #[serde(serialize_with = "ser_label")]
    pub label: RepLabel,
    pub h_prime: Vec<u64>,
    pub generic: bool,
    /// `τ` per value (closed form only).
    #[serde(skip)]
    pub taus: Option<Vec<Vec<DualScalar>>>,
    /// Sorted ascending for oracle blocks; in `τ` order for closed forms.
    pub values: Vec<f64>,
    #[serde(skip)]
    pub matrix: Option<DMatrix<Complex64>>,
}

fn ser_label<S: serde::Serializer>(l: &RepLabel, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&l.to_string())
}

impl BlockSpectrum {
    fn key(&self) -> (RepLabel, Vec<u64>) {
        (self.label.clone(), self.h_prime.clone())
    }

    pub fn provenance(&self, k: usize) -> String {
        let h = self.h_prime.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        match &self.taus {
            Some(t) => {
                let tau = t[k].iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
                format!("{}|h'=[{h}]|tau=[{tau}]", self.label)
            }
            None => format!("{}|h'=[{h}]", self.label),
        }
    }

    pub fn sorted_values(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Dense,
    Block,
    Closed,
}

/// One eigenvalue with multiplicity.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumEntry {
    pub value: f64,
    pub mult: usize,
    pub labels: Vec<String>,
    /// `None` when the source has no block structure (dense mode).
    pub generic: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub p: u64,
    pub d: usize,
    pub n: u32,
    pub spec: Value,
    pub version: String,
    pub mode: Mode,
    pub entries: Vec<SpectrumEntry>,
    #[serde(skip)]
    pub blocks: Vec<BlockSpectrum>,
    /// Raw ascending eigenvalues (with multiplicity).
    #[serde(skip)]
    pub values: Vec<f64>,
}

impl SpectrumReport {
    fn from_blocks(ctx: &Heisenberg, spec: &OperatorSpec, mode: Mode, blocks: Vec<BlockSpectrum>) -> Self {
        let mut points: Vec<(f64, String, Option<bool>)> = Vec::new();
        for b in &blocks {
            for (k, v) in b.values.iter().enumerate() {
                points.push((*v, b.provenance(k), Some(b.generic)));
            }
        }
        Self::from_points(ctx, spec, mode, points, blocks)
    }

    fn from_points(
        ctx: &Heisenberg,
        spec: &OperatorSpec,
        mode: Mode,
        mut points: Vec<(f64, String, Option<bool>)>,
        blocks: Vec<BlockSpectrum>,
    ) -> Self {
        points.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        let values: Vec<f64> = points.iter().map(|p| p.0).collect();
        let mut entries: Vec<SpectrumEntry> = Vec::new();
        for (v, prov, generic) in points {
            match entries.last_mut() {
                Some(e) if (v - e.value).abs() <= MATCH_TOL * v.abs().max(1.0) => {
                    e.mult += 1;
                    if !prov.is_empty() {
                        e.labels.push(prov);
                    }
                    e.generic = match (e.generic, generic) {
                        (Some(a), Some(b)) => Some(a && b),
                        _ => None,
                    };
                }
                _ => entries.push(SpectrumEntry {
                    value: v,
                    mult: 1,
                    labels: if prov.is_empty() { vec![] } else { vec![prov] },
                    generic,
                }),
            }
        }
        for e in &mut entries {
            e.labels.sort();
        }
        SpectrumReport {
            p: ctx.p(),
            d: ctx.d(),
            n: ctx.level(),
            spec: spec.to_json(),
            version: VERSION.to_string(),
            mode,
            entries,
            blocks,
            values,
        }
    }

    pub fn total_multiplicity(&self) -> usize {
        self.entries.iter().map(|e| e.mult).sum()
    }

    /// One CSV row per `(label, h', τ)` (or per eigenvalue when there is no
    /// block structure).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,h_prime,tau,value,generic\n");
        if self.blocks.is_empty() {
            for v in &self.values {
                out.push_str(&format!(",,,{v},\n"));
            }
            return out;
        }
        for b in &self.blocks {
            let h = b.h_prime.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
            for (k, v) in b.values.iter().enumerate() {
                let tau = b
                    .taus
                    .as_ref()
                    .map(|t| t[k].iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "))
                    .unwrap_or_default();
                out.push_str(&format!("\"{}\",{h},{tau},{v},{}\n", b.label, b.generic));
            }
        }
        out
    }
}

/// Blocks `(label, h')` of `B(n)` in enumeration order; characters appear as
/// blocks with `m = 0`.
fn block_keys(ctx: &Heisenberg) -> Vec<(RepLabel, Vec<u64>)> {
    dual_ball(ctx)
        .flat_map(|l| {
            let hs = h_primes(l.prime(), l.m(), l.d());
            hs.into_iter().map(move |h| (l.clone(), h))
        })
        .collect()
}

/// The printed closed-form spectrum over all of `B(n)`.
pub fn closed_form_spectrum(spec: &OperatorSpec, ctx: &Heisenberg) -> Result<SpectrumReport> {
    spec.validate(ctx.d())?;
    let blocks = block_keys(ctx)
        .into_par_iter()
        .map(|(l, h)| {
            let taus = tau_classes(l.prime(), l.m(), l.d());
            let values = taus.iter().map(|t| closed_form_eigenvalue(spec, &l, &h, t)).collect::<Result<Vec<_>>>()?;
            Ok(BlockSpectrum {
                generic: genericity_predicate(spec, &l, &h),
                label: l,
                h_prime: h,
                taus: Some(taus),
                values,
                matrix: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumReport::from_blocks(ctx, spec, Mode::Closed, blocks))
}

/// Brute-force spectrum at level `n`, either from the full delta-basis matrix
/// (dense) or from the union of block restrictions and character symbols.
pub fn oracle_spectrum(spec: &OperatorSpec, ctx: &Heisenberg, mode: Mode, budget: usize) -> Result<SpectrumReport> {
    spec.validate(ctx.d())?;
    match mode {
        Mode::Dense => {
            let op = CompiledOperator::new(spec, ctx)?;
            let m = op.dense_matrix(budget)?;
            let eig = SymmetricEigen::new(m);
            let points = eig.eigenvalues.iter().map(|v| (*v, String::new(), None)).collect();
            Ok(SpectrumReport::from_points(ctx, spec, Mode::Dense, points, Vec::new()))
        }
        Mode::Block => {
            // one compiled operator per level up to n
            let ops = (0..=ctx.level())
                .map(|k| CompiledOperator::new(spec, &ctx.at_level(k)?))
                .collect::<Result<Vec<_>>>()?;
            let blocks = block_keys(ctx)
                .into_par_iter()
                .map(|(l, h)| {
                    let op = &ops[l.norm_exp() as usize];
                    let generic = genericity_predicate(spec, &l, &h);
                    if l.lambda().is_trivial() {
                        let s = op.symbol(&l)?;
                        return Ok(BlockSpectrum {
                            label: l,
                            h_prime: h,
                            generic,
                            taus: None,
                            values: vec![s[(0, 0)].re],
                            matrix: Some(s),
                        });
                    }
                    let b = restrict_with(op, &l, &h)?;
                    let values = hermitian_eigenvalues(&b.matrix)?;
                    Ok(BlockSpectrum { label: l, h_prime: h, generic, taus: None, values, matrix: Some(b.matrix) })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SpectrumReport::from_blocks(ctx, spec, Mode::Block, blocks))
        }
        Mode::Closed => closed_form_spectrum(spec, ctx),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockComparison {
    pub label: String,
    pub h_prime: Vec<u64>,
    pub generic: bool,
    pub closed: Vec<f64>,
    pub oracle: Vec<f64>,
    pub matched: bool,
}

/// Which printed subtraction constant the oracle supports on blocks where
/// every scalar-symbol argument is nontrivial.
#[derive(Debug, Clone, Serialize)]
pub struct PrintedConstantCheck {
    pub checked: usize,
    pub minus_2_csub: bool,
    pub minus_2d_csub: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub tol: f64,
    pub generic_blocks: usize,
    pub generic_mismatches: usize,
    pub degenerate_blocks: usize,
    pub degenerate_mismatches: usize,
    /// Degenerate blocks whose oracle spectrum differs from the printed one.
    pub degenerate: Vec<BlockComparison>,
    /// Generic blocks that failed to match (violations).
    pub violations: Vec<BlockComparison>,
    pub printed_constant: Option<PrintedConstantCheck>,
}

impl ComparisonReport {
    /// The closed form holds wherever it is claimed to (generic blocks).
    pub fn passed(&self) -> bool {
        self.generic_mismatches == 0
    }
}

/// Matches per block; generic mismatches are violations, degenerate ones are
/// recorded with both multisets.
pub fn compare_spectra(
    spec: &OperatorSpec,
    closed: &SpectrumReport,
    oracle: &SpectrumReport,
    tol: f64,
) -> Result<ComparisonReport> {
    if oracle.blocks.is_empty() {
        return Err(Error::Format("block comparison needs a block-mode oracle report".into()));
    }
    let oracle_blocks: BTreeMap<_, _> = oracle.blocks.iter().map(|b| (b.key(), b)).collect();
    let mut report = ComparisonReport {
        tol,
        generic_blocks: 0,
        generic_mismatches: 0,
        degenerate_blocks: 0,
        degenerate_mismatches: 0,
        degenerate: Vec::new(),
        violations: Vec::new(),
        printed_constant: None,
    };
    let mut printed = PrintedConstantCheck { checked: 0, minus_2_csub: true, minus_2d_csub: true };
    let sub_shaped = term_shapes(spec).iter().all(|s| matches!(s, TermShape::XType { c: 0, .. } | TermShape::YType { c: 0, .. }));
    for cb in &closed.blocks {
        let ob = oracle_blocks
            .get(&cb.key())
            .ok_or_else(|| Error::Format(format!("oracle report lacks block {}", cb.provenance(0))))?;
        let cs = cb.sorted_values();
        let os = ob.sorted_values();
        let matched = match_sorted(&cs, &os, tol).is_ok();
        let cmp = BlockComparison {
            label: cb.label.to_string(),
            h_prime: cb.h_prime.clone(),
            generic: cb.generic,
            closed: cs,
            oracle: os,
            matched,
        };
        if cb.generic {
            report.generic_blocks += 1;
            if !matched {
                report.generic_mismatches += 1;
                report.violations.push(cmp);
            }
            if sub_shaped {
                if let (Some(taus), Some(m)) = (&cb.taus, &ob.matrix) {
                    for (k, tau) in taus.iter().enumerate() {
                        if let Some((a, b)) = printed_forms(spec, &cb.label, &cb.h_prime, tau) {
                            printed.checked += 1;
                            let v = m[(k, k)].re;
                            let ok = |x: f64| (x - v).abs() <= tol * v.abs().max(1.0);
                            printed.minus_2_csub &= ok(a);
                            printed.minus_2d_csub &= ok(b);
                        }
                    }
                }
            }
        } else {
            report.degenerate_blocks += 1;
            if !matched {
                report.degenerate_mismatches += 1;
                report.degenerate.push(cmp);
            }
        }
    }
    if sub_shaped && printed.checked > 0 {
        report.printed_constant = Some(printed);
    }
    Ok(report)
}

/// The two printed variants `Σ|·|^α − 2·c_sub` and `Σ|·|^α − 2d·c_sub` when
/// every argument is nontrivial.
fn printed_forms(spec: &OperatorSpec, label: &RepLabel, h_prime: &[u64], tau: &[DualScalar]) -> Option<(f64, f64)> {
    let p = label.prime();
    let d = label.d();
    let xi_tau: Vec<DualScalar> = label.xi().iter().zip(tau).map(|(a, b)| a.add(b).unwrap()).collect();
    let eta_h = shifted_eta(label, &vec![0; d], h_prime);
    let mut sum = 0.0;
    let mut alpha0 = None;
    for s in term_shapes(spec) {
        let (w, alpha) = match s {
            TermShape::XType { a, alpha, .. } => (dot_dual(&a, &xi_tau, p), alpha),
            TermShape::YType { b, alpha, .. } => (dot_dual(&b, &eta_h, p), alpha),
            _ => return None,
        };
        if w.is_trivial() {
            return None;
        }
        alpha0.get_or_insert(alpha);
        sum += w.norm_f64().powf(alpha);
    }
    let c = vt_constants(p.get(), alpha0?, 1).1;
    Some((sum - 2.0 * c, sum - 2.0 * d as f64 * c))
}

#[derive(Debug, Clone, Serialize)]
pub struct Shell {
    pub j: u32,
    pub labels: usize,
    pub min_inf: f64,
    pub max_op: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EllipticityReport {
    pub p: u64,
    pub d: usize,
    pub spec: Value,
    pub version: String,
    pub shells: Vec<Shell>,
    /// Least-squares slope of `log_p min ‖σ‖_inf` against `j`; `None` when
    /// some shell minimum vanishes.
    pub inf_order: Option<f64>,
    pub op_order: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub hypoelliptic: bool,
    /// `op_order − inf_order` (sub-elliptic loss).
    pub delta: Option<f64>,
}

fn fit_log(p: f64, points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 || points.iter().any(|(_, y)| *y <= 0.0) {
        return None;
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|(x, _)| *x).collect();
    let ys: Vec<f64> = points.iter().map(|(_, y)| y.ln() / p.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Some((slope, p.powf(my - slope * mx)))
}

/// Per shell `‖π‖ = p^j`, `j = 1..=n_max`: the smallest singular value and the
/// largest operator norm of the symbol, with fitted growth orders.
pub fn hypoellipticity_scan(spec: &OperatorSpec, p: u64, d: usize, n_max: u32) -> Result<EllipticityReport> {
    let top = Heisenberg::new(p, d, n_max)?;
    spec.validate(d)?;
    let ops = (0..=n_max).map(|k| CompiledOperator::new(spec, &top.at_level(k)?)).collect::<Result<Vec<_>>>()?;
    let labels: Vec<RepLabel> = dual_ball(&top).filter(|l| l.norm_exp() >= 1).collect();
    let stats = labels
        .par_iter()
        .map(|l| {
            let s = ops[l.norm_exp() as usize].symbol(l)?;
            let sv = singular_values(&s)?;
            Ok((l.norm_exp(), sv[0], *sv.last().expect("nonempty")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut shells: Vec<Shell> = (1..=n_max)
        .map(|j| Shell { j, labels: 0, min_inf: f64::INFINITY, max_op: 0.0 })
        .collect();
    for (j, lo, hi) in stats {
        let s = &mut shells[j as usize - 1];
        s.labels += 1;
        s.min_inf = s.min_inf.min(lo);
        s.max_op = s.max_op.max(hi);
    }
    let pf = p as f64;
    // a vanishing singular value on some shell breaks the lower bound
    let zero_floor = 1e-12;
    let vanishing = shells.iter().any(|s| s.min_inf <= zero_floor * s.max_op.max(1.0));
    let inf_fit = if vanishing {
        None
    } else {
        fit_log(pf, &shells.iter().map(|s| (s.j as f64, s.min_inf)).collect::<Vec<_>>())
    };
    let op_fit = fit_log(pf, &shells.iter().map(|s| (s.j as f64, s.max_op)).collect::<Vec<_>>());
    let hypoelliptic = !vanishing && inf_fit.is_some_and(|(m, _)| m > 0.0);
    Ok(EllipticityReport {
        p,
        d,
        spec: spec.to_json(),
        version: VERSION.to_string(),
        inf_order: inf_fit.map(|f| f.0),
        op_order: op_fit.map(|f| f.0),
        c1: inf_fit.map(|f| f.1),
        c2: op_fit.map(|f| f.1),
        delta: match (inf_fit, op_fit) {
            (Some(a), Some(b)) => Some(b.0 - a.0),
            _ => None,
        },
        hypoelliptic,
        shells,
    })
}

/// Number of central characters with `|λ| = p^m` (for completeness checks).
pub fn central_count(p: Prime, m: u32) -> usize {
    central_classes(p, m).len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(a: i64, k: u32) -> DualScalar {
        DualScalar::new(Prime::new(3).unwrap(), a, k).unwrap()
    }

    fn label(xi: DualScalar, eta: DualScalar, lam: DualScalar) -> RepLabel {
        RepLabel::new(vec![xi], vec![eta], lam).unwrap()
    }

    #[test]
    fn worked_closed_forms() {
        let sub = OperatorSpec::canonical_sublaplacian(1, 1.0);
        let l = label(ds(0, 0), ds(1, 2), ds(1, 1));
        assert!((closed_form_eigenvalue(&sub, &l, &[0], &[ds(1, 1)]).unwrap() - 10.5).abs() < 1e-12);
        assert!(genericity_predicate(&sub, &l, &[0]));
        let l0 = label(ds(0, 0), ds(0, 0), ds(1, 1));
        assert_eq!(closed_form_eigenvalue(&sub, &l0, &[0], &[ds(0, 0)]).unwrap(), 0.0);
        assert!(!genericity_predicate(&sub, &l0, &[0]));
        let ch = label(ds(1, 1), ds(1, 1), ds(0, 0));
        assert!((closed_form_eigenvalue(&sub, &ch, &[0], &[ds(0, 0)]).unwrap() - 4.5).abs() < 1e-12);
        assert!(closed_form_eigenvalue(&sub, &l, &[0], &[ds(1, 2)]).is_err());
    }

    #[test]
    fn generic_block_is_diagonal() {
        let g = Heisenberg::new(3, 1, 2).unwrap();
        let sub = OperatorSpec::canonical_sublaplacian(1, 1.0);
        let l = label(ds(0, 0), ds(1, 2), ds(1, 1));
        let b = restrict_to_block(&sub, &g, &l, &[0]).unwrap();
        for (k, t) in b.taus.iter().enumerate() {
            let want = closed_form_eigenvalue(&sub, &l, &[0], t).unwrap();
            assert!((b.matrix[(k, k)].re - want).abs() < 1e-12);
        }
        let off = &b.matrix - DMatrix::from_diagonal(&b.matrix.diagonal());
        assert!(off.norm() < 1e-12);
    }

    #[test]
    fn degenerate_block_matrix() {
        let g = Heisenberg::new(3, 1, 1).unwrap();
        let sub = OperatorSpec::canonical_sublaplacian(1, 1.0);
        let l = label(ds(0, 0), ds(0, 0), ds(1, 1));
        let b = restrict_to_block(&sub, &g, &l, &[0]).unwrap();
        let want = DMatrix::from_fn(3, 3, |i, j| {
            let d = if i != j { 0.0 } else if i == 0 { 2.25 } else { 4.5 };
            Complex64::new(d - 0.75, 0.0)
        });
        assert!((&b.matrix - want).norm() < 1e-12, "{}", b.matrix);
    }

    #[test]
    fn eigenfunctions_are_orthonormal_and_eigen() {
        let g = Heisenberg::new(3, 1, 2).unwrap();
        let l = label(ds(0, 0), ds(1, 2), ds(1, 1));
        assert_eq!(eigenfunction_value(&g, &l, &[1], &[ds(2, 1)], &g.identity()).unwrap(), Complex64::new(1.0, 0.0));
        let mut fs = Vec::new();
        for h in 0..3u64 {
            for t in tau_classes(l.prime(), 1, 1) {
                fs.push(eigenfunction(&g, &l, &[h], &t).unwrap());
            }
        }
        for (i, a) in fs.iter().enumerate() {
            for (j, b) in fs.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((a.inner(b).unwrap() - want).norm() < 1e-12);
            }
        }
        let sub = OperatorSpec::canonical_sublaplacian(1, 1.0);
        let e = eigenfunction(&g, &l, &[0], &[ds(1, 1)]).unwrap();
        let te = crate::operators::apply_operator(&sub, &e).unwrap();
        let mut want = e.clone();
        want.scale(Complex64::new(10.5, 0.0));
        assert!(te.max_abs_diff(&want).unwrap() < 1e-10);
    }

    #[test]
    fn fits() {
        let (m, c) = fit_log(3.0, &[(1.0, 6.0), (2.0, 18.0), (3.0, 54.0)]).unwrap();
        assert!((m - 1.0).abs() < 1e-12 && (c - 2.0).abs() < 1e-12);
        assert!(fit_log(3.0, &[(1.0, 0.0), (2.0, 1.0)]).is_none());
    }

    #[test]
    fn zero_operator_is_not_hypoelliptic() {
        let r = hypoellipticity_scan(&OperatorSpec::zero(), 3, 1, 2).unwrap();
        assert!(!r.hypoelliptic);
        assert!(r.shells.iter().all(|s| s.min_inf == 0.0));
    }
}
