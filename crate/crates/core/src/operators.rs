//! Vladimirov–Taibleson operators on `H_d(Z_p)`.
//!
//! A directional term along `V` with exponent `α` acts by
//!
//! `c_front(α,1) · ∫_{Z_p} (f(g ⋆ exp(tV)⁻¹) − f(g)) / |t|^{α+1} dt`
//!
//! and the full VT term by the same jump integral over the whole group against
//! `|h|^{−(α+2d+1)}`. For a level-`n` function both integrands are constant on
//! level-`n` cosets and vanish on the zero coset, so the integrals are finite
//! sums. Every term has a kernel symmetric under `h ↦ h⁻¹`, hence the compiled
//! operator is `Tf(g) = Σ_h w_h·f(g⋆h) − (Σ_h w_h)·f(g)` with real symmetric
//! weights.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dual::{RepEvaluator, RepLabel};
use crate::error::{Error, Result};
use crate::group::{GroupElement, Heisenberg, LevelFunction};
use crate::padic::{DualScalar, Prime};

/// A direction `(a, b, c) = Σ a_i X_i + Σ b_i Y_i + c Z` with integer
/// coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Direction {
    #[serde(default)]
    pub a: Vec<i64>,
    #[serde(default)]
    pub b: Vec<i64>,
    #[serde(default)]
    pub c: i64,
}

impl Direction {
    pub fn x(d: usize, k: usize) -> Self {
        let mut a = vec![0; d];
        a[k] = 1;
        Direction { a, b: vec![0; d], c: 0 }
    }
    pub fn y(d: usize, k: usize) -> Self {
        let mut b = vec![0; d];
        b[k] = 1;
        Direction { a: vec![0; d], b, c: 0 }
    }
    pub fn z(d: usize) -> Self {
        Direction { a: vec![0; d], b: vec![0; d], c: 1 }
    }
    fn is_zero(&self) -> bool {
        self.c == 0 && self.a.iter().chain(&self.b).all(|v| *v == 0)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(a={:?}, b={:?}, c={})", self.a, self.b, self.c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorTerm {
    Directional {
        #[serde(rename = "V")]
        direction: Direction,
        alpha: f64,
    },
    FullVt {
        alpha: f64,
    },
}

impl OperatorTerm {
    pub fn alpha(&self) -> f64 {
        match self {
            OperatorTerm::Directional { alpha, .. } | OperatorTerm::FullVt { alpha } => *alpha,
        }
    }
}

/// A formal sum of directional and full VT terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub terms: Vec<OperatorTerm>,
}

impl OperatorSpec {
    pub fn new(terms: Vec<OperatorTerm>) -> Self {
        OperatorSpec { terms }
    }

    pub fn directional(direction: Direction, alpha: f64) -> Self {
        OperatorSpec { terms: vec![OperatorTerm::Directional { direction, alpha }] }
    }

    pub fn full_vt(alpha: f64) -> Self {
        OperatorSpec { terms: vec![OperatorTerm::FullVt { alpha }] }
    }

    pub fn zero() -> Self {
        OperatorSpec { terms: Vec::new() }
    }

    /// `Σ_k ∂_{V_k}^{α_k} + ∂_{W_k}^{β_k}` with `V_k ∈ span{X}`, `W_k ∈
    /// span{Y}` linearly independent modulo `p`.
    pub fn sublaplacian(p: Prime, v: &[Vec<i64>], w: &[Vec<i64>], alpha: &[f64], beta: &[f64]) -> Result<Self> {
        let d = v.len();
        if w.len() != d || alpha.len() != d || beta.len() != d || d == 0 {
            return Err(Error::InvalidSpec(format!(
                "sub-Laplacian needs d directions and exponents of each kind (got V:{}, W:{}, alpha:{}, beta:{})",
                v.len(),
                w.len(),
                alpha.len(),
                beta.len()
            )));
        }
        for (name, vs) in [("V", v), ("W", w)] {
            if vs.iter().any(|x| x.len() != d) {
                return Err(Error::InvalidSpec(format!("{name}: every vector needs {d} coordinates")));
            }
            if rank_mod_p(vs, p.get()) < d {
                return Err(Error::InvalidSpec(format!("{name}: vectors are not linearly independent mod {p}")));
            }
        }
        let mut terms = Vec::with_capacity(2 * d);
        for k in 0..d {
            terms.push(OperatorTerm::Directional {
                direction: Direction { a: v[k].clone(), b: vec![0; d], c: 0 },
                alpha: alpha[k],
            });
            terms.push(OperatorTerm::Directional {
                direction: Direction { a: vec![0; d], b: w[k].clone(), c: 0 },
                alpha: beta[k],
            });
        }
        let spec = OperatorSpec { terms };
        spec.validate(d)?;
        Ok(spec)
    }

    /// Sub-Laplacian plus `∂_Z^γ`.
    pub fn laplacian(
        p: Prime,
        v: &[Vec<i64>],
        w: &[Vec<i64>],
        alpha: &[f64],
        beta: &[f64],
        gamma: f64,
    ) -> Result<Self> {
        let mut spec = Self::sublaplacian(p, v, w, alpha, beta)?;
        spec.terms.push(OperatorTerm::Directional { direction: Direction::z(v.len()), alpha: gamma });
        spec.validate(v.len())?;
        Ok(spec)
    }

    /// `Σ_k ∂_{X_k}^α + ∂_{Y_k}^α`.
    pub fn canonical_sublaplacian(d: usize, alpha: f64) -> Self {
        let terms = (0..d)
            .flat_map(|k| {
                [
                    OperatorTerm::Directional { direction: Direction::x(d, k), alpha },
                    OperatorTerm::Directional { direction: Direction::y(d, k), alpha },
                ]
            })
            .collect();
        OperatorSpec { terms }
    }

    /// `Σ_k ∂_{X_k}^α + ∂_{Y_k}^α + ∂_Z^α`.
    pub fn canonical_laplacian(d: usize, alpha: f64) -> Self {
        let mut s = Self::canonical_sublaplacian(d, alpha);
        s.terms.push(OperatorTerm::Directional { direction: Direction::z(d), alpha });
        s
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        for (i, t) in self.terms.iter().enumerate() {
            let alpha = t.alpha();
            if !(alpha.is_finite() && alpha > 0.0) {
                return Err(Error::InvalidSpec(format!("terms[{i}].alpha must be a positive number (got {alpha})")));
            }
            if let OperatorTerm::Directional { direction, .. } = t {
                if direction.a.len() != d || direction.b.len() != d {
                    return Err(Error::InvalidSpec(format!(
                        "terms[{i}].V needs {d} a- and b-coordinates (got {} and {})",
                        direction.a.len(),
                        direction.b.len()
                    )));
                }
                if direction.is_zero() {
                    return Err(Error::InvalidSpec(format!("terms[{i}].V must be nonzero")));
                }
            }
        }
        Ok(())
    }

    /// Parses the JSON form: `{"terms": [...]}` or one of the shorthands
    /// `{"sublaplacian": {...}}`, `{"laplacian": {...}}`, `{"full_vt": {...}}`.
    pub fn from_json(s: &str, p: Prime, d: usize) -> Result<Self> {
        let v: Value = serde_json::from_str(s).map_err(|e| Error::InvalidSpec(format!("spec: {e}")))?;
        Self::from_value(&v, p, d)
    }

    pub fn from_value(v: &Value, p: Prime, d: usize) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::InvalidSpec("spec must be a JSON object".into()))?;
        let spec = if obj.contains_key("terms") {
            serde_json::from_value::<OperatorSpec>(v.clone())
                .map_err(|e| Error::InvalidSpec(format!("terms: {e}")))?
        } else if obj.len() == 1 {
            let (name, params) = obj.iter().next().expect("one entry");
            let params = params
                .as_object()
                .ok_or_else(|| Error::InvalidSpec(format!("{name}: parameters must be an object")))?;
            let num = |key: &str, default: Option<f64>| -> Result<f64> {
                match params.get(key) {
                    Some(x) => x.as_f64().ok_or_else(|| Error::InvalidSpec(format!("{name}.{key} must be a number"))),
                    None => default.ok_or_else(|| Error::InvalidSpec(format!("{name}.{key} is required"))),
                }
            };
            let vecs = |key: &str, default: Vec<Vec<i64>>| -> Result<Vec<Vec<i64>>> {
                match params.get(key) {
                    Some(x) => serde_json::from_value(x.clone())
                        .map_err(|e| Error::InvalidSpec(format!("{name}.{key}: {e}"))),
                    None => Ok(default),
                }
            };
            let identity = |d: usize| (0..d).map(|k| (0..d).map(|j| i64::from(j == k)).collect()).collect::<Vec<_>>();
            for key in params.keys() {
                if !["alpha", "beta", "gamma", "V", "W"].contains(&key.as_str()) {
                    return Err(Error::InvalidSpec(format!("{name}.{key} is not a recognized parameter")));
                }
            }
            match name.as_str() {
                "sublaplacian" | "laplacian" => {
                    let alpha = num("alpha", Some(1.0))?;
                    let beta = num("beta", Some(alpha))?;
                    let vs = vecs("V", identity(d))?;
                    let ws = vecs("W", identity(d))?;
                    if name == "sublaplacian" {
                        if params.contains_key("gamma") {
                            return Err(Error::InvalidSpec("sublaplacian.gamma is not allowed".into()));
                        }
                        Self::sublaplacian(p, &vs, &ws, &vec![alpha; d], &vec![beta; d])?
                    } else {
                        let gamma = num("gamma", Some(alpha))?;
                        Self::laplacian(p, &vs, &ws, &vec![alpha; d], &vec![beta; d], gamma)?
                    }
                }
                "full_vt" | "vt" => Self::full_vt(num("alpha", Some(1.0))?),
                other => return Err(Error::InvalidSpec(format!("unknown operator shorthand {other:?}"))),
            }
        } else {
            return Err(Error::InvalidSpec("spec needs a \"terms\" array or a single shorthand key".into()));
        };
        spec.validate(d)?;
        Ok(spec)
    }

    /// Parses the compact form `name:key=value,key=value`, e.g.
    /// `sublaplacian:alpha=1`.
    pub fn from_compact(s: &str, p: Prime, d: usize) -> Result<Self> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut params = serde_json::Map::new();
        for kv in rest.split(',').filter(|x| !x.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidSpec(format!("{name}: expected key=value, got {kv:?}")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidSpec(format!("{name}.{}: not a number: {v:?}", k.trim())))?;
            params.insert(k.trim().to_string(), Value::from(v));
        }
        let mut obj = serde_json::Map::new();
        obj.insert(name.trim().to_string(), Value::Object(params));
        Self::from_value(&Value::Object(obj), p, d)
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("spec serializes")
    }
}

/// Rank of integer vectors modulo a prime.
pub fn rank_mod_p(vs: &[Vec<i64>], p: u64) -> usize {
    let p = p as i128;
    let mut rows: Vec<Vec<i128>> = vs.iter().map(|v| v.iter().map(|x| (*x as i128).rem_euclid(p)).collect()).collect();
    let cols = rows.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..rows.len()).find(|&r| rows[r][c] != 0) else { continue };
        rows.swap(rank, piv);
        let inv = mod_inverse(rows[rank][c], p);
        for r in 0..rows.len() {
            if r != rank && rows[r][c] != 0 {
                let f = rows[r][c] * inv % p;
                for k in 0..cols {
                    rows[r][k] = (rows[r][k] - f * rows[rank][k]).rem_euclid(p);
                }
            }
        }
        rank += 1;
    }
    rank
}

fn mod_inverse(a: i128, p: i128) -> i128 {
    // Fermat
    let mut r = 1i128;
    let mut b = a.rem_euclid(p);
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    r
}

/// `(c_front, c_sub)` for exponent `α` and integration dimension `dim`:
/// `c_front = (1 − p^α)/(1 − p^{−(α+dim)})`,
/// `c_sub = (1 − p^{−dim})/(1 − p^{−(α+dim)})`.
pub fn vt_constants(p: u64, alpha: f64, dim: usize) -> (f64, f64) {
    let p = p as f64;
    let den = 1.0 - p.powf(-(alpha + dim as f64));
    ((1.0 - p.powf(alpha)) / den, (1.0 - p.powi(-(dim as i32))) / den)
}

/// Exact constants for integer exponents.
pub fn vt_constants_exact(p: u64, alpha: u32, dim: u32) -> (BigRational, BigRational) {
    let one = BigRational::one();
    let pr = BigRational::from_integer(BigInt::from(p));
    let pow = |e: i64| -> BigRational {
        if e >= 0 {
            num_traits::pow(pr.clone(), e as usize)
        } else {
            num_traits::pow(pr.clone(), (-e) as usize).recip()
        }
    };
    let den = &one - pow(-((alpha + dim) as i64));
    ((&one - pow(alpha as i64)) / &den, (&one - pow(-(dim as i64))) / &den)
}

/// `s_α(w)`: `0` for the trivial class, `|w|^α − c_sub(α, 1)` otherwise.
pub fn scalar_symbol(w: &DualScalar, alpha: f64) -> f64 {
    if w.is_trivial() {
        0.0
    } else {
        w.norm_f64().powf(alpha) - vt_constants(w.prime().get(), alpha, 1).1
    }
}

/// Weights of the directional quadrature at level `n`: `t ∈ Z/p^n`, `t ≠ 0`,
/// gets `p^{−n}·|t|^{−(α+1)} = p^{−n + v(t)(α+1)}`.
#[derive(Debug, Clone)]
pub struct QuadratureTable {
    pub p: u64,
    pub level: u32,
    pub alpha: f64,
    /// `v(t)` for each `t` (`valuations[0]` is unused).
    pub valuations: Vec<u32>,
    pub weights: Vec<f64>,
}

impl QuadratureTable {
    pub fn new(p: Prime, level: u32, alpha: f64) -> Result<Self> {
        let q = p.pow(level)?;
        let mut valuations = vec![level; q as usize];
        let mut weights = vec![0.0; q as usize];
        let pf = p.get() as f64;
        for t in 1..q {
            let v = p.valuation_u64(t);
            valuations[t as usize] = v;
            weights[t as usize] = pf.powf(-(level as f64) + v as f64 * (alpha + 1.0));
        }
        Ok(QuadratureTable { p: p.get(), level, alpha, valuations, weights })
    }

    /// Exact weight for integer `α`.
    pub fn weight_exact(&self, t: u64, alpha: u32) -> BigRational {
        if t % self.weights.len() as u64 == 0 {
            return BigRational::zero();
        }
        let v = self.valuations[t as usize] as i64;
        let e = -(self.level as i64) + v * (alpha as i64 + 1);
        let pr = BigRational::from_integer(BigInt::from(self.p));
        if e >= 0 {
            num_traits::pow(pr, e as usize)
        } else {
            num_traits::pow(pr, (-e) as usize).recip()
        }
    }
}

/// An operator specification compiled to a weighted neighbor set at a fixed
/// level.
#[derive(Debug, Clone)]
pub struct CompiledOperator {
    ctx: Heisenberg,
    neighbors: Vec<(GroupElement, f64)>,
    diag: f64,
}

impl CompiledOperator {
    pub fn new(spec: &OperatorSpec, ctx: &Heisenberg) -> Result<Self> {
        spec.validate(ctx.d())?;
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        let dim = ctx.dim();
        for term in &spec.terms {
            match term {
                OperatorTerm::Directional { direction, alpha } => {
                    let v = ctx.lie_vector(&direction.a, &direction.b, direction.c)?;
                    let (c_front, _) = vt_constants(ctx.p(), *alpha, 1);
                    let table = QuadratureTable::new(ctx.prime(), ctx.level(), *alpha)?;
                    for t in 1..ctx.modulus() {
                        // exp(tV)⁻¹ = exp(−tV); the weight is even in t
                        let h = ctx.one_parameter(&v, ctx.modulus() - t);
                        *acc.entry(ctx.index_of(&h)).or_default() += c_front * table.weights[t as usize];
                    }
                }
                OperatorTerm::FullVt { alpha } => {
                    let (c_front, _) = vt_constants(ctx.p(), *alpha, dim);
                    let n = ctx.level() as f64;
                    let pf = ctx.p() as f64;
                    let total = ctx.num_points()?;
                    for idx in 1..total {
                        let h = ctx.element_at(idx);
                        let j = ctx.group_norm(&h).exponent as f64;
                        let w = pf.powf(-n * dim as f64 + j * (alpha + dim as f64));
                        // h ↦ h⁻¹ preserves the norm, so sum over h directly
                        *acc.entry(idx).or_default() += c_front * w;
                    }
                }
            }
        }
        acc.remove(&0);
        let neighbors: Vec<_> = acc.into_iter().map(|(i, w)| (ctx.element_at(i), w)).collect();
        let diag = neighbors.iter().map(|(_, w)| w).sum();
        Ok(CompiledOperator { ctx: *ctx, neighbors, diag })
    }

    pub fn ctx(&self) -> &Heisenberg {
        &self.ctx
    }

    /// `(h, w_h)` with `Tf(g) = Σ w_h (f(g⋆h) − f(g))`.
    pub fn neighbors(&self) -> &[(GroupElement, f64)] {
        &self.neighbors
    }

    pub fn diagonal(&self) -> f64 {
        self.diag
    }

    /// `Tf` at a single point, given any evaluator of `f`.
    #[inline]
    pub fn apply_at(&self, g: &GroupElement, f: impl Fn(&GroupElement) -> Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (h, w) in &self.neighbors {
            acc += f(&self.ctx.mul_unchecked(g, h)) * *w;
        }
        acc - f(g) * self.diag
    }

    pub fn apply(&self, f: &LevelFunction) -> Result<LevelFunction> {
        if f.ctx() != &self.ctx {
            return Err(Error::LevelMismatch { left: self.ctx.level(), right: f.ctx().level() });
        }
        let data: Vec<Complex64> = (0..f.data().len())
            .into_par_iter()
            .map(|i| {
                let g = self.ctx.element_at(i);
                self.apply_at(&g, |h| f.at(h))
            })
            .collect();
        LevelFunction::new(self.ctx, data)
    }

    /// The operator in the delta basis: `T_{g, g⋆h} = w_h`,
    /// `T_{g,g} = −Σ w_h`.
    pub fn dense_matrix(&self, budget: usize) -> Result<DMatrix<f64>> {
        let n = self.ctx.num_points()?;
        if n > budget {
            return Err(Error::BudgetExceeded { dim: n as u64, budget: budget as u64 });
        }
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            let g = self.ctx.element_at(i);
            m[(i, i)] -= self.diag;
            for (h, w) in &self.neighbors {
                m[(i, self.ctx.index_of(&self.ctx.mul_unchecked(&g, h)))] += *w;
            }
        }
        Ok(m)
    }

    /// `σ(π) = Σ_h w_h (π(h) − I) = (T π)(e)`; the compiled level must be at
    /// least the label's norm exponent.
    pub fn symbol(&self, label: &RepLabel) -> Result<DMatrix<Complex64>> {
        let ev = RepEvaluator::new(label, &self.ctx)?;
        let n = ev.dim();
        let mut s = DMatrix::<Complex64>::identity(n, n) * Complex64::new(-self.diag, 0.0);
        for (h, w) in &self.neighbors {
            for c in 0..n {
                let (r, v) = ev.column_entry(c, h);
                s[(r, c)] += v * *w;
            }
        }
        Ok(s)
    }
}

/// `spec` applied to a level function by exact quadrature at its own level.
pub fn apply_operator(spec: &OperatorSpec, f: &LevelFunction) -> Result<LevelFunction> {
    CompiledOperator::new(spec, f.ctx())?.apply(f)
}

/// The symbol of `spec` at `label`, computed at the label's own level.
pub fn operator_symbol(spec: &OperatorSpec, ctx: &Heisenberg, label: &RepLabel) -> Result<DMatrix<Complex64>> {
    let level = ctx.at_level(label.norm_exp())?;
    CompiledOperator::new(spec, &level)?.symbol(label)
}

/// `⟨π⟩`: the `𝔻¹` eigenvalue on `π`, i.e. `‖(ξ, η, λ)‖` for nontrivial
/// labels and `c_sub(1, 2d+1)` on the trivial one.
pub fn rep_weight(label: &RepLabel) -> f64 {
    if label.is_trivial() {
        vt_constants(label.prime().get(), 1.0, 2 * label.d() + 1).1
    } else {
        label.norm()
    }
}

/// The same jump integral as `∂_{Y_i}^α`, written as a flow on `Z_p^{2d+1}`
/// along the non-invariant field `e_{d+i} + x_i e_{2d+1}`:
/// `c_front · Σ_t w(t) (f(x, y + t e_i, z + t x_i) − f(x, y, z))`.
pub fn apply_noninvariant_vt(axis: usize, alpha: f64, f: &LevelFunction) -> Result<LevelFunction> {
    let ctx = *f.ctx();
    if axis >= ctx.d() {
        return Err(Error::OutOfRange(format!("axis {axis} out of range for d = {}", ctx.d())));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidSpec(format!("alpha must be a positive number (got {alpha})")));
    }
    let (c_front, _) = vt_constants(ctx.p(), alpha, 1);
    let table = QuadratureTable::new(ctx.prime(), ctx.level(), alpha)?;
    let q = ctx.modulus();
    let data = (0..f.data().len())
        .into_par_iter()
        .map(|i| {
            let g = ctx.element_at(i);
            let base = f.at(&g);
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 1..q {
                // plain coordinate arithmetic, no group law
                let mut moved = g;
                moved.y[axis] = (g.y[axis] + t) % q;
                moved.z = ((g.z as u128 + t as u128 * g.x[axis] as u128) % q as u128) as u64;
                acc += (f.at(&moved) - base) * table.weights[t as usize];
            }
            acc * c_front
        })
        .collect();
    LevelFunction::new(ctx, data)
}
