//! Group Fourier transform on level-`n` functions.
//!
//! `f̂(π) = ∫ f(g) π(g)* dg` and `f(g) = Σ_{π ∈ B(n)} d_π Tr[π(g) f̂(π)]`.
//! Both are finite sums over the quotient, so they are exact up to the final
//! floating-point accumulation.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::dual::{enumerate_dual, RepEvaluator, RepLabel};
use crate::error::{Error, Result};
use crate::group::{Heisenberg, LevelFunction};
use crate::operators::rep_weight;
use crate::padic::{DualScalar, PhaseTable};

/// `f̂` on the dual ball `B(n)`, in enumeration order.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoefficients {
    ctx: Heisenberg,
    labels: Vec<RepLabel>,
    matrices: Vec<DMatrix<Complex64>>,
}

impl FourierCoefficients {
    pub fn new(ctx: Heisenberg, labels: Vec<RepLabel>, matrices: Vec<DMatrix<Complex64>>) -> Result<Self> {
        let expected = enumerate_dual(&ctx);
        if labels != expected {
            return Err(Error::Format(format!(
                "coefficient labels must be exactly the {} labels of the level-{} dual ball",
                expected.len(),
                ctx.level()
            )));
        }
        for (l, m) in labels.iter().zip(&matrices) {
            if m.nrows() != l.dim() || m.ncols() != l.dim() {
                return Err(Error::Format(format!("coefficient of {l} must be {0}x{0}", l.dim())));
            }
        }
        if matrices.len() != labels.len() {
            return Err(Error::Format("one matrix per label is required".into()));
        }
        Ok(FourierCoefficients { ctx, labels, matrices })
    }

    /// All-zero coefficients on `B(n)`.
    pub fn zeros(ctx: Heisenberg) -> Self {
        let labels = enumerate_dual(&ctx);
        let matrices = labels.iter().map(|l| DMatrix::zeros(l.dim(), l.dim())).collect();
        FourierCoefficients { ctx, labels, matrices }
    }

    pub fn ctx(&self) -> &Heisenberg {
        &self.ctx
    }
    pub fn labels(&self) -> &[RepLabel] {
        &self.labels
    }
    pub fn matrices(&self) -> &[DMatrix<Complex64>] {
        &self.matrices
    }
    pub fn matrices_mut(&mut self) -> &mut [DMatrix<Complex64>] {
        &mut self.matrices
    }

    pub fn get(&self, label: &RepLabel) -> Option<&DMatrix<Complex64>> {
        self.labels.binary_search(label).ok().map(|i| &self.matrices[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&RepLabel, &DMatrix<Complex64>)> {
        self.labels.iter().zip(&self.matrices)
    }

    /// `Σ d_π ‖f̂(π)‖²_HS`.
    pub fn plancherel_sum(&self) -> f64 {
        self.iter().map(|(l, m)| l.dim() as f64 * m.norm_squared()).sum()
    }
}

/// `f̂(π)_{c,r} = ∫ f(g) · conj(M_{rc}(g)) dg` for every `π ∈ B(n)`.
pub fn forward_transform(f: &LevelFunction) -> Result<FourierCoefficients> {
    let ctx = *f.ctx();
    let labels = enumerate_dual(&ctx);
    let total = f.data().len() as f64;
    let matrices = labels
        .par_iter()
        .map(|l| {
            let ev = RepEvaluator::new(l, &ctx)?;
            Ok(coefficient_of(&ev, f, total))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FourierCoefficients { ctx, labels, matrices })
}

/// `f̂(π)` for one label.
pub fn transform_at(f: &LevelFunction, label: &RepLabel) -> Result<DMatrix<Complex64>> {
    let ev = RepEvaluator::new(label, f.ctx())?;
    Ok(coefficient_of(&ev, f, f.data().len() as f64))
}

fn coefficient_of(ev: &RepEvaluator, f: &LevelFunction, total: f64) -> DMatrix<Complex64> {
    let ctx = f.ctx();
    let n = ev.dim();
    let mut out = DMatrix::<Complex64>::zeros(n, n);
    for (i, v) in f.data().iter().enumerate() {
        if *v == Complex64::new(0.0, 0.0) {
            continue;
        }
        let g = ctx.element_at(i);
        for c in 0..n {
            let (r, m) = ev.column_entry(c, &g);
            out[(c, r)] += v * m.conj();
        }
    }
    out / Complex64::new(total, 0.0)
}

/// `f(g) = Σ d_π Tr[π(g) F(π)]`.
pub fn inverse_transform(coeffs: &FourierCoefficients) -> Result<LevelFunction> {
    let ctx = *coeffs.ctx();
    let evs = coeffs.labels.iter().map(|l| RepEvaluator::new(l, &ctx)).collect::<Result<Vec<_>>>()?;
    let n = ctx.num_points()?;
    let data = (0..n)
        .into_par_iter()
        .map(|i| {
            let g = ctx.element_at(i);
            let mut acc = Complex64::new(0.0, 0.0);
            for (ev, m) in evs.iter().zip(&coeffs.matrices) {
                let mut tr = Complex64::new(0.0, 0.0);
                for c in 0..ev.dim() {
                    let (r, v) = ev.column_entry(c, &g);
                    tr += v * m[(c, r)];
                }
                acc += tr * ev.dim() as f64;
            }
            acc
        })
        .collect();
    LevelFunction::new(ctx, data)
}

/// `(‖f‖²_{L²}, Σ d_π ‖f̂(π)‖²_HS)`, computed independently.
pub fn plancherel(f: &LevelFunction) -> Result<(f64, f64)> {
    Ok((f.l2_norm().powi(2), forward_transform(f)?.plancherel_sum()))
}

/// `(Σ d_π ⟨π⟩^{2s} ‖f̂(π)‖²_HS)^{1/2}` with the `𝔻¹` weight `⟨π⟩`.
pub fn sobolev_norm(f: &LevelFunction, s: f64) -> Result<f64> {
    Ok(sobolev_norm_of(&forward_transform(f)?, s))
}

pub fn sobolev_norm_of(coeffs: &FourierCoefficients, s: f64) -> f64 {
    coeffs
        .iter()
        .map(|(l, m)| l.dim() as f64 * rep_weight(l).powf(2.0 * s) * m.norm_squared())
        .sum::<f64>()
        .sqrt()
}

/// Commutative transform on `(Z/p^n)^{2d+1}`:
/// `F(ω) = ∫ f(u) e^{−2πi ω·u / p^n} du`, stored in the same mixed-radix
/// order as the input (`ω` numerators in place of coordinates).
pub fn commutative_transform(f: &LevelFunction) -> LevelFunction {
    let ctx = *f.ctx();
    let q = ctx.modulus() as usize;
    let phases = PhaseTable::new(ctx.modulus());
    let mut data = f.data().to_vec();
    let axes = ctx.dim();
    let mut stride = 1usize;
    let mut line = vec![Complex64::new(0.0, 0.0); q];
    // separable: one length-p^n DFT per axis
    for _ in 0..axes {
        let block = stride * q;
        for start in (0..data.len()).step_by(block) {
            for off in 0..stride {
                for (k, slot) in line.iter_mut().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for u in 0..q {
                        let ph = (q - (k * u) % q) % q;
                        acc += data[start + off + u * stride] * phases.get(ph as u64);
                    }
                    *slot = acc / q as f64;
                }
                for (k, v) in line.iter().enumerate() {
                    data[start + off + k * stride] = *v;
                }
            }
        }
        stride = block;
    }
    LevelFunction::new(ctx, data).expect("same shape")
}

/// `K(u, v) = Σ_α F(α + ξ, λv + η, λ) e^{2πi{α·(u − v)}}` over
/// `α ∈ (p^{−n}Z/Z)^d`, indexed by `u, v ∈ (Z/p^n)^d` in flat order.
pub fn fourier_kernel(f: &LevelFunction, label: &RepLabel) -> Result<DMatrix<Complex64>> {
    let ctx = *f.ctx();
    RepEvaluator::new(label, &ctx)?;
    let ft = commutative_transform(f);
    kernel_from_transform(&ctx, &ft, label)
}

fn kernel_from_transform(ctx: &Heisenberg, ft: &LevelFunction, label: &RepLabel) -> Result<DMatrix<Complex64>> {
    let d = ctx.d();
    let n = ctx.level();
    let q = ctx.modulus();
    let side = (q as usize).pow(d as u32);
    let phases = PhaseTable::new(q);
    let digits = |mut v: usize| -> Vec<u64> {
        (0..d)
            .map(|_| {
                let r = (v % q as usize) as u64;
                v /= q as usize;
                r
            })
            .collect()
    };
    let xi: Vec<u64> = label.xi().iter().map(|c| c.numer_at(n)).collect();
    let eta: Vec<u64> = label.eta().iter().map(|c| c.numer_at(n)).collect();
    let lam = label.lambda().numer_at(n);
    let mut out = DMatrix::zeros(side, side);
    for vi in 0..side {
        let v = digits(vi);
        // ω_y = λv + η and ω_z = λ are fixed by v
        let mut base = ctx.identity();
        for i in 0..d {
            base.y[i] = ((lam as u128 * v[i] as u128 + eta[i] as u128) % q as u128) as u64;
        }
        base.z = lam;
        for ui in 0..side {
            let u = digits(ui);
            let mut acc = Complex64::new(0.0, 0.0);
            for ai in 0..side {
                let a = digits(ai);
                let mut w = base;
                let mut ph: u128 = 0;
                for i in 0..d {
                    w.x[i] = (a[i] + xi[i]) % q;
                    ph += a[i] as u128 * ((u[i] + q - v[i]) % q) as u128;
                }
                acc += ft.at(&w) * phases.get((ph % q as u128) as u64);
            }
            out[(ui, vi)] = acc;
        }
    }
    Ok(out)
}

/// The operator on `𝓗_λ` induced by a kernel: entry `(r, c)` is
/// `p^{md − 2nd} Σ_{u ≡ r, v ≡ c (mod p^m)} K(u, v)`.
pub fn kernel_operator(ctx: &Heisenberg, label: &RepLabel, kernel: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let d = ctx.d();
    let q = ctx.modulus() as usize;
    let pm = ctx.prime().pow_unchecked(label.m()) as usize;
    let side = q.pow(d as u32);
    if kernel.nrows() != side || kernel.ncols() != side {
        return Err(Error::Format(format!("kernel must be {side}x{side}")));
    }
    let reduce = |mut v: usize| -> usize {
        let mut out = 0;
        let mut scale = 1;
        for _ in 0..d {
            out += (v % q) % pm * scale;
            v /= q;
            scale *= pm;
        }
        out
    };
    let dim = label.dim();
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    for v in 0..side {
        let c = reduce(v);
        for u in 0..side {
            out[(reduce(u), c)] += kernel[(u, v)];
        }
    }
    let scale = (dim as f64) / (side as f64 * side as f64);
    Ok(out * Complex64::new(scale, 0.0))
}

/// Kernel of a function depending only on `z`: the `α`-sum collapses to
/// `α = −ξ`, leaving `F(0, 0, λ)·e^{−2πi{ξ·(u−v)}}·[λv + η ∈ Z_p^d]`.
pub fn central_kernel(ctx: &Heisenberg, f_hat_center: Complex64, label: &RepLabel) -> DMatrix<Complex64> {
    let d = ctx.d();
    let q = ctx.modulus() as usize;
    let side = q.pow(d as u32);
    let coords = |mut v: usize| -> Vec<i128> {
        (0..d)
            .map(|_| {
                let r = (v % q) as i128;
                v /= q;
                r
            })
            .collect()
    };
    DMatrix::from_fn(side, side, |ui, vi| {
        let u = coords(ui);
        let v = coords(vi);
        let supported = (0..d).all(|i| label.lambda().scale_int(v[i]).add(&label.eta()[i]).unwrap().is_trivial());
        if !supported {
            return Complex64::new(0.0, 0.0);
        }
        let mut ph = DualScalar::trivial(ctx.prime());
        for i in 0..d {
            ph = ph.add(&label.xi()[i].scale_int(v[i] - u[i])).unwrap();
        }
        f_hat_center * ph.phase().character()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::rep_matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_fn(ctx: Heisenberg, rng: &mut ChaCha8Rng) -> LevelFunction {
        LevelFunction::from_fn(ctx, |_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).unwrap()
    }

    #[test]
    fn constant_function() {
        let g = Heisenberg::new(3, 1, 2).unwrap();
        let one = LevelFunction::from_fn(g, |_| Complex64::new(1.0, 0.0)).unwrap();
        let c = forward_transform(&one).unwrap();
        for (l, m) in c.iter() {
            let want = if l.is_trivial() { 1.0 } else { 0.0 };
            assert!((m[(0, 0)] - want).norm() < 1e-13 && (m.norm() - want).abs() < 1e-13, "{l}");
        }
        let mut f = FourierCoefficients::zeros(g);
        f.matrices_mut()[0][(0, 0)] = Complex64::new(2.5, -1.0);
        let back = inverse_transform(&f).unwrap();
        assert!(back.data().iter().all(|v| (v - Complex64::new(2.5, -1.0)).norm() < 1e-13));
    }

    #[test]
    fn matrix_coefficient_is_a_unit_vector() {
        let g = Heisenberg::new(3, 1, 2).unwrap();
        let labels = enumerate_dual(&g);
        let l = labels.iter().find(|l| l.dim() == 9).unwrap();
        let ev = RepEvaluator::new(l, &g).unwrap();
        let (h, hp) = (4, 7);
        let f = LevelFunction::from_fn(g, |e| ev.coefficient(h, hp, e)).unwrap();
        let c = forward_transform(&f).unwrap();
        for (k, m) in c.iter() {
            if k == l {
                let mut want = DMatrix::zeros(9, 9);
                want[(hp, h)] = Complex64::new(1.0 / 9.0, 0.0);
                assert!((m - want).norm() < 1e-13);
            } else {
                assert!(m.norm() < 1e-13);
            }
        }
    }

    #[test]
    fn round_trip_and_plancherel() {
        let g = Heisenberg::new(3, 1, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..3 {
            let f = random_fn(g, &mut rng);
            let c = forward_transform(&f).unwrap();
            let back = inverse_transform(&c).unwrap();
            assert!(back.max_abs_diff(&f).unwrap() < 1e-10);
            let (a, b) = plancherel(&f).unwrap();
            assert!((a - b).abs() < 1e-10);
            assert!((sobolev_norm_of(&c, 0.0) - f.l2_norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn left_translation_covariance() {
        let g = Heisenberg::new(3, 1, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_fn(g, &mut rng);
        let a = g.element(&[2], &[5], 7).unwrap();
        let lf = f.left_translate(&a).unwrap();
        let (c, lc) = (forward_transform(&f).unwrap(), forward_transform(&lf).unwrap());
        for ((l, m), (_, lm)) in c.iter().zip(lc.iter()) {
            let want = m * rep_matrix(&g, l, &a).unwrap().adjoint();
            assert!((lm - want).norm() < 1e-12);
        }
    }

    #[test]
    fn sobolev_of_top_coefficient() {
        let g = Heisenberg::new(3, 1, 2).unwrap();
        let l = enumerate_dual(&g).into_iter().find(|l| l.norm_exp() == 2 && l.dim() == 3).unwrap();
        let ev = RepEvaluator::new(&l, &g).unwrap();
        let f = LevelFunction::from_fn(g, |e| ev.coefficient(1, 2, e)).unwrap();
        for s in [0.5, 1.0, 2.0] {
            let r = sobolev_norm(&f, s).unwrap() / f.l2_norm();
            assert!((r - 9f64.powf(s)).abs() < 1e-10);
        }
    }

    #[test]
    fn kernel_agrees_with_transform() {
        let g = Heisenberg::new(3, 1, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = random_fn(g, &mut rng);
        let c = forward_transform(&f).unwrap();
        for (l, m) in c.iter() {
            let k = fourier_kernel(&f, l).unwrap();
            let op = kernel_operator(&g, l, &k).unwrap();
            assert!((op - m).norm() < 1e-10, "{l}");
        }
    }

    #[test]
    fn commutative_transform_of_character() {
        let g = Heisenberg::new(3, 1, 2).unwrap();
        // e(2x/9 + 5z/9) has F = 1 at ω = (2, 0, 5)
        let f = LevelFunction::from_fn(g, |e| {
            PhaseTable::new(9).get((2 * e.x(1)[0] + 5 * e.z()) % 9)
        })
        .unwrap();
        let ft = commutative_transform(&f);
        let hit = g.index_of(&g.element(&[2], &[0], 5).unwrap());
        for (i, v) in ft.data().iter().enumerate() {
            let want = if i == hit { 1.0 } else { 0.0 };
            assert!((v - want).norm() < 1e-12);
        }
    }
}
