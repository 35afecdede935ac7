//! The invariant suite behind `heisenvt verify`.
//!
//! Every check compares a closed form or structural identity against an
//! independent finite computation. Small quotients are swept exhaustively;
//! beyond `full_limit` points the check runs on a seeded random sample, so
//! reports stay reproducible.

use nalgebra::DMatrix;
use num_bigint::BigUint;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dual::{dual_ball, enumerate_dual, rep_matrix, verify_peter_weyl, RepEvaluator, RepLabel};
use crate::error::Result;
use crate::fourier::{forward_transform, inverse_transform};
use crate::group::{GroupElement, Heisenberg, LevelFunction};
use crate::operators::{apply_noninvariant_vt, vt_constants, CompiledOperator, Direction, OperatorSpec};
use crate::spectral::{
    block_invariance_residual, closed_form_spectrum, compare_spectra, h_primes, oracle_spectrum, Mode, DENSE_BUDGET,
    MATCH_TOL, VERSION,
};

/// Tolerances, pinned to the acceptance thresholds.
#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub rep_laws: f64,
    pub schur: f64,
    pub fourier: f64,
    pub vt_eigen: f64,
    pub spectrum: f64,
    pub trace_rel: f64,
    pub structural: f64,
    pub equivalence: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rep_laws: 1e-12,
            schur: 1e-12,
            fourier: 1e-10,
            vt_eigen: 1e-10,
            spectrum: MATCH_TOL,
            trace_rel: 1e-8,
            structural: 1e-12,
            equivalence: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SamplingPlan {
    /// Quotients with at most this many points are swept exhaustively.
    pub full_limit: usize,
    /// Sample size for sampled sweeps.
    pub samples: usize,
    /// Random functions for the Fourier and equivalence checks.
    pub functions: usize,
    pub seed: u64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan { full_limit: 729, samples: 200, functions: 20, seed: 20240601 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyConfig {
    /// `(p, d, n)` triples.
    pub configs: Vec<(u64, usize, u32)>,
    #[serde(serialize_with = "ser_spec")]
    pub spec: Option<OperatorSpec>,
    pub plan: SamplingPlan,
    pub tol: Tolerances,
    pub dense_budget: usize,
}

fn ser_spec<S: serde::Serializer>(s: &Option<OperatorSpec>, ser: S) -> std::result::Result<S::Ok, S::Error> {
    match s {
        Some(spec) => spec.to_json().serialize(ser),
        None => ser.serialize_none(),
    }
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            configs: vec![(3, 1, 1), (3, 1, 2), (5, 1, 1), (5, 1, 2)],
            spec: None,
            plan: SamplingPlan::default(),
            tol: Tolerances::default(),
            dense_budget: DENSE_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub p: u64,
    pub d: usize,
    pub n: u32,
    pub passed: bool,
    /// `None` for exact or skipped checks.
    pub error: Option<f64>,
    pub tol: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub version: String,
    pub config: VerifyConfig,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

fn cmax(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

struct Ctx<'a> {
    g: Heisenberg,
    cfg: &'a VerifyConfig,
    rng: ChaCha8Rng,
    out: Vec<CheckResult>,
}

impl Ctx<'_> {
    fn record(&mut self, name: &str, error: Option<f64>, tol: Option<f64>, passed: bool, detail: String) {
        self.out.push(CheckResult {
            name: name.to_string(),
            p: self.g.p(),
            d: self.g.d(),
            n: self.g.level(),
            passed,
            error,
            tol,
            detail,
        });
    }

    fn measured(&mut self, name: &str, error: f64, tol: f64, detail: String) {
        self.record(name, Some(error), Some(tol), error <= tol, detail);
    }

    fn points(&mut self, g: &Heisenberg) -> Vec<GroupElement> {
        let total = g.num_points().expect("bounded by construction");
        if total <= self.cfg.plan.full_limit {
            (0..total).map(|i| g.element_at(i)).collect()
        } else {
            (0..self.cfg.plan.samples).map(|_| g.element_at(self.rng.gen_range(0..total))).collect()
        }
    }

    fn random_function(&mut self, g: Heisenberg) -> LevelFunction {
        let rng = &mut self.rng;
        LevelFunction::from_fn(g, |_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).unwrap()
    }

    fn function_count(&self) -> usize {
        if self.g.num_points().unwrap() <= self.cfg.plan.full_limit {
            self.cfg.plan.functions
        } else {
            self.cfg.plan.functions.min(4)
        }
    }
}

/// Runs every check on every configured quotient.
pub fn run_suite(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    for &(p, d, n) in &cfg.configs {
        let g = Heisenberg::new(p, d, n)?;
        let mut ctx = Ctx { g, cfg, rng: ChaCha8Rng::seed_from_u64(cfg.plan.seed ^ (p << 40) ^ ((d as u64) << 32) ^ n as u64), out: Vec::new() };
        check_peter_weyl(&mut ctx);
        check_rep_laws(&mut ctx)?;
        check_schur(&mut ctx)?;
        check_fourier(&mut ctx)?;
        check_vt_eigen(&mut ctx)?;
        check_spectra(&mut ctx)?;
        check_equivalence(&mut ctx)?;
        checks.extend(ctx.out);
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport { version: VERSION.to_string(), config: cfg.clone(), checks, passed })
}

fn check_peter_weyl(ctx: &mut Ctx) {
    let (sum, order) = verify_peter_weyl(&ctx.g);
    let blocks: BigUint = dual_ball(&ctx.g)
        .map(|l| BigUint::from(h_primes(l.prime(), l.m(), l.d()).len() * l.dim()))
        .sum();
    ctx.record("peter_weyl", None, None, sum == order, format!("sum d^2 = {sum}, |G/G_n| = {order}"));
    ctx.record("completeness", None, None, blocks == order, format!("sum of block dimensions = {blocks}"));
}

fn check_rep_laws(ctx: &mut Ctx) -> Result<()> {
    let g = ctx.g;
    let labels = enumerate_dual(&g);
    let total = g.num_points()?;
    // exhaustive over pairs when small, random triples otherwise
    let triples: Vec<(usize, usize, usize)> = if total * total * labels.len() <= 50 * ctx.cfg.plan.full_limit * ctx.cfg.plan.full_limit {
        (0..labels.len()).flat_map(|l| (0..total).flat_map(move |a| (0..total).map(move |b| (l, a, b)))).collect()
    } else {
        (0..ctx.cfg.plan.samples * 10)
            .map(|_| (ctx.rng.gen_range(0..labels.len()), ctx.rng.gen_range(0..total), ctx.rng.gen_range(0..total)))
            .collect()
    };
    let evs = labels.iter().map(|l| RepEvaluator::new(l, &g)).collect::<Result<Vec<_>>>()?;
    let err = triples
        .par_iter()
        .map(|&(l, a, b)| {
            let (ga, gb) = (g.element_at(a), g.element_at(b));
            let ma = evs[l].monomial(&ga).to_dense();
            let mb = evs[l].monomial(&gb).to_dense();
            let mab = evs[l].monomial(&g.mul_unchecked(&ga, &gb)).to_dense();
            let k = ma.nrows();
            let hom = cmax(&(&ma * &mb - mab));
            let uni = cmax(&(ma.adjoint() * &ma - DMatrix::identity(k, k)));
            hom.max(uni)
        })
        .reduce(|| 0.0, f64::max);
    let tol = ctx.cfg.tol.rep_laws;
    ctx.measured("rep_laws", err, tol, format!("{} (label, g, h) triples", triples.len()));
    // cross-check the evaluator against the dense realization
    let ga = g.element_at(total - 1);
    let e = labels
        .iter()
        .take(ctx.cfg.plan.samples)
        .map(|l| cmax(&(rep_matrix(&g, l, &ga).unwrap() - RepEvaluator::new(l, &g).unwrap().monomial(&ga).to_dense())))
        .fold(0.0, f64::max);
    ctx.measured("rep_matrix_consistency", e, tol, "dense vs monomial realization".into());
    Ok(())
}

fn check_schur(ctx: &mut Ctx) -> Result<()> {
    let g = ctx.g;
    let total = g.num_points()?;
    let mut coeffs: Vec<(RepLabel, usize, usize)> = Vec::new();
    for l in dual_ball(&g) {
        for r in 0..l.dim() {
            for c in 0..l.dim() {
                coeffs.push((l.clone(), r, c));
            }
        }
    }
    let all = coeffs.len();
    if all > ctx.cfg.plan.full_limit {
        coeffs.shuffle(&mut ctx.rng);
        coeffs.truncate(ctx.cfg.plan.samples);
        coeffs.sort();
    }
    let funcs: Vec<Vec<Complex64>> = coeffs
        .par_iter()
        .map(|(l, r, c)| {
            let ev = RepEvaluator::new(l, &g).unwrap();
            let s = (l.dim() as f64).sqrt();
            (0..total).map(|i| ev.coefficient(*r, *c, &g.element_at(i)) * s).collect()
        })
        .collect();
    let k = funcs.len();
    let err = (0..k)
        .into_par_iter()
        .map(|i| {
            let mut worst: f64 = 0.0;
            for j in i..k {
                let ip: Complex64 =
                    funcs[i].iter().zip(&funcs[j]).map(|(a, b)| a * b.conj()).sum::<Complex64>() / total as f64;
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((ip - want).norm());
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    ctx.measured("schur_orthonormality", err, ctx.cfg.tol.schur, format!("Gram matrix of {k} of {all} scaled coefficients"));
    Ok(())
}

fn check_fourier(ctx: &mut Ctx) -> Result<()> {
    let count = ctx.function_count();
    let mut round: f64 = 0.0;
    let mut planch: f64 = 0.0;
    for _ in 0..count {
        let f = ctx.random_function(ctx.g);
        let c = forward_transform(&f)?;
        let back = inverse_transform(&c)?;
        round = round.max(back.max_abs_diff(&f)?);
        let lhs = f.l2_norm().powi(2);
        planch = planch.max((c.plancherel_sum() - lhs).abs() / lhs.max(1.0));
    }
    let tol = ctx.cfg.tol.fourier;
    ctx.measured("fourier_inversion", round, tol, format!("{count} random functions"));
    ctx.measured("plancherel", planch, tol, format!("{count} random functions"));
    Ok(())
}

/// `𝔻¹ M_{rc} = μ M_{rc}` pointwise, with `μ = ‖π‖ − c_sub(1, 2d+1)` for
/// nontrivial labels.
fn check_vt_eigen(ctx: &mut Ctx) -> Result<()> {
    let g = ctx.g;
    let op = CompiledOperator::new(&OperatorSpec::full_vt(1.0), &g)?;
    let c_sub = vt_constants(g.p(), 1.0, g.dim()).1;
    let points = ctx.points(&g);
    let mut coeffs: Vec<(RepLabel, usize, usize)> = Vec::new();
    for l in dual_ball(&g) {
        for r in 0..l.dim() {
            for c in 0..l.dim() {
                coeffs.push((l.clone(), r, c));
            }
        }
    }
    let all = coeffs.len();
    if all > ctx.cfg.plan.full_limit {
        coeffs.shuffle(&mut ctx.rng);
        coeffs.truncate(ctx.cfg.plan.samples / 10);
    }
    let err = coeffs
        .par_iter()
        .map(|(l, r, c)| {
            let ev = RepEvaluator::new(l, &g).unwrap();
            let mu = if l.is_trivial() { 0.0 } else { l.norm() - c_sub };
            points
                .iter()
                .map(|x| {
                    let t = op.apply_at(x, |h| ev.coefficient(*r, *c, h));
                    (t - ev.coefficient(*r, *c, x) * mu).norm()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    ctx.measured(
        "vt_eigenvalue",
        err,
        ctx.cfg.tol.vt_eigen,
        format!("{} of {all} coefficients at {} points", coeffs.len(), points.len()),
    );
    Ok(())
}

fn check_spectra(ctx: &mut Ctx) -> Result<()> {
    let g = ctx.g;
    let tol = ctx.cfg.tol.clone();
    let spec = ctx.cfg.spec.clone().unwrap_or_else(|| OperatorSpec::canonical_sublaplacian(g.d(), 1.0));
    let closed = closed_form_spectrum(&spec, &g)?;
    let oracle = oracle_spectrum(&spec, &g, Mode::Block, usize::MAX)?;
    let cmp = compare_spectra(&spec, &closed, &oracle, tol.spectrum)?;
    ctx.record(
        "closed_form_generic",
        None,
        Some(tol.spectrum),
        cmp.passed(),
        format!(
            "{} generic blocks, {} mismatches; {} degenerate blocks, {} differ from the printed values",
            cmp.generic_blocks, cmp.generic_mismatches, cmp.degenerate_blocks, cmp.degenerate_mismatches
        ),
    );
    let imag = oracle
        .blocks
        .iter()
        .filter_map(|b| b.matrix.as_ref())
        .map(|m| cmax(&(m - m.adjoint())))
        .fold(0.0, f64::max);
    ctx.measured("block_hermitian", imag, tol.structural, "max |B − B*| over blocks".into());

    let total = g.num_points()?;
    if total <= ctx.cfg.dense_budget {
        let op = CompiledOperator::new(&spec, &g)?;
        let dense = oracle_spectrum(&spec, &g, Mode::Dense, ctx.cfg.dense_budget)?;
        let mut b = oracle.values.clone();
        b.sort_by(f64::total_cmp);
        let err = dense
            .values
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).abs() / x.abs().max(1.0))
            .fold(if dense.values.len() == b.len() { 0.0 } else { f64::INFINITY }, f64::max);
        ctx.measured("dense_vs_block", err, tol.spectrum, format!("{total} eigenvalues"));
        let trace = -(total as f64) * op.diagonal();
        let sum: f64 = dense.values.iter().sum();
        ctx.measured("trace", (sum - trace).abs() / trace.abs().max(1.0), tol.trace_rel, format!("trace {trace}"));
        let m = op.dense_matrix(ctx.cfg.dense_budget)?;
        let sym = (&m - m.transpose()).amax();
        ctx.measured("dense_symmetric", sym, tol.structural, "max |T − Tᵀ|".into());
        let shifts = ctx.points(&g).into_iter().take(8).collect::<Vec<_>>();
        let inv = shifts
            .par_iter()
            .map(|a| {
                let mut worst: f64 = 0.0;
                for i in 0..total {
                    let ai = g.index_of(&g.mul_unchecked(a, &g.element_at(i)));
                    for j in 0..total {
                        let aj = g.index_of(&g.mul_unchecked(a, &g.element_at(j)));
                        worst = worst.max((m[(i, j)] - m[(ai, aj)]).abs());
                    }
                }
                worst
            })
            .reduce(|| 0.0, f64::max);
        ctx.measured("left_invariance", inv, tol.structural, format!("T[g,g'] = T[ag,ag'] for {} shifts", shifts.len()));
    } else {
        let op = CompiledOperator::new(&spec, &g)?;
        let f = ctx.random_function(g);
        let tf = op.apply(&f)?;
        let shifts = ctx.points(&g).into_iter().take(4).collect::<Vec<_>>();
        let mut inv: f64 = 0.0;
        for a in &shifts {
            let lhs = op.apply(&f.left_translate(a)?)?;
            inv = inv.max(lhs.max_abs_diff(&tf.left_translate(a)?)?);
        }
        ctx.measured("left_invariance", inv, tol.structural, format!("T L_a = L_a T on a random function, {} shifts", shifts.len()));
        ctx.record("dense_vs_block", None, None, true, format!("skipped: {total} points exceed the dense budget"));
    }

    // block invariance at the full level, sampled
    let op = CompiledOperator::new(&spec, &g)?;
    let mut keys: Vec<(RepLabel, Vec<u64>)> = dual_ball(&g)
        .filter(|l| !l.lambda().is_trivial())
        .flat_map(|l| h_primes(l.prime(), l.m(), l.d()).into_iter().map(move |h| (l.clone(), h)))
        .collect();
    let all = keys.len();
    let cap = if total <= ctx.cfg.plan.full_limit { 64 } else { 6 };
    if all > cap {
        keys.shuffle(&mut ctx.rng);
        keys.truncate(cap);
    }
    let res = keys
        .par_iter()
        .map(|(l, h)| block_invariance_residual(&op, l, h))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    // rounding in T e_τ scales with ‖T‖ ≤ 2·Σ w_h
    let scale = (2.0 * op.diagonal().abs()).max(1.0);
    ctx.measured(
        "block_invariance",
        res / scale,
        tol.structural,
        format!("{} of {all} blocks, residual {res:e} relative to the bound {scale} on ‖T‖", keys.len()),
    );
    Ok(())
}

/// `∂_{Y_i}¹` as a left-invariant group operator against the same jump
/// integral along the non-invariant coordinate field.
fn check_equivalence(ctx: &mut Ctx) -> Result<()> {
    let g = ctx.g;
    let count = ctx.function_count().min(10);
    let mut err: f64 = 0.0;
    for _ in 0..count {
        let f = ctx.random_function(g);
        for i in 0..g.d() {
            let op = CompiledOperator::new(&OperatorSpec::directional(Direction::y(g.d(), i), 1.0), &g)?;
            err = err.max(op.apply(&f)?.max_abs_diff(&apply_noninvariant_vt(i, 1.0, &f)?)?);
        }
    }
    ctx.measured("noninvariant_equivalence", err, ctx.cfg.tol.equivalence, format!("{count} random functions"));
    Ok(())
}
