use num_complex::Complex64;
use proptest::prelude::*;

use heisenvt::dual::{enumerate_dual, RepEvaluator};
use heisenvt::fourier::{forward_transform, inverse_transform};
use heisenvt::group::{Heisenberg, LevelFunction};
use heisenvt::linalg::hermitian_eigenvalues;
use heisenvt::operators::{apply_operator, operator_symbol, OperatorSpec};
use heisenvt::spectral::{closed_form_eigenvalue, genericity_predicate, h_primes, restrict_to_block};

fn quotient() -> impl Strategy<Value = Heisenberg> {
    prop_oneof![
        Just(Heisenberg::new(3, 1, 1).unwrap()),
        Just(Heisenberg::new(3, 1, 2).unwrap()),
        Just(Heisenberg::new(5, 1, 1).unwrap()),
        Just(Heisenberg::new(3, 2, 1).unwrap()),
    ]
}

fn function_on(g: Heisenberg) -> impl Strategy<Value = LevelFunction> {
    let n = g.num_points().unwrap();
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
        .prop_map(move |v| LevelFunction::new(g, v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()).unwrap())
}

fn spec(d: usize) -> impl Strategy<Value = OperatorSpec> {
    prop_oneof![
        (0.5f64..2.0).prop_map(move |a| OperatorSpec::canonical_sublaplacian(d, a)),
        (0.5f64..2.0).prop_map(move |a| OperatorSpec::canonical_laplacian(d, a)),
        (0.5f64..2.0).prop_map(OperatorSpec::full_vt),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn fourier_round_trip((g, f) in quotient().prop_flat_map(|g| (Just(g), function_on(g)))) {
        let c = forward_transform(&f).unwrap();
        prop_assert!(inverse_transform(&c).unwrap().max_abs_diff(&f).unwrap() <= 1e-10);
        let lhs = f.l2_norm().powi(2);
        prop_assert!((c.plancherel_sum() - lhs).abs() <= 1e-10 * lhs.max(1.0));
        prop_assert_eq!(g, *c.ctx());
    }

    #[test]
    fn operators_commute_with_left_translation(
        (f, s, a) in quotient().prop_flat_map(|g| {
            let n = g.num_points().unwrap();
            (function_on(g), spec(g.d()), 0..n)
        })
    ) {
        let g = *f.ctx();
        let a = g.element_at(a);
        let lhs = apply_operator(&s, &f.left_translate(&a).unwrap()).unwrap();
        let rhs = apply_operator(&s, &f).unwrap().left_translate(&a).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-10);
    }

    #[test]
    fn operators_are_self_adjoint(
        (f, h, s) in quotient().prop_flat_map(|g| (function_on(g), function_on(g), spec(g.d())))
    ) {
        let a = apply_operator(&s, &f).unwrap().inner(&h).unwrap();
        let b = f.inner(&apply_operator(&s, &h).unwrap()).unwrap();
        prop_assert!((a - b).norm() <= 1e-10 * a.norm().max(1.0));
    }

    /// `T M_{rc} = Σ_k M_{rk} σ_{kc}`: the symbol intertwines.
    #[test]
    fn symbol_intertwines((g, s, pick) in quotient().prop_flat_map(|g| (Just(g), spec(g.d()), any::<prop::sample::Index>()))) {
        let labels = enumerate_dual(&g);
        let l = &labels[pick.index(labels.len())];
        let sigma = operator_symbol(&s, &g, l).unwrap();
        let ev = RepEvaluator::new(l, &g).unwrap();
        let k = l.dim();
        for r in 0..k {
            for c in 0..k {
                let f = LevelFunction::from_fn(g, |x| ev.coefficient(r, c, x)).unwrap();
                let tf = apply_operator(&s, &f).unwrap();
                let want = LevelFunction::from_fn(g, |x| (0..k).map(|j| ev.coefficient(r, j, x) * sigma[(j, c)]).sum()).unwrap();
                prop_assert!(tf.max_abs_diff(&want).unwrap() <= 1e-10);
            }
        }
    }

    /// Generic blocks are diagonal with the closed-form entries, at any
    /// admissible level and exponent.
    #[test]
    fn generic_blocks_match_closed_form(
        (g, alpha, pick) in prop_oneof![
            Just(Heisenberg::new(3, 1, 2).unwrap()),
            Just(Heisenberg::new(5, 1, 2).unwrap()),
        ].prop_flat_map(|g| (Just(g), 0.5f64..2.0, any::<prop::sample::Index>()))
    ) {
        let s = OperatorSpec::canonical_sublaplacian(1, alpha);
        let generic: Vec<_> = enumerate_dual(&g)
            .into_iter()
            .filter(|l| !l.lambda().is_trivial())
            .flat_map(|l| h_primes(l.prime(), l.m(), 1).into_iter().map(move |h| (l.clone(), h)))
            .filter(|(l, h)| genericity_predicate(&s, l, h))
            .collect();
        let (l, h) = &generic[pick.index(generic.len())];
        let b = restrict_to_block(&s, &g, l, h).unwrap();
        for (k, t) in b.taus.iter().enumerate() {
            let want = closed_form_eigenvalue(&s, l, h, t).unwrap();
            prop_assert!((b.matrix[(k, k)].re - want).abs() <= 1e-9 * want.abs().max(1.0));
        }
        let mut off = b.matrix.clone();
        off.fill_diagonal(Complex64::new(0.0, 0.0));
        prop_assert!(off.norm() <= 1e-10);
        // spectrum equals the symbol's, whatever h' is
        let mut sym = hermitian_eigenvalues(&operator_symbol(&s, &g, l).unwrap()).unwrap();
        let mut blk = hermitian_eigenvalues(&b.matrix).unwrap();
        sym.sort_by(f64::total_cmp);
        blk.sort_by(f64::total_cmp);
        for (x, y) in sym.iter().zip(&blk) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }
}
