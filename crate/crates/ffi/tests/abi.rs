use std::ffi::{CStr, CString};
use std::ptr;

use heisenvt_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(hvt_last_error()) }.to_string_lossy().into_owned()
}

fn context(p: u64, d: u32, n: u32) -> *mut HvtContext {
    let mut ctx = ptr::null_mut();
    assert_eq!(unsafe { hvt_context_new(p, d, n, &mut ctx) }, HvtStatus::Ok);
    ctx
}

#[test]
fn context_and_counts() {
    let ctx = context(3, 1, 1);
    let (mut points, mut labels, mut sum, mut order) = (0usize, 0usize, 0u64, 0u64);
    unsafe {
        assert_eq!(hvt_context_points(ctx, &mut points), HvtStatus::Ok);
        assert_eq!(hvt_dual_count(ctx, &mut labels), HvtStatus::Ok);
        assert_eq!(hvt_peter_weyl(ctx, &mut sum, &mut order), HvtStatus::Ok);
        hvt_context_free(ctx);
    }
    assert_eq!((points, labels, sum, order), (27, 11, 27, 27));
    assert_eq!(last_error(), "");
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut ctx = ptr::null_mut();
    assert_eq!(unsafe { hvt_context_new(4, 1, 1, &mut ctx) }, HvtStatus::InvalidPrime);
    assert!(ctx.is_null());
    assert!(last_error().contains("p must be an odd prime"));
    assert_eq!(unsafe { hvt_context_new(3, 9, 1, &mut ctx) }, HvtStatus::InvalidArgument);
    assert_eq!(unsafe { hvt_context_new(3, 1, 1, ptr::null_mut()) }, HvtStatus::NullPointer);
    assert_eq!(unsafe { hvt_dual_count(ptr::null(), ptr::null_mut()) }, HvtStatus::NullPointer);
    let ctx = context(3, 1, 1);
    let mut f = ptr::null_mut();
    let short = [0.0f64; 4];
    assert_eq!(unsafe { hvt_function_new(ctx, short.as_ptr(), 2, &mut f) }, HvtStatus::Format);
    unsafe {
        hvt_context_free(ctx);
        hvt_context_free(ptr::null_mut());
        hvt_function_free(ptr::null_mut());
        hvt_string_free(ptr::null_mut());
    }
}

/// A character of the center is an eigenfunction of the sub-Laplacian.
#[test]
fn apply_operator_round_trip() {
    let ctx = context(3, 1, 1);
    // f(x, y, z) = e^{2πi z/3}: the worked value is s(0) + s(0) = 0 on x-independent parts,
    // so use the X-direction alone where ∂_X f = 0 and compare with the library
    let data: Vec<f64> = (0..27)
        .flat_map(|i| {
            let z = (i / 9) as f64;
            let t = 2.0 * std::f64::consts::PI * z / 3.0;
            [t.cos(), t.sin()]
        })
        .collect();
    let mut f = ptr::null_mut();
    let mut tf = ptr::null_mut();
    let spec = CString::new("sublaplacian:alpha=1").unwrap();
    unsafe {
        assert_eq!(hvt_function_new(ctx, data.as_ptr(), 27, &mut f), HvtStatus::Ok);
        assert_eq!(hvt_apply_operator(spec.as_ptr(), f, &mut tf), HvtStatus::Ok);
        let mut len = 0;
        assert_eq!(hvt_function_len(tf, &mut len), HvtStatus::Ok);
        assert_eq!(len, 27);
        let mut out = vec![0.0; 54];
        assert_eq!(hvt_function_data(tf, out.as_mut_ptr(), 10), HvtStatus::InvalidArgument);
        assert_eq!(hvt_function_data(tf, out.as_mut_ptr(), len), HvtStatus::Ok);

        let g = heisenvt::group::Heisenberg::new(3, 1, 1).unwrap();
        let lf = heisenvt::group::LevelFunction::new(
            g,
            data.chunks(2).map(|c| num_complex::Complex64::new(c[0], c[1])).collect(),
        )
        .unwrap();
        let want = heisenvt::operators::apply_operator(&heisenvt::operators::OperatorSpec::canonical_sublaplacian(1, 1.0), &lf).unwrap();
        for (i, w) in want.data().iter().enumerate() {
            assert!((out[2 * i] - w.re).abs() < 1e-12 && (out[2 * i + 1] - w.im).abs() < 1e-12);
        }
        let bad = CString::new("sublaplacian:alpha=0").unwrap();
        let mut none = ptr::null_mut();
        assert_eq!(hvt_apply_operator(bad.as_ptr(), f, &mut none), HvtStatus::InvalidArgument);
        assert!(last_error().contains("alpha"));
        hvt_function_free(f);
        hvt_function_free(tf);
        hvt_context_free(ctx);
    }
}

#[test]
fn spectrum_json() {
    let ctx = context(3, 1, 1);
    let spec = CString::new(r#"{"sublaplacian":{"alpha":1}}"#).unwrap();
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(hvt_spectrum_json(ctx, spec.as_ptr(), HvtSpectrumMode::Dense, &mut s), HvtStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(s).to_str().unwrap()).unwrap();
        hvt_string_free(s);
        let mult: u64 = v["entries"].as_array().unwrap().iter().map(|e| e["mult"].as_u64().unwrap()).sum();
        assert_eq!(mult, 27);
        let big = context(3, 1, 3);
        let mut none = ptr::null_mut();
        assert_eq!(hvt_spectrum_json(big, spec.as_ptr(), HvtSpectrumMode::Dense, &mut none), HvtStatus::BudgetExceeded);
        assert!(none.is_null());
        hvt_context_free(big);
        hvt_context_free(ctx);
        let v = hvt_version_string();
        assert!(CStr::from_ptr(v).to_str().unwrap().starts_with("heisenvt "));
        hvt_string_free(v);
        assert_eq!(CStr::from_ptr(hvt_version()).to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}

/// The generated header is valid C (checked when a C compiler is present).
#[test]
fn header_compiles() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/heisenvt.h");
    let text = std::fs::read_to_string(header).unwrap();
    assert!(text.contains("typedef struct HvtContext HvtContext;"));
    assert!(text.contains("HVT_STATUS_OK = 0"));
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{header}\"\nint main(void) {{ HvtContext *c = 0; size_t n = 0;\n\
             if (hvt_context_new(3, 1, 1, &c) != HVT_STATUS_OK) return 1;\n\
             hvt_dual_count(c, &n); hvt_context_free(c); return n == 11 ? 0 : 2; }}\n"
        ),
    )
    .unwrap();
    match std::process::Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror"]).arg(&src).status() {
        Ok(s) => assert!(s.success(), "header failed to compile"),
        Err(_) => eprintln!("no C compiler found; skipped syntax check"),
    }
}
