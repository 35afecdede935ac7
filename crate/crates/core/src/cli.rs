//! The `heisenvt` command line.
//!
//! Exit codes: 0 success, 1 malformed input or configuration (the message
//! names the offending field), 2 a tolerance violation found by `verify` or
//! `spectrum --check`.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::dual::{enumerate_dual, verify_peter_weyl};
use crate::error::Error;
use crate::fourier::{forward_transform, inverse_transform};
use crate::group::Heisenberg;
use crate::io::{self, LabelJson};
use crate::linalg::{hermitian_eigenvalues, match_sorted};
use crate::operators::{operator_symbol, OperatorSpec};
use crate::padic::Prime;
use crate::spectral::{
    closed_form_spectrum, compare_spectra, hypoellipticity_scan, oracle_spectrum, Mode, DENSE_BUDGET, MATCH_TOL,
    VERSION,
};
use crate::verify::{run_suite, VerifyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "heisenvt", version, about = "Harmonic analysis and VT operators on the p-adic Heisenberg group")]
pub struct Cli {
    /// Worker threads (falls back to HEISENVT_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleMode {
    Dense,
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FunctionFormat {
    Json,
    Binary,
}

#[derive(Debug, Args)]
pub struct GroupArgs {
    /// Odd prime p.
    #[arg(short = 'p', long = "prime")]
    pub p: u64,
    /// Dimension d of the Heisenberg group H_d.
    #[arg(short = 'd', long = "dim", default_value_t = 1)]
    pub d: usize,
    /// Truncation level n.
    #[arg(short = 'n', long = "level", default_value_t = 1)]
    pub n: u32,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Enumerate the dual ball B(n) with dimensions and the Peter–Weyl count.
    Dual {
        #[command(flatten)]
        group: GroupArgs,
        #[arg(long, value_enum, default_value = "json")]
        format: OutputFormat,
    },
    /// Closed-form spectrum, brute-force oracle and their comparison.
    Spectrum {
        #[command(flatten)]
        group: GroupArgs,
        /// Operator: compact form (`sublaplacian:alpha=1`), JSON, or `@file`.
        #[arg(long, default_value = "sublaplacian:alpha=1")]
        spec: String,
        /// Oracle mode; defaults to dense when within the budget.
        #[arg(long, value_enum)]
        mode: Option<OracleMode>,
        /// Exit 2 when generic blocks or the two oracles disagree.
        #[arg(long)]
        check: bool,
        #[arg(long, default_value_t = MATCH_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DENSE_BUDGET)]
        budget: usize,
        #[arg(long, value_enum, default_value = "json")]
        format: OutputFormat,
    },
    /// The symbol matrix of an operator at one label.
    Symbol {
        /// Odd prime p.
        #[arg(short = 'p', long = "prime")]
        p: u64,
        #[arg(long, default_value = "sublaplacian:alpha=1")]
        spec: String,
        /// Label JSON `{"xi":[..],"eta":[..],"lambda":"a/p^K"}` or `@file`.
        #[arg(long)]
        label: String,
    },
    /// Group Fourier transform of a level-function file.
    Fourier {
        #[arg(long, conflicts_with = "inverse", required_unless_present = "inverse")]
        forward: bool,
        #[arg(long)]
        inverse: bool,
        /// Input file (`-` for standard input).
        #[arg(long, short = 'i')]
        input: PathBuf,
        /// Output file (standard output when omitted).
        #[arg(long, short = 'o')]
        output: Option<PathBuf>,
        /// Encoding of the reconstructed function (`--inverse`).
        #[arg(long, value_enum, default_value = "json")]
        format: FunctionFormat,
    },
    /// Run the invariant suite.
    Verify {
        /// Primes to test (comma separated).
        #[arg(long, value_delimiter = ',', default_values_t = vec![3u64, 5])]
        primes: Vec<u64>,
        #[arg(short = 'd', long = "dim", default_value_t = 1)]
        d: usize,
        /// Levels 1..=max-level are tested.
        #[arg(long, default_value_t = 2)]
        max_level: u32,
        #[arg(long)]
        spec: Option<String>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 20240601)]
        seed: u64,
    },
    /// Shell-by-shell symbol bounds and fitted growth orders.
    HypoellScan {
        #[arg(short = 'p', long = "prime")]
        p: u64,
        #[arg(short = 'd', long = "dim", default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 3)]
        n_max: u32,
        #[arg(long, default_value = "sublaplacian:alpha=1")]
        spec: String,
    },
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn config(field: &str, e: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_CONFIG, message: format!("{field}: {e}") }
    }
}

fn group(args: &GroupArgs) -> Result<Heisenberg, Failure> {
    Prime::new(args.p).map_err(|e| Failure::config("p", e))?;
    Heisenberg::new(args.p, args.d, args.n).map_err(|e| {
        let field = match e {
            Error::UnsupportedDimension(_) => "d",
            _ => "n",
        };
        Failure::config(field, e)
    })
}

fn read_arg(s: &str, field: &str) -> Result<String, Failure> {
    match s.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Failure::config(field, format!("{path}: {e}"))),
        None => Ok(s.to_string()),
    }
}

pub fn parse_spec(s: &str, p: Prime, d: usize) -> crate::Result<OperatorSpec> {
    let t = s.trim();
    if t.starts_with('{') {
        OperatorSpec::from_json(t, p, d)
    } else {
        OperatorSpec::from_compact(t, p, d)
    }
}

fn spec_arg(s: &str, p: Prime, d: usize) -> Result<OperatorSpec, Failure> {
    parse_spec(&read_arg(s, "spec")?, p, d).map_err(|e| Failure::config("spec", e))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize") + "\n"
}

fn configure_threads(threads: Option<usize>) -> Result<(), Failure> {
    let n = match threads {
        Some(n) => Some(n),
        None => match std::env::var("HEISENVT_THREADS") {
            Ok(v) => Some(v.trim().parse().map_err(|_| Failure::config("HEISENVT_THREADS", format!("not a count: {v:?}")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Failure::config("threads", "must be at least 1"));
        }
        // a pool may already exist when run() is called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command, writing
/// the report to `out` and diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
            let _ = if code == EXIT_OK { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match configure_threads(cli.threads).and_then(|_| dispatch(cli.command, out)) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn emit(out: &mut dyn Write, s: &str) -> Result<(), Failure> {
    out.write_all(s.as_bytes()).map_err(|e| Failure { code: EXIT_CONFIG, message: format!("output: {e}") })
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32, Failure> {
    match cmd {
        Command::Dual { group: g, format } => {
            let ctx = group(&g)?;
            let labels = enumerate_dual(&ctx);
            let (sum, order) = verify_peter_weyl(&ctx);
            match format {
                OutputFormat::Json => {
                    let doc = json!({
                        "version": VERSION,
                        "p": ctx.p(), "d": ctx.d(), "n": ctx.level(),
                        "count": labels.len(),
                        "labels": labels.iter().map(LabelJson::from_label).collect::<Vec<_>>(),
                        "peter_weyl": { "sum": sum.to_string(), "order": order.to_string(), "equal": sum == order,
                                        "check": format!("{sum} = {order}") },
                    });
                    emit(out, &to_json(&doc))?;
                }
                OutputFormat::Csv => {
                    let mut s = String::from("xi,eta,lambda,dim\n");
                    for l in &labels {
                        let j = LabelJson::from_label(l);
                        s.push_str(&format!("{},{},{},{}\n", j.xi.join(" "), j.eta.join(" "), j.lambda, l.dim()));
                    }
                    emit(out, &s)?;
                }
            }
            Ok(if sum == order { EXIT_OK } else { EXIT_VIOLATION })
        }
        Command::Spectrum { group: g, spec, mode, check, tol, budget, format } => {
            let ctx = group(&g)?;
            let spec = spec_arg(&spec, ctx.prime(), ctx.d())?;
            if !(tol.is_finite() && tol > 0.0) {
                return Err(Failure::config("tol", "must be a positive number"));
            }
            let points = ctx.num_points().map_err(|e| Failure::config("n", e))?;
            let mode = mode.unwrap_or(if points <= budget { OracleMode::Dense } else { OracleMode::Block });
            let fail = |e: Error| match e {
                Error::BudgetExceeded { .. } => Failure::config("budget", e),
                Error::InvalidSpec(_) => Failure::config("spec", e),
                e => Failure::config("spectrum", e),
            };
            let closed = closed_form_spectrum(&spec, &ctx).map_err(fail)?;
            let block = oracle_spectrum(&spec, &ctx, Mode::Block, budget).map_err(fail)?;
            let cmp = compare_spectra(&spec, &closed, &block, tol).map_err(fail)?;
            let (oracle, agreement) = if mode == OracleMode::Dense {
                let dense = oracle_spectrum(&spec, &ctx, Mode::Dense, budget).map_err(fail)?;
                let mut b = block.values.clone();
                b.sort_by(f64::total_cmp);
                let ok = match_sorted(&dense.values, &b, tol);
                let agreement = json!({ "matched": ok.is_ok(),
                    "first_mismatch": ok.err().map(|(i, a, b)| json!({"index": i, "dense": a, "block": b})) });
                (dense, Some(agreement))
            } else {
                (block, None)
            };
            let violation = !cmp.passed() || agreement.as_ref().is_some_and(|a| a["matched"] == Value::Bool(false));
            match format {
                OutputFormat::Json => {
                    let doc = json!({
                        "version": VERSION,
                        "p": ctx.p(), "d": ctx.d(), "n": ctx.level(),
                        "spec": spec.to_json(),
                        "eigenvalue_count": oracle.total_multiplicity(),
                        "closed": closed,
                        "oracle": oracle,
                        "comparison": cmp,
                        "dense_block_agreement": agreement,
                    });
                    emit(out, &to_json(&doc))?;
                }
                OutputFormat::Csv => emit(out, &closed.to_csv())?,
            }
            Ok(if check && violation { EXIT_VIOLATION } else { EXIT_OK })
        }
        Command::Symbol { p, spec, label } => {
            let prime = Prime::new(p).map_err(|e| Failure::config("p", e))?;
            let lj: LabelJson =
                serde_json::from_str(&read_arg(&label, "label")?).map_err(|e| Failure::config("label", e))?;
            let label = lj.to_label(prime).map_err(|e| Failure::config("label", e))?;
            let spec = spec_arg(&spec, prime, label.d())?;
            let ctx = Heisenberg::with_prime(prime, label.d(), label.norm_exp()).map_err(|e| Failure::config("label", e))?;
            let s = operator_symbol(&spec, &ctx, &label).map_err(|e| Failure::config("spec", e))?;
            let eig = hermitian_eigenvalues(&s).map_err(|e| Failure::config("symbol", e))?;
            let rows: Vec<Vec<[f64; 2]>> =
                (0..s.nrows()).map(|r| (0..s.ncols()).map(|c| [s[(r, c)].re, s[(r, c)].im]).collect()).collect();
            let doc = json!({
                "version": VERSION,
                "p": p, "d": label.d(),
                "label": LabelJson::from_label(&label),
                "spec": spec.to_json(),
                "symbol": rows,
                "eigenvalues": eig,
            });
            emit(out, &to_json(&doc))?;
            Ok(EXIT_OK)
        }
        Command::Fourier { forward, inverse: _, input, output, format } => {
            let bytes = if input.as_os_str() == "-" {
                let mut b = Vec::new();
                std::io::Read::read_to_end(&mut std::io::stdin(), &mut b).map_err(|e| Failure::config("input", e))?;
                b
            } else {
                std::fs::read(&input).map_err(|e| Failure::config("input", format!("{}: {e}", input.display())))?
            };
            let result = if forward {
                let f = io::function_from_bytes(&bytes).map_err(|e| Failure::config("input", e))?;
                let c = forward_transform(&f).map_err(|e| Failure::config("input", e))?;
                io::coefficients_to_json(&c).into_bytes()
            } else {
                let text = std::str::from_utf8(&bytes).map_err(|e| Failure::config("input", e))?;
                let c = io::coefficients_from_json(text).map_err(|e| Failure::config("input", e))?;
                let f = inverse_transform(&c).map_err(|e| Failure::config("input", e))?;
                let fmt = match format {
                    FunctionFormat::Json => io::Format::Json,
                    FunctionFormat::Binary => io::Format::Binary,
                };
                io::function_to_bytes(&f, fmt)
            };
            match output {
                Some(path) => std::fs::write(&path, &result)
                    .map_err(|e| Failure::config("output", format!("{}: {e}", path.display())))?,
                None => out.write_all(&result).map_err(|e| Failure::config("output", e))?,
            }
            Ok(EXIT_OK)
        }
        Command::Verify { primes, d, max_level, spec, samples, seed } => {
            let mut cfg = VerifyConfig::default();
            cfg.configs.clear();
            for &p in &primes {
                let prime = Prime::new(p).map_err(|e| Failure::config("primes", e))?;
                for n in 1..=max_level {
                    Heisenberg::with_prime(prime, d, n).map_err(|e| Failure::config("d", e))?;
                    cfg.configs.push((p, d, n));
                }
            }
            if let Some(s) = spec {
                let p = Prime::new(primes[0]).map_err(|e| Failure::config("primes", e))?;
                cfg.spec = Some(spec_arg(&s, p, d)?);
            }
            cfg.plan.samples = samples;
            cfg.plan.seed = seed;
            let report = run_suite(&cfg).map_err(|e| Failure::config("verify", e))?;
            emit(out, &to_json(&report))?;
            Ok(if report.passed { EXIT_OK } else { EXIT_VIOLATION })
        }
        Command::HypoellScan { p, d, n_max, spec } => {
            let prime = Prime::new(p).map_err(|e| Failure::config("p", e))?;
            if n_max < 2 {
                return Err(Failure::config("n-max", "at least two shells are needed for a fit"));
            }
            Heisenberg::with_prime(prime, d, n_max).map_err(|e| Failure::config("n-max", e))?;
            let spec = spec_arg(&spec, prime, d)?;
            let report = hypoellipticity_scan(&spec, p, d, n_max).map_err(|e| Failure::config("spec", e))?;
            emit(out, &to_json(&report))?;
            Ok(EXIT_OK)
        }
    }
}
