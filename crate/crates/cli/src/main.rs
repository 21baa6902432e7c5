//! `diffconv`: differential-kernel convolution toolkit.
//!
//! Exit codes: 0 success, 2 usage errors, 1 runtime errors. Diagnostics go
//! to stderr; data goes to files or stdout.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use diffconv::bench::{apply_method, run_compare, write_csv, BenchmarkConfig, Family, Method};
use diffconv::exact_kernels::{assemble_d, differential_kernel, invert_center_d, transform_matrix_exact, KernelSize};
use diffconv::fields::{generate, FieldFamily, FieldSpec, PolyDomain};
use diffconv::npy::{read_npy_file, write_npy_file};
use diffconv::rational::{MatrixJson, NumberFormat};
use diffconv::transform::{kernel_from_operator, Kernel, OperatorCoeffs};

const THREADS_ENV: &str = "DIFFCONV_THREADS";

#[derive(Parser)]
#[command(name = "diffconv", version, about = "Padding-free size-keeping convolution and boundary-method benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump differential kernels, D matrices and transformation matrices as JSON.
    Kernels(KernelsArgs),
    /// Build a kernel from differential-operator coefficients.
    MakeKernel(MakeKernelArgs),
    /// Sample an analytic field (with optional oracle margin) to an .npy file.
    Gen(GenArgs),
    /// Filter an .npy array with a kernel using one boundary method.
    Filter(FilterArgs),
    /// Compare all boundary methods against the extended-sampling oracle.
    Compare(CompareArgs),
}

fn parse_size(s: &str) -> Result<KernelSize, String> {
    let k: usize = s.parse().map_err(|_| format!("{s:?} is not an integer"))?;
    KernelSize::new(k).map_err(|e| e.to_string())
}

fn parse_pos(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s.split_once(',').ok_or("position must be R,S")?;
    let r = r.trim().parse().map_err(|_| format!("bad row index {r:?}"))?;
    let c = c.trim().parse().map_err(|_| format!("bad column index {c:?}"))?;
    Ok((r, c))
}

#[derive(Args)]
struct KernelsArgs {
    /// Kernel size K (3, 5, 7 or 9).
    #[arg(long, value_parser = parse_size)]
    size: KernelSize,
    /// In-window position R,S; defaults to the centre.
    #[arg(long, value_parser = parse_pos)]
    pos: Option<(usize, usize)>,
    /// Write rationals as exact "num/den" strings instead of doubles.
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MakeKernelArgs {
    #[arg(long, value_parser = parse_size)]
    size: KernelSize,
    /// Operator coefficients as "mn:value,..." (e.g. "20:1,02:1" for the Laplacian).
    #[arg(long)]
    op: String,
    /// Output .npy path; prints JSON rows to stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenFamily {
    Chebyshev,
    Spherical,
    Polynomial,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenDomain {
    Index,
    Symmetric,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: GenFamily,
    /// Function order n (chebyshev, spherical).
    #[arg(long, default_value_t = 1)]
    order: usize,
    /// Polynomial coefficients as "ab:value,..." for h^a w^b.
    #[arg(long)]
    coeffs: Option<String>,
    #[arg(long, value_enum, default_value = "index")]
    domain: GenDomain,
    #[arg(long)]
    height: usize,
    #[arg(long)]
    width: usize,
    /// Extra ground-truth band around the image, in pixels.
    #[arg(long, default_value_t = 0)]
    margin: usize,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    kernel: PathBuf,
    /// diff, zero, reflect, replicate, circular, extrapolate, distribution or partial.
    #[arg(long)]
    method: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, default_value = "chebyshev")]
    family: String,
    /// Orders as "a..b" (inclusive) or a comma list.
    #[arg(long, default_value = "1..10")]
    orders: String,
    #[arg(long, default_value_t = 128)]
    height: usize,
    #[arg(long, default_value_t = 128)]
    width: usize,
    #[arg(long, value_parser = parse_size, default_value = "3")]
    size: KernelSize,
    #[arg(long, default_value_t = 100)]
    filters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma list of methods, or "all".
    #[arg(long, default_value = "all")]
    methods: String,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Usage errors exit with 2, everything else with 1.
enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<diffconv::Error> for Failure {
    fn from(e: diffconv::Error) -> Self {
        match e {
            diffconv::Error::InvalidArgument(_) | diffconv::Error::ShapeMismatch { .. } => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Runtime(other.into()),
        }
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

fn emit(output: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => io::stdout()
            .write_all(text.as_bytes())
            .context("writing to stdout")?,
    }
    Ok(())
}

fn cmd_kernels(args: KernelsArgs) -> Result<(), Failure> {
    let size = args.size;
    let k = size.get();
    let (r, s) = args.pos.unwrap_or((size.half(), size.half()));
    if r >= k || s >= k {
        return usage(format!("position ({r},{s}) must lie inside the {k}x{k} window"));
    }
    let format = if args.exact { NumberFormat::Exact } else { NumberFormat::Float };

    let mut deltas = Vec::with_capacity(size.area());
    for m in 0..k {
        for n in 0..k {
            deltas.push(differential_kernel(size, m, n, r, s)?.to_json(format));
        }
    }
    let m = size.half();
    let doc = serde_json::json!({
        "size": k,
        "position": [r, s],
        "format": if args.exact { "exact" } else { "float" },
        "differential_kernels": deltas,
        "d_matrix": assemble_d(size, r, s)?.to_json(format),
        "d_center": assemble_d(size, m, m)?.to_json(format),
        "d_center_inverse": MatrixJson::new(invert_center_d(size), format),
        "transform": MatrixJson::new(&transform_matrix_exact(size, r, s)?, format),
    });
    let text = serde_json::to_string_pretty(&doc).context("serialising JSON")? + "\n";
    emit(args.output.as_ref(), &text)
}

/// Parses "ab:value,..." with single-digit indices `a`, `b`.
fn parse_index_pairs(spec: &str, what: &str) -> Result<Vec<(usize, usize, f64)>, Failure> {
    let mut out = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let Some((idx, value)) = item.split_once(':') else {
            return usage(format!("{what} entry {item:?} must look like \"mn:value\""));
        };
        let digits: Vec<usize> = idx.trim().chars().filter_map(|c| c.to_digit(10).map(|d| d as usize)).collect();
        if digits.len() != 2 || idx.trim().len() != 2 {
            return usage(format!("{what} index {idx:?} must be two digits"));
        }
        let Ok(value) = value.trim().parse::<f64>() else {
            return usage(format!("{what} value {value:?} is not a number"));
        };
        if !value.is_finite() {
            return usage(format!("{what} value {value} is not finite"));
        }
        out.push((digits[0], digits[1], value));
    }
    if out.is_empty() {
        return usage(format!("{what} list is empty"));
    }
    Ok(out)
}

fn cmd_make_kernel(args: MakeKernelArgs) -> Result<(), Failure> {
    let mut coeffs = OperatorCoeffs::zeros(args.size);
    for (m, n, v) in parse_index_pairs(&args.op, "operator")? {
        let k = args.size.get();
        if m >= k || n >= k {
            return usage(format!("derivative order {m}{n} out of range for K = {k}"));
        }
        coeffs.set(m, n, coeffs.get(m, n) + v)?;
    }
    let kernel = kernel_from_operator(&coeffs)?;
    match args.output {
        Some(path) => write_npy_file(&path, kernel.weights())?,
        None => {
            let rows: Vec<Vec<f64>> = kernel.weights().rows().into_iter().map(|r| r.to_vec()).collect();
            emit(None, &(serde_json::to_string(&rows).context("serialising JSON")? + "\n"))?;
        }
    }
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<(), Failure> {
    let family = match args.family {
        GenFamily::Chebyshev => FieldFamily::Chebyshev { order: args.order },
        GenFamily::Spherical => FieldFamily::Spherical { order: args.order },
        GenFamily::Polynomial => {
            let Some(spec) = args.coeffs.as_deref() else {
                return usage("polynomial fields need --coeffs");
            };
            let terms = parse_index_pairs(spec, "coefficient")?;
            let deg = terms.iter().map(|&(a, b, _)| a.max(b)).max().unwrap_or(0);
            let mut table = vec![vec![0.0; deg + 1]; deg + 1];
            for (a, b, v) in terms {
                table[a][b] += v;
            }
            let domain = match args.domain {
                GenDomain::Index => PolyDomain::Index,
                GenDomain::Symmetric => PolyDomain::Symmetric,
            };
            FieldFamily::Polynomial { coeffs: table, domain }
        }
    };
    let field = generate(&FieldSpec {
        family,
        height: args.height,
        width: args.width,
        margin: args.margin,
    })?;
    write_npy_file(&args.output, &field.data)?;
    Ok(())
}

fn cmd_filter(args: FilterArgs) -> Result<(), Failure> {
    let method: Method = args.method.parse()?;
    let image = read_npy_file(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let weights = read_npy_file(&args.kernel).with_context(|| format!("reading {}", args.kernel.display()))?;
    let (kh, kw) = weights.dim();
    if kh != kw || kh % 2 == 0 || !(3..=9).contains(&kh) {
        return usage(format!(
            "kernel must be square with odd side 3, 5, 7 or 9 (got {kh}x{kw})"
        ));
    }
    let kernel = Kernel::new(weights)?;
    let (h, w) = image.dim();
    if h < kh || w < kh {
        return usage(format!("image must be at least as large as the kernel ({kh}x{kh}), got {h}x{w}"));
    }
    let out = apply_method(&image, &kernel, method, args.seed)?;
    write_npy_file(&args.output, &out)?;
    Ok(())
}

fn parse_orders(s: &str) -> Result<Vec<usize>, Failure> {
    let bad = || Failure::Usage(format!("orders {s:?} must be \"a..b\" or a comma list"));
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|v| v.trim().parse().map_err(|_| bad())).collect()
}

fn cmd_compare(args: CompareArgs) -> Result<(), Failure> {
    let methods = if args.methods == "all" {
        Method::ALL.to_vec()
    } else {
        args.methods
            .split(',')
            .map(|m| m.trim().parse::<Method>())
            .collect::<Result<Vec<_>, _>>()?
    };
    let config = BenchmarkConfig {
        family: args.family.parse::<Family>()?,
        orders: parse_orders(&args.orders)?,
        height: args.height,
        width: args.width,
        size: args.size,
        filters: args.filters,
        seed: args.seed,
        methods,
    };
    let rows = run_compare(&config)?;
    let mut csv = Vec::new();
    write_csv(&mut csv, &rows)?;
    emit(args.output.as_ref(), std::str::from_utf8(&csv).expect("ASCII CSV"))
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = match value.trim().parse() {
        Ok(n) if n > 0 => n,
        _ => return usage(format!("{THREADS_ENV} must be a positive integer (got {value:?})")),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring thread pool")?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Kernels(a) => cmd_kernels(a),
        Command::MakeKernel(a) => cmd_make_kernel(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Filter(a) => cmd_filter(a),
        Command::Compare(a) => cmd_compare(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
