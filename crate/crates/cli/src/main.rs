use std::fmt::Display;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use iwasawa_core::frame::DEFAULT_CLUSTER_TOL;
use iwasawa_core::json::{to_json_string, F17};
use iwasawa_core::kan::CLOSURE_TOL;
use iwasawa_core::triangular::{growth_csv, strict_upper_projection};
use iwasawa_core::{
    build_frame, diag_expectation, kan_factor, structure_context, triadic_decompose, truncation_growth, verify_kan,
    ComplexMatrix, Error, FamilyTag, MembershipReport, Residual, SpectralFrame,
};
use serde::Serialize;

const DEFAULT_SIZES: &str = "16,32,64,128,256,512,1024";
const DEFAULT_TOL: f64 = 1e-10;
const THREADS_VAR: &str = "IWASAWA_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "iwasawa",
    version,
    about = "Iwasawa KAN factorization of classical matrix groups"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Factor g = k·a·n relative to the spectral frame of X₀.
    Factorize(FactorizeArgs),
    /// Split a Lie algebra element into its k, a and n parts.
    Decompose(DecomposeArgs),
    /// Operator and Hilbert–Schmidt norms of the triangular truncation of W_n.
    DemoHilbert(HilbertArgs),
    /// Closure study: factor sampled group elements and check family membership.
    Verify(VerifyArgs),
    /// Emit the adapted basis and structure operators of a family.
    Basis(BasisArgs),
}

#[derive(Args, Debug)]
struct FactorizeArgs {
    /// Matrix JSON of the element to factor.
    #[arg(long)]
    input: PathBuf,
    /// Matrix JSON of the Hermitian element fixing the frame.
    #[arg(long)]
    x0: PathBuf,
    /// Also check that each factor lies in this family's group.
    #[arg(long)]
    family: Option<FamilyTag>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Relative residual tolerance.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    x0: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Args, Debug)]
struct HilbertArgs {
    /// Comma-separated sizes, each at least 2.
    #[arg(long, default_value = DEFAULT_SIZES)]
    sizes: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    family: FamilyTag,
    #[arg(long)]
    dim: usize,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct BasisArgs {
    #[arg(long)]
    family: FamilyTag,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failed run: usage and I/O problems exit 1, numeric failures exit 2.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Numeric(String),
}

impl Failure {
    fn usage(msg: impl Display) -> Self {
        Failure::Usage(msg.to_string())
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numeric(_) => 2,
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        match err {
            Error::Singular { .. }
            | Error::NotPositive { .. }
            | Error::ConvergenceFailure { .. }
            | Error::SingularCompression { .. }
            | Error::Internal(_) => Failure::Numeric(err.to_string()),
            _ => Failure::Usage(err.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match configure_threads().and_then(|()| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let (Failure::Usage(msg) | Failure::Numeric(msg)) = &failure;
            eprintln!("error: {msg}");
            ExitCode::from(failure.code())
        }
    }
}

fn configure_threads() -> Outcome {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = match raw.trim().parse() {
        Ok(t) if t > 0 => t,
        _ => {
            return Err(Failure::usage(format!(
                "{THREADS_VAR} must be a positive integer, got {raw:?}"
            )))
        }
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::usage(format!("{THREADS_VAR}: {e}")))
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Factorize(args) => factorize(args),
        Command::Decompose(args) => decompose(args),
        Command::DemoHilbert(args) => demo_hilbert(args),
        Command::Verify(args) => verify(args),
        Command::Basis(args) => basis(args),
    }
}

fn read_matrix(flag: &str, path: &Path) -> Result<ComplexMatrix, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("--{flag}: cannot read {}: {e}", path.display())))?;
    iwasawa_core::json::matrix_from_json(&text)
        .map_err(|e| Failure::usage(format!("--{flag}: {}: {e}", path.display())))
}

fn check_out(out: Option<&Path>) -> Outcome {
    let Some(path) = out else { return Ok(()) };
    if path.is_dir() {
        return Err(Failure::usage(format!("--out: {} is a directory", path.display())));
    }
    match path.parent() {
        Some(parent) if !parent.as_os_str().is_empty() && !parent.is_dir() => Err(Failure::usage(format!(
            "--out: directory {} does not exist",
            parent.display()
        ))),
        _ => Ok(()),
    }
}

fn check_tol(tol: f64) -> Outcome {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(Failure::usage(format!("--tol must be a positive number, got {tol}")))
    }
}

/// Writes the primary output to `out`, or to stdout when absent. Returns
/// whether the human summary should go to stderr to keep stdout clean.
fn emit(out: Option<&Path>, content: &str) -> Result<bool, Failure> {
    match out {
        Some(path) => {
            fs::write(path, content)
                .map_err(|e| Failure::usage(format!("--out: cannot write {}: {e}", path.display())))?;
            Ok(false)
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .map_err(|e| Failure::usage(format!("stdout: {e}")))?;
            Ok(true)
        }
    }
}

fn print_summary(to_stderr: bool, text: &str) {
    if to_stderr {
        eprint!("{text}");
    } else {
        print!("{text}");
    }
}

fn sci(v: f64) -> String {
    format!("{v:.5e}")
}

fn residual_table(residuals: &[Residual], tol: f64) -> String {
    let width = residuals.iter().map(|r| r.name.len()).max().unwrap_or(8).max(8);
    let mut s = format!("{:<width$}  {:>12}  {:>12}  status\n", "residual", "value", "bound");
    for r in residuals {
        let bound = tol * r.scale;
        let status = match (r.enforced, r.value <= bound) {
            (false, _) => "info",
            (true, true) => "ok",
            (true, false) => "FAIL",
        };
        s += &format!(
            "{:<width$}  {:>12}  {:>12}  {status}\n",
            r.name,
            sci(r.value),
            sci(bound)
        );
    }
    s
}

fn load_frame(x0: &Path) -> Result<SpectralFrame, Failure> {
    let x0 = read_matrix("x0", x0)?;
    build_frame(&x0, DEFAULT_CLUSTER_TOL).map_err(|e| Failure::usage(format!("--x0: {e}")))
}

fn factorize(args: FactorizeArgs) -> Outcome {
    check_tol(args.tol)?;
    check_out(args.out.as_deref())?;
    let g = read_matrix("input", &args.input)?;
    let frame = load_frame(&args.x0)?;
    if g.rows() != frame.dim() || g.cols() != frame.dim() {
        return Err(Failure::usage(format!(
            "--input is {}x{} but --x0 has dimension {}",
            g.rows(),
            g.cols(),
            frame.dim()
        )));
    }
    let ctx = match args.family {
        Some(family) => Some(structure_context(family, frame.dim())?),
        None => None,
    };

    let f = kan_factor(&frame, &g)?;
    let report = verify_kan(&frame, &g, &f, ctx.as_ref(), args.tol);
    let to_stderr = emit(args.out.as_deref(), &to_json_string(&f)?)?;
    print_summary(to_stderr, &residual_table(&report.residuals, args.tol));
    verdict(&report)
}

fn verdict(report: &MembershipReport) -> Outcome {
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Numeric(format!(
            "residual check failed (worst relative residual {})",
            sci(report.max_normalized())
        )))
    }
}

#[derive(Serialize)]
struct DecomposeOutput<'a> {
    k_part: &'a ComplexMatrix,
    a_part: &'a ComplexMatrix,
    n_part: &'a ComplexMatrix,
    residuals: DecomposeResiduals,
}

#[derive(Serialize)]
struct DecomposeResiduals {
    reconstruction: F17,
    k_skew_hermitian: F17,
    a_hermitian_block_diagonal: F17,
    n_strictly_upper: F17,
}

fn decompose(args: DecomposeArgs) -> Outcome {
    check_tol(args.tol)?;
    check_out(args.out.as_deref())?;
    let x = read_matrix("input", &args.input)?;
    let frame = load_frame(&args.x0)?;
    if !x.is_square() {
        return Err(Failure::usage(format!(
            "--input must be square, got {}x{}",
            x.rows(),
            x.cols()
        )));
    }
    if x.rows() != frame.dim() {
        return Err(Failure::usage(format!(
            "--input has dimension {} but --x0 has dimension {}",
            x.rows(),
            frame.dim()
        )));
    }

    let parts = triadic_decompose(&frame, &x)?;
    let (k, a, n) = (&parts.k_part, &parts.a_part, &parts.n_part);
    let sum = &(k + a) + n;
    let scale = 1.0 + x.frobenius_norm();
    let residuals = vec![
        Residual::new("reconstruction", (&sum - &x).frobenius_norm(), scale),
        Residual::new("k_skew_hermitian", (k + &k.adjoint()).frobenius_norm(), scale),
        Residual::new(
            "a_hermitian_block_diagonal",
            a.hermitian_defect() + (a - &diag_expectation(&frame, a)?).frobenius_norm(),
            scale,
        ),
        Residual::new(
            "n_strictly_upper",
            (n - &strict_upper_projection(&frame, n)?).frobenius_norm(),
            scale,
        ),
    ];
    let output = DecomposeOutput {
        k_part: k,
        a_part: a,
        n_part: n,
        residuals: DecomposeResiduals {
            reconstruction: F17(residuals[0].value),
            k_skew_hermitian: F17(residuals[1].value),
            a_hermitian_block_diagonal: F17(residuals[2].value),
            n_strictly_upper: F17(residuals[3].value),
        },
    };
    let to_stderr = emit(args.out.as_deref(), &to_json_string(&output)?)?;
    print_summary(to_stderr, &residual_table(&residuals, args.tol));
    verdict(&MembershipReport::new(residuals, args.tol))
}

fn parse_sizes(raw: &str) -> Result<Vec<usize>, Failure> {
    let bad = |item: &str| Failure::usage(format!("--sizes: {item:?} is not an integer >= 2"));
    raw.split(',')
        .map(|item| {
            let item = item.trim();
            match item.parse::<usize>() {
                Ok(n) if n >= 2 => Ok(n),
                _ => Err(bad(item)),
            }
        })
        .collect()
}

fn demo_hilbert(args: HilbertArgs) -> Outcome {
    let sizes = parse_sizes(&args.sizes)?;
    check_out(args.out.as_deref())?;
    let rows = truncation_growth(&sizes)?;
    let to_stderr = emit(args.out.as_deref(), &growth_csv(&rows))?;
    let mut table = format!("{:>6}  {:>12}  {:>12}\n", "n", "rho_inf", "rho_2");
    for row in &rows {
        table += &format!("{:>6}  {:>12}  {:>12}\n", row.n, sci(row.ratio_op), sci(row.ratio_s2));
    }
    print_summary(to_stderr, &table);
    Ok(())
}

fn verify(args: VerifyArgs) -> Outcome {
    if args.trials == 0 {
        return Err(Failure::usage("--trials must be positive"));
    }
    args.family.check_dim(args.dim)?;
    let summary = iwasawa_core::closure_study(args.family, args.dim, args.trials, args.seed)?;

    let mut rows = summary.max_residuals.clone();
    rows.push(("swap".into(), summary.swap_residual));
    rows.push(("swap_conjugation".into(), summary.swap_conjugation));
    rows.push(("swap_unipotent".into(), summary.swap_unipotent));
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(8).max(8);
    println!(
        "family {} dim {} trials {} seed {} frame {:?}",
        summary.family, summary.dim, summary.trials, args.seed, summary.regularity
    );
    println!("{:<width$}  {:>12}  status", "residual", "max");
    let mut worst = 0.0f64;
    for (name, value) in &rows {
        worst = worst.max(*value);
        let status = if *value <= CLOSURE_TOL { "ok" } else { "FAIL" };
        println!("{name:<width$}  {:>12}  {status}", sci(*value));
    }
    if worst <= CLOSURE_TOL {
        Ok(())
    } else {
        Err(Failure::Numeric(format!(
            "closure residual {} exceeds {}",
            sci(worst),
            sci(CLOSURE_TOL)
        )))
    }
}

fn basis(args: BasisArgs) -> Outcome {
    check_out(args.out.as_deref())?;
    let ctx = structure_context(args.family, args.dim)?;
    let to_stderr = emit(args.out.as_deref(), &to_json_string(&ctx)?)?;
    let mut text = format!("family {} dim {}\n", ctx.family(), ctx.dim());
    text += &residual_table(ctx.checks(), iwasawa_core::families::STRUCTURE_TOL);
    print_summary(to_stderr, &text);
    Ok(())
}
