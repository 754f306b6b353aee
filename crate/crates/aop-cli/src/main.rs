use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use aop_core::error::AopError;
use aop_core::nearness::dist_to_scalar_isometries;
use aop_core::oracle::{estimate_eps_hat, refined_dist_2x2};
use aop_core::repro::{
    convergence_demo, delta_comparison, diagonal_growth_table, shift_composition_sweep,
};
use aop_core::spectral::operator_norm;
use aop_cli::{
    build_report, fmt_sig, load_matrix, render_json, render_text, OracleReport, ReportOptions,
};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Parser)]
#[command(
    name = "aop",
    version,
    about = "Orthogonality-preservation constants, witness pairs, and nearest scaled isometries \
             for dense real or complex matrices"
)]
struct Cli {
    /// Seed for randomized estimates.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Output format for reports and tables.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Relative cutoff below which singular values count as zero.
    #[arg(long, global = true)]
    rank_tol: Option<f64>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Full report: constants, witness pair, nearest scaled isometry, stability bounds.
    Analyze { path: PathBuf },

    /// Cross-check the closed forms against sampling (plus grid search for real 2x2 input).
    Verify {
        path: PathBuf,
        /// Orthogonal pairs to sample.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Hill-climb iterations on the best sampled pair.
        #[arg(long, default_value_t = 200)]
        refine: usize,
        /// Agreement tolerance between estimate and closed form.
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },

    /// Emit the nearest scalar multiple of an isometry in matrix format.
    Nearest {
        path: PathBuf,
        /// Write the matrix here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Regenerate a reference table (CSV and JSON).
    Repro {
        /// One of: example-3.1, example-3.13, delta-comparison, convergence-3.10.
        name: String,
        /// Row count for the growing and convergence families.
        #[arg(long, default_value_t = 10)]
        n_max: usize,
        /// Grid density for swept tables.
        #[arg(long, default_value_t = 99)]
        grid: usize,
        /// Truncation dimension for the composition sweep (even, at least 4).
        #[arg(long, default_value_t = 8)]
        trunc_dim: usize,
        /// Base path; writes <base>.csv and <base>.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    msg: String,
}

/// Writes to stdout; a consumer that stopped reading is not our error,
/// so a broken pipe ends the process quietly.
fn emit(s: &str) -> Result<(), Failure> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(s.as_bytes()).and_then(|()| out.flush()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => std::process::exit(0),
        Err(e) => Err(Failure {
            code: 1,
            msg: format!("cannot write to stdout: {e}"),
        }),
    }
}

fn warn(s: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stderr().lock(), "{s}");
}

fn code_for(e: &AopError) -> u8 {
    use AopError::*;
    match e {
        Parse { .. } | NonFiniteEntry { .. } => 2,
        EmptyMatrix { .. }
        | DimensionTooSmall { .. }
        | NoIsometryExists { .. }
        | NotSquare { .. }
        | NotReal2x2 { .. }
        | ShapeMismatch { .. }
        | BadTruncation { .. } => 3,
        TableCheck(_) => 4,
        _ => 1,
    }
}

fn fail(e: AopError) -> Failure {
    Failure {
        code: code_for(&e),
        msg: e.to_string(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = emit(&e.to_string());
                return ExitCode::SUCCESS;
            }
            warn(&e.to_string());
            return ExitCode::from(64);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            warn(&format!("error: {}", f.msg));
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Cmd::Analyze { ref path } => cmd_analyze(path, &cli),
        Cmd::Verify {
            ref path,
            samples,
            refine,
            tol,
        } => cmd_verify(path, samples, refine, tol, &cli),
        Cmd::Nearest { ref path, ref out } => cmd_nearest(path, out.as_deref(), &cli),
        Cmd::Repro {
            ref name,
            n_max,
            grid,
            trunc_dim,
            ref out,
        } => cmd_repro(name, n_max, grid, trunc_dim, out.as_deref(), &cli),
    }
}

fn cmd_analyze(path: &Path, cli: &Cli) -> Result<(), Failure> {
    let t = load_matrix(path).map_err(fail)?;
    let report = build_report(
        &path.display().to_string(),
        &t,
        ReportOptions {
            rank_tol: cli.rank_tol,
            oracle: None,
        },
    )
    .map_err(fail)?;
    if t.is_wide() {
        warn(&format!(
            "warning: {}x{} operator is wider than tall; nearest-isometry fields unavailable",
            t.rows(),
            t.cols()
        ));
    }
    match cli.format {
        Format::Text => emit(&render_text(&report))?,
        Format::Json => emit(&format!("{}\n", render_json(&report).map_err(fail)?))?,
    }
    Ok(())
}

fn cmd_verify(
    path: &Path,
    samples: usize,
    refine: usize,
    tol: f64,
    cli: &Cli,
) -> Result<(), Failure> {
    let t = load_matrix(path).map_err(fail)?;
    let mut report = build_report(
        &path.display().to_string(),
        &t,
        ReportOptions {
            rank_tol: cli.rank_tol,
            oracle: None,
        },
    )
    .map_err(fail)?;
    let est = estimate_eps_hat(&t, samples, refine, cli.seed).map_err(fail)?;
    let agreement = (est.value - report.eps_hat).abs();
    report.oracle = Some(OracleReport {
        estimate: est.value,
        samples,
        seed: cli.seed,
        agreement,
    });

    let mut ok = est.value <= report.eps_hat + 1e-9 && agreement <= tol;
    let mut lines = vec![
        format!("closed form       {}", fmt_sig(report.eps_hat)),
        format!("sampled estimate  {}", fmt_sig(est.value)),
        format!(
            "agreement         {} (tolerance {})",
            fmt_sig(agreement),
            fmt_sig(tol)
        ),
    ];

    if t.rows() == 2 && t.cols() == 2 && t.max_imag() == 0.0 {
        let grid = refined_dist_2x2(&t, 1000, 3).map_err(fail)?;
        let closed = report
            .dist_cv
            .expect("square input always carries a distance");
        let dist_agreement = (grid - closed).abs();
        ok = ok && grid >= closed - 1e-9 && dist_agreement <= tol;
        lines.push(format!("closed distance   {}", fmt_sig(closed)));
        lines.push(format!("grid minimum      {}", fmt_sig(grid)));
        lines.push(format!("dist agreement    {}", fmt_sig(dist_agreement)));
    }

    match cli.format {
        Format::Text => {
            lines.push(format!(
                "verdict           {}",
                if ok { "ok" } else { "FAILED" }
            ));
            emit(&format!("{}\n", lines.join("\n")))?;
        }
        Format::Json => emit(&format!("{}\n", render_json(&report).map_err(fail)?))?,
    }

    if ok {
        Ok(())
    } else {
        Err(Failure {
            code: 4,
            msg: "verification failed: estimates disagree with the closed forms".into(),
        })
    }
}

fn cmd_nearest(path: &Path, out: Option<&Path>, cli: &Cli) -> Result<(), Failure> {
    let t = load_matrix(path).map_err(fail)?;
    let rank_tol = cli
        .rank_tol
        .unwrap_or_else(|| aop_core::tolerances::default_rank_tol(t.rows(), t.cols()));
    let near = dist_to_scalar_isometries(&t, rank_tol).map_err(fail)?;
    near.verify(&t).map_err(fail)?;
    let gap = operator_norm(&t.sub(&near.nearest).map_err(fail)?);
    if (gap - near.distance).abs() > 1e-10 {
        return Err(Failure {
            code: 1,
            msg: format!(
                "emitted operator misses the distance: {gap} vs {}",
                near.distance
            ),
        });
    }
    let text = near.nearest.to_text();
    match out {
        Some(p) => {
            std::fs::write(p, &text).map_err(|e| Failure {
                code: 1,
                msg: format!("cannot write {}: {e}", p.display()),
            })?;
            warn(&format!("wrote {}", p.display()));
        }
        None => emit(&text)?,
    }
    Ok(())
}

fn cmd_repro(
    name: &str,
    n_max: usize,
    grid: usize,
    trunc_dim: usize,
    out: Option<&Path>,
    cli: &Cli,
) -> Result<(), Failure> {
    let table = match name {
        "example-3.1" => diagonal_growth_table(n_max.max(1), cli.seed),
        "example-3.13" => {
            let deltas = even_grid(0.0, 0.5, grid.max(2));
            shift_composition_sweep(1.0, &deltas, trunc_dim)
        }
        "delta-comparison" => {
            let eps: Vec<f64> = (1..=grid.max(1))
                .map(|i| i as f64 / (grid.max(1) + 1) as f64)
                .collect();
            delta_comparison(&eps)
        }
        "convergence-3.10" => convergence_demo(n_max.max(2), cli.seed),
        other => {
            return Err(Failure {
                code: 5,
                msg: format!(
                    "unknown table name '{other}' (expected example-3.1, example-3.13, \
                     delta-comparison, or convergence-3.10)"
                ),
            })
        }
    }
    .map_err(fail)?;

    match out {
        Some(base) => {
            let (csv_path, json_path) = table.write_files(base).map_err(fail)?;
            emit(&format!(
                "wrote {} and {}\n",
                csv_path.display(),
                json_path.display()
            ))?;
        }
        None => match cli.format {
            Format::Text => emit(&table.to_csv_string().map_err(fail)?)?,
            Format::Json => emit(&format!("{}\n", table.to_json_string().map_err(fail)?))?,
        },
    }
    Ok(())
}

fn even_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}
