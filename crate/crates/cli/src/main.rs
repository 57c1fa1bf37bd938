use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tubalkit::experiment::{run_experiment, ExperimentConfig, ExperimentResult};
use tubalkit::io::{load_tensor, save_tensor};
use tubalkit::tfactor::{average_rank, rank_r_tsvd, slice_spectrum, tsvd};
use tubalkit::{
    certificate_check, project_tnn, tnn, DenseTensor, ProjectionMode, TnnProjector, TubalError,
};

/// Tensor nuclear norm ball optimization toolkit.
#[derive(Parser, Debug)]
#[command(name = "tubalkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a seeded experiment campaign and write CSV tables.
    ///
    /// Any config key can follow as `--key value` or `--key=value` and
    /// overrides the file.
    Run {
        /// Flat `key = value` config file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
        overrides: Vec<String>,
    },
    /// t-SVD of a tensor file: ranks, TNN, spectra and reconstruction error.
    Tsvd {
        file: PathBuf,
        /// Keep only the leading `rank` triplets of each slice.
        #[arg(long)]
        rank: Option<usize>,
        /// Write `PREFIX.u.tten`, `PREFIX.s.tten` and `PREFIX.v.tten`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Project a tensor file onto the TNN ball of radius `tau`.
    Project {
        file: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        tau: f64,
        /// Try a certified rank-`rank` projection first.
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check whether the projection onto the ball has tubal rank at most `rank`.
    Certify {
        file: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        tau: f64,
        #[arg(long)]
        rank: usize,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(TubalError),
}

impl From<TubalError> for CliError {
    fn from(e: TubalError) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(e) if e.is_config() => 2,
            CliError::Lib(e) if e.is_numerical() => 3,
            CliError::Lib(_) => 1,
        }
    }
}

fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let Some(key) = a.strip_prefix("--") else {
            return Err(CliError::Usage(format!("expected `--key value`, found `{a}`")));
        };
        if let Some((k, v)) = key.split_once('=') {
            out.push((k.to_string(), v.to_string()));
        } else {
            let v = it
                .next()
                .ok_or_else(|| CliError::Usage(format!("missing value for `--{key}`")))?;
            out.push((key.to_string(), v.clone()));
        }
    }
    Ok(out)
}

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_else(|| "-".into())
}

fn print_result(res: &ExperimentResult) {
    println!(
        "{:>6} {:>12} {:>14} {:>12} {:>12} {:>10} {:>10} {:>6}",
        "seed", "init_error", "recovery_error", "dual_gap", "sc_measure", "first_cert", "wall_time", "esc"
    );
    for r in &res.runs {
        println!(
            "{:>6} {:>12.4e} {:>14.4e} {:>12.3e} {:>12.4} {:>10} {:>10.2} {:>6}",
            r.seed,
            r.init_error,
            r.recovery_error,
            r.dual_gap,
            r.sc_measure,
            fmt_opt(r.first_certified_iteration),
            r.wall_time,
            r.escalations
        );
    }
    let m = &res.mean;
    println!(
        "{:>6} {:>12.4e} {:>14.4e} {:>12.3e} {:>12.4} {:>10} {:>10.2} {:>6}",
        "mean",
        m.init_error,
        m.recovery_error,
        m.dual_gap,
        m.sc_measure,
        fmt_opt(m.first_certified_iteration.map(|v| format!("{v:.1}"))),
        m.wall_time,
        m.escalations
    );
}

fn cmd_run(config: Option<PathBuf>, overrides: &[String]) -> Result<(), CliError> {
    let overrides = parse_overrides(overrides)?;
    let cfg = match config {
        Some(path) => ExperimentConfig::from_file(path, &overrides)?,
        None => ExperimentConfig::from_sources(None, &overrides)?,
    };
    let res = run_experiment(&cfg)?;
    print_result(&res);
    println!("results written to {}", cfg.output.display());
    Ok(())
}

fn cmd_tsvd(file: PathBuf, rank: Option<usize>, out: Option<PathBuf>) -> Result<(), CliError> {
    let x = load_tensor(&file)?;
    let factors = match rank {
        Some(r) => rank_r_tsvd(&x, r)?,
        None => tsvd(&x)?,
    };
    let sv = slice_spectrum(&x);
    println!("dims = {:?}", x.dims());
    println!("tubal rank = {}", sv.tubal_rank(tubalkit::tfactor::DEFAULT_RANK_TOL));
    let avg = average_rank(&x);
    println!("average rank = {} ({:.4})", avg, avg.value());
    println!("tnn = {:e}", sv.tnn());
    println!("spectral norm = {:e}", sv.spectral_norm());
    for (k, vals) in sv.values().iter().enumerate() {
        let shown: Vec<String> = vals.iter().take(4).map(|v| format!("{v:.6e}")).collect();
        let more = if vals.len() > 4 { " ..." } else { "" };
        println!("slice {k}: [{}{more}]", shown.join(", "));
    }
    let rec = factors.reconstruct()?;
    let err = rec.distance(&x)? / x.fro_norm().max(f64::MIN_POSITIVE);
    println!("reconstruction error = {err:e}");
    if let Some(prefix) = out {
        let p = prefix.display();
        save_tensor(&factors.u, format!("{p}.u.tten"))?;
        save_tensor(&factors.s, format!("{p}.s.tten"))?;
        save_tensor(&factors.v, format!("{p}.v.tten"))?;
    }
    Ok(())
}

fn cmd_project(file: PathBuf, tau: f64, rank: Option<usize>, out: PathBuf) -> Result<(), CliError> {
    let x = load_tensor(&file)?;
    let before = tnn(&x);
    let (projected, threshold, note): (DenseTensor, f64, String) = match rank {
        Some(r) => {
            let mut p = TnnProjector::new(tau, ProjectionMode::TruncatedCertified(r))?;
            let o = p.project(&x)?;
            let note = if o.escalated {
                format!("rank-{r} certificate failed, used the full projection")
            } else {
                format!("rank-{r} certificate holds")
            };
            (o.result.projected, o.result.threshold, note)
        }
        None => {
            let p = project_tnn(&x, tau)?;
            (p.projected, p.threshold, "full projection".into())
        }
    };
    println!("sigma = {threshold}");
    println!("tnn before = {before:e}");
    println!("tnn after = {:e}", tnn(&projected));
    println!("tubal rank = {}", tubalkit::tubal_rank(&projected));
    println!("{note}");
    save_tensor(&projected, &out)?;
    Ok(())
}

fn cmd_certify(file: PathBuf, tau: f64, rank: usize) -> Result<(), CliError> {
    let x = load_tensor(&file)?;
    let cert = certificate_check(&slice_spectrum(&x), tau, rank)?;
    println!("value = {}", cert.value);
    println!("sigma_next_max = {}", cert.sigma_next_max);
    println!("verdict = {}", cert.holds);
    Ok(())
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("TUBALKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("TUBALKIT_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = init_threads().and_then(|_| match cli.command {
        Command::Run { config, overrides } => cmd_run(config, &overrides),
        Command::Tsvd { file, rank, out } => cmd_tsvd(file, rank, out),
        Command::Project { file, tau, rank, out } => cmd_project(file, tau, rank, out),
        Command::Certify { file, tau, rank } => cmd_certify(file, tau, rank),
    });
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(m) => eprintln!("error: {m}"),
                CliError::Lib(l) => eprintln!("error: {l}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}
