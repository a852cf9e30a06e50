use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use modescope::harness::{
    cdf_svg, compute_auc, parse_grid, read_sweep_csv, sweep_svg, write_auc_csv, write_cdf_csv, write_scores_csv,
    write_sweep_csv, ExperimentConfig, Runner, SweepParam,
};
use modescope::selection::{score_rows, Method};

#[derive(Parser)]
#[command(
    name = "modescope",
    version,
    about = "Order-detection experiments for delay-coordinates DMD"
)]
struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON); unspecified fields take working-point defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trials per grid point [default: from config].
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed [default: from config].
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, further capped by MODESCOPE_THREADS.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                ExperimentConfig::from_json(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        Ok(cfg)
    }

    fn runner(&self) -> Result<Runner> {
        Ok(Runner::new(self.threads)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Order-hit probability over a one-parameter grid.
    Sweep {
        /// One of snr, dtheta, rho, kappa, m, M, L.
        #[arg(long)]
        param: String,
        /// `a:b:n` for n evenly spaced points, or a comma-separated list.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        /// Comma-separated method names [default: from config].
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        #[arg(long)]
        out: PathBuf,
        /// Also write sweep.svg.
        #[arg(long)]
        svg: bool,
        /// Also write per-mode scores.csv.
        #[arg(long)]
        scores: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Empirical CDF of spurious eigenvalue magnitudes for several L.
    CdfSpur {
        #[arg(long = "L-grid", value_delimiter = ',', default_value = "2,8,32,64")]
        l_grid: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Also write cdf.svg.
        #[arg(long)]
        svg: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Normalized AUC of each curve in a sweep.csv.
    Auc {
        #[arg(long = "in")]
        input: PathBuf,
        /// Output CSV [default: stdout].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the operator identities on seeded instances; exits 1 on failure.
    Verify {
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn sweep(
    param: &str,
    grid: &str,
    methods: Option<Vec<String>>,
    out: &Path,
    svg: bool,
    scores: bool,
    common: &Common,
) -> Result<()> {
    let param: SweepParam = param.parse()?;
    let grid = parse_grid(grid)?;
    let mut cfg = common.load()?;
    if let Some(names) = methods {
        cfg.methods = names
            .iter()
            .map(|s| s.parse::<Method>())
            .collect::<modescope::Result<_>>()?;
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let runner = common.runner()?;
    log::info!(
        "sweeping {param} over {} points, {} trials each, {} threads",
        grid.len(),
        cfg.trials,
        runner.threads()
    );
    let run = runner.sweep(&cfg, param, &grid, cfg.trials)?;
    let res = &run.result;

    let mut w = create(&out.join("sweep.csv"))?;
    write_sweep_csv(&mut w, res)?;
    w.flush()?;
    if grid.len() >= 2 {
        let auc = compute_auc(res)?;
        let mut w = create(&out.join("auc.csv"))?;
        write_auc_csv(&mut w, &auc)?;
        w.flush()?;
        for (m, a) in &auc {
            println!("{m:<14} auc {a:.3}");
        }
    }
    if svg {
        fs::write(out.join("sweep.svg"), sweep_svg(res))?;
    }
    if scores {
        let rows: Vec<_> = run
            .outcomes
            .iter()
            .flat_map(|o| {
                o.methods.iter().filter_map(move |m| {
                    let (s, sel) = (m.scores.as_ref()?, m.selection.as_ref()?);
                    Some(score_rows(o.index, s, sel, &o.eigenvalues))
                })
            })
            .flatten()
            .collect();
        let mut w = create(&out.join("scores.csv"))?;
        write_scores_csv(&mut w, &rows)?;
        w.flush()?;
    }
    let failed: usize = res.curves.iter().flat_map(|c| &c.failed).sum();
    if failed > 0 {
        log::warn!("{failed} method evaluations failed and were excluded");
    }
    Ok(())
}

fn cdf_spur(l_grid: &[usize], out: &Path, svg: bool, common: &Common) -> Result<()> {
    let cfg = common.load()?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let cdf = common.runner()?.spurious_cdf(&cfg, l_grid, cfg.trials)?;
    let mut w = create(&out.join("cdf.csv"))?;
    write_cdf_csv(&mut w, &cdf)?;
    w.flush()?;
    if svg {
        fs::write(out.join("cdf.svg"), cdf_svg(&cdf))?;
    }
    for (i, l) in cdf.l_grid.iter().enumerate() {
        match (cdf.quantile(i, 0.05), cdf.median(i)) {
            (Some(p5), Some(med)) => println!(
                "L={l:<4} n={:<6} p5 {p5:.4} median {med:.4} failed {}",
                cdf.samples[i].len(),
                cdf.failed[i]
            ),
            _ => println!("L={l:<4} empty spurious pool (failed {})", cdf.failed[i]),
        }
    }
    Ok(())
}

fn auc(input: &Path, out: Option<&Path>) -> Result<()> {
    let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let sweep = read_sweep_csv(file).with_context(|| format!("reading {}", input.display()))?;
    let auc = compute_auc(&sweep)?;
    match out {
        Some(p) => {
            let mut w = create(p)?;
            write_auc_csv(&mut w, &auc)?;
            w.flush()?;
        }
        None => write_auc_csv(io::stdout().lock(), &auc)?,
    }
    Ok(())
}

fn verify(seeds: usize, out: Option<&Path>, common: &Common) -> Result<bool> {
    if seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let cfg = common.load()?;
    let report = common.runner()?.verify(&cfg, seeds)?;
    let json = serde_json::to_string_pretty(&report)?;
    match out {
        Some(p) => fs::write(p, json + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => println!("{json}"),
    }
    for c in report.failures() {
        eprintln!(
            "FAIL {} (seed {}): {:.3e} > {:.3e}",
            c.name, c.seed_index, c.value, c.tolerance
        );
    }
    eprintln!(
        "{} of {} checks passed",
        report.checks.iter().filter(|c| c.passed).count(),
        report.checks.len()
    );
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Sweep {
            param,
            grid,
            methods,
            out,
            svg,
            scores,
            common,
        } => sweep(&param, &grid, methods, &out, svg, scores, &common).map(|_| true),
        Command::CdfSpur {
            l_grid,
            out,
            svg,
            common,
        } => cdf_spur(&l_grid, &out, svg, &common).map(|_| true),
        Command::Auc { input, out } => auc(&input, out.as_deref()).map(|_| true),
        Command::Verify { seeds, out, common } => verify(seeds, out.as_deref(), &common),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
