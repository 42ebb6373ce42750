use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slabdsa::dsa::PreconditionerKind;
use slabdsa::harness::{self, OutputOptions};
use slabdsa::{oracles, Error, ExperimentConfig};

#[derive(Parser)]
#[command(name = "slabdsa", version, about = "Slab S_N transport with DG and DSA-accelerated source iteration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its iteration history.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        eps: Option<f64>,
        /// Print the history with this many sweeps per row.
        #[arg(long)]
        group: Option<usize>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run every (eps, preconditioner) pair and write a summary table.
    Scan {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated mean free paths.
        #[arg(long, value_delimiter = ',', default_value = "0.75,1e-1,1e-2,1e-3,1e-4")]
        eps_list: Vec<f64>,
        /// Comma-separated preconditioners; an empty string scans none.
        #[arg(long, value_delimiter = ',', default_value = "none,sip,ip,additive")]
        preconds: Vec<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run the dense oracle suite.
    Verify {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Directory for `oracles.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the assembled matrices in Matrix Market format.
    Dump {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` config file; defaults to the paper-1d preset.
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    precond: Option<String>,
    #[arg(long = "inner-sweeps")]
    inner_sweeps: Option<usize>,
    /// upwind | adversarial[:fraction[:seed]]
    #[arg(long)]
    ordering: Option<String>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct OutArgs {
    #[arg(long = "dump-matrices")]
    dump_matrices: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OutArgs {
    fn options(&self) -> OutputOptions {
        OutputOptions {
            out_dir: self.out.clone(),
            dump_matrices: self.dump_matrices,
        }
    }
}

fn load(args: &ConfigArgs, eps: Option<f64>) -> slabdsa::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::paper_1d(),
    };
    if let Some(p) = &args.preset {
        cfg.set("preset", p)?;
    }
    if let Some(e) = eps {
        cfg.eps = e;
    }
    if let Some(p) = &args.precond {
        cfg.set("precond", p)?;
    }
    if let Some(n) = args.inner_sweeps {
        cfg.n_inner = n;
    }
    if let Some(o) = &args.ordering {
        cfg.set("ordering", o)?;
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("override `{kv}` is not KEY=VALUE")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> slabdsa::Result<i32> {
    match cli.command {
        Command::Run { cfg, eps, group, out } => {
            let cfg = load(&cfg, eps)?;
            let res = harness::run_experiment(&cfg, &out.options())?;
            println!("{}", res.summary());
            if let Some(g) = group {
                if g == 0 {
                    return Err(Error::Config {
                        field: "group".into(),
                        message: "must be at least 1".into(),
                    });
                }
                print!("{}", res.history.grouped(g).to_csv());
            } else if out.out.is_none() {
                print!("{}", res.history.to_csv());
            }
            for f in &res.files {
                println!("wrote {}", f.display());
            }
            Ok(res.exit_code())
        }
        Command::Scan {
            cfg,
            eps_list,
            preconds,
            out,
        } => {
            let cfg = load(&cfg, None)?;
            let kinds = preconds
                .iter()
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.parse::<PreconditionerKind>())
                .collect::<slabdsa::Result<Vec<_>>>()?;
            let summary = harness::run_scan(&cfg, &eps_list, &kinds, &out.options())?;
            for c in &summary.cells {
                match &c.outcome {
                    Ok(r) => println!("{}", r.summary()),
                    Err(e) => println!("{} eps={:e}: error: {e}", c.precond, c.eps),
                }
            }
            if out.out.is_none() {
                print!("{}", summary.to_csv());
            }
            Ok(summary.exit_code())
        }
        Command::Verify { seed, out } => {
            let reports = oracles::run_suite(seed)?;
            print!("{}", oracles::format_reports(&reports));
            if let Some(dir) = out {
                fs::create_dir_all(&dir)?;
                let path = dir.join("oracles.csv");
                oracles::write_csv(&reports, BufWriter::new(File::create(&path)?))?;
                println!("wrote {}", path.display());
            }
            Ok(if oracles::all_passed(&reports) { 0 } else { 2 })
        }
        Command::Dump { cfg, eps, out } => {
            let cfg = load(&cfg, eps)?;
            for f in harness::dump(&cfg, &out)? {
                println!("wrote {}", f.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::error_exit_code(&e) as u8)
        }
    }
}
