use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nml_core::harness::{
    parallel_map, render_census, run_check, run_compare, run_demo, run_train, worker_count, DemoKind, ExperimentConfig,
};
use nml_core::net::ArchSpec;
use nml_core::{Error, Result};

#[derive(Parser)]
#[command(name = "nml", version, about = "Symmetry and learning-dynamics laboratory for small networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Also write SVG plots
    #[arg(long, global = true)]
    svg: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Count the symmetry groups implied by an architecture spec
    Census {
        spec: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Verify gradient, Hessian, equivariance and noise residuals
    Check {
        #[arg(long, required = true)]
        config: Vec<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write check.json here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train with logging and checkpoints
    Train {
        #[arg(long, required = true)]
        config: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Continue from a checkpoint file
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Overlay predictions on a finished run
    Compare {
        run: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Modified-equation and oscillator demos: quadratic, rotation, oscillator
    Demo {
        kind: DemoKind,
        #[arg(long, default_value = "demo")]
        out: PathBuf,
    },
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::load(path)?;
    Ok(match seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn config_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
}

/// `--out` wins, then the config's `output_dir`, then `runs/<config stem>`.
/// With several configs each run gets its own subdirectory of `--out`.
fn run_dir(cfg: &ExperimentConfig, path: &Path, out: Option<&Path>, many: bool) -> PathBuf {
    match (out, &cfg.output_dir) {
        (Some(o), _) if many => o.join(config_stem(path)),
        (Some(o), _) => o.to_path_buf(),
        (None, Some(d)) => d.clone(),
        (None, None) => Path::new("runs").join(config_stem(path)),
    }
}

fn census(spec: Option<PathBuf>, config: Option<PathBuf>) -> Result<bool> {
    let spec = match (spec, config) {
        (Some(p), _) => ArchSpec::load(&p)?,
        (None, Some(c)) => match ArchSpec::load(&c) {
            Ok(spec) => spec,
            Err(_) => ExperimentConfig::load(&c)?.arch_spec()?,
        },
        (None, None) => return Err(Error::Config("census needs a spec file".into())),
    };
    print!("{}", render_census(&spec));
    Ok(true)
}

fn check(configs: &[PathBuf], seed: Option<u64>, out: Option<&Path>) -> Result<bool> {
    let results = parallel_map(configs, worker_count(), |p| load_config(p, seed).and_then(|c| run_check(&c)));
    let mut ok = true;
    for (path, res) in configs.iter().zip(results) {
        let report = res.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        println!("{}", path.display());
        print!("{}", report.render());
        if report.pass() {
            println!("all {} descriptors within tolerance", report.rows.len());
        } else {
            println!("{} of {} descriptors exceed tolerance", report.failures(), report.rows.len());
            ok = false;
        }
        if let Some(dir) = out {
            let dir = if configs.len() > 1 { dir.join(config_stem(path)) } else { dir.to_path_buf() };
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let file = dir.join("check.json");
            std::fs::write(&file, serde_json::to_string_pretty(&report)?).map_err(|e| Error::io(&file, e))?;
        }
    }
    Ok(ok)
}

fn train(configs: &[PathBuf], out: Option<&Path>, seed: Option<u64>, resume: Option<&Path>) -> Result<bool> {
    if resume.is_some() && configs.len() > 1 {
        return Err(Error::Config("--resume takes a single --config".into()));
    }
    let many = configs.len() > 1;
    let results = parallel_map(configs, worker_count(), |p| {
        let cfg = load_config(p, seed)?;
        let dir = run_dir(&cfg, p, out, many);
        let log = run_train(&cfg, &dir, resume)?;
        Ok::<_, Error>((dir, log.total_steps(), log.len()))
    });
    let mut ok = true;
    for (path, res) in configs.iter().zip(results) {
        match res {
            Ok((dir, steps, rows)) => println!("{}: {steps} steps, {rows} log rows -> {}", path.display(), dir.display()),
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                ok = false;
            }
        }
    }
    Ok(ok)
}

fn compare(run: Option<PathBuf>, out: Option<PathBuf>, svg: bool) -> Result<bool> {
    let dir = run.or(out).ok_or_else(|| Error::Config("compare needs a run directory".into()))?;
    let report = run_compare(&dir, svg)?;
    println!("{} ({} steps, {} rows, {} descriptors)", dir.display(), report.total_steps, report.rows, report.descriptors.len());
    for (method, e) in &report.methods {
        println!("  {:<20} max rel error {:.3e}  mean {:.3e}", method.as_str(), e.max, e.mean);
    }
    println!("  max batch generator residual {:.3e}", report.symmetry_check.max_batch_residual);
    Ok(true)
}

fn demo(kind: DemoKind, out: &Path, svg: bool) -> Result<bool> {
    let (files, summary) = run_demo(kind, out, svg)?;
    print!("{summary}");
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Census { spec, config } => census(spec, config),
        Command::Check { config, seed, out } => check(&config, seed, out.as_deref()),
        Command::Train { config, out, seed, resume } => train(&config, out.as_deref(), seed, resume.as_deref()),
        Command::Compare { run, out } => compare(run, out, cli.svg),
        Command::Demo { kind, out } => demo(kind, &out, cli.svg),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
