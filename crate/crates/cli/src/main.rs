use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use heat_content::mc::HeatContentCurve;
use heat_content::pipeline::{
    exit_code, list_builtins, prediction_table, Experiment, ResultsFile, CODE_VERSION,
};
use heat_content::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "heat-content", version, about = "Small-time heat content experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (overrides `out` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for the parallel backends.
    #[arg(long, global = true, env = "HEAT_CONTENT_THREADS")]
    threads: Option<usize>,

    /// Also write two-column `t value` files for gnuplot.
    #[arg(long, global = true)]
    emit_plot_data: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Built-in models, domains, weights and backends.
    List,
    /// Predicted expansion coefficients c0..c4.
    Predict,
    /// Estimate the configured curve and write CSV + JSON results.
    Estimate,
    /// Fit the power basis to the results (estimating first if needed).
    Fit,
    /// Fit and compare with the prediction; exit 1 on mismatch.
    Verify,
}

enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<Outcome> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    if cli.command == Command::List {
        print!("{}", list_builtins());
        return Ok(Outcome::Pass);
    }
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let mut cfg = heat_content::pipeline::ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    let exp = Experiment::new(cfg)?;
    let out = exp.config.out.clone();
    match cli.command {
        Command::List => unreachable!(),
        Command::Predict => predict(&exp, &out),
        Command::Estimate => {
            let record = estimate(&exp, &out, cli.emit_plot_data)?;
            summarize(&record.curves);
            Ok(Outcome::Pass)
        }
        Command::Fit => {
            let mut record = results(&exp, &out, cli.emit_plot_data)?;
            let fit = exp.fit(&record.curves[0])?;
            print!("{}", fit.to_record());
            if cli.emit_plot_data {
                write_fit_plot(&exp, &out, &record.curves[0], &fit)?;
            }
            record.fit = Some(fit);
            record.save(&exp.results_path(&out))?;
            Ok(Outcome::Pass)
        }
        Command::Verify => {
            let mut record = results(&exp, &out, cli.emit_plot_data)?;
            let v = exp.verify(&record.curves[0])?;
            print!("{}", v.report);
            let checked: Vec<String> = v.checked.iter().map(|e| e.to_string()).collect();
            println!("checked exponents: {}", checked.join(", "));
            println!("verdict: {}", if v.pass { "PASS" } else { "FAIL" });
            let pass = v.pass;
            record.fit = Some(v.fit.clone());
            record.report = Some(v);
            record.save(&exp.results_path(&out))?;
            Ok(if pass { Outcome::Pass } else { Outcome::Fail })
        }
    }
}

fn predict(exp: &Experiment, out: &Path) -> Result<Outcome> {
    let p = exp.predict()?;
    println!("domain: {}  weight: {}", exp.config.domain.spec, exp.weight.as_ref().map_or("1", |w| w.name()));
    print!("{}", prediction_table(&p));
    std::fs::create_dir_all(out)?;
    let record = serde_json::json!({
        "version": CODE_VERSION,
        "config": exp.config,
        "prediction": p,
    });
    let text = serde_json::to_string_pretty(&record).map_err(|e| Error::Numerical(e.to_string()))?;
    std::fs::write(out.join(format!("{}.predict.json", exp.config.name)), text + "\n")?;
    Ok(Outcome::Pass)
}

fn estimate(exp: &Experiment, out: &Path, plot: bool) -> Result<ResultsFile> {
    let curves = exp.estimate()?;
    exp.write_results(out, &curves, plot)
}

/// Reuses existing results produced by the same resolved config; otherwise estimates.
fn results(exp: &Experiment, out: &Path, plot: bool) -> Result<ResultsFile> {
    let path = exp.results_path(out);
    if path.exists() {
        if let Ok(r) = ResultsFile::load(&path) {
            if r.config == exp.config && r.version == CODE_VERSION && !r.curves.is_empty() {
                return Ok(r);
            }
        }
    }
    estimate(exp, out, plot)
}

fn summarize(curves: &[HeatContentCurve]) {
    for c in curves {
        let first = c.estimates.first();
        let last = c.estimates.last();
        if let (Some(a), Some(b)) = (first, last) {
            println!(
                "{} [{}] {} points: t={:e} -> {:.9} (+/- {:.2e}), t={:e} -> {:.9} (+/- {:.2e})",
                c.kind,
                c.backend(),
                c.len(),
                c.times[0],
                a.value,
                a.stderr,
                c.times[c.len() - 1],
                b.value,
                b.stderr
            );
        }
    }
}

fn write_fit_plot(
    exp: &Experiment,
    out: &Path,
    curve: &HeatContentCurve,
    fit: &heat_content::asymptotics::AsymptoticFit,
) -> Result<()> {
    let mut s = format!("# t {} fitted\n", curve.kind);
    for (t, e) in curve.times.iter().zip(&curve.estimates) {
        let model: f64 = fit
            .exponents
            .iter()
            .zip(&fit.coefficients)
            .map(|(p, c)| c * t.powf(*p))
            .sum();
        s.push_str(&format!("{t:e} {:e} {model:e}\n", e.value));
    }
    std::fs::write(out.join(format!("{}.fit.dat", exp.config.name)), s)?;
    Ok(())
}
