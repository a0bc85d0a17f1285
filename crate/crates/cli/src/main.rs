use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;
use magix_core::pipeline::{
    self, render, EvaluateOptions, Format, ModelSource, Report, RunConfig, DEFAULT_KS,
};

#[derive(Parser)]
#[command(
    name = "magix",
    version,
    about = "Global rule-set explanations for black-box classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write report.json into the output directory.
    Explain {
        #[arg(long)]
        config: PathBuf,
        /// Output printed to stdout once the report is written.
        #[arg(long, default_value = "text")]
        format: Format,
        /// Field overrides such as `--ga.population-size 300`.
        #[arg(
            trailing_var_arg = true,
            allow_hyphen_values = true,
            value_name = "OVERRIDES"
        )]
        overrides: Vec<String>,
    },
    /// Recompute Imitation@K for a saved report.
    Evaluate {
        #[arg(long)]
        report: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_KS)]
        ks: Vec<usize>,
        /// Dataset to score on (defaults to the one the report was built from).
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Forest file to compare against (defaults to the report's model).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Seed of the train/test split (defaults to the report's).
        #[arg(long)]
        split_seed: Option<u64>,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long, default_value = "text")]
        format: Format,
    },
    /// Train the built-in forest and save it for later `load` runs.
    TrainModel {
        #[arg(long)]
        config: PathBuf,
        /// Destination file (defaults to model.json in the output directory).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(
            trailing_var_arg = true,
            allow_hyphen_values = true,
            value_name = "OVERRIDES"
        )]
        overrides: Vec<String>,
    },
    /// Print a saved report.
    Render {
        #[arg(long, default_value = "out/report.json")]
        report: PathBuf,
        #[arg(long, default_value = "text")]
        format: Format,
    },
}

/// Turns `--a.b 1 --c=2 --flag` into key/value pairs; a flag without a
/// value is `true`.
fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter().peekable();
    while let Some(arg) = it.next() {
        let Some(key) = arg.strip_prefix("--") else {
            bail!(magix_core::Error::Config(format!(
                "unexpected argument {arg:?}; overrides look like --field.name value"
            )));
        };
        if let Some((k, v)) = key.split_once('=') {
            out.push((k.to_string(), v.to_string()));
            continue;
        }
        match it.peek() {
            Some(next) if !next.starts_with("--") => {
                out.push((key.to_string(), next.to_string()));
                it.next();
            }
            _ => out.push((key.to_string(), "true".to_string())),
        }
    }
    Ok(out)
}

fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let overrides = parse_overrides(overrides)?;
    Ok(RunConfig::from_file(path, &overrides)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Explain {
            config,
            format,
            overrides,
        } => {
            let cfg = load_config(&config, &overrides)?;
            let report = pipeline::explain(&cfg)?;
            info!(
                "wrote {}",
                cfg.output_dir.join(pipeline::REPORT_FILE).display()
            );
            print!("{}", render(&report, format)?);
        }
        Command::Evaluate {
            report,
            ks,
            dataset,
            schema,
            model,
            split_seed,
            workers,
            format,
        } => {
            let saved = Report::load(&report)?;
            let dir = report.parent().unwrap_or_else(|| Path::new("."));
            let opts = EvaluateOptions {
                dataset,
                schema,
                model: model.map(|path| ModelSource::Load { path }),
                split_seed,
                ks,
                workers,
            };
            let curve = pipeline::evaluate(&saved, dir, &opts)?;
            match format {
                Format::Text => print!("{}", curve.to_table()),
                Format::Json => println!("{}", serde_json::to_string_pretty(&curve)?),
            }
        }
        Command::TrainModel {
            config,
            out,
            overrides,
        } => {
            let cfg = load_config(&config, &overrides)?;
            let out = out.unwrap_or_else(|| cfg.output_dir.join(pipeline::MODEL_FILE));
            let forest = pipeline::train_model(&cfg)?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)
                    .with_context(|| format!("creating {}", parent.display()))?;
            }
            forest.save(&out)?;
            println!("saved {} trees to {}", forest.tree_count(), out.display());
        }
        Command::Render { report, format } => {
            let saved = Report::load(&report)?;
            print!("{}", render(&saved, format)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e
                .downcast_ref::<magix_core::Error>()
                .is_some_and(magix_core::Error::is_config);
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &[&str]) -> Vec<String> {
        s.iter().map(|a| a.to_string()).collect()
    }

    #[test]
    fn override_forms() {
        let got = parse_overrides(&args(&[
            "--ga.population-size",
            "300",
            "--seed=4",
            "--resume",
            "--ks",
            "1,2",
        ]))
        .unwrap();
        let want = [
            ("ga.population-size", "300"),
            ("seed", "4"),
            ("resume", "true"),
            ("ks", "1,2"),
        ];
        let want: Vec<(String, String)> = want
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn bare_values_are_rejected() {
        let err = parse_overrides(&args(&["300"])).unwrap_err();
        assert!(err.downcast_ref::<magix_core::Error>().unwrap().is_config());
    }
}
