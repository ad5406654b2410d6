use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fednas::experiment::{compare_runs, run_experiment, schema_text, ExperimentConfig, RunMetrics};
use fednas::supernet::ChildDescription;
use fednas::Error;

#[derive(Parser)]
#[command(name = "fednas", version, about = "Federated single-path architecture search simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Dfnas,
    Baseline,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file.
    Run {
        config: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the run mode; baseline needs federation.baseline_path.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Tabulate test accuracy across metrics CSVs.
    Compare {
        #[arg(required = true, num_args = 2..)]
        csvs: Vec<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a child description file.
    InspectChild { file: PathBuf },
    /// List every config key with its default.
    Schema,
}

fn run(cli: Cli) -> fednas::Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            mode,
        } => {
            let mut text = fs::read_to_string(&config).map_err(|e| Error::Io {
                path: config.clone(),
                source: e,
            })?;
            // overrides go through the parser so they are validated like the file
            let mut set = |key: &str, value: String| {
                text = text
                    .lines()
                    .filter(|l| l.split_once('=').is_none_or(|(k, _)| k.trim() != key))
                    .map(|l| format!("{l}\n"))
                    .collect();
                text.push_str(&format!("{key} = {value}\n"));
            };
            if let Some(s) = seed {
                set("seed", s.to_string());
            }
            if let Some(o) = out {
                set("output.dir", o.display().to_string());
            }
            match mode {
                Some(ModeArg::Dfnas) => set("federation.mode", "dfnas".into()),
                Some(ModeArg::Baseline) => set("federation.mode", "baseline".into()),
                None => {}
            }
            let cfg = ExperimentConfig::parse(&text)?;
            for outcome in run_experiment(&cfg)? {
                println!("{}", outcome.summary_line(&cfg.scenario, &cfg.federation.mode));
            }
            Ok(())
        }
        Command::Compare { csvs, out } => {
            let runs = csvs.iter().map(RunMetrics::load).collect::<fednas::Result<Vec<_>>>()?;
            let cmp = compare_runs(&runs)?;
            print!("{}", cmp.text);
            if let Some(path) = out {
                fs::write(&path, &cmp.csv).map_err(|e| Error::Io { path, source: e })?;
            }
            Ok(())
        }
        Command::InspectChild { file } => {
            let text = fs::read_to_string(&file).map_err(|e| Error::Io {
                path: file.clone(),
                source: e,
            })?;
            let d = ChildDescription::parse(&text)?;
            let shape: Vec<String> = d.input_shape.iter().map(|x| x.to_string()).collect();
            println!(
                "input {}  classes {}  stem width {}  stem kernel {}",
                shape.join("x"),
                d.num_classes,
                d.channels,
                d.stem_kernel
            );
            for (e, edge) in d.edges.iter().enumerate() {
                let alpha: Vec<String> = edge.alpha.iter().map(|a| format!("{a:+.4}")).collect();
                println!(
                    "edge {e:>2}: {:<12} (candidate {}, {} params)  alpha [{}]",
                    edge.kind.to_string(),
                    edge.index,
                    edge.params,
                    alpha.join(" ")
                );
            }
            println!("total parameters: {}", d.total_params);
            Ok(())
        }
        Command::Schema => {
            print!("{}", schema_text());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Config(_) | Error::Usage(_)) {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
