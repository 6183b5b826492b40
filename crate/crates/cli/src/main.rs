use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use likecard::estimator::timed_build;
use likecard::eval::evaluate;
use likecard::groundtruth::read_dataset;
use likecard::{gen_workload, Config, EstimatorModel, PatternCatalog, PatternKind, Query, Workload};

#[derive(Parser)]
#[command(name = "likecard", version, about = "Cardinality estimation for LIKE predicates with a bounded Q-error")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a model from a dataset (one string per line).
    Build {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        pattern: PatternKind,
        #[arg(long, value_parser = parse_eb)]
        eb: f64,
        #[arg(long, default_value_t = 10)]
        max_len: usize,
        /// Target probability that an empty-answer query is estimated in bucket 1.
        #[arg(long, value_parser = parse_p_n)]
        pn: Option<f64>,
        /// Highest bucket kept in filters; higher buckets go to the tree index.
        #[arg(long)]
        tree_threshold: Option<u32>,
        /// Use all of bucket 1 as negatives instead of its prefix frontier.
        #[arg(long)]
        no_frontier: bool,
        /// Also build the substring model needed for long prefix/suffix queries.
        #[arg(long)]
        long_queries: bool,
        /// Print the full per-bucket plan.
        #[arg(long)]
        explain: bool,
        #[arg(long)]
        seed: u64,
        #[arg(short = 'o')]
        output: PathBuf,
    },
    /// Estimate one query written as S%, %S or %S%.
    Estimate {
        #[arg(short = 'm')]
        model: PathBuf,
        #[arg(allow_hyphen_values = true)]
        query: String,
        /// Print the estimate rounded half up to an integer.
        #[arg(long)]
        round: bool,
    },
    /// Report accuracy of a model over a workload file.
    Eval {
        #[arg(short = 'm')]
        model: PathBuf,
        #[arg(short = 'w')]
        workload: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Generate a labelled workload of catalog and empty-answer queries.
    Gen {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        pattern: PatternKind,
        #[arg(long, default_value_t = 10)]
        max_len: usize,
        #[arg(long)]
        pos: usize,
        #[arg(long)]
        neg: usize,
        #[arg(long, default_value_t = 3)]
        max_extra: usize,
        #[arg(long)]
        seed: u64,
        #[arg(short = 'o')]
        output: PathBuf,
    },
}

fn parse_eb(s: &str) -> Result<f64, String> {
    let eb: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if eb.is_finite() && eb > 1.0 {
        Ok(eb)
    } else {
        Err("must be greater than 1".into())
    }
}

fn parse_p_n(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        Err("must be strictly between 0 and 1".into())
    }
}

fn is_usage_error(err: &anyhow::Error) -> bool {
    use likecard::Error as E;
    matches!(
        err.downcast_ref::<E>(),
        Some(E::InvalidParameter(_) | E::MalformedPattern(_) | E::WorkloadFormat { .. })
    )
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Build {
            data,
            pattern,
            eb,
            max_len,
            pn,
            tree_threshold,
            no_frontier,
            long_queries,
            explain,
            seed,
            output,
        } => {
            let mut config = Config::new(eb, max_len).with_frontier(!no_frontier).with_long_queries(long_queries);
            if let Some(p) = pn {
                config = config.with_p_n(p);
            }
            if let Some(t) = tree_threshold {
                config = config.with_tree_threshold(t);
            }
            config.validate()?;
            let rows = read_dataset(&data).with_context(|| format!("reading {}", data.display()))?;
            let (model, secs) = timed_build(&rows, pattern, &config, seed)?;
            model.save(&output).with_context(|| format!("writing {}", output.display()))?;
            println!(
                "built {} model: {} rows, {} buckets, tree threshold {}, {} bytes, {:.2} s",
                pattern,
                rows.len(),
                model.scheme().len(),
                model.tree_threshold(),
                model.size_bytes(),
                secs
            );
            if let Some(plan) = model.plan() {
                if explain {
                    print!("{}", plan.explain());
                } else if let Some(rate) = plan.walk_rate {
                    println!("empty-answer bucket-1 rate guaranteed: {rate:.6}");
                }
            }
        }
        Command::Estimate { model, query, round } => {
            let query = Query::parse_like(&query)?;
            let model = EstimatorModel::load(&model).with_context(|| format!("loading {}", model.display()))?;
            let est = model.estimate(&query)?;
            if round {
                println!("{}", (est + 0.5).floor() as u64);
            } else {
                println!("{est:.2}");
            }
        }
        Command::Eval { model, workload, json } => {
            let model = EstimatorModel::load(&model).with_context(|| format!("loading {}", model.display()))?;
            let workload = Workload::read(&workload)?;
            let report = evaluate(&model, &workload, None)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.to_text());
            }
        }
        Command::Gen { data, pattern, max_len, pos, neg, max_extra, seed, output } => {
            let rows = read_dataset(&data).with_context(|| format!("reading {}", data.display()))?;
            let catalog = PatternCatalog::enumerate(&rows, pattern, max_len)?;
            let workload = gen_workload(&catalog, &rows, pos, neg, max_extra, seed)?;
            workload.write(&output).with_context(|| format!("writing {}", output.display()))?;
            println!("wrote {} queries to {}", workload.len(), output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if is_usage_error(&err) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
