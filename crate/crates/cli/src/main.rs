use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use faithful_core::attacker::AttackStrategy;
use faithful_core::dataset::DatasetConfig;
use faithful_core::defense::DefenseMethod;
use faithful_core::harness::{
    emit_results, generate_synthetic, prepare, read_config_echo, read_curves, read_query_log, recompute_curves,
    run_prepared, set_dotted, sweep, write_curves, write_synthetic, ExperimentConfig, SyntheticSpec, CONFIG_FILE,
    CURVES_FILE, QUERIES_FILE,
};
use faithful_core::models::{gam_to_decision_set, load_model, save_model, ConversionOptions, Model};

/// Faithful explanation defense and model-extraction simulator.
#[derive(Parser)]
#[command(name = "faithful", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Override any config key, e.g. `--set defense.max_len=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Overrides {
    fn pairs(&self) -> Result<Vec<(String, String)>> {
        self.set
            .iter()
            .map(|kv| match kv.split_once('=') {
                Some((k, v)) => Ok((k.trim().to_string(), v.trim().to_string())),
                None => bail!("override {kv:?} is not KEY=VALUE"),
            })
            .collect()
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Output directory (overrides `output`).
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        defense: Option<DefenseMethod>,
        #[arg(long)]
        strategy: Option<AttackStrategy>,
        #[arg(long)]
        max_queries: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run every defense x strategy x seed combination in parallel.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "greedy,exact,exact_ra,base_rule,random,none"
        )]
        defenses: Vec<DefenseMethod>,
        #[arg(long, value_delimiter = ',', default_value = "random,committee,perturbation")]
        strategies: Vec<AttackStrategy>,
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long)]
        output: PathBuf,
        /// Worker threads (defaults to the number of cores).
        #[arg(long)]
        jobs: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Convert a GAM model file into an equivalent decision set.
    ConvertGam {
        #[arg(long)]
        gam: PathBuf,
        /// Dataset config (TOML) holding the feature schema.
        #[arg(long)]
        schema: PathBuf,
        /// Decision threshold on the score; defaults to the file's.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        no_early_stop: bool,
        #[arg(long, default_value_t = ConversionOptions::default().leaf_cap)]
        leaf_cap: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Generate a synthetic dataset with a planted decision set.
    Synth {
        /// Optional TOML generator spec (keys of `[data.synthetic]`).
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Recompute metric curves from a run directory's config and query log.
    Metrics {
        #[arg(long)]
        run: PathBuf,
        /// Where to write the recomputed curves (stdout when omitted).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            output,
            defense,
            strategy,
            max_queries,
            overrides,
        } => {
            let mut pairs = overrides.pairs()?;
            pairs.push(("seed".into(), seed.to_string()));
            if let Some(d) = defense {
                pairs.push(("defense.method".into(), format!("\"{d}\"")));
            }
            if let Some(s) = strategy {
                pairs.push(("attacker.strategy".into(), format!("\"{s}\"")));
            }
            if let Some(m) = max_queries {
                pairs.push(("max_queries".into(), m.to_string()));
            }
            let mut cfg =
                ExperimentConfig::load(&config, &pairs).with_context(|| format!("loading {}", config.display()))?;
            if let Some(o) = output {
                cfg.output = Some(o);
            }
            let dir = cfg
                .output
                .clone()
                .context("no output directory: set `output` or pass --output")?;
            let prepared = prepare(&cfg)?;
            log::info!(
                "train {} rows, test {} rows, {} conditions, {} rules",
                prepared.train.n(),
                prepared.test.n(),
                prepared.train.m(),
                prepared.model.rules().len()
            );
            let run = run_prepared(&cfg, &prepared)?;
            emit_results(&run, &dir)?;
            println!("{}", serde_json::to_string_pretty(&run.summary)?);
        }
        Command::Sweep {
            config,
            defenses,
            strategies,
            seeds,
            output,
            jobs,
            overrides,
        } => {
            let cfg = ExperimentConfig::load(&config, &overrides.pairs()?)?;
            if let Some(n) = jobs {
                rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
            }
            let rows = sweep(&cfg, &defenses, &strategies, &seeds, Some(&output))?;
            let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
            println!("strategy\tdefense\tseed\tcoverage_test\tagreement\tfpr");
            for r in rows {
                println!(
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    r.strategy,
                    r.defense,
                    r.seed,
                    fmt(r.final_coverage_test),
                    fmt(r.final_agreement),
                    fmt(r.explanation_fpr)
                );
            }
        }
        Command::ConvertGam {
            gam,
            schema,
            threshold,
            no_early_stop,
            leaf_cap,
            output,
        } => {
            let schema = DatasetConfig::load(&schema)?.schema()?;
            let Model::Gam(g) = load_model(&gam, &schema)? else {
                bail!("{} is not a GAM model file", gam.display());
            };
            let tau = threshold.unwrap_or(g.threshold);
            let opts = ConversionOptions {
                early_stop: !no_early_stop,
                leaf_cap,
            };
            let f = gam_to_decision_set(&g, tau, opts)?;
            log::info!("{} rules over {} conditions", f.rules().len(), f.vocabulary().len());
            save_model(&Model::DecisionSet(f), &schema, &output)?;
        }
        Command::Synth {
            spec,
            seed,
            output,
            overrides,
        } => {
            let mut table: toml::Table = match &spec {
                Some(p) => std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))?
                    .parse()?,
                None => toml::Table::new(),
            };
            for (k, v) in overrides.pairs()? {
                set_dotted(&mut table, &k, &v)?;
            }
            let spec: SyntheticSpec = table.try_into()?;
            let s = generate_synthetic(&spec, seed)?;
            for p in write_synthetic(&s, &output)? {
                println!("{}", p.display());
            }
        }
        Command::Metrics { run, output } => metrics(&run, output.as_deref())?,
    }
    Ok(())
}

fn metrics(run: &Path, output: Option<&Path>) -> Result<()> {
    let cfg = read_config_echo(&run.join(CONFIG_FILE))?;
    let queries = read_query_log(&run.join(QUERIES_FILE))?;
    let prepared = prepare(&cfg)?;
    let curves = recompute_curves(&cfg, &prepared, &queries)?;
    match output {
        Some(p) => write_curves(p, &curves)?,
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            for c in &curves {
                w.serialize(c)?;
            }
            w.flush()?;
        }
    }
    let saved = run.join(CURVES_FILE);
    if saved.exists() {
        if read_curves(&saved)? == curves {
            log::info!("recomputed curves match {}", saved.display());
        } else {
            log::warn!("recomputed curves differ from {}", saved.display());
        }
    }
    Ok(())
}
