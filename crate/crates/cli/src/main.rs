use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nephro_xai::models::Family;
use nephro_xai::pipeline::{Pipeline, PipelineConfig, Stage, StageError};
use nephro_xai_service::{AppState, ServiceConfig};

/// Interpretable CKD pipeline: profiling, imputation, selection, training,
/// explanations and interpretability scoring.
#[derive(Parser, Debug)]
#[command(name = "nephro-xai", version)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dataset CSV (defaults to the bundled UCI table).
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed; overrides the config file and NEPHRO_XAI_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Omit timestamps so reruns are byte-identical.
    #[arg(long, global = true)]
    canonical: bool,
    /// Skip SVG charts.
    #[arg(long, global = true)]
    no_plots: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-column summary and missingness of the raw table.
    Profile,
    /// Little's MCAR test on several sample sizes.
    Mcar,
    /// Regression imputation; writes the filled CSV and the plan audit.
    Impute,
    /// Runs every selection method and the consensus.
    Select(SelectArgs),
    /// Cross-validates and saves every configured model.
    Train(TrainArgs),
    /// Local and global explanations for one row.
    Explain(RowArgs),
    /// Counterfactuals for one row.
    Counterfactual(CounterfactualArgs),
    /// Interpretability scorecard.
    Metrics(MetricsArgs),
    /// Every stage in order.
    All(AllArgs),
    /// HTTP service over a trained model.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
struct SelectArgs {
    /// Features dropped after consensus (comma separated).
    #[arg(long, value_delimiter = ',')]
    exclude: Option<Vec<String>>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Number of cross-validation folds.
    #[arg(long)]
    k: Option<usize>,
    /// Families to train (comma separated: lr,nb,lsvm,dt,rf,ada,gbm).
    #[arg(long, value_delimiter = ',')]
    model: Option<Vec<String>>,
}

#[derive(Args, Debug)]
struct RowArgs {
    /// Row index in the imputed table.
    #[arg(long)]
    row: Option<usize>,
    /// Model family or path to a model artifact.
    #[arg(long)]
    model: Option<String>,
}

#[derive(Args, Debug)]
struct CounterfactualArgs {
    #[command(flatten)]
    row: RowArgs,
    /// Number of counterfactuals.
    #[arg(long)]
    k: Option<usize>,
    /// Features that must not change (comma separated).
    #[arg(long, value_delimiter = ',')]
    immutable: Option<Vec<String>>,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    /// Score fixed sets from a TOML fixture instead of trained models.
    #[arg(long)]
    fixture: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AllArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    row: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    exclude: Option<Vec<String>>,
}

#[derive(Args, Debug)]
struct ServeArgs {
    /// Model artifact (defaults to the primary model in the output directory).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Allowed CORS origin; repeat for several.
    #[arg(long)]
    cors_origin: Vec<String>,
}

fn parse_family(s: &str) -> Result<Family, String> {
    Family::parse(s).ok_or_else(|| format!("unknown model family `{s}`"))
}

fn build_config(cli: &Cli) -> Result<PipelineConfig, String> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p).map_err(|e| e.to_string())?,
        None => {
            let mut c = PipelineConfig::default();
            c.apply_env().map_err(|e| e.to_string())?;
            c
        }
    };
    if let Some(d) = &cli.data {
        cfg.data.path = Some(d.clone());
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.output.canonical |= cli.canonical;
    if cli.no_plots {
        cfg.output.plots = false;
    }
    let apply_row = |cfg: &mut PipelineConfig, r: &RowArgs| -> Result<(), String> {
        if let Some(row) = r.row {
            cfg.explain.row = row;
        }
        if let Some(m) = &r.model {
            match Family::parse(m) {
                Some(f) => cfg.models.primary = f,
                None => cfg.models.artifact = Some(PathBuf::from(m)),
            }
        }
        Ok(())
    };
    match &cli.command {
        Command::Select(a) => {
            if let Some(e) = &a.exclude {
                cfg.selection.exclusions = e.clone();
            }
        }
        Command::Train(a) => {
            if let Some(k) = a.k {
                cfg.models.folds = k;
            }
            if let Some(m) = &a.model {
                cfg.models.families = m.iter().map(|s| parse_family(s)).collect::<Result<_, _>>()?;
            }
        }
        Command::Explain(r) => apply_row(&mut cfg, r)?,
        Command::Counterfactual(a) => {
            apply_row(&mut cfg, &a.row)?;
            if let Some(k) = a.k {
                cfg.counterfactual.k = k;
            }
            if let Some(i) = &a.immutable {
                cfg.counterfactual.immutables = i.clone();
            }
        }
        Command::Metrics(a) => {
            if let Some(f) = &a.fixture {
                cfg.metrics.fixture = Some(f.clone());
            }
        }
        Command::All(a) => {
            if let Some(k) = a.k {
                cfg.models.folds = k;
            }
            if let Some(r) = a.row {
                cfg.explain.row = r;
            }
            if let Some(e) = &a.exclude {
                cfg.selection.exclusions = e.clone();
            }
        }
        Command::Profile | Command::Mcar | Command::Impute | Command::Serve(_) => {}
    }
    Ok(cfg)
}

fn report(result: Result<Vec<PathBuf>, StageError>) -> ExitCode {
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn serve(cfg: &PipelineConfig, args: &ServeArgs) -> ExitCode {
    let path = args
        .model
        .clone()
        .or_else(|| cfg.models.artifact.clone())
        .unwrap_or_else(|| {
            cfg.output
                .dir
                .join("models")
                .join(format!("{}.json", cfg.models.primary.label().to_ascii_lowercase()))
        });
    let service_cfg = ServiceConfig {
        cors_origins: args.cors_origin.clone(),
        default_seed: cfg.seed,
        immutables: cfg.counterfactual.immutables.clone(),
        effect_features: cfg.explain.effect_features.clone(),
        ..Default::default()
    };
    let state = match AppState::load(&path, service_cfg) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e} ({})", path.display());
            return ExitCode::from(2);
        }
    };
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(4);
        }
    };
    match rt.block_on(nephro_xai_service::serve(args.addr, state)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(4)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let cfg = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Command::Serve(args) = &cli.command {
        return serve(&cfg, args);
    }
    let pipeline = match Pipeline::new(cfg) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let stage = match &cli.command {
        Command::Profile => Stage::Profile,
        Command::Mcar => Stage::Mcar,
        Command::Impute => Stage::Impute,
        Command::Select(_) => Stage::Select,
        Command::Train(_) => Stage::Train,
        Command::Explain(_) => Stage::Explain,
        Command::Counterfactual(_) => Stage::Counterfactual,
        Command::Metrics(_) => Stage::Metrics,
        Command::All(_) => return report(pipeline.run_all()),
        Command::Serve(_) => unreachable!(),
    };
    report(pipeline.run(stage))
}
