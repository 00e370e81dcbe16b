use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use geosom::pipeline::{self, KernelChoice, Phase, PipelineConfig, PipelineError};

#[derive(Parser)]
#[command(name = "geosom", version, about = "Geodemographic clustering with self-organizing maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every phase and write the manifest.
    Run(Overrides),
    /// Census counts -> standardized percentage features.
    Ingest(Overrides),
    /// Kernel PCA, Hopkins statistics and feature selection.
    Reduce(Overrides),
    /// Train the self-organizing map on the reduced matrix.
    Train(Overrides),
    /// Scan cluster counts and assign regions.
    Validate(Overrides),
    /// Per-cluster case totals.
    Report(Overrides),
    /// GeoJSON and SVG choropleth.
    Render(Overrides),
}

/// Config file plus flags that override its fields.
#[derive(Args)]
struct Overrides {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    id_column: Option<String>,
    #[arg(long)]
    name_column: Option<String>,
    #[arg(long)]
    id_property: Option<String>,
    #[arg(long, value_parser = parse_kernel)]
    kernel: Option<KernelChoice>,
    /// Gaussian kernel bandwidth.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    components: Option<usize>,
    #[arg(long)]
    feature_count: Option<usize>,
    #[arg(long)]
    hopkins_fraction: Option<f64>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long)]
    sigma0: Option<f64>,
    #[arg(long)]
    theta0: Option<f64>,
    #[arg(long)]
    time_constant: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    /// Append population and case counts to the clustering features.
    #[arg(long, overrides_with = "no_outcome_features")]
    outcome_features: bool,
    #[arg(long)]
    no_outcome_features: bool,
}

fn parse_kernel(s: &str) -> Result<KernelChoice, String> {
    match s {
        "gaussian" => Ok(KernelChoice::Gaussian),
        "linear" => Ok(KernelChoice::Linear),
        other => Err(format!("unknown kernel {other:?} (gaussian or linear)")),
    }
}

impl Overrides {
    fn apply(&self) -> Result<PipelineConfig, PipelineError> {
        let mut c = PipelineConfig::load(&self.config)?;
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value.clone() {
                    $field = v;
                }
            };
        }
        set!(c.paths.output_dir, self.output_dir);
        set!(c.seed, self.seed);
        set!(c.census.id_column, self.id_column);
        set!(c.census.name_column, self.name_column);
        set!(c.geometry_id_property, self.id_property);
        set!(c.dimred.kernel, self.kernel);
        set!(c.dimred.components, self.components);
        set!(c.dimred.feature_count, self.feature_count);
        set!(c.dimred.hopkins_fraction, self.hopkins_fraction);
        set!(c.som.rows, self.rows);
        set!(c.som.cols, self.cols);
        set!(c.som.theta0, self.theta0);
        set!(c.som.iterations, self.iterations);
        set!(c.validity.k_min, self.k_min);
        set!(c.validity.k_max, self.k_max);
        if self.sigma.is_some() {
            c.dimred.sigma = self.sigma;
        }
        if self.sigma0.is_some() {
            c.som.sigma0 = self.sigma0;
        }
        if self.time_constant.is_some() {
            c.som.time_constant = self.time_constant;
        }
        if self.outcome_features {
            c.include_outcome_features = true;
        }
        if self.no_outcome_features {
            c.include_outcome_features = false;
        }
        Ok(c)
    }
}

fn execute(command: Command) -> Result<(), PipelineError> {
    let (overrides, phase) = match command {
        Command::Run(o) => (o, None),
        Command::Ingest(o) => (o, Some(Phase::Ingest)),
        Command::Reduce(o) => (o, Some(Phase::Reduce)),
        Command::Train(o) => (o, Some(Phase::Train)),
        Command::Validate(o) => (o, Some(Phase::Validate)),
        Command::Report(o) => (o, Some(Phase::Report)),
        Command::Render(o) => (o, Some(Phase::Render)),
    };
    let cfg = overrides.apply()?;
    match phase {
        None => {
            let manifest = pipeline::run_pipeline(&cfg)?;
            println!(
                "wrote {} artifacts and {} to {}",
                manifest.artifacts.len(),
                pipeline::files::MANIFEST,
                cfg.paths.output_dir.display()
            );
        }
        Some(p) => {
            cfg.validate()?;
            pipeline::run_phase(&cfg, p)?;
            println!("{p}: done");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.class().exit_code() as u8)
        }
    }
}
