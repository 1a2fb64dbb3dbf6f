//! Command-line front door: estimate densities from CSV point files, build
//! sub-level trees, detect communities in edge lists, and generate the
//! benchmark datasets. Every run writes a manifest next to its outputs and
//! all artifacts are byte-reproducible.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use denspart::datagen::{benchmark_mixture, benchmark_network, rotate_translate, sample_mixture};
use denspart::estimator::{estimate_density, EstimatorConfig, PiecewiseDensity};
use denspart::geometry::PointSet;
use denspart::regiongraph::build_region_graph;
use denspart::sltree::{
    build_sublevel_tree, default_min_persistence, export_dot, extract_branches, BranchSelect,
};
use denspart::spectral::{detect_communities, CommunityConfig, Network};

use denspart_cli::ingest::{parse_edge_list, parse_points_csv};
use denspart_cli::jsonio::{communities_json, partition_json, read_partition, sltree_json, Json};

/// Fraction added around an input bounding box so every point lands in the
/// half-open domain.
const DOMAIN_PAD: f64 = 0.01;

#[derive(Parser)]
#[command(
    name = "denspart",
    version,
    about = "Piecewise-constant density estimation with sub-level trees",
    max_term_width = 100
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a density from a CSV of points and write partition.json
    Estimate(EstimateArgs),
    /// Build the sub-level tree of an estimate (from partition.json or CSV)
    Sltree(SltreeArgs),
    /// Detect communities in an edge list via its spectral embedding
    Communities(CommunitiesArgs),
    /// Generate the benchmark mixture sample or the benchmark network
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct EstimatorFlags {
    /// Bins per dimension for the uniformity tests and the cut grid
    #[arg(long, default_value_t = 3)]
    bins: usize,
    /// Pseudo-count added to each child when a region's mass is split
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Significance of each per-dimension chi-square test
    #[arg(long = "chi-sig", default_value_t = 1e-3)]
    chi_sig: f64,
    /// Significance of the two-sided discrepancy test
    #[arg(long = "z-sig", default_value_t = 1e-3)]
    z_sig: f64,
    /// Max points fed to the discrepancy test; 0 disables subsampling
    #[arg(long, default_value_t = 500)]
    subsample: usize,
    /// Maximum leaf depth (the root sits at depth 0)
    #[arg(long = "max-depth", default_value_t = 30)]
    max_depth: usize,
    /// Seed for the per-region subsample draws
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl EstimatorFlags {
    fn to_config(&self) -> EstimatorConfig {
        EstimatorConfig {
            bins: self.bins,
            alpha: self.alpha,
            chi_significance: self.chi_sig,
            z_significance: self.z_sig,
            subsample: if self.subsample == 0 { None } else { Some(self.subsample) },
            max_depth: self.max_depth,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    /// CSV of n rows by d numeric columns; a header row is auto-detected
    input: PathBuf,
    #[command(flatten)]
    est: EstimatorFlags,
    /// Directory the artifacts are written into
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SltreeArgs {
    /// partition.json from `estimate`, or a CSV to estimate inline
    input: PathBuf,
    /// Estimator flags, used only when the input is a CSV
    #[command(flatten)]
    est: EstimatorFlags,
    /// Merge the deepest L levels of the partition before building the tree
    #[arg(long)]
    trim: Option<usize>,
    /// Branch count: an integer, or `auto` to count persistent modes
    #[arg(long, default_value = "auto", value_parser = parse_branch_select)]
    branches: BranchSelect,
    /// Persistence threshold for `auto`; defaults to 5% of the peak density
    #[arg(long = "min-persistence")]
    min_persistence: Option<f64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct CommunitiesArgs {
    /// Edge list, one `u v` pair per line; `# id name` lines attach labels
    input: PathBuf,
    #[command(flatten)]
    est: EstimatorFlags,
    /// Embedding dimension (number of Laplacian eigenvectors kept)
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Drop the constant top eigenvector before taking k
    #[arg(long = "skip-first", default_value_t = true, action = clap::ArgAction::Set)]
    skip_first: bool,
    /// Treat vertex ids in the input as 1-based
    #[arg(long = "one-based")]
    one_based: bool,
    /// Branch count: an integer, or `auto` to count persistent modes
    #[arg(long, default_value = "auto", value_parser = parse_branch_select)]
    branches: BranchSelect,
    /// Persistence threshold for `auto`; defaults to 5% of the peak density
    #[arg(long = "min-persistence")]
    min_persistence: Option<f64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SimKind {
    Mixture,
    Network,
}

#[derive(Args)]
struct SimulateArgs {
    /// What to generate
    #[arg(long, value_enum)]
    kind: SimKind,
    /// Sample size (mixture only; the network is fixed at 1,000 vertices)
    #[arg(long, default_value_t = 50_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Apply a seeded random rotation and translation (mixture only)
    #[arg(long)]
    rotate: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn parse_branch_select(s: &str) -> Result<BranchSelect, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(BranchSelect::Auto);
    }
    match s.parse::<usize>() {
        Ok(k) if k >= 1 => Ok(BranchSelect::Count(k)),
        _ => Err(format!("expected a positive integer or `auto`, got `{s}`")),
    }
}

/// Failure classes, one per exit code (usage errors from flag parsing are
/// handled by clap and also exit with 2).
#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numerical(m) => m,
        }
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn numerical_err(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

type Run = Result<(), CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(args) => cmd_estimate(&args),
        Command::Sltree(args) => cmd_sltree(&args),
        Command::Communities(args) => cmd_communities(&args),
        Command::Simulate(args) => cmd_simulate(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

/// Records what a run did so it can be replayed: the command, its inputs
/// and flags, and the artifacts it wrote.
fn write_manifest(
    dir: &Path,
    command: &str,
    inputs: &[&Path],
    config: Json,
    outputs: &[&str],
    seed: u64,
) -> Run {
    let manifest = Json::Object(vec![
        ("command".into(), Json::Str(command.into())),
        (
            "inputs".into(),
            Json::Array(
                inputs.iter().map(|p| Json::Str(p.display().to_string())).collect(),
            ),
        ),
        ("config".into(), config),
        (
            "outputs".into(),
            Json::Array(outputs.iter().map(|&o| Json::Str(o.into())).collect()),
        ),
        ("seed".into(), Json::Int(seed as i64)),
    ]);
    write_artifact(dir, "manifest.json", &manifest.render())?;
    Ok(())
}

fn estimator_config_json(config: &EstimatorConfig) -> Json {
    Json::Object(vec![
        ("bins".into(), Json::uint(config.bins)),
        ("alpha".into(), Json::Float(config.alpha)),
        ("chi_significance".into(), Json::Float(config.chi_significance)),
        ("z_significance".into(), Json::Float(config.z_significance)),
        ("subsample".into(), config.subsample.map_or(Json::Null, Json::uint)),
        ("max_depth".into(), Json::uint(config.max_depth)),
        ("seed".into(), Json::Int(config.seed as i64)),
    ])
}

fn branch_select_json(b: BranchSelect) -> Json {
    match b {
        BranchSelect::Auto => Json::Str("auto".into()),
        BranchSelect::Count(k) => Json::uint(k),
    }
}

fn points_from_rows(rows: &[Vec<f64>]) -> Result<PointSet, CliError> {
    PointSet::with_padded_bounds(rows, DOMAIN_PAD).map_err(data_err)
}

fn estimate_from_csv(path: &Path, config: &EstimatorConfig) -> Result<PiecewiseDensity, CliError> {
    let text = read_to_string(path)?;
    let rows = parse_points_csv(&text).map_err(data_err)?;
    let points = points_from_rows(&rows)?;
    estimate_density(&points, config).map_err(numerical_err)
}

fn cmd_estimate(args: &EstimateArgs) -> Run {
    let config = args.est.to_config();
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let pd = estimate_from_csv(&args.input, &config)?;
    write_artifact(&args.out, "partition.json", &partition_json(&pd).render())?;
    write_manifest(
        &args.out,
        "estimate",
        &[&args.input],
        estimator_config_json(&config),
        &["partition.json"],
        config.seed,
    )
}

fn cmd_sltree(args: &SltreeArgs) -> Run {
    let config = args.est.to_config();
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(p) = args.min_persistence {
        if !(p >= 0.0 && p.is_finite()) {
            return Err(CliError::Usage(format!("--min-persistence must be finite and >= 0, got {p}")));
        }
    }

    let text = read_to_string(&args.input)?;
    let pd = if text.trim_start().starts_with('{') {
        read_partition(&text).map_err(data_err)?
    } else {
        let rows = parse_points_csv(&text).map_err(data_err)?;
        let points = points_from_rows(&rows)?;
        estimate_density(&points, &config).map_err(numerical_err)?
    };
    let pd = match args.trim {
        Some(levels) => pd.trim(levels).map_err(data_err)?,
        None => pd,
    };

    let graph = build_region_graph(&pd).map_err(numerical_err)?;
    let tree = build_sublevel_tree(&graph);
    let min_persistence =
        args.min_persistence.unwrap_or_else(|| default_min_persistence(&graph));
    let decomposition = extract_branches(&tree, &graph, args.branches, min_persistence)
        .map_err(data_err)?;

    write_artifact(
        &args.out,
        "sltree.json",
        &sltree_json(&tree, &decomposition, args.trim).render(),
    )?;
    write_artifact(&args.out, "sltree.dot", &export_dot(&tree))?;
    let flags = Json::Object(vec![
        ("estimator".into(), estimator_config_json(&config)),
        ("trim".into(), args.trim.map_or(Json::Null, Json::uint)),
        ("branches".into(), branch_select_json(args.branches)),
        (
            "min_persistence".into(),
            args.min_persistence.map_or(Json::Null, Json::Float),
        ),
    ]);
    write_manifest(
        &args.out,
        "sltree",
        &[&args.input],
        flags,
        &["sltree.json", "sltree.dot"],
        config.seed,
    )
}

fn cmd_communities(args: &CommunitiesArgs) -> Run {
    let config = CommunityConfig {
        eigenvectors: args.k,
        skip_first: args.skip_first,
        estimator: args.est.to_config(),
        branches: args.branches,
        min_persistence: args.min_persistence,
    };
    config.estimator.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if args.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }

    let text = read_to_string(&args.input)?;
    let parsed = parse_edge_list(&text, args.one_based).map_err(data_err)?;
    if parsed.self_loops_dropped > 0 {
        eprintln!("warning: dropped {} self-loop(s)", parsed.self_loops_dropped);
    }
    let net = Network::new(parsed.vertex_count, parsed.edges.iter().copied(), parsed.labels)
        .map_err(data_err)?;
    let result = detect_communities(&net, &config).map_err(numerical_err)?;

    write_artifact(&args.out, "communities.json", &communities_json(&result, &net).render())?;
    write_artifact(&args.out, "sltree.dot", &export_dot(&result.sublevel_tree))?;
    let flags = Json::Object(vec![
        ("estimator".into(), estimator_config_json(&config.estimator)),
        ("k".into(), Json::uint(args.k)),
        ("skip_first".into(), Json::Bool(args.skip_first)),
        ("one_based".into(), Json::Bool(args.one_based)),
        ("branches".into(), branch_select_json(args.branches)),
        (
            "min_persistence".into(),
            args.min_persistence.map_or(Json::Null, Json::Float),
        ),
    ]);
    write_manifest(
        &args.out,
        "communities",
        &[&args.input],
        flags,
        &["communities.json", "sltree.dot"],
        config.estimator.seed,
    )
}

fn render_points_csv(points: &PointSet) -> String {
    let mut out = String::new();
    for p in points.iter() {
        for (j, x) in p.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{x:.16e}");
        }
        out.push('\n');
    }
    out
}

fn render_labels(labels: &[usize]) -> String {
    let mut out = String::new();
    for &l in labels {
        let _ = writeln!(out, "{l}");
    }
    out
}

fn cmd_simulate(args: &SimulateArgs) -> Run {
    let outputs: Vec<&str> = match args.kind {
        SimKind::Mixture => {
            let spec = benchmark_mixture();
            let sample = sample_mixture(&spec, args.n, args.seed).map_err(data_err)?;
            let points = if args.rotate {
                rotate_translate(&sample.points, args.seed).map_err(numerical_err)?
            } else {
                sample.points
            };
            write_artifact(&args.out, "points.csv", &render_points_csv(&points))?;
            write_artifact(&args.out, "labels.csv", &render_labels(&sample.labels))?;
            vec!["points.csv", "labels.csv"]
        }
        SimKind::Network => {
            if args.rotate {
                eprintln!("warning: --rotate only applies to the mixture; ignored");
            }
            let (net, planted) = benchmark_network(args.seed);
            let mut edges = String::new();
            for &(u, v) in net.edges() {
                let _ = writeln!(edges, "{u} {v}");
            }
            write_artifact(&args.out, "edges.txt", &edges)?;
            write_artifact(&args.out, "labels.txt", &render_labels(&planted))?;
            vec!["edges.txt", "labels.txt"]
        }
    };
    let flags = Json::Object(vec![
        (
            "kind".into(),
            Json::Str(match args.kind {
                SimKind::Mixture => "mixture".into(),
                SimKind::Network => "network".into(),
            }),
        ),
        ("n".into(), Json::uint(args.n)),
        ("rotate".into(), Json::Bool(args.rotate)),
    ]);
    write_manifest(&args.out, "simulate", &[], flags, &outputs, args.seed)
}
