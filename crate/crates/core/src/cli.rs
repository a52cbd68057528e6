//! Command-line front end. Exit codes: 0 success, 2 malformed input or I/O
//! failure, 3 invalid configuration or out-of-range request, 4 numerical failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fit::{resolve_prior, run_fit, Algorithm, FitConfig, FitResult};
use crate::io::{self as fio, load_dataset};
use crate::models::{default_prior, AnyModel, ModelKind, Overrides};
use crate::optim::{random_partition, swap_epoch, GaParams, SearchState};
use crate::sim::{rgmm, rlca, rsbm, rsbm_sparse, GmmSpec, SbmSpec, SimSpec};

#[derive(Debug, Parser)]
#[command(name = "iclust", version, about = "Clustering by exact integrated classification likelihood")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model and write the result as JSON.
    Fit(FitArgs),
    /// Labels of the hierarchy level with K clusters.
    Cut(CutArgs),
    /// MAP parameter estimates of a fit, or of one view of a combined fit.
    Coef(CoefArgs),
    /// Draw a dataset and its true labels from a JSON recipe.
    Simulate(SimulateArgs),
    /// Time one swap pass on generated instances of growing size.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Dataset file: CSV table, edge list, Matrix Market, or JSON manifest.
    pub input: PathBuf,
    /// Model kind; inferred from the data when absent.
    #[arg(long)]
    pub model: Option<ModelKind>,
    #[arg(long, default_value = "hybrid")]
    pub alg: Algorithm,
    /// Dirichlet concentration of the cluster proportions.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Initial number of clusters.
    #[arg(long = "K", default_value_t = 20)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "ICL_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// Hyperparameter override `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, default_value_t = 20)]
    pub pop_size: usize,
    #[arg(long, default_value_t = 10)]
    pub nb_max_gen: usize,
    #[arg(long, default_value_t = 0.25)]
    pub prob_mutation: f64,
    #[arg(long, default_value_t = 100)]
    pub k_max: usize,
    /// Chains for the multistart algorithm.
    #[arg(long, default_value_t = 10)]
    pub nb_start: usize,
    /// Result file; the JSON goes to standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the dendrogram as Newick.
    #[arg(long)]
    pub newick: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CutArgs {
    /// Fit result JSON.
    pub result: PathBuf,
    #[arg(long = "K")]
    pub k: usize,
    /// Labels file, one label per line; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CoefArgs {
    pub result: PathBuf,
    /// View of a combined fit.
    #[arg(long)]
    pub view: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON recipe tagged by `model`: sbm, gmm or lca.
    pub spec: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output prefix; writes the data file and `<prefix>.labels.txt`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// `sbm` (sizes are edge counts) or `diag_gmm` (sizes are object counts).
    #[arg(long, default_value = "sbm")]
    pub model: ModelKind,
    #[arg(long, value_delimiter = ',', default_value = "50000,100000,200000,400000")]
    pub sizes: Vec<usize>,
    #[arg(long = "K", default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Timed passes per instance; the fastest is reported.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// CSV file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Data(_) | Error::Io(_) | Error::Json(_) => 2,
        Error::Numerical { .. } => 4,
        Error::Config(_)
        | Error::Domain(_)
        | Error::LengthMismatch { .. }
        | Error::InvalidCluster { .. }
        | Error::InvalidObject { .. } => 3,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn read_result(path: &Path) -> Result<FitResult> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    FitResult::from_json(&text)
}

/// Runs `f` on a dedicated pool of `threads` workers; 0 means one per core.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    pool.install(f)
}

pub fn cmd_fit(args: &FitArgs) -> Result<FitResult> {
    let loaded = load_dataset(&args.input, args.model)?;
    let prior = resolve_prior(&loaded, &Overrides::parse(&args.set)?)?;
    let config = FitConfig {
        algorithm: args.alg,
        alpha: args.alpha,
        ga: GaParams {
            pop_size: args.pop_size,
            nb_max_gen: args.nb_max_gen,
            prob_mutation: args.prob_mutation,
            k_max: args.k_max,
            k_init: args.k,
            seed: args.seed,
        },
        nb_start: args.nb_start,
    };
    let result = with_threads(args.threads, || run_fit(&loaded.dataset, prior, &config))?;
    let json = result.to_json()?;
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            writeln!(w, "{json}")?;
            w.flush()?;
            let mut sizes = vec![0usize; result.k];
            for &l in &result.labels {
                sizes[l] += 1;
            }
            println!(
                "model={} alg={} n={} K={} icl={} (obs {}, partition {})",
                result.model, result.config.algorithm, result.n, result.k, result.icl.total, result.icl.obs, result.icl.partition
            );
            println!("sizes={sizes:?}");
        }
        None => println!("{json}"),
    }
    if let Some(path) = &args.newick {
        let mut w = create(path)?;
        writeln!(w, "{}", result.hierarchy.newick())?;
        w.flush()?;
    }
    Ok(result)
}

pub fn cmd_cut(args: &CutArgs) -> Result<Vec<usize>> {
    let labels = read_result(&args.result)?.cut(args.k)?;
    match &args.out {
        Some(path) => fio::write_labels(create(path)?, &labels)?,
        None => fio::write_labels(io::stdout().lock(), &labels)?,
    }
    Ok(labels)
}

pub fn cmd_coef(args: &CoefArgs) -> Result<()> {
    let params = read_result(&args.result)?.coef(args.view.as_deref())?;
    let json = serde_json::to_string_pretty(&params)?;
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            writeln!(w, "{json}")?;
            w.flush()?;
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Returns the data and label paths written.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<(PathBuf, PathBuf)> {
    let text = std::fs::read_to_string(&args.spec)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", args.spec.display()))))?;
    let spec: SimSpec = serde_json::from_str(&text).map_err(|e| Error::config(format!("simulation recipe: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (data_path, labels) = match &spec {
        SimSpec::Sbm(s) => {
            let (g, z) = rsbm(s, &mut rng)?;
            let p = suffixed(&args.out, ".txt");
            fio::write_edge_list(create(&p)?, &g)?;
            (p, z)
        }
        SimSpec::Gmm(s) => {
            let (x, z) = rgmm(s, &mut rng)?;
            let p = suffixed(&args.out, ".csv");
            fio::write_continuous_csv(create(&p)?, &x)?;
            (p, z)
        }
        SimSpec::Lca(s) => {
            let (x, z) = rlca(s, &mut rng)?;
            let p = suffixed(&args.out, ".csv");
            fio::write_categorical_csv(create(&p)?, &x)?;
            (p, z)
        }
    };
    let labels_path = suffixed(&args.out, ".labels.txt");
    fio::write_labels(create(&labels_path)?, &labels)?;
    println!("{}\n{}", data_path.display(), labels_path.display());
    Ok((data_path, labels_path))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub edges_or_cells: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub seconds: f64,
}

/// Average degree of the generated graphs; node count grows with edges.
const BENCH_DEGREE: f64 = 50.0;

/// Four equiprobable clusters, between-cluster rate a tenth of the
/// within-cluster rate, sized to about `edges` edges.
fn bench_graph(edges: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let n = ((2.0 * edges as f64 / BENCH_DEGREE).round() as usize).max(8);
    let nf = n as f64;
    let within = (8.0 * edges as f64 / (1.3 * nf * nf)).min(1.0);
    let theta = (0..4)
        .map(|a| (0..4).map(|b| if a == b { within } else { within / 10.0 }).collect())
        .collect();
    let spec = SbmSpec {
        n,
        pi: vec![0.25; 4],
        theta,
        directed: false,
    };
    Ok(Dataset::Graph(rsbm_sparse(&spec, rng)?.0))
}

/// Three well-separated components in dimension 10.
fn bench_points(n: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let p = 10;
    let eye: Vec<Vec<f64>> = (0..p).map(|a| (0..p).map(|b| f64::from(u8::from(a == b))).collect()).collect();
    let spec = GmmSpec {
        n,
        pi: vec![1.0 / 3.0; 3],
        means: (0..3).map(|c| vec![3.0 * c as f64; p]).collect(),
        covariances: vec![eye; 3],
    };
    Ok(Dataset::Continuous(rgmm(&spec, rng)?.0))
}

/// Wall time of one swap pass from a random partition into `K` clusters.
pub fn cmd_bench(args: &BenchArgs) -> Result<Vec<BenchRow>> {
    if args.repeats == 0 || args.k == 0 {
        return Err(Error::config("repeats and K must be positive"));
    }
    let mut rows = Vec::new();
    for (idx, &size) in args.sizes.iter().enumerate() {
        let mut rng = crate::optim::stream_rng(args.seed, 0, idx as u64);
        let (data, cells) = match args.model {
            ModelKind::Sbm => {
                let d = bench_graph(size, &mut rng)?;
                let m = match &d {
                    Dataset::Graph(g) => g.edge_count(),
                    _ => unreachable!("bench graph"),
                };
                (d, m)
            }
            ModelKind::DiagGmm => (bench_points(size, &mut rng)?, size * 10),
            k => return Err(Error::config(format!("bench supports sbm and diag_gmm, not {k}"))),
        };
        let n = data.n();
        let model = AnyModel::build(default_prior(args.model, &data)?, data)?;
        let start = random_partition(n, args.k.min(n), &mut rng);
        let state = SearchState::new(&model, start, 1.0)?;
        let mut best = f64::INFINITY;
        for r in 0..args.repeats {
            let mut s = state.clone();
            let mut pass_rng = crate::optim::stream_rng(args.seed, 1, r as u64);
            let t = Instant::now();
            swap_epoch(&model, &mut s, &mut pass_rng);
            best = best.min(t.elapsed().as_secs_f64());
        }
        rows.push(BenchRow {
            n,
            edges_or_cells: cells,
            k: args.k,
            seconds: best,
        });
    }
    let write = |w: &mut dyn Write| -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &rows {
            out.serialize(r).map_err(|e| Error::data(e.to_string()))?;
        }
        out.flush()?;
        Ok(())
    };
    match &args.out {
        Some(path) => write(&mut create(path)?)?,
        None => write(&mut io::stdout().lock())?,
    }
    Ok(rows)
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match &cli.command {
        Command::Fit(a) => cmd_fit(a).map(drop),
        Command::Cut(a) => cmd_cut(a).map(drop),
        Command::Coef(a) => cmd_coef(a),
        Command::Simulate(a) => cmd_simulate(a).map(drop),
        Command::Bench(a) => cmd_bench(a).map(drop),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_error_class() {
        assert_eq!(exit_code(&Error::data("x")), 2);
        assert_eq!(exit_code(&Error::Io(io::Error::other("x"))), 2);
        assert_eq!(exit_code(&Error::config("x")), 3);
        assert_eq!(exit_code(&Error::InvalidCluster { index: 3, k: 2 }), 3);
        let num = Error::Numerical {
            cluster: 1,
            reason: "x".into(),
        };
        assert_eq!(exit_code(&num), 4);
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "iclust", "fit", "x.csv", "--model", "diag_gmm", "--alg", "genetic", "--K", "5", "--set", "tau=0.1", "--set",
            "kappa=2", "--threads", "3",
        ])
        .unwrap();
        let Command::Fit(a) = cli.command else { panic!("fit expected") };
        assert_eq!(a.model, Some(ModelKind::DiagGmm));
        assert_eq!(a.alg, Algorithm::Genetic);
        assert_eq!((a.k, a.threads), (5, 3));
        assert_eq!(a.set, vec!["tau=0.1", "kappa=2"]);
        assert!(Cli::try_parse_from(["iclust", "fit", "x.csv", "--alg", "anneal"]).is_err());
        let cli = Cli::try_parse_from(["iclust", "bench", "--sizes", "10,20"]).unwrap();
        let Command::Bench(b) = cli.command else { panic!("bench expected") };
        assert_eq!(b.sizes, vec![10, 20]);
    }

    #[test]
    fn bench_graph_hits_target_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let Dataset::Graph(g) = bench_graph(20_000, &mut rng).unwrap() else { panic!("graph expected") };
        assert_eq!(g.n(), 800);
        let m = g.edge_count() as f64;
        assert!((m - 20_000.0).abs() < 0.05 * 20_000.0, "{m}");
    }
}
