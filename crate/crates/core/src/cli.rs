//! The `sumap` command line: synthesize, compress, embed, run the whole
//! pipeline, evaluate, and plot.
//!
//! Flags mirror module parameters one-to-one. Any flag may also be supplied
//! through a flat `key=value` config file (`--config`, `#` comments allowed);
//! command-line values override file values. Exit codes are stable:
//! 0 success, 1 I/O error, 2 usage or parameter error.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::coarsen::{
    compress, lift_embedding, save_map_csv, save_sizes_csv, CompressParams,
};
use crate::dataset::{generate_synthetic, load_csv, save_csv, SyntheticKind};
use crate::knn_graph::{build_knn_graph, symmetrize, Metric};
use crate::metrics::{
    aggregate_purity, knn_preservation, stage_timer, trustworthiness, EvalReport,
};
use crate::plot::render_scatter_svg;
use crate::umap::{save_embedding_csv, umap_embed, Embedding, InitStrategy, UmapParams};
use crate::{Error, Result};

#[derive(Parser)]
#[command(name = "sumap", version, about = "Accelerated UMAP via spectrum-preserving coarsening")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic dataset CSV.
    Synth(SynthArgs),
    /// Compress a dataset into spectrally representative pseudo-samples.
    Compress(CompressArgs),
    /// Embed a dataset with UMAP.
    Embed(EmbedArgs),
    /// Compress, embed, lift, and evaluate in one run.
    Pipeline(PipelineArgs),
    /// Evaluate an embedding against its original dataset.
    Eval(EvalArgs),
    /// Render an embedding CSV as an SVG scatter plot.
    Plot(PlotArgs),
}

#[derive(Args)]
struct CommonOpts {
    /// Flat key=value config file; command line overrides it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed shared by all seeded stages.
    #[arg(long)]
    seed: Option<u64>,
    /// Thread budget for stages with parallel contracts (1 = deterministic).
    #[arg(long)]
    threads: Option<usize>,
    /// Distance metric for neighbor searches.
    #[arg(long, value_enum)]
    metric: Option<Metric>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[arg(long, value_enum)]
    kind: Option<SyntheticKind>,
    /// Number of samples.
    #[arg(long)]
    n: Option<usize>,
    /// Gaussian noise scale.
    #[arg(long)]
    noise: Option<f64>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompressionOpts {
    /// Requested compression ratio N/P.
    #[arg(long)]
    ratio: Option<f64>,
    /// Neighbor count of the coarsening graph.
    #[arg(long)]
    k: Option<usize>,
    /// Number of smoothed spectral test vectors.
    #[arg(long)]
    spectral_k: Option<usize>,
    /// Gauss-Seidel sweeps per test vector.
    #[arg(long)]
    sweeps: Option<usize>,
    /// Level budget for iterated coarsening.
    #[arg(long)]
    max_levels: Option<usize>,
    /// Affinity floor below which edges never merge.
    #[arg(long)]
    min_affinity: Option<f64>,
}

#[derive(Args)]
struct UmapOpts {
    #[arg(long)]
    n_neighbors: Option<usize>,
    #[arg(long)]
    min_dist: Option<f64>,
    #[arg(long)]
    spread: Option<f64>,
    #[arg(long)]
    n_epochs: Option<usize>,
    /// Output dimension (2 or 3).
    #[arg(long = "m")]
    m: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    negative_sample_rate: Option<usize>,
    #[arg(long, value_enum)]
    init: Option<InitStrategy>,
}

#[derive(Args)]
struct CompressArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Input dataset CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Treat the last input column as integer labels.
    #[arg(long)]
    has_labels: bool,
    #[command(flatten)]
    compression: CompressionOpts,
    /// Output directory (coarse.csv, map.csv, sizes.csv).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also dump the first-level symmetrized graph as an edge list.
    #[arg(long)]
    dump_graph: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    has_labels: bool,
    #[command(flatten)]
    umap: UmapOpts,
    /// Output embedding CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    common: CommonOpts,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    has_labels: bool,
    #[command(flatten)]
    compression: CompressionOpts,
    #[command(flatten)]
    umap: UmapOpts,
    /// Neighborhood size used by the fidelity metrics.
    #[arg(long)]
    k_metric: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Original dataset CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    has_labels: bool,
    /// Embedding CSV to score.
    #[arg(long)]
    embedding: Option<PathBuf>,
    /// The embedding CSV carries a trailing label column.
    #[arg(long)]
    embedding_has_labels: bool,
    /// Optional coarsening map CSV (enables purity and achieved ratio).
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long)]
    k_metric: Option<usize>,
    /// Report path prefix (writes <out>.txt and <out>.json).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Embedding CSV to draw.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Color points by the trailing label column.
    #[arg(long)]
    has_labels: bool,
    /// Output SVG path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
}

/// Parsed `key=value` config file. Missing file is an I/O error; absent
/// keys are simply unset.
struct Cfg(BTreeMap<String, String>);

impl Cfg {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut map = BTreeMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            for (idx, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: idx + 1,
                        msg: format!("expected key=value, got {:?}", raw),
                    });
                };
                map.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(Cfg(map))
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|_| {
                Error::param(format!("config key {} has unparsable value {:?}", key, raw))
            }),
        }
    }

    fn parse_enum<T: clap::ValueEnum>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => T::from_str(raw, true).map(Some).map_err(|_| {
                Error::param(format!("config key {} has unknown value {:?}", key, raw))
            }),
        }
    }

    fn flag(&self, cli: bool, key: &str) -> Result<bool> {
        Ok(cli || self.parse::<bool>(key)?.unwrap_or(false))
    }

    fn path(&self, cli: Option<PathBuf>, key: &str) -> Result<Option<PathBuf>> {
        Ok(cli.or_else(|| self.0.get(key).map(PathBuf::from)))
    }
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::param(format!("missing required option --{}", flag)))
}

struct Shared {
    seed: u64,
    threads: usize,
    metric: Metric,
}

fn resolve_common(common: &CommonOpts, cfg: &Cfg) -> Result<Shared> {
    Ok(Shared {
        seed: common.seed.or(cfg.parse("seed")?).unwrap_or(1),
        threads: common.threads.or(cfg.parse("threads")?).unwrap_or(1).max(1),
        metric: common
            .metric
            .or(cfg.parse_enum("metric")?)
            .unwrap_or(Metric::Euclidean),
    })
}

fn resolve_compression(
    opts: &CompressionOpts,
    cfg: &Cfg,
    shared: &Shared,
) -> Result<CompressParams> {
    Ok(CompressParams {
        k: opts.k.or(cfg.parse("k")?).unwrap_or(10),
        metric: shared.metric,
        spectral_k: opts.spectral_k.or(cfg.parse("spectral_k")?).unwrap_or(10),
        sweeps: opts.sweeps.or(cfg.parse("sweeps")?).unwrap_or(10),
        seed: shared.seed,
        ratio: opts.ratio.or(cfg.parse("ratio")?).unwrap_or(1.0),
        max_levels: opts.max_levels.or(cfg.parse("max_levels")?).unwrap_or(10),
        min_affinity: opts.min_affinity.or(cfg.parse("min_affinity")?),
        threads: shared.threads,
    })
}

fn resolve_umap(opts: &UmapOpts, cfg: &Cfg, shared: &Shared) -> Result<UmapParams> {
    Ok(UmapParams {
        n_neighbors: opts.n_neighbors.or(cfg.parse("n_neighbors")?).unwrap_or(15),
        out_dim: opts.m.or(cfg.parse("m")?).unwrap_or(2),
        min_dist: opts.min_dist.or(cfg.parse("min_dist")?).unwrap_or(0.1),
        spread: opts.spread.or(cfg.parse("spread")?).unwrap_or(1.0),
        n_epochs: match opts.n_epochs {
            Some(e) => Some(e),
            None => cfg.parse("n_epochs")?,
        },
        learning_rate: opts
            .learning_rate
            .or(cfg.parse("learning_rate")?)
            .unwrap_or(1.0),
        negative_sample_rate: opts
            .negative_sample_rate
            .or(cfg.parse("negative_sample_rate")?)
            .unwrap_or(5),
        a: None,
        b: None,
        seed: shared.seed,
        init: opts
            .init
            .or(cfg.parse_enum("init")?)
            .unwrap_or(InitStrategy::Spectral),
        metric: shared.metric,
        threads: shared.threads,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Reads an embedding CSV back as coordinates plus optional labels.
fn load_embedding(path: &Path, has_labels: bool) -> Result<(Embedding, Option<Vec<i64>>)> {
    let data = load_csv(path, has_labels)?;
    let labels = data.labels().map(|l| l.to_vec());
    let emb = Embedding::new(data.values().to_vec(), data.n_samples(), data.n_features())?;
    Ok((emb, labels))
}

/// Parses arguments and runs; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e);
            match e {
                Error::InvalidParameter(_) => 2,
                _ => 1,
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Compress(args) => cmd_compress(args),
        Command::Embed(args) => cmd_embed(args),
        Command::Pipeline(args) => cmd_pipeline(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Plot(args) => cmd_plot(args),
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let cfg = Cfg::load(args.common.config.as_deref())?;
    let shared = resolve_common(&args.common, &cfg)?;
    let kind = required(args.kind.or(cfg.parse_enum("kind")?), "kind")?;
    let n = required(args.n.or(cfg.parse("n")?), "n")?;
    let noise = args.noise.or(cfg.parse("noise")?).unwrap_or(0.1);
    let out = required(cfg.path(args.out, "out")?, "out")?;

    let data = generate_synthetic(kind, n, noise, shared.seed)?;
    save_csv(&data, &out)?;
    println!("wrote {} samples to {}", data.n_samples(), out.display());
    Ok(())
}

fn cmd_compress(args: CompressArgs) -> Result<()> {
    let cfg = Cfg::load(args.common.config.as_deref())?;
    let shared = resolve_common(&args.common, &cfg)?;
    let params = resolve_compression(&args.compression, &cfg, &shared)?;
    let input = required(cfg.path(args.input, "input")?, "input")?;
    let has_labels = cfg.flag(args.has_labels, "has_labels")?;
    let out = required(cfg.path(args.out, "out")?, "out")?;

    let data = load_csv(&input, has_labels)?;
    create_dir(&out)?;
    if let Some(dump) = cfg.path(args.dump_graph, "dump_graph")? {
        let k = params.k.min(data.n_samples().saturating_sub(1)).max(1);
        let graph = symmetrize(&build_knn_graph(&data, k, params.metric, params.threads)?);
        let mut buf = Vec::new();
        graph
            .write_edge_list(&mut buf)
            .map_err(|e| Error::io(&dump, e))?;
        fs::write(&dump, buf).map_err(|e| Error::io(&dump, e))?;
    }

    let (coarse, map) = compress(&data, &params)?;
    save_csv(coarse.data(), out.join("coarse.csv"))?;
    save_map_csv(&map, out.join("map.csv"))?;
    save_sizes_csv(&coarse, out.join("sizes.csv"))?;
    println!("achieved_ratio={}", map.achieved_ratio());
    Ok(())
}

fn cmd_embed(args: EmbedArgs) -> Result<()> {
    let cfg = Cfg::load(args.common.config.as_deref())?;
    let shared = resolve_common(&args.common, &cfg)?;
    let params = resolve_umap(&args.umap, &cfg, &shared)?;
    let input = required(cfg.path(args.input, "input")?, "input")?;
    let has_labels = cfg.flag(args.has_labels, "has_labels")?;
    let out = required(cfg.path(args.out, "out")?, "out")?;

    let data = load_csv(&input, has_labels)?;
    let embedding = umap_embed(&data, &params)?;
    save_embedding_csv(&embedding, data.labels(), &out)?;
    println!("wrote {}x{} embedding to {}", embedding.n(), embedding.dim(), out.display());
    Ok(())
}

fn cmd_pipeline(args: PipelineArgs) -> Result<()> {
    let cfg = Cfg::load(args.common.config.as_deref())?;
    let shared = resolve_common(&args.common, &cfg)?;
    let cparams = resolve_compression(&args.compression, &cfg, &shared)?;
    let uparams = resolve_umap(&args.umap, &cfg, &shared)?;
    let k_metric = args.k_metric.or(cfg.parse("k_metric")?).unwrap_or(15);
    let input = required(cfg.path(args.input, "input")?, "input")?;
    let has_labels = cfg.flag(args.has_labels, "has_labels")?;
    let out = required(cfg.path(args.out, "out")?, "out")?;

    let data = load_csv(&input, has_labels)?;
    create_dir(&out)?;

    let mut times = BTreeMap::new();
    let (coarse, map) = stage_timer(&mut times, "compress", || compress(&data, &cparams))?;
    let coarse_embedding =
        stage_timer(&mut times, "embed", || umap_embed(coarse.data(), &uparams))?;
    let lifted = stage_timer(&mut times, "lift", || {
        lift_embedding(&map, &coarse_embedding)
    })?;

    save_csv(coarse.data(), out.join("coarse.csv"))?;
    save_map_csv(&map, out.join("map.csv"))?;
    save_sizes_csv(&coarse, out.join("sizes.csv"))?;
    save_embedding_csv(
        &coarse_embedding,
        coarse.majority_labels(),
        out.join("coarse_embedding.csv"),
    )?;
    save_embedding_csv(&lifted, data.labels(), out.join("lifted_embedding.csv"))?;

    let (trust, preserve, purity) = stage_timer(&mut times, "eval", || -> Result<_> {
        let trust = trustworthiness(&data, &lifted, k_metric)?;
        let preserve = knn_preservation(&data, &lifted, k_metric)?;
        let purity = data
            .labels()
            .map(|labels| aggregate_purity(&map, labels))
            .transpose()?;
        Ok((trust, preserve, purity))
    })?;

    let report = EvalReport {
        trustworthiness: trust,
        knn_preservation: preserve,
        aggregate_purity: purity,
        achieved_ratio: map.achieved_ratio(),
        wall_clock_seconds: times,
    };
    fs::write(out.join("report.txt"), report.to_key_values())
        .map_err(|e| Error::io(out.join("report.txt"), e))?;
    fs::write(out.join("report.json"), report.to_json())
        .map_err(|e| Error::io(out.join("report.json"), e))?;
    print!("{}", report.to_key_values());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let cfg = Cfg::load(args.common.config.as_deref())?;
    let k_metric = args.k_metric.or(cfg.parse("k_metric")?).unwrap_or(15);
    let data_path = required(cfg.path(args.data, "data")?, "data")?;
    let has_labels = cfg.flag(args.has_labels, "has_labels")?;
    let emb_labels = cfg.flag(args.embedding_has_labels, "embedding_has_labels")?;
    let emb_path = required(cfg.path(args.embedding, "embedding")?, "embedding")?;

    let data = load_csv(&data_path, has_labels)?;
    let (embedding, _) = load_embedding(&emb_path, emb_labels)?;

    let mut purity = None;
    let mut ratio = 1.0;
    if let Some(map_path) = cfg.path(args.map, "map")? {
        let map = crate::coarsen::load_map_csv(&map_path)?;
        ratio = map.achieved_ratio();
        if let Some(labels) = data.labels() {
            purity = Some(aggregate_purity(&map, labels)?);
        }
    }

    let report = EvalReport {
        trustworthiness: trustworthiness(&data, &embedding, k_metric)?,
        knn_preservation: knn_preservation(&data, &embedding, k_metric)?,
        aggregate_purity: purity,
        achieved_ratio: ratio,
        wall_clock_seconds: BTreeMap::new(),
    };
    if let Some(out) = cfg.path(args.out, "out")? {
        fs::write(out.with_extension("txt"), report.to_key_values())
            .map_err(|e| Error::io(out.with_extension("txt"), e))?;
        fs::write(out.with_extension("json"), report.to_json())
            .map_err(|e| Error::io(out.with_extension("json"), e))?;
    }
    print!("{}", report.to_key_values());
    Ok(())
}

fn cmd_plot(args: PlotArgs) -> Result<()> {
    let cfg = Cfg::load(args.common.config.as_deref())?;
    let input = required(cfg.path(args.input, "input")?, "input")?;
    let has_labels = cfg.flag(args.has_labels, "has_labels")?;
    let out = required(cfg.path(args.out, "out")?, "out")?;
    let width = args.width.or(cfg.parse("width")?).unwrap_or(800);
    let height = args.height.or(cfg.parse("height")?).unwrap_or(600);

    let (embedding, labels) = load_embedding(&input, has_labels)?;
    if embedding.dim() < 2 {
        return Err(Error::param("plot needs an embedding with at least 2 columns"));
    }
    let points: Vec<(f64, f64)> = (0..embedding.n())
        .map(|i| (embedding.row(i)[0], embedding.row(i)[1]))
        .collect();
    let svg = render_scatter_svg(&points, labels.as_deref(), width, height);
    fs::write(&out, svg).map_err(|e| Error::io(&out, e))?;
    println!("wrote {}", out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_parses_and_reports_bad_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cfg");
        fs::write(&p, "# comment\nratio = 5\nseed=9\n").unwrap();
        let cfg = Cfg::load(Some(&p)).unwrap();
        assert_eq!(cfg.parse::<f64>("ratio").unwrap(), Some(5.0));
        assert_eq!(cfg.parse::<u64>("seed").unwrap(), Some(9));
        assert_eq!(cfg.parse::<u64>("absent").unwrap(), None);

        fs::write(&p, "just-a-word\n").unwrap();
        assert!(matches!(Cfg::load(Some(&p)), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn config_enum_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cfg");
        fs::write(&p, "metric=cosine\ninit=random\nkind=two_moons\n").unwrap();
        let cfg = Cfg::load(Some(&p)).unwrap();
        assert_eq!(cfg.parse_enum::<Metric>("metric").unwrap(), Some(Metric::Cosine));
        assert_eq!(
            cfg.parse_enum::<InitStrategy>("init").unwrap(),
            Some(InitStrategy::Random)
        );
        assert_eq!(
            cfg.parse_enum::<SyntheticKind>("kind").unwrap(),
            Some(SyntheticKind::TwoMoons)
        );
    }

    #[test]
    fn cli_overrides_config() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cfg");
        fs::write(&p, "seed=5\nthreads=4\n").unwrap();
        let cfg = Cfg::load(Some(&p)).unwrap();
        let common = CommonOpts {
            config: Some(p),
            seed: Some(11),
            threads: None,
            metric: None,
        };
        let shared = resolve_common(&common, &cfg).unwrap();
        assert_eq!(shared.seed, 11); // CLI wins
        assert_eq!(shared.threads, 4); // config fills the gap
        assert_eq!(shared.metric, Metric::Euclidean); // default
    }
}
