use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dessert::bench::{self, SyntheticBenchConfig, BENCH_CSV_HEADER};
use dessert::oracle::brute_force_search;
use dessert::storage::{self, Qrels};
use dessert::theory::{self, BoundInputs};
use dessert::{
    eval, synth, DessertIndex, Document, IndexConfig, InnerAggregation, PrefilterConfig, Profile, RankedResults,
    Scorer, SearchParams, PROFILES,
};

#[derive(Parser)]
#[command(name = "dessert", version, about = "Vector-set search with LSH sketches")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an index from a vector-set file.
    Build(BuildArgs),
    /// Rank indexed sets for every query set, as CSV.
    Query(QueryArgs),
    /// Recall@k, MRR@10 and latency against relevance judgments.
    Eval(EvalArgs),
    /// Compare index and exact brute-force search on random sets.
    BenchSynthetic(BenchArgs),
    /// Table-count and query-cost calculators.
    Theory(TheoryArgs),
    /// Write a planted-match corpus: documents, noisy queries and oracle qrels.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct BuildArgs {
    /// Vector-set file with the documents.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Start from a named preset; explicit flags override it.
    #[arg(long)]
    profile: Option<String>,
    /// Hash bits per table.
    #[arg(long = "C")]
    hashes_per_table: Option<usize>,
    /// Number of tables.
    #[arg(long = "L")]
    num_tables: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Inner aggregation: max, avg, avg-exp or avg-sigmoid.
    #[arg(long, default_value = "max")]
    inner: String,
    /// Skip the centroid prefilter and score every set.
    #[arg(long)]
    no_filter: bool,
    #[arg(long)]
    filter_k: Option<usize>,
    #[arg(long)]
    filter_probe: Option<usize>,
    /// Number of centroids (default: ceil(sqrt(total vectors))).
    #[arg(long)]
    centroids: Option<usize>,
    #[arg(long, default_value_t = 10)]
    iters: usize,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    index: PathBuf,
    /// Vector-set file with the queries; set ids become query ids.
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    probe: Option<usize>,
    #[arg(long)]
    filter_k: Option<usize>,
    /// Rank with exact similarities instead of the index.
    #[arg(long, requires = "docs")]
    exact: bool,
    /// Original documents, needed by --exact.
    #[arg(long)]
    docs: Option<PathBuf>,
    /// CSV destination (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Score candidates on this many threads.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Tab-separated `query_id doc_id` lines.
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [1, 10, 100, 1000])]
    k: Vec<usize>,
    #[arg(long)]
    probe: Option<usize>,
    #[arg(long)]
    filter_k: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [2, 4, 8, 16, 32, 64, 128, 256])]
    m: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 32)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = synth::DEFAULT_NOISE)]
    noise: f32,
    /// Upper bound on queries per set size.
    #[arg(long, default_value_t = 200)]
    max_queries: usize,
    /// CSV destination (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TheoryArgs {
    /// Largest similarity among non-matching vectors.
    #[arg(long)]
    s_max: Option<f64>,
    /// Threshold for the upper tail.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Number of indexed sets.
    #[arg(long = "N")]
    num_sets: usize,
    #[arg(long)]
    mq: usize,
    #[arg(long)]
    m: usize,
    /// Failure probability.
    #[arg(long)]
    delta: f64,
    /// Score gap.
    #[arg(long = "Delta")]
    gap: f64,
    /// Use this base instead of the one derived from --s-max and --tau.
    #[arg(long)]
    gamma_max: Option<f64>,
    /// Bound on entries per bucket for the cost estimate.
    #[arg(long = "T", default_value_t = 4)]
    bucket_bound: usize,
    /// Vector dimension for the cost estimate.
    #[arg(long, default_value_t = 128)]
    d: usize,
    /// Also write the results as a one-row CSV.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Destination for the document vector sets.
    #[arg(long)]
    docs: PathBuf,
    /// Destination for the query vector sets.
    #[arg(long)]
    queries: PathBuf,
    /// Destination for the qrels (exact top-1 per query).
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    m: usize,
    #[arg(long, default_value_t = 16)]
    d: usize,
    /// Number of queries, each a noisy copy of a distinct document.
    #[arg(long, default_value_t = 100)]
    num_queries: usize,
    #[arg(long, default_value_t = synth::DEFAULT_NOISE)]
    noise: f32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Query(a) => cmd_query(a),
        Command::Eval(a) => cmd_eval(a),
        Command::BenchSynthetic(a) => cmd_bench(a),
        Command::Theory(a) => cmd_theory(a),
        Command::Generate(a) => cmd_generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn read_docs(path: &Path) -> Result<Vec<Document>> {
    storage::read_vector_sets(path).with_context(|| format!("reading {}", path.display()))
}

fn output_writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Returns whether queries should be scored in parallel.
fn configure_threads(threads: Option<usize>) -> Result<bool> {
    match threads {
        None | Some(1) => Ok(false),
        Some(0) => bail!("--threads must be >= 1"),
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("configuring the thread pool")?;
            Ok(true)
        }
    }
}

fn search_params(k: usize, probe: Option<usize>, filter_k: Option<usize>, parallel: bool) -> SearchParams {
    SearchParams {
        probe,
        k_filter: filter_k,
        ..SearchParams::top_k(k)
    }
    .parallel(parallel)
}

fn cmd_build(a: BuildArgs) -> Result<()> {
    let docs = read_docs(&a.input)?;
    let Some(first) = docs.first() else {
        bail!("{} contains no vector sets", a.input.display());
    };
    let dim = first.vectors.dim();

    let profile = match &a.profile {
        Some(name) => Profile::by_name(name).with_context(|| {
            let names: Vec<_> = PROFILES.iter().map(|p| p.name).collect();
            format!("unknown profile {name:?}; expected one of {}", names.join(", "))
        })?,
        None => PROFILES[0],
    };
    let inner =
        InnerAggregation::from_name(&a.inner).with_context(|| format!("unknown inner aggregation {:?}", a.inner))?;
    let mut config = IndexConfig::from_profile(dim, &profile)
        .with_seed(a.seed)
        .with_inner(inner);
    config.hashes_per_table = a.hashes_per_table.unwrap_or(config.hashes_per_table);
    config.num_tables = a.num_tables.unwrap_or(config.num_tables);
    config.prefilter = PrefilterConfig {
        enabled: !a.no_filter,
        centroids: a.centroids,
        iters: a.iters,
        probe: a.filter_probe.unwrap_or(profile.probe),
        k_filter: a.filter_k.unwrap_or(profile.k_filter),
    };
    if config.hashes_per_table == 0 || config.hashes_per_table > dessert::lsh::MAX_HASHES_PER_TABLE {
        bail!(
            "--C must lie in 1..={}, got {}",
            dessert::lsh::MAX_HASHES_PER_TABLE,
            config.hashes_per_table
        );
    }
    if let Some(name) = &a.profile {
        println!(
            "profile={name} C={} L={} filter_k={} filter_probe={}",
            profile.hashes_per_table, profile.num_tables, profile.k_filter, profile.probe
        );
    }

    let start = Instant::now();
    let index = DessertIndex::build(&docs, config).context("building the index")?;
    let build_ms = start.elapsed().as_secs_f64() * 1e3;
    storage::save_index(&a.output, &index).with_context(|| format!("writing {}", a.output.display()))?;
    info!("wrote {}", a.output.display());

    let cfg = index.config();
    println!(
        "N={} total_vectors={} d={} C={} L={} r={} prefilter={} filter_k={} filter_probe={} build_ms={:.1} sketch_bytes={}",
        index.len(),
        index.total_vectors(),
        cfg.dim,
        cfg.hashes_per_table,
        cfg.num_tables,
        cfg.range(),
        index.prefilter().is_some(),
        cfg.prefilter.k_filter,
        cfg.prefilter.probe,
        build_ms,
        index.sketch_bytes()
    );
    Ok(())
}

fn cmd_query(a: QueryArgs) -> Result<()> {
    if a.k == 0 {
        bail!("invalid parameter: --k must be >= 1");
    }
    let parallel = configure_threads(a.threads)?;
    let index = storage::load_index(&a.index).with_context(|| format!("loading {}", a.index.display()))?;
    let queries = read_docs(&a.queries)?;
    let params = search_params(a.k, a.probe, a.filter_k, parallel);

    let mut results: Vec<(u64, RankedResults)> = Vec::with_capacity(queries.len());
    if a.exact {
        let docs = read_docs(a.docs.as_deref().expect("clap enforces --docs"))?;
        let scorer = Scorer::new(index.config().inner);
        for q in &queries {
            let ranked =
                brute_force_search(&docs, &q.vectors, a.k, &scorer).with_context(|| format!("query {}", q.id))?;
            results.push((q.id, ranked));
        }
    } else {
        for q in &queries {
            let ranked = index
                .query(&q.vectors, &params)
                .with_context(|| format!("query {}", q.id))?;
            results.push((q.id, ranked));
        }
    }
    storage::write_results_csv(output_writer(a.output.as_deref())?, &results)?;
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let parallel = configure_threads(a.threads)?;
    let index = storage::load_index(&a.index).with_context(|| format!("loading {}", a.index.display()))?;
    let queries = read_docs(&a.queries)?;
    let qrels: Qrels = storage::read_qrels(&a.qrels).with_context(|| format!("reading {}", a.qrels.display()))?;
    let params = search_params(10, a.probe, a.filter_k, parallel);
    let report = eval::evaluate(&index, &queries, &qrels, &a.k, &params)?;

    println!(
        "queries={} evaluated={} unjudged={} unknown_qrels={}",
        queries.len(),
        report.evaluated,
        report.unjudged.len(),
        report.unknown_qrels.len()
    );
    for (k, r) in report.ks.iter().zip(&report.recall) {
        println!("recall@{k}={r:.4}");
    }
    println!("MRR@10={:.4}", report.mrr_at_10);
    println!(
        "latency_ms p50={:.3} p95={:.3} p99={:.3} mean={:.3}",
        report.p50(),
        report.p95(),
        report.p99(),
        report.mean_latency()
    );
    let echo: Vec<String> = report.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
    println!("params {}", echo.join(" "));
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let cfg = SyntheticBenchConfig {
        set_sizes: a.m,
        num_sets: a.n,
        dim: a.d,
        seed: a.seed,
        noise: a.noise,
        max_queries: a.max_queries,
    };
    let rows = bench::run_synthetic_bench(&cfg)?;
    let mut w = output_writer(a.output.as_deref())?;
    writeln!(w, "{BENCH_CSV_HEADER}")?;
    for row in &rows {
        writeln!(w, "{}", row.csv_line())?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_theory(a: TheoryArgs) -> Result<()> {
    let gamma = match (a.s_max, a.tau) {
        (Some(s), Some(t)) => Some(theory::gamma_upper(s, t, a.alpha)?),
        (None, None) => None,
        _ => bail!("--s-max and --tau must be given together"),
    };
    let Some(gamma_max) = a.gamma_max.or(gamma) else {
        bail!("either --gamma-max or both --s-max and --tau are required");
    };
    let inputs = BoundInputs {
        num_sets: a.num_sets,
        query_size: a.mq,
        set_size: a.m,
        delta: a.delta,
        gap: a.gap,
        gamma_max,
        beta: a.beta,
    };
    let terms = inputs.table_terms()?;
    let tables = terms.tables();
    let cost = theory::query_cost_estimate(a.mq, a.num_sets, a.d, tables, a.bucket_bound)?;

    if let Some(g) = gamma {
        println!("gamma={g:.9}");
    }
    println!("gamma_max={gamma_max:.9}");
    println!("L_upper_tail={:.6}", terms.upper_tail);
    println!("L_lower_tail={:.6}", terms.lower_tail);
    println!("L={tables} binding={}", terms.binding());
    println!("cost={cost}");

    if let Some(path) = &a.output {
        let mut w = output_writer(Some(path))?;
        writeln!(w, "gamma,gamma_max,L_upper_tail,L_lower_tail,L,binding,cost")?;
        writeln!(
            w,
            "{},{gamma_max},{},{},{tables},{},{cost}",
            gamma.map(|g| g.to_string()).unwrap_or_default(),
            terms.upper_tail,
            terms.lower_tail,
            terms.binding()
        )?;
        w.flush()?;
    }
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    if a.n == 0 || a.m == 0 || a.d == 0 {
        bail!("--n, --m and --d must be >= 1");
    }
    if a.num_queries > a.n {
        bail!("--num-queries ({}) cannot exceed --n ({})", a.num_queries, a.n);
    }
    let docs = synth::random_documents(a.n, a.m, a.d, a.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed.wrapping_add(1));
    let picks = rand::seq::index::sample(&mut rng, a.n, a.num_queries).into_vec();
    let scorer = Scorer::default();
    let mut queries = Vec::with_capacity(a.num_queries);
    let mut qrels = Qrels::new();
    for (qid, &i) in picks.iter().enumerate() {
        let q = synth::noisy_copy(&docs[i].vectors, a.noise, &mut rng);
        let top = brute_force_search(&docs, &q, 1, &scorer)?
            .top()
            .expect("at least one document");
        qrels.entry(qid as u64).or_default().insert(top);
        queries.push(Document::new(qid as u64, q));
    }
    storage::write_vector_sets(&a.docs, &docs)?;
    storage::write_vector_sets(&a.queries, &queries)?;
    storage::write_qrels(&a.qrels, &qrels)?;
    println!(
        "docs={} queries={} m={} d={} seed={}",
        docs.len(),
        queries.len(),
        a.m,
        a.d,
        a.seed
    );
    Ok(())
}
