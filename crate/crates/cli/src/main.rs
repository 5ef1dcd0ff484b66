//! `pepinfer` command-line front end.
//!
//! `build` does all offline work (digested references, tiling, automata,
//! peptide map) and writes one engine artifact; `infer` only loads it and runs
//! the online path.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pepinfer::bench::{
    render_tsv, run_bench, run_mutation_sweep, BenchConfig, BenchCorpus, BenchRow, SweepConfig,
    SweepRow, REFERENCE_PLATFORM_ROWS,
};
use pepinfer::corpus::synth::{synthesize, SynthConfig};
use pepinfer::corpus::{
    make_sample, parse_cluster_table, parse_fasta, render_cluster_table, render_fasta, ClusterSet,
    SampleSpec, DEFAULT_IDENTITIES,
};
use pepinfer::digest::{
    digest_record, parse_peptide_list, write_peptide_list, CleavageRuleSet, Peptide,
};
use pepinfer::engine::{Engine, EngineKind, EngineOptions};
use pepinfer::infer::{infer_sample, FdrReport, InferenceOutcome, PeptideProteinMap, Theta};
use pepinfer::tiler::TilePlan;

/// Engine artifact layout version; bump on any incompatible change.
const ARTIFACT_VERSION: u32 = 1;
const REPORT_SCHEMA_VERSION: u32 = 1;
const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug, Serialize)]
#[command(
    name = "pepinfer",
    version,
    about = "Peptide-centric protein inference"
)]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 2014)]
    seed: u64,
    /// Worker thread cap.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output format (defaults: json for infer, tsv elsewhere).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, short, global = true)]
    verbose: bool,
    /// Write a run manifest (inputs, digests, config) to this path.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Tsv,
    Json,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Digest every protein of a FASTA file into a peptide list.
    Digest(DigestArgs),
    /// Build an engine artifact from reference peptides and a cluster table.
    Build(BuildArgs),
    /// Infer clusters from sample peptides with a built engine.
    Infer(InferArgs),
    /// Draw a seeded sample from a cluster corpus and digest it.
    Sample(SampleArgs),
    /// Run the benchmark harness.
    Bench(BenchArgs),
    /// Write a synthetic cluster corpus.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Serialize)]
struct DigestArgs {
    fasta: PathBuf,
    #[arg(long, default_value_t = 0)]
    missed_cleavages: usize,
    /// Output path (stdout when absent).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct BuildArgs {
    /// Peptide list; peptides whose parent is not a tabled reference are skipped.
    #[arg(long)]
    peptides: PathBuf,
    /// Cluster table: cluster_id, identity, reference_protein_id.
    #[arg(long)]
    clusters: PathBuf,
    #[arg(long, default_value = "classic")]
    engine: EngineKind,
    #[arg(long, default_value_t = 32)]
    capacity: usize,
    #[arg(long, default_value_t = 1)]
    bits_per_machine: u8,
    #[arg(long, short)]
    out: PathBuf,
    /// Also dump one memory image per tile into this directory.
    #[arg(long)]
    tile_images: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct InferArgs {
    #[arg(long)]
    engine: PathBuf,
    /// Sample peptide list.
    #[arg(long)]
    sample: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Cluster ids actually present, one per line; enables the false
    /// discovery report.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Leave wall-clock timings out of the report.
    #[arg(long)]
    omit_timing: bool,
}

#[derive(Args, Debug, Serialize)]
struct CorpusArgs {
    #[arg(long)]
    fasta: Option<PathBuf>,
    #[arg(long)]
    clusters: Option<PathBuf>,
    /// Accepted cluster identities.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_IDENTITIES)]
    identities: Vec<f64>,
}

#[derive(Args, Debug, Serialize)]
struct SampleArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Number of clusters to draw from.
    #[arg(long)]
    count: usize,
    /// Use the reference protein of each drawn cluster instead of a member.
    #[arg(long)]
    references_only: bool,
    #[arg(long, default_value_t = 0)]
    missed_cleavages: usize,
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Write the drawn cluster ids here.
    #[arg(long)]
    truth_out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct BenchArgs {
    /// Default configuration on a synthetic 12-cluster corpus.
    #[arg(long)]
    table1: bool,
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Member mutation rates for the correctness sweep (synthetic corpus only).
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
    #[arg(long)]
    no_sweep: bool,
    /// Run trials in parallel instead of one after another.
    #[arg(long)]
    parallel: bool,
    #[arg(long)]
    omit_timing: bool,
    #[arg(long, default_value_t = 32)]
    capacity: usize,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SynthArgs {
    #[arg(long, short)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 12)]
    clusters: usize,
    #[arg(long, default_value_t = 4)]
    members: usize,
    #[arg(long, default_value_t = 0.0)]
    mutation_rate: f64,
}

/// Everything `infer` needs, produced offline by `build`.
#[derive(Serialize, Deserialize)]
struct EngineArtifact {
    format_version: u32,
    tool_version: String,
    engine: Engine,
    map: PeptideProteinMap,
    tile_plan: Option<TilePlan>,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    config: &'a Cli,
    input_digests: BTreeMap<String, String>,
    seed: u64,
    tool_version: &'static str,
    timestamp_unix: u64,
}

#[derive(Serialize)]
struct InferReport<'a> {
    schema_version: u32,
    engine: EngineKind,
    theta: f64,
    sample_peptides: usize,
    scores: &'a [pepinfer::infer::ClusterScore],
    inferred: &'a BTreeSet<String>,
    validation: &'a Option<FdrReport>,
    cycles: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing_us: Option<TimingUs>,
}

#[derive(Serialize)]
struct TimingUs {
    input_setting: f64,
    search_and_mapping: f64,
    probability: f64,
}

#[derive(Serialize)]
struct BenchReport<'a> {
    schema_version: u32,
    config: &'a BenchConfig,
    rows: Vec<BenchRow>,
    sweep: &'a [SweepRow],
    reference_platform: Vec<ReferenceRow>,
}

#[derive(Serialize)]
struct ReferenceRow {
    proteins_in_sample: usize,
    sw_only_us: f64,
    co_designed_us: f64,
    observed_speedup: f64,
    expected_speedup: f64,
}

/// A failure with its exit code: 1 for usage problems, 2 for bad data.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl fmt::Display) -> Failure {
        Failure {
            code: 1,
            message: message.to_string(),
        }
    }

    fn data(message: impl fmt::Display) -> Failure {
        Failure {
            code: 2,
            message: message.to_string(),
        }
    }
}

fn in_file(path: &Path) -> impl Fn(&dyn fmt::Display) -> Failure + '_ {
    move |e| Failure::data(format!("{}: {e}", path.display()))
}

struct Ctx {
    verbose: bool,
    inputs: BTreeMap<String, String>,
}

impl Ctx {
    fn read(&mut self, path: &Path) -> Result<String, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.insert(
            path.display().to_string(),
            hex::encode(Sha256::digest(text.as_bytes())),
        );
        Ok(text)
    }

    fn log(&self, msg: impl FnOnce() -> String) {
        if self.verbose {
            eprintln!("pepinfer: {}", msg());
        }
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text)
            .map_err(|e| Failure::data(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn rules(missed: usize) -> CleavageRuleSet {
    CleavageRuleSet::default().with_missed_cleavages(missed)
}

fn load_corpus(ctx: &mut Ctx, args: &CorpusArgs) -> Result<ClusterSet, Failure> {
    let (Some(fasta), Some(table)) = (&args.fasta, &args.clusters) else {
        return Err(Failure::usage("--fasta and --clusters are both required"));
    };
    let records = parse_fasta(&ctx.read(fasta)?).map_err(|e| in_file(fasta)(&e))?;
    let table = parse_cluster_table(&ctx.read(table)?).map_err(|e| in_file(table)(&e))?;
    ClusterSet::assemble(records, &table, &args.identities).map_err(Failure::data)
}

fn cmd_digest(ctx: &mut Ctx, args: &DigestArgs, format: Format) -> Result<(), Failure> {
    let records = parse_fasta(&ctx.read(&args.fasta)?).map_err(|e| in_file(&args.fasta)(&e))?;
    let rules = rules(args.missed_cleavages);
    let mut peptides = Vec::new();
    for r in &records {
        peptides.extend(
            digest_record(r, &rules)
                .map_err(|e| Failure::data(format!("{}: {e}", r.protein_id)))?,
        );
    }
    ctx.log(|| format!("{} proteins -> {} peptides", records.len(), peptides.len()));
    let text = match format {
        Format::Tsv => write_peptide_list(&peptides),
        Format::Json => to_json(&peptides),
    };
    write_out(args.out.as_deref(), &text)
}

fn cmd_build(ctx: &mut Ctx, args: &BuildArgs) -> Result<(), Failure> {
    let peptides =
        parse_peptide_list(&ctx.read(&args.peptides)?).map_err(|e| in_file(&args.peptides)(&e))?;
    let table =
        parse_cluster_table(&ctx.read(&args.clusters)?).map_err(|e| in_file(&args.clusters)(&e))?;
    if peptides.is_empty() {
        return Err(Failure::data(format!(
            "{}: peptide list is empty",
            args.peptides.display()
        )));
    }
    let references: BTreeSet<&str> = table
        .iter()
        .map(|e| e.reference_protein_id.as_str())
        .collect();
    let total = peptides.len();
    let peptides: Vec<Peptide> = peptides
        .into_iter()
        .filter(|p| references.contains(p.parent_protein_id.as_str()))
        .collect();
    ctx.log(|| {
        format!(
            "{} of {total} peptides come from reference proteins",
            peptides.len()
        )
    });
    if peptides.is_empty() {
        return Err(Failure::data(
            "no peptide belongs to a reference protein of the cluster table",
        ));
    }

    let map = PeptideProteinMap::from_reference_table(&table, peptides).map_err(Failure::data)?;
    let options = EngineOptions {
        capacity: args.capacity,
        bits_per_machine: args.bits_per_machine,
    };
    let engine = Engine::build(args.engine, &map.patterns(), options).map_err(Failure::data)?;
    ctx.log(|| {
        format!(
            "{} engine over {} patterns, {} clusters",
            engine.kind(),
            map.len(),
            map.cluster_ids().len()
        )
    });

    if let Some(dir) = &args.tile_images {
        let Engine::BitSplit { tiles, .. } = &engine else {
            return Err(Failure::usage("--tile-images needs --engine bitsplit"));
        };
        fs::create_dir_all(dir)
            .map_err(|e| Failure::data(format!("cannot create {}: {e}", dir.display())))?;
        for t in tiles.tiles() {
            let path = dir.join(format!("tile_{:04}.img", t.tile_id()));
            write_out(Some(&path), &t.dump_image())?;
        }
    }

    let artifact = EngineArtifact {
        format_version: ARTIFACT_VERSION,
        tool_version: TOOL_VERSION.into(),
        tile_plan: engine.tile_plan().cloned(),
        engine,
        map,
    };
    let json = serde_json::to_string(&artifact).expect("artifact serializes");
    write_out(Some(&args.out), &json)
}

fn load_artifact(ctx: &mut Ctx, path: &Path) -> Result<EngineArtifact, Failure> {
    let text = ctx.read(path)?;
    let head: serde_json::Value = serde_json::from_str(&text).map_err(|e| in_file(path)(&e))?;
    let version = head.get("format_version").and_then(|v| v.as_u64());
    if version != Some(ARTIFACT_VERSION as u64) {
        return Err(Failure::data(format!(
            "{}: engine artifact version {}, this build reads version {ARTIFACT_VERSION}",
            path.display(),
            version.map_or("missing".to_string(), |v| v.to_string())
        )));
    }
    serde_json::from_value(head).map_err(|e| in_file(path)(&e))
}

fn read_truth(ctx: &mut Ctx, path: &Path) -> Result<BTreeSet<String>, Failure> {
    Ok(ctx
        .read(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn render_infer_tsv(out: &InferenceOutcome) -> String {
    let mut s = String::from("cluster_id\talpha\tbeta\tpi\toccurrences\tinferred\n");
    for c in &out.scores {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            c.cluster_id,
            c.alpha,
            c.beta,
            c.pi,
            c.occurrences,
            out.inferred.contains(&c.cluster_id) as u8
        ));
    }
    if let Some(v) = &out.validation {
        s.push_str(&format!(
            "# sigma {} phi {} lambda {}\n",
            v.sigma, v.phi, v.lambda
        ));
    }
    s
}

fn cmd_infer(ctx: &mut Ctx, args: &InferArgs, format: Format) -> Result<(), Failure> {
    let theta = Theta::new(args.theta).map_err(Failure::usage)?;
    let artifact = load_artifact(ctx, &args.engine)?;
    let sample =
        parse_peptide_list(&ctx.read(&args.sample)?).map_err(|e| in_file(&args.sample)(&e))?;
    let truth = match &args.truth {
        Some(p) => Some(read_truth(ctx, p)?),
        None => None,
    };
    let out = infer_sample(
        &sample,
        &artifact.engine,
        &artifact.map,
        theta,
        truth.as_ref(),
    )
    .map_err(|e| in_file(&args.sample)(&e))?;
    ctx.log(|| {
        format!(
            "{} of {} clusters inferred",
            out.inferred.len(),
            out.scores.len()
        )
    });

    let text = match format {
        Format::Tsv => render_infer_tsv(&out),
        Format::Json => {
            let us = |d: std::time::Duration| d.as_secs_f64() * 1e6;
            to_json(&InferReport {
                schema_version: REPORT_SCHEMA_VERSION,
                engine: artifact.engine.kind(),
                theta: theta.get(),
                sample_peptides: sample.len(),
                scores: &out.scores,
                inferred: &out.inferred,
                validation: &out.validation,
                cycles: out.cycles,
                timing_us: (!args.omit_timing).then(|| TimingUs {
                    input_setting: us(out.timing.input_setting),
                    search_and_mapping: us(out.timing.search_and_mapping),
                    probability: us(out.timing.probability),
                }),
            })
        }
    };
    write_out(args.out.as_deref(), &text)
}

fn cmd_sample(ctx: &mut Ctx, args: &SampleArgs, seed: u64, format: Format) -> Result<(), Failure> {
    let clusters = load_corpus(ctx, &args.corpus)?;
    let sample = make_sample(
        &clusters,
        &SampleSpec {
            cluster_count: args.count,
            rng_seed: seed,
            pick_members: !args.references_only,
        },
    )
    .map_err(Failure::data)?;
    let rules = rules(args.missed_cleavages);
    let mut peptides = Vec::new();
    for r in &sample {
        peptides.extend(digest_record(r, &rules).map_err(Failure::data)?);
    }
    ctx.log(|| format!("{} proteins -> {} peptides", sample.len(), peptides.len()));
    if let Some(p) = &args.truth_out {
        let ids: BTreeSet<&str> = sample.iter().map(|r| r.cluster_id.as_str()).collect();
        let text: String = ids.into_iter().map(|id| format!("{id}\n")).collect();
        write_out(Some(p), &text)?;
    }
    let text = match format {
        Format::Tsv => write_peptide_list(&peptides),
        Format::Json => to_json(&peptides),
    };
    write_out(args.out.as_deref(), &text)
}

fn cmd_bench(ctx: &mut Ctx, args: &BenchArgs, seed: u64, format: Format) -> Result<(), Failure> {
    let synthetic = args.corpus.fasta.is_none() && args.corpus.clusters.is_none();
    if synthetic && !args.table1 {
        return Err(Failure::usage("bench needs --table1 or --fasta/--clusters"));
    }
    let clusters = if synthetic {
        synthesize(&SynthConfig::default()).clusters
    } else {
        load_corpus(ctx, &args.corpus)?
    };
    let defaults = BenchConfig::default();
    let config = BenchConfig {
        sample_sizes: args.sizes.clone().unwrap_or(defaults.sample_sizes),
        trials: args.trials.unwrap_or(defaults.trials),
        rng_seed: seed,
        theta: Theta::new(args.theta).map_err(Failure::usage)?,
        sequential: !args.parallel,
    };
    let options = EngineOptions {
        capacity: args.capacity,
        ..EngineOptions::default()
    };
    let corpus = BenchCorpus::prepare(clusters, CleavageRuleSet::default(), options)
        .map_err(Failure::data)?;
    ctx.log(|| {
        format!(
            "{} clusters, {} reference peptides",
            corpus.clusters.len(),
            corpus.map.len()
        )
    });
    let rows = run_bench(&corpus, &config).map_err(Failure::data)?;

    let sweep = if synthetic && !args.no_sweep {
        let d = SweepConfig::default();
        run_mutation_sweep(&SweepConfig {
            mutation_rates: args.rates.clone().unwrap_or(d.mutation_rates),
            trials: config.trials,
            rng_seed: seed,
            theta: config.theta,
            ..d
        })
        .map_err(Failure::data)?
    } else {
        Vec::new()
    };

    let text = match format {
        Format::Tsv => render_tsv(&rows, &sweep, !args.omit_timing),
        Format::Json => to_json(&BenchReport {
            schema_version: REPORT_SCHEMA_VERSION,
            config: &config,
            rows: rows
                .iter()
                .map(|r| {
                    if args.omit_timing {
                        r.without_timing()
                    } else {
                        r.clone()
                    }
                })
                .collect(),
            sweep: &sweep,
            reference_platform: REFERENCE_PLATFORM_ROWS
                .iter()
                .map(|&(n, sw, hw, obs, exp)| ReferenceRow {
                    proteins_in_sample: n,
                    sw_only_us: sw,
                    co_designed_us: hw,
                    observed_speedup: obs,
                    expected_speedup: exp,
                })
                .collect(),
        }),
    };
    write_out(args.out.as_deref(), &text)
}

fn cmd_synth(ctx: &mut Ctx, args: &SynthArgs, seed: u64) -> Result<(), Failure> {
    let corpus = synthesize(&SynthConfig {
        clusters: args.clusters,
        members_per_cluster: args.members,
        mutation_rate: args.mutation_rate,
        seed,
        ..SynthConfig::default()
    });
    let dir = &args.out_dir;
    fs::create_dir_all(dir)
        .map_err(|e| Failure::data(format!("cannot create {}: {e}", dir.display())))?;
    let records: Vec<_> = corpus.clusters.records().cloned().collect();
    write_out(Some(&dir.join("proteins.fasta")), &render_fasta(&records))?;
    write_out(
        Some(&dir.join("clusters.tsv")),
        &render_cluster_table(&corpus.clusters.table()),
    )?;

    // Degenerate reference peptides for the tolerance engine.
    let map = PeptideProteinMap::from_alignments(
        &corpus.clusters,
        &corpus.alignments,
        &CleavageRuleSet::default(),
    )
    .map_err(Failure::data)?;
    let tolerant: Vec<Peptide> = map
        .entries()
        .iter()
        .map(|e| Peptide {
            sequence: e.peptide.clone(),
            parent_protein_id: e.reference_protein_id.clone(),
            start: 0,
            likelihood: None,
        })
        .collect();
    write_out(
        Some(&dir.join("tolerant_peptides.tsv")),
        &write_peptide_list(&tolerant),
    )?;
    ctx.log(|| {
        format!(
            "{} clusters written to {}",
            corpus.clusters.len(),
            dir.display()
        )
    });
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(Failure::data)?;
    }
    let mut ctx = Ctx {
        verbose: cli.verbose,
        inputs: BTreeMap::new(),
    };
    let tsv = cli.format.unwrap_or(Format::Tsv);
    let (name, result) = match &cli.command {
        Command::Digest(a) => ("digest", cmd_digest(&mut ctx, a, tsv)),
        Command::Build(a) => ("build", cmd_build(&mut ctx, a)),
        Command::Infer(a) => (
            "infer",
            cmd_infer(&mut ctx, a, cli.format.unwrap_or(Format::Json)),
        ),
        Command::Sample(a) => ("sample", cmd_sample(&mut ctx, a, cli.seed, tsv)),
        Command::Bench(a) => ("bench", cmd_bench(&mut ctx, a, cli.seed, tsv)),
        Command::Synth(a) => ("synth", cmd_synth(&mut ctx, a, cli.seed)),
    };
    result?;

    if let Some(path) = &cli.manifest {
        let manifest = RunManifest {
            command: name,
            config: cli,
            input_digests: ctx.inputs,
            seed: cli.seed,
            tool_version: TOOL_VERSION,
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        };
        write_out(Some(path), &to_json(&manifest))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("pepinfer: error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
