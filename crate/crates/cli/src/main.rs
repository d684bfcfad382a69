mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gmclp::bnc::{BncOptions, SearchStatus};
use gmclp::harness::{run_with_options, RunRecord, Setting};
use gmclp::ingest::{
    assign_weights, generate_planar, load_pmed, parse_coverage_file, skeleton_from_pmed, write_coverage_file,
    IngestError, WeightScheme,
};
use gmclp::lp::{build_lp_relaxation, LpMode};
use gmclp::model::{validate_instance, Instance};
use gmclp::presolve::presolve_pipeline;
use rayon::prelude::*;

use report::{aggregate, error_row, format_table, row_from_record, write_csv, BenchOutput, Manifest, ManifestEntry};

const EXIT_LIMIT: u8 = 2;
const EXIT_INVALID: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Invalid(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => EXIT_IO,
            CliError::Invalid(_) => EXIT_INVALID,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Invalid(m) => write!(f, "invalid input: {m}"),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io(err) => CliError::Io(err.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "gmclp", version, about = "Exact solver for the generalized maximal covering location problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate planar or p-median based instances and record them in a manifest.
    Generate(GenerateArgs),
    /// Solve one instance and print its JSON record.
    Solve(SolveArgs),
    /// Run presolve only and print the reduction report.
    Presolve(PresolveArgs),
    /// Solve every manifest instance under each setting.
    Bench(BenchArgs),
    /// Print per-setting aggregates of a bench JSON file.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    facilities: Option<usize>,
    #[arg(long)]
    customers: Option<usize>,
    /// Number of facilities to open (defaults to the p-median value with --pmed).
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    radius: Option<f64>,
    /// Build the skeleton from an OR-Library p-median file instead.
    #[arg(long)]
    pmed: Option<PathBuf>,
    /// "unit" or "ratio:R" with R in {0.1, 0.3, 0.5, 0.7, 0.9}.
    #[arg(long, default_value = "unit")]
    weights: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of instances, using seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Manifest to create or extend (default: OUT_DIR/manifest.json).
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    group: Option<String>,
}

#[derive(Args, Debug, Clone)]
struct LimitArgs {
    /// Pipeline: baseline, presolve-only, full, no-agg, no-dr, no-tci.
    #[arg(long, default_value = "full")]
    setting: Setting,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    node_limit: Option<usize>,
    /// Extra solver options as key=value, e.g. cuts_per_round=100.
    #[arg(long = "option", value_name = "KEY=VALUE")]
    options: Vec<String>,
}

impl LimitArgs {
    fn bnc_options(&self) -> Result<BncOptions, CliError> {
        let mut o = self.setting.options();
        o.time_limit = self.time_limit;
        o.node_limit = self.node_limit;
        for kv in &self.options {
            let (k, v) =
                kv.split_once('=').ok_or_else(|| CliError::Invalid(format!("expected key=value, got {kv:?}")))?;
            o.set(k.trim(), v.trim()).map_err(CliError::Invalid)?;
        }
        Ok(o)
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    instance: PathBuf,
    #[command(flatten)]
    limits: LimitArgs,
    /// Write the open facilities, one index per line.
    #[arg(long)]
    solution_out: Option<PathBuf>,
    /// Write the JSON record to a file as well as stdout.
    #[arg(long)]
    json_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PresolveArgs {
    instance: PathBuf,
    #[arg(long, default_value = "full")]
    setting: Setting,
    /// Write the reduced relaxation in LP file format.
    #[arg(long)]
    lp_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    manifest: PathBuf,
    /// Comma-separated settings.
    #[arg(long, value_delimiter = ',', default_value = "full")]
    settings: Vec<Setting>,
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    node_limit: Option<usize>,
    #[arg(long = "option", value_name = "KEY=VALUE")]
    options: Vec<String>,
    /// Parallel solves; defaults to the number of cores.
    #[arg(long, env = "GMCLP_WORKERS")]
    workers: Option<usize>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// JSON written by `bench --json`.
    input: PathBuf,
    /// Print the aggregates as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

fn read_instance(path: &Path) -> Result<Instance, CliError> {
    let inst = parse_coverage_file(path).map_err(|e| match e {
        IngestError::Io(err) => CliError::io(path, err),
        other => other.into(),
    })?;
    let report = validate_instance(&inst);
    if !report.is_pass() {
        return Err(CliError::Invalid(report.to_string()));
    }
    Ok(inst)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn instance_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

fn cmd_generate(a: &GenerateArgs) -> Result<u8, CliError> {
    if a.p == Some(0) {
        return Err(CliError::Invalid("p must be at least 1".into()));
    }
    if a.count == 0 {
        return Err(CliError::Invalid("count must be at least 1".into()));
    }
    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    let manifest_path = a.manifest.clone().unwrap_or_else(|| a.out_dir.join("manifest.json"));
    let mut manifest = if manifest_path.exists() { Manifest::load(&manifest_path)? } else { Manifest::default() };
    let pmed = a.pmed.as_deref().map(load_pmed).transpose()?;

    for seed in a.seed..a.seed + a.count {
        let scheme = WeightScheme::parse(&a.weights, seed)?;
        let mut params = std::collections::BTreeMap::new();
        let (skeleton, stem) = match &pmed {
            Some(data) => {
                let p = a.p.unwrap_or(data.p);
                if p == 0 || p > data.n {
                    return Err(CliError::Invalid(format!("p = {p} outside 1..={}", data.n)));
                }
                let src = a.pmed.as_ref().map(|x| x.display().to_string());
                let sk = skeleton_from_pmed(data, Some(p), src);
                params.insert("p".into(), p.to_string());
                let base = a.pmed.as_deref().map(instance_id).unwrap_or_default();
                (sk, format!("{base}-p{p}-{}-s{seed}", scheme.label().replace(':', "")))
            }
            None => {
                let (Some(m), Some(n), Some(p), Some(r)) = (a.facilities, a.customers, a.p, a.radius) else {
                    return Err(CliError::Invalid(
                        "planar generation needs --facilities, --customers, --p and --radius".into(),
                    ));
                };
                if m == 0 || p > m || !(r.is_finite() && r >= 0.0) {
                    return Err(CliError::Invalid(format!("bad parameters: facilities {m}, p {p}, radius {r}")));
                }
                for (k, v) in [
                    ("facilities", m.to_string()),
                    ("customers", n.to_string()),
                    ("p", p.to_string()),
                    ("radius", r.to_string()),
                ] {
                    params.insert(k.to_string(), v);
                }
                let stem = format!("planar-m{m}-n{n}-p{p}-r{r}-{}-s{seed}", scheme.label().replace(':', ""));
                (generate_planar(n, m, p, r, seed), stem)
            }
        };
        let inst = assign_weights(&skeleton, &scheme);
        let report = validate_instance(&inst);
        if !report.is_pass() {
            return Err(CliError::Invalid(report.to_string()));
        }
        let file = format!("{stem}.gmclp");
        let path = a.out_dir.join(&file);
        write_coverage_file(&inst, &path)?;
        println!("{}", path.display());
        let rel = if a.manifest.is_none() { PathBuf::from(&file) } else { std::path::absolute(&path).unwrap_or(path) };
        manifest.upsert(ManifestEntry {
            id: stem,
            path: rel,
            group: a.group.clone(),
            seed: Some(seed),
            weights: Some(scheme.label()),
            params,
        });
    }
    manifest.save(&manifest_path)?;
    Ok(0)
}

fn status_code(status: SearchStatus) -> u8 {
    match status {
        SearchStatus::Optimal => 0,
        SearchStatus::NodeLimit | SearchStatus::TimeLimit => EXIT_LIMIT,
    }
}

fn cmd_solve(a: &SolveArgs) -> Result<u8, CliError> {
    let inst = read_instance(&a.instance)?;
    let opts = a.limits.bnc_options()?;
    let rec = run_with_options(&inst, &instance_id(&a.instance), a.limits.setting, &opts)
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    let json = serde_json::to_string_pretty(&rec).expect("record serializes");
    println!("{json}");
    if let Some(p) = &a.json_out {
        write_text(p, &(json + "\n"))?;
    }
    if let Some(p) = &a.solution_out {
        let text: String = rec.open.iter().map(|i| format!("{i}\n")).collect();
        write_text(p, &text)?;
    }
    Ok(status_code(rec.status))
}

fn cmd_presolve(a: &PresolveArgs) -> Result<u8, CliError> {
    let inst = read_instance(&a.instance)?;
    let opts = a.setting.options();
    let (reduced, artifacts, report) =
        presolve_pipeline(&inst, &opts.presolve).map_err(|e| CliError::Invalid(e.to_string()))?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    if let Some(p) = &a.lp_out {
        let mode = LpMode { aggregated_cover: opts.aggregated_cover, dominance_rows: opts.presolve.dominance };
        let model =
            build_lp_relaxation(&reduced, Some(&artifacts), mode).map_err(|e| CliError::Invalid(e.to_string()))?;
        write_text(p, &model.to_lp_format())?;
    }
    Ok(0)
}

fn cmd_bench(a: &BenchArgs) -> Result<u8, CliError> {
    let manifest = Manifest::load(&a.manifest)?;
    let mut base = BncOptions { time_limit: a.time_limit, node_limit: a.node_limit, ..BncOptions::default() };
    for kv in &a.options {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Invalid(format!("expected key=value, got {kv:?}")))?;
        base.set(k.trim(), v.trim()).map_err(CliError::Invalid)?;
    }
    let jobs: Vec<(&ManifestEntry, Setting)> =
        manifest.instances.iter().flat_map(|e| a.settings.iter().map(move |&s| (e, s))).collect();
    let workers = a.workers.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Invalid(format!("worker pool: {e}")))?;
    let results: Vec<Result<RunRecord, String>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(entry, setting)| {
                let path = manifest.resolve(&a.manifest, entry);
                let inst = read_instance(&path).map_err(|e| e.to_string())?;
                let opts = bench_options(&base, setting);
                log::info!("solving {} with {}", entry.id, setting);
                run_with_options(&inst, &entry.id, setting, &opts).map_err(|e| e.to_string())
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut grouped = Vec::new();
    for ((entry, setting), res) in jobs.iter().zip(results) {
        match res {
            Ok(r) => {
                rows.push(row_from_record(&r, entry.group.clone()));
                grouped.push((entry.group.clone(), r.clone()));
                records.push(r);
            }
            Err(msg) => {
                log::warn!("{} / {}: {msg}", entry.id, setting);
                rows.push(error_row(&entry.id, entry.group.clone(), setting.name(), msg));
            }
        }
    }
    let out = BenchOutput { records, rows, aggregates: aggregate(&grouped) };
    if let Some(p) = &a.csv {
        write_csv(&out.rows, p)?;
    }
    if let Some(p) = &a.json {
        write_text(p, &(serde_json::to_string_pretty(&out).expect("bench output serializes") + "\n"))?;
    }
    print!("{}", format_table(&out.aggregates));
    Ok(0)
}

/// Setting switches on top of the shared limits and overrides.
fn bench_options(base: &BncOptions, setting: Setting) -> BncOptions {
    let s = setting.options();
    BncOptions { presolve: s.presolve, cuts: s.cuts && base.cuts, ..base.clone() }
}

fn cmd_report(a: &ReportArgs) -> Result<u8, CliError> {
    let text = std::fs::read_to_string(&a.input).map_err(|e| CliError::io(&a.input, e))?;
    let out: BenchOutput =
        serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", a.input.display())))?;
    let groups: std::collections::HashMap<(String, String), Option<String>> =
        out.rows.iter().map(|r| ((r.instance_id.clone(), r.setting.clone()), r.group.clone())).collect();
    let grouped: Vec<_> = out
        .records
        .iter()
        .map(|r| (groups.get(&(r.instance_id.clone(), r.setting.name().to_string())).cloned().flatten(), r.clone()))
        .collect();
    let aggs = aggregate(&grouped);
    if a.json {
        println!("{}", serde_json::to_string_pretty(&aggs).expect("aggregates serialize"));
    } else {
        print!("{}", format_table(&aggs));
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let res = match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Presolve(a) => cmd_presolve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Report(a) => cmd_report(a),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
