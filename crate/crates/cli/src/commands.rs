use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::Serialize;

use redistrict::analytics::{
    complementary_cdf, efficiency_gap, efficiency_gap_votes, gerrymandering_index, interpolated_histogram,
    representativeness_index, write_boxplot_csv, write_ccdf_csv, write_interpolated_csv, write_seats_csv,
    EnsembleIndices, IndexReport,
};
use redistrict::ensemble::{read_ensemble, write_record, PlanRef};
use redistrict::plan::{read_plan_csv, write_plan_csv};
use redistrict::sampler::{chain_seed, generate_ensemble, Neighborhood, SampleRecord, SamplerConfig};
use redistrict::synth::{exact_distribution, make_grid_state, plant_packed_plan, snake_plan, SynthSpec};
use redistrict::tally::{interpolated_seats, seat_count, tally, DistrictResult, RankedShares, VoteTable};
use redistrict::tune::{tune_weights, TuningTargets, WeightLadders};
use redistrict::{load_graph, Compactness, DistrictGraph, Plan, ScoreWeights};

use crate::config::{NeighborhoodFile, RunConfig};
use crate::output::{finish, now, RunManifest, Seeds, Staging};
use crate::{
    CcdfArgs, Command, CompactnessArg, EnsembleArgs, EnumerateArgs, ExportArgs, GraphArgs, IndexKind, IndicesArgs,
    Preset, SampleArgs, SeatsArgs, SynthArgs, TallyArgs, TuneArgs,
};

/// A failed command: bad input (exit 2) or a failure while running (exit 1).
pub enum Failure {
    Input(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Input(e) | Failure::Runtime(e) => e,
        }
    }
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

trait Classify<T> {
    fn input(self) -> Outcome<T>;
    fn runtime(self) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for std::result::Result<T, E> {
    fn input(self) -> Outcome<T> {
        self.map_err(|e| Failure::Input(e.into()))
    }

    fn runtime(self) -> Outcome<T> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Input(anyhow!(msg.into()))
}

pub fn run(command: Command) -> Outcome {
    match command {
        Command::Synth(a) => synth(a),
        Command::Sample(a) => sample(a, false),
        Command::Neighborhood(a) => sample(a, true),
        Command::Tally(a) => tally_cmd(a),
        Command::Indices(a) => indices(a),
        Command::Boxplot(a) => boxplot(a),
        Command::Ccdf(a) => ccdf(a),
        Command::Seats(a) => seats(a),
        Command::Enumerate(a) => enumerate(a),
        Command::Tune(a) => tune(a),
    }
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn read_graph(nodes: &Path, edges: &Path) -> anyhow::Result<DistrictGraph> {
    load_graph(open(nodes)?, open(edges)?).with_context(|| format!("loading graph {}", nodes.display()))
}

fn graph_from(args: &GraphArgs) -> Outcome<(DistrictGraph, PathBuf, PathBuf)> {
    let nodes = args.graph_nodes.clone().ok_or_else(|| usage("--graph-nodes is required"))?;
    let edges = args.graph_edges.clone().ok_or_else(|| usage("--graph-edges is required"))?;
    let g = read_graph(&nodes, &edges).input()?;
    Ok((g, nodes, edges))
}

fn read_plan(path: &Path, g: &DistrictGraph, d: Option<u32>) -> anyhow::Result<Plan> {
    read_plan_csv(open(path)?, g, d).with_context(|| format!("reading plan {}", path.display()))
}

fn read_votes(path: &Path, g: &DistrictGraph) -> anyhow::Result<VoteTable> {
    let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    VoteTable::from_csv(open(path)?, g, label).with_context(|| format!("reading votes {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    serde_json::from_reader(open(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn compactness_of(c: CompactnessArg) -> Compactness {
    match c {
        CompactnessArg::Iso => Compactness::Iso,
        CompactnessArg::Dispersion => Compactness::Dispersion,
    }
}

fn synth(a: SynthArgs) -> Outcome {
    let started = now();
    let mut spec = match &a.spec {
        Some(p) => read_json::<SynthSpec>(p).input()?,
        None => match a.preset {
            Preset::Urban => SynthSpec::urban_fixture(),
            Preset::Uniform => SynthSpec::uniform(10, 10, 4),
        },
    };
    if let Some(r) = a.rows {
        spec.rows = r;
    }
    if let Some(c) = a.cols {
        spec.cols = c;
    }
    if let Some(d) = a.districts {
        spec.num_districts = d;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    spec.validate().input()?;

    let (g, votes) = make_grid_state(&spec).runtime()?;
    let initial = snake_plan(&spec, &g).runtime()?;
    let planted = if spec.num_districts >= 2 {
        Some(plant_packed_plan(&g, &votes, spec.num_districts).runtime()?)
    } else {
        None
    };

    let mut staging = Staging::new(&a.out).runtime()?;
    {
        let nodes = staging.create("nodes.csv").runtime()?;
        let edges = staging.create("edges.csv").runtime()?;
        g.write_csv(nodes, edges).runtime()?;
    }
    votes.write_csv(staging.create("votes.csv").runtime()?, &g).runtime()?;
    write_plan_csv(staging.create("initial_plan.csv").runtime()?, &g, &initial).runtime()?;
    if let Some(p) = &planted {
        write_plan_csv(staging.create("planted_plan.csv").runtime()?, &g, p).runtime()?;
    }
    staging.write_json("spec.json", &spec).runtime()?;
    let mut run = RunConfig::new("nodes.csv".into(), "edges.csv".into(), "initial_plan.csv".into());
    run.votes = Some("votes.csv".into());
    run.num_districts = Some(spec.num_districts);
    staging.write_json("run.json", &run).runtime()?;

    let manifest = RunManifest::new("synth", serde_json::to_value(&spec).runtime()?, started);
    finish(staging, manifest).runtime()?;
    println!("wrote synthetic state to {}", a.out.display());
    Ok(())
}

fn resolve_run_config(a: &SampleArgs, neighborhood_preset: bool) -> Outcome<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p).input()?,
        None => {
            let nodes = a.graph.graph_nodes.clone().ok_or_else(|| usage("--graph-nodes or --config is required"))?;
            let edges = a.graph.graph_edges.clone().ok_or_else(|| usage("--graph-edges or --config is required"))?;
            let plan = a.plan.clone().ok_or_else(|| usage("--plan or --config is required"))?;
            RunConfig::new(nodes, edges, plan)
        }
    };
    if let Some(p) = &a.graph.graph_nodes {
        cfg.graph_nodes = p.clone();
    }
    if let Some(p) = &a.graph.graph_edges {
        cfg.graph_edges = p.clone();
    }
    if let Some(p) = &a.plan {
        cfg.initial_plan = p.clone();
    }
    if let Some(p) = &a.votes {
        cfg.votes = Some(p.clone());
    }
    if let Some(n) = a.samples {
        cfg.target_samples = n;
    }
    if let Some(s) = a.seed {
        cfg.rng_seed = s;
    }
    if let Some(c) = a.chains {
        cfg.chains = c;
    }
    if let Some(d) = a.districts {
        cfg.num_districts = Some(d);
    }
    if let Some(c) = a.compactness {
        cfg.compactness = compactness_of(c);
    }
    if let Some(r) = &a.neighborhood {
        cfg.neighborhood = Some(NeighborhoodFile {
            reference: r.clone(),
            max_deviation: 40,
        });
    }
    if let Some(m) = a.max_dev {
        match cfg.neighborhood.as_mut() {
            Some(n) => n.max_deviation = m,
            None => return Err(usage("--max-dev needs a neighborhood reference plan")),
        }
    }
    if neighborhood_preset && cfg.neighborhood.is_none() {
        return Err(usage("neighborhood sampling needs --neighborhood <plan>"));
    }
    cfg.absolutized().input()
}

fn sample(a: SampleArgs, neighborhood_preset: bool) -> Outcome {
    let started = now();
    let cfg = resolve_run_config(&a, neighborhood_preset)?;
    let g = read_graph(&cfg.graph_nodes, &cfg.graph_edges).input()?;
    let initial = read_plan(&cfg.initial_plan, &g, cfg.num_districts).input()?;
    let d = initial.num_districts();
    let votes = match &cfg.votes {
        Some(p) => Some(read_votes(p, &g).input()?),
        None => None,
    };
    let neighborhood = match &cfg.neighborhood {
        Some(n) => Some(Neighborhood {
            reference: read_plan(&n.reference, &g, Some(d)).input()?,
            max_deviation: n.max_deviation,
        }),
        None => None,
    };
    let settings = cfg.settings(d).input()?;
    let sampler = SamplerConfig {
        settings,
        initial_plan: initial,
        neighborhood,
    };
    sampler.validate(&g).input()?;

    let mut inputs: Vec<&Path> = vec![&cfg.graph_nodes, &cfg.graph_edges, &cfg.initial_plan];
    if let Some(v) = &cfg.votes {
        inputs.push(v);
    }
    if let Some(n) = &cfg.neighborhood {
        inputs.push(&n.reference);
    }
    let mut manifest = RunManifest::new(
        if neighborhood_preset { "neighborhood" } else { "sample" },
        serde_json::to_value(&cfg).runtime()?,
        started,
    );
    manifest.add_inputs(inputs).input()?;
    manifest.seeds = Some(Seeds {
        rng_seed: cfg.rng_seed,
        chain_seeds: (0..cfg.chains).map(|c| chain_seed(cfg.rng_seed, c)).collect(),
    });

    let out = a.out.clone().unwrap_or_else(|| {
        PathBuf::from("runs").join(format!(
            "{}-seed{}",
            chrono::Utc::now().format("%Y%m%dT%H%M%SZ"),
            cfg.rng_seed
        ))
    });
    let mut staging = Staging::new(&out).runtime()?;
    let ensemble = generate_ensemble(&g, &sampler).runtime()?;
    write_samples(&mut staging, &g, &ensemble.records, votes.as_ref(), a.sidecar_plans).runtime()?;
    staging.write_json("summary.json", &ensemble.summary).runtime()?;
    staging.write_json("config.json", &cfg).runtime()?;
    finish(staging, manifest).runtime()?;

    let s = &ensemble.summary;
    println!(
        "{} samples ({} pass thresholds), acceptance rate {:.4}, written to {}",
        s.samples,
        s.passing_samples,
        s.mh_acceptance_rate,
        out.display()
    );
    Ok(())
}

fn write_samples(
    staging: &mut Staging,
    g: &DistrictGraph,
    records: &[SampleRecord],
    votes: Option<&VoteTable>,
    sidecar: bool,
) -> anyhow::Result<()> {
    let mut w = staging.create("ensemble.jsonl")?;
    for r in records {
        if sidecar {
            let rel = format!("plans/chain{:03}_cycle{:06}.csv", r.chain, r.cycle);
            write_plan_csv(staging.create(&rel)?, g, &r.plan)?;
            write_record(&mut w, g, r, votes, PlanRef::Sidecar(&rel))?;
        } else {
            write_record(&mut w, g, r, votes, PlanRef::Inline)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TallyOutput {
    election: String,
    districts: Vec<DistrictResult>,
    ranked_shares: Vec<f64>,
    seats: u32,
    interpolated_seats: f64,
    efficiency_gap: f64,
    efficiency_gap_votes: f64,
}

fn tally_cmd(a: TallyArgs) -> Outcome {
    let (g, _, _) = graph_from(&a.graph)?;
    let plan = read_plan(&a.plan, &g, None).input()?;
    let votes = read_votes(&a.votes, &g).input()?;
    let results = tally(&plan, &votes).runtime()?;
    let out = TallyOutput {
        election: votes.label.clone(),
        ranked_shares: RankedShares::from_results(&results).0,
        seats: seat_count(&results),
        interpolated_seats: interpolated_seats(&results),
        efficiency_gap: efficiency_gap(&results).runtime()?,
        efficiency_gap_votes: efficiency_gap_votes(&results).runtime()?,
        districts: results,
    };
    emit_json(&out, a.out.as_deref())
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Outcome {
    match path {
        Some(p) => {
            let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let name = p
                .file_name()
                .ok_or_else(|| usage("--out must name a file"))?
                .to_string_lossy()
                .into_owned();
            let mut staging = Staging::new(dir).runtime()?;
            staging.write_json(&name, value).runtime()?;
            staging.commit().runtime()?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, value).runtime()?;
            writeln!(stdout).runtime()?;
        }
    }
    Ok(())
}

struct LoadedEnsemble {
    results: Vec<Vec<DistrictResult>>,
    total: usize,
}

fn load_ensemble_results(
    graph: &GraphArgs,
    ensemble: &Path,
    votes: &Path,
    all_samples: bool,
) -> Outcome<(DistrictGraph, VoteTable, LoadedEnsemble)> {
    let (g, _, _) = graph_from(graph)?;
    let votes = read_votes(votes, &g).input()?;
    let records = read_ensemble(open(ensemble).input()?, &g, ensemble.parent())
        .with_context(|| format!("reading ensemble {}", ensemble.display()))
        .input()?;
    if records.is_empty() {
        return Err(usage(format!("ensemble {} is empty", ensemble.display())));
    }
    let total = records.len();
    let kept: Vec<&SampleRecord> = records.iter().filter(|r| all_samples || r.passes).collect();
    if kept.is_empty() {
        return Err(Failure::Runtime(anyhow!(
            "none of the {total} samples pass the thresholds; use --all-samples to include them"
        )));
    }
    let results = kept
        .iter()
        .map(|r| tally(&r.plan, &votes))
        .collect::<Result<Vec<_>, _>>()
        .runtime()?;
    Ok((g, votes, LoadedEnsemble { results, total }))
}

fn export_dir(e: &EnsembleArgs) -> PathBuf {
    e.out.clone().unwrap_or_else(|| match e.ensemble.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    })
}

fn parse_list(s: &str) -> Outcome<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|e| usage(format!("bad number `{x}`: {e}")))
        })
        .collect()
}

#[derive(Serialize)]
struct IndicesOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    ensemble_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples_used: Option<usize>,
    rank_means: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    interpolated_mean: Option<f64>,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    report: Option<IndexReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gerrymandering_index: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    representativeness_index: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    efficiency_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seats: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    interpolated_seats: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ranked_shares: Option<Vec<f64>>,
}

fn indices(a: IndicesArgs) -> Outcome {
    let direct = match &a.shares {
        Some(s) => Some(
            parse_list(s)?
                .into_iter()
                .enumerate()
                .map(|(i, d)| DistrictResult::with_share(i as u32 + 1, d))
                .collect::<Vec<_>>(),
        ),
        None => None,
    };
    let out = match &a.ensemble {
        Some(ens) => {
            let votes = a.votes.as_ref().ok_or_else(|| usage("--votes is required with --ensemble"))?;
            let (g, votes, loaded) = load_ensemble_results(&a.graph, ens, votes, a.all_samples)?;
            let plan_results = match (&a.plan, direct) {
                (Some(p), _) => tally(&read_plan(p, &g, None).input()?, &votes).runtime()?,
                (None, Some(r)) => r,
                (None, None) => return Err(usage("--plan or --shares is required")),
            };
            let idx = EnsembleIndices::new(&loaded.results).runtime()?;
            let report = idx.report(&plan_results).runtime()?;
            IndicesOutput {
                ensemble_size: Some(loaded.total),
                samples_used: Some(loaded.results.len()),
                rank_means: idx.stats.rank_means(),
                interpolated_mean: Some(idx.stats.interpolated_mean),
                report: Some(report),
                gerrymandering_index: None,
                representativeness_index: None,
                efficiency_gap: None,
                seats: None,
                interpolated_seats: None,
                ranked_shares: None,
            }
        }
        None => {
            let results = direct.ok_or_else(|| usage("--shares is required without --ensemble"))?;
            let means = parse_list(a.means.as_deref().ok_or_else(|| usage("--means is required without --ensemble"))?)?;
            let ranked = RankedShares::from_results(&results);
            let interp = interpolated_seats(&results);
            IndicesOutput {
                ensemble_size: None,
                samples_used: None,
                gerrymandering_index: Some(gerrymandering_index(ranked.as_slice(), &means).input()?),
                rank_means: means,
                interpolated_mean: a.interp_mean,
                report: None,
                representativeness_index: a.interp_mean.map(|m| representativeness_index(interp, m)),
                efficiency_gap: Some(efficiency_gap(&results).runtime()?),
                seats: Some(seat_count(&results)),
                interpolated_seats: Some(interp),
                ranked_shares: Some(ranked.0),
            }
        }
    };
    match &a.out {
        Some(dir) => {
            let mut staging = Staging::new(dir).runtime()?;
            staging.write_json("indices.json", &out).runtime()?;
            staging.commit().runtime()?;
            Ok(())
        }
        None => emit_json(&out, None),
    }
}

fn boxplot(a: ExportArgs) -> Outcome {
    let e = &a.ensemble;
    let (_, _, loaded) = load_ensemble_results(&e.graph, &e.ensemble, &e.votes, e.all_samples)?;
    let idx = EnsembleIndices::new(&loaded.results).runtime()?;
    let mut staging = Staging::new(&export_dir(e)).runtime()?;
    write_boxplot_csv(staging.create("boxplot.csv").runtime()?, &idx.stats.ranks).runtime()?;
    staging.commit().runtime()?;
    Ok(())
}

fn ccdf(a: CcdfArgs) -> Outcome {
    let e = &a.ensemble;
    let (_, _, loaded) = load_ensemble_results(&e.graph, &e.ensemble, &e.votes, e.all_samples)?;
    let idx = EnsembleIndices::new(&loaded.results).runtime()?;
    let mut staging = Staging::new(&export_dir(e)).runtime()?;
    let series: [(IndexKind, &str, &[f64]); 3] = [
        (IndexKind::Gerrymandering, "gerrymandering", &idx.gerrymandering),
        (IndexKind::Representativeness, "representativeness", &idx.representativeness),
        (IndexKind::EfficiencyGap, "efficiency_gap", &idx.efficiency_gap),
    ];
    for (kind, name, values) in series {
        if a.index == IndexKind::All || a.index == kind {
            let c = complementary_cdf(values).runtime()?;
            write_ccdf_csv(staging.create(&format!("ccdf_{name}.csv")).runtime()?, &c).runtime()?;
        }
    }
    staging.commit().runtime()?;
    Ok(())
}

fn seats(a: SeatsArgs) -> Outcome {
    let e = &a.ensemble;
    let (_, _, loaded) = load_ensemble_results(&e.graph, &e.ensemble, &e.votes, e.all_samples)?;
    let idx = EnsembleIndices::new(&loaded.results).runtime()?;
    let hist = interpolated_histogram(&idx.stats.interpolated, a.width).input()?;
    let mut staging = Staging::new(&export_dir(e)).runtime()?;
    write_seats_csv(staging.create("seats_hist.csv").runtime()?, &idx.stats.seat_histogram).runtime()?;
    write_interpolated_csv(staging.create("interpolated_hist.csv").runtime()?, &hist, a.width).runtime()?;
    staging.commit().runtime()?;
    Ok(())
}

#[derive(Serialize)]
struct ExactJson {
    beta: f64,
    plans: usize,
    log_partition: f64,
    weights: ScoreWeights,
    compactness: Compactness,
    balance: Option<f64>,
    entries: Vec<ExactEntryJson>,
}

#[derive(Serialize)]
struct ExactEntryJson {
    plan: usize,
    j: f64,
    probability: f64,
}

fn enumerate(a: EnumerateArgs) -> Outcome {
    let started = now();
    let (g, nodes, edges) = graph_from(&a.graph)?;
    let weights = match &a.weights {
        Some(p) => read_json::<ScoreWeights>(p).input()?,
        None => ScoreWeights::default(),
    };
    weights.validate().input()?;
    let compactness = a.compactness.map(compactness_of).unwrap_or_default();
    let exact = exact_distribution(&g, a.districts, &weights, compactness, a.beta, a.balance).input()?;

    let mut staging = Staging::new(&a.out).runtime()?;
    {
        let mut w = staging.create("plans.csv").runtime()?;
        writeln!(w, "plan,id,district").runtime()?;
        for (k, e) in exact.entries.iter().enumerate() {
            for (v, &l) in g.vtds().iter().zip(e.plan.labels()) {
                writeln!(w, "{k},{},{l}", v.id).runtime()?;
            }
        }
        w.flush().runtime()?;
    }
    let json = ExactJson {
        beta: exact.beta,
        plans: exact.entries.len(),
        log_partition: exact.log_partition,
        weights,
        compactness,
        balance: a.balance,
        entries: exact
            .entries
            .iter()
            .enumerate()
            .map(|(k, e)| ExactEntryJson {
                plan: k,
                j: e.j,
                probability: e.probability,
            })
            .collect(),
    };
    staging.write_json("exact.json", &json).runtime()?;
    let config = serde_json::json!({
        "districts": a.districts,
        "balance": a.balance,
        "beta": a.beta,
        "weights": weights,
        "compactness": compactness,
    });
    let mut manifest = RunManifest::new("enumerate", config, started);
    manifest.add_inputs([nodes.as_path(), edges.as_path()]).input()?;
    finish(staging, manifest).runtime()?;
    println!("{} plans written to {}", exact.entries.len(), a.out.display());
    Ok(())
}

fn tune(a: TuneArgs) -> Outcome {
    let started = now();
    let mut cfg = RunConfig::load(&a.config).input()?;
    if let Some(n) = a.samples {
        cfg.target_samples = n;
    }
    if let Some(s) = a.seed {
        cfg.rng_seed = s;
    }
    if let Some(c) = a.chains {
        cfg.chains = c;
    }
    let cfg = cfg.absolutized().input()?;
    let targets = match &a.targets {
        Some(p) => read_json::<TuningTargets>(p).input()?,
        None => TuningTargets::default(),
    };
    let ladders = match &a.ladders {
        Some(p) => read_json::<WeightLadders>(p).input()?,
        None => WeightLadders::default(),
    };
    let g = read_graph(&cfg.graph_nodes, &cfg.graph_edges).input()?;
    let initial = read_plan(&cfg.initial_plan, &g, cfg.num_districts).input()?;
    let settings = cfg.settings(initial.num_districts()).input()?;
    let base = SamplerConfig::new(settings, initial);
    base.validate(&g).input()?;

    let outcome = tune_weights(&g, &base, &targets, &ladders, a.max_trials).runtime()?;
    let mut staging = Staging::new(&a.out).runtime()?;
    staging.write_json("tune.json", &outcome).runtime()?;
    let mut manifest = RunManifest::new(
        "tune",
        serde_json::json!({ "run": cfg, "targets": targets, "ladders": ladders, "max_trials": a.max_trials }),
        started,
    );
    manifest
        .add_inputs([cfg.graph_nodes.as_path(), cfg.graph_edges.as_path(), cfg.initial_plan.as_path()])
        .input()?;
    finish(staging, manifest).runtime()?;
    println!(
        "{} after {} trials: w_p={} w_i={} w_c={} w_m={}",
        if outcome.converged { "converged" } else { "stopped" },
        outcome.trials.len(),
        outcome.weights.w_p,
        outcome.weights.w_i,
        outcome.weights.w_c,
        outcome.weights.w_m
    );
    Ok(())
}
