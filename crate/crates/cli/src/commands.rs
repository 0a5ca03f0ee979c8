use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use navimpress::annotate::{AnnotationService, AssignmentPlan};
use navimpress::dataio::checkpoint::{load_checkpoint, save_checkpoint};
use navimpress::dataio::trace::trace_bytes;
use navimpress::dataio::{export_trace, read_dataset, read_map, write_atomic, write_dataset, write_map, Checkpoint, Dataset};
use navimpress::eval::{
    evaluate, evaluate_binary, loocv, make_split, stratified_error, summarize, CvConfig, F1Average, ResultsTable,
    SampleKey, SplitCounts, SplitSpec,
};
use navimpress::features::{FeatureConfig, FeatureSet, WindowTensor};
use navimpress::models::{fit_model, FitOptions, ModelKind};
use navimpress::sim::{default_warehouse, run_session, tasks_for, BehaviorKind, SessionConfig};
use navimpress::{Binarizer, Dimension, OccupancyGrid, Phase, Ratings};
use serde::Serialize;
use serde_json::json;

use crate::args::*;
use crate::{server, CliError, CliResult};

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Train(a) => train(&a),
        Command::Eval(a) => eval(&a),
        Command::Loocv(a) => cross_validate(&a),
        Command::ExportTraces(a) => export_traces(&a),
        Command::Plan(a) => plan(&a),
        Command::Serve(a) => serve(&a),
        Command::MakeMap(a) => Ok(write_map(&default_warehouse(), &a.out)?),
    }
}

/// Serialize `value` as pretty JSON and write it atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    bytes.push(b'\n');
    Ok(write_atomic(path, &bytes)?)
}

/// How a dataset written to `out` should refer to `map`: relative when the
/// map sits under the dataset's directory, absolute otherwise.
fn map_reference(map: &Path, out: &Path) -> CliResult<String> {
    let canon = |p: &Path| p.canonicalize().map_err(|e| CliError::Data(format!("{}: {e}", p.display())));
    let map = canon(map)?;
    let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let dir = canon(dir)?;
    Ok(match map.strip_prefix(&dir) {
        Ok(rel) => rel.display().to_string(),
        Err(_) => map.display().to_string(),
    })
}

/// Read a dataset and the map it was simulated on. Datasets without a map
/// reference use the built-in warehouse.
pub fn load_dataset(path: &Path) -> CliResult<(Dataset, Arc<OccupancyGrid>)> {
    let ds = read_dataset(path)?;
    let map = match ds.header.map {
        Some(_) => ds.load_map(path)?,
        None => default_warehouse(),
    };
    Ok((ds, Arc::new(map)))
}

pub fn windows(ds: &Dataset, map: &Arc<OccupancyGrid>) -> CliResult<Vec<WindowTensor>> {
    Ok(ds
        .samples
        .iter()
        .map(|s| WindowTensor::from_sample(s, map, &ds.header.feature_config))
        .collect::<navimpress::Result<_>>()?)
}

/// The train/validation/test split used by every subcommand for a seed.
pub fn split_for(windows: &[WindowTensor], seed: u64) -> CliResult<SplitSpec> {
    let keys: Vec<SampleKey> = windows.iter().map(SampleKey::from).collect();
    let participants = keys.iter().map(|k| k.participant_id.as_str()).collect::<BTreeSet<_>>().len();
    Ok(make_split(&keys, SplitCounts::for_dataset(keys.len(), participants), seed)?)
}

fn select_part(windows: Vec<WindowTensor>, part: SplitPart, seed: u64) -> CliResult<Vec<WindowTensor>> {
    if part == SplitPart::All {
        return Ok(windows);
    }
    let split = split_for(&windows, seed)?;
    let (train, val, test) = split.apply(&windows, |w| &w.sample_id);
    Ok(match part {
        SplitPart::Train => train,
        SplitPart::Val => val,
        _ => test,
    })
}

fn check_supported(kind: ModelKind, set: FeatureSet) -> CliResult {
    if kind.supports(set) {
        Ok(())
    } else {
        Err(navimpress::Error::InvalidFeatureSet(format!("{set} with {kind}")).into())
    }
}

fn simulate(a: &SimulateArgs) -> CliResult {
    let (map, reference) = match &a.map {
        Some(p) => (read_map(p)?, Some(map_reference(p, &a.out)?)),
        None => (default_warehouse(), None),
    };
    let map = Arc::new(map);
    let tasks = tasks_for(&map)?;
    let config = SessionConfig {
        participants: a.participants,
        tasks: a.tasks,
        seed: a.seed,
        queries_per_episode: (a.queries_per_episode > 0.0).then_some(a.queries_per_episode),
        ..SessionConfig::default()
    };
    let result = run_session(map, &tasks, &config)?;

    let mut hist: BTreeMap<BehaviorKind, [[usize; 5]; 3]> = BTreeMap::new();
    for (s, &b) in result.samples.iter().zip(&result.behaviors) {
        let h = hist.entry(b).or_default();
        for d in Dimension::ALL {
            h[d.index()][s.labels.get(d) as usize - 1] += 1;
        }
    }
    let n = result.samples.len();
    write_dataset(&Dataset::new(reference, FeatureConfig::default(), result.samples), &a.out)?;

    println!("samples: {n} ({} participants x {} tasks)", a.participants, a.tasks);
    println!("{:<10} {:>6}  {:<26}{:<26}{:<26}", "behavior", "n", "competence 1..5", "surprise 1..5", "intention 1..5");
    for (b, h) in &hist {
        let total: usize = h[0].iter().sum();
        let cols: Vec<String> = h.iter().map(|c| format!("{c:?}")).collect();
        println!("{:<10} {:>6}  {:<26}{:<26}{:<26}", b.to_string(), total, cols[0], cols[1], cols[2]);
    }
    Ok(())
}

fn train(a: &TrainArgs) -> CliResult {
    let kind = ModelKind::from(a.model);
    let set = FeatureSet::from(a.features);
    check_supported(kind, set)?;
    let (ds, map) = load_dataset(&a.dataset)?;
    let w = windows(&ds, &map)?;
    let split = split_for(&w, a.seed)?;
    let (train, val, _) = split.apply(&w, |x| &x.sample_id);
    let options = FitOptions { forest: a.grid.forest(), grid: a.grid.grid(kind) };
    let (predictor, report) = fit_model(kind, set, &train, &val, &options, a.seed)?;
    save_checkpoint(&Checkpoint::new(predictor, report.clone()), &a.out)?;
    if let Some(path) = &a.report {
        match &report {
            Some(r) => write_json(path, r)?,
            None => write_json(path, &json!({ "kind": kind, "feature_set": set, "seed": a.seed }))?,
        }
    }
    println!("trained {kind} on {} features: {} train, {} validation samples", set.short_name(), train.len(), val.len());
    if let Some(r) = &report {
        let h = &r.hyper;
        println!(
            "selected lr={} batch={} dropout={} hidden={} at epoch {} (val loss {:.4})",
            h.lr, h.batch_size, h.dropout, h.hidden, r.selected_epoch, r.runs[r.selected].best_val_loss
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalOutput {
    model: ModelKind,
    feature_set: Option<FeatureSet>,
    split: String,
    seed: u64,
    binary: bool,
    metrics: navimpress::eval::MetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    phase_errors: Option<navimpress::eval::PhaseErrors>,
}

fn eval(a: &EvalArgs) -> CliResult {
    let ck = load_checkpoint(&a.model)?;
    let (ds, map) = load_dataset(&a.dataset)?;
    let w = select_part(windows(&ds, &map)?, a.split, a.seed)?;
    let preds = ck.predictor.predict(&w)?;
    let targets: Vec<Ratings> = w.iter().map(|x| x.labels).collect();
    let metrics = if a.binary {
        evaluate_binary(&preds, &targets, &Binarizer::default())?
    } else {
        evaluate(&preds, &targets, F1Average::Macro)?
    };
    let phase_errors = if a.stratify_phase {
        let phases: Vec<Phase> = w.iter().map(|x| x.phase).collect();
        Some(stratified_error(&preds, &targets, &phases)?)
    } else {
        None
    };

    let kind = ck.predictor.kind();
    let sets = match ck.predictor.feature_set() {
        Some(s) => vec![s],
        None => FeatureSet::ALL.to_vec(),
    };
    let split_name = format!("{:?}", a.split).to_lowercase();
    let kind_of_score = if a.binary { "binary" } else { "five-point" };
    let mut table = ResultsTable::new(format!(
        "{} {split_name} samples, {kind_of_score}; ± is std over training seeds (one checkpoint, one seed)",
        w.len()
    ));
    for s in &sets {
        table.add(kind.name(), *s, metrics.clone());
    }
    let tsv = table.to_tsv();
    print!("{tsv}");
    if let Some(p) = &phase_errors {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
        println!("mae before switch: {} (n={})", fmt(p.before), p.n_before);
        println!("mae after switch: {} (n={})", fmt(p.after), p.n_after);
    }
    if let Some(path) = &a.table {
        write_atomic(path, tsv.as_bytes())?;
    }
    if let Some(path) = &a.out {
        let out = EvalOutput {
            model: kind,
            feature_set: ck.predictor.feature_set(),
            split: split_name,
            seed: a.seed,
            binary: a.binary,
            metrics,
            phase_errors,
        };
        write_json(path, &out)?;
    }
    Ok(())
}

fn cross_validate(a: &LoocvArgs) -> CliResult {
    let kind = ModelKind::from(a.model);
    let set = FeatureSet::from(a.features);
    check_supported(kind, set)?;
    let (ds, map) = load_dataset(&a.dataset)?;
    let w = windows(&ds, &map)?;
    let config = CvConfig {
        kind,
        set,
        options: FitOptions { forest: a.grid.forest(), grid: a.grid.grid(kind) },
        average: F1Average::Macro,
        binarizer: Binarizer::default(),
        seed: a.seed,
        jobs: a.jobs,
    };
    let folds = loocv(&w, &config)?;
    let summary = summarize(&folds);
    println!("participant\tn_test\tf1_multiclass\tf1_binary\tacc_multiclass\tacc_binary");
    for f in &folds {
        println!(
            "{}\t{}\t{:.3}\t{:.3}\t{:.3}\t{:.3}",
            f.participant_id, f.multiclass.n, f.multiclass.f1_macro, f.binary.f1_macro, f.multiclass.accuracy, f.binary.accuracy
        );
    }
    let ms = |m: navimpress::eval::MeanStd| format!("{:.3}±{:.3}", m.mean, m.std);
    println!(
        "mean\t-\t{}\t{}\t{}\t{}",
        ms(summary.multiclass_f1),
        ms(summary.binary_f1),
        ms(summary.multiclass_accuracy),
        ms(summary.binary_accuracy)
    );
    if let Some(path) = &a.out {
        write_json(path, &json!({ "model": kind, "feature_set": set, "seed": a.seed, "folds": folds, "summary": summary }))?;
    }
    Ok(())
}

fn export_traces(a: &ExportArgs) -> CliResult {
    let (ds, map) = load_dataset(&a.dataset)?;
    std::fs::create_dir_all(&a.out).map_err(|e| CliError::Internal(format!("{}: {e}", a.out.display())))?;
    for s in &ds.samples {
        let bytes = trace_bytes(&export_trace(s, &map)?)?;
        write_atomic(&trace_path(&a.out, &s.sample_id), &bytes)?;
    }
    println!("wrote {} traces to {}", ds.samples.len(), a.out.display());
    Ok(())
}

pub fn trace_path(dir: &Path, sample_id: &str) -> PathBuf {
    dir.join(format!("{sample_id}.json"))
}

fn plan(a: &PlanArgs) -> CliResult {
    let (ds, map) = load_dataset(&a.dataset)?;
    let ids: Vec<String> = if a.samples == SplitPart::All {
        ds.samples.iter().map(|s| s.sample_id.clone()).collect()
    } else {
        select_part(windows(&ds, &map)?, a.samples, a.seed)?.into_iter().map(|w| w.sample_id).collect()
    };
    let conditions: Vec<FeatureSet> = a.conditions.iter().map(|&c| c.into()).collect();
    let plan = AssignmentPlan::build(&ids, &conditions, a.per_sample, a.per_annotator)?;
    write_json(&a.out, &plan)?;
    println!(
        "{} samples, {} annotators, {} assignments",
        plan.sample_ids.len(),
        plan.queues.len(),
        plan.total_assignments()
    );
    Ok(())
}

fn serve(a: &ServeArgs) -> CliResult {
    let (ds, map) = load_dataset(&a.dataset)?;
    let text = std::fs::read_to_string(&a.plan).map_err(|e| navimpress::Error::io(&a.plan, e))?;
    let plan: AssignmentPlan = serde_json::from_str(&text).map_err(navimpress::Error::from)?;
    let truth = ds.samples.iter().map(|s| (s.sample_id.clone(), s.labels)).collect();
    let service = AnnotationService::open(plan, truth, &a.out)?;
    let state = server::AppState::new(service, ds.samples, map);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
    runtime.block_on(async {
        let addr = format!("{}:{}", a.host, a.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::Internal(format!("bind {addr}: {e}")))?;
        eprintln!("listening on http://{addr}");
        axum::serve(listener, server::router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::Internal(e.to_string()))
    })
}
