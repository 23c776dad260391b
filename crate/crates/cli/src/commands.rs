use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;

use eps_fdd_core::classify::{comparison_table, EvaluationReport};
use eps_fdd_core::config::Config;
use eps_fdd_core::eps_plant::{read_telemetry_csv, write_telemetry_csv, TelemetrySample};
use eps_fdd_core::experiment::{self, Method, Task};
use eps_fdd_core::features::{read_feature_csv, write_feature_csv};
use eps_fdd_core::sysid::{BankModel, MlpRegressor};
use eps_fdd_core::{Error, FaultKind};

use crate::output::Writer;
use crate::Common;

#[derive(Debug)]
pub struct CliError(pub Error);

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self.0 {
            Error::Io { .. } => 3,
            Error::QualityGate(_) => 4,
            _ => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Defaults, then the config file, then command-line flags.
pub fn resolve_config(c: &Common) -> Result<Config> {
    let mut config = Config::default();
    if let Some(path) = &c.config {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        config.apply_text(&text, path)?;
    }
    if let Some(seed) = c.seed {
        config.set_seed(seed);
    }
    if let Some(n) = c.n {
        config.classify.n_samples = n;
    }
    if let Some(dt) = c.dt {
        config.classify.dt_s = dt;
    }
    if let Some(m) = c.with_moment {
        config.classify.with_moment = m;
    }
    config.validate()?;
    Ok(config)
}

fn telemetry_name(f: FaultKind) -> String {
    format!("telemetry_{}.csv", f.tag())
}

pub fn simulate(config: &Config, c: &Common, fault: Option<&str>) -> Result<()> {
    let faults = match fault {
        Some(tag) => vec![tag.parse::<FaultKind>()?],
        None => FaultKind::ALL.to_vec(),
    };
    let rows = c.n.unwrap_or_else(|| experiment::run_length(config));
    let mut w = Writer::new(&c.out)?;
    for f in faults {
        let run = eps_fdd_core::simulate(&config.orbit, &config.plant, f, rows, config.classify.dt_s)?;
        let mut buf = Vec::new();
        write_telemetry_csv(&mut buf, &run).expect("writing to memory");
        let path = w.write(&telemetry_name(f), &buf)?;
        println!("{f}: {rows} rows -> {}", path.display());
    }
    w.finish("simulate", &config.hash(), config.seed, BTreeMap::new())?;
    Ok(())
}

fn load_runs(dir: &Path, faults: &[FaultKind]) -> Result<BTreeMap<FaultKind, Vec<TelemetrySample>>> {
    let mut runs = BTreeMap::new();
    for &f in faults {
        let path = dir.join(telemetry_name(f));
        if !path.exists() {
            return Err(Error::Completeness(f.tag().into()).into());
        }
        let file = File::open(&path).map_err(io_err(&path))?;
        runs.insert(f, read_telemetry_csv(BufReader::new(file), &path)?);
    }
    Ok(runs)
}

fn model_file(m: &BankModel) -> String {
    format!("{}.mlp", m.name())
}

pub fn train_models(config: &Config, c: &Common, telemetry: &Path) -> Result<()> {
    let runs = load_runs(telemetry, &FaultKind::ALL)?;
    let bank = experiment::train_bank(config, &runs)?;
    let mut w = Writer::new(&c.out)?;
    let mut reports = BTreeMap::new();
    for m in bank.all() {
        w.write(&model_file(m), m.model.to_text().as_bytes())?;
        let r = m.report.min_correlation().map_or("undefined".into(), |r| format!("{r:.4}"));
        println!("{:<20} rmse {:.3e}  r {r}", m.name(), m.report.rmse);
        reports.insert(m.name(), m.report.clone());
    }
    let mut json = serde_json::to_string_pretty(&reports).expect("reports serialize");
    json.push('\n');
    w.write("fit_reports.json", json.as_bytes())?;
    w.finish("train_models", &config.hash(), config.seed, reports)?;
    Ok(())
}

fn load_model(dir: &Path, name: &str) -> Result<MlpRegressor> {
    let path = dir.join(format!("{name}.mlp"));
    if !path.exists() {
        return Err(Error::Data(format!("model file {} not found", path.display())).into());
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    MlpRegressor::from_text(&text).map_err(|e| match e {
        Error::Parse { line, reason, .. } => CliError(Error::Parse { path, line, reason }),
        e => CliError(e),
    })
}

fn sidecar(task: Task, columns: &[String], config: &Config) -> String {
    let mut s = format!("dataset {task}\nclasses");
    for f in task.class_order() {
        let _ = write!(s, " {f}");
    }
    let _ = writeln!(s, "\nrows_per_class {}", config.classify.n_samples);
    for (k, c) in columns.iter().enumerate() {
        let _ = writeln!(s, "f{k} {c}");
    }
    let _ = writeln!(s, "config_hash {}", config.hash());
    s
}

fn feature_name(task: Task) -> String {
    format!("features_{task}.csv")
}

pub fn extract_features(config: &Config, c: &Common, telemetry: &Path, models: &Path) -> Result<()> {
    let runs = load_runs(telemetry, &FaultKind::ALL)?;
    let eps: Vec<MlpRegressor> = FaultKind::EPS_CLASSES
        .iter()
        .map(|f| load_model(models, &format!("load_{f}")))
        .collect::<Result<_>>()?;
    let eps_refs: Vec<&MlpRegressor> = eps.iter().collect();
    let pv = load_model(models, "pv_Healthy")?;

    let residual_cols: Vec<String> = FaultKind::EPS_CLASSES
        .iter()
        .map(|f| format!("i_load residual against load_{f}"))
        .collect();
    let mut moment_cols = residual_cols.clone();
    moment_cols.push("running mean of i_load since the start of the run".into());
    let soc_source = if config.classify.use_true_soc {
        "simulated soc"
    } else {
        "kalman soc estimate"
    };
    let sets = [
        (Task::Eps, experiment::eps_dataset(config, &runs, &eps_refs, false)?, residual_cols),
        (Task::EpsMoment, experiment::eps_dataset(config, &runs, &eps_refs, true)?, moment_cols),
        (
            Task::Pv,
            experiment::pv_dataset(config, &runs, &pv)?,
            vec!["v_pv residual against pv_Healthy".into(), "i_pv residual against pv_Healthy".into()],
        ),
        (
            Task::Pair,
            experiment::pair_dataset(config, &runs)?,
            vec!["i_load".into(), soc_source.into()],
        ),
    ];

    let mut w = Writer::new(&c.out)?;
    for (task, data, cols) in &sets {
        let mut buf = Vec::new();
        write_feature_csv(&mut buf, data).expect("writing to memory");
        let path = w.write(&feature_name(*task), &buf)?;
        w.write(&format!("features_{task}.txt"), sidecar(*task, cols, config).as_bytes())?;
        println!("{task}: {} rows x {} features -> {}", data.len(), data.n_features(), path.display());
    }
    w.finish("extract_features", &config.hash(), config.seed, BTreeMap::new())?;
    Ok(())
}

fn parse_task(name: &str, with_moment: bool) -> Result<Task> {
    Ok(match name {
        "eps" if with_moment => Task::EpsMoment,
        "eps" => Task::Eps,
        other => other.parse()?,
    })
}

pub fn evaluate(config: &Config, c: &Common, features: &Path, classifier: &str, task: &str) -> Result<()> {
    let task = parse_task(task, config.classify.with_moment)?;
    let methods = if classifier == "all" {
        Method::ALL.to_vec()
    } else {
        vec![classifier.parse::<Method>()?]
    };
    let path = features.join(feature_name(task));
    let file = File::open(&path).map_err(io_err(&path))?;
    let data = read_feature_csv(BufReader::new(file), &path, task.class_order())?;

    let mut w = Writer::new(&c.out)?;
    let mut reports = Vec::new();
    for m in methods {
        let e = experiment::evaluate(config, task, &data, m)?;
        w.write(&format!("report_{task}_{m}.json"), e.report.to_json().as_bytes())?;
        let table = e.confusion.to_table();
        w.write(&format!("confusion_{task}_{m}.txt"), table.as_bytes())?;
        println!("{m} on {task}\n{table}");
        if let Some(sel) = &e.knn_selection {
            let mut json = serde_json::to_string_pretty(sel).expect("selection serializes");
            json.push('\n');
            w.write(&format!("knn_selection_{task}.json"), json.as_bytes())?;
        }
        reports.push(e.report);
    }
    if reports.len() > 1 {
        let table = comparison_table(&reports);
        w.write(&format!("comparison_{task}.txt"), table.as_bytes())?;
        print!("{table}");
    }
    w.finish(&format!("evaluate_{task}"), &config.hash(), config.seed, BTreeMap::new())?;
    Ok(())
}

pub fn report(config: &Config, c: &Common, dir: &Path) -> Result<()> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("report_") && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Data(format!("no report_*.json files in {}", dir.display())).into());
    }
    let mut reports = Vec::new();
    for p in &paths {
        let text = fs::read_to_string(p).map_err(io_err(p))?;
        let r: EvaluationReport = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: p.clone(),
            line: e.line(),
            reason: e.to_string(),
        })?;
        reports.push(r);
    }
    let table = comparison_table(&reports);
    print!("{table}");
    let mut w = Writer::new(&c.out)?;
    w.write("comparison.txt", table.as_bytes())?;
    w.finish("report", &config.hash(), config.seed, BTreeMap::new())?;
    Ok(())
}
