//! `pearson`: simulate, fit, study, icecore and bench.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use pearson_core::estimators::{Estimator, NestedSk};
use pearson_core::models::sk::SkParams;
use pearson_core::models::wf::{wf_natural_to_reduced, WfNaturalParams};
use pearson_core::optimizer::OptSchedule;
use pearson_core::sim::{simulate_ou, simulate_sk_milstein, simulate_wf, subsample, Path, SimConfig};
use pearson_core::study::{self, apply_override, ModelKind, StudyConfig, SCHEMA};
use pearson_core::{Error, Result};

const EXIT_INVALID: u8 = 2;
const EXIT_ESTIMATION: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "pearson", version, about = "Splitting estimators for nonlinear diffusions")]
struct Cli {
    /// JSON configuration document.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for simulation (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads for studies.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Use 1000 replications.
    #[arg(long, global = true)]
    paper_scale: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a path and write it as CSV with a JSON sidecar.
    Simulate(SimArgs),
    /// Fit one dataset.
    Fit(FitArgs),
    /// Replicated simulation study.
    Study(StudyArgs),
    /// Nested oscillator fits on a scalar series.
    Icecore(IceArgs),
    /// Median wall-clock per estimator and step.
    Bench(StudyArgs),
}

#[derive(Args, Debug)]
struct SimArgs {
    #[arg(long, default_value = "sk")]
    model: ModelKind,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Path CSV (`t,x1,...`).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: ModelKind,
    #[arg(long, default_value = "ss")]
    estimator: Estimator,
    /// JSON file with a starting parameter map.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Optimiser trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StudyArgs {
    #[arg(long)]
    model: Option<ModelKind>,
}

#[derive(Args, Debug)]
struct IceArgs {
    /// Series CSV with columns `t,x`.
    #[arg(long)]
    data: PathBuf,
    /// m1, m2, m3 or all.
    #[arg(long, default_value = "all")]
    model: String,
    #[arg(long, default_value = "ss")]
    estimator: Estimator,
    #[arg(long)]
    init: Option<PathBuf>,
}

/// Split `--a.b=v` / `--a.b v` overrides from the ordinary arguments.
fn split_overrides(args: Vec<String>) -> (Vec<String>, Vec<(String, String)>) {
    let mut rest = Vec::new();
    let mut ov = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let dotted = a.strip_prefix("--").filter(|s| s.split('=').next().is_some_and(|k| k.contains('.')));
        match dotted {
            Some(body) => match body.split_once('=') {
                Some((k, v)) => ov.push((k.to_string(), v.to_string())),
                None => {
                    let v = it.next().unwrap_or_default();
                    ov.push((body.to_string(), v));
                }
            },
            None => rest.push(a),
        }
    }
    (rest, ov)
}

fn merge(base: &mut Value, top: &Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() && k != "theta0" && k != "theta_init" => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, t) => *b = t.clone(),
    }
}

fn read_json(p: &FsPath) -> Result<Value> {
    let text = fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display())))
}

fn write_json(p: &FsPath, v: &Value) -> Result<()> {
    let mut f = BufWriter::new(File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?);
    serde_json::to_writer_pretty(&mut f, v).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

fn create(p: &FsPath) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?))
}

fn read_path(p: &FsPath) -> Result<Path> {
    let f = File::open(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
    Path::read_csv(BufReader::new(f))
}

struct Ctx {
    doc: Value,
    seed: Option<u64>,
    out: PathBuf,
    workers: Option<usize>,
    paper_scale: bool,
}

impl Ctx {
    fn section(&self, name: &str) -> Value {
        self.doc.get(name).cloned().unwrap_or_else(|| json!({}))
    }

    fn schedule(&self, model: ModelKind) -> Result<OptSchedule> {
        match self.doc.get("schedule") {
            Some(v) => {
                let s: OptSchedule = serde_json::from_value(v.clone())?;
                s.validate()?;
                Ok(s)
            }
            None => Ok(model.default_schedule()),
        }
    }

    fn out_file(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).map_err(|e| Error::Io(format!("{}: {e}", self.out.display())))?;
        Ok(self.out.join(name))
    }
}

fn map_of(v: &Value, what: &str) -> Result<Map<String, Value>> {
    v.as_object().cloned().ok_or_else(|| Error::InvalidInput(format!("{what} must be a JSON object")))
}

fn cmd_simulate(ctx: &Ctx, args: &SimArgs) -> Result<()> {
    let model = args.model;
    let mut cfg = match model {
        ModelKind::Wf => json!({
            "theta": WfNaturalParams::paper_truth().to_map(),
            "h_sim": 1e-4, "n_steps": 200000, "factor": 2000, "x0": [0.25, 0.25, 0.25], "seed": 1
        }),
        ModelKind::Sk => json!({
            "theta": SkParams::paper_truth().to_map(),
            "h_sim": 1e-4, "n_steps": 500000, "factor": 10, "x0": [0.0, 0.0], "seed": 1
        }),
        ModelKind::Ou => json!({
            "theta": {"ou.lambda": 1.0, "ou.m": 0.0, "ou.sigma": 0.5},
            "h_sim": 0.01, "n_steps": 5000, "factor": 1, "x0": [0.0], "seed": 1
        }),
    };
    merge(&mut cfg, &ctx.section("simulate"));
    if let Some(s) = ctx.seed {
        cfg["seed"] = json!(s);
    }
    cfg["model"] = json!(model);
    let theta_map = map_of(&cfg["theta"], "simulate.theta")?;
    let num = |k: &str| cfg[k].as_f64().ok_or_else(|| Error::InvalidInput(format!("simulate.{k} must be a number")));
    let sc = SimConfig {
        h_sim: num("h_sim")?,
        n_steps: cfg["n_steps"].as_u64().ok_or_else(|| Error::InvalidInput("simulate.n_steps must be an integer".into()))? as usize,
        seed: cfg["seed"].as_u64().ok_or_else(|| Error::InvalidInput("simulate.seed must be an integer".into()))?,
        stream: cfg.get("stream").and_then(Value::as_u64).unwrap_or(0),
        x0: serde_json::from_value(cfg["x0"].clone())?,
    };
    let factor = cfg["factor"].as_u64().ok_or_else(|| Error::InvalidInput("simulate.factor must be an integer".into()))? as usize;
    let fine = match model {
        ModelKind::Wf => {
            let n = WfNaturalParams::from_map(&theta_map)?;
            simulate_wf(&wf_natural_to_reduced(&n), &sc)?
        }
        ModelKind::Sk => simulate_sk_milstein(&SkParams::from_map(&theta_map)?, &sc)?,
        ModelKind::Ou => {
            let t = model.theta_from_map(&theta_map)?;
            simulate_ou(t[0], t[1], t[2], &sc)?
        }
    };
    let path = subsample(&fine, factor)?;
    let csv = ctx.out_file("path.csv")?;
    let mut w = create(&csv)?;
    path.write_csv(&mut w)?;
    w.flush()?;
    let side = json!({
        "schema": SCHEMA,
        "command": "simulate",
        "config": cfg,
        "seed": sc.seed,
        "params": theta_map,
        "h": path.step(),
        "N": path.len() - 1,
    });
    write_json(&ctx.out_file("path.json")?, &side)?;
    println!("{}", csv.display());
    Ok(())
}

fn init_map(ctx: &Ctx, model: ModelKind, file: &Option<PathBuf>, section: &str) -> Result<Map<String, Value>> {
    if let Some(p) = file {
        return map_of(&read_json(p)?, "init");
    }
    match ctx.section(section).get("init") {
        Some(v) => map_of(v, "init"),
        None => Ok(model.default_init_map()),
    }
}

fn cmd_fit(ctx: &Ctx, args: &FitArgs) -> Result<bool> {
    let path = read_path(&args.data)?;
    let data = path.to_observations()?;
    let imap = init_map(ctx, args.model, &args.init, "fit")?;
    let init = args.model.theta_from_map(&imap)?;
    let schedule = ctx.schedule(args.model)?;
    let out = study::fit_dataset(args.model, args.estimator, &data, &init, &schedule)?;
    if let Some(t) = &args.trace {
        let mut w = create(t)?;
        writeln!(w, "phase,iteration,objective,grad_norm")?;
        for r in &out.fit.trace {
            writeln!(w, "{},{},{:.16e},{:.16e}", r.phase, r.iteration, r.objective, r.grad_norm)?;
        }
        w.flush()?;
    }
    let names = args.model.param_names();
    let estimates: Map<String, Value> = names.iter().cloned().zip(out.fit.theta_hat.iter().map(|v| json!(v))).collect();
    let mut fit = serde_json::to_value(&out.fit)?;
    if let Some(o) = fit.as_object_mut() {
        o.remove("trace");
    }
    let report = json!({
        "schema": SCHEMA,
        "command": "fit",
        "config": {
            "data": args.data.display().to_string(),
            "model": args.model,
            "estimator": args.estimator,
            "init": imap,
            "schedule": schedule,
        },
        "status": out.status,
        "param_names": names,
        "estimates": estimates,
        "nll": study::nll_from_objective(out.fit.objective, data.n_transitions(), study::transition_dim(args.model, args.estimator)),
        "fit": fit,
    });
    let file = ctx.out_file("fit.json")?;
    write_json(&file, &report)?;
    println!("{}", file.display());
    Ok(out.fit.converged)
}

fn study_config(ctx: &Ctx, model: Option<ModelKind>) -> Result<StudyConfig> {
    let given = ctx.section("study");
    let model = match model {
        Some(m) => m,
        None => match given.get("model") {
            Some(v) => serde_json::from_value(v.clone())?,
            None => ModelKind::Sk,
        },
    };
    let base = match model {
        ModelKind::Wf => StudyConfig::wf_default(),
        ModelKind::Sk => StudyConfig::sk_default(),
        ModelKind::Ou => return Err(Error::InvalidInput("studies support the wf and sk models".into())),
    };
    let mut doc = serde_json::to_value(base)?;
    merge(&mut doc, &given);
    doc["model"] = json!(model);
    if ctx.paper_scale {
        doc["replications"] = json!(1000);
    }
    if let Some(s) = ctx.seed {
        doc["base_seed"] = json!(s);
    }
    if let Some(w) = ctx.workers {
        doc["workers"] = json!(w);
    }
    if doc.get("schedule").is_none_or(Value::is_null) {
        if let Some(s) = ctx.doc.get("schedule") {
            doc["schedule"] = s.clone();
        }
    }
    for k in ["h_values", "estimators", "x0"] {
        if let Some(v) = doc.get_mut(k).filter(|v| v.is_number() || v.is_string()) {
            *v = json!([v.take()]);
        }
    }
    let cfg: StudyConfig = serde_json::from_value(doc)?;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_study(ctx: &Ctx, args: &StudyArgs, bench: bool) -> Result<()> {
    let cfg = study_config(ctx, args.model)?;
    let report = study::run_study(&cfg)?;
    if bench {
        let file = ctx.out_file("bench.csv")?;
        let mut w = create(&file)?;
        report.write_bench_csv(&mut w)?;
        w.flush()?;
        println!("{}", file.display());
        return Ok(());
    }
    let json_file = ctx.out_file("study.json")?;
    write_json(&json_file, &serde_json::to_value(&report)?)?;
    let csv_file = ctx.out_file("replications.csv")?;
    let mut w = create(&csv_file)?;
    report.write_rows_csv(&mut w)?;
    w.flush()?;
    println!("{}", json_file.display());
    println!("{}", csv_file.display());
    Ok(())
}

fn cmd_icecore(ctx: &Ctx, args: &IceArgs) -> Result<bool> {
    let models: Vec<NestedSk> = match args.model.to_ascii_lowercase().as_str() {
        "all" => vec![NestedSk::M1, NestedSk::M2, NestedSk::M3],
        m => vec![m.parse()?],
    };
    let series = read_path(&args.data)?;
    let imap = init_map(ctx, ModelKind::Sk, &args.init, "icecore")?;
    let init = SkParams::from_map(&imap)?;
    let schedule = ctx.schedule(ModelKind::Sk)?;
    let config = json!({
        "data": args.data.display().to_string(),
        "models": models,
        "estimator": args.estimator,
        "init": imap,
        "schedule": schedule,
    });
    let report = study::icecore(&series, &models, args.estimator, &init, &schedule, config)?;
    let file = ctx.out_file("icecore.json")?;
    write_json(&file, &serde_json::to_value(&report)?)?;
    println!("{}", file.display());
    Ok(report.fits.iter().all(|f| f.converged))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::Estimation(_)
        | Error::IndefiniteCovariance { .. }
        | Error::FlowFailure { .. }
        | Error::Divergence { .. }
        | Error::Overflow { .. }
        | Error::Singular(_)
        | Error::Quadrature { .. } => EXIT_ESTIMATION,
        Error::InvalidInput(_) => EXIT_INVALID,
    }
}

fn run(cli: Cli, overrides: Vec<(String, String)>) -> Result<bool> {
    let mut doc = match &cli.config {
        Some(p) => read_json(p)?,
        None => json!({}),
    };
    if !doc.is_object() {
        return Err(Error::InvalidInput("config must be a JSON object".into()));
    }
    for (k, v) in &overrides {
        apply_override(&mut doc, k, v)?;
    }
    let ctx = Ctx { doc, seed: cli.seed, out: cli.out, workers: cli.workers, paper_scale: cli.paper_scale };
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(&ctx, a).map(|_| true),
        Command::Fit(a) => cmd_fit(&ctx, a),
        Command::Study(a) => cmd_study(&ctx, a, false).map(|_| true),
        Command::Bench(a) => cmd_study(&ctx, a, true).map(|_| true),
        Command::Icecore(a) => cmd_icecore(&ctx, a),
    }
}

fn main() -> ExitCode {
    let (args, overrides) = split_overrides(std::env::args().collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli, overrides) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("estimation did not converge");
            ExitCode::from(EXIT_ESTIMATION)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
