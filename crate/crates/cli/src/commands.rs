//! Subcommand implementations: file handling, dispatch into the library, and
//! report emission.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use eigenprob::cluster::{cluster, ClusterConfig, ClusterState};
use eigenprob::estimation::{default_alpha_grid, default_beta_grid};
use eigenprob::model::{
    dataset_digest, load_model, model_from_file, save_model, DatasetSource, Model,
};
use eigenprob::sampling::RandomSource;
use eigenprob::tasks::{
    classify, generate, impute, loo_cross_validate, outlier_scores, regress, GenerationMethod,
    ImputeMode,
};
use eigenprob::{
    load_dataset, log_likelihood, pairwise_f_measure, parse_schema_file, rand_index,
    resolve_schema, v_measure, Cell, Dataset, Error, HyperParams, SolverConfig,
};

use crate::{Cli, CliError, Command, CommonOpts, ImputeModeArg, MethodArg, OutputFormat};

type CliResult = Result<(), CliError>;

pub fn dispatch(cli: Cli) -> CliResult {
    let opts = cli.common;
    match cli.command {
        Command::Fit { alpha_grid, beta_grid, surface, embed_data } => {
            cmd_fit(&opts, alpha_grid, beta_grid, surface, embed_data)
        }
        Command::Classify { target } => cmd_classify(&opts, &target),
        Command::Regress { target } => cmd_regress(&opts, &target),
        Command::Impute { mode } => cmd_impute(&opts, mode),
        Command::Outliers { threshold, histogram, bins } => {
            cmd_outliers(&opts, threshold, histogram, bins)
        }
        Command::Generate { count, method, burn_in, thinning } => {
            cmd_generate(&opts, count, method, burn_in, thinning)
        }
        Command::Cluster { clusters, restarts, tol, max_iter, truth, labels } => {
            cmd_cluster(&opts, clusters, restarts, tol, max_iter, truth, labels)
        }
        Command::Loglik => cmd_loglik(&opts),
        Command::LooCv { target } => cmd_loo_cv(&opts, &target),
    }
}

// ---------------------------------------------------------------------------
// shared plumbing
// ---------------------------------------------------------------------------

fn require<'a, T>(opt: &'a Option<T>, flag: &str) -> Result<&'a T, CliError> {
    opt.as_ref()
        .ok_or_else(|| CliError::Usage(format!("missing required flag {flag}")))
}

fn read_dataset(data: &Path, schema: &Path) -> Result<Dataset, CliError> {
    let csv_text = fs::read_to_string(data)?;
    let schema_text = fs::read_to_string(schema)?;
    let entries = parse_schema_file(&schema_text)?;
    let resolved = resolve_schema(&entries, &csv_text)?;
    Ok(load_dataset(&csv_text, &resolved)?)
}

/// Loads the model file and rebuilds the model, applying any query-time
/// hyperparameter or damping overrides.
fn read_model(opts: &CommonOpts) -> Result<Model, CliError> {
    let path = require(&opts.model, "--model")?;
    let file = load_model(path)?;
    let mut model = model_from_file(file, path.parent())?;
    if let Some(alpha) = opts.alpha {
        model.hyper = HyperParams::new(alpha, model.hyper.beta)?;
    }
    if let Some(beta) = opts.beta {
        model.hyper = HyperParams::new(model.hyper.alpha, beta)?;
    }
    if let Some(damping) = opts.damping {
        model.solver = SolverConfig { damping, ..model.solver };
        model.solver.validate()?;
    }
    Ok(model)
}

fn read_queries(opts: &CommonOpts, model: &Model) -> Result<Dataset, CliError> {
    let data = require(&opts.data, "--data")?;
    let csv_text = fs::read_to_string(data)?;
    Ok(load_dataset(&csv_text, model.schema())?)
}

fn target_index(model: &Model, name: &str) -> Result<usize, CliError> {
    model
        .schema()
        .index_of(name)
        .ok_or_else(|| CliError::Usage(format!("unknown target attribute {name:?}")))
}

fn out_writer(out: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(path) => Box::new(fs::File::create(path)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn parse_grid(text: &str, flag: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("{flag}: cannot parse {s:?} as a number")))
        })
        .collect()
}

fn seed_of(opts: &CommonOpts) -> u64 {
    let seed = opts.seed.unwrap_or(0);
    eprintln!("seed: {seed}");
    seed
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

fn cmd_fit(
    opts: &CommonOpts,
    alpha_grid: Option<String>,
    beta_grid: Option<String>,
    surface_path: Option<PathBuf>,
    embed_data: bool,
) -> CliResult {
    let data_path = require(&opts.data, "--data")?.clone();
    let schema_path = require(&opts.schema, "--schema")?;
    let dataset = read_dataset(&data_path, schema_path)?;

    let alphas = match (&opts.alpha, alpha_grid) {
        (Some(a), _) => vec![*a],
        (None, Some(text)) => parse_grid(&text, "--alpha-grid")?,
        (None, None) => default_alpha_grid(),
    };
    let betas = match (&opts.beta, beta_grid) {
        (Some(b), _) => vec![*b],
        (None, Some(text)) => parse_grid(&text, "--beta-grid")?,
        (None, None) => default_beta_grid(),
    };
    let solver = SolverConfig {
        damping: opts.damping.unwrap_or(SolverConfig::default().damping),
        ..SolverConfig::default()
    };
    solver.validate().map_err(Error::from)?;
    let loo = opts.loo.unwrap_or(true);

    let (model, fit) = Model::fit(dataset, solver, &alphas, &betas, loo)?;

    if let Some(path) = &surface_path {
        let mut writer = csv::Writer::from_path(path).map_err(Error::from)?;
        writer.write_record(["alpha", "beta", "loglik"]).map_err(Error::from)?;
        for point in &fit.surface {
            writer
                .write_record([
                    point.alpha.to_string(),
                    point.beta.to_string(),
                    point.log_likelihood.to_string(),
                ])
                .map_err(Error::from)?;
        }
        writer.flush()?;
    }

    let source = if embed_data {
        DatasetSource::Embedded { csv: fs::read_to_string(&data_path)? }
    } else {
        let bytes = fs::read(&data_path)?;
        DatasetSource::Reference {
            path: data_path.to_string_lossy().into_owned(),
            sha256: dataset_digest(&bytes),
        }
    };
    let model_path = opts.out.clone().unwrap_or_else(|| PathBuf::from("model.json"));
    save_model(&model.to_model_file(source), &model_path)?;

    let best = fit
        .surface
        .iter()
        .find(|p| p.alpha == fit.hyper.alpha && p.beta == fit.hyper.beta)
        .expect("argmax is on the surface");
    match opts.format {
        OutputFormat::Json => println!(
            "{}",
            serde_json::json!({
                "alpha": fit.hyper.alpha,
                "beta": fit.hyper.beta,
                "log_likelihood": best.log_likelihood,
                "model": model_path.to_string_lossy(),
            })
        ),
        OutputFormat::Csv => {
            println!(
                "alpha={} beta={} loglik={:.6} model={}",
                fit.hyper.alpha,
                fit.hyper.beta,
                best.log_likelihood,
                model_path.display()
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// classify / regress
// ---------------------------------------------------------------------------

fn cmd_classify(opts: &CommonOpts, target: &str) -> CliResult {
    let model = read_model(opts)?;
    let queries = read_queries(opts, &model)?;
    let target_idx = target_index(&model, target)?;
    let labels = model
        .schema()
        .attr(target_idx)
        .values()
        .ok_or_else(|| CliError::Usage(format!("target {target:?} is not discrete")))?
        .to_vec();

    let mut results = Vec::with_capacity(queries.n_rows());
    for row in queries.rows() {
        results.push(classify(&model, row, target_idx)?);
    }

    match opts.format {
        OutputFormat::Csv => {
            let mut writer = csv::Writer::from_writer(out_writer(&opts.out)?);
            let mut header = vec!["row".to_string(), "predicted".to_string()];
            header.extend(labels.iter().map(|l| format!("p_{l}")));
            writer.write_record(&header).map_err(Error::from)?;
            for (i, r) in results.iter().enumerate() {
                let mut record = vec![i.to_string(), labels[r.predicted].clone()];
                record.extend(r.pmf.probabilities.iter().map(|p| p.to_string()));
                writer.write_record(&record).map_err(Error::from)?;
            }
            writer.flush()?;
        }
        OutputFormat::Json => {
            let rows: Vec<_> = results
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let probabilities: serde_json::Map<String, serde_json::Value> = labels
                        .iter()
                        .zip(&r.pmf.probabilities)
                        .map(|(l, p)| (l.clone(), serde_json::json!(p)))
                        .collect();
                    serde_json::json!({
                        "row": i,
                        "predicted": labels[r.predicted],
                        "probabilities": probabilities,
                    })
                })
                .collect();
            writeln!(out_writer(&opts.out)?, "{}", serde_json::Value::Array(rows))?;
        }
    }
    Ok(())
}

fn cmd_regress(opts: &CommonOpts, target: &str) -> CliResult {
    let model = read_model(opts)?;
    let queries = read_queries(opts, &model)?;
    let target_idx = target_index(&model, target)?;

    let mut predictions = Vec::with_capacity(queries.n_rows());
    for row in queries.rows() {
        predictions.push(regress(&model, row, target_idx)?);
    }

    match opts.format {
        OutputFormat::Csv => {
            let mut writer = out_writer(&opts.out)?;
            writeln!(writer, "row,predicted")?;
            for (i, p) in predictions.iter().enumerate() {
                writeln!(writer, "{i},{p}")?;
            }
        }
        OutputFormat::Json => {
            let rows: Vec<_> = predictions
                .iter()
                .enumerate()
                .map(|(i, p)| serde_json::json!({"row": i, "predicted": p}))
                .collect();
            writeln!(out_writer(&opts.out)?, "{}", serde_json::Value::Array(rows))?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// impute
// ---------------------------------------------------------------------------

fn cmd_impute(opts: &CommonOpts, mode: ImputeModeArg) -> CliResult {
    let model = read_model(opts)?;
    let queries = read_queries(opts, &model)?;
    let mode = match mode {
        ImputeModeArg::MostLikely => ImputeMode::MostLikely,
        ImputeModeArg::Random => ImputeMode::Random,
    };
    let mut rng = RandomSource::from_seed(seed_of(opts));

    let mut completed = Vec::with_capacity(queries.n_rows());
    for row in queries.rows() {
        if row.iter().any(Cell::is_missing) {
            completed.push(impute(&model, row, mode, &mut rng)?);
        } else {
            completed.push(row.clone());
        }
    }
    let out = Dataset::new(model.schema().clone(), completed)?;
    write!(out_writer(&opts.out)?, "{}", out.to_csv()?)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// outliers
// ---------------------------------------------------------------------------

fn cmd_outliers(
    opts: &CommonOpts,
    threshold: Option<f64>,
    histogram: Option<PathBuf>,
    bins: usize,
) -> CliResult {
    let model = read_model(opts)?;
    let report = outlier_scores(&model, threshold, bins)?;

    if let Some(path) = &histogram {
        let mut writer = fs::File::create(path)?;
        writeln!(writer, "bin_left,bin_right,count")?;
        for bin in &report.histogram {
            writeln!(writer, "{},{},{}", bin.left, bin.right, bin.count)?;
        }
    }

    match opts.format {
        OutputFormat::Csv => {
            let mut writer = out_writer(&opts.out)?;
            writeln!(writer, "row,log_joint_prob,flagged")?;
            for (i, score) in report.scores.iter().enumerate() {
                let flagged = report.flagged.contains(&i) as u8;
                writeln!(writer, "{i},{score},{flagged}")?;
            }
        }
        OutputFormat::Json => {
            let body = serde_json::json!({
                "threshold": report.threshold,
                "flagged": report.flagged,
                "scores": report.scores,
            });
            writeln!(out_writer(&opts.out)?, "{body}")?;
        }
    }
    eprintln!(
        "threshold: {:.6} ({} of {} rows flagged)",
        report.threshold,
        report.flagged.len(),
        report.scores.len()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

fn cmd_generate(
    opts: &CommonOpts,
    count: usize,
    method: MethodArg,
    burn_in: usize,
    thinning: usize,
) -> CliResult {
    let model = read_model(opts)?;
    let seed = seed_of(opts);
    let method = match method {
        MethodArg::Chain => GenerationMethod::Chain,
        MethodArg::Gibbs => GenerationMethod::Gibbs { burn_in, thinning },
    };
    let rows = generate(&model, count, method, seed)?;
    write!(out_writer(&opts.out)?, "{}", rows.to_csv()?)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// cluster
// ---------------------------------------------------------------------------

fn cmd_cluster(
    opts: &CommonOpts,
    k: usize,
    restarts: usize,
    tol: f64,
    max_iter: usize,
    truth: Option<String>,
    labels_path: Option<PathBuf>,
) -> CliResult {
    // cluster from a dataset (graph-level operation); a model file also works
    let dataset = if let (Some(data), Some(schema)) = (&opts.data, &opts.schema) {
        read_dataset(data, schema)?
    } else if opts.model.is_some() {
        read_model(opts)?.dataset().clone()
    } else {
        return Err(CliError::Usage(
            "cluster needs --data and --schema (or --model)".into(),
        ));
    };

    // the ground-truth column must not inform the graph
    let (graph_dataset, truth_labels) = match &truth {
        Some(name) => {
            let idx = dataset
                .schema
                .index_of(name)
                .ok_or_else(|| CliError::Usage(format!("unknown truth attribute {name:?}")))?;
            let labels: Vec<usize> = dataset
                .rows()
                .iter()
                .map(|row| {
                    row[idx].category().ok_or_else(|| Error::MissingValue {
                        attribute: name.clone(),
                    })
                })
                .collect::<Result<_, _>>()?;
            (dataset.without_attribute(idx)?, Some(labels))
        }
        None => (dataset, None),
    };

    let graph = eigenprob::BipartiteGraph::build(&graph_dataset);
    let config = ClusterConfig {
        damping: opts.damping.unwrap_or(ClusterConfig::default().damping),
        tolerance: tol,
        max_iterations: max_iter,
        ..ClusterConfig::default()
    };
    let seed = seed_of(opts);
    if restarts == 0 {
        return Err(CliError::Usage("--restarts must be at least 1".into()));
    }

    let mut best: Option<(f64, ClusterState)> = None;
    for r in 0..restarts {
        let mut rng = RandomSource::substream(seed, r as u64);
        let state = cluster(graph.view(), k, &config, &mut rng)?;
        let score = match &truth_labels {
            Some(labels) => v_measure(&state.hard_labels(), labels)?,
            // without truth, prefer the crispest run
            None => {
                state.memberships.iter().map(|row| row.iter().cloned().fold(0.0, f64::max)).sum::<f64>()
                    / state.memberships.len() as f64
            }
        };
        if best.as_ref().map_or(true, |(s, _)| score > *s) {
            best = Some((score, state));
        }
    }
    let (_, state) = best.expect("at least one restart");

    {
        let mut writer = out_writer(&opts.out)?;
        let header: Vec<String> = std::iter::once("row".to_string())
            .chain(std::iter::once("label".to_string()))
            .chain((0..k).map(|j| format!("m_{j}")))
            .collect();
        writeln!(writer, "{}", header.join(","))?;
        let labels = state.hard_labels();
        for (i, row) in state.memberships.iter().enumerate() {
            let memberships: Vec<String> = row.iter().map(|m| m.to_string()).collect();
            writeln!(writer, "{},{},{}", i, labels[i], memberships.join(","))?;
        }
    }
    if let Some(path) = &labels_path {
        let mut writer = fs::File::create(path)?;
        writeln!(writer, "row,label")?;
        for (i, label) in state.hard_labels().iter().enumerate() {
            writeln!(writer, "{i},{label}")?;
        }
    }

    if let Some(truth_labels) = &truth_labels {
        let predicted = state.hard_labels();
        let v = v_measure(&predicted, truth_labels)?;
        let rand = rand_index(&predicted, truth_labels)?;
        let f = pairwise_f_measure(&predicted, truth_labels)?;
        match opts.format {
            OutputFormat::Json => println!(
                "{}",
                serde_json::json!({"v_measure": v, "rand_index": rand, "f_measure": f})
            ),
            OutputFormat::Csv => {
                println!("v_measure={v:.4} rand_index={rand:.4} f_measure={f:.4}")
            }
        }
    }

    if !state.converged {
        return Err(CliError::Core(Error::NoConvergence {
            iterations: state.iterations,
            residual: f64::NAN,
        }));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// loglik / loo-cv
// ---------------------------------------------------------------------------

fn cmd_loglik(opts: &CommonOpts) -> CliResult {
    let model = read_model(opts)?;
    let loo = opts.loo.unwrap_or(true);
    let ctx = model.context();
    let total = log_likelihood(model.graph(), model.dataset(), &ctx, loo)?;

    if opts.out.is_some() {
        let mut writer = out_writer(&opts.out)?;
        writeln!(writer, "row,log_joint_prob")?;
        for n in 0..model.dataset().n_rows() {
            let view =
                if loo { model.graph().masked(n)? } else { model.graph().view() };
            let lp = ctx.joint_log_prob(view, model.dataset().row(n))?;
            writeln!(writer, "{n},{lp}")?;
        }
    }
    match opts.format {
        OutputFormat::Json => println!(
            "{}",
            serde_json::json!({"log_likelihood": total, "loo": loo})
        ),
        OutputFormat::Csv => println!("loglik={total:.6} loo={}", if loo { "on" } else { "off" }),
    }
    Ok(())
}

fn cmd_loo_cv(opts: &CommonOpts, target: &str) -> CliResult {
    let model = read_model(opts)?;
    let target_idx = target_index(&model, target)?;
    let report = loo_cross_validate(&model, target_idx)?;

    if opts.out.is_some() {
        let labels = model.schema().attr(target_idx).values().expect("discrete target");
        let mut writer = csv::Writer::from_writer(out_writer(&opts.out)?);
        writer.write_record(["row", "actual", "predicted", "correct"]).map_err(Error::from)?;
        for (i, p) in report.predictions.iter().enumerate() {
            writer
                .write_record([
                    i.to_string(),
                    labels[p.actual].clone(),
                    labels[p.predicted].clone(),
                    ((p.actual == p.predicted) as u8).to_string(),
                ])
                .map_err(Error::from)?;
        }
        writer.flush()?;
    }
    match opts.format {
        OutputFormat::Json => println!(
            "{}",
            serde_json::json!({
                "accuracy": report.accuracy(),
                "correct": report.correct,
                "total": report.predictions.len(),
            })
        ),
        OutputFormat::Csv => println!(
            "accuracy={:.4} ({}/{})",
            report.accuracy(),
            report.correct,
            report.predictions.len()
        ),
    }
    Ok(())
}
