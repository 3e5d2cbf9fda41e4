//! `flowpart` command-line front end: solve, generate, crossval, train,
//! evaluate and predict.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use flowpart::datagen::{
    build_case1_inputs, build_case2_inputs, columns_from_csv, columns_to_csv, generate_dataset, labels_to_text,
    load_dataset, rng_from_seed, save_dataset, split_train_test, Case1Plan, Case2Plan, CaseKind, CaseTemplate, Dataset,
    FeaturePlan, GenerationOptions,
};
use flowpart::evalcv::{
    cross_validate, evaluate, parity_pairs, parity_to_csv, pr_curve, pr_to_csv, roc_curve, roc_to_csv, select_best,
    CvConfig, CvResult,
};
use flowpart::grid::StructuredGrid2D;
use flowpart::neural::{apply_normalizer, fit_normalizer, predict_labels, train, Model, NetworkSpec, TrainConfig};
use flowpart::scenarios::{LandfillConfig, PermeabilitySource, Spe10Config};
use flowpart::solver::{
    labels_to_pgm, mass_residual, picard_solve, FlowRegime, LinearSolverKind, PicardConfig, Smoothing,
};
use serde_json::json;

use config::{help_table, parse_list, RunConfig, UsageError};

#[derive(Parser)]
#[command(name = "flowpart", version, about = "Darcy / Forchheimer flow-regime labelling and prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and write pressure, magnitude and regime maps
    Solve(CommonArgs),
    /// Sample parameters, solve every combination and store the dataset
    Generate(CommonArgs),
    /// Grid-search network shapes and learning rates with k-fold cross-validation
    Crossval(CommonArgs),
    /// Train a network on the training split
    Train(CommonArgs),
    /// Score a model (or a probability file) against a dataset split
    Evaluate(CommonArgs),
    /// Print GF/Darcy label strings for feature rows
    Predict(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Key-value config file
    #[arg(short, long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one config key (repeatable)
    #[arg(short, long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Same as --set seed=N
    #[arg(long)]
    seed: Option<u64>,
    /// Same as --set workers=N
    #[arg(long)]
    workers: Option<usize>,
    /// Same as --set out=DIR
    #[arg(short, long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Same as --set threshold=T
    #[arg(long)]
    threshold: Option<f64>,
    /// Log at debug level
    #[arg(short, long)]
    verbose: bool,
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for kv in &self.set {
            cfg.apply_assignment(kv)?;
        }
        if let Some(v) = self.seed {
            cfg.set("seed", &v.to_string())?;
        }
        if let Some(v) = self.workers {
            cfg.set("workers", &v.to_string())?;
        }
        if let Some(v) = &self.out {
            cfg.set("out", &v.to_string_lossy())?;
        }
        if let Some(v) = self.threshold {
            cfg.set("threshold", &v.to_string())?;
        }
        Ok(cfg)
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use flowpart::Error as E;
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<E>() {
        Some(E::Config(_) | E::Domain(_) | E::BoundarySpec(_) | E::Sampling(_) | E::Split(_)) => 1,
        Some(
            E::Transition { .. }
            | E::State(_)
            | E::Assembly(_)
            | E::LinearSolver(_)
            | E::Divergence(_)
            | E::Generation(_)
            | E::Degenerate(_),
        ) => 2,
        Some(E::Index { .. } | E::Shape(_) | E::Format(_) | E::Data(_) | E::Io(_) | E::Json(_)) => 3,
        None if err.downcast_ref::<std::io::Error>().is_some() || err.downcast_ref::<serde_json::Error>().is_some() => {
            3
        }
        None => 2,
    }
}

fn main() -> ExitCode {
    let mut cmd = Cli::command().after_help(help_table());
    for name in ["solve", "generate", "crossval", "train", "evaluate", "predict"] {
        cmd = cmd.mut_subcommand(name, |sub| sub.after_help(help_table()));
    }
    let matches = cmd.get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let (name, args) = match &cli.command {
        Command::Solve(a) => ("solve", a),
        Command::Generate(a) => ("generate", a),
        Command::Crossval(a) => ("crossval", a),
        Command::Train(a) => ("train", a),
        Command::Evaluate(a) => ("evaluate", a),
        Command::Predict(a) => ("predict", a),
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if args.verbose {
        "debug"
    } else {
        "info"
    }))
    .init();

    let result = args.resolve().and_then(|cfg| match &cli.command {
        Command::Solve(_) => cmd_solve(&cfg),
        Command::Generate(_) => cmd_generate(&cfg),
        Command::Crossval(_) => cmd_crossval(&cfg),
        Command::Train(_) => cmd_train(&cfg),
        Command::Evaluate(_) => cmd_evaluate(&cfg),
        Command::Predict(_) => cmd_predict(&cfg),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = exit_code(&err);
            eprintln!("flowpart {name}: {err:#}");
            if code == 1 {
                let mut cmd = Cli::command();
                let sub = cmd.find_subcommand_mut(name).unwrap();
                eprintln!("\n{}", sub.render_usage());
                eprintln!("Run `flowpart {name} --help` for the list of config keys.");
            }
            ExitCode::from(code)
        }
    }
}

fn case(cfg: &RunConfig) -> Result<CaseKind> {
    cfg.get::<CaseKind>("case")
}

fn mesh(cfg: &RunConfig, default: (usize, usize)) -> Result<(usize, usize)> {
    if cfg.is_default("mesh") {
        return Ok(default);
    }
    let raw = cfg.raw("mesh");
    raw.split_once('x')
        .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
        .ok_or_else(|| UsageError(format!("mesh = {raw}: expected NXxNY")).into())
}

fn template(cfg: &RunConfig) -> Result<CaseTemplate> {
    Ok(match case(cfg)? {
        CaseKind::Landfill => {
            let base = LandfillConfig::default();
            let (nx, ny) = mesh(cfg, (base.nx, base.ny))?;
            CaseTemplate::Landfill(LandfillConfig { nx, ny, ..base })
        }
        CaseKind::Spe10 => {
            let base = Spe10Config::default();
            let (nx, ny) = mesh(cfg, (base.nx, base.ny))?;
            let permeability = match cfg.raw("permeability") {
                "synthetic" => match base.permeability.clone() {
                    PermeabilitySource::Synthetic { log_mean, log_std, .. } => {
                        PermeabilitySource::Synthetic { seed: cfg.get("perm_seed")?, log_mean, log_std }
                    }
                    file => file,
                },
                path => PermeabilitySource::File(PathBuf::from(path)),
            };
            CaseTemplate::Spe10(Spe10Config { nx, ny, permeability, ..base })
        }
    })
}

/// The single feature vector described by the scenario keys.
fn scenario_features(cfg: &RunConfig, template: &CaseTemplate) -> Result<Vec<f64>> {
    Ok(match template {
        CaseTemplate::Landfill(base) => {
            let n_channels: usize = cfg.get("n_channels")?;
            let phi: Vec<f64> = if cfg.is_default("porosities") {
                if n_channels != base.n_channels {
                    return Err(UsageError(format!("porosities must list {n_channels} values")).into());
                }
                base.channel_porosities.clone()
            } else {
                cfg.list("porosities")?
            };
            if phi.len() != n_channels {
                return Err(UsageError(format!("{} porosities given for {n_channels} channels", phi.len())).into());
            }
            let mut f = vec![
                cfg.get_or("u0", base.u0)?,
                cfg.get_or("cf", base.cf)?,
                cfg.get_or("m", base.m)?,
                cfg.get_or("delta", base.delta)?,
                n_channels as f64,
            ];
            f.extend((0..7).map(|i| phi.get(i).copied().unwrap_or(0.0)));
            f
        }
        CaseTemplate::Spe10(base) => vec![
            cfg.get_or("q", base.q_rate)?,
            cfg.get_or("cf", base.cf)?,
            cfg.get_or("m", base.m)?,
            cfg.get_or("delta", base.delta)?,
        ],
    })
}

fn picard_config(cfg: &RunConfig) -> Result<PicardConfig> {
    let linear_solver = match cfg.raw("linear_solver") {
        "direct" => LinearSolverKind::Direct,
        "cg" => LinearSolverKind::ConjugateGradient,
        other => return Err(UsageError(format!("linear_solver = {other}: expected direct or cg")).into()),
    };
    let pc = PicardConfig {
        smoothing: Smoothing::RelativeToThreshold(cfg.get("smoothing")?),
        table_points: cfg.get("table_points")?,
        quadrature_nodes: cfg.get("quadrature_nodes")?,
        variant: cfg.get("variant")?,
        tol: cfg.get("tol")?,
        max_iter: cfg.get("max_iter")?,
        relaxation: cfg.get("relaxation")?,
        linear_solver,
        ..PicardConfig::default()
    };
    pc.validate()?;
    Ok(pc)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(cfg.raw("out"));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_solve(cfg: &RunConfig) -> Result<()> {
    let template = template(cfg)?;
    let features = scenario_features(cfg, &template)?;
    let problem = template.build(&features)?;
    let start = Instant::now();
    let sol = picard_solve(&problem, &picard_config(cfg)?)?;
    let elapsed = start.elapsed().as_secs_f64();
    let residual = mass_residual(&sol.flux, &problem.q, &problem.grid)?;
    let out = out_dir(cfg)?;
    write(&out.join("pressure.csv"), &sol.pressure.to_csv_string())?;
    write(&out.join("magnitude.csv"), &sol.magnitude.to_csv_string())?;
    write(&out.join("labels.pgm"), &labels_to_pgm(&sol.labels, &problem.grid)?)?;
    let report = json!({
        "case": template.kind(),
        "nx": problem.grid.nx,
        "ny": problem.grid.ny,
        "features": features,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "ubar": sol.ubar,
        "gf_fraction": sol.gf_fraction(),
        "max_magnitude": sol.magnitude.max(),
        "mass_residual_max": residual.values().iter().fold(0.0f64, |a, r| a.max(r.abs())),
        "residual_history": sol.residual_history,
        "seconds": elapsed,
        "config": cfg.echo(),
    });
    write(&out.join("solve_report.json"), &serde_json::to_string_pretty(&report)?)?;
    log::info!(
        "{} iterations, converged={}, GF fraction {:.4}, written to {}",
        sol.iterations,
        sol.converged,
        sol.gf_fraction(),
        out.display()
    );
    if !sol.converged {
        return Err(
            flowpart::Error::Divergence(format!("Picard did not converge in {} iterations", sol.iterations)).into()
        );
    }
    Ok(())
}

fn parse_plan(raw: &str) -> Result<[FeaturePlan; 4]> {
    let bad = || UsageError(format!("plan = {raw}: expected four draws:distinct pairs"));
    let pairs: Vec<FeaturePlan> = raw
        .split(',')
        .map(|p| {
            let (d, n) = p.trim().split_once(':').ok_or_else(bad)?;
            Ok(FeaturePlan::new(d.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?))
        })
        .collect::<Result<_>>()?;
    pairs.try_into().map_err(|_| bad().into())
}

fn cmd_generate(cfg: &RunConfig) -> Result<()> {
    let template = template(cfg)?;
    let seed: u64 = cfg.get("seed")?;
    let mut rng = rng_from_seed(seed);
    let plan = if cfg.is_default("plan") { None } else { Some(parse_plan(cfg.raw("plan"))?) };
    let inputs = match template.kind() {
        CaseKind::Landfill => {
            let plan = plan.map_or_else(Case1Plan::default, |[u0, cf, m, delta]| Case1Plan { u0, cf, m, delta });
            build_case1_inputs(&plan, &mut rng)?
        }
        CaseKind::Spe10 => {
            let plan = plan.map_or_else(Case2Plan::default, |[q, cf, m, delta]| Case2Plan { q, cf, m, delta });
            build_case2_inputs(&plan, &mut rng)?
        }
    };
    log::info!("solving {} parameter combinations", inputs.len());
    let opts = GenerationOptions {
        picard: picard_config(cfg)?,
        workers: cfg.get("workers")?,
        seed,
        keep_magnitudes: cfg.bool("keep_magnitudes")?,
        retry_relaxation: if cfg.is_default("retry_relaxation") { None } else { Some(cfg.get("retry_relaxation")?) },
    };
    let start = Instant::now();
    let dataset = generate_dataset(&inputs, &template, &opts)?;
    let (train_set, test_set) = split_train_test(&dataset, cfg.get("test_fraction")?, &mut rng)?;
    let dir = PathBuf::from(cfg.raw("dataset"));
    save_dataset(&dataset, dir.join("all"))?;
    save_dataset(&train_set, dir.join("train"))?;
    save_dataset(&test_set, dir.join("test"))?;
    log::info!(
        "{} examples ({} train, {} test) in {:.1} s, distinct feature counts {:?}, written to {}",
        dataset.n_examples(),
        train_set.n_examples(),
        test_set.n_examples(),
        start.elapsed().as_secs_f64(),
        dataset.distinct_counts(),
        dir.display()
    );
    Ok(())
}

fn load_part(cfg: &RunConfig, part: &str) -> Result<Dataset> {
    let dir = Path::new(cfg.raw("dataset")).join(part);
    load_dataset(&dir).with_context(|| format!("loading dataset {}", dir.display()))
}

fn layer_sizes(n0: usize, hidden: &[usize], k: usize) -> Result<NetworkSpec> {
    let mut sizes = vec![n0];
    sizes.extend_from_slice(hidden);
    sizes.push(k);
    Ok(NetworkSpec::new(sizes)?)
}

fn cv_threshold(cfg: &RunConfig, kind: CaseKind) -> Result<f64> {
    let default = match kind {
        CaseKind::Landfill => 1e-6,
        CaseKind::Spe10 => 1e-5,
    };
    cfg.get_or("cv_threshold", default)
}

fn cv_rows(results: &[CvResult]) -> String {
    let mut s = String::from(
        "layers,learning_rate,mean_recall,recall_variance,recall_std,mean_precision,mean_error_rate,mean_pct_cost,mean_iterations,wall_time_s,failed_folds\n",
    );
    for r in results {
        let layers: Vec<String> = r.layer_sizes.iter().map(|v| v.to_string()).collect();
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            layers.join("-"),
            r.learning_rate,
            r.mean_recall,
            r.recall_variance,
            r.recall_std,
            r.mean_precision,
            r.mean_error_rate,
            r.mean_pct_cost,
            r.mean_iterations,
            r.wall_time_s,
            r.failed_folds
        ));
    }
    s
}

fn cmd_crossval(cfg: &RunConfig) -> Result<()> {
    let data = load_part(cfg, "train")?;
    let (n0, k) = (data.features.nrows(), data.n_cells());
    let specs = cfg
        .raw("cv_hidden")
        .split(';')
        .map(|h| {
            let hidden: Vec<usize> = parse_list(h).map_err(|e| UsageError(format!("cv_hidden: {e}")))?;
            layer_sizes(n0, &hidden, k)
        })
        .collect::<Result<Vec<_>>>()?;
    let seed: u64 = cfg.get("seed")?;
    let cv = CvConfig {
        kappa: cfg.get("kappa")?,
        train: TrainConfig {
            learning_rate: 1.0,
            max_iterations: cfg.get("max_iterations")?,
            patience: cfg.get("patience")?,
            improvement_threshold: cv_threshold(cfg, data.case)?,
            seed,
        },
        threshold: cfg.get("threshold")?,
        seed,
        workers: cfg.get("workers")?,
    };
    let results = cross_validate(&data, &specs, &cfg.list::<f64>("learning_rates")?, &cv)?;
    let out = out_dir(cfg)?;
    write(&out.join("cv_results.csv"), &cv_rows(&results))?;
    let best = select_best(&results)?;
    let report = json!({
        "metric": "recall",
        "layer_sizes": best.layer_sizes,
        "learning_rate": best.learning_rate,
        "mean_recall": best.mean_recall,
        "recall_std": best.recall_std,
        "kappa": cv.kappa,
    });
    write(&out.join("best.json"), &serde_json::to_string_pretty(&report)?)?;
    log::info!("best {:?} at lr {} with mean recall {:.4}", best.layer_sizes, best.learning_rate, best.mean_recall);
    Ok(())
}

fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let train_set = load_part(cfg, "train")?;
    let test_set = load_part(cfg, "test")?;
    let (n0, k) = (train_set.features.nrows(), train_set.n_cells());
    let (spec, lr) = if cfg.is_default("best") {
        (layer_sizes(n0, &cfg.list::<usize>("hidden")?, k)?, cfg.get("learning_rate")?)
    } else {
        let path = cfg.raw("best");
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
        let best: serde_json::Value = serde_json::from_str(&text)?;
        let sizes: Vec<usize> = serde_json::from_value(best["layer_sizes"].clone())?;
        let lr = best["learning_rate"]
            .as_f64()
            .ok_or_else(|| flowpart::Error::Format(format!("{path}: no learning_rate")))?;
        (NetworkSpec::new(sizes)?, lr)
    };
    if spec.n_inputs() != n0 || spec.n_outputs() != k {
        return Err(flowpart::Error::Shape(format!(
            "network {:?} does not fit data with {n0} features and {k} cells",
            spec.layer_sizes
        ))
        .into());
    }
    let seed: u64 = cfg.get("seed")?;
    let tc = TrainConfig {
        learning_rate: lr,
        max_iterations: cfg.get("max_iterations")?,
        patience: cfg.get("patience")?,
        improvement_threshold: cfg.get("train_threshold")?,
        seed,
    };
    let norm = fit_normalizer(&train_set.features)?;
    let xt = apply_normalizer(&norm, &train_set.features)?;
    let xv = apply_normalizer(&norm, &test_set.features)?;
    let start = Instant::now();
    let outcome = train(&spec, &xt, &train_set.labels_f64(), &tc, Some((&xv, &test_set.labels_f64())))?;
    let model = Model { params: outcome.params, normalizer: norm, seed };
    let model_dir = PathBuf::from(cfg.raw("model"));
    model.save(&model_dir)?;
    let out = out_dir(cfg)?;
    let mut curve = String::from("iteration,train_cost,test_cost\n");
    for (i, (c, v)) in outcome.cost_history.iter().zip(&outcome.val_cost_history).enumerate() {
        curve.push_str(&format!("{i},{c},{v}\n"));
    }
    write(&out.join("cost_history.csv"), &curve)?;
    let report = json!({
        "layer_sizes": spec.layer_sizes,
        "learning_rate": lr,
        "iterations": outcome.cost_history.len(),
        "stop_reason": outcome.stop_reason,
        "final_train_cost": outcome.cost_history.last(),
        "final_test_cost": outcome.val_cost_history.last(),
        "seconds": start.elapsed().as_secs_f64(),
    });
    write(&out.join("train_report.json"), &serde_json::to_string_pretty(&report)?)?;
    log::info!(
        "{} iterations ({:?}), model written to {}",
        outcome.cost_history.len(),
        outcome.stop_reason,
        model_dir.display()
    );
    Ok(())
}

fn cmd_evaluate(cfg: &RunConfig) -> Result<()> {
    let part = cfg.raw("split").to_string();
    if !matches!(part.as_str(), "all" | "train" | "test") {
        return Err(UsageError(format!("split = {part}: expected all, train or test")).into());
    }
    let data = load_part(cfg, &part)?;
    let proba = if cfg.is_default("predictions") {
        let model = Model::load(cfg.raw("model"))?;
        model.predict_proba(&data.features)?
    } else {
        let path = cfg.raw("predictions");
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
        let p = columns_from_csv(&text, data.n_cells(), false, path)?;
        if p.ncols() != data.n_examples() {
            return Err(flowpart::Error::Shape(format!(
                "{path} holds {} examples, the dataset {}",
                p.ncols(),
                data.n_examples()
            ))
            .into());
        }
        p
    };
    if proba.dim() != data.labels.dim() {
        return Err(flowpart::Error::Shape(format!(
            "model output {:?} vs labels {:?}",
            proba.dim(),
            data.labels.dim()
        ))
        .into());
    }
    let threshold: f64 = cfg.get("threshold")?;
    let report = evaluate(&proba, &data.labels, threshold)?;
    let out = out_dir(cfg)?;
    write(&out.join("metrics.json"), &serde_json::to_string_pretty(&report)?)?;
    write(&out.join("confusion.csv"), &report.counts.to_csv_string())?;
    let scores: Vec<f64> = proba.iter().copied().collect();
    let truth: Vec<u8> = data.labels.iter().copied().collect();
    match roc_curve(&scores, &truth) {
        Ok(roc) => write(&out.join("roc.csv"), &roc_to_csv(&roc))?,
        Err(e) => log::warn!("no ROC curve: {e}"),
    }
    match pr_curve(&scores, &truth) {
        Ok(pr) => write(&out.join("pr.csv"), &pr_to_csv(&pr))?,
        Err(e) => log::warn!("no precision-recall curve: {e}"),
    }
    let pred = predict_labels(&proba, threshold)?;
    write(&out.join("parity.csv"), &parity_to_csv(&parity_pairs(&pred, &data.labels)?))?;
    if cfg.bool("pgm")? {
        let grid = StructuredGrid2D::new(data.nx, data.ny, 1.0 / data.nx as f64, 1.0 / data.ny as f64)?;
        let maps = out.join("maps");
        std::fs::create_dir_all(&maps)?;
        for (j, col) in pred.columns().into_iter().enumerate() {
            let regimes: Vec<FlowRegime> =
                col.iter().map(|&l| if l == 1 { FlowRegime::Forchheimer } else { FlowRegime::Darcy }).collect();
            write(&maps.join(format!("example_{j:04}.pgm")), &labels_to_pgm(&regimes, &grid)?)?;
        }
    }
    log::info!(
        "recall {:.4}, precision {:.4}, error rate {:.5}, AUC {}",
        report.recall,
        report.precision,
        report.error_rate,
        report.auc.map_or("n/a".to_string(), |a| format!("{a:.5}"))
    );
    Ok(())
}

fn cmd_predict(cfg: &RunConfig) -> Result<()> {
    let model = Model::load(cfg.raw("model"))?;
    let n0 = model.normalizer.mean.len();
    let path = cfg.raw("input");
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
    let rows: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).collect();
    let has_header = rows.first().is_some_and(|l| l.split(',').next().unwrap().trim().parse::<f64>().is_err());
    let x = columns_from_csv(&rows.join("\n"), n0, has_header, path)?;
    let proba = model.predict_proba(&x)?;
    let labels = predict_labels(&proba, cfg.get("threshold")?)?;
    let text = labels_to_text(&labels);
    print!("{text}");
    let out = out_dir(cfg)?;
    write(&out.join("predictions.txt"), &text)?;
    write(&out.join("probabilities.csv"), &columns_to_csv(&proba, None))?;
    Ok(())
}
