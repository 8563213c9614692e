//! Implementations of the four subcommands.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use chrono::NaiveDate;
use pvcast_core::checkpoint::Checkpoint;
use pvcast_core::evaluate::{evaluate as run_evaluation, mix_seed, train_model, ModelKind};
use pvcast_core::pipeline::{
    apply_scaler, build_inference_sample, build_samples, fit_scaler, generate_synthetic,
    make_folds, scale_inference, SyntheticConfig,
};
use pvcast_core::report::{RunMeta, TimingReport};
use pvcast_core::types::{Gate, QuantileLevels};

use crate::config::{meta_lines, parse_synthetic_spec, RunConfig};
use crate::{AppError, EvaluateArgs, ForecastArgs, SynthArgs, TrainArgs};

fn merged_config(
    data: &crate::DataArgs,
    config_path: Option<&Path>,
    apply_flags: impl FnOnce(&mut RunConfig),
) -> Result<RunConfig, AppError> {
    let mut flags = RunConfig::from_data_args(data);
    apply_flags(&mut flags);
    Ok(match config_path {
        Some(path) => flags.or(RunConfig::from_file(path)?),
        None => flags,
    })
}

fn write_text(path: &Path, content: &str) -> Result<(), AppError> {
    std::fs::write(path, content)
        .map_err(|e| AppError::runtime(format!("writing {}: {e}", path.display())))
}

fn with_meta(meta: &RunMeta, body: &str) -> String {
    let mut out = String::new();
    for line in meta_lines(meta) {
        out.push_str("# ");
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str(body);
    out
}

pub fn evaluate(args: EvaluateArgs) -> Result<(), AppError> {
    let cfg = merged_config(&args.data, args.config.as_deref(), |c| {
        c.models = args.models.clone().or(c.models.take());
        c.gates = args.gates.clone().or(c.gates.take());
        c.out = args.out.clone().or(c.out.take());
        c.jobs = args.jobs.or(c.jobs);
        c.seed = args.seed.or(c.seed);
        c.epochs = args.epochs.or(c.epochs);
        c.learning_rate = args.learning_rate.or(c.learning_rate);
        c.batch_size = args.batch_size.or(c.batch_size);
        c.estimators = args.estimators.or(c.estimators);
        c.folds = args.folds.or(c.folds);
        c.test_days = args.test_days.or(c.test_days);
    })?;
    let eval_cfg = cfg.eval_config()?;
    let out_dir = cfg
        .out
        .clone()
        .ok_or_else(|| AppError::usage("evaluate needs --out <dir>"))?;
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| AppError::runtime(format!("creating {}: {e}", out_dir.display())))?;

    let ds = cfg.load_dataset()?;
    let meta = cfg.run_meta(&ds);
    let started = Instant::now();
    let outcome = run_evaluation(&ds, &eval_cfg, meta.clone()).map_err(AppError::runtime)?;
    let elapsed = started.elapsed().as_secs_f64();

    write_text(&out_dir.join("report.json"), &outcome.report.to_json())?;
    write_text(
        &out_dir.join("tables.txt"),
        &with_meta(&meta, &outcome.report.render_tables()),
    )?;
    write_text(
        &out_dir.join("tables.csv"),
        &with_meta(&meta, &outcome.report.render_csv()),
    )?;
    write_text(
        &out_dir.join("crps_per_step.csv"),
        &with_meta(&meta, &outcome.report.render_crps_curves()),
    )?;
    write_text(&out_dir.join("folds.json"), &outcome.fold_plan.to_json())?;
    write_text(
        &out_dir.join("timings.json"),
        &serde_json::to_string_pretty(&outcome.timings)
            .expect("timing serialization cannot fail"),
    )?;

    print!("{}", outcome.report.render_tables());
    print_timings(&outcome.timings);
    println!(
        "evaluation finished in {elapsed:.1} s; artifacts in {}",
        out_dir.display()
    );
    Ok(())
}

fn print_timings(timings: &TimingReport) {
    println!("training time seconds, mean (std) over folds:");
    for (gate, model, seconds) in &timings.train_seconds {
        println!("  {gate:<11} {model:<11} {}", seconds.render());
    }
}

pub fn train(args: TrainArgs) -> Result<(), AppError> {
    let cfg = merged_config(&args.data, args.config.as_deref(), |c| {
        c.seed = args.seed.or(c.seed);
        c.epochs = args.epochs.or(c.epochs);
        c.learning_rate = args.learning_rate.or(c.learning_rate);
        c.batch_size = args.batch_size.or(c.batch_size);
        c.estimators = args.estimators.or(c.estimators);
        c.folds = args.folds.or(c.folds);
        c.test_days = args.test_days.or(c.test_days);
    })?;
    let kind = ModelKind::parse(&args.model)
        .ok_or_else(|| AppError::usage(format!("unknown model '{}'", args.model)))?;
    let gate = Gate::parse(&args.gate)
        .ok_or_else(|| AppError::usage(format!("unknown gate '{}'", args.gate)))?;

    let ds = cfg.load_dataset()?;
    let meta = cfg.run_meta(&ds);
    let plan = make_folds(ds.span_days, &cfg.fold_config()).map_err(AppError::runtime)?;
    let fold = args.fold.unwrap_or(plan.tuning_pair_index);
    let pair = plan
        .pairs
        .get(fold)
        .ok_or_else(|| AppError::usage(format!("fold {fold} out of range")))?;

    let full = build_samples(&ds, gate.schedule()).map_err(AppError::runtime)?;
    let train_raw = full.subset_by_days(&pair.train_days);
    if train_raw.is_empty() {
        return Err(AppError::runtime("training block has no usable days"));
    }
    let scaler = fit_scaler(&train_raw).map_err(AppError::runtime)?;
    let train_scaled = apply_scaler(&scaler, &train_raw).map_err(AppError::runtime)?;

    let levels = QuantileLevels::deciles();
    let seed = mix_seed(cfg.seed(), gate, kind, fold);
    let started = Instant::now();
    let model = train_model(
        kind,
        &train_scaled,
        &levels,
        &cfg.train_overrides(),
        &cfg.gbr_config(),
        seed,
    )
    .map_err(AppError::runtime)?;
    let seconds = started.elapsed().as_secs_f64();

    let ckpt = Checkpoint::new(gate, levels, ds.pv.capacity_kw, meta, scaler, model);
    ckpt.save(&args.out).map_err(AppError::runtime)?;
    println!(
        "trained {kind} for {gate} on fold {fold} ({} samples) in {seconds:.2} s -> {}",
        train_raw.len(),
        args.out.display()
    );
    Ok(())
}

pub fn forecast(args: ForecastArgs) -> Result<(), AppError> {
    let cfg = merged_config(&args.data, None, |_| {})?;
    let ckpt = Checkpoint::load(&args.checkpoint).map_err(AppError::runtime)?;
    if let Some(gate_name) = &args.gate {
        let gate = Gate::parse(gate_name)
            .ok_or_else(|| AppError::usage(format!("unknown gate '{gate_name}'")))?;
        ckpt.check_gate(gate).map_err(AppError::runtime)?;
    }
    let date = NaiveDate::parse_from_str(&args.date, "%Y-%m-%d")
        .map_err(|_| AppError::usage(format!("bad date '{}', expected YYYY-MM-DD", args.date)))?;

    let ds = cfg.load_dataset()?;
    let meta = cfg.run_meta(&ds);
    let day_offset = (date - ds.pv.start.date()).num_days();
    if day_offset < 0 || day_offset as usize >= ds.span_days {
        return Err(AppError::usage(format!(
            "date {date} is outside the dataset span starting {}",
            ds.pv.start.date()
        )));
    }
    let day = day_offset as usize;
    let schedule = ckpt.gate.schedule();
    let sample = build_inference_sample(&ds, schedule, day).map_err(AppError::runtime)?;
    let (features, past) = scale_inference(&ckpt.scaler, &sample).map_err(AppError::runtime)?;

    let feats = pvcast_core::ndarray::Array1::from_vec(features);
    let past = past.map(pvcast_core::ndarray::Array1::from_vec);
    let zm = ckpt
        .model
        .predict_matrix(
            feats.view(),
            past.as_ref().map(|p| p.view()),
            sample.issue_time,
            schedule.horizon_indices(),
            &ckpt.levels,
            ckpt.capacity_kw,
        )
        .map_err(AppError::runtime)?;

    let mut body = String::from("k,observation_kw");
    for q in ckpt.levels.iter() {
        body.push_str(&format!(",q{q}"));
    }
    body.push('\n');
    for (row, &k) in zm.horizon_indices.iter().enumerate() {
        body.push_str(&k.to_string());
        body.push(',');
        if let Some(obs) = sample.observations[row] {
            body.push_str(&obs.to_string());
        }
        for v in zm.row(row) {
            body.push_str(&format!(",{v}"));
        }
        body.push('\n');
    }
    write_text(&args.out, &with_meta(&meta, &body))?;
    println!(
        "wrote {} forecast rows for {date} at {} -> {}",
        zm.n_steps(),
        ckpt.gate,
        args.out.display()
    );
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<(), AppError> {
    if args.days < 2 {
        return Err(AppError::usage("--days must be at least 2"));
    }
    if args.capacity <= 0.0 {
        return Err(AppError::usage("--capacity must be positive"));
    }
    let spec = format!(
        "days={},seed={},capacity={}",
        args.days, args.seed, args.capacity
    );
    // Reuse the --synthetic parser so both entry points agree exactly.
    let synth_cfg: SyntheticConfig = parse_synthetic_spec(&spec, Some(args.capacity))?;
    let generated = generate_synthetic(&synth_cfg);
    let run_cfg = RunConfig {
        synthetic: Some(spec),
        capacity: Some(args.capacity),
        seed: Some(args.seed),
        ..Default::default()
    };
    let meta = run_cfg.run_meta(&generated.dataset);

    std::fs::create_dir_all(&args.out)
        .map_err(|e| AppError::runtime(format!("creating {}: {e}", args.out.display())))?;
    let lines = meta_lines(&meta);
    pvcast_core::pipeline::save_pv_csv(&args.out.join("pv.csv"), &generated.dataset.pv, &lines)
        .map_err(AppError::runtime)?;
    pvcast_core::pipeline::save_weather_csv(
        &args.out.join("weather.csv"),
        &generated.dataset.weather_sets(),
        &lines,
    )
    .map_err(AppError::runtime)?;
    let mut f = std::fs::File::create(args.out.join("truth.json"))
        .map_err(|e| AppError::runtime(format!("creating truth.json: {e}")))?;
    writeln!(
        f,
        "{}",
        serde_json::to_string_pretty(&generated.truth).expect("truth serialization cannot fail")
    )
    .map_err(AppError::runtime)?;
    println!(
        "wrote {} days (capacity {} kW, seed {}) to {}",
        args.days,
        args.capacity,
        args.seed,
        args.out.display()
    );
    Ok(())
}
