//! Implementations of the five subcommands.

use std::fs;
use std::path::Path;

use serde_json::json;

use mtgn::flow::{flow_forward, push};
use mtgn::io;
use mtgn::kernel::{misfit, KernelConfig};
use mtgn::objective::energy;
use mtgn::rng::Seed;
use mtgn::saddle::{run_descent_ascent, SaddleConfig};
use mtgn::synthetic::{evaluate_error, make_task};
use mtgn::trainer::{self, OptimizerKind, SigmaSchedule, TrainConfig};
use mtgn::{Error, Matrix, Result};

use crate::manifest::RunManifest;
use crate::svg;
use crate::{EvalArgs, IngestArgs, OptimizerArg, SaddleArgs, SynthArgs, TrainArgs};

fn ensure_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    ensure_out_dir(&args.out)?;
    let task = make_task::<f64>(
        args.d,
        args.layers,
        args.n,
        args.n_test,
        args.weight_scale,
        Seed(args.seed),
    )?;

    let mut manifest = RunManifest::new(
        "synth",
        json!({
            "d": args.d,
            "layers": args.layers,
            "n": args.n,
            "n_test": args.n_test,
            "weight_scale": args.weight_scale,
            "seed": args.seed,
        }),
    )
    .with_seed(args.seed);

    let template_path = args.out.join("T_train.csv");
    let reference_path = args.out.join("R_train.csv");
    let test_path = args.out.join("T_test.csv");
    let theta_path = args.out.join("theta_true.json");
    io::write_points(&template_path, &task.template)?;
    io::write_points(&reference_path, &task.reference)?;
    io::write_points(&test_path, &task.template_test)?;
    io::write_checkpoint(&theta_path, &task.theta_true)?;
    manifest.add_output(&template_path)?;
    manifest.add_output(&reference_path)?;
    manifest.add_output(&test_path)?;
    manifest.add_output(&theta_path)?;

    if args.d == 2 {
        let scatter_path = args.out.join("scatter.svg");
        let plot = svg::scatter(
            &[
                (&task.template, "#4682b4", "template"),
                (&task.reference, "#d9534f", "reference"),
            ],
            "synthetic task: template and reference clouds",
        );
        io::write_text_atomic(&scatter_path, &plot)?;
        manifest.add_output(&scatter_path)?;
    } else {
        manifest.add_note(format!(
            "scatter omitted: clouds are {}-dimensional, the scatter plot needs 2",
            args.d
        ));
    }
    manifest.write(&args.out)?;
    println!(
        "synth: wrote task (d={}, n={}, depth {}) to {}",
        args.d,
        args.n,
        args.layers,
        args.out.display()
    );
    Ok(())
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let template = io::read_points::<f64>(&args.template)?;
    let reference = io::read_points::<f64>(&args.reference)?;

    let mut cfg = TrainConfig::<f64>::new(Seed(args.seed))
        .with_alpha(args.alpha)
        .with_learning_rate(args.lr)
        .with_epochs(args.epochs)
        .with_batch_size(args.batch)
        .with_layers(args.layers)
        .with_schedule(SigmaSchedule::new(
            args.sigma_init,
            args.sigma_factor,
            args.sigma_period,
            args.sigma_floor,
        )?)
        .with_optimizer(match args.optimizer {
            OptimizerArg::Adam => OptimizerKind::Adam,
            OptimizerArg::Gd => OptimizerKind::Descent,
        });
    cfg.steps_per_epoch = args.steps_per_epoch;
    cfg.allow_small_batch = args.allow_small_batch;
    cfg.use_bias = args.bias;

    let outcome = trainer::train(&cfg, &template, &reference)?;

    ensure_out_dir(&args.out)?;
    let mut manifest = RunManifest::new(
        "train",
        json!({
            "template": args.template.display().to_string(),
            "reference": args.reference.display().to_string(),
            "layers": args.layers,
            "bias": args.bias,
            "seed": args.seed,
            "alpha": args.alpha,
            "lr": args.lr,
            "epochs": args.epochs,
            "batch": args.batch,
            "steps_per_epoch": args.steps_per_epoch,
            "allow_small_batch": args.allow_small_batch,
            "sigma": {
                "init": args.sigma_init,
                "factor": args.sigma_factor,
                "period": args.sigma_period,
                "floor": args.sigma_floor,
            },
            "optimizer": match args.optimizer {
                OptimizerArg::Adam => "adam",
                OptimizerArg::Gd => "gd",
            },
        }),
    )
    .with_seed(args.seed);
    manifest.add_input(&args.template)?;
    manifest.add_input(&args.reference)?;

    let checkpoint_path = args.out.join("checkpoint.json");
    let history_path = args.out.join("history.csv");
    let config_path = args.out.join("config.json");
    let history_svg_path = args.out.join("history.svg");
    io::write_checkpoint(&checkpoint_path, &outcome.params)?;
    io::write_history(&history_path, &outcome.history)?;
    io::write_train_config(&config_path, &cfg)?;
    io::write_text_atomic(
        &history_svg_path,
        &svg::history(&outcome.history, "training history (log scale)"),
    )?;
    manifest.add_output(&checkpoint_path)?;
    manifest.add_output(&history_path)?;
    manifest.add_output(&config_path)?;
    manifest.add_output(&history_svg_path)?;

    if template.cols() == 2 {
        let pushed = push(&outcome.params, &template)?;
        let scatter_path = args.out.join("scatter.svg");
        let plot = svg::scatter(
            &[
                (&pushed, "#4682b4", "transported template"),
                (&reference, "#d9534f", "reference"),
            ],
            "trained transport vs reference",
        );
        io::write_text_atomic(&scatter_path, &plot)?;
        manifest.add_output(&scatter_path)?;
    } else {
        manifest.add_note(format!(
            "scatter omitted: clouds are {}-dimensional, the scatter plot needs 2",
            template.cols()
        ));
    }
    manifest.write(&args.out)?;

    if let Some(last) = outcome.history.last() {
        println!(
            "train: {} epochs, final sigma {:.6}, misfit {:.6e}, energy {:.6e}, total {:.6e}",
            outcome.history.records.len(),
            last.sigma,
            last.misfit,
            last.energy,
            last.total
        );
    } else {
        println!("train: 0 epochs requested, wrote the initialization unchanged");
    }
    println!("train: artifacts in {}", args.out.display());
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let params = io::read_checkpoint::<f64>(&args.checkpoint)?;
    let test = io::read_points::<f64>(&args.test)?;
    let traj = flow_forward(&params, &test)?;
    let pushed = traj.output().clone();
    let path_energy = energy(&params, &traj);

    let mut manifest = RunManifest::new(
        "eval",
        json!({
            "checkpoint": args.checkpoint.display().to_string(),
            "test": args.test.display().to_string(),
            "theta_true": args.theta_true.as_ref().map(|p| p.display().to_string()),
            "reference": args.reference.as_ref().map(|p| p.display().to_string()),
            "sigma": args.sigma,
        }),
    );
    manifest.add_input(&args.checkpoint)?;
    manifest.add_input(&args.test)?;

    let mut report = json!({
        "n": test.rows(),
        "d": test.cols(),
        "energy": path_energy,
    });
    let mut summary = format!(
        "eval: pushed {} points (d={}), energy {path_energy:.6e}",
        test.rows(),
        test.cols()
    );

    if let Some(theta_path) = &args.theta_true {
        let theta_true = io::read_checkpoint::<f64>(theta_path)?;
        let recovery = evaluate_error(&params, &theta_true, &test)?;
        manifest.add_input(theta_path)?;
        report["E"] = json!(recovery);
        summary.push_str(&format!(", E = {recovery:.6}"));
    }
    if let Some(reference_path) = &args.reference {
        let reference = io::read_points::<f64>(reference_path)?;
        let kernel = KernelConfig::new(args.sigma, test.cols())?;
        let m = misfit(&kernel, &pushed, &reference)?;
        manifest.add_input(reference_path)?;
        report["misfit_final"] = json!(m);
        report["sigma"] = json!(args.sigma);
        summary.push_str(&format!(", misfit {m:.6e} at sigma {}", args.sigma));
    }

    ensure_out_dir(&args.out)?;
    let pushed_path = args.out.join("pushed.csv");
    let report_path = args.out.join("eval.json");
    io::write_points(&pushed_path, &pushed)?;
    let report_text = serde_json::to_string_pretty(&report).map_err(|source| Error::Json {
        context: "encoding eval report".to_string(),
        source,
    })?;
    io::write_text_atomic(&report_path, &report_text)?;
    manifest.add_output(&pushed_path)?;
    manifest.add_output(&report_path)?;
    manifest.write(&args.out)?;
    println!("{summary}");
    Ok(())
}

pub fn saddle(args: &SaddleArgs) -> Result<()> {
    let cfg = SaddleConfig::<f64>::new()
        .with_mu(args.mu)
        .with_steps(args.steps)
        .with_start(args.theta0, args.eta0)
        .with_simultaneous(args.simultaneous);
    let traj = run_descent_ascent(&cfg)?;

    ensure_out_dir(&args.out)?;
    let mut manifest = RunManifest::new(
        "saddle",
        json!({
            "mu": args.mu,
            "steps": args.steps,
            "theta0": args.theta0,
            "eta0": args.eta0,
            "simultaneous": args.simultaneous,
        }),
    );

    let mut csv = String::from("k,theta,eta\n");
    for (k, (t, e)) in traj.points.iter().enumerate() {
        csv.push_str(&format!("{k},{t:.16e},{e:.16e}\n"));
    }
    let csv_path = args.out.join("saddle.csv");
    io::write_text_atomic(&csv_path, &csv)?;

    let quadrants = traj.quadrants_visited();
    let summary = json!({
        "steps": args.steps,
        "end": [traj.end().0, traj.end().1],
        "norm_ratio": traj.norm_ratio(),
        "winding_angle": traj.winding_angle(),
        "quadrants_visited": quadrants,
    });
    let summary_path = args.out.join("saddle.json");
    io::write_text_atomic(
        &summary_path,
        &serde_json::to_string_pretty(&summary).map_err(|source| Error::Json {
            context: "encoding saddle summary".to_string(),
            source,
        })?,
    )?;

    let svg_path = args.out.join("saddle.svg");
    io::write_text_atomic(
        &svg_path,
        &svg::saddle_path(&traj, "descent-ascent iterates around the saddle"),
    )?;

    manifest.add_output(&csv_path)?;
    manifest.add_output(&summary_path)?;
    manifest.add_output(&svg_path)?;
    manifest.write(&args.out)?;
    println!(
        "saddle: {} steps, |end|/|start| = {:.3e}, winding {:.2} rad, quadrants visited {}",
        args.steps,
        traj.norm_ratio(),
        traj.winding_angle(),
        quadrants.iter().filter(|&&q| q).count()
    );
    Ok(())
}

pub fn ingest(args: &IngestArgs) -> Result<()> {
    let points = io::read_points::<f64>(&args.input)?;
    ensure_out_dir(&args.out)?;
    let mut manifest = RunManifest::new(
        "ingest",
        json!({ "input": args.input.display().to_string() }),
    );
    manifest.add_input(&args.input)?;
    let out_path = args.out.join("points.csv");
    io::write_points(&out_path, &points)?;
    manifest.add_output(&out_path)?;
    manifest.add_note(format!(
        "{} points in {} dimensions",
        points.rows(),
        points.cols()
    ));
    manifest.write(&args.out)?;
    println!(
        "ingest: {} points (d={}) re-encoded to {}",
        points.rows(),
        points.cols(),
        out_path.display()
    );
    for (dim, (mean, std)) in column_stats(&points).into_iter().enumerate() {
        println!("  dim {dim}: mean {mean:.6e}, std {std:.6e}");
    }
    Ok(())
}

/// Per-column mean and sample standard deviation (n-1 denominator, 0 for a
/// single row).
fn column_stats(points: &Matrix<f64>) -> Vec<(f64, f64)> {
    let n = points.rows();
    (0..points.cols())
        .map(|c| {
            let mean = (0..n).map(|r| points[(r, c)]).sum::<f64>() / n as f64;
            let var = if n > 1 {
                (0..n).map(|r| (points[(r, c)] - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            (mean, var.sqrt())
        })
        .collect()
}
