use std::path::Path;
use std::time::Instant;

use boxseg_core::classify::{featurize, fit_classifier, stratified_split};
use boxseg_core::io::{load_gray, load_mask, load_rgb, save_gray, save_mask, GrayPolicy, Palette};
use boxseg_core::metrics::{confusion, scalar_metrics, ConfusionMatrix, MetricReport};
use boxseg_core::prefilter::{prefilter_gray, PipelineConfig, DEFAULT_SHIFT};
use boxseg_core::sweep::{export_plot_data, export_sweep, run_sweep, SweepConfig};
use boxseg_core::synth::{lognormal_image, normal_image, CrackScene};
use boxseg_core::{fit_lambda, Error, GrayImage, LabelMask};
use serde::Serialize;

use crate::config::{self, pick, ClassifierValue, FileConfig, GridValue, LambdaArg, LambdaName};
use crate::manifest::{manifest_path, Manifest};
use crate::{CliError, EstimateArgs, EvaluateArgs, OnOff, SegmentArgs, SweepArgs, SynthArgs, SynthKind, TransformArgs};

type Result<T> = std::result::Result<T, CliError>;

const MLE: LambdaArg = LambdaArg::Named(LambdaName::Mle);

fn write_manifest(m: &Manifest, explicit: Option<&Path>, primary: Option<&Path>) -> Result<()> {
    if let Some(path) = manifest_path(explicit, primary) {
        m.write(&path)?;
        eprintln!("manifest: {}", path.display());
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Json(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn load_image_gray(path: &Path) -> Result<GrayImage> {
    Ok(load_rgb(path, GrayPolicy::Promote)?.to_gray())
}

fn names_of(mask: &LabelMask) -> Vec<String> {
    mask.class_names().to_vec()
}

pub fn transform(a: &TransformArgs, file: &FileConfig, threads: Option<usize>) -> Result<()> {
    let mut resolved = FileConfig {
        threads,
        ..FileConfig::default()
    };
    let seed = pick(a.seed, file.seed, 0);
    let lambda = pick(a.lambda, file.lambda, MLE);
    let shift = pick(a.shift, file.shift, DEFAULT_SHIFT);
    let range = config::range(a.range.as_deref(), file)?;
    let estimator = config::estimator(&a.estimator, file, seed, &mut resolved)?;
    resolved.seed = Some(seed);
    resolved.lambda = Some(lambda);
    resolved.shift = Some(shift);
    resolved.range = Some(range.to_string());

    let gray = load_image_gray(&a.input)?;
    let out = prefilter_gray(
        &gray,
        &PipelineConfig {
            lambda: config::lambda_choice(lambda, estimator),
            shift,
            range,
        },
    )?;
    save_gray(&out.image, &a.output)?;

    println!("lambda = {}", out.params.lambda);
    println!("shift = {}", out.params.shift);
    println!("range = {range}");
    let mut m = Manifest::new("transform", resolved);
    m.input("input", &a.input);
    m.output("image", &a.output);
    m.result("lambda", &out.params.lambda);
    m.result("shift", &out.params.shift);
    m.result("range", &range.to_string());
    if let Some(est) = &out.estimate {
        println!("loglik = {}", est.loglik_at_max);
        m.result("loglik", &est.loglik_at_max);
        m.result("sigma2_hat", &est.sigma2_hat);
        m.result("theta_hat", &est.theta_hat);
        m.result("n_used", &est.n_used);
    }
    write_manifest(&m, a.manifest.as_deref(), Some(&a.output))
}

pub fn estimate_lambda(a: &EstimateArgs, file: &FileConfig, threads: Option<usize>) -> Result<()> {
    let mut resolved = FileConfig {
        threads,
        ..FileConfig::default()
    };
    let seed = pick(a.seed, file.seed, 0);
    let shift = pick(a.shift, file.shift, DEFAULT_SHIFT);
    let estimator = config::estimator(&a.estimator, file, seed, &mut resolved)?;
    resolved.seed = Some(seed);
    resolved.shift = Some(shift);

    let gray = load_image_gray(&a.input)?;
    let est = fit_lambda(&gray.vectorize(), shift, &estimator)?;

    println!("lambda_hat = {}", est.lambda_hat);
    println!("sigma2_hat = {}", est.sigma2_hat);
    println!(
        "theta_hat = [{}]",
        est.theta_hat.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
    );
    println!("loglik = {}", est.loglik_at_max);
    println!("n_used = {}", est.n_used);

    let mut m = Manifest::new("estimate-lambda", resolved);
    m.input("input", &a.input);
    if let Some(path) = &a.trace {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Csv(e.to_string()))?;
        w.write_record(["lambda", "loglik"]).map_err(|e| Error::Csv(e.to_string()))?;
        for (l, ll) in &est.grid_evaluations {
            w.write_record([l.to_string(), ll.to_string()])
                .map_err(|e| Error::Csv(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        m.output("trace", path);
    }
    if let Some(path) = &a.json {
        write_json(path, &est)?;
        m.output("json", path);
    }
    m.result("lambda_hat", &est.lambda_hat);
    m.result("sigma2_hat", &est.sigma2_hat);
    m.result("theta_hat", &est.theta_hat);
    m.result("loglik", &est.loglik_at_max);
    m.result("n_used", &est.n_used);
    write_manifest(&m, a.manifest.as_deref(), a.trace.as_deref().or(a.json.as_deref()))
}

#[derive(Serialize)]
struct SegmentReports<'a> {
    /// Scores on the held-out pixels only.
    test: &'a MetricReport,
    /// Scores on every pixel of the written mask.
    full: &'a MetricReport,
}

pub fn segment(a: &SegmentArgs, file: &FileConfig, threads: Option<usize>) -> Result<()> {
    let mut resolved = FileConfig {
        threads,
        ..FileConfig::default()
    };
    let seed = pick(a.seed, file.seed, 0);
    let prefilter = match a.prefilter {
        Some(v) => v == OnOff::On,
        None => file.prefilter.unwrap_or(true),
    };
    let palette = config::palette(a.palette.as_deref(), file)?;
    let featurizer = config::featurizer(a.featurizer.as_deref(), file)?;
    let spec = config::classifier(a.classifier.as_deref(), file)?;
    let fraction = pick(a.train_fraction, file.train_fraction, 0.5);
    resolved.seed = Some(seed);
    resolved.prefilter = Some(prefilter);
    resolved.palette = Some(palette.to_string());
    resolved.featurizer = Some(featurizer.to_string());
    resolved.classifier = Some(ClassifierValue::Spec(spec));
    resolved.train_fraction = Some(fraction);

    let gray = load_image_gray(&a.input)?;
    let truth = load_mask(&a.mask, &palette)?;
    if gray.shape() != truth.shape() {
        return Err(Error::ShapeMismatch {
            left: gray.shape(),
            right: truth.shape(),
        }
        .into());
    }

    let mut m = Manifest::new("segment", FileConfig::default());
    let image = if prefilter {
        let lambda = pick(a.lambda, file.lambda, MLE);
        let shift = pick(a.shift, file.shift, DEFAULT_SHIFT);
        let range = config::range(a.range.as_deref(), file)?;
        let estimator = config::estimator(&a.estimator, file, seed, &mut resolved)?;
        resolved.lambda = Some(lambda);
        resolved.shift = Some(shift);
        resolved.range = Some(range.to_string());
        let out = prefilter_gray(
            &gray,
            &PipelineConfig {
                lambda: config::lambda_choice(lambda, estimator),
                shift,
                range,
            },
        )?;
        println!("prefilter: lambda = {}, shift = {}, range = {}", out.params.lambda, shift, range);
        m.result("lambda", &out.params.lambda);
        if let Some(est) = &out.estimate {
            m.result("loglik", &est.loglik_at_max);
        }
        out.image
    } else {
        println!("prefilter: off (grayscale intensities)");
        gray
    };

    let k = truth.num_classes();
    let features = featurize(&image, featurizer)?;
    let split = stratified_split(truth.labels(), k, fraction, seed)?;
    let train_labels: Vec<u8> = split.train.iter().map(|&i| truth.labels()[i]).collect();
    let start = Instant::now();
    let model = fit_classifier(&features.select(&split.train), &train_labels, k, featurizer, &spec, seed)?;
    let fit_seconds = start.elapsed().as_secs_f64();

    let pred = LabelMask::new(image.width(), image.height(), k, model.predict(&features)?)?
        .with_class_names(names_of(&truth))?;
    let test_truth: Vec<u8> = split.test.iter().map(|&i| truth.labels()[i]).collect();
    let test_pred: Vec<u8> = split.test.iter().map(|&i| pred.labels()[i]).collect();
    let test = scalar_metrics(&ConfusionMatrix::from_labels(&test_truth, &test_pred, k)?)?;
    let full = scalar_metrics(&confusion(&pred, &truth)?)?;
    save_mask(&pred, &palette, &a.output)?;

    let names = names_of(&truth);
    println!("classifier: {} ({} training pixels), fit {:.3} s", spec.name(), split.train.len(), fit_seconds);
    println!("\nheld-out pixels ({}):", split.test.len());
    print!("{}", test.to_table(&names));
    println!("\nall pixels ({}):", truth.labels().len());
    print!("{}", full.to_table(&names));

    m.config = resolved;
    m.input("input", &a.input);
    m.input("mask", &a.mask);
    m.output("prediction", &a.output);
    if let Some(path) = &a.metrics {
        test.write_csv(path, &names)?;
        m.output("metrics", path);
    }
    if let Some(path) = &a.json {
        write_json(path, &SegmentReports { test: &test, full: &full })?;
        m.output("json", path);
    }
    if let Some(path) = &a.model_out {
        model.save(path)?;
        m.output("model", path);
    }
    m.result("fit_seconds", &fit_seconds);
    m.result("train_pixels", &split.train.len());
    m.result("test_pixels", &split.test.len());
    m.result("test_accuracy", &test.accuracy);
    m.result("test_macro_precision", &test.macro_precision);
    m.result("test_macro_recall", &test.macro_recall);
    m.result("test_macro_f1", &test.macro_f1);
    if let Some(kappa) = test.kappa {
        m.result("test_kappa", &kappa);
    }
    m.result("full_accuracy", &full.accuracy);
    write_manifest(&m, a.manifest.as_deref(), Some(&a.output))
}

pub fn evaluate(a: &EvaluateArgs, file: &FileConfig, threads: Option<usize>) -> Result<()> {
    let palette: Palette = config::palette(a.palette.as_deref(), file)?;
    let resolved = FileConfig {
        threads,
        palette: Some(palette.to_string()),
        ..FileConfig::default()
    };
    let pred = load_mask(&a.pred, &palette)?;
    let truth = load_mask(&a.truth, &palette)?;
    let report = scalar_metrics(&confusion(&pred, &truth)?)?;
    print!("{}", report.to_table(&[]));

    let mut m = Manifest::new("evaluate", resolved);
    m.input("pred", &a.pred);
    m.input("truth", &a.truth);
    if let Some(path) = &a.metrics {
        report.write_csv(path, &[])?;
        m.output("metrics", path);
    }
    if let Some(path) = &a.json {
        write_json(path, &report)?;
        m.output("json", path);
    }
    m.result("accuracy", &report.accuracy);
    if let Some(kappa) = report.kappa {
        m.result("kappa", &kappa);
    }
    write_manifest(&m, a.manifest.as_deref(), a.metrics.as_deref().or(a.json.as_deref()))
}

pub fn sweep(a: &SweepArgs, file: &FileConfig, threads: Option<usize>) -> Result<()> {
    let defaults = SweepConfig::default();
    let palette = config::palette(a.palette.as_deref(), file)?;
    let grid = match (&a.grid, &file.grid) {
        (Some(s), _) => config::parse_grid(s)?,
        (None, Some(g)) => g.resolve()?,
        (None, None) => defaults.grid.clone(),
    };
    let cfg = SweepConfig {
        grid,
        classifier: config::classifier(a.classifier.as_deref(), file)?,
        featurizer: config::featurizer(a.featurizer.as_deref(), file)?,
        range: config::range(a.range.as_deref(), file)?,
        shift: pick(a.shift, file.shift, defaults.shift),
        train_fraction: pick(a.train_fraction, file.train_fraction, defaults.train_fraction),
        seed: pick(a.seed, file.seed, defaults.seed),
        precision: config::precision(a.precision.as_deref(), file)?,
        annotate_mle: if a.no_mle { false } else { file.mle.unwrap_or(true) },
    };
    let resolved = FileConfig {
        threads,
        seed: Some(cfg.seed),
        shift: Some(cfg.shift),
        range: Some(cfg.range.to_string()),
        palette: Some(palette.to_string()),
        featurizer: Some(cfg.featurizer.to_string()),
        train_fraction: Some(cfg.train_fraction),
        precision: Some(cfg.precision.to_string()),
        mle: Some(cfg.annotate_mle),
        grid: Some(GridValue::Values(cfg.grid.clone())),
        classifier: Some(ClassifierValue::Spec(cfg.classifier)),
        ..FileConfig::default()
    };

    let gray = load_image_gray(&a.input)?;
    let mask = load_mask(&a.mask, &palette)?;
    let result = run_sweep(&gray, &mask, &cfg)?;
    let written = export_sweep(&result, &a.output)?;

    let ok = result.rows.iter().filter(|r| r.metrics().is_some()).count();
    println!("grid points: {} ({} ok, {} failed)", result.rows.len(), ok, result.rows.len() - ok);
    let show = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |l| l.to_string());
    println!("argmax kappa at lambda = {}", show(result.argmax_kappa));
    println!("argmax precision at lambda = {}", show(result.argmax_precision));
    match (&result.mle, &result.mle_error) {
        (Some(mle), _) => println!("mle lambda_hat = {}", mle.lambda_hat),
        (None, Some(e)) => println!("mle lambda_hat unavailable: {e}"),
        (None, None) => {}
    }

    let mut m = Manifest::new("sweep", resolved);
    m.input("input", &a.input);
    m.input("mask", &a.mask);
    for (name, path) in ["csv", "annotations", "timing"].iter().zip(&written) {
        m.output(name, path);
    }
    if let Some(path) = &a.plot_data {
        export_plot_data(&result, path)?;
        m.output("plot_data", path);
    }
    if let Some(l) = result.argmax_kappa {
        m.result("argmax_kappa", &l);
    }
    if let Some(l) = result.argmax_precision {
        m.result("argmax_precision", &l);
    }
    if let Some(mle) = &result.mle {
        m.result("mle_lambda_hat", &mle.lambda_hat);
    }
    write_manifest(&m, a.manifest.as_deref(), Some(&a.output))
}

pub fn synth(a: &SynthArgs, file: &FileConfig, threads: Option<usize>) -> Result<()> {
    let seed = pick(a.seed, file.seed, 0);
    let resolved = FileConfig {
        threads,
        seed: Some(seed),
        ..FileConfig::default()
    };
    let mut m = Manifest::new("synth", resolved);
    m.result("width", &a.width);
    m.result("height", &a.height);
    match a.kind {
        SynthKind::Crack => {
            let mask_path = a
                .mask
                .as_ref()
                .ok_or_else(|| CliError::Usage("--kind crack needs --mask".into()))?;
            let defaults = CrackScene::default();
            let scene = CrackScene {
                width: a.width,
                height: a.height,
                background: (
                    a.mu.unwrap_or(defaults.background.0),
                    a.sigma.unwrap_or(defaults.background.1),
                ),
                ..defaults
            };
            let (img, mask) = scene.generate(seed)?;
            save_gray(&img, &a.output)?;
            save_mask(&mask, &Palette::binary(), mask_path)?;
            m.output("mask", mask_path);
            m.result("scene", &scene);
        }
        SynthKind::Lognormal | SynthKind::Normal => {
            let (mu, sigma, img) = if a.kind == SynthKind::Lognormal {
                let (mu, sigma) = (a.mu.unwrap_or(4.0), a.sigma.unwrap_or(0.3));
                (mu, sigma, lognormal_image(a.width, a.height, mu, sigma, seed)?)
            } else {
                let (mu, sigma) = (a.mu.unwrap_or(128.0), a.sigma.unwrap_or(5.0));
                (mu, sigma, normal_image(a.width, a.height, mu, sigma, seed)?)
            };
            save_gray(&img, &a.output)?;
            m.result("mu", &mu);
            m.result("sigma", &sigma);
        }
    }
    // read back so the manifest reflects what was actually encoded
    let written = load_gray(&a.output)?;
    m.result("pixels", &written.len());
    m.output("image", &a.output);
    println!("wrote {}", a.output.display());
    write_manifest(&m, a.manifest.as_deref(), Some(&a.output))
}
