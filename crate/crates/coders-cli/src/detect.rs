//! `detect`: run the onset detector over a responses CSV.

use std::path::Path;
use std::time::Instant;

use coders::autoencoder::{save_checkpoint, CheckpointMeta};
use coders::changepoint::Series;
use coders::data::{load_design, load_responses, validate_design};
use coders::pipeline::{run_coders, CodersConfig, Dims};

use crate::config::{self, Settings};
use crate::emit;
use crate::manifest::RunManifest;
use crate::{Cli, DetectArgs, Failure};

const KEYS: &[&str] = &[
    "alpha",
    "batch_size",
    "bottleneck",
    "categories",
    "delimiter",
    "delta",
    "dims",
    "epochs",
    "header",
    "jobs",
    "l_max",
    "learning_rate",
    "noise_sd",
    "out_dir",
    "seed",
];

pub fn run(cli: &Cli, args: &DetectArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let mut settings = Settings::load(cli.config.as_deref())?;
    settings.set_if("alpha", args.alpha);
    settings.set_if("dims", args.dims.as_deref());
    settings.set_if("l_max", args.l_max);
    settings.set_if("seed", args.seed);
    settings.set_if("jobs", cli.jobs);
    settings.set("out_dir", cli.out_dir.display());
    settings.check_keys(KEYS)?;
    emit::prepare_dir(&cli.out_dir)?;

    let dims = Dims::parse(settings.raw("dims").unwrap_or("both"))?;
    if dims.uses_re() && args.design.is_none() {
        return Err(Failure::config(format!(
            "--design is required for dims={}: the network bottleneck is the construct count",
            dims.as_str()
        )));
    }

    let loading = Instant::now();
    let schema = config::csv_schema(&settings)?;
    let m = load_responses(&args.input, &schema, config::categories(&settings)?)?;
    let design = args.design.as_deref().map(load_design).transpose()?;
    if let Some(d) = &design {
        for warning in validate_design(&m, d)?.warnings {
            log::warn!("{warning}");
        }
    }
    let load_s = loading.elapsed().as_secs_f64();

    let seed: u64 = settings.get_or("seed", 0)?;
    let bottleneck = match settings.get("bottleneck")? {
        Some(b) => b,
        None => design.as_ref().map_or(1, |d| d.s()),
    };
    let mut cfg = CodersConfig::new(bottleneck, seed);
    cfg.dims = dims;
    cfg.alpha = settings.get_or("alpha", cfg.alpha)?;
    cfg.l_max = settings.get("l_max")?;
    cfg.noise_sd = settings.get_or("noise_sd", cfg.noise_sd)?;
    cfg.autoencoder.epochs = settings.get_or("epochs", cfg.autoencoder.epochs)?;
    cfg.autoencoder.batch_size = settings.get_or("batch_size", cfg.autoencoder.batch_size)?;
    cfg.autoencoder.learning_rate =
        settings.get_or("learning_rate", cfg.autoencoder.learning_rate)?;
    cfg.autoencoder.delta = settings.get_or("delta", cfg.autoencoder.delta)?;

    log::info!(
        "detecting over {} respondents x {} items (dims={}, alpha={})",
        m.n(),
        m.p(),
        dims.as_str(),
        cfg.alpha
    );
    let detecting = Instant::now();
    let detection = run_coders(&m, &cfg)?;
    let detect_s = detecting.elapsed().as_secs_f64();
    let flagged = detection.results.iter().filter(|r| r.flagged).count();
    log::info!("flagged {flagged} of {} respondents", m.n());

    let writing = Instant::now();
    let mut manifest = RunManifest::new("detect", &settings, Some(seed));
    manifest.input("responses", &args.input);
    if let Some(path) = &args.design {
        manifest.input("design", path);
    }

    let results_path = cli.out_dir.join("results.csv");
    emit::write_csv(
        &results_path,
        &["respondent", "flagged", "onset", "sn", "alpha"],
        detection.results.iter().enumerate().map(|(i, r)| {
            vec![
                (i + 1).to_string(),
                r.flagged.to_string(),
                emit::cell(r.onset),
                emit::cell(r.sn),
                cfg.alpha.to_string(),
            ]
        }),
    )?;
    manifest.output("results", &results_path);

    if args.emit_series {
        let series_path = cli.out_dir.join("series.csv");
        write_series(&series_path, &detection.series, dims)?;
        manifest.output("series", &series_path);
    }
    if let Some(trained) = &detection.autoencoder {
        let checkpoint_path = cli.out_dir.join("autoencoder.ckpt");
        let meta =
            CheckpointMeta { seed: cfg.autoencoder.seed, epochs: cfg.autoencoder.epochs as u64 };
        save_checkpoint(&checkpoint_path, &trained.params, &meta)?;
        manifest.output("autoencoder", &checkpoint_path);
    }

    manifest.time("load", load_s);
    manifest.time("detect", detect_s);
    manifest.time("write", writing.elapsed().as_secs_f64());
    manifest.time("total", start.elapsed().as_secs_f64());
    manifest.write(&cli.out_dir.join("manifest.json"))?;
    Ok(())
}

/// Long-format dump of the per-respondent test series, one row per item.
fn write_series(path: &Path, series: &[Series], dims: Dims) -> coders::Result<()> {
    let header: &[&str] = match dims {
        Dims::Both => &["respondent", "item", "re", "lsp"],
        Dims::ReOnly => &["respondent", "item", "re"],
        Dims::LspOnly => &["respondent", "item", "lsp"],
    };
    let rows = series.iter().enumerate().flat_map(|(i, y)| {
        (0..y.p()).map(move |j| {
            let mut row = vec![(i + 1).to_string(), (j + 1).to_string()];
            for c in 0..y.d() {
                row.push(y.at(j, c).to_string());
            }
            row
        })
    });
    emit::write_csv(path, header, rows)
}
