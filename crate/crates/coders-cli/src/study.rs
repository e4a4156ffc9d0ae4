//! `study`: replicated simulation studies over a condition grid.

use std::time::Instant;

use coders::pipeline::{run_study, Dims, StudyCell, StudyPlan};
use coders::simulate::OnsetRegime;

use crate::config::Settings;
use crate::emit;
use crate::manifest::RunManifest;
use crate::simulate_cmd::{build_spec, SPEC_KEYS};
use crate::{Cli, Failure, StudyArgs};

const GRID_KEYS: &[&str] =
    &["alphas", "dims", "l_max", "noise_sd", "prevalences", "regimes", "replicates"];

pub fn run(cli: &Cli, args: &StudyArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let mut settings = Settings::load(cli.config.as_deref())?;
    settings.set_if("seed", args.seed);
    settings.set_if("l_max", args.l_max);
    settings.set_if("replicates", args.replicates);
    settings.set_if("alphas", args.alpha);
    settings.set_if("dims", args.dims.as_deref());
    settings.set_if("jobs", cli.jobs);
    settings.set("out_dir", cli.out_dir.display());
    let mut known = SPEC_KEYS.to_vec();
    known.extend_from_slice(GRID_KEYS);
    known.extend_from_slice(&["jobs", "out_dir"]);
    settings.check_keys(&known)?;
    emit::prepare_dir(&cli.out_dir)?;

    let base = build_spec(&settings)?;
    let mut plan = StudyPlan::new(base, settings.require("seed")?);
    plan.prevalences =
        settings.get_list("prevalences")?.unwrap_or_else(|| vec![plan.base.gamma]);
    plan.regimes = match settings.raw("regimes") {
        Some(raw) => raw
            .split(',')
            .map(|r| OnsetRegime::parse(r.trim()))
            .collect::<coders::Result<Vec<_>>>()?,
        None => vec![plan.base.onset_regime],
    };
    if let Some(raw) = settings.raw("dims") {
        plan.dims =
            raw.split(',').map(|d| Dims::parse(d.trim())).collect::<coders::Result<Vec<_>>>()?;
    }
    if let Some(alphas) = settings.get_list("alphas")? {
        plan.alphas = alphas;
    }
    plan.replicates = settings.get_or("replicates", plan.replicates)?;
    plan.l_max = settings.get("l_max")?;
    plan.noise_sd = settings.get_or("noise_sd", plan.noise_sd)?;
    plan.validate()?;

    // Echo the effective grid so the manifest records defaulted values.
    settings.set("prevalences", emit::list(&plan.prevalences));
    settings.set("regimes", emit::list(plan.regimes.iter().map(|r| r.as_str())));
    settings.set("dims", emit::list(plan.dims.iter().map(|d| d.as_str())));
    settings.set("alphas", emit::list(&plan.alphas));
    settings.set("replicates", plan.replicates);

    log::info!(
        "study: {} replicates over {} prevalences x {} regimes x {} variants x {} levels",
        plan.replicates,
        plan.prevalences.len(),
        plan.regimes.len(),
        plan.dims.len(),
        plan.alphas.len()
    );
    let running = Instant::now();
    let report = run_study(&plan)?;
    let study_s = running.elapsed().as_secs_f64();

    let writing = Instant::now();
    let report_path = cli.out_dir.join("report.csv");
    emit::write_csv(
        &report_path,
        &["metric", "variant", "alpha", "regime", "prevalence", "type", "value"],
        report.cells.iter().flat_map(cell_rows),
    )?;

    let mut manifest = RunManifest::new("study", &settings, Some(plan.seed));
    manifest.output("report", &report_path);
    manifest.time("study", study_s);
    manifest.time("write", writing.elapsed().as_secs_f64());
    manifest.time("total", start.elapsed().as_secs_f64());
    manifest.write(&cli.out_dir.join("manifest.json"))?;
    Ok(())
}

/// Long-format rows for one grid cell: pooled counts and rates first,
/// then the per-type breakdown. Undefined rates leave the value empty.
fn cell_rows(cell: &StudyCell) -> Vec<Vec<String>> {
    let row = |metric: &str, ty: &str, value: String| {
        vec![
            metric.to_string(),
            cell.dims.as_str().to_string(),
            cell.alpha.to_string(),
            cell.regime.as_str().to_string(),
            cell.gamma.to_string(),
            ty.to_string(),
            value,
        ]
    };
    let e = &cell.evaluation;
    let mut rows = vec![
        row("attentive_total", "", e.attentive_total.to_string()),
        row("attentive_flagged", "", e.attentive_flagged.to_string()),
        row("careless_total", "", e.careless_total.to_string()),
        row("careless_flagged", "", e.careless_flagged.to_string()),
        row("fpr", "", emit::cell(e.false_positive_rate())),
        row("fnr", "", emit::cell(e.false_negative_rate())),
        row("mae", "", emit::cell(e.onset_mae())),
    ];
    for (ty, outcome) in &e.by_type {
        rows.push(row("total", ty.as_str(), outcome.total.to_string()));
        rows.push(row("flagged", ty.as_str(), outcome.flagged.to_string()));
        rows.push(row("fnr", ty.as_str(), emit::cell(outcome.false_negative_rate())));
        rows.push(row("mae", ty.as_str(), emit::cell(outcome.onset_mae())));
    }
    rows
}
