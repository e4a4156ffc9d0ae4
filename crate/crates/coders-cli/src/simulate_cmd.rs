//! `simulate`: synthetic surveys with known ground truth.

use std::time::Instant;

use coders::data::{write_design, write_responses};
use coders::simulate::{
    simulate, write_ground_truth, BlockStructure, CarelessType, ItemOrder, KeyingLayout,
    Marginals, OnsetRegime, SimulationSpec, Structure,
};
use coders::Error;

use crate::config::{self, Settings};
use crate::emit;
use crate::manifest::RunManifest;
use crate::{Cli, Failure, SimulateArgs};

/// Keys describing the survey itself; `study` accepts these too.
pub const SPEC_KEYS: &[&str] = &[
    "between_trait",
    "categories",
    "facets_per_trait",
    "gamma",
    "item_order",
    "items_per_facet",
    "keying",
    "marginals",
    "n",
    "negative_fraction",
    "onset_regime",
    "seed",
    "temporary",
    "traits",
    "types",
    "within_facet",
    "within_trait",
];

/// Builds the survey description from the resolved settings. The master
/// seed is deliberately required: no run may be silently unrepeatable.
pub fn build_spec(settings: &Settings) -> coders::Result<SimulationSpec> {
    let seed: u64 = settings.require("seed")?;
    let mut spec = SimulationSpec::new(seed);
    spec.n = settings.get_or("n", spec.n)?;
    spec.categories = settings.get_or("categories", spec.categories)?;
    spec.gamma = settings.get_or("gamma", spec.gamma)?;
    spec.temporary = settings.get_or("temporary", spec.temporary)?;
    spec.negative_fraction = settings.get_or("negative_fraction", spec.negative_fraction)?;
    if let Some(raw) = settings.raw("onset_regime") {
        spec.onset_regime = OnsetRegime::parse(raw)?;
    }
    if let Some(raw) = settings.raw("item_order") {
        spec.item_order = match raw {
            "scattered" => ItemOrder::Scattered,
            "grouped" => ItemOrder::GroupedByConstruct,
            other => return Err(Error::Config(format!("unknown item order {other:?}"))),
        };
    }
    if let Some(raw) = settings.raw("keying") {
        spec.keying_layout = match raw {
            "alternating" => KeyingLayout::Alternating,
            "random" => KeyingLayout::Random,
            other => return Err(Error::Config(format!("unknown keying layout {other:?}"))),
        };
    }
    if let Some(raw) = settings.raw("marginals") {
        spec.marginals = parse_marginals(raw)?;
    }
    if let Some(raw) = settings.raw("types") {
        spec.types = raw
            .split(',')
            .map(|t| CarelessType::parse(t.trim()))
            .collect::<coders::Result<Vec<_>>>()?;
    }
    let mut blocks = BlockStructure::default();
    blocks.traits = settings.get_or("traits", blocks.traits)?;
    blocks.facets_per_trait = settings.get_or("facets_per_trait", blocks.facets_per_trait)?;
    blocks.items_per_facet = settings.get_or("items_per_facet", blocks.items_per_facet)?;
    blocks.within_facet = settings.get_or("within_facet", blocks.within_facet)?;
    blocks.within_trait = settings.get_or("within_trait", blocks.within_trait)?;
    blocks.between_trait = settings.get_or("between_trait", blocks.between_trait)?;
    spec.structure = Structure::Blocks(blocks);
    Ok(spec)
}

fn parse_marginals(raw: &str) -> coders::Result<Marginals> {
    match raw {
        "bank" => Ok(Marginals::default_bank()),
        "uniform" => Ok(Marginals::Uniform),
        _ => match raw.strip_prefix("global:") {
            Some(list) => list
                .split(',')
                .map(|x| {
                    let x = x.trim();
                    x.parse::<f64>().map_err(|e| {
                        Error::Config(format!("key marginals: cannot parse {x:?}: {e}"))
                    })
                })
                .collect::<coders::Result<Vec<f64>>>()
                .map(Marginals::Global),
            None => Err(Error::Config(format!(
                "unknown marginals {raw:?} (expected bank, uniform, or global:p1,...,pL)"
            ))),
        },
    }
}

pub fn run(cli: &Cli, args: &SimulateArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let mut settings = Settings::load(cli.config.as_deref())?;
    settings.set_if("seed", args.seed);
    settings.set_if("jobs", cli.jobs);
    settings.set("out_dir", cli.out_dir.display());
    let mut known = SPEC_KEYS.to_vec();
    known.extend_from_slice(&["delimiter", "header", "jobs", "out_dir"]);
    settings.check_keys(&known)?;
    emit::prepare_dir(&cli.out_dir)?;

    let spec = build_spec(&settings)?;
    log::info!(
        "simulating {} respondents (gamma={}, regime={}, seed={})",
        spec.n,
        spec.gamma,
        spec.onset_regime.as_str(),
        spec.seed
    );
    let simulating = Instant::now();
    let survey = simulate(&spec)?;
    let simulate_s = simulating.elapsed().as_secs_f64();

    let writing = Instant::now();
    let mut manifest = RunManifest::new("simulate", &settings, Some(spec.seed));
    let schema = config::csv_schema(&settings)?;
    let responses_path = cli.out_dir.join("responses.csv");
    write_responses(&responses_path, &survey.responses, &schema)?;
    manifest.output("responses", &responses_path);
    let truth_path = cli.out_dir.join("truth.csv");
    write_ground_truth(&truth_path, &survey.truth)?;
    manifest.output("truth", &truth_path);
    let design_path = cli.out_dir.join("design.csv");
    write_design(&design_path, &survey.design)?;
    manifest.output("design", &design_path);

    let careless = survey.truth.rows.iter().filter(|r| r.is_careless()).count();
    log::info!("wrote {} respondents, {careless} careless", spec.n);
    manifest.time("simulate", simulate_s);
    manifest.time("write", writing.elapsed().as_secs_f64());
    manifest.time("total", start.elapsed().as_secs_f64());
    manifest.write(&cli.out_dir.join("manifest.json"))?;
    Ok(())
}
