//! `screen`: classical per-respondent screeners.

use std::time::Instant;

use coders::data::{load_design, load_responses, validate_design};
use coders::screeners::{
    antonym_flags, longstring_flags, longstring_index, personal_reliability,
    psychometric_antonym, reliability_flags, ScreenerCutoffs,
};

use crate::config::{self, Settings};
use crate::emit;
use crate::manifest::RunManifest;
use crate::{Cli, Failure, ScreenArgs};

const KEYS: &[&str] = &[
    "antonym_cutoff",
    "antonym_pair_threshold",
    "categories",
    "delimiter",
    "header",
    "jobs",
    "longstring_cutoff",
    "out_dir",
    "reliability_cutoff",
];

pub fn run(cli: &Cli, args: &ScreenArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let mut settings = Settings::load(cli.config.as_deref())?;
    settings.set_if("jobs", cli.jobs);
    settings.set("out_dir", cli.out_dir.display());
    settings.check_keys(KEYS)?;
    emit::prepare_dir(&cli.out_dir)?;

    // No selection flags means: run whatever the inputs support. An
    // explicitly requested screener that cannot run is an error instead.
    let explicit = args.longstring || args.reliability || args.antonym;
    let want_longstring = args.longstring || !explicit;
    let want_reliability = args.reliability || !explicit;
    let want_antonym = args.antonym || !explicit;
    if args.reliability && args.design.is_none() {
        return Err(Failure::config(
            "--design is required for the personal-reliability screener",
        ));
    }

    let defaults = ScreenerCutoffs::default();
    let cutoffs = ScreenerCutoffs {
        longstring: settings.get_or("longstring_cutoff", defaults.longstring)?,
        reliability: settings.get_or("reliability_cutoff", defaults.reliability)?,
        antonym: settings.get_or("antonym_cutoff", defaults.antonym)?,
        antonym_pair_threshold: settings
            .get_or("antonym_pair_threshold", defaults.antonym_pair_threshold)?,
    };
    settings.set("longstring_cutoff", cutoffs.longstring);
    settings.set("reliability_cutoff", cutoffs.reliability);
    settings.set("antonym_cutoff", cutoffs.antonym);
    settings.set("antonym_pair_threshold", cutoffs.antonym_pair_threshold);

    let m = load_responses(&args.input, &config::csv_schema(&settings)?, config::categories(&settings)?)?;
    let design = args.design.as_deref().map(load_design).transpose()?;
    if let Some(d) = &design {
        for warning in validate_design(&m, d)?.warnings {
            log::warn!("{warning}");
        }
    }

    let longstring = want_longstring.then(|| {
        let scores = longstring_index(&m);
        let flags = longstring_flags(&scores, cutoffs.longstring);
        (scores, flags)
    });

    let reliability = match (&design, want_reliability) {
        (Some(d), true) => {
            let scores = personal_reliability(&m, d)?;
            let flags = reliability_flags(&scores, cutoffs.reliability);
            Some((scores, flags))
        }
        (None, true) => {
            log::info!("skipping personal reliability: no --design given");
            None
        }
        _ => None,
    };

    let antonym = if want_antonym {
        let result = psychometric_antonym(&m, cutoffs.antonym_pair_threshold)?;
        match result.scores {
            Some(scores) => {
                let flags = antonym_flags(&scores, cutoffs.antonym);
                Some((scores, flags))
            }
            None => {
                let message = format!(
                    "psychometric antonyms unavailable: fewer than two item pairs correlate at or below {}",
                    cutoffs.antonym_pair_threshold
                );
                if args.antonym {
                    return Err(Failure::data(message));
                }
                log::info!("{message}");
                None
            }
        }
    } else {
        None
    };

    let scores_path = cli.out_dir.join("scores.csv");
    let header = [
        "respondent",
        "longstring",
        "longstring_flag",
        "reliability",
        "reliability_flag",
        "antonym",
        "antonym_flag",
    ];
    emit::write_csv(
        &scores_path,
        &header,
        (0..m.n()).map(|i| {
            let mut row = vec![(i + 1).to_string()];
            match &longstring {
                Some((scores, flags)) => {
                    row.push(scores[i].to_string());
                    row.push(flags[i].to_string());
                }
                None => row.extend([String::new(), String::new()]),
            }
            for columns in [&reliability, &antonym] {
                match columns {
                    Some((scores, flags)) => {
                        row.push(emit::cell(scores[i]));
                        row.push(flags[i].to_string());
                    }
                    None => row.extend([String::new(), String::new()]),
                }
            }
            row
        }),
    )?;

    let mut manifest = RunManifest::new("screen", &settings, None);
    manifest.input("responses", &args.input);
    if let Some(path) = &args.design {
        manifest.input("design", path);
    }
    manifest.output("scores", &scores_path);
    manifest.time("total", start.elapsed().as_secs_f64());
    manifest.write(&cli.out_dir.join("manifest.json"))?;
    Ok(())
}
