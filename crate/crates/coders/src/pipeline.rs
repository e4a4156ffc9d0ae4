//! End-to-end detector and the simulation study harness around it.
//!
//! One detection run assembles a short multivariate series per respondent
//! (reconstruction error per item, longest-string-of-pattern score per
//! item, or both), adds seeded jitter to the discrete coordinate, and
//! hands each series to the self-normalized changepoint test. A study
//! repeats that over simulated surveys and pools the error rates.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::autoencoder::{self, AutoencoderConfig, NetworkParameters, TrainedAutoencoder};
use crate::changepoint::{
    critical_value, detect_changepoint, inject_jitter, ChangepointResult, RightVarianceWeight,
    Series, SingularPolicy, SnTestConfig,
};
use crate::data::ResponseMatrix;
use crate::error::{Error, Result};
use crate::lsp::lsp_matrix;
use crate::seed;
use crate::simulate::{self, CarelessType, GroundTruth, OnsetRegime, SimulationSpec};

/// Which per-item signals feed the changepoint test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dims {
    /// Reconstruction error and pattern score, d = 2. Default.
    Both,
    /// Reconstruction error only, d = 1.
    ReOnly,
    /// Pattern score only, d = 1. Needs no trained network.
    LspOnly,
}

impl Dims {
    pub fn d(self) -> usize {
        match self {
            Dims::Both => 2,
            Dims::ReOnly | Dims::LspOnly => 1,
        }
    }

    pub fn uses_re(self) -> bool {
        matches!(self, Dims::Both | Dims::ReOnly)
    }

    pub fn uses_lsp(self) -> bool {
        matches!(self, Dims::Both | Dims::LspOnly)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dims::Both => "both",
            Dims::ReOnly => "re",
            Dims::LspOnly => "lsp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(Dims::Both),
            "re" => Ok(Dims::ReOnly),
            "lsp" => Ok(Dims::LspOnly),
            other => Err(Error::Config(format!("unknown dims {other:?} (both, re, lsp)"))),
        }
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Settings for one detection run.
#[derive(Debug, Clone)]
pub struct CodersConfig {
    pub dims: Dims,
    /// Significance level; must be tabulated for the chosen dimension.
    pub alpha: f64,
    /// Pattern lengths to scan; `None` derives the bound from the answer
    /// categories.
    pub l_max: Option<usize>,
    /// Jitter applied to the pattern-score coordinate.
    pub noise_sd: f64,
    pub autoencoder: AutoencoderConfig,
    pub singular_policy: SingularPolicy,
    pub right_weight: RightVarianceWeight,
    /// Master seed; jitter streams are derived per respondent.
    pub seed: u64,
}

impl CodersConfig {
    pub fn new(bottleneck: usize, seed: u64) -> Self {
        CodersConfig {
            dims: Dims::Both,
            alpha: 0.001,
            l_max: None,
            noise_sd: 0.01,
            autoencoder: AutoencoderConfig::new(bottleneck, seed::derive(seed, "autoencoder", 0)),
            singular_policy: SingularPolicy::Exclude,
            right_weight: RightVarianceWeight::Symmetric,
            seed,
        }
    }
}

/// Output of one detection run over a whole sample.
#[derive(Debug, Clone)]
pub struct Detection {
    /// One test result per respondent, in input order.
    pub results: Vec<ChangepointResult>,
    /// The per-respondent series the test saw (jitter included).
    pub series: Vec<Series>,
    pub dims: Dims,
    pub critical: f64,
    /// Present when reconstruction errors were used. Freshly trained here
    /// unless pretrained parameters were supplied, in which case the loss
    /// history is empty.
    pub autoencoder: Option<TrainedAutoencoder>,
}

/// Runs the detector, training the network if the variant needs one.
pub fn run_coders(m: &ResponseMatrix, cfg: &CodersConfig) -> Result<Detection> {
    run_coders_with(m, cfg, None)
}

/// Same, but reuses already trained network parameters when given.
pub fn run_coders_with(
    m: &ResponseMatrix,
    cfg: &CodersConfig,
    pretrained: Option<&NetworkParameters>,
) -> Result<Detection> {
    let critical = critical_value(cfg.alpha, cfg.dims.d())?;
    if m.p() < 4 {
        return Err(Error::Dimension(format!(
            "{} items are too few for changepoint detection",
            m.p()
        )));
    }
    let trained = if cfg.dims.uses_re() {
        Some(match pretrained {
            Some(params) => {
                TrainedAutoencoder { params: params.clone(), loss_history: Vec::new() }
            }
            None => autoencoder::train(m, &cfg.autoencoder)?,
        })
    } else {
        None
    };
    let re = trained
        .as_ref()
        .map(|t| autoencoder::reconstruction_errors(m, &t.params))
        .transpose()?;
    let lsp = if cfg.dims.uses_lsp() { Some(lsp_matrix(m, cfg.l_max)?) } else { None };

    let series: Vec<Series> = (0..m.n())
        .map(|i| {
            let lsp_row = lsp
                .as_ref()
                .map(|scores| {
                    let raw: Vec<f64> = scores[i].iter().map(|&v| f64::from(v)).collect();
                    inject_jitter(&raw, cfg.noise_sd, seed::derive(cfg.seed, "jitter", i as u64))
                })
                .transpose()?;
            match cfg.dims {
                Dims::Both => {
                    let re_row = re.as_ref().expect("trained").row(i);
                    Series::bivariate(re_row.as_slice().expect("contiguous"), &lsp_row.unwrap())
                }
                Dims::ReOnly => {
                    Series::univariate(re.as_ref().expect("trained").row(i).to_vec())
                }
                Dims::LspOnly => Series::univariate(lsp_row.unwrap()),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let test_cfg = SnTestConfig {
        alpha: cfg.alpha,
        noise_sd: cfg.noise_sd,
        seed: cfg.seed,
        singular_policy: cfg.singular_policy,
        right_weight: cfg.right_weight,
    };
    let results = series
        .par_iter()
        .map(|y| detect_changepoint(y, &test_cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(Detection { results, series, dims: cfg.dims, critical, autoencoder: trained })
}

/// Detection outcomes for the respondents of one careless type.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TypeOutcome {
    pub total: usize,
    pub flagged: usize,
    /// Sum of |estimated onset - true onset| over flagged respondents.
    pub onset_error_sum: f64,
}

impl TypeOutcome {
    pub fn false_negative_rate(&self) -> Option<f64> {
        (self.total > 0).then(|| (self.total - self.flagged) as f64 / self.total as f64)
    }

    pub fn onset_mae(&self) -> Option<f64> {
        (self.flagged > 0).then(|| self.onset_error_sum / self.flagged as f64)
    }
}

/// Detection quality against ground truth, poolable across replicates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Evaluation {
    pub attentive_total: usize,
    pub attentive_flagged: usize,
    pub careless_total: usize,
    pub careless_flagged: usize,
    pub onset_error_sum: f64,
    pub by_type: BTreeMap<CarelessType, TypeOutcome>,
}

impl Evaluation {
    /// Share of attentive respondents flagged.
    pub fn false_positive_rate(&self) -> Option<f64> {
        (self.attentive_total > 0)
            .then(|| self.attentive_flagged as f64 / self.attentive_total as f64)
    }

    /// Share of careless respondents missed, over all types.
    pub fn false_negative_rate(&self) -> Option<f64> {
        (self.careless_total > 0)
            .then(|| (self.careless_total - self.careless_flagged) as f64 / self.careless_total as f64)
    }

    /// Mean |estimated - true| onset over flagged careless respondents.
    pub fn onset_mae(&self) -> Option<f64> {
        (self.careless_flagged > 0).then(|| self.onset_error_sum / self.careless_flagged as f64)
    }

    pub fn merge(&mut self, other: &Evaluation) {
        self.attentive_total += other.attentive_total;
        self.attentive_flagged += other.attentive_flagged;
        self.careless_total += other.careless_total;
        self.careless_flagged += other.careless_flagged;
        self.onset_error_sum += other.onset_error_sum;
        for (t, o) in &other.by_type {
            let e = self.by_type.entry(*t).or_default();
            e.total += o.total;
            e.flagged += o.flagged;
            e.onset_error_sum += o.onset_error_sum;
        }
    }
}

/// Scores stored test results against the truth at a given critical
/// value, re-deriving the flag from each respondent's statistic. The
/// trace does not depend on the level, so one detection run can be
/// evaluated at several levels.
pub fn evaluate_at(
    results: &[ChangepointResult],
    truth: &GroundTruth,
    critical: f64,
) -> Result<Evaluation> {
    if results.len() != truth.rows.len() {
        return Err(Error::Dimension(format!(
            "{} test results against {} truth rows",
            results.len(),
            truth.rows.len()
        )));
    }
    let mut eval = Evaluation::default();
    for (r, t) in results.iter().zip(&truth.rows) {
        let flagged = r.sn.is_some_and(|s| s > critical);
        match t.careless_type {
            None => {
                eval.attentive_total += 1;
                if flagged {
                    eval.attentive_flagged += 1;
                }
            }
            Some(ctype) => {
                let entry = eval.by_type.entry(ctype).or_default();
                entry.total += 1;
                eval.careless_total += 1;
                if flagged {
                    let est = r.argmax.expect("flagged implies a maximizer");
                    let true_onset = t.onset.expect("careless rows carry an onset");
                    let err = est.abs_diff(true_onset) as f64;
                    entry.flagged += 1;
                    entry.onset_error_sum += err;
                    eval.careless_flagged += 1;
                    eval.onset_error_sum += err;
                }
            }
        }
    }
    Ok(eval)
}

/// Scores results at the level they were produced with.
pub fn evaluate(results: &[ChangepointResult], truth: &GroundTruth) -> Result<Evaluation> {
    let critical = results
        .first()
        .map(|r| r.critical)
        .ok_or_else(|| Error::EmptyInput("no test results to evaluate".into()))?;
    evaluate_at(results, truth, critical)
}

/// Grid of simulation-study conditions.
#[derive(Debug, Clone)]
pub struct StudyPlan {
    /// Template survey; gamma, onset regime and seed are overridden per
    /// condition and replicate.
    pub base: SimulationSpec,
    pub prevalences: Vec<f64>,
    pub regimes: Vec<OnsetRegime>,
    pub dims: Vec<Dims>,
    pub alphas: Vec<f64>,
    pub replicates: usize,
    pub l_max: Option<usize>,
    pub noise_sd: f64,
    pub seed: u64,
}

impl StudyPlan {
    pub fn new(base: SimulationSpec, seed: u64) -> Self {
        StudyPlan {
            base,
            prevalences: vec![0.2],
            regimes: vec![OnsetRegime::Baseline],
            dims: vec![Dims::Both],
            alphas: vec![0.001],
            replicates: 10,
            l_max: None,
            noise_sd: 0.01,
            seed,
        }
    }

    /// The exact simulation spec one study condition uses for one
    /// replicate, derived from the master seed. Exposed so callers can
    /// regenerate a study's surveys for post-hoc inspection.
    pub fn replicate_spec(
        &self,
        replicate: usize,
        prevalence_index: usize,
        regime_index: usize,
    ) -> Result<SimulationSpec> {
        let gamma = *self
            .prevalences
            .get(prevalence_index)
            .ok_or_else(|| Error::Config(format!("no prevalence {prevalence_index}")))?;
        let regime = *self
            .regimes
            .get(regime_index)
            .ok_or_else(|| Error::Config(format!("no regime {regime_index}")))?;
        let rep_seed = seed::derive(self.seed, "replicate", replicate as u64);
        let cell_seed = seed::derive(
            rep_seed,
            "condition",
            (prevalence_index * self.regimes.len() + regime_index) as u64,
        );
        Ok(SimulationSpec { gamma, onset_regime: regime, seed: cell_seed, ..self.base.clone() })
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("a study needs at least 1 replicate".into()));
        }
        if self.prevalences.is_empty()
            || self.regimes.is_empty()
            || self.dims.is_empty()
            || self.alphas.is_empty()
        {
            return Err(Error::Config("empty study grid".into()));
        }
        if let Some(&g) = self.prevalences.iter().find(|g| !(0.0..=1.0).contains(*g)) {
            return Err(Error::Config(format!("prevalence {g} outside [0, 1]")));
        }
        for &dims in &self.dims {
            for &alpha in &self.alphas {
                critical_value(alpha, dims.d())?;
            }
        }
        Ok(())
    }
}

/// Pooled outcome of one study condition.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyCell {
    pub gamma: f64,
    pub regime: OnsetRegime,
    pub dims: Dims,
    pub alpha: f64,
    pub replicates: usize,
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub cells: Vec<StudyCell>,
}

impl StudyReport {
    pub fn cell(&self, gamma: f64, regime: OnsetRegime, dims: Dims, alpha: f64) -> Option<&StudyCell> {
        self.cells.iter().find(|c| {
            c.gamma == gamma && c.regime == regime && c.dims == dims && c.alpha == alpha
        })
    }
}

/// Runs the full grid. Within one simulated survey the network is trained
/// once and shared by every variant that needs it, and the test trace is
/// computed once per variant and thresholded per level.
///
/// Any failure inside one simulated survey aborts the study and reports
/// the survey seed, so the offending replicate can be regenerated alone.
pub fn run_study(plan: &StudyPlan) -> Result<StudyReport> {
    plan.validate()?;
    let needs_re = plan.dims.iter().any(|d| d.uses_re());
    let mut pooled: Vec<Evaluation> = vec![
        Evaluation::default();
        plan.prevalences.len() * plan.regimes.len() * plan.dims.len() * plan.alphas.len()
    ];
    for r in 0..plan.replicates {
        for gi in 0..plan.prevalences.len() {
            for ri in 0..plan.regimes.len() {
                let spec = plan.replicate_spec(r, gi, ri)?;
                let seed = spec.seed;
                run_study_cell(plan, &spec, gi, ri, needs_re, &mut pooled).map_err(|e| {
                    Error::Study { replicate: r, seed, message: e.to_string() }
                })?;
            }
        }
        log::info!("study replicate {}/{} done", r + 1, plan.replicates);
    }
    let mut cells = Vec::with_capacity(pooled.len());
    let mut it = pooled.into_iter();
    for &gamma in &plan.prevalences {
        for &regime in &plan.regimes {
            for &dims in &plan.dims {
                for &alpha in &plan.alphas {
                    cells.push(StudyCell {
                        gamma,
                        regime,
                        dims,
                        alpha,
                        replicates: plan.replicates,
                        evaluation: it.next().expect("grid size matches"),
                    });
                }
            }
        }
    }
    Ok(StudyReport { cells })
}

/// One simulated survey: train once, detect per variant, pool per level.
fn run_study_cell(
    plan: &StudyPlan,
    spec: &SimulationSpec,
    gi: usize,
    ri: usize,
    needs_re: bool,
    pooled: &mut [Evaluation],
) -> Result<()> {
    let survey = simulate::simulate(spec)?;
    let mut base_cfg = CodersConfig::new(survey.design.s(), seed::derive(spec.seed, "detect", 0));
    base_cfg.l_max = plan.l_max;
    base_cfg.noise_sd = plan.noise_sd;
    base_cfg.alpha = plan.alphas[0];
    let trained = if needs_re {
        Some(autoencoder::train(&survey.responses, &base_cfg.autoencoder)?)
    } else {
        None
    };
    for (di, &dims) in plan.dims.iter().enumerate() {
        let cfg = CodersConfig { dims, ..base_cfg.clone() };
        let detection =
            run_coders_with(&survey.responses, &cfg, trained.as_ref().map(|t| &t.params))?;
        for (ai, &alpha) in plan.alphas.iter().enumerate() {
            let critical = critical_value(alpha, dims.d())?;
            let eval = evaluate_at(&detection.results, &survey.truth, critical)?;
            let idx =
                ((gi * plan.regimes.len() + ri) * plan.dims.len() + di) * plan.alphas.len() + ai;
            pooled[idx].merge(&eval);
        }
    }
    Ok(())
}
