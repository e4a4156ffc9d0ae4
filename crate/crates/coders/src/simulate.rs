//! Synthetic rating-scale surveys with a controllable careless mix.
//!
//! Attentive responses are drawn from a Gaussian copula: a latent normal
//! vector with a trait/facet/item block-correlation structure is
//! thresholded per item into ordinal codes with configurable marginal
//! distributions. Negatively keyed items flip the latent sign and mirror
//! the marginal, which reproduces the negative inter-item correlations
//! real mixed-keyed scales show.
//!
//! Careless responding is then injected per respondent from a chosen
//! onset item onward, overwriting the attentive draw with one of several
//! response styles. The pre-onset stretch is left untouched, so the true
//! onset is exactly where the generating process changes.

use rand::seq::SliceRandom;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{Keying, ResponseMatrix, SurveyDesign};
use crate::error::{Error, Result};
use crate::seed;

/// Three-level latent correlation layout. Constructs are the facets.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockStructure {
    pub traits: usize,
    pub facets_per_trait: usize,
    pub items_per_facet: usize,
    pub within_facet: f64,
    pub within_trait: f64,
    pub between_trait: f64,
}

impl BlockStructure {
    pub fn p(&self) -> usize {
        self.traits * self.facets_per_trait * self.items_per_facet
    }

    pub fn s(&self) -> usize {
        self.traits * self.facets_per_trait
    }
}

impl Default for BlockStructure {
    /// 5 traits x 6 facets x 10 items, moderately correlated.
    fn default() -> Self {
        BlockStructure {
            traits: 5,
            facets_per_trait: 6,
            items_per_facet: 10,
            within_facet: 0.5,
            within_trait: 0.25,
            between_trait: 0.05,
        }
    }
}

/// Latent correlation source.
#[derive(Debug, Clone, PartialEq)]
pub enum Structure {
    Blocks(BlockStructure),
    /// Full latent correlation matrix (row-major, in presentation order)
    /// plus the construct of each item. Item order settings are ignored.
    Explicit { matrix: Vec<f64>, construct_of_item: Vec<usize> },
}

/// Marginal answer distributions.
#[derive(Debug, Clone, PartialEq)]
pub enum Marginals {
    Uniform,
    /// One distribution shared by all items (length L, sums to 1).
    Global(Vec<f64>),
    /// One distribution per item, applied literally (no keying mirror).
    PerItem(Vec<Vec<f64>>),
    /// Every item draws one profile from the bank (seeded). Default.
    Bank(Vec<Vec<f64>>),
}

impl Marginals {
    /// Skewed five-category profiles of varying strength. Together with
    /// mirrored negative keying they keep accidental runs of identical
    /// answers short in attentive data: a run of code c across alternating
    /// keying needs both pi_c and pi_(L+1-c) to be large, and a run of the
    /// self-mirrored middle category needs pi_3 alone to be large, so every
    /// profile keeps pi_3 and the products pi_1*pi_5, pi_2*pi_4 small.
    pub fn default_bank() -> Marginals {
        Marginals::Bank(vec![
            vec![0.42, 0.34, 0.13, 0.07, 0.04],
            vec![0.34, 0.40, 0.14, 0.08, 0.04],
            vec![0.52, 0.30, 0.10, 0.05, 0.03],
        ])
    }
}

/// Where negatively keyed items sit in the presentation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyingLayout {
    /// Strict alternation. Mirrors the survey-construction practice of
    /// breaking response sets, and keeps identical-answer runs in
    /// attentive data short. The negative fraction is fixed at one half.
    Alternating,
    /// `negative_fraction` of the items, positioned at random.
    Random,
}

/// Presentation order of the items.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ItemOrder {
    /// Full random permutation; same-construct items end up scattered.
    Scattered,
    /// Constructs shuffled as blocks, items shuffled within construct.
    GroupedByConstruct,
}

/// Careless response styles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CarelessType {
    /// Uniform over all categories.
    Random,
    /// Uniform over the two extreme categories.
    Extreme,
    /// One random category, repeated.
    Straightline,
    /// A random non-constant pattern of length 2..=5, repeated.
    Pattern,
    /// Uniform over the three middle categories.
    Middling,
}

impl CarelessType {
    pub fn as_str(self) -> &'static str {
        match self {
            CarelessType::Random => "random",
            CarelessType::Extreme => "extreme",
            CarelessType::Straightline => "straightline",
            CarelessType::Pattern => "pattern",
            CarelessType::Middling => "middling",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(CarelessType::Random),
            "extreme" => Ok(CarelessType::Extreme),
            "straightline" => Ok(CarelessType::Straightline),
            "pattern" => Ok(CarelessType::Pattern),
            "middling" => Ok(CarelessType::Middling),
            other => Err(Error::Config(format!("unknown careless type {other:?}"))),
        }
    }
}

impl std::fmt::Display for CarelessType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Range the careless onset is drawn from, as a fraction of the survey.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnsetRegime {
    /// Tenth to ninth tenth of the items.
    Baseline,
    /// First half of the baseline range.
    Early,
    /// Second half of the baseline range.
    Late,
}

impl OnsetRegime {
    pub fn as_str(self) -> &'static str {
        match self {
            OnsetRegime::Baseline => "baseline",
            OnsetRegime::Early => "early",
            OnsetRegime::Late => "late",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(OnsetRegime::Baseline),
            "early" => Ok(OnsetRegime::Early),
            "late" => Ok(OnsetRegime::Late),
            other => Err(Error::Config(format!("unknown onset regime {other:?}"))),
        }
    }

    /// Inclusive 1-based onset bounds for a p-item survey.
    pub fn bounds(self, p: usize) -> Result<(usize, usize)> {
        let lo = ((p + 9) / 10).max(2);
        let hi = (9 * p) / 10;
        let mid = p / 2;
        let (a, b) = match self {
            OnsetRegime::Baseline => (lo, hi),
            OnsetRegime::Early => (lo, mid),
            OnsetRegime::Late => (mid, hi),
        };
        if a > b || b > p {
            return Err(Error::Simulation(format!(
                "survey of {p} items too short for the {} onset regime",
                self.as_str()
            )));
        }
        Ok((a, b))
    }
}

impl std::fmt::Display for OnsetRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Full recipe for one synthetic survey.
#[derive(Debug, Clone)]
pub struct SimulationSpec {
    pub n: usize,
    /// Answer categories per item (shared).
    pub categories: u8,
    pub structure: Structure,
    pub marginals: Marginals,
    pub keying_layout: KeyingLayout,
    /// Share of negatively keyed items under [`KeyingLayout::Random`].
    pub negative_fraction: f64,
    pub item_order: ItemOrder,
    /// Share of careless respondents, split evenly over `types`.
    pub gamma: f64,
    pub types: Vec<CarelessType>,
    pub onset_regime: OnsetRegime,
    /// Two changepoints: carelessness starts early and stops again, with
    /// the return to attentiveness in the late onset range.
    pub temporary: bool,
    pub seed: u64,
}

impl SimulationSpec {
    pub fn new(seed: u64) -> Self {
        SimulationSpec {
            n: 500,
            categories: 5,
            structure: Structure::Blocks(BlockStructure::default()),
            marginals: Marginals::default_bank(),
            keying_layout: KeyingLayout::Alternating,
            negative_fraction: 0.5,
            item_order: ItemOrder::Scattered,
            gamma: 0.0,
            types: vec![
                CarelessType::Random,
                CarelessType::Extreme,
                CarelessType::Straightline,
                CarelessType::Pattern,
            ],
            onset_regime: OnsetRegime::Baseline,
            temporary: false,
            seed,
        }
    }

    fn p(&self) -> usize {
        match &self.structure {
            Structure::Blocks(b) => b.p(),
            Structure::Explicit { construct_of_item, .. } => construct_of_item.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Simulation("n must be at least 1".into()));
        }
        if self.categories < 2 {
            return Err(Error::Simulation("need at least 2 answer categories".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Simulation(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.negative_fraction) {
            return Err(Error::Simulation(format!(
                "negative_fraction {} outside [0, 1]",
                self.negative_fraction
            )));
        }
        if self.gamma > 0.0 && self.types.is_empty() {
            return Err(Error::Simulation("gamma > 0 but no careless types given".into()));
        }
        if self.p() < 2 {
            return Err(Error::Simulation("need at least 2 items".into()));
        }
        match &self.structure {
            Structure::Blocks(b) => {
                if b.traits == 0 || b.facets_per_trait == 0 || b.items_per_facet == 0 {
                    return Err(Error::Simulation("empty block structure".into()));
                }
                for (name, v) in [
                    ("within_facet", b.within_facet),
                    ("within_trait", b.within_trait),
                    ("between_trait", b.between_trait),
                ] {
                    if !(-1.0..1.0).contains(&v) {
                        return Err(Error::Simulation(format!("{name} {v} outside (-1, 1)")));
                    }
                }
            }
            Structure::Explicit { matrix, construct_of_item } => {
                let p = construct_of_item.len();
                if matrix.len() != p * p {
                    return Err(Error::Simulation(format!(
                        "correlation matrix has {} entries, expected {}",
                        matrix.len(),
                        p * p
                    )));
                }
            }
        }
        match &self.marginals {
            Marginals::Uniform => {}
            Marginals::Global(profile) => validate_profile(profile, self.categories)?,
            Marginals::Bank(bank) => {
                if bank.is_empty() {
                    return Err(Error::Simulation("marginal bank is empty".into()));
                }
                for profile in bank {
                    validate_profile(profile, self.categories)?;
                }
            }
            Marginals::PerItem(profiles) => {
                if profiles.len() != self.p() {
                    return Err(Error::Simulation(format!(
                        "{} marginal profiles for {} items",
                        profiles.len(),
                        self.p()
                    )));
                }
                for profile in profiles {
                    validate_profile(profile, self.categories)?;
                }
            }
        }
        Ok(())
    }
}

fn validate_profile(profile: &[f64], categories: u8) -> Result<()> {
    if profile.len() != categories as usize {
        return Err(Error::Simulation(format!(
            "marginal profile has {} entries for {categories} categories",
            profile.len()
        )));
    }
    if profile.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::Simulation("marginal profile has negative entries".into()));
    }
    let sum: f64 = profile.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::Simulation(format!("marginal profile sums to {sum}, not 1")));
    }
    Ok(())
}

/// Per-respondent truth about the injected carelessness. Item indices are
/// 1-based; `onset` is the first careless item, `offset` the first
/// attentive item after a temporary stretch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthRow {
    pub careless_type: Option<CarelessType>,
    pub onset: Option<usize>,
    pub offset: Option<usize>,
}

impl GroundTruthRow {
    pub fn attentive() -> Self {
        GroundTruthRow { careless_type: None, onset: None, offset: None }
    }

    pub fn is_careless(&self) -> bool {
        self.careless_type.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub rows: Vec<GroundTruthRow>,
}

/// Everything one simulated survey consists of.
#[derive(Debug, Clone)]
pub struct SimulatedSurvey {
    pub responses: ResponseMatrix,
    pub design: SurveyDesign,
    pub truth: GroundTruth,
    /// Trait of each construct, for trait-level subsetting.
    pub trait_of_construct: Vec<usize>,
}

fn cholesky(a: &[f64], p: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0f64; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut sum = a[i * p + j];
            for k in 0..j {
                sum -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[i * p + i] = sum.sqrt();
            } else {
                l[i * p + j] = sum / l[j * p + j];
            }
        }
    }
    Some(l)
}

/// Cholesky factor with a small diagonal-loading retry ladder.
fn correlation_factor(matrix: &[f64], p: usize) -> Result<Vec<f64>> {
    for bump in [0.0, 1e-10, 1e-8, 1e-6] {
        let mut a = matrix.to_vec();
        if bump > 0.0 {
            for i in 0..p {
                a[i * p + i] += bump;
            }
        }
        if let Some(l) = cholesky(&a, p) {
            return Ok(l);
        }
    }
    Err(Error::Simulation(
        "latent correlation matrix is not positive definite (even after diagonal loading)".into(),
    ))
}

struct Layout {
    /// Base (construct-ordered) item behind each presented position.
    base_of_pos: Vec<usize>,
    construct_of_item: Vec<usize>,
    keying: Vec<Keying>,
    /// Per presented item: category thresholds on the latent scale.
    thresholds: Vec<Vec<f64>>,
    /// Cholesky factor of the base-order latent correlation matrix.
    factor: Vec<f64>,
    trait_of_construct: Vec<usize>,
    s: usize,
    p: usize,
}

fn build_layout(spec: &SimulationSpec) -> Result<Layout> {
    let p = spec.p();
    let l = spec.categories as usize;

    // base-order construct map and latent correlations
    let (construct_of_base, trait_of_construct, base_matrix): (Vec<usize>, Vec<usize>, Vec<f64>) =
        match &spec.structure {
            Structure::Blocks(b) => {
                let construct_of_base: Vec<usize> =
                    (0..p).map(|j| j / b.items_per_facet).collect();
                let trait_of_construct: Vec<usize> =
                    (0..b.s()).map(|c| c / b.facets_per_trait).collect();
                let mut mat = vec![0.0; p * p];
                for a in 0..p {
                    let fa = construct_of_base[a];
                    let ta = trait_of_construct[fa];
                    for bq in 0..p {
                        let fb = construct_of_base[bq];
                        let tb = trait_of_construct[fb];
                        mat[a * p + bq] = if a == bq {
                            1.0
                        } else if fa == fb {
                            b.within_facet
                        } else if ta == tb {
                            b.within_trait
                        } else {
                            b.between_trait
                        };
                    }
                }
                (construct_of_base, trait_of_construct, mat)
            }
            Structure::Explicit { matrix, construct_of_item } => {
                let s = construct_of_item.iter().copied().max().map_or(0, |m| m + 1);
                (construct_of_item.clone(), (0..s).collect(), matrix.clone())
            }
        };

    let mut order_rng = seed::rng(spec.seed, "item-order", 0);
    let base_of_pos: Vec<usize> = match &spec.structure {
        Structure::Explicit { .. } => (0..p).collect(),
        Structure::Blocks(_) => match spec.item_order {
            ItemOrder::Scattered => {
                let mut v: Vec<usize> = (0..p).collect();
                v.shuffle(&mut order_rng);
                v
            }
            ItemOrder::GroupedByConstruct => {
                let s = trait_of_construct.len();
                let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); s];
                for (j, &c) in construct_of_base.iter().enumerate() {
                    blocks[c].push(j);
                }
                let mut block_order: Vec<usize> = (0..s).collect();
                block_order.shuffle(&mut order_rng);
                let mut v = Vec::with_capacity(p);
                for &c in &block_order {
                    let mut items = blocks[c].clone();
                    items.shuffle(&mut order_rng);
                    v.extend(items);
                }
                v
            }
        },
    };
    let construct_of_item: Vec<usize> =
        base_of_pos.iter().map(|&b| construct_of_base[b]).collect();

    let mut keying_rng = seed::rng(spec.seed, "keying", 0);
    let keying: Vec<Keying> = match spec.keying_layout {
        KeyingLayout::Alternating => (0..p)
            .map(|j| if j % 2 == 1 { Keying::Negative } else { Keying::Positive })
            .collect(),
        KeyingLayout::Random => {
            let count = (spec.negative_fraction * p as f64).round() as usize;
            let mut positions: Vec<usize> = (0..p).collect();
            positions.shuffle(&mut keying_rng);
            let mut keys = vec![Keying::Positive; p];
            for &pos in positions.iter().take(count) {
                keys[pos] = Keying::Negative;
            }
            keys
        }
    };

    // marginal profile per presented item; negative keying mirrors it
    let mut marginal_rng = seed::rng(spec.seed, "marginals", 0);
    let uniform = vec![1.0 / l as f64; l];
    let profiles: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            let base = match &spec.marginals {
                Marginals::Uniform => uniform.clone(),
                Marginals::Global(g) => g.clone(),
                Marginals::Bank(bank) => bank[marginal_rng.random_range(0..bank.len())].clone(),
                Marginals::PerItem(per) => per[j].clone(),
            };
            let mirror =
                keying[j] == Keying::Negative && !matches!(spec.marginals, Marginals::PerItem(_));
            if mirror {
                base.into_iter().rev().collect()
            } else {
                base
            }
        })
        .collect();

    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let thresholds: Vec<Vec<f64>> = profiles
        .iter()
        .map(|profile| {
            let mut cum = 0.0;
            profile[..l - 1]
                .iter()
                .map(|&mass| {
                    cum += mass;
                    normal.inverse_cdf(cum.clamp(0.0, 1.0))
                })
                .collect()
        })
        .collect();

    let factor = correlation_factor(&base_matrix, p)?;
    let s = trait_of_construct.len();
    Ok(Layout {
        base_of_pos,
        construct_of_item,
        keying,
        thresholds,
        factor,
        trait_of_construct,
        s,
        p,
    })
}

fn draw_code(z: f64, thresholds: &[f64]) -> u8 {
    let mut code = 1u8;
    for &t in thresholds {
        if z > t {
            code += 1;
        } else {
            break;
        }
    }
    code
}

/// Draws the attentive sample described by `spec` (gamma is ignored).
pub fn generate_attentive(spec: &SimulationSpec) -> Result<(ResponseMatrix, SurveyDesign)> {
    let survey = generate_attentive_with_layout(spec)?;
    Ok((survey.0, survey.1))
}

fn generate_attentive_with_layout(
    spec: &SimulationSpec,
) -> Result<(ResponseMatrix, SurveyDesign, Layout)> {
    spec.validate()?;
    let layout = build_layout(spec)?;
    let p = layout.p;
    let mut codes = vec![0u8; spec.n * p];
    let mut eps = vec![0.0f64; p];
    let mut latent = vec![0.0f64; p];
    for i in 0..spec.n {
        let mut rng = seed::rng(spec.seed, "latent", i as u64);
        for e in eps.iter_mut() {
            *e = rng.sample(rand_distr::StandardNormal);
        }
        for r in 0..p {
            let mut v = 0.0;
            for k in 0..=r {
                v += layout.factor[r * p + k] * eps[k];
            }
            latent[r] = v;
        }
        for j in 0..p {
            let mut z = latent[layout.base_of_pos[j]];
            if layout.keying[j] == Keying::Negative {
                z = -z;
            }
            codes[i * p + j] = draw_code(z, &layout.thresholds[j]);
        }
    }
    let m = ResponseMatrix::from_parts(codes, spec.n, p, vec![spec.categories; p]);
    let d = SurveyDesign::new(layout.s, layout.construct_of_item.clone(), layout.keying.clone())?;
    Ok((m, d, layout))
}

fn middle_band(l: u8) -> Result<(u8, u8)> {
    if l < 3 {
        return Err(Error::Simulation(format!(
            "middling responding needs at least 3 categories, survey has {l}"
        )));
    }
    let lo = (l - 3) / 2 + 1;
    Ok((lo, lo + 2))
}

/// Overwrites tails of selected respondents with careless responding.
///
/// floor(gamma * n / #types) respondents per type are drawn without
/// replacement; each gets an onset uniform in the regime bounds and, for
/// temporary carelessness, a later return-to-attentiveness changepoint.
pub fn inject_carelessness(
    m: &ResponseMatrix,
    spec: &SimulationSpec,
) -> Result<(ResponseMatrix, GroundTruth)> {
    spec.validate()?;
    let n = m.n();
    let p = m.p();
    let l = spec.categories;
    let mut out = m.clone();
    let mut truth = vec![GroundTruthRow::attentive(); n];
    let per_type = if spec.types.is_empty() {
        0
    } else {
        ((spec.gamma * n as f64).floor() as usize) / spec.types.len()
    };
    if per_type == 0 {
        if spec.gamma > 0.0 {
            return Err(Error::Simulation(format!(
                "gamma {} over {n} respondents cannot fill {} careless types",
                spec.gamma,
                spec.types.len()
            )));
        }
        return Ok((out, GroundTruth { rows: truth }));
    }
    let total = per_type * spec.types.len();
    let mut rng = seed::rng(spec.seed, "careless", 0);
    let mut everyone: Vec<usize> = (0..n).collect();
    everyone.shuffle(&mut rng);
    let selected = &everyone[..total];

    let (onset_lo, onset_hi) = spec.onset_regime.bounds(p)?;
    let (first_lo, first_hi) = OnsetRegime::Early.bounds(p)?;
    let (_, late_hi) = OnsetRegime::Late.bounds(p)?;

    for (rank, &i) in selected.iter().enumerate() {
        let ctype = spec.types[rank / per_type];
        let (onset, offset) = if spec.temporary {
            let onset = rng.random_range(first_lo..=first_hi);
            let offset = rng.random_range((p / 2 + 1)..=late_hi);
            (onset, Some(offset))
        } else {
            (rng.random_range(onset_lo..=onset_hi), None)
        };
        let end = offset.unwrap_or(p + 1); // first attentive item again
        let mut row = m.row(i).to_vec();
        let span = (onset - 1)..(end - 1);
        match ctype {
            CarelessType::Random => {
                for j in span {
                    row[j] = rng.random_range(1..=l);
                }
            }
            CarelessType::Extreme => {
                for j in span {
                    row[j] = if rng.random_range(0..2) == 0 { 1 } else { l };
                }
            }
            CarelessType::Straightline => {
                let c = rng.random_range(1..=l);
                for j in span {
                    row[j] = c;
                }
            }
            CarelessType::Pattern => {
                let len = rng.random_range(2..=5usize);
                let pattern = loop {
                    let cand: Vec<u8> = (0..len).map(|_| rng.random_range(1..=l)).collect();
                    if cand.iter().any(|&v| v != cand[0]) {
                        break cand;
                    }
                };
                for (step, j) in span.enumerate() {
                    row[j] = pattern[step % len];
                }
            }
            CarelessType::Middling => {
                let (lo, hi) = middle_band(l)?;
                for j in span {
                    row[j] = rng.random_range(lo..=hi);
                }
            }
        }
        out.set_row(i, &row);
        truth[i] = GroundTruthRow { careless_type: Some(ctype), onset: Some(onset), offset };
    }
    Ok((out, GroundTruth { rows: truth }))
}

/// Generates the attentive sample and injects the careless mix.
pub fn simulate(spec: &SimulationSpec) -> Result<SimulatedSurvey> {
    let (attentive, design, layout) = generate_attentive_with_layout(spec)?;
    let (responses, truth) = inject_carelessness(&attentive, spec)?;
    Ok(SimulatedSurvey {
        responses,
        design,
        truth,
        trait_of_construct: layout.trait_of_construct,
    })
}

/// Keeps only items whose construct belongs to one of the `keep` traits.
/// Constructs are renumbered in their original order.
pub fn drop_traits(
    m: &ResponseMatrix,
    d: &SurveyDesign,
    trait_of_construct: &[usize],
    keep: &[usize],
) -> Result<(ResponseMatrix, SurveyDesign)> {
    if trait_of_construct.len() != d.s() {
        return Err(Error::Dimension(format!(
            "trait map covers {} constructs, design has {}",
            trait_of_construct.len(),
            d.s()
        )));
    }
    if keep.is_empty() {
        return Err(Error::Config("keep at least one trait".into()));
    }
    let n_traits = trait_of_construct.iter().copied().max().unwrap_or(0) + 1;
    if let Some(&bad) = keep.iter().find(|&&t| t >= n_traits) {
        return Err(Error::Config(format!("trait {bad} out of range (0..{n_traits})")));
    }
    let keep_construct: Vec<bool> =
        trait_of_construct.iter().map(|t| keep.contains(t)).collect();
    let kept_items: Vec<usize> = (0..m.p())
        .filter(|&j| keep_construct[d.construct_of_item()[j]])
        .collect();
    if kept_items.len() < 2 {
        return Err(Error::Config("fewer than 2 items left after dropping traits".into()));
    }
    let mut new_index = vec![usize::MAX; d.s()];
    let mut s_new = 0;
    for (c, &kc) in keep_construct.iter().enumerate() {
        if kc {
            new_index[c] = s_new;
            s_new += 1;
        }
    }
    let mut codes = Vec::with_capacity(m.n() * kept_items.len());
    for i in 0..m.n() {
        for &j in &kept_items {
            codes.push(m.get(i, j));
        }
    }
    let categories: Vec<u8> = kept_items.iter().map(|&j| m.categories()[j]).collect();
    let construct_of_item: Vec<usize> =
        kept_items.iter().map(|&j| new_index[d.construct_of_item()[j]]).collect();
    let keying: Vec<Keying> = kept_items.iter().map(|&j| d.keying()[j]).collect();
    let reduced = ResponseMatrix::from_parts(codes, m.n(), kept_items.len(), categories);
    let design = SurveyDesign::new(s_new, construct_of_item, keying)?;
    Ok((reduced, design))
}

/// Writes the ground truth CSV (respondent, type, onset, offset).
pub fn write_ground_truth(path: &std::path::Path, truth: &GroundTruth) -> Result<()> {
    let mut out = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["respondent", "type", "onset", "offset"])?;
        for (i, row) in truth.rows.iter().enumerate() {
            w.write_record([
                (i + 1).to_string(),
                row.careless_type.map(|t| t.to_string()).unwrap_or_default(),
                row.onset.map(|o| o.to_string()).unwrap_or_default(),
                row.offset.map(|o| o.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    crate::data::atomic_write(path, &out)
}

pub fn load_ground_truth(path: &std::path::Path) -> Result<GroundTruth> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes.as_slice());
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() < 3 {
            return Err(Error::Config(format!("ground truth row {}: too few fields", i + 1)));
        }
        let parse_opt = |s: &str| -> Result<Option<usize>> {
            let s = s.trim();
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|_| Error::Config(format!("ground truth row {}: bad index {s:?}", i + 1)))
            }
        };
        let ctype = match record[1].trim() {
            "" => None,
            t => Some(CarelessType::parse(t)?),
        };
        rows.push(GroundTruthRow {
            careless_type: ctype,
            onset: parse_opt(&record[2])?,
            offset: parse_opt(record.get(3).unwrap_or(""))?,
        });
    }
    Ok(GroundTruth { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(seed: u64) -> SimulationSpec {
        SimulationSpec {
            structure: Structure::Blocks(BlockStructure {
                traits: 2,
                facets_per_trait: 2,
                items_per_facet: 5,
                ..BlockStructure::default()
            }),
            n: 40,
            ..SimulationSpec::new(seed)
        }
    }

    #[test]
    fn identity_structure_uniform_marginals_hits_uniform_frequencies() {
        let p = 6;
        let mut matrix = vec![0.0; p * p];
        for i in 0..p {
            matrix[i * p + i] = 1.0;
        }
        let spec = SimulationSpec {
            n: 6000,
            structure: Structure::Explicit { matrix, construct_of_item: vec![0, 0, 1, 1, 2, 2] },
            marginals: Marginals::Uniform,
            ..SimulationSpec::new(91)
        };
        let (m, _) = generate_attentive(&spec).unwrap();
        let total = (m.n() * m.p()) as f64;
        let mut counts = [0usize; 5];
        for row in m.rows() {
            for &v in row {
                counts[(v - 1) as usize] += 1;
            }
        }
        // binomial 3-sigma band around 0.2
        let sigma = (0.2 * 0.8 / total).sqrt();
        for (c, &count) in counts.iter().enumerate() {
            let freq = count as f64 / total;
            assert!(
                (freq - 0.2).abs() <= 3.0 * sigma + 1e-12,
                "category {} frequency {freq}",
                c + 1
            );
        }
    }

    #[test]
    fn within_facet_correlation_is_attenuated_but_strong() {
        let spec = SimulationSpec { n: 2000, ..small_spec(17) };
        let (m, d) = generate_attentive(&spec).unwrap();
        // mean correlation over same-facet pairs with equal keying
        let mut rs = Vec::new();
        for a in 0..m.p() {
            for b in (a + 1)..m.p() {
                if d.construct_of_item()[a] == d.construct_of_item()[b]
                    && d.keying()[a] == d.keying()[b]
                {
                    let xa: Vec<f64> = (0..m.n()).map(|i| f64::from(m.get(i, a))).collect();
                    let xb: Vec<f64> = (0..m.n()).map(|i| f64::from(m.get(i, b))).collect();
                    let n = xa.len() as f64;
                    let ma = xa.iter().sum::<f64>() / n;
                    let mb = xb.iter().sum::<f64>() / n;
                    let mut num = 0.0;
                    let mut da = 0.0;
                    let mut db = 0.0;
                    for (x, y) in xa.iter().zip(&xb) {
                        num += (x - ma) * (y - mb);
                        da += (x - ma) * (x - ma);
                        db += (y - mb) * (y - mb);
                    }
                    rs.push(num / (da * db).sqrt());
                }
            }
        }
        let mean = rs.iter().sum::<f64>() / rs.len() as f64;
        assert!(
            mean > 0.3 && mean < 0.5,
            "mean same-keyed within-facet correlation {mean} outside (0.3, 0.5)"
        );
    }

    #[test]
    fn opposite_keyed_within_facet_pairs_correlate_negatively() {
        let spec = SimulationSpec { n: 2000, ..small_spec(19) };
        let (m, d) = generate_attentive(&spec).unwrap();
        let mut rs = Vec::new();
        for a in 0..m.p() {
            for b in (a + 1)..m.p() {
                if d.construct_of_item()[a] == d.construct_of_item()[b]
                    && d.keying()[a] != d.keying()[b]
                {
                    let xa: Vec<f64> = (0..m.n()).map(|i| f64::from(m.get(i, a))).collect();
                    let xb: Vec<f64> = (0..m.n()).map(|i| f64::from(m.get(i, b))).collect();
                    let n = xa.len() as f64;
                    let ma = xa.iter().sum::<f64>() / n;
                    let mb = xb.iter().sum::<f64>() / n;
                    let mut num = 0.0;
                    let mut da = 0.0;
                    let mut db = 0.0;
                    for (x, y) in xa.iter().zip(&xb) {
                        num += (x - ma) * (y - mb);
                        da += (x - ma) * (x - ma);
                        db += (y - mb) * (y - mb);
                    }
                    rs.push(num / (da * db).sqrt());
                }
            }
        }
        let mean = rs.iter().sum::<f64>() / rs.len() as f64;
        assert!(mean < -0.3, "mean opposite-keyed within-facet correlation {mean}");
    }

    #[test]
    fn careless_counts_follow_floor_rule() {
        let spec = SimulationSpec { gamma: 0.2, ..SimulationSpec::new(3) };
        let spec = SimulationSpec {
            structure: Structure::Blocks(BlockStructure {
                traits: 1,
                facets_per_trait: 2,
                items_per_facet: 20,
                ..BlockStructure::default()
            }),
            n: 500,
            ..spec
        };
        let survey = simulate(&spec).unwrap();
        let mut counts = std::collections::BTreeMap::new();
        for row in &survey.truth.rows {
            if let Some(t) = row.careless_type {
                *counts.entry(t.as_str()).or_insert(0usize) += 1;
            }
        }
        assert_eq!(counts.values().sum::<usize>(), 100);
        for (_, &c) in counts.iter() {
            assert_eq!(c, 25);
        }
    }

    #[test]
    fn gamma_zero_changes_nothing() {
        let spec = small_spec(5);
        let (attentive, _) = generate_attentive(&spec).unwrap();
        let (injected, truth) = inject_carelessness(&attentive, &spec).unwrap();
        assert_eq!(attentive, injected);
        assert!(truth.rows.iter().all(|r| !r.is_careless()));
    }

    #[test]
    fn onsets_respect_regime_bounds() {
        for (regime, lo, hi) in [
            (OnsetRegime::Baseline, 30, 270),
            (OnsetRegime::Early, 30, 150),
            (OnsetRegime::Late, 150, 270),
        ] {
            let spec = SimulationSpec {
                n: 60,
                gamma: 1.0,
                onset_regime: regime,
                ..SimulationSpec::new(7)
            };
            let survey = simulate(&spec).unwrap();
            assert_eq!(survey.responses.p(), 300);
            let onsets: Vec<usize> =
                survey.truth.rows.iter().filter_map(|r| r.onset).collect();
            assert_eq!(onsets.len(), 60);
            assert!(onsets.iter().all(|&o| o >= lo && o <= hi), "{regime}: {onsets:?}");
        }
    }

    #[test]
    fn pre_onset_responses_are_preserved() {
        let spec = SimulationSpec { gamma: 0.5, n: 40, ..small_spec(23) };
        let (attentive, _) = generate_attentive(&spec).unwrap();
        let (injected, truth) = inject_carelessness(&attentive, &spec).unwrap();
        for (i, row) in truth.rows.iter().enumerate() {
            if let Some(onset) = row.onset {
                for j in 0..(onset - 1) {
                    assert_eq!(attentive.get(i, j), injected.get(i, j));
                }
            } else {
                assert_eq!(attentive.row(i), injected.row(i));
            }
        }
    }

    #[test]
    fn straightline_and_pattern_tails_look_right() {
        let spec = SimulationSpec {
            gamma: 1.0,
            n: 24,
            types: vec![CarelessType::Straightline, CarelessType::Pattern],
            ..small_spec(29)
        };
        let survey = simulate(&spec).unwrap();
        for (i, row) in survey.truth.rows.iter().enumerate() {
            let onset = row.onset.unwrap();
            let tail: Vec<u8> =
                (onset - 1..survey.responses.p()).map(|j| survey.responses.get(i, j)).collect();
            match row.careless_type.unwrap() {
                CarelessType::Straightline => {
                    assert!(tail.iter().all(|&v| v == tail[0]), "row {i}: {tail:?}");
                }
                CarelessType::Pattern => {
                    assert!(tail.iter().any(|&v| v != tail[0]), "row {i}: {tail:?}");
                    // cyclic with some period 2..=5
                    let ok = (2..=5usize).any(|lag| {
                        tail.iter().zip(tail.iter().skip(lag)).all(|(a, b)| a == b)
                    });
                    assert!(ok, "row {i}: {tail:?}");
                }
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn middling_stays_in_middle_band() {
        let spec = SimulationSpec {
            gamma: 1.0,
            n: 8,
            types: vec![CarelessType::Middling],
            ..small_spec(31)
        };
        let survey = simulate(&spec).unwrap();
        for (i, row) in survey.truth.rows.iter().enumerate() {
            let onset = row.onset.unwrap();
            for j in (onset - 1)..survey.responses.p() {
                let v = survey.responses.get(i, j);
                assert!((2..=4).contains(&v), "row {i} item {j}: {v}");
            }
        }
    }

    #[test]
    fn temporary_carelessness_returns_to_attentive() {
        let spec = SimulationSpec {
            gamma: 0.5,
            n: 16,
            temporary: true,
            ..small_spec(37)
        };
        let (attentive, _) = generate_attentive(&spec).unwrap();
        let (injected, truth) = inject_carelessness(&attentive, &spec).unwrap();
        let p = attentive.p();
        for (i, row) in truth.rows.iter().enumerate() {
            if !row.is_careless() {
                continue;
            }
            let onset = row.onset.unwrap();
            let offset = row.offset.unwrap();
            assert!(onset < offset && offset <= (9 * p) / 10);
            for j in (offset - 1)..p {
                assert_eq!(attentive.get(i, j), injected.get(i, j), "row {i} item {j}");
            }
        }
    }

    #[test]
    fn simulation_is_reproducible() {
        let spec = SimulationSpec { gamma: 0.3, ..small_spec(41) };
        let a = simulate(&spec).unwrap();
        let b = simulate(&spec).unwrap();
        assert_eq!(a.responses, b.responses);
        assert_eq!(a.truth, b.truth);
        let c = simulate(&SimulationSpec { seed: 42, ..spec }).unwrap();
        assert_ne!(a.responses, c.responses);
    }

    #[test]
    fn drop_traits_reduces_columns() {
        let spec = SimulationSpec { n: 10, ..SimulationSpec::new(43) };
        let survey = simulate(&spec).unwrap();
        assert_eq!(survey.responses.p(), 300);
        let (m4, d4) = drop_traits(
            &survey.responses,
            &survey.design,
            &survey.trait_of_construct,
            &[0, 1, 2, 3],
        )
        .unwrap();
        assert_eq!(m4.p(), 240);
        assert_eq!(d4.s(), 24);
        let (m1, d1) =
            drop_traits(&survey.responses, &survey.design, &survey.trait_of_construct, &[2])
                .unwrap();
        assert_eq!(m1.p(), 60);
        assert_eq!(d1.s(), 6);
        let (mall, _) = drop_traits(
            &survey.responses,
            &survey.design,
            &survey.trait_of_construct,
            &[0, 1, 2, 3, 4],
        )
        .unwrap();
        assert_eq!(mall, survey.responses);
        assert!(drop_traits(&survey.responses, &survey.design, &survey.trait_of_construct, &[])
            .is_err());
        assert!(drop_traits(&survey.responses, &survey.design, &survey.trait_of_construct, &[9])
            .is_err());
    }

    #[test]
    fn non_positive_definite_matrix_is_rejected() {
        let spec = SimulationSpec {
            n: 5,
            structure: Structure::Explicit {
                matrix: vec![1.0, 2.0, 2.0, 1.0],
                construct_of_item: vec![0, 1],
            },
            marginals: Marginals::Uniform,
            ..SimulationSpec::new(1)
        };
        assert!(generate_attentive(&spec).is_err());
    }

    #[test]
    fn ground_truth_roundtrip() {
        let spec = SimulationSpec { gamma: 0.5, n: 20, ..small_spec(47) };
        let survey = simulate(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("truth.csv");
        write_ground_truth(&path, &survey.truth).unwrap();
        let back = load_ground_truth(&path).unwrap();
        assert_eq!(survey.truth, back);
    }

    #[test]
    fn spec_validation_rejects_bad_values() {
        assert!(SimulationSpec { gamma: 1.5, ..small_spec(1) }.validate().is_err());
        assert!(SimulationSpec { n: 0, ..small_spec(1) }.validate().is_err());
        assert!(SimulationSpec { categories: 1, ..small_spec(1) }.validate().is_err());
        let bad_marginals = SimulationSpec {
            marginals: Marginals::Global(vec![0.5, 0.2, 0.2]),
            ..small_spec(1)
        };
        assert!(bad_marginals.validate().is_err());
    }
}
