//! A five-layer autoencoder over rating-scale responses and its
//! per-response reconstruction errors.
//!
//! Layer sizes are p, floor(1.5 p), s, floor(1.5 p), p with tanh on the
//! two wide hidden layers and identity on the bottleneck and the output.
//! The wide-narrow-wide shape forces respondent vectors through an
//! s-dimensional code, so only structure shared across the sample
//! survives; careless stretches reconstruct poorly.
//!
//! Inputs are mapped per item from [0, L_j] to [-1, 1] before the network
//! and back afterward, keeping the tanh layers away from saturation.
//! Training minimizes the sample mean of the summed pseudo-Huber losses
//! of the raw-scale residuals by plain mini-batch SGD.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::distr::{Distribution, Uniform};

use crate::data::{atomic_write, ResponseMatrix};
use crate::error::{Error, Result};
use crate::seed;

/// Training settings. Layer sizes other than the bottleneck are derived
/// from the data, so they are not configurable.
#[derive(Debug, Clone)]
pub struct AutoencoderConfig {
    /// Bottleneck width s; the number of constructs is the natural choice.
    pub bottleneck: usize,
    /// Pseudo-Huber transition scale.
    pub delta: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl AutoencoderConfig {
    pub fn new(bottleneck: usize, seed: u64) -> Self {
        AutoencoderConfig {
            bottleneck,
            delta: 1.0,
            batch_size: 10,
            learning_rate: 1e-4,
            epochs: 100,
            seed,
        }
    }

    fn validate(&self, p: usize) -> Result<()> {
        if self.bottleneck == 0 || self.bottleneck >= p {
            return Err(Error::Config(format!(
                "bottleneck {} must lie in 1..{p}",
                self.bottleneck
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate {} must be positive", self.learning_rate)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("delta {} must be positive", self.delta)));
        }
        Ok(())
    }
}

/// Weights and intercepts of the four trainable layers.
///
/// `w2` maps input -> mapping, `w3` mapping -> bottleneck, `w4`
/// bottleneck -> demapping, `w5` demapping -> output; each `w*` stores one
/// row per output node.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParameters {
    pub(crate) w2: Array2<f64>,
    pub(crate) b2: Array1<f64>,
    pub(crate) w3: Array2<f64>,
    pub(crate) b3: Array1<f64>,
    pub(crate) w4: Array2<f64>,
    pub(crate) b4: Array1<f64>,
    pub(crate) w5: Array2<f64>,
    pub(crate) b5: Array1<f64>,
    /// Per-item category counts the network was trained with; they fix
    /// the input and output scaling.
    pub(crate) categories: Vec<u8>,
}

impl NetworkParameters {
    pub fn p(&self) -> usize {
        self.w2.ncols()
    }

    pub fn mapping_size(&self) -> usize {
        self.w2.nrows()
    }

    pub fn bottleneck_size(&self) -> usize {
        self.w3.nrows()
    }

    pub fn categories(&self) -> &[u8] {
        &self.categories
    }

    /// Glorot-uniform weights, zero intercepts, drawn layer by layer from
    /// one seeded stream.
    pub fn init(p: usize, bottleneck: usize, categories: &[u8], master_seed: u64) -> Result<Self> {
        if categories.len() != p {
            return Err(Error::Dimension(format!(
                "{} category counts for {p} items",
                categories.len()
            )));
        }
        let m = mapping_size(p);
        let mut rng = seed::rng(master_seed, "autoencoder-init", 0);
        let mut layer = |rows: usize, cols: usize| -> Result<Array2<f64>> {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit)
                .map_err(|e| Error::Config(format!("bad init range: {e}")))?;
            Ok(Array2::from_shape_fn((rows, cols), |_| dist.sample(&mut rng)))
        };
        Ok(NetworkParameters {
            w2: layer(m, p)?,
            b2: Array1::zeros(m),
            w3: layer(bottleneck, m)?,
            b3: Array1::zeros(bottleneck),
            w4: layer(m, bottleneck)?,
            b4: Array1::zeros(m),
            w5: layer(p, m)?,
            b5: Array1::zeros(p),
            categories: categories.to_vec(),
        })
    }

    /// All parameters as one flat vector, in a fixed order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for a in [&self.w2, &self.w3, &self.w4, &self.w5] {
            out.extend(a.iter().copied());
        }
        for b in [&self.b2, &self.b3, &self.b4, &self.b5] {
            out.extend(b.iter().copied());
        }
        out
    }

    /// Inverse of [`flatten`]; shapes must match.
    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        let expected = self.flatten().len();
        if flat.len() != expected {
            return Err(Error::Dimension(format!(
                "expected {expected} parameters, got {}",
                flat.len()
            )));
        }
        let mut it = flat.iter().copied();
        for a in [&mut self.w2, &mut self.w3, &mut self.w4, &mut self.w5] {
            for v in a.iter_mut() {
                *v = it.next().unwrap();
            }
        }
        for b in [&mut self.b2, &mut self.b3, &mut self.b4, &mut self.b5] {
            for v in b.iter_mut() {
                *v = it.next().unwrap();
            }
        }
        Ok(())
    }
}

/// Width of the two hidden tanh layers.
pub fn mapping_size(p: usize) -> usize {
    (3 * p) / 2
}

/// delta^2 (sqrt(1 + (z/delta)^2) - 1): quadratic near zero, linear in
/// the tails, so single badly reconstructed items cannot dominate.
pub fn pseudo_huber(z: f64, delta: f64) -> f64 {
    let r = z / delta;
    delta * delta * ((1.0 + r * r).sqrt() - 1.0)
}

/// One respondent pushed through the network, in raw response units.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub reconstruction: Vec<f64>,
    pub mapping: Vec<f64>,
    pub bottleneck: Vec<f64>,
    pub demapping: Vec<f64>,
}

/// Training output: final parameters plus the running mean training loss
/// per epoch (summed over items, averaged over respondents).
#[derive(Debug, Clone)]
pub struct TrainedAutoencoder {
    pub params: NetworkParameters,
    pub loss_history: Vec<f64>,
}

fn normalize_matrix(m: &ResponseMatrix) -> Array2<f64> {
    let mut x = Array2::zeros((m.n(), m.p()));
    for (i, row) in m.rows().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let l = f64::from(m.categories()[j]);
            x[[i, j]] = 2.0 * f64::from(v) / l - 1.0;
        }
    }
    x
}

fn raw_matrix(m: &ResponseMatrix) -> Array2<f64> {
    let mut x = Array2::zeros((m.n(), m.p()));
    for (i, row) in m.rows().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            x[[i, j]] = f64::from(v);
        }
    }
    x
}

struct BatchPass {
    a2: Array2<f64>,
    a3: Array2<f64>,
    a4: Array2<f64>,
    xhat: Array2<f64>,
}

/// Forward pass for a batch of normalized rows; reconstruction is mapped
/// back to raw units (unclamped).
fn forward_batch(params: &NetworkParameters, u: &Array2<f64>, half_l: &Array1<f64>) -> BatchPass {
    let a2 = (u.dot(&params.w2.t()) + &params.b2).mapv(f64::tanh);
    let a3 = a2.dot(&params.w3.t()) + &params.b3;
    let a4 = (a3.dot(&params.w4.t()) + &params.b4).mapv(f64::tanh);
    let a5 = a4.dot(&params.w5.t()) + &params.b5;
    let xhat = (a5 + 1.0) * half_l;
    BatchPass { a2, a3, a4, xhat }
}

struct Gradients {
    w2: Array2<f64>,
    b2: Array1<f64>,
    w3: Array2<f64>,
    b3: Array1<f64>,
    w4: Array2<f64>,
    b4: Array1<f64>,
    w5: Array2<f64>,
    b5: Array1<f64>,
}

/// Loss and gradients of the batch objective
/// (1/B) sum_i sum_j pseudo_huber(x_ij - xhat_ij).
fn batch_loss_and_gradients(
    params: &NetworkParameters,
    u: &Array2<f64>,
    xraw: &Array2<f64>,
    half_l: &Array1<f64>,
    delta: f64,
) -> (f64, Gradients) {
    let b = u.nrows() as f64;
    let pass = forward_batch(params, u, half_l);
    let resid = xraw - &pass.xhat;
    let root = resid.mapv(|r| {
        let z = r / delta;
        (1.0 + z * z).sqrt()
    });
    let loss = root.mapv(|s| delta * delta * (s - 1.0)).sum() / b;

    // d loss / d reconstruction = -(1/B) r / sqrt(1 + (r/delta)^2);
    // d reconstruction / d output activation = L_j / 2.
    let mut g5 = &resid / &root;
    g5 = g5 * half_l;
    g5.mapv_inplace(|v| -v / b);

    let gw5 = g5.t().dot(&pass.a4);
    let gb5 = g5.sum_axis(Axis(0));
    let g4 = g5.dot(&params.w5) * pass.a4.mapv(|a| 1.0 - a * a);
    let gw4 = g4.t().dot(&pass.a3);
    let gb4 = g4.sum_axis(Axis(0));
    let g3 = g4.dot(&params.w4);
    let gw3 = g3.t().dot(&pass.a2);
    let gb3 = g3.sum_axis(Axis(0));
    let g2 = g3.dot(&params.w3) * pass.a2.mapv(|a| 1.0 - a * a);
    let gw2 = g2.t().dot(u);
    let gb2 = g2.sum_axis(Axis(0));

    (
        loss,
        Gradients { w2: gw2, b2: gb2, w3: gw3, b3: gb3, w4: gw4, b4: gb4, w5: gw5, b5: gb5 },
    )
}

/// Full-sample objective and its gradient, flattened in [`NetworkParameters::flatten`]
/// order. Exposed for gradient diagnostics.
pub fn objective_gradient(
    params: &NetworkParameters,
    m: &ResponseMatrix,
    delta: f64,
) -> Result<(f64, Vec<f64>)> {
    if m.p() != params.p() {
        return Err(Error::Dimension(format!(
            "network trained for {} items, data has {}",
            params.p(),
            m.p()
        )));
    }
    let u = normalize_matrix(m);
    let xraw = raw_matrix(m);
    let half_l = Array1::from_iter(m.categories().iter().map(|&l| f64::from(l) / 2.0));
    let (loss, g) = batch_loss_and_gradients(params, &u, &xraw, &half_l, delta);
    let mut flat = Vec::new();
    for a in [&g.w2, &g.w3, &g.w4, &g.w5] {
        flat.extend(a.iter().copied());
    }
    for b in [&g.b2, &g.b3, &g.b4, &g.b5] {
        flat.extend(b.iter().copied());
    }
    Ok((loss, flat))
}

/// Mini-batch SGD over seeded epoch shuffles. The reported loss per epoch
/// is the running training loss: each batch contributes the loss at the
/// parameters it was trained on.
pub fn train(m: &ResponseMatrix, cfg: &AutoencoderConfig) -> Result<TrainedAutoencoder> {
    cfg.validate(m.p())?;
    let mut params = NetworkParameters::init(m.p(), cfg.bottleneck, m.categories(), cfg.seed)?;
    let u_all = normalize_matrix(m);
    let x_all = raw_matrix(m);
    let half_l = Array1::from_iter(m.categories().iter().map(|&l| f64::from(l) / 2.0));
    let mut order: Vec<usize> = (0..m.n()).collect();
    let mut shuffle_rng = seed::rng(cfg.seed, "autoencoder-shuffle", 0);
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    let lr = cfg.learning_rate;

    for epoch in 0..cfg.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss_sum = 0.0;
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let u = u_all.select(Axis(0), batch);
            let x = x_all.select(Axis(0), batch);
            let (loss, g) = batch_loss_and_gradients(&params, &u, &x, &half_l, cfg.delta);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch: epoch + 1, batch: batch_idx + 1 });
            }
            epoch_loss_sum += loss * batch.len() as f64;
            params.w2.scaled_add(-lr, &g.w2);
            params.b2.scaled_add(-lr, &g.b2);
            params.w3.scaled_add(-lr, &g.w3);
            params.b3.scaled_add(-lr, &g.b3);
            params.w4.scaled_add(-lr, &g.w4);
            params.b4.scaled_add(-lr, &g.b4);
            params.w5.scaled_add(-lr, &g.w5);
            params.b5.scaled_add(-lr, &g.b5);
        }
        loss_history.push(epoch_loss_sum / m.n() as f64);
    }
    Ok(TrainedAutoencoder { params, loss_history })
}

/// Pushes one raw response vector through the network.
pub fn forward(params: &NetworkParameters, x: &[u8]) -> Result<ForwardPass> {
    if x.len() != params.p() {
        return Err(Error::Dimension(format!(
            "network trained for {} items, row has {}",
            params.p(),
            x.len()
        )));
    }
    let p = params.p();
    let mut u = Array2::zeros((1, p));
    for (j, &v) in x.iter().enumerate() {
        u[[0, j]] = 2.0 * f64::from(v) / f64::from(params.categories[j]) - 1.0;
    }
    let half_l = Array1::from_iter(params.categories.iter().map(|&l| f64::from(l) / 2.0));
    let pass = forward_batch(params, &u, &half_l);
    Ok(ForwardPass {
        reconstruction: pass.xhat.row(0).to_vec(),
        mapping: pass.a2.row(0).to_vec(),
        bottleneck: pass.a3.row(0).to_vec(),
        demapping: pass.a4.row(0).to_vec(),
    })
}

/// Squared scaled residuals ((x - xhat) / (L_j - 1))^2, one per response.
///
/// Reconstructions are clamped to the valid code range first: [1, L_j],
/// widened to [0, L_j] for items where missing answers occur.
pub fn reconstruction_errors(m: &ResponseMatrix, params: &NetworkParameters) -> Result<Array2<f64>> {
    if m.p() != params.p() {
        return Err(Error::Dimension(format!(
            "network trained for {} items, data has {}",
            params.p(),
            m.p()
        )));
    }
    if m.categories() != params.categories() {
        return Err(Error::Dimension(
            "category counts of the data differ from those the network was trained with".into(),
        ));
    }
    let u = normalize_matrix(m);
    let half_l = Array1::from_iter(m.categories().iter().map(|&l| f64::from(l) / 2.0));
    let pass = forward_batch(params, &u, &half_l);
    let lower: Vec<f64> =
        (0..m.p()).map(|j| if m.column_has_missing(j) { 0.0 } else { 1.0 }).collect();
    let mut re = Array2::zeros((m.n(), m.p()));
    for i in 0..m.n() {
        for j in 0..m.p() {
            let l = f64::from(m.categories()[j]);
            let xhat = pass.xhat[[i, j]].clamp(lower[j], l);
            let z = (f64::from(m.get(i, j)) - xhat) / (l - 1.0);
            re[[i, j]] = z * z;
        }
    }
    Ok(re)
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"CODERSAE";
const CHECKPOINT_VERSION: u32 = 1;

/// Header of a saved network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub epochs: u64,
}

/// Binary checkpoint: magic, version, layer sizes, seed, epoch count,
/// per-item categories, then all parameters in flatten order.
pub fn save_checkpoint(
    path: &Path,
    params: &NetworkParameters,
    meta: &CheckpointMeta,
) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in [params.p() as u64, params.mapping_size() as u64, params.bottleneck_size() as u64] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&meta.seed.to_le_bytes());
    out.extend_from_slice(&meta.epochs.to_le_bytes());
    out.extend_from_slice(&(params.categories.len() as u64).to_le_bytes());
    out.extend_from_slice(&params.categories);
    for v in params.flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    atomic_write(path, &out)
}

pub fn load_checkpoint(path: &Path) -> Result<(NetworkParameters, CheckpointMeta)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut pos = 0usize;
    let take = |pos: &mut usize, len: usize| -> Result<&[u8]> {
        if *pos + len > bytes.len() {
            return Err(Error::Checkpoint("file truncated".into()));
        }
        let s = &bytes[*pos..*pos + len];
        *pos += len;
        Ok(s)
    };
    if take(&mut pos, 8)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("not a network checkpoint".into()));
    }
    let version = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let read_u64 = |pos: &mut usize| -> Result<u64> {
        Ok(u64::from_le_bytes(take(pos, 8)?.try_into().unwrap()))
    };
    let p = read_u64(&mut pos)? as usize;
    let mapping = read_u64(&mut pos)? as usize;
    let bottleneck = read_u64(&mut pos)? as usize;
    let seed = read_u64(&mut pos)?;
    let epochs = read_u64(&mut pos)?;
    let ncat = read_u64(&mut pos)? as usize;
    if ncat != p {
        return Err(Error::Checkpoint(format!("{ncat} categories for {p} items")));
    }
    if mapping != mapping_size(p) {
        return Err(Error::Checkpoint(format!("mapping size {mapping} does not match {p} items")));
    }
    let categories = take(&mut pos, ncat)?.to_vec();
    let mut params = NetworkParameters {
        w2: Array2::zeros((mapping, p)),
        b2: Array1::zeros(mapping),
        w3: Array2::zeros((bottleneck, mapping)),
        b3: Array1::zeros(bottleneck),
        w4: Array2::zeros((mapping, bottleneck)),
        b4: Array1::zeros(mapping),
        w5: Array2::zeros((p, mapping)),
        b5: Array1::zeros(p),
        categories,
    };
    let count = params.flatten().len();
    let mut flat = Vec::with_capacity(count);
    for _ in 0..count {
        flat.push(f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()));
    }
    if pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after parameters".into()));
    }
    params.assign_flat(&flat)?;
    Ok((params, CheckpointMeta { seed, epochs }))
}
