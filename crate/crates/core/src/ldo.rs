//! Latent denoising optimization: start from `z = IE(E(partial))` and descend
//! `L_EMD + λ·L_D + β·L_2` over `z` with the networks frozen, stopping when
//! the critic term starts rising.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AdamState, AutodiffError, Graph, Tensor};
use crate::corrupt::{pad_replicate, CorruptError};
use crate::nets::{critic_forward, decode, encode, generate, init_encode, Gfv, LatentVec, ModelBundle, NetError, LATENT_DIM};
use crate::seeds;
use crate::transport::{emd_gradient, CloudError, EmdSolver, PointCloud, TransportError};

#[derive(Debug, Error)]
pub enum LdoError {
    #[error("input has {len} points, more than the {n_out} the decoder emits")]
    TooLarge { len: usize, n_out: usize },
    #[error("invalid LDO config: {0}")]
    Config(String),
    #[error("non-finite loss at the initial latent vector")]
    NonFinite { trace: LdoTrace },
    #[error("malformed trace, line {line}: {message}")]
    Trace { line: usize, message: String },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Corrupt(#[from] CorruptError),
    #[error(transparent)]
    Cloud(#[from] CloudError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdoConfig {
    pub lambda0: f64,
    pub beta0: f64,
    pub decay: f64,
    pub learning_rate: f64,
    pub max_iters: usize,
    pub early_stop: bool,
    /// Consecutive rises of `L_D` needed to stop; 1 is the literal rule.
    pub patience: usize,
    pub seed: u64,
    pub emd_solver: EmdSolver,
}

impl Default for LdoConfig {
    fn default() -> Self {
        LdoPreset::MainText.config()
    }
}

/// Named weight schedules.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LdoPreset {
    #[default]
    MainText,
    /// Larger initial weights, faster decay, learning rate 0.001.
    Appendix,
}

impl LdoPreset {
    pub fn config(self) -> LdoConfig {
        let base = LdoConfig {
            lambda0: 0.001,
            beta0: 0.001,
            decay: 0.9998,
            learning_rate: 1e-4,
            max_iters: 1000,
            early_stop: true,
            patience: 1,
            seed: 0,
            emd_solver: EmdSolver::Auto,
        };
        match self {
            LdoPreset::MainText => base,
            LdoPreset::Appendix => LdoConfig { lambda0: 0.1, beta0: 0.1, decay: 0.999, learning_rate: 1e-3, ..base },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LdoPreset::MainText => "main-text",
            LdoPreset::Appendix => "appendix",
        }
    }
}

impl fmt::Display for LdoPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LdoPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "main-text" => Ok(LdoPreset::MainText),
            "appendix" => Ok(LdoPreset::Appendix),
            other => Err(format!("unknown preset {other:?} (expected main-text or appendix)")),
        }
    }
}

impl LdoConfig {
    pub fn validate(&self) -> Result<(), LdoError> {
        let bad = |m: &str| Err(LdoError::Config(m.to_string()));
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return bad("decay must lie in (0, 1)");
        }
        if !(self.lambda0 >= 0.0 && self.beta0 >= 0.0) {
            return bad("lambda0 and beta0 must be non-negative");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        Ok(())
    }

    /// `λ0·decay^k`.
    pub fn lambda_at(&self, k: usize) -> f64 {
        self.lambda0 * self.decay.powi(k as i32)
    }

    /// `β0·decay^k`.
    pub fn beta_at(&self, k: usize) -> f64 {
        self.beta0 * self.decay.powi(k as i32)
    }
}

/// Loss values after `iteration` updates of `z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub l_emd: f64,
    pub l_d: f64,
    pub l_2: f64,
    pub lambda: f64,
    pub beta: f64,
    pub emd_gt: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LdoTrace {
    pub records: Vec<TraceRecord>,
}

const TRACE_HEADER: &str = "# iteration\tl_emd\tl_d\tl_2\tlambda\tbeta\temd_gt";

impl LdoTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Tab-separated, one record per line; a missing EMD-GT is written as `-`.
    pub fn to_text(&self) -> String {
        let mut out = format!("{TRACE_HEADER}\n");
        for r in &self.records {
            write!(out, "{}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}\t", r.iteration, r.l_emd, r.l_d, r.l_2, r.lambda, r.beta)
                .expect("writing to a String");
            match r.emd_gt {
                Some(v) => writeln!(out, "{v:e}"),
                None => writeln!(out, "-"),
            }
            .expect("writing to a String");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, LdoError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: String| LdoError::Trace { line: i + 1, message };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 7 {
                return Err(bad(format!("expected 7 fields, found {}", fields.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("not a number: {s:?}")));
            let iteration = fields[0].parse().map_err(|_| bad(format!("bad iteration {:?}", fields[0])))?;
            records.push(TraceRecord {
                iteration,
                l_emd: num(fields[1])?,
                l_d: num(fields[2])?,
                l_2: num(fields[3])?,
                lambda: num(fields[4])?,
                beta: num(fields[5])?,
                emd_gt: if fields[6] == "-" { None } else { Some(num(fields[6])?) },
            });
        }
        Ok(LdoTrace { records })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// `L_D` rose (for `patience` consecutive iterations).
    EarlyStop,
    MaxIters,
    /// A loss became non-finite; the output comes from the best `z` seen.
    NonFinite,
}

#[derive(Clone, Debug)]
pub struct Completion {
    pub cloud: PointCloud,
    pub z: LatentVec,
    pub trace: LdoTrace,
    pub stop: StopReason,
}

/// A loss value with its gradient with respect to `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub grad: Vec<f32>,
}

/// Loss terms and the gradient of their weighted sum.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub l_emd: f64,
    pub l_d: f64,
    pub l_2: f64,
    /// `l_emd + λ·l_d + β·l_2`.
    pub total: f64,
    pub grad: Vec<f32>,
    /// `H(G(z))`, when the EMD term was requested.
    pub decoded: Option<PointCloud>,
}

struct Terms<'a> {
    emd: Option<(&'a PointCloud, EmdSolver)>,
    target: Option<&'a Gfv>,
    critic: bool,
}

fn evaluate(bundle: &ModelBundle, z: &LatentVec, terms: Terms<'_>, lambda: f64, beta: f64) -> Result<Evaluation, LdoError> {
    let mut g = Graph::new();
    let zv = g.variable(z.to_row());
    let gen = bundle.generator.bind(&mut g, false);
    let gz = gen.forward(&mut g, zv)?;
    let mut parts = Vec::new();
    let (mut l_emd, mut l_d, mut l_2) = (0.0, 0.0, 0.0);
    let mut decoded = None;

    if let Some((partial, solver)) = terms.emd {
        let h = bundle.decoder.bind(&mut g, false);
        let out = h.forward(&mut g, gz)?;
        let cloud = PointCloud::from_flat(g.value(out).data())?;
        if cloud.len() != partial.len() {
            return Err(TransportError::Cardinality(partial.len(), cloud.len()).into());
        }
        let m = solver.solve(partial, &cloud)?;
        let local: Vec<f32> = emd_gradient(partial, &cloud, &m)?.iter().flat_map(|p| p.map(|v| v as f32)).collect();
        let local = Tensor::new(g.value(out).shape().to_vec(), local)?;
        l_emd = m.cost;
        parts.push(g.external_scalar(out, m.cost as f32, local)?);
        decoded = Some(cloud);
    }
    if terms.critic {
        let d = bundle.discriminator.bind(&mut g, false);
        let score = critic_forward(&mut g, &d, gz, bundle.descriptor.critic_output)?;
        let score = g.mean(score);
        let neg = g.scale(score, -1.0);
        l_d = f64::from(g.value(neg).item());
        parts.push(g.scale(neg, lambda as f32));
    }
    if let Some(w) = terms.target {
        let wv = g.constant(w.to_row());
        let dist = g.l2_distance_sq(gz, wv)?;
        l_2 = f64::from(g.value(dist).item());
        parts.push(g.scale(dist, beta as f32));
    }

    let mut root = parts[0];
    for &p in &parts[1..] {
        root = g.add(root, p)?;
    }
    g.backward(root)?;
    Ok(Evaluation {
        l_emd,
        l_d,
        l_2,
        total: l_emd + lambda * l_d + beta * l_2,
        grad: g.grad(zv).into_data(),
        decoded,
    })
}

/// `L_D(z) = −D(G(z))`.
pub fn loss_ld(bundle: &ModelBundle, z: &LatentVec) -> Result<LossGrad, LdoError> {
    let e = evaluate(bundle, z, Terms { emd: None, target: None, critic: true }, 1.0, 0.0)?;
    Ok(LossGrad { value: e.l_d, grad: e.grad })
}

/// `L_2(z) = ||G(z) − w||²`.
pub fn loss_l2(bundle: &ModelBundle, z: &LatentVec, w: &Gfv) -> Result<LossGrad, LdoError> {
    let e = evaluate(bundle, z, Terms { emd: None, target: Some(w), critic: false }, 0.0, 1.0)?;
    Ok(LossGrad { value: e.l_2, grad: e.grad })
}

/// `L_EMD(z) = d_EMD(partial, H(G(z)))`; `partial` must already have `n_out` points.
pub fn loss_emd(bundle: &ModelBundle, z: &LatentVec, partial: &PointCloud, solver: EmdSolver) -> Result<LossGrad, LdoError> {
    let e = evaluate(bundle, z, Terms { emd: Some((partial, solver)), target: None, critic: false }, 0.0, 0.0)?;
    Ok(LossGrad { value: e.l_emd, grad: e.grad })
}

/// `L_EMD + λ·L_D + β·L_2` with every term and the gradient of the sum.
pub fn total_loss(
    bundle: &ModelBundle,
    z: &LatentVec,
    partial: &PointCloud,
    w: &Gfv,
    lambda: f64,
    beta: f64,
    solver: EmdSolver,
) -> Result<Evaluation, LdoError> {
    evaluate(bundle, z, Terms { emd: Some((partial, solver)), target: Some(w), critic: true }, lambda, beta)
}

/// Replicate-pads to the decoder size and sorts the points, so everything
/// downstream depends only on the multiset of input points.
pub fn prepare_input(bundle: &ModelBundle, partial: &PointCloud, seed: u64) -> Result<PointCloud, LdoError> {
    let n_out = bundle.descriptor.n_out;
    if partial.len() > n_out {
        return Err(LdoError::TooLarge { len: partial.len(), n_out });
    }
    let padded = pad_replicate(partial, n_out, seeds::substream(seed, "ldo-padding"))?;
    let mut points = padded.into_points();
    points.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])).then(a[2].total_cmp(&b[2])));
    Ok(PointCloud::new(points)?)
}

/// Plain autoencoder output `H(E(partial))`, the baseline LDO improves on.
pub fn reconstruct(bundle: &ModelBundle, partial: &PointCloud, seed: u64) -> Result<PointCloud, LdoError> {
    let input = prepare_input(bundle, partial, seed)?;
    Ok(decode(&bundle.decoder, &encode(&bundle.encoder, &input)?)?)
}

pub fn complete(partial: &PointCloud, bundle: &ModelBundle, config: &LdoConfig) -> Result<Completion, LdoError> {
    complete_with_reference(partial, bundle, config, None)
}

/// [`complete`], additionally recording the EMD to `ground_truth` at every
/// iteration.
pub fn complete_with_reference(
    partial: &PointCloud,
    bundle: &ModelBundle,
    config: &LdoConfig,
    ground_truth: Option<&PointCloud>,
) -> Result<Completion, LdoError> {
    config.validate()?;
    let input = prepare_input(bundle, partial, config.seed)?;
    let w = encode(&bundle.encoder, &input)?;
    let mut z = init_encode(&bundle.init_encoder, &w)?.into_vec();

    let solver = config.emd_solver;
    let eval_at = |z: &[f32], k: usize| -> Result<(Evaluation, TraceRecord), LdoError> {
        let (lambda, beta) = (config.lambda_at(k), config.beta_at(k));
        let e = total_loss(bundle, &LatentVec::new(z.to_vec())?, &input, &w, lambda, beta, solver)?;
        let emd_gt = match ground_truth {
            Some(gt) => Some(solver.solve(gt, e.decoded.as_ref().expect("EMD term requested"))?.cost),
            None => None,
        };
        let record = TraceRecord { iteration: k, l_emd: e.l_emd, l_d: e.l_d, l_2: e.l_2, lambda, beta, emd_gt };
        Ok((e, record))
    };
    let finite = |e: &Evaluation| e.total.is_finite() && e.grad.iter().all(|v| v.is_finite());

    let (mut current, record) = eval_at(&z, 0)?;
    let mut trace = LdoTrace { records: vec![record] };
    if !finite(&current) {
        return Err(LdoError::NonFinite { trace });
    }
    let mut best = (current.total, z.clone(), current.decoded.clone());
    let mut adam = AdamState::new(&[1, LATENT_DIM], config.learning_rate);
    let mut rises = 0;
    let mut stop = StopReason::MaxIters;

    for k in 1..=config.max_iters {
        let mut param = Tensor::row(&z);
        adam.update(&mut param, &Tensor::row(&current.grad))?;
        z = param.into_data();
        let previous_ld = current.l_d;
        let (next, record) = eval_at(&z, k)?;
        trace.records.push(record);
        if !finite(&next) {
            stop = StopReason::NonFinite;
            z = best.1.clone();
            current = Evaluation { decoded: best.2.clone(), ..next };
            break;
        }
        if next.total < best.0 {
            best = (next.total, z.clone(), next.decoded.clone());
        }
        current = next;
        if config.early_stop && current.l_d > previous_ld {
            rises += 1;
            if rises >= config.patience {
                stop = StopReason::EarlyStop;
                break;
            }
        } else {
            rises = 0;
        }
    }

    let cloud = current.decoded.expect("EMD term requested");
    Ok(Completion { cloud, z: LatentVec::new(z)?, trace, stop })
}

/// Densifies a sparse cloud: completion of its replicate-padded version.
pub fn upsample(sparse: &PointCloud, bundle: &ModelBundle, config: &LdoConfig) -> Result<Completion, LdoError> {
    complete(sparse, bundle, config)
}

/// `H(G(IE(E(partial))))`, the starting point of the optimization.
pub fn initial_completion(bundle: &ModelBundle, partial: &PointCloud, seed: u64) -> Result<PointCloud, LdoError> {
    let input = prepare_input(bundle, partial, seed)?;
    let z = init_encode(&bundle.init_encoder, &encode(&bundle.encoder, &input)?)?;
    Ok(decode(&bundle.decoder, &generate(&bundle.generator, &z)?)?)
}
