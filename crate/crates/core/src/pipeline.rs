//! Training: autoencoder on point clouds with an EMD loss, feature extraction,
//! then a weight-clipped Wasserstein GAN plus initializing encoder on the
//! extracted global feature vectors.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::autodiff::{AdamState, AutodiffError, Graph, Tensor};
use crate::corrupt::{pad_replicate, CorruptError, CorruptionKind, CorruptionSpec};
use crate::nets::{
    critic_forward, encode_batch, encoder_forward, stack_clouds, ArchDescriptor, CriticOutput, Gfv, Mlp,
    ModelBundle, NetError, GFV_DIM, LATENT_DIM,
};
use crate::seeds;
use crate::transport::{emd_gradient, EmdSolver, PointCloud, TransportError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptySet,
    #[error("cloud {index} has {got} points, expected {expected}")]
    CloudSize { index: usize, expected: usize, got: usize },
    #[error("duplicate identifier {0}")]
    DuplicateId(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("{stage} diverged at epoch {epoch} (non-finite loss or parameters)")]
    Diverged { stage: &'static str, epoch: usize, history: Vec<f64> },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Corrupt(#[from] CorruptError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub ae_learning_rate: f64,
    pub gan_learning_rate: f64,
    pub gan_epochs: usize,
    pub ae_epochs: usize,
    pub batch_size: usize,
    pub critic_steps_per_gen: usize,
    pub weight_clip: f64,
    pub seed: u64,
    /// Points per decoded cloud.
    pub n_out: usize,
    pub critic_output: CriticOutput,
    /// Matching solver for the reconstruction loss.
    pub emd_solver: EmdSolver,
    /// When set, the autoencoder sees corrupted inputs and is scored against
    /// the clean clouds (denoising autoencoder). A fresh corruption is drawn
    /// for every cloud in every epoch.
    pub dae_corruption: Option<CorruptionSpec>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            ae_learning_rate: 5e-4,
            gan_learning_rate: 1e-4,
            gan_epochs: 200,
            ae_epochs: 300,
            batch_size: 32,
            critic_steps_per_gen: 5,
            weight_clip: 0.01,
            seed: 0,
            n_out: 2048,
            critic_output: CriticOutput::Raw,
            emd_solver: EmdSolver::Auto,
            dae_corruption: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.ae_learning_rate > 0.0 && self.gan_learning_rate > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.ae_epochs == 0 || self.gan_epochs == 0 {
            return bad("epoch counts must be at least 1");
        }
        if self.batch_size == 0 || self.critic_steps_per_gen == 0 || self.n_out == 0 {
            return bad("batch size, critic steps and n_out must be at least 1");
        }
        if !(self.weight_clip > 0.0) {
            return bad("weight clip must be positive");
        }
        if let Some(spec) = &self.dae_corruption {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn descriptor(&self) -> ArchDescriptor {
        let mut d = ArchDescriptor::new(self.n_out);
        d.critic_output = self.critic_output;
        d
    }

    /// Initial parameters for every network.
    pub fn initial_bundle(&self) -> Result<ModelBundle, TrainError> {
        Ok(ModelBundle::init(self.descriptor(), seeds::substream(self.seed, "init"))?)
    }
}

/// ADAM state for every parameter tensor of one network.
#[derive(Clone, Debug)]
pub struct MlpAdam {
    states: Vec<AdamState>,
}

impl MlpAdam {
    pub fn new(net: &Mlp, learning_rate: f64) -> Self {
        Self { states: net.parameters().map(|p| AdamState::new(p.shape(), learning_rate)).collect() }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &[Tensor]) -> Result<(), AutodiffError> {
        for ((state, param), grad) in self.states.iter_mut().zip(net.parameters_mut()).zip(grads) {
            state.update(param, grad)?;
        }
        Ok(())
    }
}

/// Mean EMD loss per epoch.
#[derive(Clone, Debug)]
pub struct AeTraining {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub history: Vec<f64>,
}

fn check_sizes(clouds: &[PointCloud], n_out: usize) -> Result<(), TrainError> {
    if clouds.is_empty() {
        return Err(TrainError::EmptySet);
    }
    for (index, c) in clouds.iter().enumerate() {
        if c.len() != n_out {
            return Err(TrainError::CloudSize { index, expected: n_out, got: c.len() });
        }
    }
    Ok(())
}

/// Batched EMD between `targets` and the decoder output rows, returning the
/// per-sample costs and the mean-loss gradient with respect to the output.
pub(crate) fn emd_batch_loss(
    targets: &[&PointCloud],
    decoded: &Tensor,
    solver: EmdSolver,
) -> Result<(Vec<f64>, Tensor), TrainError> {
    let batch = targets.len();
    let width = decoded.len() / batch;
    let mut grad = vec![0.0f32; decoded.len()];
    let mut costs = Vec::with_capacity(batch);
    let scale = 1.0 / batch as f64;
    for (b, target) in targets.iter().enumerate() {
        let row = &decoded.data()[b * width..(b + 1) * width];
        let out = PointCloud::from_flat(row).map_err(NetError::from)?;
        let m = solver.solve(target, &out)?;
        for (j, g) in emd_gradient(target, &out, &m)?.into_iter().enumerate() {
            for d in 0..3 {
                grad[b * width + 3 * j + d] = (g[d] * scale) as f32;
            }
        }
        costs.push(m.cost);
    }
    Ok((costs, Tensor::new(decoded.shape().to_vec(), grad)?))
}

/// Trains E and H to minimize the mean EMD between each cloud and its
/// reconstruction (or between the clean cloud and the reconstruction of its
/// corruption, when `config.dae_corruption` is set).
pub fn train_autoencoder(clouds: &[PointCloud], config: &TrainConfig) -> Result<AeTraining, TrainError> {
    config.validate()?;
    check_sizes(clouds, config.n_out)?;
    let init = config.initial_bundle()?;
    let (mut encoder, mut decoder) = (init.encoder, init.decoder);
    let mut enc_opt = MlpAdam::new(&encoder, config.ae_learning_rate);
    let mut dec_opt = MlpAdam::new(&decoder, config.ae_learning_rate);
    let shuffle_seed = seeds::substream(config.seed, "ae-shuffle");
    let dae = config.dae_corruption.as_ref().map(|spec| {
        let mut spec = spec.clone();
        if spec.kind == CorruptionKind::Downsample {
            spec.pad_to = Some(config.n_out);
        }
        (spec, seeds::substream(config.seed, "dae-corruption"))
    });

    let mut history = Vec::with_capacity(config.ae_epochs);
    let mut order: Vec<usize> = (0..clouds.len()).collect();
    for epoch in 0..config.ae_epochs {
        order.shuffle(&mut seeds::rng(seeds::child(shuffle_seed, epoch as u64), "order"));
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let targets: Vec<&PointCloud> = batch.iter().map(|&i| &clouds[i]).collect();
            let corrupted: Vec<PointCloud>;
            let inputs: Vec<&PointCloud> = match &dae {
                Some((spec, stream)) => {
                    let epoch_seed = seeds::child(*stream, epoch as u64);
                    corrupted = batch
                        .iter()
                        .map(|&i| spec.reseeded(seeds::child(epoch_seed, i as u64)).apply(&clouds[i]).map(|c| c.cloud))
                        .collect::<Result<_, _>>()?;
                    corrupted.iter().collect()
                }
                None => targets.clone(),
            };

            let mut g = Graph::new();
            let e = encoder.bind(&mut g, true);
            let h = decoder.bind(&mut g, true);
            let x = g.constant(stack_clouds(&inputs)?);
            let gfv = encoder_forward(&mut g, &e, x, inputs.len())?;
            let out = h.forward(&mut g, gfv)?;
            if g.value(out).data().iter().any(|v| !v.is_finite()) {
                return Err(TrainError::Diverged { stage: "autoencoder", epoch, history });
            }
            let (costs, local) = emd_batch_loss(&targets, g.value(out), config.emd_solver)?;
            let mean = costs.iter().sum::<f64>() / costs.len() as f64;
            let loss = g.external_scalar(out, mean as f32, local)?;
            g.backward(loss)?;
            enc_opt.step(&mut encoder, &e.grads(&g))?;
            dec_opt.step(&mut decoder, &h.grads(&g))?;
            total += costs.iter().sum::<f64>();
        }
        history.push(total / clouds.len() as f64);
        if !total.is_finite() || !encoder.all_finite() || !decoder.all_finite() {
            return Err(TrainError::Diverged { stage: "autoencoder", epoch, history });
        }
    }
    Ok(AeTraining { encoder, decoder, history })
}

/// Global feature vectors of the training set, tagged with the encoder they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct GfvDataset {
    pub entries: Vec<(Gfv, String)>,
    /// Hex SHA-256 of the encoder parameters.
    pub provenance: String,
}

impl GfvDataset {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `[n × 128]` matrix of the selected rows.
    pub fn rows(&self, indices: &[usize]) -> Tensor {
        let mut data = Vec::with_capacity(indices.len() * GFV_DIM);
        for &i in indices {
            data.extend_from_slice(self.entries[i].0.as_slice());
        }
        Tensor::new(vec![indices.len(), GFV_DIM], data).expect("non-empty selection")
    }

    /// Tab-separated `id`, then 128 values, one vector per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("# provenance {}\n", self.provenance);
        for (w, id) in &self.entries {
            out.push_str(id);
            for v in w.as_slice() {
                write!(out, "\t{v:e}").expect("writing to a String");
            }
            out.push('\n');
        }
        out
    }
}

fn encoder_fingerprint(encoder: &Mlp) -> String {
    let mut h = Sha256::new();
    for p in encoder.parameters() {
        for v in p.data() {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// One feature vector per cloud, in input order.
pub fn extract_gfvs(encoder: &Mlp, clouds: &[PointCloud], ids: &[String]) -> Result<GfvDataset, TrainError> {
    if clouds.len() != ids.len() {
        return Err(TrainError::Config(format!("{} clouds but {} identifiers", clouds.len(), ids.len())));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
        return Err(TrainError::DuplicateId(dup.clone()));
    }
    let mut entries = Vec::with_capacity(clouds.len());
    // Encode size-homogeneous runs together.
    let mut start = 0;
    while start < clouds.len() {
        let n = clouds[start].len();
        let mut end = start + 1;
        while end < clouds.len() && end - start < 32 && clouds[end].len() == n {
            end += 1;
        }
        let refs: Vec<&PointCloud> = clouds[start..end].iter().collect();
        for (w, id) in encode_batch(encoder, &refs)?.into_iter().zip(&ids[start..end]) {
            entries.push((w, id.clone()));
        }
        start = end;
    }
    Ok(GfvDataset { entries, provenance: encoder_fingerprint(encoder) })
}

/// Per-epoch means of the three GAN objectives, plus the latent round-trip
/// error `E||IE(G(z)) − z||` on a fixed held-out noise batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GanEpoch {
    pub critic: f64,
    pub generator: f64,
    pub init_encoder: f64,
    pub latent_round_trip: f64,
}

pub fn standard_normal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.sample::<f32, _>(StandardNormal)).collect();
    Tensor::new(vec![rows, cols], data).expect("non-empty noise")
}

/// Mean `||IE(G(z)) − z||₂` over the rows of `noise`.
pub fn latent_round_trip_error(generator: &Mlp, init_encoder: &Mlp, noise: &Tensor) -> Result<f64, TrainError> {
    let back = init_encoder.apply(generator.apply(noise.clone())?)?;
    let rows = noise.shape()[0];
    let cols = noise.len() / rows;
    let total: f64 = (0..rows)
        .map(|r| {
            let a = &back.data()[r * cols..(r + 1) * cols];
            let b = &noise.data()[r * cols..(r + 1) * cols];
            a.iter().zip(b).map(|(x, y)| f64::from(x - y).powi(2)).sum::<f64>().sqrt()
        })
        .sum();
    Ok(total / rows as f64)
}

/// Generator, critic and initializing encoder with their optimizers.
#[derive(Clone, Debug)]
pub struct GanTrainer {
    pub generator: Mlp,
    pub discriminator: Mlp,
    pub init_encoder: Mlp,
    critic_output: CriticOutput,
    clip: f32,
    gen_opt: MlpAdam,
    critic_opt: MlpAdam,
    ie_opt: MlpAdam,
}

impl GanTrainer {
    pub fn new(
        generator: Mlp,
        discriminator: Mlp,
        init_encoder: Mlp,
        critic_output: CriticOutput,
        learning_rate: f64,
        clip: f64,
    ) -> Self {
        Self {
            gen_opt: MlpAdam::new(&generator, learning_rate),
            critic_opt: MlpAdam::new(&discriminator, learning_rate),
            ie_opt: MlpAdam::new(&init_encoder, learning_rate),
            generator,
            discriminator,
            init_encoder,
            critic_output,
            clip: clip as f32,
        }
    }

    /// One critic update on `J(D) = E[D(G(z))] − E[D(x)]`, followed by
    /// clipping every critic parameter to `[−clip, clip]`. Returns `J(D)`
    /// before the update.
    pub fn critic_step(&mut self, real: &Tensor, noise: &Tensor) -> Result<f64, TrainError> {
        let mut g = Graph::new();
        let gen = self.generator.bind(&mut g, false);
        let critic = self.discriminator.bind(&mut g, true);
        let z = g.constant(noise.clone());
        let x = g.constant(real.clone());
        let fake = gen.forward(&mut g, z)?;
        let d_fake = critic_forward(&mut g, &critic, fake, self.critic_output)?;
        let d_real = critic_forward(&mut g, &critic, x, self.critic_output)?;
        let m_fake = g.mean(d_fake);
        let m_real = g.mean(d_real);
        let loss = g.sub(m_fake, m_real)?;
        g.backward(loss)?;
        self.critic_opt.step(&mut self.discriminator, &critic.grads(&g))?;
        let c = self.clip;
        for p in self.discriminator.parameters_mut() {
            p.data_mut().iter_mut().for_each(|v| *v = v.clamp(-c, c));
        }
        Ok(f64::from(g.value(loss).item()))
    }

    /// One joint update of G on
    /// `J(G) = E_z[||IE(G(z)) − z|| − D(G(z))] + E_x[||G(IE(x)) − x||]`
    /// and of IE on `J(IE) = E_z||IE(G(z)) − z|| + E_x||G(IE(x)) − x||`.
    ///
    /// The critic term does not depend on IE, so the IE part of `∇J(G)` is
    /// exactly `∇J(IE)`. Returns `(J(G), J(IE))` before the update.
    pub fn generator_step(&mut self, real: &Tensor, noise: &Tensor) -> Result<(f64, f64), TrainError> {
        let mut g = Graph::new();
        let gen = self.generator.bind(&mut g, true);
        let ie = self.init_encoder.bind(&mut g, true);
        let critic = self.discriminator.bind(&mut g, false);
        let z = g.constant(noise.clone());
        let x = g.constant(real.clone());

        let gz = gen.forward(&mut g, z)?;
        let back = ie.forward(&mut g, gz)?;
        let diff_z = g.sub(back, z)?;
        let norms_z = g.row_norm(diff_z)?;
        let latent_term = g.mean(norms_z);
        let d_fake = critic_forward(&mut g, &critic, gz, self.critic_output)?;
        let critic_term = g.mean(d_fake);

        let zx = ie.forward(&mut g, x)?;
        let gx = gen.forward(&mut g, zx)?;
        let diff_x = g.sub(gx, x)?;
        let norms_x = g.row_norm(diff_x)?;
        let data_term = g.mean(norms_x);

        let j_ie = g.add(latent_term, data_term)?;
        let j_g = g.sub(j_ie, critic_term)?;
        g.backward(j_g)?;
        self.gen_opt.step(&mut self.generator, &gen.grads(&g))?;
        self.ie_opt.step(&mut self.init_encoder, &ie.grads(&g))?;
        Ok((f64::from(g.value(j_g).item()), f64::from(g.value(j_ie).item())))
    }

    fn all_finite(&self) -> bool {
        self.generator.all_finite() && self.discriminator.all_finite() && self.init_encoder.all_finite()
    }

    fn max_abs_critic_parameter(&self) -> f32 {
        self.discriminator.parameters().flat_map(|p| p.data().iter().map(|v| v.abs())).fold(0.0, f32::max)
    }
}

#[derive(Clone, Debug)]
pub struct GanTraining {
    pub generator: Mlp,
    pub discriminator: Mlp,
    pub init_encoder: Mlp,
    pub history: Vec<GanEpoch>,
    /// Largest `|parameter|` of the critic seen right after any critic update.
    pub max_clipped_critic_parameter: f32,
}

/// Alternating WGAN training on the feature vectors: each minibatch is one
/// critic step, and every `critic_steps_per_gen`-th critic step is followed
/// by a generator + IE step.
pub fn train_gan(gfvs: &GfvDataset, config: &TrainConfig) -> Result<GanTraining, TrainError> {
    config.validate()?;
    if gfvs.is_empty() {
        return Err(TrainError::EmptySet);
    }
    let init = config.initial_bundle()?;
    let mut trainer = GanTrainer::new(
        init.generator,
        init.discriminator,
        init.init_encoder,
        config.critic_output,
        config.gan_learning_rate,
        config.weight_clip,
    );
    let mut noise_rng = seeds::rng(config.seed, "gan-noise");
    let shuffle_seed = seeds::substream(config.seed, "gan-shuffle");
    let held_out = standard_normal(&mut seeds::rng(config.seed, "gan-held-out"), 256, LATENT_DIM);

    let mut history = Vec::with_capacity(config.gan_epochs);
    let mut order: Vec<usize> = (0..gfvs.len()).collect();
    let mut critic_steps = 0usize;
    let mut max_clipped = 0.0f32;
    for epoch in 0..config.gan_epochs {
        order.shuffle(&mut seeds::rng(seeds::child(shuffle_seed, epoch as u64), "order"));
        let (mut jd, mut jg, mut jie) = (Vec::new(), Vec::new(), Vec::new());
        for batch in order.chunks(config.batch_size) {
            let real = gfvs.rows(batch);
            let noise = standard_normal(&mut noise_rng, batch.len(), LATENT_DIM);
            jd.push(trainer.critic_step(&real, &noise)?);
            max_clipped = max_clipped.max(trainer.max_abs_critic_parameter());
            critic_steps += 1;
            if critic_steps % config.critic_steps_per_gen == 0 {
                let noise = standard_normal(&mut noise_rng, batch.len(), LATENT_DIM);
                let (g, ie) = trainer.generator_step(&real, &noise)?;
                jg.push(g);
                jie.push(ie);
            }
        }
        let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
        let record = GanEpoch {
            critic: mean(&jd),
            generator: mean(&jg),
            init_encoder: mean(&jie),
            latent_round_trip: latent_round_trip_error(&trainer.generator, &trainer.init_encoder, &held_out)?,
        };
        history.push(record);
        let finite = record.critic.is_finite()
            && (jg.is_empty() || (record.generator.is_finite() && record.init_encoder.is_finite()));
        if !finite || !trainer.all_finite() {
            let flat = history.iter().map(|r| r.critic).collect();
            return Err(TrainError::Diverged { stage: "gan", epoch, history: flat });
        }
    }
    Ok(GanTraining {
        generator: trainer.generator,
        discriminator: trainer.discriminator,
        init_encoder: trainer.init_encoder,
        history,
        max_clipped_critic_parameter: max_clipped,
    })
}

/// Everything produced by the full training procedure.
#[derive(Clone, Debug)]
pub struct TrainedModels {
    pub bundle: ModelBundle,
    pub ae_history: Vec<f64>,
    pub gfvs: GfvDataset,
    pub gan_history: Vec<GanEpoch>,
}

/// Replicate-pads every cloud up to `n_out` points.
pub fn pad_clouds(clouds: &[PointCloud], n_out: usize, seed: u64) -> Result<Vec<PointCloud>, TrainError> {
    let stream = seeds::substream(seed, "train-padding");
    clouds
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if c.len() > n_out {
                return Err(TrainError::CloudSize { index: i, expected: n_out, got: c.len() });
            }
            Ok(pad_replicate(c, n_out, seeds::child(stream, i as u64))?)
        })
        .collect()
}

/// Autoencoder, feature extraction, then GAN + IE; returns all five networks.
///
/// The GAN is always fitted to features of the clean clouds, also when the
/// autoencoder is trained as a denoiser.
pub fn run_algorithm1(clouds: &[PointCloud], ids: &[String], config: &TrainConfig) -> Result<TrainedModels, TrainError> {
    config.validate()?;
    let clouds = pad_clouds(clouds, config.n_out, config.seed)?;
    let ae = train_autoencoder(&clouds, config)?;
    let gfvs = extract_gfvs(&ae.encoder, &clouds, ids)?;
    let gan = train_gan(&gfvs, config)?;
    let bundle = ModelBundle {
        descriptor: config.descriptor(),
        encoder: ae.encoder,
        decoder: ae.decoder,
        generator: gan.generator,
        discriminator: gan.discriminator,
        init_encoder: gan.init_encoder,
    };
    bundle.check_consistency()?;
    Ok(TrainedModels { bundle, ae_history: ae.history, gfvs, gan_history: gan.history })
}

/// `epoch<TAB>loss` lines.
pub fn format_ae_history(history: &[f64]) -> String {
    let mut out = String::from("# epoch\temd\n");
    for (i, v) in history.iter().enumerate() {
        writeln!(out, "{}\t{v:.9e}", i + 1).expect("writing to a String");
    }
    out
}

/// `epoch<TAB>J(D)<TAB>J(G)<TAB>J(IE)<TAB>round_trip` lines.
pub fn format_gan_history(history: &[GanEpoch]) -> String {
    let mut out = String::from("# epoch\tj_d\tj_g\tj_ie\tlatent_round_trip\n");
    for (i, r) in history.iter().enumerate() {
        writeln!(
            out,
            "{}\t{:.9e}\t{:.9e}\t{:.9e}\t{:.9e}",
            i + 1,
            r.critic,
            r.generator,
            r.init_encoder,
            r.latent_round_trip
        )
        .expect("writing to a String");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes_io::{generate_dataset, ShapeClass, SyntheticSpec};

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            n_out: 32,
            ae_epochs: 3,
            gan_epochs: 3,
            batch_size: 4,
            seed: 5,
            ..TrainConfig::default()
        }
    }

    fn clouds(n: usize, count: usize) -> Vec<PointCloud> {
        generate_dataset(&SyntheticSpec::new(ShapeClass::Box, n, count, 1)).unwrap().into_iter().map(|c| c.cloud).collect()
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { ae_epochs: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { weight_clip: 0.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { gan_learning_rate: -1.0, ..TrainConfig::default() }.validate().is_err());
    }

    #[test]
    fn autoencoder_input_errors() {
        let cfg = tiny_config();
        assert!(matches!(train_autoencoder(&[], &cfg), Err(TrainError::EmptySet)));
        let wrong = clouds(16, 2);
        assert!(matches!(train_autoencoder(&wrong, &cfg), Err(TrainError::CloudSize { index: 0, .. })));
    }

    #[test]
    fn overfits_a_single_cloud() {
        let cfg = TrainConfig { n_out: 64, ae_epochs: 300, batch_size: 4, ..TrainConfig::default() };
        let one = clouds(64, 1);
        let data = vec![one[0].clone(); 4];
        let out = train_autoencoder(&data, &cfg).unwrap();
        let first = out.history[0];
        let last = *out.history.last().unwrap();
        assert!(out.history.iter().all(|v| v.is_finite()));
        assert!(last < 0.1 * first, "first {first}, last {last}");
    }

    #[test]
    fn dae_training_runs_on_masked_inputs() {
        let mut cfg = tiny_config();
        cfg.dae_corruption = Some(CorruptionSpec::mask(0.5, 3));
        let data = clouds(32, 6);
        let out = train_autoencoder(&data, &cfg).unwrap();
        assert_eq!(out.history.len(), 3);
        let plain = train_autoencoder(&data, &tiny_config()).unwrap();
        assert_ne!(out.history, plain.history);
    }

    #[test]
    fn extraction_is_consistent() {
        let data = clouds(32, 5);
        let ids: Vec<String> = (0..5).map(|i| format!("c{i}")).collect();
        let bundle = tiny_config().initial_bundle().unwrap();
        let set = extract_gfvs(&bundle.encoder, &data, &ids).unwrap();
        assert_eq!(set.len(), 5);
        assert_eq!(extract_gfvs(&bundle.encoder, &data, &ids).unwrap(), set);
        for ((w, id), c) in set.entries.iter().zip(&data) {
            assert_eq!(w, &crate::nets::encode(&bundle.encoder, c).unwrap());
            assert!(id.starts_with('c'));
        }
        let dup = vec!["a".to_string(); 5];
        assert!(matches!(extract_gfvs(&bundle.encoder, &data, &dup), Err(TrainError::DuplicateId(_))));
    }

    #[test]
    fn critic_stays_clipped() {
        let data = clouds(32, 10);
        let ids: Vec<String> = (0..10).map(|i| format!("c{i}")).collect();
        let cfg = TrainConfig { gan_epochs: 5, ..tiny_config() };
        let bundle = cfg.initial_bundle().unwrap();
        let set = extract_gfvs(&bundle.encoder, &data, &ids).unwrap();
        let out = train_gan(&set, &cfg).unwrap();
        assert!(out.max_clipped_critic_parameter <= 0.01);
        assert!(out.discriminator.parameters().all(|p| p.data().iter().all(|v| v.abs() <= 0.01)));
        assert_eq!(out.history.len(), 5);
        let empty = GfvDataset { entries: vec![], provenance: String::new() };
        assert!(matches!(train_gan(&empty, &cfg), Err(TrainError::EmptySet)));
    }

    #[test]
    fn critic_objective_falls_on_separable_toy_data() {
        // Real vectors live on a 2-d subspace far from what an identity-like
        // generator emits for the fixed noise batch.
        let cfg = tiny_config();
        let init = cfg.initial_bundle().unwrap();
        let mut generator = init.generator.clone();
        for layer in &mut generator.layers {
            let (rows, cols) = (layer.weight.shape()[0], layer.weight.shape()[1]);
            let w = layer.weight.data_mut();
            for r in 0..rows {
                for c in 0..cols {
                    w[r * cols + c] = if r == c { 1.0 } else { 0.0 };
                }
            }
        }
        let mut trainer =
            GanTrainer::new(generator, init.discriminator.clone(), init.init_encoder.clone(), CriticOutput::Raw, 1e-4, 0.01);
        let mut real = vec![0.0f32; 16 * GFV_DIM];
        for r in 0..16 {
            real[r * GFV_DIM] = 3.0 + r as f32 * 0.1;
            real[r * GFV_DIM + 1] = -2.0;
        }
        let real = Tensor::new(vec![16, GFV_DIM], real).unwrap();
        let noise = standard_normal(&mut seeds::rng(1, "toy"), 16, LATENT_DIM);
        let values: Vec<f64> = (0..11).map(|_| trainer.critic_step(&real, &noise).unwrap()).collect();
        assert!(values[10] < values[0], "{values:?}");
    }

    #[test]
    fn algorithm1_bundle_is_complete_and_deterministic() {
        let data = clouds(32, 6);
        let ids: Vec<String> = (0..6).map(|i| format!("c{i}")).collect();
        let cfg = tiny_config();
        let a = run_algorithm1(&data, &ids, &cfg).unwrap();
        a.bundle.check_consistency().unwrap();
        let b = run_algorithm1(&data, &ids, &cfg).unwrap();
        assert_eq!(a.bundle.fingerprint(), b.bundle.fingerprint());
        assert_eq!(a.ae_history.len(), 3);
        assert_eq!(a.gan_history.len(), 3);
    }
}
