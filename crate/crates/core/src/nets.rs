//! The five networks: point encoder E, decoder H, generator G, critic D and
//! initializing encoder IE.
//!
//! Every network is a stack of dense layers. The encoder applies its stack to
//! each point independently and max-pools over points, which makes its output
//! independent of point order and blind to replicated points.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::autodiff::{sigmoid, AutodiffError, Graph, Tensor, Var};
use crate::seeds;
use crate::transport::{CloudError, PointCloud};

/// Width of the encoder bottleneck.
pub const GFV_DIM: usize = 128;
/// Width of the generator input.
pub const LATENT_DIM: usize = 128;
/// Bundle container format understood by this build.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error("expected a vector of length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("inconsistent architecture: {0}")]
    Descriptor(String),
    #[error("clouds in one batch must share a size ({0} vs {1})")]
    RaggedBatch(usize, usize),
}

macro_rules! fixed_vector {
    ($(#[$doc:meta])* $name:ident, $dim:expr, $what:literal) => {
        $(#[$doc])*
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name(Vec<f32>);

        impl $name {
            pub fn new(values: Vec<f32>) -> Result<Self, NetError> {
                if values.len() != $dim {
                    return Err(NetError::Dimension { expected: $dim, got: values.len() });
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(NetError::NonFinite($what));
                }
                Ok(Self(values))
            }

            pub fn as_slice(&self) -> &[f32] {
                &self.0
            }

            pub fn into_vec(self) -> Vec<f32> {
                self.0
            }

            /// `[1 × dim]` tensor.
            pub fn to_row(&self) -> Tensor {
                Tensor::row(&self.0)
            }
        }
    };
}

fixed_vector!(
    /// Global feature vector: the encoder's max-pooled bottleneck code.
    Gfv,
    GFV_DIM,
    "global feature vector"
);
fixed_vector!(
    /// Generator input.
    LatentVec,
    LATENT_DIM,
    "latent vector"
);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

/// Shape of one dense stack: input width, per-layer output widths and activations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input: usize,
    pub widths: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl MlpSpec {
    fn new(input: usize, widths: &[usize], last: Activation) -> Self {
        let mut activations = vec![Activation::Relu; widths.len()];
        if let Some(a) = activations.last_mut() {
            *a = last;
        }
        Self { input, widths: widths.to_vec(), activations }
    }

    pub fn output(&self) -> usize {
        self.widths.last().copied().unwrap_or(self.input)
    }

    pub fn parameter_count(&self) -> usize {
        let mut fan_in = self.input;
        let mut total = 0;
        for &w in &self.widths {
            total += fan_in * w + w;
            fan_in = w;
        }
        total
    }
}

/// What the critic hands to the losses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticOutput {
    /// Unbounded score, as Wasserstein-style losses expect.
    #[default]
    Raw,
    /// Score squashed through a sigmoid.
    Sigmoid,
}

/// Architecture of all five networks plus the decoded cloud size.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchDescriptor {
    pub format_version: u32,
    pub n_out: usize,
    pub critic_output: CriticOutput,
    pub encoder: MlpSpec,
    pub decoder: MlpSpec,
    pub generator: MlpSpec,
    pub discriminator: MlpSpec,
    pub init_encoder: MlpSpec,
}

impl ArchDescriptor {
    pub fn new(n_out: usize) -> Self {
        use Activation::*;
        Self {
            format_version: FORMAT_VERSION,
            n_out,
            critic_output: CriticOutput::Raw,
            encoder: MlpSpec::new(3, &[64, 128, 128, 256, GFV_DIM], Relu),
            decoder: MlpSpec::new(GFV_DIM, &[256, 256, 3 * n_out], Identity),
            generator: MlpSpec::new(LATENT_DIM, &[128, 128, GFV_DIM], Identity),
            discriminator: MlpSpec::new(GFV_DIM, &[256, 512, 1], Identity),
            init_encoder: MlpSpec::new(GFV_DIM, &[128, 128, LATENT_DIM], Identity),
        }
    }

    pub fn spec(&self, kind: NetKind) -> &MlpSpec {
        match kind {
            NetKind::Encoder => &self.encoder,
            NetKind::Decoder => &self.decoder,
            NetKind::Generator => &self.generator,
            NetKind::Discriminator => &self.discriminator,
            NetKind::InitEncoder => &self.init_encoder,
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: String| Err(NetError::Descriptor(m));
        if self.format_version != FORMAT_VERSION {
            return bad(format!("format version {}", self.format_version));
        }
        if self.n_out == 0 {
            return bad("n_out must be positive".into());
        }
        for kind in NetKind::ALL {
            let s = self.spec(kind);
            if s.widths.is_empty() || s.widths.len() != s.activations.len() || s.widths.contains(&0) {
                return bad(format!("{} layer list is malformed", kind.name()));
            }
        }
        let chain = [
            (NetKind::Encoder, 3, GFV_DIM),
            (NetKind::Decoder, GFV_DIM, 3 * self.n_out),
            (NetKind::Generator, LATENT_DIM, GFV_DIM),
            (NetKind::Discriminator, GFV_DIM, 1),
            (NetKind::InitEncoder, GFV_DIM, LATENT_DIM),
        ];
        for (kind, input, output) in chain {
            let s = self.spec(kind);
            if s.input != input || s.output() != output {
                return bad(format!(
                    "{} maps {}→{}, expected {input}→{output}",
                    kind.name(),
                    s.input,
                    s.output()
                ));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("descriptor serializes")
    }

    pub fn from_text(text: &str) -> Result<Self, NetError> {
        toml::from_str(text).map_err(|e| NetError::Descriptor(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NetKind {
    Encoder,
    Decoder,
    Generator,
    Discriminator,
    InitEncoder,
}

impl NetKind {
    pub const ALL: [NetKind; 5] =
        [NetKind::Encoder, NetKind::Decoder, NetKind::Generator, NetKind::Discriminator, NetKind::InitEncoder];

    pub fn name(self) -> &'static str {
        match self {
            NetKind::Encoder => "encoder",
            NetKind::Decoder => "decoder",
            NetKind::Generator => "generator",
            NetKind::Discriminator => "discriminator",
            NetKind::InitEncoder => "init_encoder",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `[in × out]`
    pub weight: Tensor,
    /// `[out]`
    pub bias: Tensor,
    pub activation: Activation,
}

/// A stack of dense layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// He-uniform weights for ReLU layers, Xavier-uniform for linear outputs, zero biases.
    pub fn init(spec: &MlpSpec, rng: &mut ChaCha8Rng) -> Self {
        let mut fan_in = spec.input;
        let mut layers = Vec::with_capacity(spec.widths.len());
        for (&fan_out, &activation) in spec.widths.iter().zip(&spec.activations) {
            let bound = match activation {
                Activation::Relu => (6.0 / fan_in as f64).sqrt(),
                Activation::Identity => (6.0 / (fan_in + fan_out) as f64).sqrt(),
            } as f32;
            let weights = (0..fan_in * fan_out).map(|_| rng.gen_range(-bound..bound)).collect();
            layers.push(Dense {
                weight: Tensor::new(vec![fan_in, fan_out], weights).expect("non-empty layer"),
                bias: Tensor::zeros(&[fan_out]),
                activation,
            });
            fan_in = fan_out;
        }
        Self { layers }
    }

    pub fn spec(&self) -> MlpSpec {
        MlpSpec {
            input: self.layers.first().map_or(0, |l| l.weight.shape()[0]),
            widths: self.layers.iter().map(|l| l.weight.shape()[1]).collect(),
            activations: self.layers.iter().map(|l| l.activation).collect(),
        }
    }

    /// Weight, bias, weight, bias, ... in layer order.
    pub fn parameters(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().map(Tensor::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.parameters().all(Tensor::all_finite)
    }

    /// Puts the parameters into `graph`, as variables when `trainable`.
    pub fn bind(&self, graph: &mut Graph, trainable: bool) -> BoundMlp {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let (w, b) = if trainable {
                    (graph.variable(l.weight.clone()), graph.variable(l.bias.clone()))
                } else {
                    (graph.constant(l.weight.clone()), graph.constant(l.bias.clone()))
                };
                (w, b, l.activation)
            })
            .collect();
        BoundMlp { layers }
    }

    /// Plain forward pass on a `[B × in]` batch.
    pub fn apply(&self, input: Tensor) -> Result<Tensor, NetError> {
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false);
        let x = g.constant(input);
        let y = bound.forward(&mut g, x)?;
        Ok(g.value(y).clone())
    }
}

/// An [`Mlp`] whose parameters live in a particular graph.
#[derive(Clone, Debug)]
pub struct BoundMlp {
    layers: Vec<(Var, Var, Activation)>,
}

impl BoundMlp {
    pub fn forward(&self, graph: &mut Graph, input: Var) -> Result<Var, NetError> {
        let mut x = input;
        for &(w, b, activation) in &self.layers {
            x = graph.linear(x, w, b)?;
            if activation == Activation::Relu {
                x = graph.relu(x);
            }
        }
        Ok(x)
    }

    /// Gradients in [`Mlp::parameters`] order.
    pub fn grads(&self, graph: &Graph) -> Vec<Tensor> {
        self.layers.iter().flat_map(|&(w, b, _)| [graph.grad(w), graph.grad(b)]).collect()
    }
}

/// Stacks equal-size clouds into one `[(B·N) × 3]` tensor.
pub fn stack_clouds(clouds: &[&PointCloud]) -> Result<Tensor, NetError> {
    let n = clouds.first().map_or(0, |c| c.len());
    let mut data = Vec::with_capacity(clouds.len() * n * 3);
    for c in clouds {
        if c.len() != n {
            return Err(NetError::RaggedBatch(n, c.len()));
        }
        data.extend(c.to_flat_f32());
    }
    Ok(Tensor::new(vec![clouds.len() * n, 3], data)?)
}

/// Per-point stack then max pool over each of `groups` equal blocks of rows.
pub fn encoder_forward(graph: &mut Graph, encoder: &BoundMlp, points: Var, groups: usize) -> Result<Var, NetError> {
    let features = encoder.forward(graph, points)?;
    Ok(graph.max_pool_groups(features, groups)?)
}

/// Global feature vector of one cloud.
pub fn encode(encoder: &Mlp, cloud: &PointCloud) -> Result<Gfv, NetError> {
    Ok(encode_batch(encoder, &[cloud])?.pop().expect("one cloud in"))
}

/// Global feature vectors of equal-size clouds.
pub fn encode_batch(encoder: &Mlp, clouds: &[&PointCloud]) -> Result<Vec<Gfv>, NetError> {
    if clouds.is_empty() {
        return Ok(Vec::new());
    }
    let mut g = Graph::new();
    let bound = encoder.bind(&mut g, false);
    let x = g.constant(stack_clouds(clouds)?);
    let pooled = encoder_forward(&mut g, &bound, x, clouds.len())?;
    g.value(pooled).data().chunks_exact(GFV_DIM).map(|row| Gfv::new(row.to_vec())).collect()
}

/// Decoded cloud of `decoder_output / 3` points.
pub fn decode(decoder: &Mlp, w: &Gfv) -> Result<PointCloud, NetError> {
    let out = decoder.apply(w.to_row())?;
    Ok(PointCloud::from_flat(out.data())?)
}

pub fn generate(generator: &Mlp, z: &LatentVec) -> Result<Gfv, NetError> {
    Gfv::new(generator.apply(z.to_row())?.into_data())
}

pub fn init_encode(init_encoder: &Mlp, w: &Gfv) -> Result<LatentVec, NetError> {
    LatentVec::new(init_encoder.apply(w.to_row())?.into_data())
}

/// Critic output for one feature vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticScore {
    /// Pre-sigmoid score.
    pub raw: f32,
    /// `sigmoid(raw)`, kept for diagnostics.
    pub probability: f32,
}

pub fn discriminate(discriminator: &Mlp, w: &Gfv) -> Result<CriticScore, NetError> {
    let raw = discriminator.apply(w.to_row())?.item();
    Ok(CriticScore { raw, probability: sigmoid(raw) })
}

/// Critic value used by the losses: raw score, or its sigmoid in sigmoid mode.
pub fn critic_forward(graph: &mut Graph, critic: &BoundMlp, input: Var, mode: CriticOutput) -> Result<Var, NetError> {
    let raw = critic.forward(graph, input)?;
    Ok(match mode {
        CriticOutput::Raw => raw,
        CriticOutput::Sigmoid => graph.sigmoid(raw),
    })
}

/// Parameters of all five networks with their architecture.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub descriptor: ArchDescriptor,
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub generator: Mlp,
    pub discriminator: Mlp,
    pub init_encoder: Mlp,
}

impl ModelBundle {
    /// Fresh parameters; each network draws from its own seed sub-stream.
    pub fn init(descriptor: ArchDescriptor, seed: u64) -> Result<Self, NetError> {
        descriptor.validate()?;
        let make = |kind: NetKind| {
            let mut rng = seeds::rng(seed, kind.name());
            Mlp::init(descriptor.spec(kind), &mut rng)
        };
        Ok(Self {
            encoder: make(NetKind::Encoder),
            decoder: make(NetKind::Decoder),
            generator: make(NetKind::Generator),
            discriminator: make(NetKind::Discriminator),
            init_encoder: make(NetKind::InitEncoder),
            descriptor,
        })
    }

    pub fn network(&self, kind: NetKind) -> &Mlp {
        match kind {
            NetKind::Encoder => &self.encoder,
            NetKind::Decoder => &self.decoder,
            NetKind::Generator => &self.generator,
            NetKind::Discriminator => &self.discriminator,
            NetKind::InitEncoder => &self.init_encoder,
        }
    }

    pub fn network_mut(&mut self, kind: NetKind) -> &mut Mlp {
        match kind {
            NetKind::Encoder => &mut self.encoder,
            NetKind::Decoder => &mut self.decoder,
            NetKind::Generator => &mut self.generator,
            NetKind::Discriminator => &mut self.discriminator,
            NetKind::InitEncoder => &mut self.init_encoder,
        }
    }

    /// Checks that every network's tensors have the shapes the descriptor declares.
    pub fn check_consistency(&self) -> Result<(), NetError> {
        self.descriptor.validate()?;
        for kind in NetKind::ALL {
            let declared = self.descriptor.spec(kind);
            let actual = self.network(kind).spec();
            if &actual != declared {
                return Err(NetError::Descriptor(format!(
                    "{} tensors describe {:?} but the descriptor says {:?}",
                    kind.name(),
                    actual,
                    declared
                )));
            }
        }
        Ok(())
    }

    /// `("encoder.0.weight", tensor)`, ... in a fixed canonical order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for kind in NetKind::ALL {
            for (i, layer) in self.network(kind).layers.iter().enumerate() {
                out.push((format!("{}.{i}.weight", kind.name()), &layer.weight));
                out.push((format!("{}.{i}.bias", kind.name()), &layer.bias));
            }
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        NetKind::ALL.iter().map(|&k| self.network(k).parameter_count()).sum()
    }

    /// SHA-256 over the descriptor and every parameter bit pattern.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.descriptor.to_text().as_bytes());
        for (name, t) in self.named_tensors() {
            h.update(name.as_bytes());
            for v in t.data() {
                h.update(v.to_le_bytes());
            }
        }
        h.finalize().into()
    }

    pub fn all_finite(&self) -> bool {
        NetKind::ALL.iter().all(|&k| self.network(k).all_finite())
    }
}
