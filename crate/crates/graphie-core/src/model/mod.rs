//! Model configuration, parameter initialization and inference.
//!
//! Three architectures share one parameter layout convention:
//!
//! * `graphie-word`: encoder -> word-level GCN -> decoder;
//! * `graphie-sentence`: encoder -> sentence-level GCN whose output
//!   seeds the decoder's initial states;
//! * `seqie`: encoder -> decoder (two stacked BiLSTM passes), the
//!   sequential baseline.
//!
//! All of them finish with an emission projection and a linear-chain
//! CRF.

mod charcnn;
mod crf;
mod forward;
mod gcn;
mod lstm;

pub use crf::{crf_nll, viterbi};
pub use forward::{forward_task, predict_document, RunMode, TaskForward};
pub use gcn::{gcn_forward, gcn_layer, GcnLayerParams};

use serde::{Deserialize, Serialize};

use crate::corpus::{TagScheme, Vocabularies};
use crate::error::{Error, Result};
use crate::params::{glorot_matrix, uniform_matrix, ParameterStore};
use crate::rng::Stream;
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    WordGraph,
    Ego,
    Layout,
}

impl TaskKind {
    pub fn edge_type_names(self) -> &'static [&'static str] {
        match self {
            TaskKind::WordGraph => crate::graph::edge_types::WORD,
            TaskKind::Ego => crate::graph::edge_types::EGO,
            TaskKind::Layout => crate::graph::edge_types::LAYOUT,
        }
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TaskKind::WordGraph => write!(f, "word-graph"),
            TaskKind::Ego => write!(f, "ego"),
            TaskKind::Layout => write!(f, "layout"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    GraphieWord,
    GraphieSentence,
    Seqie,
}

impl Architecture {
    /// The graph-backed architecture appropriate for a task.
    pub fn graphie_for(task: TaskKind) -> Architecture {
        match task {
            TaskKind::WordGraph => Architecture::GraphieWord,
            TaskKind::Ego | TaskKind::Layout => Architecture::GraphieSentence,
        }
    }

    pub fn uses_graph(self) -> bool {
        !matches!(self, Architecture::Seqie)
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Architecture::GraphieWord => write!(f, "graphie-word"),
            Architecture::GraphieSentence => write!(f, "graphie-sentence"),
            Architecture::Seqie => write!(f, "seqie"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    None,
    /// Train and evaluate against a random graph with the same
    /// per-type edge counts.
    RandomGraph,
    /// Replace the GCN by the plain average of each node and its
    /// neighbors.
    FeatureAugmentation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub task: TaskKind,
    pub architecture: Architecture,
    pub ablation: Ablation,
    pub word_dim: usize,
    pub char_emb_dim: usize,
    /// Filters per width; the char feature is `char_filters *
    /// char_widths.len()` wide.
    pub char_filters: usize,
    pub char_widths: Vec<usize>,
    /// BiLSTM and GCN width `d`; each LSTM direction is `d/2`.
    pub hidden_dim: usize,
    pub gcn_layers: usize,
    pub dropout_p: f64,
    /// Length of the learned bounding-box encoding (layout task).
    pub positional_dim: usize,
    pub use_char_cnn: bool,
    /// Test hook: identity instead of relu inside GCN layers.
    #[serde(default)]
    pub gcn_identity_activation: bool,
}

impl ModelConfig {
    /// Paper-shaped defaults for a task: 100-dim word embeddings
    /// (64 for layout), 64-dim char embeddings with 64 filters of
    /// widths 2-4, dropout 0.1, two GCN layers for the word task and
    /// one otherwise, positional encoding of length 32.
    pub fn for_task(task: TaskKind) -> ModelConfig {
        ModelConfig {
            task,
            architecture: Architecture::graphie_for(task),
            ablation: Ablation::None,
            word_dim: if task == TaskKind::Layout { 64 } else { 100 },
            char_emb_dim: 64,
            char_filters: 64,
            char_widths: vec![2, 3, 4],
            hidden_dim: 64,
            gcn_layers: if task == TaskKind::WordGraph { 2 } else { 1 },
            dropout_p: 0.1,
            positional_dim: 32,
            use_char_cnn: true,
            gcn_identity_activation: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.hidden_dim % 2 != 0 {
            return Err(Error::Config(format!(
                "hidden_dim must be positive and even, got {}",
                self.hidden_dim
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!(
                "dropout_p must be in [0, 1), got {}",
                self.dropout_p
            )));
        }
        if self.word_dim == 0 {
            return Err(Error::Config("word_dim must be positive".into()));
        }
        if self.use_char_cnn {
            if self.char_widths.is_empty() || self.char_emb_dim == 0 || self.char_filters == 0 {
                return Err(Error::Config(
                    "char CNN enabled but char dimensions are empty".into(),
                ));
            }
            if self.char_widths.iter().any(|&w| w == 0) {
                return Err(Error::Config("zero char filter width".into()));
            }
        }
        match self.architecture {
            Architecture::GraphieWord if self.task != TaskKind::WordGraph => {
                return Err(Error::Config(format!(
                    "graphie-word requires the word-graph task, got {}",
                    self.task
                )));
            }
            Architecture::GraphieSentence if self.task == TaskKind::WordGraph => {
                return Err(Error::Config(
                    "graphie-sentence requires a sentence-level task (ego or layout)".into(),
                ));
            }
            _ => {}
        }
        if self.ablation != Ablation::None && !self.architecture.uses_graph() {
            return Err(Error::Config(format!(
                "ablation modes do not apply to {}",
                self.architecture
            )));
        }
        if self.task == TaskKind::Layout
            && self.uses_positional_encoding()
            && self.positional_dim == 0
        {
            return Err(Error::Config("positional_dim must be positive".into()));
        }
        Ok(())
    }

    pub fn char_feature_dim(&self) -> usize {
        if self.use_char_cnn {
            self.char_filters * self.char_widths.len()
        } else {
            0
        }
    }

    pub fn encoder_input_dim(&self) -> usize {
        self.word_dim + self.char_feature_dim()
    }

    /// Positional encoding applies to the layout task's graph wiring.
    /// The feature-augmentation ablation averages raw node vectors and
    /// needs them to stay `hidden_dim` wide, so it skips the encoding.
    pub fn uses_positional_encoding(&self) -> bool {
        self.task == TaskKind::Layout
            && self.architecture == Architecture::GraphieSentence
            && self.ablation != Ablation::FeatureAugmentation
            && self.positional_dim > 0
    }

    /// Width of the vectors entering the graph module.
    pub fn node_input_dim(&self) -> usize {
        match self.architecture {
            Architecture::GraphieWord => self.hidden_dim,
            Architecture::GraphieSentence => {
                self.hidden_dim
                    + if self.uses_positional_encoding() {
                        self.positional_dim
                    } else {
                        0
                    }
            }
            Architecture::Seqie => self.hidden_dim,
        }
    }

    fn uses_gcn(&self) -> bool {
        self.architecture.uses_graph()
            && self.ablation != Ablation::FeatureAugmentation
            && self.gcn_layers > 0
    }
}

pub(crate) const GATES: [&str; 4] = ["i", "f", "g", "o"];

fn register_lstm<F: Scalar>(
    params: &mut ParameterStore<F>,
    prefix: &str,
    input_dim: usize,
    hidden: usize,
    rng: &mut Stream,
) -> Result<()> {
    for gate in GATES {
        params.register(
            &format!("{prefix}.w_{gate}"),
            glorot_matrix(hidden, input_dim, rng),
        )?;
        params.register(
            &format!("{prefix}.u_{gate}"),
            glorot_matrix(hidden, hidden, rng),
        )?;
        // forget gate bias 1.0, others zero
        let bias = if gate == "f" {
            Tensor::full(vec![hidden], F::one())
        } else {
            Tensor::zeros(vec![hidden])
        };
        params.register(&format!("{prefix}.b_{gate}"), bias)?;
    }
    Ok(())
}

/// Architecture hyperparameters, tag scheme, vocabularies and the full
/// trained parameter set.
pub struct Model<F: Scalar> {
    pub config: ModelConfig,
    pub scheme: TagScheme,
    pub vocabs: Vocabularies,
    pub params: ParameterStore<F>,
}

impl<F: Scalar> Model<F> {
    /// Initializes all parameters from the init stream. Weight
    /// matrices are Glorot-uniform, biases zero (LSTM forget gate 1),
    /// embedding tables uniform +-0.05 unless `word_init` supplies a
    /// pretrained table.
    pub fn init(
        config: ModelConfig,
        scheme: TagScheme,
        vocabs: Vocabularies,
        rng: &mut Stream,
        word_init: Option<Tensor<F>>,
    ) -> Result<Model<F>> {
        config.validate()?;
        let d = config.hidden_dim;
        let h2 = d / 2;
        let tags = scheme.tag_count();
        let mut params = ParameterStore::new();

        let word_table = match word_init {
            Some(t) => {
                if t.shape() != [vocabs.word_count(), config.word_dim] {
                    return Err(Error::Config(format!(
                        "pretrained embedding shape {:?} does not match vocab {} x word_dim {}",
                        t.shape(),
                        vocabs.word_count(),
                        config.word_dim
                    )));
                }
                t
            }
            None => uniform_matrix(vocabs.word_count(), config.word_dim, 0.05, rng),
        };
        params.register("embed.word", word_table)?;

        if config.use_char_cnn {
            params.register(
                "embed.char",
                uniform_matrix(vocabs.char_count(), config.char_emb_dim, 0.05, rng),
            )?;
            for &w in &config.char_widths {
                params.register(
                    &format!("charcnn.w{w}"),
                    glorot_matrix(config.char_filters, w * config.char_emb_dim, rng),
                )?;
                params.register(
                    &format!("charcnn.b{w}"),
                    Tensor::zeros(vec![config.char_filters]),
                )?;
            }
        }

        register_lstm(&mut params, "enc.fwd", config.encoder_input_dim(), h2, rng)?;
        register_lstm(&mut params, "enc.bwd", config.encoder_input_dim(), h2, rng)?;

        if config.uses_positional_encoding() {
            params.register(
                "posenc.w",
                glorot_matrix(config.positional_dim, 4, rng),
            )?;
            params.register("posenc.b", Tensor::zeros(vec![config.positional_dim]))?;
        }

        if config.uses_gcn() {
            let types = config.task.edge_type_names().len();
            for l in 0..config.gcn_layers {
                let in_dim = if l == 0 { config.node_input_dim() } else { d };
                params.register(&format!("gcn.{l}.w_v"), glorot_matrix(in_dim, d, rng))?;
                for t in 0..types {
                    params.register(&format!("gcn.{l}.e{t}"), glorot_matrix(in_dim, d, rng))?;
                }
                params.register(&format!("gcn.{l}.b"), Tensor::zeros(vec![d]))?;
            }
        }

        register_lstm(&mut params, "dec.fwd", d, h2, rng)?;
        register_lstm(&mut params, "dec.bwd", d, h2, rng)?;

        params.register("emit.w", glorot_matrix(tags, d, rng))?;
        params.register("emit.b", Tensor::zeros(vec![tags]))?;
        params.register(
            "crf.trans",
            glorot_matrix(tags + 2, tags + 2, rng),
        )?;

        Ok(Model {
            config,
            scheme,
            vocabs,
            params,
        })
    }

    /// Precision conversion for verification.
    pub fn cast<G: Scalar>(&self) -> Model<G> {
        Model {
            config: self.config.clone(),
            scheme: self.scheme.clone(),
            vocabs: self.vocabs.clone(),
            params: self.params.cast::<G>(),
        }
    }
}
