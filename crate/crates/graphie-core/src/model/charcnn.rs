//! Character-level convolutional word features.
//!
//! Per filter width w: valid convolutions over the character embedding
//! rows, tanh, max over positions; outputs concatenated in width
//! order. Words shorter than the widest filter are padded with the
//! PAD char.

use crate::corpus::PAD_ID;
use crate::error::Result;
use crate::model::ModelConfig;
use crate::params::ParameterStore;
use crate::tape::{NodeId, Tape};
use crate::tensor::Scalar;

pub struct CharCnn {
    /// (filters, w * char_emb_dim) matrix and (filters) bias per width.
    banks: Vec<(usize, NodeId, NodeId)>,
    char_emb_dim: usize,
}

impl CharCnn {
    pub fn bind<F: Scalar>(
        tape: &mut Tape<F>,
        store: &ParameterStore<F>,
        cfg: &ModelConfig,
    ) -> Result<CharCnn> {
        let mut banks = Vec::with_capacity(cfg.char_widths.len());
        for &w in &cfg.char_widths {
            let weights = tape.param(store, &format!("charcnn.w{w}"))?;
            let bias = tape.param(store, &format!("charcnn.b{w}"))?;
            banks.push((w, weights, bias));
        }
        Ok(CharCnn {
            banks,
            char_emb_dim: cfg.char_emb_dim,
        })
    }

    /// Feature vector for one token's character ids.
    pub fn features<F: Scalar>(
        &self,
        tape: &mut Tape<F>,
        char_table: NodeId,
        chars: &[usize],
    ) -> Result<NodeId> {
        let max_w = self.banks.iter().map(|&(w, _, _)| w).max().unwrap_or(1);
        let mut ids = chars.to_vec();
        while ids.len() < max_w {
            ids.push(PAD_ID);
        }
        let emb = tape.embedding(char_table, &ids)?; // (k_c, ce)
        let ce = self.char_emb_dim;
        let k_c = ids.len();

        let mut pooled = Vec::with_capacity(self.banks.len());
        for &(w, weights, bias) in &self.banks {
            let windows = k_c - w + 1;
            // im2col: window p = rows p..p+w flattened
            let mut idx = Vec::with_capacity(windows * w * ce);
            for p in 0..windows {
                for q in 0..w {
                    for j in 0..ce {
                        idx.push((p + q) * ce + j);
                    }
                }
            }
            let cols = tape.gather(emb, idx, vec![windows, w * ce])?;
            let conv = tape.matmul_nt(cols, weights)?; // (windows, filters)
            let with_bias = tape.add_row_broadcast(conv, bias)?;
            let act = tape.tanh(with_bias)?;
            pooled.push(tape.max_over_time(act)?);
        }
        tape.concat(&pooled, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{TagScheme, Vocabularies};
    use crate::model::{Ablation, Architecture, Model, TaskKind};
    use crate::rng::{Purpose, Stream};
    use crate::tensor::Tensor;

    fn cfg() -> ModelConfig {
        ModelConfig {
            task: TaskKind::WordGraph,
            architecture: Architecture::GraphieWord,
            ablation: Ablation::None,
            word_dim: 2,
            char_emb_dim: 3,
            char_filters: 2,
            char_widths: vec![2, 3, 4],
            hidden_dim: 2,
            gcn_layers: 0,
            dropout_p: 0.0,
            positional_dim: 0,
            use_char_cnn: true,
            gcn_identity_activation: false,
        }
    }

    fn model() -> Model<f64> {
        let scheme = TagScheme::from_labels(vec!["X".into()]).unwrap();
        let vocabs = Vocabularies::build(["abc"].into_iter());
        let mut rng = Stream::new(1, Purpose::Init);
        Model::init(cfg(), scheme, vocabs, &mut rng, None).unwrap()
    }

    #[test]
    fn zero_filters_give_zero_features() {
        let mut m = model();
        for w in [2usize, 3, 4] {
            let zeroed = Tensor::zeros(m.params.get(&format!("charcnn.w{w}")).unwrap().shape().to_vec());
            *m.params.get_mut(&format!("charcnn.w{w}")).unwrap() = zeroed;
        }
        let mut tape = Tape::new();
        let table = tape.param(&m.params, "embed.char").unwrap();
        let cnn = CharCnn::bind(&mut tape, &m.params, &m.config).unwrap();
        let f = cnn.features(&mut tape, table, &[2, 3, 4]).unwrap();
        assert_eq!(tape.value(f).data(), &[0.0; 6]);
    }

    #[test]
    fn one_char_word_is_padded_not_rejected() {
        let m = model();
        let mut tape = Tape::new();
        let table = tape.param(&m.params, "embed.char").unwrap();
        let cnn = CharCnn::bind(&mut tape, &m.params, &m.config).unwrap();
        let f = cnn.features(&mut tape, table, &[2]).unwrap();
        assert_eq!(tape.value(f).numel(), 6);
    }

    #[test]
    fn width_two_bank_matches_hand_convolution() {
        // 3-char word, one width-2 filter bank with hand-set weights.
        let mut cfg = cfg();
        cfg.char_widths = vec![2];
        cfg.char_filters = 1;
        let scheme = TagScheme::from_labels(vec!["X".into()]).unwrap();
        let vocabs = Vocabularies::build(["abc"].into_iter());
        let mut rng = Stream::new(1, Purpose::Init);
        let mut m: Model<f64> = Model::init(cfg, scheme, vocabs, &mut rng, None).unwrap();

        let table = vec![
            0.0, 0.0, 0.0, // pad
            0.0, 0.0, 0.0, // unk
            0.1, 0.2, 0.3, // 'a'
            -0.4, 0.5, 0.6, // 'b'
            0.7, -0.8, 0.9, // 'c'
        ];
        *m.params.get_mut("embed.char").unwrap() = Tensor::matrix(5, 3, table.clone()).unwrap();
        let filter = vec![1.0, -1.0, 0.5, 0.25, 2.0, -0.75];
        *m.params.get_mut("charcnn.w2").unwrap() = Tensor::matrix(1, 6, filter.clone()).unwrap();
        *m.params.get_mut("charcnn.b2").unwrap() = Tensor::vector(vec![0.05]).unwrap();

        let mut tape = Tape::new();
        let tb = tape.param(&m.params, "embed.char").unwrap();
        let cnn = CharCnn::bind(&mut tape, &m.params, &m.config).unwrap();
        let f = cnn.features(&mut tape, tb, &[2, 3, 4]).unwrap();

        // hand oracle: windows (a,b) and (b,c)
        let win = |i: usize, j: usize| -> f64 {
            let mut acc = 0.05;
            for k in 0..3 {
                acc += filter[k] * table[i * 3 + k];
            }
            for k in 0..3 {
                acc += filter[3 + k] * table[j * 3 + k];
            }
            acc.tanh()
        };
        let expected = win(2, 3).max(win(3, 4));
        let got = tape.value(f).data()[0];
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }
}
