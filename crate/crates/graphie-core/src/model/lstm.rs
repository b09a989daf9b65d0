//! LSTM cell and bidirectional pass on the tape.
//!
//! Standard gates (input, forget, output) with tanh candidate and tanh
//! output squashing:
//!
//! ```text
//! i = sig(Wi x + Ui h + bi)      f = sig(Wf x + Uf h + bf)
//! g = tanh(Wg x + Ug h + bg)     o = sig(Wo x + Uo h + bo)
//! c' = f*c + i*g                 h' = o * tanh(c')
//! ```

use crate::error::Result;
use crate::params::ParameterStore;
use crate::tape::{NodeId, Tape};
use crate::tensor::{Scalar, Tensor};

pub struct LstmGates {
    w: [NodeId; 4],
    u: [NodeId; 4],
    b: [NodeId; 4],
    pub hidden: usize,
}

impl LstmGates {
    /// Binds `prefix.{w,u,b}_{i,f,g,o}` parameter leaves on the tape.
    pub fn bind<F: Scalar>(
        tape: &mut Tape<F>,
        store: &ParameterStore<F>,
        prefix: &str,
    ) -> Result<LstmGates> {
        let mut w = [NodeId::default(); 4];
        let mut u = [NodeId::default(); 4];
        let mut b = [NodeId::default(); 4];
        for (k, gate) in super::GATES.iter().enumerate() {
            w[k] = tape.param(store, &format!("{prefix}.w_{gate}"))?;
            u[k] = tape.param(store, &format!("{prefix}.u_{gate}"))?;
            b[k] = tape.param(store, &format!("{prefix}.b_{gate}"))?;
        }
        let hidden = tape.value(b[0]).numel();
        Ok(LstmGates { w, u, b, hidden })
    }

    fn pre<F: Scalar>(
        &self,
        tape: &mut Tape<F>,
        k: usize,
        x: NodeId,
        h: NodeId,
    ) -> Result<NodeId> {
        let wx = tape.matmul(self.w[k], x)?;
        let uh = tape.matmul(self.u[k], h)?;
        let s = tape.add(wx, uh)?;
        tape.add(s, self.b[k])
    }

    pub fn step<F: Scalar>(
        &self,
        tape: &mut Tape<F>,
        x: NodeId,
        h: NodeId,
        c: NodeId,
    ) -> Result<(NodeId, NodeId)> {
        let pi = self.pre(tape, 0, x, h)?;
        let i = tape.sigmoid(pi)?;
        let pf = self.pre(tape, 1, x, h)?;
        let f = tape.sigmoid(pf)?;
        let pg = self.pre(tape, 2, x, h)?;
        let g = tape.tanh(pg)?;
        let po = self.pre(tape, 3, x, h)?;
        let o = tape.sigmoid(po)?;
        let fc = tape.mul(f, c)?;
        let ig = tape.mul(i, g)?;
        let c_next = tape.add(fc, ig)?;
        let tc = tape.tanh(c_next)?;
        let h_next = tape.mul(o, tc)?;
        Ok((h_next, c_next))
    }
}

/// One bidirectional pass over per-position input vectors. Initial
/// hidden states default to zero; cell states always start at zero.
/// Returns one concat(h_fwd, h_bwd) vector per position.
pub fn bilstm<F: Scalar>(
    tape: &mut Tape<F>,
    fwd: &LstmGates,
    bwd: &LstmGates,
    inputs: &[NodeId],
    init: Option<(NodeId, NodeId)>,
) -> Result<Vec<NodeId>> {
    let zero = Tensor::zeros(vec![fwd.hidden]);
    let (h0f, h0b) = match init {
        Some((a, b)) => (a, b),
        None => {
            let z1 = tape.constant(zero.clone());
            let z2 = tape.constant(zero.clone());
            (z1, z2)
        }
    };
    let c0f = tape.constant(zero.clone());
    let c0b = tape.constant(zero);

    let mut hs_f = Vec::with_capacity(inputs.len());
    let (mut h, mut c) = (h0f, c0f);
    for &x in inputs {
        let (hn, cn) = fwd.step(tape, x, h, c)?;
        hs_f.push(hn);
        h = hn;
        c = cn;
    }

    let mut hs_b = vec![NodeId::default(); inputs.len()];
    let (mut h, mut c) = (h0b, c0b);
    for (t, &x) in inputs.iter().enumerate().rev() {
        let (hn, cn) = bwd.step(tape, x, h, c)?;
        hs_b[t] = hn;
        h = hn;
        c = cn;
    }

    let mut out = Vec::with_capacity(inputs.len());
    for t in 0..inputs.len() {
        out.push(tape.concat(&[hs_f[t], hs_b[t]], 0)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_store(input_dim: usize, hidden: usize) -> ParameterStore<f64> {
        let mut s = ParameterStore::new();
        for gate in super::super::GATES {
            s.register(
                &format!("lstm.w_{gate}"),
                Tensor::zeros(vec![hidden, input_dim]),
            )
            .unwrap();
            s.register(
                &format!("lstm.u_{gate}"),
                Tensor::zeros(vec![hidden, hidden]),
            )
            .unwrap();
            s.register(&format!("lstm.b_{gate}"), Tensor::zeros(vec![hidden]))
                .unwrap();
        }
        s
    }

    #[test]
    fn zero_weights_give_zero_hidden_states() {
        let store = zero_store(2, 1);
        let mut tape = Tape::new();
        let gates = LstmGates::bind(&mut tape, &store, "lstm").unwrap();
        let gates_b = LstmGates::bind(&mut tape, &store, "lstm").unwrap();
        let x1 = tape.constant(Tensor::vector(vec![1.0, -2.0]).unwrap());
        let x2 = tape.constant(Tensor::vector(vec![0.5, 3.0]).unwrap());
        let hs = bilstm(&mut tape, &gates, &gates_b, &[x1, x2], None).unwrap();
        for h in hs {
            assert_eq!(tape.value(h).data(), &[0.0, 0.0]);
        }
    }

    /// Independent scalar recurrence for hidden size 1.
    fn scalar_lstm(xs: &[Vec<f64>], w: &[Vec<f64>; 4], u: [f64; 4], b: [f64; 4]) -> Vec<f64> {
        fn sig(v: f64) -> f64 {
            1.0 / (1.0 + (-v).exp())
        }
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let (mut h, mut c) = (0.0, 0.0);
        let mut out = Vec::new();
        for x in xs {
            let i = sig(dot(&w[0], x) + u[0] * h + b[0]);
            let f = sig(dot(&w[1], x) + u[1] * h + b[1]);
            let g = (dot(&w[2], x) + u[2] * h + b[2]).tanh();
            let o = sig(dot(&w[3], x) + u[3] * h + b[3]);
            c = f * c + i * g;
            h = o * c.tanh();
            out.push(h);
        }
        out
    }

    #[test]
    fn matches_hand_unrolled_recurrence() {
        // d = 2 (one unit per direction), k = 2, hand-set weights.
        let w = [
            vec![0.3, -0.2],
            vec![0.1, 0.4],
            vec![-0.5, 0.2],
            vec![0.25, -0.15],
        ];
        let u = [0.11, -0.07, 0.21, 0.05];
        let b = [0.02, 1.0, -0.03, 0.04];

        let mut store = ParameterStore::new();
        for (k, gate) in super::super::GATES.iter().enumerate() {
            store
                .register(
                    &format!("f.w_{gate}"),
                    Tensor::matrix(1, 2, w[k].clone()).unwrap(),
                )
                .unwrap();
            store
                .register(&format!("f.u_{gate}"), Tensor::matrix(1, 1, vec![u[k]]).unwrap())
                .unwrap();
            store
                .register(&format!("f.b_{gate}"), Tensor::vector(vec![b[k]]).unwrap())
                .unwrap();
            // backward direction gets the same weights for simplicity
            store
                .register(
                    &format!("b.w_{gate}"),
                    Tensor::matrix(1, 2, w[k].clone()).unwrap(),
                )
                .unwrap();
            store
                .register(&format!("b.u_{gate}"), Tensor::matrix(1, 1, vec![u[k]]).unwrap())
                .unwrap();
            store
                .register(&format!("b.b_{gate}"), Tensor::vector(vec![b[k]]).unwrap())
                .unwrap();
        }

        let xs = vec![vec![0.9, -0.6], vec![-0.3, 0.8]];
        let mut tape = Tape::new();
        let fg = LstmGates::bind(&mut tape, &store, "f").unwrap();
        let bg = LstmGates::bind(&mut tape, &store, "b").unwrap();
        let x_nodes: Vec<NodeId> = xs
            .iter()
            .map(|x| tape.constant(Tensor::vector(x.clone()).unwrap()))
            .collect();
        let hs = bilstm(&mut tape, &fg, &bg, &x_nodes, None).unwrap();

        let fwd = scalar_lstm(&xs, &w, u, b);
        let rev_inputs: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
        let bwd_rev = scalar_lstm(&rev_inputs, &w, u, b);

        for t in 0..xs.len() {
            let got = tape.value(hs[t]).data();
            let want_f = fwd[t];
            let want_b = bwd_rev[xs.len() - 1 - t];
            assert!((got[0] - want_f).abs() < 1e-10, "t={t} fwd {got:?} vs {want_f}");
            assert!((got[1] - want_b).abs() < 1e-10, "t={t} bwd {got:?} vs {want_b}");
        }
    }
}
