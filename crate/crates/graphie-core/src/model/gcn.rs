//! Graph convolution over a typed task graph.
//!
//! Each layer combines a self term `W_v g_i` with a degree-normalized,
//! per-edge-type neighbor aggregate, then a nonlinearity:
//!
//! ```text
//! alpha_i = W_v g_i
//! beta_i  = (1 / d(v_i)) * sum_t W_e_t (sum over j->i of type t: g_j)
//! g_i'    = relu(alpha_i + beta_i + b)
//! ```
//!
//! `d(v_i)` is the total incident-edge count across types; isolated
//! nodes get `beta_i = 0`. Weights are stored (input, output) so node
//! matrices multiply on the left.

use crate::error::{Error, Result};
use crate::graph::TaskGraph;
use crate::model::ModelConfig;
use crate::params::ParameterStore;
use crate::tape::{NodeId, Tape};
use crate::tensor::Scalar;

pub struct GcnLayerParams {
    pub w_v: NodeId,
    pub w_e: Vec<NodeId>,
    pub bias: NodeId,
}

impl GcnLayerParams {
    pub fn bind<F: Scalar>(
        tape: &mut Tape<F>,
        store: &ParameterStore<F>,
        layer: usize,
        edge_types: usize,
    ) -> Result<GcnLayerParams> {
        let w_v = tape.param(store, &format!("gcn.{layer}.w_v"))?;
        let mut w_e = Vec::with_capacity(edge_types);
        for t in 0..edge_types {
            w_e.push(tape.param(store, &format!("gcn.{layer}.e{t}"))?);
        }
        let bias = tape.param(store, &format!("gcn.{layer}.b"))?;
        Ok(GcnLayerParams { w_v, w_e, bias })
    }
}

/// One graph convolution over the (nodes x dim) matrix.
pub fn gcn_layer<F: Scalar>(
    tape: &mut Tape<F>,
    nodes: NodeId,
    graph: &TaskGraph,
    params: &GcnLayerParams,
    identity_activation: bool,
) -> Result<NodeId> {
    if graph.edge_type_count() != params.w_e.len() {
        return Err(Error::Contract(format!(
            "graph has {} edge types but layer holds {} weights",
            graph.edge_type_count(),
            params.w_e.len()
        )));
    }
    if tape.value(nodes).rows() != graph.node_count() {
        return Err(Error::shape(
            "gcn_layer",
            format!(
                "{} node vectors for {} graph nodes",
                tape.value(nodes).rows(),
                graph.node_count()
            ),
        ));
    }

    let alpha = tape.matmul(nodes, params.w_v)?;

    let mut beta: Option<NodeId> = None;
    for t in 0..graph.edge_type_count() {
        if graph.edge_count_of_type(t) == 0 {
            continue;
        }
        let summed = tape.neighbor_sum(nodes, graph.in_neighbor_rows(t))?;
        let projected = tape.matmul(summed, params.w_e[t])?;
        beta = Some(match beta {
            None => projected,
            Some(b) => tape.add(b, projected)?,
        });
    }

    let combined = match beta {
        None => alpha,
        Some(b) => {
            let factors: Vec<F> = graph
                .degrees()
                .iter()
                .map(|&d| {
                    if d == 0 {
                        F::zero()
                    } else {
                        F::one() / F::from_f64(d as f64)
                    }
                })
                .collect();
            let normalized = tape.scale_rows(b, factors)?;
            tape.add(alpha, normalized)?
        }
    };
    let with_bias = tape.add_row_broadcast(combined, params.bias)?;
    if identity_activation {
        Ok(with_bias)
    } else {
        tape.relu(with_bias)
    }
}

/// Stacks the configured number of layers; zero layers is the
/// identity.
pub fn gcn_forward<F: Scalar>(
    tape: &mut Tape<F>,
    store: &ParameterStore<F>,
    cfg: &ModelConfig,
    nodes: NodeId,
    graph: &TaskGraph,
) -> Result<NodeId> {
    let mut h = nodes;
    for l in 0..cfg.gcn_layers {
        let params = GcnLayerParams::bind(tape, store, l, graph.edge_type_count())?;
        h = gcn_layer(tape, h, graph, &params, cfg.gcn_identity_activation)?;
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::UnitKind;
    use crate::tensor::Tensor;

    fn layer_store(
        dim: usize,
        w_v: Vec<f64>,
        w_e: Vec<f64>,
        b: Vec<f64>,
    ) -> ParameterStore<f64> {
        let mut s = ParameterStore::new();
        s.register("gcn.0.w_v", Tensor::matrix(dim, dim, w_v).unwrap())
            .unwrap();
        s.register("gcn.0.e0", Tensor::matrix(dim, dim, w_e).unwrap())
            .unwrap();
        s.register("gcn.0.b", Tensor::vector(b).unwrap()).unwrap();
        s
    }

    fn single_type_graph(n: usize, edges: &[(usize, usize)]) -> TaskGraph {
        let mut g = TaskGraph::new(n, UnitKind::Word, &["e"]);
        for &(a, b) in edges {
            g.add_edge(0, a, b).unwrap();
        }
        g
    }

    #[test]
    fn isolated_nodes_with_identity_weights_pass_through() {
        let store = layer_store(
            2,
            vec![1.0, 0.0, 0.0, 1.0],
            vec![0.5, 0.5, 0.5, 0.5],
            vec![0.0, 0.0],
        );
        let g = single_type_graph(3, &[]);
        let mut tape = Tape::new();
        let nodes = tape.constant(
            Tensor::matrix(3, 2, vec![1.0, 2.0, -3.0, 4.0, 0.25, -0.5]).unwrap(),
        );
        let p = GcnLayerParams::bind(&mut tape, &store, 0, 1).unwrap();
        let out = gcn_layer(&mut tape, nodes, &g, &p, true).unwrap();
        assert_eq!(
            tape.value(out).data(),
            &[1.0, 2.0, -3.0, 4.0, 0.25, -0.5]
        );
    }

    #[test]
    fn identical_neighbors_cancel_degree_normalization_exactly() {
        // node 0 receives the same vector v from 3 neighbors; with
        // dyadic values the normalized aggregate equals W_e v exactly.
        let store = layer_store(
            2,
            vec![0.0; 4],
            vec![2.0, -1.0, 0.5, 1.5],
            vec![0.0, 0.0],
        );
        let g = single_type_graph(4, &[(1, 0), (2, 0), (3, 0)]);
        let v = [1.5, -2.0];
        let mut tape = Tape::new();
        let nodes = tape.constant(
            Tensor::matrix(4, 2, vec![9.0, 9.0, v[0], v[1], v[0], v[1], v[0], v[1]]).unwrap(),
        );
        let p = GcnLayerParams::bind(&mut tape, &store, 0, 1).unwrap();
        let out = gcn_layer(&mut tape, nodes, &g, &p, true).unwrap();
        // W_e^T v under (in, out) storage: out_j = sum_i v_i * W[i][j]
        let expected = [
            v[0] * 2.0 + v[1] * 0.5,
            v[0] * -1.0 + v[1] * 1.5,
        ];
        let got = &tape.value(out).data()[0..2];
        assert_eq!(got, expected);
    }

    #[test]
    fn path_graph_matches_dense_matrix_oracle() {
        // 3-node path 0-1-2 (symmetric single-type edges), d = 2.
        let w_v = vec![0.3, -0.1, 0.2, 0.4];
        let w_e = vec![-0.2, 0.5, 0.7, 0.1];
        let b = vec![0.05, -0.02];
        let store = layer_store(2, w_v.clone(), w_e.clone(), b.clone());
        let g = single_type_graph(3, &[(0, 1), (1, 0), (1, 2), (2, 1)]);
        let x = [[0.9, -0.4], [0.2, 0.7], [-0.6, 0.3]];
        let mut tape = Tape::new();
        let nodes =
            tape.constant(Tensor::matrix(3, 2, x.iter().flatten().copied().collect()).unwrap());
        let p = GcnLayerParams::bind(&mut tape, &store, 0, 1).unwrap();
        let out = gcn_layer(&mut tape, nodes, &g, &p, false).unwrap();

        // dense oracle: relu(X W_v + D^-1 A X W_e + 1 b)
        let adj = [[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]];
        let deg = [1.0, 2.0, 1.0];
        let mut expected = [[0.0f64; 2]; 3];
        for i in 0..3 {
            for j in 0..2 {
                let mut self_term = 0.0;
                for k in 0..2 {
                    self_term += x[i][k] * w_v[k * 2 + j];
                }
                let mut agg = [0.0f64; 2];
                for (n, row) in adj[i].iter().enumerate() {
                    for k in 0..2 {
                        agg[k] += row * x[n][k];
                    }
                }
                let mut nb = 0.0;
                for k in 0..2 {
                    nb += agg[k] * w_e[k * 2 + j];
                }
                expected[i][j] = (self_term + nb / deg[i] + b[j]).max(0.0);
            }
        }
        for i in 0..3 {
            for j in 0..2 {
                let got = tape.value(out).at2(i, j);
                assert!(
                    (got - expected[i][j]).abs() < 1e-10,
                    "({i},{j}): {got} vs {}",
                    expected[i][j]
                );
            }
        }
    }

    #[test]
    fn unknown_edge_type_count_is_a_contract_error() {
        let store = layer_store(2, vec![0.0; 4], vec![0.0; 4], vec![0.0; 2]);
        let mut g = TaskGraph::new(2, UnitKind::Word, &["a", "b"]);
        g.add_edge(1, 0, 1).unwrap();
        let mut tape = Tape::new();
        let nodes = tape.constant(Tensor::matrix(2, 2, vec![0.0; 4]).unwrap());
        let p = GcnLayerParams::bind(&mut tape, &store, 0, 1).unwrap();
        assert!(gcn_layer(&mut tape, nodes, &g, &p, true).is_err());
    }
}
