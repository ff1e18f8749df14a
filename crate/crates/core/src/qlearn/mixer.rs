use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::net::Linear;
use crate::nn::{Graph, Matrix, NnError, NodeId, ParamStore, Real, HIDDEN_GAIN, VALUE_GAIN};

/// Sum of the agents' chosen values.
pub fn mix_vdn(qs: &[f64]) -> f64 {
    qs.iter().sum()
}

/// Monotonic mixing network whose weights come from state-conditioned
/// hypernetworks. Mixing weights pass through `abs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QmixMixer {
    pub n_agents: usize,
    pub state_dim: usize,
    pub embed_dim: usize,
    hyper_w1: [Linear; 2],
    hyper_b1: Linear,
    hyper_w_final: [Linear; 2],
    hyper_v: [Linear; 2],
}

impl QmixMixer {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        prefix: &str,
        n_agents: usize,
        state_dim: usize,
        embed_dim: usize,
        hypernet_dim: usize,
        rng: &mut R,
    ) -> Self {
        let mut lin = |name: &str, i: usize, o: usize, gain: f64| {
            Linear::new(store, &format!("{prefix}.{name}"), i, o, gain, rng)
        };
        let hyper_w1 = [
            lin("hyper_w1.0", state_dim, hypernet_dim, HIDDEN_GAIN),
            lin("hyper_w1.1", hypernet_dim, n_agents * embed_dim, VALUE_GAIN),
        ];
        let hyper_b1 = lin("hyper_b1", state_dim, embed_dim, VALUE_GAIN);
        let hyper_w_final = [
            lin("hyper_w_final.0", state_dim, hypernet_dim, HIDDEN_GAIN),
            lin("hyper_w_final.1", hypernet_dim, embed_dim, VALUE_GAIN),
        ];
        let hyper_v = [
            lin("hyper_v.0", state_dim, embed_dim, HIDDEN_GAIN),
            lin("hyper_v.1", embed_dim, 1, VALUE_GAIN),
        ];
        QmixMixer {
            n_agents,
            state_dim,
            embed_dim,
            hyper_w1,
            hyper_b1,
            hyper_w_final,
            hyper_v,
        }
    }

    fn two_layer<T: Real>(g: &mut Graph<'_, T>, l: &[Linear; 2], x: NodeId) -> Result<NodeId, NnError> {
        let h = l[0].apply(g, x)?;
        let h = g.relu(h);
        l[1].apply(g, h)
    }

    /// Joint value for each row of `qs` (`R x n`) given `states` (`R x S`).
    pub fn forward<T: Real>(&self, g: &mut Graph<'_, T>, qs: NodeId, states: NodeId) -> Result<NodeId, NnError> {
        let (rq, cq) = g.shape(qs);
        let (rs, cs) = g.shape(states);
        if cq != self.n_agents || cs != self.state_dim || rq != rs {
            return Err(NnError::ShapeMismatch {
                op: "qmix",
                left: (rq, cq),
                right: (rs, cs),
            });
        }
        let w1 = Self::two_layer(g, &self.hyper_w1, states)?;
        let w1 = g.abs(w1);
        let b1 = self.hyper_b1.apply(g, states)?;
        let hidden = g.batched_vec_mat(qs, w1)?;
        let hidden = g.add(hidden, b1)?;
        let hidden = g.relu(hidden);
        let wf = Self::two_layer(g, &self.hyper_w_final, states)?;
        let wf = g.abs(wf);
        let v = Self::two_layer(g, &self.hyper_v, states)?;
        let y = g.batched_vec_mat(hidden, wf)?;
        g.add(y, v)
    }

    /// Tape-free mixing of per-agent values.
    pub fn mix_values<T: Real>(&self, store: &ParamStore<T>, qs: &Matrix<T>, states: &Matrix<T>) -> Result<Matrix<T>, NnError> {
        let mut g = Graph::new(store);
        let q = g.input(qs.clone());
        let s = g.input(states.clone());
        let y = self.forward(&mut g, q, s)?;
        Ok(g.value(y).clone())
    }

    /// Output layers of the two weight hypernetworks.
    pub fn weight_heads(&self) -> [&Linear; 2] {
        [&self.hyper_w1[1], &self.hyper_w_final[1]]
    }

    pub fn value_head(&self) -> [&Linear; 2] {
        [&self.hyper_v[0], &self.hyper_v[1]]
    }
}
