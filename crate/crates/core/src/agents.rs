//! Per-agent networks with or without parameter sharing.
//!
//! Batched inputs are stacked time-major, and within a timestep rows are
//! ordered `(batch, agent)`: row `t * B * n + b * n + i`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{Graph, Matrix, Net, NetSpec, NnError, NodeId, ParamStore, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentNets {
    nets: Vec<Net>,
    pub n_agents: usize,
    pub obs_dim: usize,
    pub shared: bool,
}

impl AgentNets {
    /// With sharing a one-hot agent ID is appended to each observation.
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        prefix: &str,
        n_agents: usize,
        obs_dim: usize,
        spec: NetSpec,
        shared: bool,
        head_gain: f64,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        let input_dim = if shared { obs_dim + n_agents } else { obs_dim };
        let spec = NetSpec { input_dim, ..spec };
        let nets = if shared {
            vec![Net::new(store, prefix, spec, head_gain, rng)?]
        } else {
            (0..n_agents)
                .map(|i| Net::new(store, &format!("{prefix}{i}"), spec, head_gain, rng))
                .collect::<Result<_, _>>()?
        };
        Ok(AgentNets {
            nets,
            n_agents,
            obs_dim,
            shared,
        })
    }

    pub fn spec(&self) -> NetSpec {
        self.nets[0].spec
    }

    pub fn input_dim(&self) -> usize {
        self.spec().input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.spec().output_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.spec().hidden_dim
    }

    pub fn is_recurrent(&self) -> bool {
        self.spec().is_recurrent()
    }

    /// Zero hidden state for `batch` joint rows, or `None` for feed-forward nets.
    pub fn initial_hidden<T: Real>(&self, batch: usize) -> Option<Matrix<T>> {
        self.nets[0].initial_hidden(batch * self.n_agents)
    }

    /// Writes agent `i`'s network input into `out`.
    pub fn write_input<T: Real>(&self, agent: usize, obs: &[f32], out: &mut [T]) {
        debug_assert_eq!(obs.len(), self.obs_dim);
        for (o, &v) in out.iter_mut().zip(obs) {
            *o = T::from_f64(v as f64);
        }
        if self.shared {
            for (k, o) in out[self.obs_dim..].iter_mut().enumerate() {
                *o = if k == agent { T::one() } else { T::zero() };
            }
        }
    }

    /// Inputs for a list of joint observations, one row per (entry, agent).
    pub fn inputs<T: Real>(&self, joint: &[&[Vec<f32>]]) -> Matrix<T> {
        let d = self.input_dim();
        let mut m = Matrix::zeros(joint.len() * self.n_agents, d);
        for (b, obs) in joint.iter().enumerate() {
            for (i, o) in obs.iter().enumerate() {
                self.write_input(i, o, m.row_mut(b * self.n_agents + i));
            }
        }
        m
    }

    /// Runs all agents over `steps` stacked timesteps of `batch` joint rows.
    /// `keep[t]` (shape `batch * n x hidden`) masks the incoming hidden state.
    pub fn unroll<T: Real>(
        &self,
        g: &mut Graph<'_, T>,
        x: NodeId,
        steps: usize,
        batch: usize,
        h0: Option<NodeId>,
        keep: Option<&[Matrix<T>]>,
    ) -> Result<(NodeId, Option<NodeId>), NnError> {
        if self.shared {
            return self.nets[0].unroll(g, x, steps, h0, keep);
        }
        let n = self.n_agents;
        let mut outs = Vec::with_capacity(n);
        let mut hs = Vec::with_capacity(n);
        for (i, net) in self.nets.iter().enumerate() {
            let rows: Vec<usize> = (0..steps)
                .flat_map(|t| (0..batch).map(move |b| t * batch * n + b * n + i))
                .collect();
            let xi = g.select_rows(x, rows)?;
            let hi = match h0 {
                Some(h) => Some(g.select_rows(h, (0..batch).map(|b| b * n + i).collect())?),
                None => None,
            };
            let ki: Option<Vec<Matrix<T>>> = keep.map(|k| {
                k.iter()
                    .map(|m| {
                        let data = (0..batch).flat_map(|b| m.row(b * n + i).to_vec()).collect();
                        Matrix::from_vec(batch, m.cols, data)
                    })
                    .collect()
            });
            let (o, h) = net.unroll(g, xi, steps, hi, ki.as_deref())?;
            outs.push(o);
            if let Some(h) = h {
                hs.push(h);
            }
        }
        // Concatenation is ordered (agent, t, b); restore (t, b, agent).
        let cat = g.concat_rows(&outs)?;
        let perm = (0..steps)
            .flat_map(|t| (0..batch).flat_map(move |b| (0..n).map(move |i| i * steps * batch + t * batch + b)))
            .collect();
        let out = g.select_rows(cat, perm)?;
        let h_last = if hs.is_empty() {
            None
        } else {
            let cat = g.concat_rows(&hs)?;
            let perm = (0..batch).flat_map(|b| (0..n).map(move |i| i * batch + b)).collect();
            Some(g.select_rows(cat, perm)?)
        };
        Ok((out, h_last))
    }

    /// Tape-free single step; returns per-row outputs and the next hidden state.
    pub fn step_values<T: Real>(
        &self,
        store: &ParamStore<T>,
        input: Matrix<T>,
        hidden: Option<&Matrix<T>>,
    ) -> Result<(Matrix<T>, Option<Matrix<T>>), NnError> {
        let batch = input.rows / self.n_agents;
        let mut g = Graph::new(store);
        let x = g.input(input);
        let h = hidden.map(|h| g.input(h.clone()));
        let (y, h2) = self.unroll(&mut g, x, 1, batch, h, None)?;
        Ok((g.value(y).clone(), h2.map(|h| g.value(h).clone())))
    }
}
