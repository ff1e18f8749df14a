use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, NodeId};
use super::params::{ParamId, ParamStore};
use super::tensor::{Matrix, Real};
use super::NnError;

pub const HIDDEN_GAIN: f64 = std::f64::consts::SQRT_2;
pub const POLICY_GAIN: f64 = 0.01;
pub const VALUE_GAIN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Body {
    Fc,
    Gru,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub body: Body,
    /// Linear+ReLU layers before the head. A GRU body uses one input
    /// projection followed by the recurrent cell regardless of this value.
    pub n_hidden_layers: usize,
}

impl NetSpec {
    pub fn fc(input_dim: usize, hidden_dim: usize, output_dim: usize) -> Self {
        NetSpec {
            input_dim,
            hidden_dim,
            output_dim,
            body: Body::Fc,
            n_hidden_layers: 2,
        }
    }

    pub fn gru(input_dim: usize, hidden_dim: usize, output_dim: usize) -> Self {
        NetSpec {
            input_dim,
            hidden_dim,
            output_dim,
            body: Body::Gru,
            n_hidden_layers: 1,
        }
    }

    pub fn with_body(input_dim: usize, hidden_dim: usize, output_dim: usize, body: Body) -> Self {
        match body {
            Body::Fc => Self::fc(input_dim, hidden_dim, output_dim),
            Body::Gru => Self::gru(input_dim, hidden_dim, output_dim),
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.output_dim == 0 {
            return Err(NnError::InvalidSpec(format!("{self:?}")));
        }
        if self.body == Body::Fc && self.n_hidden_layers == 0 {
            return Err(NnError::InvalidSpec("FC body needs at least one hidden layer".into()));
        }
        Ok(())
    }

    pub fn is_recurrent(&self) -> bool {
        self.body == Body::Gru
    }
}

/// Random matrix with orthonormal rows or columns (whichever is fewer), scaled by `gain`.
pub fn orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Matrix<f64> {
    let (long, short) = (rows.max(cols), rows.min(cols));
    // Columns of a long x short gaussian matrix, orthonormalised.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(short);
    while basis.len() < short {
        let mut v: Vec<f64> = (0..long).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= d * y;
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    let mut m = Matrix::zeros(rows, cols);
    for (j, b) in basis.iter().enumerate() {
        for (i, &x) in b.iter().enumerate() {
            if rows >= cols {
                m.set(i, j, gain * x);
            } else {
                m.set(j, i, gain * x);
            }
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        gain: f64,
        rng: &mut R,
    ) -> Self {
        let w = store.add(format!("{name}.w"), orthogonal(in_dim, out_dim, gain, rng).cast());
        let b = store.add(format!("{name}.b"), Matrix::zeros(1, out_dim));
        Linear { w, b, in_dim, out_dim }
    }

    pub fn apply<T: Real>(&self, g: &mut Graph<'_, T>, x: NodeId) -> Result<NodeId, NnError> {
        let w = g.param(self.w);
        let b = g.param(self.b);
        let y = g.matmul(x, w)?;
        g.add_bias(y, b)
    }
}

/// PyTorch-layout GRU cell with gates stacked as (reset, update, candidate).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GruCell {
    pub w_ih: ParamId,
    pub b_ih: ParamId,
    pub w_hh: ParamId,
    pub b_hh: ParamId,
    pub hidden: usize,
}

impl GruCell {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        in_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let stacked = |n: usize, rng: &mut R| {
            let mut m = Matrix::zeros(n, 3 * hidden);
            for gate in 0..3 {
                let part = orthogonal(n, hidden, 1.0, rng);
                for r in 0..n {
                    m.row_mut(r)[gate * hidden..(gate + 1) * hidden].copy_from_slice(part.row(r));
                }
            }
            m.cast::<T>()
        };
        let w_ih = stacked(in_dim, rng);
        let w_hh = stacked(hidden, rng);
        GruCell {
            w_ih: store.add(format!("{name}.w_ih"), w_ih),
            b_ih: store.add(format!("{name}.b_ih"), Matrix::zeros(1, 3 * hidden)),
            w_hh: store.add(format!("{name}.w_hh"), w_hh),
            b_hh: store.add(format!("{name}.b_hh"), Matrix::zeros(1, 3 * hidden)),
            hidden,
        }
    }

    pub fn apply<T: Real>(&self, g: &mut Graph<'_, T>, x: NodeId, h: NodeId) -> Result<NodeId, NnError> {
        let hd = self.hidden;
        let (w_ih, b_ih, w_hh, b_hh) = (g.param(self.w_ih), g.param(self.b_ih), g.param(self.w_hh), g.param(self.b_hh));
        let gi = g.matmul(x, w_ih)?;
        let gi = g.add_bias(gi, b_ih)?;
        let gh = g.matmul(h, w_hh)?;
        let gh = g.add_bias(gh, b_hh)?;
        let (i_r, i_z, i_n) = (g.slice_cols(gi, 0, hd)?, g.slice_cols(gi, hd, hd)?, g.slice_cols(gi, 2 * hd, hd)?);
        let (h_r, h_z, h_n) = (g.slice_cols(gh, 0, hd)?, g.slice_cols(gh, hd, hd)?, g.slice_cols(gh, 2 * hd, hd)?);
        let r = g.add(i_r, h_r)?;
        let r = g.sigmoid(r);
        let z = g.add(i_z, h_z)?;
        let z = g.sigmoid(z);
        let rn = g.mul(r, h_n)?;
        let n = g.add(i_n, rn)?;
        let n = g.tanh(n);
        // h' = (1 - z) * n + z * h = n + z * (h - n)
        let diff = g.sub(h, n)?;
        let zd = g.mul(z, diff)?;
        g.add(n, zd)
    }
}

/// Feed-forward or recurrent network whose parameters live in a shared store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Net {
    pub spec: NetSpec,
    layers: Vec<Linear>,
    gru: Option<GruCell>,
    head: Linear,
}

impl Net {
    /// Registers parameters under `prefix`. `head_gain` scales the output layer.
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        prefix: &str,
        spec: NetSpec,
        head_gain: f64,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        spec.validate()?;
        let mut layers = Vec::new();
        let mut gru = None;
        match spec.body {
            Body::Fc => {
                let mut d = spec.input_dim;
                for i in 0..spec.n_hidden_layers {
                    layers.push(Linear::new(store, &format!("{prefix}.fc{}", i + 1), d, spec.hidden_dim, HIDDEN_GAIN, rng));
                    d = spec.hidden_dim;
                }
            }
            Body::Gru => {
                layers.push(Linear::new(store, &format!("{prefix}.fc1"), spec.input_dim, spec.hidden_dim, HIDDEN_GAIN, rng));
                gru = Some(GruCell::new(store, &format!("{prefix}.gru"), spec.hidden_dim, spec.hidden_dim, rng));
            }
        }
        let head = Linear::new(store, &format!("{prefix}.head"), spec.hidden_dim, spec.output_dim, head_gain, rng);
        Ok(Net { spec, layers, gru, head })
    }

    pub fn initial_hidden<T: Real>(&self, batch: usize) -> Option<Matrix<T>> {
        self.gru.map(|c| Matrix::zeros(batch, c.hidden))
    }

    /// One step on the tape. Returns the output and, for a GRU body, the new hidden state.
    pub fn step<T: Real>(
        &self,
        g: &mut Graph<'_, T>,
        x: NodeId,
        h: Option<NodeId>,
    ) -> Result<(NodeId, Option<NodeId>), NnError> {
        let (rows, cols) = g.shape(x);
        if cols != self.spec.input_dim {
            return Err(NnError::ShapeMismatch {
                op: "net input",
                left: (rows, cols),
                right: (rows, self.spec.input_dim),
            });
        }
        let mut y = x;
        for l in &self.layers {
            y = l.apply(g, y)?;
            y = g.relu(y);
        }
        let h_out = match (self.gru, h) {
            (Some(cell), Some(h)) => {
                let hs = g.shape(h);
                if hs != (rows, cell.hidden) {
                    return Err(NnError::ShapeMismatch {
                        op: "hidden state",
                        left: hs,
                        right: (rows, cell.hidden),
                    });
                }
                let h2 = cell.apply(g, y, h)?;
                y = h2;
                Some(h2)
            }
            (None, None) => None,
            (Some(_), None) => return Err(NnError::MissingHidden),
            (None, Some(_)) => return Err(NnError::UnexpectedHidden),
        };
        Ok((self.head.apply(g, y)?, h_out))
    }

    /// Runs `steps` timesteps stacked time-major in `x` (`steps * rows` rows).
    /// Feed-forward layers see the whole stack at once; the GRU is stepped
    /// block by block. `keep[t]`, when given, multiplies the hidden state
    /// entering step `t` (zero rows reset an episode). Returns the stacked
    /// outputs and the final hidden state.
    pub fn unroll<T: Real>(
        &self,
        g: &mut Graph<'_, T>,
        x: NodeId,
        steps: usize,
        h0: Option<NodeId>,
        keep: Option<&[Matrix<T>]>,
    ) -> Result<(NodeId, Option<NodeId>), NnError> {
        let (total, cols) = g.shape(x);
        if steps == 0 || total % steps != 0 || cols != self.spec.input_dim {
            return Err(NnError::ShapeMismatch {
                op: "net unroll",
                left: (total, cols),
                right: (steps, self.spec.input_dim),
            });
        }
        let rows = total / steps;
        let mut y = x;
        for l in &self.layers {
            y = l.apply(g, y)?;
            y = g.relu(y);
        }
        let h_last = match (self.gru, h0) {
            (Some(cell), Some(mut h)) => {
                if g.shape(h) != (rows, cell.hidden) {
                    return Err(NnError::ShapeMismatch {
                        op: "hidden state",
                        left: g.shape(h),
                        right: (rows, cell.hidden),
                    });
                }
                let mut hs = Vec::with_capacity(steps);
                for t in 0..steps {
                    if let Some(k) = keep {
                        h = g.mul_const(h, k[t].clone())?;
                    }
                    let xt = if steps == 1 { y } else { g.slice_rows(y, t * rows, rows)? };
                    h = cell.apply(g, xt, h)?;
                    hs.push(h);
                }
                y = if steps == 1 { hs[0] } else { g.concat_rows(&hs)? };
                Some(h)
            }
            (None, None) => None,
            (Some(_), None) => return Err(NnError::MissingHidden),
            (None, Some(_)) => return Err(NnError::UnexpectedHidden),
        };
        Ok((self.head.apply(g, y)?, h_last))
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids: Vec<ParamId> = self.layers.iter().flat_map(|l| [l.w, l.b]).collect();
        if let Some(c) = self.gru {
            ids.extend([c.w_ih, c.b_ih, c.w_hh, c.b_hh]);
        }
        ids.extend([self.head.w, self.head.b]);
        ids
    }
}

/// Tape-free evaluation of `net` on a batch of rows.
pub fn forward<T: Real>(
    net: &Net,
    store: &ParamStore<T>,
    input: &Matrix<T>,
    hidden_in: Option<&Matrix<T>>,
) -> Result<(Matrix<T>, Option<Matrix<T>>), NnError> {
    let mut g = Graph::new(store);
    let x = g.input(input.clone());
    let h = hidden_in.map(|h| g.input(h.clone()));
    let (y, h2) = net.step(&mut g, x, h)?;
    Ok((g.value(y).clone(), h2.map(|h| g.value(h).clone())))
}
