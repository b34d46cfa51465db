use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CharAlphabet, JointConfig, NeuralError};
use crate::ml::{softmax, N_LABELS};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Offsets of each parameter block in the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub hidden: usize,
    pub fc: usize,
    pub n_hand: usize,
    pub n_symbols: usize,
    /// Input weights, one contiguous `4h` block per symbol (gate order i, f, o, g).
    pub wx: usize,
    /// Recurrent weights, `4h x h` row-major.
    pub wh: usize,
    pub b: usize,
    /// Handcrafted-feature layer, `fc x n_hand` row-major.
    pub wf: usize,
    pub bf: usize,
    /// Softmax head, `3 x (h + fc)` row-major.
    pub wo: usize,
    pub bo: usize,
    pub len: usize,
}

impl Layout {
    pub fn new(n_symbols: usize, hidden: usize, fc: usize, n_hand: usize) -> Self {
        let g = 4 * hidden;
        let wx = 0;
        let wh = wx + n_symbols * g;
        let b = wh + g * hidden;
        let wf = b + g;
        let bf = wf + fc * n_hand;
        let wo = bf + fc;
        let bo = wo + N_LABELS * (hidden + fc);
        Layout {
            hidden,
            fc,
            n_hand,
            n_symbols,
            wx,
            wh,
            b,
            wf,
            bf,
            wo,
            bo,
            len: bo + N_LABELS,
        }
    }

    /// First index of the handcrafted layer and head, which together form
    /// the part of the network that does not touch the recurrence.
    pub fn non_recurrent_start(&self) -> usize {
        self.wf
    }
}

/// Character LSTM over the turn text, a tanh layer over handcrafted
/// features, and a softmax over the concatenation of both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointModel {
    pub alphabet: CharAlphabet,
    pub config: JointConfig,
    pub hand_names: Vec<String>,
    pub params: Vec<f64>,
}

/// Activations kept for the backward pass.
pub(crate) struct Cache {
    seq: Vec<Option<usize>>,
    /// `h_0 .. h_T`, each of length h.
    hs: Vec<f64>,
    /// `c_0 .. c_T`.
    cs: Vec<f64>,
    /// Post-activation gates per step, `4h` each.
    gates: Vec<f64>,
    hand: Vec<f64>,
    u: Vec<f64>,
    pub(crate) probs: [f64; N_LABELS],
}

impl Cache {
    pub(crate) fn embedding(&self, h: usize) -> &[f64] {
        &self.hs[self.hs.len() - h..]
    }
}

impl JointModel {
    /// Xavier-uniform weights, zero biases except a forget-gate bias of 1.
    pub fn new(config: JointConfig, hand_names: Vec<String>) -> Result<Self, NeuralError> {
        config.validate()?;
        let alphabet = CharAlphabet::new(config.strict_charset);
        let layout = Layout::new(alphabet.len(), config.hidden, config.fc, hand_names.len());
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = vec![0.0; layout.len];
        let h = config.hidden;
        let mut xavier = |slice: &mut [f64], fan_in: usize, fan_out: usize| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            slice.iter_mut().for_each(|w| *w = rng.gen_range(-a..a));
        };
        xavier(&mut params[layout.wx..layout.wh], layout.n_symbols, 4 * h);
        xavier(&mut params[layout.wh..layout.b], h, 4 * h);
        xavier(&mut params[layout.wf..layout.bf], layout.n_hand.max(1), config.fc);
        xavier(&mut params[layout.wo..layout.bo], h + config.fc, N_LABELS);
        params[layout.b + h..layout.b + 2 * h].iter_mut().for_each(|b| *b = 1.0);
        Ok(JointModel {
            alphabet,
            config,
            hand_names,
            params,
        })
    }

    /// All parameters zero: the output is uniform for every input.
    pub fn zeros(config: JointConfig, hand_names: Vec<String>) -> Result<Self, NeuralError> {
        let mut m = Self::new(config, hand_names)?;
        m.params.iter_mut().for_each(|p| *p = 0.0);
        Ok(m)
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.alphabet.len(), self.config.hidden, self.config.fc, self.hand_names.len())
    }

    pub fn encode(&self, text: &str) -> Vec<Option<usize>> {
        self.alphabet.encode_indices(text, self.config.max_len)
    }

    pub(crate) fn forward_cached(&self, seq: Vec<Option<usize>>, hand: &[f64]) -> Cache {
        let l = self.layout();
        let (h, g4) = (l.hidden, 4 * l.hidden);
        let p = &self.params;
        let t_len = seq.len();
        let mut hs = vec![0.0; (t_len + 1) * h];
        let mut cs = vec![0.0; (t_len + 1) * h];
        let mut gates = vec![0.0; t_len * g4];
        let mut z = vec![0.0; g4];
        for (t, step) in seq.iter().enumerate() {
            z.copy_from_slice(&p[l.b..l.b + g4]);
            if let Some(c) = step {
                axpy(1.0, &p[l.wx + c * g4..l.wx + (c + 1) * g4], &mut z);
            }
            let h_prev = &hs[t * h..(t + 1) * h];
            for (r, zr) in z.iter_mut().enumerate() {
                *zr += dot(&p[l.wh + r * h..l.wh + (r + 1) * h], h_prev);
            }
            let gt = &mut gates[t * g4..(t + 1) * g4];
            for k in 0..3 * h {
                gt[k] = sigmoid(z[k]);
            }
            for k in 3 * h..g4 {
                gt[k] = z[k].tanh();
            }
            for k in 0..h {
                let c = gt[h + k] * cs[t * h + k] + gt[k] * gt[3 * h + k];
                cs[(t + 1) * h + k] = c;
                hs[(t + 1) * h + k] = gt[2 * h + k] * c.tanh();
            }
        }
        let u: Vec<f64> = (0..l.fc)
            .map(|j| (p[l.bf + j] + dot(&p[l.wf + j * l.n_hand..l.wf + (j + 1) * l.n_hand], hand)).tanh())
            .collect();
        let emb = &hs[t_len * h..];
        let width = h + l.fc;
        let mut probs = [0.0; N_LABELS];
        for (k, pk) in probs.iter_mut().enumerate() {
            let w = &p[l.wo + k * width..l.wo + (k + 1) * width];
            *pk = p[l.bo + k] + dot(&w[..h], emb) + dot(&w[h..], &u);
        }
        softmax(&mut probs);
        Cache {
            seq,
            hs,
            cs,
            gates,
            hand: hand.to_vec(),
            u,
            probs,
        }
    }

    /// Adds the gradient of `-ln p(label)` to `grad`; returns that loss.
    pub(crate) fn backward(&self, cache: &Cache, label: usize, grad: &mut [f64]) -> f64 {
        let l = self.layout();
        let (h, g4) = (l.hidden, 4 * l.hidden);
        let p = &self.params;
        let t_len = cache.seq.len();
        let width = h + l.fc;
        let mut ds = cache.probs;
        ds[label] -= 1.0;
        let emb = &cache.hs[t_len * h..];
        let mut dh = vec![0.0; h];
        let mut du = vec![0.0; l.fc];
        for (k, &dsk) in ds.iter().enumerate() {
            let row = l.wo + k * width;
            axpy(dsk, emb, &mut grad[row..row + h]);
            axpy(dsk, &cache.u, &mut grad[row + h..row + width]);
            grad[l.bo + k] += dsk;
            axpy(dsk, &p[row..row + h], &mut dh);
            axpy(dsk, &p[row + h..row + width], &mut du);
        }
        for j in 0..l.fc {
            let dz = du[j] * (1.0 - cache.u[j] * cache.u[j]);
            grad[l.bf + j] += dz;
            axpy(dz, &cache.hand, &mut grad[l.wf + j * l.n_hand..l.wf + (j + 1) * l.n_hand]);
        }
        let mut dc = vec![0.0; h];
        let mut dz = vec![0.0; g4];
        for t in (0..t_len).rev() {
            let gt = &cache.gates[t * g4..(t + 1) * g4];
            let c_prev = &cache.cs[t * h..(t + 1) * h];
            let c = &cache.cs[(t + 1) * h..(t + 2) * h];
            for k in 0..h {
                let (i, f, o, g) = (gt[k], gt[h + k], gt[2 * h + k], gt[3 * h + k]);
                let tc = c[k].tanh();
                let dck = dc[k] + dh[k] * o * (1.0 - tc * tc);
                dz[k] = dck * g * i * (1.0 - i);
                dz[h + k] = dck * c_prev[k] * f * (1.0 - f);
                dz[2 * h + k] = dh[k] * tc * o * (1.0 - o);
                dz[3 * h + k] = dck * i * (1.0 - g * g);
                dc[k] = dck * f;
            }
            axpy(1.0, &dz, &mut grad[l.b..l.b + g4]);
            if let Some(ch) = cache.seq[t] {
                axpy(1.0, &dz, &mut grad[l.wx + ch * g4..l.wx + (ch + 1) * g4]);
            }
            let h_prev = &cache.hs[t * h..(t + 1) * h];
            dh.iter_mut().for_each(|x| *x = 0.0);
            for (r, &dzr) in dz.iter().enumerate() {
                if dzr != 0.0 {
                    let row = l.wh + r * h;
                    axpy(dzr, h_prev, &mut grad[row..row + h]);
                    axpy(dzr, &p[row..row + h], &mut dh);
                }
            }
        }
        -cache.probs[label].max(f64::MIN_POSITIVE).ln()
    }

    fn check_hand(&self, hand: &[f64]) -> Result<(), NeuralError> {
        if hand.len() != self.hand_names.len() {
            return Err(NeuralError::SchemaMismatch {
                expected: self.hand_names.len(),
                found: hand.len(),
            });
        }
        Ok(())
    }

    /// Label probabilities and the final hidden state (the turn embedding).
    pub fn forward(&self, text: &str, hand: &[f64]) -> Result<([f64; N_LABELS], Vec<f64>), NeuralError> {
        self.check_hand(hand)?;
        let cache = self.forward_cached(self.encode(text), hand);
        Ok((cache.probs, cache.embedding(self.config.hidden).to_vec()))
    }

    pub fn embed(&self, text: &str) -> Vec<f64> {
        let hand = vec![0.0; self.hand_names.len()];
        self.forward_cached(self.encode(text), &hand)
            .embedding(self.config.hidden)
            .to_vec()
    }

    /// Mean cross-entropy and its gradient over `(text, hand, label)` samples.
    pub fn loss_and_gradient(&self, samples: &[(&str, &[f64], usize)]) -> Result<(f64, Vec<f64>), NeuralError> {
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for (text, hand, label) in samples {
            self.check_hand(hand)?;
            let cache = self.forward_cached(self.encode(text), hand);
            loss += self.backward(&cache, *label, &mut grad);
        }
        let n = samples.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((loss / n, grad))
    }

    pub fn loss(&self, samples: &[(&str, &[f64], usize)]) -> f64 {
        let total: f64 = samples
            .iter()
            .map(|(text, hand, label)| {
                let cache = self.forward_cached(self.encode(text), hand);
                -cache.probs[*label].max(f64::MIN_POSITIVE).ln()
            })
            .sum();
        total / samples.len().max(1) as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NeuralError> {
        let m: JointModel = serde_json::from_str(text)?;
        if m.params.len() != m.layout().len {
            return Err(NeuralError::Corrupt(format!(
                "expected {} parameters, found {}",
                m.layout().len,
                m.params.len()
            )));
        }
        Ok(m)
    }
}
