use rand::Rng;

use super::avg::init_embedding;
use super::vocab::TokenSequence;
use crate::diffkit::{Linear, ParamTensor, Parameterized};
use crate::error::{Error, Result};

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One LSTM direction. Gate blocks are stacked in the order i, f, g, o.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmCell {
    /// `4h × d`
    pub w_x: ParamTensor,
    /// `4h × h`
    pub w_h: ParamTensor,
    /// `4h`
    pub bias: ParamTensor,
}

/// Activations of one time step, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct StepCache {
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    gates: Vec<f64>,
    c: Vec<f64>,
}

impl LstmCell {
    pub fn zeros(name: &str, input: usize, hidden: usize) -> Self {
        LstmCell {
            w_x: ParamTensor::zeros(format!("{name}.w_x"), &[4 * hidden, input]),
            w_h: ParamTensor::zeros(format!("{name}.w_h"), &[4 * hidden, hidden]),
            bias: ParamTensor::zeros(format!("{name}.bias"), &[4 * hidden]),
        }
    }

    pub fn init<R: Rng>(name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let scale = 1.0 / (hidden.max(1) as f64).sqrt();
        LstmCell {
            w_x: ParamTensor::uniform(format!("{name}.w_x"), &[4 * hidden, input], scale, rng),
            w_h: ParamTensor::uniform(format!("{name}.w_h"), &[4 * hidden, hidden], scale, rng),
            bias: ParamTensor::uniform(format!("{name}.bias"), &[4 * hidden], scale, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_h.shape()[1]
    }

    pub fn input(&self) -> usize {
        self.w_x.shape()[1]
    }

    /// Returns `(h, c, cache)` for one step.
    pub fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> (Vec<f64>, Vec<f64>, StepCache) {
        let (h, d) = (self.hidden(), self.input());
        let mut gates = self.bias.values.clone();
        for (r, z) in gates.iter_mut().enumerate() {
            let wx = &self.w_x.values[r * d..(r + 1) * d];
            let wh = &self.w_h.values[r * h..(r + 1) * h];
            *z += wx.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            *z += wh.iter().zip(h_prev).map(|(w, v)| w * v).sum::<f64>();
        }
        for k in 0..h {
            gates[k] = sigmoid(gates[k]);
            gates[h + k] = sigmoid(gates[h + k]);
            gates[2 * h + k] = gates[2 * h + k].tanh();
            gates[3 * h + k] = sigmoid(gates[3 * h + k]);
        }
        let mut c = vec![0.0; h];
        let mut hn = vec![0.0; h];
        for k in 0..h {
            c[k] = gates[h + k] * c_prev[k] + gates[k] * gates[2 * h + k];
            hn[k] = gates[3 * h + k] * c[k].tanh();
        }
        let cache = StepCache {
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            gates,
            c: c.clone(),
        };
        (hn, c, cache)
    }

    /// Given dL/dh and dL/dc at this step, accumulates parameter gradients
    /// and returns `(dx, dh_prev, dc_prev)`.
    pub fn step_backward(
        &mut self,
        x: &[f64],
        cache: &StepCache,
        dh: &[f64],
        dc: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (h, d) = (self.hidden(), self.input());
        let g = &cache.gates;
        let mut dz = vec![0.0; 4 * h];
        let mut dc_prev = vec![0.0; h];
        for k in 0..h {
            let (i, f, gg, o) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
            let tc = cache.c[k].tanh();
            let dct = dc[k] + dh[k] * o * (1.0 - tc * tc);
            dz[k] = dct * gg * i * (1.0 - i);
            dz[h + k] = dct * cache.c_prev[k] * f * (1.0 - f);
            dz[2 * h + k] = dct * i * (1.0 - gg * gg);
            dz[3 * h + k] = dh[k] * tc * o * (1.0 - o);
            dc_prev[k] = dct * f;
        }
        let mut dx = vec![0.0; d];
        let mut dh_prev = vec![0.0; h];
        for (r, &z) in dz.iter().enumerate() {
            if z == 0.0 {
                continue;
            }
            self.bias.grad[r] += z;
            let wx = &self.w_x.values[r * d..(r + 1) * d];
            let gx = &mut self.w_x.grad[r * d..(r + 1) * d];
            for j in 0..d {
                gx[j] += z * x[j];
                dx[j] += z * wx[j];
            }
            let wh = &self.w_h.values[r * h..(r + 1) * h];
            let gh = &mut self.w_h.grad[r * h..(r + 1) * h];
            for j in 0..h {
                gh[j] += z * cache.h_prev[j];
                dh_prev[j] += z * wh[j];
            }
        }
        (dx, dh_prev, dc_prev)
    }
}

impl Parameterized for LstmCell {
    fn params(&self) -> Vec<&ParamTensor> {
        vec![&self.w_x, &self.w_h, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.w_x, &mut self.w_h, &mut self.bias]
    }
}

/// Bidirectional LSTM over word embeddings. The final forward and backward
/// hidden states are concatenated and passed through an affine layer.
#[derive(Clone, Debug, PartialEq)]
pub struct BiLstm {
    pub embedding: ParamTensor,
    pub forward_cell: LstmCell,
    pub backward_cell: LstmCell,
    /// `2h → h`
    pub fc: Linear,
}

#[derive(Clone, Debug)]
pub struct BiLstmCache {
    forward_steps: Vec<StepCache>,
    backward_steps: Vec<StepCache>,
    concat: Vec<f64>,
}

impl BiLstm {
    pub fn init<R: Rng>(vocab_size: usize, dim: usize, hidden: usize, rng: &mut R) -> Self {
        BiLstm {
            embedding: init_embedding(vocab_size, dim, rng),
            forward_cell: LstmCell::init("lstm.forward", dim, hidden, rng),
            backward_cell: LstmCell::init("lstm.backward", dim, hidden, rng),
            fc: Linear::init("lstm.fc", 2 * hidden, hidden, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.forward_cell.hidden()
    }

    fn run(&self, cell: &LstmCell, order: impl Iterator<Item = usize>) -> (Vec<f64>, Vec<StepCache>) {
        let h = cell.hidden();
        let (mut hs, mut cs) = (vec![0.0; h], vec![0.0; h]);
        let mut steps = Vec::new();
        for id in order {
            let (hn, cn, cache) = cell.step(self.embedding.row(id), &hs, &cs);
            hs = hn;
            cs = cn;
            steps.push(cache);
        }
        (hs, steps)
    }

    fn check(seq: &TokenSequence) -> Result<()> {
        if seq.true_length == 0 {
            return Err(Error::Degenerate(
                "empty token sequence for the recurrent encoder".into(),
            ));
        }
        Ok(())
    }

    /// Final hidden states of the forward and backward directions.
    pub fn final_states(&self, seq: &TokenSequence) -> Result<(Vec<f64>, Vec<f64>)> {
        Self::check(seq)?;
        let t = seq.tokens();
        let (hf, _) = self.run(&self.forward_cell, t.iter().copied());
        let (hb, _) = self.run(&self.backward_cell, t.iter().rev().copied());
        Ok((hf, hb))
    }

    pub fn forward(&self, seq: &TokenSequence) -> Result<(Vec<f64>, BiLstmCache)> {
        Self::check(seq)?;
        let t = seq.tokens();
        let (hf, forward_steps) = self.run(&self.forward_cell, t.iter().copied());
        let (hb, backward_steps) = self.run(&self.backward_cell, t.iter().rev().copied());
        let mut concat = hf;
        concat.extend(hb);
        let out = self.fc.forward(&concat);
        Ok((
            out,
            BiLstmCache {
                forward_steps,
                backward_steps,
                concat,
            },
        ))
    }

    pub fn backward(&mut self, seq: &TokenSequence, cache: &BiLstmCache, dout: &[f64]) {
        let h = self.hidden();
        let dconcat = self.fc.backward(&cache.concat, dout);
        let t = seq.tokens();
        let forward_ids: Vec<usize> = t.to_vec();
        let backward_ids: Vec<usize> = t.iter().rev().copied().collect();
        let embedding = &mut self.embedding;
        for (cell, steps, ids, dh_final) in [
            (
                &mut self.forward_cell,
                &cache.forward_steps,
                &forward_ids,
                &dconcat[..h],
            ),
            (
                &mut self.backward_cell,
                &cache.backward_steps,
                &backward_ids,
                &dconcat[h..],
            ),
        ] {
            let mut dh = dh_final.to_vec();
            let mut dc = vec![0.0; h];
            for s in (0..steps.len()).rev() {
                let x = embedding.row(ids[s]).to_vec();
                let (dx, dh_prev, dc_prev) = cell.step_backward(&x, &steps[s], &dh, &dc);
                for (g, d) in embedding.grad_row_mut(ids[s]).iter_mut().zip(&dx) {
                    *g += d;
                }
                dh = dh_prev;
                dc = dc_prev;
            }
        }
    }
}

impl Parameterized for BiLstm {
    fn params(&self) -> Vec<&ParamTensor> {
        let mut p = vec![&self.embedding];
        p.extend(self.forward_cell.params());
        p.extend(self.backward_cell.params());
        p.extend(self.fc.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut p = vec![&mut self.embedding];
        p.extend(self.forward_cell.params_mut());
        p.extend(self.backward_cell.params_mut());
        p.extend(self.fc.params_mut());
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_dynamics_give_fc_of_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = BiLstm::init(10, 4, 3, &mut rng);
        m.forward_cell = LstmCell::zeros("lstm.forward", 4, 3);
        m.backward_cell = LstmCell::zeros("lstm.backward", 4, 3);
        let (out, _) = m.forward(&TokenSequence::from_ids(&[2, 5, 7], 8)).unwrap();
        assert_eq!(out, m.fc.forward(&[0.0; 6]));
    }

    #[test]
    fn palindrome_with_tied_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut m = BiLstm::init(10, 4, 3, &mut rng);
        m.backward_cell = m.forward_cell.clone();
        let (hf, hb) = m.final_states(&TokenSequence::from_ids(&[3, 6, 8, 6, 3], 8)).unwrap();
        assert_eq!(hf, hb);
    }

    #[test]
    fn order_sensitive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = BiLstm::init(10, 4, 3, &mut rng);
        let (a, _) = m.forward(&TokenSequence::from_ids(&[2, 3, 4], 8)).unwrap();
        let (b, _) = m.forward(&TokenSequence::from_ids(&[4, 2, 3], 8)).unwrap();
        assert!(a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-6));
    }

    #[test]
    fn empty_sequence_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = BiLstm::init(10, 4, 3, &mut rng);
        assert!(matches!(
            m.forward(&TokenSequence::from_ids(&[], 8)),
            Err(Error::Degenerate(_))
        ));
    }
}
