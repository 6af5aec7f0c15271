use rand::Rng;

use super::tensor::{ParamTensor, Parameterized};

/// `y = W x + b` with `W` stored row-major as `out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: ParamTensor,
    pub bias: ParamTensor,
}

impl Linear {
    pub fn zeros(name: &str, input: usize, output: usize) -> Self {
        Linear {
            weight: ParamTensor::zeros(format!("{name}.weight"), &[output, input]),
            bias: ParamTensor::zeros(format!("{name}.bias"), &[output]),
        }
    }

    /// Weights and biases uniform in ±1/√in.
    pub fn init<R: Rng>(name: &str, input: usize, output: usize, rng: &mut R) -> Self {
        let scale = 1.0 / (input.max(1) as f64).sqrt();
        Linear {
            weight: ParamTensor::uniform(format!("{name}.weight"), &[output, input], scale, rng),
            bias: ParamTensor::uniform(format!("{name}.bias"), &[output], scale, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input_dim());
        let n = self.input_dim();
        self.bias
            .values
            .iter()
            .enumerate()
            .map(|(o, b)| {
                let row = &self.weight.values[o * n..(o + 1) * n];
                b + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>()
            })
            .collect()
    }

    /// Accumulates parameter gradients and returns dL/dx.
    pub fn backward(&mut self, x: &[f64], dy: &[f64]) -> Vec<f64> {
        let n = self.input_dim();
        let mut dx = vec![0.0; n];
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            self.bias.grad[o] += g;
            let row = &self.weight.values[o * n..(o + 1) * n];
            let grow = &mut self.weight.grad[o * n..(o + 1) * n];
            for i in 0..n {
                grow[i] += g * x[i];
                dx[i] += g * row[i];
            }
        }
        dx
    }
}

impl Parameterized for Linear {
    fn params(&self) -> Vec<&ParamTensor> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}
