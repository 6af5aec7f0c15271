use rand::Rng;

/// A named, row-major parameter block with its gradient accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamTensor {
    name: String,
    shape: Vec<usize>,
    pub values: Vec<f64>,
    pub grad: Vec<f64>,
    sparse_rows: bool,
}

impl ParamTensor {
    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        let n = shape.iter().product();
        ParamTensor {
            name: name.into(),
            shape: shape.to_vec(),
            values: vec![0.0; n],
            grad: vec![0.0; n],
            sparse_rows: false,
        }
    }

    /// Uniform in `[-scale, scale]`.
    pub fn uniform<R: Rng>(name: impl Into<String>, shape: &[usize], scale: f64, rng: &mut R) -> Self {
        let mut t = Self::zeros(name, shape);
        for v in &mut t.values {
            *v = rng.gen_range(-scale..=scale);
        }
        t
    }

    pub fn from_values(name: impl Into<String>, shape: &[usize], values: Vec<f64>) -> Self {
        let n: usize = shape.iter().product();
        assert_eq!(n, values.len(), "values do not match shape {shape:?}");
        ParamTensor {
            name: name.into(),
            shape: shape.to_vec(),
            grad: vec![0.0; n],
            values,
            sparse_rows: false,
        }
    }

    /// Marks a lookup table: optimizers leave rows with an all-zero
    /// gradient, and their running statistics, untouched.
    pub fn with_sparse_rows(mut self) -> Self {
        self.sparse_rows = true;
        self
    }

    pub fn has_sparse_rows(&self) -> bool {
        self.sparse_rows
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Row `r` of a 2-d tensor.
    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.shape[1];
        &self.values[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.shape[1];
        &mut self.values[r * c..(r + 1) * c]
    }

    pub fn grad_row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.shape[1];
        &mut self.grad[r * c..(r + 1) * c]
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Anything that owns parameter tensors in a fixed traversal order.
pub trait Parameterized {
    fn params(&self) -> Vec<&ParamTensor>;
    fn params_mut(&mut self) -> Vec<&mut ParamTensor>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

impl Parameterized for ParamTensor {
    fn params(&self) -> Vec<&ParamTensor> {
        vec![self]
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![self]
    }
}
