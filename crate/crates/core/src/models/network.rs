//! Dense feed-forward inference engine.

use super::{check_latent, Classifier, Generator, Image};
use crate::error::{ProbeError, Result};
use crate::latent::{LatentVector, ProbabilityVector};

/// Fully connected layer, `out = W x + b` with `W` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(ProbeError::Validation("dense layer with zero width".into()));
        }
        if weights.len() != rows * cols {
            return Err(ProbeError::Validation(format!(
                "dense {rows}x{cols} needs {} weights, got {}",
                rows * cols,
                weights.len()
            )));
        }
        if bias.len() != rows {
            return Err(ProbeError::Validation(format!(
                "dense {rows}x{cols} needs {rows} biases, got {}",
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(ProbeError::Validation("non-finite parameter".into()));
        }
        Ok(Self {
            rows,
            cols,
            weights,
            bias,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.cols)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(Dense),
    Relu,
    Tanh,
    Sigmoid,
    Softmax,
}

impl Layer {
    fn apply(&self, x: Vec<f64>) -> Vec<f64> {
        match self {
            Layer::Dense(d) => d.apply(&x),
            Layer::Relu => x.into_iter().map(|v| v.max(0.0)).collect(),
            Layer::Tanh => x.into_iter().map(f64::tanh).collect(),
            Layer::Sigmoid => x.into_iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect(),
            Layer::Softmax => {
                let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
                let total: f64 = exps.iter().sum();
                exps.into_iter().map(|e| e / total).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Generator,
    Classifier,
}

/// A validated dense network with a declared role.
///
/// For generators `image_shape` is the output image; for classifiers it is
/// the expected input image, or `(0, 0)` when unspecified.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    role: Role,
    input_width: usize,
    output_width: usize,
    image_shape: (usize, usize),
    layers: Vec<Layer>,
}

impl NetworkModel {
    pub fn new(
        role: Role,
        input_width: usize,
        output_width: usize,
        image_shape: (usize, usize),
        layers: Vec<Layer>,
    ) -> Result<Self> {
        let model = Self {
            role,
            input_width,
            output_width,
            image_shape,
            layers,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(ProbeError::Validation(m));
        if self.input_width == 0 {
            return fail("input width must be >= 1".into());
        }
        let mut width = self.input_width;
        for (i, layer) in self.layers.iter().enumerate() {
            if let Layer::Dense(d) = layer {
                if d.cols != width {
                    return fail(format!(
                        "layer {i}: dense expects width {}, receives {width}",
                        d.cols
                    ));
                }
                width = d.rows;
            }
        }
        if width != self.output_width {
            return fail(format!(
                "declared output width {} but layers produce {width}",
                self.output_width
            ));
        }
        let (h, w) = self.image_shape;
        match self.role {
            Role::Generator => {
                if self.layers.last() != Some(&Layer::Tanh) {
                    return fail("generator must end in tanh".into());
                }
                if h * w != self.output_width {
                    return fail(format!(
                        "generator image {h}x{w} does not match output width {}",
                        self.output_width
                    ));
                }
            }
            Role::Classifier => {
                if self.layers.last() != Some(&Layer::Softmax) {
                    return fail("classifier must end in softmax".into());
                }
                if (h, w) != (0, 0) && h * w != self.input_width {
                    return fail(format!(
                        "classifier image {h}x{w} does not match input width {}",
                        self.input_width
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn output_width(&self) -> usize {
        self.output_width
    }

    pub fn image_shape(&self) -> (usize, usize) {
        self.image_shape
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Raw forward pass over a flat input.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_width {
            return Err(ProbeError::Shape {
                what: "network input",
                expected: self.input_width,
                actual: input.len(),
            });
        }
        let out = self
            .layers
            .iter()
            .fold(input.to_vec(), |x, layer| layer.apply(x));
        if out.iter().any(|v| !v.is_finite()) {
            return Err(ProbeError::numeric(None, "non-finite network output"));
        }
        Ok(out)
    }

    fn require(&self, role: Role) -> Result<()> {
        if self.role != role {
            return Err(ProbeError::invalid(format!(
                "model role is {:?}, expected {role:?}",
                self.role
            )));
        }
        Ok(())
    }
}

impl Generator for NetworkModel {
    fn latent_width(&self) -> usize {
        self.input_width
    }

    fn image_shape(&self) -> (usize, usize) {
        self.image_shape
    }

    fn generate(&self, z: &LatentVector) -> Result<Image> {
        self.require(Role::Generator)?;
        check_latent(self, z)?;
        let (h, w) = self.image_shape;
        Image::new(h, w, self.forward(z.values())?)
    }
}

impl Classifier for NetworkModel {
    fn input_width(&self) -> usize {
        self.input_width
    }

    fn num_classes(&self) -> usize {
        self.output_width
    }

    fn classify(&self, x: &Image) -> Result<ProbabilityVector> {
        self.require(Role::Classifier)?;
        ProbabilityVector::new(self.forward(x.pixels())?)
    }
}
