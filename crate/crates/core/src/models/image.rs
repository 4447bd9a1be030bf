use crate::error::{ProbeError, Result};

/// Grayscale image with intensities in `[-1, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != height * width {
            return Err(ProbeError::Shape {
                what: "image pixels",
                expected: height * width,
                actual: pixels.len(),
            });
        }
        if let Some(i) = pixels.iter().position(|p| !(-1.0..=1.0).contains(p)) {
            return Err(ProbeError::numeric(
                None,
                format!("pixel {i} = {} outside [-1,1]", pixels[i]),
            ));
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    /// Pixelwise `self - other`; may leave `[-1, 1]`, so returned raw.
    pub fn difference(&self, other: &Image) -> Result<Vec<f64>> {
        if self.pixels.len() != other.pixels.len() {
            return Err(ProbeError::Shape {
                what: "image difference",
                expected: self.pixels.len(),
                actual: other.pixels.len(),
            });
        }
        Ok(self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| a - b)
            .collect())
    }
}
