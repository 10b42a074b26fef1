use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major array of `f64` values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::dimension(format!("{n} values for shape {shape:?}"), data.len()));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Leading (batch) extent.
    pub fn batch(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    /// Number of values per batch item.
    pub fn item_len(&self) -> usize {
        self.shape.iter().skip(1).product()
    }

    pub fn item(&self, i: usize) -> &[f64] {
        let k = self.item_len();
        &self.data[i * k..(i + 1) * k]
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    /// `(n, c, h, w)` of a rank-4 tensor.
    pub fn dims4(&self) -> Result<(usize, usize, usize, usize)> {
        match self.shape[..] {
            [n, c, h, w] => Ok((n, c, h, w)),
            _ => Err(Error::dimension("rank-4 tensor", format!("{:?}", self.shape))),
        }
    }

    /// Stacks equally sized items along a new leading axis.
    pub fn stack<'a>(items: impl IntoIterator<Item = &'a [f64]>, item_shape: &[usize]) -> Result<Self> {
        let k: usize = item_shape.iter().product();
        let mut data = Vec::new();
        let mut n = 0;
        for it in items {
            if it.len() != k {
                return Err(Error::dimension(k, it.len()));
            }
            data.extend_from_slice(it);
            n += 1;
        }
        let mut shape = vec![n];
        shape.extend_from_slice(item_shape);
        Ok(Self { shape, data })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if pred.shape() != target.shape() {
        return Err(Error::dimension(format!("{:?}", target.shape()), format!("{:?}", pred.shape())));
    }
    let n = pred.len().max(1) as f64;
    let mut loss = 0.0;
    let grad: Vec<f64> = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((loss / n, Tensor::new(pred.shape().to_vec(), grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_pixel_mse() {
        let p = Tensor::new(vec![1, 2], vec![0.5, 0.5]).unwrap();
        let t = Tensor::new(vec![1, 2], vec![0.0, 1.0]).unwrap();
        let (l, g) = mse(&p, &t).unwrap();
        assert_eq!(l, 0.25);
        assert_eq!(g.data(), &[0.5, -0.5]);
    }

    #[test]
    fn shape_checks() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        let t = Tensor::zeros(vec![2, 3]);
        assert!(t.clone().reshape(vec![3, 2]).is_ok());
        assert!(t.dims4().is_err());
    }
}
