use serde::{Deserialize, Serialize};

/// Row-major dense tensor of `f64`.
///
/// Rank 0 (`shape == []`) is a scalar, rank 1 a vector, rank 2 a matrix.
/// Only the ranks the autodiff tape needs are supported by the kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "tensor data length does not match shape {shape:?}"
        );
        Self { shape, data }
    }

    pub fn scalar(value: f64) -> Self {
        Self::new(Vec::new(), vec![value])
    }

    pub fn vector(data: Vec<f64>) -> Self {
        let n = data.len();
        Self::new(vec![n], data)
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        Self::new(vec![rows, cols], data)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Self::new(shape.to_vec(), vec![value; n])
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
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

    pub fn rows(&self) -> usize {
        self.dim2().0
    }

    pub fn cols(&self) -> usize {
        self.dim2().1
    }

    fn dim2(&self) -> (usize, usize) {
        assert_eq!(self.shape.len(), 2, "expected a matrix, got shape {:?}", self.shape);
        (self.shape[0], self.shape[1])
    }

    /// Value of a rank-0 tensor (or the single element of any 1-element tensor).
    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on tensor of shape {:?}", self.shape);
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor::new(self.shape.clone(), self.data.iter().map(|&x| f(x)).collect())
    }

    pub fn zip(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        assert_eq!(self.shape, other.shape, "elementwise shape mismatch");
        Tensor::new(
            self.shape.clone(),
            self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn matmul(&self, other: &Tensor) -> Tensor {
        let (n, k) = self.dim2();
        let (k2, m) = other.dim2();
        assert_eq!(k, k2, "matmul inner dimension mismatch {:?} x {:?}", self.shape, other.shape);
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let row = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let b = &other.data[p * m..(p + 1) * m];
                for (o, &bv) in row.iter_mut().zip(b) {
                    *o += a * bv;
                }
            }
        }
        Tensor::matrix(n, m, out)
    }

    pub fn transpose(&self) -> Tensor {
        let (n, m) = self.dim2();
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                out[j * n + i] = self.data[i * m + j];
            }
        }
        Tensor::matrix(m, n, out)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// `[n, m] -> [m]`, summing over the leading (batch) axis.
    pub fn sum_rows(&self) -> Tensor {
        let (n, m) = self.dim2();
        let mut out = vec![0.0; m];
        for i in 0..n {
            for (o, &x) in out.iter_mut().zip(&self.data[i * m..(i + 1) * m]) {
                *o += x;
            }
        }
        Tensor::vector(out)
    }

    /// `[m] -> [n, m]`, repeating the vector as every row.
    pub fn spread_rows(&self, n: usize) -> Tensor {
        assert_eq!(self.shape.len(), 1, "spread_rows expects a vector");
        let m = self.data.len();
        let mut out = Vec::with_capacity(n * m);
        for _ in 0..n {
            out.extend_from_slice(&self.data);
        }
        Tensor::matrix(n, m, out)
    }

    /// `[n, m] -> [n]`, summing each row.
    pub fn sum_cols(&self) -> Tensor {
        let (n, m) = self.dim2();
        Tensor::vector((0..n).map(|i| self.data[i * m..(i + 1) * m].iter().sum()).collect())
    }

    /// `[n] -> [n, m]`, repeating each entry across its row.
    pub fn spread_cols(&self, m: usize) -> Tensor {
        assert_eq!(self.shape.len(), 1, "spread_cols expects a vector");
        let n = self.data.len();
        let mut out = Vec::with_capacity(n * m);
        for &x in &self.data {
            out.extend(std::iter::repeat_n(x, m));
        }
        Tensor::matrix(n, m, out)
    }

    /// Row-wise maximum of a matrix.
    pub fn row_max(&self) -> Tensor {
        let (n, m) = self.dim2();
        Tensor::vector(
            (0..n)
                .map(|i| {
                    self.data[i * m..(i + 1) * m]
                        .iter()
                        .copied()
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_matches_hand_computation() {
        let a = Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Tensor::matrix(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = a.matmul(&b);
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn reductions_and_broadcasts_are_adjoint_shapes() {
        let a = Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(a.sum_rows().data(), &[5.0, 7.0, 9.0]);
        assert_eq!(a.sum_cols().data(), &[6.0, 15.0]);
        assert_eq!(Tensor::vector(vec![1.0, 2.0]).spread_cols(2).data(), &[1.0, 1.0, 2.0, 2.0]);
        assert_eq!(Tensor::vector(vec![1.0, 2.0]).spread_rows(2).data(), &[1.0, 2.0, 1.0, 2.0]);
        assert_eq!(a.transpose().transpose(), a);
    }

    #[test]
    #[should_panic]
    fn mismatched_data_length_panics() {
        let _ = Tensor::new(vec![2, 2], vec![1.0]);
    }
}
