use std::fmt;

use crate::s3::S3Error;

/// Dense row-major `f64` array.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, S3Error> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(S3Error::ShapeMismatch(format!("invalid shape {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(S3Error::ShapeMismatch(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, S3Error> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(S3Error::ShapeMismatch("ragged rows".into()));
        }
        Self::new(vec![rows.len(), cols], rows.concat())
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

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, what: &str) -> Result<(), S3Error> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(S3Error::NonFinite(what.to_string()))
        }
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self, S3Error> {
        let n: usize = shape.iter().product();
        if n != self.data.len() || shape.contains(&0) {
            return Err(S3Error::ShapeMismatch(format!(
                "cannot reshape {:?} to {shape:?}",
                self.shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    fn dims2(&self, what: &str) -> Result<(usize, usize), S3Error> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(S3Error::ShapeMismatch(format!("{what}: expected a matrix, got {:?}", self.shape))),
        }
    }

    /// Rows and columns of a 2-D tensor.
    pub fn dims(&self) -> Result<(usize, usize), S3Error> {
        self.dims2("tensor")
    }

    /// Row `i` of a 2-D tensor.
    pub fn row(&self, i: usize) -> &[f64] {
        let cols = *self.shape.last().expect("non-empty shape");
        &self.data[i * cols..(i + 1) * cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let cols = *self.shape.last().expect("non-empty shape");
        &mut self.data[i * cols..(i + 1) * cols]
    }

    /// `self · other`
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor, S3Error> {
        let (n, k) = self.dims2("matmul lhs")?;
        let (k2, m) = other.dims2("matmul rhs")?;
        if k != k2 {
            return Err(S3Error::ShapeMismatch(format!(
                "matmul {:?} x {:?}",
                self.shape, other.shape
            )));
        }
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let row = &mut out[i * m..(i + 1) * m];
            for (p, &a) in self.data[i * k..(i + 1) * k].iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in row.iter_mut().zip(&other.data[p * m..(p + 1) * m]) {
                    *o += a * b;
                }
            }
        }
        Ok(Tensor {
            shape: vec![n, m],
            data: out,
        })
    }

    /// `self · otherᵀ`
    pub fn matmul_t(&self, other: &Tensor) -> Result<Tensor, S3Error> {
        let (n, k) = self.dims2("matmul_t lhs")?;
        let (m, k2) = other.dims2("matmul_t rhs")?;
        if k != k2 {
            return Err(S3Error::ShapeMismatch(format!(
                "matmul_t {:?} x {:?}ᵀ",
                self.shape, other.shape
            )));
        }
        let mut out = Vec::with_capacity(n * m);
        for i in 0..n {
            let a = &self.data[i * k..(i + 1) * k];
            for j in 0..m {
                let b = &other.data[j * k..(j + 1) * k];
                out.push(a.iter().zip(b).map(|(x, y)| x * y).sum());
            }
        }
        Ok(Tensor {
            shape: vec![n, m],
            data: out,
        })
    }

    /// `selfᵀ · other`
    pub fn t_matmul(&self, other: &Tensor) -> Result<Tensor, S3Error> {
        let (k, n) = self.dims2("t_matmul lhs")?;
        let (k2, m) = other.dims2("t_matmul rhs")?;
        if k != k2 {
            return Err(S3Error::ShapeMismatch(format!(
                "t_matmul {:?}ᵀ x {:?}",
                self.shape, other.shape
            )));
        }
        let mut out = vec![0.0; n * m];
        for p in 0..k {
            let a = &self.data[p * n..(p + 1) * n];
            let b = &other.data[p * m..(p + 1) * m];
            for (i, &x) in a.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                for (o, &y) in out[i * m..(i + 1) * m].iter_mut().zip(b) {
                    *o += x * y;
                }
            }
        }
        Ok(Tensor {
            shape: vec![n, m],
            data: out,
        })
    }

    pub fn scale(&self, s: f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<(), S3Error> {
        if self.shape != other.shape {
            return Err(S3Error::ShapeMismatch(format!(
                "add {:?} + {:?}",
                self.shape, other.shape
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Stacks 2-D tensors with equal column counts.
    pub fn concat_rows(parts: &[&Tensor]) -> Result<Tensor, S3Error> {
        let first = parts
            .first()
            .ok_or_else(|| S3Error::ShapeMismatch("nothing to concatenate".into()))?;
        let (_, cols) = first.dims2("concat")?;
        let mut rows = 0;
        let mut data = Vec::new();
        for t in parts {
            let (r, c) = t.dims2("concat")?;
            if c != cols {
                return Err(S3Error::ShapeMismatch(format!(
                    "concat: {c} columns vs {cols}"
                )));
            }
            rows += r;
            data.extend_from_slice(&t.data);
        }
        Ok(Tensor {
            shape: vec![rows, cols],
            data,
        })
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn shape_checks() {
        assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::new(vec![0], vec![]).is_err());
        assert!(m(&[&[1.0, 2.0]]).matmul(&m(&[&[1.0, 2.0]])).is_err());
    }

    #[test]
    fn products_agree() {
        let a = m(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        let b = m(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        assert_eq!(a.matmul(&b).unwrap(), m(&[&[4.0, 5.0], &[10.0, 11.0]]));
        let bt = m(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0]]);
        assert_eq!(a.matmul_t(&bt).unwrap(), a.matmul(&b).unwrap());
        let at = m(&[&[1.0, 4.0], &[2.0, 5.0], &[3.0, 6.0]]);
        assert_eq!(at.t_matmul(&b).unwrap(), a.matmul(&b).unwrap());
    }

    #[test]
    fn concat() {
        let a = m(&[&[1.0, 2.0]]);
        let b = m(&[&[3.0, 4.0], &[5.0, 6.0]]);
        let c = Tensor::concat_rows(&[&a, &b]).unwrap();
        assert_eq!(c.shape(), &[3, 2]);
        assert_eq!(c.row(2), &[5.0, 6.0]);
    }
}
