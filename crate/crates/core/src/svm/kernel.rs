use crate::error::{Error, Result};

/// Row-major sample matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Samples {
    pub data: Vec<f64>,
    pub dim: usize,
}

impl Samples {
    pub fn new(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} values do not form rows of width {dim}",
                data.len()
            )));
        }
        Ok(Samples { data, dim })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::Alignment {
                left: dim,
                right: bad.len(),
            });
        }
        Samples::new(rows.concat(), dim)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn select(&self, idx: &[usize]) -> Samples {
        let mut data = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Samples { data, dim: self.dim }
    }
}

pub fn squared_distance(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `exp(-|u - v|^2 / (2 z^2))`.
pub fn rbf_kernel(u: &[f64], v: &[f64], z: f64) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Alignment {
            left: u.len(),
            right: v.len(),
        });
    }
    if !(z > 0.0) {
        return Err(Error::InvalidArgument(format!("kernel width {z} must be > 0")));
    }
    Ok(rbf_from_distance(squared_distance(u, v), z))
}

#[inline]
pub fn rbf_from_distance(d2: f64, z: f64) -> f64 {
    (-d2 / (2.0 * z * z)).exp()
}

/// Pairwise squared distances, `a.len() × b.len()` row-major.
pub fn distance_matrix(a: &Samples, b: &Samples) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for u in a.rows() {
        for v in b.rows() {
            out.push(squared_distance(u, v));
        }
    }
    out
}

pub fn kernel_from_distances(d2: &[f64], z: f64) -> Vec<f64> {
    let scale = -1.0 / (2.0 * z * z);
    d2.iter().map(|d| (d * scale).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kernel_examples() {
        assert_eq!(rbf_kernel(&[1.0, 2.0], &[1.0, 2.0], 0.7).unwrap(), 1.0);
        // |u - v|^2 = 2 z^2
        let z = 1.5;
        let v = rbf_kernel(&[0.0, 0.0], &[z, z], z).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.36788).abs() < 1e-5);
        assert!(rbf_kernel(&[0.0], &[0.0, 1.0], 1.0).is_err());
        assert!(rbf_kernel(&[0.0], &[1.0], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn kernel_symmetric_and_bounded(u in prop::collection::vec(-5.0f64..5.0, 3),
                                        v in prop::collection::vec(-5.0f64..5.0, 3),
                                        z in 0.03f64..32.0) {
            let a = rbf_kernel(&u, &v, z).unwrap();
            let b = rbf_kernel(&v, &u, z).unwrap();
            prop_assert!((a - b).abs() <= 1e-15);
            prop_assert!(a >= 0.0 && a <= 1.0);
        }

        #[test]
        fn gram_is_positive_semidefinite(pts in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 2..9),
                                         w in prop::collection::vec(-1.0f64..1.0, 9),
                                         z in 0.1f64..8.0) {
            let s = Samples::from_rows(&pts).unwrap();
            let k = kernel_from_distances(&distance_matrix(&s, &s), z);
            let n = pts.len();
            let mut quad = 0.0;
            for i in 0..n {
                prop_assert_eq!(k[i * n + i], 1.0);
                for j in 0..n {
                    quad += w[i] * k[i * n + j] * w[j];
                }
            }
            prop_assert!(quad >= -1e-12);
        }
    }
}
