use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{CMatrix, CVector, Constellation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Part {
    Re,
    Im,
}

/// Which complex layer and which quadrature a real layer belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RealLayer {
    pub layer: usize,
    pub part: Part,
}

/// Real-valued embedding of `y = Hs + n` together with the sorted QR factors
/// used by the tree search.
///
/// Real layer `j < n_t` is the in-phase part of complex layer `j`; real layer
/// `n_t + j` is its quadrature part, matching `h_r = [Re -Im; Im Re]`.
#[derive(Debug, Clone)]
pub struct RealDecomposition {
    pub y_r: DVector<f64>,
    pub h_r: DMatrix<f64>,
    pub layer_map: Vec<RealLayer>,
    /// Thin orthonormal factor of the column-permuted `h_r`.
    pub q: DMatrix<f64>,
    /// Upper-triangular factor with nonnegative diagonal.
    pub r: DMatrix<f64>,
    /// `col_perm[p]` is the real layer placed at position `p` before QR.
    pub col_perm: Vec<usize>,
    /// `q^T y_r`
    pub z: DVector<f64>,
}

impl RealDecomposition {
    pub fn n_real(&self) -> usize {
        self.h_r.ncols()
    }

    pub fn n_t(&self) -> usize {
        self.h_r.ncols() / 2
    }

    /// Exact `||y - Hs||^2` for a vector of level indices in real-layer order.
    pub fn path_metric(&self, c: &Constellation, levels: &[usize]) -> f64 {
        real_metric(&self.h_r, &self.y_r, c, levels)
    }
}

pub fn layer_map(n_t: usize) -> Vec<RealLayer> {
    (0..2 * n_t)
        .map(|j| RealLayer {
            layer: j % n_t,
            part: if j < n_t { Part::Re } else { Part::Im },
        })
        .collect()
}

/// Real layer index of `(layer, part)`.
pub fn real_layer_index(layer: usize, part: Part, n_t: usize) -> usize {
    match part {
        Part::Re => layer,
        Part::Im => layer + n_t,
    }
}

/// `[Re -Im; Im Re]` embedding of `H` and `[Re; Im]` embedding of `y`.
pub fn real_embedding(h: &CMatrix, y: &CVector) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let (n_r, n_t) = h.shape();
    if y.len() != n_r {
        return Err(Error::invalid(format!(
            "received vector has length {} but channel has {} rows",
            y.len(),
            n_r
        )));
    }
    let mut h_r = DMatrix::zeros(2 * n_r, 2 * n_t);
    for row in 0..n_r {
        for col in 0..n_t {
            let v = h[(row, col)];
            h_r[(row, col)] = v.re;
            h_r[(row, col + n_t)] = -v.im;
            h_r[(row + n_r, col)] = v.im;
            h_r[(row + n_r, col + n_t)] = v.re;
        }
    }
    let mut y_r = DVector::zeros(2 * n_r);
    for row in 0..n_r {
        y_r[row] = y[row].re;
        y_r[row + n_r] = y[row].im;
    }
    Ok((h_r, y_r))
}

pub(crate) fn real_metric(
    h_r: &DMatrix<f64>,
    y_r: &DVector<f64>,
    c: &Constellation,
    levels: &[usize],
) -> f64 {
    let mut acc = 0.0;
    for row in 0..h_r.nrows() {
        let mut e = y_r[row];
        for (col, &lv) in levels.iter().enumerate() {
            e -= h_r[(row, col)] * c.level(lv);
        }
        acc += e * e;
    }
    acc
}

pub fn real_decompose(h: &CMatrix, y: &CVector) -> Result<RealDecomposition> {
    let (n_r, n_t) = h.shape();
    if n_t == 0 || n_r < n_t {
        return Err(Error::invalid(format!(
            "need n_r >= n_t >= 1, got {n_r}x{n_t}"
        )));
    }
    let (h_r, y_r) = real_embedding(h, y)?;
    let n = h_r.ncols();

    let norms: Vec<f64> = (0..n).map(|j| h_r.column(j).norm_squared()).collect();
    let mut col_perm: Vec<usize> = (0..n).collect();
    col_perm.sort_by(|&a, &b| norms[a].total_cmp(&norms[b]));

    let permuted = DMatrix::from_fn(h_r.nrows(), n, |row, p| h_r[(row, col_perm[p])]);
    let qr = permuted.qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for k in 0..n {
        if r[(k, k)] < 0.0 {
            r.row_mut(k).neg_mut();
            q.column_mut(k).neg_mut();
        }
    }

    let scale = h_r.norm();
    let tol = 1e-12 * scale;
    if scale == 0.0 || (0..n).any(|k| r[(k, k)] <= tol) {
        return Err(Error::DegenerateChannel(format!(
            "R diagonal below {tol:e}: {:?}",
            (0..n).map(|k| r[(k, k)]).collect::<Vec<_>>()
        )));
    }

    let z = q.transpose() * &y_r;
    Ok(RealDecomposition {
        y_r,
        h_r,
        layer_map: layer_map(n_t),
        q,
        r,
        col_perm,
        z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn identity_embedding() {
        let h = CMatrix::identity(2, 2);
        let y = CVector::from_vec(vec![Complex64::new(0.3, -1.2), Complex64::new(2.0, 0.5)]);
        let dec = real_decompose(&h, &y).unwrap();
        assert_eq!(dec.h_r, DMatrix::identity(4, 4));
        assert_eq!(dec.y_r.as_slice(), &[0.3, 2.0, -1.2, 0.5]);
        assert_eq!(
            dec.layer_map[3],
            RealLayer {
                layer: 1,
                part: Part::Im
            }
        );
        assert_eq!(real_layer_index(1, Part::Im, 2), 3);
    }

    #[test]
    fn weak_column_is_ordered_first() {
        let mut h = CMatrix::identity(3, 3);
        h[(1, 1)] = Complex64::new(1e-3, 0.0);
        let y = CVector::zeros(3);
        let dec = real_decompose(&h, &y).unwrap();
        // the real and imaginary copies of layer 1 are the two weakest
        assert_eq!(&dec.col_perm[..2], &[1, 4]);
        for k in 0..dec.n_real() {
            assert!(dec.r[(k, k)] > 0.0);
        }
        let gram = dec.q.transpose() * &dec.q;
        assert!((gram - DMatrix::identity(6, 6)).abs().max() < 1e-10);
    }

    #[test]
    fn rank_deficient_channel_is_rejected() {
        let mut h = CMatrix::identity(2, 2);
        h[(1, 1)] = Complex64::new(0.0, 0.0);
        let y = CVector::zeros(2);
        assert!(matches!(
            real_decompose(&h, &y),
            Err(Error::DegenerateChannel(_))
        ));
        assert!(real_decompose(&CMatrix::zeros(2, 2), &y).is_err());
        assert!(real_decompose(&CMatrix::identity(2, 3), &y).is_err());
    }
}
