use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Constellation;
use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    IdentityAwgn,
    IidRayleigh,
    KroneckerRayleigh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModelConfig {
    pub kind: ChannelKind,
    #[serde(default)]
    pub rho_t: f64,
    #[serde(default)]
    pub rho_r: f64,
}

impl ChannelModelConfig {
    pub fn identity() -> Self {
        Self {
            kind: ChannelKind::IdentityAwgn,
            rho_t: 0.0,
            rho_r: 0.0,
        }
    }

    pub fn iid_rayleigh() -> Self {
        Self {
            kind: ChannelKind::IidRayleigh,
            rho_t: 0.0,
            rho_r: 0.0,
        }
    }

    pub fn kronecker(rho_t: f64, rho_r: f64) -> Self {
        Self {
            kind: ChannelKind::KroneckerRayleigh,
            rho_t,
            rho_r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, rho) in [("rho_t", self.rho_t), ("rho_r", self.rho_r)] {
            if !(0.0..1.0).contains(&rho) {
                return Err(Error::invalid(format!(
                    "{name} must lie in [0, 1), got {rho}"
                )));
            }
        }
        Ok(())
    }
}

/// One flat-fading channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: CMatrix,
    /// Noise variance per complex receive entry.
    pub noise_var: f64,
}

impl ChannelRealization {
    pub fn new(h: CMatrix, noise_var: f64) -> Result<Self> {
        if h.nrows() < h.ncols() {
            return Err(Error::invalid(format!(
                "need n_r >= n_t, got {}x{}",
                h.nrows(),
                h.ncols()
            )));
        }
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(Error::invalid(format!(
                "noise variance must be positive, got {noise_var}"
            )));
        }
        if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("channel matrix has non-finite entries"));
        }
        Ok(Self { h, noise_var })
    }
}

/// Noise variance for a target SNR `E||Hs||^2 / E||n||^2`, assuming unit
/// average gain per channel entry.
pub fn noise_var_from_snr(
    snr_db: f64,
    n_t: usize,
    c: &Constellation,
    model: &ChannelModelConfig,
) -> Result<f64> {
    if n_t == 0 {
        return Err(Error::invalid("n_t must be at least 1"));
    }
    if !snr_db.is_finite() {
        return Err(Error::invalid(format!("SNR must be finite, got {snr_db}")));
    }
    let snr = 10f64.powf(snr_db / 10.0);
    let es = c.symbol_energy();
    Ok(match model.kind {
        ChannelKind::IdentityAwgn => es / snr,
        ChannelKind::IidRayleigh | ChannelKind::KroneckerRayleigh => n_t as f64 * es / snr,
    })
}

/// Exponential correlation matrix `R(i, j) = rho^|i-j|`.
pub fn exponential_correlation(n: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| rho.powi((i as i32 - j as i32).abs()))
}

/// Principal square root of a symmetric positive semidefinite matrix.
pub fn psd_sqrt(r: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(r.clone());
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose()
}

fn correlation_root(n: usize, rho: f64) -> DMatrix<f64> {
    if rho == 0.0 {
        DMatrix::identity(n, n)
    } else {
        psd_sqrt(&exponential_correlation(n, rho))
    }
}

/// Circularly-symmetric complex Gaussian sample with variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let scale = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}

fn iid_matrix<R: Rng + ?Sized>(n_r: usize, n_t: usize, rng: &mut R) -> CMatrix {
    // column-major fill order is part of the reproducibility contract
    let mut h = CMatrix::zeros(n_r, n_t);
    for col in 0..n_t {
        for row in 0..n_r {
            h[(row, col)] = complex_gaussian(rng, 1.0);
        }
    }
    h
}

pub fn draw_channel<R: Rng + ?Sized>(
    cfg: &ChannelModelConfig,
    n_r: usize,
    n_t: usize,
    rng: &mut R,
) -> Result<CMatrix> {
    if n_t == 0 || n_r == 0 {
        return Err(Error::invalid("channel dimensions must be positive"));
    }
    if n_r < n_t {
        return Err(Error::invalid(format!("need n_r >= n_t, got {n_r}x{n_t}")));
    }
    cfg.validate()?;
    Ok(match cfg.kind {
        ChannelKind::IdentityAwgn => {
            let mut h = CMatrix::zeros(n_r, n_t);
            for k in 0..n_t {
                h[(k, k)] = Complex64::new(1.0, 0.0);
            }
            h
        }
        ChannelKind::IidRayleigh => iid_matrix(n_r, n_t, rng),
        ChannelKind::KroneckerRayleigh => {
            let a = iid_matrix(n_r, n_t, rng);
            let rr = correlation_root(n_r, cfg.rho_r).map(|x| Complex64::new(x, 0.0));
            let rt = correlation_root(n_t, cfg.rho_t).map(|x| Complex64::new(x, 0.0));
            rr * a * rt
        }
    })
}

/// `y = Hs + n` with `n ~ CN(0, noise_var I)`.
pub fn transmit<R: Rng + ?Sized>(
    h: &CMatrix,
    s: &[Complex64],
    noise_var: f64,
    rng: &mut R,
) -> Result<CVector> {
    if h.ncols() != s.len() {
        return Err(Error::invalid(format!(
            "channel has {} columns but {} symbols were given",
            h.ncols(),
            s.len()
        )));
    }
    if noise_var.is_nan() || noise_var < 0.0 {
        return Err(Error::invalid("noise variance must be nonnegative"));
    }
    let mut y = h * CVector::from_column_slice(s);
    if noise_var > 0.0 {
        for v in y.iter_mut() {
            *v += complex_gaussian(rng, noise_var);
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn snr_conversion_examples() {
        let c16 = Constellation::new(4).unwrap();
        let v = noise_var_from_snr(0.0, 4, &c16, &ChannelModelConfig::iid_rayleigh()).unwrap();
        assert!((v - 40.0).abs() < 1e-12);
        let c4 = Constellation::new(2).unwrap();
        let v = noise_var_from_snr(10.0, 1, &c4, &ChannelModelConfig::identity()).unwrap();
        assert!((v - 0.2).abs() < 1e-12);
        let v = noise_var_from_snr(400.0, 4, &c16, &ChannelModelConfig::iid_rayleigh()).unwrap();
        assert!(v < 1e-30);
        assert!(noise_var_from_snr(0.0, 0, &c16, &ChannelModelConfig::iid_rayleigh()).is_err());
    }

    #[test]
    fn snr_conversion_is_strictly_decreasing() {
        let c = Constellation::new(4).unwrap();
        let cfg = ChannelModelConfig::kronecker(0.3, 0.3);
        let mut prev = f64::INFINITY;
        for step in -40..80 {
            let v = noise_var_from_snr(step as f64 * 0.5, 4, &c, &cfg).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn identity_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = draw_channel(&ChannelModelConfig::identity(), 4, 4, &mut rng).unwrap();
        assert_eq!(h, CMatrix::identity(4, 4));
    }

    #[test]
    fn kronecker_without_correlation_is_bit_exact_iid() {
        let a = draw_channel(
            &ChannelModelConfig::iid_rayleigh(),
            4,
            3,
            &mut ChaCha8Rng::seed_from_u64(9),
        )
        .unwrap();
        let b = draw_channel(
            &ChannelModelConfig::kronecker(0.0, 0.0),
            4,
            3,
            &mut ChaCha8Rng::seed_from_u64(9),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let r = exponential_correlation(4, 0.3);
        let s = psd_sqrt(&r);
        assert!((&s * &s - &r).abs().max() < 1e-12);
        assert!((&s - s.transpose()).abs().max() < 1e-14);
    }

    #[test]
    fn rejects_bad_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = ChannelModelConfig::iid_rayleigh();
        assert!(draw_channel(&cfg, 0, 0, &mut rng).is_err());
        assert!(draw_channel(&cfg, 2, 4, &mut rng).is_err());
        assert!(draw_channel(&ChannelModelConfig::kronecker(1.0, 0.2), 4, 4, &mut rng).is_err());
        let h = CMatrix::identity(2, 2);
        assert!(transmit(&h, &[Complex64::new(1.0, 0.0)], 1.0, &mut rng).is_err());
        assert!(ChannelRealization::new(CMatrix::identity(2, 3), 1.0).is_err());
        assert!(ChannelRealization::new(CMatrix::identity(3, 2), 0.0).is_err());
    }

    #[test]
    fn noiseless_transmit_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = draw_channel(&ChannelModelConfig::iid_rayleigh(), 4, 4, &mut rng).unwrap();
        let s: Vec<Complex64> = (0..4).map(|k| Complex64::new(k as f64, -1.0)).collect();
        let y = transmit(&h, &s, 0.0, &mut rng).unwrap();
        assert_eq!(y, &h * CVector::from_column_slice(&s));
    }
}
