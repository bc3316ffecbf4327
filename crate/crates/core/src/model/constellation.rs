use num_complex::Complex64;

use crate::error::{Error, Result};

/// Square QAM on the unnormalised odd-integer lattice.
///
/// Each real dimension carries `2M` PAM levels `2(i - M) + 1`, labelled with
/// the reflected binary Gray code of the level index. The first half of a
/// symbol's bits label the in-phase dimension (most significant bit first),
/// the second half the quadrature dimension. The most significant bit of a
/// dimension is 1 exactly on the positive levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    bits_per_symbol: usize,
    half_levels: usize,
    pam_levels: Vec<f64>,
    /// level index -> Gray label
    gray: Vec<u32>,
    /// Gray label -> level index
    gray_inv: Vec<usize>,
}

impl Constellation {
    /// Builds the square constellation with `m_c` bits per symbol.
    pub fn new(m_c: usize) -> Result<Self> {
        if !matches!(m_c, 2 | 4 | 6 | 8) {
            return Err(Error::invalid(format!(
                "bits per symbol must be one of 2, 4, 6, 8 (got {m_c})"
            )));
        }
        let bits_per_dim = m_c / 2;
        let n_levels = 1usize << bits_per_dim;
        let half_levels = n_levels / 2;
        let pam_levels = (0..n_levels)
            .map(|i| 2.0 * (i as f64 - half_levels as f64) + 1.0)
            .collect();
        let gray: Vec<u32> = (0..n_levels as u32).map(|i| i ^ (i >> 1)).collect();
        let mut gray_inv = vec![0; n_levels];
        for (idx, &g) in gray.iter().enumerate() {
            gray_inv[g as usize] = idx;
        }
        Ok(Self {
            bits_per_symbol: m_c,
            half_levels,
            pam_levels,
            gray,
            gray_inv,
        })
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn bits_per_dim(&self) -> usize {
        self.bits_per_symbol / 2
    }

    /// `M`, half the number of levels per dimension.
    pub fn half_levels(&self) -> usize {
        self.half_levels
    }

    pub fn levels_per_dim(&self) -> usize {
        self.pam_levels.len()
    }

    pub fn pam_levels(&self) -> &[f64] {
        &self.pam_levels
    }

    pub fn level(&self, idx: usize) -> f64 {
        self.pam_levels[idx]
    }

    pub fn gray_label(&self, idx: usize) -> u32 {
        self.gray[idx]
    }

    pub fn level_of_label(&self, label: u32) -> usize {
        self.gray_inv[label as usize]
    }

    /// Bit `k` (0 = most significant) of the label of level `idx`.
    pub fn level_bit(&self, idx: usize, k: usize) -> bool {
        let shift = self.bits_per_dim() - 1 - k;
        (self.gray[idx] >> shift) & 1 == 1
    }

    /// Average energy of a complex symbol, `2 (4M^2 - 1) / 3`.
    pub fn symbol_energy(&self) -> f64 {
        let per_dim =
            self.pam_levels.iter().map(|x| x * x).sum::<f64>() / self.pam_levels.len() as f64;
        2.0 * per_dim
    }

    /// Index of the level nearest to `x`.
    pub fn nearest_level(&self, x: f64) -> usize {
        let n = self.levels_per_dim() as f64;
        let idx = ((x - 1.0) / 2.0 + self.half_levels as f64).round();
        idx.clamp(0.0, n - 1.0) as usize
    }

    /// Maps one dimension's bits (MSB first) to a level index.
    fn dim_level(&self, bits: &[u8]) -> usize {
        let label = bits.iter().fold(0u32, |acc, &b| (acc << 1) | u32::from(b));
        self.gray_inv[label as usize]
    }

    fn push_dim_bits(&self, idx: usize, out: &mut Vec<u8>) {
        let label = self.gray[idx];
        for k in (0..self.bits_per_dim()).rev() {
            out.push(((label >> k) & 1) as u8);
        }
    }

    /// Level indices `(re, im)` of every symbol carried by `bits`.
    pub fn bits_to_level_pairs(&self, bits: &[u8], n_t: usize) -> Result<Vec<(usize, usize)>> {
        let m_c = self.bits_per_symbol;
        if bits.len() != n_t * m_c {
            return Err(Error::invalid(format!(
                "expected {} bits for {} symbols, got {}",
                n_t * m_c,
                n_t,
                bits.len()
            )));
        }
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::invalid(format!("bits must be 0 or 1, got {b}")));
        }
        let half = self.bits_per_dim();
        Ok(bits
            .chunks_exact(m_c)
            .map(|sym| (self.dim_level(&sym[..half]), self.dim_level(&sym[half..])))
            .collect())
    }

    /// Maps `n_t * M_c` bits onto `n_t` complex symbols.
    pub fn modulate(&self, bits: &[u8], n_t: usize) -> Result<Vec<Complex64>> {
        Ok(self
            .bits_to_level_pairs(bits, n_t)?
            .into_iter()
            .map(|(re, im)| Complex64::new(self.pam_levels[re], self.pam_levels[im]))
            .collect())
    }

    /// Nearest-point hard demapping back to bits.
    pub fn demap(&self, symbols: &[Complex64]) -> Vec<u8> {
        let mut out = Vec::with_capacity(symbols.len() * self.bits_per_symbol);
        for s in symbols {
            self.push_dim_bits(self.nearest_level(s.re), &mut out);
            self.push_dim_bits(self.nearest_level(s.im), &mut out);
        }
        out
    }
}
