//! Square periodic lattices of spins and ensembles of them.
//!
//! A configuration is stored row-major, so the flattened vector fed to an
//! RBM is the concatenation of the lattice rows.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpinKind {
    /// Every value is exactly -1 or +1.
    Binary,
    /// Values anywhere in [-1, 1].
    Real,
}

impl SpinKind {
    pub fn code(self) -> u8 {
        match self {
            SpinKind::Binary => 0,
            SpinKind::Real => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(SpinKind::Binary),
            1 => Ok(SpinKind::Real),
            other => Err(Error::Format(format!("unknown spin kind code {other}"))),
        }
    }
}

/// An L×L periodic lattice of spin values.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinConfig {
    side: usize,
    values: Vec<f64>,
    kind: SpinKind,
}

impl SpinConfig {
    pub fn new(side: usize, values: Vec<f64>, kind: SpinKind) -> Result<Self> {
        if side == 0 {
            return Err(Error::domain("lattice side must be positive"));
        }
        if values.len() != side * side {
            return Err(Error::dim(side * side, values.len()));
        }
        match kind {
            SpinKind::Binary => {
                if let Some(v) = values.iter().find(|&&v| v != 1.0 && v != -1.0) {
                    return Err(Error::Kind(format!("binary config holds value {v}")));
                }
            }
            SpinKind::Real => {
                if let Some(v) = values.iter().find(|&&v| !(-1.0..=1.0).contains(&v)) {
                    return Err(Error::Kind(format!("real config value {v} outside [-1, 1]")));
                }
            }
        }
        Ok(Self { side, values, kind })
    }

    /// Builds a lattice from a flat vector whose length must be a perfect square.
    pub fn from_vector(values: Vec<f64>, kind: SpinKind) -> Result<Self> {
        let side = square_side(values.len())?;
        Self::new(side, values, kind)
    }

    pub fn uniform(side: usize, value: f64) -> Self {
        let kind = if value == 1.0 || value == -1.0 { SpinKind::Binary } else { SpinKind::Real };
        Self { side, values: vec![value; side * side], kind }
    }

    pub fn random<R: Rng + ?Sized>(side: usize, rng: &mut R) -> Self {
        let values = (0..side * side)
            .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
            .collect();
        Self { side, values, kind: SpinKind::Binary }
    }

    /// Alternating ±1 on neighbouring sites.
    pub fn checkerboard(side: usize) -> Self {
        let values = (0..side * side)
            .map(|k| if (k / side + k % side).is_multiple_of(2) { 1.0 } else { -1.0 })
            .collect();
        Self { side, values, kind: SpinKind::Binary }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn kind(&self) -> SpinKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.side + col]
    }

    /// Periodic access with signed offsets.
    #[inline]
    pub fn get_wrapped(&self, row: isize, col: isize) -> f64 {
        let l = self.side as isize;
        let r = row.rem_euclid(l) as usize;
        let c = col.rem_euclid(l) as usize;
        self.values[r * self.side + c]
    }

    #[inline]
    pub(crate) fn flip(&mut self, index: usize) {
        self.values[index] = -self.values[index];
    }

    pub fn flipped(&self) -> Self {
        Self { side: self.side, values: self.values.iter().map(|v| -v).collect(), kind: self.kind }
    }

    /// Cyclic shift by (rows, cols).
    pub fn shifted(&self, rows: usize, cols: usize) -> Self {
        let l = self.side;
        let mut values = vec![0.0; l * l];
        for r in 0..l {
            for c in 0..l {
                values[((r + rows) % l) * l + (c + cols) % l] = self.values[r * l + c];
            }
        }
        Self { side: l, values, kind: self.kind }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "source", content = "step")]
pub enum Provenance {
    MonteCarlo,
    RgStep(u32),
    RbmFlow(u32),
    LayerOutput(u32),
}

/// Configurations sharing lattice size and kind, labelled by temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    side: usize,
    kind: SpinKind,
    pub temperature: f64,
    pub provenance: Provenance,
    pub seed: u64,
    configs: Vec<SpinConfig>,
}

impl Ensemble {
    pub fn empty(side: usize, kind: SpinKind, temperature: f64, provenance: Provenance, seed: u64) -> Self {
        Self { side, kind, temperature, provenance, seed, configs: Vec::new() }
    }

    pub fn new(
        configs: Vec<SpinConfig>,
        temperature: f64,
        provenance: Provenance,
        seed: u64,
    ) -> Result<Self> {
        let first = configs.first().ok_or(Error::Empty("ensemble needs at least one config"))?;
        let mut ens = Self::empty(first.side, first.kind, temperature, provenance, seed);
        for c in configs {
            ens.push(c)?;
        }
        Ok(ens)
    }

    pub fn push(&mut self, config: SpinConfig) -> Result<()> {
        if config.side != self.side {
            return Err(Error::dim(self.side, config.side));
        }
        if config.kind != self.kind {
            return Err(Error::Kind(format!("expected {:?} config, got {:?}", self.kind, config.kind)));
        }
        if self.temperature < 0.0 {
            return Err(Error::domain("ensemble temperature must be non-negative"));
        }
        self.configs.push(config);
        Ok(())
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn sites(&self) -> usize {
        self.side * self.side
    }

    pub fn kind(&self) -> SpinKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn configs(&self) -> &[SpinConfig] {
        &self.configs
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SpinConfig> {
        self.configs.iter()
    }

    /// Flattens the ensemble into an n_samples × sites matrix.
    pub fn to_matrix(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.len() * self.sites());
        for c in &self.configs {
            data.extend_from_slice(c.values());
        }
        Matrix::from_vec(self.len(), self.sites(), data)
    }

    /// Rebuilds an ensemble from matrix rows; rows must be perfect squares.
    pub fn from_matrix(
        m: &Matrix,
        kind: SpinKind,
        temperature: f64,
        provenance: Provenance,
        seed: u64,
    ) -> Result<Self> {
        let side = square_side(m.cols())?;
        let mut ens = Self::empty(side, kind, temperature, provenance, seed);
        for r in 0..m.rows() {
            ens.push(SpinConfig::new(side, m.row(r).to_vec(), kind)?)?;
        }
        Ok(ens)
    }
}

impl<'a> IntoIterator for &'a Ensemble {
    type Item = &'a SpinConfig;
    type IntoIter = std::slice::Iter<'a, SpinConfig>;
    fn into_iter(self) -> Self::IntoIter {
        self.configs.iter()
    }
}

/// Dense row-major matrix used for batches of visible/hidden vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::dim(cols, r.len()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// Copies the listed rows into a new matrix.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Self { rows: rows.len(), cols: self.cols, data }
    }
}

/// `out = a · b` (+ `out` when `accumulate`) for row-major operands.
/// `a` is m×k, `b` is k×n; either may be read transposed.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    out: &mut [f64],
    alpha: f64,
    accumulate: bool,
) {
    assert!(a.len() >= m * k && b.len() >= k * n && out.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: bounds asserted above; strides describe dense row-major storage.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn square_side(len: usize) -> Result<usize> {
    let side = (len as f64).sqrt().round() as usize;
    if side * side != len || side == 0 {
        return Err(Error::Invalid(format!("vector length {len} is not a positive perfect square")));
    }
    Ok(side)
}

/// Derives an independent stream seed from a base seed and a stream index
/// (splitmix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The ±1 vector encoded by the low `n` bits of `index` (bit k set ↦ unit k = +1).
pub fn spin_vector(index: usize, n: usize) -> Vec<f64> {
    (0..n).map(|k| if index >> k & 1 == 1 { 1.0 } else { -1.0 }).collect()
}

pub(crate) fn fill_spin_vector(index: usize, out: &mut [f64]) {
    for (k, o) in out.iter_mut().enumerate() {
        *o = if index >> k & 1 == 1 { 1.0 } else { -1.0 };
    }
}
