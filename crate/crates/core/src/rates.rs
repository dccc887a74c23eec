//! Decodable-rate accumulation for repetition (RTD) and incremental
//! redundancy (INR) HARQ. All logarithms are natural; rates are in nats per
//! channel use.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fading::ChannelMatrixDraw;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Repetition time diversity: the same codeword is resent and combined
    /// with maximum-ratio combining, so SNRs add inside one logarithm.
    Rtd,
    /// Incremental redundancy: every copy carries new parity, so mutual
    /// informations add.
    Inr,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Rtd => "rtd",
            Scheme::Inr => "inr",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rtd" => Ok(Scheme::Rtd),
            "inr" => Ok(Scheme::Inr),
            other => Err(Error::config(format!("unknown scheme `{other}` (expected rtd or inr)"))),
        }
    }
}

/// `(1/m) log(1 + sum SNR_i)`.
pub fn u_rtd(snr_terms: &[f64]) -> Result<f64> {
    if snr_terms.is_empty() {
        return Err(Error::contract("u_rtd needs at least one received copy"));
    }
    Ok(snr_terms.iter().sum::<f64>().ln_1p() / snr_terms.len() as f64)
}

/// `(1/m) sum log(1 + SNR_i)`.
pub fn u_inr(snr_terms: &[f64]) -> Result<f64> {
    if snr_terms.is_empty() {
        return Err(Error::contract("u_inr needs at least one received copy"));
    }
    Ok(snr_terms.iter().map(|s| s.ln_1p()).sum::<f64>() / snr_terms.len() as f64)
}

/// Received copies of one packet at one receiver.
///
/// Both term lists grow together, one entry per received copy, and are only
/// cleared when a new packet starts.
#[derive(Debug, Clone, PartialEq)]
pub struct AccumulationState {
    scheme: Scheme,
    snr_terms: Vec<f64>,
    mi_terms: Vec<f64>,
    snr_sum: f64,
    mi_sum: f64,
}

impl AccumulationState {
    pub fn new(scheme: Scheme) -> Self {
        Self {
            scheme,
            snr_terms: Vec::new(),
            mi_terms: Vec::new(),
            snr_sum: 0.0,
            mi_sum: 0.0,
        }
    }

    pub fn from_snrs(scheme: Scheme, snrs: &[f64]) -> Self {
        let mut state = Self::new(scheme);
        for &s in snrs {
            state.push(s);
        }
        state
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn copies(&self) -> usize {
        self.snr_terms.len()
    }

    pub fn snr_terms(&self) -> &[f64] {
        &self.snr_terms
    }

    pub fn mi_terms(&self) -> &[f64] {
        &self.mi_terms
    }

    pub fn push(&mut self, snr: f64) {
        debug_assert!(snr >= 0.0);
        let mi = snr.ln_1p();
        self.snr_terms.push(snr);
        self.mi_terms.push(mi);
        self.snr_sum += snr;
        self.mi_sum += mi;
    }

    pub fn clear(&mut self) {
        self.snr_terms.clear();
        self.mi_terms.clear();
        self.snr_sum = 0.0;
        self.mi_sum = 0.0;
    }

    /// Total nats the receiver can resolve: `m * U_(m)`.
    pub fn accumulated_nats(&self) -> f64 {
        match self.scheme {
            Scheme::Rtd => self.snr_sum.ln_1p(),
            Scheme::Inr => self.mi_sum,
        }
    }

    /// Per-use rate `U_(m)`; zero before the first copy.
    pub fn rate(&self) -> f64 {
        match self.copies() {
            0 => 0.0,
            m => self.accumulated_nats() / m as f64,
        }
    }
}

/// Decoding succeeds when the accumulated nats reach the initial rate.
/// Equality counts as success.
pub fn decode_success(state: &AccumulationState, initial_rate: f64) -> bool {
    state.accumulated_nats() >= initial_rate
}

/// Channel matrices feeding one receiver, in reception order.
#[derive(Debug, Clone)]
pub struct MimoRateInputs {
    pub matrices: Vec<ChannelMatrixDraw>,
    pub power: f64,
    pub tx_antennas: usize,
}

impl MimoRateInputs {
    fn validate(&self) -> Result<(usize, usize)> {
        let first = self
            .matrices
            .first()
            .ok_or_else(|| Error::contract("MIMO rate needs at least one channel matrix"))?;
        let (v, u) = first.matrix.shape();
        if u != self.tx_antennas {
            return Err(Error::contract(format!(
                "matrix has {u} columns but {} transmit antennas were declared",
                self.tx_antennas
            )));
        }
        if let Some(bad) = self.matrices.iter().find(|m| m.matrix.shape() != (v, u)) {
            return Err(Error::contract(format!(
                "matrix of band {} slot {} is {:?}, expected {:?}",
                bad.band + 1,
                bad.slot,
                bad.matrix.shape(),
                (v, u)
            )));
        }
        Ok((v, u))
    }
}

/// RTD over stacked copies:
/// `(1/m) log det(I_{mv} + (P/u) H_s H_s^*)` with `H_s` the vertical stack.
///
/// Evaluated through the `u x u` Gram form `det(I_u + (P/u) sum H_i^* H_i)`.
pub fn mimo_rate_rtd(inputs: &MimoRateInputs) -> Result<f64> {
    let (_, u) = inputs.validate()?;
    let mut gram = MimoGram::new(u);
    for m in &inputs.matrices {
        gram.add(&m.matrix);
    }
    Ok(gram.log_det(inputs.power) / inputs.matrices.len() as f64)
}

/// INR: average over copies of `log det(I_v + (P/u) H H^*)`.
pub fn mimo_rate_inr(inputs: &MimoRateInputs) -> Result<f64> {
    inputs.validate()?;
    let total: f64 = inputs
        .matrices
        .iter()
        .map(|m| mimo_log_det(&m.matrix, inputs.power))
        .sum();
    Ok(total / inputs.matrices.len() as f64)
}

/// `log det(I + (P/u) H H^*)` for a single `v x u` matrix.
pub fn mimo_log_det(h: &DMatrix<Complex<f64>>, power: f64) -> f64 {
    let mut gram = MimoGram::new(h.ncols());
    gram.add(h);
    gram.log_det(power)
}

/// Running `sum H_i^* H_i` for RTD combining.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct MimoGram {
    sum: DMatrix<Complex<f64>>,
}

impl MimoGram {
    pub(crate) fn new(tx_antennas: usize) -> Self {
        Self {
            sum: DMatrix::zeros(tx_antennas, tx_antennas),
        }
    }

    pub(crate) fn add(&mut self, h: &DMatrix<Complex<f64>>) {
        self.sum += h.adjoint() * h;
    }

    pub(crate) fn clear(&mut self) {
        self.sum.fill(Complex::new(0.0, 0.0));
    }

    pub(crate) fn log_det(&self, power: f64) -> f64 {
        let u = self.sum.nrows();
        let scale = Complex::new(power / u as f64, 0.0);
        let m = DMatrix::identity(u, u) + &self.sum * scale;
        hermitian_log_det(m)
    }
}

/// Log-determinant of a Hermitian positive-definite matrix.
fn hermitian_log_det(m: DMatrix<Complex<f64>>) -> f64 {
    match m.clone().cholesky() {
        Some(chol) => 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.re.ln()).sum::<f64>(),
        // Only reachable through rounding on a (numerically) singular input.
        None => m.symmetric_eigenvalues().iter().map(|l| l.max(f64::MIN_POSITIVE).ln()).sum(),
    }
}
