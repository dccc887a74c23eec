//! Block-fading Rayleigh channel sampling.
//!
//! Every draw is keyed by `(master seed, trial, slot, band)` through a
//! counter-based generator, so a trial produces the same channel no matter
//! which worker runs it or in what order trials are visited.

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rand_core::RngCore;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};

/// Per-band Rayleigh statistics and the antenna configuration shared by all
/// users.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingProfile {
    lambdas: Vec<f64>,
    tx_antennas: usize,
    rx_antennas: usize,
}

impl FadingProfile {
    pub fn new(lambdas: Vec<f64>, tx_antennas: usize, rx_antennas: usize) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::config("fading profile needs at least one band"));
        }
        if let Some((i, l)) = lambdas
            .iter()
            .enumerate()
            .find(|(_, l)| !(l.is_finite() && **l > 0.0))
        {
            return Err(Error::config(format!(
                "fading parameter of band {} must be positive and finite, got {l}",
                i + 1
            )));
        }
        if tx_antennas == 0 || rx_antennas == 0 {
            return Err(Error::config("antenna counts must be at least 1"));
        }
        Ok(Self {
            lambdas,
            tx_antennas,
            rx_antennas,
        })
    }

    /// Single-antenna profile.
    pub fn siso(lambdas: Vec<f64>) -> Result<Self> {
        Self::new(lambdas, 1, 1)
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn lambda(&self, band: usize) -> Result<f64> {
        self.lambdas.get(band).copied().ok_or_else(|| {
            Error::config(format!(
                "band index {band} out of range (profile has {} bands)",
                self.lambdas.len()
            ))
        })
    }

    pub fn bands(&self) -> usize {
        self.lambdas.len()
    }

    pub fn tx_antennas(&self) -> usize {
        self.tx_antennas
    }

    pub fn rx_antennas(&self) -> usize {
        self.rx_antennas
    }

    pub fn is_siso(&self) -> bool {
        self.tx_antennas == 1 && self.rx_antennas == 1
    }

    /// Channel gain `|h|^2` of one band in one slot: exponential with rate
    /// `lambda_band`.
    pub fn sample_gain<R: Rng + ?Sized>(
        &self,
        band: usize,
        slot: u32,
        rng: &mut R,
    ) -> Result<GainDraw> {
        let lambda = self.lambda(band)?;
        let e: f64 = Exp1.sample(rng);
        Ok(GainDraw {
            band,
            slot,
            value: e / lambda,
        })
    }

    /// `v x u` matrix of i.i.d. circularly-symmetric complex Gaussians with
    /// per-entry variance `1 / lambda_band`.
    pub fn sample_matrix<R: Rng + ?Sized>(
        &self,
        band: usize,
        slot: u32,
        rng: &mut R,
    ) -> Result<ChannelMatrixDraw> {
        let lambda = self.lambda(band)?;
        let sigma = (0.5 / lambda).sqrt();
        let matrix = DMatrix::from_fn(self.rx_antennas, self.tx_antennas, |_, _| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex::new(sigma * re, sigma * im)
        });
        Ok(ChannelMatrixDraw { band, slot, matrix })
    }

    /// Gain for SISO profiles, matrix otherwise.
    pub fn sample<R: Rng + ?Sized>(&self, band: usize, slot: u32, rng: &mut R) -> Result<ChannelDraw> {
        if self.is_siso() {
            self.sample_gain(band, slot, rng).map(ChannelDraw::Gain)
        } else {
            self.sample_matrix(band, slot, rng).map(ChannelDraw::Matrix)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainDraw {
    pub band: usize,
    pub slot: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrixDraw {
    pub band: usize,
    pub slot: u32,
    pub matrix: DMatrix<Complex<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelDraw {
    Gain(GainDraw),
    Matrix(ChannelMatrixDraw),
}

impl ChannelDraw {
    pub fn band(&self) -> usize {
        match self {
            ChannelDraw::Gain(g) => g.band,
            ChannelDraw::Matrix(m) => m.band,
        }
    }
}

/// Lane reserved for allocation-policy randomness; never used by a band.
const POLICY_LANE: u32 = u32::MAX;

/// Root of the substream hierarchy for one simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    master: u64,
}

impl SeedTree {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master: mix64(master_seed ^ 0x6a09_e667_f3bc_c908),
        }
    }

    /// Stream for the fading of `band` in `slot` of packet `trial`.
    pub fn substream(&self, trial: u64, slot: u32, band: u32) -> Substream {
        let lane = (u64::from(slot) << 32) | u64::from(band);
        Substream::new(mix64(mix64(self.master ^ trial) ^ lane.rotate_left(17)))
    }

    /// Stream for randomized allocation decisions, independent of all
    /// fading streams.
    pub fn policy_stream(&self, trial: u64, slot: u32) -> Substream {
        self.substream(trial, slot, POLICY_LANE)
    }
}

/// Counter-based generator: output `i` is a keyed hash of `i`, so there is
/// no sequential state beyond the counter.
#[derive(Debug, Clone)]
pub struct Substream {
    key: u64,
    counter: u64,
}

impl Substream {
    fn new(key: u64) -> Self {
        Self { key, counter: 0 }
    }
}

impl RngCore for Substream {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        let c = self.counter;
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key ^ mix64(c.wrapping_add(0x9e37_79b9_7f4a_7c15)))
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        rand_core::impls::fill_bytes_via_next(self, dst)
    }
}

/// SplitMix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gains(lambda: f64, n: usize, seed: u64) -> Vec<f64> {
        let profile = FadingProfile::siso(vec![lambda]).unwrap();
        let seeds = SeedTree::new(seed);
        (0..n as u64)
            .map(|t| {
                let mut s = seeds.substream(t, 1, 0);
                profile.sample_gain(0, 1, &mut s).unwrap().value
            })
            .collect()
    }

    #[test]
    fn exponential_mean_and_cdf() {
        let g = gains(1.0, 1_000_000, 7);
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        assert!(g.iter().all(|&x| x >= 0.0));

        let g = gains(2.0, 1_000_000, 8);
        let below = g.iter().filter(|&&x| x < 0.5).count() as f64 / g.len() as f64;
        assert!((below - (1.0 - (-1.0f64).exp())).abs() < 0.005, "{below}");
    }

    #[test]
    fn kolmogorov_smirnov_against_exponential() {
        let lambda = 1.7;
        let mut g = gains(lambda, 100_000, 11);
        g.sort_by(f64::total_cmp);
        let n = g.len() as f64;
        let d = g
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let cdf = 1.0 - (-lambda * x).exp();
                (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
            })
            .fold(0.0, f64::max);
        // Asymptotic critical value at significance 0.01.
        assert!(d < 1.628 / n.sqrt(), "KS statistic {d}");
    }

    #[test]
    fn distinct_slots_are_uncorrelated() {
        let profile = FadingProfile::siso(vec![1.0]).unwrap();
        let seeds = SeedTree::new(3);
        let n = 200_000;
        let series: Vec<f64> = (0..n)
            .map(|slot| {
                let mut s = seeds.substream(0, slot, 0);
                profile.sample_gain(0, slot, &mut s).unwrap().value
            })
            .collect();
        let mean = series.iter().sum::<f64>() / n as f64;
        let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let lag1 = series
            .windows(2)
            .map(|w| (w[0] - mean) * (w[1] - mean))
            .sum::<f64>()
            / (n as f64 - 1.0)
            / var;
        assert!(lag1.abs() < 3.0 / (n as f64).sqrt(), "lag-1 autocorrelation {lag1}");
    }

    #[test]
    fn substreams_do_not_depend_on_visit_order() {
        let seeds = SeedTree::new(99);
        let forward: Vec<u64> = (0..64).map(|t| seeds.substream(t, 2, 1).next_u64()).collect();
        let mut backward: Vec<u64> = (0..64).rev().map(|t| seeds.substream(t, 2, 1).next_u64()).collect();
        backward.reverse();
        assert_eq!(forward, backward);
        assert_ne!(seeds.substream(0, 1, 0).next_u64(), seeds.substream(0, 1, 1).next_u64());
        assert_ne!(seeds.substream(0, 1, 0).next_u64(), seeds.policy_stream(0, 1).next_u64());
    }

    #[test]
    fn matrix_moments() {
        let seeds = SeedTree::new(5);
        let n = 1_000_000u64;

        let p22 = FadingProfile::new(vec![1.0], 2, 2).unwrap();
        let fro: f64 = (0..n)
            .map(|t| {
                let m = p22.sample_matrix(0, 1, &mut seeds.substream(t, 1, 0)).unwrap();
                m.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>()
            })
            .sum::<f64>()
            / n as f64;
        assert!((fro - 4.0).abs() < 0.05, "E|H|_F^2 = {fro}");

        let p21 = FadingProfile::new(vec![2.0], 2, 1).unwrap();
        let m = p21.sample_matrix(0, 1, &mut seeds.substream(0, 1, 0)).unwrap();
        assert_eq!((m.matrix.nrows(), m.matrix.ncols()), (1, 2));
        let e11: f64 = (0..n)
            .map(|t| {
                let m = p21.sample_matrix(0, 1, &mut seeds.substream(t, 1, 0)).unwrap();
                m.matrix[(0, 0)].norm_sqr()
            })
            .sum::<f64>()
            / n as f64;
        assert!((e11 - 0.5).abs() < 0.005, "E|H11|^2 = {e11}");
    }

    #[test]
    fn siso_matrix_entry_is_exponential() {
        let p = FadingProfile::new(vec![1.0], 1, 1).unwrap();
        let seeds = SeedTree::new(12);
        let n = 200_000;
        let below = (0..n)
            .filter(|&t| {
                let m = p.sample_matrix(0, 1, &mut seeds.substream(t, 1, 0)).unwrap();
                m.matrix[(0, 0)].norm_sqr() < 1.0
            })
            .count() as f64
            / n as f64;
        assert!((below - (1.0 - (-1.0f64).exp())).abs() < 0.005);
    }

    #[test]
    fn invalid_profiles_are_rejected() {
        assert!(FadingProfile::siso(vec![]).is_err());
        assert!(FadingProfile::siso(vec![1.0, 0.0]).is_err());
        assert!(FadingProfile::siso(vec![f64::NAN]).is_err());
        assert!(FadingProfile::new(vec![1.0], 0, 1).is_err());
        let p = FadingProfile::siso(vec![1.0]).unwrap();
        assert!(matches!(
            p.sample_gain(3, 1, &mut SeedTree::new(0).substream(0, 1, 3)),
            Err(Error::Config(_))
        ));
    }
}
