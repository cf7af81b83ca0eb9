//! Seeded Gaussian noise for the three loop channels.
//!
//! Every channel owns an independent ChaCha8 stream (same seed, stream id
//! 0, 1, 2), so injecting an attack or a fault never shifts the noise seen by
//! another channel. Standard normals come from the Box–Muller transform:
//! with `u1 = (1 + (x >> 11)) · 2⁻⁵³ ∈ (0, 1]` and `u2 = (y >> 11) · 2⁻⁵³ ∈ [0, 1)`
//! built from two consecutive 64-bit outputs,
//!
//! ```text
//! z1 = sqrt(-2 ln u1) cos(2π u2),   z2 = sqrt(-2 ln u1) sin(2π u2)
//! ```
//!
//! `z1` is returned first and `z2` is cached for the next request. A sample
//! of `N(0, Σ)` is `Σ^{1/2} z` with the symmetric square root of `Σ`.

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::linalg::{check_psd, sqrt_psd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseChannel {
    /// `ω`, enters the state update.
    Process,
    /// `η`, enters the measured output.
    Measurement,
    /// `η_u`, enters the transmitted control signal.
    Control,
}

impl NoiseChannel {
    pub const ALL: [NoiseChannel; 3] = [Self::Process, Self::Measurement, Self::Control];

    fn index(self) -> usize {
        match self {
            Self::Process => 0,
            Self::Measurement => 1,
            Self::Control => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    sigma_omega: DMatrix<f64>,
    sigma_eta: DMatrix<f64>,
    sigma_eta_u: DMatrix<f64>,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(
        sigma_omega: DMatrix<f64>,
        sigma_eta: DMatrix<f64>,
        sigma_eta_u: DMatrix<f64>,
        seed: u64,
    ) -> Result<Self> {
        check_psd(&sigma_omega, "process noise covariance")?;
        check_psd(&sigma_eta, "measurement noise covariance")?;
        check_psd(&sigma_eta_u, "control noise covariance")?;
        Ok(Self {
            sigma_omega,
            sigma_eta,
            sigma_eta_u,
            seed,
        })
    }

    /// All three covariances zero.
    pub fn noiseless(n: usize, p: usize, m: usize) -> Self {
        Self {
            sigma_omega: DMatrix::zeros(n, n),
            sigma_eta: DMatrix::zeros(p, p),
            sigma_eta_u: DMatrix::zeros(m, m),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn sigma_omega(&self) -> &DMatrix<f64> {
        &self.sigma_omega
    }
    pub fn sigma_eta(&self) -> &DMatrix<f64> {
        &self.sigma_eta
    }
    pub fn sigma_eta_u(&self) -> &DMatrix<f64> {
        &self.sigma_eta_u
    }

    pub fn covariance(&self, which: NoiseChannel) -> &DMatrix<f64> {
        match which {
            NoiseChannel::Process => &self.sigma_omega,
            NoiseChannel::Measurement => &self.sigma_eta,
            NoiseChannel::Control => &self.sigma_eta_u,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        NoiseChannel::ALL
            .iter()
            .all(|&c| self.covariance(c).iter().all(|&v| v == 0.0))
    }
}

#[derive(Debug, Clone)]
struct Stream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
    factor: DMatrix<f64>,
    silent: bool,
}

impl Stream {
    fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let (z1, z2) = box_muller(self.rng.next_u64(), self.rng.next_u64());
        self.spare = Some(z2);
        z1
    }
}

pub(crate) fn box_muller(x: u64, y: u64) -> (f64, f64) {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = (1 + (x >> 11)) as f64 * SCALE;
    let u2 = (y >> 11) as f64 * SCALE;
    let radius = (-2.0 * u1.ln()).sqrt();
    let angle = std::f64::consts::TAU * u2;
    (radius * angle.cos(), radius * angle.sin())
}

/// Per-channel sample streams for one [`NoiseSpec`].
#[derive(Debug, Clone)]
pub struct NoiseGenerator {
    streams: [Stream; 3],
}

impl NoiseGenerator {
    pub fn new(spec: &NoiseSpec) -> Self {
        let make = |c: NoiseChannel| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(c.index() as u64);
            let cov = spec.covariance(c);
            Stream {
                rng,
                spare: None,
                factor: sqrt_psd(cov),
                silent: cov.iter().all(|&v| v == 0.0),
            }
        };
        Self {
            streams: NoiseChannel::ALL.map(make),
        }
    }

    pub fn draw(&mut self, which: NoiseChannel) -> DVector<f64> {
        let stream = &mut self.streams[which.index()];
        let dim = stream.factor.nrows();
        if stream.silent {
            return DVector::zeros(dim);
        }
        let z = DVector::from_fn(dim, |_, _| stream.standard_normal());
        &stream.factor * z
    }
}

/// One sample of `N(0, Σ)` for the requested channel.
pub fn draw_gaussian(generator: &mut NoiseGenerator, which: NoiseChannel) -> DVector<f64> {
    generator.draw(which)
}

/// Standard normal stream used by the stochastic optimizer.
pub(crate) struct StandardNormal<'a, R: RngCore> {
    rng: &'a mut R,
    spare: Option<f64>,
}

impl<'a, R: RngCore> StandardNormal<'a, R> {
    pub(crate) fn new(rng: &'a mut R) -> Self {
        Self { rng, spare: None }
    }

    pub(crate) fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let (z1, z2) = box_muller(self.rng.next_u64(), self.rng.next_u64());
        self.spare = Some(z2);
        z1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn spec(seed: u64) -> NoiseSpec {
        NoiseSpec::new(DMatrix::identity(2, 2), dmatrix![4.0], DMatrix::zeros(2, 2), seed).unwrap()
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let bad = NoiseSpec::new(dmatrix![1.0, 2.0; 2.0, 1.0], dmatrix![1.0], dmatrix![1.0], 0);
        assert!(bad.is_err());
    }

    #[test]
    fn zero_covariance_gives_zero_samples() {
        let mut g = NoiseGenerator::new(&spec(1));
        for _ in 0..10 {
            assert_eq!(g.draw(NoiseChannel::Control), DVector::zeros(2));
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = NoiseGenerator::new(&spec(7));
        let mut b = NoiseGenerator::new(&spec(7));
        for _ in 0..100 {
            assert_eq!(a.draw(NoiseChannel::Process), b.draw(NoiseChannel::Process));
        }
        let mut c = NoiseGenerator::new(&spec(8));
        assert_ne!(a.draw(NoiseChannel::Process), c.draw(NoiseChannel::Process));
    }

    #[test]
    fn channels_do_not_interfere() {
        let mut a = NoiseGenerator::new(&spec(3));
        let mut b = NoiseGenerator::new(&spec(3));
        for _ in 0..50 {
            b.draw(NoiseChannel::Measurement);
        }
        for _ in 0..20 {
            assert_eq!(a.draw(NoiseChannel::Process), b.draw(NoiseChannel::Process));
        }
    }

    #[test]
    fn identity_covariance_statistics() {
        let n = 100_000;
        let mut g = NoiseGenerator::new(&spec(11));
        let mut mean = DVector::<f64>::zeros(2);
        let mut second = DMatrix::<f64>::zeros(2, 2);
        for _ in 0..n {
            let w = g.draw(NoiseChannel::Process);
            mean += &w;
            second += &w * w.transpose();
        }
        mean /= n as f64;
        second /= n as f64;
        let bound = 4.0 / (n as f64).sqrt();
        assert!(mean.amax() < bound, "mean {mean}");
        assert!((second - DMatrix::identity(2, 2)).amax() < 0.02);
    }

    #[test]
    fn box_muller_is_finite_at_extremes() {
        let (a, b) = box_muller(u64::MAX, 0);
        assert!(a.is_finite() && b.is_finite());
        let (a, b) = box_muller(0, u64::MAX);
        assert!(a.is_finite() && b.is_finite());
    }
}
