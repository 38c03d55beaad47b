//! Synthetic training data: BPSK probes, sparse fading channels and
//! two-component Gaussian-mixture impulsive noise.

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{build_convolution_matrix, ComplexMatrix, ComplexVector};
use crate::model::MeasurementModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Number of BPSK symbols.
    pub length: usize,
    pub seed: u64,
}

/// Feedback taps (1-based stage numbers) of maximal-length Fibonacci LFSRs.
const LFSR_TAPS: [&[u32]; 19] = [
    &[2, 1],
    &[3, 2],
    &[4, 3],
    &[5, 3],
    &[6, 5],
    &[7, 6],
    &[8, 6, 5, 4],
    &[9, 5],
    &[10, 7],
    &[11, 9],
    &[12, 11, 10, 4],
    &[13, 12, 11, 8],
    &[14, 13, 12, 2],
    &[15, 14],
    &[16, 15, 13, 4],
    &[17, 14],
    &[18, 11],
    &[19, 18, 17, 14],
    &[20, 17],
];

/// Degree `m` when `length == 2^m - 1` and a tap set for `m` is known.
fn mseq_degree(length: usize) -> Option<u32> {
    (2..=20u32).find(|&m| (1usize << m) - 1 == length)
}

/// One period of the m-sequence of degree `m`, bits mapped `0 -> +1`,
/// `1 -> -1`. `seed` picks the nonzero initial register state.
pub fn m_sequence(m: u32, seed: u64) -> Result<Vec<f64>> {
    if !(2..=20).contains(&m) {
        return Err(Error::InvalidParameter(format!(
            "no LFSR taps for degree {m} (supported 2..=20)"
        )));
    }
    let taps = LFSR_TAPS[(m - 2) as usize];
    let period = (1u64 << m) - 1;
    let mut state: u32 = (seed % period) as u32 + 1;
    let out = (0..period)
        .map(|_| {
            let bit = (state >> (m - 1)) & 1;
            let fb = taps.iter().fold(0, |acc, &t| acc ^ ((state >> (t - 1)) & 1));
            state = ((state << 1) | fb) & ((1 << m) - 1);
            if bit == 0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    Ok(out)
}

/// Pseudorandom +/-1 probe: an m-sequence when `length = 2^m - 1`,
/// otherwise seeded fair coin flips.
pub fn generate_probe(cfg: &ProbeConfig) -> Result<ComplexVector> {
    if cfg.length == 0 {
        return Err(Error::InvalidParameter("probe length must be >= 1".into()));
    }
    let chips = match mseq_degree(cfg.length) {
        Some(m) => m_sequence(m, cfg.seed)?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            (0..cfg.length)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect()
        }
    };
    Ok(ComplexVector::from_real(&chips))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// Delay spread N in samples.
    pub n_taps: usize,
    /// Number of active paths K.
    pub sparsity: usize,
    /// Power-delay profile `exp(-amplitude_decay * delay)`.
    pub amplitude_decay: f64,
    /// AR(1) coefficient of the tap gains between consecutive blocks.
    pub fading_rate: f64,
    pub seed: u64,
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sparsity == 0 || self.sparsity > self.n_taps {
            return Err(Error::InvalidParameter(format!(
                "sparsity must be in 1..={}, got {}",
                self.n_taps, self.sparsity
            )));
        }
        if !(0.0..1.0).contains(&self.fading_rate) {
            return Err(Error::InvalidParameter(format!(
                "fading_rate must be in [0, 1), got {}",
                self.fading_rate
            )));
        }
        if !self.amplitude_decay.is_finite() || self.amplitude_decay < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "amplitude_decay must be finite and >= 0, got {}",
                self.amplitude_decay
            )));
        }
        Ok(())
    }
}

/// Sparse time-varying channel: fixed support, per-tap mean power and one
/// impulse response per block.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub delays: Vec<usize>,
    /// Mean power of each active tap, summing to 1.
    pub tap_powers: Vec<f64>,
    pub blocks: Vec<ComplexVector>,
}

/// Circularly-symmetric complex Gaussian with unit variance.
fn complex_normal(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn generate_channel(cfg: &ChannelConfig, n_blocks: usize) -> Result<ChannelRealization> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut delays = sample(&mut rng, cfg.n_taps, cfg.sparsity).into_vec();
    delays.sort_unstable();

    let raw: Vec<f64> = delays
        .iter()
        .map(|&d| (-cfg.amplitude_decay * d as f64).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    let tap_powers: Vec<f64> = raw.iter().map(|p| p / total).collect();
    let amps: Vec<f64> = tap_powers.iter().map(|p| p.sqrt()).collect();

    let a = cfg.fading_rate;
    let innov = (1.0 - a * a).sqrt();
    // start from the stationary distribution
    let mut gains: Vec<Complex64> = amps.iter().map(|&s| complex_normal(&mut rng) * s).collect();
    let mut blocks = Vec::with_capacity(n_blocks);
    for b in 0..n_blocks {
        if b > 0 {
            for (g, &s) in gains.iter_mut().zip(&amps) {
                *g = *g * a + complex_normal(&mut rng) * (s * innov);
            }
        }
        let mut h = ComplexVector::zeros(cfg.n_taps);
        for (&d, &g) in delays.iter().zip(&gains) {
            h[d] = g;
        }
        blocks.push(h);
    }
    Ok(ChannelRealization {
        delays,
        tap_powers,
        blocks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Probability that a sample comes from the impulsive component.
    pub q: f64,
    /// Background white noise variance.
    pub sigma_w2: f64,
    /// Impulsive component variance.
    pub sigma_i2: f64,
    pub seed: u64,
}

impl NoiseConfig {
    /// Builds the mixture from dB ratios relative to the signal power.
    /// `inr_db = None` gives pure white noise.
    pub fn from_db(sigma_s2: f64, snr_db: f64, inr_db: Option<f64>, q: f64, seed: u64) -> Self {
        let sigma_w2 = sigma_s2 / 10f64.powf(snr_db / 10.0);
        match inr_db {
            Some(inr) => Self {
                q,
                sigma_w2,
                sigma_i2: sigma_w2 * 10f64.powf(inr / 10.0),
                seed,
            },
            None => Self {
                q: 0.0,
                sigma_w2,
                sigma_i2: 0.0,
                seed,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::InvalidParameter(format!("q must be in [0, 1], got {}", self.q)));
        }
        if !(self.sigma_w2 > 0.0 && self.sigma_w2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma_w2 must be > 0, got {}",
                self.sigma_w2
            )));
        }
        if !(self.sigma_i2 >= 0.0 && self.sigma_i2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma_i2 must be >= 0, got {}",
                self.sigma_i2
            )));
        }
        Ok(())
    }

    /// Average power of the mixture, `(1 - q) sigma_w2 + q sigma_i2`.
    pub fn mixture_power(&self) -> f64 {
        (1.0 - self.q) * self.sigma_w2 + self.q * self.sigma_i2
    }
}

/// Gaussian-mixture noise together with the impulse-branch indicator of
/// every sample.
///
/// Each sample consumes the same number of draws whatever branch it takes,
/// so two configs differing only in variances share impulse positions.
pub fn generate_gmn_labeled(n: usize, cfg: &NoiseConfig) -> Result<(ComplexVector, Vec<bool>)> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter("noise length must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (sw, si) = (cfg.sigma_w2.sqrt(), cfg.sigma_i2.sqrt());
    let mut labels = Vec::with_capacity(n);
    let noise = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let g = complex_normal(&mut rng);
            let impulsive = u < cfg.q;
            labels.push(impulsive);
            g * if impulsive { si } else { sw }
        })
        .collect();
    Ok((noise, labels))
}

pub fn generate_gmn(n: usize, cfg: &NoiseConfig) -> Result<ComplexVector> {
    Ok(generate_gmn_labeled(n, cfg)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnrReport {
    pub snr_db: f64,
    pub inr_db: f64,
    /// Signal power over the mixture's average noise power.
    pub sinr_db: f64,
}

pub fn snr_accounting(sigma_s2: f64, cfg: &NoiseConfig) -> Result<SnrReport> {
    cfg.validate()?;
    if !(sigma_s2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "signal power must be > 0, got {sigma_s2}"
        )));
    }
    Ok(SnrReport {
        snr_db: 10.0 * (sigma_s2 / cfg.sigma_w2).log10(),
        inr_db: 10.0 * (cfg.sigma_i2 / cfg.sigma_w2).log10(),
        sinr_db: 10.0 * (sigma_s2 / cfg.mixture_power()).log10(),
    })
}

/// Mean power of a sequence, `||s||^2 / len`.
pub fn mean_power(s: &ComplexVector) -> f64 {
    s.norm2_sqr() / s.len().max(1) as f64
}

/// `M x N` training matrix observed once the probe fills the delay line:
/// rows `N-1 .. N-1+M` of the full convolution matrix, so every entry is a
/// probe chip. Needs `probe.len() >= M + N - 1`.
pub fn training_matrix(probe: &ComplexVector, n_taps: usize, m_obs: usize) -> Result<ComplexMatrix> {
    if n_taps == 0 || m_obs == 0 {
        return Err(Error::InvalidParameter(
            "n_taps and m_obs must be positive".into(),
        ));
    }
    let needed = m_obs + n_taps - 1;
    if probe.len() < needed {
        return Err(Error::InvalidParameter(format!(
            "probe of length {} too short for {m_obs} observations of a {n_taps}-tap channel (need {needed})",
            probe.len()
        )));
    }
    build_convolution_matrix(probe, n_taps, needed)?.row_block(n_taps - 1, m_obs)
}

/// One synthetic estimation problem and its ground truth.
#[derive(Debug, Clone)]
pub struct Instance {
    pub model: MeasurementModel,
    pub x_true: ComplexVector,
    pub noise: ComplexVector,
}

/// `y = A x* + n` with `A` from [`training_matrix`] and `n` from the mixture.
pub fn synthesize_instance(
    probe: &ComplexVector,
    channel_block: &ComplexVector,
    noise_cfg: &NoiseConfig,
    m_obs: usize,
) -> Result<Instance> {
    let a = training_matrix(probe, channel_block.len(), m_obs)?;
    synthesize_with_matrix(a, channel_block, noise_cfg)
}

/// Same as [`synthesize_instance`] with a prebuilt training matrix.
pub fn synthesize_with_matrix(
    a: ComplexMatrix,
    channel_block: &ComplexVector,
    noise_cfg: &NoiseConfig,
) -> Result<Instance> {
    let clean = a.matvec(channel_block)?;
    let noise = generate_gmn(a.rows(), noise_cfg)?;
    let y = clean.add(&noise)?;
    Ok(Instance {
        model: MeasurementModel::new(a, y)?,
        x_true: channel_block.clone(),
        noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m_sequence_length_7() {
        let s = generate_probe(&ProbeConfig { length: 7, seed: 0 }).unwrap();
        let plus = s.iter().filter(|c| c.re == 1.0).count();
        let minus = s.iter().filter(|c| c.re == -1.0).count();
        assert_eq!((plus, minus), (3, 4));
        assert!(s.iter().all(|c| c.im == 0.0));
    }

    #[test]
    fn lfsr_taps_are_maximal() {
        for m in 2..=16u32 {
            let period = (1usize << m) - 1;
            let s = m_sequence(m, 1).unwrap();
            assert_eq!(s.len(), period);
            // a maximal sequence has 2^(m-1) ones and is not periodic with any divisor
            let minus = s.iter().filter(|&&v| v < 0.0).count();
            assert_eq!(minus, 1 << (m - 1), "m = {m}");
            for d in 1..period {
                if period % d == 0 {
                    assert!((0..period).any(|i| s[i] != s[(i + d) % period]), "m = {m}, divisor {d}");
                }
            }
        }
    }

    #[test]
    fn m_sequence_autocorrelation_sidelobes() {
        for m in [3u32, 5, 7, 10] {
            let s = m_sequence(m, 17).unwrap();
            let n = s.len();
            for lag in 1..n {
                let r: f64 = (0..n).map(|i| s[i] * s[(i + lag) % n]).sum::<f64>() / n as f64;
                assert!((r + 1.0 / n as f64).abs() < 1e-12, "m {m} lag {lag}: {r}");
            }
        }
    }

    #[test]
    fn probe_determinism_and_values() {
        let cfg = ProbeConfig { length: 100, seed: 9 };
        let a = generate_probe(&cfg).unwrap();
        assert_eq!(a, generate_probe(&cfg).unwrap());
        assert!(a.iter().all(|c| c.re.abs() == 1.0 && c.im == 0.0));
        let b = generate_probe(&ProbeConfig { length: 100, seed: 10 }).unwrap();
        assert_ne!(a, b);
        assert!(generate_probe(&ProbeConfig { length: 0, seed: 0 }).is_err());
    }

    fn chan(n: usize, k: usize, rate: f64, seed: u64) -> ChannelConfig {
        ChannelConfig {
            n_taps: n,
            sparsity: k,
            amplitude_decay: 0.05,
            fading_rate: rate,
            seed,
        }
    }

    #[test]
    fn channel_support_is_fixed_and_exact() {
        let c = generate_channel(&chan(100, 7, 0.9, 3), 20).unwrap();
        assert_eq!(c.delays.len(), 7);
        assert!((c.tap_powers.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for h in &c.blocks {
            assert_eq!(h.count_nonzero(), 7);
            for &d in &c.delays {
                assert!(h[d].norm() > 0.0);
            }
        }
    }

    #[test]
    fn channel_validation() {
        assert!(generate_channel(&chan(10, 0, 0.5, 0), 1).is_err());
        assert!(generate_channel(&chan(10, 11, 0.5, 0), 1).is_err());
        assert!(generate_channel(&chan(10, 3, 1.0, 0), 1).is_err());
        assert!(generate_channel(&chan(10, 3, -0.1, 0), 1).is_err());
    }

    #[test]
    fn frozen_channel_limit() {
        let c = generate_channel(&chan(50, 5, 1.0 - 1e-10, 1), 5).unwrap();
        for w in c.blocks.windows(2) {
            let rel = w[1].sub(&w[0]).unwrap().norm2() / w[0].norm2();
            assert!(rel < 1e-4, "{rel}");
        }
    }

    #[test]
    fn independent_blocks_when_rate_zero() {
        let c = generate_channel(&chan(50, 5, 0.0, 1), 2000).unwrap();
        // lag-1 correlation of the first tap should vanish
        let d = c.delays[0];
        let g: Vec<Complex64> = c.blocks.iter().map(|h| h[d]).collect();
        let num: Complex64 = g.windows(2).map(|w| w[1] * w[0].conj()).sum();
        let den: f64 = g.iter().map(|v| v.norm_sqr()).sum();
        assert!(num.norm() / den < 0.1);
    }

    #[test]
    fn tap_variance_matches_power_delay_profile() {
        let c = generate_channel(&chan(8, 3, 0.5, 42), 100_000).unwrap();
        for (&d, &p) in c.delays.iter().zip(&c.tap_powers) {
            let var = c.blocks.iter().map(|h| h[d].norm_sqr()).sum::<f64>() / c.blocks.len() as f64;
            assert!((var / p - 1.0).abs() < 0.05, "delay {d}: {var} vs {p}");
        }
    }

    fn noise(q: f64, sw: f64, si: f64, seed: u64) -> NoiseConfig {
        NoiseConfig {
            q,
            sigma_w2: sw,
            sigma_i2: si,
            seed,
        }
    }

    #[test]
    fn pure_white_noise_variance() {
        let n = 100_000;
        let v = generate_gmn(n, &noise(0.0, 2.0, 500.0, 1)).unwrap();
        // |g|^2 is exponential with mean 2 and std 2, so the mean has std 2/sqrt(n)
        let var = mean_power(&v);
        assert!((var - 2.0).abs() < 3.0 * 2.0 / (n as f64).sqrt(), "{var}");
    }

    #[test]
    fn pure_impulsive_noise() {
        let (v, labels) = generate_gmn_labeled(50_000, &noise(1.0, 1.0, 100.0, 2)).unwrap();
        assert!(labels.iter().all(|&l| l));
        assert!((mean_power(&v) / 100.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn mixture_variance_law() {
        let cfg = noise(0.002, 1.0, 1e4, 7);
        let v = generate_gmn(1_000_000, &cfg).unwrap();
        let expected = 0.998 + 0.002 * 1e4;
        assert!((cfg.mixture_power() - 20.998).abs() < 1e-12);
        assert!((mean_power(&v) / expected - 1.0).abs() < 0.05, "{}", mean_power(&v));
    }

    #[test]
    fn mixture_rate_within_binomial_bounds() {
        let n = 200_000;
        for (q, seed) in [(0.002, 1u64), (0.05, 2), (0.5, 3)] {
            let (_, labels) = generate_gmn_labeled(n, &noise(q, 1.0, 10.0, seed)).unwrap();
            let rate = labels.iter().filter(|&&l| l).count() as f64 / n as f64;
            let sd = (q * (1.0 - q) / n as f64).sqrt();
            assert!((rate - q).abs() <= 4.0 * sd, "q {q}: {rate}");
        }
    }

    #[test]
    fn noise_streams_are_seeded_and_aligned() {
        let a = generate_gmn_labeled(1000, &noise(0.01, 1.0, 1e4, 5)).unwrap();
        let b = generate_gmn_labeled(1000, &noise(0.01, 1.0, 1e5, 5)).unwrap();
        assert_eq!(a.1, b.1);
        assert_eq!(a.0, generate_gmn(1000, &noise(0.01, 1.0, 1e4, 5)).unwrap());
        assert_ne!(a.0, generate_gmn(1000, &noise(0.01, 1.0, 1e4, 6)).unwrap());
    }

    #[test]
    fn noise_validation() {
        assert!(generate_gmn(10, &noise(1.5, 1.0, 1.0, 0)).is_err());
        assert!(generate_gmn(10, &noise(0.1, 0.0, 1.0, 0)).is_err());
        assert!(generate_gmn(10, &noise(0.1, 1.0, -1.0, 0)).is_err());
        assert!(generate_gmn(0, &noise(0.1, 1.0, 1.0, 0)).is_err());
    }

    #[test]
    fn snr_examples() {
        let r = snr_accounting(1.0, &noise(0.002, 1.0, 0.0, 0)).unwrap();
        assert!(r.snr_db.abs() < 1e-12);
        assert!((r.sinr_db - 10.0 * (1.0f64 / 0.998).log10()).abs() < 1e-12);

        let r = snr_accounting(1.0, &noise(0.0, 1.0, 0.0, 0)).unwrap();
        assert!((r.sinr_db - r.snr_db).abs() < 1e-12);

        let cfg = NoiseConfig::from_db(1.0, 15.0, Some(40.0), 0.002, 0);
        let r = snr_accounting(1.0, &cfg).unwrap();
        assert!((r.snr_db - 15.0).abs() < 1e-9);
        assert!((r.inr_db - 40.0).abs() < 1e-9);
        assert!((r.sinr_db - 1.7779).abs() < 1e-3, "{}", r.sinr_db);
        assert!((r.sinr_db - 1.83).abs() < 0.1);

        let cfg = NoiseConfig::from_db(1.0, 15.0, Some(50.0), 0.002, 0);
        let r = snr_accounting(1.0, &cfg).unwrap();
        assert!((r.sinr_db - (-8.0322)).abs() < 1e-3, "{}", r.sinr_db);

        assert!(snr_accounting(0.0, &cfg).is_err());
    }

    #[test]
    fn training_matrix_window() {
        let probe = ComplexVector::from_real(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let a = training_matrix(&probe, 3, 3).unwrap();
        let want = ComplexMatrix::from_real_rows(&[
            vec![3.0, 2.0, 1.0],
            vec![4.0, 3.0, 2.0],
            vec![5.0, 4.0, 3.0],
        ])
        .unwrap();
        assert_eq!(a, want);
        assert!(training_matrix(&probe, 3, 4).is_err());
    }

    #[test]
    fn synthesis_edge_cases() {
        let probe = generate_probe(&ProbeConfig { length: 40, seed: 1 }).unwrap();
        let c = generate_channel(&chan(10, 3, 0.9, 1), 1).unwrap();
        let h = &c.blocks[0];

        let silent = noise(0.0, 1e-300, 0.0, 1);
        let inst = synthesize_instance(&probe, h, &silent, 20).unwrap();
        let clean = inst.model.a().matvec(h).unwrap();
        assert!(inst.model.y().sub(&clean).unwrap().norm2() < 1e-140);

        let zero = ComplexVector::zeros(10);
        let cfg = noise(0.01, 0.5, 50.0, 4);
        let inst = synthesize_instance(&probe, &zero, &cfg, 20).unwrap();
        assert_eq!(inst.model.y(), &generate_gmn(20, &cfg).unwrap());
    }

    #[test]
    fn noise_energy_accounting() {
        let probe = generate_probe(&ProbeConfig { length: 80, seed: 2 }).unwrap();
        let c = generate_channel(&chan(16, 4, 0.9, 2), 1).unwrap();
        let a = training_matrix(&probe, 16, 64).unwrap();
        let mut acc = 0.0;
        let draws = 2000;
        let base = noise(0.05, 1.0, 20.0, 0);
        for s in 0..draws {
            let cfg = NoiseConfig { seed: s, ..base.clone() };
            let inst = synthesize_with_matrix(a.clone(), &c.blocks[0], &cfg).unwrap();
            acc += inst.model.residual(&inst.x_true).unwrap().norm2_sqr() / 64.0;
        }
        let mean = acc / draws as f64;
        assert!((mean / base.mixture_power() - 1.0).abs() < 0.05, "{mean}");
    }
}
