//! Baseband BPSK/QPSK over AWGN, Monte-Carlo bit error rates and
//! throughput under an SNR-to-code-rate schedule.
//!
//! Noise is drawn chunk by chunk: chunk `k` uses a ChaCha8 generator seeded
//! with the run seed on stream `k`, so results depend only on the seed and
//! the chunk size, never on thread count.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MIN_BER_BITS: u64 = 10_000;
pub const DEFAULT_CHUNK: usize = 1 << 16;

#[derive(Debug, Error, PartialEq)]
pub enum LinkError {
    #[error("QPSK needs an even number of bits, got {0}")]
    OddQpsk(usize),
    #[error("SNR {snr_db} dB is below the lowest schedule threshold {lowest} dB")]
    NoService { snr_db: f64, lowest: f64 },
    #[error("payload must be at least one bit")]
    EmptyPayload,
    #[error("BER estimation needs at least {MIN_BER_BITS} bits, got {0}")]
    TooFewBits(u64),
    #[error("chunk size must be positive")]
    ZeroChunk,
    #[error("invalid link profile: {0}")]
    Profile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Modulation {
    Bpsk,
    Qpsk,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> u32 {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateStep {
    pub snr_db: f64,
    pub rate_num: u32,
    pub rate_den: u32,
}

impl RateStep {
    pub fn rate(&self) -> f64 {
        f64::from(self.rate_num) / f64::from(self.rate_den)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkProfile {
    pub bandwidth_hz: f64,
    pub modulation: Modulation,
    pub schedule: Vec<RateStep>,
}

impl LinkProfile {
    /// 5 MHz QPSK with rates 1/3, 1/2, 2/3, 5/6 from 0, 2, 8, 16 dB.
    pub fn nr_5mhz_qpsk() -> Self {
        let step = |snr_db, rate_num, rate_den| RateStep {
            snr_db,
            rate_num,
            rate_den,
        };
        LinkProfile {
            bandwidth_hz: 5e6,
            modulation: Modulation::Qpsk,
            schedule: vec![step(0.0, 1, 3), step(2.0, 1, 2), step(8.0, 2, 3), step(16.0, 5, 6)],
        }
    }

    pub fn validate(&self) -> Result<(), LinkError> {
        let bad = |m: String| Err(LinkError::Profile(m));
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz > 0.0) {
            return bad(format!("bandwidth {} must be positive", self.bandwidth_hz));
        }
        if self.schedule.is_empty() {
            return bad("schedule is empty".into());
        }
        for s in &self.schedule {
            if !s.snr_db.is_finite() || s.rate_num == 0 || s.rate_num > s.rate_den {
                return bad(format!("invalid step {}/{} at {} dB", s.rate_num, s.rate_den, s.snr_db));
            }
        }
        for w in self.schedule.windows(2) {
            if w[1].snr_db <= w[0].snr_db {
                return bad("thresholds must be strictly increasing".into());
            }
            if w[1].rate() < w[0].rate() {
                return bad("rates must not decrease with SNR".into());
            }
        }
        Ok(())
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, LinkError> {
        let p: LinkProfile = serde_json::from_slice(bytes).map_err(|e| LinkError::Profile(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    /// Highest step whose threshold does not exceed `snr_db`.
    pub fn step_at(&self, snr_db: f64) -> Result<&RateStep, LinkError> {
        self.schedule
            .iter()
            .rev()
            .find(|s| s.snr_db <= snr_db)
            .ok_or(LinkError::NoService {
                snr_db,
                lowest: self.schedule.first().map_or(f64::NAN, |s| s.snr_db),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSeed {
    pub seed: u64,
    pub chunk_size: usize,
}

impl NoiseSeed {
    pub fn new(seed: u64) -> Self {
        NoiseSeed {
            seed,
            chunk_size: DEFAULT_CHUNK,
        }
    }

    fn rng(&self, chunk: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(chunk as u64);
        rng
    }
}

/// Maps bits (0 or 1, one per byte) to unit-energy symbols. With `pad`, an
/// odd QPSK input is extended with one zero bit.
pub fn modulate(bits: &[u8], modulation: Modulation, pad: bool) -> Result<Vec<Complex64>, LinkError> {
    match modulation {
        Modulation::Bpsk => Ok(bits.iter().map(|&b| Complex64::new(bpsk(b), 0.0)).collect()),
        Modulation::Qpsk => {
            if bits.len() % 2 == 1 && !pad {
                return Err(LinkError::OddQpsk(bits.len()));
            }
            Ok(bits
                .chunks(2)
                .map(|p| qpsk(p[0], p.get(1).copied().unwrap_or(0)))
                .collect())
        }
    }
}

fn bpsk(b: u8) -> f64 {
    if b == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Gray map: the first bit sets the in-phase sign, the second the quadrature sign.
fn qpsk(b0: u8, b1: u8) -> Complex64 {
    Complex64::new(bpsk(b0) * FRAC_1_SQRT_2, bpsk(b1) * FRAC_1_SQRT_2)
}

/// Adds complex Gaussian noise at per-symbol SNR `snr_db`; infinite SNR is noiseless.
pub fn transmit(symbols: &[Complex64], snr_db: f64, seed: NoiseSeed) -> Result<Vec<Complex64>, LinkError> {
    if seed.chunk_size == 0 {
        return Err(LinkError::ZeroChunk);
    }
    let mut out = symbols.to_vec();
    if snr_db == f64::INFINITY {
        return Ok(out);
    }
    let sigma = noise_sigma(snr_db);
    out.par_chunks_mut(seed.chunk_size)
        .enumerate()
        .for_each(|(k, chunk)| {
            let mut rng = seed.rng(k);
            for s in chunk {
                *s += gaussian(&mut rng, sigma);
            }
        });
    Ok(out)
}

/// Per-component standard deviation for unit symbol energy.
fn noise_sigma(snr_db: f64) -> f64 {
    let es_n0 = 10f64.powf(snr_db / 10.0);
    (1.0 / (2.0 * es_n0)).sqrt()
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(sigma * re, sigma * im)
}

/// Hard-decision demodulation back to one bit per byte.
pub fn demodulate(received: &[Complex64], modulation: Modulation) -> Vec<u8> {
    let bit = |v: f64| u8::from(v < 0.0);
    match modulation {
        Modulation::Bpsk => received.iter().map(|s| bit(s.re)).collect(),
        Modulation::Qpsk => received.iter().flat_map(|s| [bit(s.re), bit(s.im)]).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerResult {
    pub ebn0_db: f64,
    pub errors: u64,
    pub n_bits: u64,
    pub ber: f64,
    /// Binomial standard error of `ber`.
    pub stderr: f64,
}

/// Monte-Carlo bit error rate at `ebn0_db` (energy per bit over N0).
pub fn ber_estimate(modulation: Modulation, ebn0_db: f64, n_bits: u64, seed: NoiseSeed) -> Result<BerResult, LinkError> {
    if n_bits < MIN_BER_BITS {
        return Err(LinkError::TooFewBits(n_bits));
    }
    if seed.chunk_size == 0 {
        return Err(LinkError::ZeroChunk);
    }
    let bps = u64::from(modulation.bits_per_symbol());
    // Chunks hold a whole number of symbols.
    let chunk_bits = (seed.chunk_size as u64).div_ceil(bps) * bps;
    let n_chunks = n_bits.div_ceil(chunk_bits);
    let snr_db = ebn0_db + 10.0 * (bps as f64).log10();
    let sigma = noise_sigma(snr_db);
    let errors: u64 = (0..n_chunks)
        .into_par_iter()
        .map(|k| {
            let len = chunk_bits.min(n_bits - k * chunk_bits) as usize;
            let len = len.div_ceil(bps as usize) * bps as usize;
            let mut rng = seed.rng(k as usize);
            let bits: Vec<u8> = (0..len).map(|_| rng.random_range(0..2u8)).collect();
            let syms = modulate(&bits, modulation, true).expect("padded modulation");
            let rx: Vec<Complex64> = syms.into_iter().map(|s| s + gaussian(&mut rng, sigma)).collect();
            let out = demodulate(&rx, modulation);
            bits.iter().zip(&out).filter(|(a, b)| a != b).count() as u64
        })
        .sum();
    let total = n_bits.div_ceil(bps) * bps;
    let ber = errors as f64 / total as f64;
    Ok(BerResult {
        ebn0_db,
        errors,
        n_bits: total,
        ber,
        stderr: (ber * (1.0 - ber) / total as f64).sqrt(),
    })
}

/// Messages per second: bandwidth x bits per symbol x code rate / payload bits,
/// with one symbol per hertz and ideal decoding at or above the threshold.
pub fn throughput(profile: &LinkProfile, snr_db: f64, payload_bits: u64) -> Result<f64, LinkError> {
    if payload_bits == 0 {
        return Err(LinkError::EmptyPayload);
    }
    let step = profile.step_at(snr_db)?;
    let bps = f64::from(profile.modulation.bits_per_symbol());
    Ok(profile.bandwidth_hz * bps * f64::from(step.rate_num) / (f64::from(step.rate_den) * payload_bits as f64))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corruption {
    pub bytes: Vec<u8>,
    pub bit_errors: u64,
}

/// Sends the first `bit_len` bits of `bytes` uncoded over BPSK at `ebn0_db`
/// and returns the hard-decision result; bits past `bit_len` are kept.
pub fn corrupt_payload(bytes: &[u8], bit_len: u64, ebn0_db: f64, seed: NoiseSeed) -> Result<Corruption, LinkError> {
    let bit_len = bit_len.min(8 * bytes.len() as u64) as usize;
    let bits: Vec<u8> = (0..bit_len).map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1).collect();
    let syms = modulate(&bits, Modulation::Bpsk, false)?;
    let rx = transmit(&syms, ebn0_db, seed)?;
    let out = demodulate(&rx, Modulation::Bpsk);
    let mut result = bytes.to_vec();
    let mut bit_errors = 0;
    for (i, (&a, &b)) in bits.iter().zip(&out).enumerate() {
        if a != b {
            bit_errors += 1;
            result[i / 8] ^= 1 << (7 - i % 8);
        }
    }
    Ok(Corruption {
        bytes: result,
        bit_errors,
    })
}

/// One result row for CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkRow {
    pub snr_db: f64,
    pub value: f64,
    pub n: u64,
    pub stderr: f64,
}

pub fn rows_to_csv(rows: &[LinkRow]) -> String {
    let mut out = String::from("snr_db,value,n,stderr\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.snr_db, r.value, r.n, r.stderr);
    }
    out
}
