//! Per-minute smart-home sensor readings as `(sensor, on|off, resident)` triplets.
//!
//! Each resident carries a latent activity depth that follows a sticky
//! Markov chain. A seeded chain of five sensors fires in nested fashion: the
//! `k`-th chain sensor is on exactly when the depth is at least `k`. The
//! other sensors are independent sticky two-state processes with a small on
//! rate. Nesting makes each chain sensor predictable from the one before it
//! but not from the one two steps back, which is what multi-round
//! compression exploits.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{rng_for, HarnessError};
use crate::scene_graph::ClassTriplet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    /// `P(depth >= k)` for `k = 1..`, strictly decreasing in (0, 1).
    pub depth_tail: Vec<f64>,
    /// Probability that the latent depth repeats from one minute to the next.
    pub depth_stickiness: f64,
    /// Stationary on rate of a sensor outside the chain.
    pub ambient_on: f64,
    /// Probability that an ambient sensor repeats its state.
    pub ambient_stickiness: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            depth_tail: vec![0.8, 0.45, 0.3, 0.2, 0.13],
            depth_stickiness: 0.5,
            ambient_on: 0.02,
            ambient_stickiness: 0.5,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.depth_tail.is_empty() || self.depth_tail.len() > sensor_names().len() {
            return bad("depth_tail length must be between 1 and the sensor count");
        }
        if self.depth_tail.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return bad("depth_tail entries must lie in (0, 1)");
        }
        if self.depth_tail.windows(2).any(|w| w[1] >= w[0]) {
            return bad("depth_tail must be strictly decreasing");
        }
        for p in [self.depth_stickiness, self.ambient_on, self.ambient_stickiness] {
            if !(0.0..1.0).contains(&p) {
                return bad("probabilities must lie in [0, 1)");
            }
        }
        Ok(())
    }

    fn depth_pmf(&self) -> Vec<f64> {
        let mut tail = vec![1.0];
        tail.extend(&self.depth_tail);
        tail.push(0.0);
        tail.windows(2).map(|w| w[0] - w[1]).collect()
    }
}

/// `m01`..`m49` followed by `ad1-a`, `ad1-b`, `ad1-c`.
pub fn sensor_names() -> Vec<String> {
    let mut names: Vec<String> = (1..=49).map(|i| format!("m{i:02}")).collect();
    names.extend(["ad1-a", "ad1-b", "ad1-c"].map(String::from));
    names
}

pub fn synth_sensors(n_minutes: usize, n_residents: usize, seed: u64) -> Result<Vec<Vec<ClassTriplet>>, HarnessError> {
    synth_sensors_with(&SensorConfig::default(), n_minutes, n_residents, seed)
}

struct Resident {
    name: String,
    rng: ChaCha8Rng,
    chain: Vec<usize>,
    depth: usize,
    ambient: Vec<bool>,
}

/// One sample per minute, ordered by resident, then sensor name.
pub fn synth_sensors_with(
    config: &SensorConfig,
    n_minutes: usize,
    n_residents: usize,
    seed: u64,
) -> Result<Vec<Vec<ClassTriplet>>, HarnessError> {
    config.validate()?;
    if n_minutes == 0 || n_residents == 0 {
        return Err(HarnessError::Config("need at least one minute and one resident".into()));
    }
    let names = sensor_names();
    let pmf = config.depth_pmf();
    let draw_depth = |rng: &mut ChaCha8Rng| {
        let mut u: f64 = rng.random();
        for (d, p) in pmf.iter().enumerate() {
            if u < *p {
                return d;
            }
            u -= p;
        }
        pmf.len() - 1
    };
    let mut residents: Vec<Resident> = (0..n_residents)
        .map(|r| {
            let mut rng = rng_for(seed, r as u64);
            let mut order: Vec<usize> = (0..names.len()).collect();
            order.shuffle(&mut rng);
            order.truncate(config.depth_tail.len());
            let depth = draw_depth(&mut rng);
            let ambient = (0..names.len()).map(|_| rng.random_bool(config.ambient_on)).collect();
            Resident {
                name: format!("person{}", r + 1),
                rng,
                chain: order,
                depth,
                ambient,
            }
        })
        .collect();

    let mut out = Vec::with_capacity(n_minutes);
    for minute in 0..n_minutes {
        let mut sample = Vec::with_capacity(names.len() * n_residents);
        for res in &mut residents {
            if minute > 0 {
                if !res.rng.random_bool(config.depth_stickiness) {
                    res.depth = draw_depth(&mut res.rng);
                }
                for a in &mut res.ambient {
                    if !res.rng.random_bool(config.ambient_stickiness) {
                        *a = res.rng.random_bool(config.ambient_on);
                    }
                }
            }
            for (s, name) in names.iter().enumerate() {
                let on = match res.chain.iter().position(|&c| c == s) {
                    Some(k) => res.depth > k,
                    None => res.ambient[s],
                };
                sample.push(ClassTriplet::new(name, if on { "on" } else { "off" }, &res.name));
            }
        }
        out.push(sample);
    }
    Ok(out)
}
