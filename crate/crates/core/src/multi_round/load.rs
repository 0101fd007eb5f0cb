//! Runtime-versus-ratio profiling and the segmented linear load model.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{compress_multi_with, MultiRoundConfig};
use crate::knowledge_base::KnowledgeBase;
use crate::scene_graph::ClassTriplet;

pub const DEFAULT_REPETITIONS: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum LoadError {
    #[error("round sweep is empty")]
    EmptySweep,
    #[error("repetition count must be at least 1")]
    ZeroRepetitions,
    #[error("max_rounds must be at least 1")]
    ZeroRounds,
    #[error("segment count must be at least 1")]
    ZeroSegments,
    #[error("{points} points cannot support {segments} segments (need {required})")]
    InsufficientPoints {
        points: usize,
        segments: usize,
        required: usize,
    },
    #[error("no partition gives every segment distinct ratios")]
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadSample {
    pub rho: f64,
    pub runtime_s: f64,
    pub rounds: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadCurve {
    pub samples: Vec<LoadSample>,
}

impl LoadCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rho,runtime_s,rounds\n");
        for s in &self.samples {
            let _ = writeln!(out, "{},{},{}", s.rho, s.runtime_s, s.rounds);
        }
        out
    }

    /// True if runtime never rises as the ratio rises.
    pub fn runtime_non_increasing_in_rho(&self) -> bool {
        let mut pts: Vec<_> = self.samples.iter().map(|s| (s.rho, s.runtime_s)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
        pts.windows(2).all(|w| w[1].1 <= w[0].1)
    }
}

/// For each `max_rounds` in the sweep, the median wall-clock time of
/// `repetitions` sequential passes over `messages`, and the mean token ratio.
pub fn profile_load_curve(
    kb: &KnowledgeBase,
    messages: &[Vec<ClassTriplet>],
    round_sweep: &[u32],
    repetitions: usize,
) -> Result<LoadCurve, LoadError> {
    if round_sweep.is_empty() {
        return Err(LoadError::EmptySweep);
    }
    if repetitions == 0 {
        return Err(LoadError::ZeroRepetitions);
    }
    // Build the sample index outside the timed region.
    let _ = kb.index();
    let mut samples = Vec::with_capacity(round_sweep.len());
    for &max_rounds in round_sweep {
        if max_rounds == 0 {
            return Err(LoadError::ZeroRounds);
        }
        let config = MultiRoundConfig {
            max_rounds,
            audit: false,
        };
        let mut times = Vec::with_capacity(repetitions);
        let mut rho_sum = 0.0;
        for rep in 0..repetitions {
            let start = Instant::now();
            let mut sum = 0.0;
            for m in messages {
                let s = compress_multi_with(kb, m, config).map_err(|_| LoadError::ZeroRounds)?;
                sum += s.ratio();
            }
            times.push(start.elapsed().as_secs_f64());
            if rep == 0 {
                rho_sum = sum;
            }
        }
        times.sort_by(f64::total_cmp);
        let rho = if messages.is_empty() {
            1.0
        } else {
            rho_sum / messages.len() as f64
        };
        samples.push(LoadSample {
            rho,
            runtime_s: times[times.len() / 2].max(f64::MIN_POSITIVE),
            rounds: max_rounds,
        });
    }
    Ok(LoadCurve { samples })
}

/// One linear piece `c = slope * rho + intercept` on `[left, next left)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub slope: f64,
    pub intercept: f64,
    pub left: f64,
}

/// Segments ordered from the highest ratio range to the lowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseModel {
    pub segments: Vec<Segment>,
    pub sse: f64,
}

impl PiecewiseModel {
    pub fn evaluate(&self, rho: f64) -> f64 {
        let seg = self
            .segments
            .iter()
            .find(|s| rho >= s.left)
            .or(self.segments.last())
            .expect("model has at least one segment");
        seg.slope * rho + seg.intercept
    }

    /// Negative slopes, each steeper than the one before, and descending left boundaries.
    pub fn check_ordering(&self) -> Result<(), String> {
        for (i, s) in self.segments.iter().enumerate() {
            if s.slope >= 0.0 {
                return Err(format!("segment {} has non-negative slope {}", i + 1, s.slope));
            }
        }
        for (i, w) in self.segments.windows(2).enumerate() {
            if w[1].slope >= w[0].slope {
                return Err(format!("slope of segment {} is not steeper than segment {}", i + 2, i + 1));
            }
            if w[1].left >= w[0].left {
                return Err(format!("left boundary of segment {} is not below segment {}", i + 2, i + 1));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("segment,A,B,D\n");
        for (i, s) in self.segments.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", i + 1, s.slope, s.intercept, s.left);
        }
        out
    }
}

/// Least-squares line through `pts`; `None` when all ratios coincide.
fn line_fit(pts: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = pts
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    Some((slope, intercept, sse))
}

/// Exhaustive segmented least squares over contiguous runs of the points
/// sorted by ratio, at least two points per segment, no continuity constraint.
pub fn fit_piecewise(curve: &LoadCurve, segment_count: usize) -> Result<PiecewiseModel, LoadError> {
    if segment_count == 0 {
        return Err(LoadError::ZeroSegments);
    }
    let n = curve.samples.len();
    if n < 2 * segment_count {
        return Err(LoadError::InsufficientPoints {
            points: n,
            segments: segment_count,
            required: 2 * segment_count,
        });
    }
    let mut pts: Vec<(f64, f64)> = curve.samples.iter().map(|s| (s.rho, s.runtime_s)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    // fits[i][j]: line over pts[i..j].
    let mut fits = vec![vec![None; n + 1]; n + 1];
    for i in 0..n {
        for j in i + 2..=n {
            fits[i][j] = line_fit(&pts[i..j]);
        }
    }
    // best[k][j]: least error covering pts[..j] with k segments, and the last cut.
    let mut best = vec![vec![(f64::INFINITY, usize::MAX); n + 1]; segment_count + 1];
    best[0][0] = (0.0, 0);
    for k in 1..=segment_count {
        for j in 2 * k..=n {
            for i in 2 * (k - 1)..=j - 2 {
                let prev = best[k - 1][i].0;
                if let (true, Some((_, _, sse))) = (prev.is_finite(), fits[i][j]) {
                    // Keep the earliest cut on equal error for determinism.
                    if prev + sse < best[k][j].0 {
                        best[k][j] = (prev + sse, i);
                    }
                }
            }
        }
    }
    let (total, _) = best[segment_count][n];
    if !total.is_finite() {
        return Err(LoadError::Degenerate);
    }
    let mut segments = Vec::with_capacity(segment_count);
    let mut j = n;
    for k in (1..=segment_count).rev() {
        let i = best[k][j].1;
        let (slope, intercept, _) = fits[i][j].expect("chosen run has a fit");
        segments.push(Segment {
            slope,
            intercept,
            left: pts[i].0,
        });
        j = i;
    }
    Ok(PiecewiseModel { segments, sse: total })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(pts: &[(f64, f64)]) -> LoadCurve {
        LoadCurve {
            samples: pts
                .iter()
                .map(|&(rho, runtime_s)| LoadSample {
                    rho,
                    runtime_s,
                    rounds: 1,
                })
                .collect(),
        }
    }

    #[test]
    fn single_line_exact() {
        let pts: Vec<_> = (0..10).map(|i| 0.1 + 0.09 * i as f64).map(|r| (r, -2.0 * r + 3.0)).collect();
        let m = fit_piecewise(&curve(&pts), 1).unwrap();
        assert!((m.segments[0].slope + 2.0).abs() < 1e-9);
        assert!((m.segments[0].intercept - 3.0).abs() < 1e-9);
    }

    #[test]
    fn two_segments_recovered() {
        let mut pts = Vec::new();
        for i in 0..=10 {
            let r = 0.5 + 0.05 * i as f64;
            pts.push((r, -r + 2.0));
        }
        for i in 0..6 {
            let r = 0.2 + 0.05 * i as f64;
            pts.push((r, -4.0 * r + 3.5));
        }
        let m = fit_piecewise(&curve(&pts), 2).unwrap();
        assert!((m.segments[0].slope + 1.0).abs() < 1e-6);
        assert!((m.segments[1].slope + 4.0).abs() < 1e-6);
        // 0.5 lies on both lines, so either neighbouring cut is exact.
        let d1 = m.segments[0].left;
        assert!((0.5 - 1e-12..=0.55 + 1e-12).contains(&d1), "D1 = {d1}");
        assert!(m.check_ordering().is_ok());
        assert!((m.evaluate(0.3) - 2.3).abs() < 1e-9);
        assert!(m.to_csv().starts_with("segment,A,B,D\n1,"));
    }

    #[test]
    fn too_few_points() {
        let c = curve(&[(0.5, 1.0), (0.6, 0.9), (0.7, 0.8)]);
        assert!(matches!(fit_piecewise(&c, 2), Err(LoadError::InsufficientPoints { .. })));
        assert_eq!(fit_piecewise(&c, 0), Err(LoadError::ZeroSegments));
        let flat = curve(&[(0.5, 1.0), (0.5, 2.0)]);
        assert_eq!(fit_piecewise(&flat, 1), Err(LoadError::Degenerate));
    }

    #[test]
    fn ordering_check() {
        let m = PiecewiseModel {
            segments: vec![
                Segment {
                    slope: -1.0,
                    intercept: 2.0,
                    left: 0.5,
                },
                Segment {
                    slope: -0.5,
                    intercept: 1.0,
                    left: 0.2,
                },
            ],
            sse: 0.0,
        };
        assert!(m.check_ordering().is_err());
    }

    #[test]
    fn monotone_runtime_check() {
        assert!(curve(&[(0.9, 1.0), (0.8, 2.0), (0.7, 5.0)]).runtime_non_increasing_in_rho());
        assert!(!curve(&[(0.9, 3.0), (0.8, 2.0)]).runtime_non_increasing_in_rho());
    }

    #[test]
    fn profile_single_round() {
        let kb = KnowledgeBase::from_samples(vec![vec![ClassTriplet::new("a", "on", "p")]]);
        let msgs = vec![vec![ClassTriplet::new("a", "on", "p")]];
        let c = profile_load_curve(&kb, &msgs, &[1], 3).unwrap();
        assert_eq!(c.samples.len(), 1);
        assert!((c.samples[0].rho - 2.0 / 3.0).abs() < 1e-12);
        assert!(c.samples[0].runtime_s > 0.0);
        assert_eq!(profile_load_curve(&kb, &msgs, &[], 3), Err(LoadError::EmptySweep));
        assert!(c.to_csv().starts_with("rho,runtime_s,rounds\n"));
    }
}
