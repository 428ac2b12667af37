//! Post-processing of homodyne records: boxcar and demodulation filters,
//! noise spectra, signal-to-noise ratios and plateau/transit detection.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sse::TrajectoryRecord;

/// Records required by [`backaction_spectrum`].
pub const MIN_SPECTRUM_RECORDS: usize = 50;

/// Rows whose increment interval `(t_{i-1}, t_i]` lies inside `[t0, t0 + len]`.
fn window_rows(rec: &TrajectoryRecord, t0: f64, len: f64) -> Result<std::ops::Range<usize>> {
    let dur = rec.duration();
    let h = rec.row_dt();
    let eps = 1e-9 * h.max(f64::MIN_POSITIVE);
    if t0 < -eps || len < 0.0 || t0 + len > dur + eps || !t0.is_finite() || !len.is_finite() {
        return Err(Error::WindowOutOfRange {
            start: t0,
            end: t0 + len,
            duration: dur,
        });
    }
    let start = rec.times.partition_point(|&t| t - h < t0 - eps).max(1);
    let end = rec.times.partition_point(|&t| t <= t0 + len + eps);
    Ok(start..end.max(start))
}

/// `I_T = sum dq` over the window `[t0, t0 + len]`.
pub fn integrate_window(rec: &TrajectoryRecord, channel: usize, t0: f64, len: f64) -> Result<f64> {
    let rows = window_rows(rec, t0, len)?;
    Ok(rec.dq[rows].iter().map(|r| r[channel]).sum())
}

/// `sum cos(omega t) dq` over the window, with `t` the midpoint of each
/// increment.
pub fn demodulate(rec: &TrajectoryRecord, channel: usize, omega: f64, t0: f64, len: f64) -> Result<f64> {
    let h = rec.row_dt();
    let rows = window_rows(rec, t0, len)?;
    Ok(rows
        .map(|i| (omega * (rec.times[i] - h / 2.0)).cos() * rec.dq[i][channel])
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Angular frequencies `2 pi k / (n dt)`, `k = 0..=n/2`.
    pub omega: Vec<f64>,
    pub power: Vec<f64>,
    pub window: String,
}

impl Spectrum {
    pub fn at_zero(&self) -> f64 {
        self.power.first().copied().unwrap_or(0.0)
    }

    /// Mean power over `lo <= omega <= hi`.
    pub fn band_mean(&self, lo: f64, hi: f64) -> f64 {
        let vals: Vec<f64> = self
            .omega
            .iter()
            .zip(&self.power)
            .filter(|(w, _)| **w >= lo && **w <= hi)
            .map(|(_, p)| *p)
            .collect();
        if vals.is_empty() {
            0.0
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    }
}

fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|k| 0.5 * (1.0 - (TAU * k as f64 / (n - 1) as f64).cos()))
        .collect()
}

/// Hann-windowed periodogram of samples `y` spaced by `dt`, normalized as a
/// two-sided density: white noise with `<y(t) y(0)> = delta(t)` gives 1.
pub fn periodogram(y: &[f64], dt: f64) -> Spectrum {
    let n = y.len();
    if n == 0 {
        return Spectrum {
            omega: Vec::new(),
            power: Vec::new(),
            window: "hann".into(),
        };
    }
    let w = hann(n);
    let w2: f64 = w.iter().map(|x| x * x).sum();
    let mut buf: Vec<C64> = y.iter().zip(&w).map(|(a, b)| C64::new(a * b, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    Spectrum {
        omega: (0..=half).map(|k| TAU * k as f64 / (n as f64 * dt)).collect(),
        power: buf[..=half].iter().map(|z| dt * z.norm_sqr() / w2).collect(),
        window: "hann".into(),
    }
}

/// Periodogram of `dq / dt` for one channel.
pub fn increment_spectrum(rec: &TrajectoryRecord, channel: usize) -> Spectrum {
    let h = rec.row_dt();
    let y: Vec<f64> = rec.dq.iter().skip(1).map(|r| r[channel] / h).collect();
    periodogram(&y, h)
}

/// Averaged periodogram of `eta(t) = sqrt(gamma) <x>_c - s(t)` over rows with
/// `t0 <= t <= t1`. `s` defaults to the ensemble mean of the records.
pub fn backaction_spectrum(
    records: &[TrajectoryRecord],
    channel: usize,
    t0: f64,
    t1: f64,
    mean_signal: Option<&[f64]>,
) -> Result<Spectrum> {
    if records.len() < MIN_SPECTRUM_RECORDS {
        return Err(Error::TooFewRecords {
            needed: MIN_SPECTRUM_RECORDS,
            got: records.len(),
        });
    }
    let first = &records[0];
    let rows: Vec<usize> = (0..first.len())
        .filter(|&i| first.times[i] >= t0 - 1e-12 && first.times[i] <= t1 + 1e-12)
        .collect();
    if rows.len() < 2 {
        return Err(Error::WindowOutOfRange {
            start: t0,
            end: t1,
            duration: first.duration(),
        });
    }
    for r in records {
        if r.len() != first.len() {
            return Err(Error::DimensionMismatch {
                expected: first.len(),
                found: r.len(),
            });
        }
    }
    let signal = |r: &TrajectoryRecord, i: usize| r.channel_gammas[channel].sqrt() * r.quadratures[i][channel];
    let mean: Vec<f64> = match mean_signal {
        Some(s) => rows.iter().map(|&i| s[i]).collect(),
        None => rows
            .iter()
            .map(|&i| records.iter().map(|r| signal(r, i)).sum::<f64>() / records.len() as f64)
            .collect(),
    };
    let dt = first.row_dt();
    let mut acc: Option<Spectrum> = None;
    for r in records {
        let eta: Vec<f64> = rows.iter().zip(&mean).map(|(&i, m)| signal(r, i) - m).collect();
        let s = periodogram(&eta, dt);
        acc = Some(match acc {
            None => s,
            Some(mut a) => {
                for (p, q) in a.power.iter_mut().zip(&s.power) {
                    *p += q;
                }
                a
            }
        });
    }
    let mut out = acc.unwrap();
    let n = records.len() as f64;
    for p in out.power.iter_mut() {
        *p /= n;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalStats {
    pub window_t: f64,
    pub s_bar: f64,
    pub s_eta0: f64,
    pub s_xi0: f64,
    pub snr: f64,
}

/// `SNR = T s_bar^2 / (S_eta[0] + S_xi[0])`, with `S_xi[0] = 1` by default.
pub fn snr(window_t: f64, s_bar: f64, s_eta0: f64, s_xi0: Option<f64>) -> SignalStats {
    let s_xi0 = s_xi0.unwrap_or(1.0);
    SignalStats {
        window_t,
        s_bar,
        s_eta0,
        s_xi0,
        snr: window_t * s_bar * s_bar / (s_eta0 + s_xi0),
    }
}

/// Window average of the noiseless signal `sqrt(gamma) <x>_c`.
pub fn window_signal(rec: &TrajectoryRecord, channel: usize, t0: f64, len: f64) -> Result<f64> {
    let rows = window_rows(rec, t0, len)?;
    if rows.is_empty() {
        return Ok(0.0);
    }
    let g = rec.channel_gammas[channel].sqrt();
    let n = rows.len() as f64;
    Ok(rows.map(|i| g * rec.quadratures[i][channel]).sum::<f64>() / n)
}

/// Double-sided moving average over `2 * half + 1` samples, truncated at
/// the ends.
pub fn moving_average(x: &[f64], half: usize) -> Vec<f64> {
    let n = x.len();
    let mut prefix = vec![0.0; n + 1];
    for (i, v) in x.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transit {
    pub index: usize,
    pub time: f64,
    pub from: usize,
    pub to: usize,
}

/// Level tracker on a smoothed series. The tracked level changes to `l`
/// once the signal comes within `(0.5 - hysteresis) * |l - current|` of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitDetector {
    pub levels: Vec<f64>,
    pub half_window: usize,
    pub hysteresis: f64,
}

impl TransitDetector {
    pub fn new(levels: Vec<f64>, half_window: usize, hysteresis: f64) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::param("levels", "need at least one level"));
        }
        if !(0.0..0.5).contains(&hysteresis) {
            return Err(Error::param("hysteresis", "must lie in [0, 0.5)"));
        }
        Ok(TransitDetector {
            levels,
            half_window,
            hysteresis,
        })
    }

    fn nearest(&self, y: f64) -> usize {
        let mut best = 0;
        for (k, l) in self.levels.iter().enumerate() {
            if (y - l).abs() < (y - self.levels[best]).abs() {
                best = k;
            }
        }
        best
    }

    /// Level index per sample.
    pub fn track(&self, series: &[f64]) -> Vec<usize> {
        let smooth = moving_average(series, self.half_window);
        let mut out = Vec::with_capacity(smooth.len());
        let Some(&y0) = smooth.first() else {
            return out;
        };
        let mut cur = self.nearest(y0);
        for y in smooth {
            let cand = self.nearest(y);
            if cand != cur {
                let gap = (self.levels[cand] - self.levels[cur]).abs();
                if (y - self.levels[cand]).abs() < (0.5 - self.hysteresis) * gap {
                    cur = cand;
                }
            }
            out.push(cur);
        }
        out
    }

    pub fn detect(&self, times: &[f64], series: &[f64]) -> Vec<Transit> {
        let track = self.track(series);
        track
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] != w[1])
            .map(|(i, w)| Transit {
                index: i + 1,
                time: times[i + 1],
                from: w[0],
                to: w[1],
            })
            .collect()
    }

    /// Durations between consecutive transits. Segments touching either end
    /// of the record are returned separately as censored.
    pub fn dwell_times(&self, times: &[f64], series: &[f64]) -> DwellTimes {
        let transits = self.detect(times, series);
        let (start, end) = match (times.first(), times.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return DwellTimes::default(),
        };
        let mut edges = vec![start];
        edges.extend(transits.iter().map(|t| t.time));
        edges.push(end);
        let segs: Vec<f64> = edges.windows(2).map(|w| w[1] - w[0]).collect();
        let n = segs.len();
        let (complete, censored) = if n <= 2 {
            (Vec::new(), segs)
        } else {
            (segs[1..n - 1].to_vec(), vec![segs[0], segs[n - 1]])
        };
        DwellTimes {
            complete,
            censored,
            transits: transits.len(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DwellTimes {
    pub complete: Vec<f64>,
    pub censored: Vec<f64>,
    pub transits: usize,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Fraction of samples sitting on a plateau: sample `i` counts when every
/// sample in `[i - half, i + half]` stays within `tol * gap` of one common
/// level, `gap` being the smallest level spacing.
pub fn plateau_fraction(series: &[f64], levels: &[f64], tol: f64, half: usize) -> f64 {
    let n = series.len();
    if n == 0 || levels.is_empty() {
        return 0.0;
    }
    let mut sorted = levels.to_vec();
    sorted.sort_by(f64::total_cmp);
    let gap = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|g| *g > 0.0)
        .fold(f64::INFINITY, f64::min);
    let band = if gap.is_finite() { tol * gap } else { tol };
    // level index each sample is close to, if any
    let near: Vec<Option<usize>> = series
        .iter()
        .map(|y| sorted.iter().position(|l| (y - l).abs() <= band))
        .collect();
    let mut hits = 0;
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        if let Some(k) = near[i] {
            if near[lo..hi].iter().all(|m| *m == Some(k)) {
                hits += 1;
            }
        }
    }
    hits as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sse::trajectory_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn synthetic(dq: Vec<f64>, dt: f64) -> TrajectoryRecord {
        let n = dq.len();
        let mut rows = vec![vec![0.0]];
        rows.extend(dq.into_iter().map(|v| vec![v]));
        TrajectoryRecord {
            times: (0..=n).map(|i| i as f64 * dt).collect(),
            channel_labels: vec!["c".into()],
            channel_gammas: vec![1.0],
            dq: rows,
            quadratures: vec![vec![0.0]; n + 1],
            probe_names: Vec::new(),
            observables: vec![Vec::new(); n + 1],
            norm_drift: vec![0.0; n + 1],
            seed: 0,
            stream: 0,
            dt,
            snapshots: Vec::new(),
            final_state: None,
        }
    }

    fn white(n: usize, dt: f64, seed: u64) -> Vec<f64> {
        let mut rng = trajectory_rng(seed, 0);
        (0..n).map(|_| dt.sqrt() * rng.sample::<f64, _>(StandardNormal)).collect()
    }

    #[test]
    fn constant_signal_window() {
        let dt = 1e-2;
        let s = 0.7;
        let rec = synthetic(vec![s * dt; 1000], dt);
        let it = integrate_window(&rec, 0, 2.0, 5.0).unwrap();
        assert!((it - s * 5.0).abs() < 1e-10);
        let st = snr(5.0, s, 0.0, None);
        assert!((st.snr - 5.0 * s * s).abs() < 1e-15);
        assert_eq!(integrate_window(&rec, 0, 3.0, 0.0).unwrap(), 0.0);
        assert_eq!(demodulate(&rec, 0, 2.0, 3.0, 0.0).unwrap(), 0.0);
        assert!(integrate_window(&rec, 0, 8.0, 5.0).is_err());
    }

    #[test]
    fn snr_examples() {
        assert!((snr(10.0, 1.0, 0.0, None).snr - 10.0).abs() < 1e-15);
        assert_eq!(snr(10.0, 0.0, 0.3, None).snr, 0.0);
    }

    #[test]
    fn windows_are_linear() {
        let dt = 1e-2;
        let a = white(500, dt, 1);
        let b = white(500, dt, 2);
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - 0.5 * y).collect();
        let (ra, rb, rm) = (synthetic(a, dt), synthetic(b, dt), synthetic(mix, dt));
        let f = |r: &TrajectoryRecord| integrate_window(r, 0, 1.0, 2.5).unwrap();
        assert!((f(&rm) - (2.0 * f(&ra) - 0.5 * f(&rb))).abs() < 1e-12);
    }

    #[test]
    fn white_noise_is_flat_at_one() {
        let dt = 1e-3;
        let mut avg = vec![0.0; 2049];
        for s in 0..40 {
            let rec = synthetic(white(4096, dt, s), dt);
            let sp = increment_spectrum(&rec, 0);
            for (a, p) in avg.iter_mut().zip(&sp.power) {
                *a += p / 40.0;
            }
        }
        let omega = periodogram(&vec![0.0; 4096], dt).omega;
        let band: Vec<f64> = omega
            .iter()
            .zip(&avg)
            .filter(|(w, _)| **w > 0.0 && **w <= TAU * 0.1 / dt)
            .map(|(_, p)| *p)
            .collect();
        let mean = band.iter().sum::<f64>() / band.len() as f64;
        assert!((mean - 1.0).abs() < 0.1, "mean {mean}");
    }

    #[test]
    fn parseval_on_white_noise() {
        let dt = 1e-3;
        let x: Vec<f64> = white(8192, dt, 7).iter().map(|v| v / dt).collect();
        let sp = periodogram(&x, dt);
        // two-sided density integrated over (-pi/dt, pi/dt]
        let dw = sp.omega[1];
        let mut integral = sp.power[0] + sp.power[sp.power.len() - 1];
        integral += 2.0 * sp.power[1..sp.power.len() - 1].iter().sum::<f64>();
        integral *= dw / TAU;
        let w = hann(x.len());
        let w2: f64 = w.iter().map(|v| v * v).sum();
        let var: f64 = x.iter().zip(&w).map(|(a, b)| (a * b).powi(2)).sum::<f64>() / w2;
        assert!((integral / var - 1.0).abs() < 0.05);
    }

    #[test]
    fn demodulated_noise_variance() {
        let dt = 1e-2;
        let t = 20.0;
        let n = 400;
        let vals: Vec<f64> = (0..n)
            .map(|s| demodulate(&synthetic(white(2000, dt, 100 + s), dt), 0, 3.0, 0.0, t).unwrap())
            .collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sigma = (t / 2.0) * (2.0 / (n - 1) as f64).sqrt();
        assert!((var - t / 2.0).abs() < 3.0 * sigma, "var {var}");
    }

    #[test]
    fn hysteresis_suppresses_chatter() {
        let times: Vec<f64> = (0..300).map(|i| i as f64).collect();
        let mut y = vec![1.0; 100];
        y.extend((0..100).map(|i| if i % 2 == 0 { 0.05 } else { -0.05 }));
        y.extend(vec![-1.0; 100]);
        let det = TransitDetector::new(vec![-1.0, 1.0], 0, 0.2).unwrap();
        let tr = det.detect(&times, &y);
        assert_eq!(tr.len(), 1);
        assert_eq!(tr[0].time, 200.0);
        let loose = TransitDetector::new(vec![-1.0, 1.0], 0, 0.0).unwrap();
        assert!(loose.detect(&times, &y).len() > 10);
    }

    #[test]
    fn dwell_segments() {
        let times: Vec<f64> = (0..60).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..60).map(|i| if (i / 20) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let det = TransitDetector::new(vec![-1.0, 1.0], 1, 0.2).unwrap();
        let d = det.dwell_times(&times, &y);
        assert_eq!(d.transits, 2);
        assert_eq!(d.complete.len(), 1);
        assert!((d.complete[0] - 20.0).abs() <= 2.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
    }

    #[test]
    fn plateau_detection() {
        let levels = [-1.0, 0.0, 1.0];
        let flat: Vec<f64> = (0..100).map(|i| if i < 50 { 1.0 } else { 0.0 }).collect();
        let f = plateau_fraction(&flat, &levels, 0.1, 2);
        assert!((f - 0.96).abs() < 1e-12);
        let ramp: Vec<f64> = (0..100).map(|i| -1.0 + 2.0 * i as f64 / 99.0).collect();
        assert_eq!(plateau_fraction(&ramp, &levels, 0.02, 2), 0.0);
    }

    #[test]
    fn backaction_requires_records() {
        let rec = synthetic(vec![0.0; 10], 0.1);
        assert!(matches!(
            backaction_spectrum(&[rec], 0, 0.0, 1.0, None),
            Err(Error::TooFewRecords { .. })
        ));
    }

    #[test]
    fn backaction_vanishes_without_fluctuations() {
        let recs: Vec<TrajectoryRecord> = (0..60).map(|_| synthetic(vec![0.0; 64], 0.1)).collect();
        let sp = backaction_spectrum(&recs, 0, 0.0, 6.4, None).unwrap();
        assert!(sp.power.iter().all(|p| *p < 1e-12));
    }
}
