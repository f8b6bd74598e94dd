use crate::error::{Error, Result};
use crate::flow::SequenceSample;

pub const DEFAULT_WINDOW_SECONDS: f64 = 3.33;
pub const MIN_BPM: f64 = 40.0;
pub const MAX_BPM: f64 = 240.0;

/// Per-frame energy of the first frame difference; one entry shorter than
/// the sample.
pub fn onset_envelope(sample: &SequenceSample) -> Vec<f64> {
    let d = sample.dim;
    sample
        .values
        .windows(2 * d)
        .step_by(d)
        .map(|w| w[..d].iter().zip(&w[d..]).map(|(a, b)| (b - a) * (b - a)).sum())
        .collect()
}

/// Tempo of one window: `60·frame_rate / lag*`, where `lag*` maximizes the
/// autocorrelation of the mean-removed envelope over the 40–240 BPM lags.
pub fn estimate_bpm(window: &[f64], frame_rate: f64) -> Result<f64> {
    if !(frame_rate > 0.0 && frame_rate.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid frame rate {frame_rate}")));
    }
    if (window.len() as f64) < 2.0 * frame_rate {
        return Err(Error::InvalidArgument(format!(
            "window of {} frames is shorter than two seconds",
            window.len()
        )));
    }
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    let centered: Vec<f64> = window.iter().map(|x| x - mean).collect();
    if centered.iter().all(|&x| x == 0.0) {
        return Err(Error::NoTempo);
    }
    let min_lag = ((60.0 * frame_rate / MAX_BPM).ceil() as usize).max(1);
    let max_lag = ((60.0 * frame_rate / MIN_BPM).floor() as usize).min(window.len() - 1);
    if min_lag > max_lag {
        return Err(Error::InvalidArgument("window too short for the tempo range".into()));
    }
    let mut best = (min_lag, f64::NEG_INFINITY);
    for lag in min_lag..=max_lag {
        let r: f64 = centered[lag..].iter().zip(&centered).map(|(a, b)| a * b).sum();
        if r > best.1 {
            best = (lag, r);
        }
    }
    Ok(60.0 * frame_rate / best.0 as f64)
}

/// Per-window tempo estimates over complete non-overlapping windows.
#[derive(Debug, Clone, PartialEq)]
pub struct TempoTrace {
    pub envelope: Vec<f64>,
    pub frame_rate: f64,
    pub window_seconds: f64,
    pub per_window_bpm: Vec<f64>,
}

impl TempoTrace {
    pub fn analyze(envelope: &[f64], frame_rate: f64, window_seconds: f64) -> Result<Self> {
        if !(window_seconds >= 2.0) {
            return Err(Error::InvalidArgument(format!(
                "tempo window of {window_seconds} s is shorter than two seconds"
            )));
        }
        let frames = (window_seconds * frame_rate).floor() as usize;
        let windows = envelope.len().checked_div(frames).unwrap_or(0);
        if windows < 2 {
            return Err(Error::InvalidArgument(format!(
                "{} envelope frames hold fewer than two {window_seconds} s windows",
                envelope.len()
            )));
        }
        let per_window_bpm = envelope
            .chunks_exact(frames)
            .map(|w| estimate_bpm(w, frame_rate))
            .collect::<Result<_>>()?;
        Ok(Self {
            envelope: envelope.to_vec(),
            frame_rate,
            window_seconds,
            per_window_bpm,
        })
    }

    /// Population standard deviation of the window estimates.
    pub fn std(&self) -> f64 {
        let v = &self.per_window_bpm;
        if v.iter().all(|&x| x == v[0]) {
            return 0.0;
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / v.len() as f64).sqrt()
    }
}

pub fn bpm_std(envelope: &[f64], frame_rate: f64, window_seconds: f64) -> Result<f64> {
    Ok(TempoTrace::analyze(envelope, frame_rate, window_seconds)?.std())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clicks(seconds: f64, bpm: f64, fr: f64) -> Vec<f64> {
        let n = (seconds * fr).round() as usize;
        let period = 60.0 * fr / bpm;
        let mut env = vec![0.0; n];
        let mut k = 0.0;
        while (k * period).round() < n as f64 {
            env[(k * period).round() as usize] = 1.0;
            k += 1.0;
        }
        env
    }

    #[test]
    fn click_tracks() {
        assert!((estimate_bpm(&clicks(3.33, 120.0, 100.0), 100.0).unwrap() - 120.0).abs() <= 1.0);
        assert!((estimate_bpm(&clicks(3.33, 100.0, 100.0), 100.0).unwrap() - 100.0).abs() <= 1.0);
    }

    #[test]
    fn zero_window_has_no_tempo() {
        assert!(matches!(estimate_bpm(&[0.0; 400], 100.0), Err(Error::NoTempo)));
        assert!(matches!(estimate_bpm(&[2.5; 400], 100.0), Err(Error::NoTempo)));
    }

    #[test]
    fn short_window_is_rejected() {
        assert!(estimate_bpm(&[1.0, 0.0, 1.0], 100.0).is_err());
    }

    #[test]
    fn constant_and_switching_tempo() {
        assert!(bpm_std(&clicks(20.0, 120.0, 100.0), 100.0, 3.33).unwrap() < 1.0);
        let mut env = clicks(10.0, 90.0, 100.0);
        env.extend(clicks(10.0, 140.0, 100.0));
        assert!(bpm_std(&env, 100.0, 3.33).unwrap() > 10.0);
    }

    #[test]
    fn identical_windows_give_exact_zero() {
        let window = clicks(3.33, 120.0, 100.0);
        let env: Vec<f64> = window.iter().chain(&window).chain(&window).copied().collect();
        assert_eq!(bpm_std(&env, 100.0, 3.33).unwrap(), 0.0);
    }

    #[test]
    fn scale_invariance_and_range() {
        let mut env = clicks(10.0, 90.0, 100.0);
        env.extend(clicks(10.0, 140.0, 100.0));
        let trace = TempoTrace::analyze(&env, 100.0, 3.33).unwrap();
        let scaled: Vec<f64> = env.iter().map(|x| 3.7 * x).collect();
        assert_eq!(TempoTrace::analyze(&scaled, 100.0, 3.33).unwrap().per_window_bpm, trace.per_window_bpm);
        assert!(trace.per_window_bpm.iter().all(|b| (MIN_BPM..=MAX_BPM).contains(b)));
    }

    #[test]
    fn fewer_than_two_windows() {
        assert!(bpm_std(&clicks(5.0, 120.0, 100.0), 100.0, 3.33).is_err());
    }

    #[test]
    fn envelope_of_a_sample() {
        let s = SequenceSample::from_frames("p", 0, 0, &[vec![0.0, 0.0], vec![1.0, 2.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(onset_envelope(&s), vec![5.0, 4.0]);
    }
}
