//! Audio front end: WAV decoding, fixed-hop framing with a periodic Hann
//! window and energy-based silence removal, autocorrelation, and the
//! Levinson-Durbin order recursion producing LPC frames.
//!
//! The LPC sign convention is `A(z) = 1 + sum_k a_k z^-k`, so that filtering
//! the signal with `A(z)` yields the prediction residual.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Mono audio with amplitudes normalized to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::domain("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::domain(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Reads a PCM (8/16/24/32-bit integer or 32-bit float) WAV file.
///
/// Multichannel input is rejected unless `downmix` is set, in which case the
/// channels are averaged.
pub fn read_wav(path: &Path, downmix: bool) -> Result<AudioSignal> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_wav_from(BufReader::new(file), downmix)
        .map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        })
}

pub fn read_wav_from<R: Read>(reader: R, downmix: bool) -> Result<AudioSignal> {
    let wav = hound::WavReader::new(reader).map_err(|e| Error::Format(e.to_string()))?;
    let spec = wav.spec();
    let channels = spec.channels;
    if channels == 0 {
        return Err(Error::Format("zero channels".into()));
    }
    if channels > 1 && !downmix {
        return Err(Error::Channel { channels });
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 1.0 / f64::from(1u32 << (bits - 1));
            wav.into_samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(e.to_string()))?
        }
        (hound::SampleFormat::Float, 32) => wav
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(e.to_string()))?,
        (format, bits) => {
            return Err(Error::Format(format!(
                "unsupported encoding: {format:?} with {bits} bits per sample"
            )))
        }
    };
    let ch = usize::from(channels);
    let samples = if ch == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(ch)
            .map(|c| c.iter().sum::<f64>() / ch as f64)
            .collect()
    };
    AudioSignal::new(samples, spec.sample_rate)
}

/// Analysis framing parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameConfig {
    pub window_ms: f64,
    pub step_ms: f64,
    pub lpc_order: usize,
    /// Frames whose energy is below the loudest frame by more than this many
    /// dB are treated as silence.
    pub silence_threshold_db: f64,
    /// Relative white-noise correction added to `r0` before the recursion;
    /// zero disables it.
    pub r0_guard: f64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            window_ms: 25.0,
            step_ms: 20.0,
            lpc_order: 16,
            silence_threshold_db: -60.0,
            r0_guard: 1e-9,
        }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_ms > 0.0 && self.window_ms >= self.step_ms) {
            return Err(Error::domain(format!(
                "need window_ms >= step_ms > 0, got window {} ms, step {} ms",
                self.window_ms, self.step_ms
            )));
        }
        if self.lpc_order == 0 {
            return Err(Error::domain("LPC order must be at least 1"));
        }
        if !self.silence_threshold_db.is_finite() || !(self.r0_guard >= 0.0) {
            return Err(Error::domain("silence threshold and r0 guard must be finite, guard >= 0"));
        }
        Ok(())
    }

    pub fn frame_len(&self, sample_rate_hz: u32) -> usize {
        (self.window_ms * f64::from(sample_rate_hz) / 1000.0).round() as usize
    }

    pub fn hop_len(&self, sample_rate_hz: u32) -> usize {
        (self.step_ms * f64::from(sample_rate_hz) / 1000.0).round() as usize
    }
}

/// One analysis frame; `index` is the window position in the original signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub samples: Vec<f64>,
}

impl Frame {
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }
}

/// Periodic Hann window, `w[n] = 0.5 - 0.5 cos(2 pi n / len)`.
pub fn hann_periodic(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Cuts the signal into unwindowed frames at a fixed hop. Yields
/// `floor((N - W) / H) + 1` frames.
pub fn split_frames(signal: &AudioSignal, cfg: &FrameConfig) -> Result<Vec<Frame>> {
    cfg.validate()?;
    let fs = signal.sample_rate_hz();
    let (win, hop) = (cfg.frame_len(fs), cfg.hop_len(fs));
    if win == 0 || hop == 0 {
        return Err(Error::domain(format!(
            "window/hop rounds to zero samples at {fs} Hz"
        )));
    }
    let n = signal.len();
    if n < win {
        return Err(Error::EmptyOutput(format!(
            "signal has {n} samples, shorter than one {win}-sample window"
        )));
    }
    let count = (n - win) / hop + 1;
    Ok((0..count)
        .map(|i| Frame {
            index: i,
            samples: signal.samples()[i * hop..i * hop + win].to_vec(),
        })
        .collect())
}

/// Drops frames below `threshold_db` relative to the most energetic frame.
/// Zero-energy frames are always silent.
pub fn remove_silent(frames: Vec<Frame>, threshold_db: f64) -> Vec<Frame> {
    let energies: Vec<f64> = frames.iter().map(Frame::energy).collect();
    let peak = energies.iter().copied().fold(0.0, f64::max);
    let floor = peak * 10f64.powf(threshold_db / 10.0);
    frames
        .into_iter()
        .zip(energies)
        .filter(|(_, e)| *e > 0.0 && *e >= floor)
        .map(|(f, _)| f)
        .collect()
}

/// Frames the signal, removes silence (on pre-window energy) and applies the
/// periodic Hann window. No pre-emphasis is applied.
pub fn frame_signal(signal: &AudioSignal, cfg: &FrameConfig) -> Result<Vec<Frame>> {
    let frames = remove_silent(split_frames(signal, cfg)?, cfg.silence_threshold_db);
    let window = hann_periodic(cfg.frame_len(signal.sample_rate_hz()));
    Ok(frames
        .into_iter()
        .map(|mut f| {
            f.samples.iter_mut().zip(&window).for_each(|(s, w)| *s *= w);
            f
        })
        .collect())
}

/// Biased autocorrelation `r_j = sum_t x[t] x[t+j]` for lags `0..=order`.
pub fn autocorrelation(frame: &[f64], order: usize) -> Result<Vec<f64>> {
    if order >= frame.len() {
        return Err(Error::Order {
            order,
            len: frame.len(),
        });
    }
    Ok((0..=order)
        .map(|lag| {
            frame[..frame.len() - lag]
                .iter()
                .zip(&frame[lag..])
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect())
}

/// LPC coefficients `a_1..a_K` of one analysis frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LpcFrame {
    coefficients: Vec<f64>,
    residual_energy: f64,
    frame_index: usize,
}

impl LpcFrame {
    pub fn new(coefficients: Vec<f64>, residual_energy: f64, frame_index: usize) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::domain("LPC frame needs at least one coefficient"));
        }
        if coefficients.iter().any(|a| !a.is_finite()) {
            return Err(Error::domain("LPC coefficients must be finite"));
        }
        if !(residual_energy >= 0.0) || !residual_energy.is_finite() {
            return Err(Error::domain(format!(
                "residual energy must be finite and nonnegative, got {residual_energy}"
            )));
        }
        Ok(Self {
            coefficients,
            residual_energy,
            frame_index,
        })
    }

    /// Wraps bare coefficients (unit residual energy, index 0).
    pub fn from_coefficients(coefficients: Vec<f64>) -> Result<Self> {
        Self::new(coefficients, 1.0, 0)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    pub fn residual_energy(&self) -> f64 {
        self.residual_energy
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn with_index(mut self, frame_index: usize) -> Self {
        self.frame_index = frame_index;
        self
    }

    /// Reflection coefficients `k_1..k_K` by the step-down recursion.
    /// Fails as soon as some `|k_m| >= 1`.
    pub fn reflection_coefficients(&self) -> Result<Vec<f64>> {
        let order = self.order();
        let mut a = self.coefficients.clone();
        let mut k = vec![0.0; order];
        for m in (1..=order).rev() {
            let km = a[m - 1];
            if !(km.abs() < 1.0) {
                return Err(Error::Unstable(format!(
                    "reflection coefficient k_{m} = {km} has magnitude >= 1"
                )));
            }
            k[m - 1] = km;
            let denom = 1.0 - km * km;
            let prev: Vec<f64> = (1..m)
                .map(|j| (a[j - 1] - km * a[m - j - 1]) / denom)
                .collect();
            a.truncate(m - 1);
            a.copy_from_slice(&prev);
        }
        Ok(k)
    }

    pub fn is_minimum_phase(&self) -> bool {
        self.reflection_coefficients().is_ok()
    }
}

/// Solves the Yule-Walker equations by order recursion.
pub fn levinson_durbin(r: &[f64]) -> Result<LpcFrame> {
    if r.len() < 2 {
        return Err(Error::domain("autocorrelation needs lags 0..=K with K >= 1"));
    }
    let r0 = r[0];
    if !(r0 > 0.0) || !r0.is_finite() {
        return Err(Error::DegenerateFrame(r0));
    }
    let order = r.len() - 1;
    let mut a = vec![0.0; order];
    let mut err = r0;
    for m in 1..=order {
        let acc = r[m] + (1..m).map(|j| a[j - 1] * r[m - j]).sum::<f64>();
        let k = -acc / err;
        if !(k.abs() < 1.0) {
            return Err(Error::Unstable(format!(
                "reflection coefficient k_{m} = {k} has magnitude >= 1"
            )));
        }
        let prev = a.clone();
        for j in 1..m {
            a[j - 1] = prev[j - 1] + k * prev[m - j - 1];
        }
        a[m - 1] = k;
        err *= 1.0 - k * k;
    }
    LpcFrame::new(a, err.max(0.0), 0)
}

/// Outcome counters of [`analyze_signal`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AnalysisCounts {
    pub windows: usize,
    pub silent: usize,
    pub unstable: usize,
}

/// Full front end: framing, silence removal, windowing, autocorrelation
/// (with the configured `r0` guard) and Levinson-Durbin. Frames whose
/// recursion fails are dropped and counted. Output is ordered by frame index.
pub fn analyze_signal(
    signal: &AudioSignal,
    cfg: &FrameConfig,
) -> Result<(Vec<LpcFrame>, AnalysisCounts)> {
    let raw = split_frames(signal, cfg)?;
    let windows = raw.len();
    let voiced = remove_silent(raw, cfg.silence_threshold_db);
    let silent = windows - voiced.len();
    let window = hann_periodic(cfg.frame_len(signal.sample_rate_hz()));
    let results: Vec<Result<LpcFrame>> = voiced
        .par_iter()
        .map(|f| {
            let windowed: Vec<f64> = f.samples.iter().zip(&window).map(|(s, w)| s * w).collect();
            let mut r = autocorrelation(&windowed, cfg.lpc_order)?;
            r[0] *= 1.0 + cfg.r0_guard;
            levinson_durbin(&r).map(|lpc| lpc.with_index(f.index))
        })
        .collect();
    let mut frames = Vec::with_capacity(results.len());
    let mut unstable = 0;
    for res in results {
        match res {
            Ok(lpc) => frames.push(lpc),
            Err(e @ Error::Order { .. }) => return Err(e),
            Err(_) => unstable += 1,
        }
    }
    Ok((
        frames,
        AnalysisCounts {
            windows,
            silent,
            unstable,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wav_bytes(spec: hound::WavSpec, write: impl FnOnce(&mut hound::WavWriter<&mut std::io::Cursor<Vec<u8>>>)) -> Vec<u8> {
        let mut cursor = std::io::Cursor::new(Vec::new());
        {
            let mut w = hound::WavWriter::new(&mut cursor, spec).unwrap();
            write(&mut w);
            w.finalize().unwrap();
        }
        cursor.into_inner()
    }

    fn pcm16(channels: u16) -> hound::WavSpec {
        hound::WavSpec {
            channels,
            sample_rate: 16000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        }
    }

    #[test]
    fn wav_header_and_scaling() {
        let bytes = wav_bytes(pcm16(1), |w| {
            w.write_sample(32767i16).unwrap();
            for _ in 1..400 {
                w.write_sample(0i16).unwrap();
            }
        });
        let sig = read_wav_from(&bytes[..], false).unwrap();
        assert_eq!(sig.len(), 400);
        assert_eq!(sig.sample_rate_hz(), 16000);
        assert_eq!(sig.samples()[0], 32767.0 / 32768.0);
    }

    #[test]
    fn wav_truncated_header_is_format_error() {
        let bytes = wav_bytes(pcm16(1), |w| w.write_sample(1i16).unwrap());
        assert!(matches!(read_wav_from(&bytes[..20], false), Err(Error::Format(_))));
    }

    #[test]
    fn wav_stereo_needs_downmix() {
        let bytes = wav_bytes(pcm16(2), |w| {
            w.write_sample(16384i16).unwrap();
            w.write_sample(0i16).unwrap();
        });
        assert!(matches!(
            read_wav_from(&bytes[..], false),
            Err(Error::Channel { channels: 2 })
        ));
        let sig = read_wav_from(&bytes[..], true).unwrap();
        assert_eq!(sig.samples(), &[0.25]);
    }

    #[test]
    fn wav_float_and_24_bit() {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let bytes = wav_bytes(spec, |w| w.write_sample(-0.5f32).unwrap());
        assert_eq!(read_wav_from(&bytes[..], false).unwrap().samples(), &[-0.5]);

        let spec = hound::WavSpec {
            bits_per_sample: 24,
            sample_format: hound::SampleFormat::Int,
            ..spec
        };
        let bytes = wav_bytes(spec, |w| w.write_sample(-(1i32 << 23)).unwrap());
        assert_eq!(read_wav_from(&bytes[..], false).unwrap().samples(), &[-1.0]);
    }

    #[test]
    fn framing_lengths_at_16k() {
        let cfg = FrameConfig::default();
        assert_eq!(cfg.frame_len(16000), 400);
        assert_eq!(cfg.hop_len(16000), 320);
    }

    #[test]
    fn short_signal_is_empty_output_error() {
        let sig = AudioSignal::new(vec![0.1; 399], 16000).unwrap();
        assert!(matches!(
            frame_signal(&sig, &FrameConfig::default()),
            Err(Error::EmptyOutput(_))
        ));
    }

    #[test]
    fn all_zero_signal_is_all_silent() {
        let sig = AudioSignal::new(vec![0.0; 16000], 16000).unwrap();
        assert!(frame_signal(&sig, &FrameConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn silent_frames_are_dropped() {
        let mut samples = vec![0.0; 16000];
        for (t, s) in samples.iter_mut().enumerate().take(8000) {
            *s = (t as f64 * 0.1).sin();
        }
        let sig = AudioSignal::new(samples, 16000).unwrap();
        let frames = frame_signal(&sig, &FrameConfig::default()).unwrap();
        assert!(!frames.is_empty());
        // windows fully inside the zero half are silent
        assert!(frames.iter().all(|f| f.index * 320 < 8000));
    }

    #[test]
    fn hann_is_periodic_and_symmetric() {
        let w = hann_periodic(400);
        assert_eq!(w[0], 0.0);
        for i in 1..400 {
            assert!((w[i] - w[400 - i]).abs() < 1e-15);
        }
        assert!(w.iter().map(|x| x * x).sum::<f64>() > 0.0);
    }

    #[test]
    fn autocorrelation_examples() {
        let mut impulse = vec![0.0; 10];
        impulse[0] = 1.0;
        assert_eq!(autocorrelation(&impulse, 4).unwrap(), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(autocorrelation(&[1.0, 1.0], 1).unwrap(), vec![2.0, 1.0]);
        assert!(matches!(
            autocorrelation(&[1.0, 1.0], 2),
            Err(Error::Order { order: 2, len: 2 })
        ));
    }

    #[test]
    fn autocorrelation_matches_double_loop() {
        let frame: Vec<f64> = (0..400)
            .map(|t| (2.0 * PI * t as f64 / 8.0).sin())
            .collect();
        let r = autocorrelation(&frame, 2).unwrap();
        for (lag, &rv) in r.iter().enumerate() {
            let mut acc = 0.0;
            for t in 0..frame.len() {
                if t + lag < frame.len() {
                    acc += frame[t] * frame[t + lag];
                }
            }
            assert!((rv - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn levinson_examples() {
        let white = levinson_durbin(&[1.0, 0.0]).unwrap();
        assert_eq!(white.coefficients(), &[0.0]);
        assert_eq!(white.residual_energy(), 1.0);

        let ar1 = levinson_durbin(&[1.0, 0.5]).unwrap();
        assert_eq!(ar1.coefficients(), &[-0.5]);
        assert_eq!(ar1.residual_energy(), 0.75);
    }

    #[test]
    fn levinson_errors() {
        assert!(matches!(levinson_durbin(&[0.0, 0.0]), Err(Error::DegenerateFrame(_))));
        assert!(matches!(levinson_durbin(&[-1.0, 0.0]), Err(Error::DegenerateFrame(_))));
        assert!(matches!(levinson_durbin(&[1.0, 1.0]), Err(Error::Unstable(_))));
    }

    #[test]
    fn step_down_inverts_levinson() {
        let r = [1.0, 0.6, 0.2, -0.1, 0.05];
        let lpc = levinson_durbin(&r).unwrap();
        let k = lpc.reflection_coefficients().unwrap();
        assert!((k[0] + 0.6).abs() < 1e-12);
        assert!(k.iter().all(|k| k.abs() < 1.0));
        let unstable = LpcFrame::from_coefficients(vec![-2.5, 1.0]).unwrap();
        assert!(!unstable.is_minimum_phase());
    }

    #[test]
    fn analyze_orders_by_frame_index() {
        let samples: Vec<f64> = (0..16000)
            .map(|t| 0.5 * (t as f64 * 0.05).sin() + 0.3 * (t as f64 * 0.31).cos())
            .collect();
        let sig = AudioSignal::new(samples, 16000).unwrap();
        let (frames, counts) = analyze_signal(&sig, &FrameConfig::default()).unwrap();
        assert_eq!(counts.windows, 49);
        assert_eq!(frames.len() + counts.silent + counts.unstable, 49);
        assert!(frames.windows(2).all(|w| w[0].frame_index() < w[1].frame_index()));
        assert!(frames.iter().all(|f| f.order() == 16 && f.is_minimum_phase()));
    }
}
