//! Synthetic marine shot gathers: hyperbolic reflections plus five parametric
//! noise families.
//!
//! Rows are time samples, columns are receivers. Each noise family is rendered
//! at unit amplitude from its own seeded stream, so its shape does not depend on
//! any amplitude. The noise-to-signal ratio sums the families' energies, which
//! makes it non-decreasing in every family amplitude.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::label::Label;
use crate::tensor::Tensor;

pub const GATHER_SIDE: usize = 299;

/// Upper nsr bound of the good class (exclusive).
pub const GOOD_MAX_NSR: f64 = 0.25;
/// Upper nsr bound of the bad class (inclusive).
pub const BAD_MAX_NSR: f64 = 1.0;

/// Saturation level of the display mapping, in multiples of the signal rms.
pub const DISPLAY_CLIP: f64 = 4.0;

/// A reflection with moveout `t(x) = sqrt(t0² + (x/v)²)`, `x` in receiver units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectorEvent {
    /// Zero-offset arrival time in samples.
    pub t0: f64,
    /// Moveout velocity in receivers per sample.
    pub velocity: f64,
    pub amplitude: f64,
    /// Ricker peak frequency in cycles per sample.
    pub frequency: f64,
}

/// Low-frequency, high-amplitude vertical stripes on a band of channels.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Swell {
    pub channels: usize,
    pub amplitude: f64,
}

/// Smooth low-frequency amplitude wander over the whole gather.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PressureVariation {
    pub amplitude: f64,
    /// Highest spatial/temporal frequency present, cycles per sample.
    pub cutoff: f64,
}

/// Decaying transients shared by a band of neighbouring channels.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tugging {
    pub channels: usize,
    pub amplitude: f64,
}

/// Coherent dipping linear events from another source.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Interference {
    /// Dip in samples per receiver.
    pub slope: f64,
    pub amplitude: f64,
}

/// Band-limited noise bursts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Cavitation {
    pub amplitude: f64,
    /// Centre frequency of the bursts, cycles per sample.
    pub band: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseRecipe {
    pub swell: Swell,
    pub pressure_variation: PressureVariation,
    pub tugging: Tugging,
    pub interference: Interference,
    pub cavitation: Cavitation,
}

impl NoiseRecipe {
    pub const FAMILIES: usize = 5;

    pub fn amplitudes(&self) -> [f64; Self::FAMILIES] {
        [
            self.swell.amplitude,
            self.pressure_variation.amplitude,
            self.tugging.amplitude,
            self.interference.amplitude,
            self.cavitation.amplitude,
        ]
    }

    pub fn set_amplitudes(&mut self, a: [f64; Self::FAMILIES]) {
        self.swell.amplitude = a[0];
        self.pressure_variation.amplitude = a[1];
        self.tugging.amplitude = a[2];
        self.interference.amplitude = a[3];
        self.cavitation.amplitude = a[4];
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatherParams {
    pub n_receivers: usize,
    pub n_samples: usize,
    pub events: Vec<ReflectorEvent>,
    pub noise: NoiseRecipe,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGather {
    /// `n_samples × n_receivers × 1`, values in `[0, 1]`.
    pub image: Tensor,
    pub label: Label,
    pub nsr: f64,
    pub params: GatherParams,
}

pub fn assign_label(nsr: f64) -> Result<Label> {
    if nsr.is_nan() || nsr < 0.0 {
        return Err(Error::invalid("assign_label", format!("nsr must be non-negative, got {nsr}")));
    }
    Ok(if nsr < GOOD_MAX_NSR {
        Label::Good
    } else if nsr <= BAD_MAX_NSR {
        Label::Bad
    } else {
        Label::Ugly
    })
}

pub fn ricker(tau: f64, frequency: f64) -> f64 {
    let a = (PI * frequency * tau).powi(2);
    (1.0 - 2.0 * a) * (-a).exp()
}

fn family_rng(seed: u64, family: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (family + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Signal and unit-amplitude noise fields, each `n_samples·n_receivers` long.
#[derive(Debug, Clone)]
pub(crate) struct Components {
    pub signal: Vec<f64>,
    pub noise: [Vec<f64>; NoiseRecipe::FAMILIES],
}

impl Components {
    pub fn signal_energy(&self) -> f64 {
        self.signal.iter().map(|v| v * v).sum()
    }

    pub fn noise_energies(&self) -> [f64; NoiseRecipe::FAMILIES] {
        self.noise.clone().map(|n| n.iter().map(|v| v * v).sum())
    }
}

struct Grid {
    rows: usize,
    cols: usize,
}

impl Grid {
    fn zeros(&self) -> Vec<f64> {
        vec![0.0; self.rows * self.cols]
    }

    fn add_ricker_trace(&self, field: &mut [f64], col: usize, center: f64, frequency: f64, amplitude: f64) {
        // the wavelet is negligible beyond ~1.5 periods
        let half = (1.5 / frequency).ceil();
        let lo = (center - half).floor().max(0.0) as usize;
        let hi = ((center + half).ceil() as isize).clamp(-1, self.rows as isize - 1);
        if hi < 0 {
            return;
        }
        for t in lo..=hi as usize {
            field[t * self.cols + col] += amplitude * ricker(t as f64 - center, frequency);
        }
    }
}

fn render_signal(g: &Grid, events: &[ReflectorEvent]) -> Vec<f64> {
    let mut s = g.zeros();
    for e in events {
        for x in 0..g.cols {
            let offset = x as f64 / e.velocity;
            let t = (e.t0 * e.t0 + offset * offset).sqrt();
            g.add_ricker_trace(&mut s, x, t, e.frequency, e.amplitude);
        }
    }
    s
}

fn render_swell(g: &Grid, p: &Swell, seed: u64) -> Vec<f64> {
    let mut f = g.zeros();
    let m = p.channels.min(g.cols);
    if m == 0 {
        return f;
    }
    let mut rng = family_rng(seed, 0);
    let start = rng.random_range(0..=g.cols - m);
    let period = rng.random_range(25.0..70.0);
    let phase = rng.random_range(0.0..2.0 * PI);
    for j in 0..m {
        let taper = (PI * (j as f64 + 0.5) / m as f64).sin();
        let gain = taper * rng.random_range(0.7..1.0);
        let ph = phase + 0.15 * j as f64;
        let col = start + j;
        for t in 0..g.rows {
            f[t * g.cols + col] = gain * (2.0 * PI * t as f64 / period + ph).sin();
        }
    }
    f
}

fn render_pressure(g: &Grid, p: &PressureVariation, seed: u64) -> Vec<f64> {
    let mut f = g.zeros();
    let mut rng = family_rng(seed, 1);
    let cutoff = p.cutoff.max(0.0);
    let waves: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random_range(0.0..=cutoff),
                rng.random_range(-cutoff..=cutoff),
                rng.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    for t in 0..g.rows {
        for x in 0..g.cols {
            f[t * g.cols + x] = 0.5
                * waves
                    .iter()
                    .map(|&(ft, fx, ph)| (2.0 * PI * (ft * t as f64 + fx * x as f64) + ph).cos())
                    .sum::<f64>();
        }
    }
    f
}

fn render_tugging(g: &Grid, p: &Tugging, seed: u64) -> Vec<f64> {
    let mut f = g.zeros();
    let m = p.channels.min(g.cols);
    if m == 0 {
        return f;
    }
    let mut rng = family_rng(seed, 2);
    let start = rng.random_range(0..=g.cols - m);
    let bursts = rng.random_range(3..=6);
    for _ in 0..bursts {
        let onset = rng.random_range(0.0..g.rows as f64 * 0.9);
        let decay = rng.random_range(8.0..20.0);
        let freq = rng.random_range(0.03..0.1);
        let shift = rng.random_range(-0.5..0.5);
        for j in 0..m {
            let t0 = onset + shift * j as f64;
            let first = t0.ceil().max(0.0) as usize;
            let last = ((t0 + 6.0 * decay) as usize).min(g.rows - 1);
            for t in first..=last {
                let dt = t as f64 - t0;
                f[t * g.cols + start + j] += (-dt / decay).exp() * (2.0 * PI * freq * dt).sin();
            }
        }
    }
    f
}

fn render_interference(g: &Grid, p: &Interference, seed: u64) -> Vec<f64> {
    let mut f = g.zeros();
    let mut rng = family_rng(seed, 3);
    let count = rng.random_range(2..=4);
    let spacing = rng.random_range(15.0..40.0);
    let span = p.slope.abs() * g.cols as f64;
    let base = if p.slope >= 0.0 {
        rng.random_range(-span..g.rows as f64 * 0.6)
    } else {
        rng.random_range(0.0..g.rows as f64 * 0.6 + span)
    };
    let freq = rng.random_range(0.04..0.08);
    for k in 0..count {
        for x in 0..g.cols {
            let t = base + spacing * k as f64 + p.slope * x as f64;
            g.add_ricker_trace(&mut f, x, t, freq, 1.0);
        }
    }
    f
}

fn render_cavitation(g: &Grid, p: &Cavitation, seed: u64) -> Vec<f64> {
    let mut f = g.zeros();
    let mut rng = family_rng(seed, 4);
    let bursts = rng.random_range(3..=8);
    for _ in 0..bursts {
        let len = rng.random_range(10..=30usize).min(g.rows);
        let start = rng.random_range(0..=g.rows - len);
        let c0 = rng.random_range(0..g.cols);
        let width = rng.random_range(g.cols / 4..=g.cols);
        let detune: Vec<f64> = (0..3).map(|_| rng.random_range(-0.02..0.02)).collect();
        let phases: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        let dip = rng.random_range(-0.3..0.3);
        for j in 0..width {
            let x = (c0 + j) % g.cols;
            let gain = 0.6 + 0.4 * (PI * (j as f64 + 0.5) / width as f64).sin();
            for i in 0..len {
                let hann = (PI * (i as f64 + 0.5) / len as f64).sin().powi(2);
                let t = (start + i) as f64 + dip * j as f64;
                let v: f64 = detune
                    .iter()
                    .zip(&phases)
                    .map(|(d, ph)| (2.0 * PI * (p.band + d) * t + ph).cos())
                    .sum::<f64>()
                    / 3.0;
                f[(start + i) * g.cols + x] += gain * hann * v;
            }
        }
    }
    f
}

fn validate(p: &GatherParams) -> Result<()> {
    if p.n_receivers == 0 || p.n_samples == 0 {
        return Err(Error::invalid("synthesize_gather", "gather extents must be positive"));
    }
    if p.events.is_empty() {
        return Err(Error::invalid("synthesize_gather", "at least one reflection event is required"));
    }
    if p.events.iter().any(|e| !(e.velocity > 0.0 && e.frequency > 0.0)) {
        return Err(Error::invalid("synthesize_gather", "event velocity and frequency must be positive"));
    }
    if p.noise.amplitudes().iter().any(|a| a.is_nan() || *a < 0.0) {
        return Err(Error::invalid("synthesize_gather", "noise amplitudes must be non-negative"));
    }
    Ok(())
}

pub(crate) fn render_components(p: &GatherParams) -> Result<Components> {
    validate(p)?;
    let g = Grid {
        rows: p.n_samples,
        cols: p.n_receivers,
    };
    let signal = render_signal(&g, &p.events);
    if signal.iter().all(|&v| v == 0.0) {
        return Err(Error::invalid("synthesize_gather", "signal has zero energy"));
    }
    let n = &p.noise;
    Ok(Components {
        signal,
        noise: [
            render_swell(&g, &n.swell, p.seed),
            render_pressure(&g, &n.pressure_variation, p.seed),
            render_tugging(&g, &n.tugging, p.seed),
            render_interference(&g, &n.interference, p.seed),
            render_cavitation(&g, &n.cavitation, p.seed),
        ],
    })
}

/// `Σ_k a_k²·E(u_k) / E(signal)` for unit noise fields `u_k`.
pub(crate) fn noise_to_signal(c: &Components, amplitudes: &[f64; NoiseRecipe::FAMILIES]) -> f64 {
    let energies = c.noise_energies();
    let noise: f64 = amplitudes.iter().zip(energies).map(|(a, e)| a * a * e).sum();
    noise / c.signal_energy()
}

pub(crate) fn compose(p: &GatherParams, c: &Components) -> Result<LabeledGather> {
    let amps = p.noise.amplitudes();
    let mut raw = c.signal.clone();
    for (field, a) in c.noise.iter().zip(amps) {
        if a > 0.0 {
            for (r, v) in raw.iter_mut().zip(field) {
                *r += a * v;
            }
        }
    }
    // display gain normalized to the signal rms, zero maps to mid-gray
    let clip = DISPLAY_CLIP * (c.signal_energy() / raw.len() as f64).sqrt();
    let pixels = raw.iter().map(|&v| (0.5 + 0.5 * v / clip).clamp(0.0, 1.0)).collect();
    let nsr = noise_to_signal(c, &amps);
    Ok(LabeledGather {
        image: Tensor::new(vec![p.n_samples, p.n_receivers, 1], pixels)?.ensure_finite("synthesize_gather")?,
        label: assign_label(nsr)?,
        nsr,
        params: p.clone(),
    })
}

/// Renders a gather, maps it to `[0, 1]` with a clip at [`DISPLAY_CLIP`] times
/// the signal rms, and labels it by its nsr.
pub fn synthesize_gather(p: &GatherParams) -> Result<LabeledGather> {
    compose(p, &render_components(p)?)
}
