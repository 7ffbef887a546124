//! Time-domain reconstruction and pulse metrics.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator_assembly::{frequency_rule, TimeWindow};
use crate::spectral_basis::{BasisSet, TIME_SCALE};
use crate::transfer_data::InterpolatedTransfer;

/// Free-space wave impedance (Ω).
pub const Z0: f64 = 376.730_313_412;
/// Tail energy left outside an automatically sized grid.
pub const TAIL_FRACTION: f64 = 1e-4;
const MAX_GRID_POINTS: usize = 1 << 22;

/// Uniform time grid `t_k = start + k·step`, `k < len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn new(start: f64, end: f64, step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) || !(start.is_finite() && end.is_finite()) || end <= start {
            return Err(Error::Domain(format!(
                "invalid time grid [{start}, {end}] with step {step}"
            )));
        }
        let len = ((end - start) / step).round() as usize + 1;
        if len > MAX_GRID_POINTS {
            return Err(Error::Domain(format!("time grid of {len} points is too large")));
        }
        Ok(TimeGrid { start, step, len })
    }

    /// Grid centred on `center` with `half_span` on either side.
    pub fn centered(center: f64, half_span: f64, step: f64) -> Result<Self> {
        let k = (half_span / step).ceil();
        Self::new(center - k * step, center + k * step, step)
    }

    /// Default step `π/(8 ω_max)`.
    pub fn default_step(basis: &BasisSet) -> f64 {
        PI / (8.0 * basis.band().omega_max())
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.time(self.len - 1)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len).map(|k| self.time(k)).collect()
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start - 1e-9 * self.step && t <= self.end() + 1e-9 * self.step
    }
}

/// Real samples on a uniform grid, one row per channel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Waveform {
    pub grid: TimeGrid,
    pub channels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl Waveform {
    /// `Σ_c v_c(t)²` at every sample.
    pub fn squared_sum(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len];
        for ch in &self.values {
            for (o, v) in out.iter_mut().zip(ch) {
                *o += v * v;
            }
        }
        out
    }

    /// Trapezoid `∫ Σ_c v_c² dt` over the grid.
    pub fn energy(&self) -> f64 {
        crate::quadrature::trapezoid(&self.squared_sum(), self.grid.step)
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels
            .iter()
            .position(|c| c == name)
            .map(|i| self.values[i].as_slice())
    }

    /// Linear interpolation of a channel.
    pub fn sample(&self, channel: usize, t: f64) -> f64 {
        let x = (t - self.grid.start) / self.grid.step;
        let k = (x.floor().max(0.0) as usize).min(self.grid.len.saturating_sub(2));
        let f = (x - k as f64).clamp(0.0, 1.0);
        let v = &self.values[channel];
        if self.grid.len == 1 {
            return v[0];
        }
        (1.0 - f) * v[k] + f * v[k + 1]
    }

    /// CSV `t_s,channel,value`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t_s,channel,value")?;
        for k in 0..self.grid.len {
            let t = self.grid.time(k);
            for (name, v) in self.channels.iter().zip(&self.values) {
                writeln!(w, "{t},{name},{}", v[k])?;
            }
        }
        Ok(())
    }
}

/// Per-port excitation `a_p(t)` from the closed-form basis images.
pub fn reconstruct_excitation(basis: &BasisSet, q: &[f64], ports: usize, grid: &TimeGrid) -> Result<Waveform> {
    let spectrum = basis.synthesize_spectrum(q, ports)?;
    let values = (0..ports)
        .map(|p| (0..grid.len).map(|k| spectrum.time_value(p, grid.time(k))).collect())
        .collect();
    Ok(Waveform {
        grid: *grid,
        channels: (0..ports).map(|p| format!("port{p}")).collect(),
        values,
    })
}

/// Output `y_c(t) = (1/√2π) ∫_Ω Σ_p H_cp(ω) a_p(ω) e^{jωt} dω` by frequency
/// quadrature.
pub fn reconstruct_field(
    h: &InterpolatedTransfer,
    basis: &BasisSet,
    q: &[f64],
    grid: &TimeGrid,
) -> Result<Waveform> {
    let ports = h.n_ports();
    let spectrum = basis.synthesize_spectrum(q, ports)?;
    let reach = grid.start.abs().max(grid.end().abs());
    let rule = frequency_rule(basis, Some(h), reach, 1);
    let outputs = h.n_outputs();
    // weighted Σ_p H_cp a_p at each node
    let mut weighted = vec![vec![Complex64::new(0.0, 0.0); rule.len()]; outputs];
    let mut buf = vec![Complex64::new(0.0, 0.0); outputs * ports];
    let a: Vec<Vec<Complex64>> = (0..ports)
        .map(|p| rule.nodes.iter().map(|&w| spectrum.eval(p, w)).collect())
        .collect();
    for (i, (&w, &wt)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        h.eval_into(w, &mut buf);
        for c in 0..outputs {
            let s: Complex64 = (0..ports).map(|p| buf[c * ports + p] * a[p][i]).sum();
            weighted[c][i] = s * wt;
        }
    }
    let values = weighted
        .iter()
        .map(|wc| oscillatory_sum(&rule.nodes, wc, grid))
        .collect();
    Ok(Waveform {
        grid: *grid,
        channels: (0..outputs).map(|c| format!("out{c}")).collect(),
        values,
    })
}

/// `2·(1/√2π)·Re Σ_i c_i e^{jω_i t}` on a uniform grid, stepping the phasors
/// by rotation and reseeding periodically.
fn oscillatory_sum(nodes: &[f64], coeffs: &[Complex64], grid: &TimeGrid) -> Vec<f64> {
    const RESEED: usize = 128;
    let step: Vec<Complex64> = nodes.iter().map(|&w| Complex64::from_polar(1.0, w * grid.step)).collect();
    let mut phase = vec![Complex64::new(0.0, 0.0); nodes.len()];
    let mut out = Vec::with_capacity(grid.len);
    for k in 0..grid.len {
        if k % RESEED == 0 {
            let t = grid.time(k);
            for (p, &w) in phase.iter_mut().zip(nodes) {
                *p = Complex64::from_polar(1.0, w * t);
            }
        } else {
            for (p, s) in phase.iter_mut().zip(&step) {
                *p *= s;
            }
        }
        let mut acc = 0.0;
        for (c, p) in coeffs.iter().zip(&phase) {
            acc += c.re * p.re - c.im * p.im;
        }
        out.push(2.0 * TIME_SCALE * acc);
    }
    out
}

/// Picks a grid with the default step, centred on `center`, doubling its span
/// until the energy captured reaches `(1 − TAIL_FRACTION)·total`.
pub fn auto_grid(
    basis: &BasisSet,
    center: f64,
    total_energy: f64,
    mut energy_on: impl FnMut(&TimeGrid) -> Result<f64>,
) -> Result<TimeGrid> {
    let step = TimeGrid::default_step(basis);
    // a single-lobe basis function is about 2π/Δ long; start at 8 of those
    let mut half = 8.0 * 2.0 * PI / basis.band().width();
    loop {
        let grid = TimeGrid::centered(center, half, step)?;
        if total_energy <= 0.0 {
            return Ok(grid);
        }
        let e = energy_on(&grid)?;
        if e >= (1.0 - TAIL_FRACTION) * total_energy {
            return Ok(grid);
        }
        half *= 2.0;
        if 2.0 * half / step > MAX_GRID_POINTS as f64 {
            return Err(Error::Numerical(format!(
                "signal energy not captured within {} grid points ({e:.6e} of {total_energy:.6e})",
                MAX_GRID_POINTS
            )));
        }
    }
}

/// Radiation intensity trace `U(t) = Σ_c |F_c(t)|² / Z₀`.
#[derive(Debug, Clone, Serialize)]
pub struct IntensityTrace {
    pub grid: TimeGrid,
    pub intensity: Vec<f64>,
    pub peak: f64,
    pub peak_time: f64,
}

impl IntensityTrace {
    /// CSV `t_s,U`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t_s,U")?;
        for (k, u) in self.intensity.iter().enumerate() {
            writeln!(w, "{},{u}", self.grid.time(k))?;
        }
        Ok(())
    }
}

pub fn radiation_intensity(field: &Waveform, z0: f64) -> Result<IntensityTrace> {
    if !(z0.is_finite() && z0 > 0.0) {
        return Err(Error::Domain("wave impedance must be positive".into()));
    }
    let intensity: Vec<f64> = field.squared_sum().into_iter().map(|v| v / z0).collect();
    let (k, peak) = intensity
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |best, (k, u)| if u > best.1 { (k, u) } else { best });
    Ok(IntensityTrace {
        grid: field.grid,
        intensity,
        peak,
        peak_time: field.grid.time(k),
    })
}

/// `∫_window Σ|w|² dt / ∫_grid Σ|w|² dt` with the trapezoid rule on the
/// piecewise-linear interpolant of the squared samples.
pub fn window_energy_fraction(w: &Waveform, window: TimeWindow) -> Result<f64> {
    let g = &w.grid;
    if !g.contains(window.start()) || !g.contains(window.end()) {
        return Err(Error::Range(format!(
            "window [{:.6e}, {:.6e}] s is outside the grid [{:.6e}, {:.6e}] s",
            window.start(),
            window.end(),
            g.start,
            g.end()
        )));
    }
    let e = w.squared_sum();
    let total = crate::quadrature::trapezoid(&e, g.step);
    if total <= 0.0 {
        return Ok(0.0);
    }
    let part = integrate_linear(&e, g, window.start(), window.end());
    Ok((part / total).clamp(0.0, 1.0))
}

fn integrate_linear(samples: &[f64], g: &TimeGrid, a: f64, b: f64) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let pos = |t: f64| ((t - g.start) / g.step).clamp(0.0, (samples.len() - 1) as f64);
    let (xa, xb) = (pos(a), pos(b));
    let value = |x: f64| {
        let k = (x.floor() as usize).min(samples.len() - 2);
        let f = x - k as f64;
        (1.0 - f) * samples[k] + f * samples[k + 1]
    };
    let (ka, kb) = (xa.ceil() as usize, xb.floor() as usize);
    if ka > kb {
        return 0.5 * (value(xa) + value(xb)) * (xb - xa) * g.step;
    }
    let mut acc = 0.5 * (value(xa) + samples[ka]) * (ka as f64 - xa);
    for k in ka..kb {
        acc += 0.5 * (samples[k] + samples[k + 1]);
    }
    acc += 0.5 * (samples[kb] + value(xb)) * (xb - kb as f64);
    acc * g.step
}

/// One row of a gain curve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GainPoint {
    pub freq_hz: f64,
    pub g_real: f64,
    /// Gain without port mismatch.
    pub gain: f64,
}

/// CSV `freq_hz,g_real`.
pub fn write_gain_csv(points: &[GainPoint], mut w: impl Write) -> Result<()> {
    writeln!(w, "freq_hz,g_real")?;
    for p in points {
        writeln!(w, "{},{}", p.freq_hz, p.g_real)?;
    }
    Ok(())
}
