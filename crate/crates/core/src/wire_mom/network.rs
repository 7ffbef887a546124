//! Terminal responses, load reduction and transfer datasets.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{LoadImpedance, Mesh, WireModel, CONDITION_LIMIT};
use crate::error::{Error, Result};
use crate::transfer_data::{DofKind, TransferDataset};
use crate::waveform::{GainPoint, Z0};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolarizationComponent {
    Theta,
    Phi,
}

/// One far-field output: a direction and a polarisation component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub theta: f64,
    pub phi: f64,
    pub component: PolarizationComponent,
}

impl Observation {
    pub fn theta(theta: f64, phi: f64) -> Self {
        Observation {
            theta,
            phi,
            component: PolarizationComponent::Theta,
        }
    }

    pub fn phi(theta: f64, phi: f64) -> Self {
        Observation {
            theta,
            phi,
            component: PolarizationComponent::Phi,
        }
    }

    pub fn label(&self) -> String {
        let c = match self.component {
            PolarizationComponent::Theta => "F_theta",
            PolarizationComponent::Phi => "F_phi",
        };
        format!("{c}(theta={},phi={})", self.theta, self.phi)
    }
}

/// Unloaded responses at the model's terminals (feeds first, then load
/// positions) for every frequency: `Y_t = TᵀZ⁻¹T` and far-field rows
/// `E_t = F Z⁻¹ T`.
#[derive(Debug, Clone)]
pub struct TerminalSweep {
    pub freqs_hz: Vec<f64>,
    pub n_feeds: usize,
    pub n_loads: usize,
    pub observations: Vec<Observation>,
    y_t: Vec<DMatrix<Complex64>>,
    e_t: Vec<DMatrix<Complex64>>,
    /// Sample indices recomputed at a perturbed frequency.
    pub perturbed: Vec<usize>,
    /// Sample indices still ill-conditioned after the retry.
    pub flagged: Vec<usize>,
}

fn check_grid(freqs_hz: &[f64]) -> Result<()> {
    if freqs_hz.is_empty() {
        return Err(Error::Validation("frequency grid is empty".into()));
    }
    if freqs_hz.iter().any(|f| !f.is_finite() || *f < 0.0) {
        return Err(Error::Validation("frequencies must be finite and non-negative".into()));
    }
    if freqs_hz.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation("frequencies must be strictly ascending".into()));
    }
    Ok(())
}

/// Hager's estimate of `‖Z⁻¹‖₁` using a symmetric `Z` (so `Zᴴ = conj Z`).
fn inverse_norm_estimate(lu: &nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>, n: usize) -> f64 {
    let mut x = nalgebra::DVector::from_element(n, Complex64::new(1.0 / n as f64, 0.0));
    let mut est = 0.0;
    for _ in 0..5 {
        let Some(y) = lu.solve(&x) else { return f64::INFINITY };
        est = y.iter().map(|v| v.norm()).sum::<f64>();
        let xi = y.map(|v| if v.norm() > 0.0 { v / v.norm() } else { Complex64::new(1.0, 0.0) });
        let Some(z) = lu.solve(&xi.map(|v| v.conj())) else { return f64::INFINITY };
        let z = z.map(|v| v.conj());
        let (j, zmax) = z
            .iter()
            .enumerate()
            .fold((0, 0.0), |b, (i, v)| if v.norm() > b.1 { (i, v.norm()) } else { b });
        let zx: f64 = z.iter().zip(x.iter()).map(|(a, b)| (a.conj() * b).re).sum();
        if zmax <= zx {
            break;
        }
        x.fill(Complex64::new(0.0, 0.0));
        x[j] = Complex64::new(1.0, 0.0);
    }
    est
}

fn one_norm(z: &DMatrix<Complex64>) -> f64 {
    z.column_iter()
        .map(|c| c.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

struct Sample {
    y: DMatrix<Complex64>,
    e: DMatrix<Complex64>,
    perturbed: bool,
    flagged: bool,
}

fn terminal_sample(mesh: &Mesh, terminals: &[usize], observations: &[Observation], omega: f64) -> Result<Sample> {
    let t = terminals.len();
    if omega == 0.0 {
        return Ok(Sample {
            y: DMatrix::zeros(t, t),
            e: DMatrix::zeros(observations.len(), t),
            perturbed: false,
            flagged: false,
        });
    }
    let mut w = omega;
    let mut perturbed = false;
    let (lu, flagged) = loop {
        let z = mesh.impedance(w);
        let norm = one_norm(&z);
        let lu = z.lu();
        let cond = norm * inverse_norm_estimate(&lu, mesh.n_basis());
        if cond <= CONDITION_LIMIT {
            break (lu, false);
        }
        if perturbed {
            break (lu, true);
        }
        perturbed = true;
        w = omega * (1.0 + 1e-9);
    };
    let mut rhs = DMatrix::zeros(mesh.n_basis(), t);
    for (j, &i) in terminals.iter().enumerate() {
        rhs[(i, j)] = Complex64::new(1.0, 0.0);
    }
    let x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical(format!("singular impedance matrix at {omega:.6e} rad/s")))?;
    let y = DMatrix::from_fn(t, t, |a, b| x[(terminals[a], b)]);
    let mut e = DMatrix::zeros(observations.len(), t);
    let mut cache: Option<((f64, f64), DMatrix<Complex64>)> = None;
    for (o, obs) in observations.iter().enumerate() {
        let key = (obs.theta, obs.phi);
        let rows = match &cache {
            Some((k, rows)) if *k == key => rows.clone(),
            _ => {
                let rows = mesh.far_field(w, obs.theta, obs.phi) * &x;
                cache = Some((key, rows.clone()));
                rows
            }
        };
        let r = match obs.component {
            PolarizationComponent::Theta => 0,
            PolarizationComponent::Phi => 1,
        };
        e.row_mut(o).copy_from(&rows.row(r));
    }
    Ok(Sample {
        y,
        e,
        perturbed,
        flagged,
    })
}

impl TerminalSweep {
    pub fn compute(model: &WireModel, freqs_hz: &[f64], observations: &[Observation]) -> Result<Self> {
        check_grid(freqs_hz)?;
        let f_max = freqs_hz[freqs_hz.len() - 1];
        if f_max > 0.0 {
            model.validate(2.0 * PI * f_max)?;
        }
        let mesh = model.mesh()?;
        let terminals: Vec<usize> = model
            .feeds
            .iter()
            .chain(model.loads.iter().map(|l| &l.at))
            .map(|t| mesh.terminal_index(*t))
            .collect();
        let samples: Vec<Result<Sample>> = freqs_hz
            .par_iter()
            .map(|f| terminal_sample(&mesh, &terminals, observations, 2.0 * PI * f))
            .collect();
        let mut sweep = TerminalSweep {
            freqs_hz: freqs_hz.to_vec(),
            n_feeds: model.feeds.len(),
            n_loads: model.loads.len(),
            observations: observations.to_vec(),
            y_t: Vec::with_capacity(freqs_hz.len()),
            e_t: Vec::with_capacity(freqs_hz.len()),
            perturbed: Vec::new(),
            flagged: Vec::new(),
        };
        for (k, s) in samples.into_iter().enumerate() {
            let s = s?;
            if s.perturbed {
                sweep.perturbed.push(k);
            }
            if s.flagged {
                sweep.flagged.push(k);
            }
            sweep.y_t.push(s.y);
            sweep.e_t.push(s.e);
        }
        Ok(sweep)
    }

    /// Terminates the load terminals in `loads` (one per model load) and
    /// returns the port-level response.
    pub fn reduce(&self, loads: &[LoadImpedance]) -> Result<PortSweep> {
        if loads.len() != self.n_loads {
            return Err(Error::Dimension {
                context: "load impedances",
                expected: self.n_loads,
                actual: loads.len(),
            });
        }
        let (p, l) = (self.n_feeds, self.n_loads);
        let mut y_p = Vec::with_capacity(self.freqs_hz.len());
        let mut h_v = Vec::with_capacity(self.freqs_hz.len());
        for (k, f) in self.freqs_hz.iter().enumerate() {
            let omega = 2.0 * PI * f;
            let (y, e) = (&self.y_t[k], &self.e_t[k]);
            let y_dd = y.view((0, 0), (p, p)).into_owned();
            let e_d = e.columns(0, p).into_owned();
            if l == 0 || omega == 0.0 {
                y_p.push(y_dd);
                h_v.push(e_d);
                continue;
            }
            let zl = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                l,
                loads.iter().map(|z| z.at(omega)),
            ));
            let y_ll = y.view((p, p), (l, l)).into_owned();
            let y_ld = y.view((p, 0), (l, p)).into_owned();
            let y_dl = y.view((0, p), (p, l)).into_owned();
            let e_l = e.columns(p, l).into_owned();
            let m = DMatrix::identity(l, l) + &y_ll * &zl;
            let kmat = m
                .lu()
                .solve(&y_ld)
                .ok_or_else(|| Error::Numerical(format!("load network singular at {f:.6e} Hz")))?;
            let zk = &zl * &kmat;
            y_p.push(y_dd - y_dl * &zk);
            h_v.push(e_d - e_l * &zk);
        }
        Ok(PortSweep {
            freqs_hz: self.freqs_hz.clone(),
            ports: p,
            observations: self.observations.clone(),
            y_p,
            h_v,
            flagged: self.flagged.clone(),
        })
    }
}

/// Port admittance `Y_p(ω)` and voltage-to-field transfer `H_v(ω)` for every
/// sample of a loaded model.
#[derive(Debug, Clone)]
pub struct PortSweep {
    pub freqs_hz: Vec<f64>,
    pub ports: usize,
    pub observations: Vec<Observation>,
    pub y_p: Vec<DMatrix<Complex64>>,
    pub h_v: Vec<DMatrix<Complex64>>,
    pub flagged: Vec<usize>,
}

impl PortSweep {
    pub fn compute(model: &WireModel, freqs_hz: &[f64], observations: &[Observation]) -> Result<Self> {
        let loads: Vec<LoadImpedance> = model.loads.iter().map(|l| l.impedance).collect();
        TerminalSweep::compute(model, freqs_hz, observations)?.reduce(&loads)
    }

    /// Port impedance `Z_p = Y_p⁻¹` (`None` at DC or when singular).
    pub fn impedance(&self, k: usize) -> Option<DMatrix<Complex64>> {
        if self.freqs_hz[k] == 0.0 {
            return None;
        }
        self.y_p[k].clone().try_inverse()
    }

    /// Incident-wave transfer `H_a = H_v · 2√Z_c (I + Z_c Y_p)⁻¹`.
    pub fn incident_transfer(&self, k: usize, z_char: f64) -> Result<DMatrix<Complex64>> {
        let p = self.ports;
        let m = DMatrix::identity(p, p) + &self.y_p[k] * Complex64::new(z_char, 0.0);
        let inv = m
            .try_inverse()
            .ok_or_else(|| Error::Numerical("port termination singular".into()))?;
        Ok(&self.h_v[k] * inv * Complex64::new(2.0 * z_char.sqrt(), 0.0))
    }

    pub fn dataset(&self, dof: DofKind, z_char: f64) -> Result<TransferDataset> {
        let outputs = self.observations.len();
        let mut samples = Vec::with_capacity(self.freqs_hz.len() * outputs * self.ports);
        for k in 0..self.freqs_hz.len() {
            let h = match dof {
                DofKind::PortVoltage => self.h_v[k].clone(),
                DofKind::IncidentWave => self.incident_transfer(k, z_char)?,
                DofKind::PlaneWaveField => {
                    return Err(Error::Validation(
                        "wire models are driven through ports, not by plane waves".into(),
                    ))
                }
            };
            for c in 0..outputs {
                for p in 0..self.ports {
                    samples.push(h[(c, p)]);
                }
            }
        }
        let mut d = TransferDataset::new(self.freqs_hz.clone(), outputs, self.ports, samples, dof)?;
        d.z_char = z_char;
        let labels: Vec<String> = self.observations.iter().map(Observation::label).collect();
        d.metadata.insert("generator".into(), "wire-mom".into());
        d.metadata.insert("outputs".into(), serde_json::json!(labels));
        if !self.flagged.is_empty() {
            d.metadata.insert("ill_conditioned_samples".into(), serde_json::json!(self.flagged));
        }
        Ok(d)
    }

    /// Port admittance as a square dataset (outputs = ports), in siemens.
    pub fn admittance_dataset(&self) -> Result<TransferDataset> {
        let p = self.ports;
        let samples = self.y_p.iter().flat_map(|y| (0..p * p).map(move |i| y[(i / p, i % p)])).collect();
        let mut d = TransferDataset::new(self.freqs_hz.clone(), p, p, samples, DofKind::PortVoltage)?;
        d.metadata.insert("quantity".into(), "port admittance (S)".into());
        Ok(d)
    }
}

/// Samples `model` on `freqs_hz` and returns the far-field transfer matrix for
/// the requested degrees of freedom.
pub fn transfer_dataset(
    model: &WireModel,
    freqs_hz: &[f64],
    dof: DofKind,
    observations: &[Observation],
    z_char: f64,
) -> Result<TransferDataset> {
    if model.feeds.is_empty() {
        return Err(Error::Validation("wire model has no feeds".into()));
    }
    PortSweep::compute(model, freqs_hz, observations)?.dataset(dof, z_char)
}

/// Time-averaged radiated power (W) for current coefficients `currents`
/// (peak phasors), from the far field on a 32 × 64 angular grid.
pub fn radiated_power(model: &WireModel, omega: f64, currents: &[Complex64]) -> Result<f64> {
    let mesh = model.mesh()?;
    if currents.len() != mesh.n_basis() {
        return Err(Error::Dimension {
            context: "current coefficients",
            expected: mesh.n_basis(),
            actual: currents.len(),
        });
    }
    let i = nalgebra::DVector::from_column_slice(currents);
    let (x, w) = crate::quadrature::gauss_legendre(32);
    let n_phi = 64;
    let mut total = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        let theta = 0.5 * PI * (1.0 + xi);
        for j in 0..n_phi {
            let phi = 2.0 * PI * j as f64 / n_phi as f64;
            let f = mesh.far_field(omega, theta, phi) * &i;
            let s = f.iter().map(|v| v.norm_sqr()).sum::<f64>() / (2.0 * Z0);
            total += s * theta.sin() * 0.5 * PI * wi * 2.0 * PI / n_phi as f64;
        }
    }
    Ok(total)
}

/// Realized gain `G_real = 4π|H_a|²/Z₀` and mismatch-free gain
/// `G = 4π|H_v|²/(Z₀ Re Y)` of a single-port model in direction `(θ, φ)`.
pub fn realized_gain_curve(
    model: &WireModel,
    freqs_hz: &[f64],
    theta: f64,
    phi: f64,
    z_char: f64,
) -> Result<Vec<GainPoint>> {
    if model.feeds.len() != 1 {
        return Err(Error::Validation("gain curves need exactly one feed".into()));
    }
    let obs = [Observation::theta(theta, phi), Observation::phi(theta, phi)];
    let sweep = PortSweep::compute(model, freqs_hz, &obs)?;
    (0..freqs_hz.len())
        .map(|k| {
            if freqs_hz[k] == 0.0 {
                return Ok(GainPoint {
                    freq_hz: 0.0,
                    g_real: 0.0,
                    gain: 0.0,
                });
            }
            let ha = sweep.incident_transfer(k, z_char)?;
            let hv = &sweep.h_v[k];
            let g_real = 4.0 * PI * ha.iter().map(|v| v.norm_sqr()).sum::<f64>() / Z0;
            let g_in = sweep.y_p[k][(0, 0)].re;
            let gain = if g_in > 0.0 {
                4.0 * PI * hv.iter().map(|v| v.norm_sqr()).sum::<f64>() / (Z0 * g_in)
            } else {
                0.0
            };
            Ok(GainPoint {
                freq_hz: freqs_hz[k],
                g_real,
                gain,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire_mom::{assemble_impedance, port_matrix, Load, Terminal};

    fn dipole(segments: usize) -> WireModel {
        WireModel::dipole(0.15, 0.00075, segments, [0.0; 3]).unwrap()
    }

    fn input_impedance(m: &WireModel, f: f64) -> Complex64 {
        let s = PortSweep::compute(m, &[f], &[]).unwrap();
        s.impedance(0).unwrap()[(0, 0)]
    }

    #[test]
    fn half_wave_resonance() {
        let m = dipole(40);
        let freqs: Vec<f64> = (0..=40).map(|i| 0.8e9 + 0.005e9 * i as f64).collect();
        let s = PortSweep::compute(&m, &freqs, &[]).unwrap();
        let x: Vec<f64> = (0..freqs.len()).map(|k| s.impedance(k).unwrap()[(0, 0)].im).collect();
        let k = x.windows(2).position(|w| w[0] < 0.0 && w[1] >= 0.0).expect("no zero crossing");
        let f_res = freqs[k] + (freqs[k + 1] - freqs[k]) * (-x[k] / (x[k + 1] - x[k]));
        assert!((0.88e9..0.98e9).contains(&f_res), "{f_res}");
        let r = input_impedance(&m, f_res).re;
        assert!((60.0..85.0).contains(&r), "{r}");
    }

    #[test]
    fn short_dipole_pattern_and_polarisation() {
        let m = dipole(20);
        let f = 0.2e9;
        let obs: Vec<Observation> = [0.3, 0.7, 1.1, PI / 2.0]
            .iter()
            .map(|&t| Observation::theta(t, 0.4))
            .chain([Observation::phi(PI / 2.0, 0.4)])
            .collect();
        let s = PortSweep::compute(&m, &[f], &obs).unwrap();
        let h = &s.h_v[0];
        let broad = h[(3, 0)].norm();
        for (i, t) in [0.3f64, 0.7, 1.1].iter().enumerate() {
            let ratio = h[(i, 0)].norm() / broad;
            assert!((ratio - t.sin()).abs() < 0.02 * t.sin(), "{ratio} vs {}", t.sin());
        }
        assert!(h[(4, 0)].norm() < 1e-9 * broad);
    }

    #[test]
    fn radiated_power_matches_delivered_power() {
        let m = dipole(40);
        for f in [0.6e9, 0.93e9, 2.5e9] {
            let w = 2.0 * PI * f;
            let z = assemble_impedance(&m, w).unwrap();
            let v = port_matrix(&m);
            let i = z.lu().solve(&v).unwrap();
            let delivered = 0.5 * (v.adjoint() * &i)[(0, 0)].re;
            let radiated = radiated_power(&m, w, i.as_slice()).unwrap();
            let err = (radiated - delivered).abs() / delivered;
            assert!(err < 0.02, "{f}: {radiated} vs {delivered}");
        }
    }

    #[test]
    fn reduction_matches_loaded_assembly() {
        let mut m = dipole(20);
        let mut parasite = m.elements[0].clone();
        parasite.start[0] = -0.04;
        parasite.end[0] = -0.04;
        m.elements.push(parasite);
        m.loads.push(Load {
            at: Terminal { element: 1, node: 10 },
            impedance: LoadImpedance::Fixed { re: 0.0, im: 35.0 },
        });
        let f = 1.1e9;
        let w = 2.0 * PI * f;
        let obs = [Observation::theta(PI / 2.0, 0.0)];
        let s = PortSweep::compute(&m, &[f], &obs).unwrap();
        let z = assemble_impedance(&m, w).unwrap();
        let i = z.lu().solve(&port_matrix(&m)).unwrap();
        let feed = i[(9, 0)];
        assert!((s.y_p[0][(0, 0)] - feed).norm() < 1e-9 * feed.norm());
        let e = (m.mesh().unwrap().far_field(w, PI / 2.0, 0.0) * &i)[(0, 0)];
        assert!((s.h_v[0][(0, 0)] - e).norm() < 1e-9 * e.norm());
    }

    #[test]
    fn shorted_parasite_is_a_one_port_dataset() {
        let mut m = dipole(20);
        let mut parasite = m.elements[0].clone();
        parasite.start[0] = -0.05;
        parasite.end[0] = -0.05;
        m.elements.push(parasite);
        m.loads.push(Load {
            at: Terminal { element: 1, node: 10 },
            impedance: LoadImpedance::Short,
        });
        let obs = [Observation::theta(PI / 2.0, 0.0), Observation::theta(PI / 2.0, PI)];
        let d = transfer_dataset(&m, &[0.0, 0.9e9, 1.0e9], DofKind::IncidentWave, &obs, 50.0).unwrap();
        assert_eq!(d.n_ports(), 1);
        assert_eq!(d.n_outputs(), 2);
        assert_eq!(d.sample(0, 0, 0), Complex64::new(0.0, 0.0));
        // a parasite behind the driven element pushes radiation away from it
        assert!(d.sample(1, 0, 0).norm() != d.sample(1, 1, 0).norm());
    }

    #[test]
    fn admittance_is_reciprocal() {
        let mut m = dipole(20);
        let mut second = m.elements[0].clone();
        second.start[0] = 0.06;
        second.end[0] = 0.06;
        m.elements.push(second);
        m.feeds.push(Terminal { element: 1, node: 10 });
        let s = PortSweep::compute(&m, &[0.95e9], &[]).unwrap();
        let y = &s.y_p[0];
        assert!((y[(0, 1)] - y[(1, 0)]).norm() < 1e-8 * y[(0, 1)].norm());
    }
}
