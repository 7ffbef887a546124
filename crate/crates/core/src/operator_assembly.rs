//! Galerkin projection of field and energy functionals onto a [`BasisSet`].
//!
//! All matrices act on real coefficient vectors `q` (see
//! [`spectral_basis`](crate::spectral_basis)). Because every basis function
//! and every transfer function is Hermitian in `ω`, the negative half of the
//! band folds onto the positive half and all projected matrices are real.
//! Integration runs on the positive band only with composite order-8
//! Gauss–Legendre panels; each matrix is rebuilt with halved panels until
//! entries stop moving by more than [`CONVERGENCE_TOL`] of the largest entry.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{CompositeRule, PANEL_ORDER};
use crate::spectral_basis::{sinc, BasisSet, TIME_SCALE};
use crate::transfer_data::InterpolatedTransfer;

/// Relative entry change between successive panel halvings.
pub const CONVERGENCE_TOL: f64 = 1e-8;
/// Panel halvings attempted before giving up.
pub const MAX_HALVINGS: u32 = 4;
/// Below this `|ω₁ − ω₂|·T` the window kernel uses its Taylor series.
pub const KERNEL_SERIES_THRESHOLD: f64 = 1e-6;
/// Negative Hermitian-part eigenvalues tolerated (relative to `max |Y|`).
pub const PASSIVITY_TOL: f64 = 1e-9;

/// Time interval `[center − half_width, center + half_width]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeWindow {
    pub center: f64,
    pub half_width: f64,
}

impl TimeWindow {
    pub fn new(center: f64, half_width: f64) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Domain(format!("window half-width must be positive, got {half_width}")));
        }
        if !center.is_finite() {
            return Err(Error::Domain("window center must be finite".into()));
        }
        Ok(TimeWindow { center, half_width })
    }

    /// Window `[start, end]`.
    pub fn from_bounds(start: f64, end: f64) -> Result<Self> {
        Self::new(0.5 * (start + end), 0.5 * (end - start))
    }

    pub fn start(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn end(&self) -> f64 {
        self.center + self.half_width
    }

    /// Largest `|t|` inside the window.
    pub fn reach(&self) -> f64 {
        self.start().abs().max(self.end().abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyKind {
    IncidentTotal,
    IncidentWindowed,
    DeliveredTotal,
    DeliveredWindowed,
    SquaredFieldTotal,
    SquaredFieldWindowed,
    Dissipated,
}

/// Symmetric quadratic form `qᵀ M q` (J for unit-normalised data).
#[derive(Debug, Clone)]
pub struct EnergyMatrix {
    pub kind: EnergyKind,
    pub entries: DMatrix<f64>,
    pub window: Option<TimeWindow>,
    /// Delay recorded from the transfer dataset (s).
    pub t_delay: f64,
}

impl EnergyMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn quadratic_form(&self, q: &[f64]) -> f64 {
        quad(&self.entries, q)
    }

    /// Relabels the form, e.g. a squared-field form built from a transfer
    /// matrix onto delivered port waves.
    pub fn with_kind(mut self, kind: EnergyKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": self.kind,
            "dims": [self.entries.nrows(), self.entries.ncols()],
            "window": self.window,
            "t_delay_s": self.t_delay,
            "entries": complex_entries(&self.entries),
        })
    }
}

/// Linear map from coefficients to output samples at one instant.
#[derive(Debug, Clone)]
pub struct FieldMatrix {
    /// `C × P·2N`.
    pub entries: DMatrix<f64>,
    pub t0: f64,
    pub tag: String,
    pub t_delay: f64,
}

impl FieldMatrix {
    pub fn apply(&self, q: &[f64]) -> Vec<f64> {
        (0..self.entries.nrows())
            .map(|c| self.entries.row(c).iter().zip(q).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `FᵀF`, the squared-field objective at `t0`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.entries.transpose() * &self.entries
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": "field",
            "tag": self.tag,
            "t0_s": self.t0,
            "t_delay_s": self.t_delay,
            "dims": [self.entries.nrows(), self.entries.ncols()],
            "entries": complex_entries(&self.entries),
        })
    }
}

fn complex_entries(m: &DMatrix<f64>) -> Vec<Vec<[f64; 2]>> {
    m.row_iter().map(|r| r.iter().map(|&x| [x, 0.0]).collect()).collect()
}

pub(crate) fn quad(m: &DMatrix<f64>, q: &[f64]) -> f64 {
    let n = q.len();
    let mut acc = 0.0;
    for j in 0..n {
        if q[j] == 0.0 {
            continue;
        }
        let col = m.column(j);
        let mut s = 0.0;
        for i in 0..n {
            s += col[i] * q[i];
        }
        acc += s * q[j];
    }
    acc
}

fn check_band(h: &InterpolatedTransfer, basis: &BasisSet) -> Result<()> {
    let (hb, bb) = (h.band(), basis.band());
    let slack = 1e-12 * bb.omega_max();
    if bb.omega_min() < hb.omega_min() - slack || bb.omega_max() > hb.omega_max() + slack {
        return Err(Error::Range(
            "basis band must lie inside the interpolation band".into(),
        ));
    }
    Ok(())
}

/// Frequency rule honouring data knots and resolving `e^{jωt}` for
/// `|t| ≤ reach`.
pub(crate) fn frequency_rule(
    basis: &BasisSet,
    h: Option<&InterpolatedTransfer>,
    reach: f64,
    halvings: u32,
) -> CompositeRule {
    let limit = if reach > 0.0 { PI / (4.0 * reach) } else { f64::INFINITY };
    let knots = h.map(|h| h.knots()).unwrap_or(&[]);
    basis.band_rule(knots, limit, halvings)
}

/// Time rule on a window: panels short enough that `|y(t)|²` (bandwidth
/// `2ω_max`) turns by at most half a period per panel.
fn time_rule(basis: &BasisSet, window: &TimeWindow, halvings: u32) -> CompositeRule {
    let width = PI / (2.0 * basis.band().omega_max()) / f64::from(1u32 << halvings);
    CompositeRule::uniform(window.start(), window.end(), width, PANEL_ORDER)
}

/// Repeats `build` with more panels until successive results agree.
fn converge(
    kind: &'static str,
    mut build: impl FnMut(u32) -> Result<DMatrix<f64>>,
) -> Result<DMatrix<f64>> {
    let mut prev = build(0)?;
    let mut change = f64::INFINITY;
    for h in 1..=MAX_HALVINGS {
        let next = build(h)?;
        let scale = next.amax();
        let diff = (&next - &prev).amax();
        change = if scale > 0.0 { diff / scale } else { diff };
        if change < CONVERGENCE_TOL {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Assembly {
        kind,
        halvings: MAX_HALVINGS as usize,
        change,
    })
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `H` sampled at the rule nodes, flat `[node][output][port]`.
fn sample_transfer(h: &InterpolatedTransfer, nodes: &[f64]) -> Vec<Complex64> {
    let per = h.n_outputs() * h.n_ports();
    let mut out = vec![Complex64::new(0.0, 0.0); nodes.len() * per];
    for (i, &w) in nodes.iter().enumerate() {
        h.eval_into(w, &mut out[i * per..(i + 1) * per]);
    }
    out
}

/// Form `2∫₊ Re[φ_aᴴ K(ω) φ_b] dω` for a Hermitian port kernel `K`
/// (`P × P`, flat row-major per node).
fn port_kernel_form(basis: &BasisSet, rule: &CompositeRule, ports: usize, kernel: &[Complex64]) -> DMatrix<f64> {
    let n = basis.n_per_family();
    let s = basis.shape_matrix(&rule.nodes);
    let dim = basis.coefficient_len(ports);
    let mut m = DMatrix::zeros(dim, dim);
    let mut sw = s.clone();
    for p in 0..ports {
        for pp in p..ports {
            let pair = p * ports + pp;
            for which in 0..2 {
                let mut any = false;
                for (i, (mut row, w)) in sw.row_iter_mut().zip(&rule.weights).enumerate() {
                    let k = kernel[i * ports * ports + pair];
                    let v = 2.0 * w * if which == 0 { k.re } else { k.im };
                    any |= v != 0.0;
                    row.copy_from(&(s.row(i) * v));
                }
                if !any {
                    continue;
                }
                let a = s.transpose() * &sw;
                let (r0, c0) = (p * 2 * n, pp * 2 * n);
                if which == 0 {
                    m.view_mut((r0, c0), (n, n)).copy_from(&a);
                    m.view_mut((r0 + n, c0 + n), (n, n)).copy_from(&a);
                } else {
                    m.view_mut((r0, c0 + n), (n, n)).copy_from(&(-&a));
                    m.view_mut((r0 + n, c0), (n, n)).copy_from(&a);
                }
            }
            if pp != p {
                let (r0, c0) = (p * 2 * n, pp * 2 * n);
                let block = m.view((r0, c0), (2 * n, 2 * n)).transpose();
                m.view_mut((c0, r0), (2 * n, 2 * n)).copy_from(&block);
            }
        }
    }
    m
}

/// Field matrix `F(t0)` with `F q = y(t0)` for every output component.
pub fn field_matrix(h: &InterpolatedTransfer, basis: &BasisSet, t0: f64) -> Result<FieldMatrix> {
    check_band(h, basis)?;
    if !t0.is_finite() {
        return Err(Error::Domain("t0 must be finite".into()));
    }
    let entries = converge("field matrix", |halvings| {
        let rule = frequency_rule(basis, Some(h), t0.abs(), halvings);
        let g = field_rows(h, basis, &rule, &[t0]);
        Ok(g.into_iter().next().expect("one time"))
    })?;
    Ok(FieldMatrix {
        entries,
        t0,
        tag: h
            .source()
            .metadata
            .get("direction")
            .and_then(|v| v.as_str())
            .unwrap_or("")
            .to_owned(),
        t_delay: h.source().t_delay,
    })
}

/// Rows `F(t_k)` for every time in `times`: one `C × P·2N` matrix per time.
fn field_rows(h: &InterpolatedTransfer, basis: &BasisSet, rule: &CompositeRule, times: &[f64]) -> Vec<DMatrix<f64>> {
    let blocks = field_time_blocks(h, basis, rule, times);
    (0..times.len())
        .map(|k| {
            DMatrix::from_fn(h.n_outputs(), blocks[0].ncols(), |c, j| blocks[c][(k, j)])
        })
        .collect()
}

/// For each output `c`, the `times × P·2N` matrix `G_c[k, :] = F_c(t_k)`.
fn field_time_blocks(
    h: &InterpolatedTransfer,
    basis: &BasisSet,
    rule: &CompositeRule,
    times: &[f64],
) -> Vec<DMatrix<f64>> {
    let n = basis.n_per_family();
    let (outputs, ports) = (h.n_outputs(), h.n_ports());
    let nodes = &rule.nodes;
    let hs = sample_transfer(h, nodes);
    let s = basis.shape_matrix(nodes);
    let cos = DMatrix::from_fn(times.len(), nodes.len(), |k, i| (nodes[i] * times[k]).cos());
    let sin = DMatrix::from_fn(times.len(), nodes.len(), |k, i| (nodes[i] * times[k]).sin());
    let scale = 2.0 * TIME_SCALE;
    (0..outputs)
        .map(|c| {
            // weighted Re/Im of H·s, nodes × P·N
            let hr = DMatrix::from_fn(nodes.len(), ports * n, |i, j| {
                let (p, m) = (j / n, j % n);
                rule.weights[i] * hs[(i * outputs + c) * ports + p].re * s[(i, m)]
            });
            let hi = DMatrix::from_fn(nodes.len(), ports * n, |i, j| {
                let (p, m) = (j / n, j % n);
                rule.weights[i] * hs[(i * outputs + c) * ports + p].im * s[(i, m)]
            });
            // Re ∫ H s e^{jωt} and Im ∫ H s e^{jωt}
            let re = (&cos * &hr - &sin * &hi) * scale;
            let im = (&cos * &hi + &sin * &hr) * scale;
            let mut g = DMatrix::zeros(times.len(), basis.coefficient_len(ports));
            for p in 0..ports {
                let src = p * n;
                let dst = p * 2 * n;
                g.view_mut((0, dst), (times.len(), n))
                    .copy_from(&re.view((0, src), (times.len(), n)));
                g.view_mut((0, dst + n), (times.len(), n))
                    .copy_from(&(-im.view((0, src), (times.len(), n))));
            }
            g
        })
        .collect()
}

/// Time nodes handled per block when factorising windowed forms.
const TIME_BLOCK: usize = 512;

/// Windowed energy `qᵀ W_T q = ∫_window Σ_c |y_c(t)|² dt`, or of the
/// excitation itself when `h` is `None`.
pub fn windowed_energy_matrix(
    h: Option<&InterpolatedTransfer>,
    basis: &BasisSet,
    ports: usize,
    window: TimeWindow,
) -> Result<EnergyMatrix> {
    TimeWindow::new(window.center, window.half_width)?;
    let entries = match h {
        None => converge("incident windowed energy", |halvings| {
            Ok(incident_windowed(basis, ports, &time_rule(basis, &window, halvings)))
        })?,
        Some(h) => {
            check_band(h, basis)?;
            check_ports(h, ports)?;
            converge("windowed energy", |halvings| {
                let frule = frequency_rule(basis, Some(h), window.reach(), halvings);
                let trule = time_rule(basis, &window, halvings);
                let dim = basis.coefficient_len(ports);
                let mut m = DMatrix::zeros(dim, dim);
                for (times, weights) in trule.nodes.chunks(TIME_BLOCK).zip(trule.weights.chunks(TIME_BLOCK)) {
                    for mut g in field_time_blocks(h, basis, &frule, times) {
                        let gw = {
                            let mut gw = g.clone();
                            for (mut row, w) in gw.row_iter_mut().zip(weights) {
                                row *= *w;
                            }
                            gw
                        };
                        m += g.tr_mul(&gw);
                        g.fill(0.0);
                    }
                }
                symmetrize(&mut m);
                Ok(m)
            })?
        }
    };
    Ok(EnergyMatrix {
        kind: if h.is_some() {
            EnergyKind::SquaredFieldWindowed
        } else {
            EnergyKind::IncidentWindowed
        },
        entries,
        window: Some(window),
        t_delay: h.map_or(0.0, |h| h.source().t_delay),
    })
}

fn incident_windowed(basis: &BasisSet, ports: usize, rule: &CompositeRule) -> DMatrix<f64> {
    let n2 = basis.per_port();
    let g = DMatrix::from_fn(rule.len(), n2, |k, j| {
        let (_, id) = basis.id_at(j);
        basis.time_image_unchecked(id, rule.nodes[k])
    });
    let mut gw = g.clone();
    for (mut row, w) in gw.row_iter_mut().zip(&rule.weights) {
        row *= *w;
    }
    let mut block = g.tr_mul(&gw);
    symmetrize(&mut block);
    let mut m = DMatrix::zeros(n2 * ports, n2 * ports);
    for p in 0..ports {
        m.view_mut((p * n2, p * n2), (n2, n2)).copy_from(&block);
    }
    m
}

fn check_ports(h: &InterpolatedTransfer, ports: usize) -> Result<()> {
    if h.n_ports() != ports {
        return Err(Error::Dimension {
            context: "transfer ports",
            expected: ports,
            actual: h.n_ports(),
        });
    }
    Ok(())
}

/// Windowed energy by the double frequency integral with the
/// `2 sin((ω₁−ω₂)T)/(ω₁−ω₂)` kernel. Cost grows with the square of the node
/// count; intended for small bases and cross-checks.
pub fn windowed_energy_matrix_direct(
    h: Option<&InterpolatedTransfer>,
    basis: &BasisSet,
    ports: usize,
    window: TimeWindow,
    halvings: u32,
) -> Result<EnergyMatrix> {
    TimeWindow::new(window.center, window.half_width)?;
    if let Some(h) = h {
        check_band(h, basis)?;
        check_ports(h, ports)?;
    }
    let rule = frequency_rule(basis, h, window.reach(), halvings);
    let n = basis.n_per_family();
    let dim = basis.coefficient_len(ports);
    let outputs = h.map_or(ports, |h| h.n_outputs());
    // Full-band nodes: positive half then mirrored negative half.
    let mut omegas = rule.nodes.clone();
    omegas.extend(rule.nodes.iter().map(|w| -w));
    let mut weights = rule.weights.clone();
    weights.extend_from_slice(&rule.weights);
    let nodes = omegas.len();
    let kernel = DMatrix::from_fn(nodes, nodes, |j, i| {
        let x = omegas[i] - omegas[j];
        let k = window_kernel(x, window.half_width);
        Complex64::from_polar(k * weights[i] * weights[j], x * window.center)
    });
    let mut m = DMatrix::zeros(dim, dim);
    let mut buf = vec![Complex64::new(0.0, 0.0); outputs * ports];
    for c in 0..outputs {
        let mut y = DMatrix::<Complex64>::zeros(nodes, dim);
        for (i, &w) in omegas.iter().enumerate() {
            match h {
                Some(h) => h.eval_into(w, &mut buf),
                None => {
                    buf.fill(Complex64::new(0.0, 0.0));
                    buf[c * ports + c] = Complex64::new(1.0, 0.0);
                }
            }
            for p in 0..ports {
                let hp = buf[c * ports + p];
                for k in 0..n {
                    let s = basis.shape(k + 1, w.abs());
                    y[(i, p * 2 * n + k)] = hp * s;
                    y[(i, p * 2 * n + n + k)] = hp * Complex64::new(0.0, w.signum() * s);
                }
            }
        }
        let z = &kernel * &y;
        let form = y.adjoint() * z;
        m += form.map(|v| v.re * TIME_SCALE * TIME_SCALE);
    }
    symmetrize(&mut m);
    Ok(EnergyMatrix {
        kind: if h.is_some() {
            EnergyKind::SquaredFieldWindowed
        } else {
            EnergyKind::IncidentWindowed
        },
        entries: m,
        window: Some(window),
        t_delay: h.map_or(0.0, |h| h.source().t_delay),
    })
}

/// Total energy `∫ Σ_c |y_c(t)|² dt`; the identity when `h` is `None`.
pub fn total_energy_matrix(h: Option<&InterpolatedTransfer>, basis: &BasisSet, ports: usize) -> Result<EnergyMatrix> {
    let Some(h) = h else {
        return Ok(EnergyMatrix {
            kind: EnergyKind::IncidentTotal,
            entries: DMatrix::identity(basis.coefficient_len(ports), basis.coefficient_len(ports)),
            window: None,
            t_delay: 0.0,
        });
    };
    check_band(h, basis)?;
    check_ports(h, ports)?;
    let outputs = h.n_outputs();
    let entries = converge("total energy", |halvings| {
        let rule = frequency_rule(basis, Some(h), 0.0, halvings);
        let hs = sample_transfer(h, &rule.nodes);
        let mut kernel = vec![Complex64::new(0.0, 0.0); rule.len() * ports * ports];
        for i in 0..rule.len() {
            let block = &hs[i * outputs * ports..(i + 1) * outputs * ports];
            for p in 0..ports {
                for pp in 0..ports {
                    kernel[i * ports * ports + p * ports + pp] = (0..outputs)
                        .map(|c| block[c * ports + p].conj() * block[c * ports + pp])
                        .sum();
                }
            }
        }
        let mut m = port_kernel_form(basis, &rule, ports, &kernel);
        symmetrize(&mut m);
        Ok(m)
    })?;
    Ok(EnergyMatrix {
        kind: EnergyKind::SquaredFieldTotal,
        entries,
        window: None,
        t_delay: h.source().t_delay,
    })
}

/// Energy `∫ v(t)ᵀ i(t) dt` taken by a port network with admittance
/// `Y(ω)` when the coefficients describe port voltages.
pub fn dissipated_energy_matrix(y: &InterpolatedTransfer, basis: &BasisSet) -> Result<EnergyMatrix> {
    check_band(y, basis)?;
    let ports = y.n_ports();
    if y.n_outputs() != ports {
        return Err(Error::Dimension {
            context: "admittance matrix (square)",
            expected: ports,
            actual: y.n_outputs(),
        });
    }
    check_passive(y, basis)?;
    let entries = converge("dissipated energy", |halvings| {
        let rule = frequency_rule(basis, Some(y), 0.0, halvings);
        let ys = sample_transfer(y, &rule.nodes);
        let mut kernel = vec![Complex64::new(0.0, 0.0); ys.len()];
        for i in 0..rule.len() {
            let b = &ys[i * ports * ports..(i + 1) * ports * ports];
            for p in 0..ports {
                for pp in 0..ports {
                    kernel[i * ports * ports + p * ports + pp] =
                        (b[p * ports + pp] + b[pp * ports + p].conj()) * 0.5;
                }
            }
        }
        let mut m = port_kernel_form(basis, &rule, ports, &kernel);
        symmetrize(&mut m);
        Ok(m)
    })?;
    Ok(EnergyMatrix {
        kind: EnergyKind::Dissipated,
        entries,
        window: None,
        t_delay: 0.0,
    })
}

fn check_passive(y: &InterpolatedTransfer, basis: &BasisSet) -> Result<()> {
    let ports = y.n_ports();
    let data = y.source();
    let peak = data.samples().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let band = basis.band();
    for (k, f) in data.frequencies_hz().iter().enumerate() {
        let w = 2.0 * PI * f;
        if w < band.omega_min() || w > band.omega_max() {
            continue;
        }
        let b = data.block(k);
        let yh = DMatrix::from_fn(ports, ports, |i, j| (b[i * ports + j] + b[j * ports + i].conj()) * 0.5);
        let min = SymmetricEigen::new(yh)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min < -PASSIVITY_TOL * peak {
            return Err(Error::Validation(format!(
                "admittance is not passive at {f:.6e} Hz (Hermitian-part eigenvalue {min:.3e})"
            )));
        }
    }
    Ok(())
}

/// `2 sin(xT)/x` with its series near the removable singularity.
pub fn window_kernel(x: f64, half_width: f64) -> f64 {
    let xt = x * half_width;
    if xt.abs() < KERNEL_SERIES_THRESHOLD {
        2.0 * half_width * (1.0 - xt * xt / 6.0)
    } else {
        2.0 * half_width * sinc(xt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_basis::{BandLimits, BasisFunctionId};
    use crate::transfer_data::{DofKind, TransferDataset};
    use approx::assert_relative_eq;

    fn flat(value: Complex64, band: BandLimits) -> InterpolatedTransfer {
        let f_hi = band.omega_max() / (2.0 * PI);
        let freqs: Vec<f64> = (0..=20).map(|k| f_hi * k as f64 / 20.0).collect();
        let n = freqs.len();
        let d = TransferDataset::new(freqs, 1, 1, vec![value; n], DofKind::IncidentWave).unwrap();
        InterpolatedTransfer::new(d, band).unwrap()
    }

    #[test]
    fn window_validation() {
        assert!(matches!(TimeWindow::new(0.0, 0.0), Err(Error::Domain(_))));
        let w = TimeWindow::from_bounds(-1.2e-12, 0.8e-12).unwrap();
        assert_relative_eq!(w.center, -0.2e-12, epsilon = 1e-24);
        assert_relative_eq!(w.half_width, 1e-12, epsilon = 1e-24);
    }

    #[test]
    fn flat_unit_field_matrix_is_sine_integral() {
        let band = BandLimits::from_hz(0.5e9, 2e9).unwrap();
        let basis = BasisSet::new(band, 6).unwrap();
        let h = flat(Complex64::new(1.0, 0.0), band);
        let f = field_matrix(&h, &basis, 0.0).unwrap();
        let d = band.width();
        for n in 1..=6 {
            // 2 ∫₊ sin(nπ(ω−ω_min)/Δ)/√Δ dω = 2·Δ(1 − cos nπ)/(nπ√Δ)
            let exact = 2.0 * d * (1.0 - (n as f64 * PI).cos()) / (n as f64 * PI * d.sqrt());
            let col = basis.position(0, BasisFunctionId::real(n));
            assert_relative_eq!(f.entries[(0, col)], TIME_SCALE * exact, max_relative = 1e-12, epsilon = 1e-9);
            let col = basis.position(0, BasisFunctionId::imaginary(n));
            assert!(f.entries[(0, col)].abs() < 1e-9);
        }
    }

    #[test]
    fn zero_transfer_gives_zero_matrices() {
        let band = BandLimits::from_hz(0.5e9, 2e9).unwrap();
        let basis = BasisSet::new(band, 4).unwrap();
        let h = flat(Complex64::new(0.0, 0.0), band);
        assert_eq!(field_matrix(&h, &basis, 1e-9).unwrap().entries.amax(), 0.0);
        assert_eq!(total_energy_matrix(Some(&h), &basis, 1).unwrap().entries.amax(), 0.0);
    }

    #[test]
    fn unit_transfer_total_is_identity() {
        let band = BandLimits::from_hz(0.5e9, 2e9).unwrap();
        let basis = BasisSet::new(band, 8).unwrap();
        let h = flat(Complex64::new(1.0, 0.0), band);
        let m = total_energy_matrix(Some(&h), &basis, 1).unwrap();
        let id = DMatrix::<f64>::identity(16, 16);
        assert!((m.entries - id).amax() < 1e-12);
    }

    #[test]
    fn conductance_gives_scaled_identity() {
        let band = BandLimits::from_hz(0.5e9, 2e9).unwrap();
        let basis = BasisSet::new(band, 5).unwrap();
        let y = flat(Complex64::new(0.02, 0.0), band);
        let m = dissipated_energy_matrix(&y, &basis).unwrap();
        let id = DMatrix::<f64>::identity(10, 10) * 0.02;
        assert!((m.entries - id).amax() < 1e-14);
        let y = flat(Complex64::new(0.0, 0.3), band);
        let m = dissipated_energy_matrix(&y, &basis).unwrap();
        assert!(m.entries.amax() < 1e-14);
    }

    #[test]
    fn active_admittance_is_rejected() {
        let band = BandLimits::from_hz(0.5e9, 2e9).unwrap();
        let basis = BasisSet::new(band, 5).unwrap();
        let y = flat(Complex64::new(-0.01, 0.0), band);
        assert!(matches!(dissipated_energy_matrix(&y, &basis), Err(Error::Validation(_))));
    }

    #[test]
    fn long_incident_window_tends_to_identity() {
        let band = BandLimits::from_hz(1e9, 3e9).unwrap();
        let basis = BasisSet::new(band, 4).unwrap();
        let w = windowed_energy_matrix(None, &basis, 1, TimeWindow::new(0.0, 200e-9).unwrap()).unwrap();
        let id = DMatrix::<f64>::identity(8, 8);
        assert!((w.entries - id).amax() < 2e-3);
    }

    #[test]
    fn factorised_and_direct_windowed_forms_agree() {
        let band = BandLimits::from_hz(1e9, 3e9).unwrap();
        let basis = BasisSet::new(band, 4).unwrap();
        let freqs: Vec<f64> = (0..=60).map(|k| 3e9 * k as f64 / 60.0).collect();
        let samples = freqs
            .iter()
            .map(|f| Complex64::from_polar(1.0 + f / 3e9, -2.0 * PI * f * 0.3e-9))
            .collect();
        let d = TransferDataset::new(freqs, 1, 1, samples, DofKind::IncidentWave).unwrap();
        let h = InterpolatedTransfer::new(d, band).unwrap();
        let win = TimeWindow::new(0.2e-9, 0.5e-9).unwrap();
        let a = windowed_energy_matrix(Some(&h), &basis, 1, win).unwrap();
        let b = windowed_energy_matrix_direct(Some(&h), &basis, 1, win, 1).unwrap();
        let scale = a.entries.amax();
        assert!((a.entries - b.entries).amax() < 1e-6 * scale);
        let a = windowed_energy_matrix(None, &basis, 1, win).unwrap();
        let b = windowed_energy_matrix_direct(None, &basis, 1, win, 1).unwrap();
        assert!((a.entries - b.entries).amax() < 1e-6);
    }

    #[test]
    fn kernel_series_matches_closed_form() {
        let t = 1e-9;
        for x in [1e-7f64, 1e-4, 1.0, 1e3] {
            let exact = 2.0 * (x * t).sin() / x;
            assert_relative_eq!(window_kernel(x, t), exact, max_relative = 1e-12);
        }
        assert_eq!(window_kernel(0.0, t), 2.0 * t);
    }
}
