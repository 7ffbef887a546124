//! Sampled frequency-domain transfer matrices and their interpolation.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral_basis::{BandLimits, BasisSet};

/// What the input degrees of freedom of a dataset are.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DofKind {
    /// Incident power waves on feed lines (√W).
    IncidentWave,
    /// Port voltages (V).
    PortVoltage,
    /// Incident plane-wave field (V/m).
    PlaneWaveField,
}

impl DofKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DofKind::IncidentWave => "incident-wave",
            DofKind::PortVoltage => "port-voltage",
            DofKind::PlaneWaveField => "plane-wave-field",
        }
    }
}

impl fmt::Display for DofKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DofKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "incident-wave" => Ok(DofKind::IncidentWave),
            "port-voltage" => Ok(DofKind::PortVoltage),
            "plane-wave-field" => Ok(DofKind::PlaneWaveField),
            other => Err(Error::parse(None, Some("dof_kind"), format!("unknown dof kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Json,
    Csv,
}

impl FileFormat {
    /// Guess from a file extension; defaults to JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => FileFormat::Csv,
            _ => FileFormat::Json,
        }
    }
}

pub const DEFAULT_Z_CHAR: f64 = 50.0;

/// Sampled transfer matrix `H(ω)` with `n_outputs × n_ports` entries per
/// frequency. Only non-negative frequencies are stored; negative
/// frequencies follow from `H(−ω) = conj H(ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferDataset {
    frequencies_hz: Vec<f64>,
    n_ports: usize,
    n_outputs: usize,
    /// Flat `[freq][output][port]`.
    samples: Vec<Complex64>,
    pub dof_kind: DofKind,
    pub z_char: f64,
    pub t_delay: f64,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl TransferDataset {
    pub fn new(
        frequencies_hz: Vec<f64>,
        n_outputs: usize,
        n_ports: usize,
        samples: Vec<Complex64>,
        dof_kind: DofKind,
    ) -> Result<Self> {
        let data = TransferDataset {
            frequencies_hz,
            n_ports,
            n_outputs,
            samples,
            dof_kind,
            z_char: DEFAULT_Z_CHAR,
            t_delay: 0.0,
            metadata: BTreeMap::new(),
        };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ports == 0 || self.n_outputs == 0 {
            return Err(Error::Validation("dataset needs at least one port and one output".into()));
        }
        if self.frequencies_hz.is_empty() {
            return Err(Error::Validation("dataset has no frequency samples".into()));
        }
        let expected = self.frequencies_hz.len() * self.n_outputs * self.n_ports;
        if self.samples.len() != expected {
            return Err(Error::Dimension {
                context: "transfer samples",
                expected,
                actual: self.samples.len(),
            });
        }
        for (k, f) in self.frequencies_hz.iter().enumerate() {
            if !f.is_finite() || *f < 0.0 {
                return Err(Error::Validation(format!(
                    "frequency #{k} = {f} must be finite and non-negative"
                )));
            }
        }
        for (k, pair) in self.frequencies_hz.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(Error::Validation(format!(
                    "frequencies must be strictly ascending (#{k} = {}, #{} = {})",
                    pair[0],
                    k + 1,
                    pair[1]
                )));
            }
        }
        if let Some(k) = self.samples.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            let per = self.n_outputs * self.n_ports;
            return Err(Error::Validation(format!(
                "non-finite sample at frequency #{}, output {}, port {}",
                k / per,
                (k % per) / self.n_ports,
                k % self.n_ports
            )));
        }
        if !(self.z_char.is_finite() && self.z_char > 0.0) {
            return Err(Error::Validation("characteristic impedance must be positive".into()));
        }
        if !self.t_delay.is_finite() {
            return Err(Error::Validation("delay must be finite".into()));
        }
        Ok(())
    }

    pub fn frequencies_hz(&self) -> &[f64] {
        &self.frequencies_hz
    }

    pub fn n_freq(&self) -> usize {
        self.frequencies_hz.len()
    }

    pub fn n_ports(&self) -> usize {
        self.n_ports
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn sample(&self, freq: usize, output: usize, port: usize) -> Complex64 {
        self.samples[(freq * self.n_outputs + output) * self.n_ports + port]
    }

    /// Sample block `[output][port]` at one frequency index.
    pub fn block(&self, freq: usize) -> &[Complex64] {
        let per = self.n_outputs * self.n_ports;
        &self.samples[freq * per..(freq + 1) * per]
    }

    pub fn with_metadata(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.metadata.insert(key.to_owned(), value.into());
        self
    }

    pub fn load(path: impl AsRef<Path>, format: FileFormat) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::read(std::io::BufReader::new(file), format)
    }

    pub fn read(mut reader: impl Read, format: FileFormat) -> Result<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        match format {
            FileFormat::Json => Self::from_json_str(&text),
            FileFormat::Csv => Self::from_csv_str(&text),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>, format: FileFormat) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
        self.write(&mut file, format)?;
        file.flush()?;
        Ok(())
    }

    pub fn write(&self, writer: impl Write, format: FileFormat) -> Result<()> {
        match format {
            FileFormat::Json => {
                serde_json::to_writer_pretty(writer, &self.to_file())?;
                Ok(())
            }
            FileFormat::Csv => self.write_csv(writer),
        }
    }

    fn to_file(&self) -> TransferFile {
        let h = (0..self.n_freq())
            .map(|f| {
                (0..self.n_outputs)
                    .map(|c| {
                        (0..self.n_ports)
                            .map(|p| {
                                let z = self.sample(f, c, p);
                                [z.re, z.im]
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        TransferFile {
            dof_kind: self.dof_kind,
            z_char_ohm: self.z_char,
            t_delay_s: self.t_delay,
            n_ports: self.n_ports,
            n_outputs: self.n_outputs,
            frequencies_hz: self.frequencies_hz.clone(),
            h,
            metadata: self.metadata.clone(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: TransferFile = serde_json::from_str(text).map_err(|e| {
            Error::parse(Some(e.line()), None, e.to_string())
        })?;
        if file.h.len() != file.frequencies_hz.len() {
            return Err(Error::parse(
                None,
                Some("h"),
                format!(
                    "{} frequency rows declared but `h` has {}",
                    file.frequencies_hz.len(),
                    file.h.len()
                ),
            ));
        }
        let mut samples = Vec::with_capacity(file.h.len() * file.n_outputs * file.n_ports);
        for (f, rows) in file.h.iter().enumerate() {
            if rows.len() != file.n_outputs {
                return Err(Error::parse(
                    None,
                    Some("h"),
                    format!("frequency #{f}: expected {} outputs, got {}", file.n_outputs, rows.len()),
                ));
            }
            for (c, row) in rows.iter().enumerate() {
                if row.len() != file.n_ports {
                    return Err(Error::parse(
                        None,
                        Some("h"),
                        format!(
                            "frequency #{f}, output {c}: expected {} ports, got {}",
                            file.n_ports,
                            row.len()
                        ),
                    ));
                }
                samples.extend(row.iter().map(|[re, im]| Complex64::new(*re, *im)));
            }
        }
        let data = TransferDataset {
            frequencies_hz: file.frequencies_hz,
            n_ports: file.n_ports,
            n_outputs: file.n_outputs,
            samples,
            dof_kind: file.dof_kind,
            z_char: file.z_char_ohm,
            t_delay: file.t_delay_s,
            metadata: file.metadata,
        };
        data.validate()?;
        Ok(data)
    }

    /// CSV layout: optional `# key=value` metadata lines (`dof_kind`,
    /// `z_char_ohm`, `t_delay_s`, `n_freq`), then the header
    /// `freq_hz,output,port,re,im` and rows sorted by (freq, output, port).
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut dof_kind = DofKind::IncidentWave;
        let mut z_char = DEFAULT_Z_CHAR;
        let mut t_delay = 0.0;
        let mut declared_n_freq = None;
        let mut metadata = BTreeMap::new();
        let mut body_start = 0;
        let mut skipped_lines = 0;
        for line in text.split_inclusive('\n') {
            let trimmed = line.trim();
            if let Some(rest) = trimmed.strip_prefix('#') {
                let line_no = skipped_lines + 1;
                if let Some((key, value)) = rest.split_once('=') {
                    let (key, value) = (key.trim(), value.trim());
                    let num = |field: &str| -> Result<f64> {
                        value
                            .parse::<f64>()
                            .map_err(|e| Error::parse(Some(line_no), Some(field), e.to_string()))
                    };
                    match key {
                        "dof_kind" => dof_kind = value.parse()?,
                        "z_char_ohm" => z_char = num(key)?,
                        "t_delay_s" => t_delay = num(key)?,
                        "n_freq" => {
                            declared_n_freq = Some(value.parse::<usize>().map_err(|e| {
                                Error::parse(Some(line_no), Some("n_freq"), e.to_string())
                            })?)
                        }
                        _ => {
                            metadata.insert(key.to_owned(), serde_json::Value::String(value.to_owned()));
                        }
                    }
                }
            } else if !trimmed.is_empty() {
                break;
            }
            body_start += line.len();
            skipped_lines += 1;
        }
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(&text.as_bytes()[body_start..]);
        let header = reader.headers()?.clone();
        let expected_header = ["freq_hz", "output", "port", "re", "im"];
        if header.iter().ne(expected_header.iter().copied()) {
            return Err(Error::parse(
                Some(skipped_lines + 1),
                None,
                format!("expected header `{}`", expected_header.join(",")),
            ));
        }
        struct Row {
            line: usize,
            freq: f64,
            output: usize,
            port: usize,
            value: Complex64,
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            let line = skipped_lines + record.position().map_or(0, |p| p.line() as usize);
            let field = |i: usize| -> Result<&str> {
                record
                    .get(i)
                    .ok_or_else(|| Error::parse(Some(line), Some(expected_header[i]), "missing field"))
            };
            let float = |i: usize| -> Result<f64> {
                field(i)?
                    .parse::<f64>()
                    .map_err(|e| Error::parse(Some(line), Some(expected_header[i]), e.to_string()))
            };
            let index = |i: usize| -> Result<usize> {
                field(i)?
                    .parse::<usize>()
                    .map_err(|e| Error::parse(Some(line), Some(expected_header[i]), e.to_string()))
            };
            rows.push(Row {
                line,
                freq: float(0)?,
                output: index(1)?,
                port: index(2)?,
                value: Complex64::new(float(3)?, float(4)?),
            });
        }
        if rows.is_empty() {
            return Err(Error::parse(None, None, "no data rows"));
        }
        let n_outputs = rows.iter().map(|r| r.output).max().unwrap_or(0) + 1;
        let n_ports = rows.iter().map(|r| r.port).max().unwrap_or(0) + 1;
        let per = n_outputs * n_ports;
        if rows.len() % per != 0 {
            return Err(Error::parse(
                None,
                None,
                format!("{} rows is not a multiple of outputs × ports = {per}", rows.len()),
            ));
        }
        let n_freq = rows.len() / per;
        if let Some(declared) = declared_n_freq {
            if declared != n_freq {
                return Err(Error::parse(
                    None,
                    Some("n_freq"),
                    format!("declared {declared} frequencies but found {n_freq}"),
                ));
            }
        }
        let mut frequencies = Vec::with_capacity(n_freq);
        let mut samples = Vec::with_capacity(rows.len());
        for (k, row) in rows.iter().enumerate() {
            let (f, within) = (k / per, k % per);
            let (c, p) = (within / n_ports, within % n_ports);
            if row.output != c || row.port != p {
                return Err(Error::parse(
                    Some(row.line),
                    None,
                    format!("rows must be sorted by (freq, output, port); expected output {c}, port {p}"),
                ));
            }
            if within == 0 {
                frequencies.push(row.freq);
            } else if row.freq != frequencies[f] {
                return Err(Error::parse(
                    Some(row.line),
                    Some("freq_hz"),
                    "frequency changes inside an (output, port) block",
                ));
            }
            samples.push(row.value);
        }
        let data = TransferDataset {
            frequencies_hz: frequencies,
            n_ports,
            n_outputs,
            samples,
            dof_kind,
            z_char,
            t_delay,
            metadata,
        };
        data.validate()?;
        Ok(data)
    }

    fn write_csv(&self, mut writer: impl Write) -> Result<()> {
        writeln!(writer, "# dof_kind={}", self.dof_kind)?;
        writeln!(writer, "# z_char_ohm={}", self.z_char)?;
        writeln!(writer, "# t_delay_s={}", self.t_delay)?;
        writeln!(writer, "# n_freq={}", self.n_freq())?;
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["freq_hz", "output", "port", "re", "im"])?;
        for f in 0..self.n_freq() {
            for c in 0..self.n_outputs {
                for p in 0..self.n_ports {
                    let z = self.sample(f, c, p);
                    w.write_record([
                        self.frequencies_hz[f].to_string(),
                        c.to_string(),
                        p.to_string(),
                        z.re.to_string(),
                        z.im.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TransferFile {
    dof_kind: DofKind,
    #[serde(default = "default_z_char")]
    z_char_ohm: f64,
    #[serde(default)]
    t_delay_s: f64,
    n_ports: usize,
    n_outputs: usize,
    frequencies_hz: Vec<f64>,
    h: Vec<Vec<Vec<[f64; 2]>>>,
    #[serde(default)]
    metadata: BTreeMap<String, serde_json::Value>,
}

fn default_z_char() -> f64 {
    DEFAULT_Z_CHAR
}

/// Entrywise piecewise-linear evaluator of a dataset on a band.
#[derive(Debug, Clone)]
pub struct InterpolatedTransfer {
    source: TransferDataset,
    band: BandLimits,
    omegas: Vec<f64>,
}

impl InterpolatedTransfer {
    pub fn new(source: TransferDataset, band: BandLimits) -> Result<Self> {
        let omegas: Vec<f64> = source.frequencies_hz.iter().map(|f| 2.0 * PI * f).collect();
        let (lo, hi) = (omegas[0], omegas[omegas.len() - 1]);
        let slack = 1e-12 * hi;
        if band.omega_min() < lo - slack || band.omega_max() > hi + slack {
            return Err(Error::Range(format!(
                "band [{:.6e}, {:.6e}] rad/s exceeds sampled grid [{:.6e}, {:.6e}] rad/s",
                band.omega_min(),
                band.omega_max(),
                lo,
                hi
            )));
        }
        Ok(InterpolatedTransfer {
            source,
            band,
            omegas,
        })
    }

    pub fn source(&self) -> &TransferDataset {
        &self.source
    }

    pub fn band(&self) -> &BandLimits {
        &self.band
    }

    pub fn n_outputs(&self) -> usize {
        self.source.n_outputs
    }

    pub fn n_ports(&self) -> usize {
        self.source.n_ports
    }

    /// Grid frequencies in rad/s.
    pub fn knots(&self) -> &[f64] {
        &self.omegas
    }

    /// Writes `H(ω)` as `[output][port]` into `out`; negative `ω` returns
    /// the conjugate of `H(|ω|)`. Outside the sampled grid the value is
    /// clamped to the nearest end sample.
    pub fn eval_into(&self, omega: f64, out: &mut [Complex64]) {
        let per = self.source.n_outputs * self.source.n_ports;
        debug_assert_eq!(out.len(), per);
        let w = omega.abs();
        let n = self.omegas.len();
        let (k, t) = if n == 1 || w <= self.omegas[0] {
            (0, 0.0)
        } else if w >= self.omegas[n - 1] {
            (n - 2, 1.0)
        } else {
            let k = self.omegas.partition_point(|&x| x <= w) - 1;
            (k, (w - self.omegas[k]) / (self.omegas[k + 1] - self.omegas[k]))
        };
        let a = self.source.block(k);
        if t == 0.0 {
            out.copy_from_slice(a);
        } else {
            let b = self.source.block(k + 1);
            for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                *o = Complex64::new((1.0 - t) * x.re + t * y.re, (1.0 - t) * x.im + t * y.im);
            }
        }
        if omega < 0.0 {
            for o in out.iter_mut() {
                *o = o.conj();
            }
        }
    }

    pub fn eval(&self, omega: f64) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.source.n_outputs * self.source.n_ports];
        self.eval_into(omega, &mut out);
        out
    }

    pub fn entry(&self, omega: f64, output: usize, port: usize) -> Complex64 {
        self.eval(omega)[output * self.source.n_ports + port]
    }
}

/// Outcome of [`densify_check`].
#[derive(Debug, Clone, Serialize)]
pub struct DensifyReport {
    /// Largest `|H_{k+1} − H_k|` over the band, relative to `max |H|`.
    pub max_relative_change: f64,
    /// Widest sample spacing overlapping the band (rad/s).
    pub grid_spacing: f64,
    /// Half-period of the highest basis sine, `Δ/N` (rad/s).
    pub oscillation_scale: f64,
    pub spacing_ratio: f64,
    pub flags: Vec<String>,
}

impl DensifyReport {
    pub fn passes(&self) -> bool {
        self.flags.is_empty()
    }
}

/// Adjacent-sample change above which linear interpolation is suspect.
pub const MAX_ADJACENT_CHANGE: f64 = 0.1;
/// Required samples per half-period of the finest basis function.
pub const SAMPLES_PER_LOBE: f64 = 2.0;

/// Checks that a dataset is dense enough for linear interpolation with the
/// requested basis.
pub fn densify_check(data: &TransferDataset, basis: &BasisSet) -> Result<DensifyReport> {
    if data.n_freq() < 3 {
        return Err(Error::Domain("densify check needs at least 3 samples".into()));
    }
    let band = basis.band();
    let omegas: Vec<f64> = data.frequencies_hz.iter().map(|f| 2.0 * PI * f).collect();
    let peak = data.samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut max_change: f64 = 0.0;
    let mut spacing: f64 = 0.0;
    for k in 0..omegas.len() - 1 {
        if omegas[k + 1] < band.omega_min() || omegas[k] > band.omega_max() {
            continue;
        }
        spacing = spacing.max(omegas[k + 1] - omegas[k]);
        if peak > 0.0 {
            for (a, b) in data.block(k).iter().zip(data.block(k + 1)) {
                max_change = max_change.max((b - a).norm() / peak);
            }
        }
    }
    let scale = band.width() / basis.n_per_family() as f64;
    let ratio = spacing / scale;
    let mut flags = Vec::new();
    if ratio > 1.0 / SAMPLES_PER_LOBE {
        flags.push(format!(
            "sparse: grid spacing is {ratio:.3} of the finest basis half-period (limit {:.3})",
            1.0 / SAMPLES_PER_LOBE
        ));
    }
    if max_change > MAX_ADJACENT_CHANGE {
        flags.push(format!(
            "rough: adjacent samples change by up to {max_change:.3} of max |H| (limit {MAX_ADJACENT_CHANGE})"
        ));
    }
    Ok(DensifyReport {
        max_relative_change: max_change,
        grid_spacing: spacing,
        oscillation_scale: scale,
        spacing_ratio: ratio,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> TransferDataset {
        let freqs: Vec<f64> = (0..n).map(|k| k as f64 * 1e8).collect();
        let samples = freqs
            .iter()
            .map(|f| Complex64::new((f / 1e9).cos(), -(f / 1e9).sin()))
            .collect();
        TransferDataset::new(freqs, 1, 1, samples, DofKind::IncidentWave).unwrap()
    }

    #[test]
    fn rejects_descending_grid() {
        let err = TransferDataset::new(
            vec![0.0, 2.0, 1.0],
            1,
            1,
            vec![Complex64::new(1.0, 0.0); 3],
            DofKind::PortVoltage,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn rejects_nan() {
        let err = TransferDataset::new(
            vec![0.0, 1.0],
            1,
            1,
            vec![Complex64::new(1.0, 0.0), Complex64::new(f64::NAN, 0.0)],
            DofKind::PortVoltage,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let mut d = toy(17).with_metadata("source", "unit test");
        d.t_delay = 1.234_567_890_123_456_7e-12;
        let mut buf = Vec::new();
        d.write(&mut buf, FileFormat::Json).unwrap();
        let back = TransferDataset::read(buf.as_slice(), FileFormat::Json).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn csv_round_trip() {
        let d = toy(9);
        let mut buf = Vec::new();
        d.write(&mut buf, FileFormat::Csv).unwrap();
        let back = TransferDataset::read(buf.as_slice(), FileFormat::Csv).unwrap();
        assert_eq!(back.samples(), d.samples());
        assert_eq!(back.frequencies_hz(), d.frequencies_hz());
    }

    #[test]
    fn csv_row_count_mismatch_is_parse_error() {
        let text = "# n_freq=3\nfreq_hz,output,port,re,im\n0,0,0,1,0\n1,0,0,1,0\n";
        let err = TransferDataset::from_csv_str(text).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn json_row_count_mismatch_is_parse_error() {
        let text = r#"{"dof_kind":"incident-wave","n_ports":1,"n_outputs":1,
            "frequencies_hz":[0,1,2],"h":[[[[1,0]]],[[[1,0]]]]}"#;
        let err = TransferDataset::from_json_str(text).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn csv_reports_line_of_bad_field() {
        let text = "freq_hz,output,port,re,im\n0,0,0,1,0\n1,0,0,abc,0\n";
        match TransferDataset::from_csv_str(text).unwrap_err() {
            Error::Parse { line, field, .. } => {
                assert_eq!(line, Some(3));
                assert_eq!(field.as_deref(), Some("re"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn interpolation_rules() {
        let d = toy(11);
        let band = BandLimits::from_hz(0.0, 1e9).unwrap();
        let h = InterpolatedTransfer::new(d.clone(), band).unwrap();
        for k in 0..d.n_freq() {
            let w = 2.0 * PI * d.frequencies_hz()[k];
            assert_eq!(h.entry(w, 0, 0), d.sample(k, 0, 0));
        }
        let mid = 2.0 * PI * 0.5 * (d.frequencies_hz()[3] + d.frequencies_hz()[4]);
        let expect = (d.sample(3, 0, 0) + d.sample(4, 0, 0)) * 0.5;
        assert!((h.entry(mid, 0, 0) - expect).norm() < 1e-15);
        assert_eq!(h.entry(-mid, 0, 0), h.entry(mid, 0, 0).conj());
    }

    #[test]
    fn band_outside_grid_is_range_error() {
        let band = BandLimits::from_hz(0.0, 2e9).unwrap();
        assert!(matches!(
            InterpolatedTransfer::new(toy(11), band).unwrap_err(),
            Error::Range(_)
        ));
    }

    #[test]
    fn densify_flags() {
        let band = BandLimits::from_hz(0.0, 1e9).unwrap();
        let basis = BasisSet::new(band, 120).unwrap();
        let flat = TransferDataset::new(
            (0..1001).map(|k| k as f64 * 1e6).collect(),
            1,
            1,
            vec![Complex64::new(2.0, 0.0); 1001],
            DofKind::IncidentWave,
        )
        .unwrap();
        let r = densify_check(&flat, &basis).unwrap();
        assert_eq!(r.max_relative_change, 0.0);
        assert!(r.passes(), "{:?}", r.flags);
        let sparse = TransferDataset::new(
            (0..5).map(|k| k as f64 * 2.5e8).collect(),
            1,
            1,
            vec![Complex64::new(1.0, 0.0); 5],
            DofKind::IncidentWave,
        )
        .unwrap();
        let r = densify_check(&sparse, &basis).unwrap();
        assert!(r.flags.iter().any(|f| f.starts_with("sparse")));
    }
}
