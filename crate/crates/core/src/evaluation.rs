//! Test-set evaluation: long and segmented runs, sampling-rate sweeps,
//! derivative fields and aliasing spectra.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{reference_integrate, Circuit, CircuitError, MIN_OVERSAMPLE};
use crate::data::{resample, DataError};
use crate::metrics::{dc_loss, esr, magnitude_spectrum, sdr, spectrum_frequencies, MetricError, Window};
use crate::neural::{Eager, Tensor};
use crate::odenet::{Architecture, Model, ModelError};
use crate::signal::{AudioSequence, StateTrajectory};
use crate::solvers::IntegrationStats;

pub const DEFAULT_RATES: [f64; 4] = [22050.0, 44100.0, 48000.0, 192000.0];
pub const DEFAULT_SEGMENT_LEN: usize = 22050;
/// Oracle fine-grid rate aimed for at every test rate.
const ORACLE_FINE_RATE: f64 = 32.0 * 44100.0;
/// Top-octave excess (dB) above which a spectrum is flagged as aliased.
pub const ALIASING_FLAG_DB: f64 = 10.0;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("invalid evaluation request: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Oversampling that puts the oracle's fine grid near 32 x 44.1 kHz.
pub fn oracle_oversample(rate_hz: f64) -> usize {
    ((ORACLE_FINE_RATE / rate_hz).ceil() as usize).max(MIN_OVERSAMPLE)
}

/// Test input at one rate with the oracle response computed natively there.
#[derive(Clone, Debug, PartialEq)]
pub struct TestSet {
    pub input: AudioSequence,
    pub target: StateTrajectory,
}

impl TestSet {
    /// Concatenates `clips`, resamples to `rate_hz` and runs the oracle from rest.
    pub fn synthesize(circuit: &Circuit, clips: &[AudioSequence], rate_hz: f64) -> Result<Self, EvalError> {
        let source_rate = clips
            .first()
            .map(|c| c.rate_hz)
            .ok_or_else(|| EvalError::Config("no test material".into()))?;
        if clips.iter().any(|c| c.rate_hz != source_rate) {
            return Err(EvalError::Config("test clips differ in sample rate".into()));
        }
        let joined = AudioSequence::new(clips.iter().flat_map(|c| c.samples.iter().copied()).collect(), source_rate);
        let input = resample(&joined, rate_hz)?;
        let target = reference_integrate(circuit, &input, oracle_oversample(rate_hz))?;
        Ok(Self { input, target })
    }

    pub fn rate_hz(&self) -> f64 {
        self.input.rate_hz
    }

    pub fn len(&self) -> usize {
        self.input.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Long,
    Segmented,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub model: String,
    pub solver: String,
    pub train_rate_hz: f64,
    pub test_rate_hz: f64,
    pub mode: EvalMode,
    /// `None` when the run diverged.
    pub sdr_db: Option<f64>,
    pub esr: Option<f64>,
    pub dc: Option<f64>,
    pub implicit_nonconverged_count: usize,
    pub diverged: bool,
    /// Wall-clock time of the model run; not part of the metrics CSV.
    pub runtime_s: f64,
}

impl EvalRow {
    /// Everything except the wall-clock time.
    pub fn same_metrics(&self, other: &EvalRow) -> bool {
        let mut a = self.clone();
        a.runtime_s = other.runtime_s;
        &a == other
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

/// Solver label for reports; only ODENets have one.
pub fn solver_label(model: &Model) -> String {
    match model.arch {
        Architecture::OdeNet { .. } => model.solver.scheme.name().to_string(),
        Architecture::Stn { .. } => "stn".into(),
        Architecture::Lstm { .. } => "lstm".into(),
    }
}

/// Copy of `model` stepping at `rate_hz`; the LSTM has no step to change.
fn at_rate(model: &Model, rate_hz: f64) -> Result<Model, ModelError> {
    if model.is_rate_informed() {
        model.with_playback_rate(rate_hz)
    } else {
        Ok(model.clone())
    }
}

fn row_from_output(
    label: &str,
    model: &Model,
    test: &TestSet,
    mode: EvalMode,
    output: Result<(Vec<f64>, IntegrationStats), ModelError>,
    runtime_s: f64,
) -> Result<EvalRow, EvalError> {
    let mut row = EvalRow {
        model: label.to_string(),
        solver: solver_label(model),
        train_rate_hz: model.training_rate_hz,
        test_rate_hz: test.rate_hz(),
        mode,
        sdr_db: None,
        esr: None,
        dc: None,
        implicit_nonconverged_count: 0,
        diverged: false,
        runtime_s,
    };
    match output {
        Ok((y_hat, stats)) => {
            let y = test.target.channel(0);
            row.sdr_db = Some(sdr(&y, &y_hat)?);
            row.esr = Some(esr(&y, &y_hat)?);
            row.dc = Some(dc_loss(&y, &y_hat)?);
            row.implicit_nonconverged_count = stats.nonconverged;
        }
        Err(e) if e.divergence_step().is_some() || matches!(e, ModelError::Solver(_)) => row.diverged = true,
        Err(e) => return Err(e.into()),
    }
    Ok(row)
}

/// Output channel 0 of a single run over the whole test input from rest.
pub fn run_long(model: &Model, input: &[f64]) -> Result<(Vec<f64>, IntegrationStats), ModelError> {
    let mut out = Vec::with_capacity(input.len());
    let stats = model.forward_each(input, &vec![0.0; model.state_dim], |_, s| out.push(s[0]))?;
    Ok((out, stats))
}

/// One forward pass over the test material from the zero state.
pub fn evaluate_long(label: &str, model: &Model, test: &TestSet) -> Result<EvalRow, EvalError> {
    let m = at_rate(model, test.rate_hz())?;
    let start = Instant::now();
    let out = run_long(&m, &test.input.samples);
    let runtime = start.elapsed().as_secs_f64();
    row_from_output(label, &m, test, EvalMode::Long, out, runtime)
}

/// Output channel 0 with every segment after the first started from the
/// target state at the sample before it.
///
/// The first segment starts from rest exactly as [`run_long`] does. The LSTM
/// cannot take a state from the targets, so it carries its own hidden state
/// across segment boundaries.
pub fn run_segmented(
    model: &Model,
    input: &[f64],
    target: &StateTrajectory,
    segment_len: usize,
) -> Result<(Vec<f64>, IntegrationStats), ModelError> {
    if segment_len == 0 {
        return Err(ModelError::Contract("segment_len must be positive".into()));
    }
    if target.len() != input.len() || target.state_dim() != model.state_dim {
        return Err(ModelError::Contract("target does not match the input or the model".into()));
    }
    if matches!(model.arch, Architecture::Lstm { .. }) {
        return run_long(model, input);
    }
    let n = input.len();
    let first = segment_len.min(n);
    let (mut out, mut stats) = run_long(model, &input[..first])?;
    let mut start = first;
    while start < n {
        let end = (start + segment_len).min(n);
        let ctx: Vec<f64> = std::iter::once(input[start - 1]).chain(input[start..end].iter().copied()).collect();
        let y0 = Tensor::row(target.frame(start - 1));
        let outcome = model.run_with_context(&mut Eager, model.params.tensors(), &[&ctx], &y0, None, |_, _, v| {
            out.push(v.data()[0])
        })?;
        stats.steps += outcome.stats.steps;
        stats.derivative_evals += outcome.stats.derivative_evals;
        stats.nonconverged += outcome.stats.nonconverged;
        start = end;
    }
    Ok((out, stats))
}

/// Number of segments [`run_segmented`] uses.
pub fn segment_count(n: usize, segment_len: usize) -> usize {
    n.div_ceil(segment_len)
}

pub fn evaluate_segmented(label: &str, model: &Model, test: &TestSet, segment_len: usize) -> Result<EvalRow, EvalError> {
    let m = at_rate(model, test.rate_hz())?;
    let start = Instant::now();
    let out = run_segmented(&m, &test.input.samples, &test.target, segment_len);
    let runtime = start.elapsed().as_secs_f64();
    row_from_output(label, &m, test, EvalMode::Segmented, out, runtime)
}

/// One long-mode row per test set; the model itself is never modified.
pub fn rate_sweep(label: &str, model: &Model, tests: &[TestSet]) -> Result<EvalReport, EvalError> {
    let rows = tests
        .iter()
        .map(|t| evaluate_long(label, model, t))
        .collect::<Result<_, _>>()?;
    Ok(EvalReport { rows })
}

/// Metrics as CSV; wall-clock time goes to [`write_timing_csv`] so this file
/// is reproducible.
pub fn write_report_csv(path: &Path, report: &EvalReport) -> Result<(), EvalError> {
    let mut text = String::from("model,solver,train_rate,test_rate,mode,sdr_db,esr,dc,nonconverged,diverged\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &report.rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.model,
            r.solver,
            r.train_rate_hz,
            r.test_rate_hz,
            match r.mode {
                EvalMode::Long => "long",
                EvalMode::Segmented => "segmented",
            },
            opt(r.sdr_db),
            opt(r.esr),
            opt(r.dc),
            r.implicit_nonconverged_count,
            r.diverged
        ));
    }
    write_text(path, &text)
}

pub fn write_timing_csv(path: &Path, report: &EvalReport) -> Result<(), EvalError> {
    let mut text = String::from("model,solver,test_rate,runtime_s\n");
    for r in &report.rows {
        text.push_str(&format!("{},{},{},{}\n", r.model, r.solver, r.test_rate_hz, r.runtime_s));
    }
    write_text(path, &text)
}

fn write_text(path: &Path, text: &str) -> Result<(), EvalError> {
    let io = |e: std::io::Error| EvalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(text.as_bytes()).map_err(io)
}

/// Where derivative values come from.
#[derive(Clone, Copy, Debug)]
pub enum FieldSource<'a> {
    Oracle(&'a Circuit),
    Model(&'a Model),
}

/// `dy/dt` in volts per second on a `vin x y1` grid at fixed `y2`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldGrid {
    pub vin_axis: Vec<f64>,
    pub y1_axis: Vec<f64>,
    /// Ignored by first-order sources.
    pub y2: f64,
    pub state_dim: usize,
    /// Row-major over `(vin, y1)`, `state_dim` values per point.
    pub values: Vec<f64>,
}

impl FieldGrid {
    pub fn derivative(&self, i: usize, j: usize) -> &[f64] {
        let k = (i * self.y1_axis.len() + j) * self.state_dim;
        &self.values[k..k + self.state_dim]
    }

    /// Euclidean norm of the derivative vector at a grid point.
    pub fn magnitude(&self, i: usize, j: usize) -> f64 {
        self.derivative(i, j).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn points(&self) -> usize {
        self.vin_axis.len() * self.y1_axis.len()
    }
}

/// Evenly spaced axis of `n` points over `[lo, hi]`.
pub fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Samples the derivative field. Model outputs (per training-rate sample)
/// are rescaled to per-second units with the training rate.
pub fn derivative_field(source: FieldSource<'_>, vin_axis: &[f64], y1_axis: &[f64], y2: f64) -> Result<FieldGrid, EvalError> {
    let state_dim = match source {
        FieldSource::Oracle(c) => c.state_dim(),
        FieldSource::Model(m) => m.state_dim,
    };
    let mut values = Vec::with_capacity(vin_axis.len() * y1_axis.len() * state_dim);
    for &v in vin_axis {
        for &y1 in y1_axis {
            let y: Vec<f64> = if state_dim == 1 { vec![y1] } else { vec![y1, y2] };
            match source {
                FieldSource::Oracle(c) => values.extend(c.rhs_vec(v, &y)),
                FieldSource::Model(m) => {
                    let d = m.derivative_eval(0.0, v, &y)?;
                    values.extend(d.iter().map(|x| x * m.training_rate_hz));
                }
            }
        }
    }
    Ok(FieldGrid {
        vin_axis: vin_axis.to_vec(),
        y1_axis: y1_axis.to_vec(),
        y2,
        state_dim,
        values,
    })
}

/// Fraction of grid points where `dy1/dt` of both grids has the same sign,
/// skipping points with `|y1|` inside `exclude`.
pub fn sign_agreement(a: &FieldGrid, b: &FieldGrid, exclude: Option<(f64, f64)>) -> Result<f64, EvalError> {
    if a.vin_axis != b.vin_axis || a.y1_axis != b.y1_axis {
        return Err(EvalError::Config("field grids use different axes".into()));
    }
    let (mut agree, mut total) = (0usize, 0usize);
    for i in 0..a.vin_axis.len() {
        for (j, y1) in a.y1_axis.iter().enumerate() {
            if let Some((lo, hi)) = exclude {
                if (lo..=hi).contains(&y1.abs()) {
                    continue;
                }
            }
            total += 1;
            if a.derivative(i, j)[0].signum() == b.derivative(i, j)[0].signum() {
                agree += 1;
            }
        }
    }
    if total == 0 {
        return Err(EvalError::Config("no grid points left to compare".into()));
    }
    Ok(agree as f64 / total as f64)
}

/// Largest violation of `f(-vin, -y) = -f(vin, y)` over the grid, assuming
/// symmetric axes and `y2 = 0` for second-order grids.
pub fn odd_symmetry_error(g: &FieldGrid) -> f64 {
    let (nv, ny) = (g.vin_axis.len(), g.y1_axis.len());
    let mut worst = 0.0_f64;
    for i in 0..nv {
        for j in 0..ny {
            let (a, b) = (g.derivative(i, j), g.derivative(nv - 1 - i, ny - 1 - j));
            for (p, q) in a.iter().zip(b) {
                worst = worst.max((p + q).abs());
            }
        }
    }
    worst
}

/// CSV with header `vin,y1,y2,dy1_dt[,dy2_dt],magnitude`.
pub fn write_field_csv(path: &Path, g: &FieldGrid) -> Result<(), EvalError> {
    let mut text = String::from("vin,y1,y2");
    for k in 0..g.state_dim {
        text.push_str(&format!(",dy{}_dt", k + 1));
    }
    text.push_str(",magnitude\n");
    for (i, v) in g.vin_axis.iter().enumerate() {
        for (j, y1) in g.y1_axis.iter().enumerate() {
            text.push_str(&format!("{v},{y1},{}", g.y2));
            for d in g.derivative(i, j) {
                text.push_str(&format!(",{d}"));
            }
            text.push_str(&format!(",{}\n", g.magnitude(i, j)));
        }
    }
    write_text(path, &text)
}

/// Peak-normalized 110 Hz tone with 20 harmonics at amplitude `1/k`.
pub fn test_tone(rate_hz: f64, duration_s: f64, amplitude: f64) -> AudioSequence {
    const F0: f64 = 110.0;
    const HARMONICS: usize = 20;
    let n = (duration_s * rate_hz).round() as usize;
    let raw: Vec<f64> = (0..n)
        .map(|s| {
            let t = s as f64 / rate_hz;
            (1..=HARMONICS)
                .map(|k| (2.0 * std::f64::consts::PI * F0 * k as f64 * t).sin() / k as f64)
                .sum()
        })
        .collect();
    // peak of the continuous waveform, independent of the sampling rate
    let peak = (0..100_000)
        .map(|s| {
            let t = s as f64 / (100_000.0 * F0);
            (1..=HARMONICS)
                .map(|k| (2.0 * std::f64::consts::PI * F0 * k as f64 * t).sin() / k as f64)
                .sum::<f64>()
                .abs()
        })
        .fold(0.0, f64::max);
    AudioSequence::new(raw.into_iter().map(|v| amplitude * v / peak).collect(), rate_hz)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AliasingSpectrum {
    pub rate_hz: f64,
    pub frequencies: Vec<f64>,
    pub model_db: Vec<f64>,
    pub oracle_db: Vec<f64>,
    /// Median of `model_db - oracle_db` over the top octave.
    pub top_octave_excess_db: f64,
    pub flagged: bool,
    pub diverged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AliasingConfig {
    pub fft_size: usize,
    pub window: Window,
    pub duration_s: f64,
    pub amplitude: f64,
    /// The band-limited oracle runs at this rate before decimation.
    pub oracle_rate_hz: f64,
}

impl Default for AliasingConfig {
    fn default() -> Self {
        Self {
            fft_size: 8192,
            window: Window::Hann,
            duration_s: 1.0,
            amplitude: 1.0,
            oracle_rate_hz: 8.0 * 44100.0 * 4.0,
        }
    }
}

/// Alias-free oracle output at `rate_hz`: computed from the tone at a high
/// rate and low-passed down with the resampler.
pub fn bandlimited_oracle(circuit: &Circuit, rate_hz: f64, cfg: &AliasingConfig) -> Result<Vec<f64>, EvalError> {
    let hi_rate = (cfg.oracle_rate_hz / rate_hz).ceil() * rate_hz;
    let tone = test_tone(hi_rate, cfg.duration_s, cfg.amplitude);
    let y = reference_integrate(circuit, &tone, MIN_OVERSAMPLE)?.channel(0);
    Ok(resample(&AudioSequence::new(y, hi_rate), rate_hz)?.samples)
}

/// Median over the top-octave bins of `a - b`.
fn top_octave_excess(freqs: &[f64], a: &[f64], b: &[f64], rate_hz: f64) -> f64 {
    let mut d: Vec<f64> = freqs
        .iter()
        .enumerate()
        .filter(|(_, f)| **f >= rate_hz / 4.0 && **f <= rate_hz / 2.0)
        .map(|(k, _)| a[k] - b[k])
        .collect();
    d.sort_by(f64::total_cmp);
    if d.is_empty() {
        0.0
    } else {
        d[d.len() / 2]
    }
}

/// Normalized output spectra of the model and the band-limited oracle for
/// the test tone at every rate.
pub fn aliasing_report(
    model: &Model,
    circuit: &Circuit,
    rates: &[f64],
    cfg: &AliasingConfig,
) -> Result<Vec<AliasingSpectrum>, EvalError> {
    let mut out = Vec::with_capacity(rates.len());
    for &rate in rates {
        let tone = test_tone(rate, cfg.duration_s, cfg.amplitude);
        let m = at_rate(model, rate)?;
        let oracle = bandlimited_oracle(circuit, rate, cfg)?;
        let oracle_db = magnitude_spectrum(&oracle, cfg.window, cfg.fft_size)?;
        let frequencies = spectrum_frequencies(cfg.fft_size, rate);
        let (model_db, diverged) = match run_long(&m, &tone.samples) {
            Ok((y, _)) => (magnitude_spectrum(&y, cfg.window, cfg.fft_size)?, false),
            Err(ModelError::Solver(_)) => (vec![f64::NAN; frequencies.len()], true),
            Err(e) => return Err(e.into()),
        };
        let excess = if diverged {
            f64::INFINITY
        } else {
            top_octave_excess(&frequencies, &model_db, &oracle_db, rate)
        };
        out.push(AliasingSpectrum {
            rate_hz: rate,
            frequencies,
            model_db,
            oracle_db,
            top_octave_excess_db: excess,
            flagged: excess > ALIASING_FLAG_DB,
            diverged,
        });
    }
    Ok(out)
}

/// CSV with header `frequency_hz,model_db,oracle_db`.
pub fn write_spectrum_csv(path: &Path, s: &AliasingSpectrum) -> Result<(), EvalError> {
    let mut text = String::from("frequency_hz,model_db,oracle_db\n");
    for k in 0..s.frequencies.len() {
        text.push_str(&format!("{},{},{}\n", s.frequencies[k], s.model_db[k], s.oracle_db[k]));
    }
    write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{Clipper1, Clipper2, ProgramConfig, ProgramGenerator};
    use crate::odenet::Preset;

    fn zero_model() -> Model {
        let mut m = Preset::Odenet9Fe.build(1, 44100.0).unwrap();
        for t in m.params.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        m
    }

    fn small_test() -> TestSet {
        let clip = ProgramGenerator::new(3, ProgramConfig::default()).clip(0.5, 44100.0);
        TestSet::synthesize(&Circuit::Clipper1(Clipper1::default()), &[clip], 44100.0).unwrap()
    }

    #[test]
    fn oversample_choice() {
        assert_eq!(oracle_oversample(44100.0), 32);
        assert_eq!(oracle_oversample(22050.0), 64);
        assert_eq!(oracle_oversample(48000.0), 30);
        assert_eq!(oracle_oversample(192000.0), 8);
    }

    #[test]
    fn zero_model_scores_zero_db() {
        let row = evaluate_long("zero", &zero_model(), &small_test()).unwrap();
        assert_eq!(row.esr, Some(1.0));
        assert_eq!(row.sdr_db, Some(0.0));
        assert!(!row.diverged);
    }

    #[test]
    fn runs_are_repeatable() {
        let t = small_test();
        let m = Preset::Stn3x4.build(4, 44100.0).unwrap();
        let a = evaluate_long("stn", &m, &t).unwrap();
        let b = evaluate_long("stn", &m, &t).unwrap();
        assert!(a.same_metrics(&b));
    }

    #[test]
    fn one_segment_equals_long_mode() {
        let t = small_test();
        for p in [Preset::Odenet9Fe, Preset::Stn3x4, Preset::Lstm8, Preset::Odenet9Ia] {
            let m = p.build(2, 44100.0).unwrap();
            let long = run_long(&m, &t.input.samples);
            let seg = run_segmented(&m, &t.input.samples, &t.target, t.len());
            match (long, seg) {
                (Ok(a), Ok(b)) => assert_eq!(a.0, b.0, "{p}"),
                (Err(_), Err(_)) => {}
                (a, b) => panic!("{p}: long {:?} vs segmented {:?}", a.is_ok(), b.is_ok()),
            }
        }
        assert_eq!(segment_count(22051, 22050), 2);
        assert_eq!(segment_count(22050, 22050), 1);
    }

    #[test]
    fn segments_restart_from_targets() {
        let t = small_test();
        let m = zero_model();
        // a zero derivative holds the initial state, so each segment replays its start state
        let (y, _) = run_segmented(&m, &t.input.samples, &t.target, 1000).unwrap();
        assert_eq!(y.len(), t.len());
        assert!(y[..1000].iter().all(|&v| v == 0.0));
        assert_eq!(y[1000], t.target.frame(999)[0]);
        assert_eq!(y[2500], t.target.frame(1999)[0]);
    }

    #[test]
    fn sweep_leaves_model_untouched() {
        let clip = ProgramGenerator::new(3, ProgramConfig::default()).clip(0.2, 44100.0);
        let c = Circuit::Clipper1(Clipper1::default());
        let tests: Vec<TestSet> = DEFAULT_RATES
            .iter()
            .map(|&r| TestSet::synthesize(&c, std::slice::from_ref(&clip), r).unwrap())
            .collect();
        let m = Preset::Odenet9Fe.build(0, 44100.0).unwrap();
        let before = m.params.digest();
        let report = rate_sweep("m", &m, &tests).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert_eq!(m.params.digest(), before);
        assert_eq!(m.step(), 1.0);
        let native = evaluate_long("m", &m, &tests[1]).unwrap();
        assert!(report.rows[1].same_metrics(&native));
    }

    #[test]
    fn oracle_field_examples() {
        let c = Circuit::Clipper1(Clipper1::default());
        let ax = axis(-1.0, 1.0, 21);
        let g = derivative_field(FieldSource::Oracle(&c), &ax, &ax, 0.0).unwrap();
        assert_eq!(g.points(), 441);
        assert_eq!(g.magnitude(10, 10), 0.0);
        assert!(odd_symmetry_error(&g) < 1e-6 * g.values.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        assert_eq!(sign_agreement(&g, &g, Some((0.4, 0.7))).unwrap(), 1.0);
        let c2 = Circuit::Clipper2(Clipper2::default());
        let g2 = derivative_field(FieldSource::Oracle(&c2), &ax, &ax, 1.0).unwrap();
        assert_eq!(g2.state_dim, 2);
    }

    #[test]
    fn model_field_is_scaled_to_seconds() {
        let m = Preset::Odenet9Fe.build(5, 44100.0).unwrap();
        let g = derivative_field(FieldSource::Model(&m), &[0.3], &[0.1], 0.0).unwrap();
        let raw = m.derivative_eval(0.0, 0.3, &[0.1]).unwrap()[0];
        assert_eq!(g.values[0], raw * 44100.0);
        assert!(derivative_field(FieldSource::Model(&Preset::Lstm8.build(1, 44100.0).unwrap()), &[0.0], &[0.0], 0.0).is_err());
    }

    #[test]
    fn bandlimited_oracle_is_clean_above_its_band() {
        let c = Circuit::Clipper1(Clipper1::default());
        let cfg = AliasingConfig {
            duration_s: 0.5,
            ..AliasingConfig::default()
        };
        let y = bandlimited_oracle(&c, 22050.0, &cfg).unwrap();
        let db = magnitude_spectrum(&y, cfg.window, cfg.fft_size).unwrap();
        let f = spectrum_frequencies(cfg.fft_size, 22050.0);
        let worst = f.iter().zip(&db).filter(|(f, _)| **f > 0.5 * 22050.0 * 0.95).map(|(_, d)| *d).fold(f64::MIN, f64::max);
        assert!(worst < -60.0, "{worst} dB");
    }

    #[test]
    fn tone_is_peak_normalized() {
        let t = test_tone(44100.0, 0.1, 1.0);
        assert!(t.peak() <= 1.0 + 1e-9 && t.peak() > 0.99, "{}", t.peak());
    }

    #[test]
    fn csv_writers() {
        let dir = tempfile::tempdir().unwrap();
        let c = Circuit::Clipper1(Clipper1::default());
        let ax = axis(-1.0, 1.0, 101);
        let g = derivative_field(FieldSource::Oracle(&c), &ax, &ax, 0.0).unwrap();
        let p = dir.path().join("f.csv");
        write_field_csv(&p, &g).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap().lines().count(), 10202);
        let row = evaluate_long("zero", &zero_model(), &small_test()).unwrap();
        let report = EvalReport { rows: vec![row] };
        write_report_csv(&dir.path().join("r.csv"), &report).unwrap();
        let text = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("zero,fe,44100,44100,long,0,1,"));
    }
}
