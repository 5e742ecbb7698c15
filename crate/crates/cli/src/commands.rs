use std::fs;
use std::path::Path;

use odenet_va::circuit::{synthesize_dataset, Circuit, Manifest, ProgramGenerator, Split};
use odenet_va::data::{cut_sequences, load_split, load_wav, write_wav};
use odenet_va::evaluation::{
    aliasing_report, axis, derivative_field, evaluate_long, evaluate_segmented, odd_symmetry_error,
    write_field_csv, write_report_csv, write_spectrum_csv, write_timing_csv, AliasingConfig, EvalReport,
    FieldSource, TestSet,
};
use odenet_va::metrics::Window;
use odenet_va::neural::Checkpoint;
use odenet_va::odenet::{Architecture, Model, Preset};
use odenet_va::signal::AudioSequence;
use odenet_va::solvers::Scheme;
use odenet_va::training::{fit, write_history_csv};

use crate::config::{
    self, Artifact, EvaluateConfig, ProcessConfig, SynthesizeConfig, TrainRunConfig, VisualizeConfig,
};
use crate::error::CliError;
use crate::{EvaluateArgs, ProcessArgs, SynthesizeArgs, TrainArgs, VisualizeArgs};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const ALIASING_FILE: &str = "aliasing.csv";

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn check_rate(rate: f64, what: &str) -> Result<(), CliError> {
    if rate > 0.0 && rate.is_finite() && rate.fract() == 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{what} must be a positive whole number of Hz, got {rate}")))
    }
}

fn parse_circuit(name: &str) -> Result<Circuit, CliError> {
    Ok(name.parse::<Circuit>()?)
}

fn load_model(path: &Path, solver: Option<Scheme>) -> Result<Model, CliError> {
    if !path.exists() {
        return Err(CliError::Io(format!("{}: checkpoint not found", path.display())));
    }
    let mut model = Model::from_checkpoint(&Checkpoint::load(path)?)?;
    if let Some(s) = solver {
        override_solver(&mut model, s)?;
    }
    Ok(model)
}

fn override_solver(model: &mut Model, scheme: Scheme) -> Result<(), CliError> {
    if !matches!(model.arch, Architecture::OdeNet { .. }) {
        return Err(CliError::Config("only ODENet models take a solver".into()));
    }
    model.solver.scheme = scheme;
    Ok(())
}

/// Report label: the checkpoint file stem, or its directory for the default file name.
fn checkpoint_label(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    if path.file_name().is_some_and(|n| n == CHECKPOINT_FILE) {
        if let Some(dir) = path.parent().and_then(|p| p.file_name()) {
            return dir.to_string_lossy().into_owned();
        }
    }
    stem
}

pub fn synthesize(a: SynthesizeArgs) -> Result<(), CliError> {
    let mut cfg: SynthesizeConfig = config::load(a.config.as_deref())?;
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.circuit {
        cfg.circuit = v;
    }
    if let Some(v) = a.rate {
        cfg.rate_hz = v;
    }
    if let Some(v) = a.duration {
        cfg.clip_duration_s = v;
    }
    if let Some(v) = a.clips {
        cfg.clips = v;
    }
    let circuit = parse_circuit(&cfg.circuit)?;
    check_rate(cfg.rate_hz, "rate")?;
    if cfg.clips == 0 || !(cfg.clip_duration_s > 0.0) {
        return Err(CliError::Config("need at least one clip of positive duration".into()));
    }
    let p = &cfg.program;
    if !(p.min_segment_s > 0.0 && p.min_segment_s <= p.max_segment_s)
        || !(p.min_peak > 0.0 && p.min_peak <= 1.0)
        || p.kinds.is_empty()
        || p.crossfade_s < 0.0
    {
        return Err(CliError::Config(format!("invalid program settings: {p:?}")));
    }

    create_dir(&a.out)?;
    let mut generator = ProgramGenerator::new(cfg.seed, cfg.program.clone());
    let inputs: Vec<AudioSequence> = (0..cfg.clips)
        .map(|_| generator.clip(cfg.clip_duration_s, cfg.rate_hz))
        .collect();
    let manifest = synthesize_dataset(&circuit, &inputs, cfg.rate_hz, cfg.oversample, cfg.fractions, &a.out)?;
    config::write_resolved(&a.out.join("synthesize.resolved.toml"), &cfg)?;
    for split in Split::ALL {
        println!(
            "{:<5} {:>9} samples ({:.2} s)",
            split.name(),
            manifest.samples_in(split),
            manifest.samples_in(split) as f64 / cfg.rate_hz
        );
    }
    Ok(())
}

pub fn train(a: TrainArgs) -> Result<(), CliError> {
    let mut cfg: TrainRunConfig = config::load(a.config.as_deref())?;
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.dataset {
        cfg.dataset = v;
    }
    if let Some(v) = a.model {
        cfg.model = v;
    }
    if a.solver.is_some() {
        cfg.solver = a.solver;
    }
    if let Some(v) = a.epochs {
        cfg.training.schedule.max_epochs = v;
    }
    let preset: Preset = cfg.model.parse().map_err(CliError::Config)?;
    let manifest = Manifest::load(&cfg.dataset)?;
    if preset.state_dim() != manifest.state_dim {
        return Err(CliError::Config(format!(
            "preset {preset} models {} state(s) but the dataset has {}",
            preset.state_dim(),
            manifest.state_dim
        )));
    }
    let mut model = preset.build(cfg.seed, manifest.rate_hz)?;
    if let Some(s) = cfg.solver {
        override_solver(&mut model, s)?;
    }
    let seg = &cfg.training.segmentation;
    let train_clips = load_split(&cfg.dataset, &manifest, Split::Train)?;
    let val_clips = load_split(&cfg.dataset, &manifest, Split::Val)?;
    let train_set = cut_sequences(&train_clips, seg, manifest.state_dim)?;
    let val_set = cut_sequences(&val_clips, seg, manifest.state_dim)?;

    create_dir(&a.out)?;
    config::write_resolved(&a.out.join("train.resolved.toml"), &cfg)?;
    eprintln!(
        "training {preset} ({} parameters) on {} sequences, validating on {}",
        model.param_count(),
        train_set.len(),
        val_set.len()
    );
    let result = fit(&mut model, &train_set, &val_set, &cfg.training, cfg.seed, |r| {
        eprintln!(
            "epoch {:>4}  train {:.4e}  val {}  lr {:.3e}  skipped {}",
            r.epoch,
            r.train_loss,
            r.val_loss.map_or_else(|| "-".to_string(), |v| format!("{v:.4e}")),
            r.lr,
            r.diverged
        );
    })?;
    let ck_path = a.out.join(CHECKPOINT_FILE);
    model
        .to_checkpoint()
        .save(&ck_path)
        .map_err(|e| CliError::Io(format!("{}: {e}", ck_path.display())))?;
    write_history_csv(&a.out.join(HISTORY_FILE), &result.history)?;
    println!(
        "best epoch {} of {}, validation loss {:.4e}{}",
        result.best_epoch,
        result.history.len(),
        result.best_val_loss,
        if result.stopped_early { " (stopped early)" } else { "" }
    );
    Ok(())
}

pub fn process(a: ProcessArgs) -> Result<(), CliError> {
    let mut cfg: ProcessConfig = config::load(a.config.as_deref())?;
    if let Some(v) = a.checkpoint {
        cfg.checkpoint = v;
    }
    if let Some(v) = a.input {
        cfg.input = v;
    }
    if let Some(v) = a.output {
        cfg.output = v;
    }
    if a.rate.is_some() {
        cfg.rate_hz = a.rate;
    }
    if a.solver.is_some() {
        cfg.solver = a.solver;
    }
    if cfg.output.as_os_str().is_empty() || cfg.input.as_os_str().is_empty() {
        return Err(CliError::Config("process needs a checkpoint, an input and an output path".into()));
    }
    if let Some(r) = cfg.rate_hz {
        check_rate(r, "rate")?;
    }
    let model = load_model(&cfg.checkpoint, cfg.solver)?;
    let input = load_wav(&cfg.input)?;
    let rate = cfg.rate_hz.unwrap_or(input.rate_hz);
    let model = if model.is_rate_informed() {
        model.with_playback_rate(rate)?
    } else {
        model
    };
    let (y, stats) = odenet_va::evaluation::run_long(&model, &input.samples)?;
    write_wav(&cfg.output, &AudioSequence::new(y, rate))?;
    let stem = cfg.output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let resolved = cfg.output.with_file_name(format!("{stem}.resolved.toml"));
    config::write_resolved(&resolved, &cfg)?;
    if stats.nonconverged > 0 {
        eprintln!("{} implicit steps did not converge", stats.nonconverged);
    }
    Ok(())
}

pub fn evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let mut cfg: EvaluateConfig = config::load(a.config.as_deref())?;
    if let Some(v) = a.dataset {
        cfg.dataset = v;
    }
    if !a.checkpoints.is_empty() {
        cfg.checkpoints = a.checkpoints;
    }
    if let Some(v) = a.rates {
        cfg.rates = v.0;
    }
    if a.segmented {
        cfg.segmented = true;
    }
    if let Some(v) = a.segment_len {
        cfg.segment_len = v;
    }
    if a.solver.is_some() {
        cfg.solver = a.solver;
    }
    if cfg.checkpoints.is_empty() || cfg.rates.is_empty() || cfg.segment_len == 0 {
        return Err(CliError::Config("need checkpoints, rates and a positive segment length".into()));
    }
    for &r in &cfg.rates {
        check_rate(r, "every rate")?;
    }
    let models = cfg
        .checkpoints
        .iter()
        .map(|p| Ok((checkpoint_label(p), load_model(p, cfg.solver)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let manifest = Manifest::load(&cfg.dataset)?;
    let clips: Vec<AudioSequence> = load_split(&cfg.dataset, &manifest, Split::Test)?
        .into_iter()
        .map(|c| AudioSequence::new(c.input, manifest.rate_hz))
        .collect();
    if let Some((label, m)) = models.iter().find(|(_, m)| m.state_dim != manifest.state_dim) {
        return Err(CliError::Config(format!(
            "{label} has {} state(s) but the dataset has {}",
            m.state_dim, manifest.state_dim
        )));
    }

    create_dir(&a.out)?;
    config::write_resolved(&a.out.join("evaluate.resolved.toml"), &cfg)?;
    let mut report = EvalReport::default();
    for &rate in &cfg.rates {
        let test = TestSet::synthesize(&manifest.circuit, &clips, rate)?;
        for (label, model) in &models {
            let row = if cfg.segmented {
                evaluate_segmented(label, model, &test, cfg.segment_len)?
            } else {
                evaluate_long(label, model, &test)?
            };
            println!(
                "{:<16} {:<5} {:>7} Hz  {}",
                row.model,
                row.solver,
                row.test_rate_hz,
                row.sdr_db.map_or_else(|| "diverged".to_string(), |s| format!("{s:.2} dB"))
            );
            report.rows.push(row);
        }
    }
    write_report_csv(&a.out.join(REPORT_FILE), &report)?;
    write_timing_csv(&a.out.join(TIMING_FILE), &report)?;
    Ok(())
}

/// `1` -> `1`, `-0.5` -> `-0.5`; used in file names.
fn number_tag(v: f64) -> String {
    format!("{v}")
}

pub fn visualize(a: VisualizeArgs) -> Result<(), CliError> {
    let mut cfg: VisualizeConfig = config::load(a.config.as_deref())?;
    if a.field {
        cfg.artifact = Artifact::Field;
    }
    if a.spectrum {
        cfg.artifact = Artifact::Spectrum;
    }
    if a.checkpoint.is_some() {
        cfg.checkpoint = a.checkpoint;
    }
    if a.oracle.is_some() {
        cfg.oracle = a.oracle;
    }
    if !a.y2.is_empty() {
        cfg.y2 = a.y2;
    }
    if let Some(v) = a.resolution {
        cfg.resolution = v;
    }
    if a.verify_symmetry {
        cfg.verify_symmetry = true;
    }
    if let Some(v) = a.rates {
        cfg.rates = v.0;
    }
    if let Some(v) = a.duration {
        cfg.duration_s = v;
    }
    if let Some(v) = a.amplitude {
        cfg.amplitude = v;
    }
    let oracle = cfg.oracle.as_deref().map(parse_circuit).transpose()?;
    let model = cfg.checkpoint.as_deref().map(|p| load_model(p, None)).transpose()?;
    create_dir(&a.out)?;

    match cfg.artifact {
        Artifact::Field => {
            if cfg.resolution < 2 || cfg.y2.is_empty() {
                return Err(CliError::Config("field grids need a resolution of at least 2 and a y2 value".into()));
            }
            let source = match (&model, &oracle) {
                (Some(m), None) => FieldSource::Model(m),
                (None, Some(c)) => FieldSource::Oracle(c),
                _ => return Err(CliError::Config("give exactly one of --checkpoint or --oracle".into())),
            };
            if cfg.verify_symmetry && oracle.is_none() {
                return Err(CliError::Config("symmetry verification applies to oracle fields".into()));
            }
            let ax = axis(-1.0, 1.0, cfg.resolution);
            for &y2 in &cfg.y2 {
                let grid = derivative_field(source, &ax, &ax, y2)?;
                let path = a.out.join(format!("field_y2_{}.csv", number_tag(y2)));
                write_field_csv(&path, &grid)?;
                println!("{} ({} points)", path.display(), grid.points());
                if cfg.verify_symmetry && (grid.state_dim == 1 || y2 == 0.0) {
                    let scale = grid.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                    let rel = odd_symmetry_error(&grid) / scale.max(f64::MIN_POSITIVE);
                    if rel > 1e-12 {
                        return Err(CliError::Verification(format!("field is not odd-symmetric ({rel:e})")));
                    }
                    println!("odd symmetry holds (relative violation {rel:e})");
                }
            }
        }
        Artifact::Spectrum => {
            let Some(model) = &model else {
                return Err(CliError::Config("spectra need --checkpoint".into()));
            };
            let circuit = match oracle {
                Some(c) => c,
                None => parse_circuit(if model.state_dim == 1 { "clipper1" } else { "clipper2" })?,
            };
            for &r in &cfg.rates {
                check_rate(r, "every rate")?;
            }
            let acfg = AliasingConfig {
                fft_size: cfg.fft_size,
                window: Window::Hann,
                duration_s: cfg.duration_s,
                amplitude: cfg.amplitude,
                ..AliasingConfig::default()
            };
            let spectra = aliasing_report(model, &circuit, &cfg.rates, &acfg)?;
            let mut summary = String::from("rate_hz,top_octave_excess_db,flagged,diverged\n");
            for s in &spectra {
                write_spectrum_csv(&a.out.join(format!("spectrum_{}.csv", number_tag(s.rate_hz))), s)?;
                summary.push_str(&format!("{},{},{},{}\n", s.rate_hz, s.top_octave_excess_db, s.flagged, s.diverged));
                println!(
                    "{:>7} Hz  top-octave excess {:.1} dB{}",
                    s.rate_hz,
                    s.top_octave_excess_db,
                    if s.flagged { "  (aliasing)" } else { "" }
                );
            }
            let path = a.out.join(ALIASING_FILE);
            fs::write(&path, summary).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        }
    }
    config::write_resolved(&a.out.join("visualize.resolved.toml"), &cfg)?;
    Ok(())
}
