use odenet_va::circuit::{
    synthesize_dataset, Circuit, Clipper1, ProgramConfig, ProgramGenerator, Split, SplitFractions,
};
use odenet_va::data::{cut_sequences, load_split};
use odenet_va::evaluation::{evaluate_long, evaluate_segmented, run_long, run_segmented, TestSet};
use odenet_va::odenet::Preset;
use odenet_va::signal::AudioSequence;
use odenet_va::training::{fit, TrainConfig};

const RATE: f64 = 44100.0;

#[test]
fn short_dataset_trains_and_scores() {
    let tmp = tempfile::tempdir().unwrap();
    let c1 = Circuit::Clipper1(Clipper1::default());
    let clip = ProgramGenerator::new(11, ProgramConfig::default()).clip(6.0, RATE);
    let manifest = synthesize_dataset(&c1, &[clip], RATE, 8, SplitFractions::default(), tmp.path()).unwrap();

    let mut cfg = TrainConfig::default();
    cfg.schedule.max_epochs = 4;
    cfg.schedule.initial_lr = 3e-3;
    let seqs = |split| cut_sequences(&load_split(tmp.path(), &manifest, split).unwrap(), &cfg.segmentation, 1).unwrap();
    let (train, val) = (seqs(Split::Train), seqs(Split::Val));

    let mut model = Preset::Stn3x4.build(0, RATE).unwrap();
    let mut again = model.clone();
    let result = fit(&mut model, &train, &val, &cfg, 5, |_| {}).unwrap();
    assert_eq!(result.history.len(), 4);
    let first = result.history[0].val_loss.unwrap();
    assert!(result.best_val_loss <= first);
    assert_eq!(model.params, result.best_params);

    let repeat = fit(&mut again, &train, &val, &cfg, 5, |_| {}).unwrap();
    assert_eq!(repeat.history, result.history);

    let inputs: Vec<AudioSequence> = load_split(tmp.path(), &manifest, Split::Test)
        .unwrap()
        .into_iter()
        .map(|c| AudioSequence::new(c.input, RATE))
        .collect();
    let test = TestSet::synthesize(&c1, &inputs, RATE).unwrap();
    let long = evaluate_long("stn", &model, &test).unwrap();
    assert!(!long.diverged);
    assert!(long.sdr_db.unwrap().is_finite());

    let (y_long, _) = run_long(&model, &test.input.samples).unwrap();
    let (y_seg, _) = run_segmented(&model, &test.input.samples, &test.target, test.len()).unwrap();
    assert_eq!(y_long, y_seg);
    let seg = evaluate_segmented("stn", &model, &test, 4096).unwrap();
    assert_eq!(seg.test_rate_hz, RATE);
}
