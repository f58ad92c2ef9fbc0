//! Temporary diagnostic: dump the validation trajectory of the end-to-end
//! sheet training run.

use lift3d::geometry::WeakPerspectiveCamera;
use lift3d::pipeline::{evaluate, train_split, TrainingConfig};
use lift3d::rng::{self, TAG_EVAL};
use lift3d::synth::{generate_synthetic, SyntheticFamilySpec};

fn main() {
    let epochs: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(60);
    let patience: usize = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(100_000);
    let seed: u64 = std::env::args()
        .nth(3)
        .and_then(|s| s.parse().ok())
        .unwrap_or(7);

    let sheet = generate_synthetic(&SyntheticFamilySpec::sheet_default()).unwrap();
    let all: Vec<_> = sheet.shapes().cloned().collect();
    let (train_s, rest) = all.split_at(300);
    let (val_s, test_s) = rest.split_at(60);

    let config = TrainingConfig {
        epochs,
        patience,
        seed,
        ..TrainingConfig::default()
    };
    let t0 = std::time::Instant::now();
    let (model, history) = train_split(train_s, val_s, &config).unwrap();
    for (i, v) in history.val_errors.iter().enumerate() {
        println!("epoch {:4}  val {:.5}", i + 1, v);
    }
    let cam = WeakPerspectiveCamera::new(1.0).unwrap();
    let mut eval_rng = rng::derive(7, &[TAG_EVAL]);
    let report = evaluate(&model, test_s, &cam, 0.0, 0, &mut eval_rng).unwrap();
    println!(
        "best_epoch {} best_val {:.5} epochs_run {} stopped_early {} clean_test {:.5} ({:.0}s)",
        history.best_epoch,
        history.best_val_error,
        history.epochs_run,
        history.stopped_early,
        report.mean_error,
        t0.elapsed().as_secs_f64()
    );
}
