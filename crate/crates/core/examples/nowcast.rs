//! Trains wavelet and raw classifiers on the synthetic corpus and prints
//! held-out AUCs. Optional argument: a pipeline config JSON file.

use std::time::Instant;

use tcmra::dataset::gen_synthetic_corpus;
use tcmra::pipeline::{compare_modes, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => PipelineConfig::from_json(&std::fs::read_to_string(path)?)?,
        None => PipelineConfig::default(),
    };
    let start = Instant::now();
    let corpus = gen_synthetic_corpus(&cfg.synth)?;
    let cmp = compare_modes(&corpus, &cfg)?;
    for (name, run) in [("wavelet", &cmp.wavelet), ("raw", &cmp.raw)] {
        let last = run.model.history.last().map(|h| (h.mean_loss, h.accuracy)).unwrap_or_default();
        println!(
            "{name:8} auc {:.4}  tpr@primed {:.3}  fpr@primed {:.3}  train {} test {}  final loss {:.4} acc {:.3}",
            run.report.auc, run.report.tpr_at_primed, run.report.fpr_at_primed, run.train_samples, run.test_samples, last.0, last.1
        );
    }
    println!("auc difference {:+.4}  elapsed {:.1?}", cmp.auc_difference(), start.elapsed());
    Ok(())
}
