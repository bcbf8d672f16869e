//! Config-driven experiments: datasets, training runs with checkpoints,
//! prediction reports and the numerical demos behind the `nml` binary.

mod check;
mod config;
mod data;
mod demo;
mod run;
mod svg;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

pub use check::{check_descriptors, run_check, sample_batches, CheckReport, CheckRow};
pub use config::{ArchRef, CheckSettings, DatasetSpec, DescriptorFilter, ExperimentConfig, Tolerances, CONFIG_VERSION};
pub use data::{load_csv, load_dataset, load_idx, synthetic, write_idx};
pub use demo::{quadratic_run, run_demo, DemoKind, QuadraticRun, OSCILLATOR_CASES, QUADRATIC_ETAS, QUADRATIC_START, QUADRATIC_STEPS};
pub use run::{
    checkpoint_path, run_compare, run_train, write_csv, DescriptorReport, Environment, RunReport, SymmetryCheckSummary,
    CONFIG_FILE, CSV_FILE, LOG_FILE, REPORT_FILE,
};
pub use svg::{line_chart, Line};

use crate::net::{census, ArchSpec, CensusKind};

/// Human-readable census with the per-rule breakdown.
pub fn render_census(spec: &ArchSpec) -> String {
    let c = census(spec);
    let name = if spec.name.is_empty() { "(unnamed)" } else { spec.name.as_str() };
    let mut out = format!(
        "{name}\n  scale       {}\n  rescale     {}\n  translation {}\n  parameters  {}\n",
        c.n_scale, c.n_rescale, c.n_translation, c.n_params
    );
    for kind in [CensusKind::Scale, CensusKind::Rescale, CensusKind::Translation] {
        for e in c.breakdown.iter().filter(|e| e.kind == kind) {
            let layer = e.layer.map(|l| format!(" (layer {l})")).unwrap_or_default();
            out.push_str(&format!("    {:<11} {:>8}  {}{layer}\n", format!("{kind:?}").to_lowercase(), e.count, e.rule));
        }
    }
    out
}

/// Worker count: `NML_THREADS` if set and positive, else the machine's
/// parallelism.
pub fn worker_count() -> usize {
    std::env::var("NML_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Apply `f` to every item on up to `workers` threads; results keep the
/// input order.
pub fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("result slot").expect("every item processed"))
        .collect()
}
