//! Human-readable report rendering.

use std::fmt::Write as _;

use mvmc_core::{MetricSummary, RunReport, SeedResult, SplitMetrics};

fn summary_cell(summary: &Option<MetricSummary>) -> String {
    match summary {
        Some(s) => format!("{:.4} ± {:.4}", s.mean, s.std_dev),
        None => "n/a".to_string(),
    }
}

fn metric_cells(metrics: &Option<SplitMetrics>) -> (String, String, String) {
    match metrics {
        Some(m) => (
            format!("{:.4}", m.m_ap.mean),
            format!("{:.4}", m.m_auc.mean),
            format!("{:.4}", m.hamming_loss),
        ),
        None => ("n/a".into(), "n/a".into(), "n/a".into()),
    }
}

fn weights_cell(seed: &SeedResult) -> String {
    match &seed.theta {
        Some(theta) => {
            let parts: Vec<String> = theta.iter().map(|w| format!("{w:.3}")).collect();
            format!("[{}]", parts.join(", "))
        }
        None => "-".to_string(),
    }
}

/// Render the summary and per-seed tables.
pub fn human_report(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "experiment: {} views, {} labels, {} samples, decision threshold {:.2}",
        report.num_views, report.num_labels, report.num_samples, report.threshold
    );
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<8}{:<8}{:<20}{:<20}{:<20}",
        "method", "seeds", "test mAP", "test mAUC", "test HL"
    );
    for method in &report.methods {
        let _ = writeln!(
            out,
            "{:<8}{:<8}{:<20}{:<20}{:<20}",
            method.method.to_string(),
            method.seeds.len(),
            summary_cell(&method.test_map),
            summary_cell(&method.test_mauc),
            summary_cell(&method.test_hamming),
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "per-seed results (final test split)");
    let _ = writeln!(
        out,
        "{:<8}{:<8}{:<10}{:<10}{:<10}{:<14}weights",
        "method", "seed", "mAP", "mAUC", "HL", "hyperparams"
    );
    for method in &report.methods {
        for seed in &method.seeds {
            let (map, mauc, hl) = metric_cells(&seed.metrics.test);
            let hp = format!(
                "λ={} γ={} η={}",
                seed.hyperparams.lambda, seed.hyperparams.gamma, seed.hyperparams.eta
            );
            let _ = writeln!(
                out,
                "{:<8}{:<8}{:<10}{:<10}{:<10}{:<22}{}",
                method.method.to_string(),
                seed.seed,
                map,
                mauc,
                hl,
                hp,
                weights_cell(seed),
            );
            if !seed.excluded_labels.is_empty() {
                let _ = writeln!(
                    out,
                    "        note: labels {:?} excluded from weight learning (single class)",
                    seed.excluded_labels
                );
            }
        }
    }
    out
}
