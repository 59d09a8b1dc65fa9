//! Human-readable tables.

use std::fmt::Write;

use lsa_core::evaluation::MetricsReport;

use crate::config::RunConfig;

/// Left-aligned first column, right-aligned others, two-space gutters.
pub fn aligned_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, cell) in width.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = cells
            .enumerate()
            .map(|(i, c)| if i == 0 { format!("{c:<w$}", w = width[i]) } else { format!("{c:>w$}", w = width[i]) })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut header.iter().copied());
    let rule: Vec<String> = width.iter().take(cols).map(|&w| "-".repeat(w)).collect();
    line(&mut rule.iter().map(String::as_str));
    for r in rows {
        line(&mut r.iter().map(String::as_str));
    }
    out
}

pub fn fmt_metric(x: f64) -> String {
    format!("{x:.4}")
}

/// Metric rows for one report.
pub fn metrics_table(report: &MetricsReport) -> String {
    let rows = vec![
        vec!["MSE".to_string(), fmt_metric(report.mse)],
        vec!["MAE".to_string(), fmt_metric(report.mae)],
        vec!["NDCG@10".to_string(), fmt_metric(report.ndcg_at_10)],
        vec!["test pairs".to_string(), report.n_test.to_string()],
        vec!["NDCG users".to_string(), report.n_ndcg_users.to_string()],
    ];
    aligned_table(&["metric", &report.variant], &rows)
}

/// Two reports side by side with `b − a` deltas.
pub fn comparison_table(a_name: &str, a: &MetricsReport, b_name: &str, b: &MetricsReport) -> String {
    let metric = |name: &str, x: f64, y: f64| vec![name.to_string(), fmt_metric(x), fmt_metric(y), format!("{:+.4}", y - x)];
    let rows = vec![
        metric("MSE", a.mse, b.mse),
        metric("MAE", a.mae, b.mae),
        metric("NDCG@10", a.ndcg_at_10, b.ndcg_at_10),
    ];
    aligned_table(&["metric", a_name, b_name, "delta"], &rows)
}

/// One row per variant.
pub fn ablation_table(reports: &[MetricsReport], baseline: Option<(f64, f64, f64)>) -> String {
    let mut rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| vec![r.variant.clone(), fmt_metric(r.mse), fmt_metric(r.mae), fmt_metric(r.ndcg_at_10)])
        .collect();
    if let Some((mse, mae, ndcg)) = baseline {
        rows.push(vec!["bias_baseline".into(), fmt_metric(mse), fmt_metric(mae), fmt_metric(ndcg)]);
    }
    aligned_table(&["variant", "MSE", "MAE", "NDCG@10"], &rows)
}

/// Settings that differ from `base`, or a note that none do.
pub fn config_diff(config: &RunConfig, base: &RunConfig, base_name: &str) -> String {
    let diff = config.diff(base);
    if diff.is_empty() {
        return format!("config identical to {base_name}\n");
    }
    let rows: Vec<Vec<String>> = diff.into_iter().map(|(k, b, v)| vec![k, b, v]).collect();
    aligned_table(&["setting", base_name, "run"], &rows)
}
