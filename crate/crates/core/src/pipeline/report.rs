use std::fmt::Write as _;
use std::io::BufRead;

use super::artifacts as art;
use super::{read_text, Workspace};
use crate::dataset::{correlation_report, FeatureMatrix};
use crate::error::{Error, Result};
use crate::labeling::Target;
use crate::model::classification_report;

fn section(out: &mut String, title: &str) {
    let _ = writeln!(out, "\n## {title}");
}

fn row(out: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "{key:<22}{value}");
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or("-".to_string(), |x| format!("{x:.digits$}"))
}

fn kv_block(out: &mut String, text: &str, keys: &[&str]) {
    let kv = art::read_kv(text);
    for k in keys {
        if let Some(v) = kv.get(*k) {
            row(out, k, v);
        }
    }
}

/// (timestamp, equity, mark price) from the equity curve file.
fn read_equity(ws: &Workspace) -> Result<Vec<(i64, f64, f64)>> {
    let path = ws.path(art::EQUITY);
    let mut out = Vec::new();
    for (n, line) in art::open(&path)?.lines().enumerate().skip(1) {
        let line = line.map_err(|e| Error::io(&path, e))?;
        let p: Vec<&str> = line.split(',').collect();
        let parsed = (|| Some((p.first()?.parse().ok()?, p.get(1)?.parse().ok()?, p.get(3)?.parse().ok()?)))();
        out.push(parsed.ok_or_else(|| Error::DataIntegrity(format!("{} line {}", path.display(), n + 1)))?);
    }
    Ok(out)
}

pub(super) fn write_report(ws: &Workspace) -> Result<Vec<String>> {
    let mut out = String::from("# snapflow run report\n");

    section(&mut out, "Data");
    kv_block(
        &mut out,
        &read_text(&ws.path(art::INGEST_REPORT))?,
        &["source", "sessions", "snapshots", "rows_read", "malformed", "crossed", "bad_ladder", "duplicates", "out_of_schedule"],
    );

    section(&mut out, "Label distribution");
    let labels = art::read_labels(&ws.path(art::LABELS))?;
    let count = |t: Target| labels.iter().flat_map(|b| &b.targets).filter(|&&x| x == t).count();
    let (up, down) = (count(Target::Up), count(Target::Down));
    let total = (up + down).max(1) as f64;
    row(&mut out, "up", format!("{up} ({:.2}%)", 100.0 * up as f64 / total));
    row(&mut out, "down", format!("{down} ({:.2}%)", 100.0 * down as f64 / total));
    row(&mut out, "theta", ws.cfg.theta);
    row(&mut out, "horizon_snapshots", ws.cfg.horizon_snapshots);

    section(&mut out, "Dataset");
    kv_block(
        &mut out,
        &read_text(&ws.path(art::RETENTION))?,
        &["candidates", "unmatched", "missing_feature", "rejected_quality", "dropped_label", "retained"],
    );
    let matrix = FeatureMatrix::read_csv(art::open(&ws.path(art::MATRIX))?)?;
    row(&mut out, "features", matrix.n_cols());
    row(&mut out, "groups", matrix.distinct_groups().len());

    section(&mut out, "Feature correlation distribution");
    let corr = correlation_report(&matrix)?;
    match corr.summary {
        Some(s) => {
            row(&mut out, "count", s.count);
            row(&mut out, "mean", format!("{:.6}", s.mean));
            row(&mut out, "std", format!("{:.6}", s.std));
            row(&mut out, "max", format!("{:.6}", s.max));
            row(&mut out, "25%", format!("{:.6}", s.q25));
            row(&mut out, "50%", format!("{:.6}", s.q50));
            row(&mut out, "75%", format!("{:.6}", s.q75));
            row(&mut out, "min", format!("{:.6}", s.min));
        }
        None => row(&mut out, "count", 0),
    }
    let mut ranked: Vec<(&String, f64)> = corr.per_feature.iter().filter_map(|(n, r)| r.map(|r| (n, r))).collect();
    ranked.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then_with(|| a.0.cmp(b.0)));
    for (name, r) in ranked.iter().take(5) {
        row(&mut out, &format!("top {name}"), format!("{r:.6}"));
    }

    section(&mut out, "Fold training");
    for line in read_text(&ws.path(art::TRAIN_REPORT))?.lines() {
        let _ = writeln!(out, "{line}");
    }

    section(&mut out, "Holdout classification");
    let ens = art::read_ensemble(&ws.path(art::ENSEMBLE))?;
    let labeled: Vec<(f64, u8)> = ens.iter().filter_map(|r| r.label.map(|l| (r.prob, l))).collect();
    row(&mut out, "scored_rows", ens.len());
    row(&mut out, "labeled_rows", labeled.len());
    if !labeled.is_empty() {
        let (p, y): (Vec<f64>, Vec<u8>) = labeled.into_iter().unzip();
        let r = classification_report(&p, &y, 0.5)?;
        row(&mut out, "accuracy", format!("{:.6}", r.accuracy));
        row(&mut out, "recall", opt(r.recall, 6));
        row(&mut out, "specificity", opt(r.specificity, 6));
        row(&mut out, "pearson", opt(r.pearson, 6));
        row(&mut out, "auc", opt(r.auc, 6));
        let c = r.confusion;
        row(&mut out, "confusion tp fn", format!("{} {}", c.true_positive, c.false_negative));
        row(&mut out, "confusion fp tn", format!("{} {}", c.false_positive, c.true_negative));
    }

    section(&mut out, "Backtest");
    let bt = art::read_kv(&read_text(&ws.path(art::BACKTEST_REPORT))?);
    let num = |k: &str| bt.get(k).and_then(|v| v.parse::<f64>().ok());
    row(&mut out, "decision_points", bt.get("decision_points").map_or("-", String::as_str));
    row(&mut out, "round_trips", bt.get("round_trips").map_or("-", String::as_str));
    row(&mut out, "total_return", opt(num("total_return").map(|v| v * 100.0), 4) + "%");
    row(&mut out, "max_drawdown", opt(num("max_drawdown").map(|v| v * 100.0), 4) + "%");
    row(&mut out, "sharpe", opt(num("sharpe"), 4));
    row(&mut out, "final_equity", opt(num("final_equity"), 2));
    row(&mut out, "liquidated_at", bt.get("liquidated_at").map_or("-", String::as_str));
    row(&mut out, "gamma", ws.cfg.gamma);
    row(&mut out, "margin_ratio", ws.cfg.margin_ratio);

    std::fs::write(ws.path(art::REPORT), &out).map_err(|e| Error::io(ws.path(art::REPORT), e))?;
    let svg = render_svg(&read_equity(ws)?);
    std::fs::write(ws.path(art::REPORT_SVG), svg).map_err(|e| Error::io(ws.path(art::REPORT_SVG), e))?;
    Ok(vec![art::REPORT.into(), art::REPORT_SVG.into()])
}

fn polyline(values: &[f64], x0: f64, y0: f64, w: f64, h: f64) -> String {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let n = values.len().max(2) - 1;
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let x = x0 + w * i as f64 / n as f64;
            let y = y0 + h - h * (v - lo) / span;
            format!("{x:.2},{y:.2}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Two stacked panels: strategy equity and contract price at each decision point.
pub fn render_svg(curve: &[(i64, f64, f64)]) -> String {
    let (w, h, pad) = (800.0, 240.0, 40.0);
    let equity: Vec<f64> = curve.iter().map(|c| c.1).collect();
    let price: Vec<f64> = curve.iter().map(|c| c.2).collect();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="12">"#,
        w + 2.0 * pad,
        2.0 * h + 3.0 * pad
    );
    let panels = [("Strategy equity", &equity, "#1f77b4", pad), ("Contract price", &price, "#d62728", 2.0 * pad + h)];
    for (title, values, colour, top) in panels {
        let _ = writeln!(s, r##"<rect x="{pad}" y="{top}" width="{w}" height="{h}" fill="none" stroke="#999"/>"##);
        let _ = writeln!(s, r#"<text x="{pad}" y="{}">{title}</text>"#, top - 6.0);
        if let (Some(lo), Some(hi)) = (
            values.iter().copied().reduce(f64::min),
            values.iter().copied().reduce(f64::max),
        ) {
            let _ = writeln!(s, r#"<text x="{}" y="{}">{hi:.2}</text>"#, pad + 4.0, top + 14.0);
            let _ = writeln!(s, r#"<text x="{}" y="{}">{lo:.2}</text>"#, pad + 4.0, top + h - 4.0);
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{colour}" stroke-width="1.2" points="{}"/>"#,
                polyline(values, pad, top, w, h)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
