use std::collections::HashMap;
use std::io::Write;

use chrono::NaiveDate;
use log::{info, warn};
use rayon::prelude::*;

use super::artifacts::{self as art, EnsembleRow};
use super::{read_text, report, Stage, Workspace};
use crate::backtest::{decision_grid, performance_metrics, run_backtest, write_equity_curve, write_trade_log};
use crate::dataset::{assemble, holdout_split, purged_group_split, FeatureMatrix};
use crate::error::{Error, Result};
use crate::features::{compute_session_features, feature_registry, registry_text};
use crate::feed::{parse_snapshot_file, write_snapshot_csv, ColumnMap, Session, SyntheticFeed};
use crate::labeling::{label_distribution, label_session, write_label_csv, LabelRecord};
use crate::model::{
    auc_roc, ensemble, fit_baseline, predict, read_external_predictions, ClassifierHandle, ExternalPrediction,
    ModelKind,
};
use crate::preprocess::{derive_deltas, read_derived_csv, write_derived_csv};

/// Runs a stage body and returns the names of the files it wrote.
pub(super) fn run(ws: &Workspace, stage: Stage) -> Result<Vec<String>> {
    match stage {
        Stage::Ingest => ingest(ws),
        Stage::Preprocess => preprocess(ws),
        Stage::Features => features(ws),
        Stage::Label => label(ws),
        Stage::Dataset => dataset(ws),
        Stage::Split => split(ws),
        Stage::Train => train(ws),
        Stage::Predict => predict_stage(ws),
        Stage::Ensemble => ensemble_stage(ws),
        Stage::Backtest => backtest(ws),
        Stage::Report => report::write_report(ws),
    }
}

fn flush<W: Write>(mut w: W, name: &str) -> Result<()> {
    w.flush().map_err(|e| Error::io(name, e))
}

fn write_text(ws: &Workspace, name: &str, text: &str) -> Result<()> {
    let path = ws.path(name);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub(super) fn load_sessions(ws: &Workspace) -> Result<Vec<Session>> {
    let cfg = &ws.cfg;
    let (sessions, _) = parse_snapshot_file(
        &ws.path(art::SNAPSHOTS),
        &ColumnMap::default(),
        cfg.tick()?,
        &cfg.session_rule()?,
        0.0,
    )?;
    Ok(sessions)
}

fn ingest(ws: &Workspace) -> Result<Vec<String>> {
    let cfg = &ws.cfg;
    let tick = cfg.tick()?;
    let (sessions, summary) = match &cfg.raw_path {
        Some(raw) => {
            let (sessions, r) =
                parse_snapshot_file(raw, &ColumnMap::default(), tick, &cfg.session_rule()?, cfg.max_malformed_fraction)?;
            if r.warnings() > 0 {
                warn!("{} rows rejected by book or schedule checks", r.warnings());
            }
            let summary = vec![
                ("source", "file".to_string()),
                ("rows_read", r.rows_read.to_string()),
                ("accepted", r.accepted.to_string()),
                ("malformed", r.malformed.to_string()),
                ("crossed", r.crossed.to_string()),
                ("bad_ladder", r.bad_ladder.to_string()),
                ("duplicates", r.duplicates.to_string()),
                ("out_of_schedule", r.out_of_schedule.to_string()),
            ];
            (sessions, summary)
        }
        None => {
            let sessions: Vec<Session> = SyntheticFeed::new(cfg.seed, cfg.synth.sessions * cfg.synth.params.session_len, cfg.synth.params.clone())
                .map(|s| s.session)
                .collect();
            let rows: usize = sessions.iter().map(Session::len).sum();
            let summary = vec![
                ("source", "synthetic".to_string()),
                ("rows_read", rows.to_string()),
                ("accepted", rows.to_string()),
            ];
            (sessions, summary)
        }
    };
    if sessions.is_empty() {
        return Err(Error::DataIntegrity("no snapshots accepted".into()));
    }
    let mut summary = summary;
    summary.push(("sessions", sessions.len().to_string()));
    summary.push(("snapshots", sessions.iter().map(Session::len).sum::<usize>().to_string()));
    let mut out = art::create(&ws.path(art::SNAPSHOTS))?;
    write_snapshot_csv(&mut out, &sessions, tick)?;
    flush(out, art::SNAPSHOTS)?;
    write_text(ws, art::INGEST_REPORT, &art::write_kv(&summary))?;
    Ok(vec![art::SNAPSHOTS.into(), art::INGEST_REPORT.into()])
}

fn preprocess(ws: &Workspace) -> Result<Vec<String>> {
    let sessions = load_sessions(ws)?;
    let derived: Vec<(Session, Vec<_>)> = sessions
        .into_par_iter()
        .map(|s| {
            let d = derive_deltas(&s);
            (s, d)
        })
        .collect();
    let mut out = art::create(&ws.path(art::DERIVED))?;
    write_derived_csv(&mut out, &derived, ws.cfg.tick()?)?;
    flush(out, art::DERIVED)?;
    Ok(vec![art::DERIVED.into()])
}

fn load_derived(ws: &Workspace) -> Result<Vec<(Session, Vec<crate::preprocess::DerivedSnapshot>)>> {
    read_derived_csv(&ws.path(art::DERIVED), ws.cfg.tick()?, &ws.cfg.session_rule()?)
}

fn features(ws: &Workspace) -> Result<Vec<String>> {
    let fcfg = ws.cfg.features()?;
    let tick = ws.cfg.tick()?;
    let specs = feature_registry(&fcfg);
    let names: Vec<String> = specs.iter().map(|s| s.name.clone()).collect();
    let sessions = load_derived(ws)?;
    let frames: Vec<_> = sessions
        .par_iter()
        .map(|(s, d)| compute_session_features(s, d, &fcfg, tick))
        .collect();
    let pairs: Vec<_> = sessions.iter().map(|(s, _)| s).zip(frames.iter()).collect();
    let mut out = art::create(&ws.path(art::FEATURES))?;
    art::write_features(&mut out, &names, &pairs)?;
    flush(out, art::FEATURES)?;
    write_text(ws, art::REGISTRY, &registry_text(&specs))?;
    Ok(vec![art::FEATURES.into(), art::REGISTRY.into()])
}

fn label(ws: &Workspace) -> Result<Vec<String>> {
    let lcfg = ws.cfg.labels();
    let tick = ws.cfg.tick()?;
    let sessions = load_derived(ws)?;
    let labels: Vec<Vec<LabelRecord>> = sessions
        .par_iter()
        .map(|(s, d)| label_session(s, d, &lcfg, tick))
        .collect::<Result<_>>()?;
    let mut out = art::create(&ws.path(art::LABELS))?;
    write_label_csv(
        &mut out,
        sessions.iter().zip(&labels).map(|((s, _), l)| (s.id.as_str(), l.as_slice())),
        ws.cfg.keep_dropped,
    )?;
    flush(out, art::LABELS)?;
    let dist = label_distribution(labels.iter().flatten());
    info!("labels: {} up, {} down", dist.up, dist.down);
    Ok(vec![art::LABELS.into()])
}

fn load_matrix(ws: &Workspace) -> Result<FeatureMatrix> {
    FeatureMatrix::read_csv(art::open(&ws.path(art::MATRIX))?)
}

fn dataset(ws: &Workspace) -> Result<Vec<String>> {
    let (_, blocks) = art::read_features(&ws.path(art::FEATURES))?;
    let labels = art::read_labels(&ws.path(art::LABELS))?;
    let (matrix, r) = assemble(&[blocks], Some(&labels))?;
    let mut out = art::create(&ws.path(art::MATRIX))?;
    matrix.write_csv(&mut out)?;
    flush(out, art::MATRIX)?;
    let text = art::write_kv(&[
        ("candidates", r.candidates.to_string()),
        ("unmatched", r.unmatched.to_string()),
        ("missing_feature", r.missing_feature.to_string()),
        ("rejected_quality", r.rejected_quality.to_string()),
        ("dropped_label", r.dropped_label.to_string()),
        ("retained", r.retained.to_string()),
    ]);
    write_text(ws, art::RETENTION, &text)?;
    Ok(vec![art::MATRIX.into(), art::RETENTION.into()])
}

fn split(ws: &Workspace) -> Result<Vec<String>> {
    let matrix = load_matrix(ws)?;
    let groups = matrix.distinct_groups();
    let holdout = holdout_split(&groups, ws.cfg.holdout_fraction, ws.cfg.gap_groups)?;
    let folds = purged_group_split(&holdout.cv_groups, ws.cfg.n_folds, ws.cfg.gap_groups)?;
    write_text(ws, art::FOLDS, &art::folds_text(&folds, &holdout))?;
    Ok(vec![art::FOLDS.into()])
}

fn load_folds(
    ws: &Workspace,
) -> Result<(Vec<crate::dataset::FoldSpec<NaiveDate>>, crate::dataset::HoldoutSplit<NaiveDate>)> {
    art::parse_folds(&read_text(&ws.path(art::FOLDS))?)
}

fn load_models(ws: &Workspace, n_folds: usize) -> Result<Vec<ClassifierHandle>> {
    (1..=n_folds)
        .map(|k| {
            let path = ws.path(&art::model_file(k));
            if !path.exists() {
                return Err(Error::MissingArtifact {
                    stage: Stage::Train.to_string(),
                    path,
                });
            }
            ClassifierHandle::load(&path)
        })
        .collect()
}

/// Handle, validation AUC, final loss, train rows, validation rows.
type FoldResult = (ClassifierHandle, Option<f64>, Option<f64>, usize, usize);

fn train(ws: &Workspace) -> Result<Vec<String>> {
    let matrix = load_matrix(ws)?;
    let (folds, _) = load_folds(ws)?;
    let cfg = &ws.cfg;
    let results: Vec<FoldResult> = folds
        .par_iter()
        .map(|f| {
            let train_rows = matrix.rows_in_groups(&f.train_groups);
            let val_rows = matrix.rows_in_groups(&f.validation_groups);
            let train = matrix.select_rows(&train_rows);
            let val = matrix.select_rows(&val_rows);
            let (handle, final_loss) = match cfg.model_kind {
                ModelKind::Baseline => {
                    let (h, trace) = fit_baseline(&train, f.fold_index, &cfg.logistic())?;
                    (h, trace.losses.last().copied())
                }
                ModelKind::External => {
                    let path = cfg.external_predictions.clone().expect("validated");
                    let h = ClassifierHandle::external(f.fold_index, matrix.columns().to_vec(), path, cfg.external_model());
                    (h, None)
                }
            };
            let probs = predict(&handle, &val)?;
            let auc = auc_roc(&probs, val.labels().expect("labeled matrix")).ok();
            Ok((handle, auc, final_loss, train_rows.len(), val_rows.len()))
        })
        .collect::<Result<_>>()?;
    let mut outputs = Vec::new();
    let mut summary = Vec::new();
    for (h, auc, loss, n_train, n_val) in &results {
        let name = art::model_file(h.fold);
        h.save(&ws.path(&name))?;
        outputs.push(name);
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
        summary.push(format!(
            "fold={} train_rows={n_train} validation_rows={n_val} validation_auc={} final_loss={}",
            h.fold,
            fmt(*auc),
            fmt(*loss)
        ));
    }
    write_text(ws, art::TRAIN_REPORT, &(summary.join("\n") + "\n"))?;
    outputs.push(art::TRAIN_REPORT.into());
    Ok(outputs)
}

/// Feature-complete, non-rejected rows in the holdout days.
fn scoring_matrix(ws: &Workspace, holdout: &[NaiveDate]) -> Result<FeatureMatrix> {
    let (_, blocks) = art::read_features(&ws.path(art::FEATURES))?;
    let blocks: Vec<_> = blocks.into_iter().filter(|b| holdout.contains(&b.trading_day)).collect();
    let (m, _) = assemble(&[blocks], None)?;
    Ok(m)
}

fn predict_stage(ws: &Workspace) -> Result<Vec<String>> {
    let (folds, holdout) = load_folds(ws)?;
    let models = load_models(ws, folds.len())?;
    let rows = scoring_matrix(ws, &holdout.holdout_groups)?;
    let probs: Vec<Vec<f64>> = models.par_iter().map(|h| predict(h, &rows)).collect::<Result<_>>()?;
    let mut out = art::create(&ws.path(art::PREDICTIONS))?;
    for (i, key) in rows.keys().iter().enumerate() {
        for (h, p) in models.iter().zip(&probs) {
            let line = ExternalPrediction {
                session_id: key.session_id.to_string(),
                timestamp_ms: key.timestamp_ms,
                fold: h.fold,
                prob: p[i],
            };
            let text = serde_json::to_string(&line).expect("prediction serialises");
            writeln!(out, "{text}").map_err(|e| Error::io(art::PREDICTIONS, e))?;
        }
    }
    flush(out, art::PREDICTIONS)?;
    Ok(vec![art::PREDICTIONS.into()])
}

fn ensemble_stage(ws: &Workspace) -> Result<Vec<String>> {
    let preds = read_external_predictions(&ws.path(art::PREDICTIONS))?;
    let matrix = load_matrix(ws)?;
    let labels: HashMap<(&str, i64), u8> = matrix
        .keys()
        .iter()
        .zip(matrix.labels().expect("labeled matrix"))
        .map(|(k, &l)| ((&*k.session_id, k.timestamp_ms), l))
        .collect();
    let mut order: Vec<(String, i64)> = Vec::new();
    let mut by_key: HashMap<(String, i64), Vec<f64>> = HashMap::new();
    for p in preds {
        let key = (p.session_id, p.timestamp_ms);
        let entry = by_key.entry(key.clone()).or_default();
        if entry.is_empty() {
            order.push(key);
        }
        entry.push(p.prob);
    }
    let n_folds = ws.cfg.n_folds;
    let rows = order
        .into_iter()
        .map(|key| {
            let probs = &by_key[&key];
            if probs.len() != n_folds {
                return Err(Error::DataIntegrity(format!(
                    "{} fold predictions for {} {}, expected {n_folds}",
                    probs.len(),
                    key.0,
                    key.1
                )));
            }
            Ok(EnsembleRow {
                prob: ensemble(probs)?,
                label: labels.get(&(key.0.as_str(), key.1)).copied(),
                session_id: key.0,
                timestamp_ms: key.1,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = art::create(&ws.path(art::ENSEMBLE))?;
    art::write_ensemble(&mut out, &rows)?;
    flush(out, art::ENSEMBLE)?;
    Ok(vec![art::ENSEMBLE.into()])
}

fn backtest(ws: &Workspace) -> Result<Vec<String>> {
    let cfg = &ws.cfg;
    let tick = cfg.tick()?;
    let rows = art::read_ensemble(&ws.path(art::ENSEMBLE))?;
    let mut per_session: HashMap<&str, Vec<(i64, f64)>> = HashMap::new();
    for r in &rows {
        per_session.entry(r.session_id.as_str()).or_default().push((r.timestamp_ms, r.prob));
    }
    let sessions = load_sessions(ws)?;
    let offset = cfg.session_rule()?.utc_offset;
    let interval = cfg.decision_interval_minutes * 60_000;
    let mut points = Vec::new();
    for s in &sessions {
        if let Some(p) = per_session.get(s.id.as_str()) {
            points.extend(decision_grid(s, p, interval, offset));
        }
    }
    if points.is_empty() {
        return Err(Error::DataIntegrity("no decision points in the evaluation range".into()));
    }
    let bt = cfg.backtest();
    let result = run_backtest(&points, &bt)?;
    let metrics = performance_metrics(&result.curve, bt.initial_equity)?;
    let mut out = art::create(&ws.path(art::TRADES))?;
    write_trade_log(&mut out, &result.trades, tick)?;
    flush(out, art::TRADES)?;
    let mut out = art::create(&ws.path(art::EQUITY))?;
    write_equity_curve(&mut out, &result.curve, tick)?;
    flush(out, art::EQUITY)?;
    let closes = result
        .trades
        .iter()
        .filter(|t| t.action != crate::backtest::TradeAction::Open)
        .count();
    let summary = art::write_kv(&[
        ("decision_points", points.len().to_string()),
        ("round_trips", closes.to_string()),
        ("total_return", metrics.total_return.to_string()),
        ("max_drawdown", metrics.max_drawdown.to_string()),
        ("sharpe", metrics.sharpe.map_or("-".into(), |s| s.to_string())),
        ("trading_days", metrics.trading_days.to_string()),
        ("final_equity", result.curve.last().map_or(bt.initial_equity, |p| p.equity).to_string()),
        (
            "liquidated_at",
            result.liquidated_at.map_or("-".into(), |t| t.to_string()),
        ),
    ]);
    write_text(ws, art::BACKTEST_REPORT, &summary)?;
    Ok(vec![art::TRADES.into(), art::EQUITY.into(), art::BACKTEST_REPORT.into()])
}
