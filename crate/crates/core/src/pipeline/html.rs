//! Self-contained HTML page for one report: HR trend, stage timeline and
//! metric tables. Output depends only on the report value.

use std::fmt::Write;

use super::OvernightReport;
use crate::Stage;

const WIDTH: f64 = 960.0;
const PLOT_H: f64 = 180.0;
const MARGIN: f64 = 40.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn num(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.2}"),
        _ => "n/a".into(),
    }
}

fn x_of(i: usize, n: usize) -> f64 {
    MARGIN + (WIDTH - 2.0 * MARGIN) * i as f64 / n.max(1) as f64
}

fn hours_axis(out: &mut String, n: usize, offset_epochs: usize, epoch_s: f64, y: f64) {
    let per_hour = (3600.0 / epoch_s).round() as usize;
    if per_hour == 0 {
        return;
    }
    let first = per_hour - offset_epochs % per_hour;
    for i in (first % per_hour..=n).step_by(per_hour) {
        let h = (offset_epochs + i) as f64 * epoch_s / 3600.0;
        let x = x_of(i, n);
        let _ = write!(
            out,
            "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{y:.1}\" class=\"grid\"/>\
             <text x=\"{x:.1}\" y=\"{:.1}\" class=\"tick\">{h:.0} h</text>",
            MARGIN / 2.0,
            y + 14.0
        );
    }
}

fn hr_panel(r: &OvernightReport) -> String {
    let n = r.hr_trend.len();
    let vals: Vec<f64> = r.hr_trend.iter().flatten().copied().collect();
    let mut out = format!("<svg viewBox=\"0 0 {WIDTH} {}\" role=\"img\" aria-label=\"heart rate trend\">", PLOT_H + 30.0);
    if vals.is_empty() {
        out.push_str("<text x=\"50%\" y=\"50%\" class=\"tick\">no heart-rate data</text></svg>");
        return out;
    }
    let lo = (vals.iter().copied().fold(f64::INFINITY, f64::min) / 10.0).floor() * 10.0;
    let hi = (vals.iter().copied().fold(f64::NEG_INFINITY, f64::max) / 10.0).ceil() * 10.0;
    let hi = if hi > lo { hi } else { lo + 10.0 };
    let top = MARGIN / 2.0;
    let y_of = |v: f64| top + (PLOT_H - top) * (hi - v) / (hi - lo);
    for v in [lo, (lo + hi) / 2.0, hi] {
        let y = y_of(v);
        let _ = write!(
            out,
            "<line x1=\"{MARGIN}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" class=\"grid\"/>\
             <text x=\"4\" y=\"{:.1}\" class=\"tick\">{v:.0}</text>",
            WIDTH - MARGIN,
            y + 4.0
        );
    }
    hours_axis(&mut out, n, r.epoch_offset, r.epoch_seconds, PLOT_H);
    let mut segment = String::new();
    let flush = |seg: &mut String, out: &mut String| {
        if !seg.is_empty() {
            let _ = write!(out, "<polyline class=\"hr\" points=\"{}\"/>", seg.trim_end());
            seg.clear();
        }
    };
    for (i, v) in r.hr_trend.iter().enumerate() {
        match v {
            Some(v) => {
                let _ = write!(segment, "{:.1},{:.1} ", x_of(i, n) + 0.5 * (x_of(1, n) - x_of(0, n)), y_of(*v));
            }
            None => flush(&mut segment, &mut out),
        }
    }
    flush(&mut segment, &mut out);
    out.push_str("</svg>");
    out
}

/// Rows top to bottom: W, REM, N1, N2, N3.
fn stage_row(s: Stage) -> usize {
    match s {
        Stage::W => 0,
        Stage::Rem => 1,
        Stage::N1 => 2,
        Stage::N2 => 3,
        Stage::N3 => 4,
    }
}

fn stage_panel(r: &OvernightReport) -> String {
    let n = r.hypnogram.len();
    let row_h = (PLOT_H - MARGIN / 2.0) / 5.0;
    let mut out = format!("<svg viewBox=\"0 0 {WIDTH} {}\" role=\"img\" aria-label=\"sleep stage timeline\">", PLOT_H + 30.0);
    for (k, name) in ["W", "REM", "N1", "N2", "N3"].iter().enumerate() {
        let _ = write!(
            out,
            "<text x=\"4\" y=\"{:.1}\" class=\"tick\">{name}</text>",
            MARGIN / 2.0 + row_h * (k as f64 + 0.6)
        );
    }
    if n == 0 {
        out.push_str("<text x=\"50%\" y=\"50%\" class=\"tick\">no stage predictions</text></svg>");
        return out;
    }
    hours_axis(&mut out, n, r.epoch_offset, r.epoch_seconds, PLOT_H);
    let mut i = 0;
    while i < n {
        let s = r.hypnogram[i];
        let mut j = i;
        while j < n && r.hypnogram[j] == s {
            j += 1;
        }
        let _ = write!(
            out,
            "<rect class=\"st-{}\" x=\"{:.2}\" y=\"{:.1}\" width=\"{:.2}\" height=\"{:.1}\"/>",
            s.as_str(),
            x_of(i, n),
            MARGIN / 2.0 + row_h * stage_row(s) as f64,
            x_of(j, n) - x_of(i, n),
            row_h
        );
        i = j;
    }
    out.push_str("</svg>");
    out
}

fn table(title: &str, rows: &[(String, String)]) -> String {
    let mut out = format!("<table><caption>{}</caption><tbody>", esc(title));
    for (k, v) in rows {
        let _ = write!(out, "<tr><th>{}</th><td>{}</td></tr>", esc(k), esc(v));
    }
    out.push_str("</tbody></table>");
    out
}

const STYLE: &str = "body{font-family:system-ui,sans-serif;margin:1.5rem;color:#222}\
h1{font-size:1.3rem}h2{font-size:1.05rem;margin-top:1.5rem}\
svg{width:100%;max-width:960px;background:#fafafa;border:1px solid #ddd}\
.grid{stroke:#ddd;stroke-width:1}.tick{font-size:11px;fill:#666}\
.hr{fill:none;stroke:#c0392b;stroke-width:1.2}\
.st-W{fill:#f1c40f}.st-REM{fill:#e74c3c}.st-N1{fill:#85c1e9}.st-N2{fill:#3498db}.st-N3{fill:#1b4f72}\
.tables{display:flex;flex-wrap:wrap;gap:1.5rem;align-items:flex-start}\
table{border-collapse:collapse;font-size:13px}caption{text-align:left;font-weight:600;padding:4px 0}\
th,td{border:1px solid #ddd;padding:2px 8px;text-align:left}td{text-align:right;font-variant-numeric:tabular-nums}\
.status-partial,.status-failed{color:#c0392b}";

pub fn render_html(r: &OvernightReport) -> String {
    let status = serde_json::to_value(r.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    let mut out = String::with_capacity(64 * 1024);
    let _ = write!(
        out,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n\
         <title>Overnight report: {id}</title>\n<style>{STYLE}</style>\n</head>\n<body>\n\
         <h1>Overnight sleep and cardiac report: {id}</h1>\n\
         <p>Status: <span class=\"status-{status}\">{status}</span>. Analysed {n} epochs \
         ({h:.2} h) from epoch {off}; model source: {src}.</p>\n",
        id = esc(&r.recording_id),
        n = r.n_epochs,
        h = r.n_epochs as f64 * r.epoch_seconds / 3600.0,
        off = r.epoch_offset,
        src = esc(&r.provenance.model.source),
    );
    if !r.errors.is_empty() {
        out.push_str("<ul class=\"errors\">");
        for e in &r.errors {
            let _ = write!(out, "<li>{}: {}</li>", esc(&e.stage), esc(&e.message));
        }
        out.push_str("</ul>\n");
    }
    out.push_str("<h2>Heart rate (bpm per epoch)</h2>\n");
    out.push_str(&hr_panel(r));
    out.push_str("\n<h2>Sleep stages</h2>\n");
    out.push_str(&stage_panel(r));
    out.push_str("\n<h2>Metrics</h2>\n<div class=\"tables\">");
    if let Some(m) = &r.sleep_metrics {
        let rows: Vec<_> = m.entries().iter().map(|(k, v)| (k.to_string(), num(*v))).collect();
        out.push_str(&table("Sleep", &rows));
    }
    if let Some(c) = &r.cardiac_metrics {
        let rows: Vec<_> = c.entries().map(|(k, v)| (k.to_string(), num(v))).collect();
        out.push_str(&table("Cardiac", &rows));
    }
    let ev = &r.events;
    let count = |v: Option<usize>| v.map_or("n/a".to_string(), |c| c.to_string());
    let events = vec![
        ("Arousal epochs".to_string(), count(ev.arousal_epochs)),
        ("Respiratory epochs".to_string(), count(ev.respiratory_epochs)),
        ("Desaturations >= 3%".to_string(), count(ev.desaturations_3)),
        ("Desaturations >= 4%".to_string(), count(ev.desaturations_4)),
        ("Detected beats".to_string(), count(ev.detected_beats)),
        ("PAC per hour".to_string(), num(ev.pac_per_hour)),
        ("PVC per hour".to_string(), num(ev.pvc_per_hour)),
        ("Wake probability".to_string(), num(ev.wake_probability)),
    ];
    out.push_str(&table("Events", &events));
    let p = &r.provenance;
    let mut prov = vec![
        ("Package".to_string(), format!("{} {}", p.package, p.version)),
        ("Config hash".to_string(), p.config_hash.clone()),
        ("Input digest".to_string(), p.input_digest.clone()),
        ("Model".to_string(), p.model.source.clone()),
    ];
    if let Some(d) = &p.model.digest {
        prov.push(("Model digest".into(), d.clone()));
    }
    for (k, v) in &p.seeds {
        prov.push((format!("Seed ({k})"), v.to_string()));
    }
    if let Some(q) = &r.qc {
        let reasons = serde_json::to_string(&q.reasons).unwrap_or_default();
        prov.push(("QC".into(), if q.included { "included".into() } else { format!("excluded {reasons}") }));
    }
    out.push_str(&table("Provenance", &prov));
    out.push_str("</div>\n</body>\n</html>\n");
    out
}
