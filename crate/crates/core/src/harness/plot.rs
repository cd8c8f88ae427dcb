use super::sweep::BerRecord;
use crate::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// One point of a BER curve.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub snr_db: f64,
    pub series: String,
    pub ber: f64,
}

const COLORS: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn rows(records: &[BerRecord]) -> Vec<PlotRow> {
    records
        .iter()
        .map(|r| PlotRow {
            snr_db: r.snr_db,
            series: r.precision.to_string(),
            ber: r.ber,
        })
        .collect()
}

/// Series names in first-seen order.
fn series_names(rows: &[PlotRow]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for r in rows {
        if !names.contains(&r.series) {
            names.push(r.series.clone());
        }
    }
    names
}

/// BER against SNR on a log axis. Zero-BER points have no log coordinate
/// and are left out.
pub fn render_svg(records: &[BerRecord]) -> String {
    let rows = rows(records);
    let (w, h, left, right, top, bottom) = (640.0, 440.0, 70.0, 130.0, 20.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let snr_min = rows.iter().map(|r| r.snr_db).fold(f64::INFINITY, f64::min);
    let snr_max = rows.iter().map(|r| r.snr_db).fold(f64::NEG_INFINITY, f64::max);
    let (snr_min, snr_max) = if snr_min < snr_max {
        (snr_min, snr_max)
    } else if snr_min.is_finite() {
        (snr_min - 1.0, snr_min + 1.0)
    } else {
        (0.0, 1.0)
    };
    let positive = rows.iter().filter(|r| r.ber > 0.0);
    let dec_min = positive
        .clone()
        .map(|r| r.ber.log10().floor())
        .fold(0.0, f64::min)
        .min(-1.0);
    let dec_max = positive.map(|r| r.ber.log10().ceil()).fold(dec_min + 1.0, f64::max);
    let x = |s: f64| left + (s - snr_min) / (snr_max - snr_min) * pw;
    let y = |b: f64| top + (dec_max - b.log10()) / (dec_max - dec_min) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let mut d = dec_min;
    while d <= dec_max {
        let yy = y(10f64.powf(d));
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"##,
            left + pw,
            left - 6.0,
            yy + 4.0
        );
        d += 1.0;
    }
    let mut snrs: Vec<f64> = rows.iter().map(|r| r.snr_db).collect();
    snrs.sort_by(f64::total_cmp);
    snrs.dedup();
    for v in &snrs {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{v}</text>"#,
            x(*v),
            top + ph + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">SNR (dB)</text>"#,
        left + pw / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">BER</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );
    for (i, name) in series_names(&rows).iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| &r.series == name && r.ber > 0.0)
            .map(|r| (x(r.snr_db), y(r.ber)))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path: Vec<String> = pts.iter().map(|(a, b)| format!("{a:.2},{b:.2}")).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            path.join(" ")
        );
        for (a, b) in &pts {
            let _ = writeln!(s, r#"<circle cx="{a:.2}" cy="{b:.2}" r="3" fill="{color}"/>"#);
        }
        let ly = top + 14.0 + 18.0 * i as f64;
        let lx = left + pw + 12.0;
        let label = if name == "digital" { name.clone() } else { format!("b = {name}") };
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{ly:.2}">{label}</text>"#,
            ly - 4.0,
            lx + 20.0,
            ly - 4.0,
            lx + 26.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `snr_db,series,ber` rows to `csv_path` and, if given, the SVG
/// rendering to `svg_path`.
pub fn emit_plot_data(records: &[BerRecord], csv_path: &Path, svg_path: Option<&Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(csv_path).map_err(|e| Error::Io {
        path: csv_path.display().to_string(),
        message: e.to_string(),
    })?;
    let fail = |e: csv::Error| Error::Config(format!("csv: {e}"));
    w.write_record(["snr_db", "series", "ber"]).map_err(fail)?;
    for r in rows(records) {
        w.write_record([r.snr_db.to_string(), r.series, format!("{:e}", r.ber)])
            .map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(csv_path, e))?;
    if let Some(p) = svg_path {
        std::fs::write(p, render_svg(records)).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

/// Reads a file written by [`emit_plot_data`].
pub fn read_plot_csv(path: &Path) -> Result<Vec<PlotRow>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let bad = || Error::Config(format!("csv: malformed plot row in {}", path.display()));
    rd.records()
        .map(|row| {
            let row = row.map_err(|e| Error::Config(format!("csv: {e}")))?;
            Ok(PlotRow {
                snr_db: row.get(0).and_then(|v| v.parse().ok()).ok_or_else(bad)?,
                series: row.get(1).ok_or_else(bad)?.to_string(),
                ber: row.get(2).and_then(|v| v.parse().ok()).ok_or_else(bad)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crossbar::Bits;
    use crate::harness::Precision;

    fn rec(snr: f64, p: Precision, ber: f64) -> BerRecord {
        BerRecord {
            snr_db: snr,
            precision: p,
            trials: 1,
            bits_sent: 1000,
            bit_errors: (ber * 1000.0) as u64,
            ber,
            wall_time: 0.0,
        }
    }

    #[test]
    fn round_trip_and_svg() {
        let b6 = Precision::Memristor(Bits::Finite(6));
        let recs = vec![
            rec(4.0, b6, 0.1),
            rec(4.0, Precision::Digital, 0.08),
            rec(8.0, b6, 0.01),
            rec(8.0, Precision::Digital, 0.0),
        ];
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("ber.csv");
        let svg = dir.path().join("ber.svg");
        emit_plot_data(&recs, &csv, Some(&svg)).unwrap();
        let back = read_plot_csv(&csv).unwrap();
        assert_eq!(back.len(), 4);
        assert_eq!(back[0].series, "6");
        assert_eq!(back[3].ber, 0.0);
        assert_eq!(back[2].ber, 0.01);
        let text = std::fs::read_to_string(svg).unwrap();
        assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>"));
        assert_eq!(text.matches("<polyline").count(), 2);
        assert_eq!(text.matches("<circle").count(), 3);
    }

    #[test]
    fn empty_records_render() {
        assert!(render_svg(&[]).contains("</svg>"));
    }
}
