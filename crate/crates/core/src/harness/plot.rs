//! SVG heatmap of BER over the (SNR, SIR) grid, one panel per party and
//! strategy. Colour is log10(BER) from 1e-5 (light) to 1e-1 (dark).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::BerRecord;
use crate::error::HarnessError;

const CELL: f64 = 48.0;
const MARGIN: f64 = 60.0;
const LOG_MIN: f64 = -5.0;
const LOG_MAX: f64 = -1.0;

fn colour(ber: f64) -> String {
    let l = if ber > 0.0 { ber.log10() } else { LOG_MIN };
    let t = ((l - LOG_MIN) / (LOG_MAX - LOG_MIN)).clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(255.0, 120.0), lerp(245.0, 0.0), lerp(200.0, 40.0))
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

pub fn render_svg(records: &[BerRecord]) -> String {
    let snrs = sorted_unique(records.iter().map(|r| r.snr_db).collect());
    let sirs = sorted_unique(records.iter().map(|r| r.sir_db).collect());
    let mut panels: BTreeMap<(String, String), Vec<&BerRecord>> = BTreeMap::new();
    for r in records {
        panels
            .entry((r.strategy.to_string(), r.party.to_string()))
            .or_default()
            .push(r);
    }

    let pw = MARGIN + CELL * snrs.len() as f64 + 20.0;
    let ph = MARGIN + CELL * sirs.len() as f64 + 40.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="11">"#,
        pw * panels.len() as f64,
        ph
    );
    for (p, ((strategy, party), recs)) in panels.iter().enumerate() {
        let x0 = p as f64 * pw;
        let _ = writeln!(svg, r#"<text x="{}" y="16">BER at {party} ({strategy})</text>"#, x0 + MARGIN);
        for r in recs {
            let i = snrs.iter().position(|&s| s == r.snr_db).unwrap_or(0);
            let j = sirs.iter().position(|&s| s == r.sir_db).unwrap_or(0);
            let x = x0 + MARGIN + CELL * i as f64;
            let y = 30.0 + CELL * (sirs.len() - 1 - j) as f64;
            let _ = writeln!(
                svg,
                r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{}"><title>SNR {} dB, SIR {} dB: BER {:.3e}</title></rect>"#,
                colour(r.ber),
                r.snr_db,
                r.sir_db,
                r.ber
            );
        }
        for (i, s) in snrs.iter().enumerate() {
            let x = x0 + MARGIN + CELL * (i as f64 + 0.5);
            let _ = writeln!(svg, r#"<text x="{x}" y="{}" text-anchor="middle">{s}</text>"#, 44.0 + CELL * sirs.len() as f64);
        }
        for (j, s) in sirs.iter().enumerate() {
            let y = 30.0 + CELL * (sirs.len() - 1 - j) as f64 + CELL / 2.0 + 4.0;
            let _ = writeln!(svg, r#"<text x="{}" y="{y}" text-anchor="end">{s}</text>"#, x0 + MARGIN - 6.0);
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">SNR (dB) / SIR (dB)</text>"#,
            x0 + MARGIN + CELL * snrs.len() as f64 / 2.0,
            60.0 + CELL * sirs.len() as f64
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn emit_plot(records: &[BerRecord], path: &Path) -> Result<(), HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::Config("no records to plot".into()));
    }
    std::fs::write(path, render_svg(records)).map_err(|source| HarnessError::Io {
        path: path.to_owned(),
        source,
    })
}
