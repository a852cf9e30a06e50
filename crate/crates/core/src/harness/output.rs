use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::cdf::SpuriousCdf;
use super::sweep::{MethodCurve, SweepResult};
use crate::error::{Error, Result};
use crate::selection::{Method, ScoreRow};

#[derive(Debug, Serialize, Deserialize)]
struct SweepRow {
    param_value: f64,
    method: Method,
    hits: usize,
    trials: usize,
    hit_prob: f64,
    #[serde(default)]
    failed: usize,
}

/// `param_value,method,hits,trials,hit_prob,failed`, grid-major.
pub fn write_sweep_csv<W: Write>(w: W, sweep: &SweepResult) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for (g, &x) in sweep.grid.iter().enumerate() {
        for c in &sweep.curves {
            out.serialize(SweepRow {
                param_value: x,
                method: c.method,
                hits: c.hits[g],
                trials: c.trials[g],
                hit_prob: c.hit_prob[g],
                failed: c.failed[g],
            })?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Inverse of [`write_sweep_csv`]; the `failed` column is optional.
pub fn read_sweep_csv<R: Read>(r: R) -> Result<SweepResult> {
    let mut grid: Vec<f64> = Vec::new();
    let mut curves: Vec<MethodCurve> = Vec::new();
    for row in csv::Reader::from_reader(r).deserialize::<SweepRow>() {
        let row = row?;
        let g = match grid.iter().position(|&x| x == row.param_value) {
            Some(g) => g,
            None => {
                grid.push(row.param_value);
                grid.len() - 1
            }
        };
        let c = match curves.iter().position(|c| c.method == row.method) {
            Some(i) => &mut curves[i],
            None => {
                curves.push(MethodCurve {
                    method: row.method,
                    hits: Vec::new(),
                    trials: Vec::new(),
                    failed: Vec::new(),
                    hit_prob: Vec::new(),
                });
                curves.last_mut().unwrap()
            }
        };
        if c.hits.len() != g {
            return Err(Error::Parse(format!(
                "{} has rows out of grid order at param_value {}",
                row.method, row.param_value
            )));
        }
        c.hits.push(row.hits);
        c.trials.push(row.trials);
        c.failed.push(row.failed);
        c.hit_prob.push(row.hit_prob);
    }
    if grid.is_empty() {
        return Err(Error::Parse("sweep CSV has no rows".into()));
    }
    if let Some(c) = curves.iter().find(|c| c.hits.len() != grid.len()) {
        return Err(Error::Parse(format!(
            "{} covers {} of {} grid points",
            c.method,
            c.hits.len(),
            grid.len()
        )));
    }
    Ok(SweepResult {
        parameter: None,
        grid,
        curves,
        trials: None,
        master_seed: None,
    })
}

pub fn write_auc_csv<W: Write>(w: W, auc: &[(Method, f64)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["method", "auc"])?;
    for (m, a) in auc {
        out.write_record([m.name(), &a.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// `L,magnitude,cdf`; `L` values with an empty spurious pool emit no rows.
pub fn write_cdf_csv<W: Write>(w: W, cdf: &SpuriousCdf) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["L", "magnitude", "cdf"])?;
    for (i, l) in cdf.l_grid.iter().enumerate() {
        for (x, f) in cdf.points.iter().zip(&cdf.cdf[i]) {
            out.write_record([l.to_string(), x.to_string(), f.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `trial_id,method,mode_index,score,label,eigval_re,eigval_im`.
pub fn write_scores_csv<W: Write>(w: W, rows: &[ScoreRow]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(true).from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

/// Self-contained SVG line chart. Non-finite points are skipped.
pub fn line_plot_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    y_range: Option<(f64, f64)>,
) -> String {
    let (w, h) = (720.0, 480.0);
    let (left, right, top, bottom) = (70.0, 190.0, 40.0, 60.0);
    let finite = |p: &&(f64, f64)| p.0.is_finite() && p.1.is_finite();
    let all: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().filter(finite).copied())
        .collect();
    let span = |v: Vec<f64>| -> (f64, f64) {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        match (lo.is_finite(), hi > lo) {
            (true, true) => (lo, hi),
            (true, false) => (lo - 0.5, lo + 0.5),
            _ => (0.0, 1.0),
        }
    };
    let (x0, x1) = span(all.iter().map(|p| p.0).collect());
    let (y0, y1) = y_range.unwrap_or_else(|| span(all.iter().map(|p| p.1).collect()));
    let pw = w - left - right;
    let ph = h - top - bottom;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );
    for t in ticks(x0, x1, 5) {
        let x = sx(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{top:.1}" x2="{x:.1}" y2="{:.1}" stroke="#e5e5e5"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            top + ph,
            top + ph + 18.0,
            tick_label(t)
        );
    }
    for t in ticks(y0, y1, 5) {
        let y = sy(t);
        let _ = writeln!(
            s,
            r##"<line x1="{left:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#e5e5e5"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            left + pw,
            left - 6.0,
            y + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{left:.1}" y="{top:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        h - 18.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        top + ph / 2.0,
        escape(y_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter(finite)
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if !pts.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                pts.join(" ")
            );
        }
        let ly = top + 10.0 + 20.0 * i as f64;
        let lx = left + pw + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0,
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn sweep_svg(sweep: &SweepResult) -> String {
    let x_label = match sweep.parameter {
        Some(super::SweepParam::Snr) => "SNR [dB]".to_string(),
        Some(p) => p.name().to_string(),
        None => "parameter".to_string(),
    };
    let series: Vec<Series> = sweep
        .curves
        .iter()
        .map(|c| Series {
            name: c.method.name().to_string(),
            points: sweep.grid.iter().copied().zip(c.hit_prob.iter().copied()).collect(),
        })
        .collect();
    line_plot_svg(
        "Order-hit probability",
        &x_label,
        "hit probability",
        &series,
        Some((0.0, 1.0)),
    )
}

pub fn cdf_svg(cdf: &SpuriousCdf) -> String {
    let series: Vec<Series> = cdf
        .l_grid
        .iter()
        .zip(&cdf.cdf)
        .filter(|(_, c)| !c.is_empty())
        .map(|(l, c)| Series {
            name: format!("L = {l}"),
            points: cdf.points.iter().copied().zip(c.iter().copied()).collect(),
        })
        .collect();
    line_plot_svg(
        "Spurious eigenvalue magnitudes",
        "|lambda|",
        "empirical CDF",
        &series,
        Some((0.0, 1.0)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::SweepParam;

    fn sample() -> SweepResult {
        SweepResult {
            parameter: Some(SweepParam::Snr),
            grid: vec![-5.0, 2.5],
            curves: vec![
                MethodCurve {
                    method: Method::NestedKv,
                    hits: vec![3, 10],
                    trials: vec![10, 10],
                    failed: vec![0, 0],
                    hit_prob: vec![0.3, 1.0],
                },
                MethodCurve {
                    method: Method::Bic,
                    hits: vec![0, 4],
                    trials: vec![0, 9],
                    failed: vec![10, 1],
                    hit_prob: vec![f64::NAN, 4.0 / 9.0],
                },
            ],
            trials: Some(10),
            master_seed: Some(1),
        }
    }

    #[test]
    fn sweep_csv_layout_and_round_trip() {
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &sample()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "param_value,method,hits,trials,hit_prob,failed");
        assert_eq!(lines.next().unwrap(), "-5.0,NestedKv,3,10,0.3,0");
        assert_eq!(text.lines().count(), 5);

        let back = read_sweep_csv(buf.as_slice()).unwrap();
        assert_eq!(back.grid, vec![-5.0, 2.5]);
        assert_eq!(back.curves[0], sample().curves[0]);
        assert!(back.curves[1].hit_prob[0].is_nan());
        assert_eq!(back.curves[1].hit_prob[1], 4.0 / 9.0);
    }

    #[test]
    fn reads_csv_without_failed_column() {
        let text = "param_value,method,hits,trials,hit_prob\n0,Gap,1,2,0.5\n1,Gap,2,2,1\n";
        let s = read_sweep_csv(text.as_bytes()).unwrap();
        assert_eq!(s.curves[0].hit_prob, vec![0.5, 1.0]);
        assert!(read_sweep_csv("param_value,method,hits,trials,hit_prob\n".as_bytes()).is_err());
        assert!(read_sweep_csv(
            "param_value,method,hits,trials,hit_prob\n0,Gap,1,2,0.5\n0,Bic,1,2,0.5\n1,Gap,1,2,0.5\n".as_bytes()
        )
        .is_err());
    }

    #[test]
    fn auc_csv() {
        let mut buf = Vec::new();
        write_auc_csv(&mut buf, &[(Method::Fekvf, 0.75)]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "method,auc\nFekvf,0.75\n");
    }

    #[test]
    fn svg_is_well_formed() {
        let svg = sweep_svg(&sample());
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("NestedKv") && svg.contains("SNR [dB]"));
        let empty = line_plot_svg("t", "x", "y", &[], None);
        assert!(!empty.contains("NaN"));
    }
}
