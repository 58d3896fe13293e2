//! Tab-separated result tables and a small SVG chart of binned accuracy.

use std::fmt::Write as _;
use std::io::{self, Write};

use super::analysis::{AccuracyBin, Outcome, ScalingGrid};
use super::experiment::{EvalReport, PredictorReport, Summary};

fn cell(s: &Summary) -> String {
    format!("{:.4} ± {:.4}", s.mean, s.stderr)
}

fn predictor_order(reports: &[EvalReport]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for p in reports.iter().flat_map(|r| &r.predictors) {
        if !names.contains(&p.predictor) {
            names.push(p.predictor.clone());
        }
    }
    names
}

/// One row per report: identifiers, model success, then AUROC and both risk
/// slices for every predictor as `mean ± stderr`.
pub fn write_report_table(reports: &[EvalReport], out: &mut impl Write) -> io::Result<()> {
    let names = predictor_order(reports);
    let mut header = vec!["model".to_string(), "data".into(), "constraint".into(), "model_success".into()];
    for n in &names {
        header.push(format!("{n}_auroc"));
        header.push(format!("{n}_risk_top20"));
        header.push(format!("{n}_risk_bottom20"));
    }
    writeln!(out, "{}", header.join("\t"))?;
    for r in reports {
        let mut row = vec![r.model.clone(), r.dataset.clone(), r.constraint.clone(), format!("{:.4}", r.model_success)];
        for n in &names {
            match r.predictor(n) {
                Some(p) => row.extend([cell(&p.auroc), cell(&p.risk_top), cell(&p.risk_bottom)]),
                None => row.extend(["".to_string(), "".into(), "".into()]),
            }
        }
        writeln!(out, "{}", row.join("\t"))?;
    }
    Ok(())
}

/// Raw per-seed metrics at full precision.
pub fn write_per_seed(reports: &[EvalReport], out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "model\tdata\tpredictor\tseed\tauroc\trisk_top20\trisk_bottom20")?;
    for r in reports {
        for p in &r.predictors {
            for m in &p.per_seed {
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    r.model, r.dataset, p.predictor, m.seed, m.auroc, m.risk_top, m.risk_bottom
                )?;
            }
        }
    }
    Ok(())
}

/// Layer-prefix sweep: one row per layer count.
pub fn write_sweep(points: &[(usize, PredictorReport)], out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "layers\tpredictor\tauroc\trisk_top20\trisk_bottom20")?;
    for (layers, p) in points {
        writeln!(out, "{layers}\t{}\t{}\t{}\t{}", p.predictor, cell(&p.auroc), cell(&p.risk_top), cell(&p.risk_bottom))?;
    }
    Ok(())
}

pub fn write_bins(key: &str, bins: &[AccuracyBin], out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "bin\t{key}_lo\t{key}_hi\tcount\taccuracy")?;
    for (i, b) in bins.iter().enumerate() {
        writeln!(out, "{i}\t{}\t{}\t{}\t{:.4}", b.lo, b.hi, b.count, b.accuracy)?;
    }
    Ok(())
}

/// Grid cells as `x y modal counts...`, empty cells marked `-`.
pub fn write_grid(grid: &ScalingGrid, out: &mut impl Write) -> io::Result<()> {
    let names: Vec<&str> = Outcome::ALL.iter().map(|o| o.as_str()).collect();
    writeln!(out, "x\ty\tmodal\t{}", names.join("\t"))?;
    for y in 0..grid.n_cells {
        for x in 0..grid.n_cells {
            let c = grid.counts_at(x, y);
            let modal = grid.modal(x, y).map_or("-", Outcome::as_str);
            writeln!(out, "{x}\t{y}\t{modal}\t{}\t{}\t{}\t{}", c[0], c[1], c[2], c[3])?;
        }
    }
    Ok(())
}

/// Bar chart of accuracy per bin.
pub fn render_bins_svg(title: &str, x_label: &str, bins: &[AccuracyBin]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 300.0;
    const PAD: f64 = 40.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        svg,
        r#"<line x1="{PAD}" y1="{y}" x2="{x}" y2="{y}" stroke="black"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{y}" stroke="black"/>"#,
        x = W - PAD / 2.0,
        y = H - PAD
    );
    let plot_h = H - 2.0 * PAD;
    let slot = (W - 1.5 * PAD) / bins.len().max(1) as f64;
    for (i, b) in bins.iter().enumerate() {
        let h = b.accuracy * plot_h;
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="steelblue"><title>{:.4}..{:.4}: {:.4} (n={})</title></rect>"#,
            PAD + i as f64 * slot + slot * 0.1,
            H - PAD - h,
            slot * 0.8,
            h,
            b.lo,
            b.hi,
            b.accuracy,
            b.count
        );
    }
    for tick in [0.0, 0.5, 1.0] {
        let _ = writeln!(svg, r#"<text x="{}" y="{:.2}" text-anchor="end">{tick:.1}</text>"#, PAD - 4.0, H - PAD - tick * plot_h + 4.0);
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 10.0, escape(x_label));
    let _ = writeln!(svg, r#"<text x="12" y="{}" transform="rotate(-90 12 {})" text-anchor="middle">accuracy</text>"#, H / 2.0, H / 2.0);
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::experiment::SeedMetrics;

    fn report() -> EvalReport {
        let seeds: Vec<SeedMetrics> =
            (0..3).map(|s| SeedMetrics { seed: s, auroc: 0.5, risk_top: 0.25, risk_bottom: 0.75 }).collect();
        let summary = |v| Summary { mean: v, stderr: 0.0 };
        EvalReport {
            model: "m".into(),
            dataset: "d".into(),
            constraint: "all".into(),
            model_success: 0.5,
            n_seeds: 3,
            predictors: vec![PredictorReport {
                predictor: "constant".into(),
                auroc: summary(0.5),
                risk_top: summary(0.25),
                risk_bottom: summary(0.75),
                per_seed: seeds,
            }],
        }
    }

    #[test]
    fn table_layout() {
        let mut out = Vec::new();
        write_report_table(&[report()], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "model\tdata\tconstraint\tmodel_success\tconstant_auroc\tconstant_risk_top20\tconstant_risk_bottom20"
        );
        assert_eq!(lines[1], "m\td\tall\t0.5000\t0.5000 ± 0.0000\t0.2500 ± 0.0000\t0.7500 ± 0.0000");

        let mut out = Vec::new();
        write_per_seed(&[report()], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 4);
    }

    #[test]
    fn svg_has_one_bar_per_bin() {
        let bins = [
            AccuracyBin { lo: 0.0, hi: 1.0, count: 2, accuracy: 0.5 },
            AccuracyBin { lo: 1.0, hi: 2.0, count: 2, accuracy: 1.0 },
        ];
        let svg = render_bins_svg("a <b>", "x", &bins);
        assert_eq!(svg.matches("<rect").count(), 2);
        assert!(svg.contains("a &lt;b&gt;"));
    }
}
