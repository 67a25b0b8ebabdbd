//! Aligned plain-text rendering of reports.

use std::fmt::Write;

use relaxbias_core::workflows::{PriorEcho, ReportKind};
use relaxbias_core::{AnalysisReport, PriorKind};

use crate::run::{PriorCheckReport, Report};

fn fixed(v: f64, digits: usize) -> String {
    if v.is_finite() {
        let s = format!("{v:.digits$}");
        match s.strip_prefix('-') {
            Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
            _ => s,
        }
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Left-aligned first column, right-aligned rest.
fn table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |out: &mut String, cells: &[String]| {
        out.push_str("  ");
        for (i, (c, w)) in cells.iter().zip(&width).enumerate() {
            if i == 0 {
                let _ = write!(out, "{c:<w$}");
            } else {
                let _ = write!(out, "  {c:>w$}");
            }
        }
        out.push('\n');
    };
    line(out, &header.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    for r in rows {
        line(out, r);
    }
}

fn prior_text(k: &PriorKind) -> String {
    match *k {
        PriorKind::Flat => "flat".into(),
        PriorKind::Normal { mean, variance } => format!("normal({}, {})", fixed(mean, 3), fixed(variance, 4)),
        PriorKind::Laplace { mean, scale } => format!("laplace({}, {})", fixed(mean, 3), fixed(scale, 4)),
        PriorKind::LogF { m, s, r, n } => {
            format!("log-f({}, {}, {}, {})", fixed(m, 3), fixed(s, 3), fixed(r, 3), fixed(n, 2))
        }
    }
}

fn priors_block(out: &mut String, priors: &[PriorEcho]) {
    if priors.is_empty() {
        return;
    }
    out.push_str("\npriors\n");
    let rows: Vec<Vec<String>> = priors
        .iter()
        .map(|p| {
            vec![
                p.label.clone(),
                prior_text(&p.prior),
                format!("{:?}", p.scale).to_lowercase(),
                fixed(p.lo95, 2),
                fixed(p.hi95, 2),
                p.trials.map(|n| fixed(n, 1)).unwrap_or_default(),
            ]
        })
        .collect();
    table(out, &["coefficient", "prior", "scale", "lower95", "upper95", "trials"], &rows);
}

fn notes_block(out: &mut String, title: &str, notes: &[String]) {
    if notes.is_empty() {
        return;
    }
    let _ = writeln!(out, "\n{title}");
    for n in notes {
        let _ = writeln!(out, "  - {n}");
    }
}

fn analysis_text(r: &AnalysisReport) -> String {
    let mut out = String::new();
    let kind = match r.analysis {
        ReportKind::Conventional => "conventional",
        ReportKind::Misclassification => "misclassification",
        ReportKind::Validation => "validation",
        ReportKind::Confounder => "confounder",
        ReportKind::Selection => "selection",
    };
    let _ = writeln!(out, "analysis: {kind}");

    out.push_str("\nestimates\n");
    let rows: Vec<Vec<String>> = r
        .estimates
        .iter()
        .map(|e| {
            vec![
                e.label.clone(),
                e.method.clone(),
                fixed(e.estimate, 2),
                e.se.map(|s| fixed(s, 3)).unwrap_or_default(),
                fixed(e.lo, 2),
                fixed(e.hi, 2),
                format!("{}%", e.level * 100.0),
            ]
        })
        .collect();
    table(&mut out, &["target", "method", "estimate", "se(log)", "lower", "upper", "level"], &rows);

    if let Some(v) = &r.validation {
        out.push_str("\nvalidation\n");
        let pi = v.predictive_values.map(|p| fixed(p, 3));
        table(&mut out, &["predictive", "pi_111", "pi_101", "pi_110", "pi_100"], &[
            std::iter::once("value".to_string()).chain(pi).collect(),
        ]);
        let ty = v.imputed_ty.map(|c| fixed(c, 1));
        table(&mut out, &["imputed", "T1Y1", "T1Y0", "T0Y1", "T0Y0"], &[
            std::iter::once("count".to_string()).chain(ty).collect(),
        ]);
        let _ = writeln!(out, "  closed-form OR_TY {}", fixed(v.closed_form_or, 2));
    }

    priors_block(&mut out, &r.priors);

    if let Some(s) = &r.sampler {
        let _ = writeln!(
            out,
            "\nsampler: {} from {} draws ({}, seed {})",
            s.target,
            s.summary.draws,
            format!("{:?}", s.config.identified_mode).to_lowercase(),
            s.config.seed
        );
        let mut rows: Vec<Vec<String>> =
            s.summary.percentiles.iter().map(|(l, v)| vec![format!("{}%", l * 100.0), fixed(*v, 2)]).collect();
        rows.push(vec!["median".into(), fixed(s.summary.median, 2)]);
        table(&mut out, &["percentile", "value"], &rows);
        if let Some(ratio) = s.summary.variance_ratio {
            let _ = writeln!(out, "  conventional/sampler log-variance ratio {}%", fixed(ratio * 100.0, 1));
        }
        if s.summary.dropped > 0 {
            let _ = writeln!(out, "  dropped {} non-finite draws", s.summary.dropped);
        }
    }

    if let Some(ig) = &r.ignorance {
        let side = |v: Option<f64>| v.map(|x| fixed(x, 2)).unwrap_or_else(|| "unbounded".into());
        let _ = writeln!(
            out,
            "\nignorance: {} over the {}% prior box ({}, {})",
            ig.target,
            ig.box_level * 100.0,
            side(ig.lo),
            side(ig.hi)
        );
    }

    let d = &r.diagnostics;
    if !d.fits.is_empty() {
        out.push_str("\nfits\n");
        let rows: Vec<Vec<String>> = d
            .fits
            .iter()
            .map(|f| vec![f.label.clone(), f.iterations.to_string(), format!("{:.1e}", f.gradient_norm)])
            .collect();
        table(&mut out, &["fit", "iterations", "gradient"], &rows);
    }
    if let Some(a) = d.closed_form_agreement {
        let _ = writeln!(out, "  closed form vs likelihood relative difference {a:.1e}");
    }
    notes_block(&mut out, "notes", &d.notes);
    provenance_line(&mut out, r.provenance.config_digest.as_deref());
    out
}

fn provenance_line(out: &mut String, digest: Option<&str>) {
    if let Some(d) = digest {
        let _ = writeln!(out, "\nconfig digest {d}");
    }
}

fn prior_check_text(r: &PriorCheckReport) -> String {
    let mut out = String::from("analysis: prior-check\n");
    priors_block(&mut out, &r.priors);
    let records: Vec<Vec<String>> = r
        .priors
        .iter()
        .filter_map(|p| p.data_prior.as_ref().map(|d| (p, d)))
        .map(|(p, d)| vec![p.label.clone(), fixed(d.successes, 2), fixed(d.trials, 2), fixed(d.offset, 3)])
        .collect();
    if !records.is_empty() {
        out.push_str("\ndata priors\n");
        table(&mut out, &["coefficient", "successes", "trials", "offset"], &records);
    }
    notes_block(&mut out, "warnings", &r.warnings);
    provenance_line(&mut out, r.provenance.config_digest.as_deref());
    out
}

pub fn text(report: &Report) -> String {
    match report {
        Report::Analysis(r) => analysis_text(r),
        Report::PriorCheck(r) => prior_check_text(r),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_align() {
        let mut s = String::new();
        table(&mut s, &["a", "bb"], &[vec!["long".into(), "1".into()], vec!["x".into(), "22".into()]]);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "  a     bb");
        assert_eq!(lines[1], "  long   1");
        assert_eq!(lines[2], "  x     22");
    }

    #[test]
    fn non_finite_cells() {
        assert_eq!(fixed(f64::INFINITY, 2), "inf");
        assert_eq!(fixed(1.2345, 2), "1.23");
        assert_eq!(fixed(-0.0001, 3), "0.000");
    }
}
