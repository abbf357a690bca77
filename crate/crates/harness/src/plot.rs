//! Hand-written SVG. Coordinates are printed at fixed precision so equal
//! inputs give equal bytes.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use ringlab_core::{RingLaw, C64};
use ringlab_rmt::GirkoField;

use crate::error::Result;
use crate::io::write_file;

const SIZE: f64 = 480.0;
const PAD: f64 = 40.0;

fn header(w: f64, h: f64, title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{title}</text>\n",
        w / 2.0
    )
}

/// Eigenvalues with the limiting annulus overlaid (one circle when `a = b`
/// or `a = 0`).
pub fn eigenvalue_scatter(eigs: &[C64], law: &RingLaw) -> String {
    let reach = eigs.iter().map(|z| z.norm()).fold(law.b, f64::max).max(1e-6) * 1.1;
    let half = (SIZE - 2.0 * PAD) / 2.0;
    let c = SIZE / 2.0;
    let sx = |x: f64| c + x / reach * half;
    let sy = |y: f64| c - y / reach * half;
    let mut s = header(SIZE, SIZE, "eigenvalues");
    let _ = writeln!(
        s,
        "<line x1=\"{PAD:.1}\" y1=\"{c:.1}\" x2=\"{:.1}\" y2=\"{c:.1}\" stroke=\"#999\" stroke-width=\"0.5\"/>",
        SIZE - PAD
    );
    let _ = writeln!(
        s,
        "<line x1=\"{c:.1}\" y1=\"{PAD:.1}\" x2=\"{c:.1}\" y2=\"{:.1}\" stroke=\"#999\" stroke-width=\"0.5\"/>",
        SIZE - PAD
    );
    for z in eigs {
        let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.2\" fill=\"#1f4e79\" fill-opacity=\"0.6\"/>", sx(z.re), sy(z.im));
    }
    let mut radii = vec![law.b];
    if !law.collapsed && law.a > 0.0 {
        radii.push(law.a);
    }
    for r in radii {
        let _ = writeln!(
            s,
            "<circle cx=\"{c:.1}\" cy=\"{c:.1}\" r=\"{:.2}\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"1.2\" stroke-dasharray=\"5,3\"/>",
            r / reach * half
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Radial density `2πr ρ(r)` of the law against a histogram of moduli.
pub fn radial_density(law: &RingLaw, sorted_moduli: &[f64], bins: usize) -> String {
    let (w, h) = (640.0, 400.0);
    let top = sorted_moduli.last().copied().unwrap_or(law.b).max(law.b).max(1e-6) * 1.05;
    let width = top / bins as f64;
    let mut counts = vec![0usize; bins];
    for r in sorted_moduli {
        counts[((r / width) as usize).min(bins - 1)] += 1;
    }
    let total = sorted_moduli.len().max(1) as f64;
    let hist: Vec<f64> = counts.iter().map(|c| *c as f64 / (total * width)).collect();
    let curve: Vec<(f64, f64)> = law
        .r_grid
        .iter()
        .zip(&law.density)
        .map(|(r, d)| (*r, std::f64::consts::TAU * r * d))
        .collect();
    let ymax = hist.iter().chain(curve.iter().map(|(_, v)| v)).fold(1e-12_f64, |m, v| m.max(*v)) * 1.1;
    let sx = |x: f64| PAD + x / top * (w - 2.0 * PAD);
    let sy = |y: f64| h - PAD - y / ymax * (h - 2.0 * PAD);
    let mut s = header(w, h, "radial density");
    let _ = writeln!(
        s,
        "<line x1=\"{PAD:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\" stroke-width=\"0.8\"/>",
        h - PAD,
        w - PAD,
        h - PAD
    );
    for (k, v) in hist.iter().enumerate() {
        let x0 = sx(k as f64 * width);
        let _ = writeln!(
            s,
            "<rect x=\"{x0:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#aec7e8\" stroke=\"#5b7fa6\" stroke-width=\"0.4\"/>",
            sy(*v),
            sx((k + 1) as f64 * width) - x0,
            sy(0.0) - sy(*v)
        );
    }
    if law.collapsed {
        let _ = writeln!(
            s,
            "<line x1=\"{0:.2}\" y1=\"{1:.1}\" x2=\"{0:.2}\" y2=\"{2:.1}\" stroke=\"#c0392b\" stroke-width=\"1.5\"/>",
            sx(law.a),
            h - PAD,
            PAD
        );
    } else {
        let pts: Vec<String> = curve.iter().map(|(r, v)| format!("{:.2},{:.2}", sx(*r), sy(*v))).collect();
        let _ = writeln!(s, "<polyline points=\"{}\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"1.5\"/>", pts.join(" "));
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">r max {top:.3}</text>",
        w - PAD,
        h - PAD + 16.0
    );
    s.push_str("</svg>\n");
    s
}

/// Theory CDF against the empirical CDF of the moduli.
pub fn radial_cdf(law: &RingLaw, sorted_moduli: &[f64]) -> String {
    let (w, h) = (640.0, 400.0);
    let top = sorted_moduli.last().copied().unwrap_or(law.b).max(law.b).max(1e-6) * 1.05;
    let sx = |x: f64| PAD + x / top * (w - 2.0 * PAD);
    let sy = |y: f64| h - PAD - y * (h - 2.0 * PAD);
    let mut s = header(w, h, "radial CDF");
    let n = sorted_moduli.len();
    // at most 400 steps so large runs stay small on disk
    let stride = n.div_ceil(400).max(1);
    let mut emp = vec![format!("{:.2},{:.2}", sx(0.0), sy(0.0))];
    for k in (0..n).step_by(stride) {
        let r = sorted_moduli[k];
        emp.push(format!("{:.2},{:.2}", sx(r), sy(k as f64 / n as f64)));
        emp.push(format!("{:.2},{:.2}", sx(r), sy((k + 1) as f64 / n as f64)));
    }
    emp.push(format!("{:.2},{:.2}", sx(top), sy(1.0)));
    let _ = writeln!(s, "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f4e79\" stroke-width=\"1.2\"/>", emp.join(" "));
    let theory: Vec<String> = (0..=200)
        .map(|k| {
            let r = top * k as f64 / 200.0;
            format!("{:.2},{:.2}", sx(r), sy(law.cdf(r)))
        })
        .collect();
    let _ = writeln!(
        s,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"1.2\" stroke-dasharray=\"5,3\"/>",
        theory.join(" ")
    );
    s.push_str("</svg>\n");
    s
}

const RAMP: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

fn colour(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let k = (t as usize).min(RAMP.len() - 2);
    let f = t - k as f64;
    let (a, b) = (RAMP[k], RAMP[k + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Heatmap of the log-potential field; excluded points are grey.
pub fn girko_heatmap(field: &GirkoField) -> String {
    let (nx, ny) = (field.re.len(), field.im.len());
    let finite = || field.h.iter().flatten().copied().filter(|v| v.is_finite());
    let lo = finite().fold(f64::INFINITY, f64::min);
    let hi = finite().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let cw = (SIZE - 2.0 * PAD) / nx as f64;
    let ch = (SIZE - 2.0 * PAD) / ny as f64;
    let mut s = header(SIZE, SIZE, "log-potential field");
    for k in 0..ny {
        for j in 0..nx {
            let v = field.h[k][j];
            let fill = if field.excluded.contains(&(k, j)) || !v.is_finite() {
                "#bbbbbb".to_string()
            } else {
                colour((v - lo) / span)
            };
            let _ = writeln!(
                s,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{fill}\"/>",
                PAD + j as f64 * cw,
                PAD + (ny - 1 - k) as f64 * ch,
                cw + 0.05,
                ch + 0.05
            );
        }
    }
    let _ = writeln!(
        s,
        "<text x=\"{PAD:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">h in [{lo:.4}, {hi:.4}]</text>",
        SIZE - PAD + 16.0
    );
    s.push_str("</svg>\n");
    s
}

/// Inputs for [`emit_plots`].
pub struct PlotInputs<'a> {
    pub law: &'a RingLaw,
    pub eigenvalues: &'a [C64],
    pub sorted_moduli: &'a [f64],
    pub bins: usize,
    pub field: Option<&'a GirkoField>,
}

/// Writes the SVG files and returns their paths.
pub fn emit_plots(p: &PlotInputs, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = vec![
        (dir.join("eigenvalues.svg"), eigenvalue_scatter(p.eigenvalues, p.law)),
        (dir.join("radial_density.svg"), radial_density(p.law, p.sorted_moduli, p.bins)),
        (dir.join("radial_cdf.svg"), radial_cdf(p.law, p.sorted_moduli)),
    ];
    if let Some(f) = p.field {
        files.push((dir.join("girko_field.svg"), girko_heatmap(f)));
    }
    for (path, body) in &files {
        write_file(path, body)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}
