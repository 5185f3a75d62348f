//! Minimal static SVG plots: line/scatter charts and heatmaps.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 78.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 58.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Draw markers only, no connecting line.
    pub scatter: bool,
}

impl Series {
    pub fn line(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { name: name.into(), points, scatter: false }
    }

    pub fn scatter(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { name: name.into(), points, scatter: true }
    }
}

pub struct LinePlot<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub log_x: bool,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Round tick spacing (1, 2 or 5 × 10ᵏ) giving about `n` intervals.
fn tick_step(span: f64, n: f64) -> f64 {
    let raw = span / n;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = tick_step(hi - lo, 5.0);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e4).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Padded finite range; degenerate spans are widened.
fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        return None;
    }
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        let pad = 0.5 * lo.abs().max(1.0);
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    log_x: bool,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        let (a, b, v) = if self.log_x {
            (self.x.0.log10(), self.x.1.log10(), x.log10())
        } else {
            (self.x.0, self.x.1, x)
        };
        LEFT + (v - a) / (b - a) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(
        out,
        r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y1 - y0
    );
    let xt: Vec<f64> = if f.log_x {
        let (a, b) = (f.x.0.log10().ceil() as i32, f.x.1.log10().floor() as i32);
        (a..=b).map(|k| 10f64.powi(k)).collect()
    } else {
        ticks(f.x.0, f.x.1)
    };
    for t in xt {
        let x = f.px(t);
        let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{y1}" x2="{x:.2}" y2="{}" stroke="black"/>"#, y1 + 5.0);
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, y1 + 19.0, label(t));
    }
    for t in ticks(f.y.0, f.y.1) {
        let y = f.py(t);
        let _ = writeln!(out, r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, y + 4.0, label(t));
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        H - 14.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(18 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

pub fn line_plot(p: &LinePlot) -> String {
    let finite = |s: &Series| -> Vec<(f64, f64)> {
        s.points
            .iter()
            .copied()
            .filter(|&(x, y)| x.is_finite() && y.is_finite() && (!p.log_x || x > 0.0))
            .collect()
    };
    let all: Vec<(f64, f64)> = p.series.iter().flat_map(finite).collect();
    let mut out = String::new();
    header(&mut out, p.title);
    let (Some(x), Some(y)) = (range(all.iter().map(|q| q.0)), range(all.iter().map(|q| q.1))) else {
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">no data</text>"#, W / 2.0, H / 2.0);
        out.push_str("</svg>\n");
        return out;
    };
    let x = if p.log_x && x.0 <= 0.0 { (x.1 / 10.0, x.1) } else { x };
    let pad = 0.05 * (y.1 - y.0);
    let f = Frame { x, y: (y.0 - pad, y.1 + pad), log_x: p.log_x };
    axes(&mut out, &f, p.x_label, p.y_label);
    for (k, s) in p.series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let pts = finite(s);
        if !s.scatter && pts.len() > 1 {
            let path: Vec<String> = pts.iter().map(|&(a, b)| format!("{:.2},{:.2}", f.px(a), f.py(b))).collect();
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
                path.join(" ")
            );
        }
        if s.scatter || pts.len() <= 40 {
            for &(a, b) in &pts {
                let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{colour}"/>"#, f.px(a), f.py(b));
            }
        }
        let ly = TOP + 14.0 + 18.0 * k as f64;
        let lx = W - RIGHT + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/>"#,
            lx + 18.0
        );
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 24.0, ly + 4.0, escape(&s.name));
    }
    out.push_str("</svg>\n");
    out
}

/// Sequential map for one-signed data, blue–white–red for signed data.
fn colour(v: f64, lo: f64, hi: f64, signed: bool) -> String {
    let lerp = |a: [f64; 3], b: [f64; 3], t: f64| -> [f64; 3] { [0, 1, 2].map(|i| a[i] + (b[i] - a[i]) * t) };
    let c = if !v.is_finite() {
        [128.0, 128.0, 128.0]
    } else if signed {
        let m = lo.abs().max(hi.abs());
        let t = (v / m).clamp(-1.0, 1.0);
        if t < 0.0 {
            lerp([255.0, 255.0, 255.0], [33.0, 102.0, 172.0], -t)
        } else {
            lerp([255.0, 255.0, 255.0], [178.0, 24.0, 43.0], t)
        }
    } else {
        let stops = [
            [68.0, 1.0, 84.0],
            [59.0, 82.0, 139.0],
            [33.0, 145.0, 140.0],
            [94.0, 201.0, 98.0],
            [253.0, 231.0, 37.0],
        ];
        let t = if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 } * 4.0;
        let i = (t.floor() as usize).min(3);
        lerp(stops[i], stops[i + 1], t - i as f64)
    };
    format!("rgb({},{},{})", c[0].round(), c[1].round(), c[2].round())
}

pub struct Heatmap<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub z_label: &'a str,
    pub xs: &'a [f64],
    pub ys: &'a [f64],
    /// `z[i][j]` at `(xs[j], ys[i])`.
    pub z: &'a [Vec<f64>],
}

/// Cell edges halfway between neighbouring grid values.
fn edges(v: &[f64]) -> Vec<f64> {
    match v.len() {
        0 => vec![],
        1 => vec![v[0] - 0.5, v[0] + 0.5],
        n => {
            let mut e = Vec::with_capacity(n + 1);
            e.push(v[0] - 0.5 * (v[1] - v[0]));
            e.extend(v.windows(2).map(|w| 0.5 * (w[0] + w[1])));
            e.push(v[n - 1] + 0.5 * (v[n - 1] - v[n - 2]));
            e
        }
    }
}

pub fn heatmap(h: &Heatmap) -> String {
    let mut out = String::new();
    header(&mut out, h.title);
    let (ex, ey) = (edges(h.xs), edges(h.ys));
    let Some((lo, hi)) = range(h.z.iter().flatten().copied()) else {
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">no data</text>"#, W / 2.0, H / 2.0);
        out.push_str("</svg>\n");
        return out;
    };
    let signed = lo < 0.0 && hi > 0.0;
    let f = Frame {
        x: (ex[0], ex[ex.len() - 1]),
        y: (ey[0], ey[ey.len() - 1]),
        log_x: false,
    };
    for (i, row) in h.z.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let (x0, x1) = (f.px(ex[j]), f.px(ex[j + 1]));
            let (y0, y1) = (f.py(ey[i + 1]), f.py(ey[i]));
            let _ = writeln!(
                out,
                r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                x1 - x0 + 0.3,
                y1 - y0 + 0.3,
                colour(v, lo, hi, signed)
            );
        }
    }
    axes(&mut out, &f, h.x_label, h.y_label);
    let (bx, by, bh) = (W - RIGHT + 24.0, TOP, H - TOP - BOTTOM);
    let (clo, chi) = if signed {
        let m = lo.abs().max(hi.abs());
        (-m, m)
    } else {
        (lo, hi)
    };
    for k in 0..64 {
        let v = clo + (chi - clo) * (k as f64 + 0.5) / 64.0;
        let y = by + bh * (1.0 - (k as f64 + 1.0) / 64.0);
        let _ = writeln!(
            out,
            r#"<rect x="{bx}" y="{y:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            bh / 64.0 + 0.3,
            colour(v, clo, chi, signed)
        );
    }
    let _ = writeln!(out, r#"<rect x="{bx}" y="{by}" width="16" height="{bh}" fill="none" stroke="black"/>"#);
    for (v, y) in [(chi, by + 4.0), (clo, by + bh + 4.0)] {
        let _ = writeln!(out, r#"<text x="{}" y="{y}">{}</text>"#, bx + 20.0, label(v));
    }
    let _ = writeln!(
        out,
        r#"<text transform="translate({} {}) rotate(-90)" text-anchor="middle">{}</text>"#,
        bx + 70.0,
        by + bh / 2.0,
        escape(h.z_label)
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round() {
        assert_eq!(ticks(0.0, 1.0), vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
        assert_eq!(tick_step(37.0, 5.0), 5.0);
    }

    #[test]
    fn line_plot_is_well_formed() {
        let s = line_plot(&LinePlot {
            title: "a < b",
            x_label: "x",
            y_label: "y",
            log_x: true,
            series: vec![Series::line("s", vec![(0.1, 1.0), (1.0, 2.0), (10.0, f64::NAN)])],
        });
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("a &lt; b"));
        assert_eq!(s.matches("<polyline").count(), 1);
    }

    #[test]
    fn empty_plots_say_so() {
        let s = line_plot(&LinePlot { title: "", x_label: "", y_label: "", log_x: false, series: vec![] });
        assert!(s.contains("no data"));
    }

    #[test]
    fn heatmap_has_one_cell_per_value() {
        let z = vec![vec![-1.0, 0.0, 1.0], vec![0.5, 0.2, -0.3]];
        let s = heatmap(&Heatmap {
            title: "t",
            x_label: "x",
            y_label: "y",
            z_label: "z",
            xs: &[0.0, 1.0, 2.0],
            ys: &[0.0, 1.0],
            z: &z,
        });
        assert_eq!(s.matches("<rect").count(), 1 + 6 + 1 + 64 + 1);
    }
}
