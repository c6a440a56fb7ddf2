//! Minimal self-contained SVG emission: line charts (optionally log-x/log-y)
//! with horizontal reference lines, and bar histograms. No display server or
//! plotting dependency; output is deterministic text.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::vecops::median;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
    /// Dashed horizontal reference lines (label, y).
    pub hlines: Vec<(String, f64)>,
}

fn fmt(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (0.01..10_000.0).contains(&a) {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.').to_string();
        if s.is_empty() {
            "0".into()
        } else {
            s
        }
    } else {
        format!("{v:.2e}")
    }
}

impl LineChart {
    pub fn render(&self) -> Result<String> {
        let tx = |v: f64| if self.log_x { v.ln() } else { v };
        let ty = |v: f64| if self.log_y { v.max(1e-300).ln() } else { v };

        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for s in &self.series {
            for &(x, y) in &s.points {
                xs.push(tx(x));
                ys.push(ty(y));
            }
        }
        for &(_, y) in &self.hlines {
            ys.push(ty(y));
        }
        if xs.is_empty() {
            return Err(Error::MalformedCsv("no data points to plot".into()));
        }
        let (x0, x1) = pad_range(min(&xs), max(&xs));
        let (y0, y1) = pad_range(min(&ys), max(&ys));
        let px = |x: f64| MARGIN_L + (tx(x) - x0) / (x1 - x0) * (WIDTH - MARGIN_L - MARGIN_R);
        let py = |y: f64| HEIGHT - MARGIN_B - (ty(y) - y0) / (y1 - y0) * (HEIGHT - MARGIN_T - MARGIN_B);

        let mut s = String::new();
        svg_open(&mut s);
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"20\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
            (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
            esc(&self.title)
        ));
        axes(&mut s, &self.x_label, &self.y_label);

        // Ticks: 5 per axis, placed in transformed space and labeled in
        // data space.
        for i in 0..=4 {
            let t = x0 + (x1 - x0) * i as f64 / 4.0;
            let data = if self.log_x { t.exp() } else { t };
            let x = MARGIN_L + (t - x0) / (x1 - x0) * (WIDTH - MARGIN_L - MARGIN_R);
            s.push_str(&format!(
                "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#000\"/>\n",
                HEIGHT - MARGIN_B,
                HEIGHT - MARGIN_B + 6.0
            ));
            s.push_str(&format!(
                "<text x=\"{x:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
                HEIGHT - MARGIN_B + 20.0,
                fmt(data)
            ));
            let ty_ = y0 + (y1 - y0) * i as f64 / 4.0;
            let datay = if self.log_y { ty_.exp() } else { ty_ };
            let y = HEIGHT - MARGIN_B - (ty_ - y0) / (y1 - y0) * (HEIGHT - MARGIN_T - MARGIN_B);
            s.push_str(&format!(
                "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#000\"/>\n",
                MARGIN_L - 6.0,
                MARGIN_L
            ));
            s.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
                MARGIN_L - 9.0,
                y + 4.0,
                fmt(datay)
            ));
        }

        for (label, y) in &self.hlines {
            let yy = py(*y);
            s.push_str(&format!(
                "<line x1=\"{:.1}\" y1=\"{yy:.1}\" x2=\"{:.1}\" y2=\"{yy:.1}\" stroke=\"#555\" stroke-dasharray=\"6,4\"/>\n",
                MARGIN_L,
                WIDTH - MARGIN_R
            ));
            s.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" fill=\"#555\">{}</text>\n",
                WIDTH - MARGIN_R + 6.0,
                yy + 4.0,
                esc(label)
            ));
        }

        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let mut pts = String::new();
            let mut sorted = series.points.clone();
            sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            for (x, y) in &sorted {
                pts.push_str(&format!("{:.1},{:.1} ", px(*x), py(*y)));
            }
            s.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
                pts.trim_end()
            ));
            for (x, y) in &sorted {
                s.push_str(&format!(
                    "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>\n",
                    px(*x),
                    py(*y)
                ));
            }
            let ly = MARGIN_T + 18.0 * i as f64;
            s.push_str(&format!(
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"12\" height=\"12\" fill=\"{color}\"/>\n",
                WIDTH - MARGIN_R + 6.0,
                ly
            ));
            s.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\">{}</text>\n",
                WIDTH - MARGIN_R + 22.0,
                ly + 10.0,
                esc(&series.label)
            ));
        }
        s.push_str("</svg>\n");
        Ok(s)
    }
}

#[derive(Debug, Clone)]
pub struct Histogram {
    pub title: String,
    pub x_label: String,
    /// (lo, hi, count) bins.
    pub bins: Vec<(f64, f64, u64)>,
}

impl Histogram {
    pub fn render(&self) -> Result<String> {
        if self.bins.is_empty() {
            return Err(Error::MalformedCsv("no histogram bins".into()));
        }
        let x0 = self.bins.iter().map(|b| b.0).fold(f64::INFINITY, f64::min);
        let x1 = self.bins.iter().map(|b| b.1).fold(f64::NEG_INFINITY, f64::max);
        let cmax = self.bins.iter().map(|b| b.2).max().unwrap().max(1) as f64;
        let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * (WIDTH - MARGIN_L - MARGIN_R);
        let ph = |c: u64| c as f64 / cmax * (HEIGHT - MARGIN_T - MARGIN_B);

        let mut s = String::new();
        svg_open(&mut s);
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"20\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
            (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
            esc(&self.title)
        ));
        axes(&mut s, &self.x_label, "count");
        for (lo, hi, c) in &self.bins {
            let x = px(*lo);
            let w = (px(*hi) - x).max(1.0);
            let h = ph(*c);
            s.push_str(&format!(
                "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{h:.1}\" fill=\"#1f77b4\" stroke=\"#fff\"/>\n",
                HEIGHT - MARGIN_B - h,
                w
            ));
        }
        for i in 0..=4 {
            let t = x0 + (x1 - x0) * i as f64 / 4.0;
            let x = px(t);
            s.push_str(&format!(
                "<text x=\"{x:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
                HEIGHT - MARGIN_B + 20.0,
                fmt(t)
            ));
            let c = cmax * i as f64 / 4.0;
            let y = HEIGHT - MARGIN_B - ph(c.round() as u64);
            s.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
                MARGIN_L - 9.0,
                y + 4.0,
                fmt(c)
            ));
        }
        s.push_str("</svg>\n");
        Ok(s)
    }
}

fn svg_open(s: &mut String) {
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>\n"
    ));
}

fn axes(s: &mut String, x_label: &str, y_label: &str) {
    s.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#000\"/>\n",
        HEIGHT - MARGIN_B,
        WIDTH - MARGIN_R,
        HEIGHT - MARGIN_B
    ));
    s.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{:.1}\" stroke=\"#000\"/>\n",
        HEIGHT - MARGIN_B
    ));
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 12.0,
        esc(x_label)
    ));
    s.push_str(&format!(
        "<text x=\"16\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>\n",
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        esc(y_label)
    ));
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn pad_range(lo: f64, hi: f64) -> (f64, f64) {
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

// ---------------------------------------------------------------------------
// CSV -> SVG
// ---------------------------------------------------------------------------

/// Render each CSV into an SVG next to it, dispatching on the header:
/// sweep CSVs become train/test curves over n, concentration CSVs a log-log
/// deviation plot, `bin_lo,bin_hi,count` files a histogram.
pub fn emit_plots(csv_paths: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for path in csv_paths {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::MalformedCsv(format!("{}: empty file", path.display())))?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "plot".into());
        let svg = if header.starts_with("schema_version,") {
            sweep_chart(&text)?
        } else if header == "n,d,seed,sup_dev" {
            concentration_chart(&text)?
        } else if header == "bin_lo,bin_hi,count" {
            histogram_chart(&text, &stem)?
        } else {
            return Err(Error::MalformedCsv(format!(
                "{}: unrecognized header `{header}`",
                path.display()
            )));
        };
        let out = out_dir.join(format!("{stem}.svg"));
        std::fs::write(&out, svg)?;
        written.push(out);
    }
    Ok(written)
}

fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::MalformedCsv("empty csv".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for l in lines {
        if l.trim().is_empty() {
            continue;
        }
        rows.push(l.split(',').map(str::to_string).collect());
    }
    Ok((header, rows))
}

fn col(header: &[String], name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MalformedCsv(format!("missing column {name}")))
}

fn sweep_chart(text: &str) -> Result<String> {
    let (header, rows) = parse_csv(text)?;
    let c_n = col(&header, "n")?;
    let c_train = col(&header, "train_mse")?;
    let c_test = col(&header, "test_mse")?;
    let c_sigma = col(&header, "sigma2")?;
    let c_ols_train = col(&header, "ols_train_loss")?;
    let c_ols_test = col(&header, "ols_test_mse")?;

    let parse = |row: &[String], c: usize| row.get(c).and_then(|v| v.parse::<f64>().ok());
    let mut ns: Vec<usize> = Vec::new();
    for r in &rows {
        if let Some(n) = parse(r, c_n) {
            let n = n as usize;
            if !ns.contains(&n) {
                ns.push(n);
            }
        }
    }
    ns.sort_unstable();
    if ns.is_empty() {
        return Err(Error::MalformedCsv("sweep csv has no usable rows".into()));
    }

    let per_n = |c: usize| -> Vec<(f64, f64)> {
        ns.iter()
            .filter_map(|&n| {
                let vals: Vec<f64> = rows
                    .iter()
                    .filter(|r| parse(r, c_n) == Some(n as f64))
                    .filter_map(|r| parse(r, c))
                    .collect();
                if vals.is_empty() {
                    None
                } else {
                    Some((n as f64, median(&vals)))
                }
            })
            .collect()
    };

    let sigma2 = rows.iter().filter_map(|r| parse(r, c_sigma)).next().unwrap_or(0.0);
    let mut hlines = vec![("sigma^2".to_string(), sigma2)];
    let ols_train = per_n(c_ols_train);
    if let Some((_, v)) = ols_train.last() {
        hlines.push(("OLS train".into(), *v));
    }
    let ols_test = per_n(c_ols_test);
    if let Some((_, v)) = ols_test.last() {
        hlines.push(("OLS test".into(), *v));
    }

    LineChart {
        title: "Losses at convergence vs training-set size".into(),
        x_label: "n".into(),
        y_label: "loss (MSE)".into(),
        log_x: true,
        log_y: false,
        series: vec![
            Series {
                label: "train".into(),
                points: per_n(c_train),
            },
            Series {
                label: "test".into(),
                points: per_n(c_test),
            },
        ],
        hlines,
    }
    .render()
}

fn concentration_chart(text: &str) -> Result<String> {
    let (header, rows) = parse_csv(text)?;
    let c_n = col(&header, "n")?;
    let c_dev = col(&header, "sup_dev")?;
    let mut ns: Vec<usize> = Vec::new();
    for r in &rows {
        if let Ok(n) = r[c_n].parse::<usize>() {
            if !ns.contains(&n) {
                ns.push(n);
            }
        }
    }
    ns.sort_unstable();
    if ns.is_empty() {
        return Err(Error::MalformedCsv("concentration csv has no rows".into()));
    }
    let medians: Vec<(f64, f64)> = ns
        .iter()
        .map(|&n| {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| r[c_n].parse::<usize>() == Ok(n))
                .filter_map(|r| r[c_dev].parse::<f64>().ok())
                .collect();
            (n as f64, median(&vals))
        })
        .collect();
    LineChart {
        title: "Uniform deviation of the origin gradient field".into(),
        x_label: "n".into(),
        y_label: "sup deviation".into(),
        log_x: true,
        log_y: true,
        series: vec![Series {
            label: "median".into(),
            points: medians,
        }],
        hlines: vec![],
    }
    .render()
}

fn histogram_chart(text: &str, title: &str) -> Result<String> {
    let (header, rows) = parse_csv(text)?;
    let c_lo = col(&header, "bin_lo")?;
    let c_hi = col(&header, "bin_hi")?;
    let c_count = col(&header, "count")?;
    let mut bins = Vec::new();
    for r in &rows {
        let lo: f64 = r[c_lo].parse().map_err(|_| Error::MalformedCsv("bad bin_lo".into()))?;
        let hi: f64 = r[c_hi].parse().map_err(|_| Error::MalformedCsv("bad bin_hi".into()))?;
        let c: u64 = r[c_count].parse().map_err(|_| Error::MalformedCsv("bad count".into()))?;
        bins.push((lo, hi, c));
    }
    Histogram {
        title: title.into(),
        x_label: "|cosine|".into(),
        bins,
    }
    .render()
}
