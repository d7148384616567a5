//! SVG charts: topic scatter maps, coherence error bars, P/R@k curves and
//! engagement bars.
//!
//! Rendering is a pure function of its inputs. Every number is written with
//! two decimals and elements are emitted in input order, so identical input
//! gives byte-identical documents.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{EngagementReport, Measure, PrAtKReport};

/// Default colours, one per topic for up to 12 topics.
pub const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#393b79", "#ad494a",
];

const DIMMED_OPACITY: f64 = 0.3;
const LEGEND_STRIP: f64 = 110.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LegendPlacement {
    /// Beside the plot area, in a strip reserved on the right.
    Right,
    /// Inside the plot area.
    TopLeft,
    Hidden,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotSpec {
    pub width: f64,
    pub height: f64,
    pub margin_left: f64,
    pub margin_right: f64,
    pub margin_top: f64,
    pub margin_bottom: f64,
    pub palette: Vec<String>,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub legend: LegendPlacement,
}

impl Default for PlotSpec {
    fn default() -> Self {
        PlotSpec {
            width: 800.0,
            height: 500.0,
            margin_left: 70.0,
            margin_right: 30.0,
            margin_top: 50.0,
            margin_bottom: 60.0,
            palette: PALETTE.iter().map(|c| c.to_string()).collect(),
            title: String::new(),
            x_label: String::new(),
            y_label: String::new(),
            legend: LegendPlacement::Right,
        }
    }
}

impl PlotSpec {
    pub fn titled(title: &str, x_label: &str, y_label: &str) -> Self {
        PlotSpec {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            ..Default::default()
        }
    }

    /// Right edge of the plot area in pixels.
    fn plot_right(&self) -> f64 {
        let strip = if self.legend == LegendPlacement::Right {
            LEGEND_STRIP
        } else {
            0.0
        };
        self.width - self.margin_right - strip
    }

    pub fn validate(&self, series: usize) -> Result<()> {
        let dims = [
            self.width,
            self.height,
            self.margin_left,
            self.margin_right,
            self.margin_top,
            self.margin_bottom,
        ];
        if dims.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::invalid(
                "plot dimensions and margins must be finite and non-negative",
            ));
        }
        if self.plot_right() - self.margin_left <= 0.0 || self.height - self.margin_top - self.margin_bottom <= 0.0 {
            return Err(Error::invalid("plot area must be positive after margins"));
        }
        if self.palette.len() < series {
            return Err(Error::invalid(format!(
                "palette has {} colours but {series} series need one each",
                self.palette.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BarMode {
    Totals,
    Means,
}

/// Two decimals, never "-0.00".
fn num(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct Scale {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Scale {
    fn map(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

/// Data range with the minimum 1-unit span and optional 5% padding.
fn range(values: impl Iterator<Item = f64>, pad: bool) -> (f64, f64) {
    let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1.0 {
        let mid = 0.5 * (lo + hi);
        lo = mid - 0.5;
        hi = mid + 0.5;
    }
    if pad {
        let p = 0.05 * (hi - lo);
        (lo - p, hi + p)
    } else {
        (lo, hi)
    }
}

struct Canvas<'a> {
    spec: &'a PlotSpec,
    out: String,
    x: Scale,
    y: Scale,
}

impl<'a> Canvas<'a> {
    fn new(spec: &'a PlotSpec, x: (f64, f64), y: (f64, f64)) -> Self {
        let x = Scale {
            lo: x.0,
            hi: x.1,
            px_lo: spec.margin_left,
            px_hi: spec.plot_right(),
        };
        let y = Scale {
            lo: y.0,
            hi: y.1,
            px_lo: spec.height - spec.margin_bottom,
            px_hi: spec.margin_top,
        };
        let mut out = String::new();
        out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">",
            w = num(spec.width),
            h = num(spec.height)
        );
        out.push_str("<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n");
        if !spec.title.is_empty() {
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>",
                num(spec.width / 2.0),
                num(spec.margin_top / 2.0 + 6.0),
                escape(&spec.title)
            );
        }
        Canvas { spec, out, x, y }
    }

    /// Frame, ticks and axis labels. `x_ticks` overrides the evenly spaced
    /// numeric ticks, e.g. for integer K values or category names.
    fn axes(&mut self, x_ticks: Option<Vec<(f64, String)>>) {
        let (l, r) = (self.x.px_lo, self.x.px_hi);
        let (b, t) = (self.y.px_lo, self.y.px_hi);
        self.out.push_str(
            "<g id=\"axes\" stroke=\"#333333\" stroke-width=\"1\" font-family=\"sans-serif\" font-size=\"11\">\n",
        );
        let _ = writeln!(
            self.out,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/>",
            num(l),
            num(b),
            num(r),
            num(b)
        );
        let _ = writeln!(
            self.out,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/>",
            num(l),
            num(b),
            num(l),
            num(t)
        );
        let x_ticks = x_ticks.unwrap_or_else(|| {
            (0..=4)
                .map(|i| {
                    let v = self.x.lo + (self.x.hi - self.x.lo) * i as f64 / 4.0;
                    (v, num(v))
                })
                .collect()
        });
        for (v, label) in x_ticks {
            let px = self.x.map(v);
            let _ = writeln!(
                self.out,
                "<line x1=\"{p}\" y1=\"{}\" x2=\"{p}\" y2=\"{}\"/>",
                num(b),
                num(b + 5.0),
                p = num(px)
            );
            let _ = writeln!(
                self.out,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" stroke=\"none\">{}</text>",
                num(px),
                num(b + 18.0),
                escape(&label)
            );
        }
        for i in 0..=4 {
            let v = self.y.lo + (self.y.hi - self.y.lo) * i as f64 / 4.0;
            let py = self.y.map(v);
            let _ = writeln!(
                self.out,
                "<line x1=\"{}\" y1=\"{p}\" x2=\"{}\" y2=\"{p}\"/>",
                num(l - 5.0),
                num(l),
                p = num(py)
            );
            let _ = writeln!(
                self.out,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" stroke=\"none\">{}</text>",
                num(l - 8.0),
                num(py + 4.0),
                num(v)
            );
        }
        if !self.spec.x_label.is_empty() {
            let _ = writeln!(
                self.out,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" stroke=\"none\" font-size=\"13\">{}</text>",
                num(0.5 * (l + r)),
                num(b + 42.0),
                escape(&self.spec.x_label)
            );
        }
        if !self.spec.y_label.is_empty() {
            let (cx, cy) = (num(l - 52.0), num(0.5 * (b + t)));
            let _ = writeln!(
                self.out,
                "<text x=\"{cx}\" y=\"{cy}\" text-anchor=\"middle\" stroke=\"none\" font-size=\"13\" transform=\"rotate(-90 {cx} {cy})\">{}</text>",
                escape(&self.spec.y_label)
            );
        }
        self.out.push_str("</g>\n");
    }

    fn legend(&mut self, entries: &[(String, &str)]) {
        let x0 = match self.spec.legend {
            LegendPlacement::Hidden => return,
            LegendPlacement::Right => self.x.px_hi + 15.0,
            LegendPlacement::TopLeft => self.x.px_lo + 10.0,
        };
        let y0 = self.y.px_hi + 10.0;
        self.out
            .push_str("<g id=\"legend\" font-family=\"sans-serif\" font-size=\"11\">\n");
        for (i, (name, colour)) in entries.iter().enumerate() {
            let y = y0 + 16.0 * i as f64;
            let _ = writeln!(
                self.out,
                "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{colour}\"/><text x=\"{}\" y=\"{}\">{}</text>",
                num(x0),
                num(y),
                num(x0 + 15.0),
                num(y + 9.0),
                escape(name)
            );
        }
        self.out.push_str("</g>\n");
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{what} contains non-finite values")));
    }
    Ok(())
}

/// Index of the member minimising the summed distance to the others.
fn medoid(points: &[[f64; 2]], members: &[usize]) -> usize {
    let mut best = (f64::INFINITY, members[0]);
    for &i in members {
        let cost: f64 = members
            .iter()
            .map(|&j| ((points[i][0] - points[j][0]).powi(2) + (points[i][1] - points[j][1]).powi(2)).sqrt())
            .sum();
        if cost < best.0 {
            best = (cost, i);
        }
    }
    best.1
}

/// Topic map: one circle per point coloured by label. Representatives are
/// drawn opaque and the rest dimmed; an empty `representative` slice marks
/// every point as representative. Annotations are placed at the medoid of
/// their label's points.
pub fn scatter(
    points: &[[f64; 2]],
    labels: &[usize],
    representative: &[bool],
    annotations: &BTreeMap<usize, String>,
    spec: &PlotSpec,
) -> Result<String> {
    if points.is_empty() {
        return Err(Error::Empty("no points to plot".into()));
    }
    if labels.len() != points.len() || !(representative.is_empty() || representative.len() == points.len()) {
        return Err(Error::invalid(
            "labels and representative flags must match the number of points",
        ));
    }
    check_finite(&points.iter().flatten().copied().collect::<Vec<_>>(), "points")?;
    let series = labels.iter().max().map_or(0, |m| m + 1);
    spec.validate(series)?;

    let xr = range(points.iter().map(|p| p[0]), true);
    let yr = range(points.iter().map(|p| p[1]), true);
    let mut c = Canvas::new(spec, xr, yr);
    c.axes(None);

    c.out.push_str("<g id=\"points\" stroke=\"none\">\n");
    for (i, p) in points.iter().enumerate() {
        let opacity = if representative.is_empty() || representative[i] {
            1.0
        } else {
            DIMMED_OPACITY
        };
        let _ = writeln!(
            c.out,
            "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{}\" fill-opacity=\"{}\"/>",
            num(c.x.map(p[0])),
            num(c.y.map(p[1])),
            spec.palette[labels[i]],
            num(opacity)
        );
    }
    c.out.push_str("</g>\n");

    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        members.entry(l).or_default().push(i);
    }
    if !annotations.is_empty() {
        c.out
            .push_str("<g id=\"annotations\" font-family=\"sans-serif\" font-size=\"12\" font-weight=\"bold\">\n");
        for (label, text) in annotations {
            let Some(m) = members.get(label) else { continue };
            let p = points[medoid(points, m)];
            let _ = writeln!(
                c.out,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
                num(c.x.map(p[0])),
                num(c.y.map(p[1]) - 6.0),
                escape(text)
            );
        }
        c.out.push_str("</g>\n");
    }

    let entries: Vec<(String, &str)> = members
        .keys()
        .map(|&l| (format!("topic {l}"), spec.palette[l].as_str()))
        .collect();
    c.legend(&entries);
    Ok(c.finish())
}

/// Mean coherence per K with mean ± std bars and a marker at `selected`.
pub fn error_bar_curve(
    ks: &[usize],
    mean: &[f64],
    std: &[f64],
    selected: Option<usize>,
    spec: &PlotSpec,
) -> Result<String> {
    if ks.len() != mean.len() || ks.len() != std.len() {
        return Err(Error::invalid(format!(
            "series lengths differ: {} K values, {} means, {} stds",
            ks.len(),
            mean.len(),
            std.len()
        )));
    }
    if ks.is_empty() {
        return Err(Error::Empty("no K values to plot".into()));
    }
    check_finite(mean, "means")?;
    check_finite(std, "standard deviations")?;
    spec.validate(1)?;

    let xr = range(ks.iter().map(|&k| k as f64), true);
    let yr = range(mean.iter().zip(std).flat_map(|(m, s)| [m - s.abs(), m + s.abs()]), true);
    let mut c = Canvas::new(spec, xr, yr);
    c.axes(Some(ks.iter().map(|&k| (k as f64, k.to_string())).collect()));
    let colour = &spec.palette[0];

    let pts: Vec<(f64, f64)> = ks
        .iter()
        .zip(mean)
        .map(|(&k, &m)| (c.x.map(k as f64), c.y.map(m)))
        .collect();
    if pts.len() > 1 {
        let path: Vec<String> = pts.iter().map(|(x, y)| format!("{},{}", num(*x), num(*y))).collect();
        let _ = writeln!(
            c.out,
            "<polyline id=\"curve\" points=\"{}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"2\"/>",
            path.join(" ")
        );
    }
    c.out
        .push_str("<g id=\"bars\" stroke=\"#333333\" stroke-width=\"1\">\n");
    for ((&k, &m), &s) in ks.iter().zip(mean).zip(std) {
        let x = c.x.map(k as f64);
        let (lo, hi) = (c.y.map(m - s.abs()), c.y.map(m + s.abs()));
        let _ = writeln!(
            c.out,
            "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\"/>",
            num(lo),
            num(hi),
            x = num(x)
        );
        for y in [lo, hi] {
            let _ = writeln!(
                c.out,
                "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\"/>",
                num(x - 4.0),
                num(x + 4.0),
                y = num(y)
            );
        }
    }
    c.out.push_str("</g>\n<g id=\"markers\">\n");
    for (x, y) in &pts {
        let _ = writeln!(
            c.out,
            "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{colour}\"/>",
            num(*x),
            num(*y)
        );
    }
    c.out.push_str("</g>\n");
    if let Some(i) = selected.and_then(|s| ks.iter().position(|&k| k == s)) {
        let _ = writeln!(
            c.out,
            "<circle id=\"selected\" cx=\"{}\" cy=\"{}\" r=\"8\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\"/>",
            num(pts[i].0),
            num(pts[i].1)
        );
    }
    Ok(c.finish())
}

/// Precision and recall against k.
pub fn pr_curve(report: &PrAtKReport, spec: &PlotSpec) -> Result<String> {
    if report.rows.is_empty() {
        return Err(Error::Empty("no P/R rows to plot".into()));
    }
    spec.validate(2)?;
    let ks: Vec<f64> = report.rows.iter().map(|r| r.k as f64).collect();
    let mut c = Canvas::new(spec, range(ks.iter().copied(), true), (0.0, 1.0));
    c.axes(Some(
        report.rows.iter().map(|r| (r.k as f64, r.k.to_string())).collect(),
    ));
    let series: [(&str, Vec<f64>); 2] = [
        ("precision", report.rows.iter().map(|r| r.precision).collect()),
        ("recall", report.rows.iter().map(|r| r.recall).collect()),
    ];
    for (s, (name, values)) in series.iter().enumerate() {
        check_finite(values, name)?;
        let colour = &spec.palette[s];
        let pts: Vec<(f64, f64)> = ks.iter().zip(values).map(|(&k, &v)| (c.x.map(k), c.y.map(v))).collect();
        let _ = writeln!(c.out, "<g id=\"{name}\" fill=\"{colour}\">");
        if pts.len() > 1 {
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{},{}", num(*x), num(*y))).collect();
            let _ = writeln!(
                c.out,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"2\"/>",
                path.join(" ")
            );
        }
        for (x, y) in &pts {
            let _ = writeln!(c.out, "<circle cx=\"{}\" cy=\"{}\" r=\"4\"/>", num(*x), num(*y));
        }
        c.out.push_str("</g>\n");
    }
    let entries: Vec<(String, &str)> = series
        .iter()
        .enumerate()
        .map(|(s, (name, _))| (name.to_string(), spec.palette[s].as_str()))
        .collect();
    c.legend(&entries);
    Ok(c.finish())
}

/// Likes, replies and retweets per topic as three adjacent bars.
pub fn grouped_bars(report: &EngagementReport, mode: BarMode, spec: &PlotSpec) -> Result<String> {
    if report.topics.is_empty() {
        return Err(Error::Empty("no topics to plot".into()));
    }
    spec.validate(3)?;
    let measures = [
        ("likes", Measure::Likes),
        ("replies", Measure::Replies),
        ("retweets", Measure::Retweets),
    ];
    let value = |t: &crate::eval::TopicEngagement, m: Measure| match mode {
        BarMode::Totals => t.total(m) as f64,
        BarMode::Means => t.mean(m),
    };
    let top = report
        .topics
        .iter()
        .flat_map(|t| measures.iter().map(move |&(_, m)| value(t, m)))
        .fold(0.0f64, f64::max);
    let n = report.topics.len() as f64;
    let mut c = Canvas::new(spec, (0.0, n), (0.0, if top > 0.0 { top * 1.05 } else { 1.0 }));
    c.axes(Some(
        report
            .topics
            .iter()
            .enumerate()
            .map(|(i, t)| (i as f64 + 0.5, format!("{}", t.topic)))
            .collect(),
    ));

    let slot = c.x.map(1.0) - c.x.map(0.0);
    let bar = slot * 0.8 / 3.0;
    let base = c.y.map(0.0);
    c.out.push_str("<g id=\"bars\" stroke=\"none\">\n");
    for (i, t) in report.topics.iter().enumerate() {
        for (j, &(_, m)) in measures.iter().enumerate() {
            let x = c.x.map(i as f64) + slot * 0.1 + bar * j as f64;
            let y = c.y.map(value(t, m));
            let _ = writeln!(
                c.out,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>",
                num(x),
                num(y),
                num(bar),
                num(base - y),
                spec.palette[j]
            );
        }
    }
    c.out.push_str("</g>\n");
    let entries: Vec<(String, &str)> = measures
        .iter()
        .enumerate()
        .map(|(j, (name, _))| (name.to_string(), spec.palette[j].as_str()))
        .collect();
    c.legend(&entries);
    Ok(c.finish())
}

pub fn write_svg(path: &Path, svg: &str) -> Result<()> {
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::TopicEngagement;

    fn count(svg: &str, needle: &str) -> usize {
        svg.matches(needle).count()
    }

    fn attr(tag: &str, name: &str) -> f64 {
        let key = format!("{name}=\"");
        let start = tag.find(&key).unwrap() + key.len();
        tag[start..].split('"').next().unwrap().parse().unwrap()
    }

    fn topic(topic: u32, likes: u64, replies: u64, retweets: u64) -> TopicEngagement {
        TopicEngagement {
            topic,
            posts: 1,
            likes,
            replies,
            retweets,
            mean_likes: likes as f64,
            mean_replies: replies as f64,
            mean_retweets: retweets as f64,
            empty: false,
        }
    }

    #[test]
    fn two_points_two_colours() {
        let svg = scatter(
            &[[0.0, 0.0], [1.0, 2.0]],
            &[0, 1],
            &[],
            &BTreeMap::new(),
            &PlotSpec::default(),
        )
        .unwrap();
        assert_eq!(count(&svg, "<circle"), 2);
        assert!(svg.contains(PALETTE[0]) && svg.contains(PALETTE[1]));
        assert_eq!(count(&svg, ">topic "), 2);
    }

    #[test]
    fn identical_points_get_a_unit_viewport() {
        let pts = [[3.0, 3.0]; 4];
        let svg = scatter(
            &pts,
            &[0; 4],
            &[true, false, false, false],
            &BTreeMap::new(),
            &PlotSpec::default(),
        )
        .unwrap();
        for line in svg.lines().filter(|l| l.starts_with("<circle")) {
            let (x, y) = (attr(line, "cx"), attr(line, "cy"));
            assert!(x.is_finite() && y.is_finite() && x > 0.0 && x < 800.0 && y > 0.0 && y < 500.0);
        }
        assert_eq!(count(&svg, "fill-opacity=\"0.30\""), 3);
        assert_eq!(count(&svg, "fill-opacity=\"1.00\""), 1);
    }

    #[test]
    fn scatter_errors() {
        let none = BTreeMap::new();
        assert!(matches!(
            scatter(&[], &[], &[], &none, &PlotSpec::default()),
            Err(Error::Empty(_))
        ));
        assert!(scatter(&[[0.0, 0.0]], &[12], &[], &none, &PlotSpec::default()).is_err());
        assert!(scatter(&[[0.0, f64::NAN]], &[0], &[], &none, &PlotSpec::default()).is_err());
    }

    #[test]
    fn annotation_sits_on_the_medoid() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [10.0, 0.0]];
        let mut notes = BTreeMap::new();
        notes.insert(0, "a & b".to_string());
        let svg = scatter(&pts, &[0, 0, 0], &[], &notes, &PlotSpec::default()).unwrap();
        assert!(svg.contains("a &amp; b"));
        let circle = svg.lines().filter(|l| l.starts_with("<circle")).nth(1).unwrap();
        let text = svg.lines().find(|l| l.contains("a &amp; b")).unwrap();
        assert_eq!(attr(circle, "cx"), attr(text, "x"));
    }

    #[test]
    fn error_bars() {
        let spec = PlotSpec::default();
        let flat = error_bar_curve(&[2, 3, 4], &[0.4, 0.5, 0.45], &[0.0; 3], Some(3), &spec).unwrap();
        assert_eq!(count(&flat, "<polyline"), 1);
        assert_eq!(count(&flat, "id=\"selected\""), 1);
        let single = error_bar_curve(&[5], &[0.5], &[0.1], Some(5), &spec).unwrap();
        assert_eq!(count(&single, "<polyline"), 0);
        assert!(error_bar_curve(&[2, 3], &[0.5], &[0.1, 0.1], None, &spec).is_err());
    }

    #[test]
    fn bars_are_proportional() {
        let report = EngagementReport {
            topics: vec![topic(0, 6, 2, 4)],
            unassigned: 0,
        };
        let svg = grouped_bars(&report, BarMode::Totals, &PlotSpec::default()).unwrap();
        let heights: Vec<f64> = svg
            .lines()
            .filter(|l| l.starts_with("<rect") && l.contains("height") && !l.contains("100%") && !l.contains("<text"))
            .map(|l| attr(l, "height"))
            .collect();
        assert_eq!(heights.len(), 3);
        assert!((heights[0] / heights[1] - 3.0).abs() < 0.01);
        assert!((heights[2] / heights[1] - 2.0).abs() < 0.01);
    }

    #[test]
    fn zero_and_many_topics() {
        let zero = EngagementReport {
            topics: vec![topic(0, 0, 0, 0)],
            unassigned: 0,
        };
        let svg = grouped_bars(&zero, BarMode::Means, &PlotSpec::default()).unwrap();
        assert_eq!(count(&svg, "height=\"0.00\""), 3);

        let many = EngagementReport {
            topics: (0..12).map(|t| topic(t, t as u64, 1, 2)).collect(),
            unassigned: 0,
        };
        let svg = grouped_bars(&many, BarMode::Totals, &PlotSpec::default()).unwrap();
        let bars = svg
            .split("<g id=\"bars\"")
            .nth(1)
            .unwrap()
            .split("</g>")
            .next()
            .unwrap();
        assert_eq!(count(bars, "<rect"), 36);
    }

    #[test]
    fn rendering_is_pure() {
        let pts: Vec<[f64; 2]> = (0..30).map(|i| [i as f64 * 0.37, (i * i) as f64 * 0.01]).collect();
        let labels: Vec<usize> = (0..30).map(|i| i % 4).collect();
        let a = scatter(&pts, &labels, &[], &BTreeMap::new(), &PlotSpec::default()).unwrap();
        let b = scatter(&pts, &labels, &[], &BTreeMap::new(), &PlotSpec::default()).unwrap();
        assert_eq!(a, b);
    }
}
