//! Figure regeneration from a trial store: self-contained SVG files plus CSV
//! data tables.
//!
//! Rendering is deterministic (identical records yield byte-identical SVG)
//! and every file stands alone: no scripts, no external assets.

use thiserror::Error;

use crate::space::{ParamValue, ParameterKind, SearchSpace};
use crate::store::{best_trial, Provenance, TrialRecord};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no successful trials to plot")]
    EmptyInput,
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("parameter `{0}` is not continuous")]
    NotContinuous(String),
    #[error("parallel coordinates need at least two parameters")]
    SingleParameterSpace,
    #[error("worker {worker_id} has overlapping trials at set_index {a} and {b}")]
    OverlappingBars {
        worker_id: usize,
        a: usize,
        b: usize,
    },
    #[error("contour needs at least 3 distinct sample points, got {0}")]
    TooFewDistinctPoints(usize),
    #[error("contour grid must have at least 2 cells per side, got {0}")]
    BadGrid(usize),
}

/// One rendered figure: the SVG document and, where specified, a CSV table
/// of the plotted data.
#[derive(Debug, Clone)]
pub struct Figure {
    pub svg: String,
    pub csv: Option<String>,
}

/// Fixed 11-stop color ramp (dark violet to yellow), interpolated linearly
/// in RGB. Embedded so rendering never depends on an external colormap.
pub const COLOR_RAMP: [(u8, u8, u8); 11] = [
    (0x44, 0x01, 0x54),
    (0x48, 0x28, 0x78),
    (0x3e, 0x49, 0x89),
    (0x31, 0x68, 0x8e),
    (0x26, 0x82, 0x8e),
    (0x1f, 0x9e, 0x89),
    (0x35, 0xb7, 0x79),
    (0x6e, 0xce, 0x58),
    (0xb5, 0xde, 0x2b),
    (0xda, 0xe3, 0x19),
    (0xfd, 0xe7, 0x25),
];

/// Position t in [0,1] to "#rrggbb".
pub fn ramp_color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let scaled = t * (COLOR_RAMP.len() - 1) as f64;
    let i = (scaled.floor() as usize).min(COLOR_RAMP.len() - 2);
    let frac = scaled - i as f64;
    let (r0, g0, b0) = COLOR_RAMP[i];
    let (r1, g1, b1) = COLOR_RAMP[i + 1];
    let lerp = |a: u8, b: u8| -> u8 { (a as f64 + (b as f64 - a as f64) * frac).round() as u8 };
    format!("#{:02x}{:02x}{:02x}", lerp(r0, r1), lerp(g0, g1), lerp(b0, b1))
}

/// Map a result onto the ramp over [min, max]; a degenerate range maps
/// everything to the midpoint color.
pub fn result_color(value: f64, min: f64, max: f64) -> String {
    if max > min {
        ramp_color((value - min) / (max - min))
    } else {
        ramp_color(0.5)
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 66.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 24.0;
const MARGIN_BOTTOM: f64 = 48.0;

struct Axis {
    min: f64,
    max: f64,
}

impl Axis {
    /// Data range padded by 5%; a zero-span range is widened around its
    /// single value first.
    fn padded(values: impl Iterator<Item = f64>) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() || !hi.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        let span = if hi > lo { hi - lo } else { lo.abs().max(1.0) };
        Self {
            min: lo - 0.05 * span,
            max: hi + 0.05 * span,
        }
    }

    fn frac(&self, v: f64) -> f64 {
        (v - self.min) / (self.max - self.min)
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn px(v: f64) -> String {
    format!("{v:.2}")
}

fn fmt_tick(v: f64) -> String {
    // Kill float noise on tick labels without losing small magnitudes.
    let rounded = format!("{v:.6}");
    let trimmed = rounded.trim_end_matches('0').trim_end_matches('.');
    if trimmed.is_empty() || trimmed == "-" {
        "0".to_string()
    } else {
        trimmed.to_string()
    }
}

fn nice_ticks(axis: &Axis, target: usize) -> Vec<f64> {
    let span = axis.max - axis.min;
    if !span.is_finite() || span <= 0.0 {
        return vec![axis.min];
    }
    let raw_step = span / target as f64;
    let mag = 10f64.powf(raw_step.log10().floor());
    let norm = raw_step / mag;
    let step = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    } * mag;
    let mut ticks = Vec::new();
    let mut v = (axis.min / step).ceil() * step;
    while v <= axis.max + 1e-12 * span {
        // Snap near-zero ticks so "-0" never shows up.
        ticks.push(if v.abs() < step * 1e-9 { 0.0 } else { v });
        v += step;
    }
    ticks
}

struct Svg {
    out: String,
    width: f64,
    height: f64,
}

impl Svg {
    fn new(width: f64, height: f64) -> Self {
        let mut out = String::with_capacity(8192);
        out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        out.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n",
            w = px(width),
            h = px(height)
        ));
        out.push_str(&format!(
            "<rect width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n",
            px(width),
            px(height)
        ));
        Self { out, width, height }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, class: &str) {
        self.out.push_str(&format!(
            "<line class=\"{}\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"1\"/>\n",
            class,
            px(x1),
            px(y1),
            px(x2),
            px(y2),
            stroke
        ));
    }

    fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str, class: &str) {
        self.out.push_str(&format!(
            "<circle class=\"{}\" cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\"/>\n",
            class,
            px(cx),
            px(cy),
            px(r),
            fill
        ));
    }

    fn ring(&mut self, cx: f64, cy: f64, r: f64, stroke: &str, class: &str) {
        self.out.push_str(&format!(
            "<circle class=\"{}\" cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n",
            class,
            px(cx),
            px(cy),
            px(r),
            stroke
        ));
    }

    fn cross(&mut self, cx: f64, cy: f64, arm: f64, stroke: &str, class: &str) {
        self.out.push_str(&format!(
            "<path class=\"{}\" d=\"M {} {} L {} {} M {} {} L {} {}\" stroke=\"{}\" stroke-width=\"1.5\" fill=\"none\"/>\n",
            class,
            px(cx - arm),
            px(cy - arm),
            px(cx + arm),
            px(cy + arm),
            px(cx - arm),
            px(cy + arm),
            px(cx + arm),
            px(cy - arm),
            stroke
        ));
    }

    fn triangle(&mut self, cx: f64, cy: f64, size: f64, up: bool, fill: &str, class: &str) {
        let (y0, y1) = if up { (cy + size, cy - size) } else { (cy - size, cy + size) };
        self.out.push_str(&format!(
            "<path class=\"{}\" d=\"M {} {} L {} {} L {} {} Z\" fill=\"{}\"/>\n",
            class,
            px(cx - size),
            px(y0),
            px(cx + size),
            px(y0),
            px(cx),
            px(y1),
            fill
        ));
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, class: &str) {
        self.out.push_str(&format!(
            "<rect class=\"{}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
            class,
            px(x),
            px(y),
            px(w),
            px(h),
            fill
        ));
    }

    fn polyline(&mut self, points: &[(f64, f64)], stroke: &str, class: &str) {
        let pts: Vec<String> = points
            .iter()
            .map(|(x, y)| format!("{},{}", px(*x), px(*y)))
            .collect();
        self.out.push_str(&format!(
            "<polyline class=\"{}\" points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
            class,
            pts.join(" "),
            stroke
        ));
    }

    fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, content: &str, class: &str) {
        self.out.push_str(&format!(
            "<text class=\"{}\" x=\"{}\" y=\"{}\" font-size=\"{}\" font-family=\"sans-serif\" text-anchor=\"{}\" fill=\"#333333\">{}</text>\n",
            class,
            px(x),
            px(y),
            px(size),
            anchor,
            xml_escape(content)
        ));
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }

    /// Standard frame: left/bottom axis lines, ticks, and axis labels.
    fn frame(&mut self, x_axis: &Axis, y_axis: &Axis, x_label: &str, y_label: &str) {
        let (w, h) = (self.width, self.height);
        let plot_w = w - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = h - MARGIN_TOP - MARGIN_BOTTOM;
        self.line(
            MARGIN_LEFT,
            MARGIN_TOP + plot_h,
            MARGIN_LEFT + plot_w,
            MARGIN_TOP + plot_h,
            "#333333",
            "axis",
        );
        self.line(
            MARGIN_LEFT,
            MARGIN_TOP,
            MARGIN_LEFT,
            MARGIN_TOP + plot_h,
            "#333333",
            "axis",
        );
        for t in nice_ticks(x_axis, 6) {
            let x = MARGIN_LEFT + x_axis.frac(t) * plot_w;
            self.line(
                x,
                MARGIN_TOP + plot_h,
                x,
                MARGIN_TOP + plot_h + 4.0,
                "#333333",
                "tick",
            );
            self.text(x, MARGIN_TOP + plot_h + 16.0, 10.0, "middle", &fmt_tick(t), "tick-label");
        }
        for t in nice_ticks(y_axis, 6) {
            let y = MARGIN_TOP + plot_h - y_axis.frac(t) * plot_h;
            self.line(MARGIN_LEFT - 4.0, y, MARGIN_LEFT, y, "#333333", "tick");
            self.text(MARGIN_LEFT - 7.0, y + 3.0, 10.0, "end", &fmt_tick(t), "tick-label");
        }
        self.text(
            MARGIN_LEFT + plot_w / 2.0,
            h - 10.0,
            12.0,
            "middle",
            x_label,
            "axis-label",
        );
        // Y label kept horizontal near the top left corner.
        self.text(10.0, 14.0, 12.0, "start", y_label, "axis-label");
    }
}

/// Ok records that carry a full value vector, in input order.
fn plottable(records: &[TrialRecord]) -> Vec<&TrialRecord> {
    records
        .iter()
        .filter(|r| r.is_ok() && r.values.iter().all(|v| v.is_some()) && r.result.is_some())
        .collect()
}

fn involves_bayes(record: &TrialRecord) -> bool {
    record.provenance.contains(&Provenance::Bayes)
}

fn result_range(records: &[&TrialRecord]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in records {
        let v = r.result.expect("plottable record");
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

fn continuous_param<'s>(
    space: &'s SearchSpace,
    name: &str,
) -> Result<&'s ParameterKind, ReportError> {
    let spec = space
        .spec(name)
        .ok_or_else(|| ReportError::UnknownParameter(name.to_string()))?;
    if spec.kind.is_continuous() {
        Ok(&spec.kind)
    } else {
        Err(ReportError::NotContinuous(name.to_string()))
    }
}

/// Result over set index: circles for sets resolved without any surrogate
/// involvement, crosses for sets where at least one parameter came from a
/// surrogate proposal.
pub fn result_over_index(records: &[TrialRecord]) -> Result<Figure, ReportError> {
    let rows = plottable(records);
    if rows.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let x_axis = Axis::padded(rows.iter().map(|r| r.set_index as f64));
    let y_axis = Axis::padded(rows.iter().map(|r| r.result.unwrap()));

    let mut svg = Svg::new(WIDTH, HEIGHT);
    svg.frame(&x_axis, &y_axis, "set index", "result");
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;

    let mut csv = String::from("set_index,result,provenance_class\n");
    for r in &rows {
        let x = MARGIN_LEFT + x_axis.frac(r.set_index as f64) * plot_w;
        let y = MARGIN_TOP + plot_h - y_axis.frac(r.result.unwrap()) * plot_h;
        let class = if involves_bayes(r) { "bayes" } else { "random" };
        if involves_bayes(r) {
            svg.cross(x, y, 4.0, "#d62728", "marker-cross");
        } else {
            svg.circle(x, y, 3.5, "#1f77b4", "marker-circle");
        }
        csv.push_str(&format!(
            "{},{},{}\n",
            r.set_index,
            r.result.unwrap(),
            class
        ));
    }

    Ok(Figure {
        svg: svg.finish(),
        csv: Some(csv),
    })
}

/// 2-D scatter of two continuous parameters, markers colored by result, set
/// indices as labels, and a ring around the best (lowest) record.
pub fn scatter_2d(
    space: &SearchSpace,
    records: &[TrialRecord],
    px_name: &str,
    py_name: &str,
) -> Result<Figure, ReportError> {
    continuous_param(space, px_name)?;
    continuous_param(space, py_name)?;
    let rows = plottable(records);
    if rows.is_empty() {
        return Err(ReportError::EmptyInput);
    }

    let xs: Vec<f64> = rows
        .iter()
        .map(|r| r.num_value(space, px_name).expect("continuous value"))
        .collect();
    let ys: Vec<f64> = rows
        .iter()
        .map(|r| r.num_value(space, py_name).expect("continuous value"))
        .collect();
    let x_axis = Axis::padded(xs.iter().copied());
    let y_axis = Axis::padded(ys.iter().copied());
    let (lo, hi) = result_range(&rows);
    let owned: Vec<TrialRecord> = rows.iter().map(|r| (*r).clone()).collect();
    let best_index = best_trial(&owned).map(|b| b.set_index);

    let mut svg = Svg::new(WIDTH, HEIGHT);
    svg.frame(&x_axis, &y_axis, px_name, py_name);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;

    let mut csv = format!("set_index,{px_name},{py_name},result,provenance_class\n");
    for (i, r) in rows.iter().enumerate() {
        let x = MARGIN_LEFT + x_axis.frac(xs[i]) * plot_w;
        let y = MARGIN_TOP + plot_h - y_axis.frac(ys[i]) * plot_h;
        let color = result_color(r.result.unwrap(), lo, hi);
        if involves_bayes(r) {
            svg.cross(x, y, 4.0, &color, "pt-cross");
        } else {
            svg.circle(x, y, 4.0, &color, "pt-circle");
        }
        if Some(r.set_index) == best_index {
            svg.ring(x, y, 8.0, "#1f77b4", "best-ring");
        }
        svg.text(x + 5.0, y - 5.0, 8.0, "start", &r.set_index.to_string(), "idx-label");
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.set_index,
            xs[i],
            ys[i],
            r.result.unwrap(),
            if involves_bayes(r) { "bayes" } else { "random" }
        ));
    }

    Ok(Figure {
        svg: svg.finish(),
        csv: Some(csv),
    })
}

/// Parallel coordinates: one vertical axis per parameter in space order,
/// each record a polyline colored by its result. Numeric axes are min-max
/// normalized over the plotted records; categorical and opaque axes use
/// evenly spaced positions in declared order.
pub fn parallel_coords(
    space: &SearchSpace,
    records: &[TrialRecord],
) -> Result<Figure, ReportError> {
    if space.len() < 2 {
        return Err(ReportError::SingleParameterSpace);
    }
    let rows = plottable(records);
    if rows.is_empty() {
        return Err(ReportError::EmptyInput);
    }

    let n_axes = space.len();
    let width = (n_axes as f64) * 120.0 + 80.0;
    let height = HEIGHT;
    let top = 40.0;
    let bottom = 40.0;
    let axis_h = height - top - bottom;
    let axis_x = |k: usize| 60.0 + (k as f64) * 120.0;

    // Per-axis normalized position of a value in [0,1], 0 at the bottom.
    let positions: Vec<Vec<f64>> = space
        .specs()
        .iter()
        .enumerate()
        .map(|(k, spec)| match &spec.kind {
            ParameterKind::Continuous { .. } | ParameterKind::Discrete { .. } => {
                let vals: Vec<f64> = rows
                    .iter()
                    .map(|r| r.values[k].as_ref().unwrap().as_num().unwrap())
                    .collect();
                let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                vals.iter()
                    .map(|v| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 })
                    .collect()
            }
            ParameterKind::Categorical { values } | ParameterKind::Opaque { values } => rows
                .iter()
                .map(|r| {
                    let text = match r.values[k].as_ref().unwrap() {
                        ParamValue::Text(s) => s.as_str(),
                        ParamValue::Num(_) => "",
                    };
                    let ordinal = values.iter().position(|v| v == text).unwrap_or(0);
                    if values.len() > 1 {
                        ordinal as f64 / (values.len() - 1) as f64
                    } else {
                        0.5
                    }
                })
                .collect(),
        })
        .collect();

    let (lo, hi) = result_range(&rows);
    let mut svg = Svg::new(width, height);
    for (k, spec) in space.specs().iter().enumerate() {
        let x = axis_x(k);
        svg.line(x, top, x, top + axis_h, "#333333", "axis");
        svg.text(x, height - 14.0, 11.0, "middle", &spec.name, "axis-label");
    }
    for (i, r) in rows.iter().enumerate() {
        let pts: Vec<(f64, f64)> = (0..n_axes)
            .map(|k| (axis_x(k), top + axis_h - positions[k][i] * axis_h))
            .collect();
        svg.polyline(&pts, &result_color(r.result.unwrap(), lo, hi), "trial-line");
    }

    Ok(Figure {
        svg: svg.finish(),
        csv: None,
    })
}

/// Worker timeline: one lane per worker, a bar per trial from start to end,
/// with a green start triangle and a red end triangle. Time is in seconds
/// since the first trial started.
pub fn worker_timeline(records: &[TrialRecord], pool_size: usize) -> Result<Figure, ReportError> {
    if records.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    // Timeline covers every record, failed ones included: the time was spent.
    let t0 = records.iter().map(|r| r.start_ts).min().unwrap();
    let t1 = records.iter().map(|r| r.end_ts).max().unwrap();

    let max_worker = records.iter().map(|r| r.worker_id).max().unwrap();
    let lanes = pool_size.max(max_worker + 1);

    // A worker runs one trial at a time; overlap means the input is corrupt.
    let mut by_worker: Vec<Vec<&TrialRecord>> = vec![Vec::new(); lanes];
    for r in records {
        by_worker[r.worker_id].push(r);
    }
    for (worker_id, rows) in by_worker.iter_mut().enumerate() {
        rows.sort_by_key(|r| (r.start_ts, r.set_index));
        for pair in rows.windows(2) {
            if pair[1].start_ts < pair[0].end_ts {
                return Err(ReportError::OverlappingBars {
                    worker_id,
                    a: pair[0].set_index,
                    b: pair[1].set_index,
                });
            }
        }
    }

    let span_s = ((t1 - t0) as f64 / 1e6).max(1e-9);
    let x_axis = Axis {
        min: 0.0,
        max: span_s * 1.05,
    };
    let lane_h = 36.0;
    let height = 70.0 + lanes as f64 * lane_h;
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let to_x = |ts: i64| MARGIN_LEFT + x_axis.frac((ts - t0) as f64 / 1e6) * plot_w;

    let mut svg = Svg::new(WIDTH, height);
    svg.line(
        MARGIN_LEFT,
        height - 40.0,
        MARGIN_LEFT + plot_w,
        height - 40.0,
        "#333333",
        "axis",
    );
    for t in nice_ticks(&x_axis, 6) {
        let x = MARGIN_LEFT + x_axis.frac(t) * plot_w;
        svg.line(x, height - 40.0, x, height - 36.0, "#333333", "tick");
        svg.text(x, height - 24.0, 10.0, "middle", &fmt_tick(t), "tick-label");
    }
    svg.text(
        MARGIN_LEFT + plot_w / 2.0,
        height - 8.0,
        12.0,
        "middle",
        "time since start [s]",
        "axis-label",
    );

    let mut csv = String::from("worker_id,set_index,start_s,end_s\n");
    for (worker_id, rows) in by_worker.iter().enumerate() {
        let y_mid = 20.0 + worker_id as f64 * lane_h + lane_h / 2.0;
        svg.text(
            MARGIN_LEFT - 10.0,
            y_mid + 3.0,
            10.0,
            "end",
            &format!("worker {worker_id}"),
            "lane-label",
        );
        for r in rows {
            let x_start = to_x(r.start_ts);
            let x_end = to_x(r.end_ts);
            svg.rect(
                x_start,
                y_mid - 6.0,
                (x_end - x_start).max(0.5),
                12.0,
                "#9ecae1",
                "bar",
            );
            svg.triangle(x_start, y_mid, 5.0, true, "#2ca02c", "tri-start");
            svg.triangle(x_end, y_mid, 5.0, false, "#d62728", "tri-end");
            csv.push_str(&format!(
                "{},{},{},{}\n",
                worker_id,
                r.set_index,
                (r.start_ts - t0) as f64 / 1e6,
                (r.end_ts - t0) as f64 / 1e6
            ));
        }
    }

    Ok(Figure {
        svg: svg.finish(),
        csv: Some(csv),
    })
}

/// Inverse-distance-weighted interpolation (power 2) in coordinates
/// normalized to the data's bounding box. Queries within 1e-9 of a sample
/// return that sample's value exactly.
fn idw(samples: &[(f64, f64, f64)], qx: f64, qy: f64) -> f64 {
    let mut nearest = f64::INFINITY;
    let mut nearest_value = 0.0;
    let mut num = 0.0;
    let mut den = 0.0;
    for (sx, sy, sv) in samples {
        let d2 = (qx - sx) * (qx - sx) + (qy - sy) * (qy - sy);
        if d2 < nearest {
            nearest = d2;
            nearest_value = *sv;
        }
        let w = 1.0 / d2.max(f64::MIN_POSITIVE);
        num += w * sv;
        den += w;
    }
    if nearest <= 1e-18 {
        // nearest-sample override within 1e-9 distance
        nearest_value
    } else {
        num / den
    }
}

/// Interpolated contour of two continuous parameters on a grid_n x grid_n
/// cell grid, with sample markers and the best-result ring overlaid. The CSV
/// companion holds the grid values at cell centers.
pub fn contour(
    space: &SearchSpace,
    records: &[TrialRecord],
    px_name: &str,
    py_name: &str,
    grid_n: usize,
) -> Result<Figure, ReportError> {
    if grid_n < 2 {
        return Err(ReportError::BadGrid(grid_n));
    }
    continuous_param(space, px_name)?;
    continuous_param(space, py_name)?;
    let rows = plottable(records);
    if rows.is_empty() {
        return Err(ReportError::EmptyInput);
    }

    let points: Vec<(f64, f64, f64)> = rows
        .iter()
        .map(|r| {
            (
                r.num_value(space, px_name).expect("continuous value"),
                r.num_value(space, py_name).expect("continuous value"),
                r.result.unwrap(),
            )
        })
        .collect();
    let mut distinct: Vec<(f64, f64)> = Vec::new();
    for (x, y, _) in &points {
        if !distinct.iter().any(|(dx, dy)| dx == x && dy == y) {
            distinct.push((*x, *y));
        }
    }
    if distinct.len() < 3 {
        return Err(ReportError::TooFewDistinctPoints(distinct.len()));
    }

    let x_lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x_hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let y_lo = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let y_hi = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let norm_x = |v: f64| if x_hi > x_lo { (v - x_lo) / (x_hi - x_lo) } else { 0.5 };
    let norm_y = |v: f64| if y_hi > y_lo { (v - y_lo) / (y_hi - y_lo) } else { 0.5 };
    let samples: Vec<(f64, f64, f64)> = points
        .iter()
        .map(|(x, y, v)| (norm_x(*x), norm_y(*y), *v))
        .collect();

    // Grid values at cell centers, row-major from the bottom-left.
    let mut grid = vec![0.0; grid_n * grid_n];
    for j in 0..grid_n {
        for i in 0..grid_n {
            let u = (i as f64 + 0.5) / grid_n as f64;
            let v = (j as f64 + 0.5) / grid_n as f64;
            grid[j * grid_n + i] = idw(&samples, u, v);
        }
    }
    let g_lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let g_hi = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (r_lo, r_hi) = result_range(&rows);
    let lo = g_lo.min(r_lo);
    let hi = g_hi.max(r_hi);

    let x_axis = Axis::padded(points.iter().map(|p| p.0));
    let y_axis = Axis::padded(points.iter().map(|p| p.1));
    let mut svg = Svg::new(WIDTH, HEIGHT);
    svg.frame(&x_axis, &y_axis, px_name, py_name);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let data_x = |u: f64| {
        let native = if x_hi > x_lo { x_lo + u * (x_hi - x_lo) } else { x_lo };
        MARGIN_LEFT + x_axis.frac(native) * plot_w
    };
    let data_y = |v: f64| {
        let native = if y_hi > y_lo { y_lo + v * (y_hi - y_lo) } else { y_lo };
        MARGIN_TOP + plot_h - y_axis.frac(native) * plot_h
    };

    let mut csv = format!("{px_name},{py_name},value\n");
    for j in 0..grid_n {
        for i in 0..grid_n {
            let u0 = i as f64 / grid_n as f64;
            let u1 = (i + 1) as f64 / grid_n as f64;
            let v0 = j as f64 / grid_n as f64;
            let v1 = (j + 1) as f64 / grid_n as f64;
            let value = grid[j * grid_n + i];
            let x = data_x(u0);
            let y = data_y(v1);
            svg.rect(
                x,
                y,
                (data_x(u1) - x).abs().max(0.1),
                (data_y(v0) - y).abs().max(0.1),
                &result_color(value, lo, hi),
                "cell",
            );
            let cx = if x_hi > x_lo {
                x_lo + ((i as f64 + 0.5) / grid_n as f64) * (x_hi - x_lo)
            } else {
                x_lo
            };
            let cy = if y_hi > y_lo {
                y_lo + ((j as f64 + 0.5) / grid_n as f64) * (y_hi - y_lo)
            } else {
                y_lo
            };
            csv.push_str(&format!("{cx},{cy},{value}\n"));
        }
    }

    let owned: Vec<TrialRecord> = rows.iter().map(|r| (*r).clone()).collect();
    let best_index = best_trial(&owned).map(|b| b.set_index);
    for (i, r) in rows.iter().enumerate() {
        let x = data_x(samples[i].0);
        let y = data_y(samples[i].1);
        svg.circle(x, y, 3.0, &result_color(samples[i].2, lo, hi), "sample");
        svg.ring(x, y, 3.0, "#ffffff", "sample-edge");
        if Some(r.set_index) == best_index {
            svg.ring(x, y, 8.0, "#1f77b4", "best-ring");
        }
    }

    Ok(Figure {
        svg: svg.finish(),
        csv: Some(csv),
    })
}
