//! Minimal hand-rolled SVG plots. Text output only — every number shown here
//! is also present in the CSVs, so plots are never the sole record.

use std::fmt::Write;

use sigtune::sim::CellReport;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

struct Canvas {
    body: String,
    width: f64,
    height: f64,
}

impl Canvas {
    fn new(width: f64, height: f64) -> Self {
        Canvas {
            body: String::new(),
            width,
            height,
        }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, dashed: bool) {
        let dash = if dashed {
            " stroke-dasharray=\"6,4\""
        } else {
            ""
        };
        let _ = writeln!(
            self.body,
            "<line x1=\"{x1:.1}\" y1=\"{y1:.1}\" x2=\"{x2:.1}\" y2=\"{y2:.1}\" stroke=\"{stroke}\" stroke-width=\"1\"{dash}/>"
        );
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"{r:.1}\" fill=\"{fill}\"/>"
        );
    }

    fn polyline(&mut self, points: &[(f64, f64)], stroke: &str) {
        if points.is_empty() {
            return;
        }
        let pts: Vec<String> = points
            .iter()
            .map(|(x, y)| format!("{x:.1},{y:.1}"))
            .collect();
        let _ = writeln!(
            self.body,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"1.5\"/>",
            pts.join(" ")
        );
    }

    fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, content: &str) {
        let _ = writeln!(
            self.body,
            "<text x=\"{x:.1}\" y=\"{y:.1}\" font-size=\"{size}\" font-family=\"sans-serif\" text-anchor=\"{anchor}\">{content}</text>"
        );
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.width, self.height, self.width, self.height, self.body
        )
    }
}

/// Axis mapping from data space to one plot rectangle.
struct Frame {
    x0: f64,
    y0: f64, // top-left of the plot rect
    w: f64,
    h: f64,
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl Frame {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let fx = if self.xmax > self.xmin {
            (x - self.xmin) / (self.xmax - self.xmin)
        } else {
            0.5
        };
        let fy = if self.ymax > self.ymin {
            (y - self.ymin) / (self.ymax - self.ymin)
        } else {
            0.5
        };
        (self.x0 + fx * self.w, self.y0 + self.h - fy * self.h)
    }

    fn draw_axes(&self, canvas: &mut Canvas, xlabel: &str, ylabel: &str, title: &str) {
        canvas.line(
            self.x0,
            self.y0 + self.h,
            self.x0 + self.w,
            self.y0 + self.h,
            "#333",
            false,
        );
        canvas.line(self.x0, self.y0, self.x0, self.y0 + self.h, "#333", false);
        canvas.text(
            self.x0 + self.w / 2.0,
            self.y0 + self.h + 32.0,
            12.0,
            "middle",
            xlabel,
        );
        canvas.text(
            self.x0 - 44.0,
            self.y0 + self.h / 2.0,
            12.0,
            "middle",
            ylabel,
        );
        canvas.text(self.x0 + self.w / 2.0, self.y0 - 8.0, 13.0, "middle", title);
        for frac in [0.0, 0.5, 1.0] {
            let xv = self.xmin + frac * (self.xmax - self.xmin);
            let yv = self.ymin + frac * (self.ymax - self.ymin);
            let (px, _) = self.map(xv, self.ymin);
            let (_, py) = self.map(self.xmin, yv);
            canvas.text(
                px,
                self.y0 + self.h + 16.0,
                10.0,
                "middle",
                &format!("{xv:.2}"),
            );
            canvas.text(self.x0 - 6.0, py + 3.0, 10.0, "end", &format!("{yv:.2}"));
        }
    }
}

/// Scatter of %TP remaining against %FP remaining, one point per cell, with
/// the equal-loss diagonal. Points above the diagonal keep more true
/// positives than false positives.
pub fn removal_scatter(cells: &[CellReport]) -> Option<String> {
    let points: Vec<(f64, f64, bool)> = cells
        .iter()
        .filter_map(|c| {
            Some((
                c.summary.fp_remaining_pct?,
                c.summary.tp_remaining_pct?,
                c.overlap,
            ))
        })
        .collect();
    if points.is_empty() {
        return None;
    }
    let mut canvas = Canvas::new(WIDTH, HEIGHT);
    let frame = Frame {
        x0: MARGIN,
        y0: MARGIN,
        w: WIDTH - 2.0 * MARGIN,
        h: HEIGHT - 2.0 * MARGIN,
        xmin: 0.0,
        xmax: 100.0,
        ymin: 0.0,
        ymax: 100.0,
    };
    frame.draw_axes(
        &mut canvas,
        "% false positives remaining",
        "% true positives remaining",
        "Remaining true vs false positives (diagonal: equal loss)",
    );
    let (dx1, dy1) = frame.map(0.0, 0.0);
    let (dx2, dy2) = frame.map(100.0, 100.0);
    canvas.line(dx1, dy1, dx2, dy2, "#888", true);
    for (fp, tp, overlap) in points {
        let (x, y) = frame.map(fp, tp);
        let color = if overlap { PALETTE[0] } else { PALETTE[1] };
        canvas.circle(x, y, 4.0, color);
    }
    canvas.text(
        WIDTH - MARGIN,
        MARGIN - 30.0,
        11.0,
        "end",
        "blue: overlap on, red: overlap off",
    );
    Some(canvas.finish())
}

/// Precision and recall against theta, one line per beta, split by overlap:
/// a 2x2 panel grid.
pub fn precision_recall_panels(cells: &[CellReport]) -> Option<String> {
    let mut thetas: Vec<f64> = cells.iter().map(|c| c.theta).collect();
    thetas.sort_by(|a, b| a.total_cmp(b));
    thetas.dedup();
    let mut betas: Vec<f64> = cells.iter().map(|c| c.beta).collect();
    betas.sort_by(|a, b| a.total_cmp(b));
    betas.dedup();
    if thetas.len() < 2 {
        return None;
    }
    let width = 900.0;
    let height = 640.0;
    let mut canvas = Canvas::new(width, height);
    let panel_w = (width - 3.0 * MARGIN) / 2.0;
    let panel_h = (height - 3.0 * MARGIN) / 2.0;
    type Metric = fn(&CellReport) -> Option<f64>;
    let metrics: [(&str, Metric); 2] = [
        ("precision", |c| c.summary.precision),
        ("recall", |c| c.summary.recall),
    ];
    for (row, overlap) in [true, false].into_iter().enumerate() {
        for (col, (name, metric)) in metrics.iter().enumerate() {
            let frame = Frame {
                x0: MARGIN + col as f64 * (panel_w + MARGIN),
                y0: MARGIN + row as f64 * (panel_h + MARGIN),
                w: panel_w,
                h: panel_h,
                xmin: thetas[0],
                xmax: *thetas.last().unwrap(),
                ymin: 0.0,
                ymax: 1.0,
            };
            let title = format!("{name}, overlap {}", if overlap { "on" } else { "off" });
            frame.draw_axes(&mut canvas, "theta", name, &title);
            for (bi, &beta) in betas.iter().enumerate() {
                let points: Vec<(f64, f64)> = thetas
                    .iter()
                    .filter_map(|&theta| {
                        let cell = cells
                            .iter()
                            .find(|c| c.theta == theta && c.beta == beta && c.overlap == overlap)?;
                        Some(frame.map(theta, metric(cell)?))
                    })
                    .collect();
                let color = PALETTE[bi % PALETTE.len()];
                canvas.polyline(&points, color);
                if let Some(&(x, y)) = points.last() {
                    canvas.text(x + 4.0, y, 10.0, "start", &format!("b={beta}"));
                }
            }
        }
    }
    Some(canvas.finish())
}

/// Cumulative distribution of per-update solve times across all cells.
pub fn solve_time_cdf(cells: &[CellReport]) -> Option<String> {
    let mut times: Vec<f64> = cells
        .iter()
        .flat_map(|c| c.report.updates.iter().map(|u| u.select_ms + u.infer_ms))
        .collect();
    if times.is_empty() {
        return None;
    }
    times.sort_by(|a, b| a.total_cmp(b));
    let max_t = *times.last().unwrap();
    let mut canvas = Canvas::new(WIDTH, HEIGHT);
    let frame = Frame {
        x0: MARGIN,
        y0: MARGIN,
        w: WIDTH - 2.0 * MARGIN,
        h: HEIGHT - 2.0 * MARGIN,
        xmin: 0.0,
        xmax: max_t.max(1e-3),
        ymin: 0.0,
        ymax: 1.0,
    };
    frame.draw_axes(
        &mut canvas,
        "solve time per update (ms)",
        "fraction of updates",
        "Cumulative distribution of solve times",
    );
    let n = times.len() as f64;
    let points: Vec<(f64, f64)> = times
        .iter()
        .enumerate()
        .map(|(i, &t)| frame.map(t, (i + 1) as f64 / n))
        .collect();
    canvas.polyline(&points, PALETTE[0]);
    Some(canvas.finish())
}
