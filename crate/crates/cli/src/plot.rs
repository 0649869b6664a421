//! Static SVG rendering of a scenario, its tubes and simulated traces.
//! Output is a pure function of the inputs, with fixed number formatting.

use std::fmt::Write;

use stt_core::geometry::{Environment, Motion, Shape, Workspace};
use stt_core::tube::Tube;

use crate::files::TraceRow;
use crate::scenario::Scenario;

pub struct PlotTrace {
    pub label: String,
    pub rows: Vec<TraceRow>,
}

const PALETTE: [&str; 8] = [
    "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2", "#7f7f7f",
];

const TUBE_SAMPLES: usize = 160;
const SNAPSHOTS: usize = 5;
const WIDTH: f64 = 800.0;
const PAD: f64 = 30.0;

struct Frame {
    min_x: f64,
    max_y: f64,
    scale: f64,
}

impl Frame {
    fn x(&self, x: f64) -> f64 {
        PAD + (x - self.min_x) * self.scale
    }

    fn y(&self, y: f64) -> f64 {
        PAD + (self.max_y - y) * self.scale
    }

    fn len(&self, l: f64) -> f64 {
        l * self.scale
    }
}

fn shape_svg(out: &mut String, f: &Frame, shape: &Shape, style: &str) {
    match shape {
        Shape::Disc(b) => {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" {style}/>"#,
                f.x(b.center.x),
                f.y(b.center.y),
                f.len(b.radius)
            );
        }
        Shape::Rect(r) => {
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" {style}/>"#,
                f.x(r.min.x),
                f.y(r.max.y),
                f.len(r.max.x - r.min.x),
                f.len(r.max.y - r.min.y)
            );
        }
    }
}

fn polyline(out: &mut String, points: impl Iterator<Item = (f64, f64)>, style: &str) {
    let mut pts = String::new();
    for (x, y) in points {
        let _ = write!(pts, "{x:.2},{y:.2} ");
    }
    let _ = writeln!(out, r#"<polyline points="{}" fill="none" {style}/>"#, pts.trim_end());
}

/// Workspace, obstacles, tube bands, start and target sets, trajectories.
pub fn render_scene(scenario: &Scenario, envs: &[Environment], tubes: &[Tube], traces: &[PlotTrace]) -> String {
    let b = scenario.workspace.bounds();
    let span_x = (b.max.x - b.min.x).max(1e-9);
    let span_y = (b.max.y - b.min.y).max(1e-9);
    let scale = (WIDTH - 2.0 * PAD) / span_x;
    let f = Frame {
        min_x: b.min.x,
        max_y: b.max.y,
        scale,
    };
    let height = 2.0 * PAD + span_y * scale;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, "<title>{}</title>", escape(&scenario.name));

    match scenario.workspace {
        Workspace::Ball(ball) => shape_svg(&mut out, &f, &Shape::Disc(ball), r#"fill="none" stroke="black" stroke-width="2""#),
        Workspace::Rect(rect) => shape_svg(&mut out, &f, &Shape::Rect(rect), r#"fill="none" stroke="black" stroke-width="2""#),
    }

    let total: f64 = tubes.iter().map(|t| t.t_c).sum();
    for obs in &scenario.obstacles {
        match obs.motion {
            Motion::Static => shape_svg(&mut out, &f, &obs.shape, r##"fill="#555555" stroke="none""##),
            Motion::PiecewiseLinear { .. } => {
                for k in 0..SNAPSHOTS {
                    let t = total * k as f64 / (SNAPSHOTS - 1) as f64;
                    let opacity = 0.15 + 0.6 * k as f64 / (SNAPSHOTS - 1) as f64;
                    let style = format!(r##"fill="#aa3333" fill-opacity="{opacity:.2}" stroke="#aa3333" stroke-width="0.5""##);
                    shape_svg(&mut out, &f, &obs.shape_at(t), &style);
                }
            }
        }
    }

    for tube in tubes {
        let times: Vec<f64> = (0..=TUBE_SAMPLES)
            .map(|k| tube.t_c * k as f64 / TUBE_SAMPLES as f64)
            .collect();
        for &t in &times {
            let c = tube.eval_center(t).expect("time inside horizon");
            let r = tube.eval_radius(t).expect("time inside horizon");
            let _ = writeln!(
                out,
                r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#1f77b4" fill-opacity="0.05" stroke="none"/>"##,
                f.x(c.x),
                f.y(c.y),
                f.len(r.max(0.0))
            );
        }
        polyline(
            &mut out,
            times.iter().map(|&t| {
                let c = tube.eval_center(t).expect("time inside horizon");
                (f.x(c.x), f.y(c.y))
            }),
            r##"stroke="#1f77b4" stroke-width="1" stroke-dasharray="4 3""##,
        );
    }

    if let Some(first) = envs.first() {
        shape_svg(&mut out, &f, &Shape::Disc(first.start), r##"fill="none" stroke="#2ca02c" stroke-width="2""##);
    }
    for env in envs {
        shape_svg(&mut out, &f, &Shape::Disc(env.target), r##"fill="none" stroke="#ff7f0e" stroke-width="2""##);
    }

    for (i, tr) in traces.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        polyline(
            &mut out,
            tr.rows.iter().map(|r| (f.x(r.x1), f.y(r.x2))),
            &format!(r#"stroke="{color}" stroke-width="1.5" stroke-opacity="0.8""#),
        );
    }
    out.push_str("</svg>\n");
    out
}

struct Panel {
    top: f64,
    height: f64,
    t_max: f64,
    y_min: f64,
    y_max: f64,
}

const PANEL_LEFT: f64 = 60.0;
const PANEL_WIDTH: f64 = 700.0;

impl Panel {
    fn x(&self, t: f64) -> f64 {
        PANEL_LEFT + t / self.t_max * PANEL_WIDTH
    }

    fn y(&self, v: f64) -> f64 {
        self.top + (self.y_max - v) / (self.y_max - self.y_min) * self.height
    }

    fn frame(&self, out: &mut String, title: &str) {
        let _ = writeln!(
            out,
            r#"<rect x="{PANEL_LEFT:.0}" y="{:.0}" width="{PANEL_WIDTH:.0}" height="{:.0}" fill="none" stroke="black"/>"#,
            self.top, self.height
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.0}" y="{:.0}" font-family="sans-serif" font-size="13">{}</text>"#,
            PANEL_LEFT,
            self.top - 6.0,
            escape(title)
        );
        for k in 0..=4 {
            let v = self.y_min + (self.y_max - self.y_min) * k as f64 / 4.0;
            let _ = writeln!(
                out,
                r#"<text x="{:.0}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="end">{v:.2}</text>"#,
                PANEL_LEFT - 4.0,
                self.y(v) + 3.0
            );
        }
        for k in 0..=5 {
            let t = self.t_max * k as f64 / 5.0;
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.0}" font-family="sans-serif" font-size="10" text-anchor="middle">{t:.1}</text>"#,
                self.x(t),
                self.top + self.height + 12.0
            );
        }
    }
}

/// Distance and orientation errors against their funnel bounds.
pub fn render_errors(traces: &[PlotTrace]) -> String {
    let t_max = traces
        .iter()
        .flat_map(|tr| tr.rows.last().map(|r| r.t))
        .fold(0.0_f64, f64::max)
        .max(1e-9);
    let top = Panel {
        top: 30.0,
        height: 220.0,
        t_max,
        y_min: 0.0,
        y_max: 1.0,
    };
    let bottom = Panel {
        top: 300.0,
        height: 220.0,
        t_max,
        y_min: -1.0,
        y_max: 1.0,
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="560" viewBox="0 0 800 560">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    top.frame(&mut out, "e_d and rho_d");
    bottom.frame(&mut out, "e_theta and +/- rho_theta");

    if let Some(first) = traces.first() {
        let funnel = r#"stroke="black" stroke-width="1.5" stroke-dasharray="6 3""#;
        polyline(&mut out, first.rows.iter().map(|r| (top.x(r.t), top.y(r.rho_d))), funnel);
        polyline(&mut out, first.rows.iter().map(|r| (bottom.x(r.t), bottom.y(r.rho_theta))), funnel);
        polyline(&mut out, first.rows.iter().map(|r| (bottom.x(r.t), bottom.y(-r.rho_theta))), funnel);
    }
    for (i, tr) in traces.iter().enumerate() {
        let style = format!(r#"stroke="{}" stroke-width="1" stroke-opacity="0.8""#, PALETTE[i % PALETTE.len()]);
        polyline(
            &mut out,
            tr.rows.iter().map(|r| (top.x(r.t), top.y(r.e_d.clamp(0.0, 1.0)))),
            &style,
        );
        polyline(
            &mut out,
            tr.rows.iter().map(|r| (bottom.x(r.t), bottom.y(r.e_theta.clamp(-1.0, 1.0)))),
            &style,
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
