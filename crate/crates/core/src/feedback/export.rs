use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{FigureData, Marker, Rectangle};
use crate::distributions::{LineStyle, LocationScaleDistribution};

const SVG_WIDTH: f64 = 640.0;
const SVG_HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 56.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 44.0;
/// Polylines are thinned to at most this many vertices.
const SVG_MAX_VERTICES: usize = 800;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMeta {
    pub label: String,
    pub dist: LocationScaleDistribution,
    pub style: LineStyle,
}

/// Everything in a figure except the sampled curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureSidecar {
    pub curves: Vec<CurveMeta>,
    pub markers: Vec<Marker>,
    pub rectangles: Vec<Rectangle>,
}

impl FigureData {
    /// Columns `x,cdf_<label>...`, one row per grid point.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<String> =
            std::iter::once("x".to_string()).chain(self.curves.iter().map(|c| format!("cdf_{}", c.label))).collect();
        w.write_record(&header).expect("writing to memory");
        for (i, x) in self.x.iter().enumerate() {
            let row: Vec<String> =
                std::iter::once(x.to_string()).chain(self.curves.iter().map(|c| c.cdf[i].to_string())).collect();
            w.write_record(&row).expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
    }

    pub fn sidecar(&self) -> FigureSidecar {
        FigureSidecar {
            curves: self
                .curves
                .iter()
                .map(|c| CurveMeta { label: c.label.clone(), dist: c.dist, style: c.style })
                .collect(),
            markers: self.markers.clone(),
            rectangles: self.rectangles.clone(),
        }
    }

    pub fn sidecar_json(&self) -> String {
        serde_json::to_string_pretty(&self.sidecar()).expect("sidecar serializes")
    }

    /// Standalone SVG: CDF curves (solid, dotted or dashed by family), the
    /// judgements as dots and the imprecision boxes as shaded rectangles.
    pub fn to_svg(&self) -> String {
        let (x_lo, x_hi) = match (self.x.first(), self.x.last()) {
            (Some(&a), Some(&b)) if b > a => (a, b),
            _ => (-1.0, 1.0),
        };
        let plot_w = SVG_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = SVG_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let sx = |x: f64| MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
        let sy = |p: f64| MARGIN_TOP + (1.0 - p) * plot_h;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);

        // axes and ticks
        let _ = writeln!(
            s,
            r#"<g stroke="black" fill="none"><line x1="{l}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{l}" y1="{t}" x2="{l}" y2="{b}"/></g>"#,
            l = MARGIN_LEFT,
            r = MARGIN_LEFT + plot_w,
            t = MARGIN_TOP,
            b = MARGIN_TOP + plot_h,
        );
        for k in 0..=4 {
            let p = k as f64 / 4.0;
            let _ = writeln!(
                s,
                r#"<line x1="{x1}" y1="{y:.2}" x2="{l}" y2="{y:.2}" stroke="black"/><text x="{tx}" y="{ty:.2}" text-anchor="end">{p}</text>"#,
                x1 = MARGIN_LEFT - 4.0,
                l = MARGIN_LEFT,
                y = sy(p),
                tx = MARGIN_LEFT - 6.0,
                ty = sy(p) + 4.0,
            );
        }
        for k in 0..=4 {
            let x = x_lo + (x_hi - x_lo) * k as f64 / 4.0;
            let _ = writeln!(
                s,
                r#"<line x1="{px:.2}" y1="{b}" x2="{px:.2}" y2="{b4}" stroke="black"/><text x="{px:.2}" y="{ty}" text-anchor="middle">{x:.2}</text>"#,
                px = sx(x),
                b = MARGIN_TOP + plot_h,
                b4 = MARGIN_TOP + plot_h + 4.0,
                ty = MARGIN_TOP + plot_h + 16.0,
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">x</text>"#,
            MARGIN_LEFT + plot_w / 2.0,
            SVG_HEIGHT - 6.0
        );

        for r in &self.rectangles {
            let _ = writeln!(
                s,
                r##"<rect class="box" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="#9ab" fill-opacity="0.35" stroke="#567"/>"##,
                sx(r.x_min),
                sy(r.p_max),
                sx(r.x_max) - sx(r.x_min),
                sy(r.p_min) - sy(r.p_max),
            );
        }

        let stride = self.x.len().div_ceil(SVG_MAX_VERTICES).max(1);
        for c in &self.curves {
            let dash = match c.style {
                LineStyle::Solid => "",
                LineStyle::Dotted => r#" stroke-dasharray="2 3""#,
                LineStyle::Dashed => r#" stroke-dasharray="8 5""#,
            };
            let mut points = String::new();
            let last = self.x.len().saturating_sub(1);
            for i in (0..self.x.len()).step_by(stride).chain((!last.is_multiple_of(stride)).then_some(last)) {
                let _ = write!(points, "{:.2},{:.2} ", sx(self.x[i]), sy(c.cdf[i]));
            }
            let _ = writeln!(
                s,
                r#"<polyline class="curve" data-label="{}" points="{}" fill="none" stroke="black" stroke-width="1.5"{}/>"#,
                c.label,
                points.trim_end(),
                dash
            );
        }

        for m in &self.markers {
            let _ = writeln!(
                s,
                r#"<circle class="judgement" cx="{:.3}" cy="{:.3}" r="3.5" fill="black"/>"#,
                sx(m.x),
                sy(m.p)
            );
        }

        for (i, c) in self.curves.iter().enumerate() {
            let y = MARGIN_TOP + 12.0 + 16.0 * i as f64;
            let x0 = MARGIN_LEFT + 12.0;
            let dash = match c.style {
                LineStyle::Solid => "",
                LineStyle::Dotted => r#" stroke-dasharray="2 3""#,
                LineStyle::Dashed => r#" stroke-dasharray="8 5""#,
            };
            let _ = writeln!(
                s,
                r#"<line x1="{x0}" y1="{y}" x2="{}" y2="{y}" stroke="black" stroke-width="1.5"{dash}/><text x="{}" y="{}">{}</text>"#,
                x0 + 28.0,
                x0 + 34.0,
                y + 4.0,
                c.label
            );
        }
        s.push_str("</svg>\n");
        s
    }
}
