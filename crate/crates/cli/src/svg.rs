//! Static SVG of the KKT candidates over the parameter box.

use std::fmt::Write;

const PLOT: f64 = 460.0;
const LEFT: f64 = 70.0;
const TOP: f64 = 40.0;
const CELLS: usize = 48;
const PAD: f64 = 0.08;

pub struct CandidatePoint {
    pub case_id: u8,
    pub u: f64,
    pub v: f64,
    pub value: f64,
    pub feasible: bool,
}

/// Objective surface over `[0, extent_u] × [0, extent_v]` with its candidates.
pub struct Surface<'a> {
    pub title: String,
    pub u_label: &'a str,
    pub v_label: &'a str,
    pub extent_u: f64,
    pub extent_v: f64,
    pub objective: &'a dyn Fn(f64, f64) -> f64,
    pub candidates: Vec<CandidatePoint>,
    pub winner: usize,
}

struct View {
    u0: f64,
    u1: f64,
    v0: f64,
    v1: f64,
}

impl View {
    fn new(extent_u: f64, extent_v: f64) -> Self {
        let span_u = extent_u.max(0.1);
        let span_v = extent_v.max(0.1);
        View {
            u0: -PAD * span_u,
            u1: extent_u + PAD * span_u,
            v0: -PAD * span_v,
            v1: extent_v + PAD * span_v,
        }
    }

    fn x(&self, u: f64) -> f64 {
        LEFT + (u - self.u0) / (self.u1 - self.u0) * PLOT
    }

    fn y(&self, v: f64) -> f64 {
        TOP + PLOT - (v - self.v0) / (self.v1 - self.v0) * PLOT
    }

    fn contains(&self, u: f64, v: f64) -> bool {
        (self.u0..=self.u1).contains(&u) && (self.v0..=self.v1).contains(&v)
    }
}

/// Light for high objective, dark for low.
fn shade(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let mix = |lo: f64, hi: f64| (lo + (hi - lo) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(24.0, 247.0), mix(52.0, 244.0), mix(110.0, 236.0))
}

pub fn render(s: &Surface<'_>) -> String {
    let view = View::new(s.extent_u, s.extent_v);
    let mut out = String::new();
    let width = LEFT + PLOT + 440.0;
    let height = TOP + PLOT + 60.0;
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<title>{}</title>"#, s.title);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let du = (view.u1 - view.u0) / CELLS as f64;
    let dv = (view.v1 - view.v0) / CELLS as f64;
    let mut values = Vec::with_capacity(CELLS * CELLS);
    for r in 0..CELLS {
        for c in 0..CELLS {
            let u = view.u0 + (c as f64 + 0.5) * du;
            let v = view.v0 + (r as f64 + 0.5) * dv;
            values.push((*s.objective)(u, v));
        }
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let cell_w = PLOT / CELLS as f64;
    let _ = writeln!(out, r#"<g id="surface" shape-rendering="crispEdges">"#);
    for r in 0..CELLS {
        for c in 0..CELLS {
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                LEFT + c as f64 * cell_w,
                TOP + PLOT - (r + 1) as f64 * cell_w,
                cell_w + 0.05,
                cell_w + 0.05,
                shade((values[r * CELLS + c] - lo) / span)
            );
        }
    }
    let _ = writeln!(out, "</g>");

    let (bx0, by0, bx1, by1) = (view.x(0.0), view.y(s.extent_v), view.x(s.extent_u), view.y(0.0));
    let _ = writeln!(
        out,
        r#"<rect id="box" x="{bx0:.2}" y="{by0:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black" stroke-width="1.5"/>"#,
        bx1 - bx0,
        by1 - by0
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{} ∈ [0, {:.4}]</text>"#,
        LEFT + PLOT / 2.0,
        TOP + PLOT + 35.0,
        s.u_label,
        s.extent_u
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{} ∈ [0, {:.4}]</text>"#,
        TOP + PLOT / 2.0,
        TOP + PLOT / 2.0,
        s.v_label,
        s.extent_v
    );
    let _ = writeln!(out, r#"<text x="{LEFT}" y="24" font-size="14">{}</text>"#, s.title);

    let _ = writeln!(out, r#"<g id="candidates">"#);
    for (idx, k) in s.candidates.iter().enumerate() {
        if !view.contains(k.u, k.v) {
            continue;
        }
        let (x, y) = (view.x(k.u), view.y(k.v));
        let fill = if k.feasible { "#f2a900" } else { "none" };
        let _ = writeln!(
            out,
            r##"<circle class="case-{}" cx="{x:.2}" cy="{y:.2}" r="5" fill="{fill}" stroke="#f2a900" stroke-width="2"/>"##,
            k.case_id
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" fill="black">{}</text>"#,
            x + 7.0,
            y - 7.0,
            k.case_id
        );
        if idx == s.winner {
            let _ = writeln!(
                out,
                r##"<circle id="winner" cx="{x:.2}" cy="{y:.2}" r="10" fill="none" stroke="#d62728" stroke-width="3"/>"##
            );
        }
    }
    let _ = writeln!(out, "</g>");

    let tx = LEFT + PLOT + 30.0;
    let _ = writeln!(out, r#"<g id="legend">"#);
    let _ = writeln!(
        out,
        r#"<text x="{tx}" y="{TOP}" font-weight="bold" font-family="monospace" xml:space="preserve">case  {:>8}  {:>8}  {:>9}  KKT</text>"#,
        s.u_label, s.v_label, "f"
    );
    for (idx, k) in s.candidates.iter().enumerate() {
        let mark = if idx == s.winner { " ← optimum" } else { "" };
        let _ = writeln!(
            out,
            r#"<text x="{tx}" y="{:.2}" font-family="monospace" xml:space="preserve">{:>4}  {:>8.4}  {:>8.4}  {:>9.5}  {}{mark}</text>"#,
            TOP + 18.0 * (idx + 1) as f64,
            k.case_id,
            k.u,
            k.v,
            k.value,
            if k.feasible { "yes" } else { "no" }
        );
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, "</svg>");
    out
}
