//! Static SVG overlay of one trace plus a CSV twin with raw world
//! coordinates. World point `(x, y)` maps to SVG point
//! `(u, v) = (MARGIN + scale·(x − x0), MARGIN + scale·(y0 − y))`; the
//! values of `scale`, `x0` and `y0` are written on the root `<svg>` element
//! as `data-scale`, `data-x0` and `data-y0`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::eval::Trace;
use crate::sim::{Obb, Pose, Route};

pub const MARGIN: f64 = 20.0;
/// Longest side of the drawing area in SVG units.
pub const CANVAS: f64 = 800.0;

/// The world-to-SVG map described in the module docs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine {
    pub scale: f64,
    pub x0: f64,
    pub y0: f64,
}

impl Affine {
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (MARGIN + self.scale * (x - self.x0), MARGIN + self.scale * (self.y0 - y))
    }

    pub fn invert(&self, u: f64, v: f64) -> (f64, f64) {
        ((u - MARGIN) / self.scale + self.x0, self.y0 - (v - MARGIN) / self.scale)
    }
}

/// One drawn layer: a named polyline or closed polygon in world coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub closed: bool,
}

/// Tick whose plans are drawn: the first thinking tick, else tick 0.
pub fn focus_tick(trace: &Trace) -> Option<usize> {
    trace.plans.iter().position(|p| p.thinking).or((!trace.plans.is_empty()).then_some(0))
}

/// Every layer of the overlay, in drawing order.
pub fn layers(trace: &Trace) -> Result<Vec<Layer>> {
    let route = Route::new(trace.route.clone())?;
    let end_s = route.length();
    let along = |x: f64, y: f64| route.project(x, y).s;
    let first_s = trace.states.first().map_or(0.0, |s| along(s.ego.x, s.ego.y));
    let far_s = trace.states.iter().map(|s| along(s.ego.x, s.ego.y)).chain(trace.expert.iter().map(|p| along(p.x, p.y))).fold(first_s, f64::max);
    let (from, to) = ((first_s - 15.0).max(0.0), (far_s + 25.0).min(end_s));
    let samples: Vec<f64> = {
        let n = ((to - from) / 1.0).ceil().max(1.0) as usize;
        (0..=n).map(|i| from + (to - from) * i as f64 / n as f64).collect()
    };
    let edge = |side: f64| samples.iter().map(|&s| route.frenet_to_world(s, side * trace.road_half_width)).map(|p| (p.x, p.y)).collect::<Vec<_>>();
    let mut corridor = edge(1.0);
    corridor.extend(edge(-1.0).into_iter().rev());
    let mut out = vec![
        Layer { name: "corridor".into(), points: corridor, closed: true },
        Layer { name: "centerline".into(), points: samples.iter().map(|&s| route.pose_at(s)).map(|p| (p.x, p.y)).collect(), closed: false },
    ];
    let focus = focus_tick(trace);
    if let Some(st) = focus.and_then(|t| trace.states.get(t)) {
        for (i, (pose, &(l, w))) in st.agents.iter().zip(&trace.agent_dims).enumerate() {
            out.push(Layer { name: format!("agent{i}"), points: Obb::new(*pose, l, w).corners().to_vec(), closed: true });
        }
    }
    let xy = |ps: &[Pose]| ps.iter().map(|p| (p.x, p.y)).collect::<Vec<_>>();
    out.push(Layer { name: "expert".into(), points: xy(&trace.expert), closed: false });
    out.push(Layer { name: "executed".into(), points: trace.states.iter().map(|s| (s.ego.x, s.ego.y)).collect(), closed: false });
    if let Some(p) = focus.and_then(|t| trace.plans.get(t).map(|p| (t, p))) {
        let origin = trace.states[p.0].ego;
        let with_origin = |ps: &[Pose]| std::iter::once((origin.x, origin.y)).chain(xy(ps)).collect::<Vec<_>>();
        if let Some(init) = &p.1.initial {
            out.push(Layer { name: "initial".into(), points: with_origin(init), closed: false });
        }
        out.push(Layer { name: "refined".into(), points: with_origin(&p.1.plan), closed: false });
    }
    Ok(out)
}

fn style(name: &str) -> (&'static str, &'static str, &'static str) {
    // (stroke, fill, dash)
    match name {
        "corridor" => ("#9a9a9a", "#ececec", ""),
        "centerline" => ("#bdbdbd", "none", "6 4"),
        "expert" => ("#2e7d32", "none", "4 3"),
        "executed" => ("#1565c0", "none", ""),
        "initial" => ("#ef6c00", "none", "3 2"),
        "refined" => ("#c62828", "none", ""),
        _ => ("#6a1b9a", "#ce93d8", ""),
    }
}

/// Bounding-box fit of every layer into the canvas.
pub fn fit(layers: &[Layer]) -> Result<Affine> {
    let pts = layers.iter().flat_map(|l| l.points.iter());
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        (xmin, xmax, ymin, ymax) = (xmin.min(x), xmax.max(x), ymin.min(y), ymax.max(y));
    }
    if !xmin.is_finite() {
        return Err(Error::Format("trace has nothing to draw".into()));
    }
    let span = (xmax - xmin).max(ymax - ymin).max(1.0);
    Ok(Affine { scale: CANVAS / span, x0: xmin, y0: ymax })
}

/// Renders the SVG overlay and its CSV twin (`layer,index,x,y`).
pub fn render(trace: &Trace) -> Result<(String, String)> {
    let layers = layers(trace)?;
    let a = fit(&layers)?;
    let (w, h) = layers.iter().flat_map(|l| &l.points).fold((0.0f64, 0.0f64), |(w, h), &(x, y)| {
        let (u, v) = a.apply(x, y);
        (w.max(u), h.max(v))
    });
    let (w, h) = (w + MARGIN + 200.0, h + MARGIN);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" data-scale="{}" data-x0="{}" data-y0="{}">"#,
        a.scale, a.x0, a.y0
    );
    let _ = writeln!(
        svg,
        "<title>scenario {} ({}, {}) pdms {:.3}</title>",
        trace.scenario_seed, trace.template, trace.difficulty, trace.pdms
    );
    let mut csv = String::from("layer,index,x,y\n");
    for l in &layers {
        let (stroke, fill, dash) = style(&l.name);
        let pts: Vec<String> = l
            .points
            .iter()
            .map(|&(x, y)| {
                let (u, v) = a.apply(x, y);
                format!("{u:.4},{v:.4}")
            })
            .collect();
        let tag = if l.closed { "polygon" } else { "polyline" };
        let fill = if l.closed { fill } else { "none" };
        let dash = if dash.is_empty() { String::new() } else { format!(r#" stroke-dasharray="{dash}""#) };
        let _ = writeln!(svg, r#"<{tag} id="{}" class="layer" points="{}" stroke="{stroke}" fill="{fill}" stroke-width="2"{dash}/>"#, l.name, pts.join(" "));
        for (i, &(x, y)) in l.points.iter().enumerate() {
            let _ = writeln!(csv, "{},{i},{x},{y}", l.name);
        }
    }
    let legend: Vec<&str> = ["corridor", "expert", "executed", "initial", "refined"].into_iter().filter(|n| layers.iter().any(|l| l.name == *n)).collect();
    let lx = w - 190.0;
    let _ = writeln!(svg, r#"<g id="legend" font-family="sans-serif" font-size="13">"#);
    for (i, name) in legend.iter().chain(layers.iter().any(|l| l.name.starts_with("agent")).then_some(&"agent")).enumerate() {
        let y = MARGIN + 18.0 * i as f64;
        let (stroke, _, _) = style(name);
        let _ = writeln!(svg, r#"<line x1="{lx}" y1="{y}" x2="{}" y2="{y}" stroke="{stroke}" stroke-width="3"/><text x="{}" y="{}">{name}</text>"#, lx + 24.0, lx + 30.0, y + 4.0);
    }
    svg.push_str("</g>\n</svg>\n");
    Ok((svg, csv))
}
