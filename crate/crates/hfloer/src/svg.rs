//! Static SVG picture of a tangle: the four traced branches clipped to the
//! bounding box, every detected homoclinic point, and the fixed point. The
//! output is a pure function of the input — identical tangles give
//! byte-identical files.

use crate::geom::{BBox, P2};
use crate::tangle::Tangle;
use crate::trace::ManifoldKind;
use std::fmt::Write;

const CANVAS: f64 = 800.0;
const MARGIN: f64 = 28.0;

struct View {
    bbox: BBox,
    scale: f64,
}

impl View {
    fn new(bbox: BBox) -> Self {
        let w = bbox.max.x - bbox.min.x;
        let h = bbox.max.y - bbox.min.y;
        View { bbox, scale: CANVAS / w.max(h) }
    }

    fn map(&self, p: P2) -> (f64, f64) {
        (
            MARGIN + (p.x - self.bbox.min.x) * self.scale,
            MARGIN + (self.bbox.max.y - p.y) * self.scale,
        )
    }

    fn size(&self) -> (f64, f64) {
        let (x, y) = self.map(P2::new(self.bbox.max.x, self.bbox.min.y));
        (x + MARGIN, y + MARGIN)
    }
}

/// Fixed three-decimal screen coordinates: deterministic and fine-grained
/// below a pixel.
fn c(v: f64) -> String {
    format!("{v:.3}")
}

/// Move from an inside point toward an outside one, stopping at the frame:
/// the largest step that stays inside all four half-planes.
fn clip_toward(inside: P2, outside: P2, frame: &BBox) -> P2 {
    let d = outside - inside;
    let mut s: f64 = 1.0;
    if d.x > 0.0 {
        s = s.min((frame.max.x - inside.x) / d.x);
    } else if d.x < 0.0 {
        s = s.min((frame.min.x - inside.x) / d.x);
    }
    if d.y > 0.0 {
        s = s.min((frame.max.y - inside.y) / d.y);
    } else if d.y < 0.0 {
        s = s.min((frame.min.y - inside.y) / d.y);
    }
    inside + d * s.clamp(0.0, 1.0)
}

/// Split a vertex list into maximal runs that matter for the picture:
/// vertices inside the box, with exiting segments clipped to a slightly
/// larger frame so curves visibly cross the border. Far excursions never
/// contribute coordinates.
fn visible_runs(verts: &[P2], bbox: &BBox) -> Vec<Vec<P2>> {
    let frame = bbox.grown(0.02 * (bbox.max.x - bbox.min.x).max(bbox.max.y - bbox.min.y));
    let inside: Vec<bool> = verts.iter().map(|v| bbox.contains(*v)).collect();
    let mut runs = Vec::new();
    let mut current: Vec<P2> = Vec::new();
    for i in 0..verts.len() {
        if inside[i] {
            if current.is_empty() && i > 0 {
                current.push(clip_toward(verts[i], verts[i - 1], &frame));
            }
            current.push(verts[i]);
        } else {
            if let Some(&last) = current.last() {
                current.push(clip_toward(last, verts[i], &frame));
                runs.push(std::mem::take(&mut current));
            }
        }
    }
    if !current.is_empty() {
        runs.push(current);
    }
    runs.retain(|r| r.len() >= 2);
    runs
}

fn polyline(out: &mut String, view: &View, pts: &[P2], style: &str) {
    let mut attr = String::new();
    for (i, p) in pts.iter().enumerate() {
        let (x, y) = view.map(*p);
        if i > 0 {
            attr.push(' ');
        }
        let _ = write!(attr, "{},{}", c(x), c(y));
    }
    let _ = writeln!(out, "  <polyline points=\"{attr}\" {style}/>");
}

pub fn render_tangle_svg(t: &Tangle, bbox: BBox) -> String {
    let view = View::new(bbox);
    let (w, h) = view.size();

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {} {}\" \
         font-family=\"sans-serif\">",
        c(w),
        c(h)
    );
    let _ = writeln!(
        out,
        "  <defs><clipPath id=\"frame\"><rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/>\
         </clipPath></defs>",
        c(MARGIN),
        c(MARGIN),
        c(w - 2.0 * MARGIN),
        c(h - 2.0 * MARGIN)
    );
    let _ = writeln!(
        out,
        "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"white\" \
         stroke=\"#444444\" stroke-width=\"1\"/>",
        c(MARGIN),
        c(MARGIN),
        c(w - 2.0 * MARGIN),
        c(h - 2.0 * MARGIN)
    );

    out.push_str("  <g clip-path=\"url(#frame)\" fill=\"none\">\n");
    for curve in &t.curves {
        let style = match curve.id.kind {
            ManifoldKind::Unstable => "stroke=\"#c03a2b\" stroke-width=\"1.2\"",
            ManifoldKind::Stable => {
                "stroke=\"#2c5aa0\" stroke-width=\"1.2\" stroke-dasharray=\"6 4\""
            }
        };
        for run in visible_runs(&curve.verts, &bbox) {
            polyline(&mut out, &view, &run, style);
        }
    }
    out.push_str("  </g>\n");

    // homoclinic points: primary filled, the rest hollow
    for (i, p) in t.points.iter().enumerate() {
        let (x, y) = view.map(p.pos);
        if t.primary[i] {
            let _ = writeln!(
                out,
                "  <circle cx=\"{}\" cy=\"{}\" r=\"3.2\" fill=\"#1a7a33\" stroke=\"none\"/>",
                c(x),
                c(y)
            );
        } else {
            let _ = writeln!(
                out,
                "  <circle cx=\"{}\" cy=\"{}\" r=\"2.4\" fill=\"white\" stroke=\"#1a7a33\" \
                 stroke-width=\"1\"/>",
                c(x),
                c(y)
            );
        }
    }

    // the fixed point, labeled
    let (fx, fy) = view.map(t.x());
    let _ = writeln!(
        out,
        "  <circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"#000000\"/>",
        c(fx),
        c(fy)
    );
    let _ = writeln!(
        out,
        "  <text x=\"{}\" y=\"{}\" font-size=\"16\">x</text>",
        c(fx + 7.0),
        c(fy - 7.0)
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tangle::build_henon_tangle;

    fn test_box() -> BBox {
        BBox::new(-6.0, -6.0, 6.0, 6.0)
    }

    #[test]
    fn rendering_is_deterministic_and_counts_markers() {
        let t = build_henon_tangle(6, 0.03);
        let a = render_tangle_svg(&t, test_box());
        let b = render_tangle_svg(&t, test_box());
        assert_eq!(a, b);

        // one circle per homoclinic point plus one for the fixed point
        let circles = a.matches("<circle").count();
        assert_eq!(circles, t.points.len() + 1);
        // primary points are the filled ones
        let filled = a.matches("fill=\"#1a7a33\"").count();
        assert_eq!(filled, t.primary.iter().filter(|&&p| p).count());
        // stable branches dashed, unstable not
        assert!(a.contains("stroke-dasharray"));
        assert!(a.contains(">x</text>"));
    }

    #[test]
    fn far_excursions_are_dropped_from_the_picture() {
        let t = build_henon_tangle(9, 0.03);
        let svg = render_tangle_svg(&t, test_box());
        // the deepest curves leave the box by orders of magnitude; the
        // picture must stay bounded in coordinate range and in size
        for token in svg.split(|ch: char| ch == '"' || ch == ' ' || ch == ',') {
            if let Ok(v) = token.parse::<f64>() {
                assert!(v.abs() < 10_000.0, "runaway coordinate {v}");
            }
        }
        assert!(svg.len() < 4_000_000, "svg unexpectedly large: {}", svg.len());
    }
}
