//! Deterministic SVG scatter plots of the complex plane.

use std::path::Path;

use outliers_core::region::Region;
use outliers_core::PointSet;

const SIZE: f64 = 600.0;
const MARGIN: f64 = 30.0;
const PALETTE: [&str; 4] = ["#1f4e9c", "#c0392b", "#27864a", "#8e44ad"];

/// Points drawn in one colour.
#[derive(Debug, Clone)]
pub struct Layer<'a> {
    pub label: &'a str,
    pub points: &'a PointSet,
}

/// Square world window `[cx − h, cx + h] × [cy − h, cy + h]`.
#[derive(Debug, Clone, Copy)]
struct Window {
    cx: f64,
    cy: f64,
    half: f64,
}

impl Window {
    fn fit(layers: &[Layer<'_>], overlays: &[Region]) -> Self {
        let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        let mut grow = |x0: f64, x1: f64, y0: f64, y1: f64| {
            b = (b.0.min(x0), b.1.max(x1), b.2.min(y0), b.3.max(y1));
        };
        for l in layers {
            for z in l.points.iter().filter(|z| z.re.is_finite() && z.im.is_finite()) {
                grow(z.re, z.re, z.im, z.im);
            }
        }
        for r in overlays {
            let (x0, x1, y0, y1) = overlay_box(r);
            grow(x0, x1, y0, y1);
        }
        if !b.0.is_finite() {
            return Window { cx: 0.0, cy: 0.0, half: 1.0 };
        }
        let half = (0.5 * (b.1 - b.0)).max(0.5 * (b.3 - b.2)).max(1e-3) * 1.08;
        Window {
            cx: 0.5 * (b.0 + b.1),
            cy: 0.5 * (b.2 + b.3),
            half,
        }
    }

    fn scale(&self) -> f64 {
        (SIZE - 2.0 * MARGIN) / (2.0 * self.half)
    }

    fn x(&self, re: f64) -> f64 {
        MARGIN + (re - (self.cx - self.half)) * self.scale()
    }

    fn y(&self, im: f64) -> f64 {
        MARGIN + ((self.cy + self.half) - im) * self.scale()
    }
}

fn overlay_box(r: &Region) -> (f64, f64, f64, f64) {
    match r {
        Region::ComplementDisk { center, radius } => (center.re - radius, center.re + radius, center.im - radius, center.im + radius),
        Region::Difference { a, b } => {
            let (p, q) = (overlay_box(a), overlay_box(b));
            (p.0.min(q.0), p.1.max(q.1), p.2.min(q.2), p.3.max(q.3))
        }
        other => other.bounding_box().expect("bounded region"),
    }
}

fn draw_region(out: &mut String, w: &Window, r: &Region) {
    let circle = |out: &mut String, c: num_complex::Complex64, rad: f64| {
        if rad > 0.0 {
            out.push_str(&format!(
                "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"{:.3}\" fill=\"none\" stroke=\"#555555\" stroke-width=\"1\" stroke-dasharray=\"4 3\"/>\n",
                w.x(c.re),
                w.y(c.im),
                rad * w.scale()
            ));
        }
    };
    match r {
        Region::Disk { center, radius } | Region::ComplementDisk { center, radius } => circle(out, *center, *radius),
        Region::Annulus { center, r_in, r_out } => {
            circle(out, *center, *r_in);
            circle(out, *center, *r_out);
        }
        Region::Rectangle {
            re_min,
            re_max,
            im_min,
            im_max,
        } => out.push_str(&format!(
            "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"none\" stroke=\"#555555\" stroke-width=\"1\" stroke-dasharray=\"4 3\"/>\n",
            w.x(*re_min),
            w.y(*im_max),
            (re_max - re_min) * w.scale(),
            (im_max - im_min) * w.scale()
        )),
        Region::Difference { a, b } => {
            draw_region(out, w, a);
            draw_region(out, w, b);
        }
    }
}

/// Renders layers of points with region boundaries; identical inputs give identical bytes.
pub fn render_scatter(layers: &[Layer<'_>], overlays: &[Region]) -> String {
    let w = Window::fit(layers, overlays);
    let mut out = String::new();
    out.push_str(&format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n"
    ));
    out.push_str(&format!("<rect x=\"0\" y=\"0\" width=\"{SIZE}\" height=\"{SIZE}\" fill=\"white\"/>\n"));
    let (x0, x1) = (w.x(w.cx - w.half), w.x(w.cx + w.half));
    let (y0, y1) = (w.y(w.cy + w.half), w.y(w.cy - w.half));
    if (w.cy - w.half..=w.cy + w.half).contains(&0.0) {
        out.push_str(&format!(
            "<line x1=\"{x0:.3}\" y1=\"{:.3}\" x2=\"{x1:.3}\" y2=\"{:.3}\" stroke=\"#999999\" stroke-width=\"0.8\"/>\n",
            w.y(0.0),
            w.y(0.0)
        ));
    }
    if (w.cx - w.half..=w.cx + w.half).contains(&0.0) {
        out.push_str(&format!(
            "<line x1=\"{:.3}\" y1=\"{y0:.3}\" x2=\"{:.3}\" y2=\"{y1:.3}\" stroke=\"#999999\" stroke-width=\"0.8\"/>\n",
            w.x(0.0),
            w.x(0.0)
        ));
    }
    out.push_str(&format!(
        "<rect x=\"{x0:.3}\" y=\"{y0:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n",
        x1 - x0,
        y1 - y0
    ));
    out.push_str(&format!(
        "<text x=\"{x0:.3}\" y=\"{:.3}\" font-family=\"sans-serif\" font-size=\"11\">[{:.3}, {:.3}] x [{:.3}, {:.3}]</text>\n",
        y1 + 16.0,
        w.cx - w.half,
        w.cx + w.half,
        w.cy - w.half,
        w.cy + w.half
    ));
    for r in overlays {
        draw_region(&mut out, &w, r);
    }
    for (k, layer) in layers.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        out.push_str(&format!("<g fill=\"{colour}\" fill-opacity=\"0.75\"><title>{}</title>\n", escape(layer.label)));
        for z in layer.points.iter().filter(|z| z.re.is_finite() && z.im.is_finite()) {
            out.push_str(&format!("<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"1.8\"/>\n", w.x(z.re), w.y(z.im)));
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes a single-layer scatter of `points` with `overlays` to `path`.
pub fn emit_scatter(points: &PointSet, overlays: &[Region], path: &Path) -> std::io::Result<()> {
    std::fs::write(path, render_scatter(&[Layer { label: "points", points }], overlays))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn empty_plot_has_axes_and_overlays() {
        let s = render_scatter(&[], &[Region::annulus(Complex64::new(0.0, 0.0), 0.5, 1.0)]);
        assert!(s.starts_with("<?xml") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<circle").count(), 2);
        assert!(s.contains("<line"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let p = PointSet::new((0..50).map(|k| Complex64::from_polar(1.0, k as f64)).collect());
        let layers = [Layer { label: "a", points: &p }];
        assert_eq!(render_scatter(&layers, &[]), render_scatter(&layers, &[]));
    }
}
