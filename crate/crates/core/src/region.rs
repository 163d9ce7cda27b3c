use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Closed planar region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Region {
    Disk {
        center: Complex64,
        radius: f64,
    },
    Annulus {
        center: Complex64,
        r_in: f64,
        r_out: f64,
    },
    /// `{ |z − center| ≥ radius }`.
    ComplementDisk {
        center: Complex64,
        radius: f64,
    },
    Rectangle {
        re_min: f64,
        re_max: f64,
        im_min: f64,
        im_max: f64,
    },
    /// Points of `a` not in `b`.
    Difference {
        a: Box<Region>,
        b: Box<Region>,
    },
}

impl Region {
    pub fn disk(center: Complex64, radius: f64) -> Self {
        Region::Disk { center, radius }
    }

    pub fn annulus(center: Complex64, r_in: f64, r_out: f64) -> Self {
        Region::Annulus { center, r_in, r_out }
    }

    /// Everything inside the square `[-extent, extent]²` except `inner`.
    pub fn outside(inner: Region, extent: f64) -> Self {
        Region::Difference {
            a: Box::new(Region::Rectangle {
                re_min: -extent,
                re_max: extent,
                im_min: -extent,
                im_max: extent,
            }),
            b: Box::new(inner),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        match self {
            Region::Disk { center, radius } | Region::ComplementDisk { center, radius } => {
                if !finite(center) || !(*radius > 0.0 && radius.is_finite()) {
                    return Err(format!("disk needs a finite center and positive radius, got {center}, {radius}"));
                }
            }
            Region::Annulus { center, r_in, r_out } => {
                if !finite(center) || !(*r_in >= 0.0 && r_in < r_out && r_out.is_finite()) {
                    return Err(format!("annulus needs 0 ≤ r_in < r_out, got {r_in}, {r_out}"));
                }
            }
            Region::Rectangle {
                re_min,
                re_max,
                im_min,
                im_max,
            } => {
                if !(re_min < re_max && im_min < im_max) || ![re_min, re_max, im_min, im_max].iter().all(|x| x.is_finite()) {
                    return Err("rectangle bounds must be finite with min < max".into());
                }
            }
            Region::Difference { a, b } => {
                a.validate()?;
                b.validate()?;
            }
        }
        Ok(())
    }

    pub fn contains(&self, z: Complex64) -> bool {
        match self {
            Region::Disk { center, radius } => (z - center).norm() <= *radius,
            Region::Annulus { center, r_in, r_out } => {
                let d = (z - center).norm();
                d >= *r_in && d <= *r_out
            }
            Region::ComplementDisk { center, radius } => (z - center).norm() >= *radius,
            Region::Rectangle {
                re_min,
                re_max,
                im_min,
                im_max,
            } => z.re >= *re_min && z.re <= *re_max && z.im >= *im_min && z.im <= *im_max,
            Region::Difference { a, b } => a.contains(z) && !b.contains(z),
        }
    }

    /// Enlarges the region by `eps` (shrinks it for negative `eps`). Radii are
    /// clamped at zero.
    pub fn dilate(&self, eps: f64) -> Region {
        match self {
            Region::Disk { center, radius } => Region::Disk {
                center: *center,
                radius: (radius + eps).max(0.0),
            },
            Region::Annulus { center, r_in, r_out } => Region::Annulus {
                center: *center,
                r_in: (r_in - eps).max(0.0),
                r_out: (r_out + eps).max(0.0),
            },
            Region::ComplementDisk { center, radius } => Region::ComplementDisk {
                center: *center,
                radius: (radius - eps).max(0.0),
            },
            Region::Rectangle {
                re_min,
                re_max,
                im_min,
                im_max,
            } => Region::Rectangle {
                re_min: re_min - eps,
                re_max: re_max + eps,
                im_min: im_min - eps,
                im_max: im_max + eps,
            },
            Region::Difference { a, b } => Region::Difference {
                a: Box::new(a.dilate(eps)),
                b: Box::new(b.dilate(-eps)),
            },
        }
    }

    /// Axis-aligned box `(re_min, re_max, im_min, im_max)` containing the region,
    /// `None` for unbounded regions.
    pub fn bounding_box(&self) -> Option<(f64, f64, f64, f64)> {
        match self {
            Region::Disk { center, radius } => Some((center.re - radius, center.re + radius, center.im - radius, center.im + radius)),
            Region::Annulus { center, r_out, .. } => Some((center.re - r_out, center.re + r_out, center.im - r_out, center.im + r_out)),
            Region::ComplementDisk { .. } => None,
            Region::Rectangle {
                re_min,
                re_max,
                im_min,
                im_max,
            } => Some((*re_min, *re_max, *im_min, *im_max)),
            Region::Difference { a, .. } => a.bounding_box(),
        }
    }

    /// Roughly `n` points on the boundary, deterministic.
    pub fn boundary_grid(&self, n: usize) -> Vec<Complex64> {
        let n = n.max(4);
        let circle = |c: Complex64, r: f64, m: usize| -> Vec<Complex64> {
            (0..m).map(|k| c + Complex64::from_polar(r, 2.0 * PI * k as f64 / m as f64)).collect()
        };
        match self {
            Region::Disk { center, radius } | Region::ComplementDisk { center, radius } => circle(*center, *radius, n),
            Region::Annulus { center, r_in, r_out } => {
                let m_out = ((n as f64) * r_out / (r_in + r_out)).ceil() as usize;
                let mut pts = circle(*center, *r_out, m_out.max(2));
                if *r_in > 0.0 {
                    pts.extend(circle(*center, *r_in, (n - m_out.min(n)).max(2)));
                }
                pts
            }
            Region::Rectangle {
                re_min,
                re_max,
                im_min,
                im_max,
            } => {
                let per_side = (n / 4).max(1);
                let corners = [
                    Complex64::new(*re_min, *im_min),
                    Complex64::new(*re_max, *im_min),
                    Complex64::new(*re_max, *im_max),
                    Complex64::new(*re_min, *im_max),
                ];
                let mut pts = Vec::with_capacity(4 * per_side);
                for s in 0..4 {
                    let (p, q) = (corners[s], corners[(s + 1) % 4]);
                    for k in 0..per_side {
                        pts.push(p + (q - p) * (k as f64 / per_side as f64));
                    }
                }
                pts
            }
            Region::Difference { a, b } => {
                let mut pts: Vec<Complex64> = a.boundary_grid(n).into_iter().filter(|&z| !b.contains(z)).collect();
                pts.extend(b.boundary_grid(n).into_iter().filter(|&z| a.contains(z)));
                pts
            }
        }
    }
}
