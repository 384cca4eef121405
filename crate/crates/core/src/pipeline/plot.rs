//! Line-strip and bar-chart rendering of plot series, plus PPM/SVG output.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::raster::PlotSeries;
use super::{ColorMode, PlotMode};
use crate::error::{validation, Result};

/// Per-field colours used in [`ColorMode::Uniform`].
pub const PALETTE: [[f64; 3]; 8] = [
    [0.122, 0.467, 0.706],
    [1.000, 0.498, 0.055],
    [0.173, 0.627, 0.173],
    [0.839, 0.153, 0.157],
    [0.580, 0.404, 0.741],
    [0.549, 0.337, 0.294],
    [0.890, 0.467, 0.761],
    [0.498, 0.498, 0.498],
];

const BACKGROUND: [u8; 3] = [255, 255, 255];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldGeometry {
    pub name: String,
    /// One point per bin: `(x + 0.5, (1 - y) * H)`.
    pub points: Vec<[f64; 2]>,
    pub colors: Vec<[u8; 3]>,
}

/// An RGB raster plus the vector geometry it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub width: usize,
    pub height: usize,
    pub mode: PlotMode,
    pub pixels: Vec<[u8; 3]>,
    pub geometry: Vec<FieldGeometry>,
}

fn to_u8(c: [f64; 3]) -> [u8; 3] {
    c.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
}

impl Plot {
    fn put(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.pixels[y as usize * self.width + x as usize] = c;
        }
    }

    fn line(&mut self, (x0, y0): (i64, i64), (x1, y1): (i64, i64), c: [u8; 3]) {
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
        let (mut x, mut y, mut err) = (x0, y0, dx + dy);
        loop {
            self.put(x, y, c);
            if x == x1 && y == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    /// Binary PPM (P6).
    pub fn write_ppm(&self, w: &mut impl Write) -> Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.pixels.len() * 3 + 20);
        self.write_ppm(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn to_svg(&self) -> String {
        let (w, h) = (self.width, self.height);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
        );
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let hex = |c: [u8; 3]| format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2]);
        for g in &self.geometry {
            let _ = writeln!(s, r#"<g id="{}">"#, xml_escape(&g.name));
            match self.mode {
                PlotMode::Bars => {
                    for (p, &c) in g.points.iter().zip(&g.colors) {
                        let top = p[1];
                        let _ = writeln!(
                            s,
                            r#"<rect x="{}" y="{top:.3}" width="1" height="{:.3}" fill="{}"/>"#,
                            p[0] - 0.5,
                            h as f64 - top,
                            hex(c)
                        );
                    }
                }
                PlotMode::Polyline => {
                    for (pair, &c) in g.points.windows(2).zip(&g.colors) {
                        let _ = writeln!(
                            s,
                            r#"<line x1="{}" y1="{:.3}" x2="{}" y2="{:.3}" stroke="{}" stroke-width="1"/>"#,
                            pair[0][0],
                            pair[0][1],
                            pair[1][0],
                            pair[1][1],
                            hex(c)
                        );
                    }
                }
            }
            let _ = writeln!(s, "</g>");
        }
        s.push_str("</svg>\n");
        s
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Draws every field's series, in field order, onto a `W x height` raster.
pub fn generate_plot(
    series: &PlotSeries,
    mode: PlotMode,
    color: ColorMode,
    height: usize,
) -> Result<Plot> {
    if height < 2 {
        return Err(validation("plot height must be at least 2"));
    }
    let w = series.width;
    let hf = height as f64;
    let mut plot = Plot {
        width: w,
        height,
        mode,
        pixels: vec![BACKGROUND; w * height],
        geometry: Vec::with_capacity(series.fields.len()),
    };
    for (fi, field) in series.fields.iter().enumerate() {
        let colors: Vec<[u8; 3]> = match color {
            ColorMode::TransferFunction => field.rgb.iter().map(|&c| to_u8(c)).collect(),
            ColorMode::Uniform => vec![to_u8(PALETTE[fi % PALETTE.len()]); w],
        };
        let points: Vec<[f64; 2]> = field
            .y
            .iter()
            .enumerate()
            .map(|(x, &y)| [x as f64 + 0.5, (1.0 - y.clamp(0.0, 1.0)) * hf])
            .collect();
        let row = |py: f64| (py.floor() as i64).min(height as i64 - 1);
        match mode {
            PlotMode::Polyline => {
                for x in 0..w {
                    let a = (x as i64, row(points[x][1]));
                    let b = if x + 1 < w {
                        (x as i64 + 1, row(points[x + 1][1]))
                    } else {
                        a
                    };
                    plot.line(a, b, colors[x]);
                }
            }
            PlotMode::Bars => {
                for x in 0..w {
                    if !field.coverage[x] {
                        continue;
                    }
                    let top = (points[x][1].round() as i64).min(height as i64);
                    for y in top..height as i64 {
                        plot.put(x as i64, y, colors[x]);
                    }
                }
            }
        }
        plot.geometry.push(FieldGeometry {
            name: field.name.clone(),
            points,
            colors,
        });
    }
    Ok(plot)
}
