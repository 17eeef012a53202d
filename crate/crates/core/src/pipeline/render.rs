//! Heatmap figures: rows of panels with a shared colour scale per row and a
//! small built-in bitmap font for titles.

use std::fs;
use std::path::Path;

use image::{ImageEncoder, Rgb, RgbImage};

use crate::error::{PgdmError, Result};
use crate::field::Field;

/// A 2D array of values, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl Plane {
    /// 2D view of a raw array. Rank-3 arrays are sliced along their first
    /// axis at `index` (default: the middle); rank 4 slices the first axis at
    /// `index` (default: last) and then takes the middle plane.
    pub fn from_array(dims: &[usize], values: &[f64], index: Option<usize>) -> Result<Self> {
        if dims.iter().product::<usize>() != values.len() || dims.contains(&0) {
            return Err(PgdmError::invalid("array dims do not match its values"));
        }
        match dims.len() {
            2 => Ok(Plane {
                rows: dims[0],
                cols: dims[1],
                values: values.to_vec(),
            }),
            3 => {
                let i = index.unwrap_or(dims[0] / 2);
                if i >= dims[0] {
                    return Err(PgdmError::invalid(format!("slice {i} out of range 0..{}", dims[0])));
                }
                let len = dims[1] * dims[2];
                Plane::from_array(&dims[1..], &values[i * len..(i + 1) * len], None)
            }
            4 => {
                let i = index.unwrap_or(dims[0] - 1);
                if i >= dims[0] {
                    return Err(PgdmError::invalid(format!("slice {i} out of range 0..{}", dims[0])));
                }
                let len: usize = dims[1..].iter().product();
                Plane::from_array(&dims[1..], &values[i * len..(i + 1) * len], None)
            }
            r => Err(PgdmError::invalid(format!("cannot render rank-{r} arrays"))),
        }
    }

    /// Trajectories show their last slice, 3D fields their middle plane.
    pub fn from_field(field: &Field) -> Result<Self> {
        let g = field.grid();
        let base = if g.is_evolution() {
            field.slice(g.time_steps - 1)
        } else {
            field.clone()
        };
        Plane::from_array(&base.grid().shape(), base.values(), None)
    }

    fn range(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    fn abs_diff(&self, other: &Plane) -> Result<Plane> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(PgdmError::invalid("panels differ in shape"));
        }
        Ok(Plane {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).collect(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Panel {
    pub title: String,
    pub plane: Plane,
}

const VIRIDIS: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

fn colour(t: f64) -> Rgb<u8> {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (VIRIDIS.len() - 1) as f64;
    let i = (x.floor() as usize).min(VIRIDIS.len() - 2);
    let f = x - i as f64;
    let c = |k: usize| (VIRIDIS[i][k] + f * (VIRIDIS[i + 1][k] - VIRIDIS[i][k])).round() as u8;
    Rgb([c(0), c(1), c(2)])
}

const GLYPHS: &[(char, [&str; 5])] = &[
    ('A', [".#.", "#.#", "###", "#.#", "#.#"]),
    ('B', ["##.", "#.#", "##.", "#.#", "##."]),
    ('C', [".##", "#..", "#..", "#..", ".##"]),
    ('D', ["##.", "#.#", "#.#", "#.#", "##."]),
    ('E', ["###", "#..", "##.", "#..", "###"]),
    ('F', ["###", "#..", "##.", "#..", "#.."]),
    ('G', [".##", "#..", "#.#", "#.#", ".##"]),
    ('H', ["#.#", "#.#", "###", "#.#", "#.#"]),
    ('I', ["###", ".#.", ".#.", ".#.", "###"]),
    ('J', ["..#", "..#", "..#", "#.#", ".#."]),
    ('K', ["#.#", "#.#", "##.", "#.#", "#.#"]),
    ('L', ["#..", "#..", "#..", "#..", "###"]),
    ('M', ["#.#", "###", "###", "#.#", "#.#"]),
    ('N', ["##.", "#.#", "#.#", "#.#", "#.#"]),
    ('O', [".#.", "#.#", "#.#", "#.#", ".#."]),
    ('P', ["##.", "#.#", "##.", "#..", "#.."]),
    ('Q', [".#.", "#.#", "#.#", "##.", ".##"]),
    ('R', ["##.", "#.#", "##.", "#.#", "#.#"]),
    ('S', [".##", "#..", ".#.", "..#", "##."]),
    ('T', ["###", ".#.", ".#.", ".#.", ".#."]),
    ('U', ["#.#", "#.#", "#.#", "#.#", "###"]),
    ('V', ["#.#", "#.#", "#.#", "#.#", ".#."]),
    ('W', ["#.#", "#.#", "###", "###", "#.#"]),
    ('X', ["#.#", "#.#", ".#.", "#.#", "#.#"]),
    ('Y', ["#.#", "#.#", ".#.", ".#.", ".#."]),
    ('Z', ["###", "..#", ".#.", "#..", "###"]),
    ('0', ["###", "#.#", "#.#", "#.#", "###"]),
    ('1', [".#.", "##.", ".#.", ".#.", "###"]),
    ('2', ["##.", "..#", ".#.", "#..", "###"]),
    ('3', ["##.", "..#", ".#.", "..#", "##."]),
    ('4', ["#.#", "#.#", "###", "..#", "..#"]),
    ('5', ["###", "#..", "##.", "..#", "##."]),
    ('6', [".##", "#..", "###", "#.#", "###"]),
    ('7', ["###", "..#", ".#.", ".#.", ".#."]),
    ('8', ["###", "#.#", "###", "#.#", "###"]),
    ('9', ["###", "#.#", "###", "..#", "##."]),
    ('.', ["...", "...", "...", "...", ".#."]),
    ('-', ["...", "...", "###", "...", "..."]),
    ('_', ["...", "...", "...", "...", "###"]),
    ('=', ["...", "###", "...", "###", "..."]),
    (':', ["...", ".#.", "...", ".#.", "..."]),
    ('(', ["..#", ".#.", ".#.", ".#.", "..#"]),
    (')', ["#..", ".#.", ".#.", ".#.", "#.."]),
    ('+', ["...", ".#.", "###", ".#.", "..."]),
    ('/', ["..#", "..#", ".#.", "#..", "#.."]),
];

const FONT_SCALE: u32 = 2;
const MARGIN: u32 = 6;
const TITLE_BAND: u32 = 5 * FONT_SCALE + 2 * MARGIN;

fn draw_text(img: &mut RgbImage, text: &str, x0: u32, y0: u32, max_width: u32) {
    let advance = 4 * FONT_SCALE;
    for (n, ch) in text.chars().enumerate() {
        let x = x0 + n as u32 * advance;
        if x + 3 * FONT_SCALE > x0 + max_width {
            break;
        }
        let Some((_, rows)) = GLYPHS.iter().find(|(c, _)| *c == ch.to_ascii_uppercase()) else {
            continue;
        };
        for (r, row) in rows.iter().enumerate() {
            for (c, px) in row.bytes().enumerate() {
                if px != b'#' {
                    continue;
                }
                for dy in 0..FONT_SCALE {
                    for dx in 0..FONT_SCALE {
                        img.put_pixel(
                            x + c as u32 * FONT_SCALE + dx,
                            y0 + r as u32 * FONT_SCALE + dy,
                            Rgb([0, 0, 0]),
                        );
                    }
                }
            }
        }
    }
}

/// Renders `rows` of panels to a PNG. Every row shares one colour scale;
/// panels are scaled up by an integer factor to at least ~160 pixels.
pub fn render_rows(rows: &[Vec<Panel>], out_path: &Path) -> Result<()> {
    if rows.is_empty() || rows.iter().any(|r| r.is_empty()) {
        return Err(PgdmError::invalid("nothing to render"));
    }
    let size = rows.iter().flatten().map(|p| p.plane.rows.max(p.plane.cols)).max().unwrap();
    let scale = (160 / size).max(1) as u32;
    let panel = size as u32 * scale;
    let cols = rows.iter().map(Vec::len).max().unwrap() as u32;
    let width = MARGIN + cols * (panel + MARGIN);
    let height = rows.len() as u32 * (TITLE_BAND + panel) + MARGIN;
    let mut img = RgbImage::from_pixel(width, height, Rgb([255, 255, 255]));
    for (r, row) in rows.iter().enumerate() {
        let (lo, hi) = row
            .iter()
            .map(|p| p.plane.range())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (c, d)| (a.min(c), b.max(d)));
        let span = hi - lo;
        let y_title = r as u32 * (TITLE_BAND + panel);
        let y0 = y_title + TITLE_BAND;
        for (c, p) in row.iter().enumerate() {
            let x0 = MARGIN + c as u32 * (panel + MARGIN);
            draw_text(&mut img, &p.title, x0, y_title + MARGIN, panel);
            let plane = &p.plane;
            for i in 0..plane.rows {
                for j in 0..plane.cols {
                    let v = plane.values[i * plane.cols + j];
                    let t = if span > 0.0 { (v - lo) / span } else { 0.0 };
                    let px = colour(t);
                    for dy in 0..scale {
                        for dx in 0..scale {
                            // first array axis runs left to right, second bottom to top
                            let x = x0 + i as u32 * scale + dx;
                            let y = y0 + (plane.cols - 1 - j) as u32 * scale + dy;
                            img.put_pixel(x, y, px);
                        }
                    }
                }
            }
        }
    }
    let mut bytes = Vec::new();
    image::codecs::png::PngEncoder::new(&mut bytes)
        .write_image(img.as_raw(), width, height, image::ExtendedColorType::Rgb8)
        .map_err(|e| PgdmError::format(out_path, e.to_string()))?;
    fs::write(out_path, bytes).map_err(|e| PgdmError::io(out_path, e))
}

/// One row of heatmaps with a shared colour scale.
pub fn render_fields(fields: &[Field], titles: &[String], out_path: &Path) -> Result<()> {
    if fields.len() != titles.len() {
        return Err(PgdmError::invalid("one title per field is required"));
    }
    let row = fields
        .iter()
        .zip(titles)
        .map(|(f, t)| {
            Ok(Panel {
                title: t.clone(),
                plane: Plane::from_field(f)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    render_rows(&[row], out_path)
}

/// Predictions plus the reference on the first row, absolute errors of
/// each prediction on the second.
pub fn render_comparison(predictions: &[(String, Plane)], reference: &Plane, out_path: &Path) -> Result<()> {
    let mut top: Vec<Panel> = predictions
        .iter()
        .map(|(t, p)| Panel {
            title: t.clone(),
            plane: p.clone(),
        })
        .collect();
    top.push(Panel {
        title: "reference".into(),
        plane: reference.clone(),
    });
    let bottom = predictions
        .iter()
        .map(|(t, p)| {
            Ok(Panel {
                title: format!("{t} err"),
                plane: p.abs_diff(reference)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    render_rows(&[top, bottom], out_path)
}
