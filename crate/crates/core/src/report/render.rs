//! PNG heatmaps of per-node grid values, with optional cell labels drawn
//! in a built-in 5x7 bitmap font. No font files, no text shaping: labels
//! are uppercased ASCII and anything unmapped renders as a hollow box.

use std::collections::BTreeMap;
use std::path::Path;

use image::{ImageFormat, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::esom::GridCoord;

/// Three-point color ramp. Values map low -> mid -> high after linear
/// min-max normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Palette {
    pub low: [u8; 3],
    pub mid: [u8; 3],
    pub high: [u8; 3],
}

impl Default for Palette {
    fn default() -> Self {
        Palette {
            low: [38, 84, 144],
            mid: [240, 238, 230],
            high: [150, 75, 43],
        }
    }
}

#[derive(Debug, Clone)]
pub struct HeatmapOptions {
    /// Square pixel size of one grid cell.
    pub cell_size: u32,
    pub palette: Palette,
    /// Labels drawn at the top-left of their cell; repeated coordinates
    /// stack downward.
    pub labels: Vec<(GridCoord, String)>,
}

impl Default for HeatmapOptions {
    fn default() -> Self {
        HeatmapOptions {
            cell_size: 16,
            palette: Palette::default(),
            labels: Vec::new(),
        }
    }
}

fn lerp(a: [u8; 3], b: [u8; 3], t: f64) -> [u8; 3] {
    let mut out = [0u8; 3];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = (a[i] as f64 + (b[i] as f64 - a[i] as f64) * t).round() as u8;
    }
    out
}

impl Palette {
    /// `t` in [0, 1]: 0 -> low, 0.5 -> mid, 1 -> high.
    pub fn color_at(&self, t: f64) -> [u8; 3] {
        let t = t.clamp(0.0, 1.0);
        if t < 0.5 {
            lerp(self.low, self.mid, 2.0 * t)
        } else {
            lerp(self.mid, self.high, 2.0 * t - 1.0)
        }
    }
}

/// Rasterizes row-major `values` (length `width * height`) to a PNG at
/// `path`. A constant input renders entirely in the palette midpoint.
pub fn render_heatmap(
    values: &[f64],
    width: usize,
    height: usize,
    opts: &HeatmapOptions,
    path: &Path,
) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Input("heatmap grid must be non-empty".into()));
    }
    if values.len() != width * height {
        return Err(Error::Input(format!(
            "heatmap expects {} values for a {}x{} grid, got {}",
            width * height,
            width,
            height,
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("heatmap values must be finite".into()));
    }
    if opts.cell_size == 0 {
        return Err(Error::Input("heatmap cell size must be positive".into()));
    }

    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;

    let cs = opts.cell_size;
    let mut img = RgbImage::new(width as u32 * cs, height as u32 * cs);
    let mut cell_fill = vec![[0u8; 3]; values.len()];
    for row in 0..height {
        for col in 0..width {
            let v = values[row * width + col];
            let t = if span > 0.0 { (v - min) / span } else { 0.5 };
            let rgb = opts.palette.color_at(t);
            cell_fill[row * width + col] = rgb;
            for dy in 0..cs {
                for dx in 0..cs {
                    img.put_pixel(col as u32 * cs + dx, row as u32 * cs + dy, Rgb(rgb));
                }
            }
        }
    }

    let mut stacked: BTreeMap<GridCoord, u32> = BTreeMap::new();
    for (coord, text) in &opts.labels {
        if coord.col >= width || coord.row >= height {
            return Err(Error::Input(format!(
                "label {text:?} at {coord} is outside the {width}x{height} grid"
            )));
        }
        let slot = stacked.entry(*coord).or_insert(0);
        let x = coord.col as u32 * cs + 1;
        let y = coord.row as u32 * cs + 1 + *slot * (GLYPH_HEIGHT + 1);
        *slot += 1;
        let fill = cell_fill[coord.row * width + coord.col];
        let ink = if luminance(fill) > 0.5 { [0, 0, 0] } else { [255, 255, 255] };
        draw_text(&mut img, x, y, text, Rgb(ink));
    }

    img.save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::Format(format!("writing {}: {e}", path.display())))
}

fn luminance(rgb: [u8; 3]) -> f64 {
    (0.299 * rgb[0] as f64 + 0.587 * rgb[1] as f64 + 0.114 * rgb[2] as f64) / 255.0
}

const GLYPH_WIDTH: u32 = 5;
const GLYPH_HEIGHT: u32 = 7;
const GLYPH_ADVANCE: u32 = GLYPH_WIDTH + 1;

fn draw_text(img: &mut RgbImage, x: u32, y: u32, text: &str, ink: Rgb<u8>) {
    let (w, h) = img.dimensions();
    for (i, c) in text.chars().enumerate() {
        let rows = glyph(c.to_ascii_uppercase());
        let gx = x + i as u32 * GLYPH_ADVANCE;
        for (dy, bits) in rows.iter().enumerate() {
            for dx in 0..GLYPH_WIDTH {
                if bits & (1 << (GLYPH_WIDTH - 1 - dx)) != 0 {
                    let px = gx + dx;
                    let py = y + dy as u32;
                    if px < w && py < h {
                        img.put_pixel(px, py, ink);
                    }
                }
            }
        }
    }
}

/// Row bitmaps, bit 4 leftmost. Unmapped characters get a hollow box.
fn glyph(c: char) -> [u8; 7] {
    match c {
        'A' => [0b01110, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001],
        'B' => [0b11110, 0b10001, 0b10001, 0b11110, 0b10001, 0b10001, 0b11110],
        'C' => [0b01110, 0b10001, 0b10000, 0b10000, 0b10000, 0b10001, 0b01110],
        'D' => [0b11110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b11110],
        'E' => [0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b11111],
        'F' => [0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b10000],
        'G' => [0b01110, 0b10001, 0b10000, 0b10111, 0b10001, 0b10001, 0b01111],
        'H' => [0b10001, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001],
        'I' => [0b01110, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110],
        'J' => [0b00111, 0b00010, 0b00010, 0b00010, 0b00010, 0b10010, 0b01100],
        'K' => [0b10001, 0b10010, 0b10100, 0b11000, 0b10100, 0b10010, 0b10001],
        'L' => [0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b11111],
        'M' => [0b10001, 0b11011, 0b10101, 0b10101, 0b10001, 0b10001, 0b10001],
        'N' => [0b10001, 0b11001, 0b10101, 0b10011, 0b10001, 0b10001, 0b10001],
        'O' => [0b01110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110],
        'P' => [0b11110, 0b10001, 0b10001, 0b11110, 0b10000, 0b10000, 0b10000],
        'Q' => [0b01110, 0b10001, 0b10001, 0b10001, 0b10101, 0b10010, 0b01101],
        'R' => [0b11110, 0b10001, 0b10001, 0b11110, 0b10100, 0b10010, 0b10001],
        'S' => [0b01111, 0b10000, 0b10000, 0b01110, 0b00001, 0b00001, 0b11110],
        'T' => [0b11111, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100],
        'U' => [0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110],
        'V' => [0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01010, 0b00100],
        'W' => [0b10001, 0b10001, 0b10001, 0b10101, 0b10101, 0b11011, 0b10001],
        'X' => [0b10001, 0b10001, 0b01010, 0b00100, 0b01010, 0b10001, 0b10001],
        'Y' => [0b10001, 0b10001, 0b01010, 0b00100, 0b00100, 0b00100, 0b00100],
        'Z' => [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b11111],
        '0' => [0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110],
        '1' => [0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110],
        '2' => [0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111],
        '3' => [0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110],
        '4' => [0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010],
        '5' => [0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110],
        '6' => [0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110],
        '7' => [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000],
        '8' => [0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110],
        '9' => [0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100],
        ' ' => [0, 0, 0, 0, 0, 0, 0],
        '-' => [0, 0, 0, 0b01110, 0, 0, 0],
        '_' => [0, 0, 0, 0, 0, 0, 0b11111],
        ':' => [0, 0b00100, 0b00100, 0, 0b00100, 0b00100, 0],
        '.' => [0, 0, 0, 0, 0, 0b00100, 0b00100],
        ',' => [0, 0, 0, 0, 0b00100, 0b00100, 0b01000],
        '(' => [0b00010, 0b00100, 0b01000, 0b01000, 0b01000, 0b00100, 0b00010],
        ')' => [0b01000, 0b00100, 0b00010, 0b00010, 0b00010, 0b00100, 0b01000],
        '|' => [0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100],
        '>' => [0b10000, 0b01000, 0b00100, 0b00010, 0b00100, 0b01000, 0b10000],
        _ => [0b11111, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b11111],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read_back(path: &Path) -> RgbImage {
        image::open(path).unwrap().to_rgb8()
    }

    #[test]
    fn constant_grid_renders_in_midpoint_color() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flat.png");
        let opts = HeatmapOptions { cell_size: 4, ..Default::default() };
        render_heatmap(&[3.5; 6], 3, 2, &opts, &path).unwrap();
        let img = read_back(&path);
        let mid = Rgb(opts.palette.mid);
        assert!(img.pixels().all(|p| *p == mid));
    }

    #[test]
    fn extremes_map_to_palette_endpoints() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("checker.png");
        let opts = HeatmapOptions { cell_size: 2, ..Default::default() };
        render_heatmap(&[0.0, 1.0, 1.0, 0.0], 2, 2, &opts, &path).unwrap();
        let img = read_back(&path);
        assert_eq!(*img.get_pixel(0, 0), Rgb(opts.palette.low));
        assert_eq!(*img.get_pixel(2, 0), Rgb(opts.palette.high));
        assert_eq!(*img.get_pixel(0, 2), Rgb(opts.palette.high));
        assert_eq!(*img.get_pixel(2, 2), Rgb(opts.palette.low));
    }

    #[test]
    fn image_dimensions_scale_with_cell_size() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dims.png");
        let opts = HeatmapOptions { cell_size: 7, ..Default::default() };
        render_heatmap(&[0.0; 20], 5, 4, &opts, &path).unwrap();
        let img = read_back(&path);
        assert_eq!(img.dimensions(), (35, 28));
    }

    #[test]
    fn labels_ink_pixels_in_their_cell() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labeled.png");
        let coord = GridCoord { col: 1, row: 0 };
        let opts = HeatmapOptions {
            cell_size: 16,
            labels: vec![(coord, "AB".to_string())],
            ..Default::default()
        };
        render_heatmap(&[0.0, 0.5, 1.0, 0.25], 2, 2, &opts, &path).unwrap();
        let img = read_back(&path);
        let inked = (16..32)
            .flat_map(|x| (0..16).map(move |y| (x, y)))
            .filter(|&(x, y)| {
                let p = *img.get_pixel(x, y);
                p == Rgb([0, 0, 0]) || p == Rgb([255, 255, 255])
            })
            .count();
        assert!(inked > 0, "label left no ink");
    }

    #[test]
    fn stacked_labels_do_not_overwrite_each_other() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stacked.png");
        let coord = GridCoord { col: 0, row: 0 };
        let opts = HeatmapOptions {
            cell_size: 32,
            labels: vec![(coord, "I".to_string()), (coord, "I".to_string())],
            ..Default::default()
        };
        render_heatmap(&[0.0, 1.0], 2, 1, &opts, &path).unwrap();
        let img = read_back(&path);
        // Cell value is the minimum, so the fill is dark and ink is white.
        // The second label starts one glyph row lower than the first.
        let inked_rows: Vec<u32> = (0..32)
            .filter(|&y| (0..32).any(|x| *img.get_pixel(x, y) == Rgb([255, 255, 255])))
            .collect();
        assert!(inked_rows.len() > GLYPH_HEIGHT as usize, "{inked_rows:?}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.png");
        let opts = HeatmapOptions::default();
        assert!(render_heatmap(&[0.0; 3], 2, 2, &opts, &path).is_err());
        assert!(render_heatmap(&[f64::NAN; 4], 2, 2, &opts, &path).is_err());
        assert!(render_heatmap(&[0.0; 4], 0, 4, &opts, &path).is_err());
        let out_of_grid = HeatmapOptions {
            labels: vec![(GridCoord { col: 5, row: 0 }, "X".into())],
            ..Default::default()
        };
        assert!(render_heatmap(&[0.0; 4], 2, 2, &out_of_grid, &path).is_err());
    }

    #[test]
    fn ramp_is_monotone_in_red_toward_high() {
        let p = Palette::default();
        assert_eq!(p.color_at(0.0), p.low);
        assert_eq!(p.color_at(0.5), p.mid);
        assert_eq!(p.color_at(1.0), p.high);
        let reds: Vec<u8> = (0..=10).map(|i| p.color_at(i as f64 / 10.0)[2]).collect();
        // Blue channel rises to the midpoint then falls toward brown.
        let peak = reds.iter().enumerate().max_by_key(|(_, v)| **v).unwrap().0;
        assert_eq!(peak, 5);
    }
}
