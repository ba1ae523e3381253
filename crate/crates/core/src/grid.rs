//! Rectangular regions, uniform grids and their PGM/CSV renderings.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub const fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub const fn square(half: f64) -> Self {
        Self::new(-half, half, -half, half)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite())
            && self.x_max > self.x_min
            && self.y_max > self.y_min;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("degenerate region {self:?}")))
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x < self.x_max && y >= self.y_min && y < self.y_max
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.x_min + dx, self.x_max + dx, self.y_min + dy, self.y_max + dy)
    }

    /// `n + 1` equally spaced abscissae including both edges.
    pub fn vertex_xs(&self, n: usize) -> Vec<f64> {
        linspace(self.x_min, self.x_max, n)
    }

    pub fn vertex_ys(&self, n: usize) -> Vec<f64> {
        linspace(self.y_min, self.y_max, n)
    }

    /// Rectangle spanned by the centers of an `nx × ny` cell grid.
    pub fn cell_centers_rect(&self, nx: usize, ny: usize) -> Rect {
        let hx = 0.5 * self.width() / nx as f64;
        let hy = 0.5 * self.height() / ny as f64;
        Rect::new(self.x_min + hx, self.x_max - hx, self.y_min + hy, self.y_max - hy)
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![a];
    }
    (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

/// Row-major grid: `values[j * nx + i]`, `j` indexing `y` upward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    region: Rect,
    nx: usize,
    ny: usize,
    values: Vec<T>,
}

impl<T: Copy> Grid<T> {
    pub fn new(region: Rect, nx: usize, ny: usize, values: Vec<T>) -> Self {
        assert_eq!(values.len(), nx * ny, "grid storage does not match its shape");
        Self { region, nx, ny, values }
    }

    pub fn filled(region: Rect, nx: usize, ny: usize, value: T) -> Self {
        Self::new(region, nx, ny, vec![value; nx * ny])
    }

    pub fn region(&self) -> Rect {
        self.region
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[j * self.nx + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.values[j * self.nx + i] = v;
    }

    pub fn dx(&self) -> f64 {
        self.region.width() / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.region.height() / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.region.x_min + (i as f64 + 0.5) * self.dx(),
            self.region.y_min + (j as f64 + 0.5) * self.dy(),
        ]
    }

    /// Cell containing `(x, y)`, if inside the region.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        if !self.region.contains(x, y) {
            return None;
        }
        let i = (((x - self.region.x_min) / self.dx()) as usize).min(self.nx - 1);
        let j = (((y - self.region.y_min) / self.dy()) as usize).min(self.ny - 1);
        Some((i, j))
    }
}

impl Grid<f64> {
    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, f64::NEG_INFINITY);
        for (k, &v) in self.values.iter().enumerate() {
            if v > best.1 {
                best = (k, v);
            }
        }
        (best.0 % self.nx, best.0 / self.nx)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PgmEncoding {
    /// `P2`, ASCII.
    Ascii,
    /// `P5`, one byte per pixel.
    Binary,
}

/// Metadata written next to a PGM so raw values can be recovered:
/// `value ≈ pixel / 255 · scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgmSidecar {
    pub region: Rect,
    pub width: usize,
    pub height: usize,
    pub maxval: u8,
    pub scale: f64,
    pub encoding: PgmEncoding,
    pub top_row: String,
}

/// Writes `grid` as an 8-bit PGM with the top image row at `y_max` and
/// the maximum value mapped to 255.
pub fn write_pgm<W: Write>(grid: &Grid<f64>, encoding: PgmEncoding, mut w: W) -> Result<PgmSidecar> {
    let scale = grid.max_value().max(0.0);
    let pixel = |v: f64| -> u8 {
        if scale > 0.0 {
            (255.0 * (v / scale).clamp(0.0, 1.0)).round() as u8
        } else {
            0
        }
    };
    let (nx, ny) = (grid.nx(), grid.ny());
    match encoding {
        PgmEncoding::Ascii => {
            writeln!(w, "P2\n{nx} {ny}\n255")?;
            for j in (0..ny).rev() {
                let row: Vec<String> = (0..nx).map(|i| pixel(grid.get(i, j)).to_string()).collect();
                writeln!(w, "{}", row.join(" "))?;
            }
        }
        PgmEncoding::Binary => {
            write!(w, "P5\n{nx} {ny}\n255\n")?;
            let mut bytes = Vec::with_capacity(nx * ny);
            for j in (0..ny).rev() {
                bytes.extend((0..nx).map(|i| pixel(grid.get(i, j))));
            }
            w.write_all(&bytes)?;
        }
    }
    Ok(PgmSidecar {
        region: grid.region(),
        width: nx,
        height: ny,
        maxval: 255,
        scale,
        encoding,
        top_row: "y_max".into(),
    })
}

/// Raw grid values as CSV rows `x,y,value` at cell centers.
pub fn write_grid_csv<W: Write>(grid: &Grid<f64>, mut w: W) -> Result<()> {
    writeln!(w, "x,y,value")?;
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let [x, y] = grid.cell_center(i, j);
            writeln!(w, "{},{},{}", crate::io::fmt_f64(x), crate::io::fmt_f64(y), crate::io::fmt_f64(grid.get(i, j)))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locate_and_centers_agree() {
        let g = Grid::filled(Rect::square(1.0), 4, 2, 0.0);
        for j in 0..2 {
            for i in 0..4 {
                let [x, y] = g.cell_center(i, j);
                assert_eq!(g.locate(x, y), Some((i, j)));
            }
        }
        assert_eq!(g.locate(1.0, 0.0), None);
        assert_eq!(g.locate(-1.0, -1.0), Some((0, 0)));
    }

    #[test]
    fn pgm_ascii_layout() {
        let mut g = Grid::filled(Rect::square(1.0), 2, 2, 0.0);
        g.set(1, 1, 2.0);
        g.set(0, 0, 1.0);
        let mut out = Vec::new();
        let side = write_pgm(&g, PgmEncoding::Ascii, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "P2\n2 2\n255\n0 255\n128 0\n");
        assert_eq!(side.scale, 2.0);
    }

    #[test]
    fn pgm_binary_layout() {
        let mut g = Grid::filled(Rect::square(1.0), 3, 1, 0.0);
        g.set(2, 0, 1.0);
        let mut out = Vec::new();
        write_pgm(&g, PgmEncoding::Binary, &mut out).unwrap();
        assert_eq!(&out[..11], b"P5\n3 1\n255\n");
        assert_eq!(&out[11..], &[0, 0, 255]);
    }

    #[test]
    fn linspace_includes_edges() {
        let xs = Rect::new(-1.0, 3.0, 0.0, 1.0).vertex_xs(4);
        assert_eq!(xs, vec![-1.0, 0.0, 1.0, 2.0, 3.0]);
    }
}
