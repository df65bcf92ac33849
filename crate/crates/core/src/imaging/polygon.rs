use serde::{Deserialize, Serialize};

use super::{BinaryMask, ImagingError, Result};

/// A sign outline in normalized image coordinates plus its ground-truth
/// class. Serialized as the `<image>.mask.json` sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonAnnotation {
    pub label: String,
    #[serde(rename = "polygon")]
    pub vertices: Vec<[f64; 2]>,
}

impl PolygonAnnotation {
    pub fn new(label: impl Into<String>, vertices: Vec<[f64; 2]>) -> Result<Self> {
        let poly = Self {
            label: label.into(),
            vertices,
        };
        poly.validate()?;
        Ok(poly)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vertices.len() < 3 {
            return Err(ImagingError::InvalidAnnotation(format!(
                "polygon needs at least 3 vertices, got {}",
                self.vertices.len()
            )));
        }
        if let Some(v) = self
            .vertices
            .iter()
            .find(|[x, y]| !(0.0..=1.0).contains(x) || !(0.0..=1.0).contains(y))
        {
            return Err(ImagingError::InvalidAnnotation(format!(
                "vertex ({}, {}) lies outside [0,1]",
                v[0], v[1]
            )));
        }
        Ok(())
    }

    /// `(min_x, min_y, max_x, max_y)` in normalized coordinates.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.vertices.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(x0, y0, x1, y1), &[x, y]| (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
        )
    }

    /// Shoelace area in normalized units.
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        let twice: f64 = (0..n)
            .map(|i| {
                let [x0, y0] = self.vertices[i];
                let [x1, y1] = self.vertices[(i + 1) % n];
                x0 * y1 - x1 * y0
            })
            .sum();
        twice.abs() / 2.0
    }
}

/// Rasterizes with the even-odd rule, sampling each pixel at its center.
pub fn rasterize_polygon(poly: &PolygonAnnotation, width: u32, height: u32) -> Result<BinaryMask> {
    poly.validate()?;
    rasterize_vertices(&poly.vertices, width, height)
}

/// Same as [`rasterize_polygon`] but without the `[0,1]` range check, for
/// outlines already mapped into another normalized frame.
pub(crate) fn rasterize_vertices(vertices: &[[f64; 2]], width: u32, height: u32) -> Result<BinaryMask> {
    if vertices.len() < 3 {
        return Err(ImagingError::InvalidAnnotation(format!(
            "polygon needs at least 3 vertices, got {}",
            vertices.len()
        )));
    }
    if width == 0 || height == 0 {
        return Err(ImagingError::InvalidInput(format!(
            "mask dimensions must be positive, got {width}x{height}"
        )));
    }
    let n = vertices.len();
    let (w, h) = (width as f64, height as f64);
    let mut bits = vec![false; width as usize * height as usize];
    let mut crossings = Vec::with_capacity(n);
    for row in 0..height {
        let py = (row as f64 + 0.5) / h;
        crossings.clear();
        for i in 0..n {
            let [xi, yi] = vertices[i];
            let [xj, yj] = vertices[(i + n - 1) % n];
            if (yi > py) != (yj > py) {
                crossings.push((xj - xi) * (py - yi) / (yj - yi) + xi);
            }
        }
        crossings.sort_by(f64::total_cmp);
        // inside iff an odd number of crossings lie strictly right of the center
        let out = &mut bits[row as usize * width as usize..(row as usize + 1) * width as usize];
        let mut k = 0;
        for (col, bit) in out.iter_mut().enumerate() {
            let px = (col as f64 + 0.5) / w;
            while k < crossings.len() && crossings[k] <= px {
                k += 1;
            }
            *bit = (crossings.len() - k) % 2 == 1;
        }
    }
    BinaryMask::new(width, height, bits)
}
