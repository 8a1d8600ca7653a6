//! Binary PPM (P6) rendering of maps with path and relay overlays.

use std::path::Path;

use gprelay_core::grid::{Cell, GridDims};

pub const TRANSMITTED: [u8; 3] = [255, 255, 0];
pub const ACTOR_PATH: [u8; 3] = [0, 255, 0];

/// Overlays drawn on top of the grayscale map, lowest priority first:
/// Actor-observed cells get a full blue channel, Sensor-observed cells a full
/// red channel, then the Actor path and the transmitted cells are painted
/// in solid colors.
#[derive(Debug, Clone, Default)]
pub struct Overlay {
    pub actor_seen: Vec<Cell>,
    pub sensor_seen: Vec<Cell>,
    pub actor_path: Vec<Cell>,
    pub transmitted: Vec<Cell>,
}

pub fn gray(v: f64) -> u8 {
    (255.0 * v.clamp(0.0, 1.0)).round() as u8
}

/// One pixel per cell in row-major order, row 0 first.
pub fn render(dims: GridDims, values: &[f64], overlay: &Overlay) -> Vec<u8> {
    assert_eq!(values.len(), dims.len(), "one value per cell");
    let mut px: Vec<[u8; 3]> = values.iter().map(|&v| [gray(v); 3]).collect();
    for &c in &overlay.actor_seen {
        px[dims.index(c)][2] = 255;
    }
    for &c in &overlay.sensor_seen {
        px[dims.index(c)][0] = 255;
    }
    for &c in &overlay.actor_path {
        px[dims.index(c)] = ACTOR_PATH;
    }
    for &c in &overlay.transmitted {
        px[dims.index(c)] = TRANSMITTED;
    }
    let mut out = format!("P6\n{} {}\n255\n", dims.width, dims.height).into_bytes();
    out.extend(px.into_iter().flatten());
    out
}

pub fn write_ppm(path: &Path, dims: GridDims, values: &[f64], overlay: &Overlay) -> std::io::Result<()> {
    std::fs::write(path, render(dims, values, overlay))
}

/// Every cell inside the `window`x`window` patches around `trace`.
pub fn swept_cells(dims: GridDims, trace: &[Cell], window: usize) -> Vec<Cell> {
    let mut seen = vec![false; dims.len()];
    for &p in trace {
        for c in dims.window(p, window) {
            seen[dims.index(c)] = true;
        }
    }
    dims.cells().filter(|&c| seen[dims.index(c)]).collect()
}
