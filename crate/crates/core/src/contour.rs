//! Marching-squares extraction of the zero level of `φ = pixel − ls`.
//!
//! Crossings are linearly interpolated along cell edges. Saddle cells are
//! resolved with the cell-centre average: a positive average joins the two
//! solid corners. Segments are oriented consistently and chained into
//! polylines, closed where they form loops.

use std::collections::HashMap;

use crate::smooth::PixelField;

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    /// Points in element coordinates; a closed polyline does not repeat its
    /// first point.
    pub points: Vec<(f64, f64)>,
    pub closed: bool,
}

impl Polyline {
    /// Signed shoelace area (closed polylines only).
    pub fn area(&self) -> f64 {
        let n = self.points.len();
        let mut s = 0.0;
        for i in 0..n {
            let (x0, y0) = self.points[i];
            let (x1, y1) = self.points[(i + 1) % n];
            s += x0 * y1 - x1 * y0;
        }
        0.5 * s
    }
}

type EdgeKey = usize;

struct Grid<'a> {
    pixels: &'a PixelField,
    ls: f64,
}

impl Grid<'_> {
    fn phi(&self, a: usize, b: usize) -> f64 {
        self.pixels.get(a, b) - self.ls
    }

    fn horizontal(&self, a: usize, b: usize) -> EdgeKey {
        2 * (b * self.pixels.nx() + a)
    }

    fn vertical(&self, a: usize, b: usize) -> EdgeKey {
        2 * (b * self.pixels.nx() + a) + 1
    }

    /// Crossing point on an edge, always interpolated from its lower-index
    /// end so both adjacent cells agree bit for bit.
    fn crossing(&self, key: EdgeKey) -> (f64, f64) {
        let nx = self.pixels.nx();
        let node = key / 2;
        let (a, b) = (node % nx, node / nx);
        let (a2, b2) = if key.is_multiple_of(2) { (a + 1, b) } else { (a, b + 1) };
        let (f0, f1) = (self.phi(a, b), self.phi(a2, b2));
        let t = f0 / (f0 - f1);
        let (x0, y0) = self.pixels.position(a, b);
        let (x1, y1) = self.pixels.position(a2, b2);
        (x0 + t * (x1 - x0), y0 + t * (y1 - y0))
    }
}

pub fn extract_contours(pixels: &PixelField, ls: f64) -> Vec<Polyline> {
    let grid = Grid { pixels, ls };
    let (nx, ny) = (pixels.nx(), pixels.ny());
    let mut segments: Vec<(EdgeKey, EdgeKey)> = Vec::new();

    for b in 0..ny.saturating_sub(1) {
        for a in 0..nx.saturating_sub(1) {
            let corners = [(a, b), (a + 1, b), (a + 1, b + 1), (a, b + 1)];
            let phi = corners.map(|(i, j)| grid.phi(i, j));
            let inside = phi.map(|p| p > 0.0);
            // Edge k runs from corner k to corner k + 1 (clockwise on screen).
            let edges = [
                grid.horizontal(a, b),
                grid.vertical(a + 1, b),
                grid.horizontal(a, b + 1),
                grid.vertical(a, b),
            ];
            let entering: Vec<usize> = (0..4).filter(|&k| !inside[k] && inside[(k + 1) % 4]).collect();
            match entering.len() {
                0 => {}
                1 => {
                    let k_in = entering[0];
                    let k_out = (0..4).find(|&k| inside[k] && !inside[(k + 1) % 4]).unwrap();
                    segments.push((edges[k_in], edges[k_out]));
                }
                _ => {
                    let centre = phi.iter().sum::<f64>() / 4.0;
                    for &k in &entering {
                        let k_out = if centre > 0.0 { (k + 3) % 4 } else { (k + 1) % 4 };
                        segments.push((edges[k], edges[k_out]));
                    }
                }
            }
        }
    }
    chain(&grid, &segments)
}

fn chain(grid: &Grid<'_>, segments: &[(EdgeKey, EdgeKey)]) -> Vec<Polyline> {
    let by_start: HashMap<EdgeKey, usize> = segments.iter().enumerate().map(|(i, s)| (s.0, i)).collect();
    let ends: HashMap<EdgeKey, usize> = segments.iter().enumerate().map(|(i, s)| (s.1, i)).collect();
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();

    let follow = |first: usize, used: &mut Vec<bool>| -> Polyline {
        let mut points = vec![grid.crossing(segments[first].0)];
        let mut cur = first;
        loop {
            used[cur] = true;
            let end = segments[cur].1;
            match by_start.get(&end) {
                Some(&next) if next == first => {
                    return Polyline { points, closed: true };
                }
                Some(&next) if !used[next] => {
                    points.push(grid.crossing(end));
                    cur = next;
                }
                _ => {
                    points.push(grid.crossing(end));
                    return Polyline { points, closed: false };
                }
            }
        }
    };

    for i in 0..segments.len() {
        if !used[i] && !ends.contains_key(&segments[i].0) {
            lines.push(follow(i, &mut used));
        }
    }
    for i in 0..segments.len() {
        if !used[i] {
            lines.push(follow(i, &mut used));
        }
    }
    lines
}
