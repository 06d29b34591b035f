//! Manhattan street-grid random mobility for ground devices.
//!
//! Devices walk along an axis-aligned grid of streets with spacing
//! [`SimConfig::street_block`]. At each intersection a device continues
//! straight, turns left or turns right with the configured probabilities
//! (restricted to existing streets); it reverses only at a dead end,
//! which on this grid means a forced turn at the boundary.

use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::world::Point;

/// Compass heading of a walking device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Heading {
    North,
    South,
    East,
    West,
}

impl Heading {
    pub fn unit(self) -> (f64, f64) {
        match self {
            Heading::North => (0.0, 1.0),
            Heading::South => (0.0, -1.0),
            Heading::East => (1.0, 0.0),
            Heading::West => (-1.0, 0.0),
        }
    }

    pub fn reverse(self) -> Heading {
        match self {
            Heading::North => Heading::South,
            Heading::South => Heading::North,
            Heading::East => Heading::West,
            Heading::West => Heading::East,
        }
    }

    pub fn left(self) -> Heading {
        match self {
            Heading::North => Heading::West,
            Heading::West => Heading::South,
            Heading::South => Heading::East,
            Heading::East => Heading::North,
        }
    }

    pub fn right(self) -> Heading {
        self.left().reverse()
    }

    pub const ALL: [Heading; 4] = [Heading::North, Heading::South, Heading::East, Heading::West];
}

/// The axis-aligned street grid spanning the service area.
///
/// Streets run along `x = i·block` and `y = j·block` for
/// `i, j ∈ 0..=nodes_per_side-1`; every intersection has 2–4 neighbors
/// and the graph is connected by construction.
#[derive(Debug, Clone, Copy)]
pub struct StreetGrid {
    pub block: f64,
    pub side: f64,
    pub nodes_per_side: usize,
}

impl StreetGrid {
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            block: cfg.street_block,
            side: cfg.area_side,
            nodes_per_side: cfg.grid_nodes_per_side(),
        }
    }

    /// Returns whether `p` lies on a street (within `tol` meters).
    pub fn on_grid(&self, p: Point, tol: f64) -> bool {
        if p.x < -tol || p.y < -tol || p.x > self.side + tol || p.y > self.side + tol {
            return false;
        }
        let off_x = dist_to_multiple(p.x, self.block);
        let off_y = dist_to_multiple(p.y, self.block);
        off_x <= tol || off_y <= tol
    }

    /// Snaps a heading to one that stays on the street through `p`.
    ///
    /// Mid-block on a vertical street only North/South are valid, and
    /// symmetrically for horizontal streets; at intersections any heading
    /// works.
    pub fn valid_heading(&self, p: Point, h: Heading) -> bool {
        let on_vertical = dist_to_multiple(p.x, self.block) < 1e-9;
        let on_horizontal = dist_to_multiple(p.y, self.block) < 1e-9;
        match h {
            Heading::North | Heading::South => on_vertical,
            Heading::East | Heading::West => on_horizontal,
        }
    }

    /// Whether a step of `heading` from intersection `p` stays in bounds.
    fn street_exists(&self, p: Point, heading: Heading) -> bool {
        let (dx, dy) = heading.unit();
        let nx = p.x + dx * self.block;
        let ny = p.y + dy * self.block;
        (-1e-9..=self.side + 1e-9).contains(&nx) && (-1e-9..=self.side + 1e-9).contains(&ny)
    }

    /// Distance along `heading` from `p` to the next intersection.
    fn dist_to_next_node(&self, p: Point, heading: Heading) -> f64 {
        let along = match heading {
            Heading::North => self.block - dist_along(p.y, self.block),
            Heading::South => {
                let d = dist_along(p.y, self.block);
                if d < 1e-9 {
                    self.block
                } else {
                    d
                }
            }
            Heading::East => self.block - dist_along(p.x, self.block),
            Heading::West => {
                let d = dist_along(p.x, self.block);
                if d < 1e-9 {
                    self.block
                } else {
                    d
                }
            }
        };
        if along < 1e-9 {
            self.block
        } else {
            along
        }
    }
}

/// Offset of `x` above the largest multiple of `block` at or below it.
fn dist_along(x: f64, block: f64) -> f64 {
    let r = x - libm::floor(x / block) * block;
    if r > block - 1e-9 {
        0.0
    } else {
        r
    }
}

fn dist_to_multiple(x: f64, block: f64) -> f64 {
    let r = dist_along(x, block);
    r.min(block - r)
}

/// A position off every street, rejected by [`step_device`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffGridError(pub Point);

impl fmt::Display for OffGridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "position ({}, {}) is not on the street grid", self.0.x, self.0.y)
    }
}

impl core::error::Error for OffGridError {}

/// Advances one device by `speed · T` meters along the street grid.
///
/// At intersections the next street is drawn with the configured
/// straight/left/right probabilities, renormalized over the streets that
/// exist; heading outward at the boundary therefore forces a turn. The
/// walk reverses only when no other street is available.
pub fn step_device<R: Rng + ?Sized>(
    pos: Point,
    heading: Heading,
    speed: f64,
    grid: &StreetGrid,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<(Point, Heading), OffGridError> {
    if !grid.on_grid(pos, 1e-6) {
        return Err(OffGridError(pos));
    }
    let mut p = pos;
    let mut h = heading;
    let at_node = dist_to_multiple(p.x, grid.block) < 1e-9 && dist_to_multiple(p.y, grid.block) < 1e-9;
    if at_node {
        // Standing on an intersection: the heading must point along an
        // existing street or the walk would leave the grid.
        if !grid.street_exists(p, h) {
            h = pick_heading(p, h, grid, cfg, rng);
        }
    } else if !grid.valid_heading(p, h) {
        // Mid-block the only legal motion is along the street axis.
        let along = if dist_to_multiple(p.x, grid.block) < 1e-9 {
            [Heading::North, Heading::South]
        } else {
            [Heading::East, Heading::West]
        };
        h = along[rng.gen_range(0..2)];
    }
    let mut remaining = speed * cfg.slot_duration;
    while remaining > 1e-12 {
        let to_node = grid.dist_to_next_node(p, h);
        let step = remaining.min(to_node);
        let (dx, dy) = h.unit();
        p.x += dx * step;
        p.y += dy * step;
        remaining -= step;
        if step >= to_node - 1e-12 {
            // Landed on an intersection: snap and maybe turn.
            p.x = libm::round(p.x / grid.block) * grid.block;
            p.y = libm::round(p.y / grid.block) * grid.block;
            h = pick_heading(p, h, grid, cfg, rng);
        }
    }
    p.x = p.x.clamp(0.0, grid.side);
    p.y = p.y.clamp(0.0, grid.side);
    Ok((p, h))
}

/// Draws the next heading at intersection `p` given the arrival heading.
fn pick_heading<R: Rng + ?Sized>(
    p: Point,
    arrived: Heading,
    grid: &StreetGrid,
    cfg: &SimConfig,
    rng: &mut R,
) -> Heading {
    let straight = (arrived, cfg.turn_prob_straight);
    let left = (arrived.left(), cfg.turn_prob_left);
    let right = (
        arrived.right(),
        1.0 - cfg.turn_prob_straight - cfg.turn_prob_left,
    );
    let mut total = 0.0;
    let mut options: [(Heading, f64); 3] = [straight, left, right];
    let mut n = 0;
    for &(h, w) in &[straight, left, right] {
        if grid.street_exists(p, h) && w > 0.0 {
            options[n] = (h, w);
            total += w;
            n += 1;
        }
    }
    if n == 0 {
        // Dead end (or all weights zero): any existing street, else reverse.
        for h in Heading::ALL {
            if grid.street_exists(p, h) && h != arrived.reverse() {
                return h;
            }
        }
        return arrived.reverse();
    }
    let draw = rng.gen_range(0.0..total);
    let mut acc = 0.0;
    for &(h, w) in options.iter().take(n) {
        acc += w;
        if draw < acc {
            return h;
        }
    }
    options[n - 1].0
}
