//! Motion primitives for the state lattice.
//!
//! Every sequence of (speed, steering) controls up to `max_length` steps is
//! rolled out with a kinematic bicycle model from the origin, once per
//! discrete heading. Rollouts ending close to a cell center with a heading
//! close to a lattice heading become primitives, deduplicated by their
//! discrete offset.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EnvError;

const CACHE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrimitiveParams {
    pub headings: usize,
    pub speeds: Vec<f64>,
    pub steering: Vec<f64>,
    pub wheelbase: f64,
    pub max_length: usize,
    /// Integration substeps per control step.
    pub substeps: usize,
    /// Maximum distance from a cell center, per axis, in cells.
    pub position_tolerance: f64,
    /// Maximum distance from a lattice heading, in radians.
    pub heading_tolerance: f64,
    pub max_per_heading: usize,
}

impl Default for PrimitiveParams {
    fn default() -> Self {
        Self {
            headings: 8,
            speeds: vec![1.0, -1.0],
            steering: vec![0.0, 0.6, -0.6],
            wheelbase: 1.0,
            max_length: 5,
            substeps: 8,
            position_tolerance: 0.2,
            heading_tolerance: 0.15,
            max_per_heading: 20,
        }
    }
}

impl PrimitiveParams {
    /// Sixteen headings and a larger primitive budget.
    pub fn paper_scale() -> Self {
        Self {
            headings: 16,
            max_per_heading: 66,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::BadParam(m.to_string()));
        if self.headings == 0 {
            return bad("headings must be positive");
        }
        if self.speeds.is_empty() || self.steering.is_empty() {
            return bad("speed and steering sets must be non-empty");
        }
        if self
            .speeds
            .iter()
            .chain(&self.steering)
            .any(|v| !v.is_finite())
        {
            return bad("speeds and steering angles must be finite");
        }
        if self.max_length == 0 || self.substeps == 0 || self.max_per_heading == 0 {
            return bad("max_length, substeps and max_per_heading must be positive");
        }
        if !(self.wheelbase > 0.0) {
            return bad("wheelbase must be positive");
        }
        if !(self.position_tolerance > 0.0 && self.heading_tolerance > 0.0) {
            return bad("snapping tolerances must be positive");
        }
        Ok(())
    }

    /// Hex digest identifying these parameters in cache file names.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("params serialize");
        Sha256::digest(&bytes)
            .iter()
            .take(12)
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionPrimitive {
    pub dx: i32,
    pub dy: i32,
    /// Heading change in lattice heading units, in `0..headings`.
    pub dtheta: u32,
    /// Cells entered along the rollout, relative to the start cell, ending
    /// at `(dx, dy)`. The start cell is not included.
    pub cells: Vec<(i32, i32)>,
    pub speed: f64,
    pub controls: Vec<f64>,
}

impl MotionPrimitive {
    pub fn duration(&self) -> usize {
        self.controls.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveTable {
    params: PrimitiveParams,
    per_heading: Vec<Vec<MotionPrimitive>>,
}

impl PrimitiveTable {
    pub fn generate(params: &PrimitiveParams) -> Result<Self, EnvError> {
        params.validate()?;
        let per_heading: Vec<Vec<MotionPrimitive>> = (0..params.headings)
            .map(|h| primitives_for_heading(params, h))
            .collect();
        if let Some(h) = per_heading.iter().position(Vec::is_empty) {
            return Err(EnvError::BadParam(format!(
                "no motion primitive survived filtering for heading {h}"
            )));
        }
        Ok(Self {
            params: params.clone(),
            per_heading,
        })
    }

    pub fn cache_file_name(params: &PrimitiveParams) -> String {
        format!("primitives-v{CACHE_VERSION}-{}.json", params.digest())
    }

    /// Reads the table from `dir` if a cache file for `params` exists and
    /// matches, otherwise generates and writes it.
    pub fn load_or_generate(params: &PrimitiveParams, dir: &Path) -> Result<Self, EnvError> {
        let path: PathBuf = dir.join(Self::cache_file_name(params));
        if let Ok(text) = fs::read_to_string(&path) {
            match serde_json::from_str::<Self>(&text) {
                Ok(t) if &t.params == params => return Ok(t),
                _ => log::warn!("ignoring stale primitive cache {}", path.display()),
            }
        }
        let table = Self::generate(params)?;
        let cache_err = |e: std::io::Error| EnvError::Cache(format!("{}: {e}", path.display()));
        fs::create_dir_all(dir).map_err(cache_err)?;
        fs::write(&path, table.to_json()).map_err(cache_err)?;
        Ok(table)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("table serializes")
    }

    pub fn params(&self) -> &PrimitiveParams {
        &self.params
    }

    pub fn headings(&self) -> usize {
        self.per_heading.len()
    }

    /// Action count: the largest primitive set over all headings.
    pub fn num_actions(&self) -> usize {
        self.per_heading.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn for_heading(&self, heading: usize) -> &[MotionPrimitive] {
        &self.per_heading[heading]
    }

    /// The primitive behind action `a` at `heading`, if valid there.
    pub fn get(&self, heading: usize, a: usize) -> Option<&MotionPrimitive> {
        self.per_heading[heading].get(a)
    }

    pub fn max_swept_cells(&self) -> usize {
        self.per_heading
            .iter()
            .flatten()
            .map(|p| p.cells.len())
            .max()
            .unwrap_or(0)
    }
}

fn primitives_for_heading(params: &PrimitiveParams, heading: usize) -> Vec<MotionPrimitive> {
    let unit = TAU / params.headings as f64;
    let mut out: Vec<MotionPrimitive> = Vec::new();
    for len in 1..=params.max_length {
        for &speed in &params.speeds {
            let mut seq = vec![0usize; len];
            loop {
                let controls: Vec<f64> = seq.iter().map(|&i| params.steering[i]).collect();
                if let Some(p) = rollout(params, heading, unit, speed, controls) {
                    if !out
                        .iter()
                        .any(|q| (q.dx, q.dy, q.dtheta) == (p.dx, p.dy, p.dtheta))
                    {
                        out.push(p);
                    }
                }
                if !advance(&mut seq, params.steering.len()) {
                    break;
                }
            }
        }
    }
    out.truncate(params.max_per_heading);
    out
}

/// Odometer increment; returns false after the last sequence.
fn advance(seq: &mut [usize], base: usize) -> bool {
    for d in seq.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

fn rollout(
    params: &PrimitiveParams,
    heading: usize,
    unit: f64,
    speed: f64,
    controls: Vec<f64>,
) -> Option<MotionPrimitive> {
    let (mut x, mut y, mut th) = (0.0f64, 0.0f64, heading as f64 * unit);
    let dt = 1.0 / params.substeps as f64;
    let mut cells: Vec<(i32, i32)> = Vec::new();
    let mut last = (0, 0);
    for &steer in &controls {
        let yaw_rate = speed * steer.tan() / params.wheelbase;
        for _ in 0..params.substeps {
            let mid = th + 0.5 * yaw_rate * dt;
            x += speed * mid.cos() * dt;
            y += speed * mid.sin() * dt;
            th += yaw_rate * dt;
            let cell = (x.round() as i32, y.round() as i32);
            if cell != last {
                cells.push(cell);
                last = cell;
            }
        }
    }
    let (rx, ry) = (x.round(), y.round());
    let h = th / unit;
    let rh = h.round();
    let snapped = (x - rx).abs() <= params.position_tolerance
        && (y - ry).abs() <= params.position_tolerance
        && (h - rh).abs() * unit <= params.heading_tolerance;
    let (dx, dy) = (rx as i32, ry as i32);
    if !snapped || (dx, dy) == (0, 0) {
        return None;
    }
    // A path may wander back to the origin cell; drop those visits.
    cells.retain(|&c| c != (0, 0));
    let dtheta = (rh as i64 - heading as i64).rem_euclid(params.headings as i64) as u32;
    Some(MotionPrimitive {
        dx,
        dy,
        dtheta,
        cells,
        speed,
        controls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed-form constant-curvature arc, independent of the integrator.
    fn exact_endpoint(p: &MotionPrimitive, heading: f64, wheelbase: f64) -> (f64, f64, f64) {
        let (mut x, mut y, mut th) = (0.0, 0.0, heading);
        for &steer in &p.controls {
            let k = steer.tan() / wheelbase;
            let ds = p.speed;
            if k == 0.0 {
                x += ds * th.cos();
                y += ds * th.sin();
            } else {
                let th1 = th + k * ds;
                x += (th1.sin() - th.sin()) / k;
                y -= (th1.cos() - th.cos()) / k;
                th = th1;
            }
        }
        (x, y, th)
    }

    #[test]
    fn straight_unit_step_is_first_primitive() {
        let table = PrimitiveTable::generate(&PrimitiveParams::default()).unwrap();
        let p = table.get(0, 0).unwrap();
        assert_eq!((p.dx, p.dy, p.dtheta), (1, 0, 0));
        assert_eq!(p.cells, vec![(1, 0)]);
        assert_eq!(p.duration(), 1);
    }

    #[test]
    fn endpoints_snap_to_cell_centers() {
        let params = PrimitiveParams::default();
        let table = PrimitiveTable::generate(&params).unwrap();
        let unit = TAU / params.headings as f64;
        for h in 0..table.headings() {
            assert!(!table.for_heading(h).is_empty());
            for p in table.for_heading(h) {
                let (x, y, th) = exact_endpoint(p, h as f64 * unit, params.wheelbase);
                let slack = 0.02;
                assert!((x - p.dx as f64).abs() <= params.position_tolerance + slack);
                assert!((y - p.dy as f64).abs() <= params.position_tolerance + slack);
                let target = (h as f64 + p.dtheta as f64) * unit;
                let dth = (th - target).rem_euclid(TAU);
                let dth = dth.min(TAU - dth);
                assert!(dth <= params.heading_tolerance + slack, "heading {h} {p:?}");
                assert_eq!(p.cells.last(), Some(&(p.dx, p.dy)));
            }
        }
    }

    #[test]
    fn default_table_has_turning_primitives() {
        let table = PrimitiveTable::generate(&PrimitiveParams::default()).unwrap();
        assert_eq!(table.num_actions(), 20);
        for h in 0..table.headings() {
            assert!(table.for_heading(h).iter().any(|p| p.dtheta != 0));
            let n = table.for_heading(h).len();
            let keys: std::collections::HashSet<_> = table
                .for_heading(h)
                .iter()
                .map(|p| (p.dx, p.dy, p.dtheta))
                .collect();
            assert_eq!(keys.len(), n);
        }
    }

    #[test]
    fn quarter_turns_rotate_the_table() {
        let table = PrimitiveTable::generate(&PrimitiveParams::default()).unwrap();
        let rotate = |(x, y): (i32, i32)| (-y, x);
        for h in 0..6 {
            let a: Vec<_> = table
                .for_heading(h)
                .iter()
                .map(|p| (rotate((p.dx, p.dy)), p.dtheta))
                .collect();
            let b: Vec<_> = table
                .for_heading(h + 2)
                .iter()
                .map(|p| ((p.dx, p.dy), p.dtheta))
                .collect();
            assert_eq!(a, b, "heading {h}");
        }
    }

    #[test]
    fn regeneration_is_byte_identical() {
        let params = PrimitiveParams::default();
        let a = PrimitiveTable::generate(&params).unwrap().to_json();
        let b = PrimitiveTable::generate(&params).unwrap().to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = PrimitiveParams::default();
        p.position_tolerance = 0.0;
        assert!(PrimitiveTable::generate(&p).is_err());
        let mut p = PrimitiveParams::default();
        p.steering.clear();
        assert!(PrimitiveTable::generate(&p).is_err());
        // No rollout lands near a cell center with such tight tolerances.
        let mut p = PrimitiveParams::default();
        p.speeds = vec![0.37];
        p.max_length = 1;
        p.position_tolerance = 1e-6;
        assert!(matches!(
            PrimitiveTable::generate(&p),
            Err(EnvError::BadParam(_))
        ));
    }

    #[test]
    fn digest_tracks_params() {
        let a = PrimitiveParams::default();
        let mut b = a.clone();
        b.wheelbase = 1.1;
        assert_eq!(a.digest(), PrimitiveParams::default().digest());
        assert_ne!(a.digest(), b.digest());
        assert!(PrimitiveTable::cache_file_name(&a).starts_with("primitives-v1-"));
    }
}
